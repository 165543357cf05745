"""Curvature transform, Euler-Lagrange residual and the least-squares curvature functional.

For a conformal factor ``sigma`` the metric ``e^sigma h`` has curvature

    K(sigma) = e^-sigma (K0 - Delta sigma / 2)

and the residual of the prescribed-curvature equation is

    b = K0 - Delta sigma / 2 - K e^sigma = (K(sigma) - K) e^sigma.

The functional is ``S = sum_i b_i^2 A_i``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .curvature import TargetCurvature
from .geometry import BackgroundGeometry, laplacian_apply

SIGMA_MAX = 700.0


class SigmaRangeError(OverflowError):
    """``e^sigma`` would overflow double precision."""

    def __init__(self, vertex, value):
        super().__init__(f"sigma[{vertex}] = {value:.6g} exceeds {SIGMA_MAX:g}; exp(sigma) overflows")
        self.vertex = vertex
        self.value = value


def _check(geom, target, sigma):
    sigma = geom.check_length(sigma, "sigma")
    if target is not None and len(target) != geom.n_vertices:
        raise ValueError(f"target has {len(target)} entries, expected {geom.n_vertices}")
    if not np.all(np.isfinite(sigma)):
        raise ValueError("sigma must be finite")
    over = np.flatnonzero(sigma > SIGMA_MAX)
    if over.size:
        raise SigmaRangeError(int(over[0]), float(sigma[over[0]]))
    return sigma


def curvature_of(geom: BackgroundGeometry, sigma) -> np.ndarray:
    sigma = _check(geom, None, sigma)
    return np.exp(-sigma) * (geom.K0 - 0.5 * laplacian_apply(geom, sigma))


def residual(geom: BackgroundGeometry, target: TargetCurvature, sigma) -> np.ndarray:
    sigma = _check(geom, target, sigma)
    return geom.K0 - 0.5 * laplacian_apply(geom, sigma) - target.K * np.exp(sigma)


def functional_value(geom: BackgroundGeometry, target: TargetCurvature, sigma) -> float:
    b = residual(geom, target, sigma)
    return float(np.dot(b * b, geom.vertex_areas))


def functional_gradient(geom: BackgroundGeometry, target: TargetCurvature, sigma) -> np.ndarray:
    """Euclidean gradient of ``S``: ``dS(sigma + t beta)/dt = grad . beta``.

    ``A * b`` is affine in sigma with symmetric Jacobian ``J`` (see
    :func:`newton_matrix`), and ``dS = 2 b^T J dsigma``, so ``grad = 2 J b``.
    """
    sigma = _check(geom, target, sigma)
    b = residual(geom, target, sigma)
    return geom.stiffness @ b - 2.0 * target.K * np.exp(sigma) * geom.vertex_areas * b


def newton_matrix(geom: BackgroundGeometry, target: TargetCurvature, sigma) -> sp.csc_matrix:
    """Jacobian of ``A * b`` with respect to sigma: ``L/2 + diag(-K e^sigma A)``.

    Symmetric positive definite whenever ``K < 0`` and the cotangent weights
    are nonnegative.
    """
    sigma = _check(geom, target, sigma)
    diag = -target.K * np.exp(sigma) * geom.vertex_areas
    return (0.5 * geom.stiffness + sp.diags(diag)).tocsc()


def gauss_bonnet_defect(geom: BackgroundGeometry, sigma) -> float:
    """``sum K(sigma) e^sigma A - 2 pi chi``; zero for every sigma up to roundoff."""
    sigma = _check(geom, None, sigma)
    total = np.sum(curvature_of(geom, sigma) * np.exp(sigma) * geom.vertex_areas)
    return float(total - 2 * np.pi * geom.chi)


def conformal_area(geom: BackgroundGeometry, sigma) -> float:
    return float(np.dot(np.exp(sigma), geom.vertex_areas))
