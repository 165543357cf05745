"""Newton and descent solvers for the prescribed-curvature equation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .curvature import NegativityViolation, TargetCurvature
from .diagnostics import DiagnosticsSnapshot, mean_value_split, snapshot
from .functional import (
    SigmaRangeError,
    conformal_area,
    functional_gradient,
    gauss_bonnet_defect,
    newton_matrix,
    residual,
)
from .geometry import BackgroundGeometry, laplacian_apply

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
LINE_SEARCH_FAILURE = "line_search_failure"

LINEAR_RTOL = 1e-12
CG_THRESHOLD = 100_000


class IndefiniteSystemError(np.linalg.LinAlgError):
    """The Newton matrix has a nonpositive pivot."""


@dataclass
class SolverConfig:
    method: str = "newton"
    residual_tol: float = 1e-10
    max_iterations: int | None = None
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    min_step: float = 1e-14
    initial_sigma: object = "zeros"
    damping: float = 1.0
    descent_metric: str = "sobolev"
    record_diagnostics: bool = False

    def __post_init__(self):
        if self.method not in ("newton", "descent"):
            raise ValueError(f"method must be 'newton' or 'descent', got {self.method!r}")
        if self.max_iterations is None:
            self.max_iterations = 100 if self.method == "newton" else 20000
        if not (self.residual_tol > 0):
            raise ValueError("residual_tol must be positive")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not self.min_step > 0:
            raise ValueError("min_step must be positive")
        if not self.damping > 0:
            raise ValueError("damping must be positive")
        if self.descent_metric not in ("sobolev", "euclidean"):
            raise ValueError("descent_metric must be 'sobolev' or 'euclidean'")
        if isinstance(self.initial_sigma, str):
            if self.initial_sigma not in ("zeros", "gauss_bonnet_constant"):
                raise ValueError(f"unknown initial_sigma {self.initial_sigma!r}")
        else:
            self.initial_sigma = np.asarray(self.initial_sigma, dtype=float)


@dataclass
class SolveReport:
    sigma_final: np.ndarray
    status: str
    iterations: int
    trace: list = field(default_factory=list)
    diagnostics_final: DiagnosticsSnapshot | None = None
    diagnostics_trace: list = field(default_factory=list)
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def b_inf(self) -> float:
        return self.trace[-1]["b_inf"]

    @property
    def S(self) -> float:
        return self.trace[-1]["S"]


def initial_sigma(geom: BackgroundGeometry, target: TargetCurvature, choice) -> np.ndarray:
    n = geom.n_vertices
    if isinstance(choice, str):
        if choice == "zeros":
            return np.zeros(n)
        ratio = 2 * math.pi * geom.chi / float(np.dot(target.K, geom.vertex_areas))
        return np.full(n, math.log(ratio)) if ratio > 0 else np.zeros(n)
    return geom.check_length(choice, "initial_sigma").copy()


class SPDFactor:
    """Sparse LDL^T-style factorisation via SuperLU with symmetric pivoting.

    With diagonal pivoting only and a symmetric permutation the LU pivots are
    the pivots of a symmetric elimination, so all of them are positive exactly
    when the matrix is positive definite.
    """

    def __init__(self, matrix):
        self.matrix = sp.csc_matrix(matrix)
        n = self.matrix.shape[0]
        if n > CG_THRESHOLD:
            self.lu = None
            self.precond = sp.diags(1.0 / self.matrix.diagonal())
            return
        self.lu = spla.splu(
            self.matrix,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
        pivots = self.lu.U.diagonal()
        symmetric = np.array_equal(self.lu.perm_r, self.lu.perm_c)
        if not symmetric or np.any(pivots <= 0):
            bad = int(np.argmin(pivots))
            raise IndefiniteSystemError(
                f"Newton matrix is not positive definite (pivot {bad} = {pivots[bad]:.3e})"
            )

    def solve(self, rhs):
        norm = np.linalg.norm(rhs)
        if norm == 0:
            return np.zeros_like(rhs)
        if self.lu is None:
            x, info = spla.cg(self.matrix, rhs, rtol=LINEAR_RTOL * 0.1, M=self.precond, maxiter=10 * len(rhs))
        else:
            x = self.lu.solve(rhs)
            for _ in range(3):
                r = rhs - self.matrix @ x
                if np.linalg.norm(r) <= LINEAR_RTOL * norm:
                    break
                x += self.lu.solve(r)
        rel = np.linalg.norm(rhs - self.matrix @ x) / norm
        if rel > LINEAR_RTOL:
            log.warning("linear solve relative residual %.2e exceeds %.0e", rel, LINEAR_RTOL)
        return x


def _record(geom, target, sigma, b, it, step, cfg, report):
    A = geom.vertex_areas
    lap = laplacian_apply(geom, sigma)
    S = float(np.dot(b * b, A))
    rec = {
        "iteration": it,
        "S": S,
        "b_inf": float(np.max(np.abs(b))),
        "b_l2": math.sqrt(S),
        "step": step,
        "mean_value": mean_value_split(geom, sigma)[0],
        "laplacian_energy": float(np.dot(lap * lap, A)),
        "gauss_bonnet_defect": gauss_bonnet_defect(geom, sigma),
    }
    report.trace.append(rec)
    if cfg.record_diagnostics:
        report.diagnostics_trace.append(snapshot(geom, target, sigma))
    return rec


def _finish(geom, target, sigma, report, status, message=""):
    report.sigma_final = sigma
    report.status = status
    report.message = message
    report.diagnostics_final = snapshot(geom, target, sigma)
    log.info("%s after %d iterations: |b|_inf=%.3e", status, report.iterations, report.b_inf)
    return report


def _line_search(geom, target, sigma, direction, merit0, slope, t, cfg, merit):
    """Backtrack from ``t`` until ``merit(sigma + t d) <= merit0 + c t slope``."""
    while t >= cfg.min_step:
        trial = sigma + t * direction
        try:
            b = residual(geom, target, trial)
        except SigmaRangeError:
            t *= cfg.backtrack_factor
            continue
        with np.errstate(over="ignore"):
            value = merit(b)
        if value <= merit0 + cfg.armijo_c * t * slope:
            return t, trial, b
        t *= cfg.backtrack_factor
    return None, None, None


def _check_target(target):
    bad = np.flatnonzero(target.K >= 0)
    if bad.size:
        raise NegativityViolation(bad, target.K[bad])


def newton_solve(geom: BackgroundGeometry, target: TargetCurvature, config: SolverConfig | None = None) -> SolveReport:
    """Damped Newton on ``b(sigma) = 0`` with merit ``S/2``.

    Each step solves ``(L/2 + diag(-K e^sigma A)) delta = -(A * b)``; along
    ``delta`` the merit has slope ``-S``, so Armijo backtracking always
    terminates for a positive definite system.
    """
    cfg = config or SolverConfig()
    _check_target(target)
    A = geom.vertex_areas
    sigma = initial_sigma(geom, target, cfg.initial_sigma)
    b = residual(geom, target, sigma)
    report = SolveReport(sigma, MAX_ITERATIONS, 0)
    rec = _record(geom, target, sigma, b, 0, 0.0, cfg, report)
    half_s = lambda r: 0.5 * float(np.dot(r * r, A))  # noqa: E731

    for it in range(1, cfg.max_iterations + 1):
        if rec["b_inf"] <= cfg.residual_tol:
            return _finish(geom, target, sigma, report, CONVERGED)
        factor = SPDFactor(newton_matrix(geom, target, sigma))
        delta = factor.solve(-(A * b))
        S = rec["S"]
        t, trial, b_new = _line_search(geom, target, sigma, delta, 0.5 * S, -S, cfg.damping, cfg, half_s)
        if t is None:
            return _finish(
                geom, target, sigma, report, LINE_SEARCH_FAILURE,
                f"no acceptable step above {cfg.min_step:g} at iteration {it}",
            )
        sigma, b = trial, b_new
        report.iterations = it
        rec = _record(geom, target, sigma, b, it, t, cfg, report)

    if rec["b_inf"] <= cfg.residual_tol:
        return _finish(geom, target, sigma, report, CONVERGED)
    return _finish(geom, target, sigma, report, MAX_ITERATIONS, f"|b|_inf = {rec['b_inf']:.3e} after {cfg.max_iterations} iterations")


def descent_minimize(geom: BackgroundGeometry, target: TargetCurvature, config: SolverConfig | None = None) -> SolveReport:
    """Steepest descent on ``S`` with Armijo backtracking.

    The default ``sobolev`` metric measures steps with the fixed operator
    ``P = 2 M A^-1 M``, ``M = L/2 + c A`` (an H^2-type inner product, ``c``
    the total ``|K| e^sigma`` a solution must have); the ``euclidean`` metric uses the raw
    gradient and is only practical on very small meshes.
    """
    cfg = config or SolverConfig(method="descent")
    _check_target(target)
    A = geom.vertex_areas
    sigma = initial_sigma(geom, target, cfg.initial_sigma)
    b = residual(geom, target, sigma)
    report = SolveReport(sigma, MAX_ITERATIONS, 0)
    rec = _record(geom, target, sigma, b, 0, 0.0, cfg, report)
    merit = lambda r: float(np.dot(r * r, A))  # noqa: E731

    if cfg.descent_metric == "sobolev":
        # at a solution sum |K| e^sigma A = -2 pi chi (Gauss-Bonnet)
        c = -2 * math.pi * geom.chi if geom.chi < 0 else float(np.dot(-target.K * np.exp(sigma), A))
        M = SPDFactor(0.5 * geom.stiffness + sp.diags(c * A))

        def direction(grad):
            return -0.5 * M.solve(A * M.solve(grad))
    else:

        def direction(grad):
            return -grad

    t_prev = cfg.damping
    for it in range(1, cfg.max_iterations + 1):
        if rec["b_inf"] <= cfg.residual_tol:
            return _finish(geom, target, sigma, report, CONVERGED)
        grad = functional_gradient(geom, target, sigma)
        d = direction(grad)
        slope = float(np.dot(grad, d))
        if not slope < 0:
            return _finish(geom, target, sigma, report, LINE_SEARCH_FAILURE, "search direction is not a descent direction")
        t0 = min(cfg.damping, 2.0 * t_prev)
        t, trial, b_new = _line_search(geom, target, sigma, d, rec["S"], slope, t0, cfg, merit)
        if t is None:
            return _finish(
                geom, target, sigma, report, LINE_SEARCH_FAILURE,
                f"no acceptable step above {cfg.min_step:g} at iteration {it}",
            )
        t_prev = t
        sigma, b = trial, b_new
        report.iterations = it
        rec = _record(geom, target, sigma, b, it, t, cfg, report)

    if rec["b_inf"] <= cfg.residual_tol:
        return _finish(geom, target, sigma, report, CONVERGED)
    return _finish(geom, target, sigma, report, MAX_ITERATIONS, f"|b|_inf = {rec['b_inf']:.3e} after {cfg.max_iterations} iterations")


def solve(geom: BackgroundGeometry, target: TargetCurvature, config: SolverConfig | None = None) -> SolveReport:
    cfg = config or SolverConfig()
    if cfg.method == "newton":
        return newton_solve(geom, target, cfg)
    return descent_minimize(geom, target, cfg)


def run_summary(geom: BackgroundGeometry, target: TargetCurvature, report: SolveReport) -> dict:
    sigma = report.sigma_final
    area = conformal_area(geom, sigma)
    out = {
        "status": report.status,
        "iterations": report.iterations,
        "b_inf": report.b_inf,
        "S": report.S,
        "conformal_area": area,
        "gauss_bonnet_defect": gauss_bonnet_defect(geom, sigma),
    }
    if target.is_constant:
        expected = 2 * math.pi * geom.chi / float(target.K[0])
        out["uniformization_expected_area"] = expected
        # relative error, absolute when the expected area is zero (torus)
        out["uniformization_check"] = abs(area - expected) / (abs(expected) or 1.0)
    if report.message:
        out["message"] = report.message
    return out
