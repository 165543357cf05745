"""Discrete Riemannian background on a triangle mesh.

Conventions: ``stiffness`` is the positive semidefinite cotangent matrix ``L``
and the Laplace-Beltrami operator is ``Delta = -L / A`` (negative
semidefinite, like the smooth operator). Vertex areas are barycentric and
rescaled so the surface has unit area; lengths in the unit-area metric are the
raw mesh lengths divided by ``sqrt(total_area_raw)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import MeshError, TriangleMesh, euler_characteristic

log = logging.getLogger(__name__)

OBTUSE_WARN = math.pi - 1e-9


class DegenerateTriangleError(MeshError):
    def __init__(self, message, face=None):
        super().__init__(message)
        self.face = face


@dataclass(frozen=True, eq=False)
class BackgroundGeometry:
    mesh: TriangleMesh
    edge_lengths: np.ndarray
    cot_weights: np.ndarray
    stiffness: sp.csr_matrix
    vertex_areas: np.ndarray
    K0: np.ndarray
    chi: int
    total_area_raw: float
    angle_defects: np.ndarray
    corner_angles: np.ndarray
    face_areas_raw: np.ndarray
    near_flat_faces: tuple = ()

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_areas)

    @property
    def genus(self) -> int:
        return (2 - self.chi) // 2

    def check_length(self, field, name="field") -> np.ndarray:
        field = np.asarray(field, dtype=float)
        if field.shape != (self.n_vertices,):
            raise ValueError(f"{name} has shape {field.shape}, expected ({self.n_vertices},)")
        return field


def _corner_angles(p):
    """Interior angles (F, 3) at the corners of triangles ``p`` of shape (F, 3, 3)."""
    angles = np.empty(p.shape[:2])
    cots = np.empty(p.shape[:2])
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        v = p[:, (k + 2) % 3] - p[:, k]
        cross = np.linalg.norm(np.cross(u, v), axis=1)
        dot = np.einsum("ij,ij->i", u, v)
        angles[:, k] = np.arctan2(cross, dot)
        cots[:, k] = dot / cross
    return angles, cots


def build_geometry(mesh: TriangleMesh) -> BackgroundGeometry:
    nv = mesh.n_vertices
    f = mesh.faces
    p = mesh.vertices[f]
    face_area = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    if (face_area <= 0).any():
        i = int(np.argmin(face_area))
        raise DegenerateTriangleError(f"face {i} has zero area", face=i)
    e = mesh.edges
    lengths = np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)
    for k in range(3):
        a = np.linalg.norm(p[:, (k + 1) % 3] - p[:, k], axis=1)
        b = np.linalg.norm(p[:, (k + 2) % 3] - p[:, (k + 1) % 3], axis=1)
        c = np.linalg.norm(p[:, k] - p[:, (k + 2) % 3], axis=1)
        if not (a < b + c).all():
            i = int(np.flatnonzero(~(a < b + c))[0])
            raise DegenerateTriangleError(f"face {i} violates the triangle inequality", face=i)

    angles, cots = _corner_angles(p)
    near_flat = tuple(int(i) for i in np.flatnonzero((angles >= OBTUSE_WARN).any(axis=1)))
    if near_flat:
        log.warning("%d faces have an angle within 1e-9 of pi (first: face %d)", len(near_flat), near_flat[0])

    # corner k is opposite the edge (f[k+1], f[k+2]) == face_edges[:, k+1]
    fe = mesh.face_edges
    w = np.zeros(len(e))
    for k in range(3):
        np.add.at(w, fe[:, (k + 1) % 3], 0.5 * cots[:, k])

    i, j = e[:, 0], e[:, 1]
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([j, i, i, j])
    vals = np.concatenate([-w, -w, w, w])
    L = sp.csr_matrix((vals, (rows, cols)), shape=(nv, nv))
    L.sum_duplicates()

    total = float(face_area.sum())
    areas_raw = np.zeros(nv)
    np.add.at(areas_raw, f.reshape(-1), np.repeat(face_area / 3.0, 3))
    areas = areas_raw / total

    angle_sum = np.zeros(nv)
    np.add.at(angle_sum, f.reshape(-1), angles.reshape(-1))
    defects = 2 * math.pi - angle_sum

    return BackgroundGeometry(
        mesh=mesh,
        edge_lengths=lengths,
        cot_weights=w,
        stiffness=L,
        vertex_areas=areas,
        K0=defects / areas,
        chi=euler_characteristic(mesh),
        total_area_raw=total,
        angle_defects=defects,
        corner_angles=angles,
        face_areas_raw=face_area,
        near_flat_faces=near_flat,
    )


def laplacian_apply(geom: BackgroundGeometry, field) -> np.ndarray:
    """Discrete Laplace-Beltrami ``-(L f) / A`` (non-positive spectrum)."""
    field = geom.check_length(field)
    return -(geom.stiffness @ field) / geom.vertex_areas


def face_gradients(geom: BackgroundGeometry, field) -> np.ndarray:
    """Gradient (F, 3) of the piecewise-linear interpolant, in raw mesh coordinates."""
    field = geom.check_length(field)
    mesh = geom.mesh
    p = mesh.vertices[mesh.faces]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    twice_area = np.linalg.norm(n, axis=1)
    n /= twice_area[:, None]
    vals = field[mesh.faces]
    # differences against corner 0 make constants give exactly zero
    d1 = (vals[:, 1] - vals[:, 0])[:, None]
    d2 = (vals[:, 2] - vals[:, 0])[:, None]
    grad = d1 * np.cross(n, p[:, 0] - p[:, 2]) + d2 * np.cross(n, p[:, 1] - p[:, 0])
    return grad / twice_area[:, None]


def vertex_mean_square_gradient(geom: BackgroundGeometry, field) -> np.ndarray:
    """Area-weighted vertex average of ``|grad f|^2``, measured in the unit-area metric."""
    g2 = np.einsum("ij,ij->i", *(face_gradients(geom, field),) * 2)
    f = geom.mesh.faces
    num = np.zeros(geom.n_vertices)
    den = np.zeros(geom.n_vertices)
    fa = geom.face_areas_raw
    np.add.at(num, f.reshape(-1), np.repeat(fa * g2, 3))
    np.add.at(den, f.reshape(-1), np.repeat(fa, 3))
    return num / den * geom.total_area_raw


def dirichlet_gradient_density(geom: BackgroundGeometry, field) -> np.ndarray:
    """Per-vertex ``|d_z f|^2 = |grad f|^2 / 4``.

    Summed against the vertex areas this reproduces ``f^T L f / 4`` exactly,
    since each face contributes a third of its area to each corner.
    """
    return 0.25 * vertex_mean_square_gradient(geom, field)


def conformal_background(geom: BackgroundGeometry, sigma) -> BackgroundGeometry:
    """Background for the metric ``e^sigma h``, renormalised to unit area.

    Areas become ``e^sigma A / T`` with ``T = sum(e^sigma A)`` and the
    curvature becomes ``T * K(sigma)``; the stiffness is conformally invariant
    and carried over. Solving on the result for ``sigma'`` is equivalent to
    solving on ``geom`` for ``sigma + sigma' - log T``. Gradient densities on
    the result are still measured with the embedding of ``geom.mesh``.
    """
    sigma = geom.check_length(sigma, "sigma")
    weighted = np.exp(sigma) * geom.vertex_areas
    total = float(weighted.sum())
    curv = np.exp(-sigma) * (geom.K0 - 0.5 * laplacian_apply(geom, sigma))
    return BackgroundGeometry(
        mesh=geom.mesh,
        edge_lengths=geom.edge_lengths,
        cot_weights=geom.cot_weights,
        stiffness=geom.stiffness,
        vertex_areas=weighted / total,
        K0=curv * total,
        chi=geom.chi,
        total_area_raw=geom.total_area_raw,
        angle_defects=curv * weighted,
        corner_angles=geom.corner_angles,
        face_areas_raw=geom.face_areas_raw,
        near_flat_faces=geom.near_flat_faces,
    )
