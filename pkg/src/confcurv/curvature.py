"""Target curvature fields sampled at mesh vertices."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .expression import EvaluationError, Node, parse_expression
from .geometry import BackgroundGeometry, vertex_mean_square_gradient

HYPOTHESIS = "K<0"


class NegativityViolation(ValueError):
    """The target curvature is not strictly negative at some vertices."""

    def __init__(self, vertices, values=None):
        self.vertices = np.asarray(vertices, dtype=np.int64)
        self.values = None if values is None else np.asarray(values)
        shown = ", ".join(str(v) for v in self.vertices[:10])
        more = "" if len(self.vertices) <= 10 else f", ... ({len(self.vertices)} total)"
        super().__init__(
            f"target curvature violates the hypothesis {HYPOTHESIS} at vertices [{shown}{more}]"
        )


@dataclass(frozen=True, eq=False)
class TargetCurvature:
    K: np.ndarray
    grad_ratio: np.ndarray

    def __post_init__(self):
        K = np.array(self.K, dtype=float)
        if not np.all(np.isfinite(K)):
            raise ValueError("target curvature must be finite")
        bad = np.flatnonzero(K >= 0)
        if bad.size:
            raise NegativityViolation(bad, K[bad])
        ratio = np.array(self.grad_ratio, dtype=float)
        if ratio.shape != K.shape:
            raise ValueError("grad_ratio must match K in length")
        for arr in (K, ratio):
            arr.setflags(write=False)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "grad_ratio", ratio)

    def __len__(self):
        return len(self.K)

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.K == self.K[0]))


def gradient_ratio(geom: BackgroundGeometry, K) -> np.ndarray:
    """Vertexwise ``|grad K| / (2|K|)`` from the piecewise-linear gradient of ``K``."""
    K = geom.check_length(K, "K")
    if np.all(K == K[0]):
        return np.zeros_like(K)
    return 0.5 * np.sqrt(vertex_mean_square_gradient(geom, K)) / np.abs(K)


def from_values(geom: BackgroundGeometry, K) -> TargetCurvature:
    K = geom.check_length(K, "K")
    bad = np.flatnonzero(~(K < 0))
    if bad.size:
        raise NegativityViolation(bad, K[bad])
    return TargetCurvature(K, gradient_ratio(geom, K))


def evaluate_on_mesh(expr, geom: BackgroundGeometry) -> TargetCurvature:
    """Sample ``expr`` (tree or text) at the vertex positions of ``geom.mesh``."""
    if not isinstance(expr, Node):
        expr = parse_expression(expr)
    p = geom.mesh.vertices
    try:
        K = expr(p[:, 0], p[:, 1], p[:, 2])
    except EvaluationError as exc:
        raise EvaluationError(f"{exc} (vertex {exc.index})", index=exc.index) from None
    bad = np.flatnonzero(~np.isfinite(K))
    if bad.size:
        raise EvaluationError(f"non-finite curvature at vertex {bad[0]}", index=int(bad[0]))
    return from_values(geom, K)


def constant_curvature(value: float, n_vertices: int) -> TargetCurvature:
    if not value < 0:
        raise NegativityViolation(np.arange(n_vertices), np.full(n_vertices, value))
    return TargetCurvature(np.full(n_vertices, float(value)), np.zeros(n_vertices))


def load_curvature_csv(path, geom: BackgroundGeometry) -> TargetCurvature:
    """Read ``vertex_index,K`` rows (header optional); every vertex must appear once."""
    n = geom.n_vertices
    values = np.full(n, np.nan)
    seen = np.zeros(n, dtype=bool)
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if lineno == 1 and row[0].strip() == "vertex_index":
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'vertex_index,K'")
            i, k = int(row[0]), float(row[1])
            if not 0 <= i < n:
                raise ValueError(f"{path}:{lineno}: vertex index {i} out of range")
            if seen[i]:
                raise ValueError(f"{path}:{lineno}: vertex {i} listed twice")
            seen[i] = True
            values[i] = k
    if not seen.all():
        raise ValueError(f"{path}: missing rows for {np.count_nonzero(~seen)} vertices (first {np.argmin(seen)})")
    return from_values(geom, values)
