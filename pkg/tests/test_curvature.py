import numpy as np
import pytest

from confcurv.curvature import (
    NegativityViolation,
    TargetCurvature,
    constant_curvature,
    evaluate_on_mesh,
    from_values,
    load_curvature_csv,
)
from confcurv.expression import EvaluationError, ExpressionSyntaxError

from test_geometry import _interior_top


def test_constant_target_has_zero_ratio(g2_small_geom):
    target = evaluate_on_mesh("-1", g2_small_geom)
    np.testing.assert_array_equal(target.K, -1.0)
    np.testing.assert_array_equal(target.grad_ratio, 0.0)
    assert target.is_constant


def test_positive_target_lists_every_vertex(g2_small_geom):
    with pytest.raises(NegativityViolation, match="K<0") as info:
        evaluate_on_mesh("1", g2_small_geom)
    np.testing.assert_array_equal(info.value.vertices, np.arange(g2_small_geom.n_vertices))


def test_zero_is_a_violation(g2_small_geom):
    K = np.full(g2_small_geom.n_vertices, -1.0)
    K[[3, 7]] = 0.0
    with pytest.raises(NegativityViolation) as info:
        from_values(g2_small_geom, K)
    assert info.value.vertices.tolist() == [3, 7]


def test_exponential_target_ratio(g2_mesh, g2_geom):
    # |grad(-e^x)| / (2 e^x) = |grad x| / 2 = 1/2 where the surface is the flat top
    target = evaluate_on_mesh("-exp(x)", g2_geom)
    interior = _interior_top(g2_mesh)
    np.testing.assert_allclose(target.grad_ratio[interior], 0.5, rtol=0.02)


def test_evaluation_errors(g2_small_geom):
    with pytest.raises(ExpressionSyntaxError):
        evaluate_on_mesh("-(1+", g2_small_geom)
    with pytest.raises(EvaluationError, match="vertex"):
        evaluate_on_mesh("-sqrt(x)", g2_small_geom)


@pytest.mark.parametrize("value", [0.0, 0.5])
def test_constant_curvature_rejects_nonnegative(value):
    with pytest.raises(NegativityViolation):
        constant_curvature(value, 5)


def test_constant_curvature():
    t = constant_curvature(-2.0, 4)
    assert len(t) == 4 and t.is_constant
    with pytest.raises(ValueError):
        t.K[0] = 1.0


def test_target_rejects_nan():
    with pytest.raises(ValueError):
        TargetCurvature(np.array([-1.0, np.nan]), np.zeros(2))


def _write_csv(path, rows, header=True):
    lines = ["vertex_index,K"] if header else []
    lines += [f"{i},{float(k)!r}" for i, k in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.mark.parametrize("header", [True, False])
def test_csv_loader(tmp_path, g2_small_geom, rng, header):
    n = g2_small_geom.n_vertices
    K = -rng.uniform(0.5, 2.0, n)
    order = rng.permutation(n)
    t = load_curvature_csv(_write_csv(tmp_path / "k.csv", [(i, K[i]) for i in order], header), g2_small_geom)
    np.testing.assert_array_equal(t.K, K)


def test_csv_loader_errors(tmp_path, g2_small_geom):
    n = g2_small_geom.n_vertices
    with pytest.raises(ValueError, match="missing"):
        load_curvature_csv(_write_csv(tmp_path / "a.csv", [(i, -1.0) for i in range(n - 1)]), g2_small_geom)
    with pytest.raises(ValueError, match="twice"):
        load_curvature_csv(_write_csv(tmp_path / "b.csv", [(0, -1.0)] * 2), g2_small_geom)
    with pytest.raises(ValueError, match="out of range"):
        load_curvature_csv(_write_csv(tmp_path / "c.csv", [(n, -1.0)]), g2_small_geom)
    with pytest.raises(NegativityViolation):
        rows = [(i, -1.0) for i in range(n)]
        rows[5] = (5, 2.0)
        load_curvature_csv(_write_csv(tmp_path / "d.csv", rows), g2_small_geom)
