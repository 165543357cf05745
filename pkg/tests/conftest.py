import math

import numpy as np
import pytest

from confcurv.geometry import build_geometry
from confcurv.mesh import TriangleMesh, generate_genus_g


def tetrahedron(edge=1.0):
    """Regular tetrahedron with the given edge length, outward oriented."""
    p = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    p *= edge / (2 * math.sqrt(2))
    f = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return TriangleMesh(p, f)


def torus_grid(nu=4, nv=4, R=2.0, r=1.0):
    """Torus of revolution sampled on a uniform (u, v) grid, two triangles per cell."""
    u = 2 * np.pi * np.arange(nu) / nu
    v = 2 * np.pi * np.arange(nv) / nv
    U, Vv = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack(
        [((R + r * np.cos(Vv)) * np.cos(U)).ravel(), ((R + r * np.cos(Vv)) * np.sin(U)).ravel(), (r * np.sin(Vv)).ravel()]
    )
    idx = lambda i, j: (i % nu) * nv + (j % nv)  # noqa: E731
    faces = []
    for i in range(nu):
        for j in range(nv):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            faces += [(a, b, c), (a, c, d)]
    return TriangleMesh(pts, np.array(faces))


def write_obj(path, verts, faces):
    lines = ["v {:.17g} {:.17g} {:.17g}".format(*p) for p in verts]
    lines += ["f {} {} {}".format(*(np.asarray(f) + 1)) for f in faces]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def tet():
    return tetrahedron()


@pytest.fixture(scope="session")
def g2_small():
    """Genus-2 plate with V <= 100."""
    return generate_genus_g(2, 2)


@pytest.fixture(scope="session")
def g2_small_geom(g2_small):
    return build_geometry(g2_small)


@pytest.fixture(scope="session")
def g2_delaunay():
    """Genus-2 plate with V <= 200 and nonnegative cotangent weights."""
    return generate_genus_g(2, 4)


@pytest.fixture(scope="session")
def g2_delaunay_geom(g2_delaunay):
    return build_geometry(g2_delaunay)


@pytest.fixture(scope="session")
def g2_mesh():
    return generate_genus_g(2, 8)


@pytest.fixture(scope="session")
def g2_geom(g2_mesh):
    return build_geometry(g2_mesh)


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)
