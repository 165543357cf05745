"""Closed oriented triangle meshes: validation, OBJ I/O, genus-g generator, subdivision."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Base class for mesh construction failures."""


class MeshParseError(MeshError):
    """Malformed OBJ input."""

    def __init__(self, message, line=None, face=None):
        super().__init__(message)
        self.line = line
        self.face = face


class MeshTopologyError(MeshError):
    """The faces do not describe a closed, oriented 2-manifold."""

    def __init__(self, message, kind=None, element=None):
        super().__init__(message)
        self.kind = kind
        self.element = element


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Closed oriented triangle mesh.

    ``vertices`` is a (V, 3) float array and ``faces`` a (F, 3) int array of
    0-based indices. Construction validates the manifold invariants, so every
    instance in circulation is a valid closed surface. The arrays are made
    read-only.
    """

    vertices: np.ndarray
    faces: np.ndarray
    edges: np.ndarray = field(init=False, repr=False)
    face_edges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float)
        faces = np.array(self.faces, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise MeshError("vertices must have shape (V, 3)")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise MeshError("faces must have shape (F, 3)")
        if not np.all(np.isfinite(verts)):
            raise MeshError("vertex coordinates must be finite")
        edges, face_edges = _validate(verts, faces)
        for arr in (verts, faces, edges, face_edges):
            arr.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "face_edges", face_edges)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def face_areas(self) -> np.ndarray:
        p = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    def __repr__(self):
        return f"TriangleMesh(V={self.n_vertices}, E={self.n_edges}, F={self.n_faces})"


def _validate(verts, faces):
    nv = len(verts)
    nf = len(faces)
    if nf == 0:
        raise MeshTopologyError("mesh has no faces", kind="empty")
    bad = np.flatnonzero((faces < 0).any(axis=1) | (faces >= nv).any(axis=1))
    if bad.size:
        raise MeshTopologyError(
            f"face {bad[0]} references a vertex outside [0, {nv})", kind="index", element=int(bad[0])
        )
    rep = np.flatnonzero(
        (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
    )
    if rep.size:
        raise MeshTopologyError(
            f"face {rep[0]} repeats a vertex index", kind="repeated_vertex", element=int(rep[0])
        )
    sorted_faces = np.sort(faces, axis=1)
    _, first, counts = np.unique(sorted_faces, axis=0, return_index=True, return_counts=True)
    if (counts > 1).any():
        dup_key = sorted_faces[first[np.argmax(counts > 1)]]
        dups = np.flatnonzero((sorted_faces == dup_key).all(axis=1))
        raise MeshTopologyError(
            f"faces {dups[0]} and {dups[1]} share the same vertex set",
            kind="duplicate_face",
            element=int(dups[1]),
        )

    # directed half-edges (a -> b) for face corners 0->1, 1->2, 2->0
    heads = faces.reshape(-1)
    tails = faces[:, [1, 2, 0]].reshape(-1)
    directed = heads * nv + tails
    order = np.argsort(directed, kind="stable")
    ds = directed[order]
    repeated = np.flatnonzero(ds[1:] == ds[:-1])
    if repeated.size:
        he = order[repeated[0] + 1]
        a, b = heads[he], tails[he]
        # an edge used twice in the same direction is either an orientation
        # flip between neighbours or a non-manifold fan
        und_count = np.count_nonzero(
            ((heads == a) & (tails == b)) | ((heads == b) & (tails == a))
        )
        if und_count > 2:
            raise MeshTopologyError(
                f"edge ({a}, {b}) is shared by {und_count} faces (non-manifold)",
                kind="non_manifold",
                element=int(he // 3),
            )
        raise MeshTopologyError(
            f"face {he // 3} is oriented inconsistently with its neighbour across edge ({a}, {b})",
            kind="orientation",
            element=int(he // 3),
        )
    lo = np.minimum(heads, tails)
    hi = np.maximum(heads, tails)
    undirected = lo * nv + hi
    uniq, inverse, counts = np.unique(undirected, return_inverse=True, return_counts=True)
    if (counts == 1).any():
        e = int(np.argmax(counts == 1))
        he = int(np.flatnonzero(inverse == e)[0])
        raise MeshTopologyError(
            f"edge ({lo[he]}, {hi[he]}) of face {he // 3} is a boundary edge (mesh is not closed)",
            kind="boundary",
            element=int(he // 3),
        )
    if (counts > 2).any():
        e = int(np.argmax(counts > 2))
        he = int(np.flatnonzero(inverse == e)[0])
        raise MeshTopologyError(
            f"edge ({lo[he]}, {hi[he]}) is shared by {counts[e]} faces (non-manifold)",
            kind="non_manifold",
            element=int(he // 3),
        )
    used = np.zeros(nv, dtype=bool)
    used[faces.reshape(-1)] = True
    if not used.all():
        v = int(np.argmin(used))
        raise MeshTopologyError(f"vertex {v} is not referenced by any face", kind="isolated_vertex", element=v)

    p = verts[faces]
    areas = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    scale = max(float(np.ptp(verts, axis=0).max()), 1e-300)
    degenerate = np.flatnonzero(areas <= 1e-14 * scale * scale)
    if degenerate.size:
        raise MeshTopologyError(
            f"face {degenerate[0]} has zero area", kind="degenerate", element=int(degenerate[0])
        )

    edges = np.column_stack([uniq // nv, uniq % nv])
    face_edges = inverse.reshape(nf, 3)
    chi = nv - len(edges) + nf
    if chi % 2:
        raise MeshTopologyError(f"Euler characteristic {chi} is odd", kind="euler")
    return edges, face_edges


def euler_characteristic(mesh: TriangleMesh) -> int:
    return mesh.n_vertices - mesh.n_edges + mesh.n_faces


def genus(mesh: TriangleMesh) -> int:
    chi = euler_characteristic(mesh)
    if chi % 2:
        raise MeshTopologyError(f"Euler characteristic {chi} is odd", kind="euler")
    g = (2 - chi) // 2
    if g < 0:
        raise MeshTopologyError(
            f"Euler characteristic {chi} gives negative genus (disconnected surface?)", kind="euler"
        )
    return g


def is_connected(mesh: TriangleMesh) -> bool:
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    n = mesh.n_vertices
    e = mesh.edges
    adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    ncomp, _ = connected_components(adj, directed=False)
    return ncomp == 1


# -- OBJ ---------------------------------------------------------------------


def load_obj(path) -> TriangleMesh:
    """Read the ``v``/``f`` subset of Wavefront OBJ.

    Face tokens may carry ``/vt/vn`` suffixes, which are ignored; indices are
    1-based as in the format (negative relative indices are not supported).
    """
    mesh, _ = load_obj_with_scalar(path)
    return mesh


def load_obj_with_scalar(path):
    """Like :func:`load_obj` but also returns the ``# vs`` per-vertex scalar, or None."""
    verts = []
    faces = []
    face_lines = []
    scalar = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 3 and parts[0] == "vs":
                    try:
                        scalar[int(parts[1])] = float(parts[2])
                    except ValueError:
                        raise MeshParseError(f"line {lineno}: malformed scalar record", line=lineno)
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MeshParseError(f"line {lineno}: vertex record needs 3 coordinates", line=lineno)
                try:
                    verts.append([float(t) for t in parts[1:4]])
                except ValueError:
                    raise MeshParseError(f"line {lineno}: bad vertex coordinate", line=lineno)
            elif tag == "f":
                fidx = len(faces)
                if len(parts) != 4:
                    raise MeshParseError(
                        f"line {lineno}: face {fidx} has {len(parts) - 1} vertices, expected 3",
                        line=lineno,
                        face=fidx,
                    )
                try:
                    faces.append([int(t.split("/")[0]) for t in parts[1:]])
                except ValueError:
                    raise MeshParseError(f"line {lineno}: face {fidx} has a bad index", line=lineno, face=fidx)
                face_lines.append(lineno)
            # other record types (vt, vn, o, g, s, usemtl...) are skipped
    if not faces:
        raise MeshParseError("no face records found")
    nv = len(verts)
    f = np.array(faces, dtype=np.int64)
    bad = np.flatnonzero((f < 1).any(axis=1) | (f > nv).any(axis=1))
    if bad.size:
        i = int(bad[0])
        raise MeshParseError(
            f"line {face_lines[i]}: face {i} references a vertex outside 1..{nv}",
            line=face_lines[i],
            face=i,
        )
    mesh = TriangleMesh(np.array(verts, dtype=float), f - 1)
    if scalar:
        if sorted(scalar) != list(range(nv)):
            raise MeshParseError(f"scalar records must cover vertices 0..{nv - 1} exactly once")
        scalar = np.array([scalar[i] for i in range(nv)])
    else:
        scalar = None
    return mesh, scalar


def save_obj(mesh: TriangleMesh, path, scalar=None) -> None:
    """Write ``mesh`` as OBJ with 17 significant digits.

    A per-vertex ``scalar`` is stored as ``# vs <index> <value>`` comment lines
    (0-based index), which other OBJ readers ignore.
    """
    if scalar is not None:
        scalar = np.asarray(scalar, dtype=float)
        if scalar.shape != (mesh.n_vertices,):
            raise ValueError(f"scalar has shape {scalar.shape}, expected ({mesh.n_vertices},)")
    lines = [f"# V={mesh.n_vertices} E={mesh.n_edges} F={mesh.n_faces}"]
    lines += ["v {:.17g} {:.17g} {:.17g}".format(*p) for p in mesh.vertices]
    if scalar is not None:
        lines += [f"# vs {i} {s:.17g}" for i, s in enumerate(scalar)]
    lines += ["f {} {} {}".format(*(f + 1)) for f in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n")


# -- generation ----------------------------------------------------------------


def generate_genus_g(g: int, resolution: int) -> TriangleMesh:
    """Boundary surface of a rectangular plate pierced by ``g`` round holes.

    The plate is a row of ``g`` square cells of side ``s``; each cell holds a
    hole of radius ``s/4`` at its centre and the plate is ``s/4`` thick. Per
    cell the annulus between hole and square is a polar grid of ``4*resolution``
    angular samples; top and bottom copies are joined by the outer wall and
    one wall per hole. The result is rescaled to unit surface area.
    """
    if int(g) != g or g < 1:
        raise ValueError(f"genus must be an integer >= 1, got {g}")
    if int(resolution) != resolution or resolution < 2:
        raise ValueError(f"resolution must be an integer >= 2, got {resolution}")
    g = int(g)
    res = int(resolution)
    s = 1.0
    radius = s / 4
    thickness = s / 4
    n_ang = 4 * res
    n_rings = max(2, res // 2)
    n_layers = max(1, res // 4)

    points = []
    index = {}

    def vid(key, pos):
        i = index.get(key)
        if i is None:
            i = index[key] = len(points)
            points.append(pos)
        return i

    def square_lattice(p):
        # perimeter of [0,res]^2, counter-clockwise from the top-right corner
        side, k = divmod(p, res)
        return [(res - k, res), (0, res - k), (k, 0), (res, k)][side]

    top_faces = []
    hole_loops = []
    for cell in range(g):
        cx = cell * s + s / 2
        cy = s / 2
        grid = np.empty((n_rings + 1, n_ang), dtype=np.int64)
        for p in range(n_ang):
            theta = math.pi / 4 + 2 * math.pi * p / n_ang
            inner = np.array([cx + radius * math.cos(theta), cy + radius * math.sin(theta)])
            u, v = square_lattice(p)
            outer = np.array([cell * s + u * s / res, v * s / res])
            for k in range(n_rings + 1):
                if k == n_rings:
                    key = ("lat", cell * res + u, v)
                else:
                    key = ("ring", cell, k, p)
                xy = inner + (k / n_rings) * (outer - inner)
                grid[k, p] = vid(key, (xy[0], xy[1]))
        for k in range(n_rings):
            for p in range(n_ang):
                q = (p + 1) % n_ang
                top_faces += _split_quad(points, grid[k, p], grid[k + 1, p], grid[k + 1, q], grid[k, q])
        # clockwise seen from above keeps the plate on the left
        hole_loops.append(list(grid[0, ::-1]))

    nx = g * res
    outer_loop = (
        [index[("lat", u, 0)] for u in range(nx)]
        + [index[("lat", nx, v)] for v in range(res)]
        + [index[("lat", u, res)] for u in range(nx, 0, -1)]
        + [index[("lat", 0, v)] for v in range(res, 0, -1)]
    )

    n2d = len(points)
    xy = np.array(points)
    zt = thickness / 2
    verts = [np.column_stack([xy, np.full(n2d, zt)]), np.column_stack([xy, np.full(n2d, -zt)])]
    top = np.array(top_faces, dtype=np.int64)
    faces = [top, top[:, ::-1] + n2d]
    next_id = 2 * n2d

    for loop in [outer_loop] + hole_loops:
        loop = np.array(loop, dtype=np.int64)
        m = len(loop)
        rows = [loop]
        for layer in range(1, n_layers):
            z = zt - thickness * layer / n_layers
            verts.append(np.column_stack([xy[loop], np.full(m, z)]))
            rows.append(np.arange(next_id, next_id + m))
            next_id += m
        rows.append(loop + n2d)
        wall = []
        for upper, lower in zip(rows[:-1], rows[1:]):
            for j in range(m):
                jn = (j + 1) % m
                a, b = upper[j], upper[jn]
                c, d = lower[j], lower[jn]
                wall += [(b, a, c), (b, c, d)]
        faces.append(np.array(wall, dtype=np.int64))

    V = np.vstack(verts)
    F = np.vstack(faces)
    V -= V.mean(axis=0)
    area = 0.5 * np.linalg.norm(
        np.cross(V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]]), axis=1
    ).sum()
    V /= math.sqrt(area)
    return TriangleMesh(V, F)


def _split_quad(points, a, b, c, d):
    """Split the counter-clockwise planar quad abcd along its Delaunay diagonal."""
    pa, pb, pc, pd = (np.asarray(points[i]) for i in (a, b, c, d))

    def angle(p, q, r):
        u, v = q - p, r - p
        return math.atan2(abs(u[0] * v[1] - u[1] * v[0]), float(u @ v))

    if angle(pb, pa, pc) + angle(pd, pc, pa) <= math.pi:
        return [(a, b, c), (a, c, d)]
    return [(a, b, d), (b, c, d)]


def refine(mesh: TriangleMesh) -> TriangleMesh:
    """1-to-4 midpoint subdivision; new vertices are appended after the old ones."""
    nv = mesh.n_vertices
    e = mesh.edges
    mids = 0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]])
    verts = np.vstack([mesh.vertices, mids])
    f = mesh.faces
    fe = mesh.face_edges + nv  # face_edges[:, k] is edge (f[k], f[k+1])
    a, b, c = f[:, 0], f[:, 1], f[:, 2]
    ab, bc, ca = fe[:, 0], fe[:, 1], fe[:, 2]
    faces = np.concatenate(
        [
            np.column_stack([a, ab, ca]),
            np.column_stack([ab, b, bc]),
            np.column_stack([ca, bc, c]),
            np.column_stack([ab, bc, ca]),
        ]
    )
    return TriangleMesh(verts, faces)
