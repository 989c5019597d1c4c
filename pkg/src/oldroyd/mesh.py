"""Triangular meshes of polygonal 2D domains.

The text format is::

    vertices N triangles M boundary K
    x y                 (N lines)
    i j k               (M lines, 0-based)
    i j marker          (K lines)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MeshError


def signed_areas(vertices, triangles):
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_markers: np.ndarray
    # child triangle -> parent triangle of the mesh it was refined from
    parent: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 2)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        b = np.ascontiguousarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        mk = np.ascontiguousarray(self.boundary_markers, dtype=np.int64).reshape(-1)
        if len(mk) != len(b):
            raise MeshError("one marker per boundary edge required")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle index out of range")
        area = signed_areas(v, t)
        if np.any(area == 0.0):
            raise MeshError("degenerate triangle")
        flip = area < 0
        if np.any(flip):
            t = t.copy()
            t[flip] = t[flip][:, [0, 2, 1]]
        for name, arr in (("vertices", v), ("triangles", t), ("boundary_edges", b), ("boundary_markers", mk)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def areas(self):
        return signed_areas(self.vertices, self.triangles)

    def h(self) -> float:
        """Largest triangle diameter."""
        p = self.vertices[self.triangles]
        lens = [np.linalg.norm(p[:, i] - p[:, (i + 1) % 3], axis=1) for i in range(3)]
        return float(np.max(lens))

    def min_angle(self) -> float:
        p = self.vertices[self.triangles]
        angles = []
        for i in range(3):
            e1 = p[:, (i + 1) % 3] - p[:, i]
            e2 = p[:, (i + 2) % 3] - p[:, i]
            c = np.einsum("ij,ij->i", e1, e2) / (np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1))
            angles.append(np.arccos(np.clip(c, -1, 1)))
        return float(np.min(angles))

    def edges(self):
        """Unique undirected edges and the triangle-to-edge map.

        Local edge ``k`` of a triangle joins local vertices ``k`` and ``(k+1) % 3``.
        """
        t = self.triangles
        all_e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        all_e.sort(axis=1)
        uniq, inv = np.unique(all_e, axis=0, return_inverse=True)
        tri_edges = inv.reshape(3, -1).T
        return uniq, tri_edges

    def validate(self):
        """Check orientation and that boundary_edges match the topological boundary."""
        if np.any(self.areas() <= 0):
            raise MeshError("non-positive triangle area")
        edges, tri_edges = self.edges()
        counts = np.bincount(tri_edges.ravel(), minlength=len(edges))
        if np.any(counts > 2):
            raise MeshError("edge shared by more than two triangles")
        topo = {tuple(e) for e in edges[counts == 1]}
        given = {tuple(sorted(e)) for e in self.boundary_edges.tolist()}
        if topo != given or len(given) != len(self.boundary_edges):
            raise MeshError("boundary_edges do not match the topological boundary")


def unit_square_mesh(n: int) -> Mesh:
    """Structured mesh of [0,1]^2: n x n squares, each cut along its diagonal.

    Boundary markers: 1 bottom, 2 right, 3 top, 4 left.
    """
    if n < 1:
        raise MeshError("n must be >= 1")
    s = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(s, s, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    i, j = i.ravel(), j.ravel()
    v00, v10, v01, v11 = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    k = np.arange(n)
    bottom = np.column_stack([vid(k, 0), vid(k + 1, 0)])
    right = np.column_stack([vid(n, k), vid(n, k + 1)])
    top = np.column_stack([vid(k + 1, n), vid(k, n)])
    left = np.column_stack([vid(0, k + 1), vid(0, k)])
    boundary = np.concatenate([bottom, right, top, left])
    markers = np.repeat([1, 2, 3, 4], n)
    return Mesh(vertices, triangles, boundary, markers)


def refine_uniform(m: Mesh) -> Mesh:
    """Split each triangle into four through its edge midpoints."""
    edges, tri_edges = m.edges()
    nv = m.n_vertices
    mid = 0.5 * (m.vertices[edges[:, 0]] + m.vertices[edges[:, 1]])
    vertices = np.concatenate([m.vertices, mid])
    t = m.triangles
    e01, e12, e20 = (tri_edges[:, k] + nv for k in range(3))
    children = np.stack(
        [
            np.column_stack([t[:, 0], e01, e20]),
            np.column_stack([e01, t[:, 1], e12]),
            np.column_stack([e20, e12, t[:, 2]]),
            np.column_stack([e01, e12, e20]),
        ],
        axis=1,
    ).reshape(-1, 3)
    parent = np.repeat(np.arange(m.n_triangles), 4)

    lookup = {tuple(e): k for k, e in enumerate(edges.tolist())}
    b_mid = np.array([lookup[tuple(sorted(e))] for e in m.boundary_edges.tolist()], dtype=np.int64) + nv
    b0, b1 = m.boundary_edges[:, 0], m.boundary_edges[:, 1]
    boundary = np.stack([np.column_stack([b0, b_mid]), np.column_stack([b_mid, b1])], axis=1).reshape(-1, 2)
    markers = np.repeat(m.boundary_markers, 2)
    return Mesh(vertices, children, boundary, markers, parent=parent)


def boundary_vertices(m: Mesh) -> np.ndarray:
    return np.unique(m.boundary_edges.ravel())


def read_mesh(path) -> Mesh:
    tokens = Path(path).read_text(encoding="utf-8").split()
    try:
        if tokens[0] != "vertices" or tokens[2] != "triangles" or tokens[4] != "boundary":
            raise MeshError(f"{path}: bad header")
        nv, nt, nb = int(tokens[1]), int(tokens[3]), int(tokens[5])
        body = tokens[6:]
        need = 2 * nv + 3 * nt + 3 * nb
        if len(body) != need:
            raise MeshError(f"{path}: expected {need} numbers after header, found {len(body)}")
        v = np.array(body[: 2 * nv], dtype=float).reshape(nv, 2)
        t = np.array(body[2 * nv : 2 * nv + 3 * nt], dtype=np.int64).reshape(nt, 3)
        b = np.array(body[2 * nv + 3 * nt :], dtype=np.int64).reshape(nb, 3)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"{path}: malformed mesh file ({exc})") from exc
    m = Mesh(v, t, b[:, :2], b[:, 2])
    m.validate()
    return m


def write_mesh(m: Mesh, path):
    lines = [f"vertices {m.n_vertices} triangles {m.n_triangles} boundary {len(m.boundary_edges)}"]
    lines += [f"{x!r} {y!r}" for x, y in m.vertices.tolist()]
    lines += ["{} {} {}".format(*tri) for tri in m.triangles.tolist()]
    lines += [f"{i} {j} {k}" for (i, j), k in zip(m.boundary_edges.tolist(), m.boundary_markers.tolist())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
