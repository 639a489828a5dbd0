"""Triangle meshes with labelled boundary facets.

A :class:`Mesh` is immutable once built. Cells are stored counterclockwise,
every undirected edge appears once in ``edges`` oriented from the lower to the
higher global vertex index, and ``cell_edges[t, i]`` is the edge opposite the
local vertex ``i`` of cell ``t``.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, TextIO

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

LABELS = ("dirichlet", "neumann", "steklov")
BUILTINS = ("lshape_fig1", "square_fig3", "cook_fig4")


class MeshError(ValueError):
    """Raised for meshes violating a topological or geometric invariant."""


class MeshFormatError(MeshError):
    """Raised for syntactically malformed mesh files."""


@dataclass(frozen=True)
class CellGeometry:
    area: float
    diameter: float
    edge_lengths: tuple[float, float, float]
    incenter: tuple[float, float]
    inradius: float


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangle mesh.

    Build instances through the constructor; it validates the data,
    reorients clockwise cells and derives the edge table.
    """

    points: np.ndarray
    cells: np.ndarray
    regions: np.ndarray
    boundary: np.ndarray
    labels: tuple[str, ...]
    level: int = 0
    edges: np.ndarray = field(init=False, repr=False)
    cell_edges: np.ndarray = field(init=False, repr=False)
    edge_cells: np.ndarray = field(init=False, repr=False)
    boundary_edges: np.ndarray = field(init=False, repr=False)
    boundary_cells: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        points = np.array(self.points, dtype=float).reshape(-1, 2)
        cells = np.array(self.cells, dtype=np.int64).reshape(-1, 3)
        regions = np.array(self.regions, dtype=np.int64).reshape(-1)
        boundary = np.array(self.boundary, dtype=np.int64).reshape(-1, 2)
        labels = tuple(str(s) for s in self.labels)

        if not np.all(np.isfinite(points)):
            raise MeshError("non-finite vertex coordinates")
        if len(cells) == 0:
            raise MeshError("mesh has no cells")
        if regions.shape != (len(cells),):
            raise MeshError("one region tag per cell required")
        if len(labels) != len(boundary):
            raise MeshError("one label per boundary facet required")
        for lab in labels:
            if lab not in LABELS:
                raise MeshError(f"unknown boundary label {lab!r}")
        npts = len(points)
        for name, idx in (("cell", cells), ("boundary", boundary)):
            if idx.size and (idx.min() < 0 or idx.max() >= npts):
                raise MeshError(f"{name} vertex index out of range")
        if np.any(cells[:, 0] == cells[:, 1]) or np.any(cells[:, 1] == cells[:, 2]) \
                or np.any(cells[:, 0] == cells[:, 2]):
            raise MeshError("cell with repeated vertex")

        area2 = _signed_area2(points, cells)
        scale = np.max(np.abs(points)) if npts else 1.0
        degenerate = np.abs(area2) <= 1e-14 * max(scale, 1.0) ** 2
        if np.any(degenerate):
            raise MeshError(f"degenerate cell {int(np.flatnonzero(degenerate)[0])}")
        cw = area2 < 0
        cells[cw] = cells[cw][:, [0, 2, 1]]

        # local edge i is opposite local vertex i
        local = np.stack([cells[:, [1, 2]], cells[:, [2, 0]], cells[:, [0, 1]]], axis=1)
        sorted_pairs = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse, counts = np.unique(
            sorted_pairs, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        if np.any(counts > 2):
            raise MeshError("non-manifold edge shared by more than two cells")
        cell_edges = inverse.reshape(-1, 3)

        edge_cells = -np.ones((len(edges), 2), dtype=np.int64)
        owner = np.repeat(np.arange(len(cells)), 3)
        first = np.ones(len(inverse), dtype=bool)
        order = np.argsort(inverse, kind="stable")
        sorted_inv = inverse[order]
        first[order[1:]] = sorted_inv[1:] != sorted_inv[:-1]
        edge_cells[inverse[first], 0] = owner[first]
        edge_cells[inverse[~first], 1] = owner[~first]

        on_boundary = edge_cells[:, 1] < 0
        bsorted = np.sort(boundary, axis=1)
        keys = {tuple(e): i for i, e in enumerate(edges.tolist())}
        bedges = np.empty(len(boundary), dtype=np.int64)
        for k, pair in enumerate(bsorted.tolist()):
            e = keys.get(tuple(pair))
            if e is None:
                raise MeshError(f"boundary facet {k} is not a mesh edge")
            if not on_boundary[e]:
                raise MeshError(f"boundary facet {k} is an interior edge")
            bedges[k] = e
        if len(np.unique(bedges)) != len(bedges):
            raise MeshError("boundary facet listed twice")
        if len(bedges) != int(on_boundary.sum()):
            raise MeshError("boundary facets do not cover the boundary")

        nc = len(cells)
        inner = ~on_boundary
        adj = coo_matrix((np.ones(int(inner.sum())),
                          (edge_cells[inner, 0], edge_cells[inner, 1])), shape=(nc, nc))
        if connected_components(adj, directed=False)[0] != 1:
            raise MeshError("mesh is not connected")

        set_ = object.__setattr__
        set_(self, "points", _frozen(points, float))
        set_(self, "cells", _frozen(cells, np.int64))
        set_(self, "regions", _frozen(regions, np.int64))
        set_(self, "boundary", _frozen(boundary, np.int64))
        set_(self, "labels", labels)
        set_(self, "level", int(self.level))
        set_(self, "edges", _frozen(edges, np.int64))
        set_(self, "cell_edges", _frozen(cell_edges, np.int64))
        set_(self, "edge_cells", _frozen(edge_cells, np.int64))
        set_(self, "boundary_edges", _frozen(bedges, np.int64))
        set_(self, "boundary_cells", _frozen(edge_cells[bedges, 0], np.int64))

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def facets(self, label: str) -> np.ndarray:
        """Indices into ``boundary`` of the facets carrying ``label``."""
        return np.flatnonzero(np.asarray(self.labels) == label)

    def relabel(self, label: str) -> "Mesh":
        """Copy of the mesh with every boundary facet set to ``label``."""
        return Mesh(self.points, self.cells, self.regions, self.boundary,
                    (label,) * len(self.boundary), self.level)

    def areas(self) -> np.ndarray:
        return 0.5 * _signed_area2(self.points, self.cells)

    def edge_lengths(self) -> np.ndarray:
        p = self.points[self.edges]
        return np.hypot(*(p[:, 1] - p[:, 0]).T)

    def diameters(self) -> np.ndarray:
        return self.edge_lengths()[self.cell_edges].max(axis=1)

    def h(self) -> float:
        """Maximal cell diameter."""
        return float(self.diameters().max())

    def centroids(self) -> np.ndarray:
        return self.points[self.cells].mean(axis=1)

    def same_as(self, other: "Mesh") -> bool:
        return (np.array_equal(self.points, other.points)
                and np.array_equal(self.cells, other.cells)
                and np.array_equal(self.regions, other.regions)
                and np.array_equal(self.boundary, other.boundary)
                and self.labels == other.labels)


def _signed_area2(points, cells):
    a, b, c = (points[cells[:, i]] for i in range(3))
    return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])


def cell_geometry(m: Mesh, index: int) -> CellGeometry:
    if not 0 <= index < m.n_cells:
        raise IndexError(f"cell index {index} out of range")
    return triangle_geometry(m.points[m.cells[index]])


def triangle_geometry(vertices) -> CellGeometry:
    """Area, diameter and incircle of a triangle given as a 3x2 array."""
    v = np.asarray(vertices, dtype=float)
    # edge i is opposite vertex i
    lengths = np.array([np.linalg.norm(v[(i + 2) % 3] - v[(i + 1) % 3]) for i in range(3)])
    d1, d2 = v[1] - v[0], v[2] - v[0]
    area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
    if area <= 1e-14 * max(lengths.max(), 1e-300) ** 2:
        raise MeshError("degenerate triangle")
    perimeter = lengths.sum()
    incenter = lengths @ v / perimeter
    return CellGeometry(
        area=float(area),
        diameter=float(lengths.max()),
        edge_lengths=tuple(float(x) for x in lengths),
        incenter=(float(incenter[0]), float(incenter[1])),
        inradius=float(2.0 * area / perimeter),
    )


def inscribed_param_d(polygon, x0) -> float:
    """Ratio of the distance from ``x0`` to the boundary of a convex polygon
    over the largest distance from ``x0`` to a corner.

    The corners are given in order (either orientation).
    """
    z = np.asarray(polygon, dtype=float)
    x = np.asarray(x0, dtype=float)
    n = len(z)
    if n < 3:
        raise ValueError("polygon needs at least three corners")
    area2 = np.sum(z[:, 0] * np.roll(z[:, 1], -1) - np.roll(z[:, 0], -1) * z[:, 1])
    orient = 1.0 if area2 > 0 else -1.0
    dist = np.inf
    for j in range(n):
        a, b = z[j], z[(j + 1) % n]
        t = b - a
        # signed distance, positive on the interior side
        s = orient * (t[0] * (x[1] - a[1]) - t[1] * (x[0] - a[0])) / np.hypot(*t)
        dist = min(dist, s)
    if dist <= 0:
        raise ValueError("x0 must lie strictly inside the polygon")
    return float(dist / np.max(np.hypot(*(z - x).T)))


def refine_red(m: Mesh) -> Mesh:
    """Split every triangle into four through its edge midpoints."""
    nv = m.n_points
    mid = 0.5 * (m.points[m.edges[:, 0]] + m.points[m.edges[:, 1]])
    points = np.vstack([m.points, mid])
    v = m.cells
    e = m.cell_edges + nv  # midpoint of edge opposite vertex i
    cells = np.concatenate([
        np.stack([v[:, 0], e[:, 2], e[:, 1]], axis=1),
        np.stack([e[:, 2], v[:, 1], e[:, 0]], axis=1),
        np.stack([e[:, 1], e[:, 0], v[:, 2]], axis=1),
        np.stack([e[:, 0], e[:, 1], e[:, 2]], axis=1),
    ])
    regions = np.tile(m.regions, 4)
    bmid = m.boundary_edges + nv
    boundary = np.concatenate([
        np.stack([m.boundary[:, 0], bmid], axis=1),
        np.stack([bmid, m.boundary[:, 1]], axis=1),
    ])
    labels = m.labels + m.labels
    return Mesh(points, cells, regions, boundary, labels, m.level + 1)


def refine(m: Mesh, times: int) -> Mesh:
    for _ in range(times):
        m = refine_red(m)
    return m


# ---------------------------------------------------------------- text format

def parse_mesh(text: str | TextIO) -> Mesh:
    """Read a mesh in the line-oriented ``vertices/cells/boundary`` format."""
    if not isinstance(text, str):
        text = text.read()
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((lineno, line.split()))
    pos = 0

    def section(name):
        nonlocal pos
        if pos >= len(lines):
            raise MeshFormatError(f"missing section {name!r}")
        lineno, tok = lines[pos]
        if len(tok) != 2 or tok[0] != name:
            raise MeshFormatError(f"line {lineno}: expected '{name} <count>'")
        try:
            count = int(tok[1])
        except ValueError:
            raise MeshFormatError(f"line {lineno}: bad count {tok[1]!r}") from None
        if count < 0 or pos + 1 + count > len(lines):
            raise MeshFormatError(f"line {lineno}: section {name!r} truncated")
        rows = lines[pos + 1:pos + 1 + count]
        pos += 1 + count
        return rows

    def convert(rows, width, kinds):
        out = []
        for lineno, tok in rows:
            if len(tok) != width:
                raise MeshFormatError(f"line {lineno}: expected {width} fields")
            try:
                out.append([k(t) for k, t in zip(kinds, tok)])
            except ValueError:
                raise MeshFormatError(f"line {lineno}: cannot parse {' '.join(tok)!r}") from None
        return out

    pts = convert(section("vertices"), 2, (float, float))
    cls = convert(section("cells"), 4, (int, int, int, int))
    bnd = convert(section("boundary"), 3, (int, int, str))
    if pos != len(lines):
        raise MeshFormatError(f"line {lines[pos][0]}: trailing content")
    for row in bnd:
        if row[2] not in LABELS:
            raise MeshFormatError(f"unknown boundary label {row[2]!r}")
    return Mesh(
        points=np.array(pts, dtype=float).reshape(-1, 2),
        cells=np.array([r[:3] for r in cls], dtype=np.int64).reshape(-1, 3),
        regions=np.array([r[3] for r in cls], dtype=np.int64),
        boundary=np.array([r[:2] for r in bnd], dtype=np.int64).reshape(-1, 2),
        labels=tuple(r[2] for r in bnd),
    )


def format_mesh(m: Mesh) -> str:
    out = io.StringIO()
    out.write(f"# level {m.level}\n")
    out.write(f"vertices {m.n_points}\n")
    for x, y in m.points:
        out.write(f"{x:.17g} {y:.17g}\n")
    out.write(f"cells {m.n_cells}\n")
    for (a, b, c), r in zip(m.cells, m.regions):
        out.write(f"{a} {b} {c} {r}\n")
    out.write(f"boundary {len(m.boundary)}\n")
    for (a, b), lab in zip(m.boundary, m.labels):
        out.write(f"{a} {b} {lab}\n")
    return out.getvalue()


def write_mesh(m: Mesh, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_mesh(m))


# ---------------------------------------------------------------- builtins

def builtin_mesh(name: str, steklov: bool = False) -> Mesh:
    """Initial triangulations of the three benchmark configurations.

    ``lshape_fig1`` has a Dirichlet boundary; ``steklov=True`` relabels all of
    it ``steklov``. ``cook_fig4`` is clamped on the left edge, traction-free
    elsewhere.
    """
    if name not in BUILTINS:
        raise KeyError(f"unknown builtin mesh {name!r}; choose from {', '.join(BUILTINS)}")
    text = resources.files("mixedbounds").joinpath("data", f"{name}.mesh").read_text("utf-8")
    m = parse_mesh(text)
    if steklov:
        if name != "lshape_fig1":
            raise ValueError("the steklov variant exists for lshape_fig1 only")
        m = m.relabel("steklov")
    return m


def _grid_squares(squares: Iterable[tuple[float, float, bool]]):
    """Half-unit grid triangulation of unit squares.

    Each square is given by its lower-left corner and whether its coarse
    diagonal runs from lower-left to upper-right. The coarse halves are
    red-refined, which gives eight right-isosceles triangles per square.
    """
    index: dict[tuple[float, float], int] = {}
    points: list[tuple[float, float]] = []

    def vid(x, y):
        key = (float(x), float(y))
        if key not in index:
            index[key] = len(points)
            points.append(key)
        return index[key]

    cells = []
    for x0, y0, rising in squares:
        ll, lr, ur, ul = (x0, y0), (x0 + 1, y0), (x0 + 1, y0 + 1), (x0, y0 + 1)
        coarse = [(ll, lr, ur), (ll, ur, ul)] if rising else [(ll, lr, ul), (lr, ur, ul)]
        for a, b, c in coarse:
            mab = ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2)
            mbc = ((b[0] + c[0]) / 2, (b[1] + c[1]) / 2)
            mca = ((c[0] + a[0]) / 2, (c[1] + a[1]) / 2)
            for tri in ((a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)):
                cells.append([vid(*p) for p in tri])
    return np.array(points), np.array(cells)


def _label_boundary(points, cells, label_of):
    local = np.concatenate([cells[:, [1, 2]], cells[:, [2, 0]], cells[:, [0, 1]]])
    keys, counts = np.unique(np.sort(local, axis=1), axis=0, return_counts=True)
    bnd = keys[counts == 1]
    labels = tuple(label_of(*(0.5 * (points[a] + points[b]))) for a, b in bnd)
    return bnd, labels


def _make_lshape():
    # squares of (-1,1)^2 minus [0,1]^2. The coarse diagonals run from upper
    # left to lower right; the mirror image of this layout gives different
    # discrete eigenvalues than the reference tables (8.86225 vs 8.60144).
    pts, cells = _grid_squares([(-1, 0, False), (-1, -1, False), (0, -1, False)])
    bnd, labels = _label_boundary(pts, cells, lambda x, y: "dirichlet")
    return Mesh(pts, cells, np.zeros(len(cells)), bnd, labels)


def _square_region(x, y):
    # bit 1: A = 3 (x*y > 0), bit 0: gamma = 5 (|y| > 1/2)
    return 2 * int(x * y > 0) + int(abs(y) > 0.5)


def _make_square():
    pts, cells = _grid_squares([(-1, 0, True), (0, 0, True), (-1, -1, True), (0, -1, True)])
    cen = pts[cells].mean(axis=1)
    regions = [_square_region(x, y) for x, y in cen]
    bnd, labels = _label_boundary(pts, cells, lambda x, y: "dirichlet")
    return Mesh(pts, cells, regions, bnd, labels)


COOK_POINTS = np.array([
    (0.00000, 0.00000), (22.36692, 20.50301), (32.62352, 29.90490),
    (43.01651, 39.43180), (48.00000, 44.00000), (48.00000, 52.00000),
    (48.00000, 60.00000), (34.18905, 55.39635), (20.96553, 50.98851),
    (7.91553, 46.63851), (0.00000, 44.00000), (0.00000, 22.00000),
    (13.34761, 30.34226), (25.34761, 37.84226), (37.50718, 45.44199),
])

COOK_CELLS = np.array([
    (1, 13, 12), (13, 1, 2), (2, 14, 13), (14, 2, 3), (3, 15, 14), (15, 3, 4),
    (5, 15, 4), (15, 5, 6), (7, 15, 6), (15, 7, 8), (9, 15, 8), (15, 9, 14),
    (10, 14, 9), (14, 10, 13), (11, 13, 10), (13, 11, 12),
]) - 1


def _make_cook():
    def label(x, y):
        return "dirichlet" if x == 0.0 else "neumann"
    bnd, labels = _label_boundary(COOK_POINTS, COOK_CELLS, label)
    return Mesh(COOK_POINTS, COOK_CELLS, np.zeros(len(COOK_CELLS)), bnd, labels)


_FACTORIES = {"lshape_fig1": _make_lshape, "square_fig3": _make_square, "cook_fig4": _make_cook}


def regenerate_builtin_files(directory) -> None:
    """Rewrite the shipped builtin mesh files from their factories."""
    import pathlib
    directory = pathlib.Path(directory)
    for name, make in _FACTORIES.items():
        write_mesh(make(), directory / f"{name}.mesh")
