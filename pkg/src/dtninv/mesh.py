"""Structured triangulations of the unit square and the disk.

Meshes are immutable after construction: vertices, triangles and the oriented
boundary loop are built once and shared read-only by assembly, flux recovery
and plotting. Boundary edges are stored in counterclockwise traversal order,
so the outward unit normal of an edge (a, b) is the right-hand rotation of
b - a.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

SIDES = ("left", "right", "bottom", "top")

# Boundary vertices exactly on an exclusion endpoint count as observed.
_TIE_EPS = 1e-12


class MeshError(ValueError):
    """Raised when a triangulation violates a structural invariant."""


@dataclass
class Mesh:
    """Conforming triangle mesh with oriented boundary structure.

    Attributes
    ----------
    vertices : (nv, 2) float64
    triangles : (nt, 3) int32
        Counterclockwise vertex triples.
    domain_kind : {"unit_square", "disk"}
    tri_areas : (nt,) float64
    is_boundary : (nv,) bool
    boundary_vertices : (nb,) int32
        Boundary vertex ids in loop order (counterclockwise).
    boundary_edges : (nb, 2) int32
        Directed edges (boundary_vertices[i], boundary_vertices[i+1]).
    boundary_normals : (nb, 2) float64, unit outward normals per edge.
    boundary_edge_lengths : (nb,) float64
    boundary_edge_tri : (nb,) int32, owning triangle of each boundary edge.
    boundary_weights : (nb,) float64
        Lumped arc length per boundary vertex: half the summed length of the
        two adjacent boundary edges.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    domain_kind: str
    n: int | None = None
    disk_center: tuple[float, float] | None = None
    disk_radius: float | None = None
    tri_areas: np.ndarray = field(init=False, repr=False)
    is_boundary: np.ndarray = field(init=False, repr=False)
    boundary_vertices: np.ndarray = field(init=False, repr=False)
    boundary_edges: np.ndarray = field(init=False, repr=False)
    boundary_normals: np.ndarray = field(init=False, repr=False)
    boundary_edge_lengths: np.ndarray = field(init=False, repr=False)
    boundary_edge_tri: np.ndarray = field(init=False, repr=False)
    boundary_weights: np.ndarray = field(init=False, repr=False)
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int32)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be (nv, 2)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must be (nt, 3)")
        p, t = self.vertices, self.triangles
        d1 = p[t[:, 1]] - p[t[:, 0]]
        d2 = p[t[:, 2]] - p[t[:, 0]]
        cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        flip = cross < 0
        if flip.any():
            self.triangles[flip] = self.triangles[flip][:, [0, 2, 1]]
        self.tri_areas = np.abs(cross) / 2.0
        if np.any(self.tri_areas <= 0):
            raise MeshError("mesh contains a degenerate triangle")
        self._build_boundary()

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def _build_boundary(self):
        t = self.triangles
        half = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        owner = np.tile(np.arange(len(t), dtype=np.int32), 3)
        directed = {}
        for k, (a, b) in enumerate(map(tuple, half)):
            if (a, b) in directed:
                raise MeshError("inconsistent triangle orientation (duplicate half-edge)")
            directed[(a, b)] = k
        # a half-edge with no reverse twin lies on the boundary
        boundary = [(a, b, directed[(a, b)]) for (a, b) in directed
                    if (b, a) not in directed]
        if not boundary:
            raise MeshError("mesh has no boundary")
        nxt = {}
        for a, b, k in boundary:
            if a in nxt:
                raise MeshError("non-manifold boundary vertex")
            nxt[a] = (b, k)
        start = min(nxt)
        loop, edge_ids = [], []
        v = start
        while True:
            b, k = nxt[v]
            loop.append(v)
            edge_ids.append(k)
            v = b
            if v == start:
                break
            if len(loop) > len(nxt):
                raise MeshError("boundary does not close")
        if len(loop) != len(nxt):
            raise MeshError("boundary is not a single closed loop")

        self.boundary_vertices = np.asarray(loop, dtype=np.int32)
        self.boundary_edges = half[edge_ids].astype(np.int32)
        self.boundary_edge_tri = owner[edge_ids].astype(np.int32)
        self.is_boundary = np.zeros(self.n_vertices, dtype=bool)
        self.is_boundary[self.boundary_vertices] = True

        p = self.vertices
        d = p[self.boundary_edges[:, 1]] - p[self.boundary_edges[:, 0]]
        lengths = np.hypot(d[:, 0], d[:, 1])
        self.boundary_edge_lengths = lengths
        self.boundary_normals = np.column_stack([d[:, 1], -d[:, 0]]) / lengths[:, None]
        # edge i starts at loop vertex i, so vertex i also touches edge i-1
        self.boundary_weights = (lengths + np.roll(lengths, 1)) / 2.0


def unit_square_mesh(n: int) -> Mesh:
    """Criss-cross triangulation of (0,1)^2 with n subdivisions per side.

    Vertex (i, j) sits at (i/n, j/n); every grid cell is split along the
    lower-left to upper-right diagonal, giving (n+1)^2 vertices, 2n^2
    triangles and 4n boundary edges.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError("n must be a positive integer")
    n = int(n)
    js, iis = np.divmod(np.arange((n + 1) ** 2), n + 1)
    vertices = np.column_stack([iis / n, js / n])
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    ii, jj = ii.ravel(), jj.ravel()
    v00 = jj * (n + 1) + ii
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    tris = np.empty((2 * n * n, 3), dtype=np.int32)
    tris[0::2] = np.column_stack([v00, v10, v11])
    tris[1::2] = np.column_stack([v00, v11, v01])
    return Mesh(vertices, tris, "unit_square", n=n)


def disk_mesh(center: tuple[float, float] = (0.5, 0.5), radius: float = 0.5,
              target_h: float = 0.0112) -> Mesh:
    """Concentric-ring triangulation of a disk.

    Ring i of m = ceil(radius/target_h) carries 6*i vertices at radius
    radius*i/m; consecutive rings are joined by an angular sweep. Every edge
    stays below 1.5*target_h and the outermost vertices land on the circle to
    round-off. The construction is fully deterministic.
    """
    radius = float(radius)
    target_h = float(target_h)
    if radius <= 0:
        raise ValueError("radius must be positive")
    if not 0 < target_h < radius:
        raise ValueError("target_h must lie in (0, radius)")
    cx, cy = float(center[0]), float(center[1])
    m = int(math.ceil(radius / target_h))

    verts = [(cx, cy)]
    rings = []
    for i in range(1, m + 1):
        k = 6 * i
        theta = 2.0 * np.pi * np.arange(k) / k
        r = radius * i / m
        start = len(verts)
        verts.extend(zip(cx + r * np.cos(theta), cy + r * np.sin(theta)))
        rings.append(np.arange(start, start + k))

    tris = []
    first = rings[0]
    for j in range(6):
        tris.append((0, first[j], first[(j + 1) % 6]))
    for i in range(m - 1):
        _zip_rings(rings[i], rings[i + 1], tris)
    return Mesh(np.asarray(verts), np.asarray(tris, dtype=np.int32), "disk",
                disk_center=(cx, cy), disk_radius=radius)


def _zip_rings(inner: np.ndarray, outer: np.ndarray, tris: list):
    """Triangulate the annulus between two evenly spaced concentric rings.

    Advances whichever ring pointer has the smaller next angle (exact integer
    comparison of angle fractions; ties advance the inner ring).
    """
    n1, n2 = len(inner), len(outer)
    a = b = 0
    while a < n1 or b < n2:
        advance_outer = b < n2 and (a == n1 or (b + 1) * n1 < (a + 1) * n2)
        if advance_outer:
            tris.append((inner[a % n1], outer[b % n2], outer[(b + 1) % n2]))
            b += 1
        else:
            tris.append((inner[a % n1], outer[b % n2], inner[(a + 1) % n1]))
            a += 1


@dataclass(frozen=True)
class ObservationSpec:
    """Which part of the boundary carries data.

    mode "full" observes everything; mode "partial" excludes closed parameter
    intervals on named sides of the unit square, e.g. ("left", 0.4, 0.8)
    removes the left-edge segment with y in [0.4, 0.8].
    """

    mode: str = "full"
    exclusions: tuple = ()

    def __post_init__(self):
        if self.mode not in ("full", "partial"):
            raise ValueError(f"unknown observation mode {self.mode!r}")
        object.__setattr__(self, "exclusions",
                           tuple((str(s), float(lo), float(hi)) for s, lo, hi in self.exclusions))
        if self.mode == "full" and self.exclusions:
            raise ValueError("full observation admits no exclusions")
        for side, lo, hi in self.exclusions:
            if side not in SIDES:
                raise ValueError(f"unknown side {side!r}")
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError("exclusion intervals must satisfy 0 <= lo <= hi <= 1")


@dataclass
class BoundaryMask:
    """Observed flags per boundary vertex plus the hidden arc length."""

    observed: np.ndarray
    gamma0_length: float


def mark_boundary(mesh: Mesh, spec: ObservationSpec) -> BoundaryMask:
    """Flag boundary vertices as observed or hidden.

    A vertex is hidden iff it lies strictly inside an excluded interval of
    its side; interval endpoints and corners stay observed. The hidden arc
    length is the lumped weight of the hidden vertices.
    """
    bxy = mesh.vertices[mesh.boundary_vertices]
    observed = np.ones(len(bxy), dtype=bool)
    if spec.mode == "partial" and spec.exclusions:
        if mesh.domain_kind != "unit_square":
            raise ValueError("partial observation intervals are defined on the unit square only")
        x, y = bxy[:, 0], bxy[:, 1]
        on_side = {
            "left": np.abs(x) <= _TIE_EPS,
            "right": np.abs(x - 1.0) <= _TIE_EPS,
            "bottom": np.abs(y) <= _TIE_EPS,
            "top": np.abs(y - 1.0) <= _TIE_EPS,
        }
        for side, lo, hi in spec.exclusions:
            param = y if side in ("left", "right") else x
            inside = on_side[side] & (param > lo + _TIE_EPS) & (param < hi - _TIE_EPS)
            observed &= ~inside
    gamma0 = float(mesh.boundary_weights[~observed].sum())
    return BoundaryMask(observed, gamma0)


def fingerprint(mesh: Mesh) -> str:
    """SHA-256 of the vertex coordinates and connectivity."""
    h = hashlib.sha256()
    h.update(mesh.vertices.tobytes())
    h.update(mesh.triangles.tobytes())
    return h.hexdigest()


def export_vtk(mesh: Mesh, path, point_data: dict | None = None):
    """Write the mesh (and optional per-vertex scalars) as legacy ASCII VTK."""
    lines = ["# vtk DataFile Version 3.0", "dtninv mesh", "ASCII",
             "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_vertices} double"]
    for x, y in mesh.vertices:
        lines.append(f"{float(x)!r} {float(y)!r} 0.0")
    nt = mesh.n_triangles
    lines.append(f"CELLS {nt} {4 * nt}")
    for a, b, c in mesh.triangles:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {nt}")
    lines.extend(["5"] * nt)
    if point_data:
        lines.append(f"POINT_DATA {mesh.n_vertices}")
        for name, values in point_data.items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(repr(float(v)) for v in values)
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def export_vertex_csv(mesh: Mesh, path, mask: BoundaryMask | None = None):
    """Write the vertex table ``id,x,y,on_boundary,observed``.

    Interior vertices report observed = 0; boundary vertices follow the mask
    (all observed when no mask is given).
    """
    observed = np.zeros(mesh.n_vertices, dtype=int)
    if mask is None:
        observed[mesh.boundary_vertices] = 1
    else:
        observed[mesh.boundary_vertices[mask.observed]] = 1
    with open(path, "w") as f:
        f.write("id,x,y,on_boundary,observed\n")
        for i, (x, y) in enumerate(mesh.vertices):
            f.write(f"{i},{float(x)!r},{float(y)!r},{int(mesh.is_boundary[i])},{observed[i]}\n")
