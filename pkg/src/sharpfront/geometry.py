"""Grid and convex-curve geometry.

Fields live on node grids stored as ``(ny, nx)`` arrays, node ``(j, i)`` at
``(x0 + i*hx, y0 + j*hy)``. Curves are counterclockwise polygons carrying one
outward unit normal per vertex; the normal attached to vertex ``i`` is the
normal of the outgoing edge ``i -> i+1``, which is a supporting line there.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

from ._backend import kernels

CONVEXITY_TOL = 1e-10


class GeometryError(ValueError):
    """Invalid or degenerate geometric input."""


class _Vanished:
    """Sentinel for an empty half-plane intersection."""

    def __repr__(self):
        return "VANISHED"

    def __bool__(self):
        return False


VANISHED = _Vanished()


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    x0: float
    y0: float
    hx: float
    hy: float

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise GeometryError("grid needs at least 2 nodes per axis")
        if not (self.hx > 0 and self.hy > 0):
            raise GeometryError("grid spacings must be positive")

    @classmethod
    def covering(cls, xmin, xmax, ymin, ymax, h):
        """Smallest grid of spacing ``h`` with nodes spanning the box."""
        nx = int(np.ceil((xmax - xmin) / h - 1e-9)) + 1
        ny = int(np.ceil((ymax - ymin) / h - 1e-9)) + 1
        return cls(nx, ny, float(xmin), float(ymin), float(h), float(h))

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def size(self):
        return self.nx * self.ny

    @property
    def x(self):
        return self.x0 + self.hx * np.arange(self.nx)

    @property
    def y(self):
        return self.y0 + self.hy * np.arange(self.ny)

    def mesh(self):
        """Node coordinates ``(X, Y)``, each of shape ``(ny, nx)``."""
        return np.meshgrid(self.x, self.y)

    def scaled(self, factor):
        return GridSpec(self.nx, self.ny, self.x0 * factor, self.y0 * factor,
                        self.hx * factor, self.hy * factor)


@dataclass
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GeometryError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise GeometryError("field contains non-finite values")

    @classmethod
    def from_function(cls, grid, func):
        X, Y = grid.mesh()
        return cls(grid, np.broadcast_to(func(X, Y), grid.shape).copy())


def _rot90(v):
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


@dataclass
class ConvexCurve:
    vertices: np.ndarray
    normals: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 2)
        self.normals = np.ascontiguousarray(self.normals, dtype=float).reshape(-1, 2)
        if self.vertices.shape[0] < 3:
            raise GeometryError("a curve needs at least 3 vertices")
        if self.normals.shape != self.vertices.shape:
            raise GeometryError("one normal per vertex is required")
        if self.check:
            self.validate()

    def validate(self, tol=CONVEXITY_TOL):
        v = self.vertices
        norms = np.linalg.norm(self.normals, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise GeometryError("normals must have unit length")
        edges = np.roll(v, -1, axis=0) - v
        # repeated vertices (corner fans) carry extra normals but no edge
        edges = edges[np.any(edges != 0.0, axis=1)]
        if len(edges) < 3:
            raise GeometryError("a curve needs at least 3 distinct vertices")
        scale = max(np.max(np.abs(edges)), 1e-300) ** 2
        cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
        if np.any(cross < -tol * scale) or not np.any(cross > 0):
            raise GeometryError("polygon is not convex and counterclockwise")
        extent = np.max(np.ptp(v, axis=0))
        for start in range(0, len(v), 512):
            n = self.normals[start:start + 512]
            y = v[start:start + 512]
            slack = np.einsum("mj,kj->mk", n, v) - np.einsum("mj,mj->m", n, y)[:, None]
            if np.any(slack > 1e-9 * max(extent, 1.0)):
                raise GeometryError("vertex normal is not a supporting direction")

    def __len__(self):
        return self.vertices.shape[0]

    @classmethod
    def from_polygon(cls, vertices, corner_fan=0):
        """Convex CCW polygon with edge normals; ``corner_fan`` adds interpolated corner normals."""
        v = np.asarray(vertices, dtype=float)
        edges = np.roll(v, -1, axis=0) - v
        lengths = np.linalg.norm(edges, axis=1)
        if np.any(lengths == 0):
            raise GeometryError("repeated vertices in polygon")
        normals = -_rot90(edges / lengths[:, None])
        if corner_fan <= 0:
            return cls(v, normals)
        verts, norms = [], []
        for i in range(len(v)):
            a_prev = np.arctan2(*normals[i - 1][::-1])
            a_next = np.arctan2(*normals[i][::-1])
            turn = (a_next - a_prev) % (2 * np.pi)
            for k in range(1, corner_fan + 1):
                ang = a_prev + turn * k / (corner_fan + 1)
                verts.append(v[i])
                norms.append([np.cos(ang), np.sin(ang)])
            verts.append(v[i])
            norms.append(normals[i])
        return cls(np.array(verts), np.array(norms))

    @classmethod
    def circle(cls, radius, n=256, center=(0.0, 0.0)):
        ang = 2 * np.pi * np.arange(n) / n
        v = np.column_stack([np.cos(ang), np.sin(ang)]) * radius + np.asarray(center, float)
        mid = ang + np.pi / n
        return cls(v, np.column_stack([np.cos(mid), np.sin(mid)]))

    @classmethod
    def ellipse(cls, a, b, n=256, center=(0.0, 0.0)):
        ang = 2 * np.pi * np.arange(n) / n
        v = np.column_stack([a * np.cos(ang), b * np.sin(ang)]) + np.asarray(center, float)
        return cls.from_polygon(v)

    def edge_lengths(self):
        return np.linalg.norm(np.roll(self.vertices, -1, axis=0) - self.vertices, axis=1)

    def min_curvature_radius(self):
        """Smallest discrete radius of curvature: arc length over turning angle per vertex."""
        n = self.normals
        turn = np.arctan2(n[:, 0] * np.roll(n, -1, 0)[:, 1] - n[:, 1] * np.roll(n, -1, 0)[:, 0],
                          np.einsum("ij,ij->i", n, np.roll(n, -1, 0)))
        lengths = np.roll(self.edge_lengths(), -1)
        arc = 0.5 * (self.edge_lengths() + lengths)
        with np.errstate(divide="ignore"):
            radius = np.where(turn > 1e-14, arc / np.maximum(turn, 1e-300), np.inf)
        return float(np.min(radius))

    def area(self):
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def bounds(self):
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return lo[0], hi[0], lo[1], hi[1]


def _as_polygon(curve):
    if isinstance(curve, ConvexCurve):
        return curve.vertices
    v = np.asarray(curve, dtype=float).reshape(-1, 2)
    if len(v) >= 2 and np.array_equal(v[0], v[-1]):
        v = v[:-1]
    if len(v) < 3:
        raise GeometryError("degenerate curve: fewer than 3 vertices")
    return np.ascontiguousarray(v)


def signed_distance(curve, x, nthreads=1):
    """Signed distance to the boundary of a convex polygon, negative inside.

    ``x`` may be a single point or an array of points of shape ``(..., 2)``.
    """
    verts = _as_polygon(curve)
    pts = np.asarray(x, dtype=float)
    flat = pts.reshape(-1, 2)
    out = np.empty(flat.shape[0])
    kernels.polygon_signed_distance(np.ascontiguousarray(flat[:, 0]),
                                    np.ascontiguousarray(flat[:, 1]), verts, out, nthreads)
    if pts.ndim == 1:
        return float(out[0])
    return out.reshape(pts.shape[:-1])


def signed_distance_grid(curve, grid, nthreads=1):
    X, Y = grid.mesh()
    out = np.empty(grid.size)
    kernels.polygon_signed_distance(np.ascontiguousarray(X.ravel()), np.ascontiguousarray(Y.ravel()),
                                    _as_polygon(curve), out, nthreads)
    return out.reshape(grid.shape)


def _point_to_polyline(points, poly, chunk=2048):
    a = poly
    e = np.roll(poly, -1, axis=0) - a
    l2 = np.einsum("ij,ij->i", e, e)
    safe = np.where(l2 > 0, l2, 1.0)
    out = np.empty(len(points))
    for s in range(0, len(points), chunk):
        p = points[s:s + chunk]
        rx = p[:, None, 0] - a[None, :, 0]
        ry = p[:, None, 1] - a[None, :, 1]
        t = np.clip((rx * e[:, 0] + ry * e[:, 1]) / safe, 0.0, 1.0)
        dx = rx - t * e[:, 0]
        dy = ry - t * e[:, 1]
        out[s:s + chunk] = np.sqrt(np.min(dx * dx + dy * dy, axis=1))
    return out


def hausdorff(a, b):
    """Hausdorff distance between two closed polygonal curves (vertex-to-boundary, both ways)."""
    pa = _as_polygon(a)
    pb = _as_polygon(b)
    return float(max(_point_to_polyline(pa, pb).max(), _point_to_polyline(pb, pa).max()))


# -- marching squares -------------------------------------------------------

def extract_level_set(field, level=0.0):
    """Contours of the bilinear interpolant of ``field`` at ``level``.

    Returns a list of ``(k, 2)`` arrays. Closed contours repeat their first
    vertex at the end; contours leaving the grid are open. The sub-level region
    lies to the left of the direction of travel, so closed contours around a
    sub-level basin run counterclockwise. Saddle cells are resolved by the
    average of the four corners.
    """
    g = field.grid
    f = field.values - level
    below = f < 0.0
    # corner codes a=(j,i) b=(j,i+1) c=(j+1,i+1) d=(j+1,i)
    a, b, c, d = below[:-1, :-1], below[:-1, 1:], below[1:, 1:], below[1:, :-1]
    mixed = ~((a == b) & (b == c) & (c == d))
    js, is_ = np.nonzero(mixed)

    def point(edge):
        kind, j, i = edge
        if kind == 0:  # horizontal edge (j,i)-(j,i+1)
            f0, f1 = f[j, i], f[j, i + 1]
            t = f0 / (f0 - f1)
            return (g.x0 + (i + t) * g.hx, g.y0 + j * g.hy)
        f0, f1 = f[j, i], f[j + 1, i]
        t = f0 / (f0 - f1)
        return (g.x0 + i * g.hx, g.y0 + (j + t) * g.hy)

    nxt = {}
    for j, i in zip(js.tolist(), is_.tolist()):
        corners = (below[j, i], below[j, i + 1], below[j + 1, i + 1], below[j + 1, i])
        # cell boundary edges in CCW order: a->b, b->c, c->d, d->a
        edges = ((0, j, i), (1, j, i + 1), (0, j + 1, i), (1, j, i))
        starts, ends = [], []
        for k in range(4):
            s0, s1 = corners[k], corners[(k + 1) % 4]
            if s0 and not s1:
                starts.append(k)
            elif s1 and not s0:
                ends.append(k)
        if len(starts) == 1:
            nxt[edges[starts[0]]] = edges[ends[0]]
            continue
        center_below = (f[j, i] + f[j, i + 1] + f[j + 1, i + 1] + f[j + 1, i]) / 4.0 < 0.0
        for s in starts:
            if center_below:
                e = min(ends, key=lambda k: (k - s) % 4)
            else:
                e = min(ends, key=lambda k: (s - k) % 4)
            nxt[edges[s]] = edges[e]

    targets = set(nxt.values())
    contours = []
    visited = set()
    for start in [e for e in nxt if e not in targets] + list(nxt):
        if start in visited:
            continue
        chain = [start]
        visited.add(start)
        cur = start
        closed = False
        while cur in nxt:
            cur = nxt[cur]
            if cur == start:
                closed = True
                break
            if cur in visited:
                break
            visited.add(cur)
            chain.append(cur)
        pts = [point(e) for e in chain]
        if closed:
            pts.append(pts[0])
        contours.append(np.array(pts))
    return contours


# -- half-plane intersection -----------------------------------------------

def _line_intersection(n1, b1, n2, b2):
    det = n1[0] * n2[1] - n1[1] * n2[0]
    return np.array([(b1 * n2[1] - b2 * n1[1]) / det, (n1[0] * b2 - n2[0] * b1) / det])


def half_plane_intersection(points, normals, offsets, tol=1e-12):
    """Intersect the half-planes ``(x - y_i) . n_i <= c_i``.

    Returns a :class:`ConvexCurve`, or :data:`VANISHED` when the intersection
    is empty. Raises :class:`GeometryError` if it is nonempty but unbounded.
    """
    y = np.asarray(points, dtype=float).reshape(-1, 2)
    n = np.asarray(normals, dtype=float).reshape(-1, 2)
    c = np.broadcast_to(np.asarray(offsets, dtype=float), (len(y),))
    rhs = np.einsum("ij,ij->i", n, y) + c
    ang = np.arctan2(n[:, 1], n[:, 0])
    order = np.lexsort((rhs, ang))
    ang, n, rhs = ang[order], n[order], rhs[order]

    srt = np.sort(ang)
    gaps = np.diff(np.concatenate([srt, [srt[0] + 2 * np.pi]]))
    if len(y) < 3 or gaps.max() >= np.pi - 1e-12:
        res = linprog(np.zeros(2), A_ub=n, b_ub=rhs, bounds=[(None, None)] * 2, method="highs")
        if res.status == 2:
            return VANISHED
        raise GeometryError("half-plane intersection is unbounded")

    # keep the tightest constraint among equal directions
    keep = np.ones(len(ang), dtype=bool)
    keep[1:] = np.abs(np.diff(ang)) > 1e-15
    ang, n, rhs = ang[keep], n[keep], rhs[keep]

    def outside(p, k):
        return n[k] @ p - rhs[k] > tol * max(1.0, abs(rhs[k]))

    dq = []
    for k in range(len(ang)):
        while len(dq) >= 2 and outside(_line_intersection(n[dq[-1]], rhs[dq[-1]], n[dq[-2]], rhs[dq[-2]]), k):
            dq.pop()
        while len(dq) >= 2 and outside(_line_intersection(n[dq[0]], rhs[dq[0]], n[dq[1]], rhs[dq[1]]), k):
            dq.pop(0)
        if dq and abs(n[dq[-1]][0] * n[k][1] - n[dq[-1]][1] * n[k][0]) < 1e-15 and n[dq[-1]] @ n[k] > 0:
            continue
        dq.append(k)
    while len(dq) >= 3 and outside(_line_intersection(n[dq[-1]], rhs[dq[-1]], n[dq[-2]], rhs[dq[-2]]), dq[0]):
        dq.pop()
    while len(dq) >= 3 and outside(_line_intersection(n[dq[0]], rhs[dq[0]], n[dq[1]], rhs[dq[1]]), dq[-1]):
        dq.pop(0)
    if len(dq) < 3:
        return VANISHED

    m = len(dq)
    verts = np.array([_line_intersection(n[dq[k - 1]], rhs[dq[k - 1]], n[dq[k]], rhs[dq[k]])
                      for k in range(m)])
    scale = max(1.0, float(np.max(np.abs(rhs))))
    if np.any(verts @ n.T - rhs[None, :] > 1e-9 * scale):
        return VANISHED
    curve = ConvexCurve(verts, n[dq], check=False)
    if abs(curve.area()) <= 1e-14 * scale * scale:
        return VANISHED
    return curve


# -- polygon CSV -------------------------------------------------------------

def write_polygon_csv(path, curve):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "nx", "ny"])
        for (x, y), (a, b) in zip(curve.vertices, curve.normals):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(a)), repr(float(b))])


def read_polygon_csv(path):
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    data = np.array([[float(r["x"]), float(r["y"]), float(r["nx"]), float(r["ny"])] for r in rows])
    return ConvexCurve(data[:, :2], data[:, 2:])
