"""Exact limit interface for convex initial data.

For a convex curve with supporting pairs ``(y_i, n_i)`` and speeds ``c_i``,
``v(t, x) = max_i (x - y_i) . n_i - c_i t`` is convex in ``x`` and its zero
level set is the boundary of the intersection of the moving half-planes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import (VANISHED, ConvexCurve, GeometryError, ScalarField, half_plane_intersection,
                       signed_distance, write_polygon_csv)
from .frontspeed import SpeedTable, interp_speed

_CHUNK = 4096


class HopfError(ValueError):
    pass


class HopfEvaluator:
    """Immutable evaluator of ``v``, its cutoff and the moving interface.

    ``speeds`` is a :class:`SpeedTable`, a positive scalar, or an array with one
    speed per vertex of ``gamma0``.
    """

    def __init__(self, gamma0, speeds, delta=None):
        if not isinstance(gamma0, ConvexCurve):
            raise HopfError("gamma0 must be a ConvexCurve")
        self.gamma0 = gamma0
        self.points = gamma0.vertices.copy()
        self.normals = gamma0.normals.copy()
        if isinstance(speeds, SpeedTable):
            c = interp_speed(speeds, self.normals)
            self.table = speeds
        else:
            c = np.broadcast_to(np.asarray(speeds, dtype=float), (len(self.points),)).copy()
            self.table = None
        c = np.atleast_1d(c).astype(float)
        if np.any(~np.isfinite(c)) or np.any(c <= 0):
            raise HopfError("all speeds must be positive")
        self.speeds = c
        self._base = np.einsum("ij,ij->i", self.normals, self.points)
        rmin = gamma0.min_curvature_radius()
        if delta is None:
            delta = 0.1 * rmin if np.isfinite(rmin) else 0.0
        if delta < 0 or delta > 0.2 * rmin * (1 + 1e-12):
            raise HopfError(f"cutoff delta={delta} must lie in [0, 0.2 * min curvature radius = {0.2 * rmin:.4g}]")
        self.delta = float(delta)
        for arr in (self.points, self.normals, self.speeds, self._base):
            arr.setflags(write=False)

    @property
    def max_speed(self):
        return float(self.speeds.max())

    def value(self, t, x):
        """``v(t, x)`` for a point or an array of points with trailing dimension 2."""
        if t < 0:
            raise HopfError("t must be nonnegative")
        pts = np.asarray(x, dtype=float)
        flat = pts.reshape(-1, 2)
        shift = self._base + self.speeds * t
        out = np.empty(flat.shape[0])
        for s in range(0, flat.shape[0], _CHUNK):
            blk = flat[s:s + _CHUNK]
            out[s:s + _CHUNK] = np.max(blk @ self.normals.T - shift[None, :], axis=1)
        if pts.ndim == 1:
            return float(out[0])
        return out.reshape(pts.shape[:-1])

    def cutoff(self, t, x):
        v = self.value(t, x)
        return np.maximum(-self.delta, v) if np.ndim(v) else max(-self.delta, v)

    def value_grid(self, t, grid):
        X, Y = grid.mesh()
        return ScalarField(grid, self.value(t, np.stack([X, Y], axis=-1)))

    def interface(self, t):
        if t < 0:
            raise HopfError("t must be nonnegative")
        out = half_plane_intersection(self.points, self.normals, self.speeds * t)
        # offsets are nonnegative, so the region contains the initial one
        assert out is not VANISHED, "interface vanished for nonnegative offsets"
        return out

    def signed_distance(self, t, x, nthreads=1):
        return signed_distance(self.interface(t), x, nthreads)

    def signed_distance_grid(self, t, grid, nthreads=1):
        X, Y = grid.mesh()
        return self.signed_distance(t, np.stack([X, Y], axis=-1), nthreads)


def hopf_value(ev, t, x):
    return ev.value(t, x)


def hopf_cutoff(ev, t, x):
    return ev.cutoff(t, x)


def interface_at(ev, t):
    return ev.interface(t)


def signed_distance_t(ev, t, x):
    return ev.signed_distance(t, x)


def time_tag(t):
    return f"{t:.6g}"


def write_interface(out_dir, ev, t):
    path = Path(out_dir) / f"hopf-interface-{time_tag(t)}.csv"
    write_polygon_csv(path, ev.interface(t))
    return path


def write_value_grid(out_dir, ev, t, grid):
    from .rdsim import RDState, write_snapshot

    path = Path(out_dir) / f"hopf-grid-{time_tag(t)}.bin"
    write_snapshot(path, RDState(t, ev.value_grid(t, grid)))
    return path


__all__ = ["HopfError", "HopfEvaluator", "hopf_value", "hopf_cutoff", "interface_at",
           "signed_distance_t", "write_interface", "write_value_grid", "GeometryError"]
