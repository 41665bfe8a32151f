"""Explicit finite differences for u_t = Lap u + f(x, u), and the scaled problem.

The scaled problem with parameter eps is never discretized directly: it is
recovered from the unscaled run through u_eps(t, x) = u(t/eps, x/eps).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _backend
from ._backend import kernels
from .geometry import ConvexCurve, GridSpec, ScalarField, signed_distance_grid

CONTACT_LEVEL = 1e-3
BOUND_TOL = 1e-12
BOUNDARY_MODES = {"dirichlet": 0, "neumann": 1, "strip": 2}


class SolverError(ValueError):
    pass


@dataclass
class RDState:
    time: float
    field: ScalarField


@dataclass
class SolverConfig:
    box: GridSpec
    dt: float
    boundary: str = "dirichlet"
    snapshot_times: tuple = ()
    rotation: np.ndarray | None = None
    """Columns are the physical directions of the grid axes (identity if None)."""
    workers: int = 1

    def __post_init__(self):
        if self.boundary not in BOUNDARY_MODES:
            raise SolverError(f"unknown boundary {self.boundary!r}")
        if self.box.nx < 3 or self.box.ny < 3:
            raise SolverError("solver grid needs at least 3 nodes per axis")
        hx2, hy2 = self.box.hx ** 2, self.box.hy ** 2
        limit = 0.9 * hx2 * hy2 / (2 * (hx2 + hy2))
        if not 0 < self.dt <= limit * (1 + 1e-12):
            raise SolverError(f"dt={self.dt:.6g} violates the CFL bound {limit:.6g}")

    def check_reaction(self, nl):
        """Monotonicity needs 1 - dt*(2/hx^2 + 2/hy^2) - dt*Lip(f) >= 0."""
        diag = self.dt * (2 / self.box.hx ** 2 + 2 / self.box.hy ** 2)
        if diag + self.dt * nl.lipschitz_u() > 1.0:
            raise SolverError("dt too large for the reaction term: scheme would not be monotone")


def cfl_dt(h, fraction=0.8):
    """A fraction of the largest admissible step on a square grid."""
    return fraction * 0.9 * h * h / 4.0


def physical_coordinates(grid, rotation=None):
    Xg, Yg = grid.mesh()
    if rotation is None:
        return Xg, Yg
    R = np.asarray(rotation, dtype=float)
    return R[0, 0] * Xg + R[0, 1] * Yg, R[1, 0] * Xg + R[1, 1] * Yg


def amplitude_on_grid(nl, grid, rotation=None):
    X, Y = physical_coordinates(grid, rotation)
    return np.ascontiguousarray(nl.p(X, Y), dtype=float)


def step(state, nl, cfg):
    """One explicit Euler step; returns a new state."""
    g = cfg.box
    p = amplitude_on_grid(nl, g, cfg.rotation)
    out = np.empty(g.shape)
    kernels.rd_step(state.field.values, out, p, cfg.dt, g.hx, g.hy, nl.profile.code,
                    nl.profile.r, BOUNDARY_MODES[cfg.boundary], cfg.workers)
    return RDState(state.time + cfg.dt, ScalarField(g, out))


class Snapshots(list):
    """List of :class:`RDState` with run metadata in ``meta``."""

    def __init__(self, items=(), meta=None):
        super().__init__(items)
        self.meta = meta or {}


def _contact(u):
    ring = np.concatenate([u[1, 1:-1], u[-2, 1:-1], u[1:-1, 1], u[1:-1, -2]])
    return bool(ring.max() > CONTACT_LEVEL)


def run_unscaled(u0, nl, cfg, n_steps=None, monitor=None, backend=None):
    """Evolve ``u0`` and return snapshots at ``cfg.snapshot_times`` (nearest step).

    ``monitor(n, t, u)`` is called after every step and may return True to stop.
    Dirichlet runs flag ``meta["front_contact"]`` when the ring next to the
    boundary exceeds the contact level.
    """
    k = kernels if backend is None else _backend.get(backend)
    g = u0.grid
    if g != cfg.box:
        raise SolverError("initial field grid differs from the solver box")
    u = u0.values.copy()
    if u.min() < -BOUND_TOL or u.max() > 1 + BOUND_TOL:
        raise SolverError("initial data must lie in [0, 1]")
    cfg.check_reaction(nl)
    p = amplitude_on_grid(nl, g, cfg.rotation)
    snap_steps = [int(round(t / cfg.dt)) for t in cfg.snapshot_times]
    total = max(snap_steps, default=0) if n_steps is None else int(n_steps)
    buf = np.empty_like(u)
    mode = BOUNDARY_MODES[cfg.boundary]
    dirichlet = mode == 0
    meta = {"front_contact": False, "contact_time": None, "bounds_ok": True,
            "min_seen": float(u.min()), "max_seen": float(u.max()), "steps": 0,
            "stopped_early": False, "backend": getattr(k, "__name__", "")}
    if dirichlet:
        u[0, :] = u[-1, :] = 0.0
        u[:, 0] = u[:, -1] = 0.0
    snaps = []
    pending = sorted(set(snap_steps))

    def record(n):
        lo, hi = float(u.min()), float(u.max())
        if lo < -BOUND_TOL or hi > 1 + BOUND_TOL:
            meta["bounds_ok"] = False
        snaps.append(RDState(n * cfg.dt, ScalarField(g, u.copy())))

    if pending and pending[0] == 0:
        record(0)
        pending.pop(0)
    for n in range(1, total + 1):
        k.rd_step(u, buf, p, cfg.dt, g.hx, g.hy, nl.profile.code, nl.profile.r, mode, cfg.workers)
        u, buf = buf, u
        meta["steps"] = n
        lo, hi = float(u.min()), float(u.max())
        if lo < meta["min_seen"]:
            meta["min_seen"] = lo
        if hi > meta["max_seen"]:
            meta["max_seen"] = hi
        if dirichlet and not meta["front_contact"] and (n % 25 == 0 or (pending and pending[0] == n)):
            if _contact(u):
                meta["front_contact"] = True
                meta["contact_time"] = n * cfg.dt
        if pending and pending[0] == n:
            record(n)
            pending.pop(0)
        if monitor is not None and monitor(n, n * cfg.dt, u):
            meta["stopped_early"] = True
            break
    if meta["min_seen"] < -BOUND_TOL or meta["max_seen"] > 1 + BOUND_TOL:
        meta["bounds_ok"] = False
    meta["final"] = RDState(meta["steps"] * cfg.dt, ScalarField(g, u.copy()))
    return Snapshots(snaps, meta)


# -- initial data -------------------------------------------------------------

def smoothstep(r):
    r = np.clip(r, 0.0, 1.0)
    return r ** 3 * (10.0 - 15.0 * r + 6.0 * r * r)


def initial_bump(gamma0, m, w, grid, nthreads=1):
    """``g(x) = m * s(-d0(x)/w)``: zero outside the curve, plateau ``m`` deeper than ``w``."""
    if not 0 <= m < 1:
        raise SolverError("bump amplitude must lie in [0, 1)")
    if not w > 0:
        raise SolverError("bump width must be positive")
    d0 = signed_distance_grid(gamma0, grid, nthreads)
    return ScalarField(grid, m * smoothstep(-d0 / w))


def initial_planar(n, offset, sigma, grid, rotation=None):
    """``sigma`` on the half-plane ``x.n <= offset``, zero elsewhere."""
    if not 0 <= sigma < 1:
        raise SolverError("sigma must lie in [0, 1)")
    X, Y = physical_coordinates(grid, rotation)
    return ScalarField(grid, np.where(X * n[0] + Y * n[1] <= offset, float(sigma), 0.0))


# -- scaled runs ---------------------------------------------------------------

@dataclass
class ScaledRunConfig:
    epsilon: float
    T: float
    gamma0: ConvexCurve
    m: float = 0.9
    w: float = 0.1
    h: float = 0.25
    """Unscaled grid spacing."""
    snapshot_times: tuple = ()
    extent: tuple | None = None
    """Scaled region ``(xmin, xmax, ymin, ymax)`` the front may reach by ``T``."""
    pad: float = 20.0
    """Unscaled margin beyond the extent, on top of four cell periods."""
    cfl: float = 0.8
    node_cap: int = 40_000_000
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise SolverError("epsilon must lie in (0, 1]")
        if not 0 <= self.m < 1:
            raise SolverError("bump amplitude m must lie in [0, 1)")
        if not self.w > 0:
            raise SolverError("bump width must be positive")
        if not self.T >= 0:
            raise SolverError("horizon must be nonnegative")


def speed_bound(nl):
    """Upper bound 2 sqrt(sup f(x,u)/u) for every spreading speed."""
    u = np.linspace(1e-6, 1.0, 4001)
    return 2.0 * np.sqrt(nl.p_max() * max(float(np.max(nl.profile(u) / u)), 0.0))


def scaled_grid(run, nl):
    eps = run.epsilon
    if run.extent is None:
        xmin, xmax, ymin, ymax = run.gamma0.bounds()
        r = speed_bound(nl) * run.T
        xmin, xmax, ymin, ymax = xmin - r, xmax + r, ymin - r, ymax + r
    else:
        xmin, xmax, ymin, ymax = run.extent
    margin = 4 * max(nl.cell.L1, nl.cell.L2) + run.pad
    h = run.h
    # node lattice anchored at the origin so every eps shares the same unscaled nodes
    i0 = int(np.floor((xmin / eps - margin) / h))
    i1 = int(np.ceil((xmax / eps + margin) / h))
    j0 = int(np.floor((ymin / eps - margin) / h))
    j1 = int(np.ceil((ymax / eps + margin) / h))
    return GridSpec(i1 - i0 + 1, j1 - j0 + 1, i0 * h, j0 * h, h, h)


def estimate_memory(grid, n_snapshots):
    return grid.size * 8 * (4 + n_snapshots)


def _aligned_steps(n_min, fractions, search=4):
    """Smallest step count >= n_min putting every time fraction on a step, if one is near."""
    for n in range(n_min, search * n_min + 1):
        if all(abs(f * n - round(f * n)) < 1e-9 * n for f in fractions):
            return n
    return n_min


def run_scaled(run, nl, backend=None, monitor=None):
    """Snapshots of the scaled solution at scaled times.

    The unscaled problem is solved on a box covering ``extent/eps`` plus a
    margin, and each snapshot is returned with coordinates and time multiplied
    by ``eps``. ``monitor`` is passed through and sees unscaled step, time and field.
    """
    eps = run.epsilon
    grid = scaled_grid(run, nl)
    if grid.size > run.node_cap:
        raise SolverError(f"{grid.size} nodes exceed the cap of {run.node_cap}")
    total = run.T / eps
    dt = cfl_dt(run.h, run.cfl)
    dt = min(dt, 0.9 / (4.0 / run.h ** 2 + nl.lipschitz_u()))
    n_steps = max(1, int(np.ceil(total / dt - 1e-9))) if total > 0 else 0
    if n_steps:
        n_steps = _aligned_steps(n_steps, [t / run.T for t in run.snapshot_times])
        dt = total / n_steps
    cfg = SolverConfig(grid, dt, "dirichlet", tuple(t / eps for t in run.snapshot_times),
                       workers=run.workers)
    sgrid = grid.scaled(eps)
    g0 = initial_bump(run.gamma0, run.m, run.w, sgrid, run.workers)
    u0 = ScalarField(grid, g0.values)
    res = run_unscaled(u0, nl, cfg, n_steps=n_steps, monitor=monitor, backend=backend)
    out = Snapshots([RDState(s.time * eps, ScalarField(sgrid, s.field.values)) for s in res], res.meta)
    if out.meta["contact_time"] is not None:
        out.meta["contact_time"] *= eps
    out.meta.update({"epsilon": eps, "unscaled_grid": grid, "dt": dt})
    return out


# -- output --------------------------------------------------------------------

def write_snapshot(path, state):
    """Flat row-major float64 dump plus a ``.hdr`` sidecar ``nx ny hx hy x0 y0 time``."""
    path = Path(path)
    g = state.field.grid
    state.field.values.astype("<f8").tofile(path)
    path.with_suffix(path.suffix + ".hdr").write_text(
        " ".join(repr(float(v)) if isinstance(v, float) else str(v)
                 for v in (g.nx, g.ny, g.hx, g.hy, g.x0, g.y0, float(state.time))) + "\n")


def read_snapshot(path):
    path = Path(path)
    parts = path.with_suffix(path.suffix + ".hdr").read_text().split()
    nx, ny = int(parts[0]), int(parts[1])
    hx, hy, x0, y0, t = (float(v) for v in parts[2:7])
    values = np.fromfile(path, dtype="<f8").reshape(ny, nx)
    return RDState(t, ScalarField(GridSpec(nx, ny, x0, y0, hx, hy), values))


def summary_rows(snapshots):
    rows = []
    contact_time = snapshots.meta.get("contact_time") if hasattr(snapshots, "meta") else None
    for s in snapshots:
        u = s.field.values
        g = s.field.grid
        contact = contact_time is not None and contact_time <= s.time
        rows.append((s.time, float(u.min()), float(u.max()), float(u.sum() * g.hx * g.hy), int(contact)))
    return rows


def write_summary_csv(path, snapshots):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "min", "max", "mass", "front_contact"])
        for t, lo, hi, mass, contact in summary_rows(snapshots):
            w.writerow([repr(t), repr(lo), repr(hi), repr(mass), contact])
