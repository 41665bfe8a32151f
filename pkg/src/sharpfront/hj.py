"""Grid solvers for ``w_t + |grad w| c(grad w/|grad w|) = 0`` and its viscous regularization.

Both use a monotone Lax-Friedrichs flux with global dissipation coefficients.
The viscous problem replaces the Hamiltonian by
``F(p) = r_s(|p|) (c(p/|p|) - alpha)``, ``r_s(s) = s^2 / sqrt(s^2 + sigma^2)``,
and adds ``alpha * Lap v``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import convolve1d

from ._backend import kernels
from .frontspeed import SpeedTable
from .geometry import ConvexCurve, GridSpec, ScalarField, extract_level_set, hausdorff, write_polygon_csv
from .hopf import HopfEvaluator, time_tag

STABILITY = 0.9
THETA_MARGIN = 0.05
RAMP_SLOPE = 1.1
"""Upper bound (rounded up) of the slope of ``r_s``, which peaks near 1.089."""


class HJError(ValueError):
    pass


@dataclass
class HJState:
    time: float
    field: ScalarField


def lf_theta(table, margin=THETA_MARGIN):
    """Dissipation coefficient bounding ``|dH/dp|`` for ``H(p) = |p| c(p/|p|)``."""
    return table.lipschitz_bound() * (1.0 + margin)


def lf_dt(grid, theta, fraction=STABILITY):
    return fraction / (theta / grid.hx + theta / grid.hy)


def _check_lf(grid, dt, theta):
    load = dt * (theta / grid.hx + theta / grid.hy)
    if not (dt > 0 and load <= STABILITY + 1e-12):
        raise HJError(f"Lax-Friedrichs stability violated: dt*(th/hx + th/hy) = {load:.4g} > {STABILITY}")


def lf_step(state, table, dt, theta=None, workers=1):
    grid = state.field.grid
    theta = lf_theta(table) if theta is None else theta
    _check_lf(grid, dt, theta)
    out = np.empty(grid.shape)
    kernels.hj_step(state.field.values, out, table.c_star, dt, grid.hx, grid.hy, theta, theta,
                    0.0, 1.0, False, workers)
    return HJState(state.time + dt, ScalarField(grid, out))


@dataclass
class ViscousConfig:
    alpha: float
    table: SpeedTable
    sigma: float = 1e-2
    workers: int = 1

    def __post_init__(self):
        if not self.alpha > 0:
            raise HJError("alpha must be positive")
        if self.alpha >= self.table.min_speed:
            raise HJError(f"alpha={self.alpha} must stay below the minimal speed {self.table.min_speed:.4g}")
        if not 0 < self.sigma <= 0.1:
            raise HJError("sigma must lie in (0, 0.1]")

    @property
    def theta(self):
        return RAMP_SLOPE * self.table.lipschitz_bound()

    @property
    def band(self):
        return (self.alpha, 2.0 * self.alpha)

    def stable_dt(self, grid, fraction=STABILITY):
        th = self.theta
        return fraction / (th / grid.hx + th / grid.hy + 2 * self.alpha * (1 / grid.hx ** 2 + 1 / grid.hy ** 2))

    def check_dt(self, grid, dt):
        th = self.theta
        load = dt * (th / grid.hx + th / grid.hy + 2 * self.alpha * (1 / grid.hx ** 2 + 1 / grid.hy ** 2))
        if not (dt > 0 and load <= STABILITY + 1e-12):
            raise HJError(f"viscous step unstable: load {load:.4g} > {STABILITY}")


def ramp(s, sigma):
    s = np.asarray(s, dtype=float)
    return s * s / np.sqrt(s * s + sigma * sigma)


def viscous_step(state, cfg, dt):
    grid = state.field.grid
    cfg.check_dt(grid, dt)
    out = np.empty(grid.shape)
    th = cfg.theta
    kernels.hj_step(state.field.values, out, cfg.table.c_star, dt, grid.hx, grid.hy, th, th,
                    cfg.alpha, cfg.sigma, True, cfg.workers)
    return HJState(state.time + dt, ScalarField(grid, out))


# -- diagnostics -------------------------------------------------------------------

def gradient_norm(field):
    """Euclidean norm of the central-difference gradient at interior nodes."""
    v = field.values
    g = field.grid
    gx = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * g.hx)
    gy = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * g.hy)
    return np.sqrt(gx * gx + gy * gy)


def min_second_difference(field):
    v = field.values
    dxx = v[:, 2:] - 2 * v[:, 1:-1] + v[:, :-2]
    dyy = v[2:, :] - 2 * v[1:-1, :] + v[:-2, :]
    return float(min(dxx.min(), dyy.min()))


def _quartic_kernel(radius, h):
    k = int(np.ceil(radius / h))
    s = np.arange(-k, k + 1) * h / radius
    w = np.clip(1.0 - s * s, 0.0, None) ** 2
    return w / w.sum(), k


def make_initial_viscous(ev, cfg, grid, radius=None, offset=None, mu=None):
    """Smooth strictly convex ``v0`` with ``v_delta + alpha <= v0 <= v_delta + 2 alpha``.

    ``v0 = (1 - kappa) ((1 - mu) K * v_delta + mu q) + offset`` where ``K`` is a
    tensor quartic bump and ``q(x) = sqrt(1 + |x - x_c|^2)``. The contraction
    ``kappa`` spends a quarter of the band on gradient slack, so that difference
    quotients stay below 1 near the smoothed kinks. All bounds are checked on
    the grid.
    """
    a = cfg.alpha
    if not ev.delta > 2 * a:
        raise HJError(f"cutoff delta={ev.delta:.4g} must exceed 2 alpha={2 * a:.4g}, "
                      "otherwise the regularized zero level set can be empty")
    if a < max(grid.hx, grid.hy):
        raise HJError(f"alpha={a} must be at least the grid spacing so the initial smoothing is resolved")
    radius = a if radius is None else radius
    offset = 1.25 * a if offset is None else offset
    mu = 1e-3 * a if mu is None else mu
    wx, kx = _quartic_kernel(radius, grid.hx)
    wy, ky = _quartic_kernel(radius, grid.hy)
    big = GridSpec(grid.nx + 2 * kx, grid.ny + 2 * ky, grid.x0 - kx * grid.hx, grid.y0 - ky * grid.hy,
                   grid.hx, grid.hy)
    X, Y = big.mesh()
    vd_big = ev.cutoff(0.0, np.stack([X, Y], axis=-1))
    sm = convolve1d(convolve1d(vd_big, wx, axis=1, mode="nearest"), wy, axis=0, mode="nearest")
    sm = sm[ky:ky + grid.ny, kx:kx + grid.nx]
    vd = vd_big[ky:ky + grid.ny, kx:kx + grid.nx]

    X, Y = grid.mesh()
    xc = ev.gamma0.vertices.mean(axis=0)
    q = np.sqrt(1.0 + (X - xc[0]) ** 2 + (Y - xc[1]) ** 2)
    base = (1.0 - mu) * sm + mu * q
    kappa = 0.25 * a / max(1.0, float(np.abs(base).max()))
    v0 = (1.0 - kappa) * base + offset
    field = ScalarField(grid, v0)

    gap = v0 - vd
    lo, hi = float(gap.min()), float(gap.max())
    if lo < a - 1e-9:
        raise HJError(f"initial data violates the lower band: min(v0 - v_delta) = {lo:.6g} < alpha = {a}")
    if hi > 2 * a + 1e-9:
        raise HJError(f"initial data violates the upper band: max(v0 - v_delta) = {hi:.6g} > 2 alpha = {2 * a}")
    d2 = min_second_difference(field)
    if d2 < -1e-9:
        raise HJError(f"initial data is not discretely convex: min second difference {d2:.3g}")
    gmax = float(gradient_norm(field).max())
    if gmax > 1 + 1e-9:
        raise HJError(f"initial gradient bound violated: {gmax:.12g} > 1")
    return HJState(0.0, field)


# -- level sets and runs -------------------------------------------------------------

def zero_curve(field, level=0.0):
    """The single closed zero contour of ``field`` as a (non-validated) ConvexCurve."""
    contours = extract_level_set(field, level)
    if not contours:
        raise HJError("zero level set is empty")
    closed = [c for c in contours if len(c) > 3 and np.array_equal(c[0], c[-1])]
    if len(closed) != len(contours):
        raise HJError("zero level set touches the grid boundary")
    if len(closed) > 1:
        raise HJError(f"zero level set has {len(closed)} components")
    v = closed[0][:-1]
    g = field.grid
    x1 = g.x0 + (g.nx - 1) * g.hx
    y1 = g.y0 + (g.ny - 1) * g.hy
    if (v[:, 0].min() <= g.x0 + g.hx or v[:, 0].max() >= x1 - g.hx
            or v[:, 1].min() <= g.y0 + g.hy or v[:, 1].max() >= y1 - g.hy):
        raise HJError("zero level set touches the grid boundary")
    keep = np.any(np.roll(v, -1, axis=0) != v, axis=1)
    v = v[keep]
    e = np.roll(v, -1, axis=0) - v
    nrm = np.column_stack([e[:, 1], -e[:, 0]]) / np.linalg.norm(e, axis=1)[:, None]
    return ConvexCurve(v, nrm, check=False)


def _march(state, stepper, dt, times, on_snapshot):
    targets = sorted(float(t) for t in times)
    out = []
    k = 0
    while k < len(targets) and targets[k] <= state.time + 1e-12:
        out.append(on_snapshot(state))
        k += 1
    while k < len(targets):
        remaining = targets[k] - state.time
        n = max(1, int(np.ceil(remaining / dt - 1e-9)))
        h = remaining / n
        for _ in range(n):
            state = stepper(state, h)
        state = HJState(targets[k], state.field)
        out.append(on_snapshot(state))
        k += 1
    return out


@dataclass
class HJSnapshot:
    state: HJState
    curve: ConvexCurve
    hausdorff: float
    grad_max: float
    min_second_diff: float
    alpha: float = 0.0


def run_lf(ev, table, grid, times, w0=None, workers=1):
    """Lax-Friedrichs evolution of the signed distance to the initial curve."""
    if w0 is None:
        from .geometry import signed_distance_grid
        w0 = ScalarField(grid, signed_distance_grid(ev.gamma0, grid, workers))
    theta = lf_theta(table)
    dt = lf_dt(grid, theta)

    def snap(s):
        curve = zero_curve(s.field)
        return HJSnapshot(s, curve, hausdorff(curve, ev.interface(s.time)),
                          float(gradient_norm(s.field).max()), min_second_difference(s.field))

    return _march(HJState(0.0, w0), lambda s, h: lf_step(s, table, h, theta, workers), dt, times, snap)


def run_viscous(cfg, ev, grid, T, snapshot_times=None, check=True):
    """Evolve ``v^alpha`` and extract its zero level set at the snapshot times.

    With ``check`` the gradient bound, the convexity surrogate and the inner
    approximation property are asserted at every snapshot.
    """
    times = tuple(snapshot_times) if snapshot_times is not None else (T,)
    if any(t < 0 or t > T + 1e-12 for t in times):
        raise HJError("snapshot times must lie in [0, T]")
    state = make_initial_viscous(ev, cfg, grid)
    dt = cfg.stable_dt(grid)
    h = max(grid.hx, grid.hy)

    def snap(s):
        curve = zero_curve(s.field)
        gmax = float(gradient_norm(s.field).max())
        d2 = min_second_difference(s.field)
        if check:
            if gmax > 1 + 1e-6:
                raise HJError(f"gradient bound violated at t={s.time}: {gmax:.10g}")
            if d2 < -10 * h:
                raise HJError(f"convexity surrogate violated at t={s.time}: {d2:.3g}")
            inner = ev.signed_distance(s.time, curve.vertices)
            if np.any(inner >= 0):
                raise HJError(f"regularized interface leaves the limit region at t={s.time}")
        return HJSnapshot(s, curve, hausdorff(curve, ev.interface(s.time)), gmax, d2, cfg.alpha)

    return _march(state, lambda s, k: viscous_step(s, cfg, k), dt, times, snap)


def write_levelsets(out_dir, snaps, prefix="hj-levelset"):
    paths = []
    for s in snaps:
        p = Path(out_dir) / f"{prefix}-{time_tag(s.state.time)}.csv"
        write_polygon_csv(p, s.curve)
        paths.append(p)
    return paths


def write_metrics(path, snaps):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "alpha", "hausdorff_to_hopf", "grad_max", "min_second_diff"])
        for s in snaps:
            w.writerow([repr(float(s.state.time)), repr(float(s.alpha)), repr(s.hausdorff),
                        repr(s.grad_max), repr(s.min_second_diff)])
    return Path(path)


def hopf_grid_for(ev, T, h, margin=0.5):
    """Square-cell grid covering the limit region at time ``T`` plus ``margin``."""
    xmin, xmax, ymin, ymax = ev.interface(T).bounds()
    return GridSpec.covering(xmin - margin, xmax + margin, ymin - margin, ymax + margin, h)


__all__ = ["HJError", "HJState", "HopfEvaluator", "ViscousConfig", "lf_step", "viscous_step",
           "make_initial_viscous", "run_lf", "run_viscous", "zero_curve", "write_metrics",
           "write_levelsets", "gradient_norm", "min_second_difference", "ramp", "hopf_grid_for"]
