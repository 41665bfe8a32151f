"""Minimal front speeds c*(n): direct measurement and the KPP eigenvalue formula.

Under the KPP condition the minimal speed in direction n is

    c*(n) = min_{lam > 0} k(lam, n) / lam,

where k(lam, n) is the principal eigenvalue of
``psi -> Lap psi - 2 lam n.grad psi + (lam^2 + f_u(x, 0)) psi`` on the
periodic cell. Here k is obtained as the growth rate of the explicit
periodic evolution (power iteration in time).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._backend import kernels
from ._pykernels import catmull_rom
from .geometry import GridSpec
from .nonlinearity import check_monostable, eval_fu_zero
from .rdsim import SolverConfig, cfl_dt, initial_planar, run_unscaled, speed_bound

logger = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class SpeedError(RuntimeError):
    pass


def unit(theta):
    return np.array([math.cos(theta), math.sin(theta)])


# -- measurement ----------------------------------------------------------------

@dataclass
class SpeedMeasurementConfig:
    sigma: float = 0.5
    fit_window: tuple = (45.0, 150.0)
    level: float = 0.5
    h: float = 0.25
    cfl: float = 0.8
    width_periods: int = 1
    length: float | None = None
    """Strip length along n; derived from the speed bound when None."""
    back: float = 10.0
    n_fit: int = 22
    workers: int = 1

    def __post_init__(self):
        ta, tb = self.fit_window
        if not 0 < self.sigma < 1:
            raise SpeedError("sigma must lie in (0, 1)")
        if not (0 < ta < tb and ta >= 0.3 * tb):
            raise SpeedError("fit window must satisfy 0.3*t_b <= t_a < t_b")
        if not 0 < self.level < 1:
            raise SpeedError("tracked level must lie in (0, 1)")


def _front_positions(u, s, level):
    """Level crossing along each row (last node at or above ``level``), interpolated."""
    above = u >= level
    idx = np.where(above.any(axis=1), u.shape[1] - 1 - np.argmax(above[:, ::-1], axis=1), -1)
    out = np.full(u.shape[0], np.nan)
    for j, i in enumerate(idx):
        if 0 <= i < u.shape[1] - 1:
            a, b = u[j, i], u[j, i + 1]
            t = (a - level) / (a - b) if a != b else 0.0
            out[j] = s[i] + t * (s[i + 1] - s[i])
    return out


def measure_speed(n, nl, cfg=None, check=True, return_trace=False):
    """Spreading speed of planar data in direction ``n``.

    Returns ``(c_meas, fit_residual)`` where the residual is the RMS misfit of
    the linear fit of the median front position against time. With
    ``return_trace`` a third item holds the fitted samples and bound diagnostics.
    """
    cfg = cfg or SpeedMeasurementConfig()
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    if check:
        report = check_monostable(nl)
        if not report.passed:
            raise SpeedError(f"nonlinearity fails monostable checks: {report.failed()}")
    ta, tb = cfg.fit_window
    period = max(nl.cell.L1, nl.cell.L2)
    length = cfg.length
    if length is None:
        length = cfg.back + speed_bound(nl) * tb + 2 * period + 30.0
    length = math.ceil(length / period) * period
    width = cfg.width_periods * period
    h = cfg.h
    nx = int(round(length / h)) + 1
    # periodic transverse direction: ny nodes span exactly one width
    ny = max(3, int(round(width / h)))
    grid = GridSpec(nx, ny, 0.0, 0.0, h, h)
    rotation = np.column_stack([n, [-n[1], n[0]]])
    dt = cfl_dt(h, cfg.cfl)
    dt = min(dt, 0.9 / (4.0 / h ** 2 + nl.lipschitz_u()))
    times = np.linspace(ta, tb, cfg.n_fit)
    solver = SolverConfig(grid, dt, "strip", tuple(times), rotation=rotation, workers=cfg.workers)
    u0 = initial_planar((1.0, 0.0), cfg.back, cfg.sigma, grid)
    snaps = run_unscaled(u0, nl, solver)

    s = grid.x
    tt, X = [], []
    for snap in snaps:
        u = snap.field.values
        if u[:, -1 - int(2 * period / h):].max() > 1e-3:
            raise SpeedError(f"front reached the far end of the strip at t={snap.time:.3g}")
        pos = _front_positions(u, s, cfg.level)
        if np.isnan(pos).all():
            raise SpeedError("tracked level not found in the strip")
        tt.append(snap.time)
        X.append(float(np.nanmedian(pos)))
    tt, X = np.array(tt), np.array(X)
    if np.any(np.diff(X) < -2 * h):
        raise SpeedError("front position is not monotone in time")
    slope, icpt = np.polyfit(tt, X, 1)
    residual = float(np.sqrt(np.mean((X - (slope * tt + icpt)) ** 2)))
    if return_trace:
        trace = {"times": tt, "positions": X, "bounds_ok": snaps.meta["bounds_ok"],
                 "min_seen": snaps.meta["min_seen"], "max_seen": snaps.meta["max_seen"]}
        return float(slope), residual, trace
    return float(slope), residual


# -- KPP oracle ---------------------------------------------------------------------

def _cell_grid(nl, cell_grid):
    """Cell resolution and flags marking axes collapsed to a constant eigenfunction."""
    m1, m2 = cell_grid
    modes = nl.amplitude.modes
    # an axis along which f_u(x,0) is constant carries a constant principal eigenfunction
    flat2 = all(k2 == 0 or a == 0 for _, k2, a, _ in modes)
    flat1 = all(k1 == 0 or a == 0 for k1, _, a, _ in modes)
    return (4 if flat1 else m1), (4 if flat2 else m2), flat1, flat2


class _GrowthRate:
    """Principal eigenvalue k(lam, n) of the cell operator by power iteration in time."""

    def __init__(self, nl, n, cell_grid=(32, 32), tol=1e-11, t_max=400.0):
        m1, m2, flat1, flat2 = _cell_grid(nl, cell_grid)
        self.mesh_width = max(0.0 if flat1 else abs(n[0]) * nl.cell.L1 / m1,
                              0.0 if flat2 else abs(n[1]) * nl.cell.L2 / m2)
        self.hx = nl.cell.L1 / m1
        self.hy = nl.cell.L2 / m2
        x1 = np.arange(m1) * self.hx
        x2 = np.arange(m2) * self.hy
        X1, X2 = np.meshgrid(x1, x2)
        self.zeta = np.ascontiguousarray(eval_fu_zero(nl, np.stack([X1, X2], axis=-1)))
        self.n = n
        self.tol = tol
        self.t_max = t_max
        self.psi = np.ones((m2, m1))
        self.cache = {}

    def __call__(self, lam):
        if lam in self.cache:
            return self.cache[lam]
        hx2, hy2 = self.hx ** 2, self.hy ** 2
        dt = 0.5 * 0.9 * hx2 * hy2 / (2 * (hx2 + hy2))
        growth = lam * lam + float(np.abs(self.zeta).max())
        dt = min(dt, 0.1 / max(growth, 1e-12))
        if lam * self.mesh_width > 1.0:
            raise SpeedError(f"cell grid too coarse for lambda={lam:.3g}")
        psi = self.psi / self.psi.sum()
        buf = np.empty_like(psi)
        block = 50
        k_prev = None
        steps = 0
        while steps * dt < self.t_max:
            s0 = psi.sum()
            for _ in range(block):
                kernels.cell_step(psi, buf, self.zeta, dt, self.hx, self.hy, lam, self.n[0], self.n[1])
                psi, buf = buf, psi
            steps += block
            ratio = psi.sum() / s0
            k = (ratio ** (1.0 / block) - 1.0) / dt
            psi = psi / psi.sum()
            if k_prev is not None and abs(k - k_prev) <= self.tol * max(1.0, abs(k)):
                break
            k_prev = k
        else:
            raise SpeedError(f"growth rate did not converge for lambda={lam:.3g}")
        self.psi = psi
        self.cache[lam] = k
        return k


def kpp_speed_oracle(n, nl, lam_bounds=(0.2, 4.0), cell_grid=(32, 32), tol=1e-4, return_lambda=False):
    """Minimal KPP speed ``min_lam k(lam, n)/lam`` by golden-section search over ``lam_bounds``."""
    if not nl.kpp:
        raise SpeedError("oracle valid only under KPP")
    lo, hi = lam_bounds
    if not 0 < lo < hi:
        raise SpeedError("lambda bounds must satisfy 0 < lo < hi")
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    k = _GrowthRate(nl, n, cell_grid)

    def g(lam):
        return k(lam) / lam

    mid = 0.5 * (lo + hi)
    g_lo, g_mid, g_hi = g(lo), g(mid), g(hi)
    if not (g_mid < g_lo or g_mid < g_hi):
        raise SpeedError("k(lambda)/lambda is not quasi-convex on the bracket")
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    gc, gd = g(c), g(d)
    while b - a > tol:
        if gc <= gd:
            b, d, gd = d, c, gc
            c = b - GOLDEN * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + GOLDEN * (b - a)
            gd = g(d)
    lam = 0.5 * (a + b)
    if lam - lo < 2 * tol or hi - lam < 2 * tol:
        raise SpeedError(f"minimizer lambda={lam:.4g} at a bracket endpoint; widen lambda bounds")
    c_star = min(gc, gd, g(lam))
    if return_lambda:
        return c_star, lam
    return c_star


# -- tables --------------------------------------------------------------------------

@dataclass
class SpeedTable:
    thetas: np.ndarray
    c_star: np.ndarray
    methods: list = field(default_factory=list)
    residuals: np.ndarray | None = None

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, dtype=float)
        self.c_star = np.ascontiguousarray(self.c_star, dtype=float)
        n = len(self.c_star)
        if n < 4 or self.thetas.shape != (n,):
            raise SpeedError("speed table needs at least 4 angles")
        if not np.allclose(self.thetas, 2 * np.pi * np.arange(n) / n, atol=1e-12):
            raise SpeedError("table angles must be uniform on [0, 2 pi)")
        if np.any(self.c_star <= 0):
            raise SpeedError("all speeds must be positive")
        if not self.methods:
            self.methods = ["given"] * n
        if self.residuals is None:
            self.residuals = np.zeros(n)

    @classmethod
    def from_function(cls, func, n_theta=64, method="given"):
        th = 2 * np.pi * np.arange(n_theta) / n_theta
        return cls(th, [func(t) for t in th], [method] * n_theta)

    @classmethod
    def constant(cls, c, n_theta=16):
        return cls.from_function(lambda t: c, n_theta)

    @property
    def max_jump(self):
        return float(np.max(np.abs(np.diff(np.append(self.c_star, self.c_star[0])))))

    def jumps(self):
        return np.abs(np.diff(np.append(self.c_star, self.c_star[0])))

    @property
    def min_speed(self):
        return float(self.c_star.min())

    def lipschitz_bound(self, samples=4096):
        """max over directions of sqrt(c^2 + c'^2), the gradient bound of |p| c(p/|p|)."""
        phi = 2 * np.pi * np.arange(samples) / samples
        c = catmull_rom(self.c_star, phi)
        dc = np.gradient(np.append(c, c[0]), phi[1] - phi[0])[:-1]
        return float(np.sqrt(c * c + dc * dc).max())


def interp_speed(table, n):
    """Periodic Catmull-Rom interpolation of the table at direction(s) ``n``."""
    n = np.asarray(n, dtype=float)
    phi = np.mod(np.arctan2(n[..., 1], n[..., 0]), 2 * np.pi)
    out = catmull_rom(table.c_star, phi)
    return float(out) if np.ndim(out) == 0 else out


def build_speed_table(nl, n_theta=16, method="hybrid", measure_cfg=None, oracle_kwargs=None):
    if n_theta < 8:
        raise SpeedError("n_theta must be at least 8")
    if method not in ("measured", "kpp_oracle", "hybrid"):
        raise SpeedError(f"unknown method {method!r}")
    use_oracle = method == "kpp_oracle" or (method == "hybrid" and nl.kpp)
    thetas = 2 * np.pi * np.arange(n_theta) / n_theta
    speeds, methods, residuals = [], [], []
    for th in thetas:
        n = unit(th)
        try:
            if use_oracle:
                c, res, tag = kpp_speed_oracle(n, nl, **(oracle_kwargs or {})), 0.0, "kpp_oracle"
            else:
                c, res = measure_speed(n, nl, measure_cfg)
                tag = "measured"
        except Exception as exc:
            raise SpeedError(f"speed computation failed at theta={th:.6f}: {exc}") from exc
        logger.debug("theta=%.4f c=%.6f (%s)", th, c, tag)
        speeds.append(c)
        methods.append(tag)
        residuals.append(res)
    return SpeedTable(thetas, speeds, methods, np.array(residuals))


def write_speed_table(path, table):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "c_star", "method", "fit_residual"])
        for th, c, m, r in zip(table.thetas, table.c_star, table.methods, table.residuals):
            w.writerow([repr(float(th)), repr(float(c)), m, repr(float(r))])


def read_speed_table(path):
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    return SpeedTable([float(r["theta"]) for r in rows], [float(r["c_star"]) for r in rows],
                      [r["method"] for r in rows], np.array([float(r["fit_residual"]) for r in rows]))
