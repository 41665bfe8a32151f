"""Verification experiments: convergence to the limit interface, generation,
expansion, and the vanishing-viscosity regularization."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .frontspeed import SpeedTable
from .geometry import ConvexCurve, GridSpec, ScalarField, extract_level_set, hausdorff, signed_distance_grid
from .hj import ViscousConfig, run_viscous
from .hopf import HopfEvaluator
from .rdsim import (BOUND_TOL, RDState, ScaledRunConfig, SolverConfig, SolverError, cfl_dt, run_scaled,
                    run_unscaled, scaled_grid)

logger = logging.getLogger(__name__)


class HarnessError(ValueError):
    pass


# -- convergence -------------------------------------------------------------------

@dataclass
class ConvergenceConfig:
    epsilons: tuple
    beta: float
    tau: float
    T: float
    sample_times: tuple
    nl: object
    gamma0: ConvexCurve
    table: SpeedTable
    eta: float = 0.1
    m: float = 0.9
    w: float = 0.1
    h: float = 0.25
    pad: float = 20.0
    node_cap: int = 40_000_000
    workers: int = 1

    def __post_init__(self):
        self.epsilons = tuple(float(e) for e in self.epsilons)
        self.sample_times = tuple(float(t) for t in self.sample_times)
        if not self.epsilons:
            raise HarnessError("at least one epsilon is required")
        if any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise HarnessError("epsilons must be strictly decreasing")
        if not self.beta > 0:
            raise HarnessError("beta must be positive")
        if not 0 < self.tau < self.T:
            raise HarnessError("need 0 < tau < T")
        if not 0 < self.eta < 1:
            raise HarnessError("eta must lie in (0, 1)")
        if not self.sample_times or any(t < self.tau - 1e-12 or t > self.T + 1e-12 for t in self.sample_times):
            raise HarnessError("sample times must lie in [tau, T]")
        # band membership must be resolved by the scaled grid
        coarse = max(self.epsilons) * self.h
        if self.beta <= 4 * coarse:
            raise HarnessError(f"beta={self.beta} must exceed 4 * scaled spacing = {4 * coarse:.4g}")


@dataclass
class ConvergenceRecord:
    epsilon: float
    t: float
    M_in: float
    M_out: float
    layer_hausdorff: float


def band_metrics(u, d, beta):
    """``sup |1 - u|`` over ``d <= -beta`` and ``sup u`` over ``d >= beta`` (nan if a band is empty)."""
    inner = d <= -beta
    outer = d >= beta
    m_in = float(np.max(np.abs(1.0 - u[inner]))) if inner.any() else float("nan")
    m_out = float(np.max(u[outer])) if outer.any() else float("nan")
    return m_in, m_out


def layer_curve(field, level=0.5):
    """Largest closed ``level`` contour, or None."""
    best, area = None, 0.0
    for c in extract_level_set(field, level):
        if len(c) < 4 or not np.array_equal(c[0], c[-1]):
            continue
        x, y = c[:-1, 0], c[:-1, 1]
        a = abs(0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)))
        if a > area:
            best, area = c[:-1], a
    return best


def _records_for(snaps, ev, beta, workers):
    out = []
    for s in snaps:
        d = signed_distance_grid(ev.interface(s.time), s.field.grid, workers)
        m_in, m_out = band_metrics(s.field.values, d, beta)
        curve = layer_curve(s.field)
        lh = hausdorff(curve, ev.interface(s.time)) if curve is not None else float("nan")
        out.append((s.time, m_in, m_out, lh))
    return out


@dataclass
class ConvergenceResult:
    records: list
    failures: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def run_convergence(cfg, backend=None):
    """Scaled runs for every epsilon, scored against the Hopf interface."""
    ev = HopfEvaluator(cfg.gamma0, cfg.table)
    xmin, xmax, ymin, ymax = ev.interface(cfg.T).bounds()
    margin = cfg.beta + 0.1
    extent = (xmin - margin, xmax + margin, ymin - margin, ymax + margin)
    runs = []
    for eps in cfg.epsilons:
        run = ScaledRunConfig(eps, cfg.T, cfg.gamma0, m=cfg.m, w=cfg.w, h=cfg.h,
                              snapshot_times=cfg.sample_times, extent=extent, pad=cfg.pad,
                              node_cap=cfg.node_cap, workers=cfg.workers)
        grid = scaled_grid(run, cfg.nl)
        if grid.size > cfg.node_cap:
            raise HarnessError(f"epsilon={eps}: {grid.size} nodes exceed the cap of {cfg.node_cap}")
        runs.append(run)

    result = ConvergenceResult([])
    for run in runs:
        eps = run.epsilon
        snaps = run_scaled(run, cfg.nl, backend)
        meta = snaps.meta
        result.meta[eps] = {"nodes": meta["unscaled_grid"].size, "steps": meta["steps"],
                            "bounds_ok": meta["bounds_ok"], "min_seen": meta["min_seen"],
                            "max_seen": meta["max_seen"]}
        if meta["front_contact"]:
            msg = f"epsilon={eps}: front reached the box boundary at t={meta['contact_time']:.4g}"
            logger.error(msg)
            result.failures[eps] = msg
            continue
        for t, m_in, m_out, lh in _records_for(snaps, ev, cfg.beta, cfg.workers):
            result.records.append(ConvergenceRecord(eps, t, m_in, m_out, lh))
    return result


def write_convergence_csv(path, records):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epsilon", "t", "M_in", "M_out", "layer_hausdorff"])
        for r in records:
            w.writerow([repr(r.epsilon), repr(float(r.t)), repr(r.M_in), repr(r.M_out), repr(r.layer_hausdorff)])
    return Path(path)


# -- generation ----------------------------------------------------------------------

@dataclass
class GenerationResult:
    epsilons: tuple
    t_gen: tuple
    failures: dict
    slope: float
    residual: float
    bounds_ok: bool = True


def fit_through_origin(x, y):
    """Least-squares slope of ``y = s x`` and the relative residual ``|y - s x| / |y|``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = float(x @ y / (x @ x))
    ny = float(np.linalg.norm(y))
    res = float(np.linalg.norm(y - s * x) / ny) if ny > 0 else 0.0
    return s, res


def run_generation(nl, gamma0, m, w, eta, epsilons, beta_gen=0.3, horizon=40.0, h=0.25, workers=1,
                   backend=None):
    """Earliest scaled time at which ``u >= 1 - eta`` on ``{d0 <= -beta_gen}``, per epsilon.

    The threshold is tested after every step, so ``t_gen`` is exact to one
    time step. ``horizon`` is in unscaled time units.
    """
    if not 0 < eta < 1:
        raise HarnessError("eta must lie in (0, 1)")
    if not beta_gen > 0:
        raise HarnessError("beta_gen must be positive")
    xmin, xmax, ymin, ymax = gamma0.bounds()
    times, failures = [], {}
    ok = True
    for eps in epsilons:
        run = ScaledRunConfig(eps, horizon * eps, gamma0, m=m, w=w, h=h,
                              extent=(xmin, xmax, ymin, ymax), workers=workers)
        sgrid = scaled_grid(run, nl).scaled(eps)
        mask = np.flatnonzero(signed_distance_grid(gamma0, sgrid, workers) <= -beta_gen)
        if mask.size == 0:
            raise HarnessError(f"no grid node lies deeper than beta_gen={beta_gen}")
        target = 1.0 - eta
        if m >= target:
            times.append(0.0)
            continue
        hit = []

        def monitor(n, t, u, mask=mask, hit=hit):
            if u.ravel()[mask].min() >= target:
                hit.append(t)
                return True
            return False

        snaps = run_scaled(run, nl, backend, monitor=monitor)
        ok = ok and snaps.meta["bounds_ok"]
        if hit:
            times.append(hit[0] * eps)
        else:
            times.append(float("nan"))
            failures[eps] = f"threshold {target} not reached within scaled time {horizon * eps:.4g}"
    if failures:
        slope, res = float("nan"), float("nan")
    else:
        slope, res = fit_through_origin(epsilons, times)
    return GenerationResult(tuple(float(e) for e in epsilons), tuple(times), failures, slope, res, ok)


def write_generation_csv(path, result):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epsilon", "t_gen"])
        for e, t in zip(result.epsilons, result.t_gen):
            w.writerow([repr(e), repr(float(t))])
    return Path(path)


# -- expansion -----------------------------------------------------------------------

PLACEMENTS = ((0.0, 0.0), (0.31, 0.57), (0.62, 0.13), (0.85, 0.79))


@dataclass
class ExpansionResult:
    times: tuple
    t_sigma: float
    spread: float
    failures: dict
    bounds_ok: bool = True


def run_expansion(nl, radius, sigma, eta, placements=3, h=0.25, margin=20.0, t_max=200.0, workers=1,
                  backend=None):
    """First time ``u >= 1 - eta`` on a disc initially filled with ``sigma``.

    Repeated for several placements of the disc relative to the cell lattice;
    ``t_sigma`` is the largest time and ``spread`` the relative range.
    """
    if not 0 < sigma <= 1 - eta:
        raise HarnessError("need 0 < sigma <= 1 - eta")
    if not 3 <= placements <= len(PLACEMENTS):
        raise HarnessError(f"placements must lie in [3, {len(PLACEMENTS)}]")
    target = 1.0 - eta
    times, failures = [], {}
    ok = True
    for k in range(placements):
        cx = PLACEMENTS[k][0] * nl.cell.L1
        cy = PLACEMENTS[k][1] * nl.cell.L2
        if sigma >= target:
            times.append(0.0)
            continue
        half = radius + margin
        i0, i1 = int(np.floor((cx - half) / h)), int(np.ceil((cx + half) / h))
        j0, j1 = int(np.floor((cy - half) / h)), int(np.ceil((cy + half) / h))
        grid = GridSpec(i1 - i0 + 1, j1 - j0 + 1, i0 * h, j0 * h, h, h)
        X, Y = grid.mesh()
        inside = (X - cx) ** 2 + (Y - cy) ** 2 <= radius * radius
        mask = np.flatnonzero(inside)
        u0 = ScalarField(grid, np.where(inside, float(sigma), 0.0))
        dt = min(cfl_dt(h), 0.9 / (4.0 / h ** 2 + nl.lipschitz_u()))
        cfg = SolverConfig(grid, dt, "dirichlet", workers=workers)
        hit = []

        def monitor(n, t, u, mask=mask, hit=hit):
            if u.ravel()[mask].min() >= target:
                hit.append(t)
                return True
            return False

        res = run_unscaled(u0, nl, cfg, n_steps=int(np.ceil(t_max / dt)), monitor=monitor, backend=backend)
        ok = ok and res.meta["bounds_ok"]
        if hit:
            times.append(hit[0])
        else:
            times.append(float("nan"))
            failures[k] = f"placement {k}: threshold not reached by t={t_max}"
    if failures:
        return ExpansionResult(tuple(times), float("nan"), float("nan"), failures, ok)
    tmax = max(times)
    spread = (tmax - min(times)) / tmax if tmax > 0 else 0.0
    return ExpansionResult(tuple(times), tmax, spread, failures, ok)


# -- regularization ------------------------------------------------------------------

@dataclass
class RegularizationRow:
    alpha: float
    sup_hausdorff: float
    snapshots: list


def _table_of(ev):
    if ev.table is not None:
        return ev.table
    if np.ptp(ev.speeds) == 0:
        return SpeedTable.constant(float(ev.speeds[0]))
    raise HarnessError("regularization needs a speed table when vertex speeds differ")


def run_regularization(ev, alphas, grid, T, snapshot_times=None, sigma=None, workers=1):
    """``sup_t d_H(Gamma^alpha_t, Gamma_t)`` for each alpha; ``sigma`` defaults to ``min(alpha, 0.1)``."""
    alphas = tuple(float(a) for a in alphas)
    if any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise HarnessError("alphas must be strictly decreasing")
    table = _table_of(ev)
    if snapshot_times is None:
        snapshot_times = tuple(np.linspace(0.0, T, 5)) if T > 0 else (0.0,)
    rows = []
    for a in alphas:
        cfg = ViscousConfig(a, table, sigma=min(a, 0.1) if sigma is None else sigma, workers=workers)
        snaps = run_viscous(cfg, ev, grid, T, snapshot_times)
        rows.append(RegularizationRow(a, max(s.hausdorff for s in snaps), snaps))
    return rows


def write_regularization_csv(path, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "sup_hausdorff"])
        for r in rows:
            w.writerow([repr(r.alpha), repr(r.sup_hausdorff)])
    return Path(path)


__all__ = ["HarnessError", "ConvergenceConfig", "ConvergenceRecord", "ConvergenceResult", "band_metrics",
           "layer_curve", "run_convergence", "write_convergence_csv", "GenerationResult", "run_generation",
           "fit_through_origin", "write_generation_csv", "ExpansionResult", "run_expansion",
           "RegularizationRow", "run_regularization", "write_regularization_csv", "RDState",
           "BOUND_TOL", "SolverError"]
