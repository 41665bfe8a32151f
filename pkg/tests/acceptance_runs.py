"""Computations behind the acceptance criteria.

Each ``criterion_N(out_dir, workers)`` writes its CSVs into ``out_dir`` and
returns a dict of results. CSVs carry no timings, so runs with different
worker counts can be compared byte for byte.
"""

import csv
import time
from pathlib import Path

import numpy as np

from sharpfront.frontspeed import (SpeedMeasurementConfig, SpeedTable, build_speed_table, kpp_speed_oracle,
                                   measure_speed, write_speed_table)
from sharpfront.geometry import ConvexCurve, GridSpec, ScalarField, signed_distance
from sharpfront.harness import (ConvergenceConfig, run_convergence, run_generation, run_regularization,
                                write_convergence_csv, write_generation_csv, write_regularization_csv)
from sharpfront.hj import hopf_grid_for, run_lf, write_metrics
from sharpfront.hopf import HopfEvaluator
from sharpfront.nonlinearity import Nonlinearity
from sharpfront.rdsim import SolverConfig, cfl_dt, run_unscaled

FISHER = Nonlinearity.fisher()
STRIPE_L = 4.0
DIRS = {"e1": (1.0, 0.0), "e2": (0.0, 1.0), "diag": (1.0, 1.0)}


def stripes(L):
    return Nonlinearity.fisher(modes=[[1, 0, 0.5, 0.0]], L1=L)


def _write(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return Path(path)


def _bounds(name, trace):
    return (name, trace["min_seen"], trace["max_seen"], int(trace["bounds_ok"]))


def criterion_1(out, workers):
    cfg = SpeedMeasurementConfig(workers=workers)
    rows, bounds, times = [], [], {}
    for name, n in DIRS.items():
        t0 = time.perf_counter()
        c, res, tr = measure_speed(n, FISHER, cfg, return_trace=True)
        times[name] = time.perf_counter() - t0
        rows.append((name, c, res, kpp_speed_oracle(n, FISHER)))
        bounds.append(_bounds(f"c1-measure-{name}", tr))
    _write(out / "c1-homogeneous-speed.csv", ["direction", "c_meas", "fit_residual", "c_oracle"], rows)
    return {"rows": rows, "bounds": bounds, "times": times}


def criterion_2(out, workers):
    nl = stripes(STRIPE_L)
    rows, bounds = [], []
    for h in (0.25, 0.125):
        cfg = SpeedMeasurementConfig(h=h, workers=workers)
        for name in ("e1", "e2"):
            c, res, tr = measure_speed(DIRS[name], nl, cfg, return_trace=True)
            rows.append(("measured", h, name, c))
            bounds.append(_bounds(f"c2-measure-{name}-h{h}", tr))
    for m in (32, 64):
        for name in ("e1", "e2"):
            rows.append(("oracle", 1.0 / m, name, kpp_speed_oracle(DIRS[name], nl, cell_grid=(m, m))))
    _write(out / "c2-heterogeneous-speed.csv", ["method", "h", "direction", "c"], rows)
    val = {(m, h, d): c for m, h, d, c in rows}
    gaps = {(m, h): abs(val[(m, h, "e1")] - val[(m, h, "e2")]) for m, h, _, _ in rows}
    return {"c": val, "gaps": gaps, "bounds": bounds}


def criterion_3(out, workers):
    nl = stripes(STRIPE_L)
    tables = {}
    for n_theta in (16, 32):
        t = build_speed_table(nl, n_theta, "hybrid")
        write_speed_table(out / f"c3-table-{n_theta}.csv", t)
        tables[n_theta] = t
    return {"tables": tables}


def hausdorff_to_circle(poly, R, n_samples=20000):
    """Distance between a convex polygon containing the origin and the circle of radius ``R``."""
    v = poly.vertices
    e = np.roll(v, -1, axis=0) - v
    s = np.clip(np.einsum("ij,ij->i", -v, e) / np.einsum("ij,ij->i", e, e), 0, 1)
    near = np.linalg.norm(v + s[:, None] * e, axis=1)
    from_poly = max(np.abs(np.linalg.norm(v, axis=1) - R).max(), np.abs(near - R).max())
    phi = 2 * np.pi * np.arange(n_samples) / n_samples
    pts = R * np.column_stack([np.cos(phi), np.sin(phi)])
    from_circle = np.abs(signed_distance(poly, pts)).max()
    return float(max(from_poly, from_circle))


def criterion_4(out, workers, c=2.0, R=1.0):
    ev = HopfEvaluator(ConvexCurve.circle(R, 256), c)
    rows = [(t, hausdorff_to_circle(ev.interface(t), R + c * t)) for t in (0.0, 0.5, 1.0)]
    rng = np.random.default_rng(20240601)
    x = rng.uniform(-4, 4, (10_000, 2))
    y = rng.uniform(-4, 4, (10_000, 2))
    t = rng.uniform(0, 1, 10_000)
    lam = rng.uniform(0, 1, (10_000, 1))
    lhs = np.array([ev.value(ti, p) for ti, p in zip(t, lam * x + (1 - lam) * y)])
    rhs = lam[:, 0] * np.array([ev.value(ti, p) for ti, p in zip(t, x)]) \
        + (1 - lam[:, 0]) * np.array([ev.value(ti, p) for ti, p in zip(t, y)])
    excess = float((lhs - rhs).max())
    _write(out / "c4-hopf-circle.csv", ["t", "hausdorff_to_exact"], rows)
    _write(out / "c4-convexity.csv", ["pairs", "max_excess"], [(10_000, excess)])
    return {"rows": rows, "excess": excess}


def criterion_5(out, workers, levels=(0.1, 0.05, 0.025)):
    ev = HopfEvaluator(ConvexCurve.circle(1.0, 256), 2.0)
    table = SpeedTable.constant(2.0)
    times = [k / 10 for k in range(11)]
    res = {}
    for h in levels:
        snaps = run_lf(ev, table, hopf_grid_for(ev, 1.0, h, 0.6), times, workers=workers)
        write_metrics(out / f"c5-lf-h{h}.csv", snaps)
        res[h] = max(s.hausdorff for s in snaps)
    _write(out / "c5-lf-summary.csv", ["h", "sup_hausdorff"], list(res.items()))
    return {"sup": res}


def criterion_6(out, workers, alphas=(0.2, 0.1, 0.05), h=0.05):
    ev = HopfEvaluator(ConvexCurve.circle(2.5, 256), 2.0, delta=0.45)
    grid = hopf_grid_for(ev, 1.0, h, 0.6)
    rows = run_regularization(ev, alphas, grid, 1.0, (0.0, 0.25, 0.5, 0.75, 1.0), workers=workers)
    write_regularization_csv(out / "c6-regularization.csv", rows)
    snaps = [s for r in rows for s in r.snapshots]
    write_metrics(out / "c6-viscous-metrics.csv", snaps)
    inside = min(float(-ev.signed_distance(s.state.time, s.curve.vertices).max()) for s in snaps)
    return {"rows": rows, "h": h, "grad_max": max(s.grad_max for s in snaps),
            "min_d2": min(s.min_second_diff for s in snaps), "inside_margin": inside}


def _sweep(nl, table, out, name, workers):
    cfg = ConvergenceConfig((0.08, 0.04, 0.02), 0.2, 0.2, 1.0, (0.2, 0.6, 1.0), nl, ConvexCurve.circle(1.0, 256),
                            table, workers=workers)
    t0 = time.perf_counter()
    res = run_convergence(cfg)
    wall = time.perf_counter() - t0
    write_convergence_csv(out / f"c7-convergence-{name}.csv", res.records)
    bounds = [(f"c7-{name}-eps{e}", m["min_seen"], m["max_seen"], int(m["bounds_ok"])) for e, m in res.meta.items()]
    return {"result": res, "wall": wall, "bounds": bounds}


def criterion_7(out, workers):
    homo = _sweep(FISHER, SpeedTable.constant(2.0, 16), out, "homogeneous", workers)
    nl = stripes(1.0)
    t0 = time.perf_counter()
    table = build_speed_table(nl, 16, "hybrid")
    write_speed_table(out / "c7-table-heterogeneous.csv", table)
    het = _sweep(nl, table, out, "heterogeneous", workers)
    het["wall"] += time.perf_counter() - t0
    return {"homogeneous": homo, "heterogeneous": het}


def criterion_8(out, workers):
    res = run_generation(FISHER, ConvexCurve.circle(1.0, 256), 0.5, 0.1, 0.05, [0.08, 0.04, 0.02], workers=workers)
    write_generation_csv(out / "c8-generation.csv", res)
    _write(out / "c8-fit.csv", ["slope", "relative_residual"], [(res.slope, res.residual)])
    return {"result": res}


def criterion_9(out, workers, pairs=10, steps=1000):
    nl = stripes(1.0)
    g = GridSpec(48, 40, -6.0, -5.0, 0.25, 0.25)
    rows = []
    for k in range(pairs):
        rng = np.random.default_rng(1000 + k)
        lo = rng.random(g.shape)
        hi = np.minimum(1.0, lo + rng.random(g.shape) * rng.uniform(0, 0.5))
        boundary = ("dirichlet", "neumann")[k % 2]
        cfg = SolverConfig(g, cfl_dt(0.25), boundary, workers=workers)
        a = run_unscaled(ScalarField(g, lo), nl, cfg, n_steps=steps).meta
        b = run_unscaled(ScalarField(g, hi), nl, cfg, n_steps=steps).meta
        gap = float((a["final"].field.values - b["final"].field.values).max())
        rows.append((k, boundary, gap, min(a["min_seen"], b["min_seen"]), max(a["max_seen"], b["max_seen"])))
    _write(out / "c9-comparison.csv", ["pair", "boundary", "max_lower_minus_upper", "min_seen", "max_seen"], rows)
    return {"rows": rows}


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9}
