"""Command-line entry point: ``sharpfront <subcommand> <config.yaml>``.

Exit codes: 0 success, 1 validation failure, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .config import ConfigError, load_config
from .frontspeed import write_speed_table
from .geometry import GridSpec
from .harness import (run_convergence, run_generation, run_regularization, write_convergence_csv,
                      write_generation_csv, write_regularization_csv)
from .hj import ViscousConfig, hopf_grid_for, run_lf, run_viscous, write_levelsets, write_metrics
from .hopf import HopfEvaluator, time_tag, write_interface, write_value_grid
from .nonlinearity import NonlinearityError, check_monostable
from .rdsim import run_scaled, write_snapshot, write_summary_csv

logger = logging.getLogger("sharpfront")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class ValidationFailure(Exception):
    pass


def _evaluator(cfg, nl=None):
    table = cfg.speed_table(nl)
    return HopfEvaluator(cfg.curve(), table, cfg.section("hopf")["delta"]), table


def cmd_check_nonlinearity(cfg, out):
    report = check_monostable(cfg.nonlinearity())
    path = out / "nonlinearity-report.txt"
    path.write_text("\n".join(report.lines()) + "\n")
    if not report.passed:
        raise ValidationFailure(f"monostable checks failed: {', '.join(report.failed())}")
    return [path]


def cmd_speed_table(cfg, out):
    table = cfg.speed_table()
    path = out / "speed-table.csv"
    write_speed_table(path, table)
    return [path]


def cmd_hopf(cfg, out):
    ev, _ = _evaluator(cfg)
    s = cfg.section("hopf")
    paths = [write_interface(out, ev, float(t)) for t in s["times"]]
    if s["grid_h"]:
        grid = hopf_grid_for(ev, max(s["times"]), float(s["grid_h"]), float(s["margin"]))
        paths += [write_value_grid(out, ev, float(t), grid) for t in s["times"]]
    return paths


def cmd_hj(cfg, out):
    ev, table = _evaluator(cfg)
    s = cfg.section("hj")
    grid = hopf_grid_for(ev, float(s["T"]), float(s["h"]), float(s["margin"]))
    times = [float(t) for t in s["times"]]
    if s["mode"] == "lf":
        snaps = run_lf(ev, table, grid, times, workers=cfg.workers)
    else:
        a = float(s["alpha"])
        sigma = float(s["sigma"]) if s["sigma"] is not None else min(a, 0.1)
        snaps = run_viscous(ViscousConfig(a, table, sigma, cfg.workers), ev, grid, float(s["T"]), times)
    return write_levelsets(out, snaps) + [write_metrics(out / "hj-metrics.csv", snaps)]


def cmd_simulate(cfg, out):
    run = cfg.scaled_run(cfg.curve())
    snaps = run_scaled(run, cfg.nonlinearity())
    paths = []
    for s in snaps:
        p = out / f"u-{time_tag(s.time)}.bin"
        write_snapshot(p, s)
        paths += [p, p.with_suffix(".bin.hdr")]
    p = out / "simulate-summary.csv"
    write_summary_csv(p, snaps)
    if snaps.meta["front_contact"]:
        raise RuntimeError(f"front reached the box boundary at t={snaps.meta['contact_time']:.4g}")
    return paths + [p]


def cmd_converge(cfg, out):
    nl = cfg.nonlinearity()
    curve = cfg.curve()
    conv = cfg.convergence(nl, curve, cfg.speed_table(nl))
    res = run_convergence(conv)
    path = write_convergence_csv(out / "convergence.csv", res.records)
    if res.failures:
        raise RuntimeError("; ".join(res.failures.values()))
    return [path]


def cmd_generation(cfg, out):
    g = cfg.section("converge")["generation"]
    res = run_generation(cfg.nonlinearity(), cfg.curve(), float(g["m"]), float(g["w"]), float(g["eta"]),
                         [float(e) for e in g["epsilons"]], beta_gen=float(g["beta_gen"]),
                         horizon=float(g["horizon"]), workers=cfg.workers)
    path = write_generation_csv(out / "generation.csv", res)
    if res.failures:
        raise RuntimeError("; ".join(res.failures.values()))
    return [path]


def cmd_regularization(cfg, out):
    ev, _ = _evaluator(cfg)
    s = cfg.section("hj")
    grid = hopf_grid_for(ev, float(s["T"]), float(s["h"]), float(s["margin"]))
    rows = run_regularization(ev, [float(a) for a in s["alphas"]], grid, float(s["T"]),
                              [float(t) for t in s["times"]],
                              sigma=None if s["sigma"] is None else float(s["sigma"]), workers=cfg.workers)
    return [write_regularization_csv(out / "regularization.csv", rows)]


COMMANDS = {
    "check-nonlinearity": cmd_check_nonlinearity,
    "speed-table": cmd_speed_table,
    "hopf": cmd_hopf,
    "hj": cmd_hj,
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "generation": cmd_generation,
    "regularization": cmd_regularization,
}


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def update_manifest(out, command, cfg, paths, wall):
    mpath = out / "manifest.json"
    manifest = {"outputs": []}
    if mpath.exists():
        try:
            manifest = json.loads(mpath.read_text())
        except json.JSONDecodeError:
            logger.warning("replacing unreadable manifest %s", mpath)
    names = {str(Path(p).relative_to(out)) for p in paths}
    entries = [e for e in manifest.get("outputs", []) if e.get("file") not in names]
    for p in paths:
        entries.append({"file": str(Path(p).relative_to(out)), "sha256": _sha256(p), "subcommand": command,
                        "config_sha256": cfg.digest, "wall_time_s": round(wall, 3)})
    manifest["outputs"] = sorted(entries, key=lambda e: e["file"])
    manifest["version"] = __version__
    manifest["backend"] = _backend.BACKEND
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return mpath


def build_parser():
    p = argparse.ArgumentParser(prog="sharpfront", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("config", help="YAML run configuration")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except (ConfigError, NonlinearityError, ValueError) as exc:
        print(f"sharpfront: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        paths = COMMANDS[args.command](cfg, out)
    except ValidationFailure as exc:
        print(f"sharpfront: {exc}", file=sys.stderr)
        for p in out.glob("nonlinearity-report.txt"):
            update_manifest(out, args.command, cfg, [p], time.perf_counter() - t0)
        return EXIT_INVALID
    except ConfigError as exc:
        print(f"sharpfront: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # any module error is a runtime failure
        logger.debug("runtime failure", exc_info=True)
        print(f"sharpfront: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    update_manifest(out, args.command, cfg, paths, time.perf_counter() - t0)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
