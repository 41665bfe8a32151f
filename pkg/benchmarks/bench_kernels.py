"""Compiled vs numpy kernel timings.

    python benchmarks/bench_kernels.py [--size 512] [--repeat 5] [--workers 1]

Prints one row per kernel with the best time of each backend, the speedup,
and the max abs difference between the two outputs.
"""

import argparse
import time

import numpy as np

from sharpfront import _backend, _pykernels
from sharpfront.frontspeed import SpeedTable
from sharpfront.geometry import ConvexCurve


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(n, workers):
    rng = np.random.default_rng(0)
    u = rng.random((n, n))
    p = 1.0 + 0.5 * np.sin(np.linspace(0, 8 * np.pi, n))[None, :] * np.ones((n, 1))
    p = np.ascontiguousarray(p)
    h = 0.25
    dt = 0.8 * 0.9 * h * h / 4
    yield "rd_step", lambda k, out: k.rd_step(u, out, p, dt, h, h, 0, 2.0, 0, workers), (n, n)

    x = np.linspace(-3, 3, n)
    X, Y = np.meshgrid(x, x)
    w = np.ascontiguousarray(np.hypot(X, Y) - 1.0)
    table = SpeedTable.from_function(lambda th: 2.0 + 0.2 * np.cos(2 * th), 32).c_star
    hh = x[1] - x[0]
    lf_dt = 0.9 / (2 * 2.5 / hh)
    yield "hj_step", lambda k, out: k.hj_step(w, out, table, lf_dt, hh, hh, 2.5, 2.5, 0.0, 1.0, False,
                                              workers), (n, n)

    m = max(16, n // 8)
    psi = rng.random((m, m)) + 0.5
    zeta = np.ascontiguousarray(1.0 + 0.5 * np.sin(2 * np.pi * np.arange(m) / m)[None, :] * np.ones((m, 1)))
    ch = 1.0 / m
    cdt = 0.2 * ch * ch
    yield "cell_step", lambda k, out: k.cell_step(psi, out, zeta, cdt, ch, ch, 1.0, 0.6, 0.8), (m, m)

    curve = ConvexCurve.circle(1.0, 256)
    qx = np.ascontiguousarray(X.ravel())
    qy = np.ascontiguousarray(Y.ravel())
    yield ("polygon_signed_distance",
           lambda k, out: k.polygon_signed_distance(qx, qy, curve.vertices, out, workers), (n * n,))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)
    try:
        compiled = _backend.get("compiled")
    except ImportError:
        print("compiled kernels not built; only the numpy fallback is available")
        compiled = None
    print(f"{'kernel':<26}{'compiled [ms]':>14}{'numpy [ms]':>12}{'speedup':>9}{'max diff':>11}")
    for name, fn, shape in cases(args.size, args.workers):
        out_py = np.empty(shape)
        t_py = best_of(lambda: fn(_pykernels, out_py), args.repeat)
        if compiled is None:
            print(f"{name:<26}{'-':>14}{t_py * 1e3:>12.2f}{'-':>9}{'-':>11}")
            continue
        out_c = np.empty(shape)
        t_c = best_of(lambda: fn(compiled, out_c), args.repeat)
        diff = float(np.max(np.abs(out_c - out_py)))
        print(f"{name:<26}{t_c * 1e3:>14.2f}{t_py * 1e3:>12.2f}{t_py / t_c:>9.1f}{diff:>11.2e}")


if __name__ == "__main__":
    main()
