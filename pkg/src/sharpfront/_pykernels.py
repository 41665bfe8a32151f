"""Pure numpy versions of the stencil kernels in ``_kernels.pyx``.

Signatures match the compiled module; ``nthreads`` is accepted and ignored.
"""

import numpy as np

FISHER, ALLEE, ARRHENIUS, NICHOLSON, BISTABLE = range(5)


def profile(u, code, r):
    u = np.asarray(u, dtype=float)
    if code == FISHER:
        return u * (1.0 - u)
    if code == ALLEE:
        with np.errstate(invalid="ignore"):
            return np.where(u <= 0.0, 0.0, np.power(np.maximum(u, 0.0), r) * (1.0 - u))
    if code == ARRHENIUS:
        with np.errstate(divide="ignore", over="ignore"):
            pos = np.maximum(u, 1e-300)
            return np.where(u <= 0.0, 0.0, np.exp(-1.0 / pos) * (1.0 - u))
    if code == NICHOLSON:
        return u * (np.exp(1.0 - u) - 1.0)
    if code == BISTABLE:
        return u * (1.0 - u) * (u - r)
    raise ValueError(f"unknown profile code {code}")


def _pad_reflect(u, periodic_y=False):
    g = np.pad(u, 1, mode="reflect")
    if periodic_y:
        g[0, 1:-1] = u[-1]
        g[-1, 1:-1] = u[0]
    return g


def _pad_linear(w):
    g = np.pad(w, 1, mode="edge")
    g[0, 1:-1] = 2.0 * w[0] - w[1]
    g[-1, 1:-1] = 2.0 * w[-1] - w[-2]
    g[1:-1, 0] = 2.0 * w[:, 0] - w[:, 1]
    g[1:-1, -1] = 2.0 * w[:, -1] - w[:, -2]
    return g


def rd_step(u, out, p, dt, hx, hy, code, r, mode, nthreads=1):
    g = _pad_reflect(u, periodic_y=(mode == 2))
    c = u
    cx = dt / (hx * hx)
    cy = dt / (hy * hy)
    out[...] = (c + cx * (g[1:-1, :-2] - 2.0 * c + g[1:-1, 2:])
                + cy * (g[:-2, 1:-1] - 2.0 * c + g[2:, 1:-1])
                + dt * p * profile(c, code, r))
    if mode == 0:
        out[0, :] = 0.0
        out[-1, :] = 0.0
        out[:, 0] = 0.0
        out[:, -1] = 0.0


def catmull_rom(table, phi):
    table = np.asarray(table, dtype=float)
    n = table.shape[0]
    s = np.asarray(phi, dtype=float) / (2.0 * np.pi) * n
    fk = np.floor(s)
    t = s - fk
    k = fk.astype(np.int64) % n
    p0 = table[(k - 1) % n]
    p1 = table[k]
    p2 = table[(k + 1) % n]
    p3 = table[(k + 2) % n]
    return 0.5 * (2.0 * p1 + (p2 - p0) * t
                  + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
                  + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t * t * t)


def hamiltonian(px, py, table, alpha, sigma, viscous):
    s = np.sqrt(px * px + py * py)
    phi = np.arctan2(py, px)
    phi = np.where(phi < 0.0, phi + 2.0 * np.pi, phi)
    c = catmull_rom(table, phi)
    if viscous:
        with np.errstate(invalid="ignore"):
            val = s * s / np.sqrt(s * s + sigma * sigma) * (c - alpha)
    else:
        val = s * c
    return np.where(s == 0.0, 0.0, val)


def hj_step(w, out, table, dt, hx, hy, thx, thy, alpha, sigma, viscous, nthreads=1):
    g = _pad_linear(w)
    c = w
    pxm = (c - g[1:-1, :-2]) / hx
    pxp = (g[1:-1, 2:] - c) / hx
    pym = (c - g[:-2, 1:-1]) / hy
    pyp = (g[2:, 1:-1] - c) / hy
    hnum = (hamiltonian(0.5 * (pxm + pxp), 0.5 * (pym + pyp), table, alpha, sigma, viscous)
            - 0.5 * thx * (pxp - pxm) - 0.5 * thy * (pyp - pym))
    if viscous:
        lap = (pxp - pxm) / hx + (pyp - pym) / hy
        out[...] = c - dt * hnum + dt * alpha * lap
    else:
        out[...] = c - dt * hnum


def cell_step(psi, out, zeta, dt, hx, hy, lam, n1, n2):
    xm = np.roll(psi, 1, axis=1)
    xp = np.roll(psi, -1, axis=1)
    ym = np.roll(psi, 1, axis=0)
    yp = np.roll(psi, -1, axis=0)
    c = psi
    lap = (xm - 2.0 * c + xp) / (hx * hx) + (ym - 2.0 * c + yp) / (hy * hy)
    adv = (2.0 * lam * n1 / (2.0 * hx)) * (xp - xm) + (2.0 * lam * n2 / (2.0 * hy)) * (yp - ym)
    out[...] = c + dt * (lap - adv + (lam * lam + zeta) * c)


def polygon_signed_distance(qx, qy, verts, out, nthreads=1, chunk=4096):
    verts = np.asarray(verts, dtype=float)
    a = verts
    b = np.roll(verts, -1, axis=0)
    e = b - a
    l2 = np.einsum("ij,ij->i", e, e)
    safe = np.where(l2 > 0.0, l2, 1.0)
    for start in range(0, qx.shape[0], chunk):
        x = qx[start:start + chunk, None]
        y = qy[start:start + chunk, None]
        rx = x - a[None, :, 0]
        ry = y - a[None, :, 1]
        cr = e[None, :, 0] * ry - e[None, :, 1] * rx
        inside = np.all(cr >= 0.0, axis=1)
        t = np.where(l2 > 0.0, (rx * e[:, 0] + ry * e[:, 1]) / safe, 0.0)
        t = np.clip(t, 0.0, 1.0)
        dx = x - (a[:, 0] + t * e[:, 0])
        dy = y - (a[:, 1] + t * e[:, 1])
        d = np.sqrt(np.min(dx * dx + dy * dy, axis=1))
        out[start:start + chunk] = np.where(inside, -d, d)
