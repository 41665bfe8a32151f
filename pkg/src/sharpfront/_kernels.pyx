# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stencil kernels.

Every kernel writes into a caller-provided output buffer and reads only its
inputs (double buffering). Rows are distributed over OpenMP threads with a
static schedule; each node is computed independently, so results do not
depend on the thread count.
"""

from cython.parallel cimport prange
from libc.math cimport sqrt, exp, pow, atan2, floor, fabs, M_PI

# reaction profile codes, shared with _pykernels
DEF FISHER = 0
DEF ALLEE = 1
DEF ARRHENIUS = 2
DEF NICHOLSON = 3
DEF BISTABLE = 4


cdef inline double _profile(double u, int code, double r) noexcept nogil:
    if code == FISHER:
        return u * (1.0 - u)
    elif code == ALLEE:
        if u <= 0.0:
            return 0.0
        return pow(u, r) * (1.0 - u)
    elif code == ARRHENIUS:
        if u <= 0.0:
            return 0.0
        return exp(-1.0 / u) * (1.0 - u)
    elif code == NICHOLSON:
        return u * (exp(1.0 - u) - 1.0)
    elif code == BISTABLE:
        return u * (1.0 - u) * (u - r)
    return 0.0


def rd_step(double[:, ::1] u, double[:, ::1] out, double[:, ::1] p,
            double dt, double hx, double hy, int code, double r,
            int mode, int nthreads=1):
    """One explicit Euler step of u_t = Lap u + p(x) f(u) on a node grid.

    mode 0: zero Dirichlet ring; 1: reflecting on all sides; 2: reflecting
    in x and periodic in y (strips).
    """
    cdef Py_ssize_t ny = u.shape[0], nx = u.shape[1]
    cdef Py_ssize_t i, j, im, ip, jm, jp
    cdef double cx = dt / (hx * hx), cy = dt / (hy * hy)
    cdef double c
    for j in prange(ny, nogil=True, schedule="static", num_threads=nthreads):
        for i in range(nx):
            if mode == 0 and (i == 0 or j == 0 or i == nx - 1 or j == ny - 1):
                out[j, i] = 0.0
                continue
            im = i - 1 if i > 0 else 1
            ip = i + 1 if i < nx - 1 else nx - 2
            if mode == 2:
                jm = j - 1 if j > 0 else ny - 1
                jp = j + 1 if j < ny - 1 else 0
            else:
                jm = j - 1 if j > 0 else 1
                jp = j + 1 if j < ny - 1 else ny - 2
            c = u[j, i]
            out[j, i] = (c + cx * (u[j, im] - 2.0 * c + u[j, ip])
                         + cy * (u[jm, i] - 2.0 * c + u[jp, i])
                         + dt * p[j, i] * _profile(c, code, r))


cdef inline double _catmull_rom(double[::1] table, double phi) noexcept nogil:
    cdef Py_ssize_t n = table.shape[0]
    cdef double s = phi / (2.0 * M_PI) * n
    cdef double fk = floor(s)
    cdef double t = s - fk
    cdef Py_ssize_t k = (<Py_ssize_t> fk) % n
    if k < 0:
        k += n
    cdef double p0 = table[(k - 1 + n) % n]
    cdef double p1 = table[k]
    cdef double p2 = table[(k + 1) % n]
    cdef double p3 = table[(k + 2) % n]
    return 0.5 * (2.0 * p1 + (p2 - p0) * t
                  + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
                  + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t * t * t)


cdef inline double _hamiltonian(double px, double py, double[::1] table,
                                double alpha, double sigma, bint viscous) noexcept nogil:
    cdef double s = sqrt(px * px + py * py)
    cdef double phi
    if s == 0.0:
        return 0.0
    phi = atan2(py, px)
    if phi < 0.0:
        phi += 2.0 * M_PI
    if viscous:
        return s * s / sqrt(s * s + sigma * sigma) * (_catmull_rom(table, phi) - alpha)
    return s * _catmull_rom(table, phi)


def hj_step(double[:, ::1] w, double[:, ::1] out, double[::1] table,
            double dt, double hx, double hy, double thx, double thy,
            double alpha, double sigma, bint viscous, int nthreads=1):
    """Lax-Friedrichs step for w_t + H(grad w) = alpha Lap w (alpha used only if viscous).

    Boundary ghosts are linear extrapolations, which keeps affine data exact.
    """
    cdef Py_ssize_t ny = w.shape[0], nx = w.shape[1]
    cdef Py_ssize_t i, j
    cdef double c, wl, wr, wd, wu, pxm, pxp, pym, pyp, hnum, lap
    for j in prange(ny, nogil=True, schedule="static", num_threads=nthreads):
        for i in range(nx):
            c = w[j, i]
            if i > 0:
                wl = w[j, i - 1]
            else:
                wl = 2.0 * c - w[j, 1]
            if i < nx - 1:
                wr = w[j, i + 1]
            else:
                wr = 2.0 * c - w[j, nx - 2]
            if j > 0:
                wd = w[j - 1, i]
            else:
                wd = 2.0 * c - w[1, i]
            if j < ny - 1:
                wu = w[j + 1, i]
            else:
                wu = 2.0 * c - w[ny - 2, i]
            pxm = (c - wl) / hx
            pxp = (wr - c) / hx
            pym = (c - wd) / hy
            pyp = (wu - c) / hy
            hnum = (_hamiltonian(0.5 * (pxm + pxp), 0.5 * (pym + pyp), table,
                                 alpha, sigma, viscous)
                    - 0.5 * thx * (pxp - pxm) - 0.5 * thy * (pyp - pym))
            if viscous:
                lap = (pxp - pxm) / hx + (pyp - pym) / hy
                out[j, i] = c - dt * hnum + dt * alpha * lap
            else:
                out[j, i] = c - dt * hnum


def cell_step(double[:, ::1] psi, double[:, ::1] out, double[:, ::1] zeta,
              double dt, double hx, double hy, double lam, double n1, double n2):
    """Euler step of psi_t = Lap psi - 2 lam n.grad psi + (lam^2 + zeta) psi, periodic."""
    cdef Py_ssize_t ny = psi.shape[0], nx = psi.shape[1]
    cdef Py_ssize_t i, j, im, ip, jm, jp
    cdef double c, lap, adv
    cdef double ax = 2.0 * lam * n1 / (2.0 * hx), ay = 2.0 * lam * n2 / (2.0 * hy)
    cdef double lam2 = lam * lam
    with nogil:
        for j in range(ny):
            jm = (j - 1 + ny) % ny
            jp = (j + 1) % ny
            for i in range(nx):
                im = (i - 1 + nx) % nx
                ip = (i + 1) % nx
                c = psi[j, i]
                lap = ((psi[j, im] - 2.0 * c + psi[j, ip]) / (hx * hx)
                       + (psi[jm, i] - 2.0 * c + psi[jp, i]) / (hy * hy))
                adv = ax * (psi[j, ip] - psi[j, im]) + ay * (psi[jp, i] - psi[jm, i])
                out[j, i] = c + dt * (lap - adv + (lam2 + zeta[j, i]) * c)


def polygon_signed_distance(double[::1] qx, double[::1] qy, double[:, ::1] verts,
                            double[::1] out, int nthreads=1):
    """Exact signed distance from points to a convex CCW polygon boundary."""
    cdef Py_ssize_t n = qx.shape[0], m = verts.shape[0]
    cdef Py_ssize_t k, e, f
    cdef double x, y, ax, ay, bx, by, ex, ey, l2, t, dx, dy, d2, best, cr
    cdef bint inside
    for k in prange(n, nogil=True, schedule="static", num_threads=nthreads):
        x = qx[k]
        y = qy[k]
        best = 1e300
        inside = True
        for e in range(m):
            f = e + 1
            if f == m:
                f = 0
            ax = verts[e, 0]
            ay = verts[e, 1]
            bx = verts[f, 0]
            by = verts[f, 1]
            ex = bx - ax
            ey = by - ay
            cr = ex * (y - ay) - ey * (x - ax)
            if cr < 0.0:
                inside = False
            l2 = ex * ex + ey * ey
            if l2 > 0.0:
                t = ((x - ax) * ex + (y - ay) * ey) / l2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            else:
                t = 0.0
            dx = x - (ax + t * ex)
            dy = y - (ay + t * ey)
            d2 = dx * dx + dy * dy
            if d2 < best:
                best = d2
        if inside:
            out[k] = -sqrt(best)
        else:
            out[k] = sqrt(best)
