"""Periodic monostable reaction terms ``f(x, u) = p(x) * g(u)``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _pykernels

PROFILES = {
    "fisher_kpp": _pykernels.FISHER,
    "allee": _pykernels.ALLEE,
    "arrhenius": _pykernels.ARRHENIUS,
    "nicholson": _pykernels.NICHOLSON,
    # not monostable; kept so validation can be exercised on a counterexample
    "bistable": _pykernels.BISTABLE,
}


class NonlinearityError(ValueError):
    pass


@dataclass(frozen=True)
class PeriodicCell:
    L1: float = 1.0
    L2: float = 1.0

    def __post_init__(self):
        if not (self.L1 > 0 and self.L2 > 0):
            raise NonlinearityError("cell periods must be positive")


@dataclass(frozen=True)
class Profile:
    kind: str = "fisher_kpp"
    r: float = 2.0
    """Allee exponent (``allee``) or threshold (``bistable``); unused otherwise."""

    def __post_init__(self):
        if self.kind not in PROFILES:
            raise NonlinearityError(f"unknown profile {self.kind!r}")
        if self.kind == "allee" and not self.r > 1:
            raise NonlinearityError("Allee exponent must exceed 1")

    @property
    def code(self):
        return PROFILES[self.kind]

    def __call__(self, u):
        return _pykernels.profile(u, self.code, self.r)

    def derivative_at_zero(self):
        return {
            "fisher_kpp": 1.0,
            "allee": 0.0,
            "arrhenius": 0.0,
            "nicholson": np.e - 1.0,
            "bistable": -self.r,
        }[self.kind]


@dataclass(frozen=True)
class Amplitude:
    """``p(x) = base + sum a sin(2 pi (k1 x1/L1 + k2 x2/L2) + phi)``."""

    base: float = 1.0
    modes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(tuple(float(v) for v in m) for m in self.modes))
        if not self.base > 0:
            raise NonlinearityError("amplitude base must be positive")
        for m in self.modes:
            if len(m) != 4 or m[0] != int(m[0]) or m[1] != int(m[1]):
                raise NonlinearityError("modes are [k1, k2, a, phi] with integer k1, k2")

    def __call__(self, x1, x2, cell):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        out = np.full(np.broadcast(x1, x2).shape, self.base)
        for k1, k2, a, phi in self.modes:
            out = out + a * np.sin(2 * np.pi * (k1 * x1 / cell.L1 + k2 * x2 / cell.L2) + phi)
        return out

    @property
    def homogeneous(self):
        return all(a == 0 for _, _, a, _ in self.modes)


@dataclass(frozen=True)
class Nonlinearity:
    cell: PeriodicCell = field(default_factory=PeriodicCell)
    amplitude: Amplitude = field(default_factory=Amplitude)
    profile: Profile = field(default_factory=Profile)
    kpp: bool = True
    rho: float = 0.1

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise NonlinearityError("rho must lie in (0, 1)")
        s = (np.arange(64) + 0.5) / 64
        X1, X2 = np.meshgrid(s * self.cell.L1, s * self.cell.L2)
        pmin = float(self.amplitude(X1, X2, self.cell).min())
        if pmin < 1e-6:
            raise NonlinearityError(f"amplitude p(x) must stay positive (sampled min {pmin:.3g})")

    @classmethod
    def fisher(cls, base=1.0, modes=(), L1=1.0, L2=1.0):
        return cls(PeriodicCell(L1, L2), Amplitude(base, modes), Profile("fisher_kpp"), kpp=True)

    def p(self, x1, x2):
        return self.amplitude(x1, x2, self.cell)

    @property
    def homogeneous(self):
        return self.amplitude.homogeneous

    def p_max(self):
        return self.amplitude.base + sum(abs(m[2]) for m in self.amplitude.modes)

    def lipschitz_u(self):
        """Upper bound for |d f/d u| on [0, 1]."""
        u = np.linspace(0.0, 1.0, 2001)
        du = np.abs(np.gradient(self.profile(u), u))
        return float(self.p_max() * du.max() * 1.05)


def _point(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1]


def eval_f(nl, x, u):
    """``f(x, u)``; ``x`` has trailing dimension 2 and broadcasts against ``u``."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise NonlinearityError("f is defined for u >= 0 only")
    x1, x2 = _point(x)
    out = nl.p(x1, x2) * nl.profile(u)
    return float(out) if out.ndim == 0 else out


def eval_fu_zero(nl, x):
    """Linearization at zero, ``d f/d u (x, 0)``."""
    x1, x2 = _point(x)
    out = nl.p(x1, x2) * nl.profile.derivative_at_zero()
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class MonostableReport:
    checks: dict
    details: dict

    @property
    def passed(self):
        return all(self.checks.values())

    def failed(self):
        return [k for k, ok in self.checks.items() if not ok]

    def lines(self):
        return [f"{k}: {'pass' if ok else 'FAIL'}  {self.details.get(k, '')}".rstrip()
                for k, ok in self.checks.items()]


def check_monostable(nl, n_samples=64):
    """Sampled verification of the monostable structure of ``nl``. Never raises."""
    if n_samples < 64:
        raise NonlinearityError("n_samples must be at least 64")
    s = (np.arange(n_samples) + 0.5) / n_samples
    X1, X2 = np.meshgrid(s * nl.cell.L1, s * nl.cell.L2)
    x1, x2 = X1.ravel(), X2.ravel()
    p = nl.p(x1, x2)
    u = np.linspace(0.0, 1.0, n_samples + 1)
    F = p[:, None] * nl.profile(u)[None, :]

    checks, details = {}, {}
    ends = max(np.abs(F[:, 0]).max(), np.abs(F[:, -1]).max())
    checks["steady_states"] = ends <= 1e-14
    details["steady_states"] = f"max |f(x,0)|,|f(x,1)| = {ends:.3g}"

    fmin = F.min()
    checks["nonnegative"] = fmin >= -1e-14
    details["nonnegative"] = f"min f on [0,1] = {fmin:.3g}"

    inner = F[:, 1:-1].max(axis=0)
    checks["positive_somewhere"] = bool(np.all(inner > 0))
    details["positive_somewhere"] = f"min_u max_x f = {inner.min():.3g}"

    ub = np.linspace(1.0 - nl.rho, 1.0, n_samples + 1)[1:]
    band = p[:, None] * nl.profile(ub)[None, :]
    rise = np.diff(band, axis=1).max()
    checks["monotone_band"] = rise <= 1e-14
    details["monotone_band"] = f"max increase on (1-rho,1] = {rise:.3g}"

    if nl.kpp:
        lin = (p * nl.profile.derivative_at_zero())[:, None] * u[None, :]
        excess = (F - lin).max()
        checks["kpp"] = excess <= 1e-12
        details["kpp"] = f"max f - f_u(x,0) u = {excess:.3g}"
    return MonostableReport(checks, details)
