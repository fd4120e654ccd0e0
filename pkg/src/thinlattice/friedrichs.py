"""Friedrichs constants of the weighted 1D inequality and a discrete check.

``kappa(a)`` is the smallest positive root of ``sqrt(k) tan(sqrt(k)/2) = a``;
on a truncated interval ``(0, R)`` the right side becomes
``a tanh(a (R - 1/2))``.  Both are the smallest eigenvalue of
``-phi'' + a^2 1_(1/2, R) phi = kappa 1_(0, 1/2) phi`` with Neumann ends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.linalg import solve_banded

__all__ = [
    "FriedrichsConstant",
    "kappa_infinite",
    "kappa_truncated",
    "discrete_kappa",
    "rayleigh_p1",
    "InequalityCheck",
    "verify_inequality_1d",
    "kappa_table",
]

PI2 = math.pi**2
DELTA = 1e-9
RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class FriedrichsConstant:
    a: float
    R: float  # math.inf for the half-line
    kappa: float
    residual: float
    target: float

    @property
    def is_truncated(self) -> bool:
        return math.isfinite(self.R)

    def to_record(self) -> dict:
        return {"a": self.a, "R": None if not self.is_truncated else self.R,
                "kappa": self.kappa, "residual": self.residual}


def _lhs(k: float) -> float:
    s = math.sqrt(k)
    return s * math.tan(s / 2)


def _dlhs(k: float) -> float:
    s = math.sqrt(k)
    t = math.tan(s / 2)
    # d/dk [s tan(s/2)] with ds/dk = 1/(2s)
    return (t + s / (2 * math.cos(s / 2) ** 2)) / (2 * s)


def _root(target: float) -> tuple[float, float]:
    """Smallest positive root of ``lhs(k) = target`` on ``(0, pi^2)``."""
    lo, hi = DELTA, PI2 - DELTA
    if _lhs(lo) >= target:
        lo = 0.0  # lhs(0) = 0 < target
    if _lhs(hi) <= target:
        raise ValueError(f"target {target!r} beyond the bracket (0, pi^2)")
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _lhs(mid) < target:
            lo = mid
        else:
            hi = mid
    k = 0.5 * (lo + hi)
    # Newton polish, kept only if it stays inside the bracket and helps
    for _ in range(3):
        if k <= 0:
            break
        step = (_lhs(k) - target) / _dlhs(k)
        k_new = k - step
        if not (lo <= k_new <= hi) or abs(_lhs(k_new) - target) >= abs(_lhs(k) - target):
            break
        k = k_new
    return k, abs(_lhs(k) - target) if k > 0 else abs(target)


def _finish(a: float, R: float, target: float) -> FriedrichsConstant:
    k, res = _root(target)
    if res > RESIDUAL_TOL * max(1.0, target):
        raise ArithmeticError(f"root residual {res:.3e} above tolerance")
    return FriedrichsConstant(a=a, R=R, kappa=k, residual=res, target=target)


def kappa_infinite(a: float) -> FriedrichsConstant:
    if not a > 0:
        raise ValueError(f"a = {a!r} must be positive")
    return _finish(float(a), math.inf, float(a))


def kappa_truncated(a: float, R: float) -> FriedrichsConstant:
    if not a > 0:
        raise ValueError(f"a = {a!r} must be positive")
    if not R > 0.5:
        raise ValueError(f"R = {R!r} must exceed 1/2")
    return _finish(float(a), float(R), float(a * math.tanh(a * (R - 0.5))))


def discrete_kappa(a: float, L: float = 6.0, h: float = 1e-3) -> float:
    """Smallest eigenvalue of the lumped P1 discretisation on ``(0, L)``.

    Neumann at both ends.  The right-hand mass lives on ``[0, 1/2]`` only, so
    the outer unknowns are eliminated by a Schur complement (tridiagonal
    solve) and a small dense generalised problem remains.
    """
    n = int(round(L / h))
    m = int(round(0.5 / h))
    if abs(n * h - L) > 1e-9 or abs(m * h - 0.5) > 1e-9 or m >= n:
        raise ValueError("h must divide both 1/2 and L, with L > 1/2")
    # stiffness + a^2 lumped outer mass, nodes 0..n
    diag = np.full(n + 1, 2.0 / h)
    diag[0] = diag[-1] = 1.0 / h
    off = np.full(n, -1.0 / h)
    outer = np.zeros(n + 1)
    outer[m + 1:] = h
    outer[m] = h / 2
    outer[-1] = h / 2
    diag = diag + a**2 * outer
    inner = np.zeros(m + 1)
    inner[:] = h
    inner[0] = inner[m] = h / 2

    # Schur complement on nodes 0..m; coupling through the edge (m, m+1) only
    d_oo = diag[m + 1:]
    ab = np.zeros((3, d_oo.size))
    ab[0, 1:] = off[m + 1:]
    ab[1] = d_oo
    ab[2, :-1] = off[m + 1:]
    e = np.zeros(d_oo.size)
    e[0] = off[m]
    x = solve_banded((1, 1), ab, e)
    S = np.diag(diag[: m + 1]) + np.diag(off[:m], 1) + np.diag(off[:m], -1)
    S[m, m] -= e @ x
    vals = la.eigh(S, np.diag(inner), eigvals_only=True, subset_by_index=[0, 0])
    return float(vals[0])


def rayleigh_p1(knots: np.ndarray, values: np.ndarray, a: float) -> float:
    """Exact ``[int phi'^2 + a^2 int_{1/2}^L phi^2] / int_0^{1/2} phi^2`` for P1 ``phi``.

    ``knots`` must be increasing and contain ``1/2``; ``L = knots[-1]``.
    """
    dx = np.diff(knots)
    u, v = values[:-1], values[1:]
    grad = np.sum((v - u) ** 2 / dx)
    sq = dx * (u * u + u * v + v * v) / 3.0
    left = knots[1:] <= 0.5
    return float((grad + a**2 * sq[~left].sum()) / sq[left].sum())


@dataclass
class InequalityCheck:
    a: float
    L: float
    truncated: bool
    kappa: float
    discrete_kappa: float
    discrete_rel_error: float
    worst_ratio: float
    n_samples: int
    violations: int
    constant_ratio: float

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.discrete_rel_error <= 5e-3

    def to_record(self) -> dict:
        return {**self.__dict__, "passed": self.passed}


def _minimizer(a: float, kappa: float, L: float, truncated: bool):
    s = math.sqrt(kappa)
    c = math.cos(s / 2)

    def phi(t):
        t = np.asarray(t, dtype=float)
        if truncated:
            tail = c * np.cosh(a * (t - L)) / math.cosh(a * (0.5 - L))
        else:
            tail = c * np.exp(-a * (t - 0.5))
        return np.where(t <= 0.5, np.cos(s * t), tail)

    return phi


def verify_inequality_1d(
    a: float,
    R: float | None = None,
    n_samples: int = 10_000,
    h: float = 1e-3,
    L: float = 6.0,
    seed: int = 0,
    n_knots: int = 24,
    tolerance: float = 0.01,
) -> InequalityCheck:
    """Sample random P1 test functions and compare their quotients with ``kappa``.

    ``R=None`` checks the half-line inequality on ``(0, L)``; otherwise the
    interval is ``(0, R)``.  Half of the samples are generic random
    functions, the other half perturbations of the exact minimiser.
    A sample violates when its quotient falls below ``(1 - tolerance) kappa``.
    """
    truncated = R is not None
    length = float(R) if truncated else float(L)
    kappa = (kappa_truncated(a, length) if truncated else kappa_infinite(a)).kappa
    dk = discrete_kappa(a, length, h)
    rng = np.random.default_rng(seed)
    phi_star = _minimizer(a, kappa, length, truncated)

    worst = math.inf
    violations = 0
    for i in range(n_samples):
        inner = np.sort(rng.uniform(0.0, length, n_knots))
        knots = np.unique(np.concatenate([[0.0, 0.5, length], inner]))
        if i % 2 == 0:
            values = rng.standard_normal(knots.size)
        else:
            noise = 10.0 ** rng.uniform(-4, -1)
            values = phi_star(knots) + noise * rng.standard_normal(knots.size)
        ratio = rayleigh_p1(knots, values, a)
        worst = min(worst, ratio)
        if ratio < (1.0 - tolerance) * kappa:
            violations += 1
    constant = rayleigh_p1(np.array([0.0, 0.5, length]), np.ones(3), a)
    return InequalityCheck(
        a=float(a), L=length, truncated=truncated, kappa=kappa, discrete_kappa=dk,
        discrete_rel_error=abs(dk - kappa) / kappa, worst_ratio=worst,
        n_samples=n_samples, violations=violations, constant_ratio=constant,
    )


def kappa_table(a_values, R_values) -> list[list]:
    """Rows ``(a, R, kappa)``; ``R = inf`` for the half-line constant."""
    rows = []
    for a in a_values:
        rows.append([float(a), math.inf, kappa_infinite(a).kappa])
        for R in R_values:
            rows.append([float(a), float(R), kappa_truncated(a, R).kappa])
    return rows
