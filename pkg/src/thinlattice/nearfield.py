"""Discrete spectrum of the Dirichlet Laplacian on the cross junction.

The trapped mode is computed on the truncated junction with Dirichlet cuts;
it decays like ``exp(-beta1 z)`` along each branch, so truncation at
``R = 2.5`` is invisible at grid resolution.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .mesh import JunctionGrid, build_junction_grid, signed_permutation_map, BRANCH_AXES
from .operators import (
    THRESHOLD,
    assemble_dirichlet,
    assemble_mixed,
    discrete_threshold,
    u_dagger,
)
from .solvers import EigResult, smallest_eigenpairs

__all__ = [
    "DiscretizationAnomaly",
    "TrappedMode",
    "DecayFit",
    "MixedSpectrum",
    "compute_mu1",
    "check_symmetry",
    "symmetry_defects",
    "branch_projection",
    "extract_decay_amplitude",
    "compute_mixed_spectrum",
    "richardson",
    "observed_order",
    "discrete_decay_rate",
]

DEFAULT_R = 2.5
DEFAULT_SPACINGS = (1 / 8, 1 / 12, 1 / 16)
ANOMALY_FACTOR = 0.98


class DiscretizationAnomaly(RuntimeError):
    """A second eigenvalue showed up clearly below the threshold."""


def richardson(spacings, values, order: float = 2.0) -> complex | float:
    """Least-squares fit of ``value = a + b h**order``; returns ``a``."""
    h = np.asarray(spacings, dtype=float)
    v = np.asarray(values)
    if h.size < 2:
        raise ValueError("Richardson extrapolation needs at least two spacings")
    X = np.stack([np.ones_like(h), h**order], axis=1)
    coef, *_ = np.linalg.lstsq(X.astype(v.dtype), v, rcond=None)
    return coef[0]


def observed_order(spacings, values) -> float:
    """Convergence order ``p`` from three solves, ``v(h) = v* + C h^p``."""
    h1, h2, h3 = (float(x) for x in spacings[-3:])
    v1, v2, v3 = values[-3:]
    q = abs(v1 - v2) / abs(v2 - v3)

    def f(p):
        return (h1**p - h2**p) / (h2**p - h3**p) - q

    try:
        return float(brentq(f, 0.05, 8.0))
    except ValueError:
        return float("nan")


def discrete_decay_rate(mu: float, h: float) -> float:
    """Decay rate of a discrete guided mode below the discrete threshold.

    Solves ``2 (cosh(beta h) - 1) / h^2 = Lambda_h - mu``; tends to
    ``sqrt(2 pi^2 - mu)`` as ``h -> 0``.
    """
    gap = discrete_threshold(h) - mu
    if gap <= 0:
        raise ValueError("mu is not below the discrete threshold")
    return float(np.arccosh(1.0 + 0.5 * h * h * gap) / h)


@dataclass
class TrappedMode:
    """Trapped eigenpair of the junction and its per-spacing history."""

    R: float
    spacings: tuple[float, ...]
    mu1_per_h: tuple[float, ...]
    second_per_h: tuple[float, ...]
    grid: JunctionGrid
    vector: np.ndarray
    residual: float
    extrapolated_mu1: float | None = None
    order: float | None = None
    K: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def mu1(self) -> float:
        """Eigenvalue on the finest grid."""
        return self.mu1_per_h[-1]

    @property
    def beta1(self) -> float:
        mu = self.extrapolated_mu1 if self.extrapolated_mu1 is not None else self.mu1
        return float(np.sqrt(THRESHOLD - mu))

    @property
    def beta2(self) -> float:
        mu = self.extrapolated_mu1 if self.extrapolated_mu1 is not None else self.mu1
        return float(np.sqrt(5 * np.pi**2 - mu))

    @property
    def beta1_discrete(self) -> float:
        return discrete_decay_rate(self.mu1, self.grid.h)

    def to_record(self) -> dict:
        return {
            "R": self.R,
            "spacings": list(self.spacings),
            "mu1_per_h": list(self.mu1_per_h),
            "second_eigenvalue_per_h": list(self.second_per_h),
            "extrapolated_mu1": self.extrapolated_mu1,
            "observed_order": self.order,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "beta1_discrete": self.beta1_discrete,
            "K": self.K,
            "residual": self.residual,
        }


def compute_mu1(
    R: float = DEFAULT_R,
    spacings=DEFAULT_SPACINGS,
    tol: float = 1e-10,
    seed: int | None = None,
    method: str = "auto",
) -> TrappedMode:
    """Trapped eigenvalue ``mu1`` per spacing plus Richardson extrapolation.

    Each run also checks that the second Dirichlet eigenvalue is not below
    ``0.98 * 2 pi^2``; otherwise :class:`DiscretizationAnomaly` is raised.
    Spacings are processed coarse to fine; the finest eigenvector is kept.
    """
    spacings = tuple(sorted((float(h) for h in spacings), reverse=True))
    if R < 2.0:
        warnings.warn(f"R = {R} < 2: truncation may contaminate mu1", stacklevel=2)
    mus, seconds = [], []
    kwargs = {} if seed is None else {"seed": seed}
    res = grid = None
    for h in spacings:
        grid = build_junction_grid(R, h)
        res = smallest_eigenpairs(assemble_dirichlet(grid), k=2, tol=tol, method=method, **kwargs)
        mu, second = float(res.values[0]), float(res.values[1])
        if not 0.0 < mu < THRESHOLD:
            raise DiscretizationAnomaly(f"no eigenvalue below 2 pi^2 at h = {h}: mu1 = {mu}")
        if second < ANOMALY_FACTOR * THRESHOLD:
            raise DiscretizationAnomaly(
                f"second eigenvalue {second:.6f} below 0.98 * 2 pi^2 at h = {h}, R = {R}"
            )
        mus.append(mu)
        seconds.append(second)
    mode = TrappedMode(
        R=float(R),
        spacings=spacings,
        mu1_per_h=tuple(mus),
        second_per_h=tuple(seconds),
        grid=grid,
        vector=res.vectors[:, 0].copy(),
        residual=float(res.residuals[0]),
    )
    if len(spacings) >= 2:
        mode.extrapolated_mu1 = float(richardson(spacings, mus, order=2.0))
    if len(spacings) >= 3:
        mode.order = observed_order(spacings, mus)
    return mode


def symmetry_defects(grid: JunctionGrid, vector: np.ndarray) -> np.ndarray:
    """``||v - v o S_k|| / ||v||`` for the mirrors ``x_k -> -x_k``, k = 1, 2, 3."""
    v = np.asarray(vector)
    n = v.size
    out = []
    for axis in range(3):
        signs = [1, 1, 1]
        signs[axis] = -1
        perm = signed_permutation_map(grid, signs=signs)[:n]
        out.append(np.linalg.norm(v - v[perm]) / np.linalg.norm(v))
    return np.asarray(out)


def check_symmetry(mode: TrappedMode) -> np.ndarray:
    """Reflection defects of the trapped mode across (Ox2x3), (Ox3x1), (Ox1x2)."""
    return symmetry_defects(mode.grid, mode.vector)


def branch_projection(grid: JunctionGrid, vector: np.ndarray, branch: int):
    """Cross-section projections ``P(z) = int v(z, y) U_dagger(y) dy`` along a branch.

    Returns the axial positions ``z`` (all grid planes with ``1/2 < z < R``)
    and the projections.  The quadrature is ``h^2`` per node, which
    integrates ``U_dagger^2`` to exactly 1.
    """
    axis, sign, (a1, s1), (a2, s2) = BRANCH_AXES[branch - 1]
    m, n, h = grid.m, grid.n, grid.h
    t = np.arange(-m + 1, m)
    T1, T2 = np.meshgrid(t, t, indexing="ij")
    U = u_dagger(s1 * T1 * h, s2 * T2 * h).ravel()
    v = np.asarray(vector)
    zs, proj = [], []
    for iz in range(m + 1, n):
        c = np.zeros((T1.size, 3), dtype=np.int64)
        c[:, axis] = sign * iz
        c[:, a1] = T1.ravel()
        c[:, a2] = T2.ravel()
        idx = grid.index_of(c)
        ok = (idx >= 0) & (idx < v.size)
        vals = np.zeros(idx.size, dtype=v.dtype)
        vals[ok] = v[idx[ok]]
        zs.append(iz * h)
        proj.append(h * h * np.sum(vals * U))
    return np.asarray(zs), np.asarray(proj)


@dataclass
class DecayFit:
    K: float
    beta_fit: float
    K_branches: np.ndarray
    beta_branches: np.ndarray
    beta1: float
    window: tuple[float, float]

    @property
    def beta_rel_error(self) -> float:
        return abs(self.beta_fit - self.beta1) / self.beta1

    @property
    def K_spread(self) -> float:
        a = np.abs(self.K_branches)
        return float((a.max() - a.min()) / a.mean())

    def check(self, beta_tol: float = 0.05, spread_tol: float = 0.05) -> None:
        if self.beta_rel_error > beta_tol:
            raise ValueError(
                f"fitted decay {self.beta_fit:.4f} deviates {self.beta_rel_error:.1%} from "
                f"beta1 = {self.beta1:.4f}; move the window away from the junction and the cut"
            )
        if self.K_spread > spread_tol:
            raise ValueError(f"branch amplitudes spread {self.K_spread:.1%} > {spread_tol:.0%}")


def _fit_branch(z, p, R, cut_correction, iterations=50):
    y = np.log(np.abs(p))
    A = np.stack([np.ones_like(z), -z], axis=1)
    (c, beta), *_ = np.linalg.lstsq(A, y, rcond=None)
    if cut_correction:
        # Dirichlet cut at R: profile ~ exp(-beta z) (1 - exp(-2 beta (R - z)))
        for _ in range(iterations):
            corr = np.log1p(-np.exp(-2.0 * beta * (R - z)))
            (c, beta_new), *_ = np.linalg.lstsq(A, y - corr, rcond=None)
            if abs(beta_new - beta) < 1e-14 * beta:
                beta = beta_new
                break
            beta = beta_new
    return float(np.exp(c)), float(beta)


def extract_decay_amplitude(
    mode: TrappedMode,
    window: tuple[float, float] | None = None,
    branches=(1, 2, 3, 4, 5, 6),
    cut_correction: bool = True,
) -> DecayFit:
    """Fit ``P_j(z) ~ K exp(-beta z)`` on each branch inside ``window``.

    ``K`` is the geometric mean of the branch amplitudes (sign taken from
    the projections), ``beta_fit`` the mean fitted rate.  With
    ``cut_correction`` the reflection from the Dirichlet cut,
    ``1 - exp(-2 beta (R - z))``, is divided out before the log-linear fit.
    """
    grid = mode.grid
    R = grid.R
    lo, hi = window if window is not None else (1.0, R - max(0.25, 2 * grid.h))
    if not (0.5 < lo < hi <= R - 2 * grid.h + 1e-12):
        raise ValueError(
            f"window ({lo}, {hi}) must satisfy 1/2 < z_lo < z_hi <= R - 2h = {R - 2 * grid.h}; "
            "widen the truncation R or move z_hi away from the cut"
        )
    Ks, betas = [], []
    for b in branches:
        z, p = branch_projection(grid, mode.vector, b)
        sel = (z >= lo - 1e-12) & (z <= hi + 1e-12)
        z, p = z[sel], p[sel]
        if z.size < 2:
            raise ValueError("window holds fewer than two cross-sections")
        sign = np.sign(np.median(p))
        K, beta = _fit_branch(z, sign * p, R, cut_correction)
        Ks.append(sign * K)
        betas.append(beta)
    Ks = np.asarray(Ks)
    sign = np.sign(Ks.sum())
    K = float(sign * np.exp(np.mean(np.log(np.abs(Ks)))))
    fit = DecayFit(
        K=K,
        beta_fit=float(np.mean(betas)),
        K_branches=Ks,
        beta_branches=np.asarray(betas),
        beta1=mode.beta1,
        window=(lo, hi),
    )
    mode.K = K
    return fit


@dataclass
class MixedSpectrum:
    R: float
    h: float
    result: EigResult

    @property
    def values(self) -> np.ndarray:
        return self.result.values

    @property
    def exceeds_threshold(self) -> bool:
        """Whether the second eigenvalue lies above ``2 pi^2``."""
        return bool(self.values.size >= 2 and self.values[1] > THRESHOLD)


def compute_mixed_spectrum(R: float = DEFAULT_R, h: float = 1 / 12, k: int = 3, tol: float = 1e-10) -> MixedSpectrum:
    """Lowest ``k`` eigenvalues of the junction with Neumann cuts."""
    if R < 2.0:
        warnings.warn(f"R = {R} < 2 is outside the validated range", stacklevel=2)
    grid = build_junction_grid(R, h)
    res = smallest_eigenpairs(assemble_mixed(grid), k=k, tol=tol)
    return MixedSpectrum(float(R), float(h), res)
