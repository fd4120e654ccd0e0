"""Asymptotic band models of the thin lattice.

The first band is modelled by ``eps^-2 mu1 + eps^-2 exp(-beta1/eps) M(eta)``
with ``M(eta) = -4 beta1 K^2 sum_j cos(eta_j)``.  Higher bands cluster in
triples around ``eps^-2 2 pi^2 + p^2 pi^2`` with an ``O(eps)`` splitting given
by the eigenvalues of the 3x3 matrix ``A(eta) = Theta(eta) M Theta(eta)^*``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import THRESHOLD

__all__ = [
    "theta",
    "assemble_A",
    "nu_tilde",
    "patterned_M",
    "closed_form_eigenvalues",
    "BandModel",
    "BandReport",
    "sweep_aleph",
    "first_band_M",
    "first_band_model",
    "upsilon_segments",
    "gamma_profiles",
    "gamma_derivatives_at_zero",
    "band_path",
    "band_path_table",
    "REFERENCE_M_COEFFS",
    "C_P_INFLATION",
]

REFERENCE_M_COEFFS = (0.08, -0.44, -0.06)
C_P_INFLATION = 1.05
CONVENTIONS = ("A", "compact")


def theta(eta) -> np.ndarray:
    """3x6 matrix ``[Id | diag(exp(-i eta_j))]``."""
    eta = np.asarray(eta, dtype=float).reshape(3)
    T = np.zeros((3, 6), dtype=complex)
    T[:, :3] = np.eye(3)
    T[np.arange(3), np.arange(3, 6)] = np.exp(-1j * eta)
    return T


def assemble_A(eta, M: np.ndarray) -> np.ndarray:
    T = theta(eta)
    A = T @ np.asarray(M, dtype=float) @ T.conj().T
    return 0.5 * (A + A.conj().T)


def nu_tilde(eta, M: np.ndarray, convention: str = "A") -> np.ndarray:
    """Sorted splitting coefficients at one ``eta``.

    ``convention="A"`` returns the eigenvalues of ``A(eta)`` (the values that
    reproduce the tabulated ones); ``"compact"`` returns the eigenvalues
    ``nu`` of ``A a = -nu a``, i.e. the negated spectrum.
    """
    ev = np.linalg.eigvalsh(assemble_A(eta, M))
    if convention == "A":
        return ev
    if convention == "compact":
        return np.sort(-ev)
    raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")


def patterned_M(r_m: float, t_m: float, t_perp_m: float) -> np.ndarray:
    M = np.full((6, 6), float(t_perp_m))
    np.fill_diagonal(M, r_m)
    for j in range(3):
        M[j, j + 3] = M[j + 3, j] = t_m
    return M


def closed_form_eigenvalues(r_m: float, t_m: float, t_perp_m: float) -> dict:
    """Spectrum of ``A`` at ``eta = 0`` and ``eta = (pi, pi, pi)`` for patterned ``M``."""
    a = 2 * r_m + 2 * t_m
    return {
        "zero": np.sort([a + 8 * t_perp_m, a - 4 * t_perp_m, a - 4 * t_perp_m]),
        "pi": np.full(3, 2 * r_m - 2 * t_m),
    }


@dataclass
class BandModel:
    M_matrix: np.ndarray
    K: float
    beta1: float
    mu1: float
    p: int = 1
    convention: str = "A"

    def nu(self, eta) -> np.ndarray:
        return nu_tilde(eta, self.M_matrix, self.convention)

    def first_band(self, eps: float, eta):
        return first_band_model(eps, eta, self.K, self.beta1, self.mu1)

    def cluster(self, eps: float, eta, p: int | None = None) -> np.ndarray:
        p = self.p if p is None else p
        return eps**-2 * THRESHOLD + (p * np.pi) ** 2 + eps * self.nu(eta)


@dataclass
class BandReport:
    aleph: tuple[float, float]
    aleph_compact: tuple[float, float]
    n_per_axis: int
    connected: bool
    max_jump: float
    records: list = field(default_factory=list)  # (eta, nu1, nu2, nu3)
    first_band: dict | None = None
    upsilon: dict | None = None

    def to_record(self, with_grid: bool = False) -> dict:
        out = {
            "aleph": list(self.aleph),
            "aleph_compact_convention": list(self.aleph_compact),
            "n_per_axis": self.n_per_axis,
            "connected": self.connected,
            "max_adjacent_jump": self.max_jump,
            "first_band": self.first_band,
            "upsilon_segments": self.upsilon,
        }
        if with_grid:
            out["records"] = [[list(map(float, e)), list(map(float, v))] for e, v in self.records]
        return out


def sweep_aleph(M: np.ndarray, n_per_axis: int = 33, keep_records: bool = False) -> BandReport:
    """Eigenvalues of ``A(eta)`` on a uniform grid of ``[0, 2 pi)^3``.

    The grid is swept in full with one batched ``eigvalsh`` call, which is
    cheap at this size, and the eight points of ``{0, pi}^3`` are appended.
    Connectivity: the union of the three band ranges must be an interval,
    i.e. consecutive ranges overlap once sorted.
    """
    if n_per_axis < 9:
        raise ValueError("n_per_axis must be >= 9")
    g = 2 * np.pi * np.arange(n_per_axis) / n_per_axis
    E = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    n_grid = E.shape[0]
    # the corners {0, pi}^3 carry the closed-form extremes; odd grids miss pi
    corners = np.pi * np.stack(np.meshgrid([0, 1], [0, 1], [0, 1], indexing="ij"), axis=-1).reshape(-1, 3)
    E = np.concatenate([E, corners])
    T = np.zeros((E.shape[0], 3, 6), dtype=complex)
    T[:, :, :3] = np.eye(3)
    idx = np.arange(3)
    T[:, idx, idx + 3] = np.exp(-1j * E)
    A = T @ np.asarray(M, dtype=float) @ np.conj(np.transpose(T, (0, 2, 1)))
    A = 0.5 * (A + np.conj(np.transpose(A, (0, 2, 1))))
    ev = np.linalg.eigvalsh(A)  # ascending per eta

    lo, hi = ev.min(axis=0), ev.max(axis=0)
    ev_grid = ev[:n_grid]
    ranges = sorted(zip(lo, hi))
    connected = True
    reach = ranges[0][1]
    for a, b in ranges[1:]:
        if a > reach + 1e-12:
            connected = False
        reach = max(reach, b)

    grid = ev_grid.reshape(n_per_axis, n_per_axis, n_per_axis, 3)
    jump = 0.0
    for ax in range(3):
        jump = max(jump, float(np.abs(np.roll(grid, -1, axis=ax) - grid).max()))

    aleph = (float(ev.min()), float(ev.max()))
    records = list(zip(E, ev)) if keep_records else []
    return BandReport(aleph, (-aleph[1], -aleph[0]), n_per_axis, connected, jump, records)


def first_band_M(eta, K: float, beta1: float):
    """``-4 beta1 K^2 sum_j cos(eta_j)``; ``eta`` may be a stack of shape ``(..., 3)``."""
    m = -4.0 * beta1 * K**2 * np.cos(np.asarray(eta, dtype=float)).sum(axis=-1)
    return float(m) if np.ndim(m) == 0 else m


def first_band_model(eps: float, eta, K: float, beta1: float, mu1: float) -> dict:
    """Two-term first-band approximation and its half-width bound.

    Returns ``lambda1``, ``M`` and ``half_width = eps^-2 exp(-beta1/eps) c1``
    with ``c1 = 12 beta1 K^2``.
    """
    if not 0.0 < eps <= 0.5:
        raise ValueError(f"eps = {eps!r} outside (0, 1/2]")
    scale = eps**-2 * np.exp(-beta1 / eps)
    m = first_band_M(eta, K, beta1)
    c1 = 12.0 * beta1 * K**2
    return {
        "lambda1": eps**-2 * mu1 + scale * m,
        "M": m,
        "center": eps**-2 * mu1,
        "c1": c1,
        "half_width": scale * c1,
    }


def upsilon_segments(eps: float, p_max: int, aleph, inflation: float = C_P_INFLATION) -> dict:
    """Predicted band clusters ``eps^-2 2 pi^2 + p^2 pi^2 + eps (-c_p, c_p)``."""
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    c = max(abs(aleph[0]), abs(aleph[1])) * inflation
    segments = []
    for p in range(1, p_max + 1):
        center = eps**-2 * THRESHOLD + (p * np.pi) ** 2
        segments.append({"p": p, "center": center, "half_width": eps * c,
                         "bands": [1 + q + 3 * (p - 1) for q in (1, 2, 3)], "multiplicity": 3})
    gaps = []
    for a, b in zip(segments, segments[1:]):
        gaps.append((b["center"] - b["half_width"]) - (a["center"] + a["half_width"]))
    overlap = any(g <= 0 for g in gaps)
    return {"eps": eps, "c_p": c, "segments": segments, "gaps": gaps,
            "overlap": overlap, "in_asymptotic_range": not overlap}


def gamma_profiles(p: int, eta_j: float, s):
    """Limit 1D profiles ``gamma^+ = sin(p pi s)``, ``gamma^- = -e^{i eta} sin(p pi s)``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    s = np.asarray(s, dtype=float)
    base = np.sin(p * np.pi * s)
    return base, -np.exp(1j * eta_j) * base


def gamma_derivatives_at_zero(p: int, eta_j: float) -> tuple[float, complex]:
    return p * np.pi, -p * np.pi * np.exp(1j * eta_j)


def band_path(n_per_leg: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Path (0,0,0)->(pi,0,0)->(pi,pi,0)->(pi,pi,pi)->(0,0,0) and its arc length."""
    corners = np.pi * np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1], [0, 0, 0]], dtype=float)
    pts = [corners[0]]
    for a, b in zip(corners, corners[1:]):
        for k in range(1, n_per_leg + 1):
            pts.append(a + (b - a) * k / n_per_leg)
    pts = np.array(pts)
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    return pts, arc


def band_path_table(M: np.ndarray, n_per_leg: int = 16) -> list[list[float]]:
    """Rows ``(s, eta1, eta2, eta3, nu1, nu2, nu3)`` along :func:`band_path`."""
    pts, arc = band_path(n_per_leg)
    return [[float(s), *map(float, e), *map(float, nu_tilde(e, M))] for s, e in zip(arc, pts)]
