"""Direct quasi-periodic eigensolves on the periodicity cell.

The cell problem at spacing ``h`` resolves the bar cross-section with
``eps/h`` intervals, exactly like the junction problem at the scaled spacing
``h' = h/eps``.  Asymptotic predictions are therefore compared against
junction quantities (``mu1``, ``beta1``, ``K``) computed at that same ``h'``
and against the discrete threshold ``Lambda_{h'}``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bands import assemble_A, first_band_model
from .mesh import build_cell_grid
from .nearfield import compute_mu1, extract_decay_amplitude
from .operators import THRESHOLD, assemble_floquet, discrete_threshold
from .solvers import DEFAULT_SEED, SolverError, smallest_eigenpairs

__all__ = [
    "CellBandRecord",
    "JunctionConstants",
    "compute_cell_bands",
    "matched_junction_constants",
    "cluster_center",
    "nu_scaled",
    "compare_asymptotics",
    "AsymptoticsError",
    "WIDTH_SLACK",
]

WIDTH_SLACK = 1.5
DEFAULT_ETAS = tuple(
    tuple(math.pi * np.array(c, dtype=float))
    for c in ((0, 0, 0), (1, 0, 0), (1, 1, 0), (1, 1, 1), (0.5, 0.5, 0.5), (0.5, 0, 0))
)


class AsymptoticsError(ValueError):
    pass


@dataclass
class CellBandRecord:
    eps: float
    eta: tuple[float, float, float]
    values: np.ndarray
    h: float
    residuals: np.ndarray
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_row(self) -> list:
        return [self.eps, self.h, *self.eta, *map(float, self.values)]


def compute_cell_bands(
    eps: float,
    h: float | None = None,
    eta_list=DEFAULT_ETAS,
    k: int = 6,
    tol: float = 1e-8,
    seed: int = DEFAULT_SEED,
) -> list[CellBandRecord]:
    """The ``k`` smallest Floquet eigenvalues for each ``eta``.

    ``h`` defaults to ``eps/4``.  A failed solve yields a record with empty
    values and the error message; the other records are kept.
    """
    if k < 4:
        raise ValueError("k must be >= 4")
    h = eps / 4 if h is None else h
    grid = build_cell_grid(eps, h)
    out = []
    for eta in eta_list:
        eta = tuple(float(e) for e in eta)
        try:
            res = smallest_eigenpairs(assemble_floquet(grid, eta), k=k, tol=tol, seed=seed)
            out.append(CellBandRecord(eps, eta, res.values, h, res.residuals))
        except SolverError as exc:
            out.append(CellBandRecord(eps, eta, np.empty(0), h, np.empty(0), error=str(exc)))
    return out


@dataclass
class JunctionConstants:
    h_scaled: float
    R: float
    mu1: float
    beta1: float
    K: float

    def to_record(self) -> dict:
        return dict(self.__dict__)


def matched_junction_constants(h_scaled: float, R: float = 3.0) -> JunctionConstants:
    """``mu1``, fitted ``beta1`` and ``K`` on the junction grid of spacing ``h_scaled``."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mode = compute_mu1(R, (h_scaled,))
    fit = extract_decay_amplitude(mode)
    return JunctionConstants(h_scaled, R, mode.mu1, fit.beta_fit, fit.K)


def cluster_center(eps: float, p: int = 1, h_scaled: float | None = None) -> float:
    """``eps^-2 2 pi^2 + p^2 pi^2``, or its grid analogue when ``h_scaled`` is given."""
    if h_scaled is None:
        return eps**-2 * THRESHOLD + (p * math.pi) ** 2
    h = h_scaled * eps
    longitudinal = 4.0 / h**2 * math.sin(p * math.pi * h / 2) ** 2
    return eps**-2 * discrete_threshold(h_scaled) + longitudinal


def nu_scaled(eta, M: np.ndarray, p: int = 1) -> np.ndarray:
    """Splitting in eigenvalue units: ``-4 p^2 pi^2`` times the spectrum of ``A``.

    The factor comes from the compatibility condition with the normalised
    1D profiles (their squared norm on the two half-edges is 1/2).
    """
    return np.sort(-4.0 * (p * math.pi) ** 2 * np.linalg.eigvalsh(assemble_A(eta, M)))


def _at(records, eta):
    for r in records:
        if r.ok and np.allclose(r.eta, eta, atol=1e-12):
            return r
    return None


def compare_asymptotics(
    records_by_eps: dict,
    constants: JunctionConstants,
    M: np.ndarray | None = None,
    discrete_centers: bool = True,
) -> dict:
    """Trend and bound checks of the direct cell spectra against the models."""
    eps_list = sorted(records_by_eps, reverse=True)
    if len(eps_list) < 2:
        raise AsymptoticsError("need records at two or more values of eps")
    hs = constants.h_scaled if discrete_centers else None
    per_eps = []
    for eps in eps_list:
        recs = [r for r in records_by_eps[eps] if r.ok]
        zero = _at(recs, (0.0, 0.0, 0.0))
        if zero is None:
            raise AsymptoticsError(f"no successful record at eta = 0 for eps = {eps}")
        vals = np.array([r.values for r in recs])
        center = cluster_center(eps, 1, hs)
        lam1 = vals[:, 0]
        width = float(lam1.max() - lam1.min())
        model = first_band_model(eps, (0.0, 0.0, 0.0), constants.K, constants.beta1, constants.mu1)
        bound = 2.0 * model["half_width"] * WIDTH_SLACK
        cluster = vals[:, 1:4]
        entry = {
            "eps": eps,
            "h": recs[0].h,
            "n_eta": len(recs),
            "eps2_lambda1_minus_mu1": float(eps**2 * zero.values[0] - constants.mu1),
            "first_band_width": width,
            "first_band_width_bound": bound,
            "width_within_bound": width <= bound,
            "cluster_center": center,
            "cluster_max_offset": float(np.abs(cluster - center).max()),
            "cluster_near": bool(np.abs(cluster - center).max() <= 1.5 * math.pi**2),
            "separated_from_band1": bool(cluster.min(axis=1).min() > lam1.max()),
            "separated_from_band5": bool(vals.shape[1] > 4 and np.all(vals[:, 4] > cluster.max(axis=1))
                                         and vals[:, 4].min() > cluster.max()),
            "center_rel_error": float(abs(cluster.mean() - center) / center),
        }
        if M is not None:
            rows = []
            for r in recs:
                measured = (r.values[1:4] - center) / eps
                predicted = nu_scaled(r.eta, M) / 1.0
                rows.append({
                    "eta": list(r.eta),
                    "measured": measured.tolist(),
                    "predicted": predicted.tolist(),
                    "sign_agree": bool(np.all(np.sign(measured) == np.sign(predicted))),
                    "within_50pct": bool(np.all(np.abs(measured - predicted) <= 0.5 * np.abs(predicted))),
                })
            entry["splitting"] = rows
        per_eps.append(entry)

    d = [abs(e["eps2_lambda1_minus_mu1"]) for e in per_eps]
    c = [e["center_rel_error"] for e in per_eps]
    smallest = per_eps[-1]
    report = {
        "constants": constants.to_record(),
        "per_eps": per_eps,
        "eps2_lambda1_trend_decreasing": all(b < a for a, b in zip(d, d[1:])),
        "center_rel_error_decreasing": all(b < a for a, b in zip(c, c[1:])),
        "widths_within_bound": all(e["width_within_bound"] for e in per_eps),
        "cluster_structure_smallest_eps": bool(
            smallest["cluster_near"] and smallest["separated_from_band1"] and smallest["separated_from_band5"]
        ),
    }
    if M is not None:
        rows = smallest["splitting"]
        report["splitting_sign_agree_smallest_eps"] = all(r["sign_agree"] for r in rows)
        report["splitting_within_50pct_smallest_eps"] = all(r["within_50pct"] for r in rows)
    return report
