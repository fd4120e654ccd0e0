import math

import numpy as np
import pytest
import scipy.linalg as la

from thinlattice.floquet import (
    AsymptoticsError,
    CellBandRecord,
    cluster_center,
    compare_asymptotics,
    compute_cell_bands,
    nu_scaled,
)
from thinlattice.bands import assemble_A, patterned_M
from thinlattice.mesh import build_cell_grid
from thinlattice.operators import THRESHOLD, assemble_floquet, discrete_threshold

from oracles import dense_floquet


@pytest.mark.parametrize("eta", [(0.0, 0.0, 0.0), (0.4, -1.3, 2.9)])
def test_dense_oracle(eta):
    eps, h = 0.5, 1 / 8
    rec = compute_cell_bands(eps, h, [eta], k=6)[0]
    ref = la.eigvalsh(dense_floquet(eps, h, eta))[:6]
    assert build_cell_grid(eps, h).n_total == len(dense_floquet(eps, h, (0, 0, 0)))
    assert np.allclose(rec.values, ref, rtol=1e-9)


def test_records_are_even_in_eta():
    eta = (0.7, 1.9, -2.2)
    a, b = compute_cell_bands(0.5, 1 / 8, [eta, tuple(-e for e in eta)], k=5)
    assert np.allclose(a.values, b.values, rtol=1e-9)
    assert np.all(np.diff(a.values) >= 0) and np.all(a.values > 0)
    assert np.all(a.residuals <= 1e-8)


def test_k_below_four_rejected():
    with pytest.raises(ValueError):
        compute_cell_bands(0.5, 1 / 8, k=3)


def test_first_band_isolated(floquet_setup):
    _, _, records = floquet_setup
    for eps, recs in records.items():
        for r in recs:
            assert r.ok
            spread = r.values[3] - r.values[1]
            assert r.values[1] - r.values[0] > spread, (eps, r.eta)


def test_compare_requires_two_eps(floquet_setup):
    constants, _, records = floquet_setup
    with pytest.raises(AsymptoticsError):
        compare_asymptotics({0.5: records[0.5]}, constants)


def test_compare_requires_eta_zero(floquet_setup):
    constants, _, records = floquet_setup
    stripped = {e: [r for r in recs if any(r.eta)] for e, recs in records.items()}
    with pytest.raises(AsymptoticsError):
        compare_asymptotics(stripped, constants)


def test_failed_records_are_skipped(floquet_setup):
    constants, M, records = floquet_setup
    extra = {e: recs + [CellBandRecord(e, (1.0, 1.0, 1.0), np.empty(0), recs[0].h, np.empty(0), "boom")]
             for e, recs in records.items()}
    rep = compare_asymptotics(extra, constants, M)
    assert all(p["n_eta"] == len(records[p["eps"]]) for p in rep["per_eps"])


def test_trends_and_bounds(floquet_setup):
    constants, M, records = floquet_setup
    rep = compare_asymptotics(records, constants, M)
    assert rep["eps2_lambda1_trend_decreasing"]
    assert rep["center_rel_error_decreasing"]
    assert rep["widths_within_bound"]
    assert rep["cluster_structure_smallest_eps"]
    assert rep["splitting_sign_agree_smallest_eps"]


@pytest.mark.xfail(strict=True, reason="O(eps^2) remainder is not small at eps = 1/4; see the decisions ledger")
def test_splitting_magnitude_within_half(floquet_setup):
    constants, M, records = floquet_setup
    assert compare_asymptotics(records, constants, M)["splitting_within_50pct_smallest_eps"]


def test_model_width_consistent_within_factor_three(floquet_setup):
    constants, _, records = floquet_setup
    rep = compare_asymptotics(records, constants)
    smallest = rep["per_eps"][-1]
    assert smallest["eps"] == 0.25
    model_width = 2 * smallest["first_band_width_bound"] / (2 * 1.5)
    ratio = smallest["first_band_width"] / model_width
    assert 1 / 3 <= ratio <= 3


def test_cluster_center_formulas():
    eps = 0.25
    assert cluster_center(eps, 1) == pytest.approx(16 * THRESHOLD + math.pi**2)
    hs = 1 / 4
    h = hs * eps
    expected = discrete_threshold(hs) / eps**2 + 4 / h**2 * math.sin(math.pi * h / 2) ** 2
    assert cluster_center(eps, 1, hs) == pytest.approx(expected)
    assert cluster_center(1e-3 / hs * 0 + eps, 2, 1e-4) == pytest.approx(cluster_center(eps, 2), rel=1e-6)


def test_nu_scaled_is_rescaled_A_spectrum():
    M = patterned_M(0.08, -0.44, -0.06)
    eta = (0.3, 1.0, 2.0)
    expected = np.sort(-4 * math.pi**2 * np.linalg.eigvalsh(assemble_A(eta, M)))
    assert np.allclose(nu_scaled(eta, M), expected)
    assert np.allclose(nu_scaled(eta, M, p=2), 4 * nu_scaled(eta, M))


def test_floquet_operator_hermitian_at_ladder():
    for eps in (1 / 2, 1 / 3, 1 / 4):
        op = assemble_floquet(build_cell_grid(eps, eps / 4), (1.0, 2.0, 3.0))
        assert op.hermitian_defect() < 1e-9
