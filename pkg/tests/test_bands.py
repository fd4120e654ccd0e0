import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thinlattice.bands import (
    REFERENCE_M_COEFFS,
    BandModel,
    assemble_A,
    band_path,
    band_path_table,
    closed_form_eigenvalues,
    first_band_M,
    first_band_model,
    gamma_derivatives_at_zero,
    gamma_profiles,
    nu_tilde,
    patterned_M,
    sweep_aleph,
    theta,
    upsilon_segments,
)
from thinlattice.operators import THRESHOLD

coef = st.floats(-2, 2, allow_nan=False)
angle = st.floats(-2 * math.pi, 4 * math.pi, allow_nan=False)
etas = st.tuples(angle, angle, angle)


def random_symmetric(seed):
    A = np.random.default_rng(seed).standard_normal((6, 6))
    return A + A.T


@settings(max_examples=50, deadline=None)
@given(coef, coef, coef)
def test_closed_forms_for_any_pattern(r, t, tp):
    M = patterned_M(r, t, tp)
    cf = closed_form_eigenvalues(r, t, tp)
    A0 = assemble_A((0, 0, 0), M)
    a = 2 * r + 2 * t
    assert np.allclose(A0, a * np.eye(3) + 4 * tp * (np.ones((3, 3)) - np.eye(3)), atol=1e-12)
    assert np.allclose(np.linalg.eigvalsh(A0), cf["zero"], atol=1e-12)
    Api = assemble_A((math.pi,) * 3, M)
    assert np.allclose(Api, (2 * r - 2 * t) * np.eye(3), atol=1e-12)
    assert np.allclose(np.linalg.eigvalsh(Api), cf["pi"], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(etas, st.integers(0, 2**31 - 1))
def test_A_hermitian_conjugation_and_periodicity(eta, seed):
    M = random_symmetric(seed)
    T = theta(eta)
    A_raw = T @ M @ T.conj().T
    assert np.abs(A_raw - A_raw.conj().T).max() < 1e-12
    A = assemble_A(eta, M)
    assert np.allclose(assemble_A(tuple(-e for e in eta), M), A.conj(), atol=1e-12)
    assert np.allclose(assemble_A((eta[0] + 2 * math.pi, eta[1], eta[2] - 2 * math.pi), M), A, atol=1e-10)
    nu = nu_tilde(eta, M)
    assert np.all(np.diff(nu) >= 0) and np.isrealobj(nu)
    assert np.allclose(nu_tilde(eta, M, "compact"), np.sort(-nu))


def test_unknown_convention():
    with pytest.raises(ValueError):
        nu_tilde((0, 0, 0), np.zeros((6, 6)), "other")


def test_zero_matrix_gives_degenerate_aleph():
    rep = sweep_aleph(np.zeros((6, 6)), 9)
    assert rep.aleph == (0.0, 0.0) and rep.connected


def test_reference_matrix_aleph_and_refinement():
    M = patterned_M(*REFERENCE_M_COEFFS)
    a17 = sweep_aleph(M, 17)
    a33 = sweep_aleph(M, 33)
    assert abs(a33.aleph[0] - a17.aleph[0]) < 0.01 and abs(a33.aleph[1] - a17.aleph[1]) < 0.01
    assert a33.connected
    # endpoints are the closed forms at eta = 0 and eta = (pi, pi, pi)
    cf = closed_form_eigenvalues(*REFERENCE_M_COEFFS)
    assert a33.aleph[0] == pytest.approx(min(cf["zero"].min(), cf["pi"][0]), abs=1e-12)
    assert a33.aleph[1] == pytest.approx(max(cf["zero"].max(), cf["pi"][0]), abs=1e-12)
    assert a33.aleph_compact == (-a33.aleph[1], -a33.aleph[0])


def test_sweep_rejects_coarse_grid():
    with pytest.raises(ValueError):
        sweep_aleph(np.zeros((6, 6)), 8)


def test_sweep_continuity_improves_with_refinement():
    M = random_symmetric(7)
    j9, j17, j33 = (sweep_aleph(M, n).max_jump for n in (9, 17, 33))
    assert j33 < j17 < j9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_aleph_covers_all_sampled_spectra(seed):
    M = random_symmetric(seed)
    rep = sweep_aleph(M, 9, keep_records=True)
    rng = np.random.default_rng(seed)
    for eta in rng.uniform(0, 2 * math.pi, (5, 3)):
        nu = nu_tilde(eta, M)
        # off-grid points may exceed the sampled hull only by the sampling error
        assert nu.min() >= rep.aleph[0] - rep.max_jump and nu.max() <= rep.aleph[1] + rep.max_jump
    assert len(rep.records) == 9**3 + 8


def test_first_band_vanishing_cosine_sum():
    out = first_band_model(0.25, (math.pi / 2,) * 3, K=1.4, beta1=2.3, mu1=12.9)
    assert out["lambda1"] == pytest.approx(0.25**-2 * 12.9, rel=1e-15)
    assert out["center"] == 0.25**-2 * 12.9


def test_first_band_bound_and_extremes():
    K, beta = 1.41, 2.28
    g = np.linspace(0, 2 * math.pi, 21)
    E = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    m = first_band_M(E, K, beta)
    assert np.all(np.abs(m) <= 12 * beta * K**2 + 1e-12)
    assert np.allclose(E[np.argmin(m)], 0.0)
    assert np.allclose(E[np.argmax(m)], math.pi)
    out = first_band_model(0.2, (0, 0, 0), K, beta, 12.9)
    assert out["c1"] == pytest.approx(12 * beta * K**2)
    assert out["half_width"] == pytest.approx(0.2**-2 * math.exp(-beta / 0.2) * 12 * beta * K**2)
    assert out["lambda1"] == pytest.approx(out["center"] - out["half_width"])


@pytest.mark.parametrize("eps", [0.0, -0.1, 0.6])
def test_first_band_domain(eps):
    with pytest.raises(ValueError):
        first_band_model(eps, (0, 0, 0), 1.0, 1.0, 1.0)


def test_upsilon_segments():
    out = upsilon_segments(0.1, 4, (-1.2, 1.04))
    seg = out["segments"]
    assert seg[0]["center"] == pytest.approx(100 * 2 * math.pi**2 + math.pi**2)
    for p in range(1, 4):
        d = seg[p]["center"] - seg[p - 1]["center"]
        assert d == pytest.approx((2 * p + 1) * math.pi**2)
    assert all(s["multiplicity"] == 3 for s in seg)
    assert [s["bands"] for s in seg[:2]] == [[2, 3, 4], [5, 6, 7]]
    assert out["c_p"] == pytest.approx(1.2 * 1.05)
    assert out["in_asymptotic_range"]
    with pytest.raises(ValueError):
        upsilon_segments(0.1, 0, (-1, 1))


def test_upsilon_overlap_reported_at_large_eps():
    out = upsilon_segments(20.0, 2, (-1.2, 1.04))
    assert out["overlap"] and not out["in_asymptotic_range"]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.floats(-math.pi, math.pi))
def test_gamma_profile_identities(p, eta):
    gp, gm = gamma_profiles(p, eta, np.array([0.0, 0.5, -0.5]))
    assert gp[0] == 0 and gm[0] == 0
    assert gm[2] == pytest.approx(np.exp(1j * eta) * gp[1], abs=1e-14)
    dp, dm = gamma_derivatives_at_zero(p, eta)
    step = 1e-6
    num_p, num_m = (np.array(gamma_profiles(p, eta, [step])) - np.array(gamma_profiles(p, eta, [-step]))) / (2 * step)
    assert dp == pytest.approx(num_p[0].real, rel=1e-6)
    assert dm == pytest.approx(num_m[0], rel=1e-6)
    # tabulated conjugated form
    assert abs(dm) == pytest.approx(p * math.pi) and np.conj(dm) == pytest.approx(-p * math.pi * np.exp(-1j * eta))
    with pytest.raises(ValueError):
        gamma_profiles(0, eta, 0.1)


def test_band_path_and_table():
    pts, arc = band_path(4)
    assert pts.shape == (17, 3) and np.allclose(pts[0], 0) and np.allclose(pts[-1], 0)
    assert np.all(np.diff(arc) > 0)
    rows = band_path_table(patterned_M(*REFERENCE_M_COEFFS), 4)
    assert len(rows) == 17 and len(rows[0]) == 7


def test_band_model_cluster():
    M = patterned_M(*REFERENCE_M_COEFFS)
    bm = BandModel(M, K=1.4, beta1=2.3, mu1=12.9)
    c = bm.cluster(0.1, (0, 0, 0))
    assert np.allclose(c, 100 * THRESHOLD + math.pi**2 + 0.1 * bm.nu((0, 0, 0)))
    assert bm.first_band(0.1, (0, 0, 0))["center"] == pytest.approx(1290.0)
