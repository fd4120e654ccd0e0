import warnings

import pytest

from thinlattice.floquet import compute_cell_bands, matched_junction_constants
from thinlattice.nearfield import compute_mixed_spectrum, compute_mu1, extract_decay_amplitude
from thinlattice.scattering import compute_scattering_data

from configs import ACCEPTANCE_LINES

SCATTERING_H = 1 / 20
EPS_LADDER = (1 / 2, 1 / 3, 1 / 4)


@pytest.fixture(scope="session")
def trapped_mode():
    return compute_mu1(2.5, (1 / 8, 1 / 12, 1 / 16))


@pytest.fixture(scope="session")
def decay_fit(trapped_mode):
    return extract_decay_amplitude(trapped_mode)


@pytest.fixture(scope="session")
def mixed_spectrum():
    return compute_mixed_spectrum(2.5, 1 / 12, k=3)


@pytest.fixture(scope="session")
def scattering_coarse():
    return compute_scattering_data(2.5, 1 / 12)


@pytest.fixture(scope="session")
def scattering_fine():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return compute_scattering_data(2.5, SCATTERING_H)


@pytest.fixture(scope="session")
def floquet_setup():
    h_scaled = 1 / 4
    constants = matched_junction_constants(h_scaled, 3.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        M = compute_scattering_data(2.5, h_scaled).M
    records = {eps: compute_cell_bands(eps, eps * h_scaled) for eps in EPS_LADDER}
    return constants, M, records


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
