import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vohedge.cumulants import NIG, reparametrize_moment_matched
from vohedge.cumulants import Poisson, VarianceGamma
from vohedge.pii import (LevyHomogeneous, Table, TimeChangedBrownian, TwoFactor,
                         WienerIntegral)

settings.register_profile("vohedge", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("vohedge")

CALIBRATED = NIG(38.46, -3.85, 6.40, 0.64)
ELECTRICITY = NIG(15.81, -1.581, 15.57, 1.56)
T = 0.25
S0 = 100.0


def builtin_models():
    """One instance of every model kind, shared by the invariant suites."""
    nig = NIG(15.0, -1.5, 3.0, 0.2)
    return {
        "levy_nig": LevyHomogeneous(T=T, driver=CALIBRATED),
        "levy_poisson": LevyHomogeneous(T=T, driver=Poisson(2.0)),
        "levy_vg": LevyHomogeneous(T=T, driver=VarianceGamma(6.0, -0.3, 3.0, 0.0)),
        "wiener": WienerIntegral(T=T, driver=nig, kernel=lambda s: 0.5 + s),
        "two_factor": TwoFactor(T=T, driver=nig, sigma_s=0.6, lambda_mr=3.0, sigma_l=0.1,
                                trend=lambda s: 0.05 + 0.0 * s),
        "toy": TimeChangedBrownian(T=T, psi=Table([0.0, 0.1, 0.25], [0.0, 0.05, 0.2])),
    }


@pytest.fixture(scope="session")
def calibrated():
    return CALIBRATED


@pytest.fixture(scope="session")
def nig_c008():
    return reparametrize_moment_matched(CALIBRATED, 0.08)


@pytest.fixture(scope="session")
def levy_c008(nig_c008):
    return LevyHomogeneous(T=T, driver=nig_c008)


@pytest.fixture(scope="session")
def levy_c1():
    return LevyHomogeneous(T=T, driver=CALIBRATED)


@pytest.fixture(scope="session")
def electricity_c008():
    d = reparametrize_moment_matched(ELECTRICITY, 0.08)
    return TwoFactor(T=T, driver=d, sigma_s=0.5747, lambda_mr=3.0, delivery=T)


def central_diff(f, x, h, order=1):
    if order == 1:
        return (f(x + h) - f(x - h)) / (2 * h)
    return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
