import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vohedge.cumulants import (NIG, BrownianDrift, DomainStrip, Poisson, VarianceGamma,
                               cumulant_derivatives_at_zero, evaluate_cumulant, excess_kurtosis,
                               reparametrize_moment_matched, validate_exponential_assumptions)
from vohedge.errors import DomainViolation

from conftest import CALIBRATED, central_diff

MODELS = [
    Poisson(1.3),
    NIG(38.46, -3.85, 6.40, 0.64),
    NIG(3.0768, -0.0249, 0.5197, 0.0003),
    VarianceGamma(4.0, -0.5, 2.0, 0.1),
    BrownianDrift(0.4, -0.08),
]
IDS = ["poisson", "nig", "nig_c008", "vg", "brownian"]


def _interior(model, frac):
    s = model.strip
    lo = max(s.lower, -5.0)
    hi = min(s.upper, 5.0)
    return lo + (hi - lo) * (0.05 + 0.9 * frac)


class TestEvaluate:
    def test_poisson_at_one(self):
        assert evaluate_cumulant(Poisson(1.0), 1.0) == pytest.approx(math.e - 1, rel=1e-15)

    @pytest.mark.parametrize("model", MODELS, ids=IDS)
    def test_zero_is_exactly_zero(self, model):
        assert evaluate_cumulant(model, 0.0) == 0

    def test_nig_outside_strip(self):
        with pytest.raises(DomainViolation):
            evaluate_cumulant(CALIBRATED, 43.0)

    def test_nig_strip(self):
        s = CALIBRATED.strip
        assert (s.lower, s.upper) == pytest.approx((-34.61, 42.31))

    def test_vg_strip_endpoints_are_roots(self):
        vg = VarianceGamma(4.0, -0.5, 2.0)
        for x in (vg.strip.lower, vg.strip.upper):
            assert vg.alpha - vg.beta * x - 0.5 * x * x == pytest.approx(0.0, abs=1e-12)

    def test_vector_input(self):
        z = np.array([0.0, 0.5 + 1j, -0.3 - 2j])
        out = evaluate_cumulant(CALIBRATED, z)
        assert out.shape == (3,)


class TestDerivatives:
    def test_calibrated_std(self):
        # calibrated annualised volatility of about 41%
        k = cumulant_derivatives_at_zero(CALIBRATED, 2)
        assert math.sqrt(k[1]) == pytest.approx(0.41, abs=0.01)

    def test_calibrated_mean(self):
        k1 = cumulant_derivatives_at_zero(CALIBRATED, 1)[0]
        # finite-difference oracle, frozen: -0.003899949864135044
        assert k1 == pytest.approx(-0.003899949864135044, rel=1e-6)
        assert abs(k1) < 0.01

    def test_brownian(self):
        k = cumulant_derivatives_at_zero(BrownianDrift(0.3, 0.05), 4)
        assert k == pytest.approx([0.05, 0.09, 0.0, 0.0])

    @pytest.mark.parametrize("model", MODELS, ids=IDS)
    @pytest.mark.parametrize("order", [1, 2])
    def test_against_finite_differences(self, model, order):
        h = 1e-4
        fd = central_diff(lambda x: float(np.real(evaluate_cumulant(model, x))), 0.0, h, order)
        exact = cumulant_derivatives_at_zero(model, order)[order - 1]
        # the second difference cancels terms of size |delta gamma0|, so its rounding
        # error (about eps * scale / h^2) sets the attainable agreement
        scale = max(abs(v) for v in model.params().values()) ** 2
        roundoff = 4 * np.finfo(float).eps * max(1.0, scale) / h ** order
        assert abs(exact - fd) <= max(1e-6 * abs(exact), roundoff)

    @pytest.mark.parametrize("model", MODELS, ids=IDS)
    def test_higher_orders_by_differencing_lower(self, model):
        h = 1e-4
        for order in (3, 4):
            fd = central_diff(lambda x: np.real(model.derivative(x, order - 1)), 0.0, h)
            assert model.derivative(0.0, order).real == pytest.approx(fd, rel=1e-6, abs=1e-8)

    @pytest.mark.parametrize("model", MODELS[1:4], ids=IDS[1:4])
    def test_variance_positive(self, model):
        assert cumulant_derivatives_at_zero(model, 2)[1] > 0


class TestProperties:
    @pytest.mark.parametrize("model", MODELS, ids=IDS)
    @given(frac=st.floats(0, 1), y=st.floats(-50, 50))
    def test_conjugate_symmetry(self, model, frac, y):
        z = complex(_interior(model, frac), y)
        a = evaluate_cumulant(model, z.conjugate())
        b = np.conj(evaluate_cumulant(model, z))
        assert abs(a - b) <= 1e-12 * (1 + abs(b))

    @pytest.mark.parametrize("model", MODELS, ids=IDS)
    @given(frac=st.floats(0, 1))
    def test_real_on_reals(self, model, frac):
        assert np.imag(evaluate_cumulant(model, _interior(model, frac))) == 0

    @pytest.mark.parametrize("model", MODELS, ids=IDS)
    @given(frac=st.floats(0.01, 1))
    def test_convexity_gap(self, model, frac):
        s = model.strip
        x = 0.5 * _interior(model, frac)
        if not (s.contains(x) and s.contains(2 * x)) or abs(x) < 1e-3:
            return
        gap = np.real(evaluate_cumulant(model, 2 * x) - 2 * evaluate_cumulant(model, x))
        assert gap > 0


class TestMomentMatching:
    @pytest.mark.parametrize("C,alpha,kurt", [(0.08, 3.08, 1.87), (0.2, 7.69, 0.30), (2.0, 76.92, 4e-3)])
    def test_table_rows(self, C, alpha, kurt):
        # calibration rows: (C, alpha, excess kurtosis)
        m = reparametrize_moment_matched(CALIBRATED, C)
        assert m.alpha == pytest.approx(alpha, rel=5e-3)
        assert excess_kurtosis(m) == pytest.approx(kurt, abs=0.02)

    def test_identity(self):
        assert reparametrize_moment_matched(CALIBRATED, 1.0) == CALIBRATED

    @given(C=st.floats(0.05, 5.0))
    def test_first_three_cumulants_preserved(self, C):
        m = reparametrize_moment_matched(CALIBRATED, C)
        ref = cumulant_derivatives_at_zero(CALIBRATED, 3)
        got = cumulant_derivatives_at_zero(m, 3)
        assert got == pytest.approx(ref, rel=1e-10, abs=1e-12)

    def test_finite_difference_cumulants(self):
        m = reparametrize_moment_matched(CALIBRATED, 0.08)
        h = 1e-4
        a = central_diff(lambda x: np.real(evaluate_cumulant(m, x)), 0.0, h)
        b = central_diff(lambda x: np.real(evaluate_cumulant(CALIBRATED, x)), 0.0, h)
        assert a == pytest.approx(b, abs=1e-8)
        for order in (2, 3):
            a = central_diff(lambda x: np.real(m.derivative(x, 1)), 0.0, h, order - 1)
            b = central_diff(lambda x: np.real(CALIBRATED.derivative(x, 1)), 0.0, h, order - 1)
            assert a == pytest.approx(b, abs=1e-8)

    def test_rejects_non_nig(self):
        with pytest.raises(TypeError):
            reparametrize_moment_matched(Poisson(1.0), 0.5)

    def test_parameter_types_are_float(self):
        m = reparametrize_moment_matched(CALIBRATED, 0.2)
        assert all(type(v) is float for v in (m.alpha, m.beta, m.delta, m.mu))


class TestValidation:
    def test_poisson_valid(self):
        assert validate_exponential_assumptions(Poisson(1.0)).ok

    def test_calibrated_valid(self):
        assert validate_exponential_assumptions(CALIBRATED).ok

    def test_boundary_invalid(self):
        rep = validate_exponential_assumptions(NIG(3.0, 2.0, 1.0, 0.0))
        assert not rep.ok and rep.reasons

    def test_deterministic_brownian_invalid(self):
        assert not validate_exponential_assumptions(BrownianDrift(0.0, 0.1)).ok

    def test_scaled_electricity_criterion(self):
        d = NIG(15.81, -1.581, 15.57, 1.56)
        assert validate_exponential_assumptions(d, 0.5747).ok
        assert not validate_exponential_assumptions(d, 9.0).ok


class TestDomainStrip:
    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            DomainStrip(1.0, -1.0)

    def test_scaled_and_intersect(self):
        s = DomainStrip(-2.0, 4.0)
        assert (s.scaled(2.0).lower, s.scaled(2.0).upper) == (-1.0, 2.0)
        i = s.intersect(DomainStrip(-1.0, 10.0))
        assert (i.lower, i.upper) == (-1.0, 4.0)

    def test_contains_margin(self):
        s = DomainStrip(-1.0, 1.0)
        assert s.contains(0.999)
        assert not s.contains(1.0)


@pytest.mark.parametrize("bad", [lambda: NIG(1.0, 2.0, 1.0), lambda: NIG(2.0, 1.0, -1.0),
                                 lambda: Poisson(0.0), lambda: VarianceGamma(1.0, 0.0, 0.0),
                                 lambda: BrownianDrift(-1.0)])
def test_invalid_parameters(bad):
    with pytest.raises(ValueError):
        bad()
