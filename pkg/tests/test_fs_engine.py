import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import norm

from vohedge.cumulants import NIG, BrownianDrift, Poisson, reparametrize_moment_matched
from vohedge.errors import DegenerateModel, DomainViolation
from vohedge.fs_engine import (SurfaceBuilder, beta_density, build_coefficients, initial_capital,
                               mvt_K, price_process, pure_hedge, quadratic_error, surface)
from vohedge.payoff import atom_measure, call_representation, put_representation
from vohedge.pii import LevyHomogeneous, TimeChangedBrownian, TwoFactor, kappa

from conftest import CALIBRATED, S0, T, builtin_models

MODELS = builtin_models()
NAMES = sorted(MODELS)
COEFFS = {name: build_coefficients(m, S0) for name, m in MODELS.items()}
E1 = math.e - 1


def _martingale_nig():
    a, b, d = 38.46, -3.85, 6.40
    mu = -d * (math.sqrt(a * a - b * b) - math.sqrt(a * a - (b + 1) ** 2))
    return NIG(a, b, d, mu)


def _rate(m, t, z):
    return float(np.real(m.rate(np.asarray(t, dtype=float), np.complex128(z))))


def _power_two_oracle(m, s0):
    """Variance of the hedging error for the claim ``S_T^2`` from the bracket of its FS residual.

    ``H_t = c(t) S_t^2`` with ``c(t) = exp(int_t^T eta(2, ds))``; the orthogonal part has
    ``d<L>_t = c(t)^2 S_t^4 D_t dt`` and ``J0 = E int exp(-(K_T - K_t)) d<L>_t``.
    """
    def dr(t):
        return _rate(m, t, 2) - 2 * _rate(m, t, 1)

    def r3(t):
        return _rate(m, t, 3) - _rate(m, t, 2) - _rate(m, t, 1)

    def eta2(t):
        return _rate(m, t, 2) - r3(t) / dr(t) * _rate(m, t, 1)

    def lam2(t):
        return _rate(m, t, 1) ** 2 / dr(t)

    def D(t):
        return _rate(m, t, 4) - 2 * _rate(m, t, 2) - r3(t) ** 2 / dr(t)

    def integ(f, a, b):
        return quad(f, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]

    T_ = m.T
    f = lambda t: D(t) * math.exp(-integ(lam2, t, T_) + 2 * integ(eta2, t, T_)  # noqa: E731
                                  + float(np.real(kappa(m, t, 4.0))))
    return s0 ** 4 * integ(f, 0, T_)


class TestCoefficients:
    def test_poisson_gamma_closed_form(self):
        c = build_coefficients(LevyHomogeneous(T=T, driver=Poisson(2.0)), S0)
        z = np.array([0.5, 2.0, 1.5 + 1j, -0.3 - 4j])
        assert c.gamma(z, 0.1) == pytest.approx((np.exp(z) - 1) / E1, rel=1e-13)

    def test_poisson_eta(self):
        lam = 2.0
        c = build_coefficients(LevyHomogeneous(T=T, driver=Poisson(lam)), S0)
        z = np.array([0.5, 2.0, 1.5 + 1j])
        ref = lam * (np.expm1(z) - (np.exp(z) - 1) / E1 * E1)
        assert c.eta_rate(z, 0.0) == pytest.approx(ref, abs=1e-13)

    def test_toy_coefficients(self):
        m = TimeChangedBrownian.linear(T)
        c = build_coefficients(m, S0)
        z = np.array([2.0, 0.5 + 3j])
        assert c.gamma(z, 0.1) == pytest.approx(z, rel=1e-15)
        assert c.lam(0.1) == 0.5
        assert c.eta_integral(z, 0.05, 0.2) == pytest.approx(
            (m.psi_at(0.2) - m.psi_at(0.05)) * 0.5 * (z * z - z), rel=1e-13)

    def test_gaussian_martingale_has_no_tradeoff(self):
        c = build_coefficients(LevyHomogeneous(T=T, driver=BrownianDrift(0.4, -0.08)), S0)
        assert abs(float(c.lam(0.0))) < 1e-15
        assert abs(mvt_K(c, T)) < 1e-30

    def test_deterministic_model_rejected(self):
        with pytest.raises(DegenerateModel):
            build_coefficients(LevyHomogeneous(T=T, driver=BrownianDrift(0.0, 0.1)), S0)

    def test_nonpositive_spot_rejected(self):
        with pytest.raises(ValueError):
            build_coefficients(MODELS["levy_nig"], 0.0)

    @pytest.mark.parametrize("name", NAMES)
    def test_endpoint_identities(self, name):
        c = COEFFS[name]
        for t in (0.0, 0.1, 0.2):
            assert c.gamma(np.complex128(1.0), t) == 1
            assert c.gamma(np.complex128(0.0), t) == 0
        assert c.eta_integral(np.complex128(1.0), 0.05, T) == 0
        assert c.eta_integral(np.complex128(0.0), 0.05, T) == 0
        assert np.all(c.eta_integral(np.array([0.0, 1.0, 2.0 + 1j]), 0.0, T)[:2] == 0)

    @pytest.mark.parametrize("name", NAMES)
    @given(x=st.floats(-0.4, 1.8), y=st.floats(-20, 20), t=st.floats(0, T))
    def test_gamma_cauchy_schwarz(self, name, x, y, t):
        # |rho(z, 1)|^2 <= rho(conj z, z) rho(1, 1) on densities
        c = COEFFS[name]
        m = MODELS[name]
        z = complex(x, y)
        rzz = _rate(m, t, 2 * x) - 2 * float(np.real(m.rate(np.asarray(t), np.complex128(z))))
        bound = rzz / float(c.drho(np.asarray(t)))
        g = complex(np.ravel(c.gamma(np.complex128(z), t))[0])
        assert abs(g) ** 2 <= bound * (1 + 1e-9) + 1e-12

    @pytest.mark.parametrize("name", NAMES)
    def test_eta_conjugate_symmetry(self, name):
        c = COEFFS[name]
        z = np.array([0.3 + 2j, 1.5 - 7j])
        a = c.eta_integral(np.conj(z), 0.02, T)
        assert a == pytest.approx(np.conj(c.eta_integral(z, 0.02, T)), rel=1e-12)

    @pytest.mark.parametrize("name", ["levy_nig", "levy_poisson", "levy_vg"])
    def test_K_identity_levy(self, name):
        c = COEFFS[name]
        assert c.K_integral(T) == pytest.approx(mvt_K(c, T), rel=1e-10, abs=1e-16)

    @pytest.mark.parametrize("name", ["wiener", "two_factor", "toy"])
    def test_K_against_scipy(self, name):
        c = COEFFS[name]
        m = MODELS[name]

        def f(s):
            lam = _rate(m, s, 1) / (_rate(m, s, 2) - 2 * _rate(m, s, 1))
            return lam * lam * (_rate(m, s, 2) - 2 * _rate(m, s, 1))

        ref = quad(f, 0, T, points=[0.1], epsabs=0, epsrel=1e-12)[0]
        assert mvt_K(c, T) == pytest.approx(ref, rel=1e-8)

    @pytest.mark.parametrize("name", NAMES)
    def test_K_nondecreasing(self, name):
        c = COEFFS[name]
        vals = [mvt_K(c, t) for t in np.linspace(0, T, 9)]
        assert vals[0] == 0
        assert np.all(np.diff(vals) >= -1e-15)


class TestBeta:
    def test_zero_for_poisson(self):
        c = build_coefficients(LevyHomogeneous(T=T, driver=Poisson(1.7)), S0)
        y = np.array([0.5 + 1j, 2.0])
        z = np.array([1.5 - 2j, 0.3])
        assert np.abs(beta_density(c, y, z, 0.1)).max() < 1e-13

    def test_zero_for_toy(self):
        c = COEFFS["toy"]
        assert abs(beta_density(c, 2.0, 2.0, 0.05)) < 1e-14

    @pytest.mark.parametrize("name", NAMES)
    def test_zero_at_y_zero(self, name):
        c = COEFFS[name]
        assert abs(beta_density(c, 0.0, 1.5 + 2j, 0.1)) < 1e-14

    def test_positive_on_diagonal_for_nig(self):
        c = COEFFS["levy_nig"]
        assert np.real(beta_density(c, 2.0, 2.0, 0.1)) > 0


class TestBlackScholesLimit:
    @pytest.fixture(scope="class")
    @classmethod
    def coeffs(cls):
        return build_coefficients(LevyHomogeneous(T=T, driver=BrownianDrift(0.4, -0.08)), S0)

    def test_price_and_delta(self, coeffs):
        c = call_representation(100.0)
        sd = 0.4 * math.sqrt(T)
        d1 = 0.5 * sd
        ref_price = S0 * (norm.cdf(d1) - norm.cdf(d1 - sd))
        assert initial_capital(coeffs, c) == pytest.approx(ref_price, rel=1e-5)
        assert pure_hedge(coeffs, c, 0.0, S0) == pytest.approx(norm.cdf(d1), rel=1e-5)
        # frozen closed form
        assert ref_price == pytest.approx(7.965567455405, rel=1e-11)

    def test_quadratic_error_vanishes(self, coeffs):
        assert quadratic_error(coeffs, call_representation(100.0)) <= 1e-8 * S0 ** 2

    @given(K=st.floats(60, 160), t=st.floats(0, 0.2))
    def test_against_closed_form(self, coeffs, K, t):
        var = 0.16 * (T - t)
        d1 = (math.log(S0 / K) + 0.5 * var) / math.sqrt(var)
        ref = S0 * norm.cdf(d1) - K * norm.cdf(d1 - math.sqrt(var))
        assert price_process(coeffs, call_representation(K), t, S0) == pytest.approx(ref, abs=1e-6 * K)


class TestAtoms:
    @pytest.mark.parametrize("name", NAMES)
    def test_identity_claim(self, name):
        c = COEFFS[name]
        s = np.array([70.0, 100.0, 130.0])
        m = atom_measure(1.0)
        assert price_process(c, m, 0.1, s) == pytest.approx(s, rel=1e-13)
        assert pure_hedge(c, m, 0.1, s) == pytest.approx(np.ones(3), rel=1e-13)

    def test_toy_square(self):
        m = MODELS["toy"]
        c = COEFFS["toy"]
        t, s = 0.05, 90.0
        dpsi = float(m.psi_at(T) - m.psi_at(t))
        assert price_process(c, atom_measure(2.0), t, s) == pytest.approx(math.exp(dpsi) * s * s, rel=1e-12)
        assert pure_hedge(c, atom_measure(2.0), t, s) == pytest.approx(2 * math.exp(dpsi) * s, rel=1e-12)


class TestPrices:
    # independent oracle: scipy quad of the Levy line formula at R = 1.5, s0 = 100, T = 0.25
    ORACLE = {
        0.08: {50.0: 50.075849308034265, 99.0: 7.1216712163600295, 150.0: 0.4236316937109278},
        1.0: {50.0: 50.00234339630266, 99.0: 8.635607108780354, 150.0: 0.21885095950748124},
        2.0: {50.0: 50.00198123488419, 99.0: 8.649604567138995, 150.0: 0.21297462654348565},
    }
    XI0 = {0.08: 0.7098252448478297, 1.0: 0.5570750644957349, 2.0: 0.5557369624548534}

    @pytest.fixture(scope="class")
    @classmethod
    def engines(cls):
        return {C: build_coefficients(LevyHomogeneous(T=T, driver=reparametrize_moment_matched(CALIBRATED, C)), S0)
                for C in cls.ORACLE}

    @pytest.mark.parametrize("C", [0.08, 1.0, 2.0])
    @pytest.mark.parametrize("K", [50.0, 99.0, 150.0])
    def test_initial_capital(self, engines, C, K):
        got = initial_capital(engines[C], call_representation(K))
        assert got == pytest.approx(self.ORACLE[C][K], abs=1e-7 * K)

    @pytest.mark.parametrize("C", [0.08, 1.0, 2.0])
    def test_initial_hedge(self, engines, C):
        got = pure_hedge(engines[C], call_representation(99.0), 0.0, S0)
        assert got == pytest.approx(self.XI0[C], abs=1e-7)

    def test_put_call_parity(self, engines):
        # H(call) - H(put) = H(s) - K, and the identity claim prices to s
        c = engines[0.08]
        s = np.array([80.0, 100.0, 120.0])
        diff = price_process(c, call_representation(99.0), 0.1, s) - price_process(c, put_representation(99.0), 0.1, s)
        assert diff == pytest.approx(s - 99.0, abs=2e-6 * 99)


class TestInvariants:
    @pytest.mark.parametrize("name", NAMES)
    def test_terminal_consistency(self, name):
        c = COEFFS[name]
        s = np.array([0.5, 0.8, 1.2, 2.0]) * 99.0
        assert price_process(c, call_representation(99.0), T, s) == pytest.approx(
            np.maximum(s - 99.0, 0), abs=1e-6 * 99)

    @pytest.mark.parametrize("name", NAMES)
    @pytest.mark.parametrize("K", [60.0, 99.0, 150.0])
    def test_representation_invariance(self, name, K):
        c = COEFFS[name]
        a, b = call_representation(K), call_representation(K, "R_in_0_1", 0.5)
        s = np.array([80.0, 100.0, 125.0])
        assert price_process(c, a, 0.05, s) == pytest.approx(price_process(c, b, 0.05, s), abs=2e-6 * K)
        assert pure_hedge(c, a, 0.05, s) == pytest.approx(pure_hedge(c, b, 0.05, s), abs=2e-6)

    @pytest.mark.parametrize("name", NAMES)
    def test_real_valued(self, name):
        c = COEFFS[name]
        assert isinstance(initial_capital(c, call_representation(99.0)), float)

    @pytest.mark.parametrize("model", [LevyHomogeneous(T=T, driver=BrownianDrift(0.4, -0.08)),
                                       TimeChangedBrownian.linear(T)], ids=["gaussian", "toy"])
    def test_martingale_delta_is_price_slope(self, model):
        # continuous martingales have gamma(z) = z, so the hedge is the slope of the price
        c = build_coefficients(model, S0)
        m = call_representation(99.0)
        for s in (85.0, 100.0, 120.0):
            h = 1e-3 * s
            fd = (price_process(c, m, 0.05, s + h) - price_process(c, m, 0.05, s - h)) / (2 * h)
            assert pure_hedge(c, m, 0.05, s) == pytest.approx(fd, rel=1e-4)

    def test_jump_martingale_hedge_is_not_the_slope(self):
        # with jumps the pure hedge is the regression coefficient d<H, S> / d<S>
        c = build_coefficients(LevyHomogeneous(T=T, driver=_martingale_nig()), S0)
        assert abs(float(c.lam(0.0))) < 1e-12
        m = call_representation(99.0)
        s, h = 120.0, 0.12
        fd = (price_process(c, m, 0.05, s + h) - price_process(c, m, 0.05, s - h)) / (2 * h)
        assert abs(pure_hedge(c, m, 0.05, s) - fd) > 1e-3

    def test_price_out_of_window_time(self):
        with pytest.raises(ValueError):
            price_process(COEFFS["levy_nig"], call_representation(99.0), T + 0.1, S0)

    def test_payoff_outside_strip(self):
        c = build_coefficients(LevyHomogeneous(T=T, driver=NIG(3.0, -0.5, 1.0)), S0)
        with pytest.raises(DomainViolation):
            initial_capital(c, call_representation(99.0, "R_gt_1", 2.8))


class TestQuadraticError:
    @pytest.mark.parametrize("name", ["levy_poisson", "toy"])
    def test_complete_markets(self, name):
        assert quadratic_error(COEFFS[name], call_representation(99.0)) <= 1e-8 * S0 ** 2

    @pytest.mark.parametrize("name", ["levy_nig", "two_factor"])
    def test_power_claim_against_bracket_oracle(self, name):
        m = MODELS[name]
        ref = _power_two_oracle(m, S0)
        assert quadratic_error(COEFFS[name], atom_measure(2.0)) == pytest.approx(ref, rel=1e-5)

    def test_power_claim_frozen(self):
        # bracket-oracle value for the calibrated Levy model, frozen
        assert _power_two_oracle(MODELS["levy_nig"], S0) == pytest.approx(10445.96951733894, rel=1e-10)

    def test_calibrated_call_positive(self):
        j0 = quadratic_error(COEFFS["levy_nig"], call_representation(99.0))
        assert j0 > 0
        # the two call representations agree on the double integral as well
        j1 = quadratic_error(COEFFS["levy_nig"], call_representation(99.0, "R_in_0_1", 0.5))
        assert j0 == pytest.approx(j1, rel=5e-3)

    def test_identity_claim_is_perfectly_hedged(self):
        assert quadratic_error(COEFFS["levy_nig"], atom_measure(1.0)) <= 1e-10 * S0 ** 2


class TestSurface:
    @pytest.mark.parametrize("name", ["levy_nig", "two_factor", "toy"])
    def test_matches_direct_evaluation(self, name):
        c = COEFFS[name]
        m = call_representation(99.0)
        x, H, XI = surface(c, m, 0.1, math.log(60.0), math.log(160.0))
        pick = np.linspace(0, x.size - 1, 7).astype(int)
        s = np.exp(x[pick])
        assert H[pick] == pytest.approx(price_process(c, m, 0.1, s), abs=1e-7 * 99)
        assert XI[pick] == pytest.approx(pure_hedge(c, m, 0.1, s), abs=1e-7)

    def test_multi_date(self):
        c = COEFFS["levy_nig"]
        m = call_representation(99.0, "R_in_0_1", 0.5)
        dates = [0.05, 0.1, 0.2]
        sb = SurfaceBuilder(c, m, dates)
        for i, t in enumerate(dates):
            x, H, _ = sb.at(i, math.log(80.0), math.log(120.0))
            j = x.size // 2
            assert H[j] == pytest.approx(price_process(c, m, t, math.exp(x[j])), abs=1e-7 * 99)

    def test_rejects_maturity(self):
        with pytest.raises(ValueError):
            SurfaceBuilder(COEFFS["levy_nig"], call_representation(99.0), [0.1, T])


def test_two_factor_electricity_prices_are_finite(electricity_c008):
    c = build_coefficients(electricity_c008, S0)
    v = initial_capital(c, call_representation(99.0, "R_in_0_1", 0.5))
    assert 0 < v < S0
    assert isinstance(c.model, TwoFactor)
