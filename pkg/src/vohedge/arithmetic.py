"""Variance-optimal hedging when the traded quantity is the PII ``X`` itself.

With ``Psi_t(u) = kappa_t(iu)`` and the Fourier representation
``f(x) = int e^{iux} mu(du)``:

* ``D(u, t) = i d(Psi_t'(u) - Psi_t'(0)) / d Psi_t''(0)`` is the hedge density,
* ``eta(u, dt) = -D(u, t) kappa_dt'(0)`` removes the drift,
* ``H(u)_t = exp(eta(u, T) - eta(u, t) + Psi_T(u) - Psi_t(u)) e^{iuX_t}``,
* ``alpha_t = kappa_dt'(0) / kappa_dt''(0)`` drives the strategy feedback.

Every ratio of differentials is computed from the time-rates of the cumulant
derivatives at ``z = iu`` and ``z = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateModel
from .payoff import DEFAULT_QUAD, FourierMeasure, QuadSettings, integrate_fourier, _real_checked
from .pii import LevyHomogeneous, PiiCumulant
from .quadrature import gl_integrate

ZERO = np.complex128(0.0)


@dataclass
class ArithmeticCoefficients:
    model: PiiCumulant
    eta_panels: int = 2

    def _r(self, t, z, order):
        return self.model.rate(np.asarray(t, dtype=float), np.asarray(z, dtype=complex), order)

    def _r2_0(self, t):
        r2 = np.real(self._r(t, ZERO, 2))
        if np.any(r2 <= 0):
            raise DegenerateModel("the variance rate of X vanishes")
        return r2

    def xi_density(self, u, t):
        """``D(u, t)``."""
        iu = 1j * np.asarray(u, dtype=float)
        return (self._r(t, iu, 1) - self._r(t, ZERO, 1)) / self._r2_0(t)

    def alpha(self, t):
        """``alpha_t = i d Psi_t'(0) / d Psi_t''(0)``, real."""
        return np.real(self._r(t, ZERO, 1)) / self._r2_0(t)

    def eta_rate(self, u, t):
        return -self.xi_density(u, t) * np.real(self._r(t, ZERO, 1))

    def eta_arith(self, u, t1: float, t2: float = None):
        """``eta(u, t2) - eta(u, t1)``; with a single time argument, ``eta(u, t1)``."""
        if t2 is None:
            t1, t2 = 0.0, t1
        u = np.asarray(u, dtype=float)
        m = self.model
        if isinstance(m, LevyHomogeneous):
            return (t2 - t1) * self.eta_rate(u, 0.0)
        uu = u[None, ...]
        n = max(1, int(math.ceil(self.eta_panels * (t2 - t1) / m.T)))
        return gl_integrate(lambda s: self.eta_rate(uu, s.reshape((-1,) + (1,) * u.ndim)),
                            t1, t2, n, m.breakpoints)

    def log_char_increment(self, u, t1: float, t2: float):
        """``Psi_{t2}(u) - Psi_{t1}(u)``."""
        return self.model.integrate_rate(t1, t2, 1j * np.asarray(u, dtype=float))

    def H_factor(self, u, t: float):
        """``H(u)_t e^{-iuX_t}``."""
        T = self.model.T
        return np.exp(self.eta_arith(u, t, T) + self.log_char_increment(u, t, T))


def build_arith(model: PiiCumulant, n_probe: int = 64) -> ArithmeticCoefficients:
    """Build the arithmetic coefficients after probing the variance rate."""
    probe = np.linspace(0.0, model.T, n_probe)
    r2 = np.real(model.rate(probe, ZERO, 2))
    if not np.all(r2 > 0):
        raise DegenerateModel("d Psi''(0) has zero density on the probe grid")
    return ArithmeticCoefficients(model)


def _integrate(fourier: FourierMeasure, integrand, quad, real: bool):
    val = integrate_fourier(fourier, integrand, quad)
    if real:
        return _real_checked(val, "arithmetic engine")
    return np.asarray(val)


def arith_price_process(coeffs: ArithmeticCoefficients, fourier: FourierMeasure, t: float, x,
                        quad: QuadSettings = DEFAULT_QUAD, real: bool = True):
    """``H_t = int H(u)_t mu(du)`` at log-level(s) ``x``."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))

    def integrand(u):
        return coeffs.H_factor(u, t)[:, None] * np.exp(1j * np.multiply.outer(u, xs))

    out = _integrate(fourier, integrand, quad, real)
    return out if np.ndim(x) else out[0]


def arith_pure_hedge(coeffs: ArithmeticCoefficients, fourier: FourierMeasure, t: float, x,
                     quad: QuadSettings = DEFAULT_QUAD, real: bool = True):
    """``xi_t = int D(u, t) H(u)_t mu(du)``."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))

    def integrand(u):
        f = coeffs.xi_density(u, t) * coeffs.H_factor(u, t)
        return f[:, None] * np.exp(1j * np.multiply.outer(u, xs))

    out = _integrate(fourier, integrand, quad, real)
    return out if np.ndim(x) else out[0]


def arith_strategy_step(coeffs: ArithmeticCoefficients, t: float, xi, H, V0: float, G):
    """``phi_t = xi_t + alpha_t (H_{t-} - V0 - G_{t-})``; no ``1/S`` factor in this engine."""
    return xi + float(coeffs.alpha(t)) * (H - V0 - G)


def sup_re_eta(coeffs: ArithmeticCoefficients, u_grid) -> float:
    """Probe of ``sup_u Re eta(u, T)`` over a frequency grid."""
    return float(np.max(np.real(coeffs.eta_arith(np.asarray(u_grid, dtype=float), coeffs.model.T))))


def arith_surface(coeffs: ArithmeticCoefficients, fourier: FourierMeasure, t: float,
                  x_lo: float, x_hi: float, h: float = 0.05, log2_nodes: int = 14,
                  decay_tol: float = 1e-13):
    """``(x, H, xi)`` on a uniform log-level grid via FFT, for backtests at ``t < T``."""
    xc = 0.5 * (x_lo + x_hi)

    def magnitude(u):
        return np.abs(coeffs.H_factor(u, t) * fourier.density(u))

    # the decay test only needs the last nodes and a coarse estimate of the peak
    peak = magnitude(h * np.arange(0, 2 ** log2_nodes, 2 ** (log2_nodes - 8))).max()
    for M in [2 ** k for k in range(log2_nodes, 20)]:
        if magnitude(h * np.arange(M - 8, M)).max() <= decay_tol * peak:
            break
    else:
        raise DegenerateModel("Fourier integrand does not decay enough for the FFT surface")
    u = h * np.arange(M)
    dx = 2.0 * math.pi / (M * h)
    x = xc + dx * (np.arange(M) - M // 2)
    if (x_hi - x_lo) > 0.9 * M * dx:
        raise ValueError("window too wide for the FFT grid")
    F = coeffs.H_factor(u, t) * fourier.density(u)
    G = F * coeffs.xi_density(u, t)
    tw = np.full(M, h)
    tw[0] = 0.5 * h
    phase = np.exp(1j * u * x[0])
    H = 2.0 * np.real(M * np.fft.ifft(tw * F * phase))
    XI = 2.0 * np.real(M * np.fft.ifft(tw * G * phase))
    for u0, w0 in fourier.atoms:
        hf = coeffs.H_factor(np.array([u0]), t)[0]
        H = H + np.real(w0 * hf * np.exp(1j * u0 * x))
        XI = XI + np.real(w0 * coeffs.xi_density(np.array([u0]), t)[0] * hf * np.exp(1j * u0 * x))
    keep = (x >= x_lo - 4 * dx) & (x <= x_hi + 4 * dx)
    return x[keep], H[keep], XI[keep]
