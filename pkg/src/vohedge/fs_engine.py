"""Variance-optimal hedging for exponential PII underlyings ``S = s0 exp(X)``.

For a payoff ``f(s) = int s^z Pi(dz)`` the engine provides

* ``gamma(z, t) = d rho_t(z, 1) / d rho_t`` and ``eta(z, dt) = kappa_dt(z) - gamma(z, t) kappa_dt(1)``;
* the mean-variance tradeoff ``K_t = int (d kappa_u(1) / d rho_u)^2 d rho_u``;
* the price ``H_t = int exp(int_t^T eta(z, ds)) S_t^z Pi(dz)`` and pure hedge
  ``xi_t = int gamma(z, t) exp(int_t^T eta(z, ds)) S_t^(z-1) Pi(dz)``;
* the variance of the optimal hedging error ``J0``.

All densities are ratios of cumulant time-rates supplied by :mod:`vohedge.pii`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cumulants import DOMAIN_MARGIN
from .errors import DegenerateModel, DomainViolation, QuadratureFailure
from .payoff import DEFAULT_QUAD, PayoffMeasure, QuadSettings, integrate_contour
from .pii import (LevyHomogeneous, PiiCumulant, TimeChangedBrownian, rho_rate, validate_model)
from .quadrature import cumulative_simpson, gl_integrate, simpson_weights

ONE = np.complex128(1.0)
TWO = np.complex128(2.0)


def _pin_endpoints(z, val, at_zero, at_one):
    """Force exact values at ``z = 0`` and ``z = 1`` where identities hold by construction."""
    z = np.asarray(z)
    if np.ndim(val) == 0:
        if z == 0:
            return np.asarray(at_zero, dtype=complex)
        if z == 1:
            return np.asarray(at_one, dtype=complex)
        return val
    val = np.array(val, dtype=complex)
    zb = np.broadcast_to(z, val.shape)
    val[zb == 0] = at_zero
    val[zb == 1] = at_one
    return val


@dataclass
class FsCoefficients:
    """The triple ``(gamma, eta, lambda)`` and ``K`` for one model and spot."""

    model: PiiCumulant
    s0: float
    eta_panels: int = 2
    _levy: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        m = self.model
        if isinstance(m, LevyHomogeneous):
            d = m.driver
            k1 = float(np.real(d.kappa(1.0)))
            drho = float(np.real(d.kappa(2.0))) - 2.0 * k1
            if not drho > 0:
                raise DegenerateModel("kappa(2) - 2 kappa(1) must be positive")
            self._levy = {"k1": k1, "drho": drho}

    # -- densities ----------------------------------------------------------
    def drho(self, t):
        if self._levy:
            return np.full(np.shape(t), self._levy["drho"])
        if isinstance(self.model, TimeChangedBrownian):
            return self.model._tab.slope(t)
        r = rho_rate(self.model, t)
        if np.any(r <= 0):
            raise DegenerateModel("d rho/dt vanishes")
        return r

    def gamma(self, z, t):
        """``gamma(z, t)``; ``z`` and ``t`` broadcast."""
        z = np.asarray(z, dtype=complex)
        if isinstance(self.model, TimeChangedBrownian):
            return np.broadcast_to(z, np.broadcast_shapes(z.shape, np.shape(t))).copy()
        m = self.model
        if self._levy:
            d = m.driver
            val = (d.kappa(z + 1.0, check=False) - d.kappa(z, check=False) - self._levy["k1"]) \
                / self._levy["drho"]
            val = np.broadcast_to(val, np.broadcast_shapes(z.shape, np.shape(t)))
        else:
            t = np.asarray(t, dtype=float)
            val = (m.rate(t, z + 1.0) - m.rate(t, z) - m.rate(t, ONE)) / self.drho(t)
        return _pin_endpoints(z, val, 0.0, 1.0)

    def eta_rate(self, z, t):
        """Lebesgue density in time of ``eta(z, .)``."""
        z = np.asarray(z, dtype=complex)
        m = self.model
        if isinstance(m, TimeChangedBrownian):
            val = m._tab.slope(t) * 0.5 * (z * z - z)
        elif self._levy:
            d = m.driver
            g = self.gamma(z, 0.0)
            val = d.kappa(z, check=False) - g * self._levy["k1"]
            val = np.broadcast_to(val, np.broadcast_shapes(z.shape, np.shape(t)))
        else:
            t = np.asarray(t, dtype=float)
            val = m.rate(t, z) - self.gamma(z, t) * np.real(m.rate(t, ONE))
        return _pin_endpoints(z, val, 0.0, 0.0)

    def eta_integral(self, z, t1: float, t2: float):
        """``int_{t1}^{t2} eta(z, ds)``."""
        z = np.asarray(z, dtype=complex)
        m = self.model
        if isinstance(m, TimeChangedBrownian):
            val = (m.psi_at(t2) - m.psi_at(t1)) * 0.5 * (z * z - z)
        elif self._levy:
            val = (t2 - t1) * self.eta_rate(z, 0.0)
        else:
            zz = z[None, ...]
            n = max(1, int(math.ceil(self.eta_panels * (t2 - t1) / m.T)))
            val = gl_integrate(lambda s: self.eta_rate(zz, s.reshape((-1,) + (1,) * z.ndim)),
                               t1, t2, n, m.breakpoints)
        return _pin_endpoints(z, val, 0.0, 0.0)

    def lam(self, t):
        """``lambda_t = d kappa_t(1) / d rho_t``."""
        m = self.model
        if isinstance(m, TimeChangedBrownian):
            return np.full(np.shape(t), 0.5)
        if self._levy:
            return np.full(np.shape(t), self._levy["k1"] / self._levy["drho"])
        t = np.asarray(t, dtype=float)
        return np.real(m.rate(t, ONE)) / self.drho(t)

    def K(self, t):
        """Mean-variance tradeoff ``K_t``."""
        m = self.model
        if isinstance(m, TimeChangedBrownian):
            return 0.25 * m.psi_at(t)
        if self._levy:
            return self._levy["k1"] ** 2 / self._levy["drho"] * np.asarray(t, dtype=float)
        return self.K_integral(t)

    def K_integral(self, t):
        """``K_t`` by quadrature of ``lambda^2 d rho``, valid for every kind."""
        m = self.model
        n = max(1, int(math.ceil(m.grid * float(t) / m.T)))

        def f(s):
            if isinstance(m, TimeChangedBrownian):
                return 0.25 * m._tab.slope(s)
            lam = self._lam_generic(s)
            return lam * lam * self._drho_generic(s)

        return float(gl_integrate(f, 0.0, float(t), n, m.breakpoints))

    def _drho_generic(self, s):
        return rho_rate(self.model, s)

    def _lam_generic(self, s):
        return np.real(self.model.rate(np.asarray(s, dtype=float), ONE)) / self._drho_generic(s)


def build_coefficients(model: PiiCumulant, s0: float, check: bool = True) -> FsCoefficients:
    """Build the coefficient functions after validating the model."""
    if not s0 > 0:
        raise ValueError("s0 must be positive")
    if check:
        rep = validate_model(model)
        if not rep.ok:
            reason = "; ".join(rep.reasons)
            if "outside" in reason:
                raise DomainViolation(reason)
            raise DegenerateModel(reason)
    return FsCoefficients(model, float(s0))


def mvt_K(coeffs: FsCoefficients, t: float) -> float:
    return float(coeffs.K(t))


def beta_density(coeffs: FsCoefficients, y, z, t):
    """Time density of ``beta(y, z, .)``: ``drho_t(y, z) - gamma(z, t) drho_t(y, 1)``."""
    m = coeffs.model
    y = np.asarray(y, dtype=complex)
    z = np.asarray(z, dtype=complex)
    t = np.asarray(t, dtype=float)
    ryz = m.rate(t, y + z) - m.rate(t, y) - m.rate(t, z)
    ry1 = m.rate(t, y + 1.0) - m.rate(t, y) - m.rate(t, ONE)
    return ryz - coeffs.gamma(z, t) * ry1


def check_payoff_domain(coeffs: FsCoefficients, measure: PayoffMeasure) -> None:
    lo, hi = measure.hyp_interval()
    strip = coeffs.model.strip
    if not (strip.contains(lo, DOMAIN_MARGIN) and strip.contains(hi, DOMAIN_MARGIN)):
        raise DomainViolation(
            f"payoff interval [{lo}, {hi}] leaves the model strip ({strip.lower}, {strip.upper})")


def _check_time(coeffs, t):
    if not -1e-14 <= t <= coeffs.model.T * (1 + 1e-12):
        raise ValueError(f"t={t} outside [0, T]")


def _real(val, what):
    val = np.asarray(val)
    if np.any(np.abs(np.imag(val)) > 1e-8 * (1.0 + np.abs(np.real(val)))):
        raise QuadratureFailure(f"{what}: imaginary residue {np.max(np.abs(np.imag(val))):.3e}")
    out = np.real(val)
    return float(out) if out.ndim == 0 else out


def price_process(coeffs: FsCoefficients, measure: PayoffMeasure, t: float, s,
                  quad: QuadSettings = DEFAULT_QUAD):
    """``H_t`` at spot(s) ``s``."""
    _check_time(coeffs, t)
    check_payoff_domain(coeffs, measure)
    T = coeffs.model.T
    logs = np.log(np.atleast_1d(np.asarray(s, dtype=float)))

    def integrand(z):
        e = coeffs.eta_integral(z, t, T)
        return np.exp(e[:, None] + np.multiply.outer(z, logs))

    out = _real(integrate_contour(measure, integrand, quad), "price")
    return out if np.ndim(s) else float(out[0])


def pure_hedge(coeffs: FsCoefficients, measure: PayoffMeasure, t: float, s_pre,
               quad: QuadSettings = DEFAULT_QUAD):
    """``xi_t`` at left-limit spot(s) ``s_pre``."""
    _check_time(coeffs, t)
    check_payoff_domain(coeffs, measure)
    T = coeffs.model.T
    logs = np.log(np.atleast_1d(np.asarray(s_pre, dtype=float)))

    def integrand(z):
        e = coeffs.eta_integral(z, t, T)
        g = coeffs.gamma(z, t)
        return (g * np.exp(e))[:, None] * np.exp(np.multiply.outer(z - 1.0, logs))

    out = _real(integrate_contour(measure, integrand, quad), "hedge")
    return out if np.ndim(s_pre) else float(out[0])


def initial_capital(coeffs: FsCoefficients, measure: PayoffMeasure,
                    quad: QuadSettings = DEFAULT_QUAD) -> float:
    """Variance-optimal initial capital ``V0 = H_0(s0)``."""
    return price_process(coeffs, measure, 0.0, coeffs.s0, quad)


# ---------------------------------------------------------------------------
# quadratic error
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorGrid:
    """Uniform line grid used by the double contour integral: step ``h``, half-width ``U``."""

    h: float = 0.1
    U: float = 60.0
    n_time: int = 32


@dataclass
class _Nodes:
    R: float
    k: np.ndarray  # integer offsets on the line (None for an atom)
    h: float
    z: np.ndarray
    w: np.ndarray  # quadrature weight times the measure density, dz = i du included


def _node_sets(measure: PayoffMeasure, grid: ErrorGrid, half: bool):
    """Nodes of every contour (``u >= 0`` only when ``half``) and of every atom."""
    out = []
    n = int(round(grid.U / grid.h))
    n += n % 2
    h = grid.U / n
    for c in measure.contours:
        if half:
            k = np.arange(0, n + 1)
            w = simpson_weights(n, h)
        else:
            k = np.arange(-n, n + 1)
            w = simpson_weights(2 * n, h)
        z = c.R + 1j * h * k
        out.append(_Nodes(c.R, k, h, z, w * c.kernel(z) * c.weight * 1j))
    for z0, w0 in measure.atoms:
        # with the outer 2 Re, an atom of the half-set must enter with half its mass
        out.append(_Nodes(z0.real, None, None, np.array([z0]),
                          np.array([0.5 * w0 if half else w0])))
    return out


def _pair_sums(ys: _Nodes, zs: _Nodes):
    """``(w1d, idx)`` with ``y[:, None] + z[None, :] == w1d[idx]``, exploiting shared lines."""
    if ys.k is not None and zs.k is not None and ys.h == zs.h:
        m = ys.k[:, None] + zs.k[None, :]
        lo, hi = int(m.min()), int(m.max())
        w1d = (ys.R + zs.R) + 1j * ys.h * np.arange(lo, hi + 1)
        return w1d, m - lo
    W = ys.z[:, None] + zs.z[None, :]
    return W.ravel(), np.arange(W.size).reshape(W.shape)


def _row_chunks(ny: int, nz: int, budget: int = 2_000_000):
    step = max(1, budget // max(nz, 1))
    for a in range(0, ny, step):
        yield slice(a, min(ny, a + step))


def _error_levy(coeffs: FsCoefficients, measure: PayoffMeasure, grid: ErrorGrid):
    """Closed-form time integral ``b (e^{kappa(y+z) T} - e^{a T}) / (kappa(y+z) - a)``."""
    d = coeffs.model.driver
    T = coeffs.model.T
    k1 = coeffs._levy["k1"]
    drho = coeffs._levy["drho"]
    K1 = k1 * k1 / drho
    ls0 = math.log(coeffs.s0)

    def node_data(nd: _Nodes):
        kz = d.kappa(nd.z, check=False)
        r1 = d.kappa(nd.z + 1.0, check=False) - kz - k1
        g = _pin_endpoints(nd.z, r1 / drho, 0.0, 1.0)
        eta = _pin_endpoints(nd.z, kz - g * k1, 0.0, 0.0)
        return kz, r1, g, eta, np.exp(eta * T), np.exp(nd.z * ls0)

    total = 0.0 + 0.0j
    for zs in _node_sets(measure, grid, half=True):
        kz, _, gz, ez, Ez, sz = node_data(zs)
        for ys in _node_sets(measure, grid, half=False):
            ky, ry1, _, ey, Ey, sy = node_data(ys)
            w1d, idx = _pair_sums(ys, zs)
            kw = d.kappa(w1d, check=False)
            ekw = np.exp(kw * T)
            vy = np.zeros(zs.z.size, dtype=complex)
            for sl in _row_chunks(ys.z.size, zs.z.size):
                I = idx[sl]
                b = kw[I] - ky[sl, None] - kz[None, :] - gz[None, :] * ry1[sl, None]
                a = ey[sl, None] + ez[None, :] - K1
                diff = kw[I] - a
                eaT = Ey[sl, None] * Ez[None, :] * math.exp(-K1 * T)
                small = np.abs(diff * T) < 1e-8
                val = np.where(small, T * eaT, (ekw[I] - eaT) / np.where(small, 1.0, diff))
                J = b * val * sy[sl, None] * sz[None, :]
                vy += ys.w[sl] @ J
            total += vy @ zs.w
    return total


def _error_generic(coeffs: FsCoefficients, measure: PayoffMeasure, grid: ErrorGrid):
    """Uniform time grid (cumulative Simpson) for the inhomogeneous kinds."""
    m = coeffs.model
    T = m.T
    nt = grid.n_time + grid.n_time % 2
    t_fine = np.linspace(0.0, T, 2 * nt + 1)
    ht = T / nt
    tc = t_fine[::2]
    tw = simpson_weights(nt, ht)
    ls0 = math.log(coeffs.s0)
    Kt = np.array([coeffs.K_integral(t) for t in tc])
    KT = Kt[-1]

    def rates(z, t):
        return m.rate(np.asarray(t, dtype=float)[:, None], np.asarray(z)[None, :])

    def node_data(nd: _Nodes):
        eta = coeffs.eta_rate(nd.z[None, :], t_fine[:, None])
        c = cumulative_simpson(eta, ht)
        E = c[-1] - c  # int_t^T eta(z, ds) on the coarse grid
        g = coeffs.gamma(nd.z[None, :], tc[:, None])
        r = rates(nd.z, tc)
        r1 = rates(nd.z + 1.0, tc) - r - rates(np.array([ONE]), tc)
        return E, g, r, r1, np.exp(nd.z * ls0)

    total = 0.0 + 0.0j
    for zs in _node_sets(measure, grid, half=True):
        Ez, gz, rz, _, sz = node_data(zs)
        for ys in _node_sets(measure, grid, half=False):
            Ey, _, ry, ry1, sy = node_data(ys)
            w1d, idx = _pair_sums(ys, zs)
            kw = cumulative_simpson(rates(w1d, t_fine), ht)  # kappa_t(w) on the coarse grid
            rw = rates(w1d, tc)
            eE = np.exp(Ez)
            eEy = np.exp(Ey)
            vy = np.zeros(zs.z.size, dtype=complex)
            for sl in _row_chunks(ys.z.size, zs.z.size, 1_000_000):
                I = idx[sl]
                acc = np.zeros(I.shape, dtype=complex)
                for j in range(tc.size):
                    if tw[j] == 0.0:
                        continue
                    bdot = rw[j][I] - ry[j][sl, None] - rz[j][None, :] - gz[j][None, :] * ry1[j][sl, None]
                    ex = np.exp(kw[j])[I] * eEy[j][sl, None] * eE[j][None, :] * math.exp(-(KT - Kt[j]))
                    acc += tw[j] * bdot * ex
                vy += ys.w[sl] @ (acc * sy[sl, None] * sz[None, :])
            total += vy @ zs.w
    return total


def quadratic_error(coeffs: FsCoefficients, measure: PayoffMeasure, grid: ErrorGrid = None,
                    rtol: float = 1e-3, max_doublings: int = 6) -> float:
    """Variance ``J0`` of the variance-optimal hedging error.

    The double line integral is evaluated on uniform grids, with conjugate
    symmetry in the outer variable.  The step is first validated by halving on
    the initial window; the half-width is then doubled and the sequence is
    accelerated with Aitken's delta-squared until it settles within ``rtol``.
    """
    check_payoff_domain(coeffs, measure)
    levy = bool(coeffs._levy)
    grid = grid or (ErrorGrid(h=0.2, U=30.0) if levy else ErrorGrid(h=0.2, U=20.0, n_time=32))
    fn = _error_levy if levy else _error_generic
    scale = coeffs.s0 ** 2

    def ev(g):
        return 2.0 * float(np.real(fn(coeffs, measure, g)))

    def close(a, b):
        return abs(a - b) <= rtol * abs(b) + 1e-10 * scale

    g = grid
    base = ev(g)
    for _ in range(4):
        finer = ev(ErrorGrid(g.h / 2, g.U, 2 * g.n_time))
        if close(base, finer):
            break
        g = ErrorGrid(g.h / 2, g.U, 2 * g.n_time)
        base = finer
    else:
        raise QuadratureFailure("quadratic error did not converge under step refinement")
    seq = [base]
    acc = []
    for _ in range(max_doublings):
        g = ErrorGrid(g.h, 2 * g.U, g.n_time)
        seq.append(ev(g))
        if close(seq[-2], seq[-1]):
            return _clamp(seq[-1], scale)
        if len(seq) >= 3:
            d1 = seq[-1] - seq[-2]
            d0 = seq[-2] - seq[-3]
            est = seq[-1] - d1 * d1 / (d1 - d0) if d1 != d0 else seq[-1]
            acc.append(est)
            if len(acc) >= 2 and close(acc[-2], acc[-1]):
                return _clamp(acc[-1], scale)
    raise QuadratureFailure(f"quadratic error did not converge (last {seq[-1]})")


def _clamp(val: float, scale: float) -> float:
    if val < 0:
        if val < -1e-10 * scale:
            raise QuadratureFailure(f"negative quadratic error {val}")
        return 0.0
    return float(val)


# ---------------------------------------------------------------------------
# price and hedge surfaces for backtests
# ---------------------------------------------------------------------------

class SurfaceBuilder:
    """Price and hedge on log-spot grids at a fixed set of dates, by FFT along each contour.

    Each line integral is discretised by the trapezoidal rule with step ``h``
    over ``M`` nodes, with ``M`` the smallest power of two for which the
    integrand at the latest date has decayed below ``decay_tol`` of its peak.
    ``int_t^T eta(z, ds)`` is accumulated backwards over consecutive dates so
    each time slice is integrated once.
    """

    def __init__(self, coeffs: FsCoefficients, measure: PayoffMeasure, dates, h: float = 0.1,
                 decay_tol: float = 1e-13, log2_min: int = 14, log2_max: int = 19):
        check_payoff_domain(coeffs, measure)
        self.coeffs = coeffs
        self.measure = measure
        self.dates = np.asarray(dates, dtype=float)
        T = coeffs.model.T
        if np.any(self.dates >= T):
            raise ValueError("surfaces are built strictly before maturity")
        self.h = h
        last = float(self.dates.max())
        for k in range(log2_min, log2_max + 1):
            M = 2 ** k
            u = h * np.arange(M)
            ok = True
            for c in measure.contours:
                z = c.R + 1j * u
                mag = np.abs(c.kernel(z) * np.exp(coeffs.eta_integral(z, last, T)))
                if mag[-8:].max() > decay_tol * mag.max():
                    ok = False
                    break
            if ok:
                break
        else:
            raise QuadratureFailure("contour integrand does not decay enough for the FFT surface")
        self.M = M
        self.u = u
        # E[c][i] = int_{dates[i]}^T eta(z_c, ds) on the nodes of contour c
        order = np.argsort(self.dates)
        self.E = []
        for c in measure.contours:
            z = c.R + 1j * u
            E = np.zeros((self.dates.size, M), dtype=complex)
            acc = np.zeros(M, dtype=complex)
            upper = T
            for i in order[::-1]:
                t = self.dates[i]
                acc = acc + coeffs.eta_integral(z, t, upper)
                E[i] = acc
                upper = t
            self.E.append(E)

    def at(self, i: int, x_lo: float, x_hi: float):
        """``(x, H, xi)`` at date index ``i`` on a grid covering ``[x_lo, x_hi]``."""
        t = float(self.dates[i])
        M, h, u = self.M, self.h, self.u
        dx = 2.0 * math.pi / (M * h)
        if (x_hi - x_lo) > 0.9 * M * dx:
            raise ValueError("log-spot window too wide for the FFT grid")
        xc = 0.5 * (x_lo + x_hi)
        x = xc + dx * (np.arange(M) - M // 2)
        H = np.zeros(M)
        XI = np.zeros(M)
        tw = np.full(M, h)
        tw[0] = 0.5 * h
        phase = np.exp(1j * u * x[0])
        for c, E in zip(self.measure.contours, self.E):
            z = c.R + 1j * u
            F = c.kernel(z) * np.exp(E[i])
            G = F * self.coeffs.gamma(z, t)
            # sum_j a_j e^{i u_j x_k} with x_k = x_0 + k dx equals M * ifft(a)_k
            sH = M * np.fft.ifft(tw * F * phase)
            sX = M * np.fft.ifft(tw * G * phase)
            pref = (1j * c.weight).real
            H += pref * 2.0 * np.real(sH) * np.exp(c.R * x)
            XI += pref * 2.0 * np.real(sX) * np.exp((c.R - 1.0) * x)
        T = self.coeffs.model.T
        for z0, w0 in self.measure.atoms:
            za = np.array([z0])
            e = complex(np.ravel(self.coeffs.eta_integral(za, t, T))[0])
            g = complex(np.ravel(self.coeffs.gamma(za, t))[0])
            H += np.real(w0 * np.exp(e + z0 * x))
            XI += np.real(w0 * g * np.exp(e + (z0 - 1.0) * x))
        keep = (x >= x_lo - 4 * dx) & (x <= x_hi + 4 * dx)
        return x[keep], H[keep], XI[keep]


def surface(coeffs: FsCoefficients, measure: PayoffMeasure, t: float, x_lo: float, x_hi: float,
            **kw):
    """Single-date convenience wrapper around :class:`SurfaceBuilder`."""
    return SurfaceBuilder(coeffs, measure, [t], **kw).at(0, x_lo, x_hi)
