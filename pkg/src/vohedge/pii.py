"""Processes with independent increments described by their cumulant ``kappa_t(z)``.

Every kind implements a time-rate ``rate(s, z, order)``, the derivative in
``s`` of the ``order``-th complex derivative of ``kappa_s`` at ``z``.  Densities
against the reference variance clock ``rho`` are ratios of such rates, so
nothing is ever obtained by differencing ``rho`` itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, ClassVar

import numpy as np

from .cumulants import (DOMAIN_MARGIN, DomainStrip, LevyCumulantModel, NIG, ValidationReport,
                        validate_exponential_assumptions)
from .errors import DegenerateModel, DomainViolation
from .quadrature import gl_integrate


class Table:
    """Piecewise-linear function through ``(times, values)``; constant beyond the ends."""

    def __init__(self, times, values):
        t = np.asarray(times, dtype=float)
        v = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise ValueError("a table needs matching 1-d time and value arrays of length >= 2")
        if np.any(np.diff(t) <= 0):
            raise ValueError("table times must be strictly increasing")
        self.times = t
        self.values = v

    def __call__(self, s):
        return np.interp(s, self.times, self.values)

    def slope(self, s):
        """Right derivative, piecewise constant between breakpoints."""
        s = np.asarray(s, dtype=float)
        slopes = np.diff(self.values) / np.diff(self.times)
        idx = np.clip(np.searchsorted(self.times, s, side="right") - 1, 0, slopes.size - 1)
        out = slopes[idx]
        return out

    @property
    def breakpoints(self):
        return self.times

    @classmethod
    def parse(cls, text: str) -> "Table":
        """Parse ``"t0:v0, t1:v1, ..."``."""
        pairs = [p.strip() for p in text.split(",") if p.strip()]
        ts, vs = zip(*(map(float, p.split(":")) for p in pairs))
        return cls(ts, vs)

    def __repr__(self):
        return f"Table({self.times.tolist()}, {self.values.tolist()})"


def _as_function(f):
    if f is None:
        return None, ()
    if isinstance(f, Table):
        return f, tuple(f.breakpoints)
    if callable(f):
        return f, ()
    return Table(*f), tuple(Table(*f).breakpoints)


@dataclass(frozen=True)
class RhoDensities:
    """Densities of ``kappa_t(1)`` and ``kappa_t(z)`` against ``rho`` at a fixed time."""

    t: float
    dk1_drho: float
    dkz_drho: Callable
    drho_dt: float


@dataclass(frozen=True, eq=False)
class PiiCumulant:
    """Base class; subclasses supply ``rate`` and the effective strip."""

    T: float
    kind: ClassVar[str] = "abstract"

    # ---- to override -------------------------------------------------
    @property
    def strip(self) -> DomainStrip:
        raise NotImplementedError

    def rate(self, s, z, order: int = 0):
        raise NotImplementedError

    @property
    def breakpoints(self) -> tuple:
        return ()

    @property
    def homogeneous(self) -> bool:
        return False

    grid: int = 256

    # ---- generic machinery ---------------------------------------------
    def check_domain(self, z) -> None:
        re = np.real(np.asarray(z))
        if not self.strip.contains(re):
            raise DomainViolation(
                f"{self.kind}: Re(z) outside effective strip ({self.strip.lower}, {self.strip.upper})")

    def check_time(self, t) -> None:
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-14) or np.any(t > self.T * (1 + 1e-12) + 1e-14):
            raise ValueError(f"time outside [0, {self.T}]")

    def integrate_rate(self, t1: float, t2: float, z, order: int = 0, check: bool = True):
        """``int_{t1}^{t2} rate(s, z, order) ds`` by composite Gauss-Legendre."""
        z = np.asarray(z, dtype=complex)
        if check:
            self.check_domain(z)
        n = max(1, int(math.ceil(self.grid * (t2 - t1) / self.T)))
        zz = z[None, ...]

        def f(s):
            return self.rate(s.reshape((-1,) + (1,) * z.ndim), zz, order)

        return gl_integrate(f, t1, t2, n, self.breakpoints, check=True)

    def kappa(self, t, z, order: int = 0, check: bool = True):
        """``d^order/dz^order kappa_t(z)``."""
        self.check_time(t)
        return self.integrate_rate(0.0, float(t), z, order, check)

    def effective_driver_scale(self) -> float:
        return 1.0


@dataclass(frozen=True, eq=False)
class LevyHomogeneous(PiiCumulant):
    """``kappa_t(z) = t kappa(z)`` for a Levy driver."""

    driver: LevyCumulantModel = None
    kind: ClassVar[str] = "levy"

    def __post_init__(self):
        if self.driver is None:
            raise ValueError("a driver is required")

    @property
    def strip(self):
        return self.driver.strip

    @property
    def homogeneous(self):
        return True

    def _deriv(self, z, order, check=True):
        if order == 0:
            return self.driver.kappa(z, check=check)
        return self.driver.derivative(z, order, check=check)

    def rate(self, s, z, order: int = 0):
        val = self._deriv(np.asarray(z, dtype=complex), order, check=False)
        return np.broadcast_to(val, np.broadcast_shapes(np.shape(s), np.shape(val))).copy()

    def kappa(self, t, z, order: int = 0, check: bool = True):
        self.check_time(t)
        return t * self._deriv(np.asarray(z, dtype=complex), order, check=check)

    def integrate_rate(self, t1, t2, z, order: int = 0, check: bool = True):
        return (t2 - t1) * self._deriv(np.asarray(z, dtype=complex), order, check=check)


@dataclass(frozen=True, eq=False)
class WienerIntegral(PiiCumulant):
    """``X_t = int_0^t l_s dL_s``, so ``kappa_t(z) = int_0^t kappa(z l_s) ds``."""

    driver: LevyCumulantModel = None
    kernel: object = None
    kind: ClassVar[str] = "wiener"
    _fn: Callable = field(init=False, repr=False, default=None)
    _bp: tuple = field(init=False, repr=False, default=())
    _lmax: float = field(init=False, repr=False, default=1.0)
    _lmin: float = field(init=False, repr=False, default=1.0)

    def __post_init__(self):
        if self.driver is None or self.kernel is None:
            raise ValueError("driver and kernel are required")
        fn, bp = _as_function(self.kernel)
        probe = np.unique(np.concatenate([np.linspace(0.0, self.T, 4097),
                                          np.clip(np.asarray(bp, float), 0, self.T)]))
        vals = np.asarray(fn(probe), dtype=float) * np.ones_like(probe)
        if not np.all(np.isfinite(vals)):
            raise ValueError("kernel must be finite on [0, T]")
        lmin, lmax = float(vals.min()), float(vals.max())
        if not lmin > 0:
            raise ValueError("kernel must be bounded away from 0")
        object.__setattr__(self, "_fn", fn)
        object.__setattr__(self, "_bp", tuple(bp))
        object.__setattr__(self, "_lmax", lmax)
        object.__setattr__(self, "_lmin", lmin)

    @property
    def breakpoints(self):
        return self._bp

    @property
    def strip(self):
        return self.driver.strip.scaled(self._lmax)

    def kernel_at(self, s):
        s = np.asarray(s, dtype=float)
        return np.asarray(self._fn(s), dtype=float) * np.ones_like(s)

    def rate(self, s, z, order: int = 0):
        ls = self.kernel_at(s)
        arg = z * ls
        if order == 0:
            return self.driver.kappa(arg, check=False)
        return ls ** order * self.driver.derivative(arg, order, check=False)

    def effective_driver_scale(self):
        return self._lmax


@dataclass(frozen=True, eq=False)
class TwoFactor(PiiCumulant):
    """Two-factor forward model with a Levy short-term factor and a Brownian long-term factor.

    ``kappa_t(z) = z m_t + z^2 sigma_l^2 t / 2 + int_0^t kappa(z sigma_s e^{-lambda_mr (T_d - s)}) ds``
    with ``m_t = int_0^t trend(s) ds``.
    """

    driver: LevyCumulantModel = None
    sigma_s: float = 0.0
    lambda_mr: float = 0.0
    sigma_l: float = 0.0
    delivery: float = None
    trend: object = None
    kind: ClassVar[str] = "two_factor"
    _trend_fn: Callable = field(init=False, repr=False, default=None)
    _bp: tuple = field(init=False, repr=False, default=())

    def __post_init__(self):
        if self.driver is None:
            raise ValueError("a driver is required")
        if self.sigma_s < 0 or self.lambda_mr < 0 or self.sigma_l < 0:
            raise ValueError("sigma_s, lambda_mr and sigma_l must be nonnegative")
        if self.delivery is None:
            object.__setattr__(self, "delivery", self.T)
        fn, bp = _as_function(self.trend)
        object.__setattr__(self, "_trend_fn", fn)
        object.__setattr__(self, "_bp", tuple(bp))

    @property
    def breakpoints(self):
        return self._bp

    def ztilde(self, s):
        s = np.asarray(s, dtype=float)
        return self.sigma_s * np.exp(-self.lambda_mr * (self.delivery - s))

    def trend_at(self, s):
        s = np.asarray(s, dtype=float)
        if self._trend_fn is None:
            return np.zeros_like(s)
        return np.asarray(self._trend_fn(s), dtype=float) * np.ones_like(s)

    def _zmax(self) -> float:
        return float(max(self.ztilde(0.0), self.ztilde(self.T)))

    @property
    def strip(self):
        zmax = self._zmax()
        if zmax == 0.0:
            return DomainStrip(-math.inf, math.inf)
        return self.driver.strip.scaled(zmax)

    def rate(self, s, z, order: int = 0):
        zt = self.ztilde(s)
        md = self.trend_at(s)
        sl2 = self.sigma_l ** 2
        if order == 0:
            lev = self.driver.kappa(z * zt, check=False)
            return z * md + 0.5 * sl2 * z * z + lev
        lev = zt ** order * self.driver.derivative(z * zt, order, check=False)
        if order == 1:
            return md + sl2 * z + lev
        if order == 2:
            return sl2 + lev
        return lev

    def effective_driver_scale(self):
        return self._zmax()


@dataclass(frozen=True, eq=False)
class TimeChangedBrownian(PiiCumulant):
    """``kappa_t(z) = z^2 psi(t) / 2`` for an increasing clock ``psi`` with ``psi(0) = 0``."""

    psi: object = None
    kind: ClassVar[str] = "time_changed_brownian"
    _tab: Table = field(init=False, repr=False, default=None)

    def __post_init__(self):
        tab = self.psi if isinstance(self.psi, Table) else Table(*self.psi)
        if abs(tab(0.0)) > 0 or tab.times[0] > 0:
            raise ValueError("psi must start at psi(0) = 0")
        if np.any(np.diff(tab.values) <= 0):
            raise ValueError("psi must be strictly increasing")
        if tab.times[-1] < self.T:
            raise ValueError("psi table must cover [0, T]")
        object.__setattr__(self, "_tab", tab)

    @classmethod
    def linear(cls, T: float, scale: float = 1.0, **kw):
        return cls(T=T, psi=Table([0.0, T], [0.0, scale * T]), **kw)

    def psi_at(self, t):
        return self._tab(t)

    @property
    def breakpoints(self):
        return tuple(self._tab.times)

    @property
    def strip(self):
        return DomainStrip(-math.inf, math.inf)

    @staticmethod
    def _poly(z, order):
        z = np.asarray(z, dtype=complex)
        if order == 0:
            return 0.5 * z * z
        if order == 1:
            return z
        if order == 2:
            return np.ones_like(z)
        return np.zeros_like(z)

    def rate(self, s, z, order: int = 0):
        return self._tab.slope(s) * self._poly(z, order)

    def kappa(self, t, z, order: int = 0, check: bool = True):
        self.check_time(t)
        return self.psi_at(t) * self._poly(z, order)

    def integrate_rate(self, t1, t2, z, order: int = 0, check: bool = True):
        return (self.psi_at(t2) - self.psi_at(t1)) * self._poly(z, order)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def kappa(model: PiiCumulant, t: float, z):
    """``kappa_t(z)``."""
    out = model.kappa(t, z)
    return out[()] if isinstance(out, np.ndarray) and out.ndim == 0 else out


def rho(model: PiiCumulant, t: float) -> float:
    """Reference variance clock ``rho_t = kappa_t(2) - 2 kappa_t(1)``."""
    model.check_domain(2.0)
    k = model.kappa(t, np.array([2.0, 1.0]))
    return float(k[0].real - 2.0 * k[1].real)


def rho_bilinear(model: PiiCumulant, t: float, y, z):
    """``rho_t(y, z) = kappa_t(y + z) - kappa_t(y) - kappa_t(z)``."""
    y = np.asarray(y, dtype=complex)
    z = np.asarray(z, dtype=complex)
    out = model.kappa(t, y + z) - model.kappa(t, y) - model.kappa(t, z)
    return out[()] if out.ndim == 0 else out


def rho_rate(model: PiiCumulant, t) -> np.ndarray:
    """Lebesgue density of ``rho`` at time ``t`` (vectorized in ``t``)."""
    t = np.asarray(t, dtype=float)
    r2 = model.rate(t, np.complex128(2.0))
    r1 = model.rate(t, np.complex128(1.0))
    return np.real(r2) - 2.0 * np.real(r1)


def densities(model: PiiCumulant, t: float) -> RhoDensities:
    """Densities ``d kappa_t(1) / d rho_t`` and ``d kappa_t(z) / d rho_t`` at time ``t``."""
    model.check_time(t)
    model.check_domain(2.0)
    drho = float(rho_rate(model, t))
    if not drho > 0:
        raise DegenerateModel(f"d rho/dt = {drho} <= 0 at t={t}: increments are deterministic")
    dk1 = float(np.real(model.rate(np.float64(t), np.complex128(1.0)))) / drho

    def dkz(z):
        return model.rate(np.float64(t), np.asarray(z, dtype=complex)) / drho

    return RhoDensities(t=float(t), dk1_drho=dk1, dkz_drho=dkz, drho_dt=drho)


def log_char_derivatives(model: PiiCumulant, t: float, u):
    """``(Psi_t(u), Psi_t'(u), Psi_t''(0))`` with ``Psi_t(u) = kappa_t(iu)``."""
    iu = 1j * np.asarray(u, dtype=float)
    psi = model.kappa(t, iu)
    dpsi = 1j * model.kappa(t, iu, order=1)
    d2psi0 = -model.kappa(t, 0.0, order=2)
    return psi, dpsi, complex(d2psi0)


def validate_model(model: PiiCumulant, n_probe: int = 64) -> ValidationReport:
    """Check the assumptions the exponential engine relies on; never raises."""
    rep = ValidationReport()
    strip = model.strip
    rep.details["strip"] = (strip.lower, strip.upper)
    if not strip.contains(2.0, DOMAIN_MARGIN):
        rep.fail(f"2 is outside the effective strip ({strip.lower}, {strip.upper})")
        return rep
    driver = getattr(model, "driver", None)
    if driver is not None and driver.deterministic and not (
            isinstance(model, TwoFactor) and model.sigma_l > 0):
        rep.fail("driver has deterministic increments")
    if isinstance(model, TwoFactor):
        scale = model._zmax()
        if scale > 0:
            sub = validate_exponential_assumptions(model.driver, scale)
            if not sub.ok:
                rep.fail("2 sigma_s condition: " + "; ".join(sub.reasons))
        if scale == 0 and model.sigma_l == 0:
            rep.fail("sigma_s = sigma_l = 0: no randomness")
    if isinstance(model, WienerIntegral):
        if isinstance(driver, NIG) and not 2 * model._lmax < driver.alpha - driver.beta:
            rep.fail("2 sup(kernel) outside the NIG strip")
    probe = np.linspace(0.0, model.T, n_probe)
    try:
        rhos = np.array([rho(model, t) for t in probe])
    except Exception as exc:  # report, never raise
        rep.fail(f"rho evaluation failed: {exc}")
        return rep
    rep.details["rho_T"] = float(rhos[-1])
    if abs(rhos[0]) > 1e-14:
        rep.fail("rho_0 != 0")
    if not np.all(np.diff(rhos) > 0):
        rep.fail("rho is not strictly increasing on the probe grid")
    mids = 0.5 * (probe[1:] + probe[:-1])
    if not np.all(rho_rate(model, mids) > 0):
        rep.fail("rho has a vanishing density on the probe grid")
    return rep


def build_pii(kind: str, T: float, **kw) -> PiiCumulant:
    kinds = {c.kind: c for c in (LevyHomogeneous, WienerIntegral, TwoFactor, TimeChangedBrownian)}
    if kind not in kinds:
        raise ValueError(f"unknown pii kind {kind!r}")
    return kinds[kind](T=T, **kw)
