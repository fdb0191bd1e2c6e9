"""Payoff representations.

Exponential payoffs are written ``f(s) = int s^z Pi(dz)`` for a complex measure
``Pi`` made of atoms and weighted vertical-line contours.  Arithmetic payoffs
are written ``f(x) = int e^{iux} mu(du)`` for a Fourier measure ``mu``.

Fourier convention: ``fhat(u) = int e^{iux} f(x) dx``.  With this convention
the measure in the representation above has density ``fhat(-u) / (2 pi)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidAbscissa, QuadratureFailure
from .quadrature import half_line_integral, richardson


@dataclass(frozen=True)
class QuadSettings:
    """Line-integral settings: initial truncation, initial panel exponent, tolerance."""

    umax: float = 400.0
    log2_panels: int = 13
    tol: float = 1e-7


DEFAULT_QUAD = QuadSettings()


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VanillaKernel:
    """``g(z) = K^{1-z} / (z (z - 1))``, the Mellin kernel shared by calls and puts."""

    K: float

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return np.exp((1.0 - z) * math.log(self.K)) / (z * (z - 1.0))


@dataclass(frozen=True)
class Contour:
    """Contribution ``weight * int_{R - i inf}^{R + i inf} kernel(z) F(z) dz``."""

    R: float
    kernel: Callable
    weight: complex


@dataclass(frozen=True)
class PayoffMeasure:
    """Finite complex measure ``Pi``; ``payoff`` optionally holds the closed form ``f(s)``."""

    atoms: tuple = ()
    contours: tuple = ()
    description: str = ""
    payoff: Optional[Callable] = field(default=None, compare=False)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        atoms = tuple((complex(z), complex(w)) for z, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        for c in self.contours:
            _check_kernel(c.kernel, c.R)

    @property
    def support_real(self) -> tuple:
        """The finite set of real abscissae carrying mass (atoms and contour lines)."""
        pts = {z.real for z, _ in self.atoms} | {c.R for c in self.contours}
        return tuple(sorted(pts))

    def hyp_interval(self) -> tuple:
        """``[min(I0) ^ 2 min(I0), 2 max(I0) v (max(I0) + 1)]``: the abscissae the engine touches."""
        pts = self.support_real
        lo, hi = min(pts), max(pts)
        return min(lo, 2 * lo), max(2 * hi, hi + 1)

    def __add__(self, other: "PayoffMeasure") -> "PayoffMeasure":
        pay = None
        if self.payoff is not None and other.payoff is not None:
            f, g = self.payoff, other.payoff
            pay = lambda s: f(s) + g(s)  # noqa: E731
        return PayoffMeasure(self.atoms + other.atoms, self.contours + other.contours,
                             f"{self.description} + {other.description}", pay)

    def scaled(self, c: complex) -> "PayoffMeasure":
        pay = None
        if self.payoff is not None:
            f = self.payoff
            pay = lambda s: c * f(s)  # noqa: E731
        return PayoffMeasure(tuple((z, c * w) for z, w in self.atoms),
                             tuple(Contour(k.R, k.kernel, c * k.weight) for k in self.contours),
                             f"{c}*({self.description})", pay, dict(self.meta))


def _check_kernel(kernel, R: float) -> None:
    """Decay and conjugate-symmetry probe for a contour kernel."""
    u = np.array([1e3, 2e3, 4e3])
    vals = np.abs(kernel(R + 1j * u))
    if not np.all(np.isfinite(vals)):
        raise ValueError("contour kernel is not finite on the line")
    if vals[0] > 0 and not (vals[1] <= 0.26 * vals[0] and vals[2] <= 0.26 * vals[1]):
        raise ValueError("contour kernel must decay at least like |u|^-2")
    zs = R + 1j * np.array([0.3, 1.7, 25.0])
    if not np.allclose(kernel(np.conj(zs)), np.conj(kernel(zs)), rtol=1e-12, atol=0):
        raise ValueError("contour kernel is not conjugate symmetric")


def atom_measure(z: complex, weight: complex = 1.0) -> PayoffMeasure:
    """Point mass ``weight * delta_z``, the payoff ``weight * s^z``."""
    pay = lambda s: np.real(weight * np.asarray(s, dtype=float) ** z)  # noqa: E731
    return PayoffMeasure(((z, weight),), (), f"{weight}*s^{z}", pay)


def call_representation(K: float, variant: str = "R_gt_1", R: float = 1.5) -> PayoffMeasure:
    """European call ``(s - K)_+``.

    ``R_gt_1`` uses a single line with ``R > 1``; ``R_in_0_1`` uses a line with
    ``0 < R < 1`` (which represents ``(s - K)_+ - s``) plus the atom at ``z = 1``.
    """
    if not K > 0:
        raise ValueError("strike must be positive")
    if variant == "R_gt_1":
        if not R > 1:
            raise InvalidAbscissa(f"R={R} must exceed 1 for this variant")
        atoms = ()
    elif variant == "R_in_0_1":
        if not 0 < R < 1:
            raise InvalidAbscissa(f"R={R} must lie in (0, 1) for this variant")
        atoms = ((1.0, 1.0),)
    else:
        raise ValueError(f"unknown call variant {variant!r}")
    contour = Contour(R, VanillaKernel(K), 1.0 / (2j * math.pi))
    pay = lambda s: np.maximum(np.asarray(s, dtype=float) - K, 0.0)  # noqa: E731
    return PayoffMeasure(atoms, (contour,), f"call K={K} {variant} R={R}", pay,
                         {"kind": "call", "K": K})


def put_representation(K: float, R: float = -0.5) -> PayoffMeasure:
    """European put ``(K - s)_+`` on a single line with ``R < 0``."""
    if not K > 0:
        raise ValueError("strike must be positive")
    if not R < 0:
        raise InvalidAbscissa(f"R={R} must be negative for the put")
    contour = Contour(R, VanillaKernel(K), 1.0 / (2j * math.pi))
    pay = lambda s: np.maximum(K - np.asarray(s, dtype=float), 0.0)  # noqa: E731
    return PayoffMeasure((), (contour,), f"put K={K} R={R}", pay, {"kind": "put", "K": K})


def integrate_contour(measure: PayoffMeasure, integrand: Callable,
                      quad: QuadSettings = DEFAULT_QUAD, symmetric: bool = True):
    """``int F(z) Pi(dz)`` as atoms plus line integrals.

    ``integrand`` maps a 1-d array of ``z`` to an array whose first axis runs
    over ``z``; trailing axes are integrated independently (batch evaluation).
    With ``symmetric`` the integrand is assumed conjugate symmetric and only
    ``u >= 0`` is visited.
    """
    total = 0.0
    for z, w in measure.atoms:
        total = total + w * np.asarray(integrand(np.array([z])))[0]
    for c in measure.contours:
        def line(u, c=c):
            z = c.R + 1j * u
            vals = np.asarray(integrand(z))
            g = c.kernel(z)
            return vals * g.reshape((-1,) + (1,) * (vals.ndim - 1))

        if symmetric:
            half = half_line_integral(line, quad.umax, quad.log2_panels, quad.tol, real_only=True)
            total = total + 1j * c.weight * 2.0 * np.real(half)
        else:
            pos = half_line_integral(line, quad.umax, quad.log2_panels, quad.tol)
            neg = half_line_integral(lambda u: line(-u), quad.umax, quad.log2_panels, quad.tol)
            total = total + 1j * c.weight * (pos + neg)
    return total


def _real_checked(val, what: str):
    val = np.asarray(val)
    if np.any(np.abs(np.imag(val)) > 1e-8 * (1.0 + np.abs(np.real(val)))):
        raise QuadratureFailure(f"{what}: imaginary residue {np.max(np.abs(np.imag(val))):.3e}")
    return np.real(val)


# ---------------------------------------------------------------------------
# Fourier measures
# ---------------------------------------------------------------------------

class DecayClass(str, enum.Enum):
    L1_WITH_U2 = "L1_with_u2"
    L1 = "L1"
    CONDITIONAL = "conditional"


def _measured_decay(fhat: Callable) -> DecayClass:
    u = np.array([1e3, 2e3])
    a = np.abs(fhat(u))
    if a[0] == 0:
        return DecayClass.L1_WITH_U2
    p = -math.log2(max(a[1] / a[0], 1e-300))
    if p > 3.05:
        return DecayClass.L1_WITH_U2
    if p > 1.05:
        return DecayClass.L1
    return DecayClass.CONDITIONAL


DAMPING_EPS = (1e-3, 5e-4, 2.5e-4)


@dataclass(frozen=True)
class FourierMeasure:
    """``mu(du) = fhat(-u) / (2 pi) du`` plus optional atoms ``(u, weight)``."""

    fhat: Optional[Callable] = None
    decay_class: DecayClass = DecayClass.L1
    atoms: tuple = ()
    description: str = ""
    payoff: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.fhat is not None:
            measured = _measured_decay(self.fhat)
            order = [DecayClass.CONDITIONAL, DecayClass.L1, DecayClass.L1_WITH_U2]
            if order.index(measured) < order.index(DecayClass(self.decay_class)):
                raise ValueError(f"declared decay {self.decay_class} but tail behaves like {measured}")
            u = np.array([0.5, 3.0, 40.0])
            if not np.allclose(self.fhat(-u), np.conj(self.fhat(u)), rtol=1e-12, atol=0):
                raise ValueError("Fourier density is not conjugate symmetric")
        object.__setattr__(self, "atoms", tuple((float(u), complex(w)) for u, w in self.atoms))

    def density(self, u):
        u = np.asarray(u, dtype=float)
        return self.fhat(-u) / (2.0 * math.pi)


def integrate_fourier(measure: FourierMeasure, integrand: Callable,
                      quad: QuadSettings = DEFAULT_QUAD):
    """``int F(u) mu(du)`` for a conjugate-symmetric ``F`` (so the result is real).

    Densities whose transform decays only like ``1/|u|`` are integrated with a
    Gaussian damping ``exp(-eps u^2)`` and extrapolated to ``eps = 0``.
    """
    total = 0.0
    for u0, w in measure.atoms:
        total = total + w * np.asarray(integrand(np.array([u0])))[0]
    if measure.fhat is None:
        return total

    def line(u, eps=0.0):
        vals = np.asarray(integrand(u))
        dens = measure.density(u)
        if eps:
            dens = dens * np.exp(-eps * u * u)
        return vals * dens.reshape((-1,) + (1,) * (vals.ndim - 1))

    if measure.decay_class == DecayClass.CONDITIONAL:
        vals = []
        for eps in DAMPING_EPS:
            vals.append(2.0 * np.real(half_line_integral(lambda u: line(u, eps), quad.umax,
                                                          quad.log2_panels, quad.tol,
                                                          real_only=True)))
        return total + richardson(vals, DAMPING_EPS)
    return total + 2.0 * np.real(half_line_integral(line, quad.umax, quad.log2_panels, quad.tol,
                                                     real_only=True))


def digital_asset_or_nothing(B: float) -> FourierMeasure:
    """Asset-or-nothing digital below a barrier, ``f(x) = e^x 1{e^x < B}``."""
    if not B > 0:
        raise ValueError("barrier must be positive")
    lb = math.log(B)

    def fhat(u):
        u = np.asarray(u, dtype=float)
        return np.exp((1.0 + 1j * u) * lb) / (1.0 + 1j * u)

    def pay(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < lb, np.exp(x), 0.0)

    return FourierMeasure(fhat, DecayClass.CONDITIONAL, (), f"digital B={B}", pay)


def self_quanto_put(K: float) -> FourierMeasure:
    """Self-quanto put ``f(x) = e^x (K - e^x)_+``."""
    if not K > 0:
        raise ValueError("strike must be positive")
    lk = math.log(K)

    def fhat(u):
        u = np.asarray(u, dtype=float)
        return np.exp((2.0 + 1j * u) * lk) / ((1.0 + 1j * u) * (2.0 + 1j * u))

    def pay(x):
        e = np.exp(np.asarray(x, dtype=float))
        return e * np.maximum(K - e, 0.0)

    return FourierMeasure(fhat, DecayClass.L1, (), f"self-quanto put K={K}", pay)


def fourier_atom(u: float, weight: complex = 1.0) -> FourierMeasure:
    """Point mass at frequency ``u`` (together with its mirror when real payoffs are wanted)."""
    return FourierMeasure(None, DecayClass.L1_WITH_U2, ((u, weight),), f"{weight}*e^(i{u}x)")


def _spot_power(z, s):
    """``s^z`` for every pair; real exponents use the real power so that ``s^1 == s``."""
    z = np.asarray(z, dtype=complex)
    if np.all(z.imag == 0):
        return np.power(s[None, :], z.real[:, None]).astype(complex)
    return np.exp(np.multiply.outer(z, np.log(s)))


def reconstruct(measure, point, quad: QuadSettings = DEFAULT_QUAD):
    """Numerically invert the representation at a spot ``s > 0`` or a log-level ``x``."""
    pts = np.atleast_1d(np.asarray(point, dtype=float))
    if isinstance(measure, PayoffMeasure):
        if np.any(pts <= 0):
            raise ValueError("spot must be positive")
        val = integrate_contour(measure, lambda z: _spot_power(z, pts), quad)
    elif isinstance(measure, FourierMeasure):
        if measure.fhat is None:
            val = sum(w * np.exp(1j * u * pts) for u, w in measure.atoms)
        else:
            val = integrate_fourier(measure, lambda u: np.exp(1j * np.multiply.outer(u, pts)), quad)
    else:
        raise TypeError("unsupported measure type")
    out = _real_checked(val, "reconstruct")
    return out if np.ndim(point) else float(out[0])
