"""Cumulant generating functions of the Levy drivers.

Every driver exposes ``kappa(z)`` with ``E[exp(z L_1)] = exp(kappa(z))`` on a
vertical strip ``{Re z in (lower, upper)}``, together with closed-form complex
derivatives.  All evaluations accept numpy arrays and broadcast.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace, fields
from typing import ClassVar

import numpy as np

from .errors import DomainViolation, NoSolution

DOMAIN_MARGIN = 1e-9


@dataclass(frozen=True)
class DomainStrip:
    """Real interval ``I`` such that the cumulant is analytic on ``I + iR``."""

    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"empty strip [{self.lower}, {self.upper}]")
        if not self.lower <= 0.0 <= self.upper:
            raise ValueError("strip must contain 0")

    def contains(self, x, margin: float = DOMAIN_MARGIN) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all((x > self.lower + margin) & (x < self.upper - margin)))

    def scaled(self, c: float) -> "DomainStrip":
        """Strip of ``z -> kappa(c z)`` for ``c > 0``."""
        if c <= 0:
            raise ValueError("scale must be positive")
        return DomainStrip(self.lower / c, self.upper / c)

    def intersect(self, other: "DomainStrip") -> "DomainStrip":
        return DomainStrip(max(self.lower, other.lower), min(self.upper, other.upper))


@dataclass(frozen=True)
class LevyCumulantModel:
    """Base class of the Levy drivers; instances are immutable value objects."""

    kind: ClassVar[str] = "abstract"

    @property
    def strip(self) -> DomainStrip:
        raise NotImplementedError

    def _kappa(self, z):
        raise NotImplementedError

    def _derivative(self, z, order: int):
        raise NotImplementedError

    @property
    def deterministic(self) -> bool:
        return False

    def check_domain(self, z) -> None:
        re = np.real(np.asarray(z))
        if not self.strip.contains(re):
            bad = re[~((re > self.strip.lower + DOMAIN_MARGIN) & (re < self.strip.upper - DOMAIN_MARGIN))] \
                if np.ndim(re) else re
            raise DomainViolation(
                f"{self.kind}: Re(z)={np.ravel(bad)[:3]} outside strip "
                f"({self.strip.lower}, {self.strip.upper})")

    def kappa(self, z, check: bool = True):
        if check:
            self.check_domain(z)
        return self._kappa(np.asarray(z, dtype=complex))

    def derivative(self, z, order: int = 1, check: bool = True):
        """``order``-th complex derivative of the cumulant at ``z`` (orders 1..4)."""
        if order not in (1, 2, 3, 4):
            raise ValueError("order must be in 1..4")
        if check:
            self.check_domain(z)
        return self._derivative(np.asarray(z, dtype=complex), order)

    def params(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class Poisson(LevyCumulantModel):
    """Uncompensated Poisson process, ``kappa(z) = lambda_p (e^z - 1)``."""

    lambda_p: float
    kind: ClassVar[str] = "poisson"

    def __post_init__(self):
        if not self.lambda_p > 0:
            raise ValueError("Poisson intensity must be positive")

    @property
    def strip(self):
        return DomainStrip(-math.inf, math.inf)

    def _kappa(self, z):
        return self.lambda_p * np.expm1(z)

    def _derivative(self, z, order):
        return self.lambda_p * np.exp(z)


@dataclass(frozen=True)
class NIG(LevyCumulantModel):
    """Normal inverse Gaussian, ``kappa(z) = mu z + delta (g_0 - g_z)``, ``g_z = sqrt(alpha^2 - (beta+z)^2)``."""

    alpha: float
    beta: float
    delta: float
    mu: float = 0.0
    kind: ClassVar[str] = "nig"

    def __post_init__(self):
        if not (self.alpha > abs(self.beta) and self.alpha > 0):
            raise ValueError(f"NIG requires alpha > |beta| (alpha={self.alpha}, beta={self.beta})")
        if not self.delta > 0:
            raise ValueError("NIG requires delta > 0")

    @property
    def gamma0(self) -> float:
        return math.sqrt(self.alpha ** 2 - self.beta ** 2)

    @property
    def strip(self):
        return DomainStrip(-self.alpha - self.beta, self.alpha - self.beta)

    def _gz(self, z):
        # Re(alpha^2 - w^2) > 0 inside the strip, so the principal root never meets its cut.
        w = self.beta + z
        return np.sqrt(self.alpha ** 2 - w * w)

    def _kappa(self, z):
        return self.mu * z + self.delta * (self.gamma0 - self._gz(z))

    def _derivative(self, z, order):
        a2 = self.alpha ** 2
        w = self.beta + z
        g = self._gz(z)
        if order == 1:
            return self.mu + self.delta * w / g
        if order == 2:
            return self.delta * a2 / g ** 3
        if order == 3:
            return 3.0 * self.delta * a2 * w / g ** 5
        return 3.0 * self.delta * a2 * (a2 + 4.0 * w * w) / g ** 7


@dataclass(frozen=True)
class VarianceGamma(LevyCumulantModel):
    """Variance gamma, ``kappa(z) = mu z + delta Log(alpha / (alpha - beta z - z^2/2))``."""

    alpha: float
    beta: float
    delta: float
    mu: float = 0.0
    kind: ClassVar[str] = "vg"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("VG requires alpha > 0")
        if self.delta == 0:
            raise ValueError("VG requires delta != 0")

    @property
    def strip(self):
        r = math.sqrt(self.beta ** 2 + 2.0 * self.alpha)
        return DomainStrip(-self.beta - r, -self.beta + r)

    def _q(self, z):
        return self.alpha - self.beta * z - 0.5 * z * z

    def _kappa(self, z):
        q = self._q(z)
        # Re(q) > 0 on the strip: Log(alpha/q) = log(alpha) - Log(q) stays on the principal branch.
        assert np.all(np.real(q) > 0), "VG logarithm argument left the right half-plane"
        return self.mu * z + self.delta * (math.log(self.alpha) - np.log(q))

    def _derivative(self, z, order):
        q = self._q(z)
        w = self.beta + z
        d = self.delta
        if order == 1:
            return self.mu + d * w / q
        if order == 2:
            return d * (q + w * w) / q ** 2
        if order == 3:
            return d * w * (3.0 * q + 2.0 * w * w) / q ** 3
        return 3.0 * d * (q * q + 4.0 * w * w * q + 2.0 * w ** 4) / q ** 4


@dataclass(frozen=True)
class BrownianDrift(LevyCumulantModel):
    """Brownian motion with drift, ``kappa(z) = m z + sigma^2 z^2 / 2``."""

    sigma: float
    m: float = 0.0
    kind: ClassVar[str] = "brownian"

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")

    @property
    def strip(self):
        return DomainStrip(-math.inf, math.inf)

    @property
    def deterministic(self) -> bool:
        return self.sigma == 0.0

    def _kappa(self, z):
        return self.m * z + 0.5 * self.sigma ** 2 * z * z

    def _derivative(self, z, order):
        if order == 1:
            return self.m + self.sigma ** 2 * z
        if order == 2:
            return np.full_like(z, self.sigma ** 2)
        return np.zeros_like(z)


KINDS = {cls.kind: cls for cls in (Poisson, NIG, VarianceGamma, BrownianDrift)}


def evaluate_cumulant(model: LevyCumulantModel, z):
    """``kappa^Lambda(z)``; raises DomainViolation when ``Re z`` leaves the strip."""
    out = model.kappa(z)
    return out[()] if isinstance(out, np.ndarray) and out.ndim == 0 else out


def cumulant_derivatives_at_zero(model: LevyCumulantModel, order: int = 4) -> np.ndarray:
    """Real vector ``(kappa'(0), ..., kappa^(order)(0))``."""
    if order not in (1, 2, 3, 4):
        raise ValueError("order must be in 1..4")
    model.check_domain(0.0)
    return np.array([model.derivative(0.0, k).real for k in range(1, order + 1)])


def excess_kurtosis(model: LevyCumulantModel) -> float:
    c = cumulant_derivatives_at_zero(model, 4)
    return float(c[3] / c[1] ** 2)


def _nig_moments(beta: float, delta: float, alpha: float) -> tuple[float, float]:
    g = math.sqrt(alpha * alpha - beta * beta)
    k2 = delta * alpha ** 2 / g ** 3
    k3 = 3.0 * delta * alpha ** 2 * beta / g ** 5
    return k2, k3


def reparametrize_moment_matched(model: NIG, C: float, max_iter: int = 100,
                                 tol: float = 1e-13) -> NIG:
    """Scale ``alpha`` by ``C`` and re-solve ``(beta, delta, mu)`` so that mean,
    variance and third cumulant are unchanged.

    Damped Newton on the (variance, third cumulant) equations in
    ``(beta, delta)``, starting from ``(beta / C, delta * C)``.
    """
    if not isinstance(model, NIG):
        raise TypeError("moment matching is defined for NIG drivers only")
    if not C > 0:
        raise ValueError("C must be positive")
    if C == 1.0:
        return model
    k1, k2, k3 = cumulant_derivatives_at_zero(model, 3)
    alpha = C * model.alpha
    # residuals are scaled by the targets so both equations weigh the same
    s2, s3 = abs(k2), max(abs(k3), 1e-300)

    def resid(b, d):
        m2, m3 = _nig_moments(b, d, alpha)
        return np.array([(m2 - k2) / s2, (m3 - k3) / s3])

    def jac(b, d):
        g2 = alpha * alpha - b * b
        g = math.sqrt(g2)
        a2 = alpha * alpha
        dk2_dd = a2 / g ** 3
        dk2_db = 3.0 * d * a2 * b / g ** 5
        dk3_dd = 3.0 * a2 * b / g ** 5
        dk3_db = 3.0 * d * a2 * (g2 + 5.0 * b * b) / g ** 7
        return np.array([[dk2_db / s2, dk2_dd / s2], [dk3_db / s3, dk3_dd / s3]])

    b = model.beta / C
    d = model.delta * C
    if abs(b) >= alpha:
        b = 0.5 * alpha * math.copysign(1.0, b)
    r = resid(b, d)
    for _ in range(max_iter):
        norm = float(np.max(np.abs(r)))
        if norm < tol:
            break
        try:
            step = np.linalg.solve(jac(b, d), -r)
        except np.linalg.LinAlgError as exc:
            raise NoSolution(f"singular Jacobian for C={C}") from exc
        lam = 1.0
        while lam > 1e-12:
            nb, nd = b + lam * step[0], d + lam * step[1]
            if abs(nb) < alpha and nd > 0:
                nr = resid(nb, nd)
                if np.max(np.abs(nr)) < norm:
                    break
            lam *= 0.5
        else:
            raise NoSolution(f"line search stalled for C={C}")
        b, d, r = nb, nd, nr
    else:
        raise NoSolution(f"moment matching did not converge for C={C}")
    if float(np.max(np.abs(r))) >= tol:
        raise NoSolution(f"moment matching did not converge for C={C}")
    mu = k1 - d * b / math.sqrt(alpha * alpha - b * b)
    return NIG(alpha=float(alpha), beta=float(b), delta=float(d), mu=float(mu))


@dataclass
class ValidationReport:
    """Pass/fail outcome with human-readable reasons (never raises)."""

    ok: bool = True
    reasons: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def fail(self, reason: str) -> None:
        self.ok = False
        self.reasons.append(reason)

    def __bool__(self):
        return self.ok


def validate_exponential_assumptions(model: LevyCumulantModel, scale: float = 1.0) -> ValidationReport:
    """Check that ``2 scale`` lies in the strip and ``kappa(2s) - 2 kappa(s) > 0``."""
    rep = ValidationReport()
    strip = model.strip
    x2 = 2.0 * scale
    rep.details["strip"] = (strip.lower, strip.upper)
    if not strip.contains(x2):
        rep.fail(f"2*scale={x2} outside strip ({strip.lower}, {strip.upper})")
    else:
        gap = float(np.real(model.kappa(x2) - 2.0 * model.kappa(scale)))
        rep.details["convexity_gap"] = gap
        if not gap > 0:
            rep.fail(f"kappa(2s) - 2 kappa(s) = {gap} is not positive")
    if isinstance(model, NIG):
        bound = (model.alpha - model.beta) / 2.0
        rep.details["nig_scale_bound"] = bound
        if not scale < bound:
            rep.fail(f"NIG criterion scale < (alpha - beta)/2 = {bound} violated")
    return rep


def with_params(model: LevyCumulantModel, **kw) -> LevyCumulantModel:
    return replace(model, **kw)
