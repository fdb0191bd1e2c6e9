"""Monte-Carlo backtests of discretely rebalanced hedging strategies.

Paths are simulated exactly in law at the rebalancing dates for Levy and
time-changed Brownian kinds, and by substep sums for kernel-driven kinds.
Every path owns a counter-based random stream keyed by ``(seed, path_index)``,
so results do not depend on how paths are scheduled across workers.

Strategies (all evaluated on the same paths):

``VO``
    variance-optimal capital ``V0`` and the feedback strategy
    ``phi = xi + lambda / S (H - V0 - G)`` evaluated at the left end of each period;
``BS``
    Black-Scholes capital and delta under a Gaussian model with the same
    variance term structure;
``VO_with_BS_capital``
    the variance-optimal feedback strategy started from the Black-Scholes capital.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import blackscholes as bs
from .arithmetic import arith_surface, build_arith
from .cumulants import NIG, BrownianDrift, Poisson, VarianceGamma
from .errors import InsufficientSamples
from .fs_engine import SurfaceBuilder, build_coefficients, pure_hedge, price_process
from .payoff import FourierMeasure, PayoffMeasure
from .pii import (LevyHomogeneous, PiiCumulant, Table, TimeChangedBrownian, TwoFactor,
                  WienerIntegral)
from .quadrature import gl_integrate

STRATEGIES = ("VO", "BS", "VO_with_BS_capital")


# ---------------------------------------------------------------------------
# random streams and samplers
# ---------------------------------------------------------------------------

def path_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one path (Philox keyed by ``(seed, index)``)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def sample_driver(driver, dt, rng: np.random.Generator, size=None):
    """Increments of a Levy driver over steps ``dt`` (scalar or array)."""
    dt = np.asarray(dt, dtype=float)
    shape = np.broadcast_shapes(dt.shape, () if size is None else (size,) if np.isscalar(size) else tuple(size))
    dt = np.broadcast_to(dt, shape)
    if isinstance(driver, NIG):
        # normal variance-mean mixture with an inverse-Gaussian mixing variable
        dd = driver.delta * dt
        Z = rng.wald(dd / driver.gamma0, dd * dd)
        return driver.mu * dt + driver.beta * Z + np.sqrt(Z) * rng.standard_normal(shape)
    if isinstance(driver, VarianceGamma):
        if driver.delta <= 0:
            raise ValueError("sampling a VG driver requires delta > 0")
        G = rng.gamma(driver.delta * dt, 1.0 / driver.alpha)
        return driver.mu * dt + driver.beta * G + np.sqrt(G) * rng.standard_normal(shape)
    if isinstance(driver, Poisson):
        return rng.poisson(driver.lambda_p * dt).astype(float)
    if isinstance(driver, BrownianDrift):
        return driver.m * dt + driver.sigma * np.sqrt(dt) * rng.standard_normal(shape)
    raise TypeError(f"no sampler for {type(driver).__name__}")


def _trend_increment(model: TwoFactor, t0: float, t1: float) -> float:
    if model._trend_fn is None:
        return 0.0
    return float(gl_integrate(lambda s: model.trend_at(s), t0, t1, 4, model.breakpoints))


def sample_increment(model: PiiCumulant, t0: float, t1: float, rng: np.random.Generator,
                     substeps: int = 64):
    """One draw of ``X_{t1} - X_{t0}``."""
    if not t1 > t0:
        raise ValueError("t0 < t1 required")
    return float(sample_path(model, np.array([t0, t1]), rng, substeps)[-1])


def sample_path(model: PiiCumulant, dates, rng: np.random.Generator, substeps: int = 64):
    """``X`` at ``dates`` (starting from 0 at ``dates[0]``)."""
    dates = np.asarray(dates, dtype=float)
    dts = np.diff(dates)
    out = np.zeros(dates.size)
    if isinstance(model, LevyHomogeneous):
        out[1:] = np.cumsum(sample_driver(model.driver, dts, rng))
        return out
    if isinstance(model, TimeChangedBrownian):
        dv = np.diff(model.psi_at(dates))
        out[1:] = np.cumsum(np.sqrt(dv) * rng.standard_normal(dts.size))
        return out
    if isinstance(model, (WienerIntegral, TwoFactor)):
        # substep sums with the kernel frozen at each substep midpoint
        frac = (np.arange(substeps) + 0.5) / substeps
        mids = dates[:-1, None] + dts[:, None] * frac[None, :]
        h = np.repeat(dts / substeps, substeps).reshape(dts.size, substeps)
        if isinstance(model, WienerIntegral):
            kern = model.kernel_at(mids)
        else:
            kern = model.ztilde(mids)
        if np.any(kern != 0):
            dL = sample_driver(model.driver, h, rng)
            inc = np.sum(kern * dL, axis=1)
        else:
            inc = np.zeros(dts.size)
        if isinstance(model, TwoFactor):
            if model.sigma_l > 0:
                inc = inc + model.sigma_l * np.sqrt(dts) * rng.standard_normal(dts.size)
            inc = inc + np.array([_trend_increment(model, a, b) for a, b in zip(dates[:-1], dates[1:])])
        out[1:] = np.cumsum(inc)
        return out
    raise TypeError(f"no sampler for {type(model).__name__}")


def simulate_paths(model: PiiCumulant, dates, n_paths: int, seed: int, substeps: int = 64,
                   threads: int = 1) -> np.ndarray:
    """Matrix ``(n_paths, len(dates))`` of ``X``; identical for any ``threads``."""
    out = np.empty((n_paths, len(dates)))

    def work(rng_range):
        for p in rng_range:
            out[p] = sample_path(model, dates, path_rng(seed, p), substeps)

    threads = max(1, int(threads))
    chunks = [range(a, min(n_paths, a + max(1, n_paths // threads + 1)))
              for a in range(0, n_paths, max(1, n_paths // threads + 1))]
    if threads == 1:
        for c in chunks:
            work(c)
    else:
        with ThreadPoolExecutor(threads) as ex:
            list(ex.map(work, chunks))
    return out


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

@dataclass
class MomentBlock:
    """Sample moments of the hedging error with asymptotic standard errors."""

    n: int
    mean: float
    se_mean: float
    std: float
    se_std: float
    skew: float
    se_skew: float
    kurt: float
    se_kurt: float

    @property
    def defined(self) -> bool:
        return math.isfinite(self.skew)


def error_statistics(errors) -> MomentBlock:
    """Mean, unbiased std, skewness and excess kurtosis with their standard errors.

    Skewness and kurtosis are reported as NaN (undefined) for a constant sample.
    """
    e = np.asarray(errors, dtype=float).ravel()
    n = e.size
    if n < 2:
        raise InsufficientSamples("at least two samples are needed")
    mean = float(np.mean(e))
    c = e - mean
    m2 = float(np.mean(c * c))
    std = float(math.sqrt(m2 * n / (n - 1)))
    if m2 == 0.0 or std <= 1e-14 * max(1.0, abs(mean)):
        nan = float("nan")
        return MomentBlock(n, mean, 0.0, 0.0, 0.0, nan, nan, nan, nan)
    m3 = float(np.mean(c ** 3))
    m4 = float(np.mean(c ** 4))
    skew = m3 / m2 ** 1.5
    kurt = m4 / m2 ** 2 - 3.0
    se_std = std * math.sqrt(max(kurt + 2.0, 0.0) / (4.0 * n))
    return MomentBlock(n, mean, std / math.sqrt(n), std, se_std, skew, math.sqrt(6.0 / n),
                       kurt, math.sqrt(24.0 / n))


# ---------------------------------------------------------------------------
# backtest
# ---------------------------------------------------------------------------

@dataclass
class BacktestConfig:
    model: PiiCumulant
    payoff: object
    s0: float = 100.0
    n_rebalances: int = 12
    n_paths: int = 5000
    seed: int = 1
    substeps_per_interval: int = 64
    strategies: tuple = STRATEGIES
    engine: str = "exponential"
    threads: int = 1
    keep_errors: bool = False

    def __post_init__(self):
        if self.n_rebalances < 1:
            raise ValueError("n_rebalances must be >= 1")
        if self.n_paths < 2:
            raise ValueError("n_paths must be >= 2")
        bad = set(self.strategies) - set(STRATEGIES)
        if bad:
            raise ValueError(f"unknown strategies {sorted(bad)}")
        if self.engine not in ("exponential", "arithmetic"):
            raise ValueError("engine must be exponential or arithmetic")


@dataclass
class BacktestReport:
    config: BacktestConfig
    blocks: dict
    capital: dict
    errors: dict = field(default_factory=dict, repr=False)

    def ratio_std(self, a: str = "VO", b: str = "BS") -> float:
        return self.blocks[a].std / self.blocks[b].std

    def rows(self):
        cfg = self.config
        for name, blk in self.blocks.items():
            yield {"strategy": name, "N": cfg.n_rebalances, "paths": cfg.n_paths, "seed": cfg.seed,
                   "V0": self.capital[name], "mean": blk.mean, "se_mean": blk.se_mean,
                   "std": blk.std, "se_std": blk.se_std, "skew": blk.skew, "kurt": blk.kurt}


CSV_COLUMNS = ("strategy", "N", "paths", "seed", "V0", "mean", "se_mean", "std", "se_std", "skew",
               "kurt")


def variance_curve(model: PiiCumulant, n: int = 65) -> Table:
    """``t -> Var(X_t)`` tabulated for the Gaussian benchmark."""
    ts = np.linspace(0.0, model.T, n)
    if isinstance(model, LevyHomogeneous):
        v = ts * float(np.real(model.driver.derivative(0.0, 2)))
    elif isinstance(model, TimeChangedBrownian):
        return model._tab
    else:
        v = np.array([float(np.real(model.kappa(t, 0.0, order=2))) for t in ts])
    return Table(ts, v)


def gaussian_surrogate(model: PiiCumulant) -> TimeChangedBrownian:
    return TimeChangedBrownian(T=model.T, psi=variance_curve(model))


class _Evaluator:
    """``(H, xi)`` at a date for every path, via exact quadrature at ``t = 0`` and FFT surfaces after."""

    def __init__(self, engine: str, model: PiiCumulant, payoff, s0: float, dates):
        self.engine = engine
        self.s0 = s0
        if engine == "exponential":
            self.coeffs = build_coefficients(model, s0)
            self.builder = SurfaceBuilder(self.coeffs, payoff, dates[1:-1]) if len(dates) > 2 else None
        else:
            self.coeffs = build_arith(model)
        self.payoff = payoff
        self.dates = dates

    def capital(self) -> float:
        if self.engine == "exponential":
            return price_process(self.coeffs, self.payoff, 0.0, self.s0)
        from .arithmetic import arith_price_process
        return float(arith_price_process(self.coeffs, self.payoff, 0.0, math.log(self.s0)))

    def at(self, i: int, level: np.ndarray):
        """``level`` is the spot (exponential) or ``X`` (arithmetic)."""
        if self.engine == "exponential":
            if i == 0:
                h = price_process(self.coeffs, self.payoff, 0.0, self.s0)
                x = pure_hedge(self.coeffs, self.payoff, 0.0, self.s0)
                return np.full(level.shape, h), np.full(level.shape, x)
            logs = np.log(level)
            x, H, XI = self.builder.at(i - 1, logs.min() - 0.05, logs.max() + 0.05)
        else:
            from .arithmetic import arith_price_process, arith_pure_hedge
            if i == 0:
                h = float(arith_price_process(self.coeffs, self.payoff, 0.0, level[0]))
                x = float(arith_pure_hedge(self.coeffs, self.payoff, 0.0, level[0]))
                return np.full(level.shape, h), np.full(level.shape, x)
            logs = level
            x, H, XI = arith_surface(self.coeffs, self.payoff, float(self.dates[i]),
                                     logs.min() - 0.05, logs.max() + 0.05)
        return CubicSpline(x, H)(logs), CubicSpline(x, XI)(logs)

    def feedback(self, i: int, level: np.ndarray):
        """Multiplier of ``H - c - G`` in the strategy."""
        t = float(self.dates[i])
        if self.engine == "exponential":
            return float(self.coeffs.lam(t)) / level
        return float(self.coeffs.alpha(t))


def run_backtest(config: BacktestConfig) -> BacktestReport:
    """Simulate, hedge with every requested strategy on common paths, and summarise."""
    cfg = config
    model = cfg.model
    T = model.T
    N = cfg.n_rebalances
    dates = np.linspace(0.0, T, N + 1)
    X = simulate_paths(model, dates, cfg.n_paths, cfg.seed, cfg.substeps_per_interval, cfg.threads)
    if cfg.engine == "exponential":
        if not isinstance(cfg.payoff, PayoffMeasure):
            raise TypeError("the exponential engine needs a PayoffMeasure")
        level = cfg.s0 * np.exp(X)
        final = cfg.payoff.payoff(level[:, -1])
    else:
        if not isinstance(cfg.payoff, FourierMeasure):
            raise TypeError("the arithmetic engine needs a FourierMeasure")
        level = math.log(cfg.s0) + X
        final = cfg.payoff.payoff(level[:, -1])
    dS = np.diff(level, axis=1)

    vo = _Evaluator(cfg.engine, model, cfg.payoff, cfg.s0, dates)
    need_bs = any(s in cfg.strategies for s in ("BS", "VO_with_BS_capital"))
    V0 = vo.capital()
    capital = {}
    kind = getattr(cfg.payoff, "meta", {}).get("kind") if cfg.engine == "exponential" else None
    if need_bs:
        var = variance_curve(model)
        rem = lambda t: float(var(T) - var(t))  # noqa: E731
        if kind in ("call", "put"):
            K = cfg.payoff.meta["K"]

            def bs_at(i, lv):
                return bs.vanilla(kind, lv, K, rem(dates[i]))
        else:
            gauss = _Evaluator(cfg.engine, gaussian_surrogate(model), cfg.payoff, cfg.s0, dates)

            def bs_at(i, lv):
                return gauss.at(i, lv)
        ic_bs = float(np.ravel(bs_at(0, level[:1, 0])[0])[0])

    errors = {}
    G = {s: np.zeros(cfg.n_paths) for s in cfg.strategies}
    c0 = {"VO": V0, "VO_with_BS_capital": ic_bs if need_bs else None, "BS": ic_bs if need_bs else None}
    for i in range(N):
        lv = level[:, i]
        if "VO" in cfg.strategies or "VO_with_BS_capital" in cfg.strategies:
            H, XI = vo.at(i, lv)
            fb = vo.feedback(i, lv)
        if "BS" in cfg.strategies:
            _, delta = bs_at(i, lv)
        for s in cfg.strategies:
            if s == "BS":
                phi = delta
            else:
                phi = XI + fb * (H - c0[s] - G[s])
            G[s] = G[s] + phi * dS[:, i]
    blocks = {}
    for s in cfg.strategies:
        err = c0[s] + G[s] - final
        errors[s] = err
        blocks[s] = error_statistics(err)
        capital[s] = c0[s]
    return BacktestReport(cfg, blocks, capital, errors if cfg.keep_errors else {})


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.17g}"


def write_report_csv(reports, path: str) -> None:
    """Write one row per (strategy, N) atomically (temporary file then rename)."""
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for rep in reports:
                for row in rep.rows():
                    w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)
