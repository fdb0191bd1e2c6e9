"""Command-line front end.

``vohedge <command> --config run.cfg --out DIR [--seed N] [--threads N]``

Commands write plot-ready CSV files into the output directory:

=============  ===========================================================
price          ``price.csv``: ``K,V0_vo,IC_bs`` over ``payoff.strikes``
hedge          ``hedge.csv``: ``K,xi0_vo,delta_bs`` over ``payoff.strikes``
variance       ``variance.csv``: ``quantity,value`` with ``V0``, ``J0``, ``K_T``
backtest       ``backtest.csv`` plus optional ``errors_<strategy>_<N>.csv``
payoff-check   ``payoff_check.csv``: ``point,value,exact,abs_err``
=============  ===========================================================

Exit status: 0 on success, 2 for configuration errors, 3 for numerical
failures, 1 for anything else.  Files are written to a temporary name and
renamed, so a failed run never leaves a truncated CSV behind.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys

import numpy as np

from . import blackscholes as bs
from .arithmetic import arith_price_process, arith_pure_hedge, build_arith
from .config import RunConfig, load_config
from .cumulants import NIG, BrownianDrift, Poisson, VarianceGamma, reparametrize_moment_matched
from .errors import ConfigError, VoHedgeError
from .fs_engine import build_coefficients, mvt_K, price_process, pure_hedge, quadratic_error
from .montecarlo import (BacktestConfig, gaussian_surrogate, run_backtest, variance_curve,
                         write_report_csv, _fmt)
from .payoff import (QuadSettings, call_representation, digital_asset_or_nothing,
                     put_representation, reconstruct, self_quanto_put)
from .pii import (LevyHomogeneous, TimeChangedBrownian, TwoFactor, WienerIntegral,
                  validate_model)

log = logging.getLogger("vohedge")

COMMANDS = ("price", "hedge", "variance", "backtest", "payoff-check")


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def _constant(c):
    c = float(c)
    return lambda s: c + 0.0 * np.asarray(s, dtype=float)


def build_driver(cfg: RunConfig):
    kind = cfg["model.kind"]
    C = cfg["model.C"]
    if kind == "nig":
        d = NIG(cfg["model.alpha"], cfg["model.beta"], cfg["model.delta"], cfg["model.mu"])
        return reparametrize_moment_matched(d, C) if C != 1.0 else d
    if C != 1.0:
        raise ConfigError("model.C applies to NIG drivers only")
    if kind == "vg":
        return VarianceGamma(cfg["model.alpha"], cfg["model.beta"], cfg["model.delta"], cfg["model.mu"])
    if kind == "poisson":
        return Poisson(cfg["model.lambda_p"])
    return BrownianDrift(cfg["model.sigma"], cfg["model.m"])


def build_model(cfg: RunConfig):
    T = cfg["pii.T"]
    kind = cfg["pii.kind"]
    grid = cfg["pii.grid"]
    if kind == "time_changed_brownian":
        return TimeChangedBrownian(T=T, psi=cfg["pii.psi"], grid=grid)
    driver = build_driver(cfg)
    if kind == "levy":
        return LevyHomogeneous(T=T, driver=driver, grid=grid)
    if kind == "wiener":
        k = cfg["pii.kernel"]
        return WienerIntegral(T=T, driver=driver, kernel=_constant(k) if isinstance(k, float) else k,
                              grid=grid)
    trend = cfg.get("pii.trend")
    if isinstance(trend, float):
        trend = _constant(trend)
    return TwoFactor(T=T, driver=driver, sigma_s=cfg["pii.sigma_s"], lambda_mr=cfg["pii.lambda_mr"],
                     sigma_l=cfg["pii.sigma_l"], delivery=cfg.get("pii.delivery_Td"), trend=trend,
                     grid=grid)


def build_payoff(cfg: RunConfig, K: float = None):
    kind = cfg["payoff.kind"]
    if K is None:
        K = cfg["payoff.B"] if kind == "digital" else cfg["payoff.K"]
    arith = cfg["engine"] == "arithmetic"
    if kind in ("call", "put") and arith:
        raise ConfigError(f"payoff.kind={kind} needs engine = exponential")
    if kind in ("digital", "self_quanto") and not arith:
        raise ConfigError(f"payoff.kind={kind} needs engine = arithmetic")
    if kind == "call":
        rep = cfg["payoff.variant"]
        R = cfg.get("payoff.R", 1.5 if rep == "R_gt_1" else 0.5)
        return call_representation(K, rep, R)
    if kind == "put":
        return put_representation(K, cfg.get("payoff.R", -0.5))
    if kind == "digital":
        return digital_asset_or_nothing(K)
    return self_quanto_put(K)


def _quad(cfg):
    return QuadSettings(cfg["quadrature.umax"], cfg["quadrature.log2_panels"], cfg["quadrature.tol"])


def _strikes(cfg):
    if cfg.get("payoff.strikes") is not None:
        return cfg["payoff.strikes"]
    return [cfg["payoff.B"] if cfg["payoff.kind"] == "digital" else cfg["payoff.K"]]


class _Engine:
    """Time-0 price and hedge for either engine."""

    def __init__(self, cfg, model):
        self.cfg = cfg
        self.model = model
        self.arith = cfg["engine"] == "arithmetic"
        self.s0 = cfg["market.s0"]
        self.quad = _quad(cfg)
        if self.arith:
            self.coeffs = build_arith(model)
        else:
            rep = validate_model(model)
            if not rep.ok:
                raise ConfigError("model fails the exponential-engine checks: " + "; ".join(rep.reasons))
            self.coeffs = build_coefficients(model, self.s0)

    def price(self, pay):
        if self.arith:
            return float(arith_price_process(self.coeffs, pay, 0.0, math.log(self.s0), self.quad))
        return float(price_process(self.coeffs, pay, 0.0, self.s0, self.quad))

    def hedge(self, pay):
        if self.arith:
            return float(arith_pure_hedge(self.coeffs, pay, 0.0, math.log(self.s0), self.quad))
        return float(pure_hedge(self.coeffs, pay, 0.0, self.s0, self.quad))


def _benchmark(cfg, model):
    """``K -> (IC_bs, delta_bs)`` under the Gaussian model with the same variance curve."""
    s0 = cfg["market.s0"]
    kind = cfg["payoff.kind"]
    if kind in ("call", "put"):
        var = variance_curve(model)
        v = float(var(model.T) - var(0.0))
        return lambda K: tuple(float(x) for x in bs.vanilla(kind, s0, K, v))
    gauss = _Engine(cfg, gaussian_surrogate(model))

    def f(K):
        pay = build_payoff(cfg, K)
        return gauss.price(pay), gauss.hedge(pay)
    return f


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def write_csv(path: str, header, rows) -> None:
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_price(cfg: RunConfig, out: str, **_):
    model = build_model(cfg)
    eng = _Engine(cfg, model)
    ref = _benchmark(cfg, model)
    rows = [(K, eng.price(build_payoff(cfg, K)), ref(K)[0]) for K in _strikes(cfg)]
    path = os.path.join(out, "price.csv")
    write_csv(path, ("K", "V0_vo", "IC_bs"), rows)
    return [path]


def cmd_hedge(cfg: RunConfig, out: str, **_):
    model = build_model(cfg)
    eng = _Engine(cfg, model)
    ref = _benchmark(cfg, model)
    rows = [(K, eng.hedge(build_payoff(cfg, K)), ref(K)[1]) for K in _strikes(cfg)]
    path = os.path.join(out, "hedge.csv")
    write_csv(path, ("K", "xi0_vo", "delta_bs"), rows)
    return [path]


def cmd_variance(cfg: RunConfig, out: str, **_):
    if cfg["engine"] != "exponential":
        raise ConfigError("the variance command needs engine = exponential")
    model = build_model(cfg)
    eng = _Engine(cfg, model)
    pay = build_payoff(cfg)
    rows = [("V0", eng.price(pay)), ("J0", quadratic_error(eng.coeffs, pay)),
            ("K_T", mvt_K(eng.coeffs, model.T))]
    path = os.path.join(out, "variance.csv")
    write_csv(path, ("quantity", "value"), rows)
    return [path]


def cmd_backtest(cfg: RunConfig, out: str, seed=None, threads: int = 1, **_):
    model = build_model(cfg)
    pay = build_payoff(cfg)
    seed = cfg["backtest.seed"] if seed is None else seed
    dump = cfg["backtest.dump_errors"]
    reports = []
    for N in cfg["backtest.N"]:
        bc = BacktestConfig(model, pay, s0=cfg["market.s0"], n_rebalances=N,
                            n_paths=cfg["backtest.paths"], seed=seed,
                            substeps_per_interval=cfg["backtest.substeps"],
                            strategies=tuple(cfg["backtest.strategies"]), engine=cfg["engine"],
                            threads=threads, keep_errors=dump)
        log.info("backtest N=%d paths=%d", N, bc.n_paths)
        reports.append(run_backtest(bc))
    paths = []
    if dump:
        for rep in reports:
            for s, err in rep.errors.items():
                p = os.path.join(out, f"errors_{s}_{rep.config.n_rebalances}.csv")
                write_csv(p, ("path", "error"), enumerate(err.tolist()))
                paths.append(p)
    p = os.path.join(out, "backtest.csv")
    write_report_csv(reports, p)
    return paths + [p]


def cmd_payoff_check(cfg: RunConfig, out: str, **_):
    pay = build_payoff(cfg)
    arith = cfg["engine"] == "arithmetic"
    pts = cfg.get("payoff.points")
    if pts is None:
        if cfg["payoff.kind"] == "digital":
            # the damped inversion smooths the jump, so stay clear of the barrier
            pts = [cfg["payoff.B"] * math.exp(d) for d in (-2.0, -1.0, -0.5, 0.5, 1.0)]
        else:
            pts = [cfg["payoff.K"] * f for f in (0.5, 0.8, 1.0, 1.2, 2.0)]
    pts = np.asarray(pts, dtype=float)
    # arithmetic payoffs are functions of the log-level
    args = np.log(pts) if arith else pts
    vals = reconstruct(pay, args, _quad(cfg))
    exact = pay.payoff(args)
    rows = [(p, v, e, abs(v - e)) for p, v, e in zip(pts, vals, exact)]
    path = os.path.join(out, "payoff_check.csv")
    write_csv(path, ("point", "value", "exact", "abs_err"), rows)
    return [path]


DISPATCH = {"price": cmd_price, "hedge": cmd_hedge, "variance": cmd_variance,
            "backtest": cmd_backtest, "payoff-check": cmd_payoff_check}


def _threads(arg):
    if arg is not None:
        return arg
    env = os.environ.get("VOHEDGE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"VOHEDGE_THREADS={env!r} is not an integer") from None
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vohedge", description="Variance-optimal hedging toolkit")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="configuration file (defaults are used when omitted)")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, help="backtest seed (overrides backtest.seed)")
    p.add_argument("--threads", type=int, help="worker threads (fallback: VOHEDGE_THREADS)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        from .config import defaults
        cfg = load_config(args.config) if args.config else defaults()
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        out = args.out or cfg["output.dir"]
        os.makedirs(out, exist_ok=True)
        written = DISPATCH[args.command](cfg, out, seed=args.seed, threads=_threads(args.threads))
    except ConfigError as exc:
        print(f"vohedge: configuration error: {exc}", file=sys.stderr)
        return 2
    except (VoHedgeError, ValueError, TypeError) as exc:
        print(f"vohedge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"vohedge: unexpected failure: {exc!r}", file=sys.stderr)
        return 1
    for w in written:
        print(w)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
