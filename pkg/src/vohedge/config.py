"""Run configuration: flat ``section.key = value`` text.

Lines starting with ``#`` and blank lines are ignored; a trailing ``# ...`` is
stripped.  Keys are validated against :data:`SCHEMA` before anything runs, and
an unknown key or a malformed value is reported with its line number.

Example::

    model.kind = nig
    model.alpha = 38.46
    model.beta = -3.85
    model.delta = 6.40
    model.mu = 0.64
    model.C = 0.08
    pii.kind = levy
    pii.T = 0.25
    payoff.kind = call
    payoff.strikes = 60, 99, 150
    backtest.N = 12
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError
from .pii import Table


def _choice(*options):
    def parse(v):
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v
    parse.__name__ = "choice"
    return parse


def _float_list(v):
    out = [float(p) for p in v.replace(";", ",").split(",") if p.strip()]
    if not out:
        raise ValueError("empty list")
    return out


def _int_list(v):
    return [int(x) for x in _float_list(v)]


def _str_list(v):
    return [p.strip() for p in v.split(",") if p.strip()]


def _bool(v):
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _table_or_float(v):
    return Table.parse(v) if ":" in v else float(v)


def _trend(v):
    return 0.0 if v == "zero" else _table_or_float(v)


SCHEMA = {
    # driver
    "model.kind": (_choice("nig", "vg", "poisson", "brownian"), "nig"),
    "model.alpha": (float, 38.46),
    "model.beta": (float, -3.85),
    "model.delta": (float, 6.40),
    "model.mu": (float, 0.64),
    "model.lambda_p": (float, 1.0),
    "model.sigma": (float, 0.4),
    "model.m": (float, -0.08),
    "model.C": (float, 1.0),
    # additive process built on the driver
    "pii.kind": (_choice("levy", "wiener", "two_factor", "time_changed_brownian"), "levy"),
    "pii.T": (float, 0.25),
    "pii.grid": (int, 256),
    "pii.kernel": (_table_or_float, 1.0),
    "pii.sigma_s": (float, 0.5747),
    "pii.lambda_mr": (float, 3.0),
    "pii.sigma_l": (float, 0.0),
    "pii.delivery_Td": (float, None),
    "pii.trend": (_trend, None),
    "pii.psi": (Table.parse, None),
    # payoff
    "payoff.kind": (_choice("call", "put", "digital", "self_quanto"), "call"),
    "payoff.K": (float, 99.0),
    "payoff.B": (float, 100.0),
    "payoff.strikes": (_float_list, None),
    "payoff.variant": (_choice("R_gt_1", "R_in_0_1"), "R_gt_1"),
    "payoff.R": (float, None),
    "payoff.points": (_float_list, None),
    # numerics
    "quadrature.umax": (float, 400.0),
    "quadrature.log2_panels": (int, 13),
    "quadrature.tol": (float, 1e-7),
    "engine": (_choice("exponential", "arithmetic"), "exponential"),
    "market.s0": (float, 100.0),
    # backtest
    "backtest.N": (_int_list, [12]),
    "backtest.paths": (int, 5000),
    "backtest.seed": (int, 1),
    "backtest.substeps": (int, 64),
    "backtest.strategies": (_str_list, ["VO", "BS", "VO_with_BS_capital"]),
    "backtest.dump_errors": (_bool, False),
    "output.dir": (str, "."),
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    explicit: set = field(default_factory=set)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v

    def section(self, name: str) -> dict:
        pre = name + "."
        return {k[len(pre):]: v for k, v in self.values.items() if k.startswith(pre)}


def defaults() -> RunConfig:
    return RunConfig({k: d for k, (_, d) in SCHEMA.items()}, set())


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate configuration text."""
    cfg = defaults()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in cfg.explicit:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        parser = SCHEMA[key][0]
        try:
            cfg.values[key] = parser(val)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
        cfg.explicit.add(key)
    _check(cfg, source)
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, path)


# keys that only make sense for some kinds; anything else set explicitly is rejected
KIND_KEYS = {
    "model.kind": {
        "nig": {"model.alpha", "model.beta", "model.delta", "model.mu", "model.C"},
        "vg": {"model.alpha", "model.beta", "model.delta", "model.mu"},
        "poisson": {"model.lambda_p"},
        "brownian": {"model.sigma", "model.m"},
    },
    "pii.kind": {
        "levy": set(),
        "wiener": {"pii.kernel"},
        "two_factor": {"pii.sigma_s", "pii.lambda_mr", "pii.sigma_l", "pii.delivery_Td", "pii.trend"},
        "time_changed_brownian": {"pii.psi"},
    },
}


def _check(cfg: RunConfig, source: str) -> None:
    for selector, table in KIND_KEYS.items():
        allowed = table[cfg[selector]]
        owned = set().union(*table.values())
        stray = sorted(k for k in cfg.explicit & owned if k not in allowed)
        if stray:
            raise ConfigError(f"{source}: {', '.join(stray)} not used by {selector} = {cfg[selector]}")
    if cfg["pii.T"] <= 0:
        raise ConfigError(f"{source}: pii.T must be positive")
    if cfg["market.s0"] <= 0:
        raise ConfigError(f"{source}: market.s0 must be positive")
    if cfg["backtest.paths"] < 2:
        raise ConfigError(f"{source}: backtest.paths must be at least 2")
    if any(n < 1 for n in cfg["backtest.N"]):
        raise ConfigError(f"{source}: backtest.N entries must be >= 1")
    bad = set(cfg["backtest.strategies"]) - {"VO", "BS", "VO_with_BS_capital"}
    if bad:
        raise ConfigError(f"{source}: unknown strategies {sorted(bad)}")
    if cfg["pii.kind"] == "time_changed_brownian" and cfg.get("pii.psi") is None:
        raise ConfigError(f"{source}: pii.psi is required for time_changed_brownian")
