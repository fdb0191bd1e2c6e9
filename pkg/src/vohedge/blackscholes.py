"""Zero-rate Black-Scholes prices and deltas parametrised by remaining total variance."""
from __future__ import annotations

import numpy as np
from scipy.stats import norm


def _d1(s, K, var):
    sd = np.sqrt(var)
    return (np.log(s / K) + 0.5 * var) / sd, sd


def call_price(s, K, var):
    s = np.asarray(s, dtype=float)
    if np.all(var <= 0):
        return np.maximum(s - K, 0.0)
    d1, sd = _d1(s, K, var)
    return s * norm.cdf(d1) - K * norm.cdf(d1 - sd)


def call_delta(s, K, var):
    s = np.asarray(s, dtype=float)
    if np.all(var <= 0):
        return (s > K).astype(float)
    d1, _ = _d1(s, K, var)
    return norm.cdf(d1)


def put_price(s, K, var):
    return call_price(s, K, var) - np.asarray(s, dtype=float) + K


def put_delta(s, K, var):
    return call_delta(s, K, var) - 1.0


def vanilla(kind: str, s, K, var):
    """``(price, delta)`` of a call or put with remaining variance ``var``."""
    if kind == "call":
        return call_price(s, K, var), call_delta(s, K, var)
    if kind == "put":
        return put_price(s, K, var), put_delta(s, K, var)
    raise ValueError(f"no closed form for {kind!r}")
