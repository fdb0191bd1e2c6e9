"""Numerical integration primitives shared by the engines.

Two families are provided: composite Gauss-Legendre for smooth time integrals
on bounded intervals, and composite Simpson with geometric tail blocks for
integrals along vertical lines in the complex plane, where the integrand
typically decays like ``|u|^-2``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import QuadratureFailure, TailDivergence

GL_ORDER = 8


@lru_cache(maxsize=16)
def _gl_reference(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def gl_panels(edges, order: int = GL_ORDER):
    """Nodes and weights of composite Gauss-Legendre on the panels defined by ``edges``."""
    edges = np.asarray(edges, dtype=float)
    x, w = _gl_reference(order)
    a = edges[:-1, None]
    b = edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def panel_edges(a: float, b: float, n_panels: int, breakpoints=()):
    """Uniform panel edges on ``[a, b]`` with interior ``breakpoints`` merged in."""
    n_panels = max(int(n_panels), 1)
    edges = np.linspace(a, b, n_panels + 1)
    if len(breakpoints):
        bp = np.asarray(breakpoints, dtype=float)
        bp = bp[(bp > a) & (bp < b)]
        if bp.size:
            edges = np.unique(np.concatenate([edges, bp]))
    return edges


def gl_integrate(f, a: float, b: float, n_panels: int, breakpoints=(), rtol: float = 1e-9,
                 max_doublings: int = 5, check: bool = True):
    """Integrate ``f(s)`` over ``[a, b]``; ``f`` returns an array whose first axis runs over ``s``.

    The panel count is doubled until the relative change falls below ``rtol``.
    """
    if b <= a:
        sample = np.asarray(f(np.array([a])))
        return np.zeros(sample.shape[1:], dtype=sample.dtype)

    def once(n):
        nodes, weights = gl_panels(panel_edges(a, b, n, breakpoints))
        vals = np.asarray(f(nodes))
        return np.tensordot(weights, vals, axes=(0, 0))

    cur = once(n_panels)
    if not check:
        return cur
    for _ in range(max_doublings):
        n_panels *= 2
        nxt = once(n_panels)
        scale = np.maximum(np.abs(nxt), 1e-300)
        if np.all(np.abs(nxt - cur) <= rtol * scale + 1e-15):
            return nxt
        cur = nxt
    raise QuadratureFailure(f"time integral on [{a}, {b}] did not converge to rtol={rtol}")


def simpson_weights(n_panels: int, h: float) -> np.ndarray:
    """Composite Simpson weights for ``n_panels`` (even) panels of width ``h``."""
    if n_panels % 2:
        raise ValueError("Simpson needs an even number of panels")
    w = np.ones(n_panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def cumulative_simpson(values: np.ndarray, h: float) -> np.ndarray:
    """Cumulative integral on a uniform grid with nodes at ``h/2`` midpoints.

    ``values`` has shape ``(2 n + 1, ...)`` sampled at spacing ``h/2``; the result
    has shape ``(n + 1, ...)`` with the integral from the first node to every
    even node, each panel integrated by Simpson's rule.
    """
    v = np.asarray(values)
    panels = (v[:-2:2] + 4.0 * v[1:-1:2] + v[2::2]) * (h / 6.0)
    out = np.zeros((panels.shape[0] + 1,) + v.shape[1:], dtype=np.result_type(v, float))
    np.cumsum(panels, axis=0, out=out[1:])
    return out


def _simpson_block(f, a: float, b: float, n_panels: int):
    u = np.linspace(a, b, n_panels + 1)
    vals = np.asarray(f(u))
    w = simpson_weights(n_panels, (b - a) / n_panels)
    integral = np.tensordot(w, vals, axes=(0, 0))
    l1 = np.tensordot(w, np.abs(vals), axes=(0, 0))
    return integral, l1


def half_line_integral(f, umax: float = 400.0, log2_panels: int = 13, tol: float = 1e-7,
                       max_refine: int = 5, max_tail_blocks: int = 10, real_only: bool = False):
    """``int_0^inf f(u) du`` for an integrand decaying at least like ``u^-2``.

    Composite Simpson on ``[0, umax]`` with ``2^log2_panels`` panels, refined by
    doubling until the change relative to the integrand's L1 mass is below
    ``tol``.  The line is then extended by geometric blocks ``[U, 2U]`` at the
    initial step.  Where consecutive blocks shrink geometrically (a monotone
    ``c/u^2`` tail halves from block to block) the remaining mass is added as
    the geometric series of the last ratio; elsewhere (oscillating tails) no
    extrapolation is attempted and two consecutive blocks must be negligible.
    ``f`` may return extra trailing axes, which are integrated independently.
    With ``real_only`` the convergence tests look at the real part only
    (callers that keep ``2 Re`` of the result).
    """
    part = np.real if real_only else (lambda v: v)
    n = 2 ** int(log2_panels)
    h_tail = umax / n
    core, l1 = _simpson_block(f, 0.0, umax, n)
    for _ in range(max_refine):
        n2 = 2 * n
        finer, l1 = _simpson_block(f, 0.0, umax, n2)
        done = np.all(np.abs(part(finer - core)) <= tol * (np.abs(finer) + l1))
        core, n = finer, n2
        if done:
            break
    else:
        raise QuadratureFailure("line integral did not converge under panel doubling")
    # beyond umax the integrand is far from its singularities; the initial step suffices
    h = h_tail
    total = core
    U = umax
    prev_block = prev_ext = None
    for _ in range(max_tail_blocks):
        block, bl1 = _simpson_block(f, U, 2.0 * U, int(round(U / h)))
        total = total + block
        l1 = l1 + bl1
        U *= 2.0
        if prev_block is None:
            prev_block, prev_ext = block, total
            continue
        pb, b = part(prev_block), part(block)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(np.abs(pb) > 0, np.real(b / np.where(pb == 0, 1, pb)), 0.0)
        geometric = (r > 0.3) & (r < 0.7)
        ext = total + np.where(geometric, block * r / (1.0 - r), 0.0)
        scale = tol * (np.abs(ext) + l1)
        negligible = (np.abs(b) <= scale) & (np.abs(pb) <= 4.0 * scale)
        settled = geometric & (np.abs(part(ext - prev_ext)) <= scale)
        if np.all(negligible | settled):
            return ext
        prev_block, prev_ext = block, ext
    raise TailDivergence(f"line-integral tail not negligible at U={U:g}")


def pairwise_sum(x: np.ndarray, axis: int = 0):
    """Sum in a fixed pairwise-tree order, independent of how the work was scheduled."""
    x = np.asarray(x)
    x = np.moveaxis(x, axis, 0)
    while x.shape[0] > 1:
        if x.shape[0] % 2:
            x = np.concatenate([x, np.zeros((1,) + x.shape[1:], dtype=x.dtype)])
        x = x[0::2] + x[1::2]
    return x[0] if x.shape[0] else np.zeros(x.shape[1:], dtype=x.dtype)


def richardson(values, ratios):
    """Polynomial extrapolation to zero of ``values`` sampled at parameters ``ratios``."""
    eps = np.asarray(ratios, dtype=float)
    out = 0.0
    for i, e in enumerate(eps):
        others = np.delete(eps, i)
        out = out + values[i] * np.prod(others / (others - e))
    return out


def is_finite_all(x) -> bool:
    return bool(np.all(np.isfinite(x)))


__all__ = [
    "gl_panels", "panel_edges", "gl_integrate", "simpson_weights", "cumulative_simpson",
    "half_line_integral", "pairwise_sum", "richardson", "is_finite_all",
]
