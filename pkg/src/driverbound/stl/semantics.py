"""Discrete-time quantitative and Boolean semantics over sampled traces.

Both evaluators compute a whole signal (one value per sample index) in a
single bottom-up pass.  Temporal windows ``[t + lo, t + hi]`` are clipped to
the end of the trace; an index whose window lies entirely past the end has
no value (NaN internally) and requesting it raises :class:`EmptyWindowError`.
"""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from driverbound.stl.formula import (
    Always, And, Eventually, Implies, Label, Not, Or, Param, Predicate, TrueF,
    UnboundParameterError, Until,
)

_EPS = 1e-9


class EmptyWindowError(ValueError):
    pass


def window_offsets(lo, hi, dt):
    """Sample offsets covered by a time interval; ``hi`` may be None (unbounded)."""
    lo_k = math.ceil(lo / dt - _EPS)
    hi_k = None if math.isinf(hi) else math.floor(hi / dt + _EPS)
    return lo_k, hi_k


def _rhs_value(node, bindings):
    if isinstance(node.rhs, Param):
        try:
            return float(bindings[node.rhs.name])
        except KeyError:
            raise UnboundParameterError(node.rhs.name) from None
    return node.rhs


def _reduce_window(x, lo_k, hi_k, reduce, identity):
    """out[k] = reduce(x[k+lo_k : k+hi_k+1]) clipped to the end; NaN if empty."""
    n = len(x)
    out = np.full(n, np.nan)
    if lo_k > n - 1:
        return out
    if hi_k is None or hi_k >= n - 1:
        # Window always reaches the end of the trace: a suffix scan suffices.
        ufunc = np.minimum if reduce is np.min else np.maximum
        suffix = ufunc.accumulate(x[::-1])[::-1]
        out[: n - lo_k] = suffix[lo_k:]
        return out
    width = hi_k - lo_k + 1
    padded = np.concatenate([x[lo_k:], np.full(width - 1, identity)])
    out[: n - lo_k] = reduce(sliding_window_view(padded, width)[: n - lo_k], axis=1)
    return out


def _until(left, right, lo_k, hi_k, combine_min, combine_max, bottom, top):
    n = len(left)
    last = n - 1 if hi_k is None else min(hi_k, n - 1)
    acc = np.full(n, bottom)
    running = np.full(n, top)
    for d in range(0, last + 1):
        m = n - d
        running[:m] = combine_min(running[:m], left[d:])
        if d >= lo_k:
            cand = combine_min(right[d:], running[:m])
            acc[:m] = combine_max(acc[:m], cand)
    acc[max(n - lo_k, 0):] = np.nan
    return acc


def _rho(node, trace, b):
    n = len(trace)
    if isinstance(node, TrueF):
        return np.full(n, np.inf)
    if isinstance(node, Predicate):
        x = trace[node.signal]
        if isinstance(node.rhs, Label):
            return np.where(x == node.rhs.value, np.inf, -np.inf)
        c = _rhs_value(node, b)
        if node.op in (">", ">="):
            return x - c
        if node.op in ("<", "<="):
            return c - x
        return -np.abs(x - c)
    if isinstance(node, Not):
        return -_rho(node.arg, trace, b)
    if isinstance(node, And):
        return np.minimum(_rho(node.left, trace, b), _rho(node.right, trace, b))
    if isinstance(node, Or):
        return np.maximum(_rho(node.left, trace, b), _rho(node.right, trace, b))
    if isinstance(node, Implies):
        return np.maximum(-_rho(node.left, trace, b), _rho(node.right, trace, b))
    if isinstance(node, Always):
        lo_k, hi_k = window_offsets(node.lo, node.hi, trace.dt)
        return _reduce_window(_rho(node.arg, trace, b), lo_k, hi_k, np.min, np.inf)
    if isinstance(node, Eventually):
        lo_k, hi_k = window_offsets(node.lo, node.hi, trace.dt)
        return _reduce_window(_rho(node.arg, trace, b), lo_k, hi_k, np.max, -np.inf)
    if isinstance(node, Until):
        lo_k, hi_k = window_offsets(node.lo, node.hi, trace.dt)
        return _until(_rho(node.left, trace, b), _rho(node.right, trace, b),
                      lo_k, hi_k, np.minimum, np.maximum, -np.inf, np.inf)
    raise TypeError(f"not a formula node: {node!r}")


# Boolean signals are encoded as 1.0 / 0.0 with NaN for "undefined" so the
# same window machinery applies (min = for-all, max = exists).
def _sat(node, trace, b):
    n = len(trace)
    if isinstance(node, TrueF):
        return np.ones(n)
    if isinstance(node, Predicate):
        x = trace[node.signal]
        if isinstance(node.rhs, Label):
            return (x == node.rhs.value).astype(float)
        c = _rhs_value(node, b)
        if node.op == ">":
            r = x > c
        elif node.op == ">=":
            r = x >= c
        elif node.op == "<":
            r = x < c
        elif node.op == "<=":
            r = x <= c
        else:
            r = x == c
        return r.astype(float)
    if isinstance(node, Not):
        return 1.0 - _sat(node.arg, trace, b)
    if isinstance(node, And):
        return np.minimum(_sat(node.left, trace, b), _sat(node.right, trace, b))
    if isinstance(node, Or):
        return np.maximum(_sat(node.left, trace, b), _sat(node.right, trace, b))
    if isinstance(node, Implies):
        return np.maximum(1.0 - _sat(node.left, trace, b), _sat(node.right, trace, b))
    if isinstance(node, Always):
        lo_k, hi_k = window_offsets(node.lo, node.hi, trace.dt)
        return _reduce_window(_sat(node.arg, trace, b), lo_k, hi_k, np.min, 1.0)
    if isinstance(node, Eventually):
        lo_k, hi_k = window_offsets(node.lo, node.hi, trace.dt)
        return _reduce_window(_sat(node.arg, trace, b), lo_k, hi_k, np.max, 0.0)
    if isinstance(node, Until):
        lo_k, hi_k = window_offsets(node.lo, node.hi, trace.dt)
        return _until(_sat(node.left, trace, b), _sat(node.right, trace, b),
                      lo_k, hi_k, np.minimum, np.maximum, 0.0, 1.0)
    raise TypeError(f"not a formula node: {node!r}")


def _pick(values, t, n):
    if not 0 <= t < n:
        raise IndexError(f"sample index {t} outside trace of length {n}")
    v = values[t]
    if np.isnan(v):
        raise EmptyWindowError(f"evaluation window at index {t} lies past the end of the trace")
    return float(v)


def robustness_signal(phi, trace, bindings=None):
    """Robustness at every sample index; NaN where a window is empty."""
    return _rho(phi, trace, bindings or {})


def robustness(phi, trace, t=0, bindings=None):
    """Quantitative robustness of ``phi`` on ``trace`` at sample index ``t``."""
    return _pick(_rho(phi, trace, bindings or {}), t, len(trace))


def satisfies(phi, trace, t=0, bindings=None):
    """Boolean satisfaction, evaluated directly rather than via robustness."""
    return _pick(_sat(phi, trace, bindings or {}), t, len(trace)) == 1.0
