"""Random formulas and traces shared by property tests and acceptance checks."""

import numpy as np
from hypothesis import strategies as st

from driverbound.stl.formula import (
    Always, And, Eventually, Implies, Label, Not, Or, Param, Predicate, TrueF,
    Until,
)
from driverbound.trace import Trace

NUMERIC = ("d_x", "v_x", "t_el", "u")
OPS = ("<", "<=", ">", ">=", "==")


def random_trace(rng, n, dt=0.1):
    # Values on a coarse grid so that ties (zero robustness) actually occur.
    cols = {
        "d_x": rng.integers(0, 6, n) * 1.0,
        "v_x": rng.choice([0.0, 1.0, 2.0, 2.5, 4.0], n),
        "t_el": rng.integers(0, 4, n) * 0.5,
        "l_q": np.zeros(n),
        "s_TL": rng.choice(list("GYR"), n),
        "u": rng.uniform(-3, 3, n).round(1),
    }
    return Trace(dt, cols)


def _interval(rng, dt):
    lo = int(rng.integers(0, 4)) * dt
    hi = lo + int(rng.integers(0, 6)) * dt
    if rng.random() < 0.1:
        hi = np.inf
    return lo, hi


def random_formula(rng, depth, dt=0.1, params=()):
    if depth <= 1 or rng.random() < 0.2:
        r = rng.random()
        if r < 0.05:
            return TrueF()
        if r < 0.25:
            return Predicate("s_TL", "==", Label(str(rng.choice(list("GYR")))))
        sig = str(rng.choice(NUMERIC))
        op = str(rng.choice(OPS))
        if params and rng.random() < 0.3:
            return Predicate(sig, op, Param(str(rng.choice(params))))
        return Predicate(sig, op, float(rng.integers(0, 5)))
    kind = rng.integers(0, 7)
    sub = lambda: random_formula(rng, depth - 1, dt, params)  # noqa: E731
    if kind == 0:
        return Not(sub())
    if kind == 1:
        return And(sub(), sub())
    if kind == 2:
        return Or(sub(), sub())
    if kind == 3:
        return Implies(sub(), sub())
    lo, hi = _interval(rng, dt)
    if kind == 4:
        return Always(lo, hi, sub())
    if kind == 5:
        return Eventually(lo, hi, sub())
    return Until(lo, hi, sub(), sub())


# Hypothesis strategy for parse/print round trips.
_number = st.one_of(
    st.integers(-50, 50).map(float),
    st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False),
)
_nonneg = st.one_of(st.integers(0, 20).map(float), st.floats(0, 100, allow_nan=False))


@st.composite
def _interval_st(draw):
    lo = draw(_nonneg)
    hi = draw(st.one_of(st.just(np.inf), _nonneg.map(lambda w: lo + w)))
    return lo, hi


_atoms = st.one_of(
    st.just(TrueF()),
    st.builds(Predicate, st.sampled_from(NUMERIC), st.sampled_from(OPS), _number),
    st.builds(Predicate, st.sampled_from(NUMERIC), st.sampled_from(OPS),
              st.sampled_from(["nu", "delta", "tau"]).map(Param)),
    st.builds(Predicate, st.just("s_TL"), st.just("=="), st.sampled_from("GYR").map(Label)),
)


def _extend(children):
    binary = st.sampled_from([And, Or, Implies])
    unary_t = st.sampled_from([Always, Eventually])
    return st.one_of(
        st.builds(Not, children),
        st.builds(lambda c, a, b: c(a, b), binary, children, children),
        st.builds(lambda c, iv, a: c(iv[0], iv[1], a), unary_t, _interval_st(), children),
        st.builds(lambda iv, a, b: Until(iv[0], iv[1], a, b), _interval_st(), children, children),
    )


formulas = st.recursive(_atoms, _extend, max_leaves=12)
