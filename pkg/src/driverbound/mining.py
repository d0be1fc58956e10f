"""Tight parameter valuations of PSTL templates from positive traces.

For a parameter in which robustness is monotone, satisfaction by a whole
corpus flips at most once along the parameter axis, so the tightest
satisfying value is found by bisection.  Templates with several parameters
are handled by fixing all but one on a grid and searching the remaining one.
"""

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from driverbound.stl import parse, satisfies

DEFAULT_EPS = 0.01
N_PROBES = 8


class MiningError(ValueError):
    pass


class NoFeasibleEndpointError(MiningError):
    pass


class NonMonotoneError(MiningError):
    pass


@dataclass(frozen=True)
class PstlTemplate:
    """A parametric formula plus, per parameter, its monotonicity and search range.

    ``monotonicity[p]`` is ``"increasing"`` when robustness grows with ``p``
    (so large values are the permissive end) and ``"decreasing"`` otherwise.
    """

    id: str
    formula: object
    monotonicity: dict
    bounds: dict
    search_param: str = None
    grid_ranges: dict = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        params = set(self.formula.parameters())
        if set(self.monotonicity) != params or set(self.bounds) != params:
            raise ValueError(f"template {self.id}: monotonicity/bounds must cover {sorted(params)}")
        for p, m in self.monotonicity.items():
            if m not in ("increasing", "decreasing"):
                raise ValueError(f"template {self.id}: bad monotonicity {m!r} for {p}")
        for p, (lo, hi) in self.bounds.items():
            if not lo < hi:
                raise ValueError(f"template {self.id}: empty bounds for {p}")
        if self.search_param is None:
            object.__setattr__(self, "search_param", self.formula.parameters()[-1])

    @property
    def parameters(self):
        return self.formula.parameters()

    @property
    def grid_parameters(self):
        return tuple(p for p in self.parameters if p != self.search_param)

    def default_grid(self, cells=10):
        return {p: np.linspace(*self.grid_ranges.get(p, self.bounds[p]), cells).round(9).tolist()
                for p in self.grid_parameters}

    def instantiate(self, point):
        return self.formula.bind(point)


def builtin_templates():
    """The speed-limit, green, yellow and red light templates, keyed by id."""
    vlimit = PstlTemplate(
        "vlimit",
        parse("param nu; alw_[0,inf] (v_x < nu)"),
        {"nu": "increasing"}, {"nu": (0.0, 40.0)},
        description="never exceed the speed limit",
    )
    green = PstlTemplate(
        "green",
        parse("param delta, tau, nu;"
              "alw_[0,inf] ((s_TL == G) and (d_x > delta) and (t_el > tau) => (v_x > nu))"),
        {"delta": "increasing", "tau": "increasing", "nu": "decreasing"},
        {"delta": (0.0, 300.0), "tau": (0.0, 40.0), "nu": (-1.0, 35.0)},
        grid_ranges={"delta": (10.0, 100.0), "tau": (1.0, 10.0)},
        description="do not drive too slowly on green",
    )
    yellow = PstlTemplate(
        "yellow",
        parse("param delta, nu0, nu;"
              "alw_[0,inf] ((s_TL == Y) and (d_x > delta) and (v_x > nu0) and (t_el > 0.5)"
              " => alw_[0,3] (v_x > nu))"),
        {"delta": "increasing", "nu0": "increasing", "nu": "decreasing"},
        {"delta": (0.0, 300.0), "nu0": (0.0, 35.0), "nu": (-1.0, 35.0)},
        grid_ranges={"delta": (10.0, 100.0), "nu0": (2.0, 20.0)},
        description="decide to pass or stop on yellow",
    )
    red = PstlTemplate(
        "red",
        parse("param delta, tau, nu;"
              "alw_[0,inf] ((s_TL == R) and (d_x < delta) and (t_el > tau) => (v_x < nu))"),
        {"delta": "decreasing", "tau": "increasing", "nu": "increasing"},
        {"delta": (0.0, 300.0), "tau": (0.0, 40.0), "nu": (0.0, 35.0)},
        grid_ranges={"delta": (10.0, 100.0), "tau": (1.0, 10.0)},
        description="drive slowly close to a red light",
    )
    return {t.id: t for t in (vlimit, green, yellow, red)}


def corpus_satisfies(formula, traces, bindings):
    return all(satisfies(formula, tr, 0, bindings) for tr in traces)


@dataclass
class SearchResult:
    value: float            # tightest feasible value found
    infeasible: float       # nearest known infeasible value (None at a bound)
    sweeps: int             # corpus sweeps spent in bisection
    at_bound: bool          # tight end of the range is itself feasible


def search_1d(template, param, fixed, traces, eps=DEFAULT_EPS):
    """Bisection for one parameter; see :func:`find_param_1d`."""
    if param not in template.monotonicity:
        raise MiningError(f"{param!r} is not a parameter of {template.id}")
    missing = set(template.parameters) - set(fixed) - {param}
    if missing:
        raise MiningError(f"parameters {sorted(missing)} are not fixed")
    formula = template.formula.bind({k: v for k, v in fixed.items() if k != param})
    lo, hi = template.bounds[param]
    increasing = template.monotonicity[param] == "increasing"

    def feasible(v):
        return corpus_satisfies(formula, traces, {param: v})

    probes = np.linspace(lo, hi, N_PROBES)
    feas = [feasible(v) for v in probes]
    flips = sum(a != b for a, b in zip(feas, feas[1:]))
    # Order the probes from the tight end to the permissive end.
    if not increasing:
        probes, feas = probes[::-1], feas[::-1]
    if flips > 1 or (flips == 1 and feas[0]):
        raise NonMonotoneError(
            f"satisfaction is not monotone in {param!r} for template {template.id}")
    if not feas[-1]:
        raise NoFeasibleEndpointError(
            f"no feasible value of {param!r} in [{lo}, {hi}] for template {template.id}")
    first = feas.index(True)
    if first == 0:
        return SearchResult(float(probes[0]), None, 0, True)
    good, bad = float(probes[first]), float(probes[first - 1])
    sweeps = 0
    while abs(good - bad) > eps:
        mid = 0.5 * (good + bad)
        sweeps += 1
        if feasible(mid):
            good = mid
        else:
            bad = mid
    return SearchResult(good, bad, sweeps, False)


def find_param_1d(template, param, fixed, traces, eps=DEFAULT_EPS):
    """Tightest value of ``param`` (within ``eps``) such that every trace satisfies."""
    return search_1d(template, param, fixed, traces, eps).value


def max_sweeps(lo, hi, eps):
    return math.ceil(math.log2((hi - lo) / eps)) + 1


@dataclass
class ParetoFrontier:
    template_id: str
    search_param: str
    tolerance: float
    points: list
    diagnostics: dict

    def rows(self, fixed=None):
        """Points whose grid coordinates match ``fixed``."""
        fixed = fixed or {}
        return [p for p in self.points if all(p[k] == v for k, v in fixed.items())]

    def to_dict(self):
        return {"template": self.template_id, "search_param": self.search_param,
                "tolerance": self.tolerance, "points": self.points,
                "diagnostics": self.diagnostics}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(d["template"], d["search_param"], d["tolerance"], d["points"], d["diagnostics"])

    def to_csv(self):
        if not self.points:
            return ""
        keys = list(self.points[0])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for p in self.points:
            w.writerow([f"{p[k]:.9g}" for k in keys])
        return buf.getvalue()


def _check_order(template, point, traces, eps, order):
    """Tighten the grid parameters in ``order`` then re-search; return the new value."""
    sp = template.search_param
    current = dict(point)
    for p in order:
        others = {k: v for k, v in current.items() if k != p}
        current[p] = search_1d(template, p, others, traces, eps).value
    others = {k: v for k, v in current.items() if k != sp}
    return search_1d(template, sp, others, traces, eps).value


def find_frontier(template, traces, grid=None, eps=DEFAULT_EPS, validate_fraction=0.1, seed=0):
    """Frontier of tight valuations over a grid of the non-searched parameters.

    Cells with no feasible value are dropped and counted as ``infeasible``;
    cells whose tight end is feasible (the template never activates there)
    are dropped and counted as ``unconstrained``.  A sample of points is
    re-derived with a different parameter order and compared within 2*eps.
    """
    sp = template.search_param
    if len(template.parameters) < 2:
        raise MiningError(f"template {template.id} has a single parameter; use find_param_1d")
    grid = template.default_grid() if grid is None else grid
    names = template.grid_parameters
    if set(grid) != set(names):
        raise MiningError(f"grid must cover exactly {list(names)}")
    cells = list(itertools.product(*(grid[n] for n in names)))
    if not cells:
        raise MiningError("empty grid")
    points, infeasible, unconstrained, sweeps = [], 0, 0, 0
    for cell in cells:
        fixed = {n: float(v) for n, v in zip(names, cell)}
        try:
            res = search_1d(template, sp, fixed, traces, eps)
        except NoFeasibleEndpointError:
            infeasible += 1
            continue
        sweeps += res.sweeps
        if res.at_bound:
            unconstrained += 1
            continue
        points.append({**fixed, sp: res.value})
    if not points and infeasible == len(cells):
        raise MiningError(f"all {len(cells)} grid cells are infeasible for {template.id}")

    rng = np.random.default_rng(seed)
    n_check = min(len(points), max(1, math.ceil(validate_fraction * len(points)))) if points else 0
    checked = rng.choice(len(points), n_check, replace=False) if n_check else []
    mismatches = []
    for i in sorted(int(j) for j in checked):
        p = points[i]
        order = list(names)
        rng.shuffle(order)
        try:
            again = _check_order(template, p, traces, eps, order)
        except MiningError:
            again = math.nan
        if not abs(again - p[sp]) <= 2 * eps:
            mismatches.append({"point": p, "order": order, "value": again})

    diagnostics = {
        "cells": len(cells),
        "infeasible_cells": infeasible,
        "unconstrained_cells": unconstrained,
        "bisection_sweeps": sweeps,
        "order_checks": n_check,
        "order_mismatches": mismatches,
    }
    return ParetoFrontier(template.id, sp, eps, points, diagnostics)


def mine_vlimit(traces, eps=DEFAULT_EPS):
    t = builtin_templates()["vlimit"]
    return find_param_1d(t, "nu", {}, traces, eps)
