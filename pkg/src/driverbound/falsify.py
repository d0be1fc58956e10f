"""Counterexample generation by robustness minimization over input signals."""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from driverbound.optim import cma_es, nelder_mead
from driverbound.sim import (
    HybridState, InputSignal, SimConfig, initial_state, simulate, state_at,
)
from driverbound.stl import Always, robustness, robustness_signal, to_string
from driverbound.trace import Trace

log = logging.getLogger(__name__)

SOLVERS = ("cmaes", "neldermead")
_CLIP = 1e6


@dataclass(frozen=True)
class FalsificationProblem:
    formula: object
    x0: HybridState
    u_range: tuple = (-6.0, 3.0)
    segments: int = 6
    segment_duration: float = 0.5
    horizon: float = 3.0
    solver: str = "cmaes"
    budget: int = 300
    accept_threshold: float = 0.0
    accept_band: float = None    # keep only robustness in [-band, threshold]
    min_distance: float = 1.0
    seed: int = 0
    sigma0: float = None
    interpolation: str = "constant"
    config: SimConfig = field(default_factory=SimConfig)
    formula_id: str = ""
    params: dict = field(default_factory=dict)
    history: Trace = None        # observed samples leading up to x0 (last one is x0)

    def __post_init__(self):
        lo, hi = self.u_range
        if not lo < hi:
            raise ValueError("u_range must satisfy lo < hi")
        if self.segments * self.segment_duration < self.horizon - 1e-9:
            raise ValueError("segments * segment_duration must cover the horizon")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")
        if self.accept_threshold > 0:
            raise ValueError("accept_threshold must be <= 0")
        if self.formula.parameters():
            raise ValueError(f"formula has unbound parameters {self.formula.parameters()}")

    def signal(self, values):
        return InputSignal(self.segment_duration, tuple(values), self.interpolation)

    def run(self, values):
        return simulate(self.x0, self.signal(values), self.horizon, config=self.config)

    def evaluate(self, values):
        return robustness(self.formula, self.run(values), 0)

    def accepts(self, rho):
        if not (rho < 0 and rho <= self.accept_threshold):
            return False
        return self.accept_band is None or rho >= -self.accept_band


@dataclass
class Counterexample:
    trace: object
    input: InputSignal
    robustness: float
    formula_id: str
    params: dict
    x0: HybridState
    solver: str
    seed: int
    formula: object = None
    history: Trace = None
    violation_index: int = 0     # first violating sample of ``trace``

    @property
    def history_len(self):
        """Samples prepended by :meth:`joined` before ``trace`` starts."""
        return 0 if self.history is None else len(self.history) - 1

    def joined(self):
        """History followed by the falsifying rollout, as one trace."""
        if self.history is None:
            return self.trace
        h = self.history
        cols = {k: np.concatenate([h[k][:-1], self.trace[k]]) for k in self.trace.columns}
        return Trace(self.trace.dt, cols, h.t0, self.trace.label)

    def revalidate(self, horizon=None, config=SimConfig()):
        """Re-simulate the stored input and recompute robustness."""
        horizon = self.trace.duration if horizon is None else horizon
        tr = simulate(self.x0, self.input, horizon, dt=self.trace.dt, config=config)
        return robustness(self.formula, tr, 0)

    def manifest_entry(self):
        return {
            "formula": self.formula_id,
            "formula_text": to_string(self.formula) if self.formula is not None else None,
            "params": self.params,
            "x0": asdict(self.x0),
            "input": list(self.input.values),
            "segment_duration": self.input.segment_duration,
            "interpolation": self.input.interpolation,
            "robustness": self.robustness,
            "violation_index": self.violation_index,
            "history_samples": self.history_len,
            "solver": self.solver,
            "seed": self.seed,
        }


def _solve(problem, objective):
    lo, hi = problem.u_range
    dim = problem.segments
    bounds = [(lo, hi)] * dim
    rng = np.random.default_rng(problem.seed)
    x_init = rng.uniform(lo, hi, dim)
    if problem.solver == "cmaes":
        sigma0 = problem.sigma0 or 0.3 * (hi - lo)
        cma_es(objective, x_init, sigma0, bounds, problem.budget, seed=problem.seed)
    else:
        nelder_mead(objective, x_init, bounds, problem.budget)


def first_violation(formula, trace):
    """Index of the first sample at which an outer ``alw_[0, ...]`` body is violated."""
    if isinstance(formula, Always) and formula.lo == 0:
        body = robustness_signal(formula.arg, trace)
        bad = np.flatnonzero(body < 0)
        if bad.size:
            return int(bad[0])
    return 0


def falsify(problem, stop_on_first=False):
    """All evaluated inputs whose robustness is accepted, after the diversity filter.

    An empty list is a legitimate outcome: the search is not complete.
    """
    candidates = []

    class _Found(Exception):
        pass

    def objective(x):
        tr = problem.run(x)
        rho = robustness(problem.formula, tr, 0)
        if problem.accepts(rho):
            candidates.append(Counterexample(
                tr.with_label("non-human"), problem.signal(x), rho, problem.formula_id,
                dict(problem.params), problem.x0, problem.solver, problem.seed, problem.formula,
                problem.history, first_violation(problem.formula, tr)))
            if stop_on_first:
                raise _Found
        return float(np.clip(rho, -_CLIP, _CLIP))

    try:
        _solve(problem, objective)
    except _Found:
        pass
    return diversity_filter(candidates, problem.min_distance)


def diversity_filter(candidates, min_distance):
    """Greedy selection by ascending robustness, keeping inputs at least
    ``min_distance`` apart in Euclidean distance."""
    if min_distance < 0:
        raise ValueError("min_distance must be non-negative")
    kept, kept_x = [], []
    for c in sorted(candidates, key=lambda c: c.robustness):
        x = np.asarray(c.input.values)
        if all(np.linalg.norm(x - k) >= min_distance for k in kept_x):
            kept.append(c)
            kept_x.append(x)
    return kept


def pool_diversity(candidates):
    """Mean pairwise Euclidean distance between candidate inputs."""
    xs = np.array([c.input.values for c in candidates])
    if len(xs) < 2:
        return 0.0
    d = np.linalg.norm(xs[:, None, :] - xs[None, :, :], axis=-1)
    return float(d[np.triu_indices(len(xs), 1)].mean())


# Initial-condition grids: light fixed per template, t_el chosen so that the
# template's antecedent can hold, (d_x, v_x) spread around its thresholds.
def default_x0_grid(template_id, point, config=SimConfig(), n=5):
    vmax = config.v_max
    nu = point.get("nu", 15.0)
    if template_id == "vlimit":
        light, t_el = "G", 0.0
        ds = np.linspace(100.0, 250.0, n)
        vs = np.linspace(max(nu - 8.0, 0.0), min(nu - 0.5, vmax), n)
    elif template_id == "green":
        light, t_el = "G", point["tau"] + 0.1
        ds = np.linspace(point["delta"] + 10.0, point["delta"] + 100.0, n)
        vs = np.linspace(nu + 1.0, nu + 10.0, n)
    elif template_id == "yellow":
        light, t_el = "Y", 0.6
        ds = np.linspace(point["delta"] + 5.0, point["delta"] + 60.0, n)
        vs = np.linspace(point["nu0"] + 0.5, point["nu0"] + 8.0, n)
    elif template_id == "red":
        light, t_el = "R", point["tau"] + 0.1
        ds = np.linspace(max(point["delta"] - 10.0, 2.0), point["delta"] + 20.0, n)
        vs = np.linspace(max(nu - 4.0, 0.0), nu + 4.0, n)
    else:
        raise ValueError(f"no default initial-condition grid for {template_id!r}")
    ds = np.clip(ds, 0.0, config.d_max)
    vs = np.clip(vs, 0.0, vmax)
    return [initial_state(d, v, light, t_el, config) for d in ds for v in vs]


TEMPLATE_LIGHT = {"vlimit": "G", "green": "G", "yellow": "Y", "red": "R"}


def human_x0_grid(traces, template_id, point, n=25, history=3.0, seed=0):
    """Initial states drawn from observed traces, each with its preceding history.

    Candidate samples sit in the template's light state, have ``history``
    seconds of that same light behind them, and satisfy the template's
    time-since-change threshold.  Returns ``(state, history_trace)`` pairs.
    """
    light = TEMPLATE_LIGHT[template_id]
    tau = point.get("tau", 0.5 if template_id == "yellow" else 0.0)
    cands = []
    for i, tr in enumerate(traces):
        span = int(round(history / tr.dt))
        ok = tr["s_TL"] == light
        run = np.zeros(len(tr), dtype=int)
        for k in range(len(tr)):
            run[k] = run[k - 1] + 1 if ok[k] and k else int(ok[k])
        for k in np.flatnonzero((run > span) & (tr["t_el"] > tau)):
            cands.append((i, int(k), span))
    if not cands:
        return []
    rng = np.random.default_rng([seed, len(cands)])
    pick = sorted(rng.choice(len(cands), min(n, len(cands)), replace=False).tolist())
    out = []
    for j in pick:
        i, k, span = cands[j]
        tr = traces[i]
        out.append((state_at(tr, k), tr.slice(k - span, k + 1)))
    return out


@dataclass
class GenerationResult:
    counterexamples: list
    counts: dict
    failures: list
    manifest: dict


def sample_points(points, k, rng):
    if len(points) <= k:
        return list(points)
    idx = sorted(rng.choice(len(points), k, replace=False).tolist())
    return [points[i] for i in idx]


def generate_counterexamples(templates, frontiers, x0_grid=None, solver="cmaes", budget=300,
                             min_distance=1.0, accept_band=None, points_per_formula=5,
                             seed=0, config=SimConfig(), **problem_kw):
    """Falsify every template at sampled frontier points from every initial state.

    ``frontiers`` maps template id to a list of parameter points.  ``x0_grid``
    is either a list of states used for every (template, point) pair or a
    callable ``(template_id, point) -> list``; by default
    :func:`default_x0_grid` is used.  Grid entries are states or
    ``(state, history)`` pairs.
    """
    if not frontiers or not any(frontiers.values()):
        raise ValueError("frontiers must contain at least one parameter point")
    if x0_grid is None:
        x0_grid = lambda tid, p: default_x0_grid(tid, p, config)  # noqa: E731
    grid_fn = x0_grid if callable(x0_grid) else (lambda tid, p: list(x0_grid))
    rng = np.random.default_rng(seed)
    out, failures = [], []
    counts = {}
    cell = 0
    for tid in sorted(frontiers):
        tmpl = templates[tid]
        points = sample_points(frontiers[tid], points_per_formula, rng)
        counts[tid] = 0
        for point in points:
            point = {k: float(v) for k, v in point.items()}
            formula = tmpl.instantiate(point)
            grid = grid_fn(tid, point)
            if not grid:
                log.warning("no initial states for %s at %s", tid, point)
                failures.append({"cell": None, "formula": tid, "error": "empty initial-state grid"})
            for entry in grid:
                x0, hist = entry if isinstance(entry, tuple) else (entry, None)
                cell += 1
                try:
                    problem = FalsificationProblem(
                        formula, x0, history=hist, u_range=config.u_falsify, solver=solver, budget=budget,
                        min_distance=min_distance, accept_band=accept_band,
                        seed=int(np.random.SeedSequence([seed, cell]).generate_state(1)[0]),
                        config=config, formula_id=tid, params=point, **problem_kw)
                    found = falsify(problem)
                except Exception as exc:  # per-cell failures must not stop the sweep
                    log.warning("cell %d (%s, %s) failed: %s", cell, tid, point, exc)
                    failures.append({"cell": cell, "formula": tid, "error": str(exc)})
                    continue
                for j, c in enumerate(found):
                    out.append((tid, c.robustness, cell, j, c))
                counts[tid] += len(found)
    if cell == 0:
        raise ValueError("initial-condition grid is empty")
    out.sort(key=lambda r: r[:4])
    cexs = [r[4] for r in out]
    manifest = {
        "solver": solver,
        "budget": budget,
        "min_distance": min_distance,
        "accept_band": accept_band,
        "points_per_formula": points_per_formula,
        "seed": seed,
        "counts": counts,
        "failures": failures,
        "traces": [c.manifest_entry() for c in cexs],
    }
    return GenerationResult(cexs, counts, failures, manifest)


def negatives_for(result, template_id):
    return [c.trace for c in result.counterexamples if c.formula_id == template_id]
