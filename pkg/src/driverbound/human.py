"""Rule-based synthetic human drivers, standing in for naturalistic data.

The traces produced here are plausible, template-satisfying positive examples
and nothing more: they do not reproduce the statistics of any real dataset.
"""

import logging
from dataclasses import asdict, dataclass

import numpy as np

from driverbound.sim import NEXT_LIGHT, SimConfig, initial_state, step
from driverbound.trace import Trace

log = logging.getLogger(__name__)

# Generous template valuations every emitted trace must satisfy.
GENEROUS_VALUATIONS = {
    "vlimit": {"nu": 28.5},
    "green": {"delta": 50.0, "tau": 10.0, "nu": 0.5},
    "yellow": {"delta": 100.0, "nu0": 15.0, "nu": 0.0},
    "red": {"delta": 20.0, "tau": 5.0, "nu": 12.0},
}

STANDOFF = 1.0  # m kept behind the queue when stopping
RESAMPLE_CAP = 20


class CorpusGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DriverProfile:
    desired_speed: float = 15.0
    speed_gain: float = 0.5
    comfort_decel: float = 3.0
    yellow_stop_margin: float = 1.2
    reaction_delay: float = 0.8
    noise_std: float = 0.1
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.desired_speed <= 30.0:
            raise ValueError("desired_speed must lie in (0, v_max]")
        if not 0 < self.comfort_decel <= 10.0:
            raise ValueError("comfort_decel must lie in (0, 10]")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")


@dataclass(frozen=True)
class ProfileDistribution:
    """Independent uniform ranges for each profile field."""

    desired_speed: tuple = (12.0, 19.0)
    speed_gain: tuple = (0.3, 0.8)
    comfort_decel: tuple = (2.5, 4.0)
    yellow_stop_margin: tuple = (1.0, 1.5)
    reaction_delay: tuple = (0.5, 1.2)
    noise_std: tuple = (0.05, 0.3)

    def sample(self, rng):
        kw = {k: float(rng.uniform(*v)) for k, v in asdict(self).items()}
        return DriverProfile(**kw, rng_seed=int(rng.integers(2**31)))


def _noise(rng, std):
    if std == 0:
        return 0.0
    return float(np.clip(rng.normal(0.0, std), -2 * std, 2 * std))


def drive(profile, x0, horizon, config=SimConfig(), rng=None):
    """Roll out one driver from ``x0`` until the horizon or the stop line."""
    rng = rng if rng is not None else np.random.default_rng(profile.rng_seed)
    p = profile
    dt = config.dt
    lo, hi = config.u_phys
    target = config.queue_length + STANDOFF
    prev_color = {v: k for k, v in NEXT_LIGHT.items()}
    mode = "cruise"
    n_max = int(round(horizon / dt)) + 1
    rows, lights = [], []
    s = x0
    for k in range(n_max):
        seen = s.s_TL if s.t_el >= p.reaction_delay else prev_color[s.s_TL]
        if seen == "G":
            mode = "cruise"
        elif seen == "Y" and mode == "cruise":
            stopping = s.v_x ** 2 / (2 * p.comfort_decel) * p.yellow_stop_margin
            mode = "stop" if stopping < s.d_x - target else "go"
        elif seen == "R" and mode != "go":
            mode = "stop"

        if mode == "stop":
            remaining = s.d_x - target
            if s.v_x <= 0.0:
                u = 0.0
            elif s.v_x < 0.3 or remaining <= 0.05:
                u = -s.v_x / dt
            else:
                need = s.v_x ** 2 / (2 * remaining)
                if need >= 0.6 * p.comfort_decel:
                    u = -min(need, p.comfort_decel) + _noise(rng, p.noise_std)
                else:
                    u = min(p.speed_gain * (p.desired_speed - s.v_x), 0.5) + _noise(rng, p.noise_std)
        elif mode == "go":
            u = _noise(rng, p.noise_std)
        else:
            u = p.speed_gain * (p.desired_speed - s.v_x) + _noise(rng, p.noise_std)
        u = min(max(u, lo), hi)
        rows.append((s.d_x, s.v_x, s.t_el, s.l_q, u))
        lights.append(s.s_TL)
        if s.d_x <= 0.0 or k == n_max - 1:
            break
        s = step(s, u, dt, config.schedule, config)
    rows = np.array(rows)
    cols = {"d_x": rows[:, 0], "v_x": rows[:, 1], "t_el": rows[:, 2],
            "l_q": rows[:, 3], "s_TL": lights, "u": rows[:, 4]}
    return Trace(dt, cols, label="human", meta={"profile": asdict(profile)})


def _sample_x0(rng, profile, config):
    sched = config.schedule
    color, t_el = sched.at(float(rng.uniform(0, sched.cycle)))
    d0 = float(rng.uniform(80.0, 280.0))
    v0 = profile.desired_speed * float(rng.uniform(0.85, 1.05))
    return initial_state(d0, v0, color, t_el, config)


def satisfies_generous(trace, valuations=GENEROUS_VALUATIONS):
    from driverbound.mining import builtin_templates
    from driverbound.stl import satisfies

    for tid, tmpl in builtin_templates().items():
        if not satisfies(tmpl.formula, trace, 0, valuations[tid]):
            return False
    return True


def generate_corpus(n, distribution=ProfileDistribution(), horizon=40.0, seed=0,
                    config=SimConfig(), min_duration=3.0):
    """``n`` human-labelled traces, each satisfying the generous valuations."""
    if n < 1:
        raise ValueError("n must be at least 1")
    streams = np.random.SeedSequence(seed).spawn(n)
    traces = []
    for i, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        for attempt in range(RESAMPLE_CAP):
            profile = distribution.sample(rng)
            x0 = _sample_x0(rng, profile, config)
            tr = drive(profile, x0, horizon, config, rng)
            if tr.duration >= min_duration - 1e-9 and satisfies_generous(tr):
                break
        else:
            raise CorpusGenerationError(
                f"trace {i}: no acceptable rollout after {RESAMPLE_CAP} attempts; "
                "check the profile distribution against the light schedule")
        traces.append(tr)
    return traces


def corpus_metadata(n, distribution, horizon, seed, config):
    return {
        "generator": "rule-based synthetic driver",
        "n": n,
        "seed": seed,
        "horizon": horizon,
        "profile_distribution": asdict(distribution),
        "sim_config": config.to_dict(),
        "generous_valuations": GENEROUS_VALUATIONS,
    }
