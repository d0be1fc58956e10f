"""Longitudinal vehicle model approaching a signalized intersection.

The hybrid state couples a saturated double integrator (distance to the stop
line and speed) with a fixed-cycle traffic light G -> Y -> R -> G whose clock
``t_el`` resets on every color change.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from driverbound.trace import Trace

log = logging.getLogger(__name__)

NEXT_LIGHT = {"G": "Y", "Y": "R", "R": "G"}
_CLOCK_EPS = 1e-9


@dataclass(frozen=True)
class LightSchedule:
    green: float = 30.0
    yellow: float = 3.5
    red: float = 30.0
    phase_offset: float = 0.0

    def __post_init__(self):
        if min(self.green, self.yellow, self.red) <= 0:
            raise ValueError("light durations must be positive")

    def duration(self, color):
        return {"G": self.green, "Y": self.yellow, "R": self.red}[color]

    @property
    def cycle(self):
        return self.green + self.yellow + self.red

    def at(self, t):
        """Light color and time since its onset at absolute time ``t``."""
        s = (t - self.phase_offset) % self.cycle
        for color in "GYR":
            d = self.duration(color)
            if s < d - _CLOCK_EPS:
                return color, s
            s -= d
        return "G", 0.0


@dataclass(frozen=True)
class SimConfig:
    """Model ranges and constants; every field may be overridden from JSON."""

    d_max: float = 300.0
    v_max: float = 30.0
    queue_length: float = 12.0
    dt: float = 0.1
    u_phys: tuple = (-10.0, 3.0)
    u_falsify: tuple = (-6.0, 3.0)
    schedule: LightSchedule = field(default_factory=LightSchedule)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "schedule" in d:
            d["schedule"] = LightSchedule(**d["schedule"])
        for k in ("u_phys", "u_falsify"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def limits(self):
        from driverbound.trace import Limits
        return Limits(self.d_max, self.v_max, *self.u_phys)


@dataclass(frozen=True)
class HybridState:
    d_x: float
    v_x: float
    t_el: float
    l_q: float
    s_TL: str

    def __post_init__(self):
        if self.s_TL not in NEXT_LIGHT:
            raise ValueError(f"invalid light state {self.s_TL!r}")


def initial_state(d_x, v_x, s_TL, t_el=0.0, config=SimConfig()):
    """A consistent state: clamped ranges and the queue implied by the light."""
    d = min(max(float(d_x), 0.0), config.d_max)
    v = min(max(float(v_x), 0.0), config.v_max)
    lq = min(config.queue_length, d) if s_TL == "R" else 0.0
    return HybridState(d, v, float(t_el), lq, s_TL)


@dataclass(frozen=True)
class InputSignal:
    """Acceleration held constant (or linearly interpolated) over equal segments."""

    segment_duration: float
    values: tuple
    interpolation: str = "constant"

    def __post_init__(self):
        if not self.segment_duration > 0:
            raise ValueError("segment_duration must be positive")
        if self.interpolation not in ("constant", "linear"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("input needs at least one segment")

    @property
    def duration(self):
        return self.segment_duration * len(self.values)

    def at(self, t):
        x = t / self.segment_duration
        if self.interpolation == "constant":
            i = min(int(math.floor(x + _CLOCK_EPS)), len(self.values) - 1)
            return self.values[i]
        # Knots at segment starts, held after the last knot.
        return float(np.interp(x, np.arange(len(self.values)), self.values))

    def check_range(self, lo, hi):
        bad = [v for v in self.values if not lo - 1e-12 <= v <= hi + 1e-12]
        if bad:
            raise ValueError(f"input values {bad} outside [{lo}, {hi}]")


def clamp_input(u, config=SimConfig()):
    lo, hi = config.u_phys
    return min(max(u, lo), hi)


def step(state, u, dt, schedule=None, config=SimConfig()):
    """One forward-Euler step; ``u`` is clamped to the physical input range."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    schedule = schedule or config.schedule
    u = clamp_input(u, config)
    d = max(0.0, state.d_x - state.v_x * dt)
    v = min(max(state.v_x + u * dt, 0.0), config.v_max)
    color, t_el = state.s_TL, state.t_el + dt
    dur = schedule.duration(color)
    while t_el >= dur - _CLOCK_EPS:
        t_el -= dur
        color = NEXT_LIGHT[color]
        dur = schedule.duration(color)
    t_el = max(t_el, 0.0)
    lq = min(config.queue_length, d) if color == "R" else 0.0
    return HybridState(d, v, t_el, lq, color)


def simulate(x0, signal, horizon, dt=None, schedule=None, config=SimConfig()):
    """Roll the model forward for ``horizon`` seconds and record every sample."""
    dt = config.dt if dt is None else dt
    if signal.duration < horizon - 1e-9:
        raise ValueError(f"input covers {signal.duration} s, shorter than horizon {horizon} s")
    n = int(round(horizon / dt)) + 1
    rows = np.empty((n, 5))
    lights = []
    clamped = 0
    lo, hi = config.u_phys
    s = x0
    for k in range(n):
        u_raw = signal.at(k * dt)
        if not lo <= u_raw <= hi:
            clamped += 1
        u = clamp_input(u_raw, config)
        rows[k] = (s.d_x, s.v_x, s.t_el, s.l_q, u)
        lights.append(s.s_TL)
        if k < n - 1:
            s = step(s, u, dt, schedule, config)
    if clamped:
        log.warning("clamped %d input samples to the physical range", clamped)
    cols = {"d_x": rows[:, 0], "v_x": rows[:, 1], "t_el": rows[:, 2],
            "l_q": rows[:, 3], "s_TL": lights, "u": rows[:, 4]}
    return Trace(dt, cols, meta={"clamped_inputs": clamped})


def state_at(trace, k):
    return HybridState(float(trace["d_x"][k]), float(trace["v_x"][k]),
                       float(trace["t_el"][k]), float(trace["l_q"][k]), str(trace["s_TL"][k]))


def with_light(state, s_TL, t_el, config=SimConfig()):
    lq = min(config.queue_length, state.d_x) if s_TL == "R" else 0.0
    return replace(state, s_TL=s_TL, t_el=t_el, l_q=lq)
