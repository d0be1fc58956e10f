"""Uniformly sampled vehicle traces and their CSV representation."""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

CHANNELS = ("d_x", "v_x", "t_el", "l_q", "s_TL", "u")
NUMERIC_CHANNELS = ("d_x", "v_x", "t_el", "l_q", "u")
LIGHT_LABELS = ("G", "Y", "R")
LABELS = ("human", "non-human")

DT_TOLERANCE = 1e-9


class TraceError(ValueError):
    """Malformed trace data (shape, sampling, or channel ranges)."""


@dataclass(frozen=True)
class Limits:
    """Physical ranges used to validate traces."""

    d_max: float = 300.0
    v_max: float = 30.0
    u_min: float = -10.0
    u_max: float = 3.0


@dataclass(frozen=True, eq=False)
class Trace:
    """A time series of vehicle state and input sampled every ``dt`` seconds.

    ``columns`` maps channel names to 1-d arrays of equal length.  Numeric
    channels are float arrays; ``s_TL`` holds the strings ``G``, ``Y``, ``R``.
    The arrays are made read-only on construction.
    """

    dt: float
    columns: dict
    t0: float = 0.0
    label: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.dt > 0:
            raise TraceError(f"dt must be positive, got {self.dt}")
        if self.label is not None and self.label not in LABELS:
            raise TraceError(f"unknown label {self.label!r}")
        cols = {}
        n = None
        for name, values in self.columns.items():
            if name == "s_TL":
                arr = np.asarray(values, dtype="<U1")
                bad = set(np.unique(arr)) - set(LIGHT_LABELS)
                if bad:
                    raise TraceError(f"invalid s_TL values {sorted(bad)}")
            else:
                arr = np.asarray(values, dtype=float)
            if arr.ndim != 1:
                raise TraceError(f"channel {name} must be 1-d")
            if n is None:
                n = len(arr)
            elif len(arr) != n:
                raise TraceError(f"channel {name} has length {len(arr)}, expected {n}")
            arr = arr.copy()
            arr.flags.writeable = False
            cols[name] = arr
        if not n:
            raise TraceError("trace must have at least one sample")
        object.__setattr__(self, "columns", cols)

    def __len__(self):
        return len(next(iter(self.columns.values())))

    def __getitem__(self, name):
        return self.columns[name]

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def duration(self):
        return self.dt * (len(self) - 1)

    def with_label(self, label):
        return Trace(self.dt, self.columns, self.t0, label, dict(self.meta))

    def slice(self, start, stop):
        """Samples ``start:stop`` as a new trace (time origin shifted)."""
        cols = {k: v[start:stop] for k, v in self.columns.items()}
        return Trace(self.dt, cols, self.t0 + start * self.dt, self.label, dict(self.meta))

    def check_ranges(self, limits=Limits(), tol=1e-9):
        """Raise TraceError if any channel leaves its physical range."""
        c = self.columns
        for name in CHANNELS:
            if name not in c:
                raise TraceError(f"missing channel {name}")
        for name in NUMERIC_CHANNELS:
            if not np.all(np.isfinite(c[name])):
                raise TraceError(f"non-finite values in {name}")
        if np.any(c["d_x"] < -tol) or np.any(c["d_x"] > limits.d_max + tol):
            raise TraceError("d_x outside [0, d_max]")
        if np.any(c["v_x"] < -tol) or np.any(c["v_x"] > limits.v_max + tol):
            raise TraceError("v_x outside [0, v_max]")
        if np.any(c["t_el"] < -tol):
            raise TraceError("t_el negative")
        if np.any(c["l_q"] < -tol) or np.any(c["l_q"] > c["d_x"] + tol):
            raise TraceError("l_q outside [0, d_x]")
        if np.any(c["u"] < limits.u_min - tol) or np.any(c["u"] > limits.u_max + tol):
            raise TraceError("u outside physical input range")


def trace_to_csv(trace):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("t",) + CHANNELS)
    times = trace.times
    for k in range(len(trace)):
        row = [f"{times[k]:.9g}"]
        for name in CHANNELS:
            v = trace[name][k]
            row.append(v if name == "s_TL" else f"{v:.9g}")
        w.writerow(row)
    return buf.getvalue()


def trace_from_csv(text, label=None, limits=Limits()):
    """Parse the CSV trace format; dt is inferred from the first two rows."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TraceError("empty CSV") from None
    header = [h.strip() for h in header]
    if header != ["t", *CHANNELS]:
        raise TraceError(f"bad header {header}")
    rows = [r for r in reader if r]
    if len(rows) < 2:
        raise TraceError("need at least two rows to infer dt")
    t = []
    data = {name: [] for name in CHANNELS}
    for lineno, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise TraceError(f"line {lineno}: expected {len(header)} fields, got {len(r)}")
        try:
            t.append(float(r[0]))
            for name, v in zip(CHANNELS, r[1:]):
                data[name].append(v.strip() if name == "s_TL" else float(v))
        except ValueError as exc:
            raise TraceError(f"line {lineno}: {exc}") from None
    t = np.array(t)
    dt = t[1] - t[0]
    if not dt > 0:
        raise TraceError("timestamps must increase")
    steps = np.diff(t)
    if np.any(np.abs(steps - dt) > DT_TOLERANCE):
        k = int(np.argmax(np.abs(steps - dt)))
        raise TraceError(f"non-uniform sampling at row {k + 2}")
    trace = Trace(float(dt), data, t0=float(t[0]), label=label)
    trace.check_ranges(limits)
    return trace


def save_trace(trace, path):
    with open(path, "w", newline="") as fh:
        fh.write(trace_to_csv(trace))


def load_trace(path, label=None, limits=Limits()):
    with open(path) as fh:
        return trace_from_csv(fh.read(), label=label, limits=limits)
