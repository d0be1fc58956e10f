"""Set of next accelerations a trained classifier labels as human.

Given a 3-second history, the final input ``u(T)`` is swept over the
physical range; every value with ``p_H >= 0.5`` is accepted.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from driverbound.classifier import FeatureWindow, window_extract

U_PHYS = (-10.0, 3.0)
DEFAULT_STEP = 0.1
REFINE_TOL = 1e-3


@dataclass
class BoundQuery:
    history: FeatureWindow
    network: object
    u_min: float = U_PHYS[0]
    u_max: float = U_PHYS[1]
    step: float = DEFAULT_STEP

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not U_PHYS[0] <= self.u_min < self.u_max <= U_PHYS[1]:
            raise ValueError(f"sweep range must lie within {U_PHYS}")

    def sweep(self):
        n = int(np.floor((self.u_max - self.u_min) / self.step + 1e-9))
        u = np.round(self.u_min + self.step * np.arange(n + 1), 12)
        return u


@dataclass
class HumanInputSet:
    accepted: list
    lower_bound: float = None       # None when no input is accepted
    upper_bound: float = None
    contiguous: bool = True
    refined_lower_bound: float = None
    diagnostic: str = ""
    p_human: list = field(default_factory=list, repr=False)

    @property
    def empty(self):
        return not self.accepted

    def to_dict(self):
        return {"accepted": self.accepted, "lower_bound": self.lower_bound,
                "upper_bound": self.upper_bound, "contiguous": self.contiguous,
                "refined_lower_bound": self.refined_lower_bound,
                "diagnostic": self.diagnostic}


def _with_input(frames, u):
    out = np.repeat(frames[None], len(u), axis=0)
    out[:, -1, -1] = u
    return out


def query_bound(q, refine=False):
    """Sweep ``u(T)`` and collect the values classified as human."""
    net = q.network
    h = q.history
    if h.frames.shape != (7, 4):
        raise ValueError("history must be a (7, 4) window")
    if net.light_state is not None and h.light_state != net.light_state:
        raise ValueError(f"network trained for light {net.light_state!r}, "
                         f"history is under {h.light_state!r}")
    u = q.sweep()
    p_h = net.proba(_with_input(h.frames, u))[:, 1]
    ok = p_h >= 0.5
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return HumanInputSet([], diagnostic="no input classified as human",
                             p_human=p_h.tolist())
    res = HumanInputSet(
        accepted=u[idx].tolist(),
        lower_bound=float(u[idx[0]]),
        upper_bound=float(u[idx[-1]]),
        contiguous=bool(np.all(np.diff(idx) == 1)),
        p_human=p_h.tolist(),
    )
    if refine:
        res.refined_lower_bound = _refine_lower(h.frames, net, u, idx[0])
    return res


def _refine_lower(frames, net, u, first):
    """Bisect between the last rejected and the first accepted sweep value."""
    if first == 0:
        return float(u[0])
    bad, good = float(u[first - 1]), float(u[first])
    while good - bad > REFINE_TOL:
        mid = 0.5 * (good + bad)
        if net.proba(_with_input(frames, np.array([mid])))[0, 1] >= 0.5:
            good = mid
        else:
            bad = mid
    return good


def evaluate_conservativeness(networks, traces, step=DEFAULT_STEP):
    """Compare queried lower bounds with the realized next acceleration.

    ``networks`` maps light state (``G``/``R``) to a trained network.
    """
    rows = []
    for i, tr in enumerate(traces):
        if tr.label not in (None, "human"):
            raise ValueError("held-out traces must be human")
        for light, net in sorted(networks.items()):
            try:
                windows = window_extract(tr, light, require_label=False, source=i)
            except ValueError:
                continue
            for w in windows:
                res = query_bound(BoundQuery(w, net, step=step))
                rows.append({
                    "trace": i, "end_index": w.end_index, "light": light,
                    "actual_u": w.next_input, "physical_limit": U_PHYS[0],
                    "lower_bound": res.lower_bound, "upper_bound": res.upper_bound,
                    "contiguous": res.contiguous,
                })
    if not rows:
        raise ValueError("no extractable windows in the held-out traces")
    n = len(rows)
    nonempty = [r for r in rows if r["lower_bound"] is not None]
    covered = [r for r in nonempty if r["lower_bound"] <= r["actual_u"] + 1e-12]
    tightened = [r for r in nonempty if r["lower_bound"] > U_PHYS[0]]
    report = {
        "windows": n,
        "coverage": len(covered) / n,
        "empty_fraction": 1 - len(nonempty) / n,
        "tightened_fraction": len(tightened) / n,
        "mean_lower_bound": float(np.mean([r["lower_bound"] for r in nonempty])) if nonempty else None,
        "mean_tightening": float(np.mean([r["lower_bound"] - U_PHYS[0] for r in nonempty])) if nonempty else None,
        "per_light": {},
    }
    for light in sorted(networks):
        sub = [r for r in rows if r["light"] == light]
        if sub:
            ne = [r for r in sub if r["lower_bound"] is not None]
            report["per_light"][light] = {
                "windows": len(sub),
                "coverage": sum(r["lower_bound"] <= r["actual_u"] + 1e-12 for r in ne) / len(sub),
                "tightened_fraction": sum(r["lower_bound"] > U_PHYS[0] for r in ne) / len(sub),
            }
    return report, rows


def plot_rows_csv(rows):
    """Per-window plot data: actual input, physical limit, queried bounds."""
    buf = io.StringIO()
    keys = ["trace", "end_index", "light", "actual_u", "physical_limit", "lower_bound", "upper_bound"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for r in rows:
        w.writerow(["" if r[k] is None else (f"{r[k]:.9g}" if isinstance(r[k], float) else r[k])
                    for k in keys])
    return buf.getvalue()
