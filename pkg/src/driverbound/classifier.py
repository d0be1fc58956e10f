"""Human vs non-human classifiers over 3-second state/input windows.

Each window holds 7 frames sub-sampled at 2 Hz, ``[X(t-3.0), ..., X(t)]``
with ``X = [d_x, v_x, t_el, u]``.  The MLP sees the flattened 28-vector, the
Elman RNN the 7-step sequence.  Both end in a 2-way softmax whose outputs are
``[p_nH, p_H]``.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

FEATURES = ("d_x", "v_x", "t_el", "u")
N_FRAMES = 7
WINDOW = 3.0
STRIDE = 0.5
FRAME_PERIOD = 0.5
HUMAN, NON_HUMAN = 1, 0
ARCHS = {"MLP-28": ("mlp", 28), "RNN-36": ("rnn", 36)}


class TrainingError(RuntimeError):
    pass


@dataclass
class FeatureWindow:
    frames: np.ndarray          # (7, 4), rows oldest to newest
    label: int | None
    light_state: str
    end_index: int = -1
    source: int = -1

    @property
    def flat(self):
        return self.frames.reshape(-1)

    @property
    def next_input(self):
        return float(self.frames[-1, -1])


def _samples(duration, dt):
    k = duration / dt
    if abs(k - round(k)) > 1e-6:
        raise ValueError(f"{duration} s is not a whole number of {dt} s samples")
    return int(round(k))


def window_extract(trace, light_state, require_label=True, source=-1, first_end=None):
    """Sliding windows (stride 0.5 s) lying entirely in one light state.

    Window ends start at 3 s into the trace, or at sample ``first_end`` if
    given (and at least 3 s in).
    """
    if light_state not in ("G", "R"):
        raise ValueError("classifiers exist for the G and R light states only")
    if require_label and trace.label is None:
        raise ValueError("trace has no label")
    if trace.duration < WINDOW - 1e-9:
        raise ValueError(f"trace of {trace.duration:.2f} s is shorter than the {WINDOW} s window")
    span = _samples(WINDOW, trace.dt)
    stride = _samples(STRIDE, trace.dt)
    frame = _samples(FRAME_PERIOD, trace.dt)
    data = np.column_stack([trace[f] for f in FEATURES])
    in_state = trace["s_TL"] == light_state
    # bad[k] counts samples outside the light state among 0..k-1.
    bad = np.concatenate([[0], np.cumsum(~in_state)])
    label = None if trace.label is None else (HUMAN if trace.label == "human" else NON_HUMAN)
    out = []
    for end in range(max(span, first_end or 0), len(trace), stride):
        start = end - span
        if bad[end + 1] - bad[start]:
            continue
        out.append(FeatureWindow(data[start:end + 1:frame].copy(), label, light_state, end, source))
    return out


def history_window(trace, end, light_state):
    """The window ending at sample ``end`` (its last input is later overwritten)."""
    span = _samples(WINDOW, trace.dt)
    frame = _samples(FRAME_PERIOD, trace.dt)
    start = end - span
    if start < 0 or end >= len(trace):
        raise ValueError("window does not fit inside the trace")
    if np.any(trace["s_TL"][start:end + 1] != light_state):
        raise ValueError("history window spans a light transition")
    data = np.column_stack([trace[f] for f in FEATURES])
    return FeatureWindow(data[start:end + 1:frame].copy(), None, light_state, end)


def stack(windows):
    X = np.stack([w.frames for w in windows]).astype(float)
    y = np.array([w.label for w in windows], dtype=int)
    return X, y


def split_windows(windows, test_fraction=0.2, seed=0):
    """Stratified, seeded train/test split."""
    rng = np.random.default_rng(seed)
    train, test = [], []
    for lab in (NON_HUMAN, HUMAN):
        idx = [i for i, w in enumerate(windows) if w.label == lab]
        rng.shuffle(idx)
        n_test = int(round(test_fraction * len(idx)))
        test += [windows[i] for i in idx[:n_test]]
        train += [windows[i] for i in idx[n_test:]]
    return train, test


def balance(windows, seed=0, ratio=1.0):
    """Down-sample the majority class to at most ``ratio`` times the minority."""
    rng = np.random.default_rng(seed)
    by = {lab: [w for w in windows if w.label == lab] for lab in (NON_HUMAN, HUMAN)}
    cap = int(ratio * min(len(v) for v in by.values()))
    out = []
    for lab in (NON_HUMAN, HUMAN):
        ws = by[lab]
        if len(ws) > cap:
            keep = np.sort(rng.choice(len(ws), cap, replace=False))
            ws = [ws[i] for i in keep]
        out += ws
    return out


# ----------------------------------------------------------------------------
# Networks


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def init_params(kind, hidden, rng, n_in=len(FEATURES), n_frames=N_FRAMES):
    if kind == "mlp":
        d = n_in * n_frames
        return {
            "W1": rng.normal(0, math.sqrt(2.0 / d), (d, hidden)),
            "b1": np.zeros(hidden),
            "W2": rng.normal(0, math.sqrt(1.0 / hidden), (hidden, 2)),
            "b2": np.zeros(2),
        }
    return {
        "Wx": rng.normal(0, math.sqrt(2.0 / n_in), (n_in, hidden)),
        "Wh": 0.5 * np.linalg.qr(rng.normal(size=(hidden, hidden)))[0],
        "bh": np.zeros(hidden),
        "Wo": rng.normal(0, math.sqrt(1.0 / hidden), (hidden, 2)),
        "bo": np.zeros(2),
    }


def mlp_forward(p, X):
    """X: (B, 7, 4) normalized.  Returns logits and a cache for backprop."""
    x = X.reshape(len(X), -1)
    a = x @ p["W1"] + p["b1"]
    h = np.maximum(a, 0.0)
    return h @ p["W2"] + p["b2"], (x, a, h)


def mlp_backward(p, cache, dz):
    x, a, h = cache
    dh = (dz @ p["W2"].T) * (a > 0)
    return {"W1": x.T @ dh, "b1": dh.sum(0), "W2": h.T @ dz, "b2": dz.sum(0)}


def rnn_forward(p, X):
    B, T, _ = X.shape
    hs = [np.zeros((B, p["Wh"].shape[0]))]
    pre = []
    for t in range(T):
        a = X[:, t] @ p["Wx"] + hs[-1] @ p["Wh"] + p["bh"]
        pre.append(a)
        hs.append(np.maximum(a, 0.0))
    return hs[-1] @ p["Wo"] + p["bo"], (X, hs, pre)


def rnn_backward(p, cache, dz):
    X, hs, pre = cache
    g = {k: np.zeros_like(v) for k, v in p.items()}
    g["Wo"] = hs[-1].T @ dz
    g["bo"] = dz.sum(0)
    dh = dz @ p["Wo"].T
    for t in reversed(range(X.shape[1])):
        da = dh * (pre[t] > 0)
        g["Wx"] += X[:, t].T @ da
        g["Wh"] += hs[t].T @ da
        g["bh"] += da.sum(0)
        dh = da @ p["Wh"].T
    return g


_FWD = {"mlp": (mlp_forward, mlp_backward), "rnn": (rnn_forward, rnn_backward)}


def loss_and_grads(kind, params, X, y):
    """Mean categorical cross-entropy and its gradient w.r.t. every parameter."""
    fwd, bwd = _FWD[kind]
    z, cache = fwd(params, X)
    P = softmax(z)
    n = len(y)
    loss = -np.mean(np.log(np.maximum(P[np.arange(n), y], 1e-300)))
    dz = P.copy()
    dz[np.arange(n), y] -= 1.0
    return loss, bwd(params, cache, dz / n)


@dataclass
class TrainConfig:
    hidden: int = None          # default from the architecture tag
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 60
    batch_size: int = 64        # None for full batch
    optimizer: str = "adam"     # or "gd" (plain full-batch gradient descent)
    seed: int = 0
    max_class_ratio: float = 10.0


@dataclass
class Network:
    arch: str
    params: dict
    mean: np.ndarray
    std: np.ndarray
    light_state: str = None
    config: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    @property
    def kind(self):
        return ARCHS[self.arch][0]

    def normalize(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def proba(self, X):
        """Class probabilities ``[p_nH, p_H]`` for a batch of (7, 4) windows."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 2 and X.shape[1] == N_FRAMES * len(FEATURES):
            X = X.reshape(len(X), N_FRAMES, len(FEATURES))
        if X.shape[1:] != (N_FRAMES, len(FEATURES)):
            raise ValueError(f"expected windows of shape (7, 4), got {X.shape[1:]}")
        z, _ = _FWD[self.kind][0](self.params, self.normalize(X))
        return softmax(z)

    def to_dict(self):
        return {
            "arch": self.arch,
            "light_state": self.light_state,
            "features": list(FEATURES),
            "shapes": {k: list(v.shape) for k, v in self.params.items()},
            "params": {k: v.tolist() for k, v in self.params.items()},
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "config": self.config,
            "history": self.history,
        }

    @classmethod
    def from_dict(cls, d):
        params = {k: np.asarray(v, dtype=float).reshape(d["shapes"][k]) for k, v in d["params"].items()}
        return cls(d["arch"], params, np.asarray(d["mean"]), np.asarray(d["std"]),
                   d.get("light_state"), d.get("config", {}), d.get("history", []))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def new_network(arch, hidden=None, seed=0, light_state=None):
    kind, default_hidden = ARCHS[arch]
    rng = np.random.default_rng(seed)
    params = init_params(kind, hidden or default_hidden, rng)
    return Network(arch, params, np.zeros(len(FEATURES)), np.ones(len(FEATURES)), light_state)


def predict(net, window):
    """``[p_nH, p_H]`` for one window (FeatureWindow, (7, 4) array or flat 28-vector)."""
    frames = window.frames if isinstance(window, FeatureWindow) else np.asarray(window, dtype=float)
    if frames.size != N_FRAMES * len(FEATURES):
        raise ValueError(f"window has {frames.size} values, expected {N_FRAMES * len(FEATURES)}")
    return net.proba(frames.reshape(1, N_FRAMES, len(FEATURES)))[0]


def train(windows, arch="MLP-28", config=None, light_state=None):
    """Fit a classifier by minimizing cross-entropy with ADAM (or plain GD)."""
    config = config or TrainConfig()
    if arch not in ARCHS:
        raise ValueError(f"unknown architecture {arch!r}")
    X, y = stack(windows)
    counts = np.bincount(y, minlength=2)
    if counts.min() == 0:
        raise TrainingError("training data contains a single class")
    if counts.max() / counts.min() > config.max_class_ratio:
        raise TrainingError(f"class counts {counts.tolist()} exceed ratio "
                            f"{config.max_class_ratio}:1; rebalance the data")
    mean = X.reshape(-1, X.shape[-1]).mean(0)
    std = X.reshape(-1, X.shape[-1]).std(0)
    std[std < 1e-12] = 1.0
    light_state = light_state or windows[0].light_state
    net = new_network(arch, config.hidden, config.seed, light_state)
    net.mean, net.std = mean, std
    net.config = asdict(config)
    Xn = net.normalize(X)
    kind = net.kind
    p = net.params
    m = {k: np.zeros_like(v) for k, v in p.items()}
    v = {k: np.zeros_like(val) for k, val in p.items()}
    rng = np.random.default_rng(config.seed)
    bs = len(y) if config.batch_size is None or config.optimizer == "gd" else config.batch_size
    t = 0
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(y)) if bs < len(y) else np.arange(len(y))
        total = 0.0
        for b, start in enumerate(range(0, len(y), bs)):
            idx = order[start:start + bs]
            loss, g = loss_and_grads(kind, p, Xn[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            total += loss * len(idx)
            t += 1
            for k in p:
                if config.optimizer == "gd":
                    p[k] -= config.lr * g[k]
                    continue
                m[k] = config.beta1 * m[k] + (1 - config.beta1) * g[k]
                v[k] = config.beta2 * v[k] + (1 - config.beta2) * g[k] ** 2
                mhat = m[k] / (1 - config.beta1 ** t)
                vhat = v[k] / (1 - config.beta2 ** t)
                p[k] -= config.lr * mhat / (np.sqrt(vhat) + config.adam_eps)
        history.append(total / len(y))
    net.history = history
    return net


def evaluate(net, windows):
    """Accuracy, confusion matrix (rows true, columns predicted) and mean loss."""
    X, y = stack(windows)
    P = net.proba(X)
    pred = P.argmax(1)
    cm = np.zeros((2, 2), dtype=int)
    np.add.at(cm, (y, pred), 1)
    loss = -np.mean(np.log(np.maximum(P[np.arange(len(y)), y], 1e-300)))
    return {"accuracy": float(np.mean(pred == y)), "confusion": cm.tolist(),
            "loss": float(loss), "n": int(len(y)), "loss_curve": list(net.history)}


def gradient_check(net, X, y, n_weights=200, h=1e-5, seed=0):
    """Largest relative error between backprop and central differences."""
    X = net.normalize(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=int)
    p = net.params
    _, g = loss_and_grads(net.kind, p, X, y)
    slots = [(k, i) for k in sorted(p) for i in range(p[k].size)]
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(slots), min(n_weights, len(slots)), replace=False)
    worst = 0.0
    for j in pick:
        k, i = slots[j]
        flat = p[k].reshape(-1)
        old = flat[i]
        flat[i] = old + h
        fp = loss_and_grads(net.kind, p, X, y)[0]
        flat[i] = old - h
        fm = loss_and_grads(net.kind, p, X, y)[0]
        flat[i] = old
        num = (fp - fm) / (2 * h)
        ana = g[k].reshape(-1)[i]
        err = abs(ana - num) / max(abs(ana), abs(num), 1e-8)
        worst = max(worst, err)
    return worst


def violation_window_end(history_samples, violation_index):
    """End sample of the first window whose final input produced the violation.

    The state at sample k results from the input applied at k - 1, so the
    first non-human window ends one sample before the first violation.
    """
    return history_samples + max(violation_index - 1, 0)


def counterexample_windows(counterexamples, light_state, first_only=False):
    """Non-human windows from the first violation onward.

    Counterexamples that carry an observed history are joined to it, so the
    window shows the human lead-in followed by the falsifying input.
    """
    out = []
    for i, c in enumerate(counterexamples):
        first = violation_window_end(c.history_len, c.violation_index)
        try:
            ws = window_extract(c.joined(), light_state, source=i, first_end=first)
        except ValueError:
            continue
        out.extend(ws[:1] if first_only else ws)
    return out
