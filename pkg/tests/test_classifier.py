import math

import numpy as np
import pytest

from driverbound.classifier import (
    FeatureWindow, Network, TrainConfig, TrainingError, balance, evaluate, gradient_check,
    loss_and_grads, new_network, predict, softmax, split_windows, stack, train,
    window_extract,
)
from driverbound.trace import Trace


def trace(seconds, lights=None, label="human", dt=0.1):
    n = int(round(seconds / dt)) + 1
    lights = lights or ["G"] * n
    return Trace(dt, dict(d_x=np.linspace(200, 150, n), v_x=np.full(n, 12.0),
                          t_el=np.arange(n) * dt, l_q=np.zeros(n), s_TL=lights,
                          u=np.zeros(n)), label=label)


def test_three_second_trace_gives_one_window():
    ws = window_extract(trace(3.0), "G")
    assert len(ws) == 1
    assert ws[0].frames.shape == (7, 4)


def test_five_second_trace_gives_five_windows():
    assert len(window_extract(trace(5.0), "G")) == 5


def test_window_across_light_change_dropped():
    lights = ["G"] * 36 + ["Y"] * 15
    ws = window_extract(trace(5.0, lights), "G")
    assert [w.end_index for w in ws] == [30, 35]


def test_first_end_skips_early_windows():
    ws = window_extract(trace(5.0), "G", first_end=42)
    assert [w.end_index for w in ws] == [42, 47]


def test_frames_are_two_hertz():
    ws = window_extract(trace(3.0), "G")
    assert np.allclose(ws[0].frames[:, 2], np.arange(7) * 0.5)


def test_short_trace_rejected():
    with pytest.raises(ValueError):
        window_extract(trace(2.0), "G")


def random_batch(rng, n):
    return rng.normal(size=(n, 7, 4)), rng.integers(0, 2, n)


@pytest.mark.parametrize("arch,tol", [("MLP-28", 1e-4), ("RNN-36", 1e-3)])
def test_gradient_check(arch, tol):
    rng = np.random.default_rng(0)
    X, y = random_batch(rng, 16)
    assert gradient_check(new_network(arch, seed=1), X, y) < tol


@pytest.mark.parametrize("arch,tol", [("MLP-28", 1e-4), ("RNN-36", 1e-3)])
def test_gradient_check_single_sample(arch, tol):
    rng = np.random.default_rng(1)
    X, y = random_batch(rng, 1)
    err = gradient_check(new_network(arch, seed=2), X, y)
    assert math.isfinite(err) and err < tol


@pytest.mark.parametrize("arch", ["MLP-28", "RNN-36"])
def test_zero_weights_give_even_odds(arch):
    net = new_network(arch)
    for k in net.params:
        net.params[k][...] = 0.0
    assert np.array_equal(predict(net, np.ones((7, 4))), [0.5, 0.5])


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(3)
    for arch in ("MLP-28", "RNN-36"):
        net = new_network(arch, seed=4)
        P = net.proba(rng.normal(scale=5, size=(50, 7, 4)))
        assert np.all((P >= 0) & (P <= 1))
        assert np.max(np.abs(P.sum(1) - 1)) <= 1e-12
    z = rng.normal(scale=300, size=(20, 2))
    assert np.max(np.abs(softmax(z).sum(1) - 1)) <= 1e-12


def toy_windows(n=200, seed=0):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, (n, 2))
    labels = (pts[:, 0] + 0.5 * pts[:, 1] > 0).astype(int)
    out = []
    for p, lab in zip(pts, labels):
        f = np.zeros((7, 4))
        f[-1, :2] = p
        out.append(FeatureWindow(f, int(lab), "G"))
    return out


@pytest.mark.parametrize("arch", ["MLP-28", "RNN-36"])
def test_separable_toy_is_learned(arch):
    ws = toy_windows()
    net = train(ws, arch, TrainConfig(epochs=200, batch_size=32, lr=1e-2))
    assert evaluate(net, ws)["accuracy"] >= 0.99


def test_identical_inputs_with_mixed_labels():
    ws = [FeatureWindow(np.ones((7, 4)), i % 2, "G") for i in range(40)]
    net = train(ws, "MLP-28", TrainConfig(epochs=30))
    m = evaluate(net, ws)
    assert m["accuracy"] == 0.5
    assert m["loss"] >= math.log(2) - 1e-6


def test_full_batch_gd_ignores_order():
    ws = toy_windows(60, seed=5)
    cfg = TrainConfig(optimizer="gd", lr=0.05, epochs=20)
    a = train(ws, "MLP-28", cfg)
    b = train(ws[::-1], "MLP-28", cfg)
    for k in a.params:
        assert np.allclose(a.params[k], b.params[k], rtol=0, atol=1e-12)


def test_small_step_gd_decreases_loss():
    ws = toy_windows(80, seed=6)
    net = new_network("MLP-28", seed=0)
    X, y = stack(ws)
    losses = []
    for _ in range(51):
        loss, g = loss_and_grads("mlp", net.params, X, y)
        losses.append(loss)
        for k in net.params:
            net.params[k] -= 1e-4 * g[k]
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_seeded_training_is_reproducible():
    ws = toy_windows(100, seed=7)
    a = train(ws, "RNN-36", TrainConfig(epochs=5, seed=9))
    b = train(ws, "RNN-36", TrainConfig(epochs=5, seed=9))
    for k in a.params:
        assert np.array_equal(a.params[k], b.params[k])


def test_model_file_round_trip(tmp_path):
    ws = toy_windows(50)
    net = train(ws, "MLP-28", TrainConfig(epochs=3), light_state="G")
    net.save(tmp_path / "m.json")
    back = Network.load(tmp_path / "m.json")
    X, _ = stack(ws)
    assert np.array_equal(net.proba(X), back.proba(X))
    assert back.arch == "MLP-28" and back.light_state == "G"


def test_imbalanced_classes_rejected():
    ws = toy_windows(200)
    pos = [w for w in ws if w.label == 1]
    neg = [w for w in ws if w.label == 0][:5]
    with pytest.raises(TrainingError, match="rebalance"):
        train(pos + neg, "MLP-28", TrainConfig(epochs=1))


def test_single_class_rejected():
    with pytest.raises(TrainingError):
        train([w for w in toy_windows() if w.label == 1], "MLP-28")


def test_balance_and_split():
    ws = toy_windows(200)
    pos = [w for w in ws if w.label == 1]
    neg = [w for w in ws if w.label == 0][:20]
    b = balance(pos + neg)
    assert sum(w.label for w in b) == 20 and len(b) == 40
    tr, te = split_windows(b, 0.25, seed=1)
    assert len(te) == 10 and sum(w.label for w in te) == 5
