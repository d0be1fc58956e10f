import numpy as np
import pytest

from driverbound.corpus import load_corpus, save_corpus
from driverbound.human import (
    GENEROUS_VALUATIONS, DriverProfile, drive, generate_corpus, satisfies_generous,
)
from driverbound.sim import LightSchedule, SimConfig, initial_state
from driverbound.trace import TraceError, load_trace, save_trace


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(30, seed=3)


def test_noise_free_driver_settles_at_desired_speed():
    cfg = SimConfig(schedule=LightSchedule(green=1e6))
    p = DriverProfile(desired_speed=15.0, noise_std=0.0)
    tr = drive(p, initial_state(290, 8, "G", 0.0, cfg), 25.0, cfg)
    assert abs(tr["v_x"][-1] - 15.0) < 1e-3
    late = tr["v_x"][-50:]
    assert np.ptp(late) < 1e-2


def test_driver_stops_before_red_light():
    p = DriverProfile(desired_speed=15.0, noise_std=0.0)
    tr = drive(p, initial_state(60, 15, "R", 5.0), 20.0)
    assert tr["v_x"][-1] == 0.0
    assert tr["d_x"][-1] >= tr["l_q"][-1]


def test_zero_traces_rejected():
    with pytest.raises(ValueError):
        generate_corpus(0)


def test_seeded_corpus_is_reproducible():
    a = generate_corpus(5, seed=11)
    b = generate_corpus(5, seed=11)
    for x, y in zip(a, b):
        assert np.array_equal(x["v_x"], y["v_x"])
        assert list(x["s_TL"]) == list(y["s_TL"])


def test_every_trace_meets_ranges_and_generous_valuations(corpus):
    lim = SimConfig().limits()
    for tr in corpus:
        assert tr.label == "human"
        tr.check_ranges(lim)
        assert satisfies_generous(tr, GENEROUS_VALUATIONS)


def test_corpus_round_trip(tmp_path, corpus):
    save_corpus(corpus[:10], tmp_path / "c", {"seed": 3})
    back = load_corpus(tmp_path / "c")
    assert len(back) == 10
    for a, b in zip(corpus, back):
        assert b.label == "human"
        for k in ("d_x", "v_x", "t_el", "l_q", "u"):
            assert np.allclose(a[k], b[k], atol=1e-6, rtol=0)
        assert list(a["s_TL"]) == list(b["s_TL"])


def _write(tmp_path, lines):
    p = tmp_path / "t.csv"
    p.write_text("t,d_x,v_x,t_el,l_q,s_TL,u\n" + "\n".join(lines) + "\n")
    return p


def test_unknown_light_rejected(tmp_path):
    p = _write(tmp_path, ["0,50,10,0,0,G,0", "0.1,49,10,0.1,0,B,0"])
    with pytest.raises(TraceError):
        load_trace(p)


def test_non_uniform_timestamps_rejected(tmp_path):
    p = _write(tmp_path, ["0,50,10,0,0,G,0", "0.1,49,10,0.1,0,G,0", "0.25,48,10,0.2,0,G,0"])
    with pytest.raises(TraceError, match="non-uniform"):
        load_trace(p)


def test_out_of_range_speed_rejected(tmp_path):
    p = _write(tmp_path, ["0,50,31,0,0,G,0", "0.1,47,31,0.1,0,G,0"])
    with pytest.raises(TraceError):
        load_trace(p)


def test_single_trace_round_trip(tmp_path, corpus):
    save_trace(corpus[0], tmp_path / "x.csv")
    back = load_trace(tmp_path / "x.csv")
    assert back.dt == pytest.approx(0.1)
    assert len(back) == len(corpus[0])
