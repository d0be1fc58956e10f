import json

import numpy as np
import pytest

from driverbound.cli import (
    EXIT_BAD_DATA, EXIT_CONFIG, EXIT_MISSING_INPUT, EXIT_OK, build_parser, config_hash,
    load_config, main,
)
from driverbound.corpus import save_corpus
from driverbound.trace import Trace, save_trace


def speed_trace(vmax, n=30):
    v = np.linspace(10, vmax, n)
    return Trace(0.1, dict(d_x=np.full(n, 200.0), v_x=v, t_el=np.arange(n) * 0.1,
                           l_q=np.zeros(n), s_TL=["G"] * n, u=np.zeros(n)), label="human")


def test_monitor_prints_robustness(tmp_path, capsys):
    n = 31
    tr = Trace(0.1, dict(d_x=np.full(n, 100.0), v_x=np.full(n, 20.0), t_el=np.zeros(n),
                         l_q=np.zeros(n), s_TL=["G"] * n, u=np.zeros(n)))
    save_trace(tr, tmp_path / "t.csv")
    code = main(["monitor", "--formula", "alw_[0,3](v_x < 25.5)", "--trace", str(tmp_path / "t.csv")])
    assert code == EXIT_OK
    assert capsys.readouterr().out.strip() == "5.5"


def test_mine_vlimit(tmp_path, capsys):
    save_corpus([speed_trace(m) for m in (18.0, 22.3, 25.4)], tmp_path / "c")
    code = main(["mine", "--template", "vlimit", "--corpus", str(tmp_path / "c"),
                 "--eps", "0.01", "--out-dir", str(tmp_path / "m")])
    assert code == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert abs(out["points"][0]["nu"] - 25.4) <= 0.01
    saved = json.loads((tmp_path / "m" / "frontier_vlimit.json").read_text())
    assert saved["seed"] == 0 and saved["config_hash"]
    assert (tmp_path / "m" / "frontier_vlimit.csv").read_text().startswith("nu\n")
    assert (tmp_path / "m" / "manifest.json").exists()


def test_missing_trace_exit_code(tmp_path, capsys):
    code = main(["monitor", "--formula", "v_x > 0", "--trace", str(tmp_path / "none.csv")])
    assert code == EXIT_MISSING_INPUT
    err = json.loads(capsys.readouterr().err)
    assert err["exit_code"] == EXIT_MISSING_INPUT and err["error"] == "FileNotFoundError"


def test_bad_formula_exit_code(tmp_path, capsys):
    save_trace(speed_trace(20), tmp_path / "t.csv")
    assert main(["monitor", "--formula", "alw_[0,1] (", "--trace", str(tmp_path / "t.csv")]) == EXIT_BAD_DATA


def test_unknown_config_key(tmp_path, capsys):
    (tmp_path / "c.json").write_text('{"mining": {"epsilon": 0.1}}')
    save_trace(speed_trace(20), tmp_path / "t.csv")
    code = main(["monitor", "--config", str(tmp_path / "c.json"), "--formula", "v_x > 0",
                 "--trace", str(tmp_path / "t.csv")])
    assert code == EXIT_CONFIG


def test_flags_override_config(tmp_path):
    (tmp_path / "c.json").write_text('{"mining": {"eps": 0.5}}')
    cfg = load_config(tmp_path / "c.json", {("mining", "eps"): 0.02})
    assert cfg["mining"]["eps"] == 0.02
    assert config_hash(cfg) != config_hash(load_config(tmp_path / "c.json"))


def test_help_documents_exit_codes():
    text = build_parser().format_help()
    for code in range(9):
        assert f"  {code}  " in text
