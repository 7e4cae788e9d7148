import csv
import json
import shutil
import subprocess

import numpy as np
import pytest
from scipy.signal import argrelmin

from spinshape import __version__
from spinshape import cli
from spinshape import config as cfg

FIGURE_PRESETS = ["fig1b", "fig1c", "fig1d", "fig2a", "fig2b", "fig3a", "fig3c", "fig4"]


def write(tmp_path, doc, name="config.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def read_csv(path):
    lines = path.read_text().splitlines()
    meta = [ln for ln in lines if ln.startswith("#")]
    rows = list(csv.DictReader(ln for ln in lines if not ln.startswith("#")))
    return meta, rows


def run(*args):
    return cli.main([str(a) for a in args])


@pytest.fixture(autouse=True)
def no_seed_env(monkeypatch):
    monkeypatch.delenv(cfg.SEED_ENV, raising=False)


# --------------------------------------------------------------------------- configuration


def test_presets_cover_figures_and_validate():
    table = cfg.presets()
    assert set(FIGURE_PRESETS) <= set(table)
    for name in table:
        doc = cfg.resolve(None, name)
        assert doc["gate"]["family"] in ("identity", "rx", "cz", "swap")


def test_schema_rejects_unknown_keys():
    with pytest.raises(cfg.ConfigError, match=r"\$\.system.*'colour' was unexpected"):
        cfg.resolve({"gate": {"family": "identity", "t_g": 1.0}, "system": {"colour": "red"}})


def test_merge_replaces_lists_and_merges_objects():
    base = {"a": {"x": 1, "y": [1, 2]}, "b": None}
    out = cfg.merge(base, {"a": {"y": [3]}, "b": {"c": 1}})
    assert out == {"a": {"x": 1, "y": [3]}, "b": {"c": 1}}
    assert base["a"]["y"] == [1, 2]


def test_axis_values_linear_log_and_explicit():
    assert cfg.axis_values({"path": "a", "min": 0, "max": 1, "count": 3}) == [0.0, 0.5, 1.0]
    np.testing.assert_allclose(cfg.axis_values({"path": "a", "min": 1e-3, "max": 1e-1, "count": 3, "scale": "log"}),
                               [1e-3, 1e-2, 1e-1])
    assert cfg.axis_values({"path": "a", "values": ["x", "y"]}) == ["x", "y"]


def test_sweep_grid_is_row_major():
    doc = {"gate": {"family": "identity", "t_g": 1.0},
           "sweep": {"axes": [{"path": "gate.t_g", "values": [1.0, 2.0]},
                              {"path": "signal.enabled", "values": [False, True]}]}}
    paths, grid = cfg.sweep_points(cfg.resolve(doc))
    assert paths == ["gate.t_g", "signal.enabled"]
    assert grid == [(1.0, False), (1.0, True), (2.0, False), (2.0, True)]


def test_fmt_round_trips_floats():
    for x in (0.1, 1 / 3, 158.39999999999998, 6e-05, -2.5e-300):
        assert float(cli.fmt(x)) == x
    assert cli.fmt(True) == "true" and cli.fmt({"b": 1, "a": 2}) == '{"a":2,"b":1}'


# --------------------------------------------------------------------------- simulate


def test_identity_gate_has_unit_fidelity(tmp_path):
    cfg_path = write(tmp_path, {"gate": {"family": "identity", "t_g": 12.0}, "signal": {"enabled": False}})
    assert run("simulate", "--config", cfg_path, "--out", tmp_path / "out") == 0
    res = json.loads((tmp_path / "out" / "result.json").read_text())
    assert res["result"]["fidelity"] == 1.0
    assert res["version"] == __version__
    assert res["config_hash"] == cfg.config_hash(res["config"])


def test_kaiser_point_at_25ns_below_1e4(tmp_path):
    cfg_path = write(tmp_path, {"gate": {"t_g": 25.0, "window": {"kind": "kaiser", "lam": 5.8}}})
    assert run("simulate", "--preset", "fig1c", "--config", cfg_path, "--out", tmp_path) == 0
    res = json.loads((tmp_path / "result.json").read_text())["result"]
    assert res["infidelity"] <= 1e-4
    assert set(res["channel_rates"]) == {"axis-q1", "crosstalk-q2"}


def test_pulse_csv_written_on_request(tmp_path):
    cfg_path = write(tmp_path, {"gate": {"family": "rx", "t_g": 10.0}, "output": {"pulse_csv": True, "prefix": "r"}})
    assert run("simulate", "--config", cfg_path, "--out", tmp_path / "o") == 0
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["r.json", "r_pulse.csv"]


@pytest.mark.parametrize("text, needle", [
    ('{"gate": {"family": "rx", "t_g": 10.0}', "line 1 column"),
    ('{"gate": {"family": "rx", "t_g": -1.0}}', "$.gate.t_g"),
    ('{"gate": {"family": "teleport", "t_g": 1.0}}', "$.gate.family"),
    ('[1, 2]', "top level"),
])
def test_corrupted_config_exits_2_without_output(tmp_path, capsys, text, needle):
    p = tmp_path / "bad.json"
    p.write_text(text)
    out = tmp_path / "out"
    assert run("simulate", "--config", p, "--out", out) == 2
    assert needle in capsys.readouterr().err
    assert not out.exists()


def test_missing_config_and_unknown_preset_exit_2(tmp_path, capsys):
    assert run("simulate", "--config", tmp_path / "nope.json", "--out", tmp_path / "o") == 2
    assert run("simulate", "--preset", "fig9", "--out", tmp_path / "o") == 2
    assert "unknown preset" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_exchange_gate_without_model_exits_2(tmp_path):
    p = write(tmp_path, {"gate": {"family": "cz", "t_g": 40.0}})
    assert run("simulate", "--config", p, "--out", tmp_path / "o") == 2


def test_numerical_failure_exits_3(tmp_path, capsys):
    # a saturating exchange capped far below the exchange a 5 ns CZ needs
    doc = {"system": {"exchange": {"kind": "saturating", "J_sat": 1e-3, "alpha": 0.1, "J_res": 1e-6}},
           "gate": {"family": "cz", "t_g": 5.0, "mode": "full"}}
    assert run("simulate", "--config", write(tmp_path, doc), "--out", tmp_path / "o") == 3
    assert "numerical failure" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_seed_env_overrides_config_seed(tmp_path, monkeypatch):
    doc = {"system": {"exchange": {"kind": "exponential", "J0": 6e-5, "alpha": 0.1}},
           "gate": {"family": "cz", "t_g": 40.0}, "noise": {"charge_amp": 0.05},
           "sim": {"realizations": 8, "seed": 3}}
    p = write(tmp_path, doc)
    assert run("simulate", "--config", p, "--out", tmp_path / "a") == 0
    monkeypatch.setenv(cfg.SEED_ENV, "11")
    assert run("simulate", "--config", p, "--out", tmp_path / "b") == 0
    a = json.loads((tmp_path / "a" / "result.json").read_text())
    b = json.loads((tmp_path / "b" / "result.json").read_text())
    assert b["config"]["sim"]["seed"] == 11 and a["config"]["sim"]["seed"] == 3
    assert a["config_hash"] != b["config_hash"]
    assert a["result"]["infidelity"] != b["result"]["infidelity"]
    monkeypatch.setenv(cfg.SEED_ENV, "eleven")
    assert run("simulate", "--config", p, "--out", tmp_path / "c") == 2


# --------------------------------------------------------------------------- sweep


def test_one_point_sweep_equals_simulate(tmp_path):
    doc = {"gate": {"family": "rx", "t_g": 21.0, "window": {"kind": "hann"}},
           "sweep": {"axes": [{"path": "gate.t_g", "values": [21.0]}]}}
    p = write(tmp_path, doc)
    assert run("simulate", "--config", p, "--out", tmp_path) == 0
    assert run("sweep", "--config", p, "--out", tmp_path) == 0
    single = json.loads((tmp_path / "result.json").read_text())["result"]
    _, rows = read_csv(tmp_path / "result_sweep.csv")
    assert len(rows) == 1
    assert float(rows[0]["infidelity"]) == single["infidelity"]
    assert float(rows[0]["rate_crosstalk-q2"]) == single["channel_rates"]["crosstalk-q2"]


def test_sweep_csv_reproducible_and_parallel_matches_serial(tmp_path):
    doc = {"system": {"exchange": {"kind": "exponential", "J0": 6e-5, "alpha": 0.1}},
           "gate": {"family": "cz", "t_g": 40.0}, "noise": {"charge_amp": 0.05},
           "sim": {"realizations": 6, "seed": 2},
           "sweep": {"axes": [{"path": "gate.t_g", "values": [30.0, 40.0]},
                              {"path": "noise.charge_amp", "min": 0.01, "max": 0.1, "count": 2, "scale": "log"}]}}
    p = write(tmp_path, doc)
    assert run("sweep", "--config", p, "--out", tmp_path / "a") == 0
    assert run("sweep", "--config", p, "--out", tmp_path / "b") == 0
    assert run("sweep", "--config", p, "--out", tmp_path / "c", "--jobs", "2") == 0
    texts = [(tmp_path / d / "result_sweep.csv").read_bytes() for d in "abc"]
    assert texts[0] == texts[1] == texts[2]
    meta, rows = read_csv(tmp_path / "a" / "result_sweep.csv")
    assert meta[0] == f"# spinshape {__version__}"
    assert meta[1] == f"# config_hash {cfg.config_hash(cfg.resolve(doc))}"
    assert [(r["gate.t_g"], r["noise.charge_amp"]) for r in rows] == [
        ("30.0", "0.01"), ("30.0", "0.1"), ("40.0", "0.01"), ("40.0", "0.1")]
    assert all(r["realizations"] == "6" for r in rows)


def test_fig2a_rect_column_minima_at_cz_sync_times(tmp_path):
    over = {"sweep": {"axes": [{"path": "gate.window.lam", "values": [0.0]},
                               {"path": "gate.t_g", "min": 6.0, "max": 42.0, "count": 361}]},
            "output": {"channel_rates": False}}
    assert run("sweep", "--preset", "fig2a", "--config", write(tmp_path, over), "--out", tmp_path) == 0
    _, rows = read_csv(tmp_path / "result_sweep.csv")
    t = np.array([float(r["gate.t_g"]) for r in rows])
    v = np.array([float(r["infidelity"]) for r in rows])
    minima = t[argrelmin(v)[0]]
    for m in range(1, 5):
        expected = np.sqrt(4 * m * m - 1) / (2 * 0.1)
        assert np.min(np.abs(minima - expected)) <= 0.02 * expected


# --------------------------------------------------------------------------- sync / shape / predict


def test_sync_table_values(tmp_path, capsys):
    p = write(tmp_path, {"system": {"dEz": 0.1}})
    assert run("sync", "--config", p, "--out", tmp_path) == 0
    assert "9.6825" in capsys.readouterr().out
    _, rows = read_csv(tmp_path / "result_sync.csv")
    first = {(r["family"], r["gate"], r["m"]): float(r["t_g_ns"]) for r in rows}
    assert first[("rx", "pi/2", "1")] == pytest.approx(9.6825, abs=1e-4)
    assert first[("rx", "pi/2", "2")] == pytest.approx(19.8431, abs=1e-4)
    assert first[("cz", "pi", "1")] == pytest.approx(8.6603, abs=1e-4)


def test_sync_halves_when_dEz_doubles():
    a = cli.sync_rows(0.1)
    b = cli.sync_rows(0.2)
    np.testing.assert_allclose([r["t_g_ns"] for r in b], [r["t_g_ns"] / 2 for r in a], rtol=1e-14)


def _shape(tmp_path, preset=None, doc=None):
    args = ["shape", "--out", tmp_path]
    if preset:
        args += ["--preset", preset]
    if doc is not None:
        args += ["--config", write(tmp_path, doc)]
    assert run(*args) == 0
    _, rows = read_csv(tmp_path / "result_pulse.csv")
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def test_shape_cz_voltage_endpoints_at_baseline(tmp_path):
    cols = _shape(tmp_path, "fig2b", {"gate": {"t_g": 40.0}})
    t, v = cols["t_ns"], cols["v_b_mv"]
    assert v[0] == 0.0
    assert v[np.argmin(np.abs(t - 40.0))] == pytest.approx(0.0, abs=1e-9)
    assert np.all(v[t > 40.0] == 0.0)
    assert cols["J_ghz"].max() > 1e-2
    assert np.max(np.abs(cols["v_b_mv_filtered"] - v)) > 0


def test_shape_drag_quadrature_changes_sign_at_peak(tmp_path):
    cols = _shape(tmp_path, doc={"gate": {"family": "rx", "t_g": 20.0, "shaping": "drag"}, "signal": {"enabled": False}})
    x, y, t = cols["bx_ghz"], cols["by_ghz"], cols["t_ns"]
    k = int(np.argmax(x))
    assert t[k] == pytest.approx(10.0, abs=0.02)
    left, right = y[1:k - 2], y[k + 3:-1]
    assert np.all(np.sign(left) == np.sign(left[len(left) // 2]))
    assert np.all(np.sign(right) == -np.sign(left[len(left) // 2]))


def test_shape_swap_bessel_phase_nonzero_and_continuous(tmp_path):
    cols = _shape(tmp_path, "fig3a", {"gate": {"phase_mode": "bessel"}})
    th = cols["theta_j_rad"]
    assert np.max(np.abs(th)) > 0.1
    assert np.max(np.abs(np.diff(th))) < 1e-2 * np.max(np.abs(th))
    none = _shape(tmp_path, "fig3a", {"gate": {"phase_mode": "none"}})
    assert not np.any(none["theta_j_rad"])


def test_predict_conversion(tmp_path):
    assert cli.converted_gate_time(40.0, 0.396, 0.1) == pytest.approx(158.4, rel=1e-12)
    assert cli.converted_gate_time(40.0, 0.1, 0.1) == 40.0
    doc = {"system": {"exchange": {"kind": "exponential", "J0": 6e-5, "alpha": 0.1}},
           "gate": {"family": "identity", "t_g": 1.0}, "predict": {"t_g": 40.0, "dEz_foreign": 0.1}}
    assert run("predict", "--config", write(tmp_path, doc), "--out", tmp_path) == 0
    res = json.loads((tmp_path / "result_predict.json").read_text())["result"]
    assert res["t_g_converted"] == 40.0
    assert "noisy_infidelity" not in res


def test_predict_requires_section(tmp_path):
    p = write(tmp_path, {"gate": {"family": "identity", "t_g": 1.0}})
    assert run("predict", "--config", p, "--out", tmp_path / "o") == 2


@pytest.mark.skipif(shutil.which("spinshape") is None, reason="console script not installed")
def test_console_entry_point(tmp_path):
    p = write(tmp_path, {"system": {"dEz": 0.2}})
    out = subprocess.run(["spinshape", "sync", "--config", str(p), "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert "4.8412" in out.stdout
