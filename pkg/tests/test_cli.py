import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from gravchannel.cli import CSV_COLUMNS, SWEEP_COLUMNS, main
from gravchannel.config import ConfigError, ExperimentConfig


def _write(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _ktm(**over):
    cfg = {
        "model": {"type": "ktm", "params": {"K": 0.5, "m": 1, "omega": 1, "minimized_gamma": True}},
        "engine": "moments",
        "t_max": 20,
        "n_outputs": 41,
        "predict": "growth",
    }
    cfg.update(over)
    return cfg


def _dktm(alpha=0.1, **over):
    cfg = {
        "model": {
            "type": "dissipative_ktm",
            "params": {"K": 0.3, "m": 1, "omega": 1, "alpha": alpha, "minimized_gamma": True},
        },
        "engine": "moments",
        "t_max": 5,
        "n_outputs": 6,
        "predict": "asymptote",
    }
    cfg.update(over)
    return cfg


def test_simulate_writes_series_and_summary(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--config", _write(tmp_path, _ktm()), "--out", str(out)]) == 0
    with open(out / "series.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 42 and all(len(r) == len(CSV_COLUMNS) for r in rows)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["prediction"]["growth_rate"] == pytest.approx(0.5)
    assert summary["relative_deviation"] < 1e-6
    assert "runtime_s" not in summary
    assert json.loads((out / "timing.json").read_text())["runtime_s"] > 0


def test_series_energy_split_sums(tmp_path):
    out = tmp_path / "out"
    main(["simulate", "--config", _write(tmp_path, _ktm(t_max=2, n_outputs=3)), "--out", str(out)])
    with open(out / "series.csv") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        assert float(r["E_cm"]) + float(r["E_rel"]) == pytest.approx(float(r["E_total"]), rel=1e-12)


def test_malformed_json_exit_1_and_no_output(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(path), "--out", str(out)]) == 1
    assert not out.exists()


@pytest.mark.parametrize(
    "mutate",
    [
        lambda c: c.update(engine="quantum"),
        lambda c: c.update(t_max=-1),
        lambda c: c["model"]["params"].update(d=3.0),
        lambda c: c["model"]["params"].update(bogus=1),
        lambda c: c.update(engine="sse"),
        lambda c: c.update(sweep={"parameter": "K", "values": []}),
    ],
    ids=["engine", "t_max", "K_and_d", "unknown_param", "sse_missing_fields", "empty_sweep"],
)
def test_invalid_configs_exit_1(tmp_path, mutate):
    cfg = _ktm()
    mutate(cfg)
    out = tmp_path / "out"
    assert main(["simulate", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 1
    assert not out.exists()


def test_sse_rejects_non_ktm():
    cfg = {
        "model": {"type": "caldeira", "params": {"m": 1, "omega": 1, "lambda": 0.1, "T": 1}},
        "engine": "sse",
        "t_max": 1,
        "sse": {"n_traj": 100, "dt": 0.01, "master_seed": 0},
    }
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(cfg)


def test_asymptote_without_dissipation_exit_2(tmp_path):
    cfg = _ktm(predict="asymptote")
    assert main(["asymptote", "--config", _write(tmp_path, cfg)]) == 2


def test_asymptote_prints_prediction(tmp_path, capsys):
    assert main(["asymptote", "--config", _write(tmp_path, _dktm())]) == 0
    pred = json.loads(capsys.readouterr().out)["prediction"]
    assert pred["asymptotic_energy"] == pytest.approx(10 + 0.1 * 0.7 / 2 + 0.09 * 1e-3 / 4, rel=1e-14)
    assert pred["asymptote_over_2kB"] == pytest.approx(pred["asymptotic_energy"] / 2)


def test_sweep_records_failures_in_row(tmp_path):
    cfg = _dktm(sweep={"parameter": "alpha", "values": [0.05, 0.1, 0.2, 0.0]})
    out = tmp_path / "out"
    assert main(["sweep", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert [float(r["value"]) for r in rows] == [0.05, 0.1, 0.2, 0.0]
    assert float(rows[0]["prediction"]) == pytest.approx(20.0175028125, rel=1e-12)
    for r in rows[:3]:
        assert r["error"] == "" and float(r["relative_deviation"]) < 1e-8
    assert "NotDissipative" in rows[3]["error"]


def test_sweep_over_separation_reports_eta(tmp_path):
    cfg = {
        "model": {"type": "td_linear", "params": {"m": 1, "d": 2, "alpha": 0.1, "R0": 1, "omega": 1}},
        "t_max": 1,
        "predict": "asymptote",
        "sweep": {"parameter": "d", "values": [2.0, 12.0]},
    }
    out = tmp_path / "out"
    assert main(["sweep", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    rows = json.loads((out / "sweep.json").read_text())["rows"]
    assert rows[1]["eta12_d3_over_2"] == pytest.approx(1.0, abs=1e-6)


def test_dense_engine_runs(tmp_path):
    cfg = _ktm(engine="dense", t_max=0.2, n_outputs=3, dense={"ncut": 8, "dt": 0.02})
    cfg["model"]["params"]["K"] = 0.05
    out = tmp_path / "out"
    assert main(["simulate", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["relative_deviation"] < 1e-3


def _sse_cfg():
    return _ktm(
        engine="sse",
        t_max=0.1,
        n_outputs=3,
        predict=None,
        initial={"x": [0.5, 0], "p": [0, 0]},
        sse={"n_traj": 300, "dt": 0.01, "master_seed": 4, "ncut": 8},
    )


def test_sse_output_byte_identical_across_thread_caps(tmp_path, monkeypatch):
    path = _write(tmp_path, _sse_cfg())
    blobs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("GRAVCHANNEL_THREADS", threads)
        out = tmp_path / f"out{threads}"
        assert main(["simulate", "--config", path, "--out", str(out)]) == 0
        blobs.append(((out / "series.csv").read_bytes(), (out / "summary.json").read_bytes()))
    assert blobs[0] == blobs[1]


def test_seed_flag_changes_sse_output(tmp_path):
    path = _write(tmp_path, _sse_cfg())
    main(["simulate", "--config", path, "--out", str(tmp_path / "a")])
    main(["simulate", "--config", path, "--seed", "5", "--out", str(tmp_path / "b")])
    a = json.loads((tmp_path / "a" / "summary.json").read_text())
    b = json.loads((tmp_path / "b" / "summary.json").read_text())
    assert (a["seed"], b["seed"]) == (4, 5)
    assert a["measured"] != b["measured"]


def test_eta_subcommand(tmp_path, capsys):
    assert main(["eta", "--R0", "1", "--d", "2", "12", "--quadrature", "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    rows = list(csv.DictReader(text.splitlines()))
    assert float(rows[1]["eta12_d3_over_2"]) == pytest.approx(1.0, abs=1e-6)
    assert float(rows[0]["relative_difference"]) < 1e-6
    assert (tmp_path / "eta.csv").read_text() == text
    assert main(["eta", "--R0", "0", "--d", "1"]) == 1


def test_validate_and_argument_errors(tmp_path):
    assert main(["validate", "--config", _write(tmp_path, _ktm())]) == 0
    assert main(["validate", "--config", str(tmp_path / "missing.json")]) == 1
    assert main(["bogus"]) == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "gravchannel", "eta", "--R0", "1", "--d", "3"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("R0,d,eta")


def test_non_separable_energy_split_is_nan(tmp_path):
    cfg = {
        "model": {"type": "ktm", "params": {"d": 3, "m1": 1, "m2": 2, "omega": 1, "minimized_gamma": True}},
        "t_max": 1,
        "n_outputs": 2,
    }
    out = tmp_path / "out"
    assert main(["simulate", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    with open(out / "series.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert np.isnan(float(rows[0]["E_cm"]))
    assert np.isfinite(float(rows[0]["E_total"]))
