import filecmp
import json
import math
import os

import numpy as np
import pytest

from randlandau import cli, config as cfgmod, experiments
from randlandau.io import read_csv, read_json, write_csv, write_json
from randlandau.spectral import NumericalError

SMALL = {"model": {"B": math.pi / 2, "L": 4.0, "N": 32}, "run": {"realizations": 2}}


def write_cfg(tmp_path, extra=None, name="cfg.json"):
    cfg = cfgmod._merge(SMALL, extra or {})
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


# config --------------------------------------------------------------------------------------


def test_presets_resolve():
    d = cfgmod.preset("desk")
    t = cfgmod.torus_from(d["model"])
    assert (t.side_length, t.grid_points, t.flux_quanta) == (8.0, 64, 16)
    assert d["disorder"]["lambda_over_B"] == 0.3 and d["run"]["realizations"] == 20
    h = cfgmod.torus_from(cfgmod.preset("hall")["model"])
    assert (h.side_length, h.flux_quanta, h.flux_guard) == (16.0, 64, 1)


@pytest.mark.parametrize("bad", [
    {"model": {"B": 1.0, "N": 32, "L": 4.0, "colour": "red"}},
    {"model": {"B": 1.0, "L": 4.0}},
    {"model": {"B": -1.0, "L": 4.0, "N": 32}},
    {"model": {"B": 1.0, "L": 4.0, "L_request": 4.0, "N": 32}},
    {"model": {"B": 1.0, "L": 4.0, "N": 32}, "run": {"seed": -1}},
    {"model": {"B": 1.0, "L": 4.0, "N": 32}, "disorder": {"law": {"kind": "gaussian"}}},
])
def test_schema_rejects(bad):
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.resolve(bad)


def test_config_hash_ignores_workers_and_output():
    a = cfgmod.resolve(SMALL)
    b = cfgmod.resolve(cfgmod._merge(SMALL, {"run": {"workers": 3}, "output": {"directory": "elsewhere"}}))
    c = cfgmod.resolve(cfgmod._merge(SMALL, {"run": {"seed": 1}}))
    assert cfgmod.config_hash(a) == cfgmod.config_hash(b) != cfgmod.config_hash(c)


def test_unquantized_flux_is_config_error():
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.torus_from({"B": 1.0, "L": 4.0, "N": 32})


def test_request_mode_quantizes():
    t = cfgmod.torus_from(cfgmod.resolve({"model": {"B": 1.0, "L_request": 5.0, "N": 64}})["model"])
    assert t.flux_quanta == 4 and t.side_length >= 5.0


# io ---------------------------------------------------------------------------------------------


def test_csv_complex_columns(tmp_path):
    p = tmp_path / "x.csv"
    write_csv(p, ["E", "theta_re", "theta_im", "ok"], [(0.5, 1 + 2j, True), (1.5, -0.25j, False)])
    rows = read_csv(p)
    assert rows[0] == {"E": "0.5", "theta_re": "1.0", "theta_im": "2.0", "ok": "true"}
    assert float(rows[1]["theta_im"]) == -0.25


def test_json_sorted_and_plain(tmp_path):
    p = tmp_path / "x.json"
    write_json(p, {"b": np.float64(1.5), "a": np.arange(2), "c": math.nan, "z": 1j})
    text = p.read_text()
    assert text.index('"a"') < text.index('"b"')
    assert read_json(p) == {"a": [0, 1], "b": 1.5, "c": None, "z": {"re": 0.0, "im": 1.0}}


# CLI exit codes -----------------------------------------------------------------------------------


def test_exit_config_error(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"model": {"B": 1.0, "L": 4.0, "N": 32, "extra": 1}}))
    assert cli.main(["spectrum", "--config", str(p)]) == 2
    assert "config error" in capsys.readouterr().err
    assert cli.main(["spectrum", "--config", str(tmp_path / "missing.json")]) == 2


def test_exit_bad_flags(tmp_path):
    p = write_cfg(tmp_path)
    assert cli.main(["spectrum", "--config", p, "--workers", "0"]) == 2
    assert cli.main(["spectrum", "--config", p, "--seed", str(2**64)]) == 2


def test_exit_guard_failure_before_output(tmp_path):
    p = write_cfg(tmp_path, {"model": {"L": 8.0}}, "guard.json")
    out = tmp_path / "out"
    assert cli.main(["spectrum", "--config", p, "--out", str(out)]) == 3
    assert not out.exists()
    assert cli.main(["validate-config", "--config", p]) == 3


def test_exit_numerical_failure(tmp_path, monkeypatch):
    def boom(cfg):
        raise NumericalError("no convergence")
    monkeypatch.setitem(experiments.COMMANDS, "spectrum", boom)
    assert cli.main(["spectrum", "--config", write_cfg(tmp_path)]) == 4


def test_validate_config(tmp_path, capsys):
    assert cli.main(["validate-config", "--config", write_cfg(tmp_path)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["valid"] and res["torus"]["n_phi"] == 4
    assert cli.main(["validate-config", "--preset", "desk"]) == 0


# recipes ------------------------------------------------------------------------------------------


def test_spectrum_clean_and_strong(tmp_path):
    B = math.pi / 2
    clean = cfgmod.resolve(cfgmod._merge(SMALL, {"disorder": {"lambda_over_B": 0.0}, "run": {"realizations": 1}}))
    s = experiments.cmd_spectrum(clean, str(tmp_path / "clean"))
    assert s["disjoint"] and np.allclose(s["mean_gaps"], 2 * B, rtol=0.1)
    strong = cfgmod.resolve(cfgmod._merge(SMALL, {"disorder": {"lambda_over_B": 1.5}}))
    assert experiments.cmd_spectrum(strong, str(tmp_path / "strong"))["overlap"]
    weak = cfgmod.resolve(SMALL)
    s = experiments.cmd_spectrum(weak, str(tmp_path / "weak"))
    assert s["disjoint"] and s["contained"]
    dos = read_csv(tmp_path / "weak" / "dos.csv")
    assert set(dos[0]) == {"E_lo", "E_hi", "density", "stderr"}


def test_manifest_contents(tmp_path):
    out = tmp_path / "run"
    experiments.cmd_spectrum(cfgmod.resolve(SMALL), str(out))
    m = read_json(out / "manifest.json")
    assert m["seeds"] == [[0, 0], [0, 1]]
    assert m["config_hash"] == cfgmod.config_hash(m["config"])
    assert "eps_disc" in m["tolerances"] and m["wall_times"]["total"] >= 0
    assert m["code_version"]


def test_hall_recipe(tmp_path):
    cfg = cfgmod.resolve(cfgmod._merge(SMALL, {"hall": {"E_over_B": [0.2, 2.0]}}))
    rows = experiments.cmd_hall(cfg, str(tmp_path))
    assert rows[0]["sigma"] == 0 and rows[0]["bott"] == 0
    assert rows[1]["bott"] == pytest.approx(1.0, abs=0.1)
    header = read_csv(tmp_path / "hall.csv")[0].keys()
    assert {"theta_re", "theta_im", "gate_pass_fraction"} <= set(header)


def test_hall_lambda_sweep(tmp_path):
    cfg = cfgmod.resolve(cfgmod._merge(SMALL, {"hall": {"E_over_B": [2.0], "lambda_sweep_over_B": [0.1, 0.3]},
                                               "run": {"realizations": 1}}))
    rows = experiments.cmd_hall(cfg, str(tmp_path))
    assert [r["lambda_over_B"] for r in rows] == [0.1, 0.3]
    assert all(r["bott"] == pytest.approx(1.0, abs=0.1) for r in rows)


def test_wegner_recipe(tmp_path):
    cfg = cfgmod.resolve(cfgmod._merge(SMALL, {"wegner": {"windows_over_B": [[0.9, 1.1], [1.8, 2.2], [0.0, 2.0]],
                                                          "scales": [1, 2]}}))
    rows = experiments.cmd_wegner(cfg, str(tmp_path))
    by = {(r[0], r[2]): r for r in rows}
    assert by[(1, 1.8)][4] == 0 and by[(2, 1.8)][4] == 0
    assert by[(1, 0.0)][4] == 4 and by[(2, 0.0)][4] == 16 and by[(2, 0.0)][5] == 0


def test_moments_recipe(tmp_path):
    cfg = cfgmod.resolve(cfgmod._merge(SMALL, {"moments": {"centers_over_B": [1.0, 2.0], "K": 5,
                                                           "quadrature_check": True}}))
    s = experiments.cmd_moments(cfg, str(tmp_path))
    assert s["ballistic_failures"] == [] and s["quadrature_max_rel_dev"] <= 1e-6
    rows = read_csv(tmp_path / "moments.csv")
    gap = [float(r["value"]) for r in rows if r["center_over_B"] == "2.0"]
    assert gap and all(v == 0 for v in gap)
    assert len(s["beta_hat_triples"]["E=1B,p=2"]) == 3


def test_scan_clean_degenerate(tmp_path):
    cfg = cfgmod.resolve(cfgmod._merge(SMALL, {"disorder": {"lambda_over_B": 0.0},
                                               "scan": {"values": [0.4, 0.2]}}))
    res = experiments.cmd_scan_mobility(cfg, str(tmp_path))
    assert res["verdict"] == "degenerate"
    assert all(p["status"] == "degenerate" for p in res["points"])


def test_scan_B_adjusts_field(tmp_path):
    cfg = cfgmod.resolve(cfgmod._merge(SMALL, {"model": {"flux_guard": 1},
                                               "scan": {"mode": "B", "values": [math.pi / 2, 2.0]},
                                               "run": {"realizations": 1}}))
    with pytest.warns(UserWarning):
        res = experiments.cmd_scan_mobility(cfg, str(tmp_path))
    B = [p["B"] for p in res["points"]]
    assert B[0] == math.pi / 2 and B[1] * 16 / (2 * math.pi) == pytest.approx(round(B[1] * 16 / (2 * math.pi)))


# reproducibility ---------------------------------------------------------------------------------------


def _result_files(d):
    return sorted(f for f in os.listdir(d) if f != "manifest.json")


@pytest.mark.parametrize("command", ["spectrum", "moments"])
def test_rerun_from_manifest_bit_identical(tmp_path, command):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main([command, "--config", write_cfg(tmp_path, {"run": {"realizations": 3}}),
                     "--out", str(a), "--workers", "1"]) == 0
    assert cli.main([command, "--config", str(a / "manifest.json"), "--out", str(b), "--workers", "2"]) == 0
    files = _result_files(a)
    assert files and files == _result_files(b)
    match, mismatch, errors = filecmp.cmpfiles(a, b, files, shallow=False)
    assert mismatch == [] and errors == []
    ma, mb = read_json(a / "manifest.json"), read_json(b / "manifest.json")
    assert ma["config_hash"] == mb["config_hash"] and mb["workers"] == 2


def test_published_schema_matches():
    path = os.path.join(os.path.dirname(__file__), os.pardir, "docs", "config.schema.json")
    with open(path, encoding="utf-8") as fh:
        assert json.load(fh) == json.loads(json.dumps(cfgmod.SCHEMA))
