import csv
import json
import math

import pytest

from combmemory.cli import RunConfig, load_config, main, parse_n_range, ConfigError


def run(tmp_path, *args, config=None):
    argv = list(args) + ["--out", str(tmp_path / "out")]
    if config is not None:
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config) if not isinstance(config, str) else config)
        argv += ["--config", str(path)]
    return main(argv)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_defaults_are_headline_point():
    cfg = load_config(None, {})
    assert (cfg.n_pulses, cfg.pulse_duration, cfg.period, cfg.length, cfg.kappa_T) == (90, 0.1, 1e4, 10.0, 0.1)


def test_unknown_key_rejected(tmp_path):
    assert run(tmp_path, "eigen", config={"n_pulses": 90, "colour": "red"}) == 2
    assert not (tmp_path / "out").exists()


def test_malformed_config(tmp_path):
    assert run(tmp_path, "eigen", config="{oops") == 2
    assert run(tmp_path, "eigen", config={"n_pulses": -3}) == 2
    assert run(tmp_path, "eigen", config={"n_pulses": "ninety"}) == 2
    assert run(tmp_path, "eigen", config=[1, 2]) == 2
    assert not (tmp_path / "out").exists()


def test_usage_error_exit_code(tmp_path):
    assert main(["frobnicate"]) == 2
    assert run(tmp_path, "spectrum", "--shifters", "maybe") == 2


def test_eigen_output_and_determinism(tmp_path):
    assert run(tmp_path, "eigen") == 0
    rows = read_csv(tmp_path / "out" / "modes.csv")
    assert rows[0][:2] == ["mode", "s"]
    s = [float(r[1]) for r in rows[1:]]
    assert len(s) == 90 and s == sorted(s, reverse=True)
    first = (tmp_path / "out" / "modes.csv").read_bytes()
    assert run(tmp_path, "eigen") == 0
    assert (tmp_path / "out" / "modes.csv").read_bytes() == first
    assert (tmp_path / "out" / "modes.gp").exists()


def test_efficiency_single_point(tmp_path):
    assert run(tmp_path, "efficiency", "--n-range", "90:90:1", "--lengths", "10", "--shifters", "false") == 0
    rows = read_csv(tmp_path / "out" / "efficiency.csv")
    assert rows[0] == ["N", "L", "shifters", "efficiency", "outside_validity"]
    assert len(rows) == 2
    assert float(rows[1][3]) == pytest.approx(0.90, abs=0.05)


def test_efficiency_empty_range(tmp_path):
    assert run(tmp_path, "efficiency", "--n-range", "10:5:1") == 2
    with pytest.raises(ConfigError):
        parse_n_range("a:b")
    assert parse_n_range("1:5") == [1, 2, 3, 4, 5]


def test_spectrum_stages(tmp_path):
    assert run(tmp_path, "spectrum", "--stage", "in") == 0
    assert run(tmp_path, "spectrum", "--stage", "out", "--retained", "6") == 0
    rin = read_csv(tmp_path / "out" / "spectrum_in.csv")
    rout = read_csv(tmp_path / "out" / "spectrum_out.csv")
    assert rin[0] == ["omega", "S"] and len(rin) == 2001 and len(rout) == 2001
    s_in = [float(r[1]) for r in rin[1:]]
    w = [float(r[0]) for r in rin[1:]]
    i = min(range(len(s_in)), key=s_in.__getitem__)
    assert abs(w[i] * 1e4 / (2 * math.pi) - round(w[i] * 1e4 / (2 * math.pi))) <= 5.0 / 1999


def test_spectrum_zero_coupling_is_flat(tmp_path):
    for stage in ("in", "out"):
        assert run(tmp_path, "spectrum", "--stage", stage, config={"kappa_T": 0.0}) == 0
        vals = [float(r[1]) for r in read_csv(tmp_path / "out" / f"spectrum_{stage}.csv")[1:]]
        assert all(v == 1.0 for v in vals)


def test_output_spectrum_requires_shifters(tmp_path):
    assert run(tmp_path, "spectrum", "--stage", "out", "--shifters", "false") == 2


def test_squeezing(tmp_path):
    assert run(tmp_path, "squeezing") == 2
    assert run(tmp_path, "squeezing", "--input-db", "-1,-1") == 2
    cfg = {"hermite_width": 10.0}
    assert run(tmp_path, "squeezing", "--input-db=-4.2,-3.2,-2.1,-1,-1,-1", config=cfg) == 0
    rows = read_csv(tmp_path / "out" / "squeezing.csv")
    assert rows[0] == ["mode", "input_db", "transfer", "output_db"]
    assert all(0.0 <= float(r[2]) <= 1.0 for r in rows[1:])
    data = json.loads((tmp_path / "out" / "squeezing.json").read_text())
    assert len(data["supermodes"]) == 6
    assert run(tmp_path, "squeezing", "--input-db", "0,0,0,0,0,0") == 0
    assert all(float(r[3]) == 0.0 for r in read_csv(tmp_path / "out" / "squeezing.csv")[1:])


def test_verify_pass_and_determinism(tmp_path):
    assert run(tmp_path, "verify") == 0
    first = (tmp_path / "out" / "verify.json").read_bytes()
    report = json.loads(first)
    names = [c["name"] for c in report["checks"]]
    assert len(names) == len(set(names)) >= 7
    assert all({"name", "passed", "error", "tolerance"} <= set(c) for c in report["checks"])
    assert run(tmp_path, "verify") == 0
    assert (tmp_path / "out" / "verify.json").read_bytes() == first


def test_verify_forced_failure(tmp_path, capsys):
    assert run(tmp_path, "verify", config={"quadrature_nodes": 1}) == 1
    report = json.loads((tmp_path / "out" / "verify.json").read_text())
    failed = {c["name"] for c in report["checks"] if not c["passed"]}
    assert "quadrature_convergence" in failed
    assert "FAIL quadrature_convergence" in capsys.readouterr().out


def test_run_config_roundtrip():
    cfg = RunConfig().validate()
    assert cfg.summary()["lengths"] == [10.0]
