import json

import numpy as np
import pytest

from kacsim import cli


def write_config(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


DECAY_CFG = """
# small coupled decay run
kind = decay
n = 32
d = 3
kernel = uniform
horizon = 2.0
sample_dt = 0.5
replicas = 3
delta = 0.5
seed = 5
constant_samples = 20
"""


def test_load_config_parses_and_overrides(tmp_path):
    path = write_config(tmp_path, DECAY_CFG)
    cfg = cli.load_config(path)
    assert cfg.kind == "decay"
    assert cfg.n == 32
    assert cfg.horizon == 2.0
    cfg = cli.load_config(path, overrides={"seed": 9})
    assert cfg.seed == 9


def test_load_config_rejects_unknown_key(tmp_path):
    path = write_config(tmp_path, DECAY_CFG + "banana = 1\n")
    with pytest.raises(cli.ConfigError):
        cli.load_config(path)


def test_load_config_rejects_bad_value(tmp_path):
    path = write_config(tmp_path, DECAY_CFG + "n = many\n")
    with pytest.raises(cli.ConfigError):
        cli.load_config(path)
    path = write_config(tmp_path, DECAY_CFG + "oops\n", name="b.cfg")
    with pytest.raises(cli.ConfigError):
        cli.load_config(path)


def test_validate_config_range_checks(tmp_path):
    path = write_config(tmp_path, DECAY_CFG + "d = 2\n")
    with pytest.raises(cli.ConfigError):
        cli.load_config(path)
    # non-integrable kernel parameters are rejected up front
    path = write_config(tmp_path, DECAY_CFG
                        + "kernel = power_law\nnu = 0.5\ntheta_min = 0.0\n",
                        name="k.cfg")
    with pytest.raises(cli.ConfigError):
        cli.load_config(path)


def test_resolved_exponents_default_conjugacy(tmp_path):
    cfg = cli.load_config(write_config(tmp_path, DECAY_CFG))
    delta, p, q = cfg.resolved_exponents()
    assert delta == 0.5
    np.testing.assert_allclose(p, 2.0 / (1.0 - delta))
    np.testing.assert_allclose(1.0 / p + 1.0 / q, 1.0)


def test_main_validate_prints_config(tmp_path, capsys):
    path = write_config(tmp_path, DECAY_CFG)
    assert cli.main(["validate", "--config", str(path)]) == cli.EXIT_OK
    parsed = json.loads(capsys.readouterr().out)
    assert parsed["kind"] == "decay"
    assert parsed["n"] == 32


def test_main_config_errors_exit_2(tmp_path, capsys):
    missing = tmp_path / "nope.cfg"
    assert cli.main(["validate", "--config", str(missing)]) == cli.EXIT_CONFIG
    bad = write_config(tmp_path, DECAY_CFG + "kind = sideways\n")
    assert cli.main(["run", "--config", str(bad)]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "config error" in err


def test_decay_run_outputs_and_determinism(tmp_path, capsys):
    path = write_config(tmp_path, DECAY_CFG)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert cli.main(["run", "--config", str(path),
                     "--out", str(out_a)]) == cli.EXIT_OK
    assert cli.main(["run", "--config", str(path),
                     "--out", str(out_b)]) == cli.EXIT_OK

    report = json.loads((out_a / "report.json").read_text())
    assert report["pass"] is True
    assert report["replicas"] == 3
    assert report["constants"]["k_main"] > 0

    for name in ("trajectory_0.csv", "trajectory_2.csv", "aggregate.csv"):
        assert (out_a / name).is_file()

    # identical config and seed must reproduce every output byte for byte
    for name in ("trajectory_0.csv", "trajectory_1.csv", "aggregate.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
    rep_b = json.loads((out_b / "report.json").read_text())
    rep_b["config"]["out"] = report["config"]["out"]
    assert rep_b == {**report, "config": rep_b["config"]}


def test_decay_trajectory_columns_monotone(tmp_path):
    path = write_config(tmp_path, DECAY_CFG)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(path),
                     "--out", str(out)]) == cli.EXIT_OK
    header, *rows = [ln.split(",") for ln in
                     (out / "trajectory_0.csv").read_text().strip().split("\n")]
    msd = [float(r[header.index("mean_sq_distance")]) for r in rows]
    assert all(b <= a + 1e-9 for a, b in zip(msd, msd[1:]))
    subs = {r[header.index("substream")] for r in rows}
    assert len(subs) == 1


def test_decay_identical_initial_law(tmp_path):
    cfgtext = DECAY_CFG + "initial_law = identical\nreplicas = 2\n"
    path = write_config(tmp_path, cfgtext)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(path),
                     "--out", str(out)]) == cli.EXIT_OK
    header, *rows = [ln.split(",") for ln in
                     (out / "trajectory_0.csv").read_text().strip().split("\n")]
    msd = [float(r[header.index("mean_sq_distance")]) for r in rows]
    assert max(msd) == 0.0


def test_decay_zero_replicas_envelope_only(tmp_path):
    path = write_config(tmp_path, DECAY_CFG + "replicas = 0\n")
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(path),
                     "--out", str(out)]) == cli.EXIT_OK
    assert (out / "aggregate.csv").is_file()
    assert not (out / "trajectory_0.csv").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["replicas"] == 0


def test_decay_sample_checks_flag_violations():
    times = np.array([0.0, 1.0, 2.0])
    columns = {
        "mean_sq_distance": np.array([1.0, 0.5, 0.9]),
        "corr": np.array([0.1, 0.2, -0.5]),
        "weak_slack": np.array([np.nan, 0.2, -1.0]),
    }
    issues = cli._decay_sample_checks(times, columns)
    assert len(issues) == 3
    assert "increased" in issues[0]


def test_inequality_sweep_runs(tmp_path):
    cfgtext = """
kind = inequalities
n = 16
d = 3
n_discrete = 50
n_config = 10
delta = 0.5
seed = 3
"""
    path = write_config(tmp_path, cfgtext)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(path),
                     "--out", str(out)]) == cli.EXIT_OK
    lines = (out / "sweep.csv").read_text().strip().split("\n")
    header = lines[0].split(",")
    assert {"instance", "group", "name", "lhs", "rhs", "slack"} <= set(header)
    report = json.loads((out / "report.json").read_text())
    assert report["pass"] is True
    assert min(report["min_slack"].values()) > -1e-10
    assert report["equality_cases"]


def test_support_studies_run(tmp_path):
    base = "d = 3\nseed = 2\nsamples = 200\n"
    cases = {
        "wishart": ("wishart.csv", "n_values = 16,32\np_moment = 2.0\n"),
        "counterexample1": ("heavy_tail.csv", "m_values = 10,100\n"),
        "counterexample2": ("radial_band.csv", "r_values = 2,4\nsamples = 2000\n"),
        "equilibrium-check": ("moments.csv", "n = 128\nsamples = 400\n"),
    }
    for kind, (csv_name, extra) in cases.items():
        path = write_config(tmp_path, f"kind = {kind}\n" + base + extra,
                            name=f"{kind}.cfg")
        out = tmp_path / kind
        assert cli.main(["run", "--config", str(path),
                         "--out", str(out)]) == cli.EXIT_OK, kind
        assert (out / csv_name).is_file()
        report = json.loads((out / "report.json").read_text())
        assert report["pass"] is True, kind
