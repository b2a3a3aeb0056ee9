import json

import pytest

from psidiam.cli import (
    Check,
    ConfigError,
    ExperimentConfig,
    main,
    run_config,
)


def _cfg_dict(**over):
    base = {
        "kind": "nets-selftest",
        "seed": 7,
        "trials": 25,
        "budget_secs": 30.0,
        "grid": {"N": [8, 16], "m": [2]},
    }
    base.update(over)
    return base


def _write_toml(path, text):
    path.write_text(text)
    return str(path)


# ------------------------------------------------------------- validation


def test_missing_seed_names_the_field():
    d = _cfg_dict()
    del d["seed"]
    with pytest.raises(ConfigError, match="'seed'"):
        ExperimentConfig.from_dict(d)


def test_bad_kind_and_grid_are_named():
    with pytest.raises(ConfigError, match="'kind'"):
        ExperimentConfig.from_dict(_cfg_dict(kind="nope"))
    with pytest.raises(ConfigError, match="grid.N"):
        ExperimentConfig.from_dict(_cfg_dict(grid={"N": [], "m": [2]}))
    with pytest.raises(ConfigError, match="grid.m"):
        ExperimentConfig.from_dict(_cfg_dict(grid={"N": [8]}))
    with pytest.raises(ConfigError, match="budget_secs"):
        ExperimentConfig.from_dict(_cfg_dict(budget_secs=-1.0))
    with pytest.raises(ConfigError, match="mode"):
        ExperimentConfig.from_dict(
            {"kind": "decompose", "mode": "bogus", "seed": 1,
             "grid": {"alpha": [1.0]}})


def test_config_hash_recomputable(tmp_path):
    text = 'kind = "selftest"\nseed = 5\n'
    p1 = _write_toml(tmp_path / "a.toml", text)
    p2 = _write_toml(tmp_path / "b.toml", text)
    h1 = ExperimentConfig.from_file(p1).config_hash()
    h2 = ExperimentConfig.from_file(p2).config_hash()
    assert h1 == h2
    h3 = ExperimentConfig.from_file(
        _write_toml(tmp_path / "c.toml", 'kind = "selftest"\nseed = 6\n')
    ).config_hash()
    assert h3 != h1


def test_malformed_toml_exit_2(tmp_path, capsys):
    path = _write_toml(tmp_path / "bad.toml", "kind = [unclosed\n")
    assert main(["run", "--config", path, "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_seed_via_cli_exit_2(tmp_path, capsys):
    path = _write_toml(tmp_path / "ns.toml",
                       'kind = "selftest"\n')
    assert main(["run", "--config", path, "--out", str(tmp_path)]) == 2
    assert "'seed'" in capsys.readouterr().err


def test_unsupported_ensemble_named(tmp_path, capsys):
    path = _write_toml(tmp_path / "u.toml", "\n".join([
        'kind = "concentrate"', 'mode = "rate"', "seed = 3",
        "[ensemble]", 'kind = "user"',
        "[grid]", "n = [4]", "N = [16]", ""]))
    assert main(["run", "--config", path, "--out", str(tmp_path)]) == 2
    assert "ensemble" in capsys.readouterr().err


# ------------------------------------------------------------ run behavior


def test_run_writes_csv_and_summary(tmp_path, capsys):
    cfg = _write_toml(tmp_path / "n.toml", "\n".join([
        'kind = "nets-selftest"', "seed = 7", "trials = 25",
        "[grid]", "N = [8, 16]", "m = [2]", ""]))
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "[PASS] approx_error <= m/N" in out
    csv_path = tmp_path / "nets-selftest.csv"
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0].startswith("N,m,trials,worst_error")
    assert len(lines) == 3  # header + 2 cells
    summary = json.loads((tmp_path / "nets-selftest-summary.json").read_text())
    assert summary["passed"] is True
    assert summary["version"]
    assert summary["row_schema_version"] == 1
    cfg_obj = ExperimentConfig.from_dict(summary["config"])
    assert cfg_obj.config_hash() == summary["config_hash"]


def test_csv_is_append_only(tmp_path):
    cfg = _write_toml(tmp_path / "n.toml", "\n".join([
        'kind = "nets-selftest"', "seed = 7", "trials = 10",
        "[grid]", "N = [8]", "m = [2]", ""]))
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "nets-selftest.csv").read_text().strip().splitlines()
    assert len(lines) == 3  # one header, two appended data rows
    assert lines[1] == lines[2]  # same seed, same row


def test_budget_exhaustion_flushes_partial_and_exits_1(tmp_path, capsys):
    cfg = _write_toml(tmp_path / "n.toml", "\n".join([
        'kind = "nets-selftest"', "seed = 7", "trials = 400",
        "budget_secs = 0.001",
        "[grid]", "N = [16, 16, 16, 16]", "m = [2, 4]", ""]))
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "budget" in err
    summary = json.loads((tmp_path / "nets-selftest-summary.json").read_text())
    assert summary["budget_exhausted"] is True
    assert 0 < len(summary["rows"]) < 8  # partial rows flushed


def test_seed_override_changes_rows(tmp_path):
    d = _cfg_dict(trials=10, grid={"N": [8], "m": [2]})
    cfg = ExperimentConfig.from_dict(d)
    r1 = run_config(cfg)
    r2 = run_config(cfg, seed=8)
    assert r1.seed == 7 and r2.seed == 8
    assert r1.rows != r2.rows
    assert r1.config_hash == r2.config_hash  # hash covers the embedded config


def test_thread_count_does_not_change_rows():
    cfg = ExperimentConfig.from_dict(_cfg_dict(trials=60))
    r1 = run_config(cfg, threads=1)
    r8 = run_config(cfg, threads=8)
    assert r1.rows == r8.rows
    assert [c.__dict__ for c in r1.checks] == [c.__dict__ for c in r8.checks]


def test_selftest_subcommand(capsys):
    assert main(["selftest"]) == 0
    assert "[PASS] orlicz-analytic-exactness" in capsys.readouterr().out


def test_report_passed_logic():
    cfg = ExperimentConfig.from_dict({"kind": "selftest", "seed": 0})
    report = run_config(cfg)
    assert report.passed
    report.checks.append(Check("synthetic", False, "forced"))
    assert not report.passed


# -------------------------------------------------------------------- plot


def _fake_report(rows):
    return {"kind": "concentrate", "rows": rows}


def test_plot_empty_report_axes_only(tmp_path):
    rep = tmp_path / "r.json"
    rep.write_text(json.dumps(_fake_report([])))
    assert main(["plot", "--report", str(rep), "--out", str(tmp_path)]) == 0
    svgs = list(tmp_path.glob("*.svg"))
    assert len(svgs) == 1 and "empty" in svgs[0].name


def test_plot_one_svg_per_group_and_deterministic(tmp_path):
    rows = []
    for ens in ("gaussian", "rademacher"):
        for N in (64, 128):
            rows.append({"ensemble": ens, "class_variant": "sphere",
                         "N": N, "empirical": 1.0 / N, "bound_psi1": 2.0 / N})
    rep = tmp_path / "r.json"
    rep.write_text(json.dumps(_fake_report(rows)))
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["plot", "--report", str(rep), "--out", str(out1)]) == 0
    assert main(["plot", "--report", str(rep), "--out", str(out2)]) == 0
    names = sorted(p.name for p in out1.glob("*.svg"))
    assert len(names) == 2  # one per ensemble group
    for name in names:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_plot_unknown_schema_exit_2(tmp_path, capsys):
    rep = tmp_path / "r.json"
    rep.write_text(json.dumps({"kind": "mystery", "rows": []}))
    assert main(["plot", "--report", str(rep), "--out", str(tmp_path)]) == 2
    assert "schema" in capsys.readouterr().err


def test_shipped_configs_all_parse():
    from pathlib import Path

    cfg_dir = Path(__file__).resolve().parents[1] / "configs"
    paths = sorted(cfg_dir.glob("*.toml"))
    assert len(paths) == 12
    kinds = set()
    for p in paths:
        cfg = ExperimentConfig.from_file(p)
        kinds.add(cfg.kind)
    assert kinds == {"nets-selftest", "decompose", "selftest", "diam",
                     "concentrate", "lowerbound", "apps", "gamma2"}
