import filecmp
import json
from pathlib import Path

import pytest

from tickdrift import cli
from tickdrift import runner
from tickdrift.config import ConfigError, load_config, parse_config
from tickdrift.report import read_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_cfg(tmp_path, **raw):
    raw.setdefault("name", "t")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(raw))
    return path


def summary(path):
    return {row["quantity"]: row["value"] for row in read_csv(path)[1]}


def sim_rows(out):
    return {row["mode"]: row for row in read_csv(out / "sim_summary.csv")[1]}


def test_drift_periodic_rate(tmp_path):
    cfg = write_cfg(tmp_path, schedule=[{"type": "periodic", "rate_hz": 100, "duration_ms": 0.2, "count": 10}])
    assert cli.main(["drift", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    s = summary(tmp_path / "o" / "drift_summary.csv")
    assert float(s["periodic0.expected_ticks_per_s"]) == 100.0
    assert s["cumulative_lost_ticks"] == "10"


@pytest.mark.parametrize("time_s, lost", [(0.01, 29099), (0.01003, 29099), (0.01007, 29100)])
def test_drift_one_shot_depends_on_phase(tmp_path, time_s, lost):
    # a window of exactly 29100 periods always loses 29099; half a period more brackets 2910/2911 ms
    cfg = write_cfg(tmp_path, schedule=[{"type": "one_shot", "time_s": time_s, "duration_ms": 2910.05}])
    assert cli.main(["drift", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert summary(tmp_path / "o" / "drift_summary.csv")["cumulative_lost_ticks"] == str(lost)


def test_drift_empty_schedule(tmp_path):
    cfg = write_cfg(tmp_path)
    assert cli.main(["drift", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    s = summary(tmp_path / "o" / "drift_summary.csv")
    assert s["sections"] == "0" and s["cumulative_lost_ticks"] == "0"


def test_sim_hotpatch_modes(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["sim", "--config", str(CONFIGS / "hotpatch.json"), "--out", str(out)]) == 0
    rows = sim_rows(out)
    assert abs(int(rows["uncompensated"]["final_drift_ticks"]) - 29100) <= 1
    assert abs(int(rows["compensated"]["final_drift_ticks"])) <= 1
    assert rows["baseline"]["final_drift_ticks"] == "0"
    for name in ("events_uncompensated.csv", "sweeps_compensated.csv", "kernel_compensated.json", "COLUMNS.md"):
        assert (out / name).exists()


def test_mode_flag_limits_runs(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["sim", "--config", str(CONFIGS / "hotpatch.json"), "--mode", "compensated",
                     "--out", str(out)]) == 0
    assert list(sim_rows(out)) == ["compensated"]


def test_sim_8bit_wraps_from_trace_file(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["sim", "--config", str(CONFIGS / "wrap8.json"), "--out", str(out)]) == 0
    sweeps = read_csv(out / "sweeps_compensated.csv")[1]
    assert any(r["overflow"] == "1" for r in sweeps)
    assert sim_rows(out)["compensated"]["final_drift_ticks"] == "0"
    nominal = {m: [(r["task"], r["nominal_tick"]) for r in read_csv(out / f"releases_{m}.csv")[1]]
               for m in ("baseline", "compensated")}
    assert nominal["baseline"] == nominal["compensated"]


def test_every_csv_carries_the_config_hash(tmp_path):
    out = tmp_path / "o"
    cli.main(["sim", "--config", str(CONFIGS / "hotpatch.json"), "--out", str(out)])
    digest = load_config(CONFIGS / "hotpatch.json").digest
    for f in out.glob("*.csv"):
        meta, _ = read_csv(f)
        assert meta["config_hash"] == digest
        assert meta["schema"].startswith("tickdrift.") and meta["schema"].endswith("/v1")


def test_seed_override_changes_hash():
    a = load_config(CONFIGS / "periodic_checks.json")
    b = load_config(CONFIGS / "periodic_checks.json", {"seed": 8})
    assert a.digest != b.digest and a.windows != b.windows


def test_oracle_passes_and_catches_mutation(tmp_path):
    assert cli.main(["oracle", "--cases", "200", "--seed", "3", "--out", str(tmp_path / "a")]) == 0
    code = cli.main(["oracle", "--cases", "200", "--seed", "3", "--mutation", "skip_timer_command",
                     "--out", str(tmp_path / "b")])
    assert code == cli.EXIT_MISMATCH
    assert (tmp_path / "b" / "oracle_mismatches.json").exists()


def test_oracle_zero_length_windows_are_equal(tmp_path):
    cfg = write_cfg(tmp_path, oracle={"cases": 300, "max_n": 0})
    assert cli.main(["oracle", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0


@pytest.mark.parametrize("raw", [
    {"name": "x", "bogus": 1},
    {"name": "x", "mode": "sometimes"},
    {"name": "x", "schedule": [{"type": "one_shot", "time_s": 1.0}]},
    {"name": "x", "schedule": [{"type": "trace", "path": "missing.csv"}]},
    {"name": "x", "run_length_s": 0.5, "schedule": [{"type": "one_shot", "time_s": 0.4, "duration_ms": 200}]},
    {"name": "x", "schedule": [{"type": "one_shot", "time_s": 0.1, "duration_ms": 10},
                               {"type": "one_shot", "time_s": 0.105, "duration_ms": 10}]},
    {"name": "x", "tasks": [{"id": 0, "kind": "periodic", "priority": 1}]},
    {"name": "x", "counter_width": 8, "tasks": [{"id": 0, "kind": "periodic", "priority": 1, "period_ticks": 300}]},
])
def test_config_errors_exit_2(tmp_path, raw):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(ConfigError):
        load_config(path)
    assert cli.main(["sim", "--config", str(path), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_unreadable_config_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["sim", "--config", str(bad)]) == cli.EXIT_CONFIG
    assert cli.main(["sim", "--config", str(tmp_path / "nope.json")]) == cli.EXIT_CONFIG


def test_internal_fault_exit_4(tmp_path, monkeypatch):
    def boom(cfg, out):
        raise RuntimeError("kaput")

    monkeypatch.setitem(runner.COMMANDS, "sim", boom)
    assert cli.main(["sim", "--config", str(write_cfg(tmp_path)), "--out", str(tmp_path / "o")]) == cli.EXIT_FAULT


def test_out_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("TICKDRIFT_OUT", str(tmp_path / "env"))
    assert cli.main(["drift", "--config", str(write_cfg(tmp_path))]) == 0
    assert (tmp_path / "env" / "drift_summary.csv").exists()


def test_reruns_are_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["sim", "--config", str(CONFIGS / "wrap8.json"), "--out", str(tmp_path / d)]) == 0
        assert cli.main(["drift", "--config", str(CONFIGS / "periodic_checks.json"),
                         "--out", str(tmp_path / d / "drift")]) == 0
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert files
    for rel in files:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel
    assert not cmp.left_only and not cmp.right_only


def test_suite_configs_parse():
    for name in runner.SUITES:
        for raw in runner.suite_configs(name):
            parse_config(raw)
