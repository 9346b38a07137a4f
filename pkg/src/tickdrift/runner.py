"""Experiment execution behind the CLI: one function per subcommand, plus named suites."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from .config import ScenarioConfig, config_hash, parse_config
from .drift import (AtomicSchedule, cumulative_drift, expected_drift_rate, expected_lost_ticks,
                    monte_carlo_expected_loss)
from .kernel import Kernel
from .oracle import run_round_robin_oracle, run_sweep_oracle
from .plant import (plant1_scenario, plant2_scenario, release_lags, release_shift, run_all_modes)
from .report import write_column_readme, write_csv, write_json
from .secure import Mode
from .system import BusyTask, PeriodicTask, Simulation, TimeoutTask
from .timebase import NS_PER_MS, NS_PER_S, TickConfig

log = logging.getLogger(__name__)


@dataclass
class Outcome:
    """What a command produced: comparison rows and whether its invariants held."""

    files: list[Path] = field(default_factory=list)
    comparison: list[dict] = field(default_factory=list)  # scenario, mode, metric, value
    ok: bool = True
    problems: list[str] = field(default_factory=list)

    def metric(self, scenario, mode, metric, value):
        self.comparison.append({"scenario": scenario, "mode": mode, "metric": metric, "value": value})

    def fail(self, why: str):
        self.ok = False
        self.problems.append(why)

    def merge(self, other: "Outcome") -> "Outcome":
        self.files += other.files
        self.comparison += other.comparison
        self.ok &= other.ok
        self.problems += other.problems
        return self


def _ms(ticks, tick_period) -> float:
    return ticks * tick_period / NS_PER_MS


# ---- drift -----------------------------------------------------------------

def cmd_drift(cfg: ScenarioConfig, out: Path) -> Outcome:
    res = Outcome()
    tick = TickConfig(cfg.tick_period)
    first_phase = cfg.windows[0][0] % cfg.tick_period if cfg.windows else 0
    report = cumulative_drift(AtomicSchedule(tuple(cfg.windows)), tick, first_phase)
    rows, total = [], 0
    for i, ((start, dur), phase, lost) in enumerate(zip(cfg.windows, report.phases, report.per_section_lost)):
        total += lost
        rows.append([i, start, dur, phase, lost, total])
    res.files.append(write_csv(out / "drift_sections.csv", "drift_sections", cfg.digest, rows))

    summary = [("sections", len(cfg.windows)), ("cumulative_lost_ticks", report.cumulative_lost),
               ("cumulative_lost_ms", _ms(report.cumulative_lost, cfg.tick_period))]
    for j, spec in enumerate(cfg.periodic):
        dur = spec["duration_ticks"] * cfg.tick_period if "duration_ticks" in spec else round(
            spec["duration_ms"] * NS_PER_MS)
        rate = expected_drift_rate(spec["rate_hz"], {dur: 1}, tick)
        summary += [(f"periodic{j}.rate_hz", spec["rate_hz"]), (f"periodic{j}.duration_ns", dur),
                    (f"periodic{j}.expected_ticks_per_s", rate.expectation),
                    (f"periodic{j}.mean_approx_ticks_per_s", rate.mean_approximation),
                    (f"periodic{j}.expected_ms_per_s", rate.expectation * cfg.tick_period / NS_PER_MS)]
    res.files.append(write_csv(out / "drift_summary.csv", "drift_summary", cfg.digest, summary))
    res.metric(cfg.name, "model", "cumulative_lost_ticks", report.cumulative_lost)

    schemas = {"drift_sections.csv": "drift_sections", "drift_summary.csv": "drift_summary"}
    if cfg.monte_carlo_samples:
        mc_rows = []
        for dur in sorted({d for _, d in cfg.windows}):
            mc = monte_carlo_expected_loss(dur, tick, cfg.monte_carlo_samples, cfg.seed)
            exp = expected_lost_ticks(dur, tick)
            ok = mc.within(exp)
            mc_rows.append([dur, dur / cfg.tick_period, mc.samples, mc.mean, mc.stderr, exp, ok])
            if not ok:
                res.fail(f"Monte Carlo mean off the expectation for A={dur} ns")
        res.files.append(write_csv(out / "montecarlo.csv", "montecarlo", cfg.digest, mc_rows))
        schemas["montecarlo.csv"] = "montecarlo"
    write_column_readme(out, schemas)
    return res


# ---- sim -------------------------------------------------------------------

def build_simulation(cfg: ScenarioConfig, mode: Mode) -> tuple[Simulation, list]:
    kernel = Kernel(width=cfg.counter_width, slice_quantum=cfg.round_robin_quantum, tick_count=cfg.initial_tick)
    for t in cfg.timers:
        kernel.add_timer(t.id, t.period_ticks, t.auto_reload)
    programs = []
    for t in cfg.tasks:
        if t.kind == "periodic":
            programs.append(PeriodicTask(t.id, t.priority, t.period_ticks, start_delay=t.start_delay_ticks))
        elif t.kind == "busy":
            programs.append(BusyTask(t.id, t.priority))
        else:
            programs.append(TimeoutTask(t.id, t.priority, t.timeout_ticks))
    sim = Simulation(cfg.tick_period, mode, cfg.windows, cfg.run_length, kernel=kernel, tasks=programs,
                     address_map=cfg.address_map, drift_sample_every=cfg.drift_sample_every)
    return sim, programs


def cmd_sim(cfg: ScenarioConfig, out: Path) -> Outcome:
    res = Outcome()
    summary = []
    schemas = {"sim_summary.csv": "sim_summary"}
    for name in cfg.modes:
        mode = Mode(name)
        sim, programs = build_simulation(cfg, mode)
        r = sim.run()
        counts = r.trace_counts
        summary.append([name, r.wall_ticks, r.kernel_ticks, r.final_drift, _ms(r.final_drift, cfg.tick_period),
                        counts["TickDelivered"], counts["TickDiscarded"], r.pending_at_end, len(r.sweeps),
                        sum(1 for s in r.sweeps if s.aborted)])
        events = [[e.time, e.kind.value, e.target.value if e.target is not None else None] for e in sim.mcu.trace]
        res.files.append(write_csv(out / f"events_{name}.csv", "events", cfg.digest, events))
        sweeps = [[i, s.n, " ".join(map(str, s.promoted)), s.rotations, s.new_slice, s.rotated, s.reschedule,
                   s.overflow, " ".join(f"{f.address:#x}" for f in s.faults)] for i, s in enumerate(r.sweeps)]
        res.files.append(write_csv(out / f"sweeps_{name}.csv", "sweeps", cfg.digest, sweeps))
        releases = [[p.id, t, k, nom] for p in programs if isinstance(p, PeriodicTask)
                    for (t, k), nom in zip(p.releases, p.nominal)]
        res.files.append(write_csv(out / f"releases_{name}.csv", "releases", cfg.digest, releases))
        res.files.append(write_json(out / f"kernel_{name}.json", sim.kernel.snapshot()))
        schemas.update({f"events_{name}.csv": "events", f"sweeps_{name}.csv": "sweeps",
                        f"releases_{name}.csv": "releases"})
        if cfg.drift_sample_every:
            samples = [[t / NS_PER_S, w, k, w - k, _ms(w - k, cfg.tick_period)] for t, w, k in r.drift_samples]
            res.files.append(write_csv(out / f"drift_samples_{name}.csv", "drift_samples", cfg.digest, samples))
            schemas[f"drift_samples_{name}.csv"] = "drift_samples"
        res.metric(cfg.name, name, "final_drift_ticks", r.final_drift)
        res.metric(cfg.name, name, "final_drift_ms", _ms(r.final_drift, cfg.tick_period))
        res.metric(cfg.name, name, "discarded", counts["TickDiscarded"])
        if mode is not Mode.UNCOMPENSATED and abs(r.final_drift) > 1:
            res.fail(f"{cfg.name}/{name}: drift {r.final_drift} ticks")
    notes = [f"scenario: {cfg.name}"] + ([cfg.notes] if cfg.notes else [])
    res.files.append(write_csv(out / "sim_summary.csv", "sim_summary", cfg.digest, summary, notes=notes))
    write_column_readme(out, schemas)
    return res


# ---- plant -----------------------------------------------------------------

def plant_scenario_from(cfg: ScenarioConfig):
    spec = dict(cfg.plant or {"name": "plant1"})
    factory = plant1_scenario if spec.pop("name") == "plant1" else plant2_scenario
    if "ff_lead_s" in spec:
        spec["ff_lead"] = spec.pop("ff_lead_s")
    if "schedule" in cfg.raw:
        spec["windows"] = cfg.windows
    if "run_length_s" in cfg.raw or "schedule" in cfg.raw:
        spec["run_length"] = cfg.run_length
    if "tick_period_ms" in cfg.raw:
        spec["tick_period"] = cfg.tick_period
    return factory(**spec)


def cmd_plant(cfg: ScenarioConfig, out: Path) -> Outcome:
    res = Outcome()
    scn = plant_scenario_from(cfg)
    runs = run_all_modes(scn)
    schemas = {"plant_metrics.csv": "plant_metrics"}
    metrics = []
    for name in cfg.modes:
        run = runs[Mode(name)]
        s = run.series
        rows = zip(s.time_s.tolist(), s.reference.tolist(), s.state.tolist(), s.command_u.tolist(),
                   s.tick_count.tolist(), [s.mode] * len(s.time_s))
        res.files.append(write_csv(out / f"series_{name}.csv", "series", cfg.digest, rows))
        rel = [[0, t, k, None] for t, k in run.releases]
        res.files.append(write_csv(out / f"releases_{name}.csv", "releases", cfg.digest, rel))
        schemas.update({f"series_{name}.csv": "series", f"releases_{name}.csv": "releases"})
        m = run.metrics
        metrics.append([name, m.rmse, m.mean_abs_err, m.peak_abs_err, m.max_state_dev, m.max_command_dev,
                        m.window_state_dev, m.window_command_dev, len(run.releases), run.sim.final_drift])
        res.metric(scn.name, name, "rmse", m.rmse)
        res.metric(scn.name, name, "max_state_dev", m.max_state_dev)
        res.metric(scn.name, name, "final_drift_ticks", run.sim.final_drift)
        if Mode(name) is not Mode.UNCOMPENSATED and abs(run.sim.final_drift) > 1:
            res.fail(f"{scn.name}/{name}: drift {run.sim.final_drift} ticks")

    base, unc, comp = runs[Mode.BASELINE], runs[Mode.UNCOMPENSATED], runs[Mode.COMPENSATED]
    res.metric(scn.name, "uncompensated", "final_release_lag_ticks", release_lags(base, unc)[-1])
    if len(scn.windows) == 1:
        sh = release_shift(base, unc, scn.windows[0][0])
        res.metric(scn.name, "uncompensated", "first_release_shift_ms", sh.shift / NS_PER_MS)
        res.metric(scn.name, "uncompensated", "skipped_releases", sh.skipped)
    if comp.metrics.max_state_dev or comp.metrics.max_command_dev or comp.releases != base.releases:
        res.fail(f"{scn.name}: compensated run deviates from baseline")
    notes = [f"scenario: {scn.name}", f"gains kp={scn.kp} ki={scn.ki} kd={scn.kd} ff_lead={scn.ff_lead}"]
    res.files.append(write_csv(out / "plant_metrics.csv", "plant_metrics", cfg.digest, metrics, notes=notes))
    write_column_readme(out, schemas)
    return res


# ---- oracle ----------------------------------------------------------------

def cmd_oracle(cfg: ScenarioConfig, out: Path) -> Outcome:
    res = Outcome()
    o = cfg.oracle
    rep = run_sweep_oracle(o.cases, cfg.seed, o.mutation, o.max_n)
    rr_cases, rr_bad = run_round_robin_oracle(o.round_robin_max_quantum)
    rows = [("sweep_cases", rep.cases), ("sweep_wrap_cases", rep.wrap_cases),
            ("sweep_mismatches", len(rep.mismatches)), ("mutation", o.mutation or "none"),
            ("round_robin_cases", rr_cases), ("round_robin_failures", len(rr_bad))]
    for mm in rep.mismatches[:50]:
        rows.append((f"mismatch.case{mm.case}.n{mm.n}", " ".join(mm.fields)))
    for q, s, n in rr_bad[:50]:
        rows.append((f"round_robin_failure.Q{q}.s{s}", n))
    res.files.append(write_csv(out / "oracle_report.csv", "oracle", cfg.digest, rows,
                               notes=[f"seed: {cfg.seed}"]))
    if rep.mismatches:
        write_json(out / "oracle_mismatches.json",
                   [{"case": m.case, "n": m.n, "fields": m.fields, "kernel": m.kernel} for m in rep.mismatches[:50]])
    write_column_readme(out, {"oracle_report.csv": "oracle"})
    res.metric("oracle", "-", "sweep_mismatches", len(rep.mismatches))
    res.metric("oracle", "-", "round_robin_failures", len(rr_bad))
    if rep.mismatches or rr_bad:
        res.fail(f"{len(rep.mismatches)} sweep mismatches, {len(rr_bad)} round-robin failures")
    return res


COMMANDS = {"drift": cmd_drift, "sim": cmd_sim, "plant": cmd_plant, "oracle": cmd_oracle}


# ---- suites ----------------------------------------------------------------

def _server_tasks():
    return [
        {"id": 0, "kind": "periodic", "priority": 3, "period_ticks": 10},
        {"id": 1, "kind": "periodic", "priority": 2, "period_ticks": 37, "start_delay_ticks": 5},
        {"id": 2, "kind": "timeout", "priority": 2, "timeout_ticks": 250},
        {"id": 3, "kind": "busy", "priority": 1},
        {"id": 4, "kind": "busy", "priority": 1},
    ]


_TIMERS = [{"id": 100, "period_ticks": 50}, {"id": 101, "period_ticks": 333}]

# window lengths set to the measured atomic times of each service; the services themselves are not modelled
TABLE1 = {"hotpatch_freertos": 2910.0, "hotpatch_zephyr": 2917.2,
          "attestation_freertos": 238.0, "attestation_zephyr": 202.0}  # ms

FIG_DRIFT_RATES = (10, 50, 100)  # Hz
FIG_DRIFT_DURATIONS = (0.05, 0.15, 0.25, 1.0)  # ms


def suite_configs(name: str, seed: int = 0) -> list[dict]:
    if name == "table1":
        return [{
            "name": scn, "schedule": [{"type": "one_shot", "time_s": 0.01, "duration_ms": dur}],
            "tail_s": 0.05, "tasks": _server_tasks(), "timers": _TIMERS, "seed": seed,
            "notes": f"window length equals the measured atomic time; reference drift {dur} ms",
        } for scn, dur in TABLE1.items()]
    if name == "fig-drift":
        out = []
        for rate in FIG_DRIFT_RATES:
            for dur in FIG_DRIFT_DURATIONS:
                out.append({
                    "name": f"periodic_{rate}hz_{dur}ms",
                    "schedule": [{"type": "periodic", "rate_hz": rate, "duration_ms": dur, "start_s": 0.001,
                                  "count": rate, "jitter_ns": 100_000}],
                    "run_length_s": 1.0, "tasks": _server_tasks(), "timers": _TIMERS,
                    "drift_sample_every_ticks": 100, "monte_carlo_samples": 20_000, "seed": seed,
                    "counter_width": 16, "initial_tick": 65_000,
                })
        return out
    if name in ("plant1", "plant2"):
        return [{"name": name, "plant": {"name": name}, "seed": seed}]
    raise KeyError(name)


SUITES = ("table1", "fig-drift", "plant1", "plant2")


def run_suite(name: str, out: Path, seed: int = 0, mode: str | None = None) -> Outcome:
    total = Outcome()
    for raw in suite_configs(name, seed):
        if mode:
            raw["mode"] = mode
        cfg = parse_config(raw)
        where = out / name / cfg.name
        if cfg.plant:
            res = cmd_plant(cfg, where)
        else:
            res = cmd_sim(cfg, where)
            if cfg.periodic:
                model = cmd_drift(cfg, where / "model")
                res.merge(model)
                lost = model.comparison[0]["value"]
                simulated = [r["value"] for r in res.comparison
                             if r["mode"] == "uncompensated" and r["metric"] == "final_drift_ticks"]
                if simulated and simulated[0] != lost:
                    res.fail(f"{cfg.name}: simulated drift {simulated[0]} != model {lost}")
        if name == "table1":
            res.metric(cfg.name, "reference", "final_drift_ms", TABLE1[cfg.name])
        log.info("%s/%s done", name, cfg.name)
        total.merge(res)
    digest = suite_digest(name, seed, mode)
    total.files.append(write_csv(out / name / "comparison.csv", "comparison", digest, total.comparison,
                                 notes=[f"suite: {name}"]))
    write_column_readme(out / name, {"comparison.csv": "comparison"})
    return total


def suite_digest(name: str, seed: int, mode: str | None = None) -> str:
    """Provenance hash of a whole bundle: every member config."""
    members = suite_configs(name, seed)
    return config_hash({"suite": name, "mode": mode, "members": members})
