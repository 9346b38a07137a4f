"""Scenario configuration: a single JSON file, schema-checked before anything runs.

Times carry their unit in the key name (``_s``, ``_ms``, ``_ns``, ``_ticks``) and
are converted to integer nanoseconds on load. The only environment input is
``TICKDRIFT_OUT``, which overrides the output directory.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import jsonschema

from .drift import validate_sections
from .rng import make_rng
from .secure import AddressMap
from .timebase import NS_PER_S, ms, seconds

OUT_ENV = "TICKDRIFT_OUT"
MODES = ("baseline", "uncompensated", "compensated")


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


_num = {"type": "number", "minimum": 0}
_pos_int = {"type": "integer", "minimum": 1}

_window_specs = [
    {
        "type": "object",
        "properties": {
            "type": {"const": "periodic"},
            "rate_hz": {"type": "number", "exclusiveMinimum": 0},
            "duration_ms": _num,
            "duration_ticks": {"type": "integer", "minimum": 0},
            "start_s": _num,
            "count": _pos_int,
            "jitter_ns": {"type": "integer", "minimum": 0},
        },
        "required": ["type", "rate_hz", "count"],
        "oneOf": [{"required": ["duration_ms"]}, {"required": ["duration_ticks"]}],
        "additionalProperties": False,
    },
    {
        "type": "object",
        "properties": {
            "type": {"const": "one_shot"},
            "time_s": _num,
            "duration_ms": _num,
            "duration_ticks": {"type": "integer", "minimum": 0},
        },
        "required": ["type", "time_s"],
        "oneOf": [{"required": ["duration_ms"]}, {"required": ["duration_ticks"]}],
        "additionalProperties": False,
    },
    {
        "type": "object",
        "properties": {"type": {"const": "trace"}, "path": {"type": "string"}},
        "required": ["type", "path"],
        "additionalProperties": False,
    },
]

SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "tick_period_ms": {"type": "number", "exclusiveMinimum": 0},
        "counter_width": {"type": "integer", "minimum": 2, "maximum": 64},
        "initial_tick": {"type": "integer", "minimum": 0},
        "run_length_s": _num,
        "tail_s": _num,
        "mode": {"enum": [*MODES, "all"]},
        "round_robin_quantum": _pos_int,
        "tasks": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "id": {"type": "integer", "minimum": 0},
                    "kind": {"enum": ["periodic", "busy", "timeout"]},
                    "priority": {"type": "integer", "minimum": 0},
                    "period_ticks": _pos_int,
                    "start_delay_ticks": {"type": "integer", "minimum": 0},
                    "timeout_ticks": {"type": "integer", "minimum": 0},
                },
                "required": ["id", "kind", "priority"],
                "additionalProperties": False,
            },
        },
        "timers": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "id": {"type": "integer", "minimum": 0},
                    "period_ticks": _pos_int,
                    "auto_reload": {"type": "boolean"},
                },
                "required": ["id", "period_ticks"],
                "additionalProperties": False,
            },
        },
        "schedule": {"type": "array", "items": {"oneOf": _window_specs}},
        "plant": {
            "type": "object",
            "properties": {
                "name": {"enum": ["plant1", "plant2"]},
                "kp": {"type": "number"},
                "ki": {"type": "number"},
                "kd": {"type": "number"},
                "ff_lead_s": {"type": "number"},
                "release_offset_ticks": {"type": "integer", "minimum": 0},
                "sample_every_ticks": _pos_int,
                "reference_clock": {"enum": ["tick", "wall"]},
            },
            "required": ["name"],
            "additionalProperties": False,
        },
        "address_map": {
            "type": "object",
            "properties": {"low": {"type": "integer", "minimum": 0}, "high": {"type": "integer", "minimum": 1}},
            "required": ["low", "high"],
            "additionalProperties": False,
        },
        "drift_sample_every_ticks": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "monte_carlo_samples": {"type": "integer", "minimum": 0},
        "oracle": {
            "type": "object",
            "properties": {
                "cases": {"type": "integer", "minimum": 0},
                "mutation": {"enum": [None, "skip_timer_command", "skip_promotion", "stale_slice"]},
                "max_n": {"type": ["integer", "null"], "minimum": 0},
                "round_robin_max_quantum": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "output_dir": {"type": "string"},
        "notes": {"type": "string"},
    },
    "required": ["name"],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class TaskSpec:
    id: int
    kind: str
    priority: int
    period_ticks: int = 0
    start_delay_ticks: int = 0
    timeout_ticks: int = 0


@dataclass(frozen=True)
class TimerSpec:
    id: int
    period_ticks: int
    auto_reload: bool = True


@dataclass(frozen=True)
class OracleSpec:
    cases: int = 10_000
    mutation: str | None = None
    max_n: int | None = None
    round_robin_max_quantum: int = 12


@dataclass
class ScenarioConfig:
    name: str
    tick_period: int = ms(0.1)
    counter_width: int = 32
    initial_tick: int = 0
    run_length: int = 0  # ns; 0 means last window end plus tail
    mode: str = "all"
    round_robin_quantum: int = 5
    tasks: list[TaskSpec] = field(default_factory=list)
    timers: list[TimerSpec] = field(default_factory=list)
    windows: list[tuple[int, int]] = field(default_factory=list)  # (start ns, duration ns)
    periodic: list[dict] = field(default_factory=list)  # raw periodic specs, for the drift rate
    plant: dict | None = None
    address_map: AddressMap = field(default_factory=AddressMap.default)
    seed: int = 0
    monte_carlo_samples: int = 0
    drift_sample_every: int = 0  # wall ticks between drift samples; 0 disables
    oracle: OracleSpec = field(default_factory=OracleSpec)
    output_dir: str = "out"
    notes: str = ""
    raw: dict = field(default_factory=dict, repr=False)
    digest: str = ""

    @property
    def modes(self) -> tuple[str, ...]:
        return MODES if self.mode == "all" else (self.mode,)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(raw: dict, extra: bytes = b"") -> str:
    h = hashlib.sha256(canonical_json(raw).encode())
    h.update(extra)
    return h.hexdigest()[:16]


def read_trace(path: Path) -> list[tuple[int, int]]:
    """Window trace: CSV rows ``start_ns,duration_ns``; lines starting with '#' are skipped."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(line for line in fh if not line.startswith("#")):
            if not row or row[0].strip() == "start_ns":
                continue
            try:
                rows.append((int(row[0]), int(row[1])))
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"{path}: bad trace row {row!r}") from exc
    return rows


def _duration(spec: dict, tick: int) -> int:
    if "duration_ticks" in spec:
        return spec["duration_ticks"] * tick
    return ms(spec["duration_ms"])


def _expand_schedule(specs: list[dict], tick: int, base: Path, seed: int) -> tuple[list[tuple[int, int]], bytes]:
    windows, trace_bytes = [], b""
    for j, spec in enumerate(specs):
        kind = spec["type"]
        if kind == "periodic":
            start = seconds(spec.get("start_s", 0))
            period = NS_PER_S / Fraction(str(spec["rate_hz"]))
            if period.denominator != 1:
                raise ConfigError(f"rate {spec['rate_hz']} Hz does not give an integer-ns period")
            dur = _duration(spec, tick)
            starts = [start + i * int(period) for i in range(spec["count"])]
            if spec.get("jitter_ns"):
                # uniform start offsets, so section phases sample the tick grid
                offs = make_rng(seed, 0x5C4ED, j).integers(0, spec["jitter_ns"], len(starts))
                starts = [s + int(o) for s, o in zip(starts, offs)]
            windows += [(s, dur) for s in starts]
        elif kind == "one_shot":
            windows.append((seconds(spec["time_s"]), _duration(spec, tick)))
        else:
            path = (base / spec["path"]).resolve()
            if not path.is_file():
                raise ConfigError(f"trace file {path} does not exist")
            trace_bytes += path.read_bytes()
            windows += read_trace(path)
    windows.sort()
    return windows, trace_bytes


def parse_config(raw: dict, base_dir: str | Path = ".") -> ScenarioConfig:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    base = Path(base_dir)
    try:
        tick = ms(raw.get("tick_period_ms", 0.1))
        windows, trace_bytes = _expand_schedule(raw.get("schedule", []), tick, base, raw.get("seed", 0))
        validate_sections(windows)
        tail = seconds(raw.get("tail_s", 0.01))
        run_length = seconds(raw.get("run_length_s", 0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not run_length:
        run_length = max((s + d for s, d in windows), default=0) + tail
    for s, d in windows:
        if s + d > run_length:
            raise ConfigError(f"window at {s} ns (+{d}) extends past the run end {run_length} ns")

    tasks = [TaskSpec(**t) for t in raw.get("tasks", [])]
    ids = [t.id for t in tasks]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate task ids")
    for t in tasks:
        if t.kind == "periodic" and not t.period_ticks:
            raise ConfigError(f"periodic task {t.id} needs period_ticks")
    timers = [TimerSpec(**t) for t in raw.get("timers", [])]
    if len({t.id for t in timers}) != len(timers):
        raise ConfigError("duplicate timer ids")
    width = raw.get("counter_width", 32)
    for t in tasks:
        if max(t.period_ticks, t.timeout_ticks, t.start_delay_ticks) >= 1 << width:
            raise ConfigError(f"task {t.id}: delay does not fit a {width}-bit counter")

    if "address_map" in raw:
        am = raw["address_map"]
        try:
            amap = AddressMap(am["low"], am["high"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        amap = AddressMap.default()

    return ScenarioConfig(
        name=raw["name"],
        tick_period=tick,
        counter_width=width,
        initial_tick=raw.get("initial_tick", 0) % (1 << width),
        run_length=run_length,
        mode=raw.get("mode", "all"),
        round_robin_quantum=raw.get("round_robin_quantum", 5),
        tasks=tasks,
        timers=timers,
        windows=windows,
        periodic=[s for s in raw.get("schedule", []) if s["type"] == "periodic"],
        plant=raw.get("plant"),
        address_map=amap,
        seed=raw.get("seed", 0),
        monte_carlo_samples=raw.get("monte_carlo_samples", 0),
        drift_sample_every=raw.get("drift_sample_every_ticks", 0),
        oracle=OracleSpec(**raw.get("oracle", {})),
        output_dir=os.environ.get(OUT_ENV) or raw.get("output_dir", "out"),
        notes=raw.get("notes", ""),
        raw=copy.deepcopy(raw),
        digest=config_hash(raw, trace_bytes),
    )


def load_config(path: str | Path, overrides: dict | None = None) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    for key, val in (overrides or {}).items():
        if isinstance(val, dict) and isinstance(raw.get(key), dict):
            raw[key] = {**raw[key], **val}
        elif val is not None:
            raw[key] = val
    return parse_config(raw, path.parent)
