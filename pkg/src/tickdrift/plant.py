"""Closed-loop DC-motor case studies driven through the RTOS simulator.

The motor lives in wall-clock time and is integrated on a fixed RK4 grid; the
controller lives in tick time, released by ``delay_until`` and always
assuming a full control period elapsed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .secure import Mode
from .system import PeriodicTask, SimResult, Simulation
from .timebase import NS_PER_S, ms, seconds


@dataclass(frozen=True)
class MotorParams:
    J: float = 0.008
    B: float = 0.08
    Kt: float = 0.6
    Ra: float = 1.0
    u_clamp: float = 24.0

    def __post_init__(self):
        if min(self.J, self.B, self.Kt, self.Ra, self.u_clamp) <= 0:
            raise ValueError("motor parameters must be positive")

    @property
    def decay_rate(self) -> float:
        return self.B / self.J

    @property
    def input_gain(self) -> float:
        return self.Kt / (self.J * self.Ra)

    @property
    def dc_gain(self) -> float:
        """Steady-state speed per volt."""
        return self.Kt / (self.B * self.Ra)

    def clamp(self, u: float) -> float:
        return max(-self.u_clamp, min(self.u_clamp, u))


@dataclass
class PlantState:
    omega: float = 0.0
    theta: float = 0.0
    t: int = 0  # ns


def rk4_step(state: PlantState, u: float, dt: float, params: MotorParams) -> PlantState:
    """One RK4 step of theta' = omega, omega' = -(B/J) omega + (Kt/(J Ra)) u over ``dt`` seconds."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    a, b = params.decay_rate, params.input_gain

    def f(w):
        return -a * w + b * u

    w = state.omega
    k1 = f(w)
    k2 = f(w + 0.5 * dt * k1)
    k3 = f(w + 0.5 * dt * k2)
    k4 = f(w + dt * k3)
    omega = w + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    # theta' = omega, with the stage values of omega above
    theta = state.theta + dt / 6.0 * (w + 2 * (w + 0.5 * dt * k1) + 2 * (w + 0.5 * dt * k2) + (w + dt * k3))
    return PlantState(omega, theta, state.t + round(dt * NS_PER_S))


class Motor:
    """Plant integrated on a fixed grid anchored at t = 0, input held between updates."""

    def __init__(self, params: MotorParams, step_ns: int, omega0: float = 0.0, theta0: float = 0.0):
        self.params = params
        self.step_ns = step_ns
        self.state = PlantState(omega0, theta0, 0)
        self.u = 0.0

    def advance_to(self, t: int) -> PlantState:
        s = self.state
        while s.t < t:
            nxt = min(t, (s.t // self.step_ns + 1) * self.step_ns)
            s = rk4_step(s, self.u, (nxt - s.t) / NS_PER_S, self.params)
            s.t = nxt
        self.state = s
        return s


def reference_speed(t: float) -> float:
    return 100.0 + 15.0 * math.sin(4.0 * math.pi * t)


POS_AMPLITUDE = 2.735
POS_FREQ = 1.871


def reference_position(t: float) -> float:
    return POS_AMPLITUDE * math.sin(2.0 * math.pi * POS_FREQ * t)


def reference_position_rate(t: float) -> float:
    w = 2.0 * math.pi * POS_FREQ
    return POS_AMPLITUDE * w * math.cos(w * t)


def reference_position_accel(t: float) -> float:
    w = 2.0 * math.pi * POS_FREQ
    return -POS_AMPLITUDE * w * w * math.sin(w * t)


@dataclass
class PIDController:
    kp: float
    ki: float
    kd: float
    period: float  # seconds; used for every update regardless of elapsed time
    u_clamp: float = 24.0
    integral: float = 0.0
    prev_error: float = 0.0

    def step(self, measurement: float, reference: float) -> float:
        error = reference - measurement
        self.integral += error * self.period
        derivative = (error - self.prev_error) / self.period
        control = self.kp * error + self.ki * self.integral + self.kd * derivative
        self.prev_error = error
        return max(-self.u_clamp, min(self.u_clamp, control))


@dataclass
class PDFeedForward:
    """Model-inversion feed-forward on the position reference plus PD feedback on (theta, omega)."""

    kp: float
    kd: float
    params: MotorParams
    ff_lead: float = 0.0  # seconds the feed-forward looks ahead

    def step(self, theta: float, omega: float, t_ref: float) -> float:
        p = self.params
        tf = t_ref + self.ff_lead
        u_ff = (p.J * reference_position_accel(tf) + p.B * reference_position_rate(tf)) * p.Ra / p.Kt
        u = u_ff + self.kp * (reference_position(t_ref) - theta) + self.kd * (reference_position_rate(t_ref) - omega)
        return p.clamp(u)


@dataclass
class PlantScenario:
    name: str
    plant: str  # "speed" or "position"
    run_length: int
    windows: list[tuple[int, int]]
    tick_period: int = ms(0.1)
    control_period_ticks: int = 200
    release_offset_ticks: int = 0
    sample_every_ticks: int = 10
    reference_clock: str = "tick"  # controller evaluates the reference at tick time or wall time
    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0
    ff_lead: float = 0.0
    omega0: float = 0.0
    theta0: float = 0.0
    metrics_from: float = 2.0  # seconds, post-transient
    deviation_window: tuple[float, float] | None = None
    motor: MotorParams = field(default_factory=MotorParams)

    def __post_init__(self):
        if self.plant not in ("speed", "position"):
            raise ValueError(f"unknown plant {self.plant!r}")
        if self.reference_clock not in ("tick", "wall"):
            raise ValueError("reference_clock must be 'tick' or 'wall'")
        for start, dur in self.windows:
            if start + dur > self.run_length:
                raise ValueError(f"window at {start} (+{dur}) extends past the run end {self.run_length}")

    @property
    def control_period(self) -> float:
        return self.control_period_ticks * self.tick_period / NS_PER_S

    def reference(self, t: float) -> float:
        return reference_speed(t) if self.plant == "speed" else reference_position(t)


def plant1_scenario(**overrides) -> PlantScenario:
    """Speed PID under a 100 Hz stream of two-tick freezes from t = 5 s."""
    tick = ms(0.1)
    windows = [(seconds(5) + i * ms(10), 2 * tick) for i in range(1000)]
    base = PlantScenario(
        name="plant1", plant="speed", run_length=seconds(15), windows=windows, tick_period=tick,
        reference_clock="tick", kp=0.45, ki=25.0, kd=0.0, omega0=0.0, deviation_window=(12.0, 15.0),
    )
    return replace(base, **overrides)


def plant2_scenario(**overrides) -> PlantScenario:
    """Position servo under one 190-tick freeze placed just after a release."""
    tick = ms(0.1)
    base = PlantScenario(
        name="plant2", plant="position", run_length=seconds(4), windows=[(seconds(2.2003), 190 * tick)],
        tick_period=tick, reference_clock="wall", kp=20.0, kd=0.3, ff_lead=0.01,
        omega0=reference_position_rate(0.0),
        deviation_window=(2.0, 4.0),
    )
    return replace(base, **overrides)


@dataclass
class Series:
    time_s: np.ndarray
    reference: np.ndarray
    state: np.ndarray
    command_u: np.ndarray
    tick_count: np.ndarray
    mode: str


@dataclass
class RunMetrics:
    rmse: float
    mean_abs_err: float
    peak_abs_err: float
    max_state_dev: float = 0.0
    max_command_dev: float = 0.0
    window_state_dev: float = 0.0
    window_command_dev: float = 0.0


@dataclass
class PlantRun:
    scenario: PlantScenario
    mode: Mode
    series: Series
    releases: list[tuple[int, int]]  # (time ns, absolute tick)
    sim: SimResult
    metrics: RunMetrics | None = None


def run_scenario(scn: PlantScenario, mode: Mode) -> PlantRun:
    motor = Motor(scn.motor, scn.tick_period, scn.omega0, scn.theta0)
    if scn.plant == "speed":
        ctrl = PIDController(scn.kp, scn.ki, scn.kd, scn.control_period, scn.motor.u_clamp)
    else:
        ctrl = PDFeedForward(scn.kp, scn.kd, scn.motor, scn.ff_lead)

    def body(sim, now, task):
        s = motor.advance_to(now)
        if scn.reference_clock == "tick":
            t_ref = sim.kernel_elapsed() * scn.tick_period / NS_PER_S
        else:
            t_ref = now / NS_PER_S
        if scn.plant == "speed":
            motor.u = ctrl.step(s.omega, reference_speed(t_ref))
        else:
            motor.u = ctrl.step(s.theta, s.omega, t_ref)

    rows = []

    def sample(sim, now):
        if sim.wall_ticks % scn.sample_every_ticks:
            return
        s = motor.advance_to(now)
        t = now / NS_PER_S
        rows.append((t, scn.reference(t), s.omega if scn.plant == "speed" else s.theta, motor.u,
                     sim.kernel_elapsed()))

    task = PeriodicTask(0, priority=2, period=scn.control_period_ticks, body=body,
                        start_delay=scn.release_offset_ticks)
    sim = Simulation(scn.tick_period, mode, scn.windows, scn.run_length, tasks=[task],
                     record_trace=False, observers=[sample], service_kind="generic")
    result = sim.run()
    arr = np.array(rows, dtype=float).reshape(-1, 5)
    series = Series(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4].astype(np.int64), mode.value)
    run = PlantRun(scn, mode, series, task.releases, result)
    run.metrics = tracking_metrics(series, scn.metrics_from)
    return run


def tracking_metrics(series: Series, metrics_from: float = 2.0) -> RunMetrics:
    err = series.state - series.reference
    late = np.abs(err[series.time_s >= metrics_from])
    return RunMetrics(
        rmse=float(np.sqrt(np.mean(err ** 2))),
        mean_abs_err=float(late.mean()) if late.size else 0.0,
        peak_abs_err=float(late.max()) if late.size else 0.0,
    )


def compute_metrics(series_baseline: Series, series_test: Series, window: tuple[float, float] | None = None,
                    metrics_from: float = 2.0) -> RunMetrics:
    """Tracking metrics of ``series_test`` plus its deviations from the baseline run."""
    if series_baseline.time_s.shape != series_test.time_s.shape or not np.array_equal(
            series_baseline.time_s, series_test.time_s):
        raise ValueError("series do not share a sampling grid")
    m = tracking_metrics(series_test, metrics_from)
    ds = np.abs(series_test.state - series_baseline.state)
    du = np.abs(series_test.command_u - series_baseline.command_u)
    m.max_state_dev = float(ds.max()) if ds.size else 0.0
    m.max_command_dev = float(du.max()) if du.size else 0.0
    if window is not None:
        sel = (series_test.time_s >= window[0]) & (series_test.time_s <= window[1])
        m.window_state_dev = float(ds[sel].max()) if sel.any() else 0.0
        m.window_command_dev = float(du[sel].max()) if sel.any() else 0.0
    return m


def run_all_modes(scn: PlantScenario) -> dict[Mode, PlantRun]:
    runs = {mode: run_scenario(scn, mode) for mode in Mode}
    base = runs[Mode.BASELINE].series
    for run in runs.values():
        run.metrics = compute_metrics(base, run.series, scn.deviation_window, scn.metrics_from)
    return runs


def release_lags(base: PlantRun, test: PlantRun) -> list[int]:
    """Per-release wall-time lag of ``test`` behind ``base``, in whole ticks, release by release."""
    tick = base.scenario.tick_period
    return [(tu - tb) // tick for (tb, _), (tu, _) in zip(base.releases, test.releases)]


@dataclass(frozen=True)
class ReleaseShift:
    base_next: int  # ns, first baseline release after ``after``
    test_next: int
    skipped: int  # baseline releases with no counterpart before test_next

    @property
    def shift(self) -> int:
        return self.test_next - self.base_next


def release_shift(base: PlantRun, test: PlantRun, after: int) -> ReleaseShift:
    b_next = min(t for t, _ in base.releases if t > after)
    u_next = min(t for t, _ in test.releases if t > after)
    skipped = sum(1 for t, _ in base.releases if after < t < u_next) - sum(
        1 for t, _ in test.releases if after < t < u_next)
    return ReleaseShift(b_next, u_next, skipped)
