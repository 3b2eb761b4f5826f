"""Sensor models, tidal-volume integration and the four breath alarms.

The flow meter applies range clipping, a per-scenario multiplicative accuracy
bias, per-sample repeatability noise and 16-bit quantization over its range.
Tidal volume is the rectangular integral of positive measured flow over one
breath. Alarms: (a) tidal volume not achieved, (b) minute volume not achieved,
(c) maximum inspiratory pressure exceeded (also truncates the breath),
(d) minimum inspiratory pressure not achieved (disconnection).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ML_S_TO_L_MIN = 0.06  # 1 mL/s = 0.06 standard L/min


@dataclass(frozen=True)
class FlowSensorModel:
    range_l_min: tuple[float, float] = (-10.0, 240.0)
    resolution_bits: int = 16
    accuracy_pct: float = 2.0  # fixed per-scenario bias bound
    repeatability_pct: float = 1.0  # per-sample noise bound
    sample_period: float = 0.001  # [s]

    def __post_init__(self) -> None:
        if self.range_l_min[0] >= self.range_l_min[1]:
            raise ValueError("flow range low must be below high")
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")


@dataclass(frozen=True)
class PressureSensorModel:
    range_mbar: tuple[float, float] = (0.0, 100.0)
    noise_sd: float = 0.05  # [mBar]
    sample_period: float = 0.001  # [s]

    def __post_init__(self) -> None:
        if self.range_mbar[0] >= self.range_mbar[1]:
            raise ValueError("pressure range low must be below high")


class FlowSensor:
    """Stateful sampler: owns its bias draw, noise stream and clip counter."""

    def __init__(self, model: FlowSensorModel, rng: np.random.Generator):
        self.model = model
        self._rng = rng
        bound = model.accuracy_pct / 100.0
        self.accuracy_bias = rng.uniform(-bound, bound) if bound > 0 else 0.0
        self.clip_count = 0
        lo, hi = model.range_l_min
        self._lsb = (hi - lo) / (2**model.resolution_bits - 1)

    def sample(self, true_flow: float) -> float:
        """Measure a true flow [mL/s]; returns the quantized reading [mL/s]."""
        rep = self.model.repeatability_pct / 100.0
        noise = self._rng.uniform(-rep, rep) if rep > 0 else None
        return self.sample_fast(true_flow, noise)

    def sample_fast(self, true_flow: float, rep_noise: float | None) -> float:
        """Same pipeline with a pre-drawn repeatability factor (hot path)."""
        lo, hi = self.model.range_l_min
        v = true_flow * ML_S_TO_L_MIN
        if v < lo or v > hi:
            self.clip_count += 1
            v = lo if v < lo else hi
        v *= 1.0 + self.accuracy_bias
        if rep_noise is not None:
            v *= 1.0 + rep_noise
        if v < lo:
            v = lo
        elif v > hi:
            v = hi
        code = round((v - lo) / self._lsb)
        return (lo + code * self._lsb) / ML_S_TO_L_MIN


class PressureSensor:
    def __init__(self, model: PressureSensorModel, rng: np.random.Generator):
        self.model = model
        self._rng = rng

    def sample(self, true_pressure: float) -> float:
        """Measure a true gauge pressure [mBar], clipped to the sensor range."""
        noise = self._rng.normal(0.0, self.model.noise_sd) if self.model.noise_sd > 0 else None
        return self.sample_fast(true_pressure, noise)

    def sample_fast(self, true_pressure: float, noise: float | None) -> float:
        v = true_pressure if noise is None else true_pressure + noise
        lo, hi = self.model.range_mbar
        if v < lo:
            return lo
        if v > hi:
            return hi
        return v


def integrate_tidal_volume(flow_trace: Sequence[float], dt: float) -> float:
    """Rectangular integral [mL] of the positive part of a flow trace [mL/s]."""
    total = 0.0
    for q in flow_trace:
        if q > 0.0:
            total += q
    return total * dt


@dataclass(frozen=True)
class AlarmThresholds:
    v_tidal_min: float  # [mL]
    minute_volume_min: float  # [mL/min]
    p_insp_max: float = 35.0  # [mBar]
    p_insp_min: float = 5.0  # [mBar]

    def __post_init__(self) -> None:
        if self.p_insp_min >= self.p_insp_max:
            raise ValueError("p_insp_min must be below p_insp_max")

    @classmethod
    def from_settings(cls, v_ref: float, bpm: float,
                      p_insp_max: float = 35.0, p_insp_min: float = 5.0) -> "AlarmThresholds":
        """Defaults derived once from the scenario's initial settings."""
        return cls(
            v_tidal_min=0.9 * v_ref,
            minute_volume_min=0.9 * v_ref * bpm,
            p_insp_max=p_insp_max,
            p_insp_min=p_insp_min,
        )


@dataclass(frozen=True)
class AlarmEvent:
    code: str  # "a" | "b" | "c" | "d"
    breath: int
    time: float  # [s]
    value: float
    threshold: float

    def describe(self) -> str:
        names = {
            "a": "tidal volume not achieved",
            "b": "minute volume not achieved",
            "c": "max inspiratory pressure exceeded",
            "d": "min inspiratory pressure not achieved",
        }
        return names[self.code]


@dataclass
class BreathRecord:
    k: int  # breath index
    t_start: float  # commanded breath start [s]
    t_end: float  # commanded breath end [s]
    t_inh_end: float  # commanded inhale/exhale boundary [s]
    phi_tgt_used: float  # set-point active during this breath [rad]
    v_tidal: float  # measured tidal volume [mL]
    p_peak: float  # peak measured inspiratory pressure [mBar]
    p_end_exp: float  # measured pressure at breath end [mBar]
    alarms: list[AlarmEvent] = field(default_factory=list)
    truncated: bool = False

    @property
    def alarm_codes(self) -> str:
        return "".join(sorted({a.code for a in self.alarms}))


def minute_volume(history: Iterable[BreathRecord], now: float) -> float:
    """Sum of tidal volumes [mL] of breaths completed in the last 60 s.

    Half-open window: a breath completed exactly 60 s ago is excluded.
    """
    return sum(r.v_tidal for r in history if now - 60.0 < r.t_end <= now)


def check_breath_alarms(
    thresholds: AlarmThresholds,
    record: BreathRecord,
    minute_vol: float,
    window_complete: bool = True,
) -> list[AlarmEvent]:
    """End-of-breath checks (a), (b), (d); (c) is checked live by the engine.

    Alarm (b) is suppressed until a full minute of history exists; the moving
    window cannot be judged against a per-minute threshold before that.
    """
    events = []
    if record.v_tidal < thresholds.v_tidal_min:
        events.append(AlarmEvent("a", record.k, record.t_end, record.v_tidal,
                                 thresholds.v_tidal_min))
    if window_complete and minute_vol < thresholds.minute_volume_min:
        events.append(AlarmEvent("b", record.k, record.t_end, minute_vol,
                                 thresholds.minute_volume_min))
    if record.p_peak < thresholds.p_insp_min:
        events.append(AlarmEvent("d", record.k, record.t_end, record.p_peak,
                                 thresholds.p_insp_min))
    return events


def overpressure(thresholds: AlarmThresholds, p_measured: float) -> bool:
    """Live check for alarm (c): the engine truncates the breath when true."""
    return p_measured > thresholds.p_insp_max
