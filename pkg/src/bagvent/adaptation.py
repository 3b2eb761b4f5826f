"""Per-breath set-point adaptation with a Lipschitz-safe integral gain.

The motor target angle is updated once per breath by integrating the tidal
volume error: phi(k+1) = phi(k) + g_i * (v_ref - v_measured). Choosing
g_i = 1 / dV, where dV bounds the slope of the (strictly increasing) angle-to-
volume map over all plant variations, makes the approach monotone with no
overshoot; estimate_sensitivity recovers dV from a measured grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence


class AdaptationError(ValueError):
    pass


@dataclass(frozen=True)
class AdaptationState:
    phi_tgt: float  # current motor target set-point [rad]
    g_i: float  # integral gain [rad/mL]
    phi_min: float  # lower clamp (inhale start angle) [rad]
    phi_max: float  # upper clamp (mechanical end stop) [rad]
    k: int = 0  # breath index
    enabled: bool = True
    saturated: bool = False  # set when the last update hit a clamp

    def __post_init__(self) -> None:
        if self.g_i <= 0:
            raise AdaptationError("g_i must be positive")
        if not (self.phi_min <= self.phi_tgt <= self.phi_max):
            raise AdaptationError("phi_tgt outside [phi_min, phi_max]")


@dataclass(frozen=True)
class SensitivityCase:
    label: str
    phi: tuple[float, ...]  # grid angles [rad], ascending, uniform spacing
    volume: tuple[float, ...]  # measured tidal volumes [mL]


@dataclass(frozen=True)
class SensitivityGrid:
    cases: tuple[SensitivityCase, ...]
    delta_phi: float  # grid step [rad]

    def __post_init__(self) -> None:
        if self.delta_phi <= 0:
            raise AdaptationError("delta_phi must be positive")
        for case in self.cases:
            if len(case.phi) < 2 or len(case.phi) != len(case.volume):
                raise AdaptationError(f"case {case.label!r} needs >= 2 aligned grid points")


def estimate_sensitivity(grid: SensitivityGrid, monotone_tol: float = 0.0) -> float:
    """Max forward-difference slope [mL/rad] over all cases and grid positions."""
    best = -math.inf
    for case in grid.cases:
        for j in range(len(case.phi) - 1):
            dv = case.volume[j + 1] - case.volume[j]
            if dv <= -monotone_tol:
                raise AdaptationError(
                    f"case {case.label!r} not increasing at phi={case.phi[j]:.3f}"
                )
            best = max(best, dv / grid.delta_phi)
    if best <= 0:
        raise AdaptationError("grid yields a nonpositive sensitivity")
    return best


def gain_from_sensitivity(dv: float, safety_round: bool = True) -> float:
    """Integral gain g_i = 1/dV [rad/mL], optionally rounded down to 1 sig fig."""
    if dv <= 0:
        raise AdaptationError("dV must be positive")
    g = 1.0 / dv
    if not safety_round:
        return g
    exponent = math.floor(math.log10(g))
    scale = 10.0**exponent
    return math.floor(g / scale) * scale


def adapt_setpoint(state: AdaptationState, v_ref: float, v_measured: float) -> AdaptationState:
    """One integral update of the set-point, clamped to the mechanical range."""
    if not state.enabled:
        return state
    if v_measured < 0:
        raise AdaptationError("v_measured must be nonnegative")
    phi_new = state.phi_tgt + state.g_i * (v_ref - v_measured)
    clamped = phi_new < state.phi_min or phi_new > state.phi_max
    phi_new = min(max(phi_new, state.phi_min), state.phi_max)
    return replace(state, phi_tgt=phi_new, k=state.k + 1, saturated=clamped)


@dataclass(frozen=True)
class ConvergenceReport:
    ok: bool
    precondition_ok: bool
    monotone: bool  # approach never crosses phi_ref and never backs away
    converged: bool  # |phi - phi_ref| below tolerance at the end
    phi_ref: float
    final_error: float
    iterations: int
    detail: str = ""


def _bisect_root(plant: Callable[[float], float], v_ref: float, lo: float, hi: float) -> float:
    f_lo, f_hi = plant(lo) - v_ref, plant(hi) - v_ref
    if f_lo > 0 or f_hi < 0:
        raise AdaptationError("v_ref not attainable on [phi_min, phi_max]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if plant(mid) - v_ref <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def verify_convergence(
    plant: Callable[[float], float],
    v_ref: float,
    state0: AdaptationState,
    n: int,
    tol: float = 1e-6,
    slope_samples: int = 400,
) -> ConvergenceReport:
    """Run the adaptation against a plant and check the convergence claims.

    Asserts (a) monotone non-crossing approach of phi_tgt toward the angle
    solving plant(phi) = v_ref and (b) |phi_tgt - phi_ref| <= tol after n
    updates. A max plant slope above 1/g_i is reported as a distinct
    precondition violation; check failures are results, not exceptions.
    """
    lo, hi = state0.phi_min, state0.phi_max
    max_slope = 0.0
    prev = plant(lo)
    for j in range(1, slope_samples + 1):
        phi = lo + (hi - lo) * j / slope_samples
        val = plant(phi)
        if val < prev:
            return ConvergenceReport(
                False, False, False, False, math.nan, math.nan, 0,
                "plant is not monotonically increasing",
            )
        max_slope = max(max_slope, (val - prev) / ((hi - lo) / slope_samples))
        prev = val
    if max_slope > 1.0 / state0.g_i * (1.0 + 1e-9):
        return ConvergenceReport(
            False, False, False, False, math.nan, math.nan, 0,
            f"gain too large for plant slope ({max_slope:.1f} > 1/g_i)",
        )

    phi_ref = _bisect_root(plant, v_ref, lo, hi)
    state = state0
    side0 = math.copysign(1.0, phi_ref - state.phi_tgt) if phi_ref != state.phi_tgt else 0.0
    prev_err = abs(phi_ref - state.phi_tgt)
    monotone = True
    for _ in range(n):
        state = adapt_setpoint(state, v_ref, plant(state.phi_tgt))
        err = phi_ref - state.phi_tgt
        if side0 != 0.0 and math.copysign(1.0, err) != side0 and abs(err) > 1e-12:
            monotone = False  # crossed phi_ref
        if abs(err) > prev_err + 1e-12:
            monotone = False  # moved away
        prev_err = abs(err)
    converged = prev_err <= tol
    return ConvergenceReport(
        monotone and converged, True, monotone, converged, phi_ref, prev_err, n
    )


def piecewise_linear_plant(
    breakpoints: Sequence[float], values: Sequence[float]
) -> Callable[[float], float]:
    """Monotone piecewise-linear map phi -> volume for the property campaigns."""
    bp = list(breakpoints)
    vv = list(values)
    if len(bp) != len(vv) or len(bp) < 2:
        raise AdaptationError("need aligned breakpoints/values with >= 2 points")

    def f(phi: float) -> float:
        if phi <= bp[0]:
            return vv[0]
        if phi >= bp[-1]:
            return vv[-1]
        for j in range(len(bp) - 1):
            if phi <= bp[j + 1]:
                w = (phi - bp[j]) / (bp[j + 1] - bp[j])
                return vv[j] + w * (vv[j + 1] - vv[j])
        return vv[-1]

    return f
