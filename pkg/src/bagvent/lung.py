"""Static piecewise-linear lung mechanics with airway resistance.

The pressure-volume curve has three compliance segments separated by the lower
and upper inflection points (LIP, UIP). Volumes are mL, pressures mBar gauge,
resistance mBar/(L/s). Dynamics are a plain volume integration against the
static curve; there is no inertance and no spontaneous effort.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

DT_MAX = 0.001  # hard cap on the integration step [s]


class LungModelError(ValueError):
    pass


@dataclass(frozen=True)
class LungParameters:
    name: str
    c_w: float  # chest wall compliance [mL/mBar]
    r_aw: float  # airway resistance [mBar/(L/s)]
    frc_zeep: float  # functional residual capacity at ZEEP [mL]
    lip: float  # lower inflection point [mBar]
    uip: float  # upper inflection point [mBar]
    c_1: float  # compliance below LIP [mL/mBar]
    c_rs: float  # respiratory compliance between LIP and UIP [mL/mBar]
    c_2: float  # compliance above UIP [mL/mBar]

    def __post_init__(self) -> None:
        if min(self.c_w, self.c_1, self.c_rs, self.c_2) <= 0:
            raise LungModelError("all compliances must be positive")
        if not (0 < self.lip < self.uip):
            raise LungModelError("need 0 < LIP < UIP")
        if self.c_rs >= self.c_w:
            raise LungModelError("c_rs must be below c_w for a positive lung compliance")

    @property
    def c_lung(self) -> float:
        """Lung compliance from the series split 1/c_rs = 1/c_w + 1/c_lung."""
        return 1.0 / (1.0 / self.c_rs - 1.0 / self.c_w)

    @property
    def v_lip(self) -> float:
        return self.frc_zeep + self.c_1 * self.lip

    @property
    def v_uip(self) -> float:
        return self.v_lip + self.c_rs * (self.uip - self.lip)


@dataclass(frozen=True)
class LungState:
    v_lung: float  # current lung volume [mL]
    p_alv: float  # alveolar pressure from the static curve [mBar gauge]
    clamped: bool = False  # set when an exhale step undershot FRC


def volume_from_pressure(params: LungParameters, p: float) -> float:
    """Lung volume [mL] on the static curve at gauge pressure p >= 0."""
    if p < 0:
        raise LungModelError("static curve is defined for p >= 0")
    if p <= params.lip:
        return params.frc_zeep + params.c_1 * p
    if p <= params.uip:
        return params.v_lip + params.c_rs * (p - params.lip)
    return params.v_uip + params.c_2 * (p - params.uip)


def pressure_from_volume(params: LungParameters, v: float) -> float:
    """Inverse of volume_from_pressure; domain error below FRC."""
    if v < params.frc_zeep - 1e-9:
        raise LungModelError(f"volume {v:.3f} mL below FRC {params.frc_zeep} mL")
    if v <= params.v_lip:
        return max(0.0, (v - params.frc_zeep) / params.c_1)
    if v <= params.v_uip:
        return params.lip + (v - params.v_lip) / params.c_rs
    return params.uip + (v - params.v_uip) / params.c_2


def make_state(params: LungParameters, p: float) -> LungState:
    """Equilibrium state at gauge pressure p (e.g. the PEEP level)."""
    v = volume_from_pressure(params, p)
    return LungState(v_lung=v, p_alv=pressure_from_volume(params, v))


def airway_pressure(params: LungParameters, state: LungState, flow_in: float) -> float:
    """Pressure at the airway opening [mBar]; flow_in [mL/s], positive inflates."""
    return state.p_alv + params.r_aw * (flow_in / 1000.0)


def step_lung(params: LungParameters, state: LungState, flow_in: float, dt: float) -> LungState:
    """Advance the lung volume by flow_in*dt and refresh the static pressure.

    Exhale flows that would undershoot FRC are clamped there and flagged.
    """
    if not (0.0 < dt <= DT_MAX + 1e-12):
        raise LungModelError(f"dt must be in (0, {DT_MAX}] s")
    v = state.v_lung + flow_in * dt
    clamped = False
    if v < params.frc_zeep:
        v = params.frc_zeep
        clamped = True
    return LungState(v_lung=v, p_alv=pressure_from_volume(params, v), clamped=clamped)


HEALTHY = LungParameters(
    name="healthy", c_w=200.0, r_aw=5.0, frc_zeep=2000.0,
    lip=5.0, uip=35.0, c_1=25.0, c_rs=60.0, c_2=20.0,
)

ARDS = LungParameters(
    name="ards", c_w=93.0, r_aw=5.0, frc_zeep=1102.0,
    lip=12.0, uip=35.0, c_1=8.0, c_rs=35.0, c_2=8.0,
)

PRESETS = {"healthy": HEALTHY, "ards": ARDS}


def preset(name: str, r_aw: float | None = None) -> LungParameters:
    try:
        params = PRESETS[name]
    except KeyError:
        raise LungModelError(f"unknown patient preset {name!r}") from None
    if r_aw is not None:
        params = replace(params, r_aw=r_aw)
    return params
