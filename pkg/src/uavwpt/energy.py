"""Rotary-wing flight power and two-stage wireless charging model.

All energies are in Joules, powers in Watts, link-budget quantities in dB.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from scipy import integrate

from .errors import (
    CannotChargeError,
    DegenerateGeometryError,
    InvalidParameterError,
    ThresholdUnreachableError,
)

WH_TO_J = 3600.0
FSPL_CONSTANT_DB = 147.55
DERIVED_RTOL = 1e-3

# Inputs of derive_uav_constants; everything else in UavParams is derived.
RAW_UAV_FIELDS = (
    "m_kg", "W", "rho", "b", "R", "A", "c", "s", "delta", "omega", "k",
    "S_FP", "V_cruise", "E_full", "SOC_min",
)


@dataclass(frozen=True)
class UavParams:
    m_kg: float
    W: float
    rho: float
    b: float
    R: float
    A: float
    c: float
    s: float
    delta: float
    omega: float
    k: float
    U_tip: float
    v0: float
    S_FP: float
    d0: float
    P0: float
    Pi: float
    V_cruise: float
    E_full: float
    SOC_min: float

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "SOC_min":
                if not 0.0 <= value < 1.0:
                    raise InvalidParameterError(f"SOC_min must lie in [0, 1), got {value}")
            elif not (math.isfinite(value) and value > 0):
                raise InvalidParameterError(f"{f.name} must be positive, got {value}")
        expected = _derived_constants(self.W, self.rho, self.A, self.s, self.delta,
                                      self.omega, self.R, self.k, self.S_FP)
        for name, value in expected.items():
            stored = getattr(self, name)
            if abs(stored - value) > DERIVED_RTOL * abs(value):
                raise InvalidParameterError(
                    f"{name}={stored} inconsistent with physical fields (expected {value:.6g})")

    @property
    def flight_power(self) -> float:
        """Power draw at the cruise speed (W)."""
        return flight_power(self, self.V_cruise)

    @property
    def hover_power(self) -> float:
        return self.P0 + self.Pi

    @property
    def usable_energy(self) -> float:
        """Energy one sortie may spend, (1 - SOC_min) * E_full (J)."""
        return (1.0 - self.SOC_min) * self.E_full

    @property
    def usable_range_m(self) -> float:
        """Longest feasible sortie at cruise speed (m)."""
        return self.usable_energy * self.V_cruise / self.flight_power

    def replace(self, **changes) -> "UavParams":
        raw = {name: getattr(self, name) for name in RAW_UAV_FIELDS}
        raw.update(changes)
        return derive_uav_constants(**raw)


@dataclass(frozen=True)
class WptParams:
    P_t: float = 58.0
    G_t: float = 58.0
    G_uav: float = 0.0
    f: float = 915e6
    eta: float = 0.6
    P_eps: float = 17.0
    H: float = 10.0

    def __post_init__(self):
        if not self.f > 0:
            raise InvalidParameterError(f"carrier frequency must be positive, got {self.f}")
        if not 0.0 < self.eta <= 1.0:
            raise InvalidParameterError(f"eta must lie in (0, 1], got {self.eta}")
        if not self.H > 0:
            raise InvalidParameterError(f"altitude H must be positive, got {self.H}")

    @property
    def link_constant_db(self) -> float:
        """Received power at 1 m slant distance: P_t + G_t + G_uav - 20 lg f + 147.55."""
        return self.P_t + self.G_t + self.G_uav - 20.0 * math.log10(self.f) + FSPL_CONSTANT_DB

    def replace(self, **changes) -> "WptParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class RechargeResult:
    x_offset_start: float
    T_charge_fly: float
    E_fly: float
    T_hover: float
    E_hover_net: float
    # DC energy the link delivers during the approach; E_fly is the part the
    # battery can absorb, min(E_fly_received, E_full - E_remaining).
    E_fly_received: float


def _derived_constants(W, rho, A, s, delta, omega, R, k, S_FP):
    return {
        "U_tip": omega * R,
        "v0": math.sqrt(W / (2.0 * rho * A)),
        "d0": S_FP / (s * A),
        "P0": delta / 8.0 * rho * s * A * omega**3 * R**3,
        "Pi": (1.0 + k) * W**1.5 / math.sqrt(2.0 * rho * A),
    }


def derive_uav_constants(**raw) -> UavParams:
    """Build a :class:`UavParams` from the raw physical fields.

    The blade power, induced power, mean induced velocity, tip speed and
    fuselage drag ratio are computed, not read.
    """
    missing = [name for name in RAW_UAV_FIELDS if name not in raw]
    if missing:
        raise InvalidParameterError(f"missing UAV fields: {', '.join(missing)}")
    extra = set(raw) - set(RAW_UAV_FIELDS)
    if extra:
        raise InvalidParameterError(f"unknown UAV fields: {', '.join(sorted(extra))}")
    values = {name: float(raw[name]) for name in RAW_UAV_FIELDS}
    for name, value in values.items():
        if name != "SOC_min" and not (math.isfinite(value) and value > 0):
            raise InvalidParameterError(f"{name} must be positive, got {value}")
    derived = _derived_constants(values["W"], values["rho"], values["A"], values["s"],
                                 values["delta"], values["omega"], values["R"],
                                 values["k"], values["S_FP"])
    return UavParams(**values, **derived)


def flight_power(uav: UavParams, V: float) -> float:
    """Rotary-wing power draw (W) at constant horizontal speed ``V`` (m/s)."""
    if V < 0 or not math.isfinite(V):
        raise InvalidParameterError(f"speed must be non-negative, got {V}")
    blade = uav.P0 * (1.0 + 3.0 * V**2 / uav.U_tip**2)
    ratio = V**2 / (2.0 * uav.v0**2)
    induced = uav.Pi * math.sqrt(math.sqrt(1.0 + ratio**2) - ratio)
    parasite = 0.5 * uav.d0 * uav.rho * uav.s * uav.A * V**3
    return blade + induced + parasite


def path_loss_db(f: float, d: float) -> float:
    """Free-space path loss (dB) at carrier ``f`` (Hz) and distance ``d`` (m)."""
    if not f > 0:
        raise InvalidParameterError(f"frequency must be positive, got {f}")
    if not d > 0:
        raise InvalidParameterError(f"distance must be positive, got {d}")
    return 20.0 * math.log10(f) + 20.0 * math.log10(d) - FSPL_CONSTANT_DB


def charge_power_dbw(wpt: WptParams, d: float) -> float:
    return wpt.P_t + wpt.G_t + wpt.G_uav - path_loss_db(wpt.f, d)


def dbw_to_watt(p_dbw: float) -> float:
    return 10.0 ** (p_dbw / 10.0)


def charge_start_offset(wpt: WptParams) -> float:
    """Horizontal distance from the base station at which harvesting activates (m)."""
    radicand = 10.0 ** ((wpt.link_constant_db - wpt.P_eps) / 10.0) - wpt.H**2
    if radicand < 0:
        raise ThresholdUnreachableError(
            f"activation threshold {wpt.P_eps} dBW exceeds the received power overhead "
            f"({charge_power_dbw(wpt, wpt.H):.3f} dBW)")
    return math.sqrt(radicand)


def inflight_charge_energy(wpt: WptParams, uav: UavParams, x_start_offset: float) -> float:
    """DC energy (J) received while flying the last ``x_start_offset`` metres to the station.

    Closed-form integral of eta * 10^(P_charge(d_t)/10) over the approach at
    cruise speed, with d_t the slant distance at time t.
    """
    if x_start_offset < 0:
        raise InvalidParameterError(f"offset must be non-negative, got {x_start_offset}")
    V = uav.V_cruise
    t_fly = x_start_offset / V
    a2 = x_start_offset**2 + wpt.H**2
    b2 = -2.0 * V * x_start_offset
    c2 = V**2
    disc = 4.0 * a2 * c2 - b2**2
    if not disc > 0:
        raise DegenerateGeometryError("zero altitude makes the charging integral singular")
    root = math.sqrt(disc)
    scale = 2.0 * wpt.eta * dbw_to_watt(wpt.link_constant_db) / root
    return scale * (math.atan((b2 + 2.0 * c2 * t_fly) / root) - math.atan(b2 / root))


def inflight_charge_energy_quad(wpt: WptParams, uav: UavParams, x_start_offset: float) -> float:
    """Quadrature reference for :func:`inflight_charge_energy`.

    Subdivision limits are doubled until two successive estimates agree to
    1e-9 relative.
    """
    if x_start_offset < 0:
        raise InvalidParameterError(f"offset must be non-negative, got {x_start_offset}")
    if x_start_offset == 0:
        return 0.0
    V = uav.V_cruise
    t_fly = x_start_offset / V

    def dc_power(t):
        d = math.hypot(x_start_offset - V * t, wpt.H)
        return wpt.eta * dbw_to_watt(charge_power_dbw(wpt, d))

    previous = None
    limit = 50
    while limit <= 12800:
        value, _ = integrate.quad(dc_power, 0.0, t_fly, limit=limit, epsabs=0.0, epsrel=1e-12)
        if previous is not None and abs(value - previous) <= 1e-9 * abs(value):
            return value
        previous = value
        limit *= 2
    return previous


def net_hover_power(wpt: WptParams, uav: UavParams) -> float:
    """Harvested DC power minus hover draw while parked above the station (W)."""
    return wpt.eta * dbw_to_watt(charge_power_dbw(wpt, wpt.H)) - flight_power(uav, 0.0)


def recharge_event(wpt: WptParams, uav: UavParams, E_remaining: float) -> RechargeResult:
    """Charge from ``E_remaining`` back to a full battery on a depot return."""
    if not 0.0 <= E_remaining <= uav.E_full * (1.0 + 1e-12):
        raise InvalidParameterError(
            f"remaining energy {E_remaining} outside [0, {uav.E_full}]")
    net = net_hover_power(wpt, uav)
    if not net > 0:
        raise CannotChargeError(
            f"hover charging yields {net:.6g} W net; the UAV can never refill")
    offset = charge_start_offset(wpt)
    received = inflight_charge_energy(wpt, uav, offset)
    deficit = max(uav.E_full - E_remaining, 0.0)
    e_fly = min(received, deficit)
    hover_energy = deficit - e_fly
    return RechargeResult(
        x_offset_start=offset,
        T_charge_fly=offset / uav.V_cruise,
        E_fly=e_fly,
        T_hover=hover_energy / net,
        E_hover_net=hover_energy,
        E_fly_received=received,
    )


class ChargeProfile:
    """Precomputed recharge constants for repeated hover-time queries.

    ``hover_time(used)`` equals ``recharge_event(E_full - used).T_hover`` but
    skips the link-budget evaluation, which is fixed per parameter set.
    """

    def __init__(self, uav: UavParams, wpt: WptParams):
        self.uav = uav
        self.wpt = wpt
        self.net_power = net_hover_power(wpt, uav)
        if not self.net_power > 0:
            raise CannotChargeError(
                f"hover charging yields {self.net_power:.6g} W net; the UAV can never refill")
        self.e_fly = inflight_charge_energy(wpt, uav, charge_start_offset(wpt))

    def hover_time(self, used: float) -> float:
        """Hover seconds needed after a sortie that consumed ``used`` J."""
        return max(used - self.e_fly, 0.0) / self.net_power


# -- parameter files --------------------------------------------------------

def _read_json(source) -> dict:
    if isinstance(source, dict):
        return dict(source)
    with open(source, encoding="utf-8") as fh:
        return json.load(fh)


def uav_from_dict(data: dict) -> UavParams:
    data = dict(data)
    data.pop("format_version", None)
    if "E_full_Wh" in data:
        if "E_full" in data:
            raise InvalidParameterError("give either E_full (J) or E_full_Wh, not both")
        data["E_full"] = float(data.pop("E_full_Wh")) * WH_TO_J
    raw = {name: data.pop(name) for name in RAW_UAV_FIELDS if name in data}
    stored = {name: data.pop(name) for name in ("U_tip", "v0", "d0", "P0", "Pi") if name in data}
    if data:
        raise InvalidParameterError(f"unknown UAV fields: {', '.join(sorted(data))}")
    params = derive_uav_constants(**raw)
    if stored:
        # Stored derived values must agree with the physics; keep the stored ones.
        params = UavParams(**{**dataclasses.asdict(params), **{k: float(v) for k, v in stored.items()}})
    return params


def wpt_from_dict(data: dict) -> WptParams:
    data = dict(data)
    data.pop("format_version", None)
    names = {f.name for f in dataclasses.fields(WptParams)}
    unknown = set(data) - names
    if unknown:
        raise InvalidParameterError(f"unknown WPT fields: {', '.join(sorted(unknown))}")
    return WptParams(**{k: float(v) for k, v in data.items()})


def load_uav_params(source=None) -> UavParams:
    """Read UAV parameters from a JSON file; ``None`` gives the packaged defaults."""
    if source is None:
        return default_uav()
    return uav_from_dict(_read_json(source))


def load_wpt_params(source=None) -> WptParams:
    if source is None:
        return default_wpt()
    return wpt_from_dict(_read_json(source))


def save_params(params, path) -> None:
    data = {"format_version": 1, **dataclasses.asdict(params)}
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def _packaged(name: str) -> dict:
    return json.loads(resources.files("uavwpt").joinpath("params", name).read_text("utf-8"))


def default_uav() -> UavParams:
    return uav_from_dict(_packaged("default_uav.json"))


def default_wpt() -> WptParams:
    return wpt_from_dict(_packaged("default_wpt.json"))
