"""Instances, solutions, SOC simulation, mission cost and constraint checks.

Coordinates and distances are in km; times returned to callers are in hours.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .energy import UavParams, WptParams, recharge_event
from .errors import InfeasibleInstanceError, InfeasibleRouteError, InvalidParameterError

FORMAT_VERSION = 1
KM = 1000.0
HOUR = 3600.0
# Relative slack (fraction of E_full) on the per-sortie energy cap.
ENERGY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Instance:
    coords: np.ndarray
    side_km: float = 8.0
    seed: Optional[int] = None

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2 or coords.shape[0] < 2:
            raise InvalidParameterError("coords must be an (N+1) x 2 array with N >= 1")
        if not self.side_km > 0:
            raise InvalidParameterError(f"side_km must be positive, got {self.side_km}")
        if not np.all(np.isfinite(coords)):
            raise InvalidParameterError("coords must be finite")
        if np.any(coords < -1e-12) or np.any(coords > self.side_km + 1e-12):
            raise InvalidParameterError(f"coords must lie in [0, {self.side_km}]^2")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        """Number of task nodes (excluding the base station)."""
        return self.coords.shape[0] - 1

    @cached_property
    def dist(self) -> np.ndarray:
        d = dist_matrix(self)
        d.setflags(write=False)
        return d

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (self.side_km == other.side_km and self.seed == other.seed
                and np.array_equal(self.coords, other.coords))

    __hash__ = None


@dataclass(frozen=True)
class Solution:
    route: tuple

    def __post_init__(self):
        object.__setattr__(self, "route", tuple(int(i) for i in self.route))

    @property
    def K(self) -> int:
        """Number of sorties (depot departures)."""
        return sum(1 for i in self.route[:-1] if i == 0)

    def sorties(self) -> list:
        return split_sorties(self.route)


@dataclass(frozen=True)
class SocTrace:
    soc: tuple      # SOC on arrival at each route entry; 1.0 for the initial departure
    t_hover: tuple  # hover-charging seconds spent at each route entry


@dataclass(frozen=True)
class CostBreakdown:
    t_fly: float
    t_hover: float
    total: float
    K: int

    def as_dict(self) -> dict:
        return {"t_fly": self.t_fly, "t_hover": self.t_hover, "total": self.total, "K": self.K}


@dataclass(frozen=True)
class Violation:
    kind: str  # "structure", "visit" or "energy"
    message: str
    sortie: Optional[int] = None


def generate_instance(n: int, side_km: float = 8.0, seed: int = 0,
                      uav: Optional[UavParams] = None, depot=None) -> Instance:
    """Uniform random instance on [0, side_km]^2.

    With ``uav`` given, task nodes the UAV could not reach and return from on a
    full battery are redrawn, so every node is individually serviceable.
    ``depot`` pins the base station; by default it is sampled like any node.
    """
    if n < 1:
        raise InvalidParameterError(f"need at least one task node, got {n}")
    if not side_km > 0:
        raise InvalidParameterError(f"side_km must be positive, got {side_km}")
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.0, side_km, size=(n + 1, 2))
    if depot is not None:
        coords[0] = depot
    if uav is not None:
        radius = max_reach_km(uav)
        if radius < 1e-12:
            raise InfeasibleInstanceError("the UAV cannot leave the base station")
        while True:
            far = np.flatnonzero(np.hypot(*(coords[1:] - coords[0]).T) > radius) + 1
            if far.size == 0:
                break
            coords[far] = rng.uniform(0.0, side_km, size=(far.size, 2))
    return Instance(coords, side_km, seed)


def max_reach_km(uav: UavParams) -> float:
    """Largest depot distance of a node that can be served by an out-and-back sortie."""
    return uav.usable_range_m / 2.0 / KM


def dist_matrix(instance: Instance) -> np.ndarray:
    c = instance.coords
    diff = c[:, None, :] - c[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def sortie_energy(distance_km: float, uav: UavParams) -> float:
    """Flight energy (J) for ``distance_km`` at cruise speed."""
    return uav.flight_power * distance_km * KM / uav.V_cruise


def energy_cap(uav: UavParams) -> float:
    """Per-sortie energy limit including the boundary slack."""
    return uav.usable_energy + ENERGY_TOL * uav.E_full


def check_reachable(instance: Instance, uav: UavParams) -> None:
    """Raise unless every task node can be served alone from the base station."""
    cap = energy_cap(uav)
    d0 = instance.dist[0, 1:]
    bad = np.flatnonzero(uav.flight_power * 2.0 * d0 * KM / uav.V_cruise > cap) + 1
    if bad.size:
        raise InfeasibleInstanceError(
            f"task nodes {bad.tolist()} lie beyond half the usable range "
            f"({max_reach_km(uav):.4f} km)")


def split_sorties(route: Sequence[int]) -> list:
    """Task lists of each depot-rooted cycle, e.g. [0,1,2,0,3,0] -> [[1,2],[3]]."""
    sorties, current = [], []
    for node in route[1:]:
        if node == 0:
            sorties.append(current)
            current = []
        else:
            current.append(node)
    if current:
        sorties.append(current)
    return sorties


def join_sorties(sorties: Sequence[Sequence[int]]) -> tuple:
    route = [0]
    for s in sorties:
        if s:
            route.extend(s)
            route.append(0)
    return tuple(route)


def _structure_violations(route, n) -> list:
    out = []
    if len(route) < 2 or route[0] != 0 or route[-1] != 0:
        out.append(Violation("structure", "route must start and end at the base station"))
    for a, b in zip(route, route[1:]):
        if a == 0 and b == 0:
            out.append(Violation("structure", "consecutive base-station entries"))
            break
    bad = [i for i in route if not 0 <= i <= n]
    if bad:
        out.append(Violation("structure", f"unknown node indices {bad}"))
    return out


def evaluate(instance: Instance, solution: Solution, uav: UavParams, wpt: WptParams,
             include_final_recharge: bool = False):
    """Simulate ``solution`` leg by leg; returns ``(CostBreakdown, SocTrace)``.

    Hover charging is applied at every interior depot arrival and, only when
    ``include_final_recharge`` is set, after the last one.
    """
    route = solution.route
    problems = _structure_violations(route, instance.n)
    if problems:
        raise InvalidParameterError(problems[0].message)
    d = instance.dist
    power, V, e_full = uav.flight_power, uav.V_cruise, uav.E_full
    cap = energy_cap(uav)
    soc, hover = [1.0], [0.0]
    used = 0.0
    distance = 0.0
    t_hover = 0.0
    sortie = 0
    for t in range(1, len(route)):
        leg = float(d[route[t - 1], route[t]])
        distance += leg
        used += power * leg * KM / V
        if route[t] != 0:
            soc.append(1.0 - used / e_full)
            hover.append(0.0)
            continue
        if used > cap:
            raise InfeasibleRouteError(
                f"sortie {sortie} uses {used:.6g} J, above the {uav.usable_energy:.6g} J cap",
                sortie=sortie)
        soc.append(1.0 - used / e_full)
        last = t == len(route) - 1
        th = 0.0
        if not last or include_final_recharge:
            th = recharge_event(wpt, uav, max(e_full - used, 0.0)).T_hover
        hover.append(th)
        t_hover += th
        used = 0.0
        sortie += 1
    t_fly = distance * KM / V / HOUR
    t_hover_h = t_hover / HOUR
    cost = CostBreakdown(t_fly, t_hover_h, t_fly + t_hover_h, solution.K)
    return cost, SocTrace(tuple(soc), tuple(hover))


def check_feasible(instance: Instance, solution: Solution, uav: UavParams) -> list:
    """All constraint violations of ``solution``; empty when feasible."""
    route = solution.route
    n = instance.n
    out = _structure_violations(route, n)
    counts = {}
    for i in route:
        if i != 0:
            counts[i] = counts.get(i, 0) + 1
    for i in range(1, n + 1):
        c = counts.get(i, 0)
        if c != 1:
            out.append(Violation("visit", f"node {i} visited {c} times (must be exactly once)"))
    if any(v.kind == "structure" for v in out):
        return out
    d = instance.dist
    cap = energy_cap(uav)
    for k, tasks in enumerate(split_sorties(route)):
        path = [0, *tasks, 0]
        length = float(sum(d[a, b] for a, b in zip(path, path[1:])))
        energy = sortie_energy(length, uav)
        if energy > cap:
            out.append(Violation(
                "energy", f"sortie {k} needs {energy:.6g} J > {uav.usable_energy:.6g} J", k))
    return out


# -- files --------------------------------------------------------------------

def instance_to_dict(instance: Instance) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "nodes": instance.coords.tolist(),
        "side_km": instance.side_km,
        "seed": instance.seed,
    }


def instance_from_dict(data: dict) -> Instance:
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise InvalidParameterError(f"unsupported instance format_version {version!r}")
    return Instance(np.asarray(data["nodes"], dtype=np.float64), float(data["side_km"]),
                    data.get("seed"))


def save_instance(instance: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance)) + "\n", encoding="utf-8")


def load_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh))


def save_solution(solution: Solution, cost: CostBreakdown, path) -> None:
    data = {"format_version": FORMAT_VERSION, "route": list(solution.route),
            "cost": cost.as_dict()}
    Path(path).write_text(json.dumps(data) + "\n", encoding="utf-8")


def load_solution(path):
    """Returns ``(Solution, CostBreakdown | None)``."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise InvalidParameterError(f"unsupported solution format_version {version!r}")
    cost = data.get("cost")
    if cost is not None:
        cost = CostBreakdown(float(cost["t_fly"]), float(cost["t_hover"]),
                             float(cost["total"]), int(cost["K"]))
    return Solution(data["route"]), cost
