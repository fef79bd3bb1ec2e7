"""Classical baselines and the exact oracle.

Every solver returns a :class:`~uavwpt.routing.Solution` that passes
``check_feasible``; all of them raise ``InfeasibleInstanceError`` when some
task node cannot be served even by a dedicated sortie.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .energy import ChargeProfile, UavParams, WptParams
from .errors import InvalidParameterError, SizeLimitError, TimeLimitExceeded
from .routing import (
    KM,
    Instance,
    Solution,
    check_reachable,
    energy_cap,
    join_sorties,
    split_sorties,
)

ORACLE_MAX_N = 8
IMPROVE_RTOL = 1e-12


@dataclass(frozen=True)
class SavingsEntry:
    i: int
    j: int
    saving: float


@dataclass(frozen=True)
class Solver:
    """Common in-process solver interface consumed by the benchmark harness."""

    name: str
    solve: Callable  # solve(instance, deadline=None) -> Solution


class CostModel:
    """Kernel-ready cost constants for one instance and parameter set."""

    def __init__(self, instance: Instance, uav: UavParams, wpt: WptParams,
                 include_final_recharge: bool = False):
        profile = ChargeProfile(uav, wpt)
        self.instance = instance
        self.dist = np.ascontiguousarray(instance.dist)
        self.args = (
            KM / uav.V_cruise,                      # seconds per km
            uav.flight_power * KM / uav.V_cruise,   # joules per km
            energy_cap(uav),
            profile.e_fly,
            profile.net_power,
            bool(include_final_recharge),
        )

    @property
    def j_per_km(self) -> float:
        return self.args[1]

    @property
    def cap(self) -> float:
        return self.args[2]

    def route_seconds(self, route) -> float:
        return kernels.route_cost(route, self.dist, *self.args)

    def sortie_hover(self, length_km: float) -> float:
        """Hover seconds after a sortie of ``length_km``."""
        used = length_km * self.j_per_km
        return max(used - self.args[3], 0.0) / self.args[4]

    def sortie_length(self, tasks) -> float:
        path = [0, *tasks, 0]
        d = self.dist
        return float(sum(d[a, b] for a, b in zip(path, path[1:])))

    def fits(self, tasks) -> bool:
        return self.sortie_length(tasks) * self.j_per_km <= self.cap


def check_deadline(deadline):
    if deadline is not None and time.perf_counter() > deadline:
        raise TimeLimitExceeded("solver exceeded its time limit")


def order_sorties(sorties, cost: CostModel) -> list:
    """Put the sortie with the longest recharge last, where charging is skipped."""
    sorties = [list(s) for s in sorties if s]
    if len(sorties) < 2 or cost.args[5]:
        return sorties
    hover = [cost.sortie_hover(cost.sortie_length(s)) for s in sorties]
    k = max(range(len(sorties)), key=lambda i: (hover[i], -i))
    if hover[k] > hover[-1]:
        sorties.append(sorties.pop(k))
    return sorties


def nearest_neighbor(instance: Instance, uav: UavParams, wpt: WptParams,
                     include_final_recharge: bool = False, deadline=None) -> Solution:
    """Visit the closest unvisited node that still leaves enough energy to get home."""
    check_reachable(instance, uav)
    cost = CostModel(instance, uav, wpt, include_final_recharge)
    d = instance.dist
    unvisited = set(range(1, instance.n + 1))
    sorties, current = [], []
    last, used = 0, 0.0
    while unvisited:
        check_deadline(deadline)
        best, best_d = None, math.inf
        for i in sorted(unvisited):
            need = used + (d[last, i] + d[i, 0]) * cost.j_per_km
            if need <= cost.cap and d[last, i] < best_d:
                best, best_d = i, d[last, i]
        if best is None:
            # unreachable from the depot is excluded by check_reachable
            sorties.append(current)
            current, last, used = [], 0, 0.0
            continue
        current.append(best)
        used += best_d * cost.j_per_km
        last = best
        unvisited.remove(best)
    sorties.append(current)
    return Solution(join_sorties(order_sorties(sorties, cost)))


def savings_list(instance: Instance) -> list:
    """Clarke-Wright savings d0i + d0j - dij for all task pairs, largest first."""
    d = instance.dist
    n = instance.n
    entries = [SavingsEntry(i, j, float(d[0, i] + d[0, j] - d[i, j]))
               for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    entries.sort(key=lambda e: (-e.saving, e.i, e.j))
    return entries


def clarke_wright(instance: Instance, uav: UavParams, wpt: WptParams,
                  include_final_recharge: bool = False, deadline=None) -> Solution:
    """Parallel savings construction with the per-sortie energy cap as capacity."""
    check_reachable(instance, uav)
    cost = CostModel(instance, uav, wpt, include_final_recharge)
    n = instance.n
    routes = {i: [i] for i in range(1, n + 1)}
    owner = {i: i for i in range(1, n + 1)}
    previous = math.inf
    for entry in savings_list(instance):
        check_deadline(deadline)
        assert entry.saving >= -1e-9, "negative saving violates the triangle inequality"
        assert entry.saving <= previous, "savings must be processed in descending order"
        previous = entry.saving
        i, j = entry.i, entry.j
        ri, rj = owner[i], owner[j]
        if ri == rj:
            continue
        a, b = routes[ri], routes[rj]
        if a[-1] == i and b[0] == j:
            merged = a + b
        elif a[0] == i and b[-1] == j:
            merged = b + a
        elif a[-1] == i and b[-1] == j:
            merged = a + b[::-1]
        elif a[0] == i and b[0] == j:
            merged = a[::-1] + b
        else:
            continue
        if not cost.fits(merged):
            continue
        routes[ri] = merged
        del routes[rj]
        for node in b:
            owner[node] = ri
    sorties = [routes[k] for k in sorted(routes)]
    return Solution(join_sorties(order_sorties(sorties, cost)))


def local_search_improve(instance: Instance, solution: Solution, uav: UavParams,
                         wpt: WptParams, budget: int = 100_000,
                         include_final_recharge: bool = False, deadline=None) -> Solution:
    """First-improvement 2-opt inside sorties plus relocation between sorties.

    ``budget`` caps the number of candidate moves evaluated. Only moves that
    keep every sortie within the energy cap and strictly lower the mission
    time are taken, so the result never costs more than the input.
    """
    cost = CostModel(instance, uav, wpt, include_final_recharge)
    sorties = split_sorties(solution.route)
    current = cost.route_seconds(solution.route)
    if not math.isfinite(current):
        raise InvalidParameterError("local search needs a feasible starting solution")
    evaluated = 0

    def attempt(candidate):
        nonlocal evaluated, current
        evaluated += 1
        value = cost.route_seconds(join_sorties(candidate))
        if value < current * (1.0 - IMPROVE_RTOL):
            current = value
            return True
        return False

    improved = True
    while improved and evaluated < budget:
        improved = False
        # 2-opt: reverse tasks[a..b] inside one sortie
        for k, tasks in enumerate(sorties):
            m = len(tasks)
            for a in range(m - 1):
                for b in range(a + 1, m):
                    if evaluated >= budget:
                        break
                    check_deadline(deadline)
                    trial = tasks[:a] + tasks[a:b + 1][::-1] + tasks[b + 1:]
                    candidate = sorties[:k] + [trial] + sorties[k + 1:]
                    if attempt(candidate):
                        sorties = candidate
                        improved = True
                        break
                if improved:
                    break
            if improved:
                break
        if improved:
            continue
        # relocate one node into another sortie
        for k, tasks in enumerate(sorties):
            for pos, node in enumerate(tasks):
                rest = tasks[:pos] + tasks[pos + 1:]
                for other in range(len(sorties)):
                    if other == k:
                        continue
                    target = sorties[other]
                    for ins in range(len(target) + 1):
                        if evaluated >= budget:
                            break
                        check_deadline(deadline)
                        candidate = list(sorties)
                        candidate[k] = rest
                        candidate[other] = target[:ins] + [node] + target[ins:]
                        candidate = [s for s in candidate if s]
                        if attempt(candidate):
                            sorties = candidate
                            improved = True
                            break
                    if improved:
                        break
                if improved:
                    break
            if improved:
                break
    return Solution(join_sorties(sorties))


def exact_oracle(instance: Instance, uav: UavParams, wpt: WptParams,
                 include_final_recharge: bool = False, deadline=None) -> Solution:
    """Optimal solution by enumerating visiting orders with an optimal split of each.

    Limited to at most eight task nodes.
    """
    if instance.n > ORACLE_MAX_N:
        raise SizeLimitError(f"exact oracle handles at most {ORACLE_MAX_N} task nodes, "
                             f"got {instance.n}")
    check_reachable(instance, uav)
    check_deadline(deadline)
    cost = CostModel(instance, uav, wpt, include_final_recharge)
    _, order, ends = kernels.oracle_search(cost.dist, *cost.args)
    sorties, start = [], 0
    for end in ends:
        sorties.append(order[start:end])
        start = end
    return Solution(join_sorties(sorties))


def classical_solvers(uav: UavParams, wpt: WptParams,
                      include_final_recharge: bool = False) -> dict:
    """Registry of the non-learned solvers keyed by their CLI spec string."""
    kw = {"include_final_recharge": include_final_recharge}

    def nn(inst, deadline=None):
        return nearest_neighbor(inst, uav, wpt, deadline=deadline, **kw)

    def cw(inst, deadline=None):
        return clarke_wright(inst, uav, wpt, deadline=deadline, **kw)

    def cw_ls(inst, deadline=None):
        start = clarke_wright(inst, uav, wpt, deadline=deadline, **kw)
        return local_search_improve(inst, start, uav, wpt, deadline=deadline, **kw)

    def oracle(inst, deadline=None):
        return exact_oracle(inst, uav, wpt, deadline=deadline, **kw)

    return {
        "nn": Solver("nn", nn),
        "cw": Solver("cw", cw),
        "cw+ls": Solver("cw+ls", cw_ls),
        "oracle": Solver("oracle", oracle),
    }


def enumerate_all_routes(instance: Instance):
    """Every structurally valid route: all task orders times all depot-return patterns.

    Independent of the split dynamic program; used to cross-check the oracle.
    """
    from itertools import permutations, product

    n = instance.n
    for perm in permutations(range(1, n + 1)):
        for cuts in product((False, True), repeat=n - 1):
            route = [0, perm[0]]
            for node, cut in zip(perm[1:], cuts):
                if cut:
                    route.append(0)
                route.append(node)
            route.append(0)
            yield Solution(route)


def optional_deadline(limit_s: Optional[float]):
    return None if limit_s is None else time.perf_counter() + limit_s
