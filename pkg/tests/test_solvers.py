import itertools

import numpy as np
import pytest

from uavwpt.errors import InfeasibleInstanceError, SizeLimitError, TimeLimitExceeded
from uavwpt.routing import (
    Instance,
    Solution,
    check_feasible,
    evaluate,
    generate_instance,
    max_reach_km,
)
from uavwpt.solvers import (
    classical_solvers,
    clarke_wright,
    enumerate_all_routes,
    exact_oracle,
    local_search_improve,
    nearest_neighbor,
    savings_list,
)


def total(inst, sol, uav, wpt, final=False):
    return evaluate(inst, sol, uav, wpt, include_final_recharge=final)[0].total


def brute_force_best(inst, uav, wpt, final=False):
    best = np.inf
    for sol in enumerate_all_routes(inst):
        if check_feasible(inst, sol, uav):
            continue
        best = min(best, total(inst, sol, uav, wpt, final))
    return best


def test_nn_collinear_order(uav, wpt):
    inst = Instance([[0.0, 0.0], [3.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    assert nearest_neighbor(inst, uav, wpt).route == (0, 2, 3, 1, 0)


def test_nn_single_node(uav, wpt):
    inst = Instance([[0.0, 0.0], [1.0, 1.0]])
    assert nearest_neighbor(inst, uav, wpt).route == (0, 1, 0)


def test_solvers_reject_unreachable_node(uav, wpt):
    far = max_reach_km(uav) + 0.1
    inst = Instance([[0.0, 0.0], [far, 0.0]], side_km=20.0)
    for solver in classical_solvers(uav, wpt).values():
        with pytest.raises(InfeasibleInstanceError):
            solver.solve(inst)


def test_all_solvers_feasible_on_random_instances(uav, weak_wpt):
    registry = classical_solvers(uav, weak_wpt)
    for seed in range(1000):
        inst = generate_instance(int(np.random.default_rng(seed).integers(1, 30)), 8.0,
                                 seed=seed, uav=uav)
        for key in ("nn",) if seed >= 100 else ("nn", "cw", "cw+ls"):
            sol = registry[key].solve(inst)
            assert check_feasible(inst, sol, uav) == [], (key, seed)


def test_savings_sorted_and_non_negative():
    inst = generate_instance(25, 8.0, seed=3)
    entries = savings_list(inst)
    assert len(entries) == 25 * 24 // 2
    values = [e.saving for e in entries]
    assert values == sorted(values, reverse=True)
    assert min(values) >= -1e-12


def test_cw_merges_nearby_pair(uav, wpt):
    inst = Instance([[0.0, 0.0], [5.0, 5.0], [5.1, 5.0]])
    assert clarke_wright(inst, uav, wpt).K == 1


def test_cw_keeps_far_pair_apart(uav, wpt):
    # each out-and-back fits, the joint tour does not
    r = max_reach_km(uav) * 0.95
    inst = Instance([[10.0, 10.0], [10.0 - r, 10.0], [10.0 + r, 10.0]], side_km=20.0)
    sol = clarke_wright(inst, uav, wpt)
    assert sol.K == 2
    assert check_feasible(inst, sol, uav) == []


def test_two_opt_removes_crossing(uav, wpt):
    inst = Instance([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]])
    crossing = Solution([0, 2, 1, 3, 0])
    before = total(inst, crossing, uav, wpt)
    improved = local_search_improve(inst, crossing, uav, wpt)
    assert total(inst, improved, uav, wpt) < before
    assert improved.route in {(0, 1, 2, 3, 0), (0, 3, 2, 1, 0)}


def test_local_search_keeps_optimum(uav, weak_wpt):
    for seed in range(10):
        inst = generate_instance(5, 8.0, seed=seed, uav=uav)
        best = exact_oracle(inst, uav, weak_wpt)
        assert local_search_improve(inst, best, uav, weak_wpt) == best


def test_local_search_never_worse(uav, weak_wpt):
    for seed in range(30):
        inst = generate_instance(15, 8.0, seed=seed, uav=uav)
        start = nearest_neighbor(inst, uav, weak_wpt)
        out = local_search_improve(inst, start, uav, weak_wpt, budget=500)
        assert total(inst, out, uav, weak_wpt) <= total(inst, start, uav, weak_wpt)
        assert check_feasible(inst, out, uav) == []


def test_oracle_symmetric_pair(uav, wpt):
    # mirror images about x = 1
    inst = Instance([[1.0, 0.0], [0.0, 1.0], [2.0, 1.0]])
    sol = exact_oracle(inst, uav, wpt)
    assert sol.route == (0, 1, 2, 0)
    assert total(inst, Solution([0, 2, 1, 0]), uav, wpt) == pytest.approx(total(inst, sol, uav, wpt))


def test_oracle_single_node(uav, wpt):
    inst = Instance([[0.0, 0.0], [3.0, 4.0]])
    sol = exact_oracle(inst, uav, wpt)
    assert sol.route == (0, 1, 0)
    assert total(inst, sol, uav, wpt) == pytest.approx(2 * 5000 / 10 / 3600)


def test_oracle_size_limit(uav, wpt):
    with pytest.raises(SizeLimitError):
        exact_oracle(generate_instance(9, 8.0, seed=0, uav=uav), uav, wpt)


def test_oracle_honours_deadline(uav, wpt):
    with pytest.raises(TimeLimitExceeded):
        exact_oracle(generate_instance(5, 8.0, seed=0, uav=uav), uav, wpt, deadline=0.0)


@pytest.mark.parametrize("final", [False, True])
def test_oracle_matches_exhaustive_enumeration(uav, weak_wpt, final):
    for seed in range(20):
        inst = generate_instance(1 + seed % 5, 8.0, seed=seed, uav=uav)
        sol = exact_oracle(inst, uav, weak_wpt, include_final_recharge=final)
        assert check_feasible(inst, sol, uav) == []
        assert total(inst, sol, uav, weak_wpt, final) == pytest.approx(
            brute_force_best(inst, uav, weak_wpt, final), rel=0, abs=1e-9)


def test_enumerate_all_routes_counts():
    inst = generate_instance(3, 8.0, seed=0)
    routes = list(enumerate_all_routes(inst))
    assert len(routes) == 6 * 4
    assert len(set(routes)) == len(routes)


def test_dominance_chain(uav, weak_wpt):
    tol = 1e-9
    for seed in range(30):
        inst = generate_instance(7, 8.0, seed=seed, uav=uav)
        oracle = total(inst, exact_oracle(inst, uav, weak_wpt), uav, weak_wpt)
        cw_sol = clarke_wright(inst, uav, weak_wpt)
        cw = total(inst, cw_sol, uav, weak_wpt)
        ls = total(inst, local_search_improve(inst, cw_sol, uav, weak_wpt), uav, weak_wpt)
        nn = total(inst, nearest_neighbor(inst, uav, weak_wpt), uav, weak_wpt)
        assert oracle <= ls + tol
        assert ls <= cw + tol
        assert oracle <= nn + tol


def test_oracle_route_evaluates_to_kernel_cost(uav, weak_wpt):
    from uavwpt.solvers import CostModel

    for seed in range(10):
        inst = generate_instance(6, 8.0, seed=seed, uav=uav)
        sol = exact_oracle(inst, uav, weak_wpt)
        seconds = CostModel(inst, uav, weak_wpt).route_seconds(sol.route)
        assert total(inst, sol, uav, weak_wpt) == pytest.approx(seconds / 3600, rel=1e-12)


def test_registry_names(uav, wpt):
    assert set(classical_solvers(uav, wpt)) == {"nn", "cw", "cw+ls", "oracle"}


def test_solvers_deterministic(uav, wpt):
    inst = generate_instance(12, 8.0, seed=21, uav=uav)
    for solver in classical_solvers(uav, wpt).values():
        if solver.name == "oracle":
            continue
        assert solver.solve(inst) == solver.solve(inst)


def test_permutation_invariance_of_oracle_cost(uav, weak_wpt):
    inst = generate_instance(5, 8.0, seed=8, uav=uav)
    base = total(inst, exact_oracle(inst, uav, weak_wpt), uav, weak_wpt)
    for perm in itertools.islice(itertools.permutations(range(1, 6)), 5):
        coords = inst.coords[[0, *perm]]
        other = Instance(coords, inst.side_km)
        assert total(other, exact_oracle(other, uav, weak_wpt), uav, weak_wpt) == pytest.approx(
            base, abs=1e-9)
