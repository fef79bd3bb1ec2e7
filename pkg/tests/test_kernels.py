import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavwpt import kernels
from uavwpt.routing import generate_instance
from uavwpt.solvers import CostModel

BACKENDS = kernels.backends()


def test_compiled_backend_is_selected_when_built():
    if os.environ.get("UAVWPT_PURE_PYTHON"):
        assert kernels.BACKEND == "python"
    elif "cython" in BACKENDS:
        assert kernels.BACKEND == "cython"
    assert "python" in BACKENDS


def _args(n, seed, uav, wpt, final=False):
    inst = generate_instance(n, 8.0, seed=seed, uav=uav)
    return inst, CostModel(inst, uav, wpt, final)


@pytest.mark.skipif("cython" not in BACKENDS, reason="extension not built")
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 6), final=st.booleans(), weak=st.booleans())
def test_backends_agree_bit_for_bit(uav, wpt, weak_wpt, seed, n, final, weak):
    _, cost = _args(n, seed, uav, weak_wpt if weak else wpt, final)
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    order = list(np.random.default_rng(seed).permutation(np.arange(1, n + 1)).tolist())
    assert py.split_cost(order, cost.dist, *cost.args) == cy.split_cost(order, cost.dist, *cost.args)
    route = [0, *order, 0]
    assert py.route_cost(route, cost.dist, *cost.args) == cy.route_cost(route, cost.dist, *cost.args)
    assert py.oracle_search(cost.dist, *cost.args) == cy.oracle_search(cost.dist, *cost.args)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_split_cost_matches_brute_force(uav, weak_wpt, name):
    mod = BACKENDS[name]
    for seed in range(15):
        inst, cost = _args(6, seed, uav, weak_wpt)
        order = list(range(1, 7))
        value, ends = mod.split_cost(order, cost.dist, *cost.args)
        brute = math.inf
        for mask in range(1 << 5):
            route = [0]
            for k, node in enumerate(order):
                route.append(node)
                if k < 5 and mask >> k & 1:
                    route.append(0)
            route.append(0)
            brute = min(brute, mod.route_cost(route, cost.dist, *cost.args))
        assert value == pytest.approx(brute, rel=1e-12)
        assert ends[-1] == 6
        route = [0]
        start = 0
        for end in ends:
            route += order[start:end] + [0]
            start = end
        assert mod.route_cost(route, cost.dist, *cost.args) == pytest.approx(value, rel=1e-12)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_route_cost_flags_over_cap(uav, wpt, name):
    mod = BACKENDS[name]
    d = np.array([[0.0, 11.0], [11.0, 0.0]])
    _, cost = _args(1, 0, uav, wpt)
    assert mod.route_cost([0, 1, 0], d, *cost.args) == math.inf
    assert mod.split_cost([1], d, *cost.args) == (math.inf, [])


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_route_cost_seconds(uav, wpt, name):
    mod = BACKENDS[name]
    d = np.array([[0.0, 1.0], [1.0, 0.0]])
    _, cost = _args(1, 0, uav, wpt)
    assert mod.route_cost([0, 1, 0], d, *cost.args) == pytest.approx(200.0)


def test_oracle_search_prefers_lexicographic_order_on_ties(uav, wpt):
    d = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    _, cost = _args(2, 0, uav, wpt)
    for mod in BACKENDS.values():
        value, order, ends = mod.oracle_search(d, *cost.args)
        assert order == [1, 2]
        assert ends == [2]
        assert value == pytest.approx(300.0)
