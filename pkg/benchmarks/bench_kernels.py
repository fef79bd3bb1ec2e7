"""Compare the compiled and pure-Python routing kernels.

    python3 benchmarks/bench_kernels.py [--n 8] [--repeat 3]

Times the exact-oracle permutation search (the dominant cost of the oracle
solver) and a batch of route evaluations on the same instances, and checks
that both backends return identical results.
"""

import argparse
import statistics
import time

from uavwpt import kernels
from uavwpt.energy import default_uav, default_wpt
from uavwpt.routing import generate_instance
from uavwpt.solvers import CostModel


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=8, help="task nodes for the oracle search")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--routes", type=int, default=20000, help="route evaluations per backend")
    args = ap.parse_args()

    uav = default_uav()
    wpt = default_wpt().replace(P_t=40.0, G_t=42.0)  # weak link so hover time matters
    cost = CostModel(generate_instance(args.n, 8.0, seed=0, uav=uav), uav, wpt)
    route = [0, *range(1, args.n + 1), 0]
    found = kernels.backends()
    if "cython" not in found:
        print("compiled extension not built; only the Python backend is available")

    results = {}
    print(f"{'kernel':<14}{'backend':<9}{'best s':>10}{'median s':>10}")
    for name, mod in found.items():
        best, med, out = best_time(lambda: mod.oracle_search(cost.dist, *cost.args), args.repeat)
        results.setdefault("oracle", {})[name] = (best, out)
        print(f"{'oracle_search':<14}{name:<9}{best:>10.4f}{med:>10.4f}")

        def many():
            return [mod.route_cost(route, cost.dist, *cost.args) for _ in range(args.routes)][-1]
        best, med, out = best_time(many, args.repeat)
        results.setdefault("route_cost", {})[name] = (best, out)
        print(f"{'route_cost':<14}{name:<9}{best:>10.4f}{med:>10.4f}")

    if len(found) == 2:
        for kernel, by_backend in results.items():
            (tp, op), (tc, oc) = by_backend["python"], by_backend["cython"]
            assert op == oc, f"{kernel}: backends disagree"
            print(f"{kernel}: speed-up x{tp / tc:.1f}, results identical")


if __name__ == "__main__":
    main()
