"""Pure-Python reference versions of the compiled kernels in ``_ckernels.pyx``.

Both modules implement the same algorithms with the same floating-point
operation order, so their results agree bit for bit.

Shared arguments:
    dist          (n+1, n+1) float64 distance matrix, node 0 = base station
    sec_per_km    flight seconds per km at cruise speed
    j_per_km      flight energy per km (J)
    cap           per-sortie energy limit (J)
    e_fly         energy absorbed in flight on a depot approach (J)
    net_power     net hover charging power (W)
    final_hover   charge after the final return as well
"""

import math


def _rows(dist):
    return dist if isinstance(dist, list) else dist.tolist()


def _hover(used, e_fly, net_power):
    extra = used - e_fly
    if extra <= 0.0:
        return 0.0
    return extra / net_power


def route_cost(route, dist, sec_per_km, j_per_km, cap, e_fly, net_power, final_hover):
    """Mission seconds of a complete route, or ``inf`` if a sortie breaks the cap."""
    d = _rows(dist)
    total = 0.0
    seg = 0.0
    last = len(route) - 1
    for t in range(1, last + 1):
        seg += d[route[t - 1]][route[t]]
        if route[t] == 0:
            used = seg * j_per_km
            if used > cap:
                return math.inf
            total += seg * sec_per_km
            if t < last or final_hover:
                total += _hover(used, e_fly, net_power)
            seg = 0.0
    return total


def split_cost(order, dist, sec_per_km, j_per_km, cap, e_fly, net_power, final_hover):
    """Optimal depot-return placement for a fixed visiting order.

    Returns ``(seconds, ends)`` where ``ends`` lists the exclusive end index of
    each sortie within ``order``; ``(inf, [])`` when no split is feasible.
    """
    d = _rows(dist)
    n = len(order)
    inf = math.inf
    best = [inf] * (n + 1)
    prev = [-1] * (n + 1)
    best[0] = 0.0
    final_best = inf
    final_prev = -1
    for i in range(n):
        if best[i] == inf:
            continue
        seg = d[0][order[i]]
        for j in range(i + 1, n + 1):
            if j > i + 1:
                seg += d[order[j - 2]][order[j - 1]]
            length = seg + d[order[j - 1]][0]
            used = length * j_per_km
            if used > cap:
                break
            fly = length * sec_per_km
            hover = _hover(used, e_fly, net_power)
            if j < n:
                cand = best[i] + fly + hover
                if cand < best[j]:
                    best[j] = cand
                    prev[j] = i
            else:
                cand = best[i] + fly
                if final_hover:
                    cand += hover
                if cand < final_best:
                    final_best = cand
                    final_prev = i
    if final_best == inf:
        return inf, []
    ends = [n]
    i = final_prev
    while i > 0:
        ends.append(i)
        i = prev[i]
    ends.reverse()
    return final_best, ends


def oracle_search(dist, sec_per_km, j_per_km, cap, e_fly, net_power, final_hover):
    """Minimum over all task orders of :func:`split_cost`.

    Orders are enumerated lexicographically; a later order replaces the
    incumbent only when cheaper by more than 1e-12 relative.
    Returns ``(seconds, order, ends)``.
    """
    d = _rows(dist)
    n = len(d) - 1
    perm = list(range(1, n + 1))
    best_cost = math.inf
    best_perm = []
    best_ends = []
    while True:
        cost, ends = split_cost(perm, d, sec_per_km, j_per_km, cap, e_fly,
                                net_power, final_hover)
        if cost < best_cost * (1.0 - 1e-12):
            best_cost = cost
            best_perm = list(perm)
            best_ends = ends
        # next lexicographic permutation
        k = n - 2
        while k >= 0 and perm[k] >= perm[k + 1]:
            k -= 1
        if k < 0:
            break
        m = n - 1
        while perm[m] <= perm[k]:
            m -= 1
        perm[k], perm[m] = perm[m], perm[k]
        perm[k + 1:] = perm[k + 1:][::-1]
    return best_cost, best_perm, best_ends
