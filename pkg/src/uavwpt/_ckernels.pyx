# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled routing kernels; see ``_pykernels`` for the reference semantics."""

from libc.math cimport INFINITY

import numpy as np


cdef inline double _hover(double used, double e_fly, double net_power) nogil:
    cdef double extra = used - e_fly
    if extra <= 0.0:
        return 0.0
    return extra / net_power


def route_cost(route, const double[:, ::1] dist, double sec_per_km, double j_per_km,
               double cap, double e_fly, double net_power, bint final_hover):
    cdef long[::1] r = np.ascontiguousarray(route, dtype=np.int64)
    cdef Py_ssize_t t, last = r.shape[0] - 1
    cdef double total = 0.0, seg = 0.0, used
    for t in range(1, last + 1):
        seg += dist[r[t - 1], r[t]]
        if r[t] == 0:
            used = seg * j_per_km
            if used > cap:
                return INFINITY
            total += seg * sec_per_km
            if t < last or final_hover:
                total += _hover(used, e_fly, net_power)
            seg = 0.0
    return total


cdef double _split(long[::1] order, const double[:, ::1] dist, double sec_per_km,
                   double j_per_km, double cap, double e_fly, double net_power,
                   bint final_hover, double[::1] best, long[::1] prev,
                   long* final_prev) nogil:
    cdef Py_ssize_t n = order.shape[0], i, j
    cdef double seg, length, used, fly, hover, cand, final_best = INFINITY
    for i in range(n + 1):
        best[i] = INFINITY
        prev[i] = -1
    best[0] = 0.0
    final_prev[0] = -1
    for i in range(n):
        if best[i] == INFINITY:
            continue
        seg = dist[0, order[i]]
        for j in range(i + 1, n + 1):
            if j > i + 1:
                seg += dist[order[j - 2], order[j - 1]]
            length = seg + dist[order[j - 1], 0]
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
                    final_prev[0] = i
    return final_best


cdef list _ends(long[::1] prev, long final_prev, Py_ssize_t n):
    ends = [n]
    cdef long i = final_prev
    while i > 0:
        ends.append(i)
        i = prev[i]
    ends.reverse()
    return ends


def split_cost(order, const double[:, ::1] dist, double sec_per_km, double j_per_km,
               double cap, double e_fly, double net_power, bint final_hover):
    cdef long[::1] o = np.ascontiguousarray(order, dtype=np.int64)
    cdef Py_ssize_t n = o.shape[0]
    cdef double[::1] best = np.empty(n + 1)
    cdef long[::1] prev = np.empty(n + 1, dtype=np.int64)
    cdef long final_prev
    cdef double cost = _split(o, dist, sec_per_km, j_per_km, cap, e_fly, net_power,
                              final_hover, best, prev, &final_prev)
    if cost == INFINITY:
        return INFINITY, []
    return cost, _ends(prev, final_prev, n)


def oracle_search(const double[:, ::1] dist, double sec_per_km, double j_per_km, double cap,
                  double e_fly, double net_power, bint final_hover):
    cdef Py_ssize_t n = dist.shape[0] - 1, k, m, a, b
    cdef long[::1] perm = np.arange(1, n + 1, dtype=np.int64)
    cdef long[::1] best_perm = np.arange(1, n + 1, dtype=np.int64)
    cdef double[::1] best = np.empty(n + 1)
    cdef long[::1] prev = np.empty(n + 1, dtype=np.int64)
    cdef long[::1] best_prev = np.empty(n + 1, dtype=np.int64)
    cdef long final_prev, best_final_prev = -1
    cdef long tmp
    cdef double cost, best_cost = INFINITY
    with nogil:
        while True:
            cost = _split(perm, dist, sec_per_km, j_per_km, cap, e_fly, net_power,
                          final_hover, best, prev, &final_prev)
            if cost < best_cost * (1.0 - 1e-12):
                best_cost = cost
                best_perm[:] = perm
                best_prev[:] = prev
                best_final_prev = final_prev
            k = n - 2
            while k >= 0 and perm[k] >= perm[k + 1]:
                k -= 1
            if k < 0:
                break
            m = n - 1
            while perm[m] <= perm[k]:
                m -= 1
            tmp = perm[k]
            perm[k] = perm[m]
            perm[m] = tmp
            a = k + 1
            b = n - 1
            while a < b:
                tmp = perm[a]
                perm[a] = perm[b]
                perm[b] = tmp
                a += 1
                b -= 1
    if best_cost == INFINITY:
        return INFINITY, [], []
    return best_cost, list(best_perm), _ends(best_prev, best_final_prev, n)
