"""Solution construction on top of a policy: greedy, best-of-k sampling, beam search."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from .energy import UavParams, WptParams
from .policy import (
    AttentionPolicy,
    Costing,
    DecoderCache,
    DecoderState,
    batch_tensors,
    max_decode_steps,
    rollout_batch,
)
from .routing import Instance, Solution, check_reachable
from .solvers import check_deadline

SAMPLE_CHUNK = 256


def greedy_decode(instance: Instance, model: AttentionPolicy, uav: Optional[UavParams] = None,
                  wpt: Optional[WptParams] = None, include_final_recharge: bool = False) -> Solution:
    costing = Costing(uav, wpt, include_final_recharge)
    check_reachable(instance, costing.uav)
    coords, dist = batch_tensors([instance], model.dtype)
    with torch.no_grad():
        res = rollout_batch(model, coords, dist, costing, "greedy")
    return Solution(res.routes[0])


def greedy_decode_many(instances, model: AttentionPolicy, costing: Costing,
                       batch_size: int = 512):
    """Greedy routes and costs (hours) for many equal-size instances."""
    routes, costs = [], []
    with torch.no_grad():
        for start in range(0, len(instances), batch_size):
            chunk = instances[start:start + batch_size]
            coords, dist = batch_tensors(chunk, model.dtype)
            res = rollout_batch(model, coords, dist, costing, "greedy")
            routes += res.routes
            costs += res.cost.tolist()
    return routes, np.asarray(costs)


def sample_uniforms(seed: int, start: int, stop: int, steps: int) -> np.ndarray:
    """Uniform draws for samples start..stop-1; row i depends only on (seed, i)."""
    return np.stack([np.random.default_rng([seed, i]).random(steps) for i in range(start, stop)])


def sample_candidates(instance: Instance, model: AttentionPolicy, k: int, seed: int,
                      costing: Costing, deadline=None):
    """The k sampled routes and their costs, in sample order."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    check_reachable(instance, costing.uav)
    steps = max_decode_steps(instance.n)
    routes, costs = [], []
    coords1, dist1 = batch_tensors([instance], model.dtype)
    with torch.no_grad():
        for start in range(0, k, SAMPLE_CHUNK):
            check_deadline(deadline)
            size = min(SAMPLE_CHUNK, k - start)
            u = sample_uniforms(seed, start, start + size, steps)
            res = rollout_batch(model, coords1.expand(size, -1, -1), dist1.expand(size, -1, -1),
                                costing, "sample", uniforms=u)
            routes += res.routes
            costs += res.cost.tolist()
    return routes, np.asarray(costs)


def sample_decode(instance: Instance, model: AttentionPolicy, k: int,
                  rng: np.random.Generator, uav: Optional[UavParams] = None,
                  wpt: Optional[WptParams] = None, include_final_recharge: bool = False,
                  deadline=None) -> Solution:
    """Best of ``k`` sampled rollouts (lowest mission time, earliest sample on ties).

    The sample set for ``k' < k`` is a prefix of the one for ``k`` under the
    same generator state.
    """
    costing = Costing(uav, wpt, include_final_recharge)
    seed = int(rng.integers(2**63 - 1))
    routes, costs = sample_candidates(instance, model, k, seed, costing, deadline)
    return Solution(routes[int(np.argmin(costs))])


@dataclass
class Beam:
    """Live partial solutions, best cumulative log-probability first."""

    state: DecoderState
    log_prob: list
    width: int
    finished: list = field(default_factory=list)  # (cost_h, -log_prob, route)

    @property
    def routes(self):
        return self.state.routes


def _expand(cache: DecoderCache, rows: int) -> DecoderCache:
    return DecoderCache(cache.keys.expand(rows, -1, -1), cache.q_graph.expand(rows, -1),
                        cache.q_nodes.expand(rows, -1, -1), cache.q_soc)


def beam_search(instance: Instance, model: AttentionPolicy, width: int,
                uav: Optional[UavParams] = None, wpt: Optional[WptParams] = None,
                include_final_recharge: bool = False, deadline=None) -> Solution:
    """Breadth-first decoding keeping the ``width`` most probable partial routes.

    Completed routes leave the beam; the cheapest completed route is returned
    (higher probability, then lexicographic order, break cost ties).
    """
    if width < 1:
        raise ValueError(f"width must be >= 1, got {width}")
    costing = Costing(uav, wpt, include_final_recharge)
    check_reachable(instance, costing.uav)
    coords, dist = batch_tensors([instance], model.dtype)
    with torch.no_grad():
        cache = model.decoder_cache(model(coords))
        beam = Beam(DecoderState(dist, costing), [0.0], width)
        while beam.state.batch:
            check_deadline(deadline)
            beam = _beam_step(model, cache, beam)
    best = min(beam.finished)
    return Solution(best[2])


def _beam_step(model, cache, beam: Beam) -> Beam:
    state = beam.state
    masked = state.mask()
    logp = model.step_log_probs(_expand(cache, state.batch), state.last, state.soc, masked)
    scores = torch.as_tensor(beam.log_prob, dtype=torch.float64)[:, None] + logp.to(torch.float64)
    flat = scores.flatten()
    finite = torch.isfinite(flat)
    n1 = scores.shape[1]
    if int(finite.sum()) > beam.width:
        kth = torch.topk(flat[finite], beam.width).values[-1]
        keep = torch.nonzero(finite & (flat >= kth)).flatten().tolist()
    else:
        keep = torch.nonzero(finite).flatten().tolist()
    cands = []
    for idx in keep:
        row, node = divmod(idx, n1)
        cands.append((-float(flat[idx]), len(state.routes[row]), (*state.routes[row], node), row, node))
    cands.sort()
    cands = cands[:beam.width]
    nxt = state.select([c[3] for c in cands])
    nxt.advance(torch.tensor([c[4] for c in cands], dtype=torch.long))
    log_prob = [-c[0] for c in cands]
    done = nxt.done.tolist()
    finished = list(beam.finished)
    cost = nxt.cost_hours().tolist()
    alive = []
    for i, is_done in enumerate(done):
        if is_done:
            finished.append((cost[i], -log_prob[i], tuple(nxt.routes[i])))
        else:
            alive.append(i)
    return Beam(nxt.select(alive) if len(alive) != nxt.batch else nxt,
                [log_prob[i] for i in alive], beam.width, finished)


def decode(instance: Instance, model: AttentionPolicy, strategy: str, *,
           k: int = 1280, width: int = 1000, rng=None, uav=None, wpt=None,
           include_final_recharge: bool = False) -> Solution:
    """Dispatch on ``strategy`` in {"greedy", "sample", "beam"}."""
    kw = dict(uav=uav, wpt=wpt, include_final_recharge=include_final_recharge)
    if strategy == "greedy":
        return greedy_decode(instance, model, **kw)
    if strategy == "sample":
        return sample_decode(instance, model, k, rng if rng is not None else np.random.default_rng(0), **kw)
    if strategy == "beam":
        return beam_search(instance, model, width, **kw)
    raise ValueError(f"unknown strategy {strategy!r}")
