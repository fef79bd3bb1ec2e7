"""REINFORCE training with a greedy-rollout baseline."""

from __future__ import annotations

import copy
import csv
import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from .energy import UavParams, WptParams
from .errors import InvalidParameterError, NumericalFailureError
from .policy import AttentionPolicy, Costing, init_params, rollout_batch, save_checkpoint
from .routing import max_reach_km

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 64
    epochs: int = 20
    steps_per_epoch: int = 250
    lr: float = 1e-4
    n: int = 20
    side_km: float = 8.0
    val_size: int = 512
    seed: int = 0
    d_h: int = 128
    n_heads: int = 8
    n_layers: int = 3
    d_ff: Optional[int] = None
    clip: float = 10.0
    max_grad_norm: Optional[float] = 1.0

    def __post_init__(self):
        for name in ("batch_size", "epochs", "steps_per_epoch", "n", "val_size", "d_h",
                     "n_heads", "n_layers"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be positive")
        if not self.side_km > 0:
            raise InvalidParameterError("side_km must be positive")
        if not 0 < self.lr < 1:
            raise InvalidParameterError(f"learning rate must lie in (0, 1), got {self.lr}")

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        data.pop("format_version", None)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidParameterError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class TrainReport:
    train_cost: list = field(default_factory=list)
    val_cost_main: list = field(default_factory=list)
    val_cost_baseline: list = field(default_factory=list)
    swapped: list = field(default_factory=list)
    wall_time: float = 0.0

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_cost", "val_cost_main", "val_cost_baseline", "swapped"])
            for e, row in enumerate(zip(self.train_cost, self.val_cost_main,
                                        self.val_cost_baseline, self.swapped), start=1):
                w.writerow([e, f"{row[0]:.6f}", f"{row[1]:.6f}", f"{row[2]:.6f}", int(row[3])])


@dataclass
class StepStats:
    loss: float
    mean_cost: float
    mean_baseline: float
    mean_advantage: float


def random_batch(rng: np.random.Generator, batch: int, n: int, side_km: float,
                 uav: Optional[UavParams] = None, dtype=torch.float32):
    """Uniform instances as tensors: (normalised coords, float64 distances in km).

    Nodes out of single-sortie reach of the base station are redrawn, as in
    :func:`uavwpt.routing.generate_instance`.
    """
    coords = rng.uniform(0.0, side_km, size=(batch, n + 1, 2))
    if uav is not None:
        radius = max_reach_km(uav)
        while True:
            far = np.hypot(*np.moveaxis(coords[:, 1:] - coords[:, :1], -1, 0)) > radius
            if not far.any():
                break
            b, i = np.nonzero(far)
            coords[b, i + 1] = rng.uniform(0.0, side_km, size=(b.size, 2))
    diff = coords[:, :, None, :] - coords[:, None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    return (torch.as_tensor(coords / side_km, dtype=dtype),
            torch.as_tensor(dist, dtype=torch.float64))


def reinforce_step(model: AttentionPolicy, baseline: AttentionPolicy, coords, dist,
                   costing: Costing, generator: Optional[torch.Generator] = None,
                   use_baseline: bool = True) -> StepStats:
    """Accumulate the gradient of sum_i (T(pi_i) - T(pi_i*)) * log p(pi_i) into ``.grad``.

    ``pi_i`` is sampled from ``model``, ``pi_i*`` is the greedy rollout of
    ``baseline``; the advantage is a constant with respect to the parameters.
    """
    model.zero_grad(set_to_none=False)
    sampled = rollout_batch(model, coords.to(model.dtype), dist, costing, "sample", generator=generator)
    if use_baseline:
        with torch.no_grad():
            b = rollout_batch(baseline, coords.to(baseline.dtype), dist, costing, "greedy").cost
    else:
        b = torch.zeros_like(sampled.cost)
    advantage = (sampled.cost - b).to(model.dtype)
    loss = (advantage * sampled.log_prob).sum()
    loss.backward()
    for p in model.parameters():
        if p.grad is not None and not torch.isfinite(p.grad).all():
            raise NumericalFailureError("non-finite policy gradient")
    return StepStats(float(loss.detach()), float(sampled.cost.mean()), float(b.mean()),
                     float(advantage.mean()))


def surrogate_loss(model: AttentionPolicy, coords, dist, costing: Costing, actions,
                   advantage) -> torch.Tensor:
    """sum_i advantage_i * log p(actions_i) with the selections forced."""
    res = rollout_batch(model, coords.to(model.dtype), dist, costing, actions=actions)
    return (advantage.to(model.dtype) * res.log_prob).sum()


def make_optimizer(model: AttentionPolicy, lr: float) -> torch.optim.Optimizer:
    return torch.optim.Adam(model.parameters(), lr=lr, betas=(0.9, 0.999), eps=1e-8)


def apply_update(model: AttentionPolicy, optimizer: torch.optim.Optimizer,
                 max_grad_norm: Optional[float] = None) -> None:
    """One Adam step from the gradients currently stored on ``model``."""
    if max_grad_norm is not None:
        torch.nn.utils.clip_grad_norm_(model.parameters(), max_grad_norm)
    optimizer.step()
    for p in model.parameters():
        if not torch.isfinite(p).all():
            raise NumericalFailureError("non-finite parameters after the update")


def update_baseline(model: AttentionPolicy, baseline: AttentionPolicy, val_instances,
                    costing: Costing, baseline_cost: Optional[float] = None):
    """Swap in ``model`` as baseline iff its greedy mean validation cost is strictly lower.

    Returns ``(baseline, swapped, main_cost, baseline_cost)``.
    """
    main_cost = float(_greedy_mean(model, val_instances, costing))
    if baseline_cost is None:
        baseline_cost = float(_greedy_mean(baseline, val_instances, costing))
    if main_cost < baseline_cost:
        return copy.deepcopy(model), True, main_cost, main_cost
    return baseline, False, main_cost, baseline_cost


def _greedy_mean(model, val, costing):
    coords, dist = val
    costs = []
    with torch.no_grad():
        for start in range(0, coords.shape[0], 512):
            res = rollout_batch(model, coords[start:start + 512].to(model.dtype),
                                dist[start:start + 512], costing, "greedy")
            costs.append(res.cost)
    return torch.cat(costs).mean()


def train(config: TrainConfig, uav: Optional[UavParams] = None, wpt: Optional[WptParams] = None,
          log_csv=None, checkpoint_path=None, model: Optional[AttentionPolicy] = None):
    """Run ``epochs * steps_per_epoch`` REINFORCE updates; returns ``(model, TrainReport)``.

    The baseline comparison runs once per epoch on a fixed validation set.
    """
    costing = Costing(uav, wpt)
    rng = np.random.default_rng([config.seed, 1])
    val = random_batch(np.random.default_rng([config.seed, 2]), config.val_size, config.n,
                       config.side_km, costing.uav)
    gen = torch.Generator().manual_seed(config.seed)
    if model is None:
        model = init_params(config.seed, config.d_h, config.n_heads, config.n_layers,
                            config.d_ff, config.clip)
    baseline = copy.deepcopy(model)
    baseline_cost = None
    optimizer = make_optimizer(model, config.lr)
    report = TrainReport()
    start = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        costs = []
        for _ in range(config.steps_per_epoch):
            coords, dist = random_batch(rng, config.batch_size, config.n, config.side_km, costing.uav)
            stats = reinforce_step(model, baseline, coords, dist, costing, gen)
            apply_update(model, optimizer, config.max_grad_norm)
            costs.append(stats.mean_cost)
        baseline, swapped, main_cost, baseline_cost = update_baseline(
            model, baseline, val, costing, baseline_cost)
        report.train_cost.append(float(np.mean(costs)))
        report.val_cost_main.append(main_cost)
        report.val_cost_baseline.append(baseline_cost)
        report.swapped.append(swapped)
        log.info("epoch %d: train %.4f h, val main %.4f h, val baseline %.4f h%s", epoch,
                 report.train_cost[-1], main_cost, baseline_cost, " (baseline swapped)" if swapped else "")
        if log_csv is not None:
            report.write_csv(log_csv)
        if checkpoint_path is not None:
            save_checkpoint(model, checkpoint_path)
    report.wall_time = time.perf_counter() - start
    return model, report

