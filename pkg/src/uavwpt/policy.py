"""Attention encoder-decoder routing policy.

The encoder embeds node coordinates (normalised by the instance side length)
and refines them with a stack of multi-head self-attention layers. The decoder
scores every node against a context built from the mean node embedding, the
embedding of the previously selected node and the current state of charge,
masking nodes that are visited or cannot be reached with enough energy left to
return home.

Everything is batched over instances; masks and energy bookkeeping run in
float64 regardless of the model dtype so feasibility decisions match
:func:`uavwpt.routing.check_feasible` exactly.
"""

from __future__ import annotations

import io
import json
import math
import zipfile
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
from torch import nn

from .energy import ChargeProfile, UavParams, WptParams, default_uav, default_wpt
from .errors import DeadEndError, InvalidParameterError, NumericalFailureError
from .routing import HOUR, KM, Instance, Solution, check_reachable, energy_cap

CHECKPOINT_VERSION = 1
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


def param_names(n_layers: int) -> list:
    """Canonical parameter order used for initialisation and checkpoints."""
    names = ["embed.W_x", "embed.b_x"]
    for l in range(n_layers):
        p = f"layers.{l}."
        names += [p + "W_Q", p + "W_K", p + "W_V", p + "W_O",
                  p + "ff_W1", p + "ff_b1", p + "ff_W2", p + "ff_b2",
                  p + "norm1_scale", p + "norm1_shift", p + "norm2_scale", p + "norm2_shift"]
    names += ["decoder.W_Q", "decoder.W_K"]
    return names


class AttentionPolicy(nn.Module):
    """Learnable arrays of the policy plus the batched forward pieces."""

    def __init__(self, d_h: int = 128, n_heads: int = 8, n_layers: int = 3,
                 d_ff: Optional[int] = None, clip: float = 10.0, seed: int = 0):
        super().__init__()
        if d_h <= 0 or n_heads <= 0 or n_layers <= 0 or d_h % n_heads:
            raise InvalidParameterError(
                f"d_h={d_h} must be a positive multiple of n_heads={n_heads}")
        d_ff = 4 * d_h if d_ff is None else d_ff
        self.d_h, self.n_heads, self.n_layers, self.d_ff, self.clip = d_h, n_heads, n_layers, d_ff, float(clip)
        d_k = d_h // n_heads
        shapes = {"embed.W_x": (2, d_h), "embed.b_x": (d_h,)}
        for l in range(n_layers):
            p = f"layers.{l}."
            shapes.update({
                p + "W_Q": (n_heads, d_h, d_k), p + "W_K": (n_heads, d_h, d_k),
                p + "W_V": (n_heads, d_h, d_k), p + "W_O": (d_h, d_h),
                p + "ff_W1": (d_h, d_ff), p + "ff_b1": (d_ff,),
                p + "ff_W2": (d_ff, d_h), p + "ff_b2": (d_h,),
                p + "norm1_scale": (d_h,), p + "norm1_shift": (d_h,),
                p + "norm2_scale": (d_h,), p + "norm2_shift": (d_h,),
            })
        shapes["decoder.W_Q"] = (2 * d_h + 1, d_h)
        shapes["decoder.W_K"] = (d_h, d_h)
        self.shapes = shapes
        self.params = nn.ParameterDict(
            {_key(name): nn.Parameter(torch.empty(shapes[name])) for name in param_names(n_layers)})
        self.reset_parameters(seed)

    def reset_parameters(self, seed: int) -> None:
        """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0, norm scales 1."""
        gen = torch.Generator().manual_seed(int(seed))
        with torch.no_grad():
            for name in param_names(self.n_layers):
                p = self[name]
                if name.endswith("_scale"):
                    p.fill_(1.0)
                elif p.dim() == 1:
                    p.zero_()
                else:
                    fan_in = p.shape[-2]
                    bound = 1.0 / math.sqrt(fan_in)
                    p.copy_(torch.rand(p.shape, generator=gen, dtype=torch.float64)
                            .mul_(2 * bound).sub_(bound).to(p.dtype))

    def __getitem__(self, name: str) -> nn.Parameter:
        return self.params[_key(name)]

    def named_arrays(self):
        for name in param_names(self.n_layers):
            yield name, self[name]

    @property
    def config(self) -> dict:
        return {"d_h": self.d_h, "M": self.n_heads, "L": self.n_layers,
                "d_ff": self.d_ff, "C": self.clip}

    @property
    def dtype(self):
        return self["embed.W_x"].dtype

    # -- encoder ------------------------------------------------------------

    def embed_nodes(self, coords: torch.Tensor) -> torch.Tensor:
        """Affine embedding of normalised coordinates, (B, n, 2) -> (B, n, d_h)."""
        return coords @ self["embed.W_x"] + self["embed.b_x"]

    def encode(self, h0: torch.Tensor, attention: Optional[list] = None) -> "EncoderOut":
        """Run the attention stack; appends per-layer weights to ``attention`` if given."""
        h = h0
        d_k = self.d_h // self.n_heads
        for l in range(self.n_layers):
            p = f"layers.{l}."
            q = torch.einsum("bnd,mdk->bmnk", h, self[p + "W_Q"])
            k = torch.einsum("bnd,mdk->bmnk", h, self[p + "W_K"])
            v = torch.einsum("bnd,mdk->bmnk", h, self[p + "W_V"])
            weights = torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(d_k), dim=-1)
            if attention is not None:
                attention.append(weights.detach())
            heads = (weights @ v).permute(0, 2, 1, 3).reshape(h.shape[0], h.shape[1], self.d_h)
            h = _layer_norm(h + heads @ self[p + "W_O"], self[p + "norm1_scale"], self[p + "norm1_shift"])
            ff = torch.relu(h @ self[p + "ff_W1"] + self[p + "ff_b1"]) @ self[p + "ff_W2"] + self[p + "ff_b2"]
            h = _layer_norm(h + ff, self[p + "norm2_scale"], self[p + "norm2_shift"])
        if not torch.isfinite(h).all():
            raise NumericalFailureError("non-finite encoder activations")
        return EncoderOut(h, h.mean(dim=1))

    def forward(self, coords: torch.Tensor) -> "EncoderOut":
        return self.encode(self.embed_nodes(coords))

    # -- decoder ------------------------------------------------------------

    def decoder_cache(self, enc: "EncoderOut") -> "DecoderCache":
        W = self["decoder.W_Q"]
        d_h = self.d_h
        return DecoderCache(
            keys=enc.H @ self["decoder.W_K"],
            q_graph=enc.h_bar @ W[:d_h],
            q_nodes=enc.H @ W[d_h:2 * d_h],
            q_soc=W[2 * d_h],
        )

    def step_log_probs(self, cache: "DecoderCache", last: torch.Tensor, soc: torch.Tensor,
                       masked: torch.Tensor) -> torch.Tensor:
        """Log-probabilities over nodes, (B, n); masked entries are -inf."""
        rows = torch.arange(last.shape[0])
        q = cache.q_graph + cache.q_nodes[rows, last] + soc.to(cache.q_soc.dtype)[:, None] * cache.q_soc
        compat = torch.einsum("bd,bnd->bn", q, cache.keys) / math.sqrt(self.d_h)
        logits = self.clip * torch.tanh(compat)
        logits = logits.masked_fill(masked, -math.inf)
        return torch.log_softmax(logits, dim=-1)


def _key(name: str) -> str:
    return name.replace(".", "__")


def _layer_norm(x, scale, shift, eps=1e-5):
    mean = x.mean(dim=-1, keepdim=True)
    var = x.var(dim=-1, unbiased=False, keepdim=True)
    return (x - mean) / torch.sqrt(var + eps) * scale + shift


def init_params(seed: int = 0, d_h: int = 128, M: int = 8, L: int = 3,
                d_ff: Optional[int] = None, C: float = 10.0) -> AttentionPolicy:
    return AttentionPolicy(d_h, M, L, d_ff, C, seed)


@dataclass
class EncoderOut:
    H: torch.Tensor      # (B, n+1, d_h), row 0 = base station
    h_bar: torch.Tensor  # (B, d_h)


@dataclass
class DecoderCache:
    keys: torch.Tensor
    q_graph: torch.Tensor
    q_nodes: torch.Tensor
    q_soc: torch.Tensor


class Costing:
    """Per-parameter-set constants for energy masks and mission time."""

    def __init__(self, uav: Optional[UavParams] = None, wpt: Optional[WptParams] = None,
                 include_final_recharge: bool = False):
        self.uav = uav or default_uav()
        self.wpt = wpt or default_wpt()
        self.include_final_recharge = include_final_recharge
        self.j_per_km = self.uav.flight_power * KM / self.uav.V_cruise
        self.sec_per_km = KM / self.uav.V_cruise
        self.cap = energy_cap(self.uav)
        self.e_full = self.uav.E_full
        self._profile = None

    @property
    def profile(self) -> ChargeProfile:
        # built lazily: single-sortie missions never need the link budget
        if self._profile is None:
            self._profile = ChargeProfile(self.uav, self.wpt)
        return self._profile


class DecoderState:
    """Batched partial-solution state.

    ``used`` holds the flight energy (J) spent since the last depot departure,
    so the state of charge is ``1 - used / E_full``.
    """

    def __init__(self, dist: torch.Tensor, costing: Costing):
        self.dist = dist  # (B, n+1, n+1) float64, km
        self.costing = costing
        B, n1, _ = dist.shape
        self.batch = B
        self.visited = torch.zeros(B, n1, dtype=torch.bool)
        self.visited[:, 0] = True
        self.last = torch.zeros(B, dtype=torch.long)
        self.used = torch.zeros(B, dtype=torch.float64)
        self.fly_km = torch.zeros(B, dtype=torch.float64)
        self.hover_s = torch.zeros(B, dtype=torch.float64)
        self.step = 0
        self.routes = [[0] for _ in range(B)]

    @property
    def soc(self) -> torch.Tensor:
        return 1.0 - self.used / self.costing.e_full

    @property
    def all_visited(self) -> torch.Tensor:
        return self.visited.all(dim=1)

    @property
    def done(self) -> torch.Tensor:
        return self.all_visited & (self.last == 0)

    def mask(self) -> torch.Tensor:
        """True where a node may NOT be selected next."""
        rows = torch.arange(self.batch)
        d_last = self.dist[rows, self.last]      # (B, n+1)
        d_home = self.dist[:, :, 0]              # (B, n+1)
        need = self.used[:, None] + (d_last + d_home) * self.costing.j_per_km
        masked = self.visited | (need > self.costing.cap)
        masked[:, 0] = self.last == 0
        done = self.done
        if done.any():
            masked[done] = True
            masked[done, 0] = False
        dead = masked.all(dim=1)
        if dead.any():
            raise DeadEndError(f"no selectable node for batch rows {torch.nonzero(dead).flatten().tolist()}")
        return masked

    def advance(self, action: torch.Tensor) -> None:
        rows = torch.arange(self.batch)
        active = ~self.done
        leg = self.dist[rows, self.last, action] * active
        self.fly_km += leg
        self.used += leg * self.costing.j_per_km
        home = (action == 0) & active
        if home.any():
            final = home & self.all_visited
            charge = home & ~final if not self.costing.include_final_recharge else home
            if charge.any():
                prof = self.costing.profile
                extra = (self.used - prof.e_fly).clamp(min=0.0)
                self.hover_s += torch.where(charge, extra / prof.net_power, torch.zeros_like(extra))
            self.used = torch.where(home, torch.zeros_like(self.used), self.used)
        self.visited[rows, action] = True
        self.last = torch.where(active, action, self.last)
        for b in torch.nonzero(active).flatten().tolist():
            self.routes[b].append(int(action[b]))
        self.step += 1

    def cost_hours(self) -> torch.Tensor:
        return (self.fly_km * self.costing.sec_per_km + self.hover_s) / HOUR

    def clone(self) -> "DecoderState":
        other = DecoderState.__new__(DecoderState)
        other.__dict__.update(self.__dict__)
        for name in ("visited", "last", "used", "fly_km", "hover_s"):
            setattr(other, name, getattr(self, name).clone())
        other.routes = [list(r) for r in self.routes]
        return other

    def select(self, index) -> "DecoderState":
        """Sub-batch with rows ``index`` (list of ints), e.g. for beam bookkeeping."""
        other = DecoderState.__new__(DecoderState)
        other.__dict__.update(self.__dict__)
        idx = torch.as_tensor(index, dtype=torch.long)
        other.dist = self.dist[idx]
        for name in ("visited", "last", "used", "fly_km", "hover_s"):
            setattr(other, name, getattr(self, name)[idx].clone())
        other.routes = [list(self.routes[i]) for i in index]
        other.batch = len(index)
        return other


def feasible_mask(state: DecoderState) -> torch.Tensor:
    """Selection mask for the next step; True marks nodes that are excluded."""
    return state.mask()


# -- batched rollouts ----------------------------------------------------------

def batch_tensors(instances, dtype=torch.float32):
    """Stack equal-size instances into (normalised coords, float64 distances)."""
    coords = np.stack([inst.coords / inst.side_km for inst in instances])
    dist = np.stack([inst.dist for inst in instances])
    return torch.as_tensor(coords, dtype=dtype), torch.as_tensor(dist, dtype=torch.float64)


def _inverse_cdf(probs: torch.Tensor, u: torch.Tensor) -> torch.Tensor:
    """Sample one index per row with uniforms ``u``; zero-probability entries are never chosen."""
    cdf = probs.to(torch.float64).cumsum(dim=1)
    target = (u.to(torch.float64) * cdf[:, -1]).unsqueeze(1)
    idx = torch.searchsorted(cdf, target, right=True).squeeze(1)
    n = probs.shape[1]
    over = idx >= n
    if over.any():
        last_valid = n - 1 - torch.argmax((probs.flip(1) > 0).to(torch.int8), dim=1)
        idx = torch.where(over, last_valid, idx)
    return idx


@dataclass
class RolloutResult:
    routes: list
    log_prob: torch.Tensor  # (B,), differentiable when grad is enabled
    cost: torch.Tensor      # (B,) float64 hours


def rollout_batch(model: AttentionPolicy, coords: torch.Tensor, dist: torch.Tensor,
                  costing: Costing, strategy: str = "greedy", uniforms=None,
                  generator: Optional[torch.Generator] = None,
                  actions: Optional[torch.Tensor] = None, step_hook=None) -> RolloutResult:
    """Construct solutions for a batch of instances.

    ``strategy`` is ``"greedy"`` (argmax, lowest index on ties) or ``"sample"``.
    Sampling draws its uniforms from ``uniforms[:, t]`` when given (for
    reproducible nested sample sets) and from ``generator`` otherwise.
    ``actions`` (B, T) forces the selections (teacher forcing).
    ``step_hook(masked, log_probs)`` observes every decoding step.
    """
    if strategy not in ("greedy", "sample"):
        raise InvalidParameterError(f"unknown strategy {strategy!r}")
    enc = model(coords.to(model.dtype))
    cache = model.decoder_cache(enc)
    state = DecoderState(dist, costing)
    total = torch.zeros(state.batch, dtype=model.dtype)
    t = 0
    while not bool(state.done.all()):
        masked = state.mask()
        logp = model.step_log_probs(cache, state.last, state.soc, masked)
        if step_hook is not None:
            step_hook(masked, logp)
        if actions is not None:
            action = actions[:, t]
        elif strategy == "greedy":
            action = torch.argmax(logp, dim=1)
        else:
            if uniforms is not None:
                u = torch.as_tensor(uniforms[:, t])
            else:
                u = torch.rand(state.batch, generator=generator, dtype=torch.float64)
            action = _inverse_cdf(logp.detach().exp(), u)
        active = ~state.done
        chosen = logp.gather(1, action[:, None]).squeeze(1)
        total = total + torch.where(active, chosen, torch.zeros_like(chosen))
        state.advance(action)
        t += 1
    return RolloutResult(state.routes, total, state.cost_hours())


def max_decode_steps(n: int) -> int:
    """Upper bound on decisions: every task plus a depot return after each."""
    return 2 * n


def rollout(instance: Instance, model: AttentionPolicy, strategy: str = "greedy",
            rng: Optional[np.random.Generator] = None, uav: Optional[UavParams] = None,
            wpt: Optional[WptParams] = None, include_final_recharge: bool = False):
    """Single-instance rollout; returns ``(Solution, total log-probability)``."""
    costing = Costing(uav, wpt, include_final_recharge)
    check_reachable(instance, costing.uav)
    coords, dist = batch_tensors([instance], model.dtype)
    uniforms = None
    if strategy == "sample":
        rng = rng if rng is not None else np.random.default_rng()
        uniforms = rng.random((1, max_decode_steps(instance.n)))
    with torch.no_grad():
        res = rollout_batch(model, coords, dist, costing, strategy, uniforms=uniforms)
    return Solution(res.routes[0]), float(res.log_prob[0])


# -- checkpoints ---------------------------------------------------------------

def save_checkpoint(model: AttentionPolicy, path) -> None:
    """Zip archive: ``meta.json`` plus one little-endian float32 blob per array."""
    meta = {**model.config, "format_version": CHECKPOINT_VERSION, "params": {}}
    blobs = {}
    for name, p in model.named_arrays():
        arr = p.detach().cpu().numpy().astype("<f4")
        meta["params"][name] = list(arr.shape)
        blobs[name] = arr.tobytes()
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        _write(zf, "meta.json", json.dumps(meta, indent=1, sort_keys=True).encode())
        for name, data in blobs.items():
            _write(zf, f"params/{name}.f32", data)


def _write(zf, name, data):
    info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def load_checkpoint(path) -> AttentionPolicy:
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("format_version") != CHECKPOINT_VERSION:
            raise InvalidParameterError(f"unsupported checkpoint version {meta.get('format_version')!r}")
        model = AttentionPolicy(meta["d_h"], meta["M"], meta["L"], meta["d_ff"], meta["C"])
        expected = set(param_names(model.n_layers))
        if set(meta["params"]) != expected:
            raise InvalidParameterError("checkpoint parameter names do not match the model layout")
        with torch.no_grad():
            for name, p in model.named_arrays():
                shape = tuple(meta["params"][name])
                if shape != tuple(p.shape):
                    raise InvalidParameterError(
                        f"shape mismatch for {name}: checkpoint {shape}, model {tuple(p.shape)}")
                arr = np.frombuffer(zf.read(f"params/{name}.f32"), dtype="<f4")
                if arr.size != p.numel():
                    raise InvalidParameterError(f"truncated data for {name}")
                p.copy_(torch.from_numpy(arr.reshape(shape).copy()))
    return model


def checkpoint_bytes(model: AttentionPolicy) -> bytes:
    buf = io.BytesIO()
    save_checkpoint(model, buf)
    return buf.getvalue()
