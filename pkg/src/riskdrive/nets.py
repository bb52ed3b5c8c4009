"""Actor and critic networks.

Two encoder families share one interface:

* attention nets: per-vehicle embeddings, masked multi-head self-attention
  with a residual connection, then a 2-hop ego-attention whose query is the
  ego row; the critic mixes an ego-attention branch with a masked mean-pool
  MLP branch through learned 1-column mixing vectors.
* plain MLP nets: the flattened observation through three GELU layers
  (deliberately order- and dimension-sensitive; used by the ablations).

Forward passes are batched by stacking all samples' vehicle rows into one
matrix and restricting attention to block-diagonal (per-sample) keys, which
keeps the whole computation inside the 2-D autodiff engine.  Gather, scatter
and pooling are expressed as matmuls with constant 0/1 matrices so they
differentiate for free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Node

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
ACTION_HALF = np.array([5.0, 0.6])

EGO_DIM = 9
SV_DIM = 6
ACTION_DIM = 2

# fixed input scaling so raw meters/radians enter the embeddings at O(1)
EGO_SCALE = np.array([1.0, 1 / 50, 1 / 50, 1 / 10, 1 / 5, 1 / math.pi, 0.5, 1 / 20, 1 / 100])
SV_SCALE = np.array([1.0, 1 / 50, 1 / 50, 1 / 10, 1 / 10, 1 / math.pi])


@dataclass(frozen=True)
class NetConfig:
    d: int = 256
    heads: int = 4
    attn_scale_per_head: bool = False  # paper formula divides by sqrt(d)

    @property
    def head_dim(self) -> int:
        if self.d % self.heads:
            raise ValueError(f"hidden size {self.d} not divisible by {self.heads} heads")
        return self.d // self.heads

    @property
    def attn_divisor(self) -> float:
        return math.sqrt(self.head_dim if self.attn_scale_per_head else self.d)


def _init_linear(rng, fan_in: int, fan_out: int) -> tuple[np.ndarray, np.ndarray]:
    bound = 1.0 / math.sqrt(fan_in)
    return (
        rng.uniform(-bound, bound, size=(fan_in, fan_out)),
        rng.uniform(-bound, bound, size=(1, fan_out)),
    )


def _init_attention(rng, prefix: str, cfg: NetConfig, params: dict) -> None:
    d, dh = cfg.d, cfg.head_dim
    bound = 1.0 / math.sqrt(d)
    for h in range(cfg.heads):
        for name in ("q", "k", "v"):
            params[f"{prefix}.h{h}.{name}"] = rng.uniform(-bound, bound, size=(d, dh))
        # per-head slice of W^O; summing the per-head projections equals
        # concatenating heads and applying one d x d output matrix
        params[f"{prefix}.h{h}.o"] = rng.uniform(-bound, bound, size=(dh, d))


# ---------------------------------------------------------------------------
# constant gather/pool matrices, cached per (batch, rows-per-sample) layout

_gather_cache: dict = {}


def _row_layout(batch: int, per_sample: int, ego_pos: int = 0):
    key = (batch, per_sample, ego_pos)
    if key not in _gather_cache:
        n = batch * per_sample
        sel_ego = np.zeros((batch, n))
        for b in range(batch):
            sel_ego[b, b * per_sample + ego_pos] = 1.0
        sample_of = np.repeat(np.arange(batch), per_sample)
        _gather_cache[key] = (sel_ego, sample_of)
    return _gather_cache[key]


def _mha(z: Node, queries: Node, allowed: np.ndarray, prefix: str,
         leaves: dict, cfg: NetConfig) -> Node:
    """Multi-head attention of ``queries`` against keys/values from ``z``."""
    out = None
    inv = 1.0 / cfg.attn_divisor
    for h in range(cfg.heads):
        wq = leaves[f"{prefix}.h{h}.q"]
        wk = leaves[f"{prefix}.h{h}.k"]
        wv = leaves[f"{prefix}.h{h}.v"]
        wo = leaves[f"{prefix}.h{h}.o"]
        q = ad.matmul(queries, wq)
        k = ad.matmul(z, wk)
        v = ad.matmul(z, wv)
        scores = ad.scale(ad.matmul(q, ad.transpose(k)), inv)
        attn = ad.softmax_rows_masked(scores, allowed)
        head_out = ad.matmul(ad.matmul(attn, v), wo)
        out = head_out if out is None else ad.add(out, head_out)
    return out


def _wrap(params: dict) -> dict:
    return {k: ad.leaf(v) for k, v in params.items()}


def _embed_rows(x: np.ndarray, leaves: dict, name: str) -> Node:
    return ad.gelu(ad.add(ad.matmul(ad.constant(x), leaves[f"{name}.w"]),
                          leaves[f"{name}.b"]))


def _normalize_inputs(ego: np.ndarray, sv: np.ndarray, mask: np.ndarray):
    ego = np.atleast_2d(np.asarray(ego, dtype=float))
    sv = np.asarray(sv, dtype=float)
    if sv.ndim == 2:
        sv = sv[None]
    mask = np.atleast_2d(np.asarray(mask, dtype=bool))
    return ego * EGO_SCALE, sv * SV_SCALE, mask


# ---------------------------------------------------------------------------
# attention actor


class MmamActor:
    def __init__(self, rng: np.random.Generator, cfg: NetConfig | None = None):
        self.cfg = cfg or NetConfig()
        d = self.cfg.d
        p: dict[str, np.ndarray] = {}
        p["ego_embed.w"], p["ego_embed.b"] = _init_linear(rng, EGO_DIM, d)
        p["sv_embed.w"], p["sv_embed.b"] = _init_linear(rng, SV_DIM, d)
        _init_attention(rng, "self_attn", self.cfg, p)
        _init_attention(rng, "ego_attn", self.cfg, p)
        p["head.w"], p["head.b"] = _init_linear(rng, d, d)
        p["mean.w"], p["mean.b"] = _init_linear(rng, d, ACTION_DIM)
        p["log_std.w"], p["log_std.b"] = _init_linear(rng, d, ACTION_DIM)
        self.params = p

    def forward(self, ego, sv, mask, params: dict | None = None):
        """Returns (mean (B,2), clamped log_std (B,2), leaves dict)."""
        ego, sv, mask = _normalize_inputs(ego, sv, mask)
        batch, m = mask.shape
        leaves = _wrap(params if params is not None else self.params)
        cfg = self.cfg

        e = _embed_rows(ego, leaves, "ego_embed")  # (B, d)
        s = _embed_rows(sv.reshape(batch * m, SV_DIM), leaves, "sv_embed")  # (B*M, d)

        per = 1 + m
        n = batch * per
        scatter_e = np.zeros((n, batch))
        scatter_s = np.zeros((n, batch * m))
        for b in range(batch):
            scatter_e[b * per, b] = 1.0
            scatter_s[b * per + 1:(b + 1) * per, b * m:(b + 1) * m] = np.eye(m)
        z1 = ad.add(ad.matmul(ad.constant(scatter_e), e),
                    ad.matmul(ad.constant(scatter_s), s))

        row_ok = np.empty(n, dtype=bool)
        sample_of = np.repeat(np.arange(batch), per)
        row_ok[::per] = True
        row_ok.reshape(batch, per)[:, 1:] = mask
        allowed_self = (sample_of[:, None] == sample_of[None, :]) & row_ok[None, :]

        z1p = ad.add(z1, _mha(z1, z1, allowed_self, "self_attn", leaves, cfg))

        sel_ego, _ = _row_layout(batch, per)
        q_ego = ad.matmul(ad.constant(sel_ego), z1p)  # (B, d)
        allowed_ego = (np.arange(batch)[:, None] == sample_of[None, :]) & row_ok[None, :]
        y = _mha(z1p, q_ego, allowed_ego, "ego_attn", leaves, cfg)

        h = ad.gelu(ad.add(ad.matmul(y, leaves["head.w"]), leaves["head.b"]))
        mean = ad.add(ad.matmul(h, leaves["mean.w"]), leaves["mean.b"])
        log_std = ad.clip(ad.add(ad.matmul(h, leaves["log_std.w"]), leaves["log_std.b"]),
                          LOG_STD_MIN, LOG_STD_MAX)
        return mean, log_std, leaves


# ---------------------------------------------------------------------------
# attention critic


class MmamCritic:
    def __init__(self, rng: np.random.Generator, cfg: NetConfig | None = None):
        self.cfg = cfg or NetConfig()
        d = self.cfg.d
        p: dict[str, np.ndarray] = {}
        p["ego_embed.w"], p["ego_embed.b"] = _init_linear(rng, EGO_DIM, d)
        p["act_embed.w"], p["act_embed.b"] = _init_linear(rng, ACTION_DIM, d)
        p["sv_embed.w"], p["sv_embed.b"] = _init_linear(rng, SV_DIM, d)
        _init_attention(rng, "ego_attn", self.cfg, p)
        for i in range(3):
            p[f"mlp{i}.w"], p[f"mlp{i}.b"] = _init_linear(rng, d, d)
        # equal small mixing weights so neither branch dominates at start
        p["mix_attn"] = np.full((d, 1), 0.05)
        p["mix_mlp"] = np.full((d, 1), 0.05)
        self.params = p

    def forward(self, ego, sv, mask, action, params: dict | None = None):
        """Q(s, a); ``action`` may be an array or a (B, 2) graph node.

        Returns (q (B,1), leaves dict, action_node).
        """
        ego, sv, mask = _normalize_inputs(ego, sv, mask)
        batch, m = mask.shape
        leaves = _wrap(params if params is not None else self.params)
        cfg = self.cfg

        if isinstance(action, Node):
            action_node = action
        else:
            action_node = ad.constant(np.atleast_2d(np.asarray(action, dtype=float)))
        a_norm = ad.mul(action_node, ad.constant(np.tile(1.0 / ACTION_HALF, (batch, 1))))

        e = _embed_rows(ego, leaves, "ego_embed")
        a_emb = ad.gelu(ad.add(ad.matmul(a_norm, leaves["act_embed.w"]),
                               leaves["act_embed.b"]))
        s = _embed_rows(sv.reshape(batch * m, SV_DIM), leaves, "sv_embed")

        per = 2 + m
        n = batch * per
        scatter_e = np.zeros((n, batch))
        scatter_a = np.zeros((n, batch))
        scatter_s = np.zeros((n, batch * m))
        for b in range(batch):
            scatter_e[b * per, b] = 1.0
            scatter_a[b * per + 1, b] = 1.0
            scatter_s[b * per + 2:(b + 1) * per, b * m:(b + 1) * m] = np.eye(m)
        z2 = ad.add(
            ad.add(ad.matmul(ad.constant(scatter_e), e),
                   ad.matmul(ad.constant(scatter_a), a_emb)),
            ad.matmul(ad.constant(scatter_s), s),
        )

        row_ok = np.empty(n, dtype=bool)
        sample_of = np.repeat(np.arange(batch), per)
        row_ok.reshape(batch, per)[:, 0] = True
        row_ok.reshape(batch, per)[:, 1] = True
        row_ok.reshape(batch, per)[:, 2:] = mask

        sel_ego, _ = _row_layout(batch, per)
        q_ego = ad.matmul(ad.constant(sel_ego), z2)
        allowed_ego = (np.arange(batch)[:, None] == sample_of[None, :]) & row_ok[None, :]
        y_attn = _mha(z2, q_ego, allowed_ego, "ego_attn", leaves, cfg)

        pool = np.zeros((batch, n))
        counts = row_ok.reshape(batch, per).sum(axis=1)
        for b in range(batch):
            pool[b, b * per:(b + 1) * per] = row_ok.reshape(batch, per)[b] / counts[b]
        h = ad.matmul(ad.constant(pool), z2)
        for i in range(3):
            h = ad.gelu(ad.add(ad.matmul(h, leaves[f"mlp{i}.w"]), leaves[f"mlp{i}.b"]))

        q = ad.add(ad.matmul(y_attn, leaves["mix_attn"]), ad.matmul(h, leaves["mix_mlp"]))
        return q, leaves, action_node


# ---------------------------------------------------------------------------
# MLP baselines (permutation- and dimension-sensitive on purpose)


class MlpActor:
    def __init__(self, rng: np.random.Generator, m_sv: int, cfg: NetConfig | None = None):
        self.cfg = cfg or NetConfig()
        self.m_sv = m_sv
        d = self.cfg.d
        in_dim = EGO_DIM + SV_DIM * m_sv
        p: dict[str, np.ndarray] = {}
        dims = [in_dim, d, d, d]
        for i in range(3):
            p[f"mlp{i}.w"], p[f"mlp{i}.b"] = _init_linear(rng, dims[i], dims[i + 1])
        p["mean.w"], p["mean.b"] = _init_linear(rng, d, ACTION_DIM)
        p["log_std.w"], p["log_std.b"] = _init_linear(rng, d, ACTION_DIM)
        self.params = p

    def forward(self, ego, sv, mask, params: dict | None = None):
        ego, sv, mask = _normalize_inputs(ego, sv, mask)
        batch = ego.shape[0]
        leaves = _wrap(params if params is not None else self.params)
        x = ad.constant(np.hstack([ego, sv.reshape(batch, -1)]))
        h = x
        for i in range(3):
            h = ad.gelu(ad.add(ad.matmul(h, leaves[f"mlp{i}.w"]), leaves[f"mlp{i}.b"]))
        mean = ad.add(ad.matmul(h, leaves["mean.w"]), leaves["mean.b"])
        log_std = ad.clip(ad.add(ad.matmul(h, leaves["log_std.w"]), leaves["log_std.b"]),
                          LOG_STD_MIN, LOG_STD_MAX)
        return mean, log_std, leaves


class MlpCritic:
    def __init__(self, rng: np.random.Generator, m_sv: int, cfg: NetConfig | None = None):
        self.cfg = cfg or NetConfig()
        self.m_sv = m_sv
        d = self.cfg.d
        in_dim = EGO_DIM + SV_DIM * m_sv + ACTION_DIM
        p: dict[str, np.ndarray] = {}
        dims = [in_dim, d, d, d]
        for i in range(3):
            p[f"mlp{i}.w"], p[f"mlp{i}.b"] = _init_linear(rng, dims[i], dims[i + 1])
        p["out.w"], p["out.b"] = _init_linear(rng, d, 1)
        self.params = p

    def forward(self, ego, sv, mask, action, params: dict | None = None):
        ego, sv, mask = _normalize_inputs(ego, sv, mask)
        batch = ego.shape[0]
        leaves = _wrap(params if params is not None else self.params)
        if isinstance(action, Node):
            action_node = action
        else:
            action_node = ad.constant(np.atleast_2d(np.asarray(action, dtype=float)))
        a_norm = ad.mul(action_node, ad.constant(np.tile(1.0 / ACTION_HALF, (batch, 1))))
        x = ad.concat_rows([ad.transpose(ad.constant(np.hstack([ego, sv.reshape(batch, -1)]))),
                            ad.transpose(a_norm)])
        h = ad.transpose(x)
        for i in range(3):
            h = ad.gelu(ad.add(ad.matmul(h, leaves[f"mlp{i}.w"]), leaves[f"mlp{i}.b"]))
        q = ad.add(ad.matmul(h, leaves["out.w"]), leaves["out.b"])
        return q, leaves, action_node


# ---------------------------------------------------------------------------
# squashed-Gaussian sampling


def sample_action_np(mean: np.ndarray, log_std: np.ndarray,
                     rng: np.random.Generator | None = None,
                     deterministic: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Draw (action, log_prob) outside the graph; mean/log_std are arrays."""
    mean = np.atleast_2d(mean)
    log_std = np.clip(np.atleast_2d(log_std), LOG_STD_MIN, LOG_STD_MAX)
    if deterministic:
        eps = np.zeros_like(mean)
    else:
        eps = rng.standard_normal(mean.shape)
    u = mean + np.exp(log_std) * eps
    t = np.tanh(u)
    action = ACTION_HALF * t
    log_n = -0.5 * eps**2 - log_std - 0.5 * math.log(2 * math.pi)
    log_jac = 2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u)) + np.log(ACTION_HALF)
    return action, (log_n - log_jac).sum(axis=1)


def policy_sample_graph(mean: Node, log_std: Node,
                        eps: np.ndarray) -> tuple[Node, Node]:
    """Reparameterized squashed-Gaussian sample inside the graph.

    ``eps`` is a fixed noise draw of the same shape as the mean.  Returns
    (action (B,2), log_prob (B,1)); gradients flow into mean and log_std.
    """
    batch = mean.shape[0]
    eps_c = ad.constant(eps)
    u = ad.add(mean, ad.mul(ad.exp(log_std), eps_c))
    t = ad.tanh(u)
    action = ad.mul(t, ad.constant(np.tile(ACTION_HALF, (batch, 1))))

    log_n = ad.add(ad.scale(log_std, -1.0),
                   ad.constant(-0.5 * eps**2 - 0.5 * math.log(2 * math.pi)))
    # log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u))
    log_jac = ad.add(
        ad.scale(ad.add(u, ad.softplus(ad.scale(u, -2.0))), -2.0),
        ad.constant(np.tile(2.0 * math.log(2.0) + np.log(ACTION_HALF), (batch, 1))),
    )
    per_dim = ad.add(log_n, ad.scale(log_jac, -1.0))
    log_prob = ad.matmul(per_dim, ad.constant(np.ones((ACTION_DIM, 1))))
    return action, log_prob
