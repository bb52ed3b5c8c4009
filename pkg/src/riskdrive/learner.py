"""Constrained soft actor-critic training.

Twin reward critics regress entropy-regularized Bellman targets, twin safe
critics regress discounted risk with a pessimistic (max) bootstrap and no
entropy term, the actor minimizes

    mean( alpha * log pi(a|s) - min_j Q_r,j(s, a) )
        + lambda * mean( relu( max_j Q_c,j(s, a) - d_thres ) )

with a reparameterized action, and the multiplier follows dual ascent on the
batch-mean constraint violation, projected to lambda >= 0.  The temperature
alpha is log-parameterized and tuned toward a fixed target entropy.

Five ablation variants share the loop: ``sac`` and ``sac-rs`` are plain MLP
SAC (the latter with the shaped proximity reward), ``rsac`` adds the safe
critics and the action-correction layer, ``asac`` is the attention encoder
without safety, and ``arsac`` is the full method.
"""

from __future__ import annotations

import io
import math
import zipfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import cmdp_env, nets, safety
from .cmdp_env import EnvConfig, IntersectionEnv, Observation
from .nets import NetConfig
from .vehicle import AX_LIMIT, STEER_LIMIT, Action, clamp_action

METRICS_VERSION = "riskdrive-metrics-v1"
METRICS_COLUMNS = (
    "episode,steps,outcome,reward,cost,mean_speed,lambda,alpha,"
    "actor_loss,lambda_term,q_r_loss,q_c_loss,alpha_loss,corrections"
)

ATTENTION_VARIANTS = frozenset({"asac", "arsac"})
SAFETY_VARIANTS = frozenset({"rsac", "arsac"})
VARIANTS = ("sac", "sac-rs", "rsac", "asac", "arsac")

_CHUNK = 64  # rows per graph build; keeps attention score matrices small


@dataclass(frozen=True)
class LearnerConfig:
    variant: str = "arsac"
    episodes: int = 10_000
    seed: int = 0
    batch: int = 256
    buffer: int = 100_000
    gamma: float = 0.99
    tau: float = 0.005
    lr_actor: float = 3e-4
    lr_actor_end: float = 1e-5
    lr_critic: float = 3e-3
    lr_critic_end: float = 1e-4
    lr_alpha: float = 3e-4
    lr_lambda: float = 1e-4
    lambda0: float = 1.0
    d_thres: float = 0.05
    target_entropy: float = -2.0
    updates_per_episode: int = 50
    start_steps: int = 500  # uniform-random warmup actions
    checkpoint_every: int = 500
    correction: safety.CorrectionConfig = field(default_factory=safety.CorrectionConfig)
    net: NetConfig = field(default_factory=NetConfig)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.episodes < 1 or self.batch < 1 or self.buffer < self.batch:
            raise ValueError("episodes, batch and buffer must be positive and consistent")

    @property
    def uses_attention(self) -> bool:
        return self.variant in ATTENTION_VARIANTS

    @property
    def uses_safety(self) -> bool:
        return self.variant in SAFETY_VARIANTS

    def lr_at(self, episode: int) -> tuple[float, float]:
        """Linearly decayed (actor, critic) learning rates for an episode."""
        frac = episode / max(1, self.episodes - 1)
        frac = min(1.0, max(0.0, frac))
        return (
            self.lr_actor + frac * (self.lr_actor_end - self.lr_actor),
            self.lr_critic + frac * (self.lr_critic_end - self.lr_critic),
        )


# ---------------------------------------------------------------------------
# replay


@dataclass
class Batch:
    ego: np.ndarray
    sv: np.ndarray
    mask: np.ndarray
    action: np.ndarray
    reward: np.ndarray  # (B, 1)
    cost: np.ndarray  # (B, 1)
    next_ego: np.ndarray
    next_sv: np.ndarray
    next_mask: np.ndarray
    done: np.ndarray  # (B, 1) float, 1.0 at terminal transitions


class ReplayBuffer:
    """Fixed-capacity FIFO ring with uniform without-replacement sampling."""

    def __init__(self, capacity: int, m_sv: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._n = 0
        self._head = 0
        self.ego = np.zeros((capacity, nets.EGO_DIM))
        self.sv = np.zeros((capacity, m_sv, nets.SV_DIM))
        self.mask = np.zeros((capacity, m_sv), dtype=bool)
        self.action = np.zeros((capacity, nets.ACTION_DIM))
        self.reward = np.zeros((capacity, 1))
        self.cost = np.zeros((capacity, 1))
        self.next_ego = np.zeros_like(self.ego)
        self.next_sv = np.zeros_like(self.sv)
        self.next_mask = np.zeros_like(self.mask)
        self.done = np.zeros((capacity, 1))

    def __len__(self) -> int:
        return self._n

    def add(self, obs: Observation, action: np.ndarray, reward: float, cost: float,
            next_obs: Observation, done: bool) -> None:
        if cost < 0:
            raise ValueError(f"negative cost {cost}")
        i = self._head
        self.ego[i] = obs.ego_row
        self.sv[i] = obs.sv_matrix
        self.mask[i] = obs.mask
        self.action[i] = action
        self.reward[i] = reward
        self.cost[i] = cost
        self.next_ego[i] = next_obs.ego_row
        self.next_sv[i] = next_obs.sv_matrix
        self.next_mask[i] = next_obs.mask
        self.done[i] = float(done)
        self._head = (i + 1) % self.capacity
        self._n = min(self._n + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch: int) -> Batch:
        if self._n == 0:
            raise ValueError("empty buffer")
        if batch > self._n:
            raise ValueError(f"batch {batch} exceeds buffer fill {self._n}")
        idx = rng.choice(self._n, size=batch, replace=False)
        return Batch(
            self.ego[idx], self.sv[idx], self.mask[idx], self.action[idx],
            self.reward[idx], self.cost[idx],
            self.next_ego[idx], self.next_sv[idx], self.next_mask[idx], self.done[idx],
        )


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    """Per-array first/second-moment adaptive gradient descent."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             lr: float) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(params[k])
                self.v[k] = np.zeros_like(params[k])
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            params[k] -= lr * (self.m[k] / b1t) / (np.sqrt(self.v[k] / b2t) + self.eps)


def _chunks(n: int) -> list[tuple[int, int]]:
    return [(i, min(i + _CHUNK, n)) for i in range(0, n, _CHUNK)]


# ---------------------------------------------------------------------------
# agent


class Agent:
    """Networks, multiplier, temperature and their update rules."""

    def __init__(self, cfg: LearnerConfig, m_sv: int, rng: np.random.Generator):
        self.cfg = cfg
        self.m_sv = m_sv
        net_cfg = cfg.net
        if cfg.uses_attention:
            self.actor = nets.MmamActor(rng, net_cfg)
            make_critic = lambda: nets.MmamCritic(rng, net_cfg)
        else:
            self.actor = nets.MlpActor(rng, m_sv, net_cfg)
            make_critic = lambda: nets.MlpCritic(rng, m_sv, net_cfg)
        self.q_r = [make_critic(), make_critic()]
        self.q_r_target = [{k: v.copy() for k, v in c.params.items()} for c in self.q_r]
        if cfg.uses_safety:
            self.q_c = [make_critic(), make_critic()]
            self.q_c_target = [{k: v.copy() for k, v in c.params.items()} for c in self.q_c]
        else:
            self.q_c = []
            self.q_c_target = []
        self.log_alpha = np.zeros((1, 1))
        self.lam = cfg.lambda0 if cfg.uses_safety else 0.0
        self.opt_actor = Adam()
        self.opt_critics = [Adam() for _ in range(len(self.q_r) + len(self.q_c))]
        self.opt_alpha = Adam()

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0, 0]))

    # -- rollout-side -------------------------------------------------------

    def policy_stats(self, ego, sv, mask) -> tuple[np.ndarray, np.ndarray]:
        mean, log_std, _ = self.actor.forward(ego, sv, mask)
        return mean.value, log_std.value

    def act(self, obs: Observation, rng: np.random.Generator | None = None,
            deterministic: bool = False) -> np.ndarray:
        mean, log_std = self.policy_stats(obs.ego_row, obs.sv_matrix, obs.mask)
        action, _ = nets.sample_action_np(mean, log_std, rng=rng, deterministic=deterministic)
        return action[0]

    def risk_fn(self, obs: Observation):
        """Differentiable max-of-safe-critics risk of an action at ``obs``."""
        if not self.q_c:
            raise RuntimeError(f"variant {self.cfg.variant!r} has no safe critics")

        def fn(action_node):
            q1, _, _ = self.q_c[0].forward(obs.ego_row, obs.sv_matrix, obs.mask, action_node)
            q2, _, _ = self.q_c[1].forward(obs.ego_row, obs.sv_matrix, obs.mask, action_node)
            return ad.max_pair(q1, q2)

        return fn

    def assess(self, obs: Observation, action: np.ndarray) -> float:
        return safety.assess(self.risk_fn(obs), action)

    def correct(self, obs: Observation, action: np.ndarray,
                telemetry: list | None = None) -> safety.CorrectionResult:
        return safety.correct(self.risk_fn(obs), action, self.cfg.correction, telemetry)

    # -- update-side --------------------------------------------------------

    def _sample_next(self, batch: Batch, rng: np.random.Generator):
        mean, log_std = self.policy_stats(batch.next_ego, batch.next_sv, batch.next_mask)
        return nets.sample_action_np(mean, log_std, rng=rng)

    def _target_q(self, critics, targets, ego, sv, mask, action, reduce_fn) -> np.ndarray:
        qs = [c.forward(ego, sv, mask, action, params=t)[0].value
              for c, t in zip(critics, targets)]
        return reduce_fn(qs[0], qs[1])

    def _regress(self, critic, opt: Adam, batch_fields, y: np.ndarray, lr: float) -> float:
        ego, sv, mask, action = batch_fields
        n = ego.shape[0]
        total = 0.0
        grads = {k: np.zeros_like(v) for k, v in critic.params.items()}
        for lo, hi in _chunks(n):
            q, leaves, _ = critic.forward(ego[lo:hi], sv[lo:hi], mask[lo:hi], action[lo:hi])
            diff = ad.add(q, ad.constant(-y[lo:hi]))
            loss = ad.scale(ad.sum_all(ad.square(diff)), 0.5 / n)
            ad.backward(loss)
            total += float(loss.value[0, 0])
            for k in grads:
                grads[k] += leaves[k].grad
        opt.step(critic.params, grads, lr)
        return total

    def critic_update(self, batch: Batch, lr_critic: float,
                      rng: np.random.Generator) -> dict[str, float]:
        next_a, next_logp = self._sample_next(batch, rng)
        nxt = (batch.next_ego, batch.next_sv, batch.next_mask)
        v_r = (
            self._target_q(self.q_r, self.q_r_target, *nxt, next_a, np.minimum)
            - self.alpha * next_logp[:, None]
        )
        y_r = batch.reward + self.cfg.gamma * (1.0 - batch.done) * v_r
        cur = (batch.ego, batch.sv, batch.mask, batch.action)
        losses = {
            "q_r1": self._regress(self.q_r[0], self.opt_critics[0], cur, y_r, lr_critic),
            "q_r2": self._regress(self.q_r[1], self.opt_critics[1], cur, y_r, lr_critic),
        }
        if self.q_c:
            v_c = self._target_q(self.q_c, self.q_c_target, *nxt, next_a, np.maximum)
            y_c = batch.cost + self.cfg.gamma * (1.0 - batch.done) * v_c
            losses["q_c1"] = self._regress(self.q_c[0], self.opt_critics[2], cur, y_c, lr_critic)
            losses["q_c2"] = self._regress(self.q_c[1], self.opt_critics[3], cur, y_c, lr_critic)
        else:
            losses["q_c1"] = losses["q_c2"] = 0.0
        return losses

    def actor_lambda_update(self, batch: Batch, lr_actor: float,
                            rng: np.random.Generator) -> dict[str, float]:
        n = batch.ego.shape[0]
        eps = rng.standard_normal((n, nets.ACTION_DIM))
        alpha = self.alpha
        total_loss = 0.0
        total_lambda_term = 0.0
        total_violation = 0.0
        total_logp = 0.0
        grads = {k: np.zeros_like(v) for k, v in self.actor.params.items()}
        for lo, hi in _chunks(n):
            e, s, m = batch.ego[lo:hi], batch.sv[lo:hi], batch.mask[lo:hi]
            mean, log_std, leaves = self.actor.forward(e, s, m)
            a, logp = nets.policy_sample_graph(mean, log_std, eps[lo:hi])
            q_min = ad.min_pair(self.q_r[0].forward(e, s, m, a)[0],
                                self.q_r[1].forward(e, s, m, a)[0])
            loss = ad.add(ad.scale(logp, alpha), ad.scale(q_min, -1.0))
            if self.q_c:
                q_max = ad.max_pair(self.q_c[0].forward(e, s, m, a)[0],
                                    self.q_c[1].forward(e, s, m, a)[0])
                viol = ad.relu(ad.add(q_max, ad.constant(
                    np.full((hi - lo, 1), -self.cfg.d_thres))))
                loss = ad.add(loss, ad.scale(viol, self.lam))
                total_violation += float(viol.value.sum())
                total_lambda_term += self.lam * float(viol.value.sum())
            loss = ad.scale(ad.sum_all(loss), 1.0 / n)
            ad.backward(loss)
            total_loss += float(loss.value[0, 0])
            total_logp += float(logp.value.sum())
            for k in grads:
                grads[k] += leaves[k].grad
        self.opt_actor.step(self.actor.params, grads, lr_actor)
        if self.q_c:
            self.lam = max(0.0, self.lam + self.cfg.lr_lambda * total_violation / n)
        self._last_logp_mean = total_logp / n
        return {
            "actor": total_loss,
            "lambda_term": total_lambda_term / n,
            "violation": total_violation / n,
        }

    def temperature_update(self, batch: Batch, rng: np.random.Generator) -> float:
        """One Adam step on log(alpha) minimizing mean(-alpha (logp + H0))."""
        mean, log_std = self.policy_stats(batch.ego, batch.sv, batch.mask)
        _, logp = nets.sample_action_np(mean, log_std, rng=rng)
        err = float(np.mean(logp) + self.cfg.target_entropy)
        loss = -self.alpha * err
        grad = np.array([[-self.alpha * err]])
        self.opt_alpha.step({"log_alpha": self.log_alpha}, {"log_alpha": grad},
                            self.cfg.lr_alpha)
        return loss

    def soft_update_targets(self, tau: float | None = None) -> None:
        tau = self.cfg.tau if tau is None else tau
        for critic, target in zip(self.q_r + self.q_c, self.q_r_target + self.q_c_target):
            for k, v in critic.params.items():
                target[k] = (1.0 - tau) * target[k] + tau * v

    # -- persistence --------------------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {"meta.variant": np.array(self.cfg.variant),
               "meta.m_sv": np.array(self.m_sv),
               "log_alpha": self.log_alpha.copy(),
               "lambda": np.array([[self.lam]])}
        groups = {"actor": self.actor.params,
                  "q_r1": self.q_r[0].params, "q_r2": self.q_r[1].params,
                  "q_r1_target": self.q_r_target[0], "q_r2_target": self.q_r_target[1]}
        if self.q_c:
            groups.update({"q_c1": self.q_c[0].params, "q_c2": self.q_c[1].params,
                           "q_c1_target": self.q_c_target[0],
                           "q_c2_target": self.q_c_target[1]})
        for g, params in groups.items():
            for k, v in params.items():
                out[f"{g}/{k}"] = v
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        variant = str(arrays["meta.variant"])
        if variant != self.cfg.variant:
            raise ValueError(f"checkpoint variant {variant!r} != agent {self.cfg.variant!r}")
        self.log_alpha = np.array(arrays["log_alpha"], dtype=float).reshape(1, 1)
        self.lam = float(np.asarray(arrays["lambda"]).reshape(()))
        groups = {"actor": self.actor.params,
                  "q_r1": self.q_r[0].params, "q_r2": self.q_r[1].params,
                  "q_r1_target": self.q_r_target[0], "q_r2_target": self.q_r_target[1]}
        if self.q_c:
            groups.update({"q_c1": self.q_c[0].params, "q_c2": self.q_c[1].params,
                           "q_c1_target": self.q_c_target[0],
                           "q_c2_target": self.q_c_target[1]})
        for g, params in groups.items():
            for k in params:
                params[k] = np.array(arrays[f"{g}/{k}"], dtype=float)


def save_checkpoint(path, agent: Agent) -> None:
    """Write agent state as a .npz with fixed zip metadata (byte-reproducible)."""
    arrays = agent.state_arrays()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asarray(arrays[name]), allow_pickle=False)
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, buf.getvalue())


def load_checkpoint(path, agent: Agent) -> None:
    with np.load(path, allow_pickle=False) as data:
        agent.load_state_arrays({k.removesuffix(".npy"): data[k] for k in data.files})


# ---------------------------------------------------------------------------
# training loop


def _nan_guard(values: dict[str, float], episode: int, agent: Agent, out_dir) -> None:
    bad = [k for k, v in values.items() if not math.isfinite(v)]
    if bad:
        if out_dir is not None:
            save_checkpoint(Path(out_dir) / "diagnostic.npz", agent)
        raise ArithmeticError(f"non-finite losses {bad} at episode {episode}")


def _fmt(x: float) -> str:
    return repr(float(x))


def train(cfg: LearnerConfig, env_cfg: EnvConfig, out_dir=None,
          progress=None) -> Agent:
    """Run the full training loop; returns the trained agent.

    When ``out_dir`` is given, writes ``metrics.csv`` (one row per episode),
    periodic ``checkpoint_ep*.npz`` files and a ``final.npz``.  Deterministic
    for a fixed (config, seed) pair.
    """
    env_cfg = replace(env_cfg, rs_flag=(cfg.variant == "sac-rs"))
    env = IntersectionEnv(env_cfg)
    rng = np.random.default_rng(cfg.seed)
    agent = Agent(cfg, env_cfg.m_sv, rng)
    buffer = ReplayBuffer(cfg.buffer, env_cfg.m_sv)

    out_path = Path(out_dir) if out_dir is not None else None
    metrics = None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        metrics = open(out_path / "metrics.csv", "w")
        metrics.write(METRICS_VERSION + "\n" + METRICS_COLUMNS + "\n")

    total_steps = 0
    try:
        for ep in range(cfg.episodes):
            lr_actor, lr_critic = cfg.lr_at(ep)
            obs = env.reset(seed=int(rng.integers(2**31)))
            corrections = 0
            done = False
            while not done:
                if total_steps < cfg.start_steps:
                    raw = rng.uniform([-AX_LIMIT, -STEER_LIMIT], [AX_LIMIT, STEER_LIMIT])
                else:
                    raw = agent.act(obs, rng)
                executed = raw
                if cfg.uses_safety:
                    result = agent.correct(obs, raw)
                    executed = result.action
                    corrections += int(result.corrected)
                res = env.step(clamp_action(tuple(executed)))
                terminal = res.done_reason in ("collision", "goal")
                buffer.add(obs, executed, res.reward, res.cost, res.obs, terminal)
                obs = res.obs
                done = res.done
                total_steps += 1
            report = env.finalize_episode()

            sums: dict[str, float] = {}
            n_upd = 0
            for _ in range(cfg.updates_per_episode):
                if len(buffer) < cfg.batch:
                    break
                batch = buffer.sample(rng, cfg.batch)
                c_losses = agent.critic_update(batch, lr_critic, rng)
                a_losses = agent.actor_lambda_update(batch, lr_actor, rng)
                alpha_loss = agent.temperature_update(batch, rng)
                agent.soft_update_targets()
                assert agent.lam >= 0.0 and agent.alpha > 0.0
                for k, v in {**c_losses, **a_losses, "alpha": alpha_loss}.items():
                    sums[k] = sums.get(k, 0.0) + v
                n_upd += 1
            avg = {k: v / n_upd for k, v in sums.items()} if n_upd else {}
            _nan_guard(avg, ep, agent, out_path)

            if metrics is not None:
                row = [
                    str(ep), str(report.steps), report.outcome,
                    _fmt(report.cumulative_reward),
                    _fmt(sum(h["cost"] for h in env.history)),
                    _fmt(report.mean_speed), _fmt(agent.lam), _fmt(agent.alpha),
                    _fmt(avg.get("actor", 0.0)), _fmt(avg.get("lambda_term", 0.0)),
                    _fmt(avg.get("q_r1", 0.0) + avg.get("q_r2", 0.0)),
                    _fmt(avg.get("q_c1", 0.0) + avg.get("q_c2", 0.0)),
                    _fmt(avg.get("alpha", 0.0)), str(corrections),
                ]
                metrics.write(",".join(row) + "\n")
            if progress is not None:
                progress(ep, report, agent)
            if out_path is not None and cfg.checkpoint_every > 0 \
                    and (ep + 1) % cfg.checkpoint_every == 0:
                save_checkpoint(out_path / f"checkpoint_ep{ep + 1}.npz", agent)
        if out_path is not None:
            save_checkpoint(out_path / "final.npz", agent)
    finally:
        if metrics is not None:
            metrics.close()
    return agent


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class EvalReport:
    episodes: int
    collision_rate: float
    success_rate: float
    frozen_rate: float
    mean_reward: float
    std_reward: float
    mean_speed: float
    std_speed: float

    def __post_init__(self):
        total = self.collision_rate + self.success_rate + self.frozen_rate
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"outcome rates sum to {total}, not 1")


def evaluate(agent: Agent, env_cfg: EnvConfig, episodes: int, seed: int,
             trace_path=None) -> EvalReport:
    """Deterministic-policy rollouts; returns aggregate outcome statistics."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    env_cfg = replace(env_cfg, rs_flag=(agent.cfg.variant == "sac-rs"))
    env = IntersectionEnv(env_cfg)
    rng = np.random.default_rng(seed)
    outcomes = {"collision": 0, "success": 0, "frozen": 0}
    rewards, speeds = [], []
    records = []
    for _ in range(episodes):
        obs = env.reset(seed=int(rng.integers(2**31)))
        done = False
        while not done:
            raw = agent.act(obs, deterministic=True)
            if agent.cfg.uses_safety:
                raw = agent.correct(obs, raw).action
            res = env.step(clamp_action(tuple(raw)))
            obs, done = res.obs, res.done
        report = env.finalize_episode()
        outcomes[report.outcome] += 1
        rewards.append(report.cumulative_reward)
        speeds.append(report.mean_speed)
        if trace_path is not None:
            records.extend(env.history)
    if trace_path is not None:
        cmdp_env.write_trace(trace_path, records)
    n = float(episodes)
    return EvalReport(
        episodes=episodes,
        collision_rate=outcomes["collision"] / n,
        success_rate=outcomes["success"] / n,
        frozen_rate=outcomes["frozen"] / n,
        mean_reward=float(np.mean(rewards)),
        std_reward=float(np.std(rewards)),
        mean_speed=float(np.mean(speeds)),
        std_speed=float(np.std(speeds)),
    )
