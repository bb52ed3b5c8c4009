"""Flat dotted-key configuration.

Grammar: one ``section.key = value`` pair per line; blank lines and ``#``
comments are ignored.  Values are typed by their defaults (bool accepts
true/false, ``run.seeds`` is a comma-separated integer list).  Unknown keys
are rejected with the offending key named.  Precedence when assembling a
run: command-line overrides > config file > preset > defaults.
"""

from __future__ import annotations

from pathlib import Path

from .cmdp_env import CostConfig, EnvConfig
from .learner import VARIANTS, LearnerConfig
from .nets import NetConfig
from .safety import CorrectionConfig

TASKS = {"lt": "LT", "gs": "GS", "rt": "RT"}

DEFAULTS: dict[str, object] = {
    "run.name": "run",
    "run.out_dir": "runs",
    "run.seeds": [0],
    "env.task": "gs",
    "env.policy_hz": 5,
    "env.n_sv": 10,
    "env.m_sv": 12,
    "env.arrival_radius": 2.0,
    "env.time_limit": 25.0,
    "env.speed_min": 6.0,
    "env.speed_max": 10.0,
    "env.min_gap": 15.0,
    "env.d_des_scale": 100.0,
    "cost.horizon": 2.0,
    "cost.dt": 0.2,
    "cost.c_init": 1.0,
    "cost.v_base": 9.0,
    "cost.w": 1.0,
    "cost.beta_min": 1.2,
    "cost.beta_max": 1.5,
    "learner.variant": "arsac",
    "learner.episodes": 10_000,
    "learner.seed": 0,
    "learner.batch": 256,
    "learner.buffer": 100_000,
    "learner.gamma": 0.99,
    "learner.tau": 0.005,
    "learner.lr_actor": 3e-4,
    "learner.lr_actor_end": 1e-5,
    "learner.lr_critic": 3e-3,
    "learner.lr_critic_end": 1e-4,
    "learner.lr_alpha": 3e-4,
    "learner.lr_lambda": 1e-4,
    "learner.lambda0": 1.0,
    "learner.d_thres": 0.05,
    "learner.target_entropy": -2.0,
    "learner.updates_per_episode": 50,
    "learner.start_steps": 500,
    "learner.checkpoint_every": 500,
    "net.hidden": 256,
    "net.heads": 4,
    "net.attn_scale_per_head": False,
    "safety.n_iter": 50,
    "safety.eta": 0.02,
    "safety.d_thres": 0.05,
    "safety.lam": 10.0,
    "eval.episodes": 500,
    "eval.policy_hz": 10,
}

# reduced preset sized for hours-scale CPU runs
PRESETS: dict[str, dict[str, object]] = {
    "desk": {
        "env.n_sv": 4,
        "env.m_sv": 6,
        "learner.episodes": 1500,
        "learner.batch": 64,
        "learner.updates_per_episode": 10,
        "net.hidden": 32,
        "eval.episodes": 100,
    },
}


class ConfigError(ValueError):
    pass


def _parse_value(key: str, raw: str) -> object:
    default = DEFAULTS[key]
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false"):
                raise ValueError("expected true/false")
            return raw.lower() == "true"
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, list):
            return [int(x) for x in raw.split(",") if x.strip()]
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None


def _check_key(key: str) -> None:
    if key not in DEFAULTS:
        raise ConfigError(f"unknown config key {key!r}")


def parse_file(path) -> dict[str, object]:
    out: dict[str, object] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        _check_key(key)
        out[key] = _parse_value(key, raw)
    return out


def load(path=None, preset: str | None = None,
         overrides: dict[str, str] | None = None) -> dict[str, object]:
    """Assemble a full config dict: overrides > file > preset > defaults."""
    cfg = dict(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        cfg.update(PRESETS[preset])
    if path is not None:
        cfg.update(parse_file(path))
    for key, raw in (overrides or {}).items():
        _check_key(key)
        cfg[key] = _parse_value(key, raw) if isinstance(raw, str) else raw
    _validate(cfg)
    return cfg


def _validate(cfg: dict[str, object]) -> None:
    if cfg["env.task"] not in TASKS:
        raise ConfigError(f"env.task must be one of {sorted(TASKS)}, got {cfg['env.task']!r}")
    if cfg["learner.variant"] not in VARIANTS:
        raise ConfigError(f"learner.variant must be one of {VARIANTS}")
    if not cfg["run.seeds"]:
        raise ConfigError("run.seeds must list at least one seed")
    if cfg["eval.episodes"] < 1:
        raise ConfigError("eval.episodes must be >= 1")


def env_config(cfg: dict[str, object], policy_hz: int | None = None) -> EnvConfig:
    return EnvConfig(
        task=TASKS[cfg["env.task"]],
        policy_hz=policy_hz if policy_hz is not None else cfg["env.policy_hz"],
        n_sv=cfg["env.n_sv"],
        m_sv=cfg["env.m_sv"],
        arrival_radius=cfg["env.arrival_radius"],
        time_limit=cfg["env.time_limit"],
        speed_min=cfg["env.speed_min"],
        speed_max=cfg["env.speed_max"],
        min_gap=cfg["env.min_gap"],
        d_des_scale=cfg["env.d_des_scale"],
        cost=CostConfig(
            horizon=cfg["cost.horizon"],
            dt=cfg["cost.dt"],
            c_init=cfg["cost.c_init"],
            v_base=cfg["cost.v_base"],
            w=cfg["cost.w"],
            beta_min=cfg["cost.beta_min"],
            beta_max=cfg["cost.beta_max"],
        ),
    )


def learner_config(cfg: dict[str, object], seed: int | None = None) -> LearnerConfig:
    return LearnerConfig(
        variant=cfg["learner.variant"],
        episodes=cfg["learner.episodes"],
        seed=seed if seed is not None else cfg["learner.seed"],
        batch=cfg["learner.batch"],
        buffer=cfg["learner.buffer"],
        gamma=cfg["learner.gamma"],
        tau=cfg["learner.tau"],
        lr_actor=cfg["learner.lr_actor"],
        lr_actor_end=cfg["learner.lr_actor_end"],
        lr_critic=cfg["learner.lr_critic"],
        lr_critic_end=cfg["learner.lr_critic_end"],
        lr_alpha=cfg["learner.lr_alpha"],
        lr_lambda=cfg["learner.lr_lambda"],
        lambda0=cfg["learner.lambda0"],
        d_thres=cfg["learner.d_thres"],
        target_entropy=cfg["learner.target_entropy"],
        updates_per_episode=cfg["learner.updates_per_episode"],
        start_steps=cfg["learner.start_steps"],
        checkpoint_every=cfg["learner.checkpoint_every"],
        correction=CorrectionConfig(
            n_iter=cfg["safety.n_iter"],
            eta=cfg["safety.eta"],
            d_thres=cfg["safety.d_thres"],
            lam=cfg["safety.lam"],
        ),
        net=NetConfig(
            d=cfg["net.hidden"],
            heads=cfg["net.heads"],
            attn_scale_per_head=cfg["net.attn_scale_per_head"],
        ),
    )
