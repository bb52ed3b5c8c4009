"""Command-line entry points: train, eval, plot, selftest.

Exit codes: 0 success, 1 configuration error, 2 runtime error, 3 selftest
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import config as cfgmod
from . import cmdp_env, geom, learner, nets, safety
from .config import ConfigError

TASK_NAMES = {v: k for k, v in cfgmod.TASKS.items()}


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="path to a key = value config file")
    sub.add_argument("--preset", choices=sorted(cfgmod.PRESETS), help="scaled preset")
    sub.add_argument("--set", dest="sets", action="append", default=[],
                     metavar="KEY=VALUE", help="override any config key")
    sub.add_argument("--variant", choices=learner.VARIANTS)
    sub.add_argument("--task", choices=sorted(cfgmod.TASKS))
    sub.add_argument("--episodes", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--out", help="output directory")


def _gather_overrides(args) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for item in args.sets:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if args.variant is not None:
        overrides["learner.variant"] = args.variant
    if args.task is not None:
        overrides["env.task"] = args.task
    if args.episodes is not None:
        overrides[
            "eval.episodes" if args.command == "eval" else "learner.episodes"
        ] = str(args.episodes)
    if args.seed is not None:
        overrides["run.seeds"] = str(args.seed)
        overrides["learner.seed"] = str(args.seed)
    return overrides


def _load(args) -> dict[str, object]:
    return cfgmod.load(path=args.config, preset=args.preset,
                       overrides=_gather_overrides(args))


# ---------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    cfg = _load(args)
    base = Path(args.out) if args.out else Path(cfg["run.out_dir"]) / cfg["run.name"]
    for seed in cfg["run.seeds"]:
        out_dir = base / f"seed{seed}"
        lcfg = cfgmod.learner_config(cfg, seed=seed)
        ecfg = cfgmod.env_config(cfg)
        print(f"training {lcfg.variant} on {cfg['env.task']} seed {seed} "
              f"({lcfg.episodes} episodes) -> {out_dir}")
        learner.train(lcfg, ecfg, out_dir=out_dir)
        print(f"done: {out_dir / 'metrics.csv'}")
    return 0


# ---------------------------------------------------------------------------
# eval


def _checkpoint_variant(path) -> str:
    with np.load(path, allow_pickle=False) as data:
        if "meta.variant" not in data.files:
            raise ValueError(f"{path} is not an agent checkpoint")
        return str(data["meta.variant"])


def cmd_eval(args) -> int:
    cfg = _load(args)
    variant = _checkpoint_variant(args.checkpoint)
    lcfg = cfgmod.learner_config({**cfg, "learner.variant": variant},
                                 seed=cfg["run.seeds"][0])
    ecfg = cfgmod.env_config(cfg, policy_hz=cfg["eval.policy_hz"])
    agent = learner.Agent(lcfg, ecfg.m_sv, np.random.default_rng(0))
    learner.load_checkpoint(args.checkpoint, agent)

    out_dir = Path(args.out) if args.out else Path(cfg["run.out_dir"]) / "eval"
    out_dir.mkdir(parents=True, exist_ok=True)
    report = learner.evaluate(agent, ecfg, cfg["eval.episodes"], cfg["run.seeds"][0],
                              trace_path=out_dir / "traces.jsonl")
    payload = {
        "task": cfg["env.task"],
        "variant": variant,
        "episodes": report.episodes,
        "CR": report.collision_rate,
        "SR": report.success_rate,
        "FR": report.frozen_rate,
        "AER_mean": report.mean_reward,
        "AER_std": report.std_reward,
        "AEV_mean": report.mean_speed,
        "AEV_std": report.std_speed,
    }
    (out_dir / "report.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(f"{variant} / {cfg['env.task']}: "
          f"CR {100 * report.collision_rate:.1f}%  SR {100 * report.success_rate:.1f}%  "
          f"FR {100 * report.frozen_rate:.1f}%  "
          f"AER {report.mean_reward:.1f}±{report.std_reward:.1f}  "
          f"AEV {report.mean_speed:.2f}±{report.std_speed:.2f} m/s")
    return 0


# ---------------------------------------------------------------------------
# plot


def _moving_average(x: np.ndarray, window: int) -> np.ndarray:
    if len(x) < window:
        window = max(1, len(x))
    kernel = np.ones(window) / window
    return np.convolve(x, kernel, mode="valid")


def cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not args.metrics and not args.traces:
        raise ValueError("plot needs at least one --metrics or --traces file")
    out_dir = Path(args.out or "plots")
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.metrics:
        series = []
        for path in args.metrics:
            rows = Path(path).read_text().splitlines()
            if not rows or rows[0] != learner.METRICS_VERSION:
                raise ValueError(f"{path}: unknown metrics version")
            rewards = [float(r.split(",")[3]) for r in rows[2:]]
            series.append(_moving_average(np.array(rewards), args.window))
        n = min(len(s) for s in series)
        stack = np.stack([s[:n] for s in series])
        mean = stack.mean(axis=0)
        half = 1.96 * stack.std(axis=0) / np.sqrt(stack.shape[0])
        episodes = np.arange(n)
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(episodes, mean, label="mean episode reward")
        ax.fill_between(episodes, mean - half, mean + half, alpha=0.3,
                        label="95% confidence interval")
        ax.set_xlabel("episode")
        ax.set_ylabel(f"reward (window {args.window})")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out_dir / "training_curves.svg")
        plt.close(fig)
        with open(out_dir / "training_curves.csv", "w") as fh:
            fh.write("episode,mean,ci_lo,ci_hi\n")
            for i in range(n):
                fh.write(f"{i},{mean[i]!r},{(mean[i] - half[i])!r},{(mean[i] + half[i])!r}\n")
        print(f"wrote {out_dir / 'training_curves.svg'}")

    if args.traces:
        records = []
        for path in args.traces:
            records.extend(cmdp_env.read_trace(path))
        if not records:
            raise ValueError("trace files contain no records")
        # first episode only: trajectory overhead view + speed curve
        end = next((i + 1 for i, r in enumerate(records) if r["done_reason"] != "none"),
                   len(records))
        episode = records[:end]
        ts = [r["t"] for r in episode]
        xs = [r["ego"][0] for r in episode]
        ys = [r["ego"][1] for r in episode]
        vs = [r["ego"][2] for r in episode]

        fig, ax = plt.subplots(figsize=(6, 6))
        ax.plot(xs, ys, "-", lw=2, label="ego")
        stride = max(1, len(episode) // 8)
        for rec in episode[::stride]:
            for uid, x, y, vx, heading in rec["svs"]:
                rect = geom.OrientedRect(geom.Pose2D(x, y, heading), 5.0, 2.0)
                poly = geom.corners(rect)
                ax.fill(poly[:, 0], poly[:, 1], alpha=0.15, color="tab:red")
        ax.set_aspect("equal")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out_dir / "trajectory.svg")
        plt.close(fig)
        with open(out_dir / "trajectory.csv", "w") as fh:
            fh.write("t,x,y\n")
            for t, x, y in zip(ts, xs, ys):
                fh.write(f"{t!r},{x!r},{y!r}\n")

        fig, ax = plt.subplots(figsize=(7, 3.5))
        ax.plot(ts, vs)
        ax.set_xlabel("t [s]")
        ax.set_ylabel("ego speed [m/s]")
        fig.tight_layout()
        fig.savefig(out_dir / "speed.svg")
        plt.close(fig)
        with open(out_dir / "speed.csv", "w") as fh:
            fh.write("t,vx\n")
            for t, v in zip(ts, vs):
                fh.write(f"{t!r},{v!r}\n")
        print(f"wrote {out_dir / 'trajectory.svg'} and {out_dir / 'speed.svg'}")
    return 0


# ---------------------------------------------------------------------------
# selftest


def _selftest_gradients(rng) -> bool:
    cfg = nets.NetConfig(d=16, heads=4)
    actor = nets.MmamActor(rng, cfg)
    critic = nets.MmamCritic(rng, cfg)
    ego = rng.normal(size=(2, nets.EGO_DIM)) * 5
    sv = rng.normal(size=(2, 3, nets.SV_DIM)) * 5
    mask = np.array([[True, True, False], [True, False, False]])
    sv[~mask] = 0.0
    act = rng.uniform(-1, 1, size=(2, 2)) * nets.ACTION_HALF
    eps = rng.standard_normal((2, 2))

    def critic_loss(params):
        q, leaves, _ = critic.forward(ego, sv, mask, act, params=params)
        loss = ad.sum_all(q)
        ad.backward(loss)
        return float(loss.value[0, 0]), leaves

    def actor_loss(params):
        mean, log_std, leaves = actor.forward(ego, sv, mask, params=params)
        a, logp = nets.policy_sample_graph(mean, log_std, eps)
        loss = ad.add(ad.sum_all(a), ad.scale(ad.sum_all(logp), 2.0))
        ad.backward(loss)
        return float(loss.value[0, 0]), leaves

    for net, loss_fn in ((critic, critic_loss), (actor, actor_loss)):
        _, leaves = loss_fn(net.params)
        names = sorted(net.params)
        for _ in range(40):
            name = names[rng.integers(len(names))]
            ij = tuple(int(rng.integers(0, s)) for s in net.params[name].shape)
            g = leaves[name].grad[ij]
            h = 1e-6
            pp = {k: v.copy() for k, v in net.params.items()}
            pp[name][ij] += h
            up, _ = loss_fn(pp)
            pp[name][ij] -= 2 * h
            dn, _ = loss_fn(pp)
            fd = (up - dn) / (2 * h)
            if abs(fd - g) / max(1e-8, abs(fd), abs(g)) > 1e-5:
                return False
    return True


def _selftest_permutation(rng) -> bool:
    cfg = nets.NetConfig(d=16, heads=4)
    actor = nets.MmamActor(rng, cfg)
    critic = nets.MmamCritic(rng, cfg)
    for _ in range(20):
        m = int(rng.integers(2, 6))
        ego = rng.normal(size=(1, nets.EGO_DIM)) * 10
        sv = rng.normal(size=(1, m, nets.SV_DIM)) * 10
        mask = rng.random((1, m)) < 0.7
        sv[~mask] = 0.0
        act = rng.uniform(-1, 1, size=(1, 2)) * nets.ACTION_HALF
        mean, log_std, _ = actor.forward(ego, sv, mask)
        q, _, _ = critic.forward(ego, sv, mask, act)
        for _ in range(5):
            perm = rng.permutation(m)
            pad = int(rng.integers(0, 4))
            sv_p = np.concatenate([sv[:, perm], np.zeros((1, pad, nets.SV_DIM))], axis=1)
            mask_p = np.concatenate([mask[:, perm], np.zeros((1, pad), bool)], axis=1)
            mean_p, log_std_p, _ = actor.forward(ego, sv_p, mask_p)
            q_p, _, _ = critic.forward(ego, sv_p, mask_p, act)
            if (np.abs(mean.value - mean_p.value).max() >= 1e-12
                    or np.abs(log_std.value - log_std_p.value).max() >= 1e-12
                    or np.abs(q.value - q_p.value).max() >= 1e-12):
                return False
    return True


def grid_overlap_oracle(a: np.ndarray, b: np.ndarray, step: float = 0.01) -> bool:
    """Point-sampling overlap test: grid of the AABB intersection + corners."""

    def inside(points, poly):
        normals = np.stack([-(np.roll(poly, -1, axis=0) - poly)[:, 1],
                            (np.roll(poly, -1, axis=0) - poly)[:, 0]], axis=1)
        offs = (normals * poly).sum(axis=1)
        return np.all(points @ normals.T >= offs - 1e-12, axis=1)

    lo = np.maximum(a.min(axis=0), b.min(axis=0))
    hi = np.minimum(a.max(axis=0), b.max(axis=0))
    if np.any(lo > hi):
        return False
    xs = np.arange(lo[0], hi[0] + step, step)
    ys = np.arange(lo[1], hi[1] + step, step)
    if len(xs) * len(ys) > 0:
        gx, gy = np.meshgrid(xs, ys)
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        hits = inside(pts, a) & inside(pts, b)
        if hits.any():
            return True
    corners = np.vstack([a, b])
    return bool(np.any(inside(corners, a) & inside(corners, b)))


def sat_margin(a: np.ndarray, b: np.ndarray) -> float:
    """Signed gap: positive = separation lower bound, negative = penetration."""
    gaps = []
    overlaps = []
    for axes_src in (a, b):
        edges = np.roll(axes_src, -1, axis=0) - axes_src
        normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
        normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
        pa = a @ normals.T
        pb = b @ normals.T
        gap = np.maximum(pb.min(axis=0) - pa.max(axis=0), pa.min(axis=0) - pb.max(axis=0))
        gaps.append(gap.max())
        overlaps.append((-gap).min())
    best_gap = max(gaps)
    if best_gap > 0:
        return best_gap
    return -min(overlaps)


def _random_rect(rng) -> np.ndarray:
    width = rng.uniform(0.5, 3.0)
    rect = geom.OrientedRect(
        geom.Pose2D(rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-np.pi, np.pi)),
        width + rng.uniform(0.0, 4.0), width)
    return geom.corners(rect)


def _selftest_sat(rng, n_pairs: int = 500) -> bool:
    for _ in range(n_pairs):
        a, b = _random_rect(rng), _random_rect(rng)
        if abs(sat_margin(a, b)) <= 0.02:
            continue
        if geom.sat_intersects(a, b) != grid_overlap_oracle(a, b):
            return False
    return True


def _selftest_projection(rng, n_starts: int = 200) -> bool:
    cfg = safety.CorrectionConfig(eta=0.004)
    hits = 0
    for _ in range(n_starts):
        target = rng.uniform([-3, -0.3], [3, 0.3])
        r_safe = np.sqrt(cfg.d_thres)

        def risk_fn(node, target=target):
            d = ad.add(node, ad.constant(-target.reshape(1, 2)))
            return ad.sum_all(ad.square(d))

        theta = rng.uniform(0, 2 * np.pi)
        start = target + (r_safe + rng.uniform(0.05, 0.15)) * np.array(
            [np.cos(theta), np.sin(theta)])
        start = np.clip(start, [-5, -0.6], [5, 0.6])
        res = safety.correct(risk_fn, start, cfg)
        if res.iterations > cfg.n_iter or np.any(np.abs(res.action) > [5, 0.6]):
            return False
        d0 = start - target
        oracle = target + d0 / np.linalg.norm(d0) * min(r_safe, np.linalg.norm(d0))
        if np.linalg.norm(res.action - oracle) <= 1e-2:
            hits += 1
    return hits >= 0.95 * n_starts


def cmd_selftest(args) -> int:
    rng = np.random.default_rng(2024)
    suites = [
        ("finite-difference gradients", _selftest_gradients),
        ("permutation/padding invariance", _selftest_permutation),
        ("rectangle-overlap oracle", _selftest_sat),
        ("projection oracle", _selftest_projection),
    ]
    failed = False
    for name, fn in suites:
        ok = fn(rng)
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failed |= not ok
    return 3 if failed else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskdrive",
        description="risk-aware actor-critic driving stack",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_train = subs.add_parser("train", help="run the training loop")
    _add_common(p_train)
    p_train.set_defaults(fn=cmd_train)

    p_eval = subs.add_parser("eval", help="evaluate a checkpoint")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.set_defaults(fn=cmd_eval)

    p_plot = subs.add_parser("plot", help="render traces and training curves")
    p_plot.add_argument("--metrics", nargs="*", default=[])
    p_plot.add_argument("--traces", nargs="*", default=[])
    p_plot.add_argument("--window", type=int, default=50)
    p_plot.add_argument("--out")
    p_plot.set_defaults(fn=cmd_plot)

    p_self = subs.add_parser("selftest", help="run the built-in check suites")
    p_self.set_defaults(fn=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - single CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
