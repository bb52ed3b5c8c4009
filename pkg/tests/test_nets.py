"""Tests for the actor/critic networks and squashed-Gaussian sampling."""

import math

import numpy as np
import pytest

from riskdrive import autodiff as ad
from riskdrive import nets
from riskdrive.nets import (
    ACTION_HALF,
    LOG_STD_MAX,
    LOG_STD_MIN,
    MlpActor,
    MlpCritic,
    MmamActor,
    MmamCritic,
    NetConfig,
    policy_sample_graph,
    sample_action_np,
)

CFG = NetConfig(d=16, heads=4)


def random_obs(rng, batch=3, m=5, live=None):
    ego = rng.normal(size=(batch, nets.EGO_DIM)) * [1, 30, 30, 5, 1, 1, 0.3, 5, 40]
    ego[:, 0] = 1.0
    sv = rng.normal(size=(batch, m, nets.SV_DIM)) * [1, 20, 20, 5, 5, 1]
    mask = np.zeros((batch, m), dtype=bool)
    for b in range(batch):
        k = rng.integers(0, m + 1) if live is None else live
        mask[b, :k] = True
    sv[:, :, 0] = 1.0
    sv[~mask] = 0.0
    return ego, sv, mask


class TestNetConfig:
    def test_hidden_size_must_split_across_heads(self):
        with pytest.raises(ValueError, match="divisible"):
            NetConfig(d=10, heads=4).head_dim

    def test_attention_divisor_modes(self):
        assert NetConfig(d=16, heads=4).attn_divisor == pytest.approx(4.0)
        assert NetConfig(d=16, heads=4, attn_scale_per_head=True
                         ).attn_divisor == pytest.approx(2.0)


class TestShapes:
    def test_attention_actor_and_critic(self):
        rng = np.random.default_rng(0)
        ego, sv, mask = random_obs(rng)
        mean, log_std, _ = MmamActor(rng, CFG).forward(ego, sv, mask)
        assert mean.shape == (3, 2) and log_std.shape == (3, 2)
        q, _, _ = MmamCritic(rng, CFG).forward(ego, sv, mask, np.zeros((3, 2)))
        assert q.shape == (3, 1)

    def test_mlp_actor_and_critic(self):
        rng = np.random.default_rng(0)
        ego, sv, mask = random_obs(rng)
        mean, log_std, _ = MlpActor(rng, 5, CFG).forward(ego, sv, mask)
        assert mean.shape == (3, 2)
        q, _, _ = MlpCritic(rng, 5, CFG).forward(ego, sv, mask, np.zeros((3, 2)))
        assert q.shape == (3, 1)

    def test_single_sample_inputs_promoted(self):
        rng = np.random.default_rng(1)
        ego, sv, mask = random_obs(rng, batch=1)
        mean, _, _ = MmamActor(rng, CFG).forward(ego[0], sv[0], mask[0])
        assert mean.shape == (1, 2)

    def test_log_std_clamped(self):
        rng = np.random.default_rng(2)
        actor = MmamActor(rng, CFG)
        # blow up the head weights to force saturation
        actor.params["log_std.w"] *= 1e6
        ego, sv, mask = random_obs(rng)
        _, log_std, _ = actor.forward(ego, sv, mask)
        assert np.all(log_std.value >= LOG_STD_MIN)
        assert np.all(log_std.value <= LOG_STD_MAX)


class TestInvariance:
    def test_actor_invariant_to_sv_permutation_and_padding(self):
        rng = np.random.default_rng(3)
        actor = MmamActor(rng, CFG)
        ego, sv, mask = random_obs(rng, batch=2, m=5, live=3)
        base_mean, base_std, _ = actor.forward(ego, sv, mask)

        perm = np.array([2, 0, 1])
        sv_p = sv.copy()
        sv_p[:, :3] = sv[:, perm]
        mean, std, _ = actor.forward(ego, sv_p, mask)
        assert np.max(np.abs(mean.value - base_mean.value)) < 1e-12
        assert np.max(np.abs(std.value - base_std.value)) < 1e-12

        # extra pad rows with garbage content but mask off
        sv_w = np.concatenate([sv, rng.normal(size=(2, 2, nets.SV_DIM))], axis=1)
        mask_w = np.concatenate([mask, np.zeros((2, 2), bool)], axis=1)
        mean, std, _ = actor.forward(ego, sv_w, mask_w)
        assert np.max(np.abs(mean.value - base_mean.value)) < 1e-12

    def test_critic_invariant_to_sv_permutation(self):
        rng = np.random.default_rng(4)
        critic = MmamCritic(rng, CFG)
        ego, sv, mask = random_obs(rng, batch=2, m=4, live=4)
        a = rng.uniform(-1, 1, size=(2, 2))
        base, _, _ = critic.forward(ego, sv, mask, a)
        perm = rng.permutation(4)
        q, _, _ = critic.forward(ego, sv[:, perm], mask[:, perm], a)
        assert np.max(np.abs(q.value - base.value)) < 1e-12

    def test_mlp_is_deliberately_permutation_sensitive(self):
        rng = np.random.default_rng(5)
        actor = MlpActor(rng, 4, CFG)
        ego, sv, mask = random_obs(rng, batch=1, m=4, live=4)
        base, _, _ = actor.forward(ego, sv, mask)
        swapped = sv.copy()
        swapped[:, [0, 1]] = sv[:, [1, 0]]
        other, _, _ = actor.forward(ego, swapped, mask)
        assert np.max(np.abs(base.value - other.value)) > 1e-6


class TestBatching:
    def test_batched_forward_equals_per_sample(self):
        rng = np.random.default_rng(6)
        actor = MmamActor(rng, CFG)
        critic = MmamCritic(rng, CFG)
        ego, sv, mask = random_obs(rng, batch=4, m=5)
        a = rng.uniform(-1, 1, size=(4, 2))
        mean_b, std_b, _ = actor.forward(ego, sv, mask)
        q_b, _, _ = critic.forward(ego, sv, mask, a)
        for b in range(4):
            mean, std, _ = actor.forward(ego[b], sv[b], mask[b])
            assert np.allclose(mean.value, mean_b.value[b], atol=1e-12)
            assert np.allclose(std.value, std_b.value[b], atol=1e-12)
            q, _, _ = critic.forward(ego[b], sv[b], mask[b], a[b])
            assert np.allclose(q.value, q_b.value[b], atol=1e-12)


class TestGradients:
    def fd_check(self, params, key, build, rtol=1e-5):
        node, leaves = build(params)
        ad.backward(node)
        analytic = leaves[key].grad.copy()
        h = 1e-6
        numeric = np.zeros_like(params[key])
        it = np.nditer(params[key], flags=["multi_index"])
        while not it.finished:
            ij = it.multi_index
            orig = params[key][ij]
            params[key][ij] = orig + h
            up = float(build(params)[0].value[0, 0])
            params[key][ij] = orig - h
            dn = float(build(params)[0].value[0, 0])
            params[key][ij] = orig
            numeric[ij] = (up - dn) / (2 * h)
            it.iternext()
        # absolute floor absorbs central-difference roundoff (~1e-10) on
        # entries whose true gradient is itself near zero
        assert np.allclose(analytic, numeric, rtol=rtol, atol=1e-9)

    def test_actor_parameter_gradients(self):
        rng = np.random.default_rng(7)
        actor = MmamActor(rng, CFG)
        ego, sv, mask = random_obs(rng, batch=2, m=3, live=2)

        def build(params):
            mean, log_std, leaves = actor.forward(ego, sv, mask, params=params)
            return ad.sum_all(ad.add(mean, log_std)), leaves

        for key in ("ego_embed.w", "self_attn.h1.q", "ego_attn.h0.v", "mean.w"):
            self.fd_check(actor.params, key, build)

    def test_critic_parameter_and_action_gradients(self):
        rng = np.random.default_rng(8)
        critic = MmamCritic(rng, CFG)
        ego, sv, mask = random_obs(rng, batch=2, m=3, live=3)
        a = rng.uniform(-1, 1, size=(2, 2))

        def build(params):
            q, leaves, _ = critic.forward(ego, sv, mask, a, params=params)
            return ad.sum_all(q), leaves

        for key in ("act_embed.w", "ego_attn.h2.k", "mix_attn", "mlp1.b"):
            self.fd_check(critic.params, key, build)

        # gradient through the action input
        def through_action(node):
            q, _, _ = critic.forward(ego, sv, mask, node)
            return ad.sum_all(q)

        analytic = ad.grad_wrt_input(through_action, a)
        h = 1e-6
        for i in range(2):
            for j in range(2):
                ap, am = a.copy(), a.copy()
                ap[i, j] += h
                am[i, j] -= h
                num = (float(through_action(ad.leaf(ap)).value[0, 0])
                       - float(through_action(ad.leaf(am)).value[0, 0])) / (2 * h)
                assert abs(analytic[i, j] - num) / max(1e-8, abs(num)) < 1e-5


class TestSampling:
    def test_deterministic_sample_is_squashed_mean(self):
        mean = np.array([[0.3, -1.2]])
        log_std = np.array([[0.1, -0.5]])
        a, _ = sample_action_np(mean, log_std, deterministic=True)
        assert np.allclose(a, ACTION_HALF * np.tanh(mean))

    def test_samples_respect_action_bounds(self):
        rng = np.random.default_rng(9)
        mean = rng.normal(size=(500, 2)) * 3
        log_std = rng.uniform(-2, 2, size=(500, 2))
        a, _ = sample_action_np(mean, log_std, rng)
        assert np.all(np.abs(a) <= ACTION_HALF)

    def test_log_prob_matches_change_of_variables_oracle(self):
        # integrate the density over a grid of u and confirm it normalizes,
        # and spot-check against the analytic tanh-Gaussian formula
        rng = np.random.default_rng(10)
        mean = np.array([[0.2, -0.4]])
        log_std = np.array([[-0.3, 0.1]])
        a, lp = sample_action_np(mean, log_std, rng)
        u = np.arctanh(a / ACTION_HALF)
        std = np.exp(log_std)
        log_n = (-0.5 * ((u - mean) / std) ** 2 - log_std
                 - 0.5 * math.log(2 * math.pi))
        log_det = np.log(ACTION_HALF * (1 - np.tanh(u) ** 2))
        assert lp[0] == pytest.approx(float((log_n - log_det).sum()), rel=1e-9)

    def test_graph_sampler_agrees_with_numpy_sampler(self):
        rng = np.random.default_rng(11)
        mean = rng.normal(size=(4, 2))
        log_std = rng.uniform(-1, 0.5, size=(4, 2))
        eps = rng.standard_normal((4, 2))
        a_node, lp_node = policy_sample_graph(ad.leaf(mean), ad.leaf(log_std), eps)
        u = mean + np.exp(log_std) * eps
        a_np = ACTION_HALF * np.tanh(u)
        assert np.allclose(a_node.value, a_np, atol=1e-14)
        log_n = -0.5 * eps**2 - log_std - 0.5 * math.log(2 * math.pi)
        log_jac = 2 * (math.log(2) - u - np.logaddexp(0, -2 * u)) + np.log(ACTION_HALF)
        assert np.allclose(lp_node.value[:, 0], (log_n - log_jac).sum(axis=1),
                           atol=1e-12)

    def test_graph_sampler_gradients(self):
        rng = np.random.default_rng(12)
        mean = rng.normal(size=(2, 2))
        log_std = rng.uniform(-1, 0, size=(2, 2))
        eps = rng.standard_normal((2, 2))

        def through_mean(x):
            a, lp = policy_sample_graph(x, ad.constant(log_std), eps)
            return ad.add(ad.sum_all(a), ad.sum_all(lp))

        analytic = ad.grad_wrt_input(through_mean, mean)
        h = 1e-6
        for i in range(2):
            for j in range(2):
                mp, mm = mean.copy(), mean.copy()
                mp[i, j] += h
                mm[i, j] -= h
                num = (float(through_mean(ad.leaf(mp)).value[0, 0])
                       - float(through_mean(ad.leaf(mm)).value[0, 0])) / (2 * h)
                assert abs(analytic[i, j] - num) / max(1e-6, abs(num)) < 1e-5
