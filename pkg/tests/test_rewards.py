import numpy as np
import pytest

from subgoal_irl.errors import InputError, TrainingDivergedError
from subgoal_irl.mdp import FeatureMatrix
from subgoal_irl.rewards import (BN_EPS, ConvNetConfig, ConvRewardNet, LinearReward,
                                 apply_gradient_step, checkpoint_bytes,
                                 combined_reward, load_checkpoint, reward_backward,
                                 reward_forward, save_checkpoint,
                                 zero_failure_weights)


def small_configs():
    """Assorted small architectures covering both depths and the extra input."""
    return [
        ConvNetConfig(image_shape=(3, 4, 4), conv_channels=(2, 3), fc1_width=6),
        ConvNetConfig(image_shape=(3, 3, 3), conv_channels=(2, 2, 2), fc1_width=5),
        ConvNetConfig(image_shape=(2, 4, 5), conv_channels=(3, 2), fc1_width=4,
                      extra_dim=6),
    ]


def random_rows(rng, cfg, n=5):
    c, h, w = cfg.image_shape
    imgs = (rng.random((n, c * h * w)) < 0.2).astype(float)
    extra = np.zeros((n, cfg.extra_dim))
    if cfg.extra_dim:
        extra[np.arange(n), rng.integers(0, cfg.extra_dim, size=n)] = 1.0
    return np.concatenate([imgs, extra], axis=1)


def finite_difference_gradients(model, rows, upstream, eps=1e-4):
    """Central differences on L = sum_s upstream[s] * reward[s]."""
    grads = {}
    for name, arr in model.parameters():
        flat = arr.reshape(-1)
        g = np.zeros(flat.size)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(upstream @ model.forward(rows)[0])
            flat[i] = orig - eps
            lo = float(upstream @ model.forward(rows)[0])
            flat[i] = orig
            g[i] = (hi - lo) / (2.0 * eps)
        grads[name] = g.reshape(arr.shape)
    return grads


class TestLinearReward:
    def test_one_hot_rewards_are_theta(self):
        rng = np.random.default_rng(0)
        theta = rng.normal(size=6)
        model = LinearReward(6, theta)
        rewards, hidden = reward_forward(model, FeatureMatrix.one_hot(6))
        assert np.allclose(rewards, theta)
        assert np.array_equal(hidden, np.eye(6))

    def test_zero_weights_zero_rewards(self):
        model = LinearReward(4)
        rewards, _ = model.forward(np.random.default_rng(1).random((7, 4)))
        assert np.array_equal(rewards, np.zeros(7))

    def test_backward_one_hot_is_upstream(self):
        model = LinearReward(5)
        upstream = np.array([0.3, -1.0, 0.0, 2.0, -0.5])
        grads = reward_backward(model, FeatureMatrix.one_hot(5), upstream)
        assert np.array_equal(grads["theta"], upstream)

    def test_backward_zero_upstream(self):
        model = LinearReward(5)
        grads = model.backward(np.random.default_rng(2).random((5, 5)), np.zeros(5))
        assert np.array_equal(grads["theta"], np.zeros(5))


class TestCombinedReward:
    def test_zero_theta_f_equals_base(self):
        rng = np.random.default_rng(3)
        model = ConvRewardNet(small_configs()[0])
        feats = FeatureMatrix(random_rows(rng, model.cfg))
        base, _ = reward_forward(model, feats)
        assert np.array_equal(combined_reward(model, zero_failure_weights(model), feats),
                              base)
        assert np.array_equal(combined_reward(model, None, feats), base)

    def test_matches_naive_dot_product(self):
        rng = np.random.default_rng(4)
        model = ConvRewardNet(small_configs()[0], params=None)
        feats = FeatureMatrix(random_rows(rng, model.cfg))
        theta_f = rng.normal(size=model.hidden_dim)
        rewards, hidden = reward_forward(model, feats)
        naive = np.array([rewards[s] + float(np.dot(theta_f, hidden[s]))
                          for s in range(feats.num_states)])
        assert np.max(np.abs(combined_reward(model, theta_f, feats) - naive)) < 1e-9

    def test_linear_in_theta_f(self):
        rng = np.random.default_rng(5)
        model = ConvRewardNet(small_configs()[0])
        feats = FeatureMatrix(random_rows(rng, model.cfg))
        f1 = rng.normal(size=model.hidden_dim)
        f2 = rng.normal(size=model.hidden_dim)
        lhs = combined_reward(model, f1 + f2, feats) + combined_reward(
            model, np.zeros(model.hidden_dim), feats)
        rhs = combined_reward(model, f1, feats) + combined_reward(model, f2, feats)
        assert np.max(np.abs(lhs - rhs)) < 1e-9

    def test_wrong_length_rejected(self):
        model = LinearReward(4)
        with pytest.raises(InputError):
            combined_reward(model, np.zeros(3), FeatureMatrix.one_hot(4))


class TestConvForward:
    def test_matches_straight_line_implementation(self):
        # Oracle: an independently written nested-loop forward pass.
        rng = np.random.default_rng(6)
        cfg = ConvNetConfig(image_shape=(3, 4, 4), conv_channels=(2, 3),
                            fc1_width=5, seed=9)
        model = ConvRewardNet(cfg)
        rows = random_rows(rng, cfg, n=4)
        rewards, hidden = model.forward(rows)
        naive_r, naive_h = _naive_forward(model, rows)
        assert np.max(np.abs(rewards - naive_r)) < 1e-6
        assert np.max(np.abs(hidden - naive_h)) < 1e-6

    def test_eval_mode_is_bitwise_deterministic(self):
        rng = np.random.default_rng(7)
        model = ConvRewardNet(small_configs()[1])
        rows = random_rows(rng, model.cfg)
        r1, h1 = model.forward(rows)
        r2, h2 = model.forward(rows)
        assert np.array_equal(r1, r2) and np.array_equal(h1, h2)

    def test_update_stats_moves_running_statistics(self):
        rng = np.random.default_rng(8)
        model = ConvRewardNet(small_configs()[0])
        rows = random_rows(rng, model.cfg)
        before = model._params["bn0_mean"].copy()
        model.forward(rows, update_stats=True)
        assert not np.array_equal(before, model._params["bn0_mean"])

    def test_shape_mismatch_rejected(self):
        model = ConvRewardNet(small_configs()[0])
        with pytest.raises(InputError):
            model.forward(np.zeros((3, 11)))


class TestGradients:
    def test_zero_upstream_gives_zero_gradient(self):
        rng = np.random.default_rng(9)
        model = ConvRewardNet(small_configs()[0])
        rows = random_rows(rng, model.cfg)
        grads = model.backward(rows, np.zeros(rows.shape[0]))
        for name, _ in model.parameters():
            assert np.array_equal(grads[name], np.zeros_like(grads[name]))

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_finite_differences(self, seed):
        # the load-bearing check for the hand-rolled network: every parameter
        # gradient against central differences, eps = 1e-4
        model, rows, upstream = _kink_safe_configuration(seed)
        analytic = model.backward(rows, upstream)
        numeric = finite_difference_gradients(model, rows, upstream)
        for name, _ in model.parameters():
            a, f = analytic[name], numeric[name]
            denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-8)
            rel = np.max(np.abs(a - f) / denom)
            assert rel < 1e-3, f"{name}: max relative error {rel}"

    def test_linear_model_finite_differences(self):
        rng = np.random.default_rng(123)
        model = LinearReward(6, rng.normal(size=6))
        rows = rng.random((4, 6))
        upstream = rng.normal(size=4)
        analytic = model.backward(rows, upstream)
        numeric = finite_difference_gradients(model, rows, upstream)
        assert np.max(np.abs(analytic["theta"] - numeric["theta"])) < 1e-8


class TestGradientStep:
    def test_zero_gradient_no_change(self):
        model = LinearReward(3, np.array([1.0, 2.0, 3.0]))
        apply_gradient_step(model, {"theta": np.zeros(3)}, 0.5)
        assert np.array_equal(model.theta, [1.0, 2.0, 3.0])

    def test_zero_learning_rate_no_change(self):
        model = LinearReward(3, np.array([1.0, 2.0, 3.0]))
        apply_gradient_step(model, {"theta": np.ones(3)}, 0.0)
        assert np.array_equal(model.theta, [1.0, 2.0, 3.0])

    def test_two_steps_accumulate_linearly(self):
        model = LinearReward(3, np.zeros(3))
        g = {"theta": np.array([1.0, -2.0, 0.5])}
        apply_gradient_step(model, g, 0.1)
        apply_gradient_step(model, g, 0.1)
        assert np.allclose(model.theta, -0.2 * g["theta"])

    def test_nonfinite_gradient_raises(self):
        model = LinearReward(2)
        with pytest.raises(TrainingDivergedError):
            apply_gradient_step(model, {"theta": np.array([np.inf, 0.0])}, 0.1)


class TestCheckpoints:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(10)
        model = ConvRewardNet(small_configs()[2])
        model.forward(random_rows(rng, model.cfg), update_stats=True)
        theta_f = rng.normal(size=model.hidden_dim)
        path = tmp_path / "model.ck"
        save_checkpoint(path, model, theta_f)
        loaded, loaded_tf = load_checkpoint(path)
        assert np.array_equal(theta_f, loaded_tf)
        assert checkpoint_bytes(model, theta_f) == checkpoint_bytes(loaded, loaded_tf)
        for (n1, a1), (n2, a2) in zip(model.state_arrays(), loaded.state_arrays()):
            assert n1 == n2 and np.array_equal(a1, a2)

    def test_linear_round_trip(self, tmp_path):
        model = LinearReward(5, np.arange(5.0))
        path = tmp_path / "lin.ck"
        save_checkpoint(path, model)
        loaded, tf = load_checkpoint(path)
        assert tf is None
        assert np.array_equal(loaded.theta, model.theta)

    def test_checkpoint_bytes_deterministic(self):
        model = LinearReward(4, np.array([0.5, -1.0, 2.0, 0.0]))
        assert checkpoint_bytes(model) == checkpoint_bytes(model)


def _kink_safe_configuration(seed, margin=2e-3, repairs=80):
    """Random model/inputs with every rectifier input bounded away from zero.

    Central differences are not a derivative estimate within eps of a ReLU
    kink, so the evaluation point must keep every pre-activation clear of
    zero by more than any single eps = 1e-4 parameter nudge can move it.
    Offending channels get their shift parameter nudged deterministically
    until the point is clean; the gradient oracle itself stays untouched.
    """
    base = small_configs()[seed % 3]
    rng = np.random.default_rng(seed)
    cfg = ConvNetConfig(image_shape=base.image_shape,
                        conv_channels=base.conv_channels,
                        fc1_width=base.fc1_width, extra_dim=base.extra_dim,
                        seed=100 + seed)
    model = ConvRewardNet(cfg)
    # one stats-updating sweep first, as any fit would have done
    model.forward(random_rows(rng, cfg, n=6), update_stats=True)
    rows = random_rows(rng, cfg, n=5)
    upstream = rng.normal(size=5)
    for _ in range(repairs):
        _, _, cache = model._forward(rows, update_stats=False, need_cache=True)
        clean = True
        for i in range(len(cfg.conv_channels)):
            y = cache[i][3]
            near = np.any(np.abs(y) <= margin, axis=(0, 2, 3))
            for c in np.nonzero(near)[0]:
                model._params[f"bn{i}_beta"][c] += rng.uniform(2, 4) * margin \
                    * rng.choice([-1.0, 1.0])
                clean = False
        hidden = cache[-1][1]
        near = np.any(np.abs(hidden) <= margin, axis=0)
        for j in np.nonzero(near)[0]:
            model._params["fc1_b"][j] += rng.uniform(2, 4) * margin \
                * rng.choice([-1.0, 1.0])
            clean = False
        if clean:
            return model, rows, upstream
    raise AssertionError(f"no kink-safe configuration found for seed {seed}")


def _naive_forward(model, rows):
    """Straight-line forward pass: explicit loops, no im2col, no batching."""
    cfg = model.cfg
    sd = dict(model.state_arrays())
    c, h, w = cfg.image_shape
    n = rows.shape[0]
    rewards = np.empty(n)
    hiddens = np.empty((n, cfg.fc1_width))
    for idx in range(n):
        x = rows[idx, :c * h * w].reshape(c, h, w)
        extra = rows[idx, c * h * w:]
        for i, out_ch in enumerate(cfg.conv_channels):
            wgt = sd[f"conv{i}_w"]
            out = np.zeros((out_ch, h, w))
            for o in range(out_ch):
                for yy in range(h):
                    for xx in range(w):
                        acc = 0.0
                        for ci in range(x.shape[0]):
                            for ky in range(3):
                                for kx in range(3):
                                    iy, ix = yy + ky - 1, xx + kx - 1
                                    if 0 <= iy < h and 0 <= ix < w:
                                        acc += wgt[o, ci, ky, kx] * x[ci, iy, ix]
                        out[o, yy, xx] = acc
            gamma, beta = sd[f"bn{i}_gamma"], sd[f"bn{i}_beta"]
            mu, var = sd[f"bn{i}_mean"], sd[f"bn{i}_var"]
            for o in range(out_ch):
                out[o] = gamma[o] * (out[o] - mu[o]) / np.sqrt(var[o] + BN_EPS) + beta[o]
            x = np.maximum(out, 0.0)
        z = np.concatenate([x.reshape(-1), extra])
        hidden = np.empty(cfg.fc1_width)
        for j in range(cfg.fc1_width):
            hidden[j] = float(np.dot(sd["fc1_w"][j], z)) + sd["fc1_b"][j]
        h_act = np.maximum(hidden, 0.0)
        rewards[idx] = float(np.dot(sd["fc2_w"], h_act)) + sd["fc2_b"][0]
        hiddens[idx] = hidden
    return rewards, hiddens
