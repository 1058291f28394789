import numpy as np
import pytest

from subgoal_irl.environments import build_gridworld
from subgoal_irl.errors import InputError, TrainingDivergedError
from subgoal_irl.mdp import (DemoSet, FeatureMatrix, TabularMdp, Trajectory,
                             min_steps_to_goal, shortest_path, soft_value_iteration)
from subgoal_irl.rewards import (ConvNetConfig, ConvRewardNet, LinearReward,
                                 checkpoint_bytes)
from subgoal_irl.training import (IrlffConfig, MaxEntConfig, anneal_lambda,
                                  irlff_fit, maxent_irl_fit)


def single_state_mdp():
    return TabularMdp.from_dense(np.ones((1, 2, 1)), discount=0.9)


def dijkstra_demos(mdp, starts, goal):
    return DemoSet.from_trajectories(
        [shortest_path(mdp, s, goal) for s in starts], mdp.num_states)


class TestAnnealLambda:
    def test_at_floor_unchanged(self):
        assert anneal_lambda(0.5, 0.9, 0.5) == 0.5

    def test_direct_formula(self):
        assert anneal_lambda(1.0, 0.9, 0.5) == 0.9

    def test_repeated_application_converges(self):
        # iterate-and-check: non-increasing, bounded below by alpha * floor
        lam = 10.0
        prev = lam
        for _ in range(1000):
            lam = anneal_lambda(lam, 0.97, 1.0)
            assert lam <= prev
            assert lam >= 0.97 * 1.0
            prev = lam
        assert lam <= 1.0 or np.isclose(lam, 1.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(InputError):
            anneal_lambda(-1.0, 0.9, 0.5)


class TestMaxEntFit:
    def test_fixed_point_leaves_parameters_unchanged(self):
        # demo visitation equals policy visitation exactly on a 1-state MDP,
        # so one fitting round is a no-op
        mdp = single_state_mdp()
        horizon = 6
        demos = DemoSet.from_trajectories(
            [Trajectory.from_states([0] * horizon)], num_states=1)
        model = LinearReward(1, np.array([0.7]))
        cfg = MaxEntConfig(learning_rate=0.5, iterations=3, horizon=horizon)
        result = maxent_irl_fit(mdp, FeatureMatrix.one_hot(1), demos, model, cfg)
        assert abs(result.model.theta[0] - 0.7) < 1e-10
        assert result.history[-1].residual_inf < 1e-8

    def test_small_grid_learns_goal_directed_greedy_policy(self):
        env, mdp, _ = build_gridworld(3, 3, [], (2, 2))
        feats = FeatureMatrix.one_hot(env.num_states)
        demos = dijkstra_demos(mdp, [env.state_of[(0, 0)], env.state_of[(0, 2)]],
                               env.goal_state)
        model = LinearReward(env.num_states)
        cfg = MaxEntConfig(learning_rate=0.05, iterations=150, horizon=12)
        result = maxent_irl_fit(mdp, feats, demos, model, cfg)
        reward = result.model.forward(feats.features)[0]
        policy = soft_value_iteration(mdp, reward, 12)
        dist = min_steps_to_goal(mdp, env.goal_state)
        for s in range(env.num_states):
            cur = s
            for _ in range(int(dist[s])):  # goal is absorbing: arriving early stays
                cur = mdp.deterministic_successor(cur, int(np.argmax(policy.probs[cur])))
            assert cur == env.goal_state

    def test_residual_decreases(self):
        env, mdp, _ = build_gridworld(4, 4, [(1, 1)], (3, 3))
        feats = FeatureMatrix.one_hot(env.num_states)
        demos = dijkstra_demos(mdp, [env.state_of[(0, 0)]], env.goal_state)
        model = LinearReward(env.num_states)
        cfg = MaxEntConfig(learning_rate=0.05, iterations=80, horizon=16)
        result = maxent_irl_fit(mdp, feats, demos, model, cfg)
        assert result.history[-1].residual_inf < result.history[0].residual_inf

    def test_empty_demos_rejected(self):
        mdp = single_state_mdp()
        with pytest.raises(InputError):
            maxent_irl_fit(mdp, FeatureMatrix.one_hot(1), DemoSet.empty(1),
                           LinearReward(1), MaxEntConfig())

    def test_divergence_carries_iteration_index(self):
        mdp = single_state_mdp()
        demos = DemoSet.from_trajectories([Trajectory.from_states([0, 0])],
                                          num_states=1)
        model = LinearReward(1, np.array([1e308]))
        cfg = MaxEntConfig(learning_rate=1e308, iterations=10, horizon=3)
        with pytest.raises(TrainingDivergedError) as err:
            maxent_irl_fit(mdp, FeatureMatrix.one_hot(1), demos, model, cfg)
        assert err.value.iteration >= 1

    def test_training_log_format(self, tmp_path):
        mdp = single_state_mdp()
        demos = DemoSet.from_trajectories([Trajectory.from_states([0, 0])],
                                          num_states=1)
        cfg = MaxEntConfig(iterations=4, horizon=2)
        result = maxent_irl_fit(mdp, FeatureMatrix.one_hot(1), demos,
                                LinearReward(1), cfg)
        log = tmp_path / "train.log"
        result.write_log(log)
        lines = log.read_text().strip().split("\n")
        assert lines[0] == "iteration,residual_inf,theta_f_norm,lambda,wall_clock"
        assert len(lines) == 5
        assert lines[1].startswith("1,")


class TestIrlffFit:
    def _grid(self):
        env, mdp, _ = build_gridworld(4, 4, [], (3, 3))
        return env, mdp, FeatureMatrix.one_hot(env.num_states)

    def test_empty_failures_reduces_to_maxent_bitwise(self):
        env, mdp, feats = self._grid()
        demos = dijkstra_demos(mdp, [env.state_of[(0, 0)]], env.goal_state)
        cfg = IrlffConfig(alpha=0.05, iterations=40, horizon=14)
        m1 = LinearReward(env.num_states)
        r1 = maxent_irl_fit(mdp, feats, demos, m1, cfg.maxent())
        m2 = LinearReward(env.num_states)
        r2 = irlff_fit(mdp, feats, demos, DemoSet.empty(env.num_states), m2,
                       None, cfg)
        assert checkpoint_bytes(r1.model) == checkpoint_bytes(r2.model)
        assert np.array_equal(r2.theta_f, np.zeros(env.num_states))

    def test_conv_reduction_bitwise(self):
        env, mdp, _ = self._grid()
        rows = np.stack([env.render_state(s).reshape(-1)
                         for s in range(env.num_states)])
        feats = FeatureMatrix(rows)
        demos = dijkstra_demos(mdp, [env.state_of[(0, 0)]], env.goal_state)
        cfg = IrlffConfig(alpha=0.01, iterations=5, horizon=10)
        net_cfg = ConvNetConfig(image_shape=(3, 4, 4), conv_channels=(2, 3),
                                fc1_width=6, seed=5)
        r1 = maxent_irl_fit(mdp, feats, demos, ConvRewardNet(net_cfg), cfg.maxent())
        r2 = irlff_fit(mdp, feats, demos, DemoSet.empty(env.num_states),
                       ConvRewardNet(net_cfg), None, cfg)
        assert checkpoint_bytes(r1.model) == checkpoint_bytes(r2.model)

    def test_theta_f_zero_when_expectations_match(self):
        # failure corpus visits exactly what the policy visits; with a single
        # action the policy is exactly 1.0, so the expectations match bitwise
        # and the failure-weight numerator is exactly zero
        mdp = TabularMdp.from_dense(np.ones((1, 1, 1)), discount=0.9)
        horizon = 5
        demos = DemoSet.from_trajectories(
            [Trajectory.from_states([0] * horizon)], num_states=1)
        failures = DemoSet.from_trajectories(
            [Trajectory.from_states([0] * horizon)], num_states=1)
        cfg = IrlffConfig(alpha=0.1, iterations=3, horizon=horizon)
        result = irlff_fit(mdp, FeatureMatrix.one_hot(1), demos, failures,
                           LinearReward(1), None, cfg)
        assert np.array_equal(result.theta_f, np.zeros(1))

    def test_lambda_sequence_monotone(self):
        env, mdp, feats = self._grid()
        demos = dijkstra_demos(mdp, [env.state_of[(0, 0)]], env.goal_state)
        failures = DemoSet.from_trajectories(
            [Trajectory.from_states([env.state_of[(3, 0)]] * 3,
                                    kind="agent_experience")], env.num_states)
        cfg = IrlffConfig(alpha=0.02, lam=5.0, alpha_lambda=0.9, lambda_min=1.0,
                          iterations=40, horizon=14)
        result = irlff_fit(mdp, feats, demos, failures, LinearReward(env.num_states),
                           None, cfg)
        lams = [rec.lam for rec in result.history]
        assert all(b <= a for a, b in zip(lams, lams[1:]))
        assert min(lams) >= 0.9 * 1.0

    def test_theta_f_is_an_assignment_not_an_accumulation(self):
        env, mdp, feats = self._grid()
        demos = dijkstra_demos(mdp, [env.state_of[(0, 0)]], env.goal_state)
        failures = DemoSet.from_trajectories(
            [Trajectory.from_states([env.state_of[(3, 0)]] * 4,
                                    kind="agent_experience")], env.num_states)
        cfg = IrlffConfig(alpha=0.02, lam=4.0, alpha_lambda=0.95, lambda_min=1.0,
                          iterations=10, horizon=12)
        result = irlff_fit(mdp, feats, demos, failures, LinearReward(env.num_states),
                           None, cfg, record_expectations=True)
        lam = cfg.lam
        for rec in result.history:
            recomputed = (rec.hidden_policy - rec.hidden_failure) / lam
            assert np.array_equal(recomputed, rec.theta_f)
            lam = lam * cfg.alpha_lambda if lam > cfg.lambda_min else lam

    def test_shift_invariant_greedy_policy(self):
        env, mdp, feats = self._grid()
        demos = dijkstra_demos(mdp, [env.state_of[(0, 0)], env.state_of[(0, 3)]],
                               env.goal_state)
        cfg = MaxEntConfig(learning_rate=0.05, iterations=60, horizon=14)
        out = []
        for c in (0.0, 3.5):
            model = LinearReward(env.num_states, np.full(env.num_states, c))
            result = maxent_irl_fit(mdp, feats, demos, model, cfg)
            reward = result.model.forward(feats.features)[0]
            pol = soft_value_iteration(mdp, reward, 14, tolerance=0.0)
            out.append(pol.greedy_actions())
        assert np.array_equal(out[0], out[1])

    def test_rejects_bad_lambda_config(self):
        with pytest.raises(InputError):
            IrlffConfig(lam=-1.0)
        with pytest.raises(InputError):
            IrlffConfig(lam=0.5, lambda_min=1.0)
