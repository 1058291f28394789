"""Reward fitting: maximum-entropy IRL and the failure-aware variant.

The plain fit alternates soft value iteration with occupancy propagation
and steps the model parameters against the per-state visitation difference
(policy minus expert).  The failure-aware fit additionally maintains
failure weights theta_f over the model's hidden representation, assigned
fresh each iteration as

    theta_f = (hidden expectation under the policy from the failure starts
               - hidden expectation of the failure corpus) / lambda

with lambda annealed geometrically down to lambda_min.  With an empty
failure corpus it reduces exactly (bit for bit) to the plain fit.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, TrainingDivergedError
from .mdp import (DemoSet, FeatureMatrix, TabularMdp, propagate_visitation,
                  soft_value_iteration)
from .rewards import apply_gradient_step, zero_failure_weights

TRAIN_LOG_HEADER = "iteration,residual_inf,theta_f_norm,lambda,wall_clock"


@dataclass
class MaxEntConfig:
    learning_rate: float = 0.01
    iterations: int = 100
    horizon: int = 48
    vi_tolerance: float = 1e-4

    def __post_init__(self):
        if min(self.learning_rate, self.iterations, self.horizon) <= 0:
            raise InputError("learning_rate, iterations and horizon must be positive")
        if self.vi_tolerance < 0:
            raise InputError("vi_tolerance must be >= 0")


@dataclass
class IrlffConfig:
    alpha: float = 0.01
    lam: float = 10.0
    alpha_lambda: float = 0.97
    lambda_min: float = 1.0
    iterations: int = 100
    horizon: int = 48
    vi_tolerance: float = 1e-4

    def __post_init__(self):
        if min(self.alpha, self.lam, self.alpha_lambda, self.lambda_min,
               self.iterations, self.horizon) <= 0:
            raise InputError("all IRLFF config values must be positive")
        if self.alpha_lambda >= 1.0:
            raise InputError("alpha_lambda must lie in (0, 1)")
        if self.lam < self.lambda_min:
            raise InputError("lambda must start at or above lambda_min")

    def maxent(self) -> MaxEntConfig:
        return MaxEntConfig(learning_rate=self.alpha, iterations=self.iterations,
                            horizon=self.horizon, vi_tolerance=self.vi_tolerance)


@dataclass
class IterationRecord:
    iteration: int
    residual_inf: float
    theta_f_norm: float
    lam: float
    wall_clock: float
    hidden_policy: np.ndarray = None
    hidden_failure: np.ndarray = None
    theta_f: np.ndarray = None


@dataclass
class FitResult:
    model: object
    theta_f: np.ndarray
    history: list = field(default_factory=list)

    def write_log(self, path):
        with open(path, "w") as f:
            f.write(TRAIN_LOG_HEADER + "\n")
            for rec in self.history:
                f.write(f"{rec.iteration},{rec.residual_inf!r},{rec.theta_f_norm!r},"
                        f"{rec.lam!r},{rec.wall_clock!r}\n")


def anneal_lambda(lam: float, alpha_lambda: float, lambda_min: float) -> float:
    """One annealing step: shrink by alpha_lambda while above the floor."""
    if min(lam, alpha_lambda, lambda_min) <= 0:
        raise InputError("annealing inputs must be positive")
    return alpha_lambda * lam if lam > lambda_min else lam


def maxent_irl_fit(mdp: TabularMdp, features: FeatureMatrix, demos: DemoSet,
                   model, config: MaxEntConfig) -> FitResult:
    """Gradient descent on the demonstration negative log-likelihood.

    Each round: forward the reward, derive the soft policy, propagate
    visitation from the demos' start distribution, and step the parameters
    by -lr * (policy visitation - expert visitation) through the model.
    """
    if demos.is_empty:
        raise InputError("demo set must be non-empty")
    result = _fit_loop(mdp, features, demos, None, model, None,
                       alpha=config.learning_rate, iterations=config.iterations,
                       horizon=config.horizon, vi_tolerance=config.vi_tolerance,
                       lam=None, alpha_lambda=None, lambda_min=None)
    return result


def irlff_fit(mdp: TabularMdp, features: FeatureMatrix, demos: DemoSet,
              failures: DemoSet, model, theta_f, config: IrlffConfig,
              record_expectations: bool = False) -> FitResult:
    """Failure-aware fit; with no failures it is exactly the plain fit."""
    if demos.is_empty:
        raise InputError("demo set must be non-empty")
    if failures is None or failures.is_empty:
        result = _fit_loop(mdp, features, demos, None, model, None,
                           alpha=config.alpha, iterations=config.iterations,
                           horizon=config.horizon, vi_tolerance=config.vi_tolerance,
                           lam=None, alpha_lambda=None, lambda_min=None)
        result.theta_f = zero_failure_weights(model)
        return result
    return _fit_loop(mdp, features, demos, failures, model, theta_f,
                     alpha=config.alpha, iterations=config.iterations,
                     horizon=config.horizon, vi_tolerance=config.vi_tolerance,
                     lam=config.lam, alpha_lambda=config.alpha_lambda,
                     lambda_min=config.lambda_min,
                     record_expectations=record_expectations)


def _absorbed_visit_counts(demos: DemoSet, mdp: TabularMdp, horizon: int):
    """Per-state visit counts under fixed-horizon absorbing semantics.

    A trajectory that reaches an absorbing terminal at step L < horizon
    corresponds to the length-`horizon` path that stays there; without the
    padding the policy's absorbed occupancy has no expert counterpart and
    the terminal's reward is driven down artificially.
    """
    counts = demos.state_visit_counts()
    pad = np.zeros(demos.num_states)
    for traj in demos.trajectories:
        visited = len(traj.states)
        if traj.end in mdp.terminal_states and horizon > visited:
            pad[traj.end] += horizon - visited
    if demos.trajectories:
        pad /= len(demos.trajectories)
    return counts + pad


def _fit_loop(mdp, features, demos, failures, model, theta_f, *, alpha, iterations,
              horizon, vi_tolerance, lam, alpha_lambda, lambda_min,
              record_expectations=False):
    expert_counts = _absorbed_visit_counts(demos, mdp, horizon)
    p0_demo = demos.initial_distribution
    use_failures = failures is not None
    if use_failures:
        failure_counts = _absorbed_visit_counts(failures, mdp, horizon)
        p0_fail = failures.initial_distribution
        if theta_f is None:
            theta_f = zero_failure_weights(model)
        theta_f = np.asarray(theta_f, dtype=np.float64).copy()
        if theta_f.shape != (model.hidden_dim,):
            raise InputError("theta_f length must match the model's hidden width")
    history = []
    t0 = time.perf_counter()
    for it in range(1, iterations + 1):
        rewards, hidden, cache = model.forward_with_cache(features.features,
                                                          update_stats=True)
        if use_failures:
            reward_vec = rewards + hidden @ theta_f
        else:
            reward_vec = rewards
        if not np.all(np.isfinite(reward_vec)):
            raise TrainingDivergedError(it, "non-finite rewards")
        if np.max(np.abs(reward_vec)) > 1e100:
            # value backups over such rewards overflow before the policy does
            raise TrainingDivergedError(it, "reward magnitude exploded")
        policy = soft_value_iteration(mdp, reward_vec, horizon, vi_tolerance)
        profile_demo = propagate_visitation(mdp, policy, p0_demo, horizon)
        upstream = profile_demo.summed - expert_counts
        grads = model.backward_from_cache(cache, upstream)
        try:
            apply_gradient_step(model, grads, alpha)
        except TrainingDivergedError as err:
            raise TrainingDivergedError(it, str(err)) from None
        if use_failures:
            profile_fail = propagate_visitation(mdp, policy, p0_fail, horizon)
            hidden_policy_fe = hidden.T @ profile_fail.summed
            hidden_fail_fe = hidden.T @ failure_counts
            theta_f = (hidden_policy_fe - hidden_fail_fe) / lam
            lam = anneal_lambda(lam, alpha_lambda, lambda_min)
        residual = float(np.max(np.abs(features.features.T @ upstream)))
        rec = IterationRecord(
            iteration=it, residual_inf=residual,
            theta_f_norm=float(np.linalg.norm(theta_f)) if use_failures else 0.0,
            lam=float(lam) if use_failures else 0.0,
            wall_clock=time.perf_counter() - t0)
        if use_failures and record_expectations:
            rec.hidden_policy = hidden_policy_fe.copy()
            rec.hidden_failure = hidden_fail_fe.copy()
            rec.theta_f = theta_f.copy()
        history.append(rec)
    final_theta_f = theta_f if use_failures else None
    return FitResult(model=model, theta_f=final_theta_f, history=history)
