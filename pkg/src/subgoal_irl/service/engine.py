"""Event-sourced session engine hosting one interactive training loop.

A session is fully described by its command events (created, subgoals,
round, demonstration).  Replaying them with the session's seed reconstructs
the exact state: every random draw is derived from the seed and the number
of round events applied so far, never from a shared stream, so interleaved
live-human pauses do not shift later draws.

Phases follow the loop's order:

    awaiting_subgoals -> training -> awaiting_rollout
        -> (round) -> awaiting_rollout | awaiting_demonstration | finished
        -> (demonstration) -> awaiting_rollout | finished

The initial full demonstrations are generated by the deterministic
shortest-path expert at creation (demonstrations are auto-generated in this
benchmark family; the human contributes subgoals and partial
demonstrations).
"""

from dataclasses import asdict, dataclass

import numpy as np

from ..environments import build_from_layout
from ..errors import InputError, PhaseError
from ..interaction import (LiveExpert, RoundRecord, SimulatedExpert, SubgoalSet,
                           rollout, select_start, update_demo)
from ..layouts import parse_carpark_config, parse_grid_layout
from ..mdp import DemoSet, Trajectory, TrajectoryKind, shortest_path
from ..rewards import (LinearReward, ConvRewardNet, checkpoint_bytes,
                       default_carpark_net_config, default_grid_net_config,
                       zero_failure_weights)
from ..training import IrlffConfig, irlff_fit, maxent_irl_fit

PHASES = ("awaiting_subgoals", "training", "awaiting_rollout",
          "awaiting_demonstration", "finished")


@dataclass
class SessionConfig:
    env_kind: str = "grid"
    environment: str = ""           # layout text (grid) or car-park config text
    seed: int = 0
    expert: str = "simulated"       # simulated | human
    model: str = "linear"
    step_thr: int = 2
    alpha: float = 0.05
    iterations: int = 60
    horizon: int = 0                # 0: environment default
    vi_tolerance: float = 1e-4
    lam: float = 10.0
    alpha_lambda: float = 0.97
    lambda_min: float = 1.0
    action_rule: str = "sample"
    initial_demos: int = 1
    max_rounds: int = 50
    finish_streak: int = 2

    def validate(self):
        if self.env_kind not in ("grid", "carpark"):
            raise InputError(f"unknown env kind {self.env_kind!r}")
        if self.expert not in ("simulated", "human"):
            raise InputError(f"unknown expert kind {self.expert!r}")
        if self.model not in ("linear", "conv"):
            raise InputError(f"unknown model kind {self.model!r}")
        if self.action_rule not in ("sample", "greedy"):
            raise InputError(f"unknown action rule {self.action_rule!r}")
        if not self.environment.strip():
            raise InputError("environment layout text is required")
        if self.initial_demos < 1:
            raise InputError("at least one initial demonstration is required")


class SessionEngine:
    def __init__(self, session_id: str, config: SessionConfig):
        config.validate()
        self.session_id = session_id
        self.config = config
        if config.env_kind == "carpark":
            layout = parse_carpark_config(config.environment)
        else:
            layout = parse_grid_layout(config.environment)
        self.built = build_from_layout(layout)
        if self.built.start_state is None:
            raise InputError("session layouts need a canonical start (S) cell")
        self.horizon = config.horizon or self.built.default_horizon()
        self.irlff_cfg = IrlffConfig(
            alpha=config.alpha, lam=config.lam, alpha_lambda=config.alpha_lambda,
            lambda_min=config.lambda_min, iterations=config.iterations,
            horizon=self.horizon, vi_tolerance=config.vi_tolerance)
        self.expert = (SimulatedExpert(self.built.mdp)
                       if config.expert == "simulated" else LiveExpert())
        self.model = self._fresh_model()
        self.theta_f = zero_failure_weights(self.model)
        self.demos = self._initial_demos()
        self.failures = DemoSet.empty(self.built.num_states)
        self.subgoals = SubgoalSet.empty()
        self.phase = "awaiting_subgoals"
        self.round_count = 0
        self.round_events = 0
        self.success_streak = 0
        self.pending_subtask = None
        self.last_outcome = None
        self.last_residual = float("nan")
        self.history = []

    # -- construction helpers ------------------------------------------------

    def _fresh_model(self):
        cfg = self.config
        if cfg.model == "linear":
            return LinearReward(self.built.features.feature_dim)
        env = self.built.env
        if self.built.kind == "carpark":
            return ConvRewardNet(default_carpark_net_config(
                env.image_shape, env.extra_dim, seed=cfg.seed))
        return ConvRewardNet(default_grid_net_config(env.image_shape, seed=cfg.seed))

    def _initial_demos(self) -> DemoSet:
        demo = shortest_path(self.built.mdp, self.built.start_state,
                             self.built.goal_state)
        return DemoSet.from_trajectories([demo] * self.config.initial_demos,
                                         self.built.num_states)

    # -- event application ---------------------------------------------------

    def apply(self, event: dict):
        kind = event["type"]
        if kind == "created":
            return  # construction already consumed it
        if kind == "subgoals":
            self.submit_subgoals(event["states"])
        elif kind == "round":
            self.step_round()
        elif kind == "demonstration":
            self.submit_demonstration(event["states"])
        else:
            raise InputError(f"unknown event type {kind!r}")

    def _require_phase(self, expected: str):
        if self.phase != expected:
            raise PhaseError(expected, self.phase)

    def submit_subgoals(self, states):
        self._require_phase("awaiting_subgoals")
        states = [int(s) for s in states]
        offenders = [s for s in states
                     if not 0 <= s < self.built.num_states
                     or s in self.built.goal_alternatives]
        if len(set(states)) != len(states):
            offenders.extend(s for s in states if states.count(s) > 1)
        if offenders:
            raise InputError(f"invalid subgoal states: {sorted(set(offenders))}")
        self.subgoals = SubgoalSet.of_states(states, source="human")
        self.phase = "training"
        try:
            fit = maxent_irl_fit(self.built.mdp, self.built.features, self.demos,
                                 self.model, self.irlff_cfg.maxent())
            self.model = fit.model
            self.theta_f = zero_failure_weights(self.model)
            self.last_residual = fit.history[-1].residual_inf
        except Exception:
            self.phase = "awaiting_subgoals"
            raise
        self.phase = "awaiting_rollout"

    def step_round(self):
        self._require_phase("awaiting_rollout")
        self.round_events += 1
        rng = np.random.default_rng([self.config.seed, 7, self.round_events])
        built = self.built
        start = select_start(built.mdp, built.goal_state, rng)
        outcome = rollout(built.mdp, self.model, self.theta_f, built.features,
                          self.subgoals, start, built.goal_state,
                          self.config.step_thr, rng, self.config.action_rule,
                          self.horizon, self.config.vi_tolerance,
                          built.goal_alternatives)
        self.last_outcome = outcome
        update = update_demo(outcome, self.expert, self.demos, self.failures)
        self.failures = update.failures
        if update.pending:
            self.pending_subtask = update.pending[0]
            self.phase = "awaiting_demonstration"
            return
        self.demos = update.demos
        self._finish_round(outcome.overall_success)

    def submit_demonstration(self, states):
        self._require_phase("awaiting_demonstration")
        spec = self.pending_subtask
        states = [int(s) for s in states]
        if not states or states[0] != spec.start:
            raise InputError(
                f"demonstration must start at state {spec.start}")
        if states[-1] not in spec.alternatives:
            raise InputError(
                f"demonstration must end at state {spec.target}"
                + (f" (or one of {list(spec.alternatives)})"
                   if len(spec.alternatives) > 1 else ""))
        traj = self._trajectory_from_states(states)
        self.demos = self.demos.with_added([traj])
        self.pending_subtask = None
        if isinstance(self.expert, LiveExpert):
            self.expert.queue.clear()
        self._finish_round(overall_success=False)

    def _trajectory_from_states(self, states) -> Trajectory:
        """Reconstruct actions for a state path; name the first illegal hop."""
        mdp = self.built.mdp
        actions = []
        for i, (s, s2) in enumerate(zip(states, states[1:])):
            if not (0 <= s < mdp.num_states and 0 <= s2 < mdp.num_states):
                raise InputError(f"illegal hop {i}: state out of range")
            for a in range(mdp.num_actions):
                if mdp.deterministic_successor(s, a) == s2:
                    actions.append(a)
                    break
            else:
                raise InputError(f"illegal hop {i}: no action moves "
                                 f"{s} -> {s2}")
        return Trajectory.from_states(states, actions,
                                      kind=TrajectoryKind.PARTIAL_DEMO)

    def _finish_round(self, overall_success: bool):
        self.phase = "training"
        try:
            fit = irlff_fit(self.built.mdp, self.built.features, self.demos,
                            self.failures, self.model, self.theta_f,
                            self.irlff_cfg)
            self.model, self.theta_f = fit.model, fit.theta_f
            self.last_residual = fit.history[-1].residual_inf
        except Exception:
            self.phase = "awaiting_rollout"
            raise
        self.round_count += 1
        self.success_streak = self.success_streak + 1 if overall_success else 0
        outcome = self.last_outcome
        self.history.append(RoundRecord(
            round=self.round_count, start=outcome.start,
            cumulative_demo_steps=self.demos.total_steps,
            success_bits="".join("1" if r.succeeded else "0"
                                 for r in outcome.subtasks),
            residual_inf=self.last_residual,
            overall_success=overall_success))
        if (self.success_streak >= self.config.finish_streak
                or self.round_count >= self.config.max_rounds):
            self.phase = "finished"
        else:
            self.phase = "awaiting_rollout"

    # -- read models -----------------------------------------------------------

    def checkpoint(self) -> bytes:
        return checkpoint_bytes(self.model, self.theta_f)

    def counters(self) -> dict:
        return {"rounds": self.round_count,
                "demo_steps": self.demos.total_steps,
                "demo_count": len(self.demos),
                "failure_count": len(self.failures),
                "success_streak": self.success_streak}

    def summary(self) -> dict:
        return {"session_id": self.session_id, "phase": self.phase,
                "env_kind": self.built.kind, "expert": self.config.expert,
                "counters": self.counters()}

    def history_rows(self) -> list:
        return [asdict(rec) for rec in self.history]

    def view(self) -> dict:
        from ..rewards import combined_reward
        from ..mdp import soft_value_iteration
        built = self.built
        payload = {"session_id": self.session_id, "phase": self.phase,
                   "counters": self.counters(),
                   "subgoals": list(self.subgoals.states),
                   "pending_subtask": None, "last_rollout": [],
                   "geometry": self._geometry()}
        if self.pending_subtask is not None:
            spec = self.pending_subtask
            payload["pending_subtask"] = {
                "start": spec.start, "target": spec.target,
                "budget": spec.budget, "alternatives": list(spec.alternatives)}
        if self.last_outcome is not None:
            payload["last_rollout"] = [
                {"start": r.spec.start, "target": r.spec.target,
                 "budget": r.spec.budget, "succeeded": r.succeeded,
                 "states": r.trajectory.states}
                for r in self.last_outcome.subtasks]
        reward = combined_reward(self.model, self.theta_f, built.features)
        policy = soft_value_iteration(built.mdp, reward, self.horizon,
                                      self.config.vi_tolerance)
        payload["reward"] = [float(r) for r in reward]
        payload["greedy_actions"] = [int(a) for a in policy.greedy_actions()]
        return payload

    def _geometry(self) -> dict:
        built = self.built
        env = built.env
        if built.kind == "grid":
            return {"kind": "grid", "width": env.width, "height": env.height,
                    "obstacles": sorted(env.obstacles),
                    "goal": list(env.goal_cell),
                    "start": list(env.layout.start) if env.layout.start else None,
                    "cells": [list(env.cell(s)) for s in range(env.num_states)],
                    "goal_state": built.goal_state,
                    "start_state": built.start_state,
                    "eval_states": list(env.eval_states)}
        return {"kind": "carpark", "width": env.width, "height": env.height,
                "headings": env.headings,
                "obstacles": sorted(env.obstacles),
                "goal": list(env.layout.goal),
                "goal_heading": env.layout.goal_heading,
                "states": [list(env.decompose(s)) for s in range(env.num_states)],
                "goal_state": built.goal_state,
                "start_state": built.start_state}


def replay(session_id: str, events: list) -> SessionEngine:
    """Reconstruct a session from its event log (first event: created)."""
    if not events or events[0]["type"] != "created":
        raise InputError("event log must begin with a created event")
    config = SessionConfig(**events[0]["config"])
    engine = SessionEngine(session_id, config)
    for event in events[1:]:
        engine.apply(event)
    return engine
