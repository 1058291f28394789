"""Finite MDPs and the dynamic-programming operations every algorithm shares.

The transition model is stored sparsely: for each (state, action) pair a
short list of successor states with probabilities.  Dense (S, A, S) tensors
are accepted as a construction convenience and can be materialized back for
small models, but nothing in the package requires them: the car-parking
world at ~5k states would need a ~150M-entry dense tensor otherwise.

All functions here are pure: they never mutate their inputs and are safe to
call concurrently.
"""

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .errors import InputError, NoPathError

PROB_TOL = 1e-9


class TrajectoryKind(str, Enum):
    FULL_DEMO = "full_demo"
    PARTIAL_DEMO = "partial_demo"
    AGENT_EXPERIENCE = "agent_experience"


@dataclass(frozen=True)
class Trajectory:
    """An ordered sequence of (state, action) pairs.

    The pair list includes the final state; its action is a placeholder
    (conventionally 0) since no transition follows it.  ``num_moves`` is the
    number of transitions, i.e. ``len(steps) - 1``.
    """

    steps: tuple
    kind: TrajectoryKind

    def __post_init__(self):
        if len(self.steps) == 0:
            raise InputError("trajectory must be non-empty")

    @classmethod
    def from_states(cls, states, actions=None, kind=TrajectoryKind.FULL_DEMO):
        states = list(states)
        if actions is None:
            actions = [0] * len(states)
        else:
            actions = list(actions)
            if len(actions) == len(states) - 1:
                actions.append(0)
            if len(actions) != len(states):
                raise InputError("actions must have len(states) or len(states)-1 entries")
        return cls(steps=tuple(zip(states, actions)), kind=kind)

    @property
    def states(self):
        return [s for s, _ in self.steps]

    @property
    def start(self) -> int:
        return self.steps[0][0]

    @property
    def end(self) -> int:
        return self.steps[-1][0]

    @property
    def num_moves(self) -> int:
        return len(self.steps) - 1

    def with_kind(self, kind: TrajectoryKind) -> "Trajectory":
        return Trajectory(steps=self.steps, kind=kind)


class TabularMdp:
    """Finite MDP with sparse per-(s, a) successor lists.

    indptr/succ_states/succ_probs form a CSR layout over the flattened
    (s, a) pair index ``s * num_actions + a``.  Terminal states self-loop
    with probability 1 under every action, so probability mass is conserved
    by construction.
    """

    def __init__(self, num_states, num_actions, indptr, succ_states, succ_probs,
                 discount, terminal_states=(), validate=True):
        self.num_states = int(num_states)
        self.num_actions = int(num_actions)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.succ_states = np.ascontiguousarray(succ_states, dtype=np.int64)
        self.succ_probs = np.ascontiguousarray(succ_probs, dtype=np.float64)
        self.discount = float(discount)
        self.terminal_states = frozenset(int(t) for t in terminal_states)
        if validate:
            self._validate()

    def _validate(self):
        if self.num_states <= 0 or self.num_actions <= 0:
            raise InputError("num_states and num_actions must be positive")
        if not 0.0 <= self.discount <= 1.0:
            raise InputError(f"discount must lie in [0, 1], got {self.discount}")
        if self.indptr.shape[0] != self.num_states * self.num_actions + 1:
            raise InputError("indptr has wrong length")
        if self.indptr[-1] != self.succ_states.shape[0]:
            raise InputError("indptr does not cover the successor arrays")
        if np.any(np.diff(self.indptr) < 1):
            raise InputError("every (state, action) pair needs at least one successor")
        if np.any(self.succ_probs < 0):
            raise InputError("transition probabilities must be non-negative")
        sums = np.add.reduceat(self.succ_probs, self.indptr[:-1])
        if np.any(np.abs(sums - 1.0) > PROB_TOL):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise InputError(
                f"transition row (s={bad // self.num_actions}, a={bad % self.num_actions}) "
                f"sums to {sums[bad]!r}, expected 1"
            )
        for t in self.terminal_states:
            for a in range(self.num_actions):
                succ, probs = self.successors(t, a)
                if len(succ) != 1 or succ[0] != t or abs(probs[0] - 1.0) > PROB_TOL:
                    raise InputError(f"terminal state {t} must self-loop under action {a}")

    @classmethod
    def from_dense(cls, transition, discount, terminal_states=()):
        transition = np.asarray(transition, dtype=np.float64)
        if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
            raise InputError("transition must have shape (S, A, S)")
        num_states, num_actions, _ = transition.shape
        flat = transition.reshape(num_states * num_actions, num_states)
        counts = np.count_nonzero(flat, axis=1)
        indptr = np.zeros(num_states * num_actions + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        pair_idx, succ_states = np.nonzero(flat)
        succ_probs = flat[pair_idx, succ_states]
        return cls(num_states, num_actions, indptr, succ_states, succ_probs,
                   discount, terminal_states)

    @classmethod
    def deterministic(cls, next_state, discount, terminal_states=()):
        """Build from a (S, A) table of successor state indices."""
        next_state = np.asarray(next_state, dtype=np.int64)
        num_states, num_actions = next_state.shape
        next_state = next_state.copy()
        for t in terminal_states:
            next_state[t, :] = t
        indptr = np.arange(num_states * num_actions + 1, dtype=np.int64)
        succ_states = next_state.reshape(-1)
        succ_probs = np.ones(num_states * num_actions)
        return cls(num_states, num_actions, indptr, succ_states, succ_probs,
                   discount, terminal_states)

    def successors(self, s, a):
        m = s * self.num_actions + a
        lo, hi = self.indptr[m], self.indptr[m + 1]
        return self.succ_states[lo:hi], self.succ_probs[lo:hi]

    def deterministic_successor(self, s, a):
        """The successor carrying more than half the mass, or None."""
        succ, probs = self.successors(s, a)
        k = int(np.argmax(probs))
        return int(succ[k]) if probs[k] > 0.5 else None

    def transition_prob(self, s, a, s2) -> float:
        succ, probs = self.successors(s, a)
        hit = np.nonzero(succ == s2)[0]
        return float(probs[hit[0]]) if hit.size else 0.0

    def dense(self):
        out = np.zeros((self.num_states, self.num_actions, self.num_states))
        for s in range(self.num_states):
            for a in range(self.num_actions):
                succ, probs = self.successors(s, a)
                out[s, a, succ] = probs
        return out

    def deterministic_edges(self):
        """edges[s] = ordered (action, successor) pairs with prob > 0.5, s' != s.

        Computed once per model and cached; the model is immutable.
        """
        cached = getattr(self, "_det_edges", None)
        if cached is None:
            cached = [[] for _ in range(self.num_states)]
            for s in range(self.num_states):
                for a in range(self.num_actions):
                    s2 = self.deterministic_successor(s, a)
                    if s2 is not None and s2 != s:
                        cached[s].append((a, s2))
            self._det_edges = cached
        return cached


@dataclass(frozen=True)
class Policy:
    probs: np.ndarray

    def __post_init__(self):
        rows = self.probs.sum(axis=1)
        if np.any(self.probs < 0) or np.any(np.abs(rows - 1.0) > PROB_TOL):
            raise InputError("policy rows must be distributions over actions")

    def greedy_actions(self) -> np.ndarray:
        """Argmax action per state; ties break toward the lowest index."""
        return np.argmax(self.probs, axis=1)


@dataclass(frozen=True)
class FeatureMatrix:
    features: np.ndarray

    def __post_init__(self):
        if self.features.ndim != 2:
            raise InputError("features must be a (num_states, feature_dim) matrix")
        if not np.all(np.isfinite(self.features)):
            raise InputError("features must be finite")

    @property
    def num_states(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @classmethod
    def one_hot(cls, num_states):
        return cls(np.eye(num_states))


@dataclass(frozen=True)
class VisitationProfile:
    per_step: np.ndarray  # (num_states, horizon)
    summed: np.ndarray    # (num_states,)
    horizon: int


@dataclass
class DemoSet:
    """A corpus of trajectories plus the empirical start-state distribution."""

    num_states: int
    trajectories: list = field(default_factory=list)
    initial_distribution: np.ndarray = None

    def __post_init__(self):
        if self.initial_distribution is None:
            p0 = np.zeros(self.num_states)
            for traj in self.trajectories:
                p0[traj.start] += 1.0
            if self.trajectories:
                p0 /= len(self.trajectories)
            self.initial_distribution = p0

    @classmethod
    def empty(cls, num_states):
        return cls(num_states=num_states, trajectories=[])

    @classmethod
    def from_trajectories(cls, trajectories, num_states):
        return cls(num_states=num_states, trajectories=list(trajectories))

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def is_empty(self) -> bool:
        return not self.trajectories

    @property
    def total_steps(self) -> int:
        return sum(t.num_moves for t in self.trajectories)

    def with_added(self, new_trajectories):
        return DemoSet.from_trajectories(
            self.trajectories + list(new_trajectories), self.num_states)

    def state_visit_counts(self) -> np.ndarray:
        """Mean per-trajectory visit count of each state."""
        counts = np.zeros(self.num_states)
        for traj in self.trajectories:
            for s in traj.states:
                counts[s] += 1.0
        if self.trajectories:
            counts /= len(self.trajectories)
        return counts


def validate_trajectory(mdp: TabularMdp, traj: Trajectory):
    """Raise InputError naming the first hop not supported by the model."""
    for i in range(traj.num_moves):
        s, a = traj.steps[i]
        s2 = traj.steps[i + 1][0]
        if not (0 <= s < mdp.num_states and 0 <= s2 < mdp.num_states):
            raise InputError(f"hop {i}: state out of range ({s} -> {s2})")
        if not 0 <= a < mdp.num_actions:
            raise InputError(f"hop {i}: action {a} out of range")
        if mdp.transition_prob(s, a, s2) <= 0.0:
            raise InputError(f"hop {i}: transition ({s}, {a}) -> {s2} has probability 0")


# ---------------------------------------------------------------------------
# dynamic programming
# ---------------------------------------------------------------------------

def soft_value_iteration(mdp: TabularMdp, reward, horizon: int,
                         tolerance: float = 1e-4) -> Policy:
    """Maximum-entropy policy from soft Bellman backups.

    V(s) = log sum_a exp Q(s,a) with Q(s,a) = r(s) + gamma * E[V(s')], run
    for `horizon` sweeps or until max |dV| < tolerance.  The returned policy
    is pi(s,a) = exp(Q(s,a) - V(s)), exactly row-normalized.
    """
    reward = np.ascontiguousarray(reward, dtype=np.float64)
    if reward.shape != (mdp.num_states,):
        raise InputError("reward must be a vector with one entry per state")
    if not np.all(np.isfinite(reward)):
        raise InputError("reward must be finite")
    if horizon < 1:
        raise InputError("horizon must be >= 1")
    if tolerance < 0:
        raise InputError("tolerance must be >= 0")
    probs, _, _ = kernels.soft_value_iteration(
        reward, mdp.discount, int(horizon), float(tolerance),
        mdp.indptr, mdp.succ_states, mdp.succ_probs, mdp.num_actions)
    return Policy(probs=probs)


def propagate_visitation(mdp: TabularMdp, policy: Policy, p0,
                         horizon: int) -> VisitationProfile:
    """Expected state occupancy per time step under a fixed policy."""
    p0 = np.ascontiguousarray(p0, dtype=np.float64)
    if p0.shape != (mdp.num_states,):
        raise InputError("p0 must be a vector with one entry per state")
    if abs(p0.sum() - 1.0) > 1e-6:
        raise InputError(f"p0 must sum to 1, got {p0.sum()!r}")
    if horizon < 1:
        raise InputError("horizon must be >= 1")
    per_step = kernels.propagate_visitation(
        p0, np.ascontiguousarray(policy.probs), int(horizon),
        mdp.indptr, mdp.succ_states, mdp.succ_probs)
    return VisitationProfile(per_step=per_step, summed=per_step.sum(axis=1),
                             horizon=int(horizon))


def expert_feature_expectation(demos: DemoSet, features: FeatureMatrix) -> np.ndarray:
    """Mean cumulative feature vector over the demonstration corpus."""
    if demos.is_empty:
        raise InputError("demo set must be non-empty")
    if demos.num_states != features.num_states:
        raise InputError("demos and features disagree on num_states")
    return features.features.T @ demos.state_visit_counts()


def policy_feature_expectation(profile: VisitationProfile,
                               features: FeatureMatrix) -> np.ndarray:
    """Cumulative feature vector induced by a visitation profile."""
    if profile.summed.shape[0] != features.num_states:
        raise InputError("profile and features disagree on num_states")
    return features.features.T @ profile.summed


# ---------------------------------------------------------------------------
# shortest paths on the deterministic transition graph
# ---------------------------------------------------------------------------

def shortest_path(mdp: TabularMdp, start: int, goal: int,
                  blocked=frozenset()) -> Trajectory:
    """Minimum-step trajectory from start to goal.

    All edges have unit cost so layered breadth-first search is exact.  Ties
    break deterministically: parents are assigned scanning each frontier in
    increasing state index and each state's actions in increasing action
    index, so repeated calls yield the same trajectory.
    """
    for name, s in (("start", start), ("goal", goal)):
        if not 0 <= s < mdp.num_states:
            raise InputError(f"{name} state {s} out of range")
    if start == goal:
        return Trajectory.from_states([start], kind=TrajectoryKind.FULL_DEMO)
    edges = mdp.deterministic_edges()
    parent = {start: None}
    frontier = [start]
    found = False
    while frontier and not found:
        nxt = []
        for s in sorted(frontier):
            for a, s2 in edges[s]:
                if s2 in parent or s2 in blocked:
                    continue
                parent[s2] = (s, a)
                if s2 == goal:
                    found = True
                    break
                nxt.append(s2)
            if found:
                break
        frontier = nxt
    if not found:
        raise NoPathError(start, goal)
    states, actions = [goal], []
    cur = goal
    while parent[cur] is not None:
        prev, act = parent[cur]
        states.append(prev)
        actions.append(act)
        cur = prev
    states.reverse()
    actions.reverse()
    return Trajectory.from_states(states, actions, kind=TrajectoryKind.FULL_DEMO)


def min_steps(mdp: TabularMdp, start: int, goal: int) -> int:
    return shortest_path(mdp, start, goal).num_moves


def min_steps_to_goal(mdp: TabularMdp, goal: int) -> np.ndarray:
    """BFS distance from every state to `goal` along deterministic edges.

    Unreachable states get -1.  Used for budgets, start selection and
    reward shaping oracles; one reverse sweep instead of S forward searches.
    """
    rev = [[] for _ in range(mdp.num_states)]
    for s, outs in enumerate(mdp.deterministic_edges()):
        for _, s2 in outs:
            rev[s2].append(s)
    dist = np.full(mdp.num_states, -1, dtype=np.int64)
    dist[goal] = 0
    queue = deque([goal])
    while queue:
        s = queue.popleft()
        for p in rev[s]:
            if dist[p] < 0:
                dist[p] = dist[s] + 1
                queue.append(p)
    return dist
