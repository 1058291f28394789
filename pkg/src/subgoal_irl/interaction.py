"""The interactive training loop: subgoals, subtask rollouts, expert queries.

A round works like this: pick a start, derive the soft policy from the
current (combined) reward, then attempt the subgoals lying on the optimal
route to the goal one after another.  Each subtask gets a budget of
min_steps + step_thr moves; running out of budget is a "struggle", which
harvests the agent's trajectory as failure experience and asks the expert
for a demonstration covering exactly that subtask.  Execution stops at the
first failed subtask.

Experts come in two flavors: the simulated one answers every request with
the deterministic shortest path, the live one parks requests so a service
can collect the demonstration from a human.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NoPathError
from .mdp import (DemoSet, FeatureMatrix, TabularMdp, Trajectory, TrajectoryKind,
                  min_steps_to_goal, shortest_path, soft_value_iteration)
from .rewards import combined_reward, zero_failure_weights
from .training import IrlffConfig, irlff_fit, maxent_irl_fit

HISTORY_HEADER = "round,start,cumulative_demo_steps,success_bits,residual_inf"


@dataclass(frozen=True)
class SubgoalSet:
    """Ordered subgoal slots; each slot is a tuple of interchangeable states.

    Slots are ordered along the route from start to goal.  Most slots hold a
    single state; multi-member slots express "any of these counts" (several
    doorways, several acceptable headings).
    """

    slots: tuple
    source: str = "human"  # human | oracle | random

    def __post_init__(self):
        flat = [s for slot in self.slots for s in slot]
        if len(set(flat)) != len(flat):
            raise InputError("subgoal states must not repeat")

    @classmethod
    def of_states(cls, states, source="human"):
        return cls(slots=tuple((int(s),) for s in states), source=source)

    @classmethod
    def empty(cls, source="human"):
        return cls(slots=(), source=source)

    @property
    def states(self):
        return [s for slot in self.slots for s in slot]

    def __len__(self) -> int:
        return len(self.slots)

    def validate(self, num_states: int, goal_states) -> None:
        offenders = [s for s in self.states
                     if not 0 <= s < num_states or s in goal_states]
        if offenders:
            raise InputError(f"invalid subgoal states: {offenders}")


@dataclass(frozen=True)
class SubtaskSpec:
    start: int
    target: int
    budget: int                  # min_steps(start, target) + step_thr
    alternatives: tuple = ()     # any of these states completes the subtask

    def __post_init__(self):
        if not self.alternatives:
            object.__setattr__(self, "alternatives", (self.target,))


@dataclass
class SubtaskResult:
    spec: SubtaskSpec
    trajectory: Trajectory
    succeeded: bool
    reached: int = None          # the alternative actually reached, if any


@dataclass
class RolloutOutcome:
    start: int
    subtasks: list
    overall_success: bool


@dataclass
class UpdateResult:
    demos: DemoSet
    failures: DemoSet
    pending: list = field(default_factory=list)  # SubtaskSpecs awaiting a live expert


class SimulatedExpert:
    """Answers every demonstration request with a deterministic shortest path."""

    kind = "simulated_dijkstra"

    def __init__(self, mdp: TabularMdp):
        self.mdp = mdp

    def demonstrate(self, spec: SubtaskSpec) -> Trajectory:
        best = None
        for target in spec.alternatives:
            try:
                traj = shortest_path(self.mdp, spec.start, target)
            except NoPathError:
                continue
            if best is None or traj.num_moves < best.num_moves:
                best = traj
        if best is None:
            raise NoPathError(spec.start, spec.target)
        return best.with_kind(TrajectoryKind.PARTIAL_DEMO)


class LiveExpert:
    """A human on the other side of the session service; requests are parked."""

    kind = "live_human"

    def __init__(self):
        self.queue = []

    def demonstrate(self, spec: SubtaskSpec):
        self.queue.append(spec)
        return None


# ---------------------------------------------------------------------------
# subgoal designation
# ---------------------------------------------------------------------------

def _reachable(mdp: TabularMdp, start: int, goal_states, removed: int) -> bool:
    if start in goal_states:
        return True
    edges = mdp.deterministic_edges()
    seen = {start, removed}
    stack = [start]
    while stack:
        s = stack.pop()
        for _, s2 in edges[s]:
            if s2 in seen:
                continue
            if s2 in goal_states:
                return True
            seen.add(s2)
            stack.append(s2)
    return False


def oracle_subgoals(mdp: TabularMdp, start: int, goal: int) -> SubgoalSet:
    """States contained in every start-to-goal trajectory.

    Equivalently: the states (excluding start and goal) whose removal
    disconnects start from goal.  Only states on one shortest path can
    qualify (a state on every path is on that one too), so candidates are
    restricted to it; each candidate is verified by reachability search
    with the candidate removed.  Ordered by distance from start.
    """
    path = shortest_path(mdp, start, goal)
    goal_states = {goal}
    found = []
    for s in path.states[1:-1]:
        if not _reachable(mdp, start, goal_states, removed=s):
            found.append(s)
    return SubgoalSet.of_states(found, source="oracle")


@dataclass
class CoverageReport:
    fractions: dict          # subgoal state -> fraction of demos containing it
    num_demos: int

    @property
    def all_covered(self) -> bool:
        return all(f >= 1.0 for f in self.fractions.values())

    @property
    def warnings(self):
        return [f"subgoal {s} appears in only {f:.0%} of demonstrations"
                for s, f in self.fractions.items() if f < 1.0]


def check_subgoal_coverage(subgoals: SubgoalSet, demos: DemoSet) -> CoverageReport:
    """Fraction of demonstrations containing each subgoal slot."""
    fractions = {}
    if demos.is_empty:
        return CoverageReport(fractions={}, num_demos=0)
    for slot in subgoals.slots:
        hits = sum(1 for t in demos.trajectories
                   if any(s in t.states for s in slot))
        key = slot[0] if len(slot) == 1 else slot
        fractions[key] = hits / len(demos)
    return CoverageReport(fractions=fractions, num_demos=len(demos))


def random_subgoals(mdp: TabularMdp, goal_states, size: int,
                    rng: np.random.Generator) -> SubgoalSet:
    """Uniform draw (without replacement) over all non-goal states."""
    candidates = np.array([s for s in range(mdp.num_states) if s not in goal_states])
    if size > candidates.size:
        raise InputError("more subgoals requested than free states")
    picked = rng.choice(candidates, size=size, replace=False)
    return SubgoalSet.of_states(sorted(int(s) for s in picked), source="random")


# ---------------------------------------------------------------------------
# rollouts
# ---------------------------------------------------------------------------

def plan_subtasks(mdp: TabularMdp, subgoals: SubgoalSet, start: int, goal: int,
                  step_thr: int, goal_alternatives=()) -> list:
    """Split the route from start into budgeted subtasks.

    Only subgoal slots lying on the optimal route from this particular
    start participate (a slot behind the start would force a detour); they
    are attempted in route order, and the final subtask targets the goal.
    """
    goal_alternatives = tuple(goal_alternatives) or (goal,)
    route = shortest_path(mdp, start, goal).states
    position = {s: i for i, s in enumerate(route)}
    on_route = []
    for slot in subgoals.slots:
        members = [s for s in slot if s in position]
        if members:
            anchor = min(position[s] for s in members)
            on_route.append((anchor, tuple(slot)))
    on_route.sort(key=lambda item: item[0])
    specs = []
    cur = start
    dist_cache = {}
    for _, slot in on_route:
        target, steps = _nearest_member(mdp, cur, slot, dist_cache)
        specs.append(SubtaskSpec(start=cur, target=target, budget=steps + step_thr,
                                 alternatives=tuple(slot)))
        cur = target
    target, steps = _nearest_member(mdp, cur, goal_alternatives, dist_cache)
    specs.append(SubtaskSpec(start=cur, target=target, budget=steps + step_thr,
                             alternatives=goal_alternatives))
    return specs


def _nearest_member(mdp, start, candidates, cache):
    best = None
    for c in candidates:
        if c not in cache:
            cache[c] = min_steps_to_goal(mdp, c)
        d = cache[c][start]
        if d >= 0 and (best is None or d < best[1]):
            best = (c, int(d))
    if best is None:
        raise NoPathError(start, candidates[0])
    return best


def _run_policy(mdp: TabularMdp, policy_probs: np.ndarray, start: int, targets,
                budget: int, rng, rule: str):
    """Execute the policy until a target is hit or the budget runs out."""
    states, actions = [start], []
    cur = start
    reached = None
    if cur in targets:
        reached = cur
    steps = 0
    while reached is None and steps < budget:
        if rule == "greedy":
            a = int(np.argmax(policy_probs[cur]))
        else:
            a = int(rng.choice(mdp.num_actions, p=policy_probs[cur]))
        succ, probs = mdp.successors(cur, a)
        if len(succ) == 1:
            nxt = int(succ[0])
        else:
            nxt = int(rng.choice(succ, p=probs / probs.sum()))
        actions.append(a)
        states.append(nxt)
        cur = nxt
        steps += 1
        if cur in targets:
            reached = cur
    traj = Trajectory.from_states(states, actions, kind=TrajectoryKind.AGENT_EXPERIENCE)
    return traj, reached


def rollout(mdp: TabularMdp, model, theta_f, features: FeatureMatrix,
            subgoals: SubgoalSet, start: int, goal: int, step_thr: int,
            rng: np.random.Generator, action_rule: str = "sample",
            horizon: int = 48, vi_tolerance: float = 1e-4,
            goal_alternatives=()) -> RolloutOutcome:
    """Attempt the subgoal chain under the current reward; stop at first failure."""
    if action_rule not in ("sample", "greedy"):
        raise InputError(f"unknown action rule {action_rule!r}")
    if step_thr < 0:
        raise InputError("step_thr must be >= 0")
    queue = plan_subtasks(mdp, subgoals, start, goal, step_thr, goal_alternatives)
    reward = combined_reward(model, theta_f, features)
    policy = soft_value_iteration(mdp, reward, horizon, vi_tolerance)
    results = []
    i = 0
    while i < len(queue):
        spec = queue[i]
        traj, reached = _run_policy(mdp, policy.probs, spec.start,
                                    set(spec.alternatives), spec.budget, rng,
                                    action_rule)
        succeeded = reached is not None
        results.append(SubtaskResult(spec=spec, trajectory=traj,
                                     succeeded=succeeded, reached=reached))
        if not succeeded:
            break
        if reached != spec.target and i < len(queue) - 1:
            # a non-primary slot member was reached: re-budget the tail from there
            tail_slots = tuple(q.alternatives for q in queue[i + 1:-1])
            tail = SubgoalSet(slots=tail_slots, source=subgoals.source)
            queue = queue[:i + 1] + plan_subtasks(mdp, tail, reached, goal,
                                                  step_thr, goal_alternatives)
        i += 1
    overall = bool(results) and all(r.succeeded for r in results) \
        and len(results) == len(queue)
    return RolloutOutcome(start=start, subtasks=results, overall_success=overall)


def update_demo(outcome: RolloutOutcome, expert, demos: DemoSet,
                failures: DemoSet) -> UpdateResult:
    """Harvest failures and request expert demonstrations for failed subtasks.

    Succeeded subtask trajectories are agent experience, not expert data;
    they are discarded.  With a live expert the demonstration request is
    parked and reported in ``pending``.
    """
    new_demos, new_failures, pending = [], [], []
    for result in outcome.subtasks:
        if result.succeeded:
            continue
        new_failures.append(result.trajectory)
        demo = expert.demonstrate(result.spec)
        if demo is None:
            pending.append(result.spec)
        else:
            new_demos.append(demo)
    return UpdateResult(demos=demos.with_added(new_demos),
                        failures=failures.with_added(new_failures),
                        pending=pending)


# ---------------------------------------------------------------------------
# the outer loop and its baselines
# ---------------------------------------------------------------------------

@dataclass
class RoundRecord:
    round: int
    start: int
    cumulative_demo_steps: int
    success_bits: str
    residual_inf: float
    overall_success: bool


@dataclass
class LoopResult:
    model: object
    theta_f: np.ndarray
    demos: DemoSet
    failures: DemoSet
    history: list

    def write_history(self, path):
        with open(path, "w") as f:
            f.write(HISTORY_HEADER + "\n")
            for rec in self.history:
                f.write(f"{rec.round},{rec.start},{rec.cumulative_demo_steps},"
                        f"{rec.success_bits},{rec.residual_inf!r}\n")


def select_start(mdp: TabularMdp, goal: int, rng: np.random.Generator,
                 exclude=(), min_distance_frac: float = 0.5) -> int:
    """Uniform draw over free states at least half the task diameter away."""
    dist = min_steps_to_goal(mdp, goal)
    reachable = dist[dist > 0]
    threshold = int(np.ceil(reachable.max() * min_distance_frac)) if reachable.size else 0
    candidates = [s for s in range(mdp.num_states)
                  if dist[s] >= threshold and dist[s] > 0 and s not in exclude]
    if not candidates:
        candidates = [s for s in range(mdp.num_states) if dist[s] > 0]
    return int(rng.choice(np.array(candidates)))


def hi_irl(mdp: TabularMdp, features: FeatureMatrix, initial_demos: DemoSet,
           expert, subgoals: SubgoalSet, rounds: int, model,
           config: IrlffConfig, step_thr: int, goal: int,
           rng: np.random.Generator, action_rule: str = "sample",
           goal_alternatives=(), start_selector=None) -> LoopResult:
    """Interactive loop: initial fit, then rollout / update / refit rounds."""
    if initial_demos.is_empty:
        raise InputError("at least one initial demonstration is required")
    demos = initial_demos
    failures = DemoSet.empty(mdp.num_states)
    fit = maxent_irl_fit(mdp, features, demos, model, config.maxent())
    model, theta_f = fit.model, zero_failure_weights(model)
    history = []
    for t in range(1, rounds + 1):
        if start_selector is not None:
            start = start_selector(t, rng)
        else:
            start = select_start(mdp, goal, rng)
        outcome = rollout(mdp, model, theta_f, features, subgoals, start, goal,
                          step_thr, rng, action_rule, config.horizon,
                          config.vi_tolerance, goal_alternatives)
        update = update_demo(outcome, expert, demos, failures)
        if update.pending:
            raise InputError("hi_irl requires an expert that answers immediately; "
                             "use the session service for live experts")
        demos, failures = update.demos, update.failures
        fit = irlff_fit(mdp, features, demos, failures, model, theta_f, config)
        model, theta_f = fit.model, fit.theta_f
        history.append(RoundRecord(
            round=t, start=start, cumulative_demo_steps=demos.total_steps,
            success_bits="".join("1" if r.succeeded else "0" for r in outcome.subtasks),
            residual_inf=fit.history[-1].residual_inf if fit.history else float("nan"),
            overall_success=outcome.overall_success))
    return LoopResult(model=model, theta_f=theta_f, demos=demos,
                      failures=failures, history=history)


def baseline_wos(mdp, features, initial_demos, expert, rounds, model, config,
                 step_thr, goal, rng, action_rule="sample", goal_alternatives=(),
                 start_selector=None) -> LoopResult:
    """Interaction without subgoals: one whole-task subtask, full demos on struggle."""
    return hi_irl(mdp, features, initial_demos, expert, SubgoalSet.empty(),
                  rounds, model, config, step_thr, goal, rng, action_rule,
                  goal_alternatives, start_selector)


def baseline_wr(mdp, features, initial_demos, expert, rounds, model, config,
                step_thr, goal, rng, action_rule="sample", goal_alternatives=(),
                subgoal_count: int = None, subgoal_rng=None,
                start_selector=None) -> LoopResult:
    """Interaction with uniformly drawn subgoals of the oracle set's size."""
    if subgoal_count is None:
        canonical = initial_demos.trajectories[0].start
        subgoal_count = len(oracle_subgoals(mdp, canonical, goal))
    goal_states = set(goal_alternatives) | {goal}
    subgoals = random_subgoals(mdp, goal_states, subgoal_count,
                               subgoal_rng if subgoal_rng is not None else rng)
    return hi_irl(mdp, features, initial_demos, expert, subgoals, rounds, model,
                  config, step_thr, goal, rng, action_rule, goal_alternatives,
                  start_selector)
