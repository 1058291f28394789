"""Batch experiment runner: four-method comparison and evaluation protocol.

A comparison sweeps (method, seed, demo-step budget) cells.  The offline
method trains on whole shortest-path demonstrations consumed from a seeded
pool until adding another trajectory would exceed the budget; interactive
methods start from a single pooled demonstration and run rounds until their
cumulative expert demonstration steps first reach the budget.  Every cell is
evaluated on the layout's held-out start cells and emitted as one CSV row.

All randomness is derived from the cell seed through fixed stream tags, so
same config + same seed reproduces byte-identical outputs.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .environments import BuiltEnv, build_from_layout
from .errors import ConfigError
from .interaction import (SimulatedExpert, SubgoalSet, oracle_subgoals,
                          random_subgoals, rollout, select_start, update_demo)
from .layouts import load_carpark_layout, load_grid_layout
from .mdp import DemoSet, min_steps_to_goal, shortest_path, soft_value_iteration
from .rewards import (ConvRewardNet, LinearReward, combined_reward,
                      default_carpark_net_config, default_grid_net_config,
                      save_checkpoint, zero_failure_weights)
from .training import IrlffConfig, irlff_fit, maxent_irl_fit

CSV_HEADER = "method,seed,demo_steps,test_steps_mean,test_steps_std,failures"
METHODS = ("maxent", "hiirl", "wos", "wr")

# rng stream tags (joined with the seed so cells never share streams)
_POOL, _LOOP, _EVAL, _SUBGOALS = 0, 2, 3, 4


@dataclass
class ExperimentConfig:
    env_path: str
    env_kind: str = "grid"
    methods: tuple = METHODS
    seeds: tuple = (0,)
    demo_budgets: tuple = (50,)
    step_thr: int = 4
    model: str = "linear"            # linear | conv
    alpha: float = 0.05
    iterations: int = 100
    horizon: int = 0                 # 0: use the environment default
    vi_tolerance: float = 1e-4
    lam: float = 10.0
    alpha_lambda: float = 0.97
    lambda_min: float = 1.0
    eval_reps: int = 5
    eval_cap: int = 0                # 0: use the horizon
    max_rounds: int = 40
    action_rule: str = "sample"
    eval_starts: tuple = ()          # cell/state overrides; default: layout E cells

    def validate(self):
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods: {bad}")
        if self.model not in ("linear", "conv"):
            raise ConfigError(f"unknown model kind {self.model!r}")
        if self.action_rule not in ("sample", "greedy"):
            raise ConfigError(f"unknown action rule {self.action_rule!r}")
        if any(b <= 0 for b in self.demo_budgets):
            raise ConfigError("demo budgets must be positive")
        if sorted(self.demo_budgets) != list(self.demo_budgets):
            raise ConfigError("demo budgets must be non-decreasing")


CONFIG_VERSION = 1

_LIST_KEYS = {"methods": str, "seeds": int, "demo_budgets": int}
_SCALAR_KEYS = {"env": str, "env_kind": str, "step_thr": int, "model": str,
                "alpha": float, "iterations": int, "horizon": int,
                "vi_tolerance": float, "lambda": float, "alpha_lambda": float,
                "lambda_min": float, "eval_reps": int, "eval_cap": int,
                "max_rounds": int, "action_rule": str}


def parse_experiment_config(text: str) -> ExperimentConfig:
    """Versioned key-value config: one `key value` pair per line, # comments."""
    kv = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise ConfigError(f"bad config line {raw!r}")
        kv[parts[0]] = parts[1].strip()
    if kv.get("version") != str(CONFIG_VERSION):
        raise ConfigError(f"config must declare 'version {CONFIG_VERSION}'")
    if "env" not in kv:
        raise ConfigError("config must name an env layout")
    args = {"env_path": kv["env"]}
    for key, cast in _LIST_KEYS.items():
        if key in kv:
            args[key] = tuple(cast(tok) for tok in kv[key].split(",") if tok)
    for key, cast in _SCALAR_KEYS.items():
        if key == "env" or key not in kv:
            continue
        name = {"lambda": "lam"}.get(key, key)
        args[name] = cast(kv[key])
    if "eval_starts" in kv:
        args["eval_starts"] = tuple(
            tuple(int(v) for v in tok.split(",")) for tok in kv["eval_starts"].split(";"))
    cfg = ExperimentConfig(**args)
    cfg.validate()
    return cfg


def load_environment(cfg: ExperimentConfig) -> BuiltEnv:
    if cfg.env_kind == "carpark":
        return build_from_layout(load_carpark_layout(cfg.env_path))
    return build_from_layout(load_grid_layout(cfg.env_path))


def resolve_eval_starts(cfg: ExperimentConfig, built: BuiltEnv):
    if cfg.eval_starts:
        env = built.env
        return tuple(env.state_of[tuple(c)] if built.kind == "grid"
                     else env.state_index(*c) for c in cfg.eval_starts)
    starts = tuple(built.env.eval_states)
    if not starts:
        raise ConfigError(f"{cfg.env_path}: layout annotates no evaluation starts")
    return starts


@dataclass
class CurvePoint:
    method: str
    seed: int
    demo_steps: int
    test_steps_mean: float
    test_steps_std: float
    failures: int

    def csv_row(self) -> str:
        return (f"{self.method},{self.seed},{self.demo_steps},"
                f"{self.test_steps_mean!r},{self.test_steps_std!r},{self.failures}")


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate(mdp, model, theta_f, features, starts, goal_alternatives, cap,
             reps=5, action_rule="sample", rng=None, horizon=48,
             vi_tolerance=1e-4):
    """Run the current policy from each start `reps` times, cap the episode
    length, score non-completions as `cap` steps."""
    if rng is None:
        rng = np.random.default_rng(0)
    reward = combined_reward(model, theta_f, features)
    policy = soft_value_iteration(mdp, reward, horizon, vi_tolerance)
    goal_set = set(goal_alternatives)
    steps_taken = []
    failures = 0
    for start in starts:
        for _ in range(reps):
            cur = int(start)
            steps = 0
            while cur not in goal_set and steps < cap:
                if action_rule == "greedy":
                    a = int(np.argmax(policy.probs[cur]))
                else:
                    a = int(rng.choice(mdp.num_actions, p=policy.probs[cur]))
                succ, probs = mdp.successors(cur, a)
                cur = int(succ[0]) if len(succ) == 1 else \
                    int(rng.choice(succ, p=probs / probs.sum()))
                steps += 1
            if cur in goal_set:
                steps_taken.append(steps)
            else:
                steps_taken.append(cap)
                failures += 1
    arr = np.array(steps_taken, dtype=float)
    return float(arr.mean()), float(arr.std()), failures


def meets_success_criterion(mdp, model, theta_f, features, starts,
                            goal_alternatives, step_thr, horizon,
                            vi_tolerance=1e-4, action_rule="sample", reps=5,
                            rng=None) -> bool:
    """Every held-out start completes within min_steps + step_thr.

    Runs the policy under the evaluation action rule (the sampled soft
    policy by default, `reps` repetitions per start); the greedy rule is
    available but degenerate on tabular rewards, where any goal-peaked
    reward is greedy-optimal regardless of the data.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    reward = combined_reward(model, theta_f, features)
    policy = soft_value_iteration(mdp, reward, horizon, vi_tolerance)
    goal_set = set(goal_alternatives)
    dists = {g: min_steps_to_goal(mdp, g) for g in goal_alternatives}
    for start in starts:
        best = min(d[start] for d in dists.values() if d[start] >= 0)
        for _ in range(reps if action_rule == "sample" else 1):
            cur = int(start)
            steps = 0
            while cur not in goal_set and steps < best + step_thr:
                if action_rule == "greedy":
                    a = int(np.argmax(policy.probs[cur]))
                else:
                    a = int(rng.choice(mdp.num_actions, p=policy.probs[cur]))
                succ, probs = mdp.successors(cur, a)
                cur = int(succ[0]) if len(succ) == 1 else \
                    int(rng.choice(succ, p=probs / probs.sum()))
                steps += 1
            if cur not in goal_set:
                return False
    return True


# ---------------------------------------------------------------------------
# demonstration pools
# ---------------------------------------------------------------------------

def demo_pool(mdp, goal, exclude, rng, max_trajectories=500):
    """Seeded stream of whole shortest-path demonstrations from random starts."""
    dist = min_steps_to_goal(mdp, goal)
    candidates = np.array([s for s in range(mdp.num_states)
                           if dist[s] > 0 and s not in exclude])
    pool = []
    for _ in range(max_trajectories):
        start = int(rng.choice(candidates))
        pool.append(shortest_path(mdp, start, goal))
    return pool


def consume_budget(pool, budget):
    """Whole trajectories until adding another would exceed the budget."""
    taken, steps = [], 0
    for traj in pool:
        if steps + traj.num_moves > budget:
            break
        taken.append(traj)
        steps += traj.num_moves
    return taken, steps


# ---------------------------------------------------------------------------
# per-cell training
# ---------------------------------------------------------------------------

def _fresh_model(cfg: ExperimentConfig, built: BuiltEnv, seed: int):
    if cfg.model == "linear":
        return LinearReward(built.features.feature_dim)
    if built.kind == "carpark":
        net_cfg = default_carpark_net_config(built.env.image_shape,
                                             built.env.extra_dim, seed=seed)
    else:
        net_cfg = default_grid_net_config(built.env.image_shape, seed=seed)
    return ConvRewardNet(net_cfg)


def _irlff_config(cfg: ExperimentConfig, horizon: int) -> IrlffConfig:
    return IrlffConfig(alpha=cfg.alpha, lam=cfg.lam, alpha_lambda=cfg.alpha_lambda,
                       lambda_min=cfg.lambda_min, iterations=cfg.iterations,
                       horizon=horizon, vi_tolerance=cfg.vi_tolerance)


def _method_subgoals(method, built, initial_start, seed):
    if method == "wos":
        return SubgoalSet.empty()
    if method == "hiirl":
        if built.env.subgoal_groups:
            return SubgoalSet(slots=built.env.subgoal_groups, source="human")
        return oracle_subgoals(built.mdp, initial_start, built.goal_state)
    if method == "wr":
        oracle = oracle_subgoals(built.mdp, initial_start, built.goal_state)
        count = max(len(oracle), 1)
        goal_states = set(built.goal_alternatives)
        return random_subgoals(built.mdp, goal_states, count,
                               np.random.default_rng([seed, _SUBGOALS]))
    raise ConfigError(f"method {method!r} has no subgoal rule")


@dataclass
class TrainOutcome:
    model: object
    theta_f: np.ndarray
    demo_steps: int
    last_fit: object  # FitResult of the final fitting call

    def __iter__(self):
        # unpacking convenience: model, theta_f, demo_steps = train_cell(...)
        return iter((self.model, self.theta_f, self.demo_steps))


def train_cell(cfg: ExperimentConfig, built: BuiltEnv, method: str, seed: int,
               budget: int) -> TrainOutcome:
    """Train one (method, seed, budget) cell of the comparison."""
    horizon = cfg.horizon or built.default_horizon()
    eval_starts = resolve_eval_starts(cfg, built)
    mdp, features = built.mdp, built.features
    pool_rng = np.random.default_rng([seed, _POOL])
    pool = demo_pool(mdp, built.goal_state, set(eval_starts), pool_rng)
    model = _fresh_model(cfg, built, seed)

    if method == "maxent":
        demos_list, steps = consume_budget(pool, budget)
        if not demos_list:
            raise ConfigError(
                f"budget {budget} below the first pooled demonstration length")
        demos = DemoSet.from_trajectories(demos_list, mdp.num_states)
        fit = maxent_irl_fit(mdp, features, demos,
                             model, _irlff_config(cfg, horizon).maxent())
        return TrainOutcome(fit.model, zero_failure_weights(fit.model), steps, fit)

    initial = DemoSet.from_trajectories([pool[0]], mdp.num_states)
    subgoals = _method_subgoals(method, built, pool[0].start, seed)
    loop_rng = np.random.default_rng([seed, _LOOP])
    expert = SimulatedExpert(mdp)
    irlff_cfg = _irlff_config(cfg, horizon)

    demos, failures = initial, DemoSet.empty(mdp.num_states)
    fit = maxent_irl_fit(mdp, features, demos, model, irlff_cfg.maxent())
    model, theta_f = fit.model, zero_failure_weights(fit.model)
    rounds = 0
    while demos.total_steps < budget and rounds < cfg.max_rounds:
        rounds += 1
        start = select_start(mdp, built.goal_state, loop_rng)
        outcome = rollout(mdp, model, theta_f, features, subgoals, start,
                          built.goal_state, cfg.step_thr, loop_rng,
                          cfg.action_rule, horizon, cfg.vi_tolerance,
                          built.goal_alternatives)
        update = update_demo(outcome, expert, demos, failures)
        demos, failures = update.demos, update.failures
        fit = irlff_fit(mdp, features, demos, failures, model, theta_f, irlff_cfg)
        model, theta_f = fit.model, fit.theta_f
    return TrainOutcome(model, theta_f, demos.total_steps, fit)


def run_comparison(cfg: ExperimentConfig, out_dir) -> list:
    """All cells of the comparison; merged deterministically by sorted cell key."""
    cfg.validate()
    built = load_environment(cfg)
    eval_starts = resolve_eval_starts(cfg, built)
    horizon = cfg.horizon or built.default_horizon()
    cap = cfg.eval_cap or horizon
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    points = []
    for method in sorted(cfg.methods):
        for seed in sorted(cfg.seeds):
            for budget in sorted(cfg.demo_budgets):
                model, theta_f, steps = train_cell(cfg, built, method, seed, budget)
                mean, std, fails = evaluate(
                    built.mdp, model, theta_f, built.features, eval_starts,
                    built.goal_alternatives, cap, cfg.eval_reps, cfg.action_rule,
                    np.random.default_rng([seed, _EVAL]), horizon,
                    cfg.vi_tolerance)
                point = CurvePoint(method=method, seed=seed, demo_steps=steps,
                                   test_steps_mean=mean, test_steps_std=std,
                                   failures=fails)
                points.append(point)
                cell = f"{method}_s{seed}_b{budget}"
                save_checkpoint(out_dir / f"{cell}.ck", model, theta_f)
                (out_dir / f"{cell}.json").write_text(json.dumps({
                    "method": method, "seed": seed, "budget": budget,
                    "demo_steps": steps, "test_steps_mean": mean,
                    "test_steps_std": std, "failures": fails}, sort_keys=True))
    write_curves(out_dir / "curves.csv", points)
    return points


def write_curves(path, points):
    with open(path, "w") as f:
        f.write(CSV_HEADER + "\n")
        for p in points:
            f.write(p.csv_row() + "\n")


def read_curves(path) -> list:
    lines = Path(path).read_text().strip().split("\n")
    if lines[0] != CSV_HEADER:
        raise ConfigError(f"{path}: unexpected CSV header")
    points = []
    for line in lines[1:]:
        method, seed, steps, mean, std, fails = line.split(",")
        points.append(CurvePoint(method=method, seed=int(seed),
                                 demo_steps=int(steps),
                                 test_steps_mean=float(mean),
                                 test_steps_std=float(std),
                                 failures=int(fails)))
    return points


def export_curves(out_dir) -> list:
    """Rebuild the merged CSV from per-cell JSON records."""
    out_dir = Path(out_dir)
    cells = []
    for path in sorted(out_dir.glob("*_s*_b*.json")):
        rec = json.loads(path.read_text())
        cells.append(CurvePoint(method=rec["method"], seed=rec["seed"],
                                demo_steps=rec["demo_steps"],
                                test_steps_mean=rec["test_steps_mean"],
                                test_steps_std=rec["test_steps_std"],
                                failures=rec["failures"]))
    cells.sort(key=lambda p: (p.method, p.seed, p.demo_steps))
    write_curves(out_dir / "curves.csv", cells)
    return cells


def demo_steps_to_success(cfg: ExperimentConfig, built: BuiltEnv, method: str,
                          seed: int, max_budget: int = 10_000):
    """Cumulative expert demonstration steps when the success criterion first
    holds, or None if it never does within the round/budget caps."""
    horizon = cfg.horizon or built.default_horizon()
    eval_starts = resolve_eval_starts(cfg, built)
    mdp, features = built.mdp, built.features
    pool = demo_pool(mdp, built.goal_state, set(eval_starts),
                     np.random.default_rng([seed, _POOL]))
    irlff_cfg = _irlff_config(cfg, horizon)

    def succeeded(model, theta_f):
        return meets_success_criterion(mdp, model, theta_f, features, eval_starts,
                                       built.goal_alternatives, cfg.step_thr,
                                       horizon, cfg.vi_tolerance,
                                       action_rule=cfg.action_rule,
                                       rng=np.random.default_rng([seed, _EVAL]))

    if method == "maxent":
        demos_list, steps = [], 0
        for traj in pool:
            demos_list.append(traj)
            steps += traj.num_moves
            if steps > max_budget:
                return None
            model = _fresh_model(cfg, built, seed)
            fit = maxent_irl_fit(mdp, features,
                                 DemoSet.from_trajectories(demos_list, mdp.num_states),
                                 model, irlff_cfg.maxent())
            if succeeded(fit.model, zero_failure_weights(fit.model)):
                return steps
        return None

    model = _fresh_model(cfg, built, seed)
    demos = DemoSet.from_trajectories([pool[0]], mdp.num_states)
    failures = DemoSet.empty(mdp.num_states)
    subgoals = _method_subgoals(method, built, pool[0].start, seed)
    loop_rng = np.random.default_rng([seed, _LOOP])
    expert = SimulatedExpert(mdp)
    fit = maxent_irl_fit(mdp, features, demos, model, irlff_cfg.maxent())
    model, theta_f = fit.model, zero_failure_weights(fit.model)
    if succeeded(model, theta_f):
        return demos.total_steps
    for _ in range(cfg.max_rounds):
        start = select_start(mdp, built.goal_state, loop_rng)
        outcome = rollout(mdp, model, theta_f, features, subgoals, start,
                          built.goal_state, cfg.step_thr, loop_rng,
                          cfg.action_rule, horizon, cfg.vi_tolerance,
                          built.goal_alternatives)
        update = update_demo(outcome, expert, demos, failures)
        demos, failures = update.demos, update.failures
        fit = irlff_fit(mdp, features, demos, failures, model, theta_f, irlff_cfg)
        model, theta_f = fit.model, fit.theta_f
        if succeeded(model, theta_f):
            return demos.total_steps
        if demos.total_steps > max_budget:
            return None
    return None
