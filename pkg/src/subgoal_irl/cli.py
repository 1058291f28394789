"""Command-line surface: train, evaluate, compare, subgoals, serve, export-curves."""

import argparse
from pathlib import Path

import numpy as np

from .environments import build_from_layout
from .errors import SubgoalIrlError
from .harness import (ExperimentConfig, evaluate, export_curves, load_environment,
                      parse_experiment_config, resolve_eval_starts, run_comparison,
                      train_cell)
from .interaction import oracle_subgoals
from .layouts import load_carpark_layout, load_grid_layout
from .rewards import load_checkpoint, save_checkpoint


def _load_config(args) -> ExperimentConfig:
    cfg = parse_experiment_config(Path(args.config).read_text())
    if getattr(args, "env", None):
        cfg.env_path = args.env
    if getattr(args, "method", None):
        cfg.methods = (args.method,)
    if getattr(args, "seed", None) is not None:
        cfg.seeds = (args.seed,)
    cfg.validate()
    return cfg


def cmd_train(args):
    cfg = _load_config(args)
    built = load_environment(cfg)
    method = cfg.methods[0]
    seed = cfg.seeds[0]
    budget = cfg.demo_budgets[-1]
    outcome = train_cell(cfg, built, method, seed, budget)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ck = out / f"{method}_s{seed}.ck"
    save_checkpoint(ck, outcome.model, outcome.theta_f)
    log = out / f"{method}_s{seed}.log"
    outcome.last_fit.write_log(log)
    print(f"trained {method} (seed {seed}) on {cfg.env_path}: "
          f"{outcome.demo_steps} demonstration steps consumed")
    print(f"checkpoint: {ck}")
    print(f"training log: {log}")


def cmd_evaluate(args):
    cfg = _load_config(args)
    built = load_environment(cfg)
    model, theta_f = load_checkpoint(args.checkpoint)
    starts = resolve_eval_starts(cfg, built)
    horizon = cfg.horizon or built.default_horizon()
    mean, std, fails = evaluate(
        built.mdp, model, theta_f, built.features, starts,
        built.goal_alternatives, cfg.eval_cap or horizon, cfg.eval_reps,
        cfg.action_rule, np.random.default_rng([cfg.seeds[0], 3]), horizon,
        cfg.vi_tolerance)
    print(f"starts={len(starts)} reps={cfg.eval_reps} "
          f"mean_steps={mean:.3f} std={std:.3f} failures={fails}")


def cmd_compare(args):
    cfg = _load_config(args)
    points = run_comparison(cfg, args.out_dir)
    print(f"wrote {len(points)} curve points to {Path(args.out_dir) / 'curves.csv'}")


def cmd_subgoals(args):
    if args.env_kind == "carpark":
        built = build_from_layout(load_carpark_layout(args.env))
    else:
        built = build_from_layout(load_grid_layout(args.env))
    if built.start_state is None:
        raise SubgoalIrlError("layout has no canonical start (S) cell")
    subs = oracle_subgoals(built.mdp, built.start_state, built.goal_state)
    print(f"{len(subs)} oracle subgoal(s) for {args.env}:")
    for s in subs.states:
        if built.kind == "grid":
            print(f"  state {s} at cell {built.env.cell(s)}")
        else:
            print(f"  state {s} at (x, y, heading) {built.env.decompose(s)}")


def cmd_serve(args):
    import uvicorn

    from .service.app import create_app
    app = create_app(args.sessions_dir, frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")


def cmd_export_curves(args):
    points = export_curves(args.out_dir)
    print(f"rebuilt curves.csv from {len(points)} cell records")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="subgoal-irl",
        description="Reward learning from demonstrations with interactive "
                    "subgoal supervision")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one method and save a checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--env", help="override the config's layout path")
    p.add_argument("--method", choices=("maxent", "hiirl", "wos", "wr"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", default="runs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on held-out starts")
    p.add_argument("--config", required=True)
    p.add_argument("--env")
    p.add_argument("--seed", type=int)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="run the full four-method comparison")
    p.add_argument("--config", required=True)
    p.add_argument("--env")
    p.add_argument("--method", choices=("maxent", "hiirl", "wos", "wr"),
                   help="restrict the sweep to one method")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", default="runs")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("subgoals", help="print the oracle subgoals of a layout")
    p.add_argument("--env", required=True)
    p.add_argument("--env-kind", default="grid", choices=("grid", "carpark"))
    p.set_defaults(func=cmd_subgoals)

    p = sub.add_parser("serve", help="start the live session service")
    p.add_argument("--sessions-dir", default="sessions")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8642)
    p.add_argument("--frontend", default=None,
                   help="directory with the built web UI to serve at /")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export-curves", help="rebuild curves.csv from cell records")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_export_curves)

    args = parser.parse_args(argv)
    try:
        args.func(args)
    except SubgoalIrlError as err:
        parser.exit(2, f"error: {err}\n")
    return 0


if __name__ == "__main__":
    main()
