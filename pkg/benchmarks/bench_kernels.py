#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the numpy fallback.

Runs the two hot kernels (soft Bellman sweeps, occupancy propagation) on the
bundled 32x32 grid and the ~5k-state car park, timing both backends on
identical inputs and checking they agree.

    python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from subgoal_irl.environments import build_from_layout
from subgoal_irl.kernels import _npcore
from subgoal_irl.layouts import load_carpark_layout, load_grid_layout

try:
    from subgoal_irl.kernels import _ccore
except ImportError:
    _ccore = None


def bench(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run_case(name, built, horizon, repeats):
    mdp = built.mdp
    rng = np.random.default_rng(0)
    reward = rng.normal(size=mdp.num_states)
    args = (mdp.indptr, mdp.succ_states, mdp.succ_probs)
    p0 = np.zeros(mdp.num_states)
    p0[built.start_state] = 1.0

    rows = []
    t_np, (pol_np, _, _) = bench(
        lambda: _npcore.soft_value_iteration(reward, mdp.discount, horizon, 0.0,
                                             *args, mdp.num_actions), repeats)
    rows.append(("soft_value_iteration", "numpy", t_np, ""))
    if _ccore is not None:
        t_c, (pol_c, _, _) = bench(
            lambda: _ccore.soft_value_iteration(reward, mdp.discount, horizon, 0.0,
                                                *args, mdp.num_actions), repeats)
        assert np.max(np.abs(pol_c - pol_np)) < 1e-12
        rows.append(("soft_value_iteration", "cython", t_c, f"{t_np / t_c:.1f}x"))

    t_np, per_np = bench(
        lambda: _npcore.propagate_visitation(p0, pol_np, horizon, *args), repeats)
    rows.append(("propagate_visitation", "numpy", t_np, ""))
    if _ccore is not None:
        t_c, per_c = bench(
            lambda: _ccore.propagate_visitation(p0, pol_np, horizon, *args), repeats)
        assert np.max(np.abs(per_c - per_np)) < 1e-12
        rows.append(("propagate_visitation", "cython", t_c, f"{t_np / t_c:.1f}x"))

    print(f"\n{name}: {mdp.num_states} states x {mdp.num_actions} actions, "
          f"horizon {horizon}")
    for kernel, backend, seconds, speedup in rows:
        print(f"  {kernel:22s} {backend:7s} {seconds * 1e3:9.2f} ms  {speedup}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    if _ccore is None:
        print("compiled core not built; timing the numpy fallback only")
    grid = build_from_layout(load_grid_layout("grid32_rooms.txt"))
    run_case("grid32_rooms", grid, grid.default_horizon(), args.repeats)
    park = build_from_layout(load_carpark_layout("carpark20x16.cfg"))
    run_case("carpark20x16", park, park.default_horizon(), args.repeats)


if __name__ == "__main__":
    main()
