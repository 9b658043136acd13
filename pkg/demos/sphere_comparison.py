"""Solve one synthetic sphere scene with every method and compare errors."""

import sys

from linemanifold import Method, SceneSpec, SolveConfig, generate, solve
from linemanifold.metrics import align_trajectories, line_metrics, trajectory_metrics

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
truth, initial = generate(SceneSpec(archetype="sphere", seed=seed))
print(f"{len(initial.poses)} poses, {len(initial.points)} points, {len(initial.lines)} lines,",
      f"groups of sizes {[len(m) for m in initial.groups.values()]}")

start = trajectory_metrics(initial.poses, truth.poses)
print(f"initial ATE {start.ate_rmse:.3f} m\n")

print(f"{'method':24s} {'iters':>5s} {'cost':>10s} {'ATE m':>8s} {'dir med deg':>12s} {'time s':>7s}")
for method in Method:
    rep = solve(initial, SolveConfig(method=method))
    A = align_trajectories(rep.graph.poses, truth.poses)
    tm = trajectory_metrics(rep.graph.poses, truth.poses, A)
    lm = line_metrics(rep.graph.lines, truth.lines, A)
    direction = f"{lm.direction.median:12.4f}" if lm.ids else f"{'-':>12s}"
    print(f"{method.value:24s} {rep.iterations:5d} {rep.final_cost:10.1f} {tm.ate_rmse:8.4f} {direction} "
          f"{rep.wall_time:7.2f}")
