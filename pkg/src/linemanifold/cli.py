"""Command line: ``generate``, ``optimize``, ``evaluate``, ``compare``, ``count``.

Exit status is 0 on success, 1 for invalid input (files, configuration,
graph validation) and 2 when the solver fails.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import replace
from pathlib import Path

from .graph import GraphValidationError, GroundTruth
from .graph_io import ConfigError, GraphFormatError, load_graph, read_config, save_graph
from .metrics import InsufficientDataError, align_trajectories, cdf, line_metrics, trajectory_metrics
from .solver import Method, SingularSystemError, SolveConfig, assemble, lm_solve
from .synth import GenerationError, generate

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2


class _Invalid(Exception):
    pass


def _config(path) -> tuple[SolveConfig, object]:
    if path is None:
        return read_config("")
    return read_config(Path(path).read_text(encoding="utf-8"))


def _sibling(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    return repr(float(x))


def cmd_generate(a) -> int:
    _, scene = _config(a.spec)
    if a.seed is not None:
        scene = replace(scene, seed=a.seed)
    gt, graph = generate(scene)
    save_graph(a.out, graph, gt)
    print(f"wrote {a.out}: {len(graph.poses)} poses, {len(graph.points)} points, "
          f"{len(graph.lines)} lines, {len(graph.groups)} groups")
    return EXIT_OK


def _trace_rows(rep):
    rows = [(0, _fmt(rep.costs[0]), 1, "")]
    for k, (c, ok, mu) in enumerate(zip(rep.costs[1:], rep.accepted, rep.damping), start=1):
        rows.append((k, _fmt(c), int(ok), _fmt(mu)))
    return rows


def cmd_optimize(a) -> int:
    cfg, _ = _config(a.config)
    if a.method:
        cfg = replace(cfg, method=Method.parse(a.method))
    graph, gt = load_graph(a.graph)
    rep = lm_solve(assemble(graph, cfg))
    save_graph(a.out, rep.graph, gt)
    if a.trace:
        _write_csv(Path(a.trace), ("iteration", "cost", "accepted", "damping"), _trace_rows(rep))
    print(f"{cfg.method.value}: cost {rep.initial_cost:.6g} -> {rep.final_cost:.6g} "
          f"in {rep.iterations} iterations ({rep.termination})")
    return EXIT_OK


def _truth(path) -> GroundTruth:
    g, gt = load_graph(path)
    if gt is not None:
        return gt
    return GroundTruth(poses=g.poses, points=g.points, lines=g.lines, groups=g.groups)


SUMMARY_HEADER = (
    "ate_rmse_m", "ate_median_m", "rot_rmse_deg", "rot_median_deg",
    "line_dir_mean_deg", "line_dir_median_deg", "line_dir_std_deg", "line_dir_rmse_deg",
    "line_normal_mean_deg", "line_normal_median_deg", "line_normal_std_deg", "line_normal_rmse_deg",
    "lines_evaluated", "lines_excluded",
)


def _summary(est_graph, gt: GroundTruth):
    A = align_trajectories(est_graph.poses, gt.poses)
    tm = trajectory_metrics(est_graph.poses, gt.poses, A)
    lm = line_metrics(est_graph.lines, gt.lines, A)
    d, n = lm.direction, lm.normal
    row = [tm.ate_rmse, tm.ate_median, tm.rot_rmse, tm.rot_median,
           d.mean, d.median, d.std, d.rmse, n.mean, n.median, n.std, n.rmse]
    return [_fmt(x) for x in row] + [len(lm.ids), lm.excluded], lm


def cmd_evaluate(a) -> int:
    est, _ = load_graph(a.estimate)
    gt = _truth(a.gt)
    row, lm = _summary(est, gt)
    out = Path(a.out)
    _write_csv(out, SUMMARY_HEADER, [row])
    _write_csv(
        _sibling(out, "_lines.csv"),
        ("line_id", "direction_error_deg", "normal_error_deg"),
        [(i, _fmt(e), _fmt(m)) for i, e, m in zip(lm.ids, lm.direction_errors, lm.normal_errors)],
    )
    for name, errs in (("direction", lm.direction_errors), ("normal", lm.normal_errors)):
        x, f = cdf(errs)
        _write_csv(_sibling(out, f"_cdf_{name}.csv"), ("error_deg", "cumulative_fraction"),
                   [(_fmt(e), _fmt(c)) for e, c in zip(x, f)])
    print(f"ATE RMSE {float(row[0]):.6g} m, rotation RMSE {float(row[2]):.6g} deg, "
          f"{len(lm.ids)} lines evaluated")
    return EXIT_OK


def cmd_compare(a) -> int:
    cfg, _ = _config(a.config)
    methods = [Method.parse(m.strip()) for m in a.methods.split(",") if m.strip()]
    if not methods:
        raise _Invalid("no methods given")
    graph, gt = load_graph(a.graph)
    if a.gt:
        gt = _truth(a.gt)
    header = ["method", "initial_cost", "final_cost", "iterations", "termination"]
    if gt is not None:
        header += list(SUMMARY_HEADER)
    rows, timing = [], []
    for m in methods:
        t0 = time.perf_counter()
        rep = lm_solve(assemble(graph, replace(cfg, method=m)))
        timing.append((m.value, time.perf_counter() - t0))
        row = [m.value, _fmt(rep.initial_cost), _fmt(rep.final_cost), rep.iterations, rep.termination]
        if gt is not None:
            row += _summary(rep.graph, gt)[0]
        rows.append(row)
        print(f"{m.value}: cost {rep.initial_cost:.6g} -> {rep.final_cost:.6g}")
    out = Path(a.out)
    _write_csv(out, header, rows)
    with open(_sibling(out, "_timing.txt"), "w", encoding="utf-8") as f:
        for name, secs in timing:
            f.write(f"{name} {secs:.6f} s\n")
    return EXIT_OK


def cmd_count(a) -> int:
    graph, _ = load_graph(a.graph)
    cfg = replace(SolveConfig(), method=Method.parse(a.method))
    c = assemble(graph, cfg).census()
    print(f"method {cfg.method.value}")
    for k in ("parameter_blocks", "effective_parameters", "residual_blocks", "residuals"):
        print(f"{k} {c[k]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="linemanifold", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("generate", help="synthesize a scene and write its graph")
    s.add_argument("--spec", help="key = value scene configuration (defaults if omitted)")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("optimize", help="run Levenberg-Marquardt on a graph")
    s.add_argument("--graph", required=True)
    s.add_argument("--config")
    s.add_argument("--method", help="override the configured method")
    s.add_argument("--out", required=True)
    s.add_argument("--trace", help="CSV of per-iteration cost")
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("evaluate", help="trajectory and line errors against ground truth")
    s.add_argument("--estimate", required=True)
    s.add_argument("--gt", required=True, help="graph file; its GT section is used when present")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("compare", help="solve one graph with several methods")
    s.add_argument("--graph", required=True)
    s.add_argument("--methods", default=",".join(m.value for m in Method))
    s.add_argument("--config")
    s.add_argument("--gt")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("count", help="parameter and residual census")
    s.add_argument("--graph", required=True)
    s.add_argument("--method", required=True)
    s.set_defaults(func=cmd_count)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SingularSystemError as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (GraphFormatError, ConfigError, GraphValidationError, GenerationError,
            InsufficientDataError, _Invalid, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
