"""Command-line front end: ``gen``, ``train``, ``solve``, ``bench`` and ``plot``.

Exit codes: 0 success, 2 invalid arguments, 3 infeasible instance,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import energy
from .errors import (
    ChargingError,
    DeadEndError,
    InfeasibleInstanceError,
    InfeasibleRouteError,
    InvalidParameterError,
    NumericalFailureError,
    SizeLimitError,
    TimeLimitExceeded,
)
from .routing import (
    evaluate,
    generate_instance,
    load_instance,
    load_solution,
    save_instance,
    save_solution,
)
from .solvers import Solver, classical_solvers, optional_deadline

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4
BENCH_COLUMNS = ["solver", "mean_cost_h", "mean_time_s", "solved", "total"]
NEURAL = ("greedy", "sample", "beam")

log = logging.getLogger("uavwpt")


class UsageError(Exception):
    pass


@dataclass
class BenchRow:
    solver: str
    mean_cost_h: float
    mean_time_s: float
    solved: int
    total: int


def parse_solver_spec(spec: str):
    """'sample:128' -> ('sample', 128); plain names give (name, None)."""
    name, _, arg = spec.partition(":")
    if name in ("sample", "beam"):
        if not arg:
            raise UsageError(f"solver {name!r} needs a count, e.g. {name}:16")
        try:
            value = int(arg)
        except ValueError:
            raise UsageError(f"bad solver argument in {spec!r}") from None
        if value < 1:
            raise UsageError(f"solver argument must be >= 1 in {spec!r}")
        return name, value
    if arg or name not in ("greedy", "nn", "cw", "cw+ls", "oracle"):
        raise UsageError(f"unknown solver {spec!r}")
    return name, None


def make_solver(spec: str, uav, wpt, checkpoint=None, seed=None,
                include_final_recharge=False) -> Solver:
    name, arg = parse_solver_spec(spec)
    if name not in NEURAL:
        return Solver(spec, classical_solvers(uav, wpt, include_final_recharge)[name].solve)
    if checkpoint is None:
        raise UsageError(f"solver {spec!r} needs --checkpoint")
    from . import decoding
    from .policy import load_checkpoint

    model = load_checkpoint(checkpoint)
    kw = dict(uav=uav, wpt=wpt, include_final_recharge=include_final_recharge)
    if name == "greedy":
        def solve(inst, deadline=None):
            return decoding.greedy_decode(inst, model, **kw)
    elif name == "beam":
        def solve(inst, deadline=None):
            return decoding.beam_search(inst, model, arg, deadline=deadline, **kw)
    else:
        if seed is None:
            raise UsageError("sampling solvers need --seed")

        def solve(inst, deadline=None):
            rng = np.random.default_rng([seed, int(inst.seed or 0)])
            return decoding.sample_decode(inst, model, arg, rng, deadline=deadline, **kw)
    return Solver(spec, solve)


# -- subcommands ----------------------------------------------------------------

def cmd_gen(args, uav, wpt):
    if args.seed is None:
        raise UsageError("gen needs --seed")
    if args.count < 0 or args.n < 1:
        raise UsageError("need --count >= 0 and --n >= 1")
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    seeds = np.random.default_rng(args.seed).integers(0, 2**31 - 1, size=args.count)
    width = max(4, len(str(args.count)))
    for i, s in enumerate(seeds):
        inst = generate_instance(args.n, args.side_km, int(s), uav=uav)
        save_instance(inst, out / f"instance_{i:0{width}d}.json")
    print(f"wrote {args.count} instances to {out}")


def cmd_train(args, uav, wpt):
    from .policy import save_checkpoint
    from .trainer import TrainConfig, train

    if args.seed is None:
        raise UsageError("train needs --seed")
    base = TrainConfig.from_file(args.config).to_dict() if args.config else {}
    overrides = {"epochs": args.epochs, "steps_per_epoch": args.steps_per_epoch,
                 "batch_size": args.batch_size, "n": args.n, "lr": args.lr,
                 "side_km": args.side_km, "val_size": args.val_size}
    base.update({k: v for k, v in overrides.items() if v is not None})
    base["seed"] = args.seed
    config = TrainConfig(**base)
    out = Path(args.out or "model.ckpt")
    model, report = train(config, uav, wpt, log_csv=args.log, checkpoint_path=out)
    save_checkpoint(model, out)
    print(f"trained {config.epochs * config.steps_per_epoch} steps in {report.wall_time:.1f} s; "
          f"final validation cost {report.val_cost_main[-1]:.4f} h; checkpoint {out}")


def cmd_solve(args, uav, wpt):
    inst = load_instance(args.instance)
    solver = make_solver(args.solver, uav, wpt, args.checkpoint, args.seed,
                         args.include_final_recharge)
    t0 = time.perf_counter()
    sol = solver.solve(inst)
    elapsed = time.perf_counter() - t0
    cost, _ = evaluate(inst, sol, uav, wpt, args.include_final_recharge)
    out = Path(args.out or "solution.json")
    save_solution(sol, cost, out)
    print(f"{solver.name}: total {cost.total:.6f} h (fly {cost.t_fly:.6f} h, "
          f"hover {cost.t_hover:.6f} h), K={cost.K}, time {elapsed:.3f} s -> {out}")


def run_bench(instances, solvers, time_limit, uav, wpt, include_final_recharge=False):
    """Every solver on every instance; timing covers solve() only."""
    rows = []
    for solver in solvers:
        costs, times = [], []
        for inst in instances:
            t0 = time.perf_counter()
            try:
                sol = solver.solve(inst, deadline=optional_deadline(time_limit))
            except TimeLimitExceeded:
                continue
            elapsed = time.perf_counter() - t0
            if time_limit is not None and elapsed > time_limit:
                continue
            costs.append(evaluate(inst, sol, uav, wpt, include_final_recharge)[0].total)
            times.append(elapsed)
        rows.append(BenchRow(solver.name,
                             float(np.mean(costs)) if costs else math.nan,
                             float(np.mean(times)) if times else math.nan,
                             len(costs), len(instances)))
    return rows


def bench_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    for r in rows:
        w.writerow([r.solver, f"{r.mean_cost_h:.6f}", f"{r.mean_time_s:.6f}", r.solved, r.total])
    return buf.getvalue()


def bench_table(csv_text: str) -> str:
    """Aligned plain-text rendering of the benchmark CSV."""
    rows = list(csv.reader(io.StringIO(csv_text)))
    headers = ["Solver", "Cost/h", "Time/s", "Solved", "Total"]
    body = [headers] + rows[1:]
    widths = [max(len(r[i]) for r in body) for i in range(len(headers))]
    lines = []
    for k, r in enumerate(body):
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells))
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def cmd_bench(args, uav, wpt):
    files = sorted(Path(args.instances).glob("*.json"))
    if not files:
        raise UsageError(f"no instance files in {args.instances}")
    instances = [load_instance(f) for f in files]
    specs = [s.strip() for s in args.solvers.split(",") if s.strip()]
    if not specs:
        raise UsageError("empty --solvers list")
    solvers = [make_solver(s, uav, wpt, args.checkpoint, args.seed, args.include_final_recharge)
               for s in specs]
    rows = run_bench(instances, solvers, args.time_limit, uav, wpt, args.include_final_recharge)
    text = bench_csv(rows)
    table = bench_table(text)
    out = Path(args.out or "bench.csv")
    out.write_text(text, encoding="utf-8")
    out.with_suffix(".txt").write_text(table, encoding="utf-8")
    print(table, end="")


def cmd_plot(args, uav, wpt):
    from .plotting import plot_solution

    inst = load_instance(args.instance)
    sol, _ = load_solution(args.solution)
    if any(not 0 <= i <= inst.n for i in sol.route):
        raise UsageError("solution does not match the instance")
    cost, _ = evaluate(inst, sol, uav, wpt, args.include_final_recharge)
    out = Path(args.out or "solution.svg")
    plot_solution(inst, sol, cost, out, uav)
    print(f"wrote {out}")


# -- argument parsing ---------------------------------------------------------------

def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--uav-params", default=default, help="UAV parameter JSON file")
    parser.add_argument("--wpt-params", default=default, help="wireless link parameter JSON file")
    parser.add_argument("--seed", type=int, default=default, help="random seed")
    parser.add_argument("--out", default=default, help="output path")
    parser.add_argument("--include-final-recharge", action="store_true",
                        default=argparse.SUPPRESS if suppress else False,
                        help="charge after the final return as well")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavwpt", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate random instances")
    p.add_argument("--n", type=int, default=20, help="task nodes per instance")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--side-km", type=float, default=8.0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", parents=[common], help="train the attention policy")
    p.add_argument("--config", help="training config JSON")
    p.add_argument("--epochs", type=int)
    p.add_argument("--steps-per-epoch", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--side-km", type=float)
    p.add_argument("--val-size", type=int)
    p.add_argument("--log", help="per-epoch CSV log")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("solve", parents=[common], help="solve one instance file")
    p.add_argument("instance")
    p.add_argument("--solver", default="cw",
                   help="greedy | sample:K | beam:W | nn | cw | cw+ls | oracle")
    p.add_argument("--checkpoint")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", parents=[common], help="benchmark solvers on a directory")
    p.add_argument("instances")
    p.add_argument("--solvers", default="nn,cw,cw+ls")
    p.add_argument("--time-limit", type=float, default=1000.0, help="seconds per instance")
    p.add_argument("--checkpoint")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", parents=[common], help="render a solution as SVG")
    p.add_argument("instance")
    p.add_argument("solution")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        uav = energy.load_uav_params(args.uav_params)
        wpt = energy.load_wpt_params(args.wpt_params)
        args.func(args, uav, wpt)
    except (UsageError, InvalidParameterError, SizeLimitError, ChargingError,
            FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleInstanceError, InfeasibleRouteError, DeadEndError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
