"""Command-line front end: ``mergecoord <command> [flags]``.

Exit codes: 0 success, 2 invalid input or configuration, 3 enumeration
budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (
    DEFAULT_G,
    histogram_of_solutions,
    mc_special_case,
    rank_of,
    special_case_probability,
)
from .model import ConfigError, ContractViolation, Movement, Params, Scenario, Vehicle, \
    load_params, validate_config
from .scheduling import BudgetExceededError, check_budget, evaluate_all
from .sim import InfeasibleRateError, check_rate, simulate, timing_curve
from .strategies import DEFAULT_BUDGET, Strategy, solve_grouping

log = logging.getLogger("mergecoord")

EXIT_OK, EXIT_INVALID, EXIT_BUDGET = 0, 2, 3

REPLAN_COLUMNS = ("sim_time_s", "n_vehicles", "strategy", "J", "plan_wallclock_ms")
ALIGN_COLUMNS = ("scenario", "lambda", "sim_time_s", "n_vehicles", "n1", "n2", "total_orders",
                 "grouping_J", "grouping_rank", "top_fraction")
CURVE_COLUMNS = ("n_vehicles", "g", "scenarios", "alignment_probability")
HIST_COLUMNS = ("bin_lower", "bin_upper", "count")
MARK_COLUMNS = ("strategy", "J", "rank", "total_orders", "top_fraction")
TIMING_COLUMNS = ("strategy", "n_vehicles", "samples", "mean_plan_wallclock_ms")
COMPARE_COLUMNS = ("lambda", "strategy", "average_delay_s", "average_vehicle_count",
                   "completed", "average_plan_wallclock_ms")


def f6(x: float) -> str:
    return f"{x:.6f}"


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_kv(path: Path, items: dict) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for k, v in items.items():
            fh.write(f"{k} = {v}\n")


def _write_manifest(out: Path, args: argparse.Namespace, params: Params) -> None:
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    manifest = {
        "command": args.command,
        "flags": flags,
        "params": params.to_dict(),
        "seed": getattr(args, "seed", None),
        "output_directory": str(out),
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")


def _params(args: argparse.Namespace) -> Params:
    params = load_params(args.config) if getattr(args, "config", None) else Params()
    problems = validate_config(params)
    if problems:
        raise ConfigError(problems)
    return params


def _outdir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _lane_scenario(n1: int, n2: int, lam: float, params: Params, seed: int) -> Scenario:
    """``n1`` main and ``n2`` ramp arrivals at ``v_max`` sitting at the zone entry."""
    check_rate(lam, params)
    rng = np.random.default_rng(seed)
    scale = 1.0 / lam - params.dt1
    tagged = []
    for mov, n in ((Movement.MAIN, n1), (Movement.RAMP, n2)):
        tagged += [(t, int(mov)) for t in np.cumsum(params.dt1 + rng.exponential(scale, n))]
    tagged.sort()
    lead = params.L / params.v_max
    return Scenario(params, tuple(Vehicle(i + 1, Movement(m), float(t) + lead, float(t),
                                          params.L, params.v_max)
                                  for i, (t, m) in enumerate(tagged)))


def cmd_simulate(args: argparse.Namespace) -> int:
    params = _params(args)
    out = _outdir(args)
    report = simulate(args.lambda1, args.lambda2, args.duration, args.strategy, params,
                      args.seed, dt_sim=args.dt_sim)
    _write_csv(out / "replan_log.csv", REPLAN_COLUMNS,
               ([f6(r.sim_time), r.n_vehicles, args.strategy, f6(r.J), f6(r.plan_wallclock_ms)]
                for r in report.log))
    _write_csv(out / "vehicles.csv",
               ("id", "movement", "entry_time_s", "t_min_entry_s", "t_assign_s", "delay_s"),
               ([e.id, e.movement.name.lower(), f6(e.entry_time), f6(e.t_min_entry),
                 f6(e.t_assign), f6(e.delay)] for e in report.exits))
    summary = {
        "strategy": args.strategy,
        "lambda1": f6(args.lambda1),
        "lambda2": f6(args.lambda2),
        "duration_s": f6(args.duration),
        "seed": args.seed,
        "completed_vehicles": len(report.exits),
        "replans": len(report.log),
        "frozen_events": report.frozen_events,
        "average_delay": f6(report.average_delay),
        "average_vehicle_count": f6(report.average_vehicle_count),
        "average_plan_wallclock_ms": f6(report.average_plan_time),
    }
    _write_kv(out / "summary.txt", summary)
    _write_manifest(out, args, params)
    for k in ("average_delay", "average_plan_wallclock_ms", "average_vehicle_count"):
        print(f"{k} = {summary[k]}")
    return EXIT_OK


def _collect_scenarios(args, params: Params):
    """Re-plan scenarios from grouping-strategy simulations.

    Runs successive simulations (seed substreams) until enough scenarios
    with ``min_vehicles..`` vehicles and at most ``max_vehicles`` per movement
    are captured.
    """
    picked = []
    ss = np.random.SeedSequence(args.seed)
    for run in range(args.max_runs):
        run_seed = int(ss.spawn(1)[0].generate_state(1)[0])
        found = []

        def keep(now, scenario, _sched):
            n1, n2 = scenario.counts()
            if n1 + n2 >= args.min_vehicles and max(n1, n2) <= args.max_vehicles:
                found.append((now, scenario))

        simulate(args.lam, args.lam, args.horizon, Strategy.GROUPING, params, run_seed,
                 on_replan=keep)
        for now, sc in found:
            picked.append((run, now, sc))
            if len(picked) == args.scenarios:
                return picked
    return picked


def cmd_alignment(args: argparse.Namespace) -> int:
    params = _params(args)
    check_rate(args.lam, params)
    out = _outdir(args)
    scenarios = _collect_scenarios(args, params)
    rows = []
    rank_by_n: dict[int, list[int]] = {}
    skipped = 0
    for k, (_run, now, sc) in enumerate(scenarios):
        try:
            check_budget(sc, args.budget, f"scenario {k}")
        except BudgetExceededError as exc:
            if not args.skip_over_budget:
                raise
            log.warning("skipped: %s", exc)
            skipped += 1
            continue
        values = evaluate_all(sc, args.budget)
        J = solve_grouping(sc).J
        rep = rank_of(sc, J, values=values)
        n1, n2 = sc.counts()
        rows.append([k, f6(args.lam), f6(now), n1 + n2, n1, n2, rep.total_orders, f6(J),
                     rep.rank, f6(rep.top_fraction)])
        rank_by_n.setdefault(n1 + n2, []).append(rep.rank)
    _write_csv(out / "alignment_scenarios.csv", ALIGN_COLUMNS, rows)

    curve = []
    groups = [(str(n), rank_by_n[n]) for n in sorted(rank_by_n)]
    groups.append(("all", [r for n in sorted(rank_by_n) for r in rank_by_n[n]]))
    for label, ranks in groups:
        ranks_arr = np.asarray(ranks)
        for g in DEFAULT_G:
            curve.append([label, g, len(ranks), f6(float(np.mean(ranks_arr <= g)))])
    _write_csv(out / "alignment_curve.csv", CURVE_COLUMNS, curve)
    _write_manifest(out, args, params)
    print(f"scenarios = {len(rows)}")
    if skipped:
        print(f"skipped_over_budget = {skipped}")
    return EXIT_OK


def cmd_histogram(args: argparse.Namespace) -> int:
    params = _params(args)
    out = _outdir(args)
    sc = _lane_scenario(args.n1, args.n2, args.lam, params, args.seed)
    hist = histogram_of_solutions(sc, args.bins, args.budget)
    _write_csv(out / "histogram.csv", HIST_COLUMNS,
               ([f6(lo), f6(hi), c] for lo, hi, c in hist.rows()))
    _write_csv(out / "marks.csv", MARK_COLUMNS,
               ([name, f6(J), rank, hist.total_orders, f6(rank / hist.total_orders)]
                for name, (J, rank) in hist.marks.items()))
    _write_manifest(out, args, params)
    print(f"total_orders = {hist.total_orders}")
    for name, (J, rank) in hist.marks.items():
        print(f"{name}_J = {f6(J)}")
        print(f"{name}_rank = {rank}")
    return EXIT_OK


def cmd_probability(args: argparse.Namespace) -> int:
    params = replace(_params(args), dt1=args.dt1, dt2=args.dt2)
    problems = validate_config(params)
    if problems:
        raise ConfigError(problems)
    if args.delta < params.dt1:
        raise ContractViolation(f"delta={args.delta} must be >= dt1={params.dt1}")
    lines = {"probability": f6(special_case_probability(params, args.delta,
                                                        args.lambda1, args.lambda2))}
    if args.mc_trials:
        mc = mc_special_case(params, args.delta, args.lambda1, args.lambda2,
                             args.mc_trials, args.seed)
        lines.update({
            "mc_trials": mc.trials,
            "mc_p_region": f6(mc.p_region),
            "mc_p_region_se": f6(mc.se_region),
            "mc_p_acbd_optimal": f6(mc.p_acbd_optimal),
            "mc_p_acbd_optimal_se": f6(mc.se_acbd),
        })
    text = "".join(f"{k} = {v}\n" for k, v in lines.items())
    sys.stdout.write(text)
    if args.out:
        out = _outdir(args)
        (out / "probability.txt").write_text(text, encoding="utf-8")
        _write_manifest(out, args, params)
    return EXIT_OK


def cmd_timing(args: argparse.Namespace) -> int:
    params = _params(args)
    out = _outdir(args)
    strategies = [Strategy(s) for s in args.strategies]
    points = timing_curve(args.counts, args.lam, args.samples, params, args.seed,
                          strategies, budget=args.budget)
    _write_csv(out / "timing.csv", TIMING_COLUMNS,
               ([p.strategy.value, p.n_vehicles, p.samples, f6(p.mean_ms)] for p in points))
    _write_manifest(out, args, params)
    for p in points:
        print(f"{p.strategy.value} n={p.n_vehicles} mean_ms={f6(p.mean_ms)}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    params = _params(args)
    out = _outdir(args)
    rows = []
    for lam in args.rates:
        for strat in args.strategies:
            rep = simulate(lam, lam, args.duration, strat, params, args.seed)
            rows.append([f6(lam), strat, f6(rep.average_delay), f6(rep.average_vehicle_count),
                         len(rep.exits), f6(rep.average_plan_time)])
            print(f"lambda={f6(lam)} {strat}: delay={f6(rep.average_delay)} "
                  f"count={f6(rep.average_vehicle_count)}")
    _write_csv(out / "compare.csv", COMPARE_COLUMNS, rows)
    _write_manifest(out, args, params)
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    flags = dict(manifest["flags"])
    if args.out:
        flags["out"] = args.out
    ns = argparse.Namespace(command=manifest["command"], **flags)
    return COMMANDS[manifest["command"]](ns)


COMMANDS = {
    "simulate": cmd_simulate,
    "alignment": cmd_alignment,
    "histogram": cmd_histogram,
    "probability": cmd_probability,
    "timing": cmd_timing,
    "compare": cmd_compare,
}


def _csv_list(conv):
    def parse(text: str):
        try:
            return [conv(x) for x in text.split(",") if x.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return parse


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mergecoord",
                                 description="Passing-order scheduling experiments for an on-ramp merge.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    strategies = [s.value for s in Strategy]

    def common(p, seed=True, out=True):
        p.add_argument("--config", help="flat key = value (or JSON) parameter file")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        if out:
            p.add_argument("--out", default="out")
        p.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                       help="maximum passing orders a single enumeration may cover")

    p = sub.add_parser("simulate", help="rolling-horizon simulation of one strategy")
    common(p)
    p.add_argument("--lambda1", type=float, required=True)
    p.add_argument("--lambda2", type=float, required=True)
    p.add_argument("--duration", type=float, default=1200.0)
    p.add_argument("--strategy", choices=strategies, default="grouping")
    p.add_argument("--dt-sim", dest="dt_sim", type=float, default=0.1)

    p = sub.add_parser("alignment", help="rank of the grouping solution among all orders")
    common(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--scenarios", type=int, default=100)
    p.add_argument("--horizon", type=float, default=300.0, help="seconds per simulation run")
    p.add_argument("--max-vehicles", dest="max_vehicles", type=int, default=8,
                   help="maximum vehicles per movement in a sampled scenario")
    p.add_argument("--min-vehicles", dest="min_vehicles", type=int, default=2)
    p.add_argument("--max-runs", dest="max_runs", type=int, default=50)
    p.add_argument("--skip-over-budget", dest="skip_over_budget", action="store_true")

    p = sub.add_parser("histogram", help="objective histogram over every passing order")
    common(p)
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n2", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.2)
    p.add_argument("--bins", type=int, default=50)

    p = sub.add_parser("probability", help="closed-form special-case probability")
    common(p)
    p.set_defaults(out=None)
    p.add_argument("--dt1", type=float, default=1.5)
    p.add_argument("--dt2", type=float, default=2.5)
    p.add_argument("--delta", type=float, default=2.0)
    p.add_argument("--lambda1", type=float, default=0.2)
    p.add_argument("--lambda2", type=float, default=0.2)
    p.add_argument("--mc-trials", dest="mc_trials", type=int, default=0)

    p = sub.add_parser("timing", help="plan wall-clock against vehicle count")
    common(p)
    p.add_argument("--lambda", dest="lam", type=float, default=0.2)
    p.add_argument("--counts", type=_csv_list(int), default=[5, 10, 15, 20])
    p.add_argument("--samples", type=int, default=5)
    p.add_argument("--strategies", type=_csv_list(str), default=strategies)

    p = sub.add_parser("compare", help="delay comparison of strategies across arrival rates")
    common(p)
    p.add_argument("--rates", type=_csv_list(float), default=[0.1, 0.15, 0.2, 0.25])
    p.add_argument("--duration", type=float, default=1200.0)
    p.add_argument("--strategies", type=_csv_list(str), default=strategies)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    handler = cmd_replay if args.command == "replay" else COMMANDS[args.command]
    try:
        if args.command in ("timing", "compare"):
            for s in args.strategies:
                Strategy(s)
        return handler(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_INVALID
    except (InfeasibleRateError, ContractViolation, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
