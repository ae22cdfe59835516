"""Command-line front end: ``mwdp <command> [flags]``.

Exit codes: 0 success, 1 negative solver outcome (infeasible, extraction
failed, no cover, failed verification), 2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path


from . import errors
from .encoders import msc as msc_mod
from .encoders import tsp as tsp_mod
from .generators import gen_adversarial_pair, gen_random_instance
from .model import (
    bellman_solve,
    compute_rho,
    load_instance,
    optimal_action_set,
    policy_trace,
    dumps,
)
from .mwu import compute_config
from .oracle import ExactScan, SimulatedQmf
from .solver import SolveConfig, solve_dp, solve_policy, _num_constraints

log = logging.getLogger("mwdp")

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT = 0, 1, 2

BENCH_COLUMNS = [
    "index", "states", "actions", "horizon", "reward_max", "rho", "strategy", "seed", "status",
    "v_star", "sigma_bar", "action", "optimal", "escalations", "bisection_steps", "K_at_rho",
    "planned_rounds", "executed_rounds", "qmf_runs", "modeled_queries", "scan_evaluations", "wallclock_ms",
]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise errors.InvalidInput(message)


def _setup_logging():
    level = os.environ.get("DP_LOG_LEVEL", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        raise errors.InvalidInput(f"DP_LOG_LEVEL must be one of {sorted(levels)}, got {level!r}")
    logging.basicConfig(level=levels[level], stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(levels[level])


def _solver_flags(p: argparse.ArgumentParser):
    p.add_argument("--strategy", choices=["exact", "qmf"], default="exact")
    p.add_argument("--delta", type=float)
    p.add_argument("--rho", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--rounds-override", type=int)
    p.add_argument("--escalation-limit", type=int, default=3)
    p.add_argument("--engine", choices=["kernel", "generic"], default="kernel")
    p.add_argument("--backend", choices=["compiled", "python"])
    p.add_argument("--no-timing", action="store_true", help="write wallclock_ms as 0 (byte-stable output)")


def _io_flags(p: argparse.ArgumentParser):
    p.add_argument("--out", type=Path)
    p.add_argument("--format", choices=["json", "csv", "table"], default="json")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mwdp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a seeded instance file")
    g.add_argument("--kind", choices=["dp", "adversarial", "tsp", "msc"], default="dp")
    g.add_argument("--states", type=int, default=4)
    g.add_argument("--actions", type=int, default=2)
    g.add_argument("--horizon", type=int, default=3)
    g.add_argument("--reward-max", type=int, default=2)
    g.add_argument("--homogeneous", action="store_true")
    g.add_argument("--n", type=int, default=4, help="tree leaves / TSP vertices / MSC universe size")
    g.add_argument("--sets", type=int, default=4, help="MSC family size")
    g.add_argument("--cost-bound", type=int, default=3)
    g.add_argument("--variant", type=int, choices=[1, 2], default=1, help="which adversarial twin to write")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", type=Path)

    b = sub.add_parser("bellman", help="exact backward induction")
    b.add_argument("--instance", type=Path, required=True)
    _io_flags(b)

    for name, text in (("solve", "MWUM solve at the initial state"), ("policy", "iterated MWUM policy")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--instance", type=Path, required=True)
        _solver_flags(p)
        _io_flags(p)

    for name in ("tsp", "msc"):
        p = sub.add_parser(name, help=f"solve a {name}/1 instance through its DP encoding")
        p.add_argument("--instance", type=Path, required=True)
        p.add_argument("--method", choices=["bellman", "mwum"], default="bellman")
        _solver_flags(p)
        _io_flags(p)

    v = sub.add_parser("verify", help="run the invariant suite and print a pass/fail matrix")
    v.add_argument("--count", type=int, default=50)
    v.add_argument("--seed", type=int, default=2024)
    v.add_argument("--skip-solver", action="store_true", help="skip the end-to-end MWUM rows")

    bn = sub.add_parser("bench", help="parameter sweep to CSV")
    bn.add_argument("--states", default="3")
    bn.add_argument("--actions", default="2,3")
    bn.add_argument("--horizon", default="2")
    bn.add_argument("--reward-max", default="1,2,3,4")
    bn.add_argument("--strategies", default="exact")
    bn.add_argument("--seed", type=int, default=0)
    bn.add_argument("--jobs", type=int, default=1)
    bn.add_argument("--no-timing", action="store_true")
    bn.add_argument("--out", type=Path)
    return ap


def _strategy(args):
    if args.strategy == "qmf":
        if args.seed is None:
            raise errors.InvalidInput("--seed is required with --strategy qmf")
        return SimulatedQmf(seed=args.seed)
    return ExactScan()


def _config(args) -> SolveConfig:
    return SolveConfig(
        strategy=_strategy(args),
        delta=args.delta,
        rho=args.rho,
        seed=args.seed or 0,
        escalation_limit=args.escalation_limit,
        rounds_override=args.rounds_override,
        engine=args.engine,
        backend=args.backend,
    )


def _emit(args, doc: dict, rows: list[dict] | None = None):
    """Write ``doc`` as JSON to ``--out`` (if given) and render to stdout in ``--format``."""
    text = json.dumps(doc, indent=2) + "\n"
    if getattr(args, "out", None):
        args.out.write_text(text, encoding="utf-8")
    fmt = getattr(args, "format", "json")
    if fmt == "json":
        if not getattr(args, "out", None):
            sys.stdout.write(text)
        return
    rows = rows if rows is not None else [{k: v for k, v in doc.items() if not isinstance(v, (list, dict))}]
    if fmt == "csv":
        w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]) if rows else [], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    else:
        sys.stdout.write(_table(rows))


def _table(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    cells = [[str(r.get(c, "")) for c in cols] for r in rows]
    widths = [max(len(c), *(len(x[i]) for x in cells)) for i, c in enumerate(cols)]
    line = lambda xs: "  ".join(x.ljust(wd) for x, wd in zip(xs, widths)).rstrip() + "\n"
    return line(cols) + line(["-" * wd for wd in widths]) + "".join(line(x) for x in cells)


def cmd_gen(args) -> int:
    if args.kind == "dp":
        inst = gen_random_instance(args.states, args.actions, args.horizon, args.reward_max, args.seed,
                                   time_dependent=not args.homogeneous)
        text = dumps(inst)
    elif args.kind == "adversarial":
        pair = gen_adversarial_pair(args.n, args.horizon, args.seed)
        text = dumps(pair.instance_1 if args.variant == 1 else pair.instance_2)
    elif args.kind == "tsp":
        text = json.dumps(tsp_mod.graph_to_dict(tsp_mod.random_graph(args.n, args.cost_bound, args.seed))) + "\n"
    else:
        text = json.dumps(msc_mod.msc_to_dict(msc_mod.random_msc(args.n, args.sets, args.seed))) + "\n"
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bellman(args) -> int:
    inst = load_instance(args.instance)
    table, policy = bellman_solve(inst)
    s0 = inst.initial_state
    value = table.value(s0, 0)
    if args.format == "table" and not args.out:
        print(f"v*(s0) = {value}")
        print(f"unshifted v*(s0) = {value - inst.reward_shift * inst.horizon}")
        print(f"optimal actions at (s0, 0): {sorted(optimal_action_set(inst, s0, 0, table))}")
        return EXIT_OK
    doc = {
        "v_star": value,
        "v_star_unshifted": value - inst.reward_shift * inst.horizon,
        "optimal_actions": sorted(optimal_action_set(inst, s0, 0, table)),
        "values": table.values.tolist(),
        "policy": policy.actions.tolist(),
    }
    _emit(args, doc)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    report = solve_dp(inst, _config(args))
    _emit(args, report.to_dict(timing=not args.no_timing))
    return EXIT_OK


def _trace_doc(trace, timing: bool) -> dict:
    return {
        "steps": [list(s) for s in trace.steps],
        "cumulative_reward": trace.cumulative_reward,
        "unshifted_reward": trace.unshifted_reward,
        "reports": [r.to_dict(timing) for r in trace.reports],
    }


def cmd_policy(args) -> int:
    inst = load_instance(args.instance)
    trace = solve_policy(inst, _config(args))
    doc = _trace_doc(trace, not args.no_timing)
    rows = [{"state": s, "time": t, "action": a} for s, t, a in trace.steps]
    _emit(args, doc, rows)
    return EXIT_OK


def _encoded_trace(inst, args):
    if args.method == "bellman":
        _, policy = bellman_solve(inst)
        steps, _ = policy_trace(inst, policy)
        return steps, None
    trace = solve_policy(inst, _config(args))
    return trace.steps, trace


def cmd_tsp(args) -> int:
    g = tsp_mod.load_graph(args.instance)
    inst = tsp_mod.encode_tsp(g)
    steps, _ = _encoded_trace(inst, args)
    tour, cost = tsp_mod.decode_tsp(steps, g)
    _emit(args, {"tour": list(tour), "cost": cost, "method": args.method})
    return EXIT_OK


def cmd_msc(args) -> int:
    m = msc_mod.load_msc(args.instance)
    inst = msc_mod.encode_msc(m)
    steps, _ = _encoded_trace(inst, args)
    out = msc_mod.decode_msc(steps, m)
    if out == msc_mod.NO_COVER:
        _emit(args, {"cover": None, "size": None, "status": msc_mod.NO_COVER, "method": args.method})
        return EXIT_NEGATIVE
    cover, size = out
    _emit(args, {"cover": list(cover), "sets": [sorted(m.family[k]) for k in cover], "size": size,
                 "status": "ok", "method": args.method})
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suite

    results = run_suite(count=args.count, seed=args.seed, solver=not args.skip_solver)
    sys.stdout.write(_table([{"check": name, "passed": f"{ok}/{total}", "status": "PASS" if ok == total else "FAIL"}
                             for name, ok, total in results]))
    return EXIT_OK if all(ok == total for _, ok, total in results) else EXIT_NEGATIVE


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def bench_grid(states, actions, horizons, reward_maxes, strategies, seed=0) -> list[dict]:
    grid = []
    for S in states:
        for A in actions:
            for T in horizons:
                for R in reward_maxes:
                    for strat in strategies:
                        grid.append({"states": S, "actions": A, "horizon": T, "reward_max": R,
                                     "strategy": strat, "seed": seed + len(grid)})
    return grid


def _bench_row(index: int, params: dict, timing: bool) -> dict:
    row = dict.fromkeys(BENCH_COLUMNS, "")
    row.update(index=index, **params)
    start = time.perf_counter()
    try:
        inst = gen_random_instance(params["states"], params["actions"], params["horizon"], params["reward_max"],
                                   params["seed"])
        rho = compute_rho(inst)
        delta = 1.0 / (2 * inst.num_actions)
        strat = SimulatedQmf(seed=params["seed"]) if params["strategy"] == "qmf" else ExactScan()
        table, _ = bellman_solve(inst)
        report = solve_dp(inst, SolveConfig(strategy=strat, seed=params["seed"]))
        row.update(
            rho=rho,
            status="ok",
            v_star=table.value(inst.initial_state, 0),
            sigma_bar=report.sigma_bar,
            action=report.action,
            optimal=int(report.action in optimal_action_set(inst, inst.initial_state, 0, table)),
            escalations=report.escalations,
            bisection_steps=report.bisection_steps,
            K_at_rho=compute_config(delta, 2.0 * rho, _num_constraints(inst)).rounds,
            planned_rounds=sum(report.rounds_per_probe),
            executed_rounds=report.total_rounds,
            **report.ledger.as_dict(),
        )
    except errors.DpError as exc:
        row["status"] = f"error:{type(exc).__name__}"
    row["wallclock_ms"] = round((time.perf_counter() - start) * 1000.0, 3) if timing else 0
    return row


def bench_sweep(grid: list[dict], *, jobs: int = 1, timing: bool = True) -> str:
    """One CSV row per grid entry, in grid order, with the fixed :data:`BENCH_COLUMNS`."""
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda ip: _bench_row(ip[0], ip[1], timing), enumerate(grid)))
    else:
        rows = [_bench_row(i, p, timing) for i, p in enumerate(grid)]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def cmd_bench(args) -> int:
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    bad = set(strategies) - {"exact", "qmf"}
    if bad:
        raise errors.InvalidInput(f"unknown strategies {sorted(bad)}")
    grid = bench_grid(_int_list(args.states), _int_list(args.actions), _int_list(args.horizon),
                      _int_list(args.reward_max), strategies, args.seed)
    text = bench_sweep(grid, jobs=args.jobs, timing=not args.no_timing)
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "bellman": cmd_bellman,
    "solve": cmd_solve,
    "policy": cmd_policy,
    "tsp": cmd_tsp,
    "msc": cmd_msc,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def cli_main(argv=None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except errors.InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except errors.DpError as exc:
        print(f"solver: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
