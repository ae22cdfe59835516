"""Invariant suite shared by ``mwdp verify`` and the test-suite.

Each check returns ``(passed, total)`` over its seeded cases.
"""

from __future__ import annotations

import logging

import numpy as np

from .encoders import msc as msc_mod
from .encoders import tsp as tsp_mod
from .generators import seeded_suite
from .model import (
    bellman_solve,
    brute_force_value,
    check_primal_feasibility,
    optimal_action_set,
    policy_trace,
    value_bounds_hold,
)
from .mwu import mw_run_generic, regret_audit
from .oracle import ExactScan, SigmaContext, check_dual_feasibility, constraint_residuals, eval_f
from .solver import feasibility_at_sigma, solve_dp

log = logging.getLogger("mwdp")

EPSILONS = (0.1, 0.25, 0.5)


def cost_streams(count: int = 100, seed: int = 7):
    """Seeded ``(n, epsilon, costs)`` triples with ``n <= 16`` and at most 200 rounds."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(1, 17))
        k = int(rng.integers(1, 201))
        eps = float(EPSILONS[int(rng.integers(len(EPSILONS)))])
        yield n, eps, rng.uniform(-1.0, 1.0, size=(k, n))


def check_bellman(suite) -> tuple[int, int]:
    ok = sum(bellman_solve(i)[0].value(i.initial_state, 0) == brute_force_value(i) for i in suite)
    return ok, len(suite)


def check_bounds(suite) -> tuple[int, int]:
    return sum(value_bounds_hold(i, bellman_solve(i)[0]).ok for i in suite), len(suite)


def check_primal(suite) -> tuple[int, int]:
    return sum(check_primal_feasibility(i, bellman_solve(i)[0]).ok for i in suite), len(suite)


def check_regret(count: int = 100, seed: int = 7) -> tuple[int, int]:
    ok = total = 0
    for n, eps, costs in cost_streams(count, seed):
        tr = mw_run_generic(n, eps, costs, len(costs))
        ok += regret_audit(tr, tol=1e-9).ok
        total += 1
    return ok, total


def eval_f_samples(suite, count: int = 100, seed: int = 11):
    """Seeded ``(ctx, w, vertex)`` samples for the Lagrangian cross-check."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        inst = suite[int(rng.integers(len(suite)))]
        sigma = int(rng.integers(1, inst.horizon * inst.reward_bound + 1))
        ctx = SigmaContext(inst, sigma)
        w = rng.exponential(size=ctx.num_constraints)
        yield ctx, w, int(rng.integers(ctx.num_vertices))


def eval_f_gap(ctx, w, j) -> float:
    """``|f(w, v) / sum(w) - p . (A lam_v - b)|`` with the residual taken from the instance tables."""
    lam = np.zeros(ctx.num_vertices)
    lam[j] = ctx.sigma / ctx.v_reward[j]
    p = w / w.sum()
    return abs(eval_f(ctx, w, j) / w.sum() - float(p @ constraint_residuals(ctx, lam)))


def check_eval_f(suite, count: int = 100, tol: float = 1e-12) -> tuple[int, int]:
    ok = sum(eval_f_gap(ctx, w, j) <= tol for ctx, w, j in eval_f_samples(suite, count))
    return ok, count


def check_dual(suite) -> tuple[int, int]:
    ok = 0
    for inst in suite:
        vs = bellman_solve(inst)[0].value(inst.initial_state, 0)
        delta = 1.0 / (2 * inst.num_actions)
        res = feasibility_at_sigma(inst, vs, delta, ExactScan(), check=False)
        if res.feasible:
            ok += check_dual_feasibility(SigmaContext(inst, vs), res.average, delta).ok
    return ok, len(suite)


def check_recovery(suite) -> tuple[int, int]:
    ok = 0
    for k, inst in enumerate(suite):
        table, _ = bellman_solve(inst)
        vs = table.value(inst.initial_state, 0)
        rep = solve_dp(inst)
        good = rep.sigma_bar == vs and rep.action in optimal_action_set(inst, inst.initial_state, 0, table)
        if not good:
            log.info("instance %d: sigma_bar=%s v*=%s action=%s lambda_s0=%s", k, rep.sigma_bar, vs, rep.action,
                     rep.lambda_s0)
        ok += good
    return ok, len(suite)


def check_tsp(per_n: int = 20, sizes=range(3, 8), cost_bound: int = 5) -> tuple[int, int]:
    ok = total = 0
    for n in sizes:
        for seed in range(per_n):
            g = tsp_mod.random_graph(n, cost_bound, seed)
            inst = tsp_mod.encode_tsp(g)
            steps, _ = policy_trace(inst, bellman_solve(inst)[1])
            _, cost = tsp_mod.decode_tsp(steps, g)
            ok += cost == tsp_mod.brute_force_tsp(g)
            total += 1
    return ok, total


def msc_suite(count: int = 20, seed: int = 5):
    rng = np.random.default_rng(seed)
    return [
        msc_mod.random_msc(int(rng.integers(1, 7)), int(rng.integers(1, 6)), int(rng.integers(2**31)))
        for _ in range(count)
    ]


def decoded_msc_size(m) -> int | str:
    inst = msc_mod.encode_msc(m)
    steps, _ = policy_trace(inst, bellman_solve(inst)[1])
    out = msc_mod.decode_msc(steps, m)
    return out if out == msc_mod.NO_COVER else out[1]


def check_msc(count: int = 20) -> tuple[int, int]:
    suite = msc_suite(count)
    return sum(decoded_msc_size(m) == msc_mod.brute_force_msc(m) for m in suite), len(suite)


def run_suite(count: int = 50, seed: int = 2024, solver: bool = True) -> list[tuple[str, int, int]]:
    suite = seeded_suite(count, seed)
    rows = [
        ("bellman_vs_brute_force", *check_bellman(suite)),
        ("value_bounds", *check_bounds(suite)),
        ("primal_feasibility", *check_primal(suite)),
        ("regret_bound", *check_regret()),
        ("eval_f_cross_check", *check_eval_f(suite)),
        ("tsp_encoder", *check_tsp()),
        ("msc_encoder", *check_msc()),
    ]
    if solver:
        rows.append(("dual_delta_feasibility", *check_dual(suite)))
        rows.append(("optimal_action_recovery", *check_recovery(suite)))
    return rows
