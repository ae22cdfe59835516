"""Solving a DP through its dual: binary search on the target value ``sigma``,
MWUM feasibility at each probe, and extraction of an optimal first action
from the averaged dual solution.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import errors
from .kernel import get_backend
from .model import DpInstance, Verdict, compute_rho, validate_instance, to_dict
from .mwu import Feasible, Infeasible, RoundRecord, Transcript, compute_config, run_feasibility
from .oracle import (
    AveragedSolution,
    ExactScan,
    QueryLedger,
    SigmaContext,
    SimulatedQmf,
    check_dual_feasibility,
    combine_vertices,
    oracle_for_mwum,
    qmf_query_cost,
    residual_vector,
)
from ._kernel_py import SplitMix64

log = logging.getLogger("mwdp")

REPORT_SCHEMA = "dp-report/1"
EXTRACT_TOL = 1e-12


@dataclass(frozen=True)
class SolveConfig:
    strategy: ExactScan | SimulatedQmf = field(default_factory=ExactScan)
    delta: float | None = None
    rho: int | None = None
    seed: int = 0
    escalation_limit: int = 3
    rounds_override: int | None = None
    engine: str = "kernel"  # "kernel" (fused loop) or "generic" (run_feasibility + oracle callbacks)
    backend: str | None = None  # kernel backend: "compiled" / "python" / None for the default

    def __post_init__(self):
        if self.delta is not None and not 0 < self.delta <= 0.5:
            raise errors.InvalidInput(f"delta must lie in (0, 1/2], got {self.delta}")
        if self.escalation_limit < 0:
            raise errors.InvalidInput("escalation_limit must be >= 0")
        if self.engine not in ("kernel", "generic"):
            raise errors.InvalidInput(f"unknown engine {self.engine!r}")

    def default_delta(self, inst: DpInstance) -> float:
        return self.delta if self.delta is not None else 1.0 / (2 * inst.num_actions)


@dataclass
class ProbeResult:
    """One feasibility run at a fixed ``sigma``."""

    sigma: int
    outcome: Feasible | Infeasible
    average: AveragedSolution | None
    planned_rounds: int
    executed_rounds: int
    qmf_failures: int = 0
    dual_check: Verdict | None = None

    @property
    def feasible(self) -> bool:
        return isinstance(self.outcome, Feasible)

    def __iter__(self):
        # allows ``outcome, avg = feasibility_at_sigma(...)``
        return iter((self.outcome, self.average))


def probe_seed(seed: int, *parts: int) -> int:
    """Deterministic 64-bit seed for one probe."""
    return int(np.random.SeedSequence([int(seed), *map(int, parts)]).generate_state(1, np.uint64)[0])


def feasibility_at_sigma(
    inst: DpInstance,
    sigma: int,
    delta: float,
    strategy=None,
    *,
    rho: int | None = None,
    rounds_override: int | None = None,
    ledger: QueryLedger | None = None,
    engine: str = "kernel",
    backend: str | None = None,
    seed: int | None = None,
    record: bool = False,
    check: bool = True,
) -> ProbeResult:
    """Run the MWUM feasibility test for ``(DP_sigma^delta)``.

    ``seed`` drives the simulated minimum finder (defaults to ``strategy.seed``).
    When ``check`` is set a Feasible outcome is re-verified against every
    relaxed dual row and the verdict is attached to the result.
    """
    strategy = ExactScan() if strategy is None else strategy
    rho = compute_rho(inst) if rho is None else rho
    if not (1 <= sigma <= rho) or int(sigma) != sigma:
        raise errors.SigmaOutOfRange(f"sigma = {sigma} outside the integer range [1, {rho}]")
    sigma = int(sigma)
    ctx = SigmaContext(inst, sigma)
    cfg = compute_config(delta, ctx.ell, ctx.num_constraints, rounds_override)
    qmf = strategy.kind == "qmf"
    fail_prob = 0.0
    if qmf:
        fail_prob = strategy.fail_prob if strategy.fail_prob is not None else 1.0 / (2 * cfg.theorem_rounds)
        strategy = replace(strategy, fail_prob=fail_prob)
    seed = strategy.seed if (seed is None and qmf) else (seed or 0)
    ledger = QueryLedger() if ledger is None else ledger

    if engine == "generic":
        rng = SplitMix64(seed)
        outcome = run_feasibility(cfg, oracle_for_mwum(ctx, strategy, delta, ledger, rng),
                                  combine=combine_vertices(ctx))
        failures = 0
        if isinstance(outcome, Feasible):
            avg, executed = outcome.average_solution, cfg.rounds
        else:
            avg, executed = None, outcome.round - 1
    else:
        run = get_backend(backend)
        threshold = 0.0 if qmf else strategy.threshold(delta)
        status, done, counts, chosen, values, cert, failures, _ = run(
            ctx.v_reward, ctx.v_self, ctx.v_next, ctx.v_budget, ctx.num_constraints, ctx.budget_idx,
            ctx.sigma, ctx.ell, cfg.epsilon, cfg.rounds, 1 if qmf else 0, threshold, delta / 2.0,
            fail_prob, np.uint64(seed), bool(record),
        )
        calls = done + (0 if status else 1)
        if qmf:
            ledger.record_qmf(ctx.num_vertices, fail_prob, calls)
        else:
            ledger.record_scan(ctx.num_vertices, calls)
        transcript = _transcript_from_kernel(ctx, cfg.epsilon, chosen, values) if record else None
        if status:
            avg = AveragedSolution(ctx, counts, int(done))
            outcome = Feasible(avg, transcript, cfg.rounds, cfg.certified)
        else:
            avg = None
            outcome = Infeasible(cert, int(done) + 1, transcript)
        executed = int(done)

    result = ProbeResult(sigma, outcome, avg, cfg.rounds, executed, int(failures))
    if check and avg is not None:
        result.dual_check = check_dual_feasibility(ctx, avg, delta)
        if not result.dual_check.ok and cfg.certified and not qmf:
            log.warning("sigma=%s: averaged solution fails the dual check: %s", sigma, result.dual_check.detail)
    log.debug("probe sigma=%s feasible=%s rounds=%s/%s", sigma, result.feasible, executed, cfg.rounds)
    return result


def _transcript_from_kernel(ctx: SigmaContext, eps: float, chosen, values) -> Transcript:
    tr = Transcript(eps, ctx.num_constraints)
    for k, (j, val) in enumerate(zip(chosen, values)):
        m = residual_vector(ctx, int(j)) / ctx.ell
        tr.records.append(RoundRecord(k + 1, None, m, int(j), True, float(val)))
    return tr


@dataclass
class SearchResult:
    sigma_bar: int
    average: AveragedSolution
    probes: list[ProbeResult]
    monotone: bool = True

    @property
    def bisection_steps(self) -> int:
        return len(self.probes)


def binary_search_sigma(
    inst: DpInstance,
    delta: float,
    strategy=None,
    *,
    rho: int | None = None,
    rounds_override: int | None = None,
    ledger: QueryLedger | None = None,
    engine: str = "kernel",
    backend: str | None = None,
    seed: int = 0,
) -> SearchResult:
    """Largest integer ``sigma`` in ``[1, rho]`` reported feasible.

    Under the simulated minimum finder a probe can wrongly report
    infeasibility; if the probes seen so far contradict monotonicity the
    search falls back to a downward scan from the highest feasible point and
    the result is flagged.
    """
    rho = compute_rho(inst) if rho is None else rho
    ledger = QueryLedger() if ledger is None else ledger
    probes: list[ProbeResult] = []
    seen: dict[int, ProbeResult] = {}

    def probe(sigma: int) -> ProbeResult:
        if sigma not in seen:
            res = feasibility_at_sigma(
                inst, sigma, delta, strategy, rho=rho, rounds_override=rounds_override, ledger=ledger,
                engine=engine, backend=backend, seed=probe_seed(seed, sigma, len(probes)),
            )
            probes.append(res)
            seen[sigma] = res
        return seen[sigma]

    lo, hi = 1, rho
    best: ProbeResult | None = None
    while lo <= hi:
        mid = (lo + hi) // 2
        res = probe(mid)
        if res.feasible:
            best, lo = res, mid + 1
        else:
            hi = mid - 1

    monotone = _is_monotone(seen)
    if not monotone:
        # downward scan from the highest feasible point: accept the first sigma
        # whose lower neighbour (if probed) is feasible as well
        top = max(s for s, r in seen.items() if r.feasible)
        log.info("non-monotone feasibility pattern; scanning down from sigma=%s", top)
        best = None
        for sigma in range(top, 0, -1):
            res = probe(sigma)
            if res.feasible:
                best = res
                break
    if best is None:
        raise errors.AllInfeasible(f"no sigma in [1, {rho}] is feasible at delta = {delta}")
    return SearchResult(best.sigma, best.average, probes, monotone)


def _is_monotone(seen: dict[int, ProbeResult]) -> bool:
    feasible = [s for s, r in seen.items() if r.feasible]
    infeasible = [s for s, r in seen.items() if not r.feasible]
    return not feasible or not infeasible or min(infeasible) > max(feasible)


def extract_action(inst: DpInstance, lam, delta_used: float | None = None) -> int:
    """Action with the largest dual mass at ``(s0, 0)``; must reach ``1 / (2|A|)``.

    ``lam`` is an :class:`AveragedSolution` or a per-action vector. Ties go to
    the smallest action index.
    """
    if isinstance(lam, AveragedSolution):
        lam = lam.lambda_at_initial()
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape != (inst.num_actions,):
        raise errors.DimensionMismatch(f"expected {inst.num_actions} per-action values, got shape {lam.shape}")
    a = int(np.argmax(lam))
    threshold = 1.0 / (2 * inst.num_actions)
    if lam[a] < threshold - EXTRACT_TOL:
        raise errors.ExtractionBelowThreshold(
            f"max lambda at (s0, a, 0) is {lam[a]:.6g} < {threshold:.6g} (delta = {delta_used})"
        )
    return a


@dataclass
class SolveReport:
    sigma_bar: int
    action: int
    lambda_s0: list[float]
    delta_used: float
    escalations: int
    rounds_per_probe: list[int]
    executed_per_probe: list[int]
    sigma_probes: list[int]
    bisection_steps: int
    total_rounds: int
    ledger: QueryLedger
    certified: bool
    monotone: bool = True
    fail_prob: float | None = None
    wallclock_ms: float = 0.0

    def to_dict(self, timing: bool = True) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "sigma_bar": self.sigma_bar,
            "action": self.action,
            "lambda_s0": [float(x) for x in self.lambda_s0],
            "delta_used": self.delta_used,
            "escalations": self.escalations,
            "rounds_per_probe": list(self.rounds_per_probe),
            "executed_per_probe": list(self.executed_per_probe),
            "sigma_probes": list(self.sigma_probes),
            "bisection_steps": self.bisection_steps,
            "total_rounds": self.total_rounds,
            "ledger": self.ledger.as_dict(),
            "certified": self.certified,
            "monotone": self.monotone,
            "fail_prob": self.fail_prob,
            "wallclock_ms": round(self.wallclock_ms, 3) if timing else 0,
        }

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2) + "\n"


def planned_bisection_steps(rho: int) -> int:
    return math.ceil(math.log2(rho)) + 1 if rho > 1 else 1


def planned_rounds(inst: DpInstance, delta: float, rho: int, rounds_override: int | None = None) -> int:
    """``K_planned``: bisection steps times the largest per-probe round count (at ``sigma = rho``)."""
    ctx_s = _num_constraints(inst)
    cfg = compute_config(delta, 2.0 * rho, ctx_s, rounds_override)
    return planned_bisection_steps(rho) * cfg.rounds


def _num_constraints(inst: DpInstance) -> int:
    if inst.layered:
        return int(np.count_nonzero(inst.layer_of < inst.horizon))
    return inst.num_states * inst.horizon


def solve_dp(inst: DpInstance, config: SolveConfig | None = None) -> SolveReport:
    """Find ``sigma_bar`` and an optimal first action at ``(s0, 0)``."""
    config = SolveConfig() if config is None else config
    start = time.perf_counter()
    rho = compute_rho(inst, config.rho)
    delta = config.default_delta(inst)
    ledger = QueryLedger()
    strategy = config.strategy
    last_error: Exception | None = None
    for esc in range(config.escalation_limit + 1):
        fail_prob = None
        if strategy.kind == "qmf":
            fail_prob = config.strategy.fail_prob
            if fail_prob is None:
                fail_prob = 1.0 / (2 * planned_rounds(inst, delta, rho, config.rounds_override))
            strategy = replace(config.strategy, fail_prob=fail_prob)
        try:
            search = binary_search_sigma(
                inst, delta, strategy, rho=rho, rounds_override=config.rounds_override, ledger=ledger,
                engine=config.engine, backend=config.backend, seed=probe_seed(config.seed, esc),
            )
        except errors.SolverFailure as exc:
            exc.ledger, exc.fail_prob = ledger, fail_prob
            raise
        lam_s0 = search.average.lambda_at_initial()
        try:
            action = extract_action(inst, lam_s0, delta)
        except errors.ExtractionBelowThreshold as exc:
            log.info("escalation %d: %s; halving delta", esc, exc)
            last_error = exc
            delta /= 2.0
            continue
        probes = search.probes
        return SolveReport(
            sigma_bar=search.sigma_bar,
            action=action,
            lambda_s0=[float(x) for x in lam_s0],
            delta_used=delta,
            escalations=esc,
            rounds_per_probe=[p.planned_rounds for p in probes],
            executed_per_probe=[p.executed_rounds for p in probes],
            sigma_probes=[p.sigma for p in probes],
            bisection_steps=len(probes),
            total_rounds=sum(p.executed_rounds for p in probes),
            ledger=ledger,
            certified=config.rounds_override is None,
            monotone=search.monotone,
            fail_prob=fail_prob,
            wallclock_ms=(time.perf_counter() - start) * 1000.0,
        )
    exc = errors.ExtractionFailed(
        f"no action reached the extraction threshold after {config.escalation_limit} escalations: {last_error}"
    )
    exc.ledger, exc.fail_prob = ledger, fail_prob
    raise exc


@dataclass
class PolicyTrace:
    """Decisions ``(state, time, action)`` from ``(s0, 0)`` to the horizon."""

    steps: list[tuple[int, int, int]]
    cumulative_reward: int  # as stored, i.e. including the reward shift
    reward_shift: int
    reports: list[SolveReport] = field(default_factory=list)

    @property
    def unshifted_reward(self) -> int:
        return self.cumulative_reward - self.reward_shift * len(self.steps)

    @property
    def actions(self) -> list[int]:
        return [a for _, _, a in self.steps]


def suffix_instance(inst: DpInstance, s: int, t: int) -> tuple[DpInstance, np.ndarray]:
    """Sub-problem starting at state ``s`` and time ``t`` with horizon ``T - t``.

    Returns the instance and the map from its state indices back to the
    original ones. Layered instances are restricted to the states reachable
    from ``s``, so that ``s`` is the only layer-0 state.
    """
    T = inst.horizon
    if not 0 <= t < T:
        raise errors.InvalidInput(f"time {t} outside [0, {T})")
    if not inst.layered:
        doc = to_dict(inst)
        doc.update(horizon=T - t, initial_state=int(s), reward_shift=0)
        if inst.time_dependent:
            doc["transitions"] = np.stack([inst.next_state[t:], inst.reward[t:]], axis=-1).tolist()
        sub = validate_instance(doc)
        sub = replace_shift(sub, inst.reward_shift)
        return sub, np.arange(inst.num_states)

    layer = inst.layer_of
    if layer[s] != t:
        raise errors.LayerViolation(f"state {s} lives in layer {layer[s]}, not {t}")
    keep, frontier = [s], [s]
    seen = {s}
    for d in range(t, T):
        nxt_front = []
        for u in frontier:
            for v in inst.next_state[d, u]:
                v = int(v)
                if v not in seen:
                    seen.add(v)
                    nxt_front.append(v)
        keep.extend(sorted(nxt_front))
        frontier = nxt_front
    index = {u: i for i, u in enumerate(keep)}
    S2, A = len(keep), inst.num_actions
    nxt = np.zeros((S2, A), dtype=np.int64)
    rew = np.ones((S2, A), dtype=np.int64)
    for i, u in enumerate(keep):
        d = int(layer[u])
        if d < T:
            nxt[i] = [index[int(v)] for v in inst.next_state[d, u]]
            rew[i] = inst.reward[d, u]
        else:
            nxt[i] = i  # past the horizon; never used
    doc = {
        "num_states": S2,
        "num_actions": A,
        "horizon": T - t,
        "initial_state": 0,
        "time_dependent": False,
        "transitions": np.stack([nxt, rew], axis=-1).tolist(),
        "reward_bound": inst.reward_bound,
        "layered": True,
        "layer_of": [int(layer[u]) - t for u in keep],
    }
    sub = replace_shift(validate_instance(doc), inst.reward_shift)
    return sub, np.array(keep, dtype=np.int64)


def replace_shift(inst: DpInstance, shift: int) -> DpInstance:
    return replace(inst, reward_shift=shift)


def solve_policy(inst: DpInstance, config: SolveConfig | None = None) -> PolicyTrace:
    """Re-solve the suffix problem at every step and follow the extracted action."""
    config = SolveConfig() if config is None else config
    s = inst.initial_state
    steps, total, reports = [], 0, []
    for t in range(inst.horizon):
        sub, _ = suffix_instance(inst, s, t)
        cfg = replace(config, seed=probe_seed(config.seed, t), rho=None if config.rho is None else config.rho)
        report = solve_dp(sub, cfg)
        a = report.action
        steps.append((s, t, a))
        reports.append(report)
        total += int(inst.reward[t, s, a])
        s = int(inst.next_state[t, s, a])
    return PolicyTrace(steps, total, inst.reward_shift, reports)


def iteration_bound_report(inst: DpInstance, config: SolveConfig | None = None) -> dict:
    """Closed-form planning numbers; no solving."""
    config = SolveConfig() if config is None else config
    rho = compute_rho(inst, config.rho)
    delta = config.default_delta(inst)
    s = _num_constraints(inst)
    n_vertices = s * inst.num_actions
    probes = []
    for sigma in range(1, rho + 1):
        cfg = compute_config(delta, 2.0 * sigma, s, config.rounds_override)
        probes.append({"sigma": sigma, "ell": cfg.ell, "epsilon": cfg.epsilon, "K": cfg.rounds})
    steps = planned_bisection_steps(rho)
    k_planned = steps * probes[-1]["K"]
    fail_prob = 1.0 / (2 * k_planned)
    return {
        "delta": delta,
        "rho": rho,
        "num_constraints": s,
        "num_vertices": n_vertices,
        "bisection_steps": steps,
        "probes": probes,
        "planned_qmf_runs": k_planned,
        "fail_prob": fail_prob,
        "query_cost_per_run": qmf_query_cost(n_vertices, fail_prob),
        "modeled_queries": k_planned * qmf_query_cost(n_vertices, fail_prob),
    }
