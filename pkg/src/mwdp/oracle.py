"""Lagrangian oracle over the scaled simplex of the dual DP.

For a target value ``sigma`` the dual variables live on the simplex
``sum r * lam = sigma``; its extreme points put mass ``sigma / r`` on a single
(state, action, time) vertex. Constraint ``(s0, 0)`` carries only the budget
row ``1 - sum_a lam[s0, a, 0] >= 0``; every other ``(s, t)`` carries the flow row
``-sum_a lam[s, a, t] + sum_{a(s') = s} lam[s', a, t - 1] >= 0``.

In layered mode (each state lives at exactly one time) the time index is
dropped: vertices are ``(s, a)`` for states outside the final layer and there
is one constraint per such state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import errors
from ._kernel_py import SplitMix64
from .model import DpInstance, Verdict
from .mwu import ABS_TOL, OracleAnswer

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class SimplexVertex:
    s: int
    a: int
    t: int
    mass: float

    def key(self) -> tuple[int, int, int]:
        return (self.s, self.a, self.t)


class SigmaContext:
    """Vertex and constraint indexing of the dual feasibility problem at ``sigma``."""

    def __init__(self, inst: DpInstance, sigma: float, *, layered: bool | None = None):
        if not sigma > 0:
            raise errors.SigmaOutOfRange(f"sigma must be positive, got {sigma}")
        self.inst = inst
        self.sigma = float(sigma)
        self.layered = inst.layered if layered is None else bool(layered)
        if self.layered and not inst.layered:
            raise errors.LayerViolation("layered mode requested for an unlayered instance")
        self.ell = 2.0 * self.sigma
        T, S, A = inst.horizon, inst.num_states, inst.num_actions
        s0 = inst.initial_state

        if self.layered:
            live = [s for s in range(S) if inst.layer_of[s] < T]
            self.cons_state = np.array(live, dtype=np.int64)
            self.cons_time = inst.layer_of[self.cons_state].astype(np.int64)
            cidx = {s: i for i, s in enumerate(live)}
            self._cons_of = lambda s, t: cidx.get(s, -1)
            self.budget_idx = cidx[s0]
            vs = np.repeat(self.cons_state, A)
            va = np.tile(np.arange(A), len(live))
            vt = inst.layer_of[vs]
        else:
            self.cons_state = np.repeat(np.arange(S), T)
            self.cons_time = np.tile(np.arange(T), S)
            self._cons_of = lambda s, t: s * T + t if 0 <= t < T else -1
            self.budget_idx = s0 * T
            grid = np.stack(np.meshgrid(np.arange(S), np.arange(A), np.arange(T), indexing="ij"), -1)
            vs, va, vt = (grid[..., i].ravel() for i in range(3))
        self.v_state = np.ascontiguousarray(vs, dtype=np.int64)
        self.v_action = np.ascontiguousarray(va, dtype=np.int64)
        self.v_time = np.ascontiguousarray(vt, dtype=np.int64)
        self.v_reward = inst.reward[self.v_time, self.v_state, self.v_action].astype(np.float64)
        nxt = inst.next_state[self.v_time, self.v_state, self.v_action]
        self.v_budget = ((self.v_state == s0) & (self.v_time == 0)).astype(np.uint8)
        self.v_self = np.array([self._cons_of(s, t) for s, t in zip(self.v_state, self.v_time)], dtype=np.int64)
        self.v_next = np.array(
            [self._cons_of(int(n), int(t) + 1) for n, t in zip(nxt, self.v_time)], dtype=np.int64
        )
        self.num_constraints = len(self.cons_state)
        self.num_vertices = len(self.v_state)
        self._index = {(int(s), int(a), int(t)): j for j, (s, a, t) in enumerate(zip(vs, va, vt))}

    def mass(self, j: int) -> float:
        return self.sigma / self.v_reward[j]

    def vertex(self, j: int) -> SimplexVertex:
        return SimplexVertex(int(self.v_state[j]), int(self.v_action[j]), int(self.v_time[j]), self.mass(j))

    def index_of(self, s: int, a: int, t: int | None = None) -> int:
        if t is None:
            if not self.layered:
                raise errors.InvalidInput("time index required outside layered mode")
            t = int(self.inst.layer_of[s])
        try:
            return self._index[(s, a, t)]
        except KeyError:
            raise errors.InvalidInput(f"({s}, {a}, {t}) is not a vertex of this context") from None

    def constraint_label(self, i: int) -> tuple[int, int]:
        return int(self.cons_state[i]), int(self.cons_time[i])

    def constraint_index(self, s: int, t: int | None = None) -> int:
        if t is None:
            t = int(self.inst.layer_of[s])
        return self._cons_of(s, t)

    def at_initial(self) -> np.ndarray:
        """Vertex indices of the form ``(s0, a, 0)`` ordered by action."""
        return np.flatnonzero(self.v_budget)


def _vertex_index(ctx: SigmaContext, v) -> int:
    if isinstance(v, SimplexVertex):
        return ctx.index_of(v.s, v.a, v.t)
    if isinstance(v, tuple):
        return ctx.index_of(*v)
    return int(v)


def eval_f(ctx: SigmaContext, w, v) -> float:
    """Lagrangian value of vertex ``v`` under multipliers ``w`` (closed form)."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (ctx.num_constraints,):
        raise errors.DimensionMismatch(f"weights of shape {w.shape} for {ctx.num_constraints} constraints")
    if np.any(w < 0):
        raise errors.NegativeWeight("multipliers must be non-negative")
    return _f(ctx, w, _vertex_index(ctx, v))


def _f(ctx: SigmaContext, w: np.ndarray, j: int) -> float:
    b = ctx.budget_idx
    mass = ctx.sigma / ctx.v_reward[j]
    f = float(w[b])
    if ctx.v_budget[j]:
        f = f - mass * w[b]
    else:
        f = f - mass * w[ctx.v_self[j]]
    if ctx.v_next[j] >= 0:
        f = f + mass * w[ctx.v_next[j]]
    return float(f)


@dataclass
class QueryLedger:
    """Modeled cost of the inner oracle.

    Each simulated minimum-finding run over ``N`` vertices with failure
    probability ``p`` is charged ``ceil(sqrt(N)) * ceil(log2(1/p))`` queries.
    """

    qmf_runs: int = 0
    modeled_queries: int = 0
    scan_evaluations: int = 0

    def record_qmf(self, num_vertices: int, fail_prob: float, runs: int = 1) -> None:
        self.qmf_runs += runs
        self.modeled_queries += runs * qmf_query_cost(num_vertices, fail_prob)

    def record_scan(self, num_vertices: int, runs: int = 1) -> None:
        self.scan_evaluations += runs * num_vertices

    def as_dict(self) -> dict:
        return {
            "qmf_runs": self.qmf_runs,
            "modeled_queries": self.modeled_queries,
            "scan_evaluations": self.scan_evaluations,
        }


def ceil_sqrt(n: int) -> int:
    r = math.isqrt(n)
    return r if r * r == n else r + 1


def qmf_query_cost(num_vertices: int, fail_prob: float) -> int:
    return ceil_sqrt(num_vertices) * math.ceil(math.log2(1.0 / fail_prob))


def exact_argmax(ctx: SigmaContext, w, ledger: QueryLedger | None = None) -> tuple[SimplexVertex, float]:
    """Full scan; the first (lexicographically smallest) maximiser wins ties."""
    if ctx.num_vertices == 0:
        raise errors.InvalidInput("empty vertex set")
    w = np.asarray(w, dtype=np.float64)
    eval_f(ctx, w, 0)  # validates shape and sign once
    best, best_j = 0.0, -1
    for j in range(ctx.num_vertices):
        f = _f(ctx, w, j)
        if best_j < 0 or f > best:
            best, best_j = f, j
    if ledger is not None:
        ledger.record_scan(ctx.num_vertices)
    return ctx.vertex(best_j), best


@dataclass(frozen=True)
class ExactScan:
    """Deterministic full scan.

    By default the relaxed problem is declared infeasible only when the best
    value is negative, which is always a correct declaration. ``relaxed=True``
    accepts anything down to ``-delta``.
    """

    relaxed: bool = False
    kind: str = field(default="exact", init=False)

    def threshold(self, delta: float) -> float:
        return (-delta if self.relaxed else 0.0) - ABS_TOL


@dataclass(frozen=True)
class SimulatedQmf:
    """Classical stand-in for quantum minimum finding.

    With probability ``fail_prob`` the candidate is a uniformly random vertex
    instead of the maximiser. Values are floored to multiples of ``delta / 2``.
    ``fail_prob=None`` lets the solver budget it from the planned run count.
    """

    fail_prob: float | None = None
    seed: int = 0
    kind: str = field(default="qmf", init=False)

    def __post_init__(self):
        if self.fail_prob is not None and not 0 < self.fail_prob < 1:
            raise errors.InvalidInput(f"fail_prob must lie in (0, 1), got {self.fail_prob}")


@dataclass(frozen=True)
class OracleVerdict:
    accepted: bool
    vertex: SimplexVertex
    value: float
    quantized: float
    failed: bool = False


def quantize(value: float, grid: float) -> float:
    return math.floor(value / grid) * grid


def simulated_qmf(ctx: SigmaContext, w, strategy: SimulatedQmf, delta: float, rng: SplitMix64,
                  ledger: QueryLedger | None = None) -> OracleVerdict:
    """One simulated minimum-finding run (maximising ``f``).

    Consumes exactly two uniforms from ``rng`` per call, in the same order as
    the compiled kernel.
    """
    p_fail = strategy.fail_prob
    if p_fail is None:
        raise errors.InvalidInput("fail_prob must be set before running the oracle")
    grid = delta / 2.0
    top, top_val = exact_argmax(ctx, w)
    u1 = rng.uniform()
    u2 = rng.uniform()
    v, val, failed = top, top_val, False
    if u1 < p_fail:
        pick = min(int(u2 * ctx.num_vertices), ctx.num_vertices - 1)
        v = ctx.vertex(pick)
        val = eval_f(ctx, w, pick)
        failed = v.key() != top.key()
    q = quantize(val, grid)
    if ledger is not None:
        ledger.record_qmf(ctx.num_vertices, p_fail)
    return OracleVerdict(q >= -grid - ABS_TOL, v, val, q, failed)


def residuals(ctx: SigmaContext, v) -> dict[int, float]:
    """Sparse ``A lam_v - b`` for the single-vertex solution ``v``.

    Every constraint not listed is zero; the budget row is always listed.
    """
    j = _vertex_index(ctx, v)
    mass = ctx.sigma / ctx.v_reward[j]
    b = ctx.budget_idx
    out = {b: 1.0 - mass if ctx.v_budget[j] else 1.0}
    if not ctx.v_budget[j]:
        out[int(ctx.v_self[j])] = -mass
    if ctx.v_next[j] >= 0:
        out[int(ctx.v_next[j])] = mass
    worst = max(abs(x) for x in out.values())
    if worst > ctx.ell + ABS_TOL:
        raise errors.ResidualExceedsEll(f"residual {worst} exceeds ell = {ctx.ell}")
    return out


def residual_vector(ctx: SigmaContext, v) -> np.ndarray:
    dense = np.zeros(ctx.num_constraints)
    for i, x in residuals(ctx, v).items():
        dense[i] = x
    return dense


def constraint_residuals(ctx: SigmaContext, lam) -> np.ndarray:
    """Evaluate every dual row for a (dense, per-vertex) ``lam`` from the instance tables.

    Independent of the precomputed vertex-to-constraint maps; used for
    feasibility checks and to cross-check :func:`eval_f`.
    """
    inst = ctx.inst
    lam = np.asarray(lam, dtype=np.float64)
    outflow: dict[tuple[int, int], float] = {}
    inflow: dict[tuple[int, int], float] = {}
    for j in range(ctx.num_vertices):
        x = float(lam[j])
        if x == 0.0:
            continue
        s, a, t = int(ctx.v_state[j]), int(ctx.v_action[j]), int(ctx.v_time[j])
        outflow[(s, t)] = outflow.get((s, t), 0.0) + x
        succ = (int(inst.next_state[t, s, a]), t + 1)
        inflow[succ] = inflow.get(succ, 0.0) + x
    res = np.empty(ctx.num_constraints)
    s0 = inst.initial_state
    for i in range(ctx.num_constraints):
        key = ctx.constraint_label(i)
        if key == (s0, 0):
            res[i] = 1.0 - outflow.get(key, 0.0)
        else:
            res[i] = -outflow.get(key, 0.0) + inflow.get(key, 0.0)
    return res


def oracle_for_mwum(ctx: SigmaContext, strategy, delta: float, ledger: QueryLedger | None = None,
                    rng: SplitMix64 | None = None):
    """Adapter turning a strategy into the callback expected by :func:`mwu.run_feasibility`."""
    if strategy.kind == "qmf":
        if rng is None:
            rng = SplitMix64(strategy.seed)

        def oracle(p):
            verdict = simulated_qmf(ctx, p, strategy, delta, rng, ledger)
            if not verdict.accepted:
                return OracleAnswer(value=verdict.value)
            j = ctx.index_of(*verdict.vertex.key())
            return OracleAnswer(j, residual_vector(ctx, j), verdict.value)

    else:
        threshold = strategy.threshold(delta)

        def oracle(p):
            v, val = exact_argmax(ctx, p, ledger)
            if not val >= threshold:
                return OracleAnswer(value=val)
            j = ctx.index_of(*v.key())
            return OracleAnswer(j, residual_vector(ctx, j), val)

    return oracle


@dataclass
class AveragedSolution:
    """Running average of chosen vertices, stored as hit counts."""

    ctx: SigmaContext
    counts: np.ndarray
    rounds: int = 0

    @classmethod
    def empty(cls, ctx: SigmaContext) -> "AveragedSolution":
        return cls(ctx, np.zeros(ctx.num_vertices, dtype=np.int64), 0)

    @property
    def sigma(self) -> float:
        return self.ctx.sigma

    def lam(self) -> np.ndarray:
        if self.rounds == 0:
            return np.zeros(self.ctx.num_vertices)
        return self.counts * (self.ctx.sigma / self.ctx.v_reward) / self.rounds

    def lam_at(self, s: int, a: int, t: int = 0) -> float:
        j = self.ctx.index_of(s, a, t)
        return float(self.lam()[j])

    def lambda_at_initial(self) -> np.ndarray:
        """``lam[s0, a, 0]`` for every action ``a``."""
        out = np.zeros(self.ctx.inst.num_actions)
        lam = self.lam()
        for j in self.ctx.at_initial():
            out[self.ctx.v_action[j]] = lam[j]
        return out

    def sparse(self) -> dict[tuple[int, int, int], float]:
        lam = self.lam()
        return {self.ctx.vertex(j).key(): float(lam[j]) for j in np.flatnonzero(self.counts)}


def accumulate(avg: AveragedSolution, v) -> AveragedSolution:
    j = _vertex_index(avg.ctx, v)
    counts = avg.counts.copy()
    counts[j] += 1
    return AveragedSolution(avg.ctx, counts, avg.rounds + 1)


def combine_vertices(ctx: SigmaContext):
    """``combine`` hook for :func:`mwu.run_feasibility`: vertex indices to an :class:`AveragedSolution`."""

    def combine(xs):
        counts = np.bincount(np.asarray(xs, dtype=np.int64), minlength=ctx.num_vertices)
        return AveragedSolution(ctx, counts.astype(np.int64), len(xs))

    return combine


def check_dual_feasibility(ctx: SigmaContext, lam, delta: float) -> Verdict:
    """Evaluate every relaxed dual row; pass iff all residuals are ``>= -delta``."""
    if isinstance(lam, AveragedSolution):
        lam = lam.lam()
    elif isinstance(lam, dict):
        dense = np.zeros(ctx.num_vertices)
        for key, x in lam.items():
            dense[ctx.index_of(*key)] = x
        lam = dense
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape != (ctx.num_vertices,):
        raise errors.DimensionMismatch(f"lam of shape {lam.shape} for {ctx.num_vertices} vertices")
    if np.any(lam < 0):
        raise errors.NotOnSimplex("lam has negative entries")
    total = float(np.dot(ctx.v_reward, lam))
    if abs(total - ctx.sigma) > SIMPLEX_TOL * max(1.0, ctx.sigma):
        raise errors.NotOnSimplex(f"sum r * lam = {total}, expected sigma = {ctx.sigma}")
    res = constraint_residuals(ctx, lam)
    worst = int(np.argmin(res))
    ok = bool(res[worst] >= -delta - SIMPLEX_TOL)
    return Verdict(
        ok,
        f"min residual {res[worst]:.6g} at constraint {ctx.constraint_label(worst)}",
        ctx.constraint_label(worst),
        extra={"min_residual": float(res[worst]), "residuals": res},
    )
