"""Multiplicative weights: the experts algorithm, its regret audit, and the
linear-feasibility driver over an approximate Lagrangian oracle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator

import numpy as np

from . import errors
from .model import Verdict

ABS_TOL = 1e-12
RENORM_HIGH = 1e100
RENORM_LOW = 1e-100


def seq_sum(values) -> float:
    """Left-to-right float sum; matches the compiled kernel bit for bit."""
    total = 0.0
    for v in values:
        total += float(v)
    return total


@dataclass
class WeightState:
    weights: np.ndarray
    round: int = 0

    @classmethod
    def uniform(cls, n: int) -> "WeightState":
        return cls(np.ones(n, dtype=np.float64), 0)

    @property
    def p(self) -> np.ndarray:
        return self.weights / seq_sum(self.weights)


def cost_vector(entries) -> np.ndarray:
    m = np.asarray(entries, dtype=np.float64)
    if m.size and np.max(np.abs(m)) > 1.0 + ABS_TOL:
        raise errors.CostOutOfRange(f"cost entries must lie in [-1, 1], max |m| = {np.max(np.abs(m))}")
    return m


@dataclass(frozen=True)
class FeasibilityConfig:
    delta: float
    ell: float
    num_constraints: int
    epsilon: float
    rounds: int
    theorem_rounds: int
    variant: str = "approximate"

    @property
    def certified(self) -> bool:
        return self.rounds == self.theorem_rounds


# (epsilon divisor, rounds multiplier, minimum ell / delta)
_VARIANTS = {
    "approximate": (6.0, 18.0, 1.0 / 3.0),
    "exact": (4.0, 8.0, 1.0 / 2.0),
}


def compute_config(
    delta: float,
    ell: float,
    num_constraints: int,
    override: int | None = None,
    *,
    variant: str = "approximate",
) -> FeasibilityConfig:
    """Step size and round count for the feasibility driver.

    ``variant="approximate"`` gives ``eps = delta/(6 ell)`` and
    ``K = ceil(18 ell^2 ln s / delta^2)`` for a delta-approximate oracle;
    ``"exact"`` gives the constants for an exact oracle (``4`` and ``8``).
    ``K`` is clamped to at least 1, which matters when ``s = 1``.
    """
    try:
        div, mult, min_ratio = _VARIANTS[variant]
    except KeyError:
        raise errors.InvalidInput(f"unknown variant {variant!r}") from None
    if not delta > 0:
        raise errors.InvalidInput("delta must be positive")
    if num_constraints < 1:
        raise errors.InvalidInput("need at least one constraint")
    if ell < min_ratio * delta:
        raise errors.EllTooSmall(f"ell = {ell} is below {min_ratio:.3g} * delta = {min_ratio * delta}")
    eps = delta / (div * ell)
    k = max(1, math.ceil(mult * ell * ell * math.log(num_constraints) / (delta * delta)))
    rounds = k
    if override is not None:
        if override < 1:
            raise errors.InvalidInput("rounds override must be >= 1")
        rounds = int(override)
    return FeasibilityConfig(delta, ell, num_constraints, eps, rounds, k, variant)


def mw_update(state: WeightState, m, epsilon: float) -> WeightState:
    if not 0 < epsilon <= 0.5:
        raise errors.EpsilonOutOfRange(f"epsilon must lie in (0, 1/2], got {epsilon}")
    m = cost_vector(m)
    if m.shape != state.weights.shape:
        raise errors.DimensionMismatch(f"cost vector of length {m.size} for {state.weights.size} weights")
    return WeightState(state.weights * (1.0 - epsilon * m), state.round + 1)


@dataclass
class RoundRecord:
    round: int
    p: np.ndarray | None
    m: np.ndarray
    x: Any = None
    accepted: bool = True
    value: float | None = None


@dataclass
class Transcript:
    epsilon: float
    n: int
    records: list[RoundRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self) -> Iterator[RoundRecord]:
        return iter(self.records)


def mw_run_generic(n: int, epsilon: float, costs, rounds: int) -> Transcript:
    """Run the experts algorithm for ``rounds`` rounds.

    ``costs`` is either an iterable of cost vectors or a callable taking
    ``(round, p)`` and returning the cost vector, so adaptive adversaries work.
    """
    if not 0 < epsilon <= 0.5:
        raise errors.EpsilonOutOfRange(f"epsilon must lie in (0, 1/2], got {epsilon}")
    source = costs if callable(costs) else _iter_source(costs)
    state = WeightState.uniform(n)
    tr = Transcript(epsilon, n)
    for k in range(rounds):
        p = state.p
        m = cost_vector(source(k, p))
        tr.records.append(RoundRecord(k + 1, p, m))
        state = mw_update(state, m, epsilon)
        state = _renormalized(state)
    return tr


def _iter_source(costs: Iterable):
    it = iter(costs)

    def source(k, p):
        return next(it)

    return source


def _renormalized(state: WeightState) -> WeightState:
    total = seq_sum(state.weights)
    if total > RENORM_HIGH or total < RENORM_LOW:
        return WeightState(state.weights / total, state.round)
    return state


def derive_distributions(transcript: Transcript) -> np.ndarray:
    """Recompute every round's distribution from the costs alone (log domain)."""
    n = transcript.n
    logw = np.zeros(n)
    out = np.empty((len(transcript), n))
    for k, rec in enumerate(transcript):
        z = np.exp(logw - logw.max())
        out[k] = z / z.sum()
        logw = logw + np.log1p(-transcript.epsilon * rec.m)
    return out


def regret_audit(transcript: Transcript, epsilon: float | None = None, n: int | None = None, tol: float = 1e-9) -> Verdict:
    """Check the experts regret bound for every expert.

    For each ``i``: ``sum_t m_t . p_t <= sum_t m_t[i] + eps sum_t |m_t[i]| + ln(n)/eps``.
    Distributions are re-derived from the costs; recorded ones that disagree
    are reported as a mismatch.
    """
    eps = transcript.epsilon if epsilon is None else epsilon
    n = transcript.n if n is None else n
    if len(transcript) == 0:
        return Verdict(True, "empty transcript", extra={"worst_margin": math.log(n) / eps})
    p = derive_distributions(transcript)
    M = np.array([rec.m for rec in transcript])
    mismatch = 0.0
    for k, rec in enumerate(transcript):
        if rec.p is not None:
            mismatch = max(mismatch, float(np.max(np.abs(rec.p - p[k]))))
    if mismatch > tol:
        return Verdict(False, f"recorded distributions disagree with the update rule by {mismatch:.3g}",
                       extra={"p_mismatch": mismatch})
    lhs = float(np.einsum("ki,ki->", M, p))
    rhs = M.sum(axis=0) + eps * np.abs(M).sum(axis=0) + math.log(n) / eps
    margins = rhs - lhs
    worst = int(np.argmin(margins))
    ok = bool(margins[worst] >= -tol)
    return Verdict(
        ok,
        f"worst expert {worst}: margin {margins[worst]:.6g}",
        worst,
        extra={"worst_margin": float(margins[worst]), "lhs": lhs, "p_mismatch": mismatch},
    )


@dataclass
class OracleAnswer:
    """Reply of an approximate Lagrangian oracle.

    ``x`` is the point, ``residual`` its unscaled ``A x - b``; ``None`` for both
    means the oracle declared the relaxed problem infeasible.
    """

    x: Any = None
    residual: np.ndarray | None = None
    value: float | None = None

    @property
    def feasible(self) -> bool:
        return self.residual is not None


Oracle = Callable[[np.ndarray], OracleAnswer]


@dataclass
class Feasible:
    average_solution: Any
    transcript: Transcript | None
    rounds: int
    certified: bool = True


@dataclass
class Infeasible:
    certificate: np.ndarray
    round: int
    transcript: Transcript | None = None


def run_feasibility(
    config: FeasibilityConfig,
    oracle: Oracle,
    *,
    combine: Callable[[list], Any] | None = None,
    record_p: bool = False,
) -> Feasible | Infeasible:
    """Drive ``oracle`` for ``config.rounds`` rounds.

    Each accepted answer contributes the cost ``m = residual / ell``. Points are
    averaged with ``combine`` (default: arithmetic mean of numpy arrays).
    """
    s = config.num_constraints
    state = WeightState.uniform(s)
    tr = Transcript(config.epsilon, s)
    xs = []
    for k in range(config.rounds):
        p = state.p
        ans = oracle(p)
        if not ans.feasible:
            tr.records.append(RoundRecord(k + 1, p if record_p else None, np.zeros(s), None, False, ans.value))
            return Infeasible(p, k + 1, tr)
        res = np.asarray(ans.residual, dtype=np.float64)
        if res.shape != (s,):
            raise errors.DimensionMismatch(f"residual of shape {res.shape} for {s} constraints")
        worst = float(np.max(np.abs(res)))
        if worst > config.ell + ABS_TOL:
            raise errors.ResidualExceedsEll(f"|A x - b| = {worst} exceeds ell = {config.ell}")
        m = res / config.ell
        tr.records.append(RoundRecord(k + 1, p if record_p else None, m, ans.x, True, ans.value))
        xs.append(ans.x)
        state = WeightState(state.weights * (1.0 - config.epsilon * m), k + 1)
        state = _renormalized(state)
    if combine is None:
        avg = np.mean(np.asarray(xs, dtype=np.float64), axis=0)
    else:
        avg = combine(xs)
    return Feasible(avg, tr, config.rounds, config.certified)


def export_transcript(transcript: Transcript, fh, *, include_p: bool = False, vertex_label=None) -> int:
    """Write one JSON object per round; returns the number of lines."""
    count = 0
    for rec in transcript:
        nz = np.flatnonzero(rec.m)
        row = {
            "round": rec.round,
            "m_sparse": {str(int(i)): float(rec.m[i]) for i in nz},
            "accepted": rec.accepted,
        }
        if include_p and rec.p is not None:
            row["p"] = [float(x) for x in rec.p]
        if rec.x is not None:
            if vertex_label is not None:
                row["chosen_vertex"] = vertex_label(rec.x)
            else:
                x = rec.x
                row["x"] = x.tolist() if isinstance(x, np.ndarray) else x
        fh.write(json.dumps(row, separators=(",", ":")) + "\n")
        count += 1
    return count
