"""Finite-horizon deterministic DP instances and the exact Bellman reference.

An instance has states ``0..S-1``, actions ``0..A-1`` and horizon ``T``.
Transitions are stored densely as two ``(T, S, A)`` integer arrays so that
time-homogeneous and time-dependent instances share every code path.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import errors

SCHEMA = "dp-instance/1"

_REQUIRED = ("num_states", "num_actions", "horizon", "initial_state", "time_dependent", "transitions")
_OPTIONAL = ("schema", "layered", "layer_of", "reward_bound", "reward_shift")


@dataclass(frozen=True, eq=False)
class DpInstance:
    num_states: int
    num_actions: int
    horizon: int
    initial_state: int
    time_dependent: bool
    next_state: np.ndarray  # (T, S, A)
    reward: np.ndarray  # (T, S, A), shifted so that every entry is >= 1
    reward_bound: int
    layered: bool = False
    layer_of: np.ndarray | None = None
    reward_shift: int = 0

    def __post_init__(self):
        self.next_state.setflags(write=False)
        self.reward.setflags(write=False)
        if self.layer_of is not None:
            self.layer_of.setflags(write=False)

    def transition(self, s: int, a: int, t: int = 0) -> tuple[int, int]:
        return int(self.next_state[t, s, a]), int(self.reward[t, s, a])

    def with_initial_state(self, s0: int) -> "DpInstance":
        raw = to_dict(self)
        raw["initial_state"] = int(s0)
        return validate_instance(raw)

    def __eq__(self, other):
        if not isinstance(other, DpInstance):
            return NotImplemented
        return to_dict(self) == to_dict(other)

    def __hash__(self):
        return hash(json.dumps(to_dict(self), sort_keys=True))


@dataclass(frozen=True)
class ValueTable:
    """Optimal values, ``values[t, s]`` for ``t`` in ``0..T``; row ``T`` is zero."""

    values: np.ndarray

    def value(self, s: int, t: int) -> int:
        return int(self.values[t, s])


@dataclass(frozen=True)
class Policy:
    """Time-dependent policy, ``actions[t, s]`` for ``t`` in ``0..T-1``."""

    actions: np.ndarray

    def action(self, s: int, t: int) -> int:
        return int(self.actions[t, s])


@dataclass(frozen=True)
class Verdict:
    ok: bool
    detail: str = ""
    location: Any = None
    extra: dict = field(default_factory=dict)

    def __bool__(self):
        return self.ok


def _as_int(x, what):
    if isinstance(x, bool) or not isinstance(x, (int, np.integer)):
        raise errors.InvalidInput(f"{what} must be an integer, got {x!r}")
    return int(x)


def validate_instance(raw: Mapping[str, Any]) -> DpInstance:
    """Build a :class:`DpInstance` from a parsed ``dp-instance/1`` document.

    Rewards below 1 trigger a uniform shift ``1 - min_reward`` which is
    recorded in ``reward_shift`` and added to ``reward_bound``.
    """
    if not isinstance(raw, Mapping):
        raise errors.InvalidInput("instance document must be a JSON object")
    unknown = set(raw) - set(_REQUIRED) - set(_OPTIONAL)
    if unknown:
        raise errors.InvalidInput(f"unknown fields: {sorted(unknown)}")
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise errors.InvalidInput(f"missing fields: {missing}")
    if raw.get("schema", SCHEMA) != SCHEMA:
        raise errors.InvalidInput(f"unsupported schema {raw['schema']!r}")

    S = _as_int(raw["num_states"], "num_states")
    A = _as_int(raw["num_actions"], "num_actions")
    T = _as_int(raw["horizon"], "horizon")
    s0 = _as_int(raw["initial_state"], "initial_state")
    time_dependent = raw["time_dependent"]
    if not isinstance(time_dependent, bool):
        raise errors.InvalidInput("time_dependent must be a boolean")
    if T < 1:
        raise errors.NonPositiveHorizon(f"horizon must be >= 1, got {T}")
    if A < 1:
        raise errors.EmptyActionSet("num_actions must be >= 1")
    if S < 1:
        raise errors.DimensionMismatch("num_states must be >= 1")
    if not 0 <= s0 < S:
        raise errors.DanglingStateIndex(f"initial_state {s0} outside [0, {S})")

    shape = (T, S, A, 2) if time_dependent else (S, A, 2)
    try:
        table = np.array(raw["transitions"], dtype=object)
    except ValueError as exc:  # ragged nesting
        raise errors.DimensionMismatch(f"transitions are ragged: {exc}") from None
    if table.shape != shape:
        raise errors.DimensionMismatch(f"transitions have shape {table.shape}, expected {shape}")
    for x in table.flat:
        _as_int(x, "transition entry")
    table = table.astype(np.int64)
    if not time_dependent:
        table = np.broadcast_to(table, (T, S, A, 2))
    nxt = np.ascontiguousarray(table[..., 0])
    rew = np.ascontiguousarray(table[..., 1])

    bad = np.argwhere((nxt < 0) | (nxt >= S))
    if len(bad):
        t, s, a = bad[0]
        raise errors.DanglingStateIndex(
            f"transition (t={t}, s={s}, a={a}) names state {nxt[t, s, a]} outside [0, {S})"
        )

    prior_shift = _as_int(raw.get("reward_shift", 0), "reward_shift")
    if prior_shift < 0:
        raise errors.InvalidInput("reward_shift must be non-negative")
    min_r = int(rew.min())
    shift = 1 - min_r if min_r < 1 else 0
    max_r = int(rew.max())
    if "reward_bound" in raw:
        bound = _as_int(raw["reward_bound"], "reward_bound")
        if bound < max_r:
            raise errors.InvalidInput(f"reward_bound {bound} below observed maximum reward {max_r}")
    else:
        bound = max_r
    rew = rew + shift
    bound += shift
    if bound < 1:
        raise errors.InvalidInput("reward_bound must be positive")

    layered = bool(raw.get("layered", False))
    layer_of = None
    if layered:
        if "layer_of" not in raw:
            raise errors.LayerViolation("layered instance needs layer_of")
        layer_of = np.array(raw["layer_of"], dtype=object)
        if layer_of.shape != (S,):
            raise errors.DimensionMismatch(f"layer_of has shape {layer_of.shape}, expected ({S},)")
        for x in layer_of:
            _as_int(x, "layer_of entry")
        layer_of = layer_of.astype(np.int64)
        if layer_of.min() < 0 or layer_of.max() > T:
            raise errors.LayerViolation(f"layer indices must lie in [0, {T}]")
        if layer_of[s0] != 0:
            raise errors.LayerViolation("initial state must sit in layer 0")
        for t in range(T):
            states = np.flatnonzero(layer_of == t)
            if len(states) == 0:
                continue
            succ = layer_of[nxt[t, states, :]]
            wrong = np.argwhere(succ != t + 1)
            if len(wrong):
                i, a = wrong[0]
                s = states[i]
                raise errors.LayerViolation(
                    f"state {s} (layer {t}) action {a} leads to state {nxt[t, s, a]} "
                    f"in layer {layer_of[nxt[t, s, a]]}, expected {t + 1}"
                )
    elif "layer_of" in raw:
        raise errors.LayerViolation("layer_of given for an instance not flagged layered")

    return DpInstance(
        num_states=S,
        num_actions=A,
        horizon=T,
        initial_state=s0,
        time_dependent=time_dependent,
        next_state=nxt,
        reward=rew,
        reward_bound=bound,
        layered=layered,
        layer_of=layer_of,
        reward_shift=prior_shift + shift,
    )


def make_instance(next_state, reward, initial_state=0, *, layer_of=None, reward_bound=None) -> DpInstance:
    """Convenience constructor from ``(S, A)`` or ``(T, S, A)`` arrays plus an explicit horizon row count."""
    nxt = np.asarray(next_state)
    rew = np.asarray(reward)
    if nxt.shape != rew.shape or nxt.ndim not in (3,):
        raise errors.DimensionMismatch("next_state and reward must both be (T, S, A) arrays")
    T, S, A = nxt.shape
    raw = {
        "num_states": S,
        "num_actions": A,
        "horizon": T,
        "initial_state": initial_state,
        "time_dependent": True,
        "transitions": np.stack([nxt, rew], axis=-1).tolist(),
    }
    if layer_of is not None:
        raw["layered"] = True
        raw["layer_of"] = [int(x) for x in layer_of]
    if reward_bound is not None:
        raw["reward_bound"] = reward_bound
    return validate_instance(raw)


def make_homogeneous(next_state, reward, horizon, initial_state=0, *, layer_of=None, reward_bound=None) -> DpInstance:
    nxt = np.asarray(next_state)
    rew = np.asarray(reward)
    if nxt.shape != rew.shape or nxt.ndim != 2:
        raise errors.DimensionMismatch("next_state and reward must both be (S, A) arrays")
    S, A = nxt.shape
    raw = {
        "num_states": S,
        "num_actions": A,
        "horizon": horizon,
        "initial_state": initial_state,
        "time_dependent": False,
        "transitions": np.stack([nxt, rew], axis=-1).tolist(),
    }
    if layer_of is not None:
        raw["layered"] = True
        raw["layer_of"] = [int(x) for x in layer_of]
    if reward_bound is not None:
        raw["reward_bound"] = reward_bound
    return validate_instance(raw)


def to_dict(inst: DpInstance) -> dict:
    """Canonical ``dp-instance/1`` document (rewards as stored, i.e. post-shift)."""
    pairs = np.stack([inst.next_state, inst.reward], axis=-1)
    if not inst.time_dependent:
        pairs = pairs[0]
    doc = {
        "schema": SCHEMA,
        "num_states": inst.num_states,
        "num_actions": inst.num_actions,
        "horizon": inst.horizon,
        "initial_state": inst.initial_state,
        "time_dependent": inst.time_dependent,
        "reward_bound": inst.reward_bound,
        "reward_shift": inst.reward_shift,
        "transitions": pairs.tolist(),
    }
    if inst.layered:
        doc["layered"] = True
        doc["layer_of"] = inst.layer_of.tolist()
    return doc


def dumps(inst: DpInstance) -> str:
    return json.dumps(to_dict(inst), separators=(",", ":")) + "\n"


def load_instance(path) -> DpInstance:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise errors.InvalidInput(f"{path}: not valid JSON ({exc})") from None
    return validate_instance(raw)


def save_instance(inst: DpInstance, path) -> None:
    Path(path).write_text(dumps(inst), encoding="utf-8")


def bellman_solve(inst: DpInstance) -> tuple[ValueTable, Policy]:
    """Exact backward induction; ties go to the smallest action index."""
    T, S = inst.horizon, inst.num_states
    values = np.zeros((T + 1, S), dtype=np.int64)
    actions = np.zeros((T, S), dtype=np.int64)
    for t in range(T - 1, -1, -1):
        q = inst.reward[t] + values[t + 1][inst.next_state[t]]
        actions[t] = q.argmax(axis=1)
        values[t] = q.max(axis=1)
    return ValueTable(values), Policy(actions)


def q_values(inst: DpInstance, table: ValueTable, s: int, t: int) -> np.ndarray:
    return inst.reward[t, s] + table.values[t + 1][inst.next_state[t, s]]


def optimal_action_set(inst: DpInstance, s: int, t: int, table: ValueTable | None = None) -> frozenset:
    if table is None:
        table, _ = bellman_solve(inst)
    q = q_values(inst, table, s, t)
    return frozenset(int(a) for a in np.flatnonzero(q == q.max()))


def check_primal_feasibility(inst: DpInstance, table: ValueTable) -> Verdict:
    """Check ``v[s,t] >= r_t(s,a) + v[a(s),t+1]`` everywhere, with one tight action per (s, t)."""
    v = np.asarray(table.values)
    if v.shape != (inst.horizon + 1, inst.num_states):
        raise errors.DimensionMismatch(
            f"value table has shape {v.shape}, expected {(inst.horizon + 1, inst.num_states)}"
        )
    if np.any(v[inst.horizon] != 0):
        s = int(np.flatnonzero(v[inst.horizon])[0])
        return Verdict(False, f"terminal value v[{s},{inst.horizon}] is not 0", (s, inst.horizon))
    for s in range(inst.num_states):
        for t in range(inst.horizon):
            rhs = inst.reward[t, s] + v[t + 1][inst.next_state[t, s]]
            below = np.flatnonzero(v[t, s] < rhs)
            if len(below):
                a = int(below[0])
                return Verdict(
                    False,
                    f"v[{s},{t}] = {v[t, s]} < r + v_next = {rhs[a]} for action {a}",
                    ((s, t), a),
                )
            if not np.any(v[t, s] == rhs):
                return Verdict(False, f"no binding constraint at (s={s}, t={t})", ((s, t), None))
    return Verdict(True, "all constraints satisfied and binding somewhere")


def compute_rho(inst: DpInstance, override: int | None = None) -> int:
    if override is not None:
        override = int(override)
        if override < 1:
            raise errors.OverrideTooSmall(f"rho override must be >= 1, got {override}")
        return override
    return inst.horizon * inst.reward_bound


def rollout(inst: DpInstance, actions_by_time, s: int | None = None, t0: int = 0) -> tuple[list, int]:
    """Follow ``actions_by_time[k]`` from ``(s, t0)``; returns the (state, time, action) trace and total reward."""
    s = inst.initial_state if s is None else s
    trace, total = [], 0
    for k, a in enumerate(actions_by_time):
        t = t0 + k
        trace.append((s, t, int(a)))
        total += int(inst.reward[t, s, a])
        s = int(inst.next_state[t, s, a])
    return trace, total


def brute_force_value(inst: DpInstance, s: int | None = None) -> int:
    """Best cumulative reward over every open-loop action sequence.

    Dynamics are deterministic, so each time-dependent policy induces exactly
    one sequence from the start state and every sequence is realised by some
    policy.
    """
    s = inst.initial_state if s is None else s
    best = -1
    for seq in itertools.product(range(inst.num_actions), repeat=inst.horizon):
        _, total = rollout(inst, seq, s)
        best = max(best, total)
    return best


def policy_enumeration_value(inst: DpInstance, limit: int = 10**6) -> int:
    """Maximum over all full time-dependent policies ``(s, t) -> a``; only for tiny instances."""
    S, A, T = inst.num_states, inst.num_actions, inst.horizon
    count = A ** (S * T)
    if count > limit:
        raise errors.TooLarge(f"{count} policies exceed the enumeration limit {limit}")
    best = -1
    for flat in itertools.product(range(A), repeat=S * T):
        pol = np.array(flat).reshape(T, S)
        s, total = inst.initial_state, 0
        for t in range(T):
            a = pol[t, s]
            total += int(inst.reward[t, s, a])
            s = int(inst.next_state[t, s, a])
        best = max(best, total)
    return best


def value_bounds_hold(inst: DpInstance, table: ValueTable) -> Verdict:
    """Entry bounds ``T-t <= v <= (T-t) r_max`` plus the aggregate bounds.

    The aggregate ``|S| C(T,2) <= sum v <= |S| C(T,2) r_max`` is taken over
    ``t = 1..T``, the range on which it is exactly the sum of the entry bounds.
    Over ``t = 0..T-1`` the upper bound fails already for ``T = 1``.
    """
    T, S, R = inst.horizon, inst.num_states, inst.reward_bound
    v = table.values
    for t in range(T + 1):
        lo, hi = T - t, (T - t) * R
        if v[t].min() < lo or v[t].max() > hi:
            return Verdict(False, f"entry bound broken at t={t}", t)
    total = int(v[1:].sum())
    pairs = math.comb(T, 2)
    if not S * pairs <= total <= S * pairs * R:
        return Verdict(False, f"sum {total} outside [{S * pairs}, {S * pairs * R}]")
    return Verdict(True)


def policy_trace(inst: DpInstance, policy: Policy, s: int | None = None, t0: int = 0) -> tuple[list, int]:
    """Follow a closed-loop policy from ``(s, t0)``; returns the (state, time, action) trace and total reward."""
    s = inst.initial_state if s is None else s
    trace, total = [], 0
    for t in range(t0, inst.horizon):
        a = policy.action(s, t)
        trace.append((s, t, a))
        total += int(inst.reward[t, s, a])
        s = int(inst.next_state[t, s, a])
    return trace, total
