"""Minimum set cover as a layered DP.

Decision ``t`` (for ``t < m``) looks at set ``t + 1``: action ``a_0`` skips it
for reward 1, action ``a_1`` takes it for reward 0. Decision ``m`` moves to the
single terminus with reward ``m + 1`` if every element is covered and 0
otherwise (both actions alike). The state is ``(t, U_t)`` with ``U_t`` the
still-uncovered elements; the chosen subfamily is read back from the actions.
Rewards are stored pre-shift and lifted by one on validation.

State indices: layer by layer, reachable ``U`` masks in increasing order
(bit ``e - 1`` stands for element ``e``), then the terminus.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import errors
from ..model import DpInstance, make_homogeneous

SCHEMA = "msc/1"
BRUTE_FORCE_LIMIT = 20
NO_COVER = "no cover"
A_SKIP = 0
A_TAKE = 1
TERMINUS = "terminus"


@dataclass(frozen=True)
class MscInstance:
    universe_size: int
    family: tuple[frozenset, ...]

    def __post_init__(self):
        fam = tuple(frozenset(int(e) for e in f) for f in self.family)
        if len(fam) < 1:
            raise errors.InvalidInput("the family needs at least one set")
        if self.universe_size < 1:
            raise errors.InvalidInput("universe_size must be >= 1")
        for f in fam:
            if any(not 1 <= e <= self.universe_size for e in f):
                raise errors.InvalidInput(f"set {sorted(f)} is not a subset of 1..{self.universe_size}")
        object.__setattr__(self, "family", fam)

    @property
    def m(self) -> int:
        return len(self.family)

    def mask(self, k: int) -> int:
        return sum(1 << (e - 1) for e in self.family[k])


def random_msc(universe_size: int, m: int, seed: int, density: float = 0.4) -> MscInstance:
    rng = np.random.default_rng(seed)
    fam = [frozenset(int(e) + 1 for e in np.flatnonzero(rng.random(universe_size) < density)) for _ in range(m)]
    return MscInstance(universe_size, tuple(fam))


def msc_states(inst: MscInstance) -> list:
    """State labels in index order: ``(t, U_mask)`` for reachable masks, then the terminus."""
    full = (1 << inst.universe_size) - 1
    layers = [{full}]
    for k in range(inst.m):
        cover = inst.mask(k)
        layers.append({u for u in layers[-1]} | {u & ~cover for u in layers[-1]})
    labels = [(t, u) for t, layer in enumerate(layers) for u in sorted(layer)]
    labels.append((inst.m + 1, TERMINUS))
    return labels


def encode_msc(inst: MscInstance) -> DpInstance:
    m = inst.m
    labels = msc_states(inst)
    index = {lab: k for k, lab in enumerate(labels)}
    term = index[(m + 1, TERMINUS)]
    S = len(labels)
    nxt = np.zeros((S, 2), dtype=np.int64)
    rew = np.zeros((S, 2), dtype=np.int64)
    for k, (t, u) in enumerate(labels):
        if u == TERMINUS:
            nxt[k] = k
        elif t == m:
            nxt[k] = term
            rew[k] = m + 1 if u == 0 else 0
        else:
            nxt[k, A_SKIP] = index[(t + 1, u)]
            rew[k, A_SKIP] = 1
            nxt[k, A_TAKE] = index[(t + 1, u & ~inst.mask(t))]
    layer_of = [lab[0] for lab in labels]
    return make_homogeneous(nxt, rew, m + 1, 0, layer_of=layer_of, reward_bound=m + 1)


def decode_msc(trace, inst: MscInstance):
    """``(cover indices, size)`` (0-based set indices) or :data:`NO_COVER`."""
    steps = [tuple(int(x) for x in st) for st in getattr(trace, "steps", trace)]
    m = inst.m
    if len(steps) != m + 1:
        raise errors.TraceMismatch(f"trace has {len(steps)} steps, expected {m + 1}")
    labels = msc_states(inst)
    full = (1 << inst.universe_size) - 1
    u = full
    taken = []
    for t, (s, ts, a) in enumerate(steps):
        if ts != t or not 0 <= s < len(labels) or labels[s] != (t, u):
            raise errors.TraceMismatch(f"step {t} names state {s}, expected label {(t, u)}")
        if a not in (A_SKIP, A_TAKE):
            raise errors.TraceMismatch(f"unknown action {a}")
        if t < m and a == A_TAKE:
            taken.append(t)
            u &= ~inst.mask(t)
    if u != 0:
        return NO_COVER
    return tuple(taken), len(taken)


def brute_force_msc(inst: MscInstance):
    if inst.m > BRUTE_FORCE_LIMIT:
        raise errors.TooLarge(f"m = {inst.m} exceeds the brute-force limit {BRUTE_FORCE_LIMIT}")
    full = (1 << inst.universe_size) - 1
    masks = [inst.mask(k) for k in range(inst.m)]
    for size in range(1, inst.m + 1):
        for combo in itertools.combinations(masks, size):
            covered = 0
            for x in combo:
                covered |= x
            if covered == full:
                return size
    return NO_COVER


def msc_to_dict(inst: MscInstance) -> dict:
    return {"schema": SCHEMA, "universe_size": inst.universe_size, "sets": [sorted(f) for f in inst.family]}


def msc_from_dict(raw) -> MscInstance:
    if not isinstance(raw, dict) or raw.get("schema", SCHEMA) != SCHEMA:
        raise errors.InvalidInput("not an msc/1 document")
    try:
        n, sets = raw["universe_size"], raw["sets"]
    except KeyError as exc:
        raise errors.InvalidInput(f"missing field {exc}") from None
    if not isinstance(n, int) or isinstance(n, bool) or not isinstance(sets, list):
        raise errors.InvalidInput("universe_size must be an integer and sets a list")
    for f in sets:
        if not isinstance(f, list) or not all(isinstance(e, int) and not isinstance(e, bool) for e in f):
            raise errors.InvalidInput("every set must be a list of integers")
    return MscInstance(n, tuple(sets))


def load_msc(path) -> MscInstance:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise errors.InvalidInput(f"{path}: not valid JSON ({exc})") from None
    return msc_from_dict(raw)


def save_msc(inst: MscInstance, path) -> None:
    Path(path).write_text(json.dumps(msc_to_dict(inst)) + "\n", encoding="utf-8")
