"""Held-Karp reduction of the travelling salesperson problem to a layered DP.

Vertices are ``1..n`` and tours start and end at vertex 1. A state is a pair
``(H, i)``: ``H`` the set of vertices still to be left, ``i`` the current one.
The initial state is ``(V, 1)`` at layer 0; after ``k`` moves the state sits in
layer ``k`` with ``|H| = n - k`` (vertex 1 leaves ``H`` on the first move).
Action ``j - 1`` moves to vertex ``j``. A legal move ``i -> j`` earns
``cbar + 1 - c[i][j]``; from the last vertex, action 0 closes the tour at
vertex 1 with the return-edge reward. Every illegal action drops into a
zero-reward null chain (one null state per layer), so all actions are total.
Rewards are stored pre-shift and lifted by one on validation.

State indices: layer by layer; inside a layer, genuine states ordered by
``(bitmask(H), i)`` with bit ``v - 1`` standing for vertex ``v``, then the
layer's null state.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import errors
from ..model import DpInstance, make_homogeneous

SCHEMA = "tsp/1"
BRUTE_FORCE_LIMIT = 10
NULL = "null"


@dataclass(frozen=True)
class TspGraph:
    n: int
    costs: np.ndarray  # (n, n); costs[i-1, j-1] is the cost of i -> j
    cost_bound: int

    def __post_init__(self):
        c = np.asarray(self.costs)
        if c.shape != (self.n, self.n):
            raise errors.DimensionMismatch(f"costs have shape {c.shape}, expected {(self.n, self.n)}")
        if self.cost_bound < 1:
            raise errors.InvalidInput("cost_bound must be positive")
        off = c[~np.eye(self.n, dtype=bool)]
        if off.size and (off.min() < 0 or off.max() > self.cost_bound):
            raise errors.InvalidInput(f"edge costs must lie in [0, {self.cost_bound}]")
        object.__setattr__(self, "costs", c.astype(np.int64))

    def cost(self, i: int, j: int) -> int:
        return int(self.costs[i - 1, j - 1])

    def tour_cost(self, tour) -> int:
        return sum(self.cost(a, b) for a, b in zip(tour, tour[1:]))


def random_graph(n: int, cost_bound: int, seed: int, *, symmetric: bool = False) -> TspGraph:
    rng = np.random.default_rng(seed)
    c = rng.integers(0, cost_bound + 1, size=(n, n))
    if symmetric:
        c = np.triu(c, 1)
        c = c + c.T
    np.fill_diagonal(c, 0)
    return TspGraph(n, c, cost_bound)


def tsp_states(n: int) -> list:
    """State labels in index order: ``(layer, H_mask, i)`` or ``(layer, "null")``."""
    if n < 3:
        raise errors.GraphTooSmall(f"need n >= 3 vertices, got {n}")
    full = (1 << n) - 1
    labels = [(0, full, 1)]
    rest = range(2, n + 1)
    for k in range(1, n):
        layer = []
        for H in itertools.combinations(rest, n - k):
            mask = sum(1 << (v - 1) for v in H)
            layer.extend((k, mask, i) for i in H)
        labels.extend(sorted(layer, key=lambda x: (x[1], x[2])))
        labels.append((k, NULL))
    labels.append((n, 0, 1))
    labels.append((n, NULL))
    return labels


def encode_tsp(g: TspGraph) -> DpInstance:
    n, cbar = g.n, g.cost_bound
    labels = tsp_states(n)
    index = {lab: k for k, lab in enumerate(labels)}
    S, A = len(labels), n
    nxt = np.zeros((S, A), dtype=np.int64)
    rew = np.zeros((S, A), dtype=np.int64)
    layer_of = np.array([lab[0] for lab in labels], dtype=np.int64)
    for k, lab in enumerate(labels):
        layer = lab[0]
        if layer == n:
            nxt[k] = k  # beyond the horizon
            continue
        null_next = index[(layer + 1, NULL)]
        nxt[k] = null_next
        if lab[1] == NULL:
            continue
        _, mask, i = lab
        left = mask & ~(1 << (i - 1))
        if left == 0:
            nxt[k, 0] = index[(n, 0, 1)]
            rew[k, 0] = cbar + 1 - g.cost(i, 1)
            continue
        for j in range(1, n + 1):
            if left >> (j - 1) & 1:
                nxt[k, j - 1] = index[(layer + 1, left, j)]
                rew[k, j - 1] = cbar + 1 - g.cost(i, j)
    return make_homogeneous(nxt, rew, n, 0, layer_of=layer_of, reward_bound=cbar + 1)


def _steps(trace):
    steps = getattr(trace, "steps", trace)
    return [tuple(int(x) for x in st) for st in steps]


def decode_tsp(trace, g: TspGraph) -> tuple[tuple[int, ...], int]:
    """Tour ``(1, ..., 1)`` and its cost from a trace on ``encode_tsp(g)``."""
    steps = _steps(trace)
    if len(steps) != g.n:
        raise errors.NotHamiltonian(f"trace has {len(steps)} moves, a tour needs {g.n}")
    tour = [1] + [a + 1 for _, _, a in steps]
    inner = tour[1:-1]
    if tour[-1] != 1 or sorted(inner) != list(range(2, g.n + 1)):
        raise errors.NotHamiltonian(f"trace does not decode to a Hamiltonian cycle: {tour}")
    return tuple(tour), g.tour_cost(tour)


def value_to_cost(g: TspGraph, value: int, shift: int = 1) -> int:
    """Invert ``v* = n (cbar + 1 + shift) - cost``."""
    return g.n * (g.cost_bound + 1 + shift) - int(value)


def brute_force_tsp(g: TspGraph) -> int:
    if g.n > BRUTE_FORCE_LIMIT:
        raise errors.TooLarge(f"n = {g.n} exceeds the brute-force limit {BRUTE_FORCE_LIMIT}")
    best = None
    for perm in itertools.permutations(range(2, g.n + 1)):
        c = g.tour_cost((1, *perm, 1))
        best = c if best is None or c < best else best
    return best


def graph_to_dict(g: TspGraph) -> dict:
    return {"schema": SCHEMA, "n": g.n, "cost_bound": g.cost_bound, "costs": g.costs.tolist()}


def graph_from_dict(raw) -> TspGraph:
    if not isinstance(raw, dict) or raw.get("schema", SCHEMA) != SCHEMA:
        raise errors.InvalidInput("not a tsp/1 document")
    try:
        n, bound, costs = raw["n"], raw["cost_bound"], raw["costs"]
    except KeyError as exc:
        raise errors.InvalidInput(f"missing field {exc}") from None
    if not all(isinstance(x, int) and not isinstance(x, bool) for x in (n, bound)):
        raise errors.InvalidInput("n and cost_bound must be integers")
    if n < 3:
        raise errors.GraphTooSmall(f"need n >= 3 vertices, got {n}")
    try:
        c = np.array(costs, dtype=np.int64)
    except (TypeError, ValueError):
        raise errors.InvalidInput("costs must be an integer matrix") from None
    return TspGraph(n, c, bound)


def load_graph(path) -> TspGraph:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise errors.InvalidInput(f"{path}: not valid JSON ({exc})") from None
    return graph_from_dict(raw)


def save_graph(g: TspGraph, path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g)) + "\n", encoding="utf-8")
