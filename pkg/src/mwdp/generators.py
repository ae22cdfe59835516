"""Seeded instance generators: uniform random instances and the adversarial twin family."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import errors
from .model import DpInstance, make_homogeneous, make_instance

A_LEFT = 0
A_RIGHT = 1


def gen_random_instance(
    num_states: int,
    num_actions: int,
    horizon: int,
    reward_max: int,
    seed: int,
    *,
    time_dependent: bool = True,
    initial_state: int = 0,
) -> DpInstance:
    if min(num_states, num_actions, horizon, reward_max) < 1:
        raise errors.InvalidInput("sizes and reward_max must all be >= 1")
    rng = np.random.default_rng(seed)
    rows = horizon if time_dependent else 1
    nxt = rng.integers(0, num_states, size=(rows, num_states, num_actions))
    rew = rng.integers(1, reward_max + 1, size=(rows, num_states, num_actions))
    if time_dependent:
        return make_instance(nxt, rew, initial_state, reward_bound=reward_max)
    return make_homogeneous(nxt[0], rew[0], horizon, initial_state, reward_bound=reward_max)


@dataclass(frozen=True)
class AdversarialPair:
    instance_1: DpInstance
    instance_2: DpInstance
    special_pair: tuple[int, int]
    structure: dict


def _tree_levels(n: int) -> list[int]:
    """Level sizes from the leaves (``ceil(n/2)``) up to the root (1)."""
    sizes = [math.ceil(n / 2)]
    while sizes[-1] > 1:
        sizes.append(math.ceil(sizes[-1] / 2))
    return sizes


def gen_adversarial_pair(
    n: int,
    horizon: int,
    seed: int = 0,
    *,
    num_actions: int = 3,
    special: tuple[int, int] | None = None,
) -> AdversarialPair:
    """Two homogeneous instances that differ only at one (state, action) entry.

    Layout: a binary tree ``S_0`` rooted at the initial state (index 0), whose
    left/right actions route down to the ``n`` states of ``S_1`` with reward 0;
    every other action stays put in the tree with reward 1. ``S_1`` feeds the
    absorbing zero-reward sink ``S_B``. In ``instance_2`` the special pair
    leads into the absorbing goal state ``S_G`` with reward ``T + 1``; the goal
    loops with reward 2, so descending at once is strictly optimal.

    ``special`` is ``(i, a)`` with ``i`` indexing ``S_1``; drawn from ``seed``
    when omitted. Rewards are given pre-shift and lifted by one on validation.
    """
    if n < 2:
        raise errors.InvalidInput("n must be >= 2")
    if num_actions < 3:
        raise errors.InvalidInput("need at least 3 actions (left, right and a staying action)")
    depth = math.ceil(math.log2(n))
    if horizon < depth + 1:
        raise errors.HorizonTooShort(
            f"horizon {horizon} too short: reaching S_1 takes {depth} steps plus one to act there"
        )
    rng = np.random.default_rng(seed)
    levels = _tree_levels(n)  # leaves first
    assert len(levels) == depth
    tree_size = sum(levels)

    # state indices: tree (root level first), then S_1, S_B, S_G
    level_start = {}
    idx = 0
    for lv in range(len(levels) - 1, -1, -1):
        level_start[lv] = idx
        idx += levels[lv]
    s1 = tree_size
    sb = s1 + n
    sg = sb + n
    S = sg + 1
    A = num_actions

    nxt = np.zeros((S, A), dtype=np.int64)
    rew = np.zeros((S, A), dtype=np.int64)
    for lv in range(len(levels)):
        for i in range(levels[lv]):
            s = level_start[lv] + i
            if lv == 0:
                left = s1 + min(2 * i, n - 1)
                right = s1 + min(2 * i + 1, n - 1)
            else:
                below = levels[lv - 1]
                left = level_start[lv - 1] + min(2 * i, below - 1)
                right = level_start[lv - 1] + min(2 * i + 1, below - 1)
            nxt[s, :] = s
            rew[s, :] = 1
            nxt[s, A_LEFT], rew[s, A_LEFT] = left, 0
            nxt[s, A_RIGHT], rew[s, A_RIGHT] = right, 0
    nxt[s1:sb, :] = sb + rng.integers(0, n, size=(n, A))
    rew[s1:sb, :] = 0
    nxt[sb:sg, :] = np.arange(sb, sg)[:, None]
    rew[sb:sg, :] = 0
    nxt[sg, :] = sg
    rew[sg, :] = 2

    if special is None:
        special = (int(rng.integers(0, n)), int(rng.integers(0, A)))
    i_bar, a_bar = special
    if not (0 <= i_bar < n and 0 <= a_bar < A):
        raise errors.InvalidInput(f"special pair {special} out of range")
    s_bar = s1 + i_bar

    nxt2, rew2 = nxt.copy(), rew.copy()
    nxt2[s_bar, a_bar] = sg
    rew2[s_bar, a_bar] = horizon + 1

    bound = horizon + 1
    inst1 = make_homogeneous(nxt, rew, horizon, 0, reward_bound=bound)
    inst2 = make_homogeneous(nxt2, rew2, horizon, 0, reward_bound=bound)
    structure = {
        "S_0": tree_size,
        "S_1": n,
        "S_B": n,
        "S_G": 1,
        "tree_levels": levels,
        "depth": depth,
        "s1_offset": s1,
        "a_left": A_LEFT,
        "a_right": A_RIGHT,
    }
    return AdversarialPair(inst1, inst2, (s_bar, a_bar), structure)


def seeded_suite(count: int = 50, seed: int = 2024, *, max_states: int = 6, max_actions: int = 3,
                 max_horizon: int = 4, max_reward: int = 2) -> list[DpInstance]:
    """Reproducible list of small random instances used by the invariant checks."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        S = int(rng.integers(2, max_states + 1))
        A = int(rng.integers(2, max_actions + 1))
        T = int(rng.integers(1, max_horizon + 1))
        R = int(rng.integers(1, max_reward + 1))
        out.append(gen_random_instance(S, A, T, R, seed=int(rng.integers(2**31))))
    return out
