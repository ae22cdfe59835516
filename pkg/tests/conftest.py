import numpy as np
import pytest

from mwdp.model import make_homogeneous


def build_i1():
    # two states, two actions, horizon 2: action 0 stays (reward 1), action 1 swaps (reward 2)
    return make_homogeneous([[0, 1], [1, 0]], [[1, 2], [1, 2]], 2)


def build_ones(horizon=3, states=3, actions=2, seed=0):
    rng = np.random.default_rng(seed)
    nxt = rng.integers(0, states, size=(states, actions))
    return make_homogeneous(nxt, np.ones((states, actions), dtype=int), horizon)


@pytest.fixture
def i1():
    return build_i1()


@pytest.fixture
def ones3():
    return build_ones()


ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
