
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from mwdp.generators import gen_random_instance
from mwdp.model import (
    bellman_solve,
    brute_force_value,
    check_primal_feasibility,
    to_dict,
    validate_instance,
    value_bounds_hold,
)
from mwdp.mwu import WeightState, mw_run_generic, mw_update, regret_audit
from mwdp.oracle import SigmaContext, constraint_residuals, eval_f, residual_vector

instances = st.builds(
    gen_random_instance,
    num_states=st.integers(1, 5),
    num_actions=st.integers(1, 3),
    horizon=st.integers(1, 4),
    reward_max=st.integers(1, 3),
    seed=st.integers(0, 2**31),
    time_dependent=st.booleans(),
)


@settings(max_examples=60, deadline=None)
@given(instances)
def test_bellman_properties(inst):
    table, _ = bellman_solve(inst)
    assert table.value(0, 0) == brute_force_value(inst)
    assert check_primal_feasibility(inst, table)
    assert value_bounds_hold(inst, table)


@settings(max_examples=40, deadline=None)
@given(instances, st.integers(0, 3))
def test_shift_adds_delta_per_step(inst, delta):
    doc = to_dict(inst)
    pairs = np.array(doc["transitions"])
    pairs[..., 1] += delta
    doc["transitions"] = pairs.tolist()
    doc["reward_bound"] = inst.reward_bound + delta
    shifted = validate_instance(doc)
    a, b = bellman_solve(inst)[0].values, bellman_solve(shifted)[0].values
    T = inst.horizon
    assert np.array_equal(b - a, np.repeat((T - np.arange(T + 1))[:, None] * delta, inst.num_states, axis=1))


@settings(max_examples=50, deadline=None)
@given(instances, st.integers(1, 6), st.integers(0, 2**31))
def test_eval_f_is_weighted_residual(inst, sigma, seed):
    ctx = SigmaContext(inst, sigma)
    rng = np.random.default_rng(seed)
    w = rng.exponential(size=ctx.num_constraints)
    j = int(rng.integers(ctx.num_vertices))
    lam = np.zeros(ctx.num_vertices)
    lam[j] = ctx.mass(j)
    p = w / w.sum()
    assert abs(eval_f(ctx, p, j) - p @ constraint_residuals(ctx, lam)) <= 1e-12
    assert np.max(np.abs(residual_vector(ctx, j))) <= 2 * sigma


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 16),
    st.sampled_from([0.1, 0.25, 0.5]),
    st.integers(1, 200),
    st.integers(0, 2**31),
)
def test_regret_bound(n, eps, rounds, seed):
    costs = np.random.default_rng(seed).uniform(-1, 1, size=(rounds, n))
    assert regret_audit(mw_run_generic(n, eps, costs, rounds))


@given(
    st.lists(st.floats(0.01, 100), min_size=1, max_size=8).flatmap(
        lambda w: st.tuples(st.just(w), st.lists(st.floats(-1, 1), min_size=len(w), max_size=len(w)))
    ),
    st.floats(0.01, 0.5),
)
def test_weights_stay_positive(wm, eps):
    w, m = wm
    out = mw_update(WeightState(np.array(w)), m, eps)
    assert np.all(out.weights > 0)
    assert np.all(out.weights >= np.array(w) * (1 - eps) - 1e-12)
