import numpy as np
import pytest

from mwdp import errors
from mwdp.encoders import msc as msc_mod
from mwdp.encoders import tsp as tsp_mod
from mwdp.encoders import (
    NO_COVER,
    MscInstance,
    TspGraph,
    brute_force_msc,
    brute_force_tsp,
    decode_msc,
    decode_tsp,
    encode_msc,
    encode_tsp,
    random_graph,
    value_to_cost,
)
from mwdp.model import bellman_solve, policy_trace, rollout
from mwdp.solver import solve_policy

G3 = TspGraph(3, np.array([[0, 1, 2], [1, 0, 3], [2, 3, 0]]), 3)
U3 = MscInstance(3, ({1, 2}, {2, 3}, {3}))


def bellman_steps(inst):
    return policy_trace(inst, bellman_solve(inst)[1])[0]


class TestTsp:
    def test_g3_optimum(self):
        inst = encode_tsp(G3)
        table, _ = bellman_solve(inst)
        tour, cost = decode_tsp(bellman_steps(inst), G3)
        assert cost == 6 and tour in ((1, 2, 3, 1), (1, 3, 2, 1))
        assert value_to_cost(G3, table.value(0, 0)) == 6

    def test_reward_of_cheapest_edge(self):
        inst = encode_tsp(G3)
        # move 1 -> 2 (cost 1) from the initial state: 3 + 1 - 1 = 3 before the shift of one
        assert inst.reward_shift == 1
        assert inst.reward[0, 0, 1] - inst.reward_shift == 3

    def test_layering(self):
        inst = encode_tsp(G3)
        assert inst.layered and inst.layer_of[0] == 0 and inst.horizon == 3

    def test_state_bijection(self):
        labels = tsp_mod.tsp_states(4)
        assert len(set(labels)) == len(labels)
        assert labels[0] == (0, 0b1111, 1)
        genuine = [lab for lab in labels if lab[1] != tsp_mod.NULL]
        assert all(lab[1] >> (lab[2] - 1) & 1 for lab in genuine[:-1])

    def test_too_small(self):
        with pytest.raises(errors.GraphTooSmall):
            encode_tsp(TspGraph(2, np.zeros((2, 2), dtype=int), 1))

    def test_not_hamiltonian(self):
        inst = encode_tsp(G3)
        trace, _ = rollout(inst, [1, 1, 0])  # visits vertex 2 twice
        with pytest.raises(errors.NotHamiltonian):
            decode_tsp(trace, G3)

    def test_brute_force(self):
        assert brute_force_tsp(G3) == 6
        assert brute_force_tsp(TspGraph(4, np.ones((4, 4), dtype=int), 1)) == 4
        asym = TspGraph(3, np.array([[0, 1, 5], [5, 0, 1], [1, 5, 0]]), 5)
        assert brute_force_tsp(asym) == 3

    def test_brute_force_limit(self):
        with pytest.raises(errors.TooLarge):
            brute_force_tsp(random_graph(11, 2, 0))

    @pytest.mark.parametrize("n", [3, 4, 5, 6])
    def test_seeded_identity(self, n):
        for seed in range(5):
            g = random_graph(n, 5, seed)
            inst = encode_tsp(g)
            table, _ = bellman_solve(inst)
            best = brute_force_tsp(g)
            assert table.value(0, 0) == n * (g.cost_bound + 1 + inst.reward_shift) - best
            tour, cost = decode_tsp(bellman_steps(inst), g)
            assert cost == best
            # null padding never appears on the optimal path
            labels = tsp_mod.tsp_states(n)
            assert all(labels[s][1] != tsp_mod.NULL for s, _, _ in bellman_steps(inst))

    def test_bad_costs(self):
        with pytest.raises(errors.InvalidInput):
            TspGraph(3, np.array([[0, 9, 1], [1, 0, 1], [1, 1, 0]]), 3)

    def test_json_roundtrip(self, tmp_path):
        p = tmp_path / "g.json"
        tsp_mod.save_graph(G3, p)
        g = tsp_mod.load_graph(p)
        assert g.n == 3 and np.array_equal(g.costs, G3.costs)

    def test_mwum_pipeline_g3(self):
        tour, cost = decode_tsp(solve_policy(encode_tsp(G3)), G3)
        assert cost == 6


class TestMsc:
    def test_u3(self):
        inst = encode_msc(U3)
        cover, size = decode_msc(bellman_steps(inst), U3)
        assert size == 2 == brute_force_msc(U3)
        covered = set().union(*(U3.family[k] for k in cover))
        assert covered == {1, 2, 3}

    def test_no_cover(self):
        m = MscInstance(2, (set(),))
        assert decode_msc(bellman_steps(encode_msc(m)), m) == NO_COVER
        assert brute_force_msc(m) == NO_COVER

    def test_whole_universe(self):
        m = MscInstance(3, ({1, 2, 3},))
        assert decode_msc(bellman_steps(encode_msc(m)), m) == ((0,), 1)
        assert brute_force_msc(m) == 1

    def test_all_skip_trace_is_suboptimal(self):
        inst = encode_msc(U3)
        trace, total = rollout(inst, [0, 0, 0, 0])
        assert decode_msc(trace, U3) == NO_COVER
        assert total < bellman_solve(inst)[0].value(0, 0)

    def test_trace_mismatch(self):
        inst = encode_msc(U3)
        trace = bellman_steps(inst)
        with pytest.raises(errors.TraceMismatch):
            decode_msc(trace[:-1], U3)
        bad = list(trace)
        bad[1] = (0, 1, bad[1][2])
        with pytest.raises(errors.TraceMismatch):
            decode_msc(bad, U3)

    def test_structure(self):
        inst = encode_msc(U3)
        assert inst.layered and inst.horizon == 4 and inst.num_actions == 2
        assert inst.reward_shift == 1

    def test_subset_validation(self):
        with pytest.raises(errors.InvalidInput):
            MscInstance(2, ({3},))
        with pytest.raises(errors.InvalidInput):
            MscInstance(2, ())

    def test_brute_force_limit(self):
        with pytest.raises(errors.TooLarge):
            brute_force_msc(MscInstance(2, tuple({1} for _ in range(21))))

    def test_seeded(self):
        for seed in range(10):
            m = msc_mod.random_msc(4, 4, seed)
            out = decode_msc(bellman_steps(encode_msc(m)), m)
            expect = brute_force_msc(m)
            assert (out if out == NO_COVER else out[1]) == expect

    def test_json_roundtrip(self, tmp_path):
        p = tmp_path / "m.json"
        msc_mod.save_msc(U3, p)
        assert msc_mod.load_msc(p) == U3

    def test_mwum_pipeline_u3(self):
        out = decode_msc(solve_policy(encode_msc(U3)), U3)
        assert out[1] == 2
