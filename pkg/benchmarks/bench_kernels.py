"""Compare the compiled MWUM kernel with its pure-Python twin.

    python3 benchmarks/bench_kernels.py [--rounds 20000] [--repeat 3]

Both backends run the same feasibility probe; the script checks that they
agree bit for bit and prints rounds per second for each.
"""

import argparse
import time

import numpy as np

from mwdp.encoders import encode_tsp, random_graph
from mwdp.generators import gen_random_instance
from mwdp.kernel import BACKENDS
from mwdp.mwu import compute_config
from mwdp.oracle import SigmaContext


def cases():
    yield "random S=6 A=3 T=4", SigmaContext(gen_random_instance(6, 3, 4, 2, seed=1), 6)
    yield "tsp n=4", SigmaContext(encode_tsp(random_graph(4, 2, 0)), 12)
    yield "tsp n=6", SigmaContext(encode_tsp(random_graph(6, 3, 0)), 20)


def run(fn, ctx, rounds, mode):
    cfg = compute_config(0.25, ctx.ell, ctx.num_constraints, rounds)
    return fn(ctx.v_reward, ctx.v_self, ctx.v_next, ctx.v_budget, ctx.num_constraints, ctx.budget_idx,
              ctx.sigma, ctx.ell, cfg.epsilon, cfg.rounds, mode, -1e-12, 0.125, 1e-3, np.uint64(7), False)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rounds", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if "compiled" not in BACKENDS:
        print("compiled extension not built; only the Python backend is available")
    print(f"{'case':<22} {'mode':<6} {'backend':<9} {'N':>5} {'s':>4} {'rounds/s':>12} {'speedup':>8} {'match':>6}")
    for name, ctx in cases():
        for mode, label in ((0, "exact"), (1, "qmf")):
            outs, rates = {}, {}
            for backend, fn in BACKENDS.items():
                best = float("inf")
                for _ in range(args.repeat):
                    t = time.perf_counter()
                    outs[backend] = run(fn, ctx, args.rounds, mode)
                    best = min(best, time.perf_counter() - t)
                rates[backend] = outs[backend][1] / best if best > 0 else float("inf")
            ref = outs["python"]
            for backend in BACKENDS:
                o = outs[backend]
                same = o[0] == ref[0] and o[1] == ref[1] and np.array_equal(o[2], ref[2]) and np.array_equal(o[7], ref[7])
                speed = rates[backend] / rates["python"]
                print(f"{name:<22} {label:<6} {backend:<9} {ctx.num_vertices:>5} {ctx.num_constraints:>4} "
                      f"{rates[backend]:>12.0f} {speed:>8.1f} {str(same):>6}")


if __name__ == "__main__":
    main()
