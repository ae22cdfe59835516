"""Pure-Python twin of the compiled kernel in ``_kernel.pyx``.

Used when the extension is not built (or ``MWDP_PURE_PYTHON=1``). Every float
operation happens in the same order as in the compiled loop, so both produce
identical vertices, counts and weights.
"""

import math

import numpy as np

RENORM_HIGH = 1e100
RENORM_LOW = 1e-100
TOL = 1e-12
_MASK = (1 << 64) - 1


class SplitMix64:
    """64-bit SplitMix generator; the compiled kernel carries an identical copy."""

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)


def _eval(j, sigma, r, vself, vnext, vbud, p, b):
    mass = sigma / r[j]
    f = p[b]
    if vbud[j]:
        f = f - mass * p[b]
    else:
        f = f - mass * p[vself[j]]
    if vnext[j] >= 0:
        f = f + mass * p[vnext[j]]
    return f


def run_mwum(v_reward, v_self, v_next, v_budget, n_cons, budget_idx, sigma, ell, eps, rounds,
             mode, threshold, grid, fail_prob, seed, record):
    """Run up to ``rounds`` rounds of the fused oracle + weight update.

    ``mode`` 0 is the exact scan (accept iff the best value is ``>= threshold``);
    mode 1 is simulated minimum finding with failure probability ``fail_prob``
    and values floored to multiples of ``grid`` (accept iff the floored value
    is ``>= -grid``).

    Returns ``(status, rounds_done, counts, chosen, values, certificate,
    failures, weights)``; ``status`` is 1 when every round was accepted.
    """
    r = [float(x) for x in v_reward]
    vself = [int(x) for x in v_self]
    vnext = [int(x) for x in v_next]
    vbud = [bool(x) for x in v_budget]
    N = len(r)
    sigma = float(sigma)
    w = [1.0] * n_cons
    p = [0.0] * n_cons
    counts = [0] * N
    chosen, values = [], []
    rng = SplitMix64(seed)
    failures = 0
    status = 1
    done = 0
    b = budget_idx
    for k in range(rounds):
        W = 0.0
        for i in range(n_cons):
            W = W + w[i]
        for i in range(n_cons):
            p[i] = w[i] / W
        best, best_j = 0.0, -1
        for j in range(N):
            f = _eval(j, sigma, r, vself, vnext, vbud, p, b)
            if best_j < 0 or f > best:
                best, best_j = f, j
        if mode == 0:
            pick, val = best_j, best
            if not (val >= threshold):
                status, done = 0, k
                break
        else:
            u1 = rng.uniform()
            u2 = rng.uniform()
            pick, val = best_j, best
            if u1 < fail_prob:
                pick = min(int(u2 * N), N - 1)
                if pick != best_j:
                    failures += 1
                val = _eval(pick, sigma, r, vself, vnext, vbud, p, b)
            q = math.floor(val / grid) * grid
            if not (q >= -grid - TOL):
                status, done = 0, k
                break
        counts[pick] += 1
        if record:
            chosen.append(pick)
            values.append(val)
        mass = sigma / r[pick]
        rb = 1.0 - mass if vbud[pick] else 1.0
        w[b] = w[b] * (1.0 - eps * (rb / ell))
        if not vbud[pick]:
            w[vself[pick]] = w[vself[pick]] * (1.0 - eps * ((-mass) / ell))
        if vnext[pick] >= 0:
            w[vnext[pick]] = w[vnext[pick]] * (1.0 - eps * (mass / ell))
        W = 0.0
        for i in range(n_cons):
            W = W + w[i]
        if W > RENORM_HIGH or W < RENORM_LOW:
            for i in range(n_cons):
                w[i] = w[i] / W
        done = k + 1
    cert = np.array(p) if status == 0 else None
    return (
        status,
        done,
        np.array(counts, dtype=np.int64),
        np.array(chosen, dtype=np.int32),
        np.array(values, dtype=np.float64),
        cert,
        failures,
        np.array(w, dtype=np.float64),
    )
