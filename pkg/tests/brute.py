"""Dictionary-based Fock-state oracle, independent of the package engine.

States are dicts mapping occupation tuples to amplitudes.  Linear optics is
done by substituting creation operators and expanding the polynomial term by
term; loss and detection enumerate pure branches explicitly.
"""
from collections import defaultdict
from itertools import product
from math import comb, factorial, sqrt


def _clean(state, tol=1e-15):
    return {k: v for k, v in state.items() if abs(v) > tol}


def substitute(state, modes, mapping):
    """Replace ``a_m^+`` by ``sum_j c_j a_j^+`` for every ``m`` in ``mapping``."""
    out = defaultdict(complex)
    idx = {m: i for i, m in enumerate(modes)}
    for occ, amp in state.items():
        ops = []
        for m, n in zip(modes, occ):
            ops.extend([m] * n)
        norm = 1.0
        for n in occ:
            norm /= sqrt(factorial(n))
        choices = [mapping.get(op, [(op, 1.0)]) for op in ops]
        for combo in product(*choices):
            coeff = amp * norm
            new = [0] * len(modes)
            for target, c in combo:
                coeff *= c
                new[idx[target]] += 1
            for n in new:
                coeff *= sqrt(factorial(n))
            out[tuple(new)] += coeff
    return _clean(out)


def beamsplitter(state, modes, i, j, alpha, beta):
    return substitute(state, modes, {i: [(i, alpha), (j, beta)], j: [(i, beta), (j, -alpha)]})


def loss_branches(state, modes, mode, eta):
    """Pure branches (unnormalized) indexed by the number of photons lost."""
    k_ax = modes.index(mode)
    branches = defaultdict(lambda: defaultdict(complex))
    for occ, amp in state.items():
        n = occ[k_ax]
        for lost in range(n + 1):
            w = sqrt(comb(n, lost) * eta ** (n - lost) * (1 - eta) ** lost)
            new = list(occ)
            new[k_ax] = n - lost
            branches[lost][tuple(new)] += amp * w
    return [dict(b) for b in branches.values()]


def project(state, modes, mode, count):
    k_ax = modes.index(mode)
    out = {}
    for occ, amp in state.items():
        if occ[k_ax] == count:
            out[occ[:k_ax] + occ[k_ax + 1:]] = amp
    return out, [m for m in modes if m != mode]


def norm_sq(state):
    return sum(abs(a) ** 2 for a in state.values())


def swap_oracle(left_mixture, right_mixture, eta_m=1.0):
    """Swap two links given as lists of (weight, pure dict on (L, R)).

    Ideal number-resolving detectors; returns the success probability and the
    heralded density matrix of the outer modes as a dict of dicts.
    """
    modes = ["A", "m1", "m2", "C"]
    rho = defaultdict(complex)
    p_total = 0.0
    for (wl, sl), (wr, sr) in product(left_mixture, right_mixture):
        joint = {}
        for (a, b), x in sl.items():
            for (c, d), y in sr.items():
                joint[(a, b, c, d)] = x * y
        branches = [joint]
        for m in ("m1", "m2"):
            branches = [b for s in branches for b in loss_branches(s, modes, m, eta_m)]
        for b in branches:
            b = beamsplitter(b, modes, "m1", "m2", 1 / sqrt(2), 1 / sqrt(2))
            for c1, c2, sign in ((1, 0, 1), (0, 1, -1)):
                s1, rest = project(b, modes, "m1", c1)
                s2, outer = project(s1, rest, "m2", c2)
                if sign < 0:
                    s2 = {k: v * (-1) ** k[0] for k, v in s2.items()}
                w = wl * wr
                p_total += w * norm_sq(s2)
                for k1, v1 in s2.items():
                    for k2, v2 in s2.items():
                        rho[(k1, k2)] += w * v1 * v2.conjugate()
    return p_total, {k: v / p_total for k, v in rho.items()}
