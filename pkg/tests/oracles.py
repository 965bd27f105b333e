"""Slow, loop-based reference implementations used to cross-check the package.

Everything here works on plain Python lists of ``(choice_set, winner)`` pairs
and shares no code with ``spectral_rank``.
"""

from __future__ import annotations

import math
from itertools import permutations


def set_weight(kind, items, theta=None):
    if kind == "constant":
        return 1.0
    if kind == "size":
        return float(len(items))
    return sum(math.exp(theta[u]) for u in items)


def transition(comps, n, kind="constant", theta=None, d=None):
    """Dense transition matrix as nested lists, plus the normaliser used."""
    W = [[0.0] * n for _ in range(n)]
    for A, c in comps:
        f = set_weight(kind, A, theta)
        for i in A:
            if i != c:
                W[i][c] += 1.0 / f
    off = [sum(row) for row in W]
    if d is None:
        d = 2.0 * max(off)
    P = [[W[i][j] / d for j in range(n)] for i in range(n)]
    for i in range(n):
        P[i][i] = 1.0 - off[i] / d
    return P, d


def stationary(P, iters=200000, tol=1e-15):
    n = len(P)
    pi = [1.0 / n] * n
    for _ in range(iters):
        nxt = [sum(pi[i] * P[i][j] for i in range(n)) for j in range(n)]
        s = sum(nxt)
        nxt = [x / s for x in nxt]
        if max(abs(a - b) for a, b in zip(nxt, pi)) < tol:
            return nxt
        pi = nxt
    return pi


def tau(comps, n, theta, kind, d, th_w=None):
    e = [math.exp(t) for t in theta]
    inv = [0.0] * n
    for A, _ in comps:
        S = sum(e[u] for u in A)
        f = set_weight(kind, A, th_w)
        for i in A:
            inv[i] += (1 - e[i] / S) * e[i] / f / d
    return [1.0 / x for x in inv]


def J_matrix(comps, n, theta, kind, d, th_w=None):
    """``J[i][l]`` by direct evaluation of the contribution formula."""
    e = [math.exp(t) for t in theta]
    t = tau(comps, n, theta, kind, d, th_w)
    J = [[0.0] * len(comps) for _ in range(n)]
    for l, (A, c) in enumerate(comps):
        S = sum(e[u] for u in A)
        f = set_weight(kind, A, th_w)
        for i in A:
            if c == i:
                J[i][l] = t[i] / f * (S - e[i])
            else:
                J[i][l] = -t[i] / f * e[i]
    return J


def J_from_transition(comps, n, theta, kind, d, th_w=None):
    """``tau_i (sum_j P_ji e_j - P_ij e_i)`` straight from the transition matrix."""
    P, _ = transition(comps, n, kind, th_w, d)
    e = [math.exp(x) for x in theta]
    t = tau(comps, n, theta, kind, d, th_w)
    return [t[i] * sum(P[j][i] * e[j] - P[i][j] * e[i] for j in range(n) if j != i)
            for i in range(n)]


def var_J(comps, n, theta, kind, th_w=None):
    """Conditional variance of ``J_i``: sum of exact per-comparison second moments."""
    e = [math.exp(t) for t in theta]
    d = 1.0
    t = tau(comps, n, theta, kind, d, th_w)
    out = [0.0] * n
    for A, _ in comps:
        S = sum(e[u] for u in A)
        f = set_weight(kind, A, th_w)
        for i in A:
            # winner i with prob e_i/S gives (S - e_i), otherwise -e_i
            win = e[i] / S
            m2 = win * (S - e[i]) ** 2 + (1 - win) * e[i] ** 2
            out[i] += (t[i] / f) ** 2 * m2 / d ** 2
    return out


def pl_triple_variance(triples, theta, L, kind, d=1.0, th_w=None):
    """Variance of ``J_i`` for PL triples by enumerating all 6 orderings."""
    n = len(theta)
    e = [math.exp(t) for t in theta]

    def broken(order):
        return [(tuple(order[k:]), order[k]) for k in range(len(order) - 1)]

    tau_inv = [0.0] * n
    second = [0.0] * n
    for tri in triples:
        for order in permutations(tri):
            prob, rest = 1.0, list(order)
            for k in range(len(order) - 1):
                prob *= e[order[k]] / sum(e[u] for u in rest)
                rest = rest[1:]
            x = [0.0] * n
            for A, c in broken(order):
                f = set_weight(kind, A, th_w)
                for i in A:
                    if i != c:
                        tau_inv[i] += L * prob * e[i] / f / d
                        x[i] -= e[i] / f
                        x[c] += e[i] / f
            for i in tri:
                second[i] += prob * x[i] ** 2
    return [L * second[i] / tau_inv[i] ** 2 / d ** 2 if tau_inv[i] > 0 else float("nan")
            for i in range(n)]
