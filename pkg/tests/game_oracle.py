"""Exhaustive reference solutions for small games, on bitmasks.

Fixed points are found by Knaster-Tarski over all subsets: the greatest fixed
point is the union of all post-fixed points and the least fixed point the
intersection of all pre-fixed points.
"""

import numpy as np

from symctl import GameGraph


def random_game(rng, Q=None, A=None, B=None, density=0.3, empty=0.1):
    Q = Q or int(rng.integers(1, 11))
    A = A or int(rng.integers(1, 4))
    B = B or int(rng.integers(1, 3))
    trans = []
    for q in range(Q):
        for a in range(A):
            for b in range(B):
                if rng.random() < empty:
                    continue
                succ = np.flatnonzero(rng.random(Q) < density)
                if succ.size == 0:
                    succ = [int(rng.integers(Q))]
                trans += [(q, a, b, int(s)) for s in succ]
    return GameGraph.from_transitions(Q, A, B, trans), trans


def masks(Q, A, B, trans):
    m = np.zeros((Q, A, B), dtype=object)
    m[...] = 0
    for q, a, b, s in trans:
        m[q, a, b] |= 1 << s
    return m


def cpre(m, Z):
    Q, A, B = m.shape
    out = 0
    for q in range(Q):
        for a in range(A):
            if all(m[q, a, b] and (m[q, a, b] & ~Z) == 0 for b in range(B)):
                out |= 1 << q
                break
    return out


def to_mask(v):
    return sum(1 << i for i in np.flatnonzero(v))


def to_bool(mask, Q):
    return np.array([(mask >> i) & 1 == 1 for i in range(Q)])


def safety(m, safe):
    Q = m.shape[0]
    best = 0
    for S in range(1 << Q):
        if S & ~safe == 0 and S & ~cpre(m, S) == 0:
            best |= S
    return best


def reach(m, target, allowed=None):
    Q = m.shape[0]
    full = (1 << Q) - 1
    allowed = full if allowed is None else allowed
    least = full
    for S in range(1 << Q):
        if (target | (allowed & cpre(m, S))) & ~S == 0:
            least &= S
    return least


def layers(m, target, allowed=None):
    """Depth of each state: first k with q in F^k(target)."""
    Q = m.shape[0]
    allowed = (1 << Q) - 1 if allowed is None else allowed
    depth = [-1] * Q
    Z = target
    k = 0
    while True:
        for q in range(Q):
            if (Z >> q) & 1 and depth[q] < 0:
                depth[q] = k
        nxt = Z | (allowed & cpre(m, Z))
        if nxt == Z:
            return np.array(depth)
        Z = nxt
        k += 1
