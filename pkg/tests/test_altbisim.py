import itertools

import numpy as np
import pytest

from symctl import FiniteTS, InvalidInputError, ParseError, is_aea_bisim, largest_aea_bisim, reduce_to_approx_bisim
from symctl.altbisim import random_ts


def post(T, q, a, b):
    return set(np.flatnonzero(T.succ[q, a, b]).tolist())


def naive_pair_ok(T1, T2, R, q1, q2):
    def some_pair(a1, b1, a2, b2):
        return any((s1, s2) in R for s1 in post(T1, q1, a1, b1) for s2 in post(T2, q2, a2, b2))

    fwd = all(
        any(all(any(some_pair(a1, b1, a2, b2) for b1 in range(T1.B)) for b2 in range(T2.B)) for a2 in range(T2.A))
        for a1 in range(T1.A)
    )
    back = all(
        any(all(any(some_pair(a1, b1, a2, b2) for b2 in range(T2.B)) for b1 in range(T1.B)) for a1 in range(T1.A))
        for a2 in range(T2.A)
    )
    return fwd and back


def naive_largest(T1, T2, eps):
    R = {
        (q1, q2)
        for q1 in range(T1.n)
        for q2 in range(T2.n)
        if np.max(np.abs(T1.outputs[q1] - T2.outputs[q2])) <= eps
    }
    while True:
        keep = {p for p in R if naive_pair_ok(T1, T2, R, *p)}
        if keep == R:
            return R
        R = keep


def test_identity_relation():
    rng = np.random.default_rng(0)
    T = random_ts(rng, 4, 2, 2, density=0.5)
    T.succ[..., 0] |= ~T.succ.any(axis=3)  # no blocked triples
    assert is_aea_bisim(T, T, [(q, q) for q in range(T.n)], 0.0).holds
    assert largest_aea_bisim(T, T, 0.0).bisimilar


def test_output_condition():
    T1 = FiniteTS.from_transitions(1, 1, 1, [(0, 0, 0, 0)], [0.0])
    T2 = FiniteTS.from_transitions(1, 1, 1, [(0, 0, 0, 0)], [0.3])
    v = is_aea_bisim(T1, T2, [(0, 0)], 0.2)
    assert not v.holds and v.counterexample["condition"] == "i"
    assert is_aea_bisim(T1, T2, [(0, 0)], 0.3).holds


def test_answer_depends_on_challenge():
    # T1: control a1 leads to state 1 + a1; T2 mirrors it with the controls swapped
    T1 = FiniteTS.from_transitions(3, 2, 1, [(0, 0, 0, 1), (0, 1, 0, 2), (1, 0, 0, 1), (1, 1, 0, 1), (2, 0, 0, 2), (2, 1, 0, 2)], [0, 1, 2])
    T2 = FiniteTS.from_transitions(3, 2, 1, [(0, 1, 0, 1), (0, 0, 0, 2), (1, 0, 0, 1), (1, 1, 0, 1), (2, 0, 0, 2), (2, 1, 0, 2)], [0, 1, 2])
    R = [(0, 0), (1, 1), (2, 2)]
    assert is_aea_bisim(T1, T2, R, 0.0).holds
    # a system that can only reach state 1 fails to answer a1 = 1
    T3 = FiniteTS.from_transitions(3, 2, 1, [(0, 0, 0, 1), (0, 1, 0, 1), (1, 0, 0, 1), (1, 1, 0, 1), (2, 0, 0, 2), (2, 1, 0, 2)], [0, 1, 2])
    v = is_aea_bisim(T1, T3, R, 0.0)
    assert not v.holds
    assert v.counterexample == {"pair": [0, 0], "condition": "ii", "a1": 1, "refutations": {0: 0, 1: 0}}


def test_adversary_quantifiers():
    # T1's adversary can force a bad state; T2's cannot
    T1 = FiniteTS.from_transitions(3, 1, 2, [(0, 0, 0, 1), (0, 0, 1, 2), (1, 0, 0, 1), (1, 0, 1, 1), (2, 0, 0, 2), (2, 0, 1, 2)], [0, 0, 1])
    T2 = FiniteTS.from_transitions(2, 1, 2, [(0, 0, 0, 1), (0, 0, 1, 1), (1, 0, 0, 1), (1, 0, 1, 1)], [0, 0])
    # forward: for every b2 some b1 (b1 = 0) matches, so (ii) holds; (iii) fails on b1 = 1
    v = is_aea_bisim(T1, T2, [(0, 0), (1, 1)], 0.0)
    assert not v.holds and v.counterexample["condition"] == "iii"


def test_random_against_naive_oracle():
    rng = np.random.default_rng(5)
    for k in range(200):
        dims = [(int(rng.integers(1, 6)), int(rng.integers(1, 3)), int(rng.integers(1, 3))) for _ in range(2)]
        T1 = random_ts(rng, *dims[0], density=rng.uniform(0.3, 0.9))
        T2 = random_ts(rng, *dims[1], density=rng.uniform(0.3, 0.9))
        eps = (0.0, 0.1, 0.5)[k % 3]
        got = largest_aea_bisim(T1, T2, eps)
        want = naive_largest(T1, T2, eps)
        assert set(got.pairs()) == want
        cover = {q for q, _ in want} == set(range(T1.n)) and {q for _, q in want} == set(range(T2.n))
        assert got.bisimilar == cover
        assert is_aea_bisim(T1, T2, got.relation, eps).holds


def test_largest_contains_every_valid_relation():
    rng = np.random.default_rng(9)
    for _ in range(30):
        T1 = random_ts(rng, 2, 2, 2, density=0.5)
        T2 = random_ts(rng, 2, 2, 1, density=0.5)
        big = largest_aea_bisim(T1, T2, 0.1).relation
        pairs = list(itertools.product(range(2), range(2)))
        for bits in range(1 << 4):
            R = [p for i, p in enumerate(pairs) if bits >> i & 1]
            if is_aea_bisim(T1, T2, R, 0.1).holds:
                assert all(big[p] for p in R)


def test_epsilon_monotone():
    rng = np.random.default_rng(3)
    for _ in range(50):
        T1, T2 = random_ts(rng, 4, 2, 2), random_ts(rng, 4, 2, 2)
        prev = None
        for eps in (0.0, 0.1, 0.2, 0.5):
            R = largest_aea_bisim(T1, T2, eps).relation
            if prev is not None:
                assert np.all(prev <= R)
            prev = R


def test_singleton_disturbances_reduce():
    rng = np.random.default_rng(4)
    for _ in range(100):
        T1, T2 = random_ts(rng, 5, 3, 1), random_ts(rng, 4, 2, 1)
        for eps in (0.0, 0.1):
            assert np.array_equal(largest_aea_bisim(T1, T2, eps).relation, reduce_to_approx_bisim(T1, T2, eps).relation)
    with pytest.raises(InvalidInputError):
        reduce_to_approx_bisim(random_ts(rng, 2, 1, 2), random_ts(rng, 2, 1, 1), 0.0)


def test_json_round_trip_with_names():
    doc = {
        "states": ["s0", "s1"],
        "controls": ["go"],
        "disturbances": 1,
        "outputs": [[0.0], [1.0]],
        "transitions": [["s0", "go", 0, "s1"], ["s1", "go", 0, "s1"]],
    }
    T = FiniteTS.from_dict(doc)
    assert T.transitions() == [(0, 0, 0, 1), (1, 0, 0, 1)]
    back = FiniteTS.from_json(T.to_json())
    assert np.array_equal(back.succ, T.succ) and np.array_equal(back.outputs, T.outputs)
    with pytest.raises(ParseError):
        FiniteTS.from_json("{")
    with pytest.raises(InvalidInputError):
        FiniteTS.from_dict({**doc, "transitions": [["s0", "stop", 0, "s1"]]})
