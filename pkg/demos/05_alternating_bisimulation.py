"""Comparing two finite systems that both face an adversary.

The second system offers the same outcomes as the first but with its
controls relabelled, so a relation that pairs states with equal outputs is
an alternating bisimulation even though control indices differ.  A third
system that cannot reach one of the outcomes breaks the relation.

Run: python3 demos/05_alternating_bisimulation.py
"""

from symctl import FiniteTS, is_aea_bisim, largest_aea_bisim

loops = [(1, a, 0, 1) for a in range(2)] + [(2, a, 0, 2) for a in range(2)]
T1 = FiniteTS.from_transitions(3, 2, 1, [(0, 0, 0, 1), (0, 1, 0, 2)] + loops, [0.0, 1.0, 2.0])
T2 = FiniteTS.from_transitions(3, 2, 1, [(0, 1, 0, 1), (0, 0, 0, 2)] + loops, [0.05, 1.05, 2.05])
T3 = FiniteTS.from_transitions(3, 2, 1, [(0, 0, 0, 1), (0, 1, 0, 1)] + loops, [0.0, 1.0, 2.0])

R = [(0, 0), (1, 1), (2, 2)]
for eps in (0.01, 0.1):
    v = is_aea_bisim(T1, T2, R, eps)
    print(f"T1 vs T2, eps={eps}: relation valid={v.holds}  counterexample={v.counterexample}")

v = is_aea_bisim(T1, T3, R, 0.0)
print(f"T1 vs T3, eps=0: relation valid={v.holds}  counterexample={v.counterexample}")
big = largest_aea_bisim(T1, T3, 0.0)
print(f"largest relation T1 vs T3: {big.pairs()}  bisimilar={big.bisimilar}")
