"""Two-player games on finite alternating transition systems.

The controller picks a control label ``a``; the adversary then picks a
disturbance label ``b`` and one of the successors.  A triple ``(q, a, b)`` with
no successor is losing for the controller.

Winning sets may carry extra columns (``Z`` of shape ``(Q, K)``) so that a
product with a deterministic monitor can be solved without materialising the
product graph: a ``lift`` maps the current winning table to the table of
"good successors" seen from each column.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import InvalidInputError


class GameGraph:
    """CSR successor lists for triples ``t = (q * A + a) * B + b``."""

    def __init__(self, Q: int, A: int, B: int, offsets: np.ndarray, targets: np.ndarray):
        self.Q, self.A, self.B = int(Q), int(A), int(B)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.targets = np.asarray(targets, dtype=np.int64)
        T = self.Q * self.A * self.B
        if self.offsets.shape != (T + 1,) or self.offsets[0] != 0 or self.offsets[-1] != self.targets.size:
            raise InvalidInputError("inconsistent CSR offsets")
        if np.any(np.diff(self.offsets) < 0):
            raise InvalidInputError("CSR offsets must be nondecreasing")
        if self.targets.size and (self.targets.min() < 0 or self.targets.max() >= self.Q):
            raise InvalidInputError("successor index out of range")
        sizes = np.diff(self.offsets)
        self._nonempty = sizes > 0
        self._starts = self.offsets[:-1][self._nonempty]

    @classmethod
    def from_transitions(cls, Q: int, A: int, B: int, transitions: Iterable[tuple[int, int, int, int]]) -> "GameGraph":
        """From ``(q, a, b, q')`` tuples; duplicates are merged."""
        succ = {}
        for q, a, b, q2 in transitions:
            if not (0 <= q < Q and 0 <= a < A and 0 <= b < B and 0 <= q2 < Q):
                raise InvalidInputError(f"transition {(q, a, b, q2)} out of range")
            succ.setdefault((q * A + a) * B + b, set()).add(q2)
        T = Q * A * B
        sizes = np.zeros(T, dtype=np.int64)
        for t, s in succ.items():
            sizes[t] = len(s)
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        targets = np.empty(offsets[-1], dtype=np.int64)
        for t, s in succ.items():
            targets[offsets[t]: offsets[t + 1]] = sorted(s)
        return cls(Q, A, B, offsets, targets)

    @property
    def blocked(self) -> np.ndarray:
        """``(Q, A, B)`` mask of triples without successors."""
        return ~self._nonempty.reshape(self.Q, self.A, self.B)

    def successors(self, q: int, a: int, b: int) -> np.ndarray:
        t = (q * self.A + a) * self.B + b
        return self.targets[self.offsets[t]: self.offsets[t + 1]]

    def action_ok(self, good: np.ndarray) -> np.ndarray:
        """``ok[q, a, k]``: for every ``b`` the successor set is nonempty and inside ``good[:, k]``."""
        good = np.asarray(good, dtype=bool)
        squeeze = good.ndim == 1
        G = good[:, None] if squeeze else good
        K = G.shape[1]
        per_triple = np.zeros((self.offsets.size - 1, K), dtype=bool)
        if self._starts.size:
            vals = G[self.targets]
            per_triple[self._nonempty] = np.logical_and.reduceat(vals, self._starts, axis=0)
        ok = per_triple.reshape(self.Q, self.A, self.B, K).all(axis=2)
        return ok[..., 0] if squeeze else ok

    def cpre(self, target: np.ndarray, lift: Callable | None = None) -> np.ndarray:
        """States where some control forces the next state into ``target``."""
        good = target if lift is None else lift(target)
        return self.action_ok(good).any(axis=1)


@dataclass
class GameResult:
    """Winning region with per-state depth and the extracted control choice.

    ``depth`` is the attractor layer for reachability (0 on the target) and 0
    everywhere winning for safety; ``-1`` marks losing states.  ``strategy``
    holds the smallest admissible control index, ``-1`` where losing (and on
    reachability targets, which need the continuation's strategy).
    """

    winning: np.ndarray
    depth: np.ndarray
    strategy: np.ndarray
    iterations: int
    kind: str
    history: list = field(default_factory=list, repr=False)


def _first_true(ok: np.ndarray) -> np.ndarray:
    """Index of the first ``True`` along axis 1, -1 if none."""
    has = ok.any(axis=1)
    return np.where(has, ok.argmax(axis=1), -1)


def solve_safety(graph: GameGraph, safe: np.ndarray, lift: Callable | None = None) -> GameResult:
    """Greatest fixed point ``Z = safe ∩ cpre(Z)``."""
    safe = np.asarray(safe, dtype=bool)
    Z = safe.copy()
    it = 0
    while True:
        it += 1
        Zn = safe & graph.cpre(Z, lift)
        if np.array_equal(Zn, Z):
            break
        Z = Zn
    ok = graph.action_ok(Z if lift is None else lift(Z))
    strat = np.where(Z, _first_true(ok), -1)
    depth = np.where(Z, 0, -1)
    return GameResult(Z, depth, strat, it, "safety")


def solve_reach(graph: GameGraph, target: np.ndarray, within: int | None = None, lift: Callable | None = None,
                allowed: np.ndarray | None = None) -> GameResult:
    """Least fixed point ``Z = target ∪ (allowed ∩ cpre(Z))``, optionally depth bounded.

    Each state joins at the first layer where it becomes controllable; its
    control is the smallest index that forces the previous layer, so following
    the strategy strictly decreases the depth.
    """
    target = np.asarray(target, dtype=bool)
    Z = target.copy()
    depth = np.where(Z, 0, -1)
    strat = np.full(target.shape, -1, dtype=np.int64)
    it = 0
    while within is None or it < within:
        ok = graph.action_ok(Z if lift is None else lift(Z))
        new = ok.any(axis=1) & ~Z
        if allowed is not None:
            new &= allowed
        it += 1
        if not new.any():
            break
        choice = _first_true(ok)
        strat[new] = choice[new]
        depth[new] = it
        Z = Z | new
    return GameResult(Z, depth, strat, it, "reach")
