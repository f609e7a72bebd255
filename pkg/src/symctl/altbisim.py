"""Alternating epsilon-approximate bisimulation between finite transition systems.

A relation ``R`` qualifies when every pair ``(q1, q2)`` in it has outputs
within ``eps`` and

* (ii) for every ``a1`` there is ``a2`` such that for every ``b2`` there is
  ``b1`` and successors ``q1 -(a1,b1)-> q1'``, ``q2 -(a2,b2)-> q2'`` with
  ``(q1', q2')`` in ``R``;
* (iii) the mirror statement with the roles of the systems swapped.

Successors are quantified existentially, so a triple without successors can
never serve as a witness.  Outputs are real vectors compared in the infinity
norm.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ParseError


@dataclass(eq=False)
class FiniteTS:
    """States ``0..n-1``, control labels ``0..A-1``, disturbance labels ``0..B-1``.

    ``succ[q, a, b, q']`` is the transition relation; ``outputs[q]`` the output vector.
    """

    succ: np.ndarray
    outputs: np.ndarray
    names: dict = field(default_factory=dict)

    def __post_init__(self):
        self.succ = np.asarray(self.succ, dtype=bool)
        out = np.asarray(self.outputs, dtype=float)
        self.outputs = out[:, None] if out.ndim == 1 else out
        if self.succ.ndim != 4 or self.succ.shape[0] != self.succ.shape[3]:
            raise InvalidInputError(f"transition tensor must have shape (n, A, B, n), got {self.succ.shape}")
        if self.outputs.shape[0] != self.succ.shape[0]:
            raise InvalidInputError("one output per state required")
        if not np.all(np.isfinite(self.outputs)):
            raise InvalidInputError("outputs must be finite")

    @property
    def n(self) -> int:
        return self.succ.shape[0]

    @property
    def A(self) -> int:
        return self.succ.shape[1]

    @property
    def B(self) -> int:
        return self.succ.shape[2]

    @classmethod
    def from_transitions(cls, n: int, A: int, B: int, transitions, outputs) -> "FiniteTS":
        succ = np.zeros((n, A, B, n), dtype=bool)
        for q, a, b, q2 in transitions:
            succ[q, a, b, q2] = True
        return cls(succ, outputs)

    def transitions(self) -> list[tuple[int, int, int, int]]:
        return [tuple(map(int, t)) for t in np.argwhere(self.succ)]

    def to_dict(self) -> dict:
        return {
            "states": self.n,
            "controls": self.A,
            "disturbances": self.B,
            "outputs": self.outputs.tolist(),
            "transitions": [list(t) for t in self.transitions()],
        }

    @classmethod
    def from_dict(cls, doc) -> "FiniteTS":
        """``{"states", "controls", "disturbances", "outputs", "transitions": [[q, a, b, q'], ...]}``.

        Counts may also be given as lists of names, which are then used in
        the transition list.
        """
        names = {}

        def count(key):
            v = doc[key]
            if isinstance(v, list):
                names[key] = {str(s): i for i, s in enumerate(v)}
                return len(v)
            return int(v)

        try:
            n, A, B = count("states"), count("controls"), count("disturbances")
            outputs = doc["outputs"]
            trans = doc["transitions"]
        except KeyError as exc:
            raise InvalidInputError(f"transition system missing field {exc}") from exc

        def idx(kind, v):
            if kind in names and not isinstance(v, int):
                try:
                    return names[kind][str(v)]
                except KeyError:
                    raise InvalidInputError(f"unknown {kind[:-1]} name {v!r}") from None
            return int(v)

        rows = []
        for t in trans:
            if len(t) != 4:
                raise InvalidInputError(f"transition {t!r} must be [q, a, b, q']")
            rows.append((idx("states", t[0]), idx("controls", t[1]), idx("disturbances", t[2]), idx("states", t[3])))
        for q, a, b, q2 in rows:
            if not (0 <= q < n and 0 <= a < A and 0 <= b < B and 0 <= q2 < n):
                raise InvalidInputError(f"transition {(q, a, b, q2)} out of range")
        ts = cls.from_transitions(n, A, B, rows, outputs)
        ts.names = names
        return ts

    @classmethod
    def from_json(cls, text: str) -> "FiniteTS":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as err:
            raise ParseError(f"invalid JSON: {err.msg}", offset=err.pos, line=err.lineno, column=err.colno) from err
        return cls.from_dict(doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def output_distance(T1: FiniteTS, T2: FiniteTS) -> np.ndarray:
    if T1.outputs.shape[1] != T2.outputs.shape[1]:
        raise InvalidInputError("systems have different output dimensions")
    return np.max(np.abs(T1.outputs[:, None, :] - T2.outputs[None, :, :]), axis=-1)


def _joint(T1: FiniteTS, T2: FiniteTS, R: np.ndarray) -> np.ndarray:
    """``E[q1, a1, b1, q2, a2, b2]``: some successor pair of the two moves lies in ``R``."""
    M = np.einsum("iabj,jk->iabk", T1.succ.astype(np.int64), R.astype(np.int64)) > 0
    return np.einsum("iabk,jcdk->iabjcd", M.astype(np.int64), T2.succ.astype(np.int64)) > 0


def _conditions(T1: FiniteTS, T2: FiniteTS, R: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    E = _joint(T1, T2, R)  # axes: q1 a1 b1 q2 a2 b2
    cond2 = E.any(axis=2).all(axis=4).any(axis=3).all(axis=1)  # forall a1 exists a2 forall b2 exists b1
    cond3 = E.any(axis=5).all(axis=2).any(axis=1).all(axis=2)  # forall a2 exists a1 forall b1 exists b2
    return cond2, cond3


@dataclass
class BisimVerdict:
    holds: bool
    counterexample: dict | None = None


def is_aea_bisim(T1: FiniteTS, T2: FiniteTS, R, eps: float) -> BisimVerdict:
    """Check all three conditions for every pair of ``R``.

    ``R`` is a boolean ``(n1, n2)`` matrix or an iterable of pairs.  The
    counterexample names the first failing pair (row-major order), the
    condition, and the witness trail: for (ii) the control ``a1`` that no
    ``a2`` can answer, with one refuting ``b2`` per ``a2`` (mirror for (iii)).
    """
    Rm = as_relation(R, T1.n, T2.n)
    dist = output_distance(T1, T2)
    E = _joint(T1, T2, Rm)
    for q1, q2 in zip(*np.nonzero(Rm)):
        q1, q2 = int(q1), int(q2)
        if dist[q1, q2] > eps:
            return BisimVerdict(False, {"pair": [q1, q2], "condition": "i", "distance": float(dist[q1, q2])})
        e = E[q1, :, :, q2, :, :]  # a1 b1 a2 b2
        ok2 = e.any(axis=1)  # a1 a2 b2
        for a1 in range(T1.A):
            if not ok2[a1].all(axis=1).any():
                refute = {int(a2): int(np.argmin(ok2[a1, a2])) for a2 in range(T2.A)}
                return BisimVerdict(False, {"pair": [q1, q2], "condition": "ii", "a1": a1, "refutations": refute})
        ok3 = e.any(axis=3)  # a1 b1 a2
        for a2 in range(T2.A):
            if not ok3[:, :, a2].all(axis=1).any():
                refute = {int(a1): int(np.argmin(ok3[a1, :, a2])) for a1 in range(T1.A)}
                return BisimVerdict(False, {"pair": [q1, q2], "condition": "iii", "a2": a2, "refutations": refute})
    return BisimVerdict(True)


def as_relation(R, n1: int, n2: int) -> np.ndarray:
    if isinstance(R, np.ndarray) and R.dtype == bool:
        if R.shape != (n1, n2):
            raise InvalidInputError(f"relation shape {R.shape} != {(n1, n2)}")
        return R
    Rm = np.zeros((n1, n2), dtype=bool)
    for q1, q2 in R:
        Rm[q1, q2] = True
    return Rm


@dataclass
class LargestBisim:
    relation: np.ndarray
    bisimilar: bool
    sweeps: int

    def pairs(self) -> list[tuple[int, int]]:
        return [(int(a), int(b)) for a, b in zip(*np.nonzero(self.relation))]


def largest_aea_bisim(T1: FiniteTS, T2: FiniteTS, eps: float) -> LargestBisim:
    """Greatest relation satisfying the conditions, and whether it covers both state sets.

    Starts from all pairs with outputs within ``eps`` and removes pairs that
    violate (ii) or (iii) until nothing changes.
    """
    R = output_distance(T1, T2) <= eps
    sweeps = 0
    while True:
        sweeps += 1
        c2, c3 = _conditions(T1, T2, R)
        Rn = R & c2 & c3
        if np.array_equal(Rn, R):
            break
        R = Rn
    bisimilar = bool(R.any(axis=0).all() and R.any(axis=1).all())
    return LargestBisim(R, bisimilar, sweeps)


def reduce_to_approx_bisim(T1: FiniteTS, T2: FiniteTS, eps: float) -> LargestBisim:
    """Plain approximate bisimulation for systems whose disturbance sets are singletons.

    Implemented directly (for every ``a1`` some ``a2`` with related successors,
    and vice versa) so that it can cross-check :func:`largest_aea_bisim`.
    """
    if T1.B != 1 or T2.B != 1:
        raise InvalidInputError("disturbance label sets must be singletons")
    S1 = T1.succ[:, :, 0, :]
    S2 = T2.succ[:, :, 0, :]
    R = output_distance(T1, T2) <= eps
    sweeps = 0
    while True:
        sweeps += 1
        Rn = R.copy()
        for q1, q2 in zip(*np.nonzero(R)):
            # pair[a1, a2]: some q1' in post(q1, a1), q2' in post(q2, a2) related
            pair = (S1[q1].astype(int) @ R.astype(int) @ S2[q2].T.astype(int)) > 0
            if not (pair.any(axis=1).all() and pair.any(axis=0).all()):
                Rn[q1, q2] = False
        if np.array_equal(Rn, R):
            break
        R = Rn
    bisimilar = bool(R.any(axis=0).all() and R.any(axis=1).all())
    return LargestBisim(R, bisimilar, sweeps)


def random_ts(rng: np.random.Generator, n: int, A: int, B: int, density: float = 0.35, out_levels: int = 3) -> FiniteTS:
    """Random system with outputs on a coarse grid (so distances tie often)."""
    succ = rng.random((n, A, B, n)) < density
    outputs = rng.integers(0, out_levels, size=(n, 1)) * 0.1
    return FiniteTS(succ, outputs)
