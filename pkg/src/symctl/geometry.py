"""Boxes, the infinity norm and integer lattices ``(2 mu Z^n) ∩ box``.

Lattice points are addressed by integer keys ``k``; the real point is always
recomputed as ``(2 * mu) * k`` so no rounding error accumulates.  Keys are
ordered lexicographically (last axis fastest), which is also the order of the
flat indices returned by :meth:`Lattice.index_of`.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError, ParseError

# Closed-membership guard, in lattice units: k is accepted when 2*mu*k exceeds a
# bound by less than KEY_GUARD * 2*mu.  Absorbs float error in e.g. (pi/4)/(pi/1000).
KEY_GUARD = 1e-9
TIE_TOL = 1e-12


def inf_norm(v, axis=-1):
    return np.max(np.abs(np.asarray(v, dtype=float)), axis=axis)


def as_vec(v, dim=None, name="vector") -> np.ndarray:
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if a.ndim != 1 or a.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty 1-d sequence, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} has non-finite components: {a}")
    if dim is not None and a.size != dim:
        raise InvalidInputError(f"{name} has dimension {a.size}, expected {dim}")
    return a


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned hyperrectangle ``[lower_1, upper_1] x ... x [lower_n, upper_n]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_vec(self.lower, name="box lower bound")
        hi = as_vec(self.upper, dim=lo.size, name="box upper bound")
        if np.any(hi <= lo):
            raise InvalidInputError(f"degenerate box: lower={lo.tolist()} upper={hi.tolist()}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def from_bounds(cls, bounds: Sequence[Sequence[float]]) -> "Box":
        """Build from ``[[lo_1, hi_1], ..., [lo_n, hi_n]]``."""
        arr = np.asarray(bounds, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise InvalidInputError(f"bounds must be a list of [lo, hi] pairs, got {bounds!r}")
        return cls(arr[:, 0], arr[:, 1])

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def bounds(self) -> list[list[float]]:
        return [[float(a), float(b)] for a, b in zip(self.lower, self.upper)]

    def contains(self, x, tol: float = 0.0):
        """Closed membership; works on a single point or a batch ``(..., n)``."""
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lower - tol) & (x <= self.upper + tol)
        return np.all(inside, axis=-1)

    def has_interior_origin(self) -> bool:
        return bool(np.all(self.lower < 0) and np.all(self.upper > 0))

    def sup_norm(self) -> float:
        """``max ||v||_inf`` over the box."""
        return float(np.max(np.maximum(np.abs(self.lower), np.abs(self.upper))))

    def vertices(self) -> np.ndarray:
        n = self.dim
        corners = np.array(np.meshgrid(*[[0, 1]] * n, indexing="ij")).reshape(n, -1).T
        return np.where(corners == 0, self.lower, self.upper)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(size, self.dim))

    def __eq__(self, other):
        return (
            isinstance(other, Box)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))

    def __repr__(self):
        return f"Box({self.bounds()})"


def mu_hat(box: Box) -> float:
    """Smallest side length of ``box``."""
    w = box.widths
    if np.any(w <= 0):
        raise InvalidInputError("degenerate box")
    return float(np.min(w))


def axis_key_range(lo: float, hi: float, mu: float) -> tuple[int, int]:
    """Integer range ``[kmin, kmax]`` of keys with ``lo <= 2 mu k <= hi`` (closed)."""
    step = 2.0 * mu
    kmin = math.ceil(lo / step - KEY_GUARD)
    kmax = math.floor(hi / step + KEY_GUARD)
    return kmin, kmax


@dataclass(frozen=True, eq=False)
class Lattice:
    """The finite set ``(2 mu Z^n) ∩ box`` with integer-key indexing."""

    box: Box
    mu: float
    kmin: np.ndarray = field(init=False, repr=False)
    kmax: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mu = float(self.mu)
        if not (mu > 0 and math.isfinite(mu)):
            raise InvalidInputError(f"lattice half-spacing must be positive, got {self.mu}")
        object.__setattr__(self, "mu", mu)
        ranges = [axis_key_range(lo, hi, mu) for lo, hi in zip(self.box.lower, self.box.upper)]
        kmin = np.array([r[0] for r in ranges], dtype=np.int64)
        kmax = np.array([r[1] for r in ranges], dtype=np.int64)
        kmin.setflags(write=False)
        kmax.setflags(write=False)
        object.__setattr__(self, "kmin", kmin)
        object.__setattr__(self, "kmax", kmax)

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def spacing(self) -> float:
        return 2.0 * self.mu

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(v) for v in np.maximum(self.kmax - self.kmin + 1, 0))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    def __len__(self):
        return self.size

    def keys(self) -> np.ndarray:
        """All keys, shape ``(size, n)``, in lexicographic order."""
        if self.size == 0:
            return np.zeros((0, self.dim), dtype=np.int64)
        axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(self.kmin, self.kmax)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    def points(self) -> np.ndarray:
        return self.spacing * self.keys()

    def point(self, key) -> np.ndarray:
        return self.spacing * np.asarray(key, dtype=np.int64)

    def contains_key(self, key) -> np.ndarray:
        key = np.asarray(key, dtype=np.int64)
        return np.all((key >= self.kmin) & (key <= self.kmax), axis=-1)

    def index_of(self, key) -> np.ndarray:
        """Flat index of one key or a batch ``(..., n)`` of keys."""
        key = np.asarray(key, dtype=np.int64)
        if not np.all(self.contains_key(key)):
            raise InvalidInputError("key outside lattice")
        off = key - self.kmin
        return np.ravel_multi_index(tuple(np.moveaxis(off, -1, 0)), self.shape)

    def key_of(self, index) -> np.ndarray:
        idx = np.asarray(index, dtype=np.int64)
        off = np.stack(np.unravel_index(idx, self.shape), axis=-1)
        return off + self.kmin

    def nearest_keys(self, pts) -> np.ndarray:
        """Nearest in-lattice keys for a batch of points ``(..., n)``.

        Minimises the infinity distance; among all minimisers returns the
        lexicographically smallest key.  Points are not required to lie in the
        box (callers validate that where it matters).
        """
        if self.size == 0:
            raise InvalidInputError("empty lattice")
        a = np.asarray(pts, dtype=float)
        step = self.spacing
        kf = np.floor(a / step).astype(np.int64)
        lo_k = np.clip(kf, self.kmin, self.kmax)
        hi_k = np.clip(kf + 1, self.kmin, self.kmax)
        d_lo = np.abs(a - step * lo_k)
        d_hi = np.abs(a - step * hi_k)
        near = np.where(d_hi < d_lo, hi_k, lo_k)
        d_axis = np.minimum(d_lo, d_hi)
        dstar = np.max(d_axis, axis=-1, keepdims=True)
        tol = TIE_TOL * np.maximum(1.0, np.abs(a))
        bound = dstar + tol
        cand = np.ceil((a - bound) / step).astype(np.int64)
        cand = np.maximum(cand, self.kmin)
        cand = np.where(np.abs(a - step * cand) > bound, cand + 1, cand)
        return np.minimum(cand, near)

    def nearest_key(self, a) -> np.ndarray:
        a = as_vec(a, dim=self.dim, name="point")
        return self.nearest_keys(a[None, :])[0]

    def nearest_index(self, a) -> int:
        return int(self.index_of(self.nearest_key(a)))

    def __eq__(self, other):
        return isinstance(other, Lattice) and self.box == other.box and self.mu == other.mu

    def __hash__(self):
        return hash((self.box, self.mu))

    def __repr__(self):
        return f"Lattice(mu={self.mu!r}, box={self.box.bounds()}, size={self.size})"


def enumerate_lattice(box: Box, mu: float) -> Lattice:
    """All points of ``(2 mu Z^n) ∩ box`` (closed), lexicographically ordered."""
    return Lattice(box, mu)


def nearest_lattice_point(a, lattice: Lattice, tol: float = 1e-12) -> np.ndarray:
    """Nearest lattice point to ``a`` under the infinity norm.

    Ties go to the lexicographically smallest integer key.

    Raises:
        InvalidInputError: if ``a`` lies outside the lattice's box.
    """
    a = as_vec(a, dim=lattice.dim, name="point")
    if not lattice.box.contains(a, tol=tol):
        raise InvalidInputError(f"point {a.tolist()} outside box {lattice.box.bounds()}")
    return lattice.point(lattice.nearest_key(a))


def write_lattice_csv(lattice: Lattice, stream=None) -> str | None:
    """One key per line; ``#`` header lines record mu and the box bounds."""
    out = io.StringIO() if stream is None else stream
    out.write(f"# mu={lattice.mu!r}\n")
    out.write("# lower=" + ",".join(repr(float(v)) for v in lattice.box.lower) + "\n")
    out.write("# upper=" + ",".join(repr(float(v)) for v in lattice.box.upper) + "\n")
    for key in lattice.keys():
        out.write(",".join(str(int(k)) for k in key) + "\n")
    return out.getvalue() if stream is None else None


def read_lattice_csv(text: str | Iterable[str]) -> tuple[Lattice, np.ndarray]:
    """Parse :func:`write_lattice_csv` output; returns the lattice and the key rows."""
    lines = text.splitlines() if isinstance(text, str) else list(text)
    header = {}
    rows = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            name, _, value = line[1:].strip().partition("=")
            header[name.strip()] = value
            continue
        try:
            rows.append([int(v) for v in line.split(",")])
        except ValueError as exc:
            raise ParseError(f"bad key row {line!r}", line=lineno) from exc
    try:
        mu = float(header["mu"])
        lo = [float(v) for v in header["lower"].split(",")]
        hi = [float(v) for v in header["upper"].split(",")]
    except KeyError as exc:
        raise ParseError(f"missing header field {exc}") from exc
    lattice = Lattice(Box(np.array(lo), np.array(hi)), mu)
    keys = np.array(rows, dtype=np.int64).reshape(-1, lattice.dim)
    return lattice, keys
