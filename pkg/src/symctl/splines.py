"""Finite inner approximation of Lipschitz disturbance signals by hat splines.

A disturbance on ``[0, tau]`` is replaced by a piecewise-linear function with
``N + 2`` nodes at ``t = i h`` (``h = tau / (N + 1)``) whose node values lie on
the lattice ``(2 mu Z^l) ∩ D`` and whose consecutive node values differ by at
most ``kappa_d h`` in the infinity norm.  The constructive approximation of a
given signal scales it by ``rho``, samples it at the nodes and rounds each
sample to the lattice; ``Theta`` bounds the resulting sup-norm error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import CapExceededError, DegenerateClassError, InvalidInputError, InvalidSignalError
from .geometry import Box, Lattice, mu_hat

DEFAULT_CAP = 10**7
SIGNAL_CHECK_POINTS = 10_001


@dataclass(frozen=True)
class SplineBasis:
    tau: float
    N: int

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidInputError(f"tau must be positive, got {self.tau}")
        if int(self.N) != self.N or self.N < 0:
            raise InvalidInputError(f"N must be a nonnegative integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self) -> float:
        return self.tau / (self.N + 1)

    @property
    def size(self) -> int:
        return self.N + 2

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N + 2) * self.h

    def _check_time(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.tau):
            raise InvalidInputError(f"time outside [0, {self.tau}]")
        return t

    def segment(self, t: float) -> tuple[int, float]:
        """Index ``j`` of the linear piece containing ``t`` and the weight of node ``j + 1``."""
        j = min(int(math.floor(t / self.h)), self.N)
        w = (t - j * self.h) / self.h
        return j, min(max(w, 0.0), 1.0)


def eval_spline(basis: SplineBasis, i: int, t):
    """Value of the ``i``-th hat function at ``t`` (scalar or array)."""
    if not 0 <= i <= basis.N + 1:
        raise InvalidInputError(f"spline index {i} outside 0..{basis.N + 1}")
    t = basis._check_time(t)
    return np.clip(1.0 - np.abs(t / basis.h - i), 0.0, None)


@dataclass(frozen=True, eq=False)
class SplineSeq:
    """A disturbance symbol: node values ``2 mu * keys[i]`` on a hat-spline basis."""

    keys: np.ndarray
    basis: SplineBasis
    mu: float

    def __post_init__(self):
        k = np.asarray(self.keys, dtype=np.int64)
        if k.ndim == 1:
            k = k[:, None]
        if k.shape[0] != self.basis.size:
            raise InvalidInputError(f"expected {self.basis.size} coefficients, got {k.shape[0]}")
        k.setflags(write=False)
        object.__setattr__(self, "keys", k)

    @property
    def coefficients(self) -> np.ndarray:
        return (2.0 * self.mu) * self.keys

    def __call__(self, t):
        return eval_seq(self, t)

    def key_tuple(self) -> tuple:
        return tuple(map(tuple, self.keys.tolist()))

    def __eq__(self, other):
        return (
            isinstance(other, SplineSeq)
            and self.basis == other.basis
            and self.mu == other.mu
            and np.array_equal(self.keys, other.keys)
        )

    def __hash__(self):
        return hash((self.basis, self.mu, self.keys.tobytes()))


def eval_seq(z: SplineSeq, t):
    """``sum_i z_i s_i(t)``; returns ``(l,)`` for scalar ``t`` else ``(len(t), l)``."""
    t = z.basis._check_time(t)
    c = z.coefficients
    nodes = z.basis.nodes
    tt = np.atleast_1d(t)
    out = np.stack([np.interp(tt, nodes, c[:, j]) for j in range(c.shape[1])], axis=-1)
    return out[0] if np.ndim(t) == 0 else out


class SplineBatch:
    """Vectorised evaluation of many spline symbols at a common time.

    Calling with a scalar ``t`` returns ``(B, l)``; used as the disturbance of
    batched integration.
    """

    def __init__(self, coefficients: np.ndarray, basis: SplineBasis):
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.basis = basis

    def __call__(self, t: float) -> np.ndarray:
        j, w = self.basis.segment(float(t))
        c = self.coefficients
        if w == 0.0:
            return c[:, j]
        if w == 1.0:
            return c[:, j + 1]
        return (1.0 - w) * c[:, j] + w * c[:, j + 1]


def rho_theta(N: int, mu: float, kappa_d: float, tau: float, M: float) -> tuple[float, float]:
    """Scaling factor ``rho`` and error bound ``Theta`` of the scale/interpolate/round scheme.

    ``rho = 1 - max(mu / M, 2 mu / (kappa_d h))`` and
    ``Theta = (1 - rho) M + (1 + rho) kappa_d h + mu`` with ``h = tau / (N + 1)``.
    """
    if not M > 0 or not kappa_d > 0:
        raise DegenerateClassError(f"disturbance class needs M > 0 and kappa_d > 0 (got M={M}, kappa_d={kappa_d})")
    if not mu > 0 or not tau > 0 or N < 0:
        raise InvalidInputError(f"need mu > 0, tau > 0, N >= 0 (got mu={mu}, tau={tau}, N={N})")
    h = tau / (N + 1)
    rho = 1.0 - max(mu / M, 2.0 * mu / (kappa_d * h))
    theta = (1.0 - rho) * M + (1.0 + rho) * kappa_d * h + mu
    return rho, theta


@dataclass(frozen=True)
class ApproxParams:
    theta: float
    theta_hat: float
    N: int
    mu_d: float
    rho: float
    Theta_bound: float
    M: float
    kappa_d: float
    tau: float

    @property
    def feasible(self) -> bool:
        return self.rho > 0 and self.Theta_bound <= self.theta_hat

    @property
    def basis(self) -> SplineBasis:
        return SplineBasis(self.tau, self.N)

    @property
    def step_bound(self) -> float:
        return self.kappa_d * self.tau / (self.N + 1)


def lemma_bound(N, kappa_d, tau, M):
    """Closed-form upper bound on ``Theta`` along the schedule ``mu = 1/(N+1)^2``."""
    n1 = np.asarray(N, dtype=float) + 1.0
    return (np.maximum(1.0 / n1, 2.0 * M / (kappa_d * tau)) + 2.0 * kappa_d * tau + 1.0 / n1) / n1


def make_params(N, mu_d, kappa_d, tau, M, theta=None, mu_hat_D=math.inf) -> ApproxParams:
    """Parameters for an explicit ``(N, mu_d)``; ``theta`` defaults to ``Theta(N, mu_d)``."""
    rho, bound = rho_theta(N, mu_d, kappa_d, tau, M)
    theta = bound if theta is None else float(theta)
    return ApproxParams(theta, min(theta, mu_hat_D), int(N), float(mu_d), rho, bound, M, kappa_d, tau)


def search_params(
    theta: float,
    kappa_d: float,
    tau: float,
    M: float,
    mu_hat_D: float = math.inf,
    N: int | None = None,
    mu_d: float | None = None,
    max_iter: int = 10**6,
) -> ApproxParams:
    """Smallest ``N`` on the schedule ``mu = 1/(N+1)^2`` meeting ``rho > 0`` and ``Theta <= theta_hat``.

    With explicit ``N`` and ``mu_d`` the pair is only validated.

    Raises:
        InvalidInputError: explicit pair violates the conditions.
        CapExceededError: no feasible ``N`` below ``max_iter``.
    """
    if not theta > 0:
        raise InvalidInputError(f"theta must be positive, got {theta}")
    theta_hat = min(theta, mu_hat_D)
    if N is not None or mu_d is not None:
        if N is None or mu_d is None:
            raise InvalidInputError("explicit override needs both N and mu_d")
        p = make_params(N, mu_d, kappa_d, tau, M, theta, mu_hat_D)
        if not p.feasible:
            raise InvalidInputError(
                f"(N={N}, mu_d={mu_d}) infeasible: rho={p.rho:.6g} (need > 0), "
                f"Theta={p.Theta_bound:.6g} (need <= {theta_hat:.6g})"
            )
        return p
    rho_theta(0, 1.0, kappa_d, tau, M)  # validates the class
    chunk = 4096
    for start in range(0, max_iter, chunk):
        n = np.arange(start, min(start + chunk, max_iter), dtype=float)
        h = tau / (n + 1)
        mu = 1.0 / (n + 1) ** 2
        rho = 1.0 - np.maximum(mu / M, 2.0 * mu / (kappa_d * h))
        bound = (1.0 - rho) * M + (1.0 + rho) * kappa_d * h + mu
        ok = np.flatnonzero((rho > 0) & (bound <= theta_hat))
        if ok.size:
            n_star = int(n[ok[0]])
            return make_params(n_star, 1.0 / (n_star + 1) ** 2, kappa_d, tau, M, theta, mu_hat_D)
    raise CapExceededError(
        f"no feasible N below {max_iter} for theta={theta}; closed-form bound at the cap is "
        f"{float(lemma_bound(max_iter, kappa_d, tau, M)):.3g}",
        estimate=max_iter,
    )


def max_key_step(params: ApproxParams) -> int:
    """Largest integer ``K`` with ``K * 2 mu_d <= kappa_d tau / (N + 1)``, in exact rationals.

    Decimal inputs such as ``1.43e-4`` are read as the decimals they denote so
    boundary cases are not decided by binary rounding.
    """
    spacing = 2 * Fraction(repr(params.mu_d))
    bound = Fraction(repr(params.kappa_d)) * Fraction(repr(params.tau)) / (params.N + 1)
    return int(bound // spacing)


def _axis_path_count(length: int, K: int, steps: int, cap: float | None):
    """Number of integer walks of ``steps`` moves with ``|move| <= K`` inside ``[0, length)``."""
    exact = cap is None or (length * (2 * K + 1) ** min(steps, 64) <= 2**62 and length * (2 * K + 1) ** steps <= 2**62)
    v = np.ones(length, dtype=np.int64 if exact else float)
    for _ in range(steps):
        c = np.concatenate([[0], np.cumsum(v)])
        idx = np.arange(length)
        hi = np.minimum(idx + K + 1, length)
        lo = np.maximum(idx - K, 0)
        v = c[hi] - c[lo]
        if cap is not None and not exact and float(v.sum()) > cap:
            return math.inf
    return int(v.sum()) if exact else float(v.sum())


def count_approx(params: ApproxParams, D: Box, cap: float | None = None):
    """``|A(theta)|`` without enumerating; ``inf`` once a partial count passes ``cap``."""
    lat = Lattice(D, params.mu_d)
    K = max_key_step(params)
    total = 1
    for L in lat.shape:
        c = _axis_path_count(L, K, params.N + 1, cap)
        total = total * c
        if cap is not None and total > cap:
            return math.inf
    return total


class DisturbanceSet:
    """All spline symbols over a lattice, stored as rows of flat lattice indices."""

    def __init__(self, lattice: Lattice, basis: SplineBasis, K: int, indices: np.ndarray, params: ApproxParams | None = None):
        self.lattice = lattice
        self.basis = basis
        self.K = K
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.params = params
        self._lookup = None

    @property
    def mu(self) -> float:
        return self.lattice.mu

    def __len__(self):
        return self.indices.shape[0]

    def keys(self) -> np.ndarray:
        """Integer coefficient keys, shape ``(count, N + 2, l)``."""
        return self.lattice.key_of(self.indices)

    def coefficients(self, which=None) -> np.ndarray:
        idx = self.indices if which is None else self.indices[which]
        return self.lattice.spacing * self.lattice.key_of(idx)

    def __getitem__(self, j: int) -> SplineSeq:
        return SplineSeq(self.lattice.key_of(self.indices[j]), self.basis, self.mu)

    def __iter__(self):
        for j in range(len(self)):
            yield self[j]

    def batch(self, which=None) -> SplineBatch:
        return SplineBatch(self.coefficients(which), self.basis)

    def index_of(self, z: SplineSeq) -> int:
        """Position of ``z`` in the set.

        Raises:
            KeyError: ``z`` is not a member.
        """
        if self._lookup is None:
            self._lookup = {row.tobytes(): j for j, row in enumerate(self.indices)}
        if z.basis != self.basis or z.mu != self.mu or not np.all(self.lattice.contains_key(z.keys)):
            raise KeyError("symbol not in set")
        row = np.asarray(self.lattice.index_of(z.keys), dtype=np.int64)
        return self._lookup[row.tobytes()]

    def __contains__(self, z) -> bool:
        try:
            self.index_of(z)
        except KeyError:
            return False
        return True

    def to_csv(self, stream) -> None:
        """One symbol per row: ``N + 2`` keys, each key's components joined by ``:``."""
        keys = self.keys()
        stream.write(f"# mu={self.mu!r} tau={self.basis.tau!r} N={self.basis.N} K={self.K}\n")
        for row in keys:
            stream.write(",".join(":".join(str(int(c)) for c in k) for k in row) + "\n")

    def summary(self) -> dict:
        out = {
            "count": len(self),
            "N": self.basis.N,
            "tau": self.basis.tau,
            "mu_d": self.mu,
            "lattice_points": self.lattice.size,
            "max_key_step": self.K,
        }
        if self.params is not None:
            out.update(rho=self.params.rho, Theta=self.params.Theta_bound, theta=self.params.theta)
        return out


def enumerate_approx(params: ApproxParams, D: Box, cap: int = DEFAULT_CAP) -> DisturbanceSet:
    """Every node sequence on ``(2 mu_d Z^l) ∩ D`` with steps bounded by ``kappa_d tau/(N+1)``.

    Sequences come out in lexicographic order of their keys.

    Raises:
        CapExceededError: the count would exceed ``cap``.
    """
    lat = Lattice(D, params.mu_d)
    K = max_key_step(params)
    projected = count_approx(params, D, cap)
    if projected > cap:
        raise CapExceededError(f"disturbance set would hold more than {cap} symbols (estimate {projected:.3g})", projected)
    keys = lat.keys()
    l = lat.dim
    rng = np.arange(-K, K + 1, dtype=np.int64)
    offsets = np.stack(np.meshgrid(*[rng] * l, indexing="ij"), axis=-1).reshape(-1, l)
    seqs = np.arange(lat.size, dtype=np.int64)[:, None]
    for _ in range(params.N + 1):
        last = keys[seqs[:, -1]]
        cand = last[:, None, :] + offsets[None, :, :]
        ok = lat.contains_key(cand)
        src, which = np.nonzero(ok)
        nxt = lat.index_of(cand[src, which])
        seqs = np.concatenate([seqs[src], nxt[:, None]], axis=1)
    return DisturbanceSet(lat, params.basis, K, seqs, params)


def check_signal(d: Callable, params: ApproxParams, D: Box, points: int = SIGNAL_CHECK_POINTS) -> None:
    """Sampled membership test of ``d`` in the Lipschitz class.

    Raises:
        InvalidSignalError: range leaves ``D`` or a difference quotient exceeds ``kappa_d``.
    """
    t = np.linspace(0.0, params.tau, points)
    v = np.asarray(d(t), dtype=float).reshape(points, -1)
    if not np.all(D.contains(v, tol=1e-12)):
        raise InvalidSignalError("disturbance leaves D")
    slope = np.max(np.abs(np.diff(v, axis=0)), axis=1) / np.diff(t)
    if np.max(slope) > params.kappa_d * (1 + 1e-9) + 1e-12:
        raise InvalidSignalError(f"sampled Lipschitz constant {np.max(slope):.6g} exceeds kappa_d={params.kappa_d}")


def approximate_disturbance(d: Callable, params: ApproxParams, D: Box, check: bool = True) -> SplineSeq:
    """Constructive approximation: ``z_i`` = nearest lattice point to ``rho * d(i h)``.

    Ties are broken towards the lexicographically smallest key.  When
    ``params`` is feasible the result belongs to ``enumerate_approx(params, D)``
    and is within ``Theta`` of ``d`` in sup norm.
    """
    if check:
        check_signal(d, params, D)
    basis = params.basis
    lat = Lattice(D, params.mu_d)
    samples = np.asarray(d(basis.nodes), dtype=float).reshape(basis.size, -1)
    keys = lat.nearest_keys(params.rho * samples)
    return SplineSeq(keys, basis, params.mu_d)
