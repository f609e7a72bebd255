"""Finite symbolic models of sampled control systems with disturbances.

States are the lattice ``Q = (2 mu_x Z^n) ∩ X``, control labels the lattice
``A = (2 mu_u Z^m) ∩ U`` and disturbance labels the spline symbols ``B`` of
:mod:`symctl.splines`.  From ``q`` under ``(a, b)`` the model moves to every
``y in Q`` with ``|xi_{q a b}(tau) - y|_inf <= mu_x``.  An empty successor set
(the endpoint left ``X`` or fell in an uncovered strip near its boundary)
marks the triple as out of domain; games treat it as losing.

Triples are numbered ``t = (q * |A| + a) * |B| + b``.  Successor sets are
boxes in key space, so a model stores per axis the first key and the count.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import struct
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import CapExceededError, InvalidInputError, ParseError
from .flow import FlowConfig, _rk4_steps
from .geometry import Box, Lattice, inf_norm, mu_hat
from .lyapunov import KFunction, LyapunovCert, gamma_sup
from .splines import ApproxParams, DisturbanceSet, count_approx, enumerate_approx, make_params, rho_theta
from .system import SystemDef

SUCC_GUARD = 1e-12
CHUNK_TRAJECTORIES = 1 << 16
DEFAULT_TRIPLE_CAP = 5 * 10**7
FORMAT_MAGIC = b"SYMCTLM\0"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ParameterVector:
    """Quantisation parameters ``(tau, mu_x, mu_u, mu_d, N)`` plus the budget ``theta_d``."""

    tau: float
    mu_x: float
    mu_u: float
    mu_d: float
    N: int
    theta_d: float

    def __post_init__(self):
        for name in ("tau", "mu_x", "mu_u", "mu_d", "theta_d"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InvalidInputError(f"{name} must be positive and finite, got {v}")
            object.__setattr__(self, name, float(v))
        if int(self.N) != self.N or self.N < 0:
            raise InvalidInputError(f"N must be a nonnegative integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))

    def approx_params(self, sys: SystemDef) -> ApproxParams:
        return make_params(self.N, self.mu_d, sys.kappa_d, self.tau, sys.M, self.theta_d, mu_hat(sys.disturbance_box))

    def validate(self, sys: SystemDef) -> None:
        """Grid sizes must not exceed the smallest side of their box.

        Raises:
            InvalidInputError: naming the violated bound.
        """
        for name, box, label in (("mu_x", sys.state_box, "X"), ("mu_u", sys.control_box, "U"), ("mu_d", sys.disturbance_box, "D")):
            v = getattr(self, name)
            cap = mu_hat(box)
            if v > cap:
                raise InvalidInputError(f"{name}={v!r} exceeds the smallest side of {label} ({cap!r}); need {name} <= mu_hat({label})")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc) -> "ParameterVector":
        missing = [k for k in ("tau", "mu_x", "mu_u", "mu_d", "N", "theta_d") if k not in doc]
        if missing:
            raise InvalidInputError(f"parameter vector missing field(s): {missing}")
        from .system import _number

        return cls(*(_number(doc[k], k) if k != "N" else int(doc[k]) for k in ("tau", "mu_x", "mu_u", "mu_d", "N", "theta_d")))


@dataclass
class BisimCheckReport:
    """Margins (bound minus value) of the sufficient conditions; all must be >= 0."""

    lhs: float
    rhs: float
    margins: dict
    gamma_slope: float
    gamma_norm: str
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(m >= 0 for m in self.margins.values()) and self.margins.get("rho", 1.0) > 0

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    @property
    def violated(self) -> list[str]:
        return [k for k, m in self.margins.items() if m < 0 or (k == "rho" and m <= 0)]

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "precision_lhs": self.lhs,
            "precision_rhs": self.rhs,
            "margins": self.margins,
            "violated": self.violated,
            "gamma_slope": self.gamma_slope,
            "gamma_norm": self.gamma_norm,
            "notes": self.notes,
        }


def precision_lhs(P: ParameterVector, cert: LyapunovCert, gamma: KFunction) -> float:
    """``max(sigma_u(mu_u), sigma_d(theta_d)) / lam + gamma(mu_x) / (1 - exp(-lam tau))``."""
    s = max(float(cert.sigma_u(P.mu_u)), float(cert.sigma_d(P.theta_d)))
    return s / cert.lam + float(gamma(P.mu_x)) / (1.0 - math.exp(-cert.lam * P.tau))


def check_params(
    P: ParameterVector,
    cert: LyapunovCert,
    sys: SystemDef,
    epsilon: float,
    gamma: KFunction | None = None,
    gamma_norm: str = "dual",
) -> BisimCheckReport:
    """Evaluate the sufficient conditions for ``epsilon``-closeness of ``T_P`` to the sampled system.

    Margins reported (each must be nonnegative):

    * ``precision``: ``alpha_lo(eps) - [max(sigma_u(mu_u), sigma_d(theta_d))/lam + gamma(mu_x)/(1-e^{-lam tau})]``
    * ``mu_x``, ``mu_u``, ``mu_d``: smallest box side minus the grid parameter
    * ``theta_d``: ``theta_d - Theta(N, mu_d)``
    * ``rho``: the scaling factor, which must be strictly positive
    """
    if not epsilon > 0:
        raise InvalidInputError(f"epsilon must be positive, got {epsilon}")
    gamma = gamma or cert.gamma or gamma_sup(cert, sys.state_box, gamma_norm)
    lhs = precision_lhs(P, cert, gamma)
    rhs = float(cert.alpha_lo(epsilon))
    rho, big_theta = rho_theta(P.N, P.mu_d, sys.kappa_d, P.tau, sys.M)
    margins = {
        "precision": rhs - lhs,
        "mu_x": mu_hat(sys.state_box) - P.mu_x,
        "mu_u": mu_hat(sys.control_box) - P.mu_u,
        "mu_d": mu_hat(sys.disturbance_box) - P.mu_d,
        "theta_d": P.theta_d - big_theta,
        "rho": rho,
    }
    notes = [f"Theta(N={P.N}, mu_d={P.mu_d!r}) = {big_theta!r}"]
    if cert.gamma is None and gamma_norm == "inf":
        notes.append("gamma uses the infinity norm of dV/dy; this may under-estimate the mean-value slope")
    return BisimCheckReport(lhs, rhs, margins, gamma.coef, "given" if cert.gamma is not None else gamma_norm, notes)


def _largest_below(fn, limit: float, hi: float, iters: int = 200) -> float:
    """Largest ``x`` in ``(0, hi]`` with ``fn(x) <= limit`` for increasing ``fn``; 0 if none found."""
    if fn(hi) <= limit:
        return hi
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if fn(mid) <= limit:
            lo = mid
        else:
            hi = mid
    return lo


def largest_mu_d(N: int, theta_d: float, sys: SystemDef, tau: float, fraction: float = 0.95) -> float:
    """``fraction`` times the supremum of admissible ``mu_d`` at a fixed ``N`` (0 if none).

    Admissible means ``rho > 0``, ``Theta <= theta_d`` and ``mu_d <= mu_hat(D)``.
    """
    h = tau / (N + 1)
    rho_sup = min(sys.M, 0.5 * sys.kappa_d * h)
    cap = min(rho_sup, mu_hat(sys.disturbance_box))
    theta = lambda mu: rho_theta(N, mu, sys.kappa_d, tau, sys.M)[1]
    best = _largest_below(theta, theta_d, cap)
    mu = fraction * best
    if mu <= 0 or theta(mu) > theta_d or rho_theta(N, mu, sys.kappa_d, tau, sys.M)[0] <= 0:
        return 0.0
    return mu


def suggest_params(
    cert: LyapunovCert,
    sys: SystemDef,
    epsilon: float,
    tau: float,
    gamma: KFunction | None = None,
    max_N: int = 10_000,
    fraction: float = 0.95,
) -> ParameterVector:
    """A parameter vector passing :func:`check_params`, found by staged shrinking.

    Half of ``alpha_lo(epsilon)`` goes to the state grid and half to the
    control and disturbance terms.  ``mu_x``, ``mu_u`` and ``theta_d`` are the
    largest values meeting their share (bisection); then ``N`` is increased
    from 0 until some ``mu_d`` gives ``rho > 0`` and ``Theta <= theta_d``, and
    ``mu_d`` is set to ``fraction`` of the largest such value.

    Raises:
        CapExceededError: no ``N <= max_N`` works; the message names the binding inequality.
    """
    if not epsilon > 0 or not tau > 0:
        raise InvalidInputError("epsilon and tau must be positive")
    gamma = gamma or cert.gamma or gamma_sup(cert, sys.state_box)
    budget = float(cert.alpha_lo(epsilon))
    # a hair below half so that the two rounded shares never overshoot the budget
    share = 0.5 * budget * (1.0 - 1e-9)
    decay = 1.0 - math.exp(-cert.lam * tau)
    mu_x = _largest_below(lambda v: float(gamma(v)) / decay, share, mu_hat(sys.state_box))
    mu_u = _largest_below(lambda v: float(cert.sigma_u(v)) / cert.lam, share, mu_hat(sys.control_box))
    theta_d = _largest_below(lambda v: float(cert.sigma_d(v)) / cert.lam, share, 1e6 * max(sys.M, 1.0))
    for name, v in (("mu_x", mu_x), ("mu_u", mu_u), ("theta_d", theta_d)):
        if v <= 0:
            raise CapExceededError(f"precision inequality: no positive {name} found for epsilon={epsilon}")
    for N in range(max_N + 1):
        mu_d = largest_mu_d(N, theta_d, sys, tau, fraction)
        if mu_d > 0:
            P = ParameterVector(tau, mu_x, mu_u, mu_d, N, theta_d)
            report = check_params(P, cert, sys, epsilon, gamma)
            if report.passed:
                return P
            raise CapExceededError(f"staged search produced a failing vector; violated: {report.violated}")
    raise CapExceededError(
        f"theta_d inequality: Theta(N, mu_d) <= {theta_d!r} has no solution with rho > 0 for N <= {max_N}",
        estimate=max_N,
    )


@dataclass(frozen=True)
class ModelCounts:
    states: int
    controls: int
    disturbances: float

    @property
    def triples(self) -> float:
        return self.states * self.controls * self.disturbances


def model_counts(sys: SystemDef, P: ParameterVector, cap: float | None = None) -> ModelCounts:
    """``|Q|``, ``|A|``, ``|B|`` without enumerating anything."""
    P.validate(sys)
    q = Lattice(sys.state_box, P.mu_x).size
    a = Lattice(sys.control_box, P.mu_u).size
    b = count_approx(P.approx_params(sys), sys.disturbance_box, cap)
    return ModelCounts(q, a, b)


def successor_box(endpoints: np.ndarray, lattice: Lattice) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis first key and count of lattice points within ``mu`` of each endpoint.

    Distances exactly equal to ``mu`` are included (with a ``SUCC_GUARD`` band).
    Counts are clipped to zero when the box is empty on some axis.
    """
    step = lattice.spacing
    mu = lattice.mu
    e = np.asarray(endpoints, dtype=float)
    with np.errstate(invalid="ignore"):
        lo = np.ceil((e - mu) / step - SUCC_GUARD)
        hi = np.floor((e + mu) / step + SUCC_GUARD)
    lo = np.where(np.isfinite(lo), lo, 0).astype(np.int64)
    hi = np.where(np.isfinite(hi), hi, -1).astype(np.int64)
    lo = np.maximum(lo, lattice.kmin)
    hi = np.minimum(hi, lattice.kmax)
    # the guard band may admit a point slightly beyond mu; re-check distances
    lo = np.where(np.abs(step * lo - e) > mu * (1 + 1e-9) + SUCC_GUARD, lo + 1, lo)
    hi = np.where(np.abs(step * hi - e) > mu * (1 + 1e-9) + SUCC_GUARD, hi - 1, hi)
    cnt = np.clip(hi - lo + 1, 0, None)
    empty = np.any(cnt == 0, axis=-1, keepdims=True)
    cnt = np.where(empty, 0, cnt)
    return lo, cnt


class SymbolicModel:
    """The finite model ``T_P``; successors are materialised or computed on demand.

    Both modes evaluate trajectories in the same fixed chunks of states, so
    they agree bit for bit.
    """

    def __init__(self, sys: SystemDef, P: ParameterVector, flow: FlowConfig, mode: str = "materialized",
                 threads: int = 1, cap: float = DEFAULT_TRIPLE_CAP, disturbance_cap: int = 10**6, cache_chunks: int = 64):
        if mode not in ("materialized", "onthefly"):
            raise InvalidInputError(f"mode must be 'materialized' or 'onthefly', got {mode!r}")
        if abs(flow.tau - P.tau) > 0:
            raise InvalidInputError(f"flow tau={flow.tau} differs from parameter tau={P.tau}")
        P.validate(sys)
        self.sys = sys
        self.P = P
        self.flow = flow
        self.mode = mode
        self.states = Lattice(sys.state_box, P.mu_x)
        self.controls = Lattice(sys.control_box, P.mu_u)
        self.approx = P.approx_params(sys)
        if self.approx.rho <= 0:
            raise InvalidInputError(f"rho={self.approx.rho} must be positive for (N={P.N}, mu_d={P.mu_d})")
        self.disturbances: DisturbanceSet = enumerate_approx(self.approx, sys.disturbance_box, disturbance_cap)
        total = self.states.size * self.controls.size * len(self.disturbances)
        if total > cap:
            raise CapExceededError(f"model has {total} transitions triples, above cap {cap:.3g}", total)
        self.Q, self.A, self.B = self.states.size, self.controls.size, len(self.disturbances)
        self.chunk_states = max(1, CHUNK_TRAJECTORIES // (self.A * self.B))
        self._state_keys = self.states.keys()
        self._control_pts = self.controls.points()
        self._dbatch = self.disturbances.batch()
        self._cache: OrderedDict[int, tuple[np.ndarray, np.ndarray]] = OrderedDict()
        self._cache_chunks = cache_chunks
        self.lo = self.cnt = None
        if mode == "materialized":
            self._materialize(threads)

    @property
    def n_triples(self) -> int:
        return self.Q * self.A * self.B

    @property
    def n_chunks(self) -> int:
        return -(-self.Q // self.chunk_states)

    def triple(self, q: int, a: int, b: int) -> int:
        return (q * self.A + a) * self.B + b

    def _endpoints(self, chunk: int) -> np.ndarray:
        q0 = chunk * self.chunk_states
        q1 = min(q0 + self.chunk_states, self.Q)
        x = self.states.spacing * self._state_keys[q0:q1]
        S, n = x.shape
        x = np.broadcast_to(x[:, None, None, :], (S, self.A, self.B, n)).copy()
        u = self._control_pts[None, :, None, :]
        batch = self._dbatch
        d = lambda t: batch(t)[None, None, :, :]
        h = self.flow.tau / self.flow.substeps
        with np.errstate(all="ignore"):
            end = _rk4_steps(self.sys.field, x, u, d, 0, h, self.flow.substeps)
        return end.reshape(-1, n)

    def _chunk_boxes(self, chunk: int):
        lo, cnt = successor_box(self._endpoints(chunk), self.states)
        off = (lo - self.states.kmin).astype(np.int32)
        return off, cnt.astype(np.uint8 if np.all(cnt < 256) else np.int32)

    def _materialize(self, threads: int) -> None:
        chunks = range(self.n_chunks)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(self._chunk_boxes, chunks))
        else:
            parts = [self._chunk_boxes(c) for c in chunks]
        self.lo = np.concatenate([p[0] for p in parts])
        self.cnt = np.concatenate([p[1] for p in parts]).astype(np.int32)

    def _boxes_for(self, t: int):
        if self.lo is not None:
            return self.lo[t], self.cnt[t]
        per_chunk = self.chunk_states * self.A * self.B
        c, r = divmod(t, per_chunk)
        if c in self._cache:
            self._cache.move_to_end(c)
        else:
            self._cache[c] = self._chunk_boxes(c)
            if len(self._cache) > self._cache_chunks:
                self._cache.popitem(last=False)
        off, cnt = self._cache[c]
        return off[r], cnt[r].astype(np.int32)

    def successors(self, q: int, a: int, b: int) -> np.ndarray:
        """Flat state indices of all successors of ``q`` under ``(a, b)``, ascending."""
        if not (0 <= q < self.Q and 0 <= a < self.A and 0 <= b < self.B):
            raise InvalidInputError(f"triple ({q}, {a}, {b}) out of range")
        off, cnt = self._boxes_for(self.triple(q, a, b))
        if np.any(cnt == 0):
            return np.zeros(0, dtype=np.int64)
        axes = [np.arange(o, o + c) for o, c in zip(off, cnt)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
        return np.ravel_multi_index(tuple(grid.T), self.states.shape).astype(np.int64)

    def successor_keys(self, q_key, a: int, b: int) -> np.ndarray:
        q = int(self.states.index_of(q_key))
        return self.states.key_of(self.successors(q, a, b))

    def out_of_domain(self, q: int, a: int, b: int) -> bool:
        _, cnt = self._boxes_for(self.triple(q, a, b))
        return bool(np.any(cnt == 0))

    def endpoint(self, q: int, a: int, b: int) -> np.ndarray:
        """``xi_{q a b}(tau)`` recomputed for a single triple (not bit-matched to the chunks)."""
        from .flow import integrate

        x = self.states.spacing * self._state_keys[q]
        return integrate(self.sys, x, self._control_pts[a], self.disturbances[b], self.flow)

    def _all_boxes(self):
        if self.lo is not None:
            return self.lo, self.cnt
        parts = [self._chunk_boxes(c) for c in range(self.n_chunks)]
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]).astype(np.int32)

    def to_game(self):
        """CSR successor lists for :class:`symctl.games.GameGraph`."""
        from .games import GameGraph

        off, cnt = self._all_boxes()
        shape = self.states.shape
        sizes = np.prod(cnt.astype(np.int64), axis=1)
        offsets = np.zeros(self.n_triples + 1, dtype=np.int64)
        np.cumsum(sizes, out=offsets[1:])
        targets = np.empty(offsets[-1], dtype=np.int64)
        n = len(shape)
        # enumerate boxes grouped by their count pattern to stay vectorised
        patterns, inverse = np.unique(cnt, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        for p_idx, pat in enumerate(patterns):
            if np.any(pat == 0):
                continue
            rows = np.flatnonzero(inverse == p_idx)
            local = np.stack(np.meshgrid(*[np.arange(c) for c in pat], indexing="ij"), axis=-1).reshape(-1, n)
            keys = off[rows][:, None, :] + local[None, :, :]
            flat = np.ravel_multi_index(tuple(np.moveaxis(keys, -1, 0)), shape)
            pos = offsets[rows][:, None] + np.arange(local.shape[0])[None, :]
            targets[pos] = flat
        return GameGraph(self.Q, self.A, self.B, offsets, targets)

    def header(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "P": self.P.to_dict(),
            "X": self.sys.state_box.bounds(),
            "U": self.sys.control_box.bounds(),
            "D": self.sys.disturbance_box.bounds(),
            "kappa_d": self.sys.kappa_d,
            "system": self.sys.to_dict(),
            "substeps": self.flow.substeps,
            "counts": {"states": self.Q, "controls": self.A, "disturbances": self.B},
            "state_shape": list(self.states.shape),
        }

    def to_bytes(self) -> bytes:
        """Binary model: magic, version, JSON header, then per-triple runs of successor bits.

        Each triple's successor set is a box in key space; over the flat state
        order it is ``prod(cnt[:-1])`` runs of ``cnt[-1]`` consecutive ones.  The
        body stores ``n_runs`` per triple followed by ``(start, length)`` pairs.
        """
        off, cnt = self._all_boxes()
        shape = self.states.shape
        n = len(shape)
        nruns = np.where(np.any(cnt == 0, axis=1), 0, np.prod(cnt[:, :-1].astype(np.int64), axis=1))
        starts = []
        lengths = []
        patterns, inverse = np.unique(cnt, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        run_offsets = np.zeros(self.n_triples + 1, dtype=np.int64)
        np.cumsum(nruns, out=run_offsets[1:])
        all_starts = np.empty(run_offsets[-1], dtype=np.int64)
        all_lengths = np.empty(run_offsets[-1], dtype=np.int64)
        for p_idx, pat in enumerate(patterns):
            if np.any(pat == 0):
                continue
            rows = np.flatnonzero(inverse == p_idx)
            lead = np.stack(np.meshgrid(*[np.arange(c) for c in pat[:-1]], indexing="ij"), axis=-1).reshape(-1, n - 1) if n > 1 else np.zeros((1, 0), dtype=np.int64)
            keys = off[rows][:, None, :].repeat(lead.shape[0], axis=1)
            keys[:, :, :-1] += lead[None, :, :]
            flat = np.ravel_multi_index(tuple(np.moveaxis(keys, -1, 0)), shape)
            pos = run_offsets[rows][:, None] + np.arange(lead.shape[0])[None, :]
            all_starts[pos] = flat
            all_lengths[pos] = pat[-1]
        head = json.dumps(self.header(), sort_keys=True).encode()
        buf = io.BytesIO()
        buf.write(FORMAT_MAGIC)
        buf.write(struct.pack("<II", FORMAT_VERSION, len(head)))
        buf.write(head)
        buf.write(nruns.astype("<u4").tobytes())
        buf.write(all_starts.astype("<i8").tobytes())
        buf.write(all_lengths.astype("<u4").tobytes())
        return buf.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    def to_csv(self, stream) -> None:
        """Debug export: ``state, control, disturbance, successors`` (flat indices joined by ``;``)."""
        stream.write("state,control,disturbance,successors\n")
        for q in range(self.Q):
            for a in range(self.A):
                for b in range(self.B):
                    s = self.successors(q, a, b)
                    stream.write(f"{q},{a},{b}," + ";".join(map(str, s.tolist())) + "\n")

    def summary(self) -> dict:
        out = {"states": self.Q, "controls": self.A, "disturbances": self.B, "triples": self.n_triples, "mode": self.mode}
        if self.cnt is not None:
            out["out_of_domain_triples"] = int(np.sum(np.any(self.cnt == 0, axis=1)))
        return out


@dataclass
class LoadedModel:
    """A model read back from disk: header plus CSR successor lists."""

    header: dict
    offsets: np.ndarray
    targets: np.ndarray

    @property
    def counts(self) -> tuple[int, int, int]:
        c = self.header["counts"]
        return c["states"], c["controls"], c["disturbances"]

    def successors(self, q: int, a: int, b: int) -> np.ndarray:
        Q, A, B = self.counts
        t = (q * A + a) * B + b
        return self.targets[self.offsets[t]: self.offsets[t + 1]]

    def to_game(self):
        from .games import GameGraph

        Q, A, B = self.counts
        return GameGraph(Q, A, B, self.offsets, self.targets)


def load_model(data: bytes | str) -> LoadedModel:
    """Parse the binary format written by :meth:`SymbolicModel.to_bytes` (or a path to it)."""
    if isinstance(data, str):
        with open(data, "rb") as fh:
            data = fh.read()
    if data[:8] != FORMAT_MAGIC:
        raise ParseError("not a symbolic model file (bad magic)", offset=0)
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported model format version {version}", offset=8)
    pos = 16
    header = json.loads(data[pos: pos + hlen])
    pos += hlen
    c = header["counts"]
    T = c["states"] * c["controls"] * c["disturbances"]
    nruns = np.frombuffer(data, dtype="<u4", count=T, offset=pos).astype(np.int64)
    pos += 4 * T
    R = int(nruns.sum())
    starts = np.frombuffer(data, dtype="<i8", count=R, offset=pos)
    pos += 8 * R
    lengths = np.frombuffer(data, dtype="<u4", count=R, offset=pos).astype(np.int64)
    pos += 4 * R
    if pos != len(data):
        raise ParseError(f"trailing bytes in model file ({len(data) - pos})", offset=pos)
    run_triple = np.repeat(np.arange(T), nruns)
    sizes = np.bincount(run_triple, weights=lengths, minlength=T).astype(np.int64)
    offsets = np.zeros(T + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    # expand runs
    total = int(lengths.sum())
    run_pos = np.repeat(np.cumsum(lengths) - lengths, lengths)
    targets = np.repeat(starts, lengths) + (np.arange(total) - run_pos)
    return LoadedModel(header, offsets, targets.astype(np.int64))


def build_model(sys: SystemDef, P: ParameterVector, flow: FlowConfig | None = None, mode: str = "materialized",
                threads: int = 1, cap: float = DEFAULT_TRIPLE_CAP) -> SymbolicModel:
    """Construct ``T_P``; see :class:`SymbolicModel`."""
    flow = flow or FlowConfig(P.tau)
    return SymbolicModel(sys, P, flow, mode, threads, cap)


def successors(model: SymbolicModel, x_key, u: int, d: int) -> np.ndarray:
    """Keys of all ``y in Q`` within ``mu_x`` of ``xi_{x u d}(tau)``."""
    return model.successor_keys(x_key, u, d)
