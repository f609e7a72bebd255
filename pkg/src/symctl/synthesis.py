"""Controller synthesis for a reach / dwell / reach / dwell / return-and-stay task.

The task, with regions ``Omega1`` and ``Omega2`` of the state space:

* M0: reach ``Omega1``;
* M1: stay in ``Omega1`` for between ``dwell1[0]`` and ``dwell1[1]`` seconds, then leave;
* M2: reach ``Omega2``;
* M3: stay in ``Omega2`` for at most ``dwell2_max`` seconds, then leave;
* M4: reach ``Omega1`` again;
* M5: stay in ``Omega1`` forever.

A deterministic monitor tracks progress.  It reads the label of each new
state as soon as it is reached (the initial state included), and its dwell
counters count consecutive sampling instants spent inside the current region.
Leaving ``Omega1`` is allowed once ``ceil(dwell1[0]/tau)`` instants have been
spent there, and staying is allowed up to ``floor(dwell1[1]/tau)`` instants;
``Omega2`` may be occupied for at most ``floor(dwell2_max/tau)`` instants.

Synthesis solves one reachability game on the product of the symbolic model
and the monitor, whose target is "M5 and inside the safety kernel of Omega1".
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .abstraction import SymbolicModel, successor_box
from .errors import InvalidInputError, ParseError, RefinementError, SynthesisFailure
from .flow import integrate
from .games import GameGraph, GameResult, solve_reach, solve_safety
from .geometry import Box, inf_norm
from .lyapunov import LyapunovCert
from .splines import approximate_disturbance
from .system import DisturbanceSignal, SystemDef, _box, _number

MODE_NAMES = ("M0", "M1", "M2", "M3", "M4", "M5")
FAIL = -1
STEP_TOL = 1e-9
CONTROLLER_MAGIC = b"SYMCTLC\0"


@dataclass(frozen=True, eq=False)
class SpecMonitor:
    """Regions, dwell bounds (seconds) and the sampling time they are counted in."""

    omega1: Box
    omega2: Box
    tau: float
    dwell1: tuple[float, float | None] = (2.0, 4.0)
    dwell2_max: float | None = 3.0
    x0: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidInputError(f"tau must be positive, got {self.tau}")
        if self.omega1.dim != self.omega2.dim:
            raise InvalidInputError("regions must have the same dimension")
        lo, hi = self.dwell1
        if lo < 0 or (hi is not None and hi < lo):
            raise InvalidInputError(f"invalid dwell window {self.dwell1}")
        if self.Lmax1 is not None and self.Lmax1 < max(self.Lmin1, 1):
            raise InvalidInputError(f"dwell window {self.dwell1} contains no whole number of steps of {self.tau}")
        if self.Lmax2 is not None and self.Lmax2 < 1:
            raise InvalidInputError(f"dwell bound {self.dwell2_max} is shorter than one step of {self.tau}")

    @property
    def Lmin1(self) -> int:
        return math.ceil(self.dwell1[0] / self.tau - STEP_TOL)

    @property
    def Lmax1(self) -> int | None:
        hi = self.dwell1[1]
        return None if hi is None else math.floor(hi / self.tau + STEP_TOL)

    @property
    def Lmax2(self) -> int | None:
        return None if self.dwell2_max is None else math.floor(self.dwell2_max / self.tau + STEP_TOL)

    @property
    def cap1(self) -> int:
        return self.Lmax1 if self.Lmax1 is not None else max(self.Lmin1, 1)

    @property
    def cap2(self) -> int:
        return self.Lmax2 if self.Lmax2 is not None else 1

    def states(self) -> list[tuple[int, int]]:
        """Monitor states ``(mode, counter)`` in index order."""
        out = [(0, 0)]
        out += [(1, c) for c in range(1, self.cap1 + 1)]
        out += [(2, 0)]
        out += [(3, c) for c in range(1, self.cap2 + 1)]
        out += [(4, 0), (5, 0)]
        return out

    def step(self, mode: int, c: int, in1: bool, in2: bool) -> tuple[int, int] | None:
        """Monitor state after reading a new state's labels; ``None`` is failure."""
        if mode == 0:
            return (1, 1) if in1 else (0, 0)
        if mode == 1:
            if c >= self.Lmin1 and (not in1 or in2):
                return (3, 1) if in2 else (2, 0)
            if not in1:
                return None
            if self.Lmax1 is not None and c + 1 > self.Lmax1:
                return None
            return (1, min(c + 1, self.cap1))
        if mode == 2:
            return (3, 1) if in2 else (2, 0)
        if mode == 3:
            if not in2 or in1:
                return (5, 0) if in1 else (4, 0)
            if self.Lmax2 is not None and c + 1 > self.Lmax2:
                return None
            return (3, min(c + 1, self.cap2))
        if mode == 4:
            return (5, 0) if in1 else (4, 0)
        if mode == 5:
            return (5, 0) if in1 else None
        raise InvalidInputError(f"unknown mode {mode}")

    def table(self) -> np.ndarray:
        """``next[m, label]`` with ``label = in1 + 2 * in2``; ``FAIL`` for failure."""
        states = self.states()
        index = {s: i for i, s in enumerate(states)}
        nxt = np.full((len(states), 4), FAIL, dtype=np.int64)
        for i, (mode, c) in enumerate(states):
            for label in range(4):
                r = self.step(mode, c, bool(label & 1), bool(label & 2))
                if r is not None:
                    nxt[i, label] = index[r]
        return nxt

    def initial(self, label: int) -> int:
        """Monitor state after reading the initial state's label."""
        r = self.step(0, 0, bool(label & 1), bool(label & 2))
        return self.states().index(r)

    def labels(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return self.omega1.contains(pts).astype(np.int64) + 2 * self.omega2.contains(pts).astype(np.int64)

    def mode_of(self, m: int) -> int:
        return self.states()[m][0]

    def describe(self, m: int) -> str:
        mode, c = self.states()[m]
        return f"{MODE_NAMES[mode]}" + (f"[{c}]" if mode in (1, 3) else "")

    def run(self, labels) -> list[int]:
        """Monitor states along a label sequence (first label is the initial state's); stops at failure."""
        labels = list(labels)
        nxt = self.table()
        out = [self.initial(int(labels[0]))]
        for lab in labels[1:]:
            m = int(nxt[out[-1], int(lab)])
            out.append(m)
            if m == FAIL:
                break
        return out

    def to_dict(self) -> dict:
        return {
            "omega1": self.omega1.bounds(),
            "omega2": self.omega2.bounds(),
            "tau": self.tau,
            "dwell1": list(self.dwell1),
            "dwell2_max": self.dwell2_max,
            "x0": None if self.x0 is None else list(self.x0),
        }

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, doc, tau: float | None = None) -> "SpecMonitor":
        """Regions as ``[[lo, hi], ...]`` (constant expressions allowed), times in seconds."""
        for k in ("omega1", "omega2"):
            if k not in doc:
                raise InvalidInputError(f"spec missing field {k!r}")
        t = doc.get("tau", tau)
        if t is None:
            raise InvalidInputError("spec needs a sampling time 'tau'")
        d1 = doc.get("dwell1", [2.0, 4.0])
        d1 = (_number(d1[0], "dwell1[0]"), None if d1[1] is None else _number(d1[1], "dwell1[1]"))
        d2 = doc.get("dwell2_max", 3.0)
        x0 = doc.get("x0")
        return cls(
            _box(doc["omega1"], "omega1"),
            _box(doc["omega2"], "omega2"),
            float(t),
            d1,
            None if d2 is None else _number(d2, "dwell2_max"),
            None if x0 is None else tuple(_number(v, "x0") for v in x0),
        )


def pendulum_spec(tau: float = 1.0, dwell1=(2.0, 4.0), dwell2_max=3.0) -> SpecMonitor:
    """The pendulum task: swing to ``[pi/8, pi/4]``, dwell, swing to ``[-pi/4, -pi/8]``, come back and stay."""
    return SpecMonitor.from_dict(
        {
            "omega1": [["pi/8", "pi/4"], [-0.5, 0.5]],
            "omega2": [["-pi/4", "-pi/8"], [-0.5, 0.5]],
            "tau": tau,
            "dwell1": list(dwell1),
            "dwell2_max": dwell2_max,
            "x0": [0.0, 0.0],
        }
    )


def product_lift(spec_table: np.ndarray, labels: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """``lift(Z)[q', m] = Z[q', next[m, label(q')]]`` (False when the monitor fails)."""
    idx = spec_table[:, labels].T  # (Q, K)
    safe_idx = np.maximum(idx, 0)
    rows = np.arange(labels.size)[:, None]
    fails = idx < 0

    def lift(Z):
        G = Z[rows, safe_idx]
        G[fails] = False
        return G

    return lift


@dataclass
class Controller:
    """Control index per product state ``(q, monitor state)``; ``-1`` where undefined."""

    table: np.ndarray
    spec_hash: str
    header: dict = field(default_factory=dict)

    @property
    def winning(self) -> np.ndarray:
        return self.table >= 0

    def __call__(self, q: int, m: int) -> int:
        return int(self.table[q, m])

    def to_bytes(self) -> bytes:
        """Header JSON then ``(flat product index, control)`` pairs as little-endian int32."""
        flat = np.flatnonzero(self.table.ravel() >= 0)
        pairs = np.stack([flat, self.table.ravel()[flat]], axis=1).astype("<i4")
        head = dict(self.header)
        head.update(spec_hash=self.spec_hash, shape=list(self.table.shape), entries=int(flat.size))
        hb = json.dumps(head, sort_keys=True).encode()
        return CONTROLLER_MAGIC + struct.pack("<I", len(hb)) + hb + pairs.tobytes()

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "Controller":
        if data[:8] != CONTROLLER_MAGIC:
            raise ParseError("not a controller file (bad magic)", offset=0)
        (hlen,) = struct.unpack_from("<I", data, 8)
        head = json.loads(data[12: 12 + hlen])
        pairs = np.frombuffer(data, dtype="<i4", offset=12 + hlen).reshape(-1, 2)
        if pairs.shape[0] != head["entries"]:
            raise ParseError("controller entry count mismatch")
        shape = tuple(head.pop("shape"))
        table = np.full(shape, -1, dtype=np.int64)
        table.ravel()[pairs[:, 0]] = pairs[:, 1]
        spec_hash = head.pop("spec_hash")
        head.pop("entries")
        return cls(table, spec_hash, head)

    @classmethod
    def load(cls, path) -> "Controller":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


@dataclass
class SynthesisResult:
    controller: Controller
    q0: int
    m0: int
    reach: GameResult
    safety: GameResult
    labels: np.ndarray
    spec_table: np.ndarray

    @property
    def winning_initial(self) -> bool:
        return bool(self.controller.table[self.q0, self.m0] >= 0)


def cooperative_reach(graph: GameGraph, spec_table: np.ndarray, labels: np.ndarray, q0: int, m0: int) -> np.ndarray:
    """Product states reachable from ``(q0, m0)`` under some choice of every player."""
    Q, K = graph.Q, spec_table.shape[0]
    # unique successors of each state over all labels
    per_state = graph.A * graph.B
    src = np.repeat(np.arange(graph.offsets.size - 1) // per_state, np.diff(graph.offsets))
    pairs = np.unique(np.stack([src, graph.targets], axis=1), axis=0) if graph.targets.size else np.zeros((0, 2), dtype=np.int64)
    adj_off = np.searchsorted(pairs[:, 0], np.arange(Q + 1))
    adj = pairs[:, 1]
    seen = np.zeros((Q, K), dtype=bool)
    seen[q0, m0] = True
    frontier = np.array([[q0, m0]])
    while frontier.size:
        counts = adj_off[frontier[:, 0] + 1] - adj_off[frontier[:, 0]]
        rep_m = np.repeat(frontier[:, 1], counts)
        starts = np.repeat(adj_off[frontier[:, 0]], counts)
        local = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        q2 = adj[starts + local]
        m2 = spec_table[rep_m, labels[q2]]
        keep = m2 >= 0
        q2, m2 = q2[keep], m2[keep]
        new = ~seen[q2, m2]
        q2, m2 = q2[new], m2[new]
        seen[q2, m2] = True
        frontier = np.unique(np.stack([q2, m2], axis=1), axis=0) if q2.size else np.zeros((0, 2), dtype=np.int64)
    return seen


def synthesize_game(graph: GameGraph, spec: SpecMonitor, labels: np.ndarray, q0: int, header: dict | None = None) -> SynthesisResult:
    """Solve the task on an explicit game graph with per-state region labels.

    Raises:
        SynthesisFailure: ``(q0, initial monitor state)`` is losing; ``mode``
            names the last mode that is reachable from the start but has no
            winning state among those reachable.
    """
    labels = np.asarray(labels, dtype=np.int64)
    table = spec.table()
    K = table.shape[0]
    modes = np.array([s[0] for s in spec.states()])
    in1 = (labels & 1).astype(bool)
    safety = solve_safety(graph, in1)
    target = np.zeros((graph.Q, K), dtype=bool)
    m5 = int(np.flatnonzero(modes == 5)[0])
    target[:, m5] = safety.winning
    lift = product_lift(table, labels)
    reach = solve_reach(graph, target, lift=lift)
    ctrl = np.where(reach.winning, reach.strategy, -1)
    ctrl[:, m5] = np.where(safety.winning, safety.strategy, -1)
    m0 = spec.initial(int(labels[q0]))
    result = SynthesisResult(Controller(ctrl, spec.hash(), header or {}), q0, m0, reach, safety, labels, table)
    if not result.winning_initial:
        seen = cooperative_reach(graph, table, labels, q0, m0)
        culprit = 0
        for mode in range(5, -1, -1):
            cols = modes == mode
            r = seen[:, cols]
            if r.any() and not np.any(r & reach.winning[:, cols]):
                culprit = mode
                break
        err = SynthesisFailure(
            f"initial state {q0} is not winning; mode {MODE_NAMES[culprit]} is reachable but has no winning state",
            mode=MODE_NAMES[culprit],
        )
        err.result = result
        raise err
    return result


def synthesize(model: SymbolicModel, spec: SpecMonitor, x0=None, graph: GameGraph | None = None) -> SynthesisResult:
    """Controller for ``spec`` on ``model`` from the state nearest ``x0`` (default ``spec.x0``)."""
    if abs(spec.tau - model.P.tau) > 0:
        raise InvalidInputError(f"spec tau={spec.tau} differs from model tau={model.P.tau}")
    x0 = spec.x0 if x0 is None else x0
    if x0 is None:
        raise InvalidInputError("no initial state given")
    graph = graph or model.to_game()
    labels = spec.labels(model.states.points())
    q0 = model.states.nearest_index(x0)
    header = {"P": model.P.to_dict(), "counts": [model.Q, model.A, model.B], "monitor_states": [spec.describe(i) for i in range(len(spec.states()))]}
    return synthesize_game(graph, spec, labels, q0, header)


@dataclass
class VerifyReport:
    ok: bool
    horizon: int
    layer_sizes: list
    modes_reached: list
    failure: dict | None = None


def verify_closed_loop(graph: GameGraph, result: SynthesisResult, horizon: int = 8) -> VerifyReport:
    """Every disturbance-symbol sequence and successor choice up to ``horizon`` steps.

    Propagates the set of product states reachable in exactly ``k`` steps under
    the controller; this visits the same states as walking the tree of
    sequences, without the exponential blow-up.
    """
    ctrl = result.controller.table
    table = result.spec_table
    labels = result.labels
    A, B = graph.A, graph.B
    layer = np.array([[result.q0, result.m0]])
    sizes = [1]
    modes = {int(result.m0)}
    for k in range(horizon):
        q, m = layer[:, 0], layer[:, 1]
        a = ctrl[q, m]
        if np.any(a < 0):
            j = int(np.argmax(a < 0))
            return VerifyReport(False, horizon, sizes, sorted(modes), {"step": k, "state": layer[j].tolist(), "reason": "controller undefined"})
        t = ((q * A + a)[:, None] * B + np.arange(B)[None, :]).ravel()
        rep = np.repeat(np.arange(len(layer)), B)
        cnt = graph.offsets[t + 1] - graph.offsets[t]
        if np.any(cnt == 0):
            j = int(rep[np.argmax(cnt == 0)])
            return VerifyReport(False, horizon, sizes, sorted(modes), {"step": k, "state": layer[j].tolist(), "reason": "blocked"})
        starts = np.repeat(graph.offsets[t], cnt)
        local = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        q2 = graph.targets[starts + local]
        m_src = np.repeat(m[rep], cnt)
        m2 = table[m_src, labels[q2]]
        if np.any(m2 < 0):
            j = int(np.argmax(m2 < 0))
            return VerifyReport(False, horizon, sizes, sorted(modes), {"step": k + 1, "state": [int(q2[j]), -1], "reason": "monitor failure"})
        layer = np.unique(np.stack([q2, m2], axis=1), axis=0)
        sizes.append(int(len(layer)))
        modes |= set(int(v) for v in np.unique(layer[:, 1]))
    return VerifyReport(True, horizon, sizes, sorted(modes))


def verify_tree_walk(graph: GameGraph, result: SynthesisResult, horizon: int, node_cap: int = 10**6) -> tuple[bool, int]:
    """Literal depth-first walk over all (symbol, successor) sequences; returns ``(ok, leaves)``.

    Exponential; intended as an oracle on small horizons.
    """
    ctrl = result.controller.table
    table = result.spec_table
    labels = result.labels
    leaves = 0
    stack = [(result.q0, result.m0, 0)]
    while stack:
        q, m, k = stack.pop()
        if k == horizon:
            leaves += 1
            if leaves > node_cap:
                raise InvalidInputError(f"tree walk exceeds {node_cap} leaves")
            continue
        a = ctrl[q, m]
        if a < 0:
            return False, leaves
        for b in range(graph.B):
            succ = graph.successors(q, a, b)
            if succ.size == 0:
                return False, leaves
            for q2 in succ:
                m2 = table[m, labels[q2]]
                if m2 < 0:
                    return False, leaves
                stack.append((int(q2), int(m2), k + 1))
    return True, leaves


def check_closure(graph: GameGraph, result: SynthesisResult) -> int:
    """Number of (winning product state, symbol, successor) moves that leave the winning set."""
    ctrl = result.controller.table
    table = result.spec_table
    labels = result.labels
    q, m = np.nonzero(ctrl >= 0)
    a = ctrl[q, m]
    A, B = graph.A, graph.B
    t = ((q * A + a)[:, None] * B + np.arange(B)[None, :]).ravel()
    rep = np.repeat(np.arange(q.size), B)
    cnt = graph.offsets[t + 1] - graph.offsets[t]
    bad = int(np.sum(cnt == 0))
    starts = np.repeat(graph.offsets[t], cnt)
    local = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    q2 = graph.targets[starts + local]
    m2 = table[np.repeat(m[rep], cnt), labels[q2]]
    bad += int(np.sum(m2 < 0))
    ok = m2 >= 0
    bad += int(np.sum(ctrl[q2[ok], m2[ok]] < 0))
    return bad


@dataclass
class SimulationTrace:
    times: np.ndarray
    modes: list
    symbolic: np.ndarray
    symbolic_keys: np.ndarray
    concrete: np.ndarray
    controls: np.ndarray
    disturbance: np.ndarray
    distance: np.ndarray
    V: np.ndarray
    satisfied: bool
    reached_final: bool

    def to_csv(self, stream) -> None:
        n = self.concrete.shape[1]
        cols = ["step", "mode"] + [f"y{i + 1}" for i in range(n)] + [f"x{i + 1}" for i in range(n)]
        cols += [f"u{i + 1}" for i in range(self.controls.shape[1])] + [f"d{i + 1}" for i in range(self.disturbance.shape[1])]
        cols += ["distance"]
        stream.write(",".join(cols) + "\n")
        for k in range(len(self.times)):
            row = [str(k), self.modes[k]]
            row += [repr(float(v)) for v in self.symbolic[k]] + [repr(float(v)) for v in self.concrete[k]]
            row += [repr(float(v)) for v in self.controls[k]] + [repr(float(v)) for v in self.disturbance[k]]
            row += [repr(float(self.distance[k]))]
            stream.write(",".join(row) + "\n")


def _closest(model: SymbolicModel, cert: LyapunovCert, x: np.ndarray, candidates: np.ndarray) -> int:
    pts = model.states.spacing * model.states.key_of(candidates)
    v = cert.V(np.broadcast_to(x, pts.shape), pts)
    return int(candidates[int(np.argmin(v))])


def simulate_closed_loop(model: SymbolicModel, result: SynthesisResult, cert: LyapunovCert, d: DisturbanceSignal,
                         x0, steps: int, spec: SpecMonitor) -> SimulationTrace:
    """Run the controller on the concrete system alongside its symbolic twin.

    At each step the symbolic state ``y`` supplies the control, the true
    disturbance on ``[k tau, (k+1) tau]`` is replaced by its spline symbol,
    and the symbolic successor is the one minimising ``V(x_{k+1}, y)``.

    Raises:
        RefinementError: the controller is undefined at a visited product state.
    """
    sys = model.sys
    x = np.asarray(x0, dtype=float)
    tau = model.P.tau
    lo, cnt = successor_box(x[None, :], model.states)
    if np.all(cnt > 0):
        axes = [np.arange(o, o + c) for o, c in zip(lo[0], cnt[0])]
        keys = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, x.size)
        cands = np.asarray(model.states.index_of(keys)).reshape(-1)
        q = _closest(model, cert, x, cands)
    else:
        q = model.states.nearest_index(x)
    if q != result.q0:
        raise RefinementError(f"x0 maps to state {q}, controller was synthesised from {result.q0}", step=0)
    m = result.m0
    table = result.spec_table
    labels = result.labels
    ctrl = result.controller.table
    controls = model.controls.points()
    rows = {k: [] for k in ("y", "key", "x", "u", "d", "mode")}
    satisfied = True
    for k in range(steps + 1):
        y = model.states.spacing * model.states.key_of(q)
        rows["y"].append(y)
        rows["key"].append(model.states.key_of(q))
        rows["x"].append(x)
        rows["mode"].append(spec.describe(m))
        dk = d.shifted(k * tau)
        rows["d"].append(np.asarray(dk(0.0)))
        if k == steps:
            rows["u"].append(np.full(model.controls.dim, np.nan))
            break
        a = int(ctrl[q, m])
        if a < 0:
            raise RefinementError(f"controller undefined at state {q}, monitor {spec.describe(m)}", step=k)
        u = controls[a]
        rows["u"].append(u)
        z = approximate_disturbance(dk, model.approx, sys.disturbance_box)
        b = model.disturbances.index_of(z)
        x = integrate(sys, x, u, dk, model.flow)
        succ = model.successors(q, a, b)
        if succ.size == 0:
            raise RefinementError(f"symbolic successor set empty at state {q}", step=k)
        q = _closest(model, cert, x, succ)
        m = int(table[m, labels[q]])
        if m < 0:
            satisfied = False
            rows["mode"].append("FAIL")
            break
    Y = np.array(rows["y"])
    Xc = np.array(rows["x"])
    n = min(len(Y), len(Xc))
    Y, Xc = Y[:n], Xc[:n]
    return SimulationTrace(
        times=tau * np.arange(n),
        modes=rows["mode"][:n],
        symbolic=Y,
        symbolic_keys=np.array(rows["key"][:n]),
        concrete=Xc,
        controls=np.array(rows["u"][:n]),
        disturbance=np.array(rows["d"][:n]),
        distance=inf_norm(Xc - Y),
        V=cert.V(Xc, Y),
        satisfied=satisfied,
        reached_final=satisfied and rows["mode"][n - 1].startswith("M5"),
    )
