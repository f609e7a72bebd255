"""Control systems ``x' = f(x, u, d)`` with boxed state, control and disturbance sets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import expr as ex
from .errors import InvalidInputError, NumericDomainError, ParseError
from .geometry import Box, as_vec

EQUILIBRIUM_TOL = 1e-9

PENDULUM_CONSTANTS = {"g": 9.8, "l": 0.5, "m": 0.6, "k": 2.0}
PENDULUM_FIELD = (
    "x2",
    "-(g/l)*sin(x1) - (k/m)*x2 + u1/(m*l^2) + d1*cos(x1)",
)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Parsed right-hand side; one expression per state component.

    Calling the field evaluates all components on batched inputs
    ``x (..., n)``, ``u (..., m)``, ``d (..., l)`` and returns ``(..., n)``.
    """

    expressions: tuple[str, ...]
    n: int
    m: int
    l: int
    constants: Mapping[str, float] = field(default_factory=dict)
    trees: tuple = field(init=False, repr=False)
    _compiled: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.expressions) != self.n:
            raise InvalidInputError(f"expected {self.n} field expressions, got {len(self.expressions)}")
        allowed = {f"x{i + 1}" for i in range(self.n)}
        allowed |= {f"u{i + 1}" for i in range(self.m)}
        allowed |= {f"d{i + 1}" for i in range(self.l)}
        trees = []
        for i, text in enumerate(self.expressions):
            try:
                tree = ex.parse(text, self.constants)
            except ParseError as err:
                raise ParseError(
                    f"in f[{i + 1}] {text!r}: {err.args[0]}", offset=err.offset, source=text
                ) from err
            unknown = ex.variables(tree) - allowed
            if unknown:
                raise InvalidInputError(
                    f"f[{i + 1}] uses unknown variable(s) {sorted(unknown)}; "
                    f"declared dimensions n={self.n}, m={self.m}, l={self.l}"
                )
            trees.append(tree)
        object.__setattr__(self, "expressions", tuple(self.expressions))
        object.__setattr__(self, "trees", tuple(trees))
        object.__setattr__(self, "_compiled", tuple(ex.compile_expr(t) for t in trees))

    def __call__(self, x, u, d) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        d = np.asarray(d, dtype=float)
        env = {}
        for i in range(self.n):
            env[f"x{i + 1}"] = x[..., i]
        for i in range(self.m):
            env[f"u{i + 1}"] = u[..., i]
        for i in range(self.l):
            env[f"d{i + 1}"] = d[..., i]
        shape = np.broadcast_shapes(x.shape[:-1], u.shape[:-1], d.shape[:-1])
        with np.errstate(all="ignore"):
            cols = [np.broadcast_to(np.asarray(fn(env), dtype=float), shape) for fn in self._compiled]
        return np.stack(cols, axis=-1)


@dataclass(frozen=True, eq=False)
class SystemDef:
    """The tuple ``(X, U, D, f)`` plus the disturbance Lipschitz constant."""

    state_box: Box
    control_box: Box
    disturbance_box: Box
    field: VectorField
    kappa_d: float
    name: str = "custom"

    def __post_init__(self):
        n, m, l = self.field.n, self.field.m, self.field.l
        for box, dim, label in ((self.state_box, n, "X"), (self.control_box, m, "U"), (self.disturbance_box, l, "D")):
            if box.dim != dim:
                raise InvalidInputError(f"{label} has dimension {box.dim}, field declares {dim}")
            if not box.has_interior_origin():
                raise InvalidInputError(f"{label} must contain the origin in its interior: {box.bounds()}")
        if not (self.kappa_d > 0 and math.isfinite(self.kappa_d)):
            raise InvalidInputError(f"kappa_d must be positive, got {self.kappa_d}")
        f0 = self.field(np.zeros(n), np.zeros(m), np.zeros(l))
        if not np.all(np.isfinite(f0)) or np.max(np.abs(f0)) > EQUILIBRIUM_TOL:
            raise InvalidInputError(f"f(0,0,0) must vanish, got {f0.tolist()}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.field.n, self.field.m, self.field.l

    @property
    def n(self) -> int:
        return self.field.n

    @property
    def m(self) -> int:
        return self.field.m

    @property
    def l(self) -> int:
        return self.field.l

    @property
    def M(self) -> float:
        """Bound on the sup norm of admissible disturbances (largest ``|bound|`` of D)."""
        return self.disturbance_box.sup_norm()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "m": self.m,
            "l": self.l,
            "X": self.state_box.bounds(),
            "U": self.control_box.bounds(),
            "D": self.disturbance_box.bounds(),
            "kappa_d": self.kappa_d,
            "constants": dict(self.field.constants),
            "f": list(self.field.expressions),
        }


def _number(value, what):
    """Numbers may be given as JSON numbers or constant expressions like ``"pi/4"``."""
    if isinstance(value, bool):
        raise InvalidInputError(f"{what}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        tree = ex.parse(value)
        if ex.variables(tree):
            raise InvalidInputError(f"{what}: constant expression expected, got {value!r}")
        return float(ex.evaluate(tree, {}))
    raise InvalidInputError(f"{what}: expected a number, got {value!r}")


def _box(spec, what) -> Box:
    if not isinstance(spec, Sequence) or isinstance(spec, str):
        raise InvalidInputError(f"{what}: expected a list of [lo, hi] pairs")
    bounds = []
    for i, pair in enumerate(spec):
        if not isinstance(pair, Sequence) or len(pair) != 2:
            raise InvalidInputError(f"{what}[{i}]: expected [lo, hi]")
        bounds.append([_number(pair[0], f"{what}[{i}][0]"), _number(pair[1], f"{what}[{i}][1]")])
    return Box.from_bounds(bounds)


def system_from_dict(doc: Mapping) -> SystemDef:
    missing = [k for k in ("n", "m", "l", "X", "U", "D", "kappa_d", "f") if k not in doc]
    if missing:
        raise InvalidInputError(f"system config missing field(s): {missing}")
    n, m, l = (int(doc[k]) for k in ("n", "m", "l"))
    constants = {str(k): _number(v, f"constants.{k}") for k, v in doc.get("constants", {}).items()}
    exprs = doc["f"]
    if isinstance(exprs, str) or len(exprs) != n:
        raise InvalidInputError(f"'f' must list {n} expressions")
    vf = VectorField(tuple(exprs), n, m, l, constants)
    return SystemDef(
        _box(doc["X"], "X"),
        _box(doc["U"], "U"),
        _box(doc["D"], "D"),
        vf,
        _number(doc["kappa_d"], "kappa_d"),
        str(doc.get("name", "custom")),
    )


def parse_system(config_text: str) -> SystemDef:
    """Parse a JSON system description.

    Schema: ``{"n", "m", "l", "X": [[lo, hi], ...], "U", "D", "kappa_d",
    "f": ["expr1", ...]}`` with optional ``"constants"`` and ``"name"``.
    """
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as err:
        raise ParseError(f"invalid JSON: {err.msg}", offset=err.pos, line=err.lineno, column=err.colno) from err
    if not isinstance(doc, dict):
        raise InvalidInputError("system config must be a JSON object")
    return system_from_dict(doc)


def eval_field(sys: SystemDef, x, u, d) -> np.ndarray:
    """Evaluate ``f(x, u, d)`` at a single point."""
    x = as_vec(x, sys.n, "x")
    u = as_vec(u, sys.m, "u")
    d = as_vec(d, sys.l, "d")
    val = sys.field(x, u, d)
    if not np.all(np.isfinite(val)):
        raise NumericDomainError(f"f{(x.tolist(), u.tolist(), d.tolist())} is not finite: {val.tolist()}")
    return val


def pendulum_preset() -> SystemDef:
    """Pendulum with horizontal-acceleration disturbance (state: angle, angular velocity)."""
    return system_from_dict(
        {
            "name": "pendulum",
            "n": 2,
            "m": 1,
            "l": 1,
            "X": [["-pi/4", "pi/4"], [-0.5, 0.5]],
            "U": [[-1.5, 1.5]],
            "D": [[-0.01, 0.02]],
            "kappa_d": 0.002,
            "constants": PENDULUM_CONSTANTS,
            "f": list(PENDULUM_FIELD),
        }
    )


PRESETS = {"pendulum": pendulum_preset}


@dataclass(frozen=True, eq=False)
class DisturbanceSignal:
    """A disturbance ``t -> d(t)`` on ``[0, tau]`` with its declared Lipschitz constant.

    ``func`` must accept an array of times and return shape ``(len(t), l)``.
    """

    func: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    l: int = 1
    t0: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        vals = np.asarray(self.func(np.atleast_1d(t) + self.t0), dtype=float).reshape(-1, self.l)
        return vals[0] if t.ndim == 0 else vals.reshape(t.shape + (self.l,))

    def shifted(self, t0: float) -> "DisturbanceSignal":
        """The signal restricted to ``[t0, ...)`` and re-based so that time 0 maps to ``t0``."""
        return DisturbanceSignal(self.func, self.lipschitz, self.l, self.t0 + t0)


def constant_disturbance(value) -> DisturbanceSignal:
    v = np.atleast_1d(np.asarray(value, dtype=float))
    return DisturbanceSignal(lambda t: np.broadcast_to(v, (np.size(t), v.size)), 0.0, v.size)


def cosine_disturbance(sys: SystemDef) -> DisturbanceSignal:
    """``d(t) = (hi - lo)/2 cos(2 kappa_d t / (hi - lo)) + (hi + lo)/2`` for scalar D.

    Amplitude times frequency equals ``kappa_d``, so the slope never exceeds it.
    """
    if sys.l != 1:
        raise InvalidInputError("cosine disturbance needs a scalar disturbance (l = 1)")
    lo = float(sys.disturbance_box.lower[0])
    hi = float(sys.disturbance_box.upper[0])
    amp = (hi - lo) / 2.0
    mid = (hi + lo) / 2.0
    freq = 2.0 * sys.kappa_d / (hi - lo)
    return DisturbanceSignal(lambda t: (amp * np.cos(freq * np.asarray(t)) + mid)[:, None], sys.kappa_d, 1)
