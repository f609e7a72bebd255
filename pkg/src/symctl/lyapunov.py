"""Incremental (delta-ISS) Lyapunov certificates and their sampled validation.

A certificate bundles a function ``V(x1, x2)`` of state pairs with

* sandwich bounds ``alpha_lo(|x1-x2|) <= V(x1, x2) <= alpha_hi(|x1-x2|)``,
* the dissipation inequality
  ``dV/dx1 f(x1,u1,d1) + dV/dx2 f(x2,u2,d2) <= -lam V + sigma_u(|u1-u2|) + sigma_d(|d1-d2|)``,
* a slope ``gamma`` with ``V(x, y1) - V(x, y2) <= gamma |y1 - y2|`` on ``X``.

All norms are infinity norms.  Certificates are checked by seeded sampling; a
passing check is evidence, not proof.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import InvalidInputError, ParseError
from .geometry import Box, inf_norm
from .system import SystemDef

DEFAULT_SAMPLES = 10_000
DEFAULT_TOL = 1e-9

_KFUN = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][+-]?\d+)?)\s*\*\s*r\s*(?:(?:\^|\*\*)\s*([12]))?\s*$")


@dataclass(frozen=True)
class KFunction:
    """Class-K-infinity function ``r -> coef * r**power`` with power 1 or 2."""

    coef: float
    power: int = 1

    def __post_init__(self):
        if not self.coef > 0 or not math.isfinite(self.coef):
            raise InvalidInputError(f"K-infinity coefficient must be positive, got {self.coef}")
        if self.power not in (1, 2):
            raise InvalidInputError(f"only powers 1 and 2 are supported, got {self.power}")

    def __call__(self, r):
        return self.coef * np.asarray(r, dtype=float) ** self.power

    def inverse(self, v):
        return (np.asarray(v, dtype=float) / self.coef) ** (1.0 / self.power)

    def scaled(self, c: float) -> "KFunction":
        return KFunction(self.coef * c, self.power)

    def __str__(self):
        return f"{self.coef!r}*r" + ("^2" if self.power == 2 else "")

    @classmethod
    def parse(cls, text) -> "KFunction":
        """Accepts ``"c*r"``, ``"c*r^2"`` (also ``**``) or a bare number meaning ``c*r``."""
        if isinstance(text, (int, float)) and not isinstance(text, bool):
            return cls(float(text), 1)
        m = _KFUN.match(str(text))
        if m is None:
            raise ParseError(f"expected 'c*r' or 'c*r^2', got {text!r}", source=str(text))
        return cls(float(m.group(1)), int(m.group(2) or 1))


@dataclass(frozen=True, eq=False)
class LyapunovCert:
    """A delta-ISS Lyapunov certificate.

    ``V``, ``grad_x`` and ``grad_y`` are vectorised over leading axes.  For
    quadratic certificates ``matrix`` holds the symmetric positive-definite
    form.  ``gamma`` is filled in by :func:`with_gamma` when absent.
    """

    V: Callable
    grad_x: Callable
    grad_y: Callable
    lam: float
    alpha_lo: KFunction
    alpha_hi: KFunction
    sigma_u: KFunction
    sigma_d: KFunction
    gamma: KFunction | None = None
    matrix: np.ndarray | None = None
    name: str = "custom"

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidInputError(f"decay rate lambda must be positive, got {self.lam}")

    def replace(self, **changes) -> "LyapunovCert":
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw.update(changes)
        return LyapunovCert(**kw)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "lambda": self.lam,
            "alpha_lo": str(self.alpha_lo),
            "alpha_hi": str(self.alpha_hi),
            "sigma_u": str(self.sigma_u),
            "sigma_d": str(self.sigma_d),
        }
        if self.matrix is not None:
            out["matrix"] = self.matrix.tolist()
        if self.gamma is not None:
            out["gamma_slope"] = self.gamma.coef
        return out


def _check_spd(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise InvalidInputError(f"matrix must be square, got shape {P.shape}")
    if not np.allclose(P, P.T, rtol=0, atol=1e-12):
        raise InvalidInputError("matrix must be symmetric")
    minors = [np.linalg.det(P[:k, :k]) for k in range(1, P.shape[0] + 1)]
    if min(minors) <= 0:
        raise InvalidInputError(f"matrix is not positive definite (leading minors {minors})")
    P = 0.5 * (P + P.T)
    P.setflags(write=False)
    return P


def quadratic_cert(matrix, lam, alpha_lo, alpha_hi, sigma_u, sigma_d, gamma=None, name="quadratic") -> LyapunovCert:
    """Certificate with ``V(x, y) = (x - y)^T P (x - y)``."""
    P = _check_spd(matrix)

    def V(x, y):
        e = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return np.einsum("...i,ij,...j->...", e, P, e)

    def grad_x(x, y):
        e = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return 2.0 * e @ P

    def grad_y(x, y):
        return -grad_x(x, y)

    kf = lambda v: v if isinstance(v, KFunction) else KFunction.parse(v)
    return LyapunovCert(
        V, grad_x, grad_y, float(lam), kf(alpha_lo), kf(alpha_hi), kf(sigma_u), kf(sigma_d),
        None if gamma is None else kf(gamma), P, name,
    )


def cert_from_dict(doc: Mapping) -> LyapunovCert:
    """Quadratic certificate from ``{"matrix", "lambda", "alpha_lo", "alpha_hi", "sigma_u", "sigma_d"}``.

    An optional ``"gamma_slope"`` fixes the A2 slope instead of computing it.
    """
    missing = [k for k in ("matrix", "lambda", "alpha_lo", "alpha_hi", "sigma_u", "sigma_d") if k not in doc]
    if missing:
        raise InvalidInputError(f"certificate missing field(s): {missing}")
    gamma = doc.get("gamma_slope")
    return quadratic_cert(
        doc["matrix"], float(doc["lambda"]), doc["alpha_lo"], doc["alpha_hi"], doc["sigma_u"], doc["sigma_d"],
        None if gamma is None else KFunction(float(gamma), 1), str(doc.get("name", "custom")),
    )


PENDULUM_PUBLISHED = {
    "name": "pendulum-published",
    "matrix": [[1.5, 0.3], [0.3, 1.5]],
    "lambda": 0.77,
    "alpha_lo": "1.2*r^2",
    "alpha_hi": "3.6*r^2",
    "sigma_u": "8.76*r",
    "sigma_d": "1.31*r",
}

# Contraction certificate for the pendulum on |x1| <= pi/4.  The Jacobian of the
# drift lies in the segment A(a) = [[0, 1], [a, -k/m]] with
# a in [-g/l - 0.02 sin(pi/4), -(g/l) cos(pi/4) + 0.02 sin(pi/4)]; the form P
# below decays at rate LAMBDA0 ~ 2.545 at both ends.  Cross terms are split with
# 2 e^T P b w <= eta V + (b^T P b / eta) w^2, eta = (LAMBDA0 - 1.6) / 2 for both
# the control and disturbance channel, leaving lam = 1.6.
PENDULUM_CONTRACTION = {
    "name": "pendulum-contraction",
    "matrix": [[16.5, 1.6], [1.6, 1.0]],
    "lambda": 1.6,
    "alpha_lo": "0.84*r^2",
    "alpha_hi": "20.7*r^2",
    "sigma_u": "95*r^2",
    "sigma_d": "2.2*r^2",
}


def pendulum_cert() -> LyapunovCert:
    """The published pendulum certificate, taken verbatim.

    Its dissipation inequality does not hold on the pendulum's state box (see
    :func:`check_condition_ii`); kept for reporting and comparison.
    """
    return cert_from_dict(PENDULUM_PUBLISHED)


def pendulum_contraction_cert() -> LyapunovCert:
    """A certificate for the pendulum that passes both sampled conditions."""
    return cert_from_dict(PENDULUM_CONTRACTION)


def quadratic_decay_rate(P, A) -> float:
    """Largest ``lam`` with ``A^T P + P A + lam P <= 0`` for a single matrix ``A``."""
    P = _check_spd(P)
    A = np.asarray(A, dtype=float)
    w, U = np.linalg.eigh(P)
    Pm = U @ np.diag(w**-0.5) @ U.T
    S = Pm @ (A.T @ P + P @ A) @ Pm
    return float(-np.max(np.linalg.eigvalsh(0.5 * (S + S.T))))


def polytopic_decay_rate(P, vertices) -> float:
    """Decay rate valid for every convex combination of the given Jacobians."""
    return min(quadratic_decay_rate(P, A) for A in vertices)


def pendulum_jacobian_vertices(sys: SystemDef | None = None) -> list[np.ndarray]:
    """End points of the drift-Jacobian segment of the pendulum over ``|x1| <= pi/4``."""
    g, l, m, k = 9.8, 0.5, 0.6, 2.0
    dmax = 0.02 if sys is None else sys.M
    s = math.sin(math.pi / 4)
    a_lo = -g / l - dmax * s
    a_hi = -(g / l) * math.cos(math.pi / 4) + dmax * s
    return [np.array([[0.0, 1.0], [a, -k / m]]) for a in (a_lo, a_hi)]


@dataclass
class CheckReport:
    """Outcome of a sampled inequality check; ``max_violation <= tol`` means PASS."""

    name: str
    samples: int
    max_violation: float
    worst: dict
    tol: float = DEFAULT_TOL
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> dict:
        return {
            "check": self.name,
            "verdict": self.verdict,
            "samples": self.samples,
            "max_violation": self.max_violation,
            "tol": self.tol,
            "worst": self.worst,
            **self.extra,
        }


def _worst(viol, **arrays) -> tuple[float, dict]:
    j = int(np.argmax(viol))
    return float(viol[j]), {k: np.asarray(v)[j].tolist() for k, v in arrays.items()}


def check_condition_i(cert: LyapunovCert, X: Box, samples: int = DEFAULT_SAMPLES, seed: int = 0, tol: float = DEFAULT_TOL) -> CheckReport:
    """Sandwich bounds on ``samples`` random pairs in ``X x X``."""
    rng = np.random.default_rng(seed)
    x1 = X.sample(rng, samples)
    x2 = X.sample(rng, samples)
    r = inf_norm(x1 - x2)
    v = cert.V(x1, x2)
    viol = np.maximum(cert.alpha_lo(r) - v, v - cert.alpha_hi(r))
    worst, at = _worst(viol, x1=x1, x2=x2)
    return CheckReport("condition_i", samples, worst, at, tol)


def dissipation_gap(cert: LyapunovCert, sys: SystemDef, x1, x2, u1, u2, d1, d2) -> np.ndarray:
    """``LHS - RHS`` of the dissipation inequality, vectorised over samples."""
    lhs = np.einsum("...i,...i->...", cert.grad_x(x1, x2), sys.field(x1, u1, d1))
    lhs = lhs + np.einsum("...i,...i->...", cert.grad_y(x1, x2), sys.field(x2, u2, d2))
    rhs = -cert.lam * cert.V(x1, x2) + cert.sigma_u(inf_norm(u1 - u2)) + cert.sigma_d(inf_norm(d1 - d2))
    return lhs - rhs


def check_condition_ii(
    cert: LyapunovCert,
    sys: SystemDef,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    shared_inputs: bool = False,
) -> CheckReport:
    """Dissipation inequality on random ``(x1, x2, u1, u2, d1, d2)``.

    With ``shared_inputs`` the two copies get the same control and disturbance,
    so only the decay term remains on the right-hand side.
    """
    rng = np.random.default_rng(seed)
    x1 = sys.state_box.sample(rng, samples)
    x2 = sys.state_box.sample(rng, samples)
    u1 = sys.control_box.sample(rng, samples)
    d1 = sys.disturbance_box.sample(rng, samples)
    if shared_inputs:
        u2, d2 = u1, d1
    else:
        u2 = sys.control_box.sample(rng, samples)
        d2 = sys.disturbance_box.sample(rng, samples)
    viol = dissipation_gap(cert, sys, x1, x2, u1, u2, d1, d2)
    worst, at = _worst(viol, x1=x1, x2=x2, u1=u1, u2=u2, d1=d1, d2=d2)
    name = "condition_ii_shared" if shared_inputs else "condition_ii"
    return CheckReport(name, samples, worst, at, tol, {"violating_fraction": float(np.mean(viol > tol))})


def _difference_corners(X: Box) -> np.ndarray:
    w = X.widths
    n = X.dim
    signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * n, indexing="ij")).reshape(n, -1).T
    return signs * w


def gamma_sup(cert: LyapunovCert, X: Box, norm: str = "dual", samples: int = DEFAULT_SAMPLES, seed: int = 0) -> KFunction:
    """Linear A2 function ``gamma(r) = c r`` with ``c = sup_{x,y in X} |dV/dy(x, y)|``.

    ``norm="dual"`` measures the gradient in the l1 norm, the dual of the
    infinity norm used on states, which makes ``gamma`` a valid mean-value
    bound.  ``norm="inf"`` takes the infinity norm of the gradient instead; it
    is smaller and may under-estimate the true slope.

    For quadratic ``V`` the gradient is linear in ``x - y``, so the sup is
    attained at a corner of ``X - X``; otherwise corners of ``X x X`` and random
    samples are scanned.
    """
    if norm not in ("dual", "inf"):
        raise InvalidInputError(f"norm must be 'dual' or 'inf', got {norm!r}")
    measure = (lambda g: np.sum(np.abs(g), axis=-1)) if norm == "dual" else (lambda g: inf_norm(g))
    if cert.matrix is not None:
        deltas = _difference_corners(X)
        slope = float(np.max(measure(cert.grad_y(deltas, np.zeros_like(deltas)))))
    else:
        rng = np.random.default_rng(seed)
        corners = X.vertices()
        cx = np.repeat(corners, len(corners), axis=0)
        cy = np.tile(corners, (len(corners), 1))
        xs = np.concatenate([cx, X.sample(rng, samples)])
        ys = np.concatenate([cy, X.sample(rng, samples)])
        slope = float(np.max(measure(cert.grad_y(xs, ys))))
    return KFunction(max(slope, np.finfo(float).tiny), 1)


def with_gamma(cert: LyapunovCert, X: Box, norm: str = "dual") -> LyapunovCert:
    """``cert`` with ``gamma`` filled in by :func:`gamma_sup` if it was absent."""
    if cert.gamma is not None:
        return cert
    return cert.replace(gamma=gamma_sup(cert, X, norm))


def check_a2(cert: LyapunovCert, X: Box, gamma: KFunction | None = None, samples: int = DEFAULT_SAMPLES, seed: int = 0, tol: float = DEFAULT_TOL) -> CheckReport:
    """``V(x, y1) - V(x, y2) <= gamma(|y1 - y2|)`` on random triples in ``X``.

    Also reports the largest observed ratio of the left side to ``gamma``,
    which shows how tight the slope is.
    """
    gamma = gamma or cert.gamma or gamma_sup(cert, X)
    rng = np.random.default_rng(seed)
    x = X.sample(rng, samples)
    y1 = X.sample(rng, samples)
    y2 = X.sample(rng, samples)
    lhs = cert.V(x, y1) - cert.V(x, y2)
    g = gamma(inf_norm(y1 - y2))
    viol = lhs - g
    worst, at = _worst(viol, x=x, y1=y1, y2=y2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(g > 0, lhs / g, 0.0)
    return CheckReport("A2", samples, worst, at, tol, {"gamma_slope": gamma.coef, "max_ratio": float(np.max(ratio))})
