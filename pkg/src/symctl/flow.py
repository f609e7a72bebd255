"""Sampled trajectories ``xi_{x u d}(tau)`` by fixed-step classical RK4.

Controls are held constant over the sampling interval; the disturbance is any
callable ``t -> d(t)`` on ``[0, tau]`` returning ``(l,)`` or, for batched
integration, ``(B, l)``.  All routines accept a single initial state ``(n,)``
or a batch ``(B, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, InvalidInputError
from .system import SystemDef


@dataclass(frozen=True)
class FlowConfig:
    tau: float
    substeps: int = 64

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidInputError(f"sampling time must be positive, got {self.tau}")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise InvalidInputError(f"substeps must be a positive integer, got {self.substeps}")
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "substeps", int(self.substeps))


def _rk4_steps(f, x, u, d, start, h, nsteps):
    # stage times are computed from the global step index so that split runs
    # see bit-identical disturbance samples
    for i in range(start, start + nsteps):
        t = i * h
        d0 = d(t)
        dm = d(t + 0.5 * h)
        d1 = d(t + h)
        k1 = f(x, u, d0)
        k2 = f(x + (0.5 * h) * k1, u, dm)
        k3 = f(x + (0.5 * h) * k2, u, dm)
        k4 = f(x + h * k3, u, d1)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise BlowUpError(f"state became non-finite at t={t + h:.6g}; system not forward complete here")
    return x


def integrate(sys: SystemDef, x0, u, d, cfg: FlowConfig) -> np.ndarray:
    """State reached at time ``tau`` from ``x0`` under constant ``u`` and signal ``d``."""
    x = np.asarray(x0, dtype=float)
    u = np.asarray(u, dtype=float)
    h = cfg.tau / cfg.substeps
    with np.errstate(all="ignore"):
        return _rk4_steps(sys.field, x, u, d, 0, h, cfg.substeps)


def integrate_trace(sys: SystemDef, x0, u, d, cfg: FlowConfig, samples: int) -> np.ndarray:
    """States at times ``tau * k / samples`` for ``k = 1..samples``.

    The last row equals :func:`integrate` exactly (same step grid), which is why
    ``samples`` must divide ``cfg.substeps``.
    """
    if samples < 1 or cfg.substeps % samples:
        raise InvalidInputError(f"samples={samples} must divide substeps={cfg.substeps}")
    x = np.asarray(x0, dtype=float)
    u = np.asarray(u, dtype=float)
    h = cfg.tau / cfg.substeps
    per = cfg.substeps // samples
    out = []
    with np.errstate(all="ignore"):
        for k in range(samples):
            x = _rk4_steps(sys.field, x, u, d, k * per, h, per)
            out.append(x)
    return np.stack(out, axis=-2 if x.ndim > 1 else 0)


def write_trace_csv(times, states, stream) -> None:
    states = np.asarray(states)
    stream.write("time," + ",".join(f"x{i + 1}" for i in range(states.shape[-1])) + "\n")
    for t, row in zip(times, states):
        stream.write(repr(float(t)) + "," + ",".join(repr(float(v)) for v in row) + "\n")
