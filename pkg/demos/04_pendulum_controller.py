"""End to end: abstraction, synthesis, verification and closed-loop simulation.

Uses a coarse parameter vector chosen so that the precision inequality holds
for the contraction certificate at epsilon = 1.5.  The task: swing into
[pi/8, pi/4], stay 2 to 4 s, swing to [-pi/4, -pi/8] within 3 s, then come
back to the first region and remain there.

Run: python3 demos/04_pendulum_controller.py   (about 15 s)
"""

import time

import numpy as np

from symctl import (
    FlowConfig,
    build_model,
    check_params,
    cosine_disturbance,
    pendulum_contraction_cert,
    pendulum_preset,
    pendulum_spec,
    simulate_closed_loop,
    suggest_params,
    synthesize,
    verify_closed_loop,
)
from symctl.lyapunov import with_gamma

EPS = 1.5
sys_ = pendulum_preset()
cert = with_gamma(pendulum_contraction_cert(), sys_.state_box)
P = suggest_params(cert, sys_, EPS, 1.0)
rep = check_params(P, cert, sys_, EPS)
print(f"parameters: {P.to_dict()}")
print(f"precision inequality: {rep.lhs:.5f} <= {rep.rhs:.5f}  -> {rep.verdict}")

t0 = time.perf_counter()
model = build_model(sys_, P, FlowConfig(1.0))
print(f"\nmodel: {model.Q} states x {model.A} controls x {model.B} disturbance symbols, "
      f"built in {time.perf_counter() - t0:.1f} s")

spec = pendulum_spec(1.0)
graph = model.to_game()
res = synthesize(model, spec, graph=graph)
ver = verify_closed_loop(graph, res, horizon=8)
print(f"controller wins from (0, 0): {res.winning_initial}; horizon-8 check: {ver.ok}")

tr = simulate_closed_loop(model, res, cert, cosine_disturbance(sys_), [0.0, 0.0], 20, spec)
print("\n  t   mode    angle     velocity   control   |x - q|")
for k in range(len(tr.times)):
    u = tr.controls[k, 0] if k < len(tr.controls) else np.nan
    print(f"{tr.times[k]:4.0f}  {tr.modes[k]:<6} {tr.concrete[k, 0]:+8.4f}  {tr.concrete[k, 1]:+8.4f}  "
          f"{u:+8.4f}  {tr.distance[k]:.4f}")
print(f"\nspecification satisfied: {tr.satisfied}; max distance {tr.distance.max():.4f} <= {EPS}")
