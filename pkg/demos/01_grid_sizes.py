"""How big does the symbolic model get?

Counts the lattice points of the state, control and disturbance sets for the
high-resolution pendulum parameters, then shows how the disturbance grid
trades the scaling factor rho against the error bound Theta.

Run: python3 demos/01_grid_sizes.py
"""

import math

from symctl import ParameterVector, model_counts, pendulum_preset, rho_theta
from symctl.splines import make_params

sys_ = pendulum_preset()
P = ParameterVector(tau=1.0, mu_x=math.pi / 2000, mu_u=0.001, mu_d=1.43e-4, N=0, theta_d=0.007)

c = model_counts(sys_, P)
print("High-resolution pendulum grid")
print(f"  states        {c.states:>10,}")
print(f"  controls      {c.controls:>10,}")
print(f"  disturbances  {c.disturbances:>10,}")
print(f"  triples       {c.states * c.controls * c.disturbances:>14,.3e}  (too many to materialise)")

print("\nDisturbance grid spacing vs (rho, Theta) at N = 0, kappa_d = 0.002, M = 0.02")
for mu in (5e-5, 1e-4, 1.43e-4, 5e-4, 9e-4, 1e-3):
    rho, theta = rho_theta(0, mu, sys_.kappa_d, 1.0, 0.02)
    verdict = "ok" if rho > 0 and theta <= 0.007 else ("rho <= 0" if rho <= 0 else "Theta too large")
    print(f"  mu_d={mu:8.2e}  rho={rho:+.4f}  Theta={theta:.6f}  {verdict}")

# more knots shrink the interpolation term; here mu_d shrinks as 1/(N+1)^2
print("\nMore knots with a matching finer grid, theta = 0.007")
for N in range(4):
    p = make_params(N, 1.43e-4 / (N + 1) ** 2, sys_.kappa_d, 1.0, 0.02, theta=0.007)
    print(f"  N={N}  mu_d={p.mu_d:.3e}  rho={p.rho:+.4f}  Theta={p.Theta_bound:.6f}  feasible={p.feasible}")
