"""Turning a disturbance signal into a finite symbol.

A Lipschitz disturbance on one sampling interval is scaled, interpolated with
hat functions and rounded to a lattice.  The result is one member of the
finite set of disturbance symbols and stays within Theta of the signal.

Run: python3 demos/03_disturbance_symbols.py
"""

import numpy as np

from symctl import approximate_disturbance, cosine_disturbance, enumerate_approx, eval_seq, pendulum_preset
from symctl.splines import make_params

sys_ = pendulum_preset()
D = sys_.disturbance_box
p = make_params(0, 1.43e-4, sys_.kappa_d, 1.0, D.sup_norm(), theta=0.007)
symbols = enumerate_approx(p, D)
print(f"{len(symbols)} disturbance symbols (N={p.N}, mu_d={p.mu_d}, rho={p.rho:.3f}, Theta={p.Theta_bound:.6f})")

d = cosine_disturbance(sys_)
grid = np.linspace(0.0, 1.0, 2001)
print("\n step   d(k)       d(k+1)     symbol keys   index   max error")
for k in range(8):
    dk = d.shifted(float(k))
    z = approximate_disturbance(dk, p, D)
    err = np.max(np.abs(dk(grid) - eval_seq(z, grid)))
    print(f" {k:>4}  {float(dk(0.0)[0]):+.6f}  {float(dk(1.0)[0]):+.6f}  {str(z.keys.ravel().tolist()):>12}  "
          f"{symbols.index_of(z):>6}  {err:.6f}")
print(f"\nEvery error stays below Theta = {p.Theta_bound:.6f}.")
