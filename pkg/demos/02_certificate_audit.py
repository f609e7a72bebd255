"""Auditing an incremental Lyapunov certificate before trusting it.

The quadratic certificate that usually accompanies the pendulum example is
checked against the dissipation inequality on random samples and on a hand
picked pair of states.  A contraction-based certificate with quadratic input
gains is then checked the same way.

Run: python3 demos/02_certificate_audit.py
"""

import numpy as np

from symctl import check_condition_i, check_condition_ii, pendulum_cert, pendulum_contraction_cert, pendulum_preset
from symctl.lyapunov import dissipation_gap, gamma_sup

sys_ = pendulum_preset()
X = sys_.state_box

for cert in (pendulum_cert(), pendulum_contraction_cert()):
    print(f"Certificate {cert.name!r}")
    ci = check_condition_i(cert, X, seed=1)
    cii = check_condition_ii(cert, sys_, seed=1)
    print(f"  sandwich bounds    {ci.verdict}  (max violation {ci.max_violation:+.3e})")
    print(f"  dissipation        {cii.verdict}  (max violation {cii.max_violation:+.3e})")
    for norm in ("inf", "dual"):
        print(f"  gradient slope ({norm:>4})  {gamma_sup(cert, X, norm).coef:.4f}")

# two states with opposite velocities and opposite extreme controls
x1, x2 = np.array([[0.0, 0.5]]), np.array([[0.0, -0.5]])
u1, u2 = np.array([[1.5]]), np.array([[-1.5]])
d = np.zeros((1, 1))
gap = dissipation_gap(pendulum_cert(), sys_, x1, x2, u1, u2, d, d)
print(f"\nHand-picked pair: LHS - RHS = {float(gap[0]):+.3f} (positive means the inequality fails)")
print("The slope printed under 'inf' is the sup of the gradient's inf-norm; only the")
print("l1 ('dual') slope bounds |V(x,y) - V(x,z)| by a multiple of |y - z|_inf.")
