"""Eigenvalues and weight matrices of a 2x2 problem.

Runs the forward map on Q(x) = [[1, 0.3 sin x], [0.3 sin x, 2]] with h = H = 0,
first rotating to the frame where omega is diagonal, and compares the result
with the leading-order asymptotics rho_nq ~ n + omega_q / (pi n).

    python3 demos/forward_spectrum.py
"""

import numpy as np

from matspec import BoundaryProblem, compute_omega, diagonalize_omega, forward_spectral_data, group_sums, run_checks


def Q(x):
    s = 0.3 * np.sin(x)
    return np.array([[1.0, s], [s, 2.0]])


problem = BoundaryProblem.from_function(Q)
om = compute_omega(problem)
print("omega =\n", np.round(om.omega.real, 6))
print(f"off-diagonal part {om.offdiag:.3e}, so rotate first")

U, rotated = diagonalize_omega(problem)
data = forward_spectral_data(rotated, 20)
w = data.omega_diag.real
print("omega in the rotated frame:", np.round(w, 6))

# first few eigenvalues per channel
print("\n n   lambda_n1        lambda_n2")
for n in range(6):
    print(f"{n:2d}  {data.lam[n, 0].real:14.8f}  {data.lam[n, 1].real:14.8f}")

# asymptotics: n (rho_nq - n - omega_q / (pi n)) should shrink
n = np.arange(1, 21)
res = np.abs(n[:, None] * (data.rho[1:] - n[:, None] - w / (np.pi * n[:, None])))
print("\nscaled rho residual at n = 5, 10, 20:", res[[4, 9, 19]].max(axis=1))

# group sums of the weights tend to (2/pi) times the channel projections
gs, tot = group_sums(data)
print("alpha group sums at n = 20:\n", np.round(gs[20].real, 5))

print()
print(run_checks(data, ("A", "R", "S", "C", "structural"), problem=rotated).table())
