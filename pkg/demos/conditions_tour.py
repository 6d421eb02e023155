"""Which spectral data sets are admissible.

Builds data that satisfy every condition (the constant-potential model), then
breaks one condition at a time and shows the verdicts.

    python3 demos/conditions_tour.py
"""

import numpy as np

from matspec import ModelProblem, check_C, forward_spectral_data, model_spectral_data, run_checks
from matspec.conditions import asymptotic_residuals
from matspec.ode import BoundaryProblem

model = ModelProblem(np.diag([np.pi / 2, np.pi]))
good = model_spectral_data(model, 12)
print("model data, Q = diag(1, 2):")
print(run_checks(good).table())

# a weight matrix of rank 1 where the eigenvalue is simple is fine, rank 0 is not
alpha = good.alpha.copy()
alpha[3, 0] = 0
print("\nweight at (n=3, q=1) set to zero:")
print(run_checks(good.replace(alpha=alpha), ("R",)).table())

# negative weight: not positive semidefinite
alpha = good.alpha.copy()
alpha[2, 0] *= -1
print("\nweight at (n=2, q=1) negated:")
print(run_checks(good.replace(alpha=alpha), ("S",)).table())

# weights that do not approach (2/pi) I: the tail does not decay
scalar = model_spectral_data(ModelProblem(np.zeros((1, 1))), 12)
alpha = scalar.alpha.copy()
alpha[1:] = 4 / np.pi
res = asymptotic_residuals(scalar.replace(alpha=alpha))
print("\nscalar weights 4/pi instead of 2/pi, total residual at n = 4, 8, 12:", res["total"][[4, 8, 12]])
print(run_checks(scalar.replace(alpha=alpha), ("A",)).table())

# a repeated datum makes the system of functions dependent
lam, alpha = scalar.lam.copy(), scalar.alpha.copy()
lam[5], alpha[5] = lam[4], alpha[4]
r = check_C(scalar.replace(lam=lam, alpha=alpha), n_bands=10)
print(f"\nrepeated datum: (C) {r.verdict}, sigma_min {r.diagnostics['sigma_min']:.1e}")

# a complex potential gives complex eigenvalues: (A) and (R) still hold, (S) fails
shifted = BoundaryProblem.from_function(lambda x: 2j + 0 * x)
print("\nQ = 2i:")
print(run_checks(forward_spectral_data(shifted, 10)).table())
