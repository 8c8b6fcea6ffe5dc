#!/usr/bin/env python3
"""
The entropy structure behind the scheme, in small pieces.

 - The Fermi-Dirac map turns any real entropy variables into a
   composition strictly inside the simplex (bounds for free), and the
   entropy-variable map inverts it exactly.
 - Including the solvent as component 0 gives the extended mobility
   matrix A with a one-dimensional kernel; scaled by sqrt(u) it is
   positive definite on the subspace L orthogonal to sqrt(u), with the
   explicit lower bound that drives the uniqueness argument.

Run:  python3 demos/05_entropy_structure.py
"""

import numpy as np

from pnpfermi import SpeciesParams, entropy_variables, fermi_dirac
from pnpfermi.diagnostics import (
    check_subspace_pd,
    extended_matrices,
    project_L,
    scaled_matrix_G,
)

params = SpeciesParams(n=2, D=np.array([1.0, 2.0]), z=np.array([1.0, -1.0]),
                       lam=0.1, ell=0.1)

print("Fermi-Dirac map at a few entropy variables (Phi = 0.2):")
for w in ([0.0, 0.0], [2.0, -1.0], [40.0, -40.0]):
    u = fermi_dirac(np.array(w), 0.2, params)
    back = entropy_variables(u, 0.2, params)
    print(f"  w = {np.array(w)} -> u = {np.round(u, 6)}  "
          f"(sum {u.sum():.2e} from 1: {u.sum() - 1:+.1e}, "
          f"roundtrip defect {np.max(np.abs(back - w)):.1e})")

U = np.array([0.5, 0.3, 0.2])
em = extended_matrices(U, params)
G = scaled_matrix_G(U, params)
print()
print(f"extended mobility A at u = {U}:")
print(np.array_str(em.A, precision=3))
print(f"row sums: {np.round(em.A.sum(axis=1), 16)}")
print(f"G sqrt(u) (kernel direction): {np.round(G @ np.sqrt(U), 16)}")

rng = np.random.default_rng(0)
print()
print("subspace lower bound on 5 random draws:")
for _ in range(5):
    Y = rng.standard_normal(3)
    lhs, rhs, holds = check_subspace_pd(U, params, Y)
    z = project_L(Y, U)
    print(f"  (P_L Y)^T G (P_L Y) = {lhs:9.5f} >= {rhs:9.5f} "
          f"= D_* (|z_0|^2/u_0 + sum |z_i|^2)   [{holds}]")
