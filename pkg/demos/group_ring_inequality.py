"""
Dimension of images over a modular group ring
=============================================

For a finite p-group H and a matrix A over F_p[H], the image of A acting on
F_p[H]^n has dimension at least |H| times the rank of the augmented matrix.
The p-group hypothesis matters: over F_3, the element 1 + h of F_3[C_2] is
a zero divisor with augmentation 2.
"""

import numpy as np

from pgradient.groupring import (GroupRingMatrix, check_dim_inequality, group_by_name,
                                 load_demo_catalog, random_suite, run_demo)

# %%
# One random 2 x 3 matrix over F_2[Q_8].
Q8 = group_by_name("Q8")
A = GroupRingMatrix.random(Q8, 2, 2, 3, np.random.default_rng(0))
print(check_dim_inequality(A))

# %%
# Seeded samples over eight p-groups.
for r in random_suite(samples=200, seed=0):
    print(f"{r.group:6s} p={r.p}  violations {r.violations}  equalities {r.equalities}")

# %%
# The catalogued counterexamples outside the hypothesis.
for entry in load_demo_catalog():
    print(entry["name"], run_demo(entry))
