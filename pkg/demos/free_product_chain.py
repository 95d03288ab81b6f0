"""
A chain where the rational and mod-p approximations disagree
============================================================

Take Z/2 * Z/3 * Z/3 * Z and the chain of kernels of the maps to Z/n that
kill the torsion factors and send the free generator to 1.  Each kernel is a
free product of n copies of the torsion part with one infinite cyclic group,
so every Betti number is linear in n with a different slope.
"""

from pgradient import report
from pgradient.chains import strict_inequality_flags
from pgradient.constructions import counterexample_closed_forms, free_product_counterexample

P, chain = free_product_counterexample(p=2, q=3, moduli=[2, 4, 8, 16, 32])
print(P)

# %%
# Computed invariants next to the closed forms 1, 1+n, 1+2n, 1+2n, 1+3n.
rep = report(chain, primes=[2, 3])
print(" n  b1  b1(F2)  b1(F3)  d(H1)  rank<=")
for row in rep.rows[1:]:
    cf = counterexample_closed_forms(row.index)
    got = (row.b1_rational, row.b1_mod[2], row.b1_mod[3], row.d_H1, row.rank_upper)
    assert got == (cf.b1, cf.b1_p, cf.b1_q, cf.d_H1, cf.rank_upper)
    print(f"{row.index:2d}  {got[0]:2d}  {got[1]:6d}  {got[2]:6d}  {got[3]:5d}  {got[4]:6d}")

# %%
# After dividing by n the four quantities stay strictly ordered; their
# limits are 0, 1, 2 and 3.
print(strict_inequality_flags(rep, 2))
