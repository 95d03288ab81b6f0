"""
Mod-2 Betti numbers along the derived 2-series of a free group
===============================================================

For a free group of rank d every finite-index subgroup of index n is free of
rank 1 + n(d - 1), so the normalized mod-p Betti numbers approach d - 1 from
above, exactly 1/n away at each level.
"""

from fractions import Fraction

from pgradient import Presentation, check_fp_monotone, derived_p_series, report

# %%
# Build the series as far as the default index budget allows.
F = Presentation.free(2)
chain = derived_p_series(F, p=2, depth=3)
print("indices:", chain.indices)
print("truncated:", chain.truncation)

# %%
# Exact ratios, and their distance to d - 1.
rep = report(chain, primes=[2])
for row in rep.rows:
    ratio = row.ratios["b1_mod_2"]
    print(f"index {row.index:4d}  b1(F_2)/n = {ratio}  minus 1 = {ratio - 1}")
    assert ratio - 1 == Fraction(1, row.index)

# %%
# Along a p-chain the mod-p ratios can only go down.
print(check_fp_monotone(rep, 2))
