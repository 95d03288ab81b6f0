"""
Cyclic covers of a genus-2 surface
==================================

A degree-n cover of a closed surface of genus 2 has genus n + 1, so its first
Betti number is 2n + 2 and the normalized values tend to 2.
"""

from pgradient import cyclic_chain, parse_presentation, reidemeister_schreier, report

G = parse_presentation("< a, b, c, d | [a,b]*[c,d] >")
chain = cyclic_chain(G, weights=[1, 0, 0, 0], moduli=[2, 4, 8, 16])
rep = report(chain, primes=[2])

# %%
# Compare with the Euler characteristic of the subgroup presentation.
for row, q in zip(rep.rows, chain.levels):
    sub = reidemeister_schreier(q).presentation
    chi = 1 - sub.generators + len(sub.relators)
    print(f"n = {row.index:2d}  b1 = {row.b1_rational:2d}  2 - chi = {2 - chi:2d}  "
          f"b1/n - 2 = {row.ratios['b1_rational'] - 2}")
