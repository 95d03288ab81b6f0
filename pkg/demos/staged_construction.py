"""
One verified stage of the oscillating construction
==================================================

Starting from a free group on two generators, one stage adds relators that
push the rational Betti ratio of an intermediate subgroup below delta while
keeping a deeper subgroup's ratio above d - 1 - epsilon.  The recorded state
is then rechecked by verifiers that share no code with the builder.
"""

from fractions import Fraction

from pgradient.constructions import staged_driver
from pgradient.verifiers import verify_state

res = staged_driver(d=2, p=2, epsilon=Fraction(9, 10), stages=1, seed=7)
state = res.state
print("status:", state.status)
print("relators:", state.relators())

# %%
# The action log, one JSON record per decision.
for rec in res.log:
    print(rec["seq"], rec["action"], rec["affects"])

# %%
# Independent verification of the six stage conditions.
for v in verify_state(state.to_json()):
    print(f"({v.condition}) {'ok' if v.ok else 'FAILED'}: {v.detail}")
