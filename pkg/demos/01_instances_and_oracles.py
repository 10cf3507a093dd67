"""Valuation families and their oracles, end to end.

Builds one valuation of each family over five items, round-trips an
instance through the JSON schema, and queries the value, demand, and
clause oracles.
"""

import numpy as np

from nswforge import (
    Additive,
    BudgetedAdditive,
    Instance,
    Xos,
    demand,
    load_instance,
    serialize_instance,
    singleton_max,
    validate_valuation,
    xos_clause,
)

rng = np.random.default_rng(7)
m = 5

additive = Additive(rng.uniform(0, 1, m))
xos = Xos([[2.0, 0.0, 1.0, 0.0, 0.5],
           [0.0, 2.0, 0.0, 1.0, 0.5]])
budgeted = BudgetedAdditive(np.ones(m), cap=2.5)

print("== value oracle ==")
bundle = (0, 1, 4)
for v in (additive, xos, budgeted):
    print(f"  {v.kind:18s} v({bundle}) = {v.value(bundle):.4f}")

print("\n== demand oracle ==")
prices = np.array([0.6, 0.6, 0.2, 0.2, 0.2])
for v in (additive, xos, budgeted):
    res = demand(v, prices)
    print(f"  {v.kind:18s} demands {sorted(res.items)} at utility {res.utility:.4f}")

print("\n== XOS clause oracle ==")
clause = xos_clause(xos, (0, 1))
print(f"  clause {clause.index} supports v({{0,1}}) = {xos.value((0, 1))}")
print(f"  clause weights: {clause.weights}")
print(f"  best remaining singleton: {singleton_max(xos, range(m)):.3f}")

print("\n== schema round trip ==")
inst = Instance(("alice", "bob", "carol"),
                tuple(f"g{j}" for j in range(m)),
                (additive, xos, budgeted))
text = serialize_instance(inst)
again = load_instance(text)
print(f"  serialized {len(text)} bytes; round trip exact:",
      serialize_instance(again) == text)

print("\n== exhaustive validation ==")
for v in inst.valuations:
    report = validate_valuation(v, m)
    print(f"  {v.kind:18s} {report.summary()}")
