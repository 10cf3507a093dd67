"""Stage-by-stage walkthrough of the XOS pipeline on one instance.

Shows every intermediate artifact: the reservation matching, the
relaxation targets, the split columns with their reserved large items,
the sampled tentative sets with contention lists, and the final
rematching, then compares against the exact optimum.
"""

from nswforge import GenSpec, PipelineParams, exact_nsw, generate, run_xos

inst = generate(GenSpec("xos", n=3, m=6, clauses=3, seed=41))
report = run_xos(inst, PipelineParams(seed=11))

print("== reservation ==")
for i in inst.agents:
    print(f"  {inst.agent_names[i]} reserves item {report.tau.assignment[i]}")
print(f"  remaining pool: {sorted(report.remaining)}, active agents: "
      f"{sorted(report.active)}")

print("\n== relaxation targets ==")
for i, value in sorted(report.eg.values().items()):
    print(f"  agent {i}: V+ = {value:.4f}")

print("\n== split columns (weight, part, reserved large item) ==")
for i, cols in sorted(report.split.columns.items()):
    for col in cols:
        print(f"  agent {i}: w={col.weight:.3f} part={sorted(col.items)} "
              f"large={col.large_item} from {sorted(col.source)}")

print("\n== rounding ==")
for i, items in sorted(report.outcome.tentative.items()):
    won = sorted(report.outcome.allocation.bundle(i))
    print(f"  agent {i}: tentative {sorted(items)} -> won {won}")
contested = {j: agents for j, agents in report.outcome.contention.items()
             if len(agents) > 1}
print(f"  contested items: {contested or 'none'}")

print("\n== final allocation ==")
for i in inst.agents:
    bundle = sorted(report.allocation.bundle(i))
    print(f"  {inst.agent_names[i]}: {bundle} "
          f"(worth {inst.valuations[i].value(bundle):.4f})")

opt = exact_nsw(inst).optimum
print(f"\nNSW achieved {report.nsw:.4f} vs exact optimum {opt:.4f} "
      f"(ratio {report.nsw / opt:.3f}, guarantee 1/1440)")
print("stage timings:", {k: f"{v * 1e3:.1f}ms" for k, v in report.timings.items()})
