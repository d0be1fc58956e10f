"""Mining tight requirement parameters from a synthetic human corpus.

Run: python3 demos/02_mining.py
"""

from driverbound.human import generate_corpus
from driverbound.mining import builtin_templates, find_frontier, mine_vlimit

traces = generate_corpus(100, seed=0)
print(len(traces), "human traces, %.0f s of driving" % sum(t.duration for t in traces))

# The tightest speed limit the whole corpus respects.
nu = mine_vlimit(traces)
top = max(t["v_x"].max() for t in traces)
print("mined speed bound %.3f m/s (fastest sample %.3f m/s)" % (nu, top))

templates = builtin_templates()
grid = {"delta": [20.0, 40.0, 60.0, 80.0, 100.0], "tau": [2.0, 5.0, 8.0]}

# Green: the minimum speed people keep once the light has been green a while.
green = find_frontier(templates["green"], traces, grid)
print("\ngreen frontier (delta, tau -> nu):")
for p in green.points:
    print("  %5.0f %4.0f -> %6.2f" % (p["delta"], p["tau"], p["nu"]))

# Red: the speed cap close to a red light grows with distance.
red = find_frontier(templates["red"], traces, grid)
print("\nred frontier (delta, tau -> nu):")
for p in red.points:
    print("  %5.0f %4.0f -> %6.2f" % (p["delta"], p["tau"], p["nu"]))
print("diagnostics:", {k: v for k, v in red.diagnostics.items() if k != "order_mismatches"})
