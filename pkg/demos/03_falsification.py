"""Searching for inputs that break a mined requirement.

Both solvers search over six piecewise-constant accelerations (3 s).
Every evaluated input with negative robustness is kept, then thinned so
that the survivors are at least ``min_distance`` apart.

Run: python3 demos/03_falsification.py
"""

from driverbound.falsify import FalsificationProblem, falsify, pool_diversity
from driverbound.mining import builtin_templates
from driverbound.sim import initial_state

phi = builtin_templates()["red"].instantiate({"delta": 19.5, "tau": 7.5, "nu": 10.0})
x0 = initial_state(25.0, 14.0, "R", t_el=7.0)

for solver in ("cmaes", "neldermead"):
    found = falsify(FalsificationProblem(phi, x0, solver=solver, budget=200, seed=0))
    print("%-10s %3d counterexamples, mean input spread %.2f" % (solver, len(found), pool_diversity(found)))
    best = found[0]
    print("           most violating input:", [round(u, 2) for u in best.input.values],
          "robustness %.3f" % best.robustness)
    print("           re-simulated robustness %.3f" % best.revalidate())
