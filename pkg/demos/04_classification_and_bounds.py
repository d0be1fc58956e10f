"""From human traces and counterexamples to an acceleration lower bound.

1. mine the green and red templates on human traces,
2. falsify them from states taken out of those traces,
3. train one small network per light on 3 s windows,
4. ask each network which next accelerations still look human.

Takes about a minute.  Run: python3 demos/04_classification_and_bounds.py
"""

import numpy as np

from driverbound.bounds import BoundQuery, evaluate_conservativeness, query_bound
from driverbound.classifier import (
    TrainConfig, balance, counterexample_windows, evaluate, split_windows, train, window_extract,
)
from driverbound.falsify import generate_counterexamples, human_x0_grid
from driverbound.human import generate_corpus
from driverbound.mining import builtin_templates, find_frontier

templates = builtin_templates()
human = generate_corpus(300, seed=1)
held_out = generate_corpus(30, seed=2)

frontiers = {tid: find_frontier(templates[tid], human).points for tid in ("green", "red")}
negatives = generate_counterexamples(
    templates, frontiers, lambda tid, p: human_x0_grid(human, tid, p, n=10), budget=300)
print("counterexamples:", negatives.counts)

nets = {}
for light, tid in (("G", "green"), ("R", "red")):
    pos = [w for i, t in enumerate(human) for w in window_extract(t, light, source=i)]
    neg = counterexample_windows([c for c in negatives.counterexamples if c.formula_id == tid], light)
    train_set, test_set = split_windows(balance(pos + neg))
    nets[light] = train(train_set, "MLP-28", TrainConfig(epochs=40), light)
    print(light, "windows %d human / %d non-human, held-out accuracy %.4f"
          % (len(pos), len(neg), evaluate(nets[light], test_set)["accuracy"]))

# One query on a held-out green window.
for t in held_out:
    ws = window_extract(t, "G")
    if ws:
        w = ws[len(ws) // 2]
        res = query_bound(BoundQuery(w, nets["G"]), refine=True)
        print("\nspeed %.1f m/s, actual next input %.2f, accepted [%s, %s], refined lower bound %s"
              % (w.frames[-1, 1], w.next_input, res.lower_bound, res.upper_bound, res.refined_lower_bound))
        break

report, rows = evaluate_conservativeness(nets, held_out)
print("\nheld-out windows:", report["windows"])
print("coverage (bound below the realized input): %.3f" % report["coverage"])
print("mean lower bound: %.3f m/s^2" % report["mean_lower_bound"])
for light, r in report["per_light"].items():
    print("  %s: %d windows, tightened beyond -10 in %.1f%%" % (light, r["windows"], 100 * r["tightened_fraction"]))
lbs = np.array([r["lower_bound"] for r in rows if r["lower_bound"] is not None])
print("lower bound quartiles:", np.percentile(lbs, [25, 50, 75]).round(2))
