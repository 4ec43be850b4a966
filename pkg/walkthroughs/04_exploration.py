"""Cross-layer exploration and its accuracy/area front.

Run: python walkthroughs/04_exploration.py
"""

from bespoke_approx import dse
from bespoke_approx.fixtures import load_fixture

f = load_fixture("mlp_r")
stim = dse.Stimulus(f.train_X, f.test_X, f.test.labels, f.train.labels)
ex = dse.explore_cross(f.quantized, stim, e=4)
front = dse.pareto(ex.points)

print(len(ex.points), "points,", len(front), "on the front")
for p in front:
    print(f"{p.stage:11s} tau={p.tau_c!s:5s} phi={p.phi_c!s:4s} acc={p.accuracy:.4f} area={p.normalized_area:.3f}")

best = dse.best_under_budget(ex.points, 0.01)
print("smallest within 1% of the best accuracy:", best)
