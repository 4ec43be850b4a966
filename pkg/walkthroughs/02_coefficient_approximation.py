"""Nudging coefficients toward cheap neighbours while keeping each sum balanced.

Run: python walkthroughs/02_coefficient_approximation.py
"""

import statistics

import numpy as np

from bespoke_approx.coeff_approx import approximate_model, approximate_weights, window_reduction
from bespoke_approx.fixtures import load_fixture
from bespoke_approx.synth import area_table

rng = np.random.default_rng(3)
ws = rng.integers(-128, 128, size=8).tolist()
sel = approximate_weights(ws, 4, 4)
print("original:    ", ws)
print("approximated:", list(sel.weights))
print("error sum:", sel.error_sum, " proxy area:", sel.area)

# median area drop when any value within +-e may replace w
table = dict(area_table(4))
for e in range(1, 5):
    print(f"e={e}: median reduction {statistics.median(window_reduction(table, w, e) for w in table):.1%}")

# the same step applied to every weighted sum in a model
q = load_fixture("svm_r").quantized
qa = approximate_model(q, 4)
sums = qa.provenance["coeff_approx"]["sums"]
before = sum(s["proxy_area_before"] for s in sums)
after = sum(s["proxy_area_after"] for s in sums)
print(f"svm_r proxy multiplier area {before:.0f} -> {after:.0f}")
