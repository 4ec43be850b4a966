"""Gate pruning: tie nearly constant gates that only touch low output bits.

Run: python walkthroughs/03_pruning.py
"""

import numpy as np

from bespoke_approx import area, candidates, gen_model_circuit, profile, prune, simulate
from bespoke_approx.fixtures import load_fixture
from bespoke_approx.prune import phi_values

f = load_fixture("svm_r")
n = gen_model_circuit(f.quantized)
vec = {f"x{i}": f.train_X[:, i] for i in range(f.train_X.shape[1])}
test = {f"x{i}": f.test_X[:, i] for i in range(f.test_X.shape[1])}

cands = candidates(n, profile(n, vec))
taus = np.array([c.tau for c in cands])
print("gates:", len(n.gates), " with tau >= 0.95:", int((taus >= 0.95).sum()))

# ripple carries reach the top bit, so most candidates sit at the largest phi
print("distinct phi at tau 0.95:", phi_values(cands, 0.95))

ref = simulate(n, test)["y"]
for phi_c in phi_values(cands, 0.95):
    p = prune(n, cands, 0.95, phi_c)
    err = np.abs(simulate(p, test)["y"] - ref).max()
    print(f"phi_c={phi_c:2d}  removed={len(p.meta['prune']['removed']):4d}  "
          f"area {area(p).total_area:8.1f} / {area(n).total_area:8.1f}  max error {err} < {2 ** (phi_c + 1)}")
