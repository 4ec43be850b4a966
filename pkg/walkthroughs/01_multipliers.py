"""Constant multipliers: why some coefficients are cheap.

Run: python walkthroughs/01_multipliers.py
"""

import numpy as np

from bespoke_approx import area, gen_mult_const
from bespoke_approx.synth import area_table, gen_mult_generic

# a 4-bit unsigned input times a fixed 8-bit coefficient
x = np.arange(16)
for w in (0, 1, 64, 3, 7, 77, -128):
    n = gen_mult_const(w, 4)
    a = area(n).total_area
    print(f"w={w:5d}  gates={len(n.gates):3d}  area={a:7.1f}")

# the generic 4x8 multiplier, for scale
print("generic 4x8 multiplier area:", area(gen_mult_generic(4, 8)).total_area)

# the whole table, sorted by area
table = np.array(area_table(4))
order = np.argsort(table[:, 1], kind="stable")
print("cheapest:", table[order[:10], 0].astype(int))
print("dearest: ", table[order[-5:], 0].astype(int))
print("share of coefficients with zero area:", np.mean(table[:, 1] == 0))
