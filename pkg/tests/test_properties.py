import random

import numpy as np
from hypothesis import given, settings, strategies as st

from bespoke_approx import netlist as nl
from bespoke_approx.coeff_approx import build_candidates, select_config
from bespoke_approx.netlist import NetlistBuilder
from bespoke_approx.sim import exhaustive_vectors, profile, simulate
from bespoke_approx.synth import gen_argmax, gen_mult_const

from conftest import random_netlist
from test_coeff_approx import brute_force

ARGMAX = gen_argmax(4, 4, signed=False)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_optimize_sound_idempotent_shrinking(seed):
    n = random_netlist(random.Random(seed))
    o = nl.optimize(n)
    assert nl.validate(o) == []
    v = exhaustive_vectors(n)
    a, b = simulate(n, v), simulate(o, v)
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert nl.structurally_equal(nl.optimize(o), o)
    assert nl.area(o).total_area <= nl.area(n).total_area


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=64))
def test_inverter_probability_complements(bits):
    b = NetlistBuilder()
    x = b.input("x", 1)[0]
    y = b.gate("INV", x)
    b.output("y", [y])
    a = profile(b.build(), {"x": np.array(bits)})
    assert a.ones[y] == len(bits) - a.ones[x]
    assert abs(a.p_one[y] - (1 - a.p_one[x])) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 14), min_size=4, max_size=4), st.integers(0, 3))
def test_argmax_monotone(vals, i):
    """Raising the winner or lowering any other input never changes the decision."""
    run = lambda vs: int(simulate(ARGMAX, {f"v{k}": np.array([v]) for k, v in enumerate(vs)})["index"][0])
    win = run(vals)
    assert win == int(np.argmax(vals))
    up = list(vals)
    up[win] += 1
    assert run(up) == win
    if i != win and vals[i] > 0:
        down = list(vals)
        down[i] -= 1
        assert run(down) == win


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-128, 127), min_size=1, max_size=9), st.integers(1, 5))
def test_select_config_optimal(ws, e):
    pairs = build_candidates(ws, e, 4)
    sel = select_config(pairs)
    assert (abs(sel.error_sum), sel.area, sel.error_sum) == brute_force(pairs)[:3]
    assert abs(sel.error_sum) <= e


@settings(max_examples=40, deadline=None)
@given(st.integers(-128, 127), st.integers(1, 6))
def test_bespoke_multiplier_any_width(w, u):
    x = np.arange(1 << u)
    assert np.array_equal(simulate(gen_mult_const(w, u), {"x": x})["p"], x * w)
