import numpy as np
import pytest

from bespoke_approx.netlist import CONST1, NetlistBuilder
from bespoke_approx.sim import (SimulationError, check_equiv, exhaustive_vectors, power, profile, simulate)


def adder2():
    from bespoke_approx.synth import Word, add
    b = NetlistBuilder()
    x, y = b.input("x", 2), b.input("y", 2)
    b.output("s", add(b, Word(x, False), Word(y, False), 3).bits)
    return b.build()


def test_exhaustive_adder():
    n = adder2()
    v = exhaustive_vectors(n)
    assert len(v["x"]) == 16
    assert not check_equiv(n, lambda v: {"s": v["x"] + v["y"]})


def test_signed_decode():
    b = NetlistBuilder()
    x = b.input("x", 3)
    b.output("y", x, signed=True)
    out = simulate(b.build(), {"x": np.arange(8)})["y"]
    assert out.tolist() == [0, 1, 2, 3, -4, -3, -2, -1]


def test_check_equiv_reports_mismatch():
    n = adder2()
    bad = check_equiv(n, lambda v: {"s": v["x"] + v["y"] + (v["x"] == 3)}, limit=2)
    assert len(bad) == 2 and bad[0].vector["x"] == 3


def test_stimulus_errors():
    n = adder2()
    with pytest.raises(SimulationError, match="not bound"):
        simulate(n, {"x": np.arange(3)})
    with pytest.raises(SimulationError, match="does not fit"):
        simulate(n, {"x": np.array([4]), "y": np.array([0])})
    with pytest.raises(SimulationError, match="vectors"):
        simulate(n, {"x": np.arange(3), "y": np.arange(2)})
    with pytest.raises(SimulationError, match="at least one"):
        simulate(n, {"x": np.array([], int), "y": np.array([], int)})


def test_inverter_activity():
    b = NetlistBuilder()
    x = b.input("x", 1)[0]
    y = b.gate("INV", x)
    b.output("y", [y])
    n = b.build()
    a = profile(n, {"x": np.array([0, 0, 1, 0, 1, 1, 1, 1])})
    assert a.p_one[x] == 5 / 8 and a.p_one[y] == 3 / 8
    assert a.toggle_rate[y] == a.toggle_rate[x] == 3 / 7
    assert a.p_one[CONST1] == 1.0


def test_chunked_profile_matches():
    rng = np.random.default_rng(0)
    n = adder2()
    v = {"x": rng.integers(0, 4, 101), "y": rng.integers(0, 4, 101)}
    a, b = profile(n, v), profile(n, v, chunks=4)
    assert a.ones == b.ones and a.toggles == b.toggles


def test_power_components():
    n = adder2()
    v = exhaustive_vectors(n)
    p = power(n, profile(n, v))
    assert p.dynamic > 0 and p.static > 0 and p.total == p.dynamic + p.static
    still = power(n, profile(n, {"x": np.zeros(5, int), "y": np.zeros(5, int)}))
    assert still.dynamic == 0 and still.static == p.static
