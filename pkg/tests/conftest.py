import os
import random

import numpy as np
import pytest

# keep the multiplier-area cache out of the user's home during tests
if "BESPOKE_APPROX_CACHE" not in os.environ:
    import tempfile

    os.environ["BESPOKE_APPROX_CACHE"] = tempfile.mkdtemp(prefix="bespoke_approx_cache_")

from bespoke_approx.cells import default_library  # noqa: E402
from bespoke_approx.fixtures import NAMES, load_fixture  # noqa: E402
from bespoke_approx.netlist import CONST0, CONST1, NetlistBuilder  # noqa: E402
from bespoke_approx.synth import gen_model_circuit  # noqa: E402


@pytest.fixture(scope="session")
def lib():
    return default_library()


_FIX = {}
_CIRC = {}


def fixture(name):
    if name not in _FIX:
        _FIX[name] = load_fixture(name)
    return _FIX[name]


def fixture_circuit(name):
    if name not in _CIRC:
        _CIRC[name] = gen_model_circuit(fixture(name).quantized)
    return _CIRC[name]


@pytest.fixture(scope="session")
def fixtures():
    return {n: fixture(n) for n in NAMES}


def vectors(X):
    return {f"x{i}": np.asarray(X)[:, i] for i in range(np.asarray(X).shape[1])}


def random_netlist(rng: random.Random, lib=None, max_bits=12, max_gates=40):
    """Random valid netlist with constants, repeated inputs and inverter pairs thrown in."""
    lib = lib or default_library()
    cells = sorted(lib.cells)
    b = NetlistBuilder("rnd")
    nets = [CONST0, CONST1]
    bits = rng.randint(1, max_bits)
    while bits:
        w = rng.randint(1, min(4, bits))
        nets += b.input(f"i{len(b.inputs)}", w)
        bits -= w
    for _ in range(rng.randint(1, max_gates)):
        r = rng.random()
        if r < 0.1:
            x = rng.choice(nets[2:])
            nets.append(b.gate("INV", b.gate("INV", x)))
            continue
        cell = lib[rng.choice(cells)]
        pool = nets if rng.random() < 0.8 else nets[:2] + nets[-3:]
        ins = [rng.choice(pool) for _ in range(cell.arity)]
        if r < 0.2 and cell.arity >= 2:
            ins[1] = ins[0]
        nets.append(b.gate(cell.name, *ins))
    for k in range(rng.randint(1, 3)):
        width = rng.randint(1, 4)
        b.output(f"o{k}", [rng.choice(nets) for _ in range(width)], signed=rng.random() < 0.3)
    return b.build()


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
