"""Bit-parallel combinational simulation, activity profiling and the power proxy.

Every net carries one Python integer whose bit ``i`` is the net's value under
stimulus vector ``i``. A netlist is compiled once into straight-line code over
those integers, so one pass over the gates evaluates the whole stimulus set.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .cells import CellLibrary, default_library
from .netlist import CONST0, CONST1, Bus, Netlist, levelize

MAX_EXHAUSTIVE_BITS = 20


class SimulationError(ValueError):
    pass


# --------------------------------------------------------------------------- codegen

_KNOWN = {
    (1, 0b10): "{0}",
    (1, 0b01): "~{0} & M",
    (2, 0b1000): "{0} & {1}",
    (2, 0b0111): "~({0} & {1}) & M",
    (2, 0b1110): "{0} | {1}",
    (2, 0b0001): "~({0} | {1}) & M",
    (2, 0b0110): "{0} ^ {1}",
    (2, 0b1001): "~({0} ^ {1}) & M",
    (2, 0b0100): "~{0} & {1} & M",
    (2, 0b0010): "{0} & ~{1} & M",
    (2, 0b1101): "(~{1} | {0}) & M",
    (2, 0b1011): "(~{0} | {1}) & M",
    (3, 0b11001010): "({0} & ~{2} | {1} & {2}) & M",
}


def _expr(arity: int, tt: int) -> str:
    if (arity, tt) in _KNOWN:
        return _KNOWN[(arity, tt)]
    if tt == 0:
        return "0"
    if tt == (1 << (1 << arity)) - 1:
        return "M"
    terms = []
    for m in range(1 << arity):
        if (tt >> m) & 1:
            lits = ["{%d}" % k if (m >> k) & 1 else "~{%d}" % k for k in range(arity)]
            terms.append("(" + " & ".join(lits) + ")")
    return "(" + " | ".join(terms) + ") & M"


_COMPILED: dict[int, tuple] = {}


def compile_netlist(n: Netlist, lib: CellLibrary | None = None):
    """Return ``(fn, nets)`` where ``fn(v, M)`` fills the value list ``v`` in place."""
    lib = lib or default_library()
    order = levelize(n)
    lines = ["def _sim(v, M):"]
    for gid in order:
        g = n.gates[gid]
        c = lib[g.cell]
        args = ["v[%d]" % i for i in g.inputs]
        lines.append("    v[%d] = " % g.output + _expr(c.arity, c.truth_table).format(*args))
    lines.append("    return v")
    ns: dict = {}
    exec(compile("\n".join(lines), f"<netlist {n.name}>", "exec"), ns)
    return ns["_sim"]


def _pack_bits(col: np.ndarray) -> int:
    """Pack a 0/1 vector into an int, element ``i`` -> bit ``i``."""
    return int.from_bytes(np.packbits(col.astype(np.uint8), bitorder="little").tobytes(), "little")


def _unpack_bits(x: int, count: int) -> np.ndarray:
    raw = np.frombuffer(x.to_bytes((count + 7) // 8, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:count]


def _bind(n: Netlist, vectors: Mapping[str, np.ndarray]):
    count = None
    for name in n.inputs:
        if name not in vectors:
            raise SimulationError(f"input bus {name} is not bound")
    for name, arr in vectors.items():
        if name not in n.inputs:
            raise SimulationError(f"stimulus names unknown input bus {name}")
        arr = np.asarray(arr)
        if arr.ndim != 1:
            raise SimulationError(f"stimulus for {name} must be one value per vector")
        if count is None:
            count = len(arr)
        elif len(arr) != count:
            raise SimulationError(f"stimulus for {name} has {len(arr)} vectors, expected {count}")
        width = len(n.inputs[name])
        if len(arr) and (arr.min() < 0 or int(arr.max()) >> width):
            raise SimulationError(f"stimulus for {name} does not fit {width} unsigned bits")
    if not count:
        raise SimulationError("at least one stimulus vector is required")
    return count


def run(n: Netlist, vectors: Mapping[str, np.ndarray], lib: CellLibrary | None = None,
        fn: Callable | None = None) -> tuple[list[int], int]:
    """Simulate and return the packed value of every net plus the vector count."""
    count = _bind(n, vectors)
    size = max(n.nets()) + 1
    v = [0] * size
    mask = (1 << count) - 1
    v[CONST1] = mask
    for name, bits in n.inputs.items():
        arr = np.asarray(vectors[name]).astype(np.int64)
        for k, net in enumerate(bits):
            v[net] = _pack_bits((arr >> k) & 1)
    fn = fn or compile_netlist(n, lib)
    fn(v, mask)
    return v, count


def decode_bus(values: list[int], bus: Bus, count: int) -> np.ndarray:
    out = np.zeros(count, dtype=np.int64)
    for k, net in enumerate(bus.nets):
        out |= _unpack_bits(values[net], count).astype(np.int64) << k
    if bus.signed and bus.width:
        sign = np.int64(1) << (bus.width - 1)
        out = (out ^ sign) - sign
    return out


def simulate(n: Netlist, vectors: Mapping[str, np.ndarray], lib: CellLibrary | None = None,
             buses: str = "outputs") -> dict[str, np.ndarray]:
    """Per-vector integer value of every output bus (or tracked bus with ``buses='obuses'``)."""
    values, count = run(n, vectors, lib)
    sel = n.outputs if buses == "outputs" else n.obuses
    return {name: decode_bus(values, b, count) for name, b in sel.items()}


# --------------------------------------------------------------------------- activity


@dataclass(frozen=True)
class ActivityProfile:
    p_one: dict[int, float]
    toggle_rate: dict[int, float]
    vector_count: int
    ones: dict[int, int]
    toggles: dict[int, int]

    def to_dict(self) -> dict:
        return {
            "vector_count": self.vector_count,
            "nets": {str(k): {"p_one": self.p_one[k], "toggle_rate": self.toggle_rate[k],
                              "ones": self.ones[k], "toggles": self.toggles[k]}
                     for k in sorted(self.p_one)},
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")


def _counts(values: list[int], nets, count: int):
    mask_t = (1 << (count - 1)) - 1
    ones, toggles = {}, {}
    for net in nets:
        x = values[net]
        ones[net] = x.bit_count()
        toggles[net] = ((x ^ (x >> 1)) & mask_t).bit_count() if count > 1 else 0
    return ones, toggles


def _finish(ones, toggles, count) -> ActivityProfile:
    pairs = max(count - 1, 1)
    return ActivityProfile({k: c / count for k, c in ones.items()},
                           {k: t / pairs if count > 1 else 0.0 for k, t in toggles.items()},
                           count, ones, toggles)


def profile(n: Netlist, vectors: Mapping[str, np.ndarray], lib: CellLibrary | None = None,
            chunks: int = 1) -> ActivityProfile:
    """Per-net probability of one and adjacent-vector toggle rate.

    With ``chunks > 1`` the stimulus is split into contiguous pieces whose counts
    are summed, plus the toggles across each seam; the result is identical.
    """
    count = _bind(n, vectors)
    nets = sorted(n.nets())
    if chunks <= 1 or count < 2 * chunks:
        values, count = run(n, vectors, lib)
        return _finish(*_counts(values, nets, count), count)
    fn = compile_netlist(n, lib)
    edges = np.linspace(0, count, chunks + 1).astype(int)
    ones = dict.fromkeys(nets, 0)
    toggles = dict.fromkeys(nets, 0)
    prev_last = None
    for a, b in itertools.pairwise(edges):
        part = {k: np.asarray(v)[a:b] for k, v in vectors.items()}
        values, c = run(n, part, lib, fn)
        o, t = _counts(values, nets, c)
        for net in nets:
            ones[net] += o[net]
            toggles[net] += t[net]
            if prev_last is not None:
                toggles[net] += (values[net] & 1) != prev_last[net]
        prev_last = {net: (values[net] >> (c - 1)) & 1 for net in nets}
    return _finish(ones, toggles, count)


# --------------------------------------------------------------------------- equivalence


@dataclass(frozen=True)
class Mismatch:
    vector: dict[str, int]
    netlist: dict[str, int]
    oracle: dict[str, int]


def exhaustive_vectors(n: Netlist) -> dict[str, np.ndarray]:
    total = n.input_bits
    if total > MAX_EXHAUSTIVE_BITS:
        raise SimulationError(f"exhaustive mode needs <= {MAX_EXHAUSTIVE_BITS} input bits, netlist has {total}")
    idx = np.arange(1 << total, dtype=np.int64)
    out, shift = {}, 0
    for name, bits in n.inputs.items():
        out[name] = (idx >> shift) & ((1 << len(bits)) - 1)
        shift += len(bits)
    return out


def check_equiv(n: Netlist, oracle: Callable[[dict[str, np.ndarray]], dict[str, np.ndarray]],
                vectors: Mapping[str, np.ndarray] | None = None, lib: CellLibrary | None = None,
                limit: int | None = None) -> list[Mismatch]:
    """Compare netlist outputs with ``oracle`` (vectorised over stimulus arrays).

    ``vectors=None`` selects exhaustive stimulus. Returns the mismatching vectors.
    """
    if vectors is None:
        vectors = exhaustive_vectors(n)
    got = simulate(n, vectors, lib)
    want = oracle({k: np.asarray(v) for k, v in vectors.items()})
    names = sorted(set(got) & set(want))
    bad = np.zeros(len(next(iter(vectors.values()))), dtype=bool)
    for name in names:
        bad |= np.asarray(got[name]) != np.asarray(want[name])
    out = []
    for i in np.flatnonzero(bad)[:limit]:
        out.append(Mismatch({k: int(v[i]) for k, v in vectors.items()},
                            {k: int(got[k][i]) for k in names},
                            {k: int(want[k][i]) for k in names}))
    return out


# --------------------------------------------------------------------------- power


@dataclass(frozen=True)
class PowerReport:
    dynamic: float
    static: float

    @property
    def total(self) -> float:
        return self.dynamic + self.static


def power(n: Netlist, a: ActivityProfile, lib: CellLibrary | None = None) -> PowerReport:
    """Activity-weighted switched capacitance plus summed cell leakage."""
    lib = lib or default_library()
    load: dict[int, float] = {}
    leak = 0.0
    for g in sorted(n.gates.values(), key=lambda g: g.id):
        c = lib[g.cell]
        leak += c.leakage
        for net in g.inputs:
            load[net] = load.get(net, 0.0) + c.input_cap
    dyn = 0.0
    for net in sorted(load):
        if net not in a.toggle_rate:
            raise SimulationError(f"activity profile has no entry for net {net}")
        dyn += a.toggle_rate[net] * load[net]
    return PowerReport(dyn, leak)
