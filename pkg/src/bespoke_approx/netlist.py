"""Combinational gate-level netlist IR, local-rewrite optimizer and area accounting.

Nets are small integers. Net 0 is ``CONST0`` and net 1 is ``CONST1``; every other
net is driven by exactly one primary-input bit or one gate output. Buses list their
nets least significant bit first.

Netlists are treated as immutable values: every transformation returns a new one.
"""

from __future__ import annotations

import heapq
import json
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path

from .cells import CellLibrary, default_library

CONST0 = 0
CONST1 = 1
FORMAT_VERSION = 1
CLASSIFIER_KINDS = ("MLP-C", "SVM-C")
MODEL_KINDS = ("MLP-C", "MLP-R", "SVM-C", "SVM-R")


class NetlistError(ValueError):
    pass


class CycleError(NetlistError):
    pass


@dataclass(frozen=True)
class Bus:
    nets: tuple[int, ...]
    signed: bool = False

    @property
    def width(self) -> int:
        return len(self.nets)


@dataclass(frozen=True)
class Gate:
    id: int
    cell: str
    inputs: tuple[int, ...]
    output: int


@dataclass(frozen=True)
class Netlist:
    """A combinational DAG of library cells.

    ``obuses`` holds the argmax-input words ``O_1..O_k`` of classifier circuits and
    ``decision_gates`` the argmax gates appended after them. Both are carried
    through every rewrite.
    """

    inputs: dict[str, tuple[int, ...]]
    outputs: dict[str, Bus]
    gates: dict[int, Gate]
    name: str = "top"
    kind: str | None = None
    obuses: dict[str, Bus] = field(default_factory=dict)
    decision_gates: frozenset[int] = frozenset()
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def input_bits(self) -> int:
        return sum(len(v) for v in self.inputs.values())

    def drivers(self) -> dict[int, int]:
        """Map gate-driven net -> gate id."""
        return {g.output: g.id for g in self.gates.values()}

    def nets(self) -> set[int]:
        s = {CONST0, CONST1}
        for bits in self.inputs.values():
            s.update(bits)
        s.update(g.output for g in self.gates.values())
        return s

    def fanout(self) -> dict[int, list[int]]:
        fo = defaultdict(list)
        for g in self.gates.values():
            for i in g.inputs:
                fo[i].append(g.id)
        return fo

    def next_net(self) -> int:
        return max(self.nets()) + 1

    def root_nets(self) -> set[int]:
        roots = set()
        for b in self.outputs.values():
            roots.update(b.nets)
        for b in self.obuses.values():
            roots.update(b.nets)
        return roots


class NetlistBuilder:
    """Mutable helper used by generators; ``build()`` freezes the result."""

    def __init__(self, name: str = "top"):
        self.name = name
        self.gates: dict[int, Gate] = {}
        self.inputs: dict[str, tuple[int, ...]] = {}
        self.outputs: dict[str, Bus] = {}
        self.obuses: dict[str, Bus] = {}
        self.decision: set[int] = set()
        self.recording: set[int] | None = None
        self._net = 2
        self._gid = 0

    def new_net(self) -> int:
        n = self._net
        self._net += 1
        return n

    def input(self, name: str, width: int) -> list[int]:
        if name in self.inputs:
            raise NetlistError(f"duplicate input bus {name}")
        bits = [self.new_net() for _ in range(width)]
        self.inputs[name] = tuple(bits)
        return bits

    def gate(self, cell: str, *ins: int) -> int:
        out = self.new_net()
        gid = self._gid
        self._gid += 1
        self.gates[gid] = Gate(gid, cell, tuple(ins), out)
        if self.recording is not None:
            self.recording.add(gid)
        return out

    def output(self, name: str, nets, signed: bool = False) -> None:
        self.outputs[name] = Bus(tuple(nets), signed)

    def obus(self, name: str, nets, signed: bool = False) -> None:
        self.obuses[name] = Bus(tuple(nets), signed)

    def build(self, kind: str | None = None, meta: dict | None = None) -> Netlist:
        return Netlist(dict(self.inputs), dict(self.outputs), dict(self.gates), self.name,
                       kind, dict(self.obuses), frozenset(self.decision), dict(meta or {}))


def wire_netlist(width: int = 1, name: str = "wire") -> Netlist:
    """One input bus wired straight to one output bus."""
    b = NetlistBuilder(name)
    bits = b.input("a", width)
    b.output("y", bits)
    return b.build()


# --------------------------------------------------------------------------- checks


def validate(n: Netlist, lib: CellLibrary | None = None, limit: int = 10) -> list[str]:
    """Return up to ``limit`` invariant violations; an empty list means valid."""
    diags: list[str] = []

    def add(msg):
        if len(diags) < limit:
            diags.append(msg)

    driver: dict[int, str] = {CONST0: "CONST0", CONST1: "CONST1"}
    for name, bits in n.inputs.items():
        for k, net in enumerate(bits):
            if net in driver:
                add(f"net {net} has multiple drivers: {driver[net]} and input {name}[{k}]")
            else:
                driver[net] = f"input {name}[{k}]"
    for g in n.gates.values():
        if g.output in driver:
            add(f"net {g.output} has multiple drivers: {driver[g.output]} and gate {g.id}")
        else:
            driver[g.output] = f"gate {g.id}"
    for g in n.gates.values():
        for net in g.inputs:
            if net not in driver:
                add(f"gate {g.id} reads undriven net {net}")
        if lib is not None:
            if g.cell not in lib:
                add(f"gate {g.id} uses unknown cell {g.cell}")
            elif lib[g.cell].arity != len(g.inputs):
                add(f"gate {g.id} ({g.cell}) has {len(g.inputs)} inputs, cell arity {lib[g.cell].arity}")
    for name, bus in list(n.outputs.items()) + list(n.obuses.items()):
        for k, net in enumerate(bus.nets):
            if net not in driver:
                add(f"bus {name}[{k}] reads undriven net {net}")
    for gid in n.decision_gates:
        if gid not in n.gates:
            add(f"decision gate {gid} does not exist")
    if n.kind in MODEL_KINDS:
        if n.kind in CLASSIFIER_KINDS and not n.obuses:
            add(f"classifier netlist ({n.kind}) lacks argmax-input bus metadata")
        if n.kind not in CLASSIFIER_KINDS and n.obuses:
            add(f"regressor netlist ({n.kind}) carries argmax-input buses")
    cyc = _find_cycle(n)
    if cyc:
        add("combinational cycle through gates " + ", ".join(str(g) for g in cyc))
    return diags


def _find_cycle(n: Netlist) -> list[int]:
    drv = n.drivers()
    state: dict[int, int] = {}
    for start in sorted(n.gates):
        if start in state:
            continue
        stack = [(start, iter(n.gates[start].inputs))]
        path = [start]
        state[start] = 1
        while stack:
            gid, it = stack[-1]
            nxt = None
            for net in it:
                d = drv.get(net)
                if d is None:
                    continue
                if state.get(d) == 1:
                    return path[path.index(d):]
                if d not in state:
                    nxt = d
                    break
            if nxt is None:
                state[gid] = 2
                stack.pop()
                path.pop()
            else:
                state[nxt] = 1
                stack.append((nxt, iter(n.gates[nxt].inputs)))
                path.append(nxt)
    return []


def levelize(n: Netlist) -> list[int]:
    """Topological order of gate ids; ready gates are taken lowest id first."""
    drv = n.drivers()
    indeg = {}
    users = defaultdict(list)
    for g in n.gates.values():
        deps = {drv[i] for i in g.inputs if i in drv}
        indeg[g.id] = len(deps)
        for d in deps:
            users[d].append(g.id)
    ready = [gid for gid, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        gid = heapq.heappop(ready)
        order.append(gid)
        for u in users[gid]:
            indeg[u] -= 1
            if indeg[u] == 0:
                heapq.heappush(ready, u)
    if len(order) != len(n.gates):
        left = sorted(set(n.gates) - set(order))
        raise CycleError(f"combinational cycle among gates {left[:10]}")
    return order


# --------------------------------------------------------------------------- area


@dataclass(frozen=True)
class AreaReport:
    total_area: float
    gate_count: int
    per_cell: dict[str, int]


def area(n: Netlist, lib: CellLibrary | None = None) -> AreaReport:
    lib = lib or default_library()
    counts: dict[str, int] = defaultdict(int)
    total = 0.0
    for g in n.gates.values():
        if g.cell not in lib:
            raise NetlistError(f"gate {g.id} references unknown cell {g.cell}")
        counts[g.cell] += 1
    # sum per cell type so the float total is independent of gate order
    for cell in sorted(counts):
        total += lib[cell].area * counts[cell]
    return AreaReport(total, len(n.gates), dict(sorted(counts.items())))


# --------------------------------------------------------------------------- rewrites


def _remap_buses(buses: dict[str, Bus], rep) -> dict[str, Bus]:
    return {k: Bus(tuple(rep(x) for x in b.nets), b.signed) for k, b in buses.items()}


def tie_to_const(n: Netlist, gate_id: int, value: int) -> Netlist:
    """Remove one gate and drive its former fan-out with a constant."""
    if gate_id not in n.gates:
        raise NetlistError(f"unknown gate id {gate_id}")
    return tie_many(n, {gate_id: value})


def tie_many(n: Netlist, ties: dict[int, int]) -> Netlist:
    sub = {}
    for gid, v in ties.items():
        if gid not in n.gates:
            raise NetlistError(f"unknown gate id {gid}")
        sub[n.gates[gid].output] = CONST1 if v else CONST0

    def rep(x):
        return sub.get(x, x)

    gates = {gid: Gate(gid, g.cell, tuple(rep(i) for i in g.inputs), g.output)
             for gid, g in n.gates.items() if gid not in ties}
    return replace(n, gates=gates, outputs=_remap_buses(n.outputs, rep),
                   obuses=_remap_buses(n.obuses, rep),
                   decision_gates=frozenset(g for g in n.decision_gates if g not in ties))


def _reduce(tt: int, ins: tuple[int, ...]):
    """Cofactor a cell function by its constant inputs and merge repeated nets.

    Returns ``(vars, reduced_tt)`` with irrelevant variables dropped.
    """
    vars_: list[int] = []
    pins = []
    for net in ins:
        if net == CONST0 or net == CONST1:
            pins.append((True, net))
        else:
            if net not in vars_:
                vars_.append(net)
            pins.append((False, vars_.index(net)))
    k = len(vars_)
    red = 0
    for m in range(1 << k):
        src = 0
        for p, (is_const, v) in enumerate(pins):
            bit = v if is_const else (m >> v) & 1
            src |= bit << p
        if (tt >> src) & 1:
            red |= 1 << m
    # drop variables the reduced function does not depend on
    j = 0
    while j < len(vars_):
        kk = len(vars_)
        depends = any(((red >> m) & 1) != ((red >> (m ^ (1 << j))) & 1) for m in range(1 << kk))
        if depends:
            j += 1
            continue
        new = 0
        for m in range(1 << (kk - 1)):
            lo = m & ((1 << j) - 1)
            hi = (m >> j) << (j + 1)
            if (red >> (lo | hi)) & 1:
                new |= 1 << m
        red = new
        del vars_[j]
    return vars_, red


def _symmetric(lib: CellLibrary) -> set[str]:
    from .cells import permute_tt
    import itertools

    out = set()
    for c in lib.cells.values():
        if c.arity > 1 and all(permute_tt(c.truth_table, c.arity, p) == c.truth_table
                               for p in itertools.permutations(range(c.arity))):
            out.add(c.name)
    return out


_SYM_CACHE: dict[str, set[str]] = {}


def _rewrite_pass(n: Netlist, lib: CellLibrary) -> Netlist:
    key = lib.digest()
    sym = _SYM_CACHE.get(key)
    if sym is None:
        sym = _SYM_CACHE[key] = _symmetric(lib)
    inv = lib.match(1, 0b01)
    inv_cell = inv[0] if inv else None

    sub: dict[int, int] = {}

    def rep(x):
        while x in sub:
            x = sub[x]
        return x

    new_gates: dict[int, Gate] = {}
    inv_src: dict[int, int] = {}  # output net of a surviving inverter -> its input
    strash: dict[tuple, int] = {}
    decision = set(n.decision_gates)

    for gid in levelize(n):
        g = n.gates[gid]
        cell = lib[g.cell]
        ins = tuple(rep(i) for i in g.inputs)
        vars_, red = _reduce(cell.truth_table, ins)
        k = len(vars_)
        new_cell, new_ins = g.cell, ins
        if k == 0:
            sub[g.output] = CONST1 if red & 1 else CONST0
            continue
        if k == 1 and red == 0b10:
            sub[g.output] = vars_[0]
            continue
        if k == 1 and red == 0b01 and vars_[0] in inv_src:
            sub[g.output] = inv_src[vars_[0]]
            continue
        changed = k < cell.arity or len(set(ins)) < len(ins) or CONST0 in ins or CONST1 in ins
        if changed:
            m = lib.match(k, red)
            if m is not None and lib[m[0]].area <= cell.area:
                new_cell = m[0]
                new_ins = tuple(vars_[p] for p in m[1])
        elif k == 1 and red == 0b01 and inv_cell and g.cell != inv_cell and lib[inv_cell].area <= cell.area:
            new_cell, new_ins = inv_cell, (vars_[0],)
        if new_cell in sym:
            new_ins = tuple(sorted(new_ins))
        skey = (new_cell, new_ins)
        if skey in strash:
            keep = strash[skey]
            sub[g.output] = new_gates[keep].output
            if gid in decision:
                decision.discard(gid)
                decision.add(keep)
            continue
        strash[skey] = gid
        new_gates[gid] = Gate(gid, new_cell, new_ins, g.output)
        if new_cell == inv_cell:
            inv_src[g.output] = new_ins[0]

    return replace(n, gates=new_gates, outputs=_remap_buses(n.outputs, rep),
                   obuses=_remap_buses(n.obuses, rep),
                   decision_gates=frozenset(d for d in decision if d in new_gates))


def sweep(n: Netlist) -> Netlist:
    """Dead-gate elimination: keep gates with a path to an output or tracked bus."""
    drv = n.drivers()
    live = set()
    stack = [x for x in n.root_nets() if x in drv]
    while stack:
        net = stack.pop()
        gid = drv[net]
        if gid in live:
            continue
        live.add(gid)
        stack.extend(i for i in n.gates[gid].inputs if i in drv)
    if len(live) == len(n.gates):
        return n
    gates = {gid: g for gid, g in n.gates.items() if gid in live}
    return replace(n, gates=gates, decision_gates=frozenset(d for d in n.decision_gates if d in live))


def structurally_equal(a: Netlist, b: Netlist) -> bool:
    return (a.gates == b.gates and a.outputs == b.outputs and a.inputs == b.inputs
            and a.obuses == b.obuses and a.decision_gates == b.decision_gates and a.kind == b.kind)


def optimize(n: Netlist, lib: CellLibrary | None = None, max_iter: int = 50) -> Netlist:
    """Constant propagation, identity rewrites, inverter-pair collapse, structural
    hashing and dead-gate elimination, repeated until nothing changes.

    Functionally equivalent on every primary input, never larger, idempotent.
    """
    lib = lib or default_library()
    for _ in range(max_iter):
        m = sweep(_rewrite_pass(n, lib))
        if structurally_equal(m, n):
            return m
        n = m
    return n


# --------------------------------------------------------------------------- JSON IO


def to_dict(n: Netlist) -> dict:
    return {
        "format": "bespoke-netlist",
        "version": FORMAT_VERSION,
        "name": n.name,
        "kind": n.kind,
        "inputs": {k: list(v) for k, v in n.inputs.items()},
        "outputs": {k: {"nets": list(b.nets), "signed": b.signed} for k, b in n.outputs.items()},
        "obuses": {k: {"nets": list(b.nets), "signed": b.signed} for k, b in n.obuses.items()},
        "gates": [[g.id, g.cell, list(g.inputs), g.output] for g in sorted(n.gates.values(), key=lambda g: g.id)],
        "decision_gates": sorted(n.decision_gates),
        "meta": n.meta,
    }


def from_dict(d: dict, source: str = "<dict>") -> Netlist:
    if d.get("format") != "bespoke-netlist":
        raise NetlistError(f"{source}: not a bespoke-netlist document")
    if d.get("version") != FORMAT_VERSION:
        raise NetlistError(f"{source}: unsupported format version {d.get('version')}")
    try:
        inputs = {k: tuple(int(x) for x in v) for k, v in d["inputs"].items()}
        outputs = {k: Bus(tuple(int(x) for x in b["nets"]), bool(b["signed"])) for k, b in d["outputs"].items()}
        obuses = {k: Bus(tuple(int(x) for x in b["nets"]), bool(b["signed"])) for k, b in d.get("obuses", {}).items()}
        gates = {}
        for i, (gid, cell, ins, out) in enumerate(d["gates"]):
            gid = int(gid)
            if gid in gates:
                raise NetlistError(f"{source}: gates[{i}]: duplicate gate id {gid}")
            gates[gid] = Gate(gid, str(cell), tuple(int(x) for x in ins), int(out))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, NetlistError):
            raise
        raise NetlistError(f"{source}: malformed netlist ({type(exc).__name__}: {exc})") from None
    n = Netlist(inputs, outputs, gates, d.get("name", "top"), d.get("kind"), obuses,
                frozenset(int(x) for x in d.get("decision_gates", [])), d.get("meta", {}))
    declared = n.nets()
    for g in gates.values():
        for x in g.inputs:
            if x not in declared:
                raise NetlistError(f"{source}: gate {g.id} references undeclared net {x}")
    for name, b in list(outputs.items()) + list(obuses.items()):
        for x in b.nets:
            if x not in declared:
                raise NetlistError(f"{source}: bus {name} references undeclared net {x}")
    return n


def save(n: Netlist, path) -> None:
    Path(path).write_text(json.dumps(to_dict(n), sort_keys=True, separators=(",", ":")) + "\n")


def load(path) -> Netlist:
    path = Path(path)
    text = path.read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetlistError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return from_dict(d, str(path))
