"""Flat structural HDL subset (Verilog-flavoured) writer and reader.

Grammar, one statement per line::

    // bespoke-hdl <version>
    // @meta {"name": ..., "kind": ..., "obuses": ..., "decision_gates": ..., "meta": ...}
    module NAME (PORT, PORT, ...);
      input [MSB:0] PORT;
      output [signed] [MSB:0] PORT;
      wire nID;
      assign nID = PORT[BIT];          // input bit -> net
      CELL gID (nOUT, nIN0, nIN1, ...); // positional: output first
      assign PORT[BIT] = nID | 1'b0 | 1'b1;
    endmodule

Nets are ``n<id>`` and instances ``g<id>`` so ids survive a round trip.
Anything after ``//`` is a comment except the ``@meta`` line.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from .netlist import CONST0, CONST1, FORMAT_VERSION, Netlist, NetlistError, from_dict

HEADER = "// bespoke-hdl"
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


def _net(x: int) -> str:
    if x == CONST0:
        return "1'b0"
    if x == CONST1:
        return "1'b1"
    return f"n{x}"


def dumps_hdl(n: Netlist) -> str:
    for name in list(n.inputs) + list(n.outputs):
        if not _IDENT.match(name):
            raise NetlistError(f"bus name {name!r} is not a plain HDL identifier")
    module = re.sub(r"\W", "_", n.name)
    if not _IDENT.match(module):
        module = "m_" + module
    meta = {"name": n.name, "kind": n.kind, "decision_gates": sorted(n.decision_gates), "meta": n.meta,
            "obuses": {k: {"nets": list(b.nets), "signed": b.signed} for k, b in n.obuses.items()}}
    lines = [f"{HEADER} {FORMAT_VERSION}", "// @meta " + json.dumps(meta, sort_keys=True, separators=(",", ":"))]
    ports = list(n.inputs) + list(n.outputs)
    lines.append(f"module {module} ({', '.join(ports)});")
    for name, bits in n.inputs.items():
        lines.append(f"  input [{len(bits) - 1}:0] {name};")
    for name, bus in n.outputs.items():
        sign = "signed " if bus.signed else ""
        lines.append(f"  output {sign}[{bus.width - 1}:0] {name};")
    for x in sorted(n.nets() - {CONST0, CONST1}):
        lines.append(f"  wire n{x};")
    for name, bits in n.inputs.items():
        for k, x in enumerate(bits):
            lines.append(f"  assign n{x} = {name}[{k}];")
    for g in sorted(n.gates.values(), key=lambda g: g.id):
        pins = ", ".join(_net(x) for x in (g.output, *g.inputs))
        lines.append(f"  {g.cell} g{g.id} ({pins});")
    for name, bus in n.outputs.items():
        for k, x in enumerate(bus.nets):
            lines.append(f"  assign {name}[{k}] = {_net(x)};")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def export_hdl(n: Netlist, path) -> None:
    Path(path).write_text(dumps_hdl(n))


_PORT_DECL = re.compile(r"(input|output)\s+(signed\s+)?\[(\d+):0\]\s+(\w+)$")
_WIRE = re.compile(r"wire\s+n(\d+)$")
_ASSIGN_IN = re.compile(r"assign\s+n(\d+)\s*=\s*(\w+)\[(\d+)\]$")
_ASSIGN_OUT = re.compile(r"assign\s+(\w+)\[(\d+)\]\s*=\s*(n\d+|1'b[01])$")
_INST = re.compile(r"(\w+)\s+g(\d+)\s*\(([^)]*)\)$")
_MODULE = re.compile(r"module\s+(\w+)\s*\(([^)]*)\)$")


def loads_hdl(text: str, source: str = "<hdl>") -> Netlist:
    """Parse the subset written by :func:`dumps_hdl`; errors carry ``line:col``."""

    def fail(lineno, col, msg):
        raise NetlistError(f"{source}:{lineno}:{col}: {msg}")

    def net(tok, lineno, col):
        if tok == "1'b0":
            return CONST0
        if tok == "1'b1":
            return CONST1
        if re.fullmatch(r"n\d+", tok):
            x = int(tok[1:])
            if x not in wires:
                fail(lineno, col, f"undeclared net {tok}")
            return x
        fail(lineno, col, f"bad net reference {tok!r}")

    lines = text.splitlines()
    if not lines or not lines[0].startswith(HEADER):
        fail(1, 1, f"missing '{HEADER} <version>' header")
    version = lines[0][len(HEADER):].strip()
    if version != str(FORMAT_VERSION):
        fail(1, len(HEADER) + 2, f"unsupported format version {version!r}")
    meta = {}
    name = None
    ports: list[str] = []
    widths: dict[str, int] = {}
    in_order: list[str] = []
    out_signed: dict[str, bool] = {}
    wires: set[int] = set()
    in_bits: dict[str, dict[int, int]] = {}
    out_bits: dict[str, dict[int, int]] = {}
    gates = []
    ended = False
    for lineno, raw in enumerate(lines[1:], start=2):
        stripped = raw.strip()
        col = len(raw) - len(raw.lstrip()) + 1
        if stripped.startswith("// @meta "):
            try:
                meta = json.loads(stripped[len("// @meta "):])
            except json.JSONDecodeError as exc:
                fail(lineno, col + len("// @meta ") + exc.pos, f"bad @meta JSON: {exc.msg}")
            continue
        stmt = stripped.split("//", 1)[0].strip()
        if not stmt:
            continue
        if ended:
            fail(lineno, col, "text after endmodule")
        if stmt == "endmodule":
            ended = True
            continue
        if not stmt.endswith(";"):
            fail(lineno, col + len(stmt), "expected ';'")
        stmt = stmt[:-1].strip()
        if name is None:
            m = _MODULE.match(stmt)
            if not m:
                fail(lineno, col, "expected 'module NAME (...)'")
            name = m.group(1)
            ports = [p.strip() for p in m.group(2).split(",") if p.strip()]
            continue
        if m := _PORT_DECL.match(stmt):
            direction, signed, msb, port = m.groups()
            if port not in ports:
                fail(lineno, col, f"{port} is not in the module port list")
            if port in widths:
                fail(lineno, col, f"port {port} declared twice")
            widths[port] = int(msb) + 1
            if direction == "input":
                in_order.append(port)
                in_bits[port] = {}
            else:
                out_signed[port] = bool(signed)
                out_bits[port] = {}
        elif m := _WIRE.match(stmt):
            wires.add(int(m.group(1)))
        elif m := _ASSIGN_IN.match(stmt):
            x, port, k = int(m.group(1)), m.group(2), int(m.group(3))
            if port not in in_bits:
                fail(lineno, col, f"{port} is not a declared input")
            if x not in wires:
                fail(lineno, col, f"undeclared net n{x}")
            if not k < widths[port]:
                fail(lineno, col, f"bit {k} out of range for {port}")
            in_bits[port][k] = x
        elif m := _ASSIGN_OUT.match(stmt):
            port, k, tok = m.group(1), int(m.group(2)), m.group(3)
            if port not in out_bits:
                fail(lineno, col, f"{port} is not a declared output")
            if not k < widths[port]:
                fail(lineno, col, f"bit {k} out of range for {port}")
            out_bits[port][k] = net(tok, lineno, raw.index(tok) + 1)
        elif m := _INST.match(stmt):
            cell, gid = m.group(1), int(m.group(2))
            pins = [p.strip() for p in m.group(3).split(",")]
            ids = [net(p, lineno, raw.find(p) + 1) for p in pins]
            if len(ids) < 2:
                fail(lineno, col, f"instance g{gid} needs an output and at least one input")
            gates.append([gid, cell, ids[1:], ids[0]])
        else:
            fail(lineno, col, f"unrecognised statement {stmt.split()[0]!r}")
    if name is None:
        fail(len(lines), 1, "no module found")
    if not ended:
        fail(len(lines), 1, "missing endmodule")
    for port in ports:
        if port not in widths:
            fail(len(lines), 1, f"port {port} has no direction declaration")

    def collect(bits, port):
        missing = [k for k in range(widths[port]) if k not in bits]
        if missing:
            fail(len(lines), 1, f"{port}[{missing[0]}] is never assigned")
        return [bits[k] for k in range(widths[port])]

    d = {
        "format": "bespoke-netlist", "version": FORMAT_VERSION, "name": meta.get("name", name), "kind": meta.get("kind"),
        "inputs": {p: collect(in_bits[p], p) for p in in_order},
        "outputs": {p: {"nets": collect(out_bits[p], p), "signed": out_signed[p]} for p in out_bits},
        "obuses": meta.get("obuses", {}), "gates": gates,
        "decision_gates": meta.get("decision_gates", []), "meta": meta.get("meta", {}),
    }
    return from_dict(d, source)


def import_hdl(path) -> Netlist:
    path = Path(path)
    return loads_hdl(path.read_text(), str(path))
