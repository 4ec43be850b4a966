"""Bespoke circuit generators.

Datapaths are built from ripple-carry adders over canonical-signed-digit shift-add
constant multipliers, then cleaned up by :func:`bespoke_approx.netlist.optimize`.
The generators fold constants locally while building so that intermediate
netlists stay small; the optimizer owns everything else.

Bus naming: model inputs are ``x0..x{d-1}`` (``u`` unsigned bits each),
classifier outputs are ``class`` and regressor outputs ``y``. Classifier
argmax inputs are tracked as ``O0..O{k-1}`` (class index order).
"""

from __future__ import annotations

import json
import logging
import math
import os
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path

from .cells import CellLibrary, default_library
from .model import QuantizedModel
from .netlist import CONST0, CONST1, Netlist, NetlistBuilder, area, optimize

log = logging.getLogger(__name__)


@dataclass
class Word:
    bits: list[int]
    signed: bool = True

    def ext(self, width: int) -> list[int]:
        if len(self.bits) >= width:
            return list(self.bits[:width])
        if not self.bits:
            return [CONST0] * width
        pad = self.bits[-1] if self.signed else CONST0
        return list(self.bits) + [pad] * (width - len(self.bits))


# --------------------------------------------------------------------------- gate helpers


def _not(b: NetlistBuilder, x: int) -> int:
    if x == CONST0:
        return CONST1
    if x == CONST1:
        return CONST0
    return b.gate("INV", x)


def _and(b, x, y):
    if CONST0 in (x, y):
        return CONST0
    if x == CONST1:
        return y
    if y == CONST1 or x == y:
        return x
    return b.gate("AND2", x, y)


def _or(b, x, y):
    if CONST1 in (x, y):
        return CONST1
    if x == CONST0:
        return y
    if y == CONST0 or x == y:
        return x
    return b.gate("OR2", x, y)


def _xor(b, x, y):
    if x == CONST0:
        return y
    if y == CONST0:
        return x
    if x == CONST1:
        return _not(b, y)
    if y == CONST1:
        return _not(b, x)
    if x == y:
        return CONST0
    return b.gate("XOR2", x, y)


def _mux(b, a, c, s):
    """``c if s else a``."""
    if s == CONST0 or a == c:
        return a
    if s == CONST1:
        return c
    if a == CONST0 and c == CONST1:
        return s
    if a == CONST1 and c == CONST0:
        return _not(b, s)
    return b.gate("MUX2", a, c, s)


def full_adder(b, x, y, cin):
    p = _xor(b, x, y)
    s = _xor(b, p, cin)
    cout = _or(b, _and(b, x, y), _and(b, p, cin))
    return s, cout


def add(b: NetlistBuilder, x: Word, y: Word, width: int, subtract: bool = False) -> Word:
    """Two's-complement ``x + y`` (or ``x - y``) truncated to ``width`` bits."""
    xs = x.ext(width)
    ys = y.ext(width)
    carry = CONST0
    if subtract:
        ys = [_not(b, v) for v in ys]
        carry = CONST1
    out = []
    for xi, yi in zip(xs, ys):
        s, carry = full_adder(b, xi, yi, carry)
        out.append(s)
    return Word(out, True)


def const_word(value: int, width: int | None = None) -> Word:
    width = width or signed_bits(value, value)
    return Word([CONST1 if (value >> k) & 1 else CONST0 for k in range(width)], True)


def signed_bits(lo: int, hi: int) -> int:
    """Bits of a two's-complement word holding every value in ``[lo, hi]``."""
    n = 1
    while not (-(1 << (n - 1)) <= lo and hi <= (1 << (n - 1)) - 1):
        n += 1
    return n


# --------------------------------------------------------------------------- multipliers


def csd_digits(w: int) -> list[tuple[int, int]]:
    """Canonical signed digits of ``w`` as ``(position, +1 | -1)``, LSB first."""
    out = []
    k = 0
    while w:
        if w & 1:
            d = 2 - (w % 4)
            out.append((k, d))
            w -= d
        w //= 2
        k += 1
    return out


def mult_const(b: NetlistBuilder, x: Word, w: int, width: int) -> Word:
    """Shift-add product ``x * w`` with ``w`` hardwired, ``width`` output bits."""
    digits = csd_digits(w)
    if not digits:
        return Word([CONST0] * width, True)
    pos = sorted((k for k, d in digits if d > 0), reverse=True)
    neg = sorted((k for k, d in digits if d < 0), reverse=True)

    def term(k):
        return Word([CONST0] * k + list(x.ext(len(x.bits))), x.signed)

    if pos:
        acc = Word(term(pos[0]).bits, x.signed)
        rest_pos = pos[1:]
    else:
        acc = add(b, Word([CONST0], True), term(neg[0]), width, subtract=True)
        neg = neg[1:]
        rest_pos = []
    for k in rest_pos:
        acc = add(b, acc, term(k), width)
    for k in neg:
        acc = add(b, acc, term(k), width, subtract=True)
    return Word(acc.ext(width), True)


def gen_mult_const(w: int, u: int, lib: CellLibrary | None = None, c: int = 8) -> Netlist:
    """Bespoke multiplier: unsigned ``u``-bit input ``x``, signed ``u + c``-bit product ``p``."""
    if not -(1 << (c - 1)) <= w <= (1 << (c - 1)) - 1:
        raise ValueError(f"coefficient {w} outside signed {c}-bit range")
    b = NetlistBuilder(f"bm_{w}_u{u}")
    x = Word(b.input("x", u), False)
    p = mult_const(b, x, w, u + c)
    b.output("p", p.bits, signed=True)
    return optimize(b.build(meta={"w": w, "u": u, "c": c}), lib)


def gen_mult_generic(u: int, c: int = 8, lib: CellLibrary | None = None) -> Netlist:
    """Conventional array multiplier: unsigned ``x`` (u bits) times signed ``w`` (c bits)."""
    b = NetlistBuilder(f"mult_{u}x{c}")
    x = b.input("x", u)
    w = b.input("w", c)
    width = u + c
    acc = None
    for i, xi in enumerate(x):
        pp = Word([CONST0] * i + [_and(b, xi, wj) for wj in w], True)
        if i == 0:
            acc = pp
        else:
            acc = add(b, acc, pp, width)
    b.output("p", acc.ext(width), signed=True)
    return optimize(b.build(), lib)


# --------------------------------------------------------------------------- area table cache


def _cache_dir() -> Path:
    env = os.environ.get("BESPOKE_APPROX_CACHE")
    return Path(env) if env else Path.home() / ".cache" / "bespoke_approx"


_MEM: dict[tuple, dict[int, float]] = {}
_LOCK = threading.Lock()


def _table_key(u: int, c: int, lib: CellLibrary):
    return (u, c, lib.digest())


def _cache_file(key) -> Path:
    u, c, digest = key
    return _cache_dir() / f"bm_u{u}_c{c}_{digest}.json"


def _load_table(key) -> dict[int, float]:
    with _LOCK:
        if key in _MEM:
            return _MEM[key]
        table: dict[int, float] = {}
        f = _cache_file(key)
        if f.exists():
            try:
                table = {int(k): float(v) for k, v in json.loads(f.read_text()).items()}
            except (OSError, ValueError):
                log.warning("ignoring unreadable area cache %s", f)
        _MEM[key] = table
        return table


def _publish(key, table: dict[int, float]) -> None:
    f = _cache_file(key)
    try:
        f.parent.mkdir(parents=True, exist_ok=True)
        merged = dict(table)
        if f.exists():
            try:
                merged.update({int(k): float(v) for k, v in json.loads(f.read_text()).items()})
            except (OSError, ValueError):
                pass
        fd, tmp = tempfile.mkstemp(dir=f.parent, prefix=f.name, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump({str(k): merged[k] for k in sorted(merged)}, fh)
        os.replace(tmp, f)
    except OSError as exc:
        log.warning("could not write area cache %s: %s", f, exc)


def area_bm(w: int, u: int, lib: CellLibrary | None = None, c: int = 8) -> float:
    """Area of the optimized bespoke multiplier for coefficient ``w``; memoized on disk."""
    lib = lib or default_library()
    key = _table_key(u, c, lib)
    table = _load_table(key)
    if w not in table:
        value = area(gen_mult_const(w, u, lib, c), lib).total_area
        with _LOCK:
            table[w] = value
        _publish(key, table)
    return table[w]


def area_table(u: int, c: int = 8, lib: CellLibrary | None = None) -> list[tuple[int, float]]:
    """``(w, area_bm(w, u))`` for every signed ``c``-bit coefficient."""
    lib = lib or default_library()
    key = _table_key(u, c, lib)
    table = _load_table(key)
    lo, hi = -(1 << (c - 1)), (1 << (c - 1)) - 1
    missing = [w for w in range(lo, hi + 1) if w not in table]
    if missing:
        for w in missing:
            value = area(gen_mult_const(w, u, lib, c), lib).total_area
            with _LOCK:
                table[w] = value
        _publish(key, table)
    return [(w, table[w]) for w in range(lo, hi + 1)]


def format_area_table(rows) -> str:
    lines = [f"{'w':>6} {'area':>10}"]
    lines += [f"{w:>6d} {a:>10.2f}" for w, a in rows]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- weighted sums


@dataclass(frozen=True)
class WeightedSumSpec:
    weights: tuple[int, ...]
    intercept: int = 0
    u: int = 4
    c: int = 8

    def __post_init__(self):
        if len(self.weights) < 1:
            raise ValueError("a weighted sum needs at least one coefficient")

    def width(self) -> int:
        n = len(self.weights)
        umax = (1 << self.u) - 1
        lo = sum(min(w, 0) for w in self.weights) * umax + self.intercept
        hi = sum(max(w, 0) for w in self.weights) * umax + self.intercept
        formula = self.u + self.c + math.ceil(math.log2(n)) + 1
        return max(formula, signed_bits(lo, hi))


def weighted_sum(b: NetlistBuilder, xs: list[Word], spec: WeightedSumSpec) -> Word:
    """Bespoke multipliers feeding a balanced ripple-carry adder tree."""
    width = spec.width()
    leaves = [mult_const(b, x, w, spec.u + spec.c) for x, w in zip(xs, spec.weights)]
    if spec.intercept:
        leaves.append(const_word(spec.intercept))
    while len(leaves) > 1:
        nxt = []
        for i in range(0, len(leaves) - 1, 2):
            L, R = leaves[i], leaves[i + 1]
            nxt.append(add(b, L, R, min(max(len(L.bits), len(R.bits)) + 1, width)))
        if len(leaves) % 2:
            nxt.append(leaves[-1])
        leaves = nxt
    return Word(leaves[0].ext(width), True)


def gen_weighted_sum(spec: WeightedSumSpec, lib: CellLibrary | None = None) -> Netlist:
    b = NetlistBuilder("wsum")
    xs = [Word(b.input(f"x{i}", spec.u), False) for i in range(len(spec.weights))]
    s = weighted_sum(b, xs, spec)
    b.output("s", s.bits, signed=True)
    return optimize(b.build(meta={"weights": list(spec.weights), "intercept": spec.intercept}), lib)


# --------------------------------------------------------------------------- decision logic


def index_bits(k: int) -> int:
    return max(1, math.ceil(math.log2(k)))


def argmax_tree(b: NetlistBuilder, words: list[Word]) -> list[int]:
    """Comparator tree; on equal values the lower index wins. Gates are recorded
    in the builder's decision set."""
    k = len(words)
    nb = index_bits(k)
    prev = b.recording
    b.recording = set()
    width = max(len(w.bits) for w in words)
    signed = words[0].signed
    nodes = [(Word(w.ext(width), signed), const_word(i, nb + 1).bits[:nb]) for i, w in enumerate(words)]
    while len(nodes) > 1:
        nxt = []
        for i in range(0, len(nodes) - 1, 2):
            (lv, li), (rv, ri) = nodes[i], nodes[i + 1]
            diff = add(b, lv, rv, width + 1, subtract=True)
            take_right = diff.bits[width]  # left < right
            val = Word([_mux(b, a, c, take_right) for a, c in zip(lv.bits, rv.bits)], signed)
            idx = [_mux(b, a, c, take_right) for a, c in zip(li, ri)]
            nxt.append((val, idx))
        if len(nodes) % 2:
            nxt.append(nodes[-1])
        nodes = nxt
    b.decision |= b.recording
    b.recording = prev
    return nodes[0][1]


def gen_argmax(k: int, width: int, signed: bool = True, lib: CellLibrary | None = None) -> Netlist:
    if k < 2:
        raise ValueError("argmax needs at least two inputs")
    b = NetlistBuilder(f"argmax{k}")
    words = [Word(b.input(f"v{i}", width), signed) for i in range(k)]
    b.output("index", argmax_tree(b, words))
    return optimize(b.build(), lib)


def popcount(b: NetlistBuilder, bits: list[int], width: int) -> Word:
    leaves = [Word([x], False) for x in bits]
    if not leaves:
        return Word([CONST0] * width, False)
    while len(leaves) > 1:
        nxt = []
        for i in range(0, len(leaves) - 1, 2):
            L, R = leaves[i], leaves[i + 1]
            w = min(max(len(L.bits), len(R.bits)) + 1, width)
            s = add(b, L, R, w)
            nxt.append(Word(s.bits, False))
        if len(leaves) % 2:
            nxt.append(leaves[-1])
        leaves = nxt
    return Word(leaves[0].ext(width), False)


# --------------------------------------------------------------------------- model circuits


def vote_bits(k: int) -> int:
    return math.ceil(math.log2(k)) + 1


def _relu_requant(b: NetlistBuilder, s: Word, shift: int, h: int) -> Word:
    nz = _not(b, s.bits[-1])
    mag = [_and(b, x, nz) for x in s.bits[:-1]]
    shifted = mag[shift:]
    low = shifted[:h] + [CONST0] * max(0, h - len(shifted))
    ov = CONST0
    for x in shifted[h:]:
        ov = _or(b, ov, x)
    return Word([_or(b, x, ov) for x in low], False)


def gen_model_circuit(q: QuantizedModel, lib: CellLibrary | None = None, do_optimize: bool = True) -> Netlist:
    """Fully parallel bespoke circuit for a quantized model."""
    lib = lib or default_library()
    for cell in ("INV", "AND2", "OR2", "XOR2", "MUX2"):
        if cell not in lib:
            raise ValueError(f"library {lib.name} lacks cell {cell} required by the generators")
    b = NetlistBuilder(f"{q.kind.lower()}")
    spec = q.spec
    vals = [Word(b.input(f"x{i}", spec.u), False) for i in range(q.n_features)]
    sums: list[Word] = []
    for li, layer in enumerate(q.layers):
        u = q.layer_input_bits(li)
        sums = [weighted_sum(b, vals, WeightedSumSpec(tuple(row), bias, u, spec.c))
                for row, bias in zip(layer.weights, layer.intercepts)]
        if layer.activation == "relu":
            vals = [_relu_requant(b, s, layer.shift, spec.h) for s in sums]
        else:
            vals = sums
    if q.kind == "MLP-C":
        for i, s in enumerate(sums):
            b.obus(f"O{i}", s.bits, signed=True)
        b.output("class", argmax_tree(b, sums))
    elif q.kind == "SVM-C":
        k = q.n_classes
        ballots: list[list[int]] = [[] for _ in range(k)]
        for (i, j), s in zip(q.pairs, sums):
            sign = s.bits[-1]
            ballots[i].append(_not(b, sign))
            ballots[j].append(sign)
        counts = [popcount(b, ballots[c], vote_bits(k)) for c in range(k)]
        for c, w in enumerate(counts):
            b.obus(f"O{c}", w.bits, signed=False)
        b.output("class", argmax_tree(b, counts))
    else:
        b.output("y", sums[0].bits, signed=True)
    n = b.build(kind=q.kind, meta={"kind": q.kind, "spec": {"u": spec.u, "c": spec.c, "h": spec.h}})
    return optimize(n, lib) if do_optimize else n
