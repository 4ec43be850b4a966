"""Cell library: named boolean cells with area, pin capacitance and leakage.

Truth tables are stored as integers. Bit ``m`` of the table is the output for the
input minterm ``m = sum(in_k << k)``, so input 0 is the least significant select.
For ``MUX2`` the pins are ``(A, B, S)`` and the output is ``B if S else A``.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

REQUIRED_CELLS = ("INV", "NAND2", "NOR2", "AND2", "OR2", "XOR2", "XNOR2", "MUX2")


class LibraryError(ValueError):
    pass


@dataclass(frozen=True)
class Cell:
    name: str
    arity: int
    truth_table: int
    area: float
    input_cap: float = 0.0
    leakage: float = 0.0

    def evaluate(self, *bits: int) -> int:
        m = 0
        for k, b in enumerate(bits):
            m |= (b & 1) << k
        return (self.truth_table >> m) & 1


def _tt(arity: int, fn) -> int:
    t = 0
    for m in range(1 << arity):
        bits = [(m >> k) & 1 for k in range(arity)]
        if fn(*bits):
            t |= 1 << m
    return t


def permute_tt(tt: int, arity: int, perm: tuple[int, ...]) -> int:
    """Truth table of ``f(x[perm[0]], x[perm[1]], ...)`` as a function of ``x``."""
    out = 0
    for m in range(1 << arity):
        src = 0
        for k in range(arity):
            src |= ((m >> perm[k]) & 1) << k
        if (tt >> src) & 1:
            out |= 1 << m
    return out


@dataclass
class CellLibrary:
    cells: dict[str, Cell]
    name: str = "default"
    _match: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        problems = check_library(self)
        if problems:
            raise LibraryError("; ".join(problems))
        # (arity, truth table) -> cheapest (cell, permutation) realising it
        for cell in sorted(self.cells.values(), key=lambda c: (c.area, c.name)):
            for perm in itertools.permutations(range(cell.arity)):
                key = (cell.arity, permute_tt(cell.truth_table, cell.arity, perm))
                self._match.setdefault(key, (cell.name, perm))

    def __getitem__(self, name: str) -> Cell:
        return self.cells[name]

    def __contains__(self, name: str) -> bool:
        return name in self.cells

    def match(self, arity: int, tt: int):
        """Cheapest ``(cell_name, perm)`` computing ``tt`` over ``arity`` inputs.

        The cell's pin ``k`` is wired to variable ``perm[k]``.
        """
        return self._match.get((arity, tt))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "cells": [
                {
                    "name": c.name,
                    "arity": c.arity,
                    "truth_table": [(c.truth_table >> m) & 1 for m in range(1 << c.arity)],
                    "area": c.area,
                    "input_cap": c.input_cap,
                    "leakage": c.leakage,
                }
                for c in self.cells.values()
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CellLibrary":
        cells = {}
        for i, c in enumerate(d["cells"]):
            try:
                bits = c["truth_table"]
                tt = sum((int(b) & 1) << m for m, b in enumerate(bits))
                cell = Cell(str(c["name"]), int(c["arity"]), tt, float(c["area"]),
                            float(c.get("input_cap", 0.0)), float(c.get("leakage", 0.0)))
            except (KeyError, TypeError, ValueError) as exc:
                raise LibraryError(f"cell #{i}: malformed entry ({exc})") from None
            if len(bits) != 1 << cell.arity:
                raise LibraryError(f"cell {cell.name}: truth table length {len(bits)} != 2^{cell.arity}")
            if cell.name in cells:
                raise LibraryError(f"duplicate cell name {cell.name}")
            cells[cell.name] = cell
        return cls(cells, name=d.get("name", "custom"))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def check_library(lib: CellLibrary) -> list[str]:
    problems = []
    for name in REQUIRED_CELLS:
        if name not in lib.cells:
            problems.append(f"missing required cell {name}")
    for name, c in lib.cells.items():
        if name != c.name:
            problems.append(f"cell key {name} != name {c.name}")
        if not 1 <= c.arity <= 3:
            problems.append(f"cell {name}: arity {c.arity} outside 1..3")
        if c.truth_table >> (1 << c.arity):
            problems.append(f"cell {name}: truth table wider than 2^{c.arity}")
        if c.area <= 0:
            problems.append(f"cell {name}: area must be > 0")
        if c.input_cap < 0 or c.leakage < 0:
            problems.append(f"cell {name}: negative capacitance or leakage")
    return problems


# relative areas; caps and leakage scale with area
_DEFAULT_AREAS = {
    "INV": 1.0,
    "NAND2": 1.5,
    "NOR2": 1.5,
    "AND2": 2.0,
    "OR2": 2.0,
    "XOR2": 3.0,
    "XNOR2": 3.0,
    "MUX2": 3.5,
}
CAP_PER_AREA = 0.5
LEAKAGE_PER_AREA = 0.01

_DEFAULT_FUNCS = {
    "INV": (1, lambda a: not a),
    "NAND2": (2, lambda a, b: not (a and b)),
    "NOR2": (2, lambda a, b: not (a or b)),
    "AND2": (2, lambda a, b: a and b),
    "OR2": (2, lambda a, b: a or b),
    "XOR2": (2, lambda a, b: a != b),
    "XNOR2": (2, lambda a, b: a == b),
    "MUX2": (3, lambda a, b, s: b if s else a),
}


def default_library() -> CellLibrary:
    cells = {}
    for name, (arity, fn) in _DEFAULT_FUNCS.items():
        area = _DEFAULT_AREAS[name]
        cells[name] = Cell(name, arity, _tt(arity, fn), area,
                           input_cap=CAP_PER_AREA * area / arity,
                           leakage=LEAKAGE_PER_AREA * area)
    return CellLibrary(cells, name="default")


def load_library(path) -> CellLibrary:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"cell library not found: {path}")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise LibraryError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return CellLibrary.from_dict(d)


def save_library(lib: CellLibrary, path) -> None:
    Path(path).write_text(json.dumps(lib.to_dict(), indent=1) + "\n")
