"""Hardware-driven coefficient approximation.

Each coefficient ``w`` may be replaced by the cheapest multiplier constant in
``[w, w+e]`` (``minus``, error ``w - w~ <= 0``) or in ``[w-e, w]`` (``plus``,
error ``>= 0``). Per weighted sum, one of the two is chosen for every coefficient
so that the signed error sum is as close to zero as possible, then the summed
multiplier area is minimal.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .cells import CellLibrary, default_library
from .model import QuantizedModel, QuantLayer
from .synth import area_bm


@dataclass(frozen=True)
class CandidatePair:
    index: int
    w: int
    minus: int
    plus: int
    area_minus: float
    area_plus: float
    area_w: float

    @property
    def options(self) -> tuple[tuple[int, float], ...]:
        """``(replacement, area)`` choices; a single entry when both sides agree."""
        if self.minus == self.plus:
            return ((self.minus, self.area_minus),)
        return ((self.minus, self.area_minus), (self.plus, self.area_plus))


@dataclass(frozen=True)
class CoeffSelection:
    weights: tuple[int, ...]
    error_sum: int
    area: float


def _best_in(lo: int, hi: int, w: int, cost) -> tuple[int, float]:
    best = None
    for v in range(lo, hi + 1):
        key = (cost(v), abs(v - w), abs(v))
        if best is None or key < best[0]:
            best = (key, v)
    return best[1], best[0][0]


def build_candidates(weights, e: int, u: int, lib: CellLibrary | None = None, c: int = 8) -> list[CandidatePair]:
    if e < 0:
        raise ValueError("threshold e must be >= 0")
    lib = lib or default_library()
    wmin, wmax = -(1 << (c - 1)), (1 << (c - 1)) - 1

    def cost(v):
        return area_bm(v, u, lib, c)

    out = []
    for i, w in enumerate(weights):
        w = int(w)
        minus, a_minus = _best_in(w, min(w + e, wmax), w, cost)
        plus, a_plus = _best_in(max(w - e, wmin), w, w, cost)
        out.append(CandidatePair(i, w, minus, plus, a_minus, a_plus, cost(w)))
    return out


def select_config(pairs: list[CandidatePair]) -> CoeffSelection:
    """Exact minimiser of ``(|sum(w - w~)|, sum(area))`` via a DP over error sums.

    Remaining ties go to the smaller signed error sum, then to the choice vector
    that prefers the ``minus`` candidate earliest.
    """
    if not pairs:
        raise ValueError("select_config needs at least one coefficient")
    # error sum -> (area, choice vector)
    states: dict[int, tuple[float, tuple[int, ...]]] = {0: (0.0, ())}
    for p in pairs:
        nxt: dict[int, tuple[float, tuple[int, ...]]] = {}
        for err, (a, ch) in states.items():
            for k, (v, av) in enumerate(p.options):
                key = err + (p.w - v)
                cand = (a + av, ch + (k,))
                if key not in nxt or cand < nxt[key]:
                    nxt[key] = cand
        states = nxt
    err = min(states, key=lambda s: (abs(s), states[s][0], s, states[s][1]))
    a, ch = states[err]
    weights = tuple(p.options[k][0] for p, k in zip(pairs, ch))
    return CoeffSelection(weights, err, a)


def approximate_weights(weights, e: int, u: int, lib: CellLibrary | None = None, c: int = 8) -> CoeffSelection:
    return select_config(build_candidates(weights, e, u, lib, c))


def approximate_model(q: QuantizedModel, e: int = 4, lib: CellLibrary | None = None) -> QuantizedModel:
    """Approximate the coefficients of every neuron or 1-vs-1 classifier independently.

    Intercepts, shifts and scales are untouched.
    """
    lib = lib or default_library()
    layers = []
    sums = []
    for li, layer in enumerate(q.layers):
        u = q.layer_input_bits(li)
        rows = []
        for j, row in enumerate(layer.weights):
            before = sum(area_bm(w, u, lib, q.spec.c) for w in row)
            if e == 0:
                sel = CoeffSelection(tuple(row), 0, before)
            else:
                sel = approximate_weights(row, e, u, lib, q.spec.c)
            rows.append(sel.weights)
            sums.append({"layer": li, "sum": j, "error_sum": sel.error_sum,
                         "proxy_area_before": before, "proxy_area_after": sel.area})
        layers.append(QuantLayer(tuple(rows), layer.intercepts, layer.activation, layer.shift))
    prov = dict(q.provenance)
    prov["coeff_approx"] = {"e": e, "library": lib.digest(), "sums": sums}
    return replace(q, layers=tuple(layers), provenance=prov)


def window_reduction(table: dict[int, float], w: int, e: int, c: int = 8) -> float:
    """Relative area saved by the cheapest coefficient in ``[w-e, w+e]`` (clipped)."""
    lo, hi = max(w - e, -(1 << (c - 1))), min(w + e, (1 << (c - 1)) - 1)
    base = table[w]
    if base <= 0:
        return 0.0
    best = min(table[v] for v in range(lo, hi + 1))
    return (base - best) / base
