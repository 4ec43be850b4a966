"""Full-search design-space exploration over pruning thresholds and Pareto extraction.

For every ``tau_c`` in the grid the candidate gates are fixed once; only the
distinct ``phi`` values among them are worth sweeping as ``phi_c``. Each distinct
pruned-gate set is synthesized once and scored by simulating the test split.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np

from . import netlist as nl
from .cells import CellLibrary, default_library
from .coeff_approx import approximate_model
from .model import QuantizedModel, accuracy
from .prune import PruneCandidate, apply_prune, candidates, phi_values, select
from .sim import power, profile, simulate
from .synth import gen_model_circuit

STAGES = ("exact", "coeff_only", "prune_only", "cross")
CSV_COLUMNS = ("stage", "e", "tau_c", "phi_c", "accuracy", "area", "normalized_area",
               "power", "normalized_power", "gates", "netlist_path")


def default_tau_grid() -> list[float]:
    return [p / 100 for p in range(80, 100)]


@dataclass(frozen=True)
class DesignPoint:
    stage: str
    e: int | None
    tau_c: float | None
    phi_c: int | None
    accuracy: float
    area: float
    normalized_area: float
    power: float
    normalized_power: float
    gates: int
    pruned: int = 0
    netlist_path: str = ""

    def config_key(self) -> tuple:
        return (STAGES.index(self.stage), -1 if self.e is None else self.e,
                -1.0 if self.tau_c is None else self.tau_c, -2 if self.phi_c is None else self.phi_c)


@dataclass
class Stimulus:
    """Integer input matrices and labels for profiling and scoring."""

    train_X: np.ndarray
    test_X: np.ndarray
    test_y: np.ndarray
    train_y: np.ndarray | None = None
    profile_on: str = "train"

    def vectors(self, which: str) -> dict[str, np.ndarray]:
        X = self.train_X if which == "train" else self.test_X
        return {f"x{i}": X[:, i] for i in range(X.shape[1])}


def make_scorer(q: QuantizedModel, labels: np.ndarray) -> Callable[[dict], float]:
    key = "class" if q.is_classifier else "y"

    def score(outputs: dict) -> float:
        return accuracy(q, outputs[key], labels)

    return score


def _measure(n: nl.Netlist, test_vec, scorer, lib):
    out = simulate(n, test_vec, lib)
    acc = scorer(out)
    ar = nl.area(n, lib)
    pw = power(n, profile(n, test_vec, lib), lib).total
    return acc, ar.total_area, pw, ar.gate_count


# work item for the process pool: everything needed to evaluate one config
def _evaluate(args):
    n, chosen, info, test_vec, q, labels, lib = args
    pruned = apply_prune(n, chosen, lib, info)
    return _measure(pruned, test_vec, make_scorer(q, labels), lib)


@dataclass
class Exploration:
    """Points of one run plus what is needed to rebuild any point's netlist."""

    points: list[DesignPoint]
    bases: dict[str, nl.Netlist] = field(default_factory=dict)
    cands: dict[str, list[PruneCandidate]] = field(default_factory=dict)
    lib: CellLibrary | None = None

    def netlist_for(self, p: DesignPoint) -> nl.Netlist:
        if p.stage in ("exact", "coeff_only"):
            return self.bases[p.stage]
        parent = "coeff_only" if p.stage == "cross" else "exact"
        chosen = select(self.cands[parent], p.tau_c, p.phi_c)
        return apply_prune(self.bases[parent], chosen, self.lib, {"tau_c": p.tau_c, "phi_c": p.phi_c})


def explore_prune(n: nl.Netlist, q: QuantizedModel, stim: Stimulus, tau_grid=None,
                  lib: CellLibrary | None = None, stage: str = "prune_only", e: int | None = None,
                  baseline: tuple[float, float] | None = None, workers: int | None = 1,
                  cands: list[PruneCandidate] | None = None) -> list[DesignPoint]:
    """Sweep ``tau_c`` over the grid and ``phi_c`` over the distinct phi values.

    Identical pruned-gate sets are evaluated once; the first config in sweep order
    represents them.
    """
    lib = lib or default_library()
    tau_grid = default_tau_grid() if tau_grid is None else list(tau_grid)
    if cands is None:
        cands = candidates(n, profile(n, stim.vectors(stim.profile_on), lib))
    test_vec = stim.vectors("test")
    configs = []
    seen = set()
    for tau_c in tau_grid:
        for phi_c in phi_values(cands, tau_c):
            chosen = select(cands, tau_c, phi_c)
            key = frozenset(c.gate for c in chosen)
            if key in seen:
                continue
            seen.add(key)
            configs.append((tau_c, phi_c, chosen))
    jobs = [(n, chosen, {"tau_c": t, "phi_c": p}, test_vec, q, stim.test_y, lib) for t, p, chosen in configs]
    workers = workers or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_evaluate(j) for j in jobs]
    if baseline is None:
        baseline = _measure(n, test_vec, make_scorer(q, stim.test_y), lib)[1:3]
    base_area, base_power = baseline
    pts = []
    for (tau_c, phi_c, chosen), (acc, ar, pw, gates) in zip(configs, results):
        pts.append(DesignPoint(stage, e, tau_c, phi_c, acc, ar, _ratio(ar, base_area), pw,
                               _ratio(pw, base_power), gates, len(chosen)))
    return pts


def _ratio(x: float, base: float) -> float:
    return x / base if base > 0 else (0.0 if x == 0 else float("inf"))


def explore_cross(q: QuantizedModel, stim: Stimulus, e: int = 4, lib: CellLibrary | None = None,
                  tau_grid=None, prune_only: bool = True, workers: int | None = 1) -> Exploration:
    """Exact baseline, coefficient-approximated circuit, and the pruned derivatives of both."""
    lib = lib or default_library()
    test_vec = stim.vectors("test")
    scorer = make_scorer(q, stim.test_y)

    exact = gen_model_circuit(q, lib)
    acc, ar, pw, gates = _measure(exact, test_vec, scorer, lib)
    base = (ar, pw)
    points = [DesignPoint("exact", None, None, None, acc, ar, 1.0 if ar > 0 else 0.0, pw,
                          1.0 if pw > 0 else 0.0, gates)]

    qa = approximate_model(q, e, lib)
    approx = gen_model_circuit(qa, lib)
    acc, ar, pw, gates = _measure(approx, test_vec, make_scorer(qa, stim.test_y), lib)
    points.append(DesignPoint("coeff_only", e, None, None, acc, ar, _ratio(ar, base[0]), pw,
                              _ratio(pw, base[1]), gates))

    ex = Exploration(points, {"exact": exact, "coeff_only": approx}, {}, lib)
    ex.cands["coeff_only"] = candidates(approx, profile(approx, stim.vectors(stim.profile_on), lib))
    points += explore_prune(approx, qa, stim, tau_grid, lib, "cross", e, base, workers, ex.cands["coeff_only"])
    if prune_only:
        ex.cands["exact"] = candidates(exact, profile(exact, stim.vectors(stim.profile_on), lib))
        points += explore_prune(exact, q, stim, tau_grid, lib, "prune_only", None, base, workers,
                                ex.cands["exact"])
    return ex


# --------------------------------------------------------------------------- Pareto


def dominates(a: DesignPoint, b: DesignPoint) -> bool:
    return (a.accuracy >= b.accuracy and a.normalized_area <= b.normalized_area
            and (a.accuracy > b.accuracy or a.normalized_area < b.normalized_area))


def pareto(points: list[DesignPoint]) -> list[DesignPoint]:
    """Non-dominated points (accuracy up, normalized area down), accuracy descending."""
    if not points:
        raise ValueError("pareto() needs at least one point")
    ordered = sorted(points, key=lambda p: (-p.accuracy, p.normalized_area, p.config_key()))
    front = []
    best_area = float("inf")
    for p in ordered:
        if p.normalized_area < best_area:
            front.append(p)
            best_area = p.normalized_area
    return front


def verify_front(front: list[DesignPoint], points: list[DesignPoint] | None = None) -> list[str]:
    """Quadratic self-check: no member is dominated by any point."""
    problems = []
    pool = points if points is not None else front
    for a in front:
        for b in pool:
            if dominates(b, a):
                problems.append(f"{a.config_key()} dominated by {b.config_key()}")
    for x, y in zip(front, front[1:]):
        if not x.accuracy > y.accuracy:
            problems.append(f"front not strictly ordered by accuracy at {y.config_key()}")
    return problems


def best_under_budget(points: list[DesignPoint], budget: float = 0.01) -> DesignPoint:
    """Smallest-area point losing at most ``budget`` accuracy against the most accurate point.

    With ``budget=0`` this is the highest-accuracy member of the Pareto front.
    """
    if not points:
        raise ValueError("best_under_budget() needs at least one point")
    ref = max(p.accuracy for p in points)
    ok = [p for p in points if p.accuracy >= ref - budget - 1e-12]
    return min(ok, key=lambda p: (p.normalized_area, -p.accuracy, p.config_key()))


# --------------------------------------------------------------------------- reports


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def points_csv(points: list[DesignPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p in points:
        w.writerow([_cell(getattr(p, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def point_from_dict(d: dict) -> DesignPoint:
    names = {f.name for f in fields(DesignPoint)}
    return DesignPoint(**{k: v for k, v in d.items() if k in names})


def report(points: list[DesignPoint], front: list[DesignPoint], out_dir, manifest: dict | None = None) -> dict[str, Path]:
    """Write ``points.csv``, ``front.csv``, ``report.json`` and ``plot_data.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"points": out / "points.csv", "front": out / "front.csv",
             "json": out / "report.json", "plot": out / "plot_data.json"}
    files["points"].write_text(points_csv(points))
    files["front"].write_text(points_csv(front))
    doc = {"manifest": manifest or {}, "points": [asdict(p) for p in points],
           "front": [asdict(p) for p in front]}
    files["json"].write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    plot = {s: [[p.normalized_area, p.accuracy] for p in points if p.stage == s] for s in STAGES}
    plot["front"] = [[p.normalized_area, p.accuracy] for p in front]
    files["plot"].write_text(json.dumps(plot, indent=1) + "\n")
    return files


def load_report(path) -> tuple[list[DesignPoint], list[DesignPoint], dict]:
    doc = json.loads(Path(path).read_text())
    return ([point_from_dict(d) for d in doc["points"]], [point_from_dict(d) for d in doc["front"]],
            doc.get("manifest", {}))
