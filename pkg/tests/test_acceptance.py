"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line that
is printed in the pytest terminal summary.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import random
import statistics
import time
from collections import deque

import numpy as np
from bespoke_approx import dse
from bespoke_approx import netlist as nl
from bespoke_approx.cli import main
from bespoke_approx.coeff_approx import build_candidates, select_config, window_reduction
from bespoke_approx.fixtures import NAMES
from bespoke_approx.model import golden_batch
from bespoke_approx.sim import exhaustive_vectors, simulate
from bespoke_approx.synth import WeightedSumSpec, area_bm, area_table, gen_model_circuit, gen_mult_const, \
    gen_weighted_sum

from conftest import fixture, random_netlist, vectors
from test_coeff_approx import brute_force

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, RESULTS[n]


# ----------------------------------------------------------------- shared full sweeps

_REPORTS = {}


def explored(name, tmp_path_factory):
    """Full default-grid cross exploration of one fixture through the CLI (e=4)."""
    if name not in _REPORTS:
        out = tmp_path_factory.mktemp(f"explore_{name}")
        t = time.perf_counter()
        code = main(["explore", "--fixture", name, "--out", str(out)])
        dt = time.perf_counter() - t
        assert code == 0
        pts, front, _ = dse.load_report(out / "report.json")
        _REPORTS[name] = (pts, front, dt, out)
    return _REPORTS[name]


# ----------------------------------------------------------------- 1


def test_c01_exactness_on_fixtures():
    t = time.perf_counter()
    bad = {}
    total = 0
    for name in NAMES:
        f = fixture(name)
        q = f.quantized
        n = gen_model_circuit(q)
        X = np.vstack([f.train_X, f.test_X])
        g = golden_batch(q, X)
        wrong = simulate(n, vectors(X))["class" if q.is_classifier else "y"] != g["decision"]
        if q.is_classifier:
            ob = simulate(n, vectors(X), buses="obuses")
            for c in range(q.n_classes):
                wrong |= ob[f"O{c}"] != g["argmax_inputs"][:, c]
        bad[name] = int(wrong.sum())
        total += len(X)
    dt = time.perf_counter() - t
    record(1, all(v == 0 for v in bad.values()) and dt < 300,
           f"mismatches {bad} over {total} samples per fixture set, {dt:.1f}s (< 300s)")


# ----------------------------------------------------------------- 2


def test_c02_multiplier_oracle():
    x = np.arange(16)
    mism = 0
    for w in range(-128, 128):
        mism += int((simulate(gen_mult_const(w, 4), {"x": x})["p"] != x * w).sum())
    zero = [w for w in [0] + [2 ** k for k in range(7)] if area_bm(w, 4) != 0]
    record(2, mism == 0 and not zero, f"{mism} mismatches over 256x16 products; nonzero-area powers of two: {zero}")


# ----------------------------------------------------------------- 3


def test_c03_proxy_fidelity():
    rng = random.Random(2021)
    t = time.perf_counter()
    proxy, real = [], []
    for _ in range(200):
        ws = tuple(rng.randint(-128, 127) for _ in range(rng.randint(2, 16)))
        spec = WeightedSumSpec(ws, rng.randint(-2000, 2000), 4, 8)
        proxy.append(sum(area_bm(w, 4) for w in ws))
        real.append(nl.area(gen_weighted_sum(spec)).total_area)
    r = float(np.corrcoef(proxy, real)[0, 1])
    dt = time.perf_counter() - t
    record(3, r >= 0.8 and dt < 600, f"Pearson r = {r:.4f} over 200 weighted sums (>= 0.8), {dt:.1f}s")


# ----------------------------------------------------------------- 4


def test_c04_coefficient_trend():
    meds = {}
    for u in (4, 8):
        table = dict(area_table(u))
        meds[u] = [statistics.median(window_reduction(table, w, e) for w in table) for e in (1, 2, 3, 4)]
    ok = all(m == sorted(m) and m[-1] > 0 for m in meds.values())
    fmt = {f"{u}x8": [f"{v:.1%}" for v in m] for u, m in meds.items()}
    record(4, ok, f"median reduction for e=1..4: {fmt}")


# ----------------------------------------------------------------- 5


def test_c05_balancing_optimality():
    rng = random.Random(5)
    wrong, over = 0, 0
    for _ in range(100):
        e = rng.randint(1, 4)
        ws = [rng.randint(-128, 127) for _ in range(rng.randint(1, 16))]
        pairs = build_candidates(ws, e, 4)
        sel = select_config(pairs)
        # exhaustive enumeration is exponential only in the coefficients with two distinct options
        if sum(len(p.options) == 2 for p in pairs) <= 16:
            b = brute_force(pairs)
            wrong += (abs(sel.error_sum), sel.area) != b[:2]
        over += abs(sel.error_sum) > e
    record(5, wrong == 0 and over == 0, f"{wrong} DP/exhaustive disagreements, {over} sums with |error| > e, 100 sums")


# ----------------------------------------------------------------- 6


def _reach_bits(n: nl.Netlist, gid: int, tracked: dict[int, int]) -> int:
    """Highest tracked bit reachable from a gate, by forward search (independent of prune.compute_phi)."""
    users = n.fanout()
    seen, best = set(), -1
    todo = deque([gid])
    while todo:
        g = todo.popleft()
        if g in seen:
            continue
        seen.add(g)
        out = n.gates[g].output
        best = max(best, tracked.get(out, -1))
        todo.extend(users.get(out, ()))
    return best


def test_c06_pruning_bound():
    checked, violations, struct = 0, [], []
    for name in ("mlp_r", "svm_r"):
        f = fixture(name)
        ex = dse.explore_cross(f.quantized, dse.Stimulus(f.train_X, f.test_X, f.test.labels, f.train.labels), 4)
        for parent in ("exact", "coeff_only"):
            base = ex.bases[parent]
            ref = simulate(base, vectors(f.test_X))["y"]
            tracked = {}
            for k, net in enumerate(base.outputs["y"].nets):
                tracked[net] = max(tracked.get(net, -1), k)
            stage = "prune_only" if parent == "exact" else "cross"
            for p in ex.points:
                if p.stage != stage:
                    continue
                pn = ex.netlist_for(p)
                err = int(np.abs(simulate(pn, vectors(f.test_X))["y"] - ref).max())
                checked += 1
                if err >= 2 ** (p.phi_c + 1):
                    violations.append((name, stage, p.tau_c, p.phi_c, err))
                for gid in pn.meta["prune"]["removed"]:
                    if _reach_bits(base, gid, tracked) > p.phi_c:
                        struct.append((name, stage, p.tau_c, p.phi_c, gid))
    record(6, checked > 0 and not violations and not struct,
           f"{checked} pruned regressor circuits; bound violations {violations[:3]}; "
           f"gates reaching a bit above phi_c {struct[:3]}")


# ----------------------------------------------------------------- 7


def test_c07_optimizer_soundness():
    rng = random.Random(7)
    unsound, not_idem, grew = 0, 0, 0
    for _ in range(500):
        n = random_netlist(rng, max_bits=12, max_gates=60)
        o = nl.optimize(n)
        v = exhaustive_vectors(n)
        a, b = simulate(n, v), simulate(o, v)
        unsound += any(not np.array_equal(a[k], b[k]) for k in a)
        not_idem += not nl.structurally_equal(nl.optimize(o), o)
        grew += nl.area(o).total_area > nl.area(n).total_area
    record(7, unsound == 0 and not_idem == 0 and grew == 0,
           f"500 random netlists: {unsound} inequivalent, {not_idem} not idempotent, {grew} grew in area")


# ----------------------------------------------------------------- 8


def test_c08_end_to_end_gains(tmp_path_factory):
    hits, notes, slow = [], [], []
    for name in NAMES:
        pts, front, dt, _ = explored(name, tmp_path_factory)
        exact = next(p for p in pts if p.stage == "exact")
        good = [p for p in front if p.accuracy >= exact.accuracy - 0.01 and p.normalized_area <= 0.70]
        best = min(good, key=lambda p: p.normalized_area) if good else None
        if best:
            hits.append(name)
            notes.append(f"{name}: -{1 - best.normalized_area:.0%} area at {exact.accuracy - best.accuracy:+.2%} "
                         f"loss ({best.stage})")
        else:
            notes.append(f"{name}: none")
        if dt >= 1800:
            slow.append(name)
    record(8, len(hits) >= 2 and not slow, f"{len(hits)}/4 fixtures qualify; " + "; ".join(notes))


# ----------------------------------------------------------------- 9


def test_c09_dominance_structure(tmp_path_factory):
    problems = []
    for name in NAMES:
        pts, front, _, _ = explored(name, tmp_path_factory)
        coeff = next(p for p in pts if p.stage == "coeff_only")
        for p in pts:
            if p.stage == "cross" and (p.area > coeff.area or dse.dominates(coeff, p)):
                problems.append(f"{name}: {p.config_key()} dominated by its coeff_only parent")
        problems += [f"{name}: {m}" for m in dse.verify_front(front, pts)]
    record(9, not problems, f"4 reports checked; problems: {problems[:3]}")


# ----------------------------------------------------------------- 10


def test_c10_determinism(tmp_path):
    files = ("points.csv", "front.csv", "report.json", "plot_data.json")
    differ = []
    for name in ("svm_r", "mlp_r"):
        outs = []
        for workers in (1, 2, 3):
            out = tmp_path / f"{name}_{workers}"
            assert main(["explore", "--fixture", name, "--workers", str(workers), "--out", str(out)]) == 0
            outs.append(out)
        for f in files:
            blobs = {(o / f).read_bytes() for o in outs}
            if len(blobs) != 1:
                differ.append(f"{name}/{f}")
        nets = sorted(p.name for p in (outs[0] / "netlists").iterdir())
        for p in nets:
            if len({(o / "netlists" / p).read_bytes() for o in outs}) != 1:
                differ.append(f"{name}/netlists/{p}")
    record(10, not differ, f"explore with 1, 2 and 3 workers on svm_r and mlp_r; differing files: {differ}")
