import numpy as np
import pytest

from bespoke_approx import netlist as nl
from bespoke_approx.netlist import NetlistBuilder
from bespoke_approx.prune import (NEVER, PruneCandidate, candidates, compute_phi, compute_tau, load_candidates,
                                  phi_values, prune, save_candidates, select)
from bespoke_approx.sim import profile, simulate

from conftest import fixture, fixture_circuit, vectors


def two_bit_circuit():
    """y[0] = a & b, y[1] = a | b, plus a gate that only feeds bit 0."""
    b = NetlistBuilder()
    a, c = b.input("x", 2)
    g0 = b.gate("AND2", a, c)
    g1 = b.gate("OR2", a, c)
    g2 = b.gate("XOR2", g0, a)
    b.output("y", [g2, g1])
    return b.build(kind="SVM-R")


def test_tau_tie_goes_to_zero():
    n = two_bit_circuit()
    a = profile(n, {"x": np.array([0, 3])})
    tau = compute_tau(a, n)
    assert tau[0] == (0.5, 0)
    a = profile(n, {"x": np.array([0, 0, 0, 3])})
    assert compute_tau(a, n)[0] == (0.75, 0)
    assert compute_tau(a, n)[1] == (0.75, 0)


def test_phi_is_highest_reachable_bit():
    n = two_bit_circuit()
    assert compute_phi(n) == {0: 0, 1: 1, 2: 0}


def test_unreached_gate_has_phi_minus_one():
    b = NetlistBuilder()
    x = b.input("x", 1)[0]
    b.gate("INV", x)
    b.output("y", [x])
    assert compute_phi(b.build(kind="SVM-R")) == {0: -1}


def test_decision_gates_never_pruned():
    n = fixture_circuit("mlp_c")
    phi = compute_phi(n)
    assert {g for g, p in phi.items() if p is NEVER} == set(n.decision_gates)
    f = fixture("mlp_c")
    cands = candidates(n, profile(n, vectors(f.train_X)))
    chosen = select(cands, 0.5, 10 ** 6)
    assert not {c.gate for c in chosen} & n.decision_gates


def test_select_and_phi_values():
    cands = [PruneCandidate(0, 0.99, 0, 0), PruneCandidate(1, 0.995, 1, 1), PruneCandidate(2, 0.9, 0, 5),
             PruneCandidate(3, 1.0, 0, NEVER)]
    assert phi_values(cands, 0.99) == [0, 1]
    assert [c.gate for c in select(cands, 0.99, 0)] == [0]
    assert [c.gate for c in select(cands, 0.85, 5)] == [0, 1, 2]


def test_prune_ranges():
    n = two_bit_circuit()
    cands = candidates(n, profile(n, {"x": np.arange(4)}))
    with pytest.raises(ValueError):
        prune(n, cands, 0.3, 1)
    with pytest.raises(ValueError):
        prune(n, cands, 0.9, -2)


def test_prune_ties_and_reoptimizes():
    n = two_bit_circuit()
    a = profile(n, {"x": np.array([0, 0, 0, 0, 1])})
    cands = candidates(n, a)
    p = prune(n, cands, 0.8, 1)
    assert p.meta["prune"]["removed"] == [0, 1, 2]
    assert not p.gates
    assert nl.area(p).total_area <= nl.area(n).total_area


def test_candidates_round_trip(tmp_path):
    n = fixture_circuit("svm_r")
    cands = candidates(n, profile(n, vectors(fixture("svm_r").train_X)))
    save_candidates(cands, tmp_path / "c.json")
    assert load_candidates(tmp_path / "c.json") == cands


def test_pruning_error_bound_on_regressor():
    f = fixture("svm_r")
    n = fixture_circuit("svm_r")
    cands = candidates(n, profile(n, vectors(f.train_X)))
    ref = simulate(n, vectors(f.test_X))["y"]
    for phi_c in phi_values(cands, 0.95)[:3]:
        p = prune(n, cands, 0.95, phi_c)
        err = np.abs(simulate(p, vectors(f.test_X))["y"] - ref).max()
        assert err < 2 ** (phi_c + 1)
