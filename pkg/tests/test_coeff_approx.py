import itertools
import random
import statistics

import pytest

from bespoke_approx.coeff_approx import (CandidatePair, approximate_model, approximate_weights, build_candidates,
                                         select_config, window_reduction)
from bespoke_approx.synth import area_bm, area_table

from conftest import fixture


def brute_force(pairs):
    best = None
    for choice in itertools.product(*[range(len(p.options)) for p in pairs]):
        err = sum(p.w - p.options[k][0] for p, k in zip(pairs, choice))
        a = 0.0
        for p, k in zip(pairs, choice):
            a += p.options[k][1]
        key = (abs(err), a, err, choice)
        if best is None or key < best:
            best = key
    return best


def test_candidates_respect_window():
    for c in build_candidates([-128, -3, 0, 5, 77, 127], 4, 4):
        assert c.w <= c.minus <= min(c.w + 4, 127)
        assert max(c.w - 4, -128) <= c.plus <= c.w
        assert c.area_minus <= c.area_w and c.area_plus <= c.area_w
        assert c.area_minus == area_bm(c.minus, 4)


def test_power_of_two_in_window_is_taken():
    c = build_candidates([63], 2, 4)[0]
    assert c.minus == 64 and c.area_minus == 0


def test_dp_matches_brute_force_small():
    rng = random.Random(0)
    for _ in range(40):
        ws = [rng.randint(-128, 127) for _ in range(rng.randint(1, 8))]
        pairs = build_candidates(ws, rng.randint(1, 4), 4)
        sel = select_config(pairs)
        b = brute_force(pairs)
        assert (abs(sel.error_sum), sel.area) == b[:2]
        assert sel.error_sum == b[2]


def test_error_sum_within_e():
    rng = random.Random(1)
    for _ in range(50):
        e = rng.randint(1, 6)
        sel = approximate_weights([rng.randint(-128, 127) for _ in range(16)], e, 4)
        assert abs(sel.error_sum) <= e


def test_e_zero_changes_nothing():
    q = fixture("svm_r").quantized
    assert approximate_model(q, 0).layers == q.layers


def test_single_option_pairs():
    p = CandidatePair(0, 8, 8, 8, 0.0, 0.0, 0.0)
    assert p.options == ((8, 0.0),)
    assert select_config([p]).weights == (8,)
    with pytest.raises(ValueError):
        select_config([])


def test_model_provenance_and_proxy_drop():
    q = fixture("mlp_c").quantized
    qa = approximate_model(q, 4)
    prov = qa.provenance["coeff_approx"]
    assert prov["e"] == 4 and len(prov["sums"]) == sum(1 for _ in q.weighted_sums())
    for s in prov["sums"]:
        assert s["proxy_area_after"] <= s["proxy_area_before"]
        assert abs(s["error_sum"]) <= 4
    assert [L.intercepts for L in qa.layers] == [L.intercepts for L in q.layers]


def test_window_reduction_median_grows_with_e():
    table = dict(area_table(4))
    med = [statistics.median(window_reduction(table, w, e) for w in table if table[w] > 0) for e in (1, 2, 3, 4)]
    assert med == sorted(med) and med[-1] > 0
