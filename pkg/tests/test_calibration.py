import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vaeinf.calibration import (calibrate_for_type2, calibrate_threshold, coverage_simulation, decide, decide_batch,
                                order_index)
from vaeinf.data import MAJORITY, MINORITY


def test_order_index_examples():
    assert order_index(9, 0.1) == 9
    assert order_index(99, 0.05) == 95
    assert order_index(99, 0.01) == 99
    assert order_index(4, 0.1) == 5
    assert order_index(999, 0.01) == 990


def test_order_index_matches_exact_rational():
    for n in range(1, 300):
        for delta in (0.01, 0.05, 0.1, 0.2, 0.25, 0.3):
            exact = math.ceil((1 - Fraction(str(delta))) * (n + 1))
            assert order_index(n, delta) == exact


def test_calibrate_examples():
    rule = calibrate_threshold(np.arange(1.0, 10.0), 0.1)
    assert rule.tau == 9.0 and rule.k == 9 and rule.n_cal == 9
    assert rule.exact_acceptance == 0.9
    small = calibrate_threshold([3.0, 1.0, 4.0, 1.5], 0.1)
    assert small.tau == math.inf and small.k == 5
    r = calibrate_threshold(np.arange(99.0, 0.0, -1.0), 0.05)
    assert r.k == 95 and r.tau == 95.0


def test_calibrate_rejects_bad_input():
    with pytest.raises(ValueError):
        calibrate_threshold([], 0.1)
    with pytest.raises(ValueError):
        calibrate_threshold([1.0], 1.0)
    with pytest.raises(ValueError):
        calibrate_threshold([1.0, math.nan], 0.1)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60), st.randoms(use_true_random=False))
@settings(max_examples=100, deadline=None)
def test_calibrate_permutation_invariant_and_monotone(scores, rnd):
    shuffled = list(scores)
    rnd.shuffle(shuffled)
    taus = []
    for delta in (0.01, 0.05, 0.1, 0.3):
        a, b = calibrate_threshold(scores, delta), calibrate_threshold(shuffled, delta)
        assert a.tau == b.tau and a.fingerprint == b.fingerprint
        taus.append(a.tau)
    assert taus == sorted(taus, reverse=True)


def test_decide_boundary():
    rule = calibrate_threshold([1.0, 2.0, 3.0], 0.5)  # k = ceil(2) = 2
    assert rule.tau == 2.0
    assert decide(2.0, rule) == MAJORITY
    assert decide(np.nextafter(2.0, 3.0), rule) == MINORITY
    assert list(decide_batch([0.0, 2.0, 2.5], rule)) == [MAJORITY, MAJORITY, MINORITY]
    inf_rule = calibrate_threshold([1.0], 0.1)
    assert decide(1e300, inf_rule) == MAJORITY


def _type2_bruteforce(s_min, s_maj, target):
    cands = sorted(set(s_min) | set(s_maj)) + [math.inf]
    cands = [-math.inf] + cands
    best = None
    for tau in cands:
        t2 = Fraction(sum(v <= tau for v in s_min), len(s_min))
        t1 = Fraction(sum(v > tau for v in s_maj), len(s_maj))
        key = (abs(t2 - Fraction(str(target))), t1, tau)
        if best is None or key < best[0]:
            best = (key, tau, t2, t1)
    return best[1:]


@given(st.lists(st.integers(0, 8), min_size=1, max_size=15), st.lists(st.integers(0, 8), min_size=1, max_size=15),
       st.sampled_from([0.0, 0.1, 0.25, 0.5, 1.0]))
@settings(max_examples=200, deadline=None)
def test_type2_calibration_matches_bruteforce(s_min, s_maj, target):
    got = calibrate_for_type2(s_min, s_maj, target)
    tau, t2, t1 = _type2_bruteforce([float(v) for v in s_min], [float(v) for v in s_maj], target)
    assert got.tau == tau
    assert got.type2 == pytest.approx(float(t2), abs=1e-15)
    assert got.type1 == pytest.approx(float(t1), abs=1e-15)


def test_type2_calibration_exact_tie():
    # distance 0.1 at tau = -inf and at tau = 0; equal Type-I, so the smaller tau wins
    res = calibrate_for_type2([0.0, 1.0, 1.0, 1.0, 1.0], [1.0], 0.1)
    assert res.tau == -np.inf and res.type2 == 0.0


def test_type2_calibration_example():
    # minority scores 1..10: tau = 1 leaves exactly one minority accepted
    res = calibrate_for_type2(np.arange(1.0, 11.0), [0.0, 0.5], 0.1)
    assert res.tau == 1.0 and res.type2 == 0.1 and res.type1 == 0.0


@pytest.mark.parametrize("n_cal,delta", [(9, 0.1), (19, 0.05)])
def test_coverage_small(n_cal, delta):
    trials = 4000
    k = order_index(n_cal, delta)
    p = k / (n_cal + 1)
    rate = coverage_simulation(n_cal, delta, trials, seed=1)
    assert abs(rate - p) <= 3 * math.sqrt(p * (1 - p) / trials)
    assert coverage_simulation(n_cal, delta, 50, seed=1) == coverage_simulation(n_cal, delta, 50, seed=1)
