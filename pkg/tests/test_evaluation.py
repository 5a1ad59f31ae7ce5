import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vaeinf.data import MAJORITY as MAJ
from vaeinf.data import MINORITY as MIN
from vaeinf.evaluation import (auc_pr, auc_roc, f1_at_proportion, f1_from_counts, flag_top_fraction, threshold_sweep,
                               type1_type2)


def test_type1_type2_example():
    scores = [0.1, 0.5, 0.9, 0.3, 0.8]
    labels = [MAJ, MAJ, MAJ, MIN, MIN]
    er = type1_type2(scores, labels, 0.6)
    assert (er.type1, er.type2) == (1 / 3, 1 / 2)
    assert (er.tp, er.fp, er.tn, er.fn) == (1, 1, 2, 1)
    # score equal to tau is accepted as majority
    assert type1_type2([0.6], [MAJ], 0.6).type1 == 0.0


def test_type1_type2_extremes():
    s, y = [1.0, 2.0, 3.0], [MAJ, MIN, MAJ]
    assert type1_type2(s, y, math.inf).type1 == 0.0 and type1_type2(s, y, math.inf).type2 == 1.0
    assert type1_type2(s, y, -math.inf).type1 == 1.0 and type1_type2(s, y, -math.inf).type2 == 0.0
    assert type1_type2([1.0], [MAJ], 0.0).type2 is None


def _auc_bruteforce(s, y):
    pos = [a for a, l in zip(s, y) if l == MIN]
    neg = [a for a, l in zip(s, y) if l == MAJ]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_auc_roc_examples():
    assert auc_roc([1, 2, 3, 4], [MAJ, MAJ, MIN, MIN]) == 1.0
    assert auc_roc([1, 2, 3, 4], [MIN, MIN, MAJ, MAJ]) == 0.0
    assert auc_roc([5, 5, 5, 5], [MAJ, MIN, MAJ, MIN]) == 0.5
    assert auc_roc([1, 2], [MAJ, MAJ]) is None


@given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=2, max_size=40))
@settings(max_examples=150, deadline=None)
def test_auc_roc_matches_pairwise_count(rows):
    s = [float(a) for a, _ in rows]  # small integer range forces ties
    y = [MIN if b else MAJ for _, b in rows]
    got = auc_roc(s, y)
    if len(set(y)) < 2:
        assert got is None
    else:
        assert got == pytest.approx(_auc_bruteforce(s, y), abs=1e-12)


def _ap_bruteforce(s, y):
    order = sorted(range(len(s)), key=lambda i: -s[i])  # sorted() is stable
    hits, total = 0, 0.0
    for r, i in enumerate(order, start=1):
        if y[i] == MIN:
            hits += 1
            total += hits / r
    return total / hits


def test_auc_pr_examples():
    assert auc_pr([3.0, 2.0, 1.0], [MIN, MAJ, MIN]) == pytest.approx((1 + 2 / 3) / 2, rel=1e-15)
    assert auc_pr([3.0, 2.0, 1.0], [MIN, MAJ, MIN]) == pytest.approx(0.8333333, abs=1e-7)
    n = 20
    # single minority ranked last: AP = 1/n
    assert auc_pr(np.arange(n, 0, -1.0), [MAJ] * (n - 1) + [MIN]) == pytest.approx(1 / n, rel=1e-15)
    assert auc_pr([1.0, 2.0], [MAJ, MAJ]) is None


@given(st.lists(st.tuples(st.floats(-3, 3), st.booleans()), min_size=1, max_size=40))
@settings(max_examples=150, deadline=None)
def test_auc_pr_matches_bruteforce(rows):
    s = [a for a, _ in rows]
    y = [MIN if b else MAJ for _, b in rows]
    got = auc_pr(s, y)
    if MIN not in y:
        assert got is None
    else:
        assert got == pytest.approx(_ap_bruteforce(s, y), abs=1e-12)
        assert 0.0 < got <= 1.0


def test_flag_top_fraction_counts():
    s = np.array([0.2, 0.9, 0.4, 0.8, 0.1])
    assert list(flag_top_fraction(s, 0.4)) == [False, True, False, True, False]
    assert flag_top_fraction(s, 0.01).sum() == 1  # ceil(0.05) = 1
    with pytest.raises(ValueError):
        flag_top_fraction(s, 0.0)


def test_f1_examples():
    assert f1_from_counts(0, 3, 2) == 0.0
    assert f1_from_counts(4, 0, 0) == 1.0
    assert f1_from_counts(2, 1, 1) == pytest.approx(2 / 3, rel=1e-15)


def test_f1_at_proportion_confusion_oracle(rng):
    s = rng.normal(size=50)
    y = np.where(rng.uniform(size=50) < 0.2, MIN, MAJ)
    rep = f1_at_proportion(s, y, 0.2)
    # oracle: threshold at the 10th largest score (no ties for continuous draws)
    cut = np.sort(s)[::-1][9]
    flagged = s >= cut
    tp = int(np.sum(flagged & (y == MIN)))
    fp = int(np.sum(flagged & (y == MAJ)))
    fn = int(np.sum(~flagged & (y == MIN)))
    assert (rep.tp, rep.fp, rep.fn) == (tp, fp, fn)
    assert rep.tp + rep.fp + rep.tn + rep.fn == 50
    assert rep.f1 == pytest.approx(2 * tp / (2 * tp + fp + fn), rel=1e-15)


def _sweep_inputs(rng, n=300):
    def part():
        y = np.where(rng.uniform(size=n) < 0.1, MIN, MAJ)
        s = rng.normal(size=n) + 2.0 * (y == MIN)
        return s, y
    return part(), part()


def test_sweep_monotone_and_pointwise(rng):
    (vs, vy), (ts, ty) = _sweep_inputs(rng)
    c = threshold_sweep(vs, vy, ts, ty)
    assert c.tau.size == 100
    assert c.tau[0] == min(vs.min(), ts.min()) and c.tau[-1] == max(vs.max(), ts.max())
    for r1 in (c.type1_val, c.type1_test):
        assert np.all(np.diff(r1) <= 0)
    for r2 in (c.type2_val, c.type2_test):
        assert np.all(np.diff(r2) >= 0)
    for i in (0, 37, 99):
        maj = ts[ty == MAJ]
        assert c.type1_test[i] == np.mean(maj > c.tau[i])
    assert c.mad == pytest.approx(np.mean(np.abs(c.type1_val - c.type1_test)), rel=1e-14)


def test_sweep_identical_splits_have_zero_mad(rng):
    (vs, vy), _ = _sweep_inputs(rng)
    c = threshold_sweep(vs, vy, vs, vy)
    assert c.mad == 0.0
    lines = c.to_csv().splitlines()
    assert lines[0] == "tau,type1_val,type2_val,type1_test,type2_test" and len(lines) == 101


def test_sweep_csv_blanks_undefined():
    c = threshold_sweep([0.0, 1.0], [MAJ, MAJ], [0.5, 2.0], [MAJ, MAJ], n_points=3)
    row = c.to_csv().splitlines()[1].split(",")
    assert row[2] == "" and row[4] == ""
