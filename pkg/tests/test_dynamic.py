from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minvariance.core import Dataset
from minvariance.decomp import run_pipeline
from minvariance.dynamic import (
    ConsistencyError,
    Publication,
    PublicationSequence,
    PublishedClass,
    balance_bucket,
    classify,
    republish,
    verify_m_invariance,
    verify_m_unique,
    verify_tau_safety,
)
from minvariance.heuristic import Bucket

TABLE1 = Publication([PublishedClass("1", ("1", "2"), ("HIV", "FLU"))])
TABLE2 = Publication(
    [PublishedClass("1", ("1", "3"), ("HIV", "ACNE")), PublishedClass("2", ("2", "4"), ("FLU", "COUCH"))]
)
TABLE3 = Publication(
    [PublishedClass("1", ("1", "2"), ("HIV", "FLU")), PublishedClass("2", ("3", "4"), ("ACNE", "COUCH"))]
)

REPORT_1_2 = """m-invariance (m=2): FAIL
publication 1: m-unique
publication 2: m-unique
tuple 1: signature {FLU, HIV} in publication 1 but {ACNE, HIV} in publication 2
tuple 2: signature {FLU, HIV} in publication 1 but {COUCH, FLU} in publication 2
"""

REPORT_1_3 = """m-invariance (m=2): PASS
publication 1: m-unique
publication 2: m-unique
"""


def toy_dataset(ids=("1", "2", "3", "4")):
    ages = {"1": 18.0, "2": 20.0, "3": 19.0, "4": 21.0}
    values = {"1": "HIV", "2": "FLU", "3": "ACNE", "4": "COUCH"}
    names = ["HIV", "FLU", "ACNE", "COUCH"]
    return Dataset.from_arrays(
        np.array([[ages[t]] for t in ids]), [names.index(values[t]) for t in ids], ids=list(ids), color_names=names
    )


def test_golden_table_two_fails():
    rep = verify_m_invariance(PublicationSequence([TABLE1, TABLE2]), 2)
    assert not rep.passed
    assert "1" in rep.offending_tuples
    assert rep.format() == REPORT_1_2


def test_golden_table_three_passes():
    rep = verify_m_invariance(PublicationSequence([TABLE1, TABLE3]), 2)
    assert rep.passed
    assert rep.format() == REPORT_1_3


def test_single_publication():
    assert verify_m_invariance(PublicationSequence([TABLE3]), 2).passed
    assert verify_m_unique(TABLE3, 2).passed


def test_m_unique_failures():
    small = Publication([PublishedClass("a", ("1",), ("HIV",))])
    rep = verify_m_unique(small, 2)
    assert not rep.passed and "fewer than 2" in rep.format()
    dup = Publication([PublishedClass("a", ("1", "2"), ("HIV", "HIV"))])
    assert "repeated sensitive value HIV" in verify_m_unique(dup, 2).format()


def test_invariance_implies_uniqueness():
    seq = PublicationSequence([TABLE1, TABLE3])
    assert verify_m_invariance(seq, 2).passed
    assert all(verify_m_unique(p, 2).passed for p in seq.publications)
    assert not verify_m_invariance(seq, 3).passed


def test_lifespans():
    gap = Publication([PublishedClass("1", ("5", "6"), ("A", "B"))])
    seq = PublicationSequence([TABLE1, gap, TABLE3, TABLE3])
    assert seq.lifespans("1") == [(1, 1), (3, 4)]
    assert seq.lifespans("3") == [(3, 4)]
    assert seq.lifespans("9") == []


def test_tau_safety_reinsertion():
    p1 = Publication([PublishedClass("1", ("h", "x"), ("A", "B"))])
    p2 = Publication([PublishedClass("1", ("x", "y"), ("B", "A"))])
    p3 = Publication([PublishedClass("1", ("h", "z"), ("A", "C")), PublishedClass("2", ("x", "y"), ("B", "A"))])
    seq = PublicationSequence([p1, p2, p3])
    assert verify_m_invariance(seq, 2).passed  # each lifespan of h has one publication
    rep = verify_tau_safety(seq, 2)
    assert not rep.passed
    assert rep.offending_tuples == ["h"]
    assert "lifespan [1, 1]" in rep.format() and "lifespan [3, 3]" in rep.format()


def test_tau_safety_vacuous_and_subsumed():
    assert verify_tau_safety(PublicationSequence([TABLE1, TABLE3]), 2).passed
    assert not verify_tau_safety(PublicationSequence([TABLE1, TABLE2]), 2).passed


def test_classify_first_publication():
    new, old = classify(toy_dataset(), PublicationSequence())
    assert new == [0, 1, 2, 3] and old == {}


def test_classify_after_table_one():
    ds = toy_dataset()
    new, old = classify(ds, PublicationSequence([TABLE1]))
    assert new == [2, 3]
    sig = frozenset({ds.color_code("HIV"), ds.color_code("FLU")})
    assert list(old) == [sig]
    assert old[sig].points() == [0, 1]


def test_classify_deleted_tuple_absent():
    ds = toy_dataset(ids=("1", "3", "4"))
    new, old = classify(ds, PublicationSequence([TABLE1]))
    assert new == [1, 2]
    assert [b.points() for b in old.values()] == [[0]]


def test_classify_consistency_errors():
    with pytest.raises(ConsistencyError):
        classify(toy_dataset(), PublicationSequence(), claimed_old=["3"])
    changed = Dataset.from_arrays([[18.0]], [0], ids=["1"], color_names=["ACNE", "HIV", "FLU"])
    with pytest.raises(ConsistencyError, match="not in its published signature"):
        classify(changed, PublicationSequence([TABLE1]))


def test_balance_already_balanced():
    ds = toy_dataset()
    b = Bucket({0, 1}, {0: [0], 1: [1]})
    out, consumed, fakes = balance_bucket(b, ds, [2, 3])
    assert out.rows == b.rows and consumed == [] and fakes == []


def test_balance_consumes_then_counterfeits():
    ds = Dataset.from_arrays([[18.0], [30.0], [19.0]], [0, 1, 1], ids=["1", "9", "8"], color_names=["HIV", "FLU"])
    b = Bucket({0, 1}, {0: [0], 1: []})
    out, consumed, fakes = balance_bucket(b, ds, [1, 2])
    assert consumed == [2] and fakes == []  # the nearer FLU tuple
    assert out.balanced
    out, consumed, fakes = balance_bucket(b, ds, [])
    assert consumed == [] and fakes == [1]
    assert out.rows[1] == [-1] and out.balanced


def test_republish_reproduces_table_three():
    res = republish(PublicationSequence([TABLE1]), toy_dataset(), 2)
    got = sorted(sorted(Q.tuple_ids) for Q in res.publication.classes)
    assert got == [["1", "2"], ["3", "4"]]
    assert res.counterfeits == 0
    assert verify_m_invariance(PublicationSequence([TABLE1, res.publication]), 2).format() == REPORT_1_3


def test_republish_empty_history_is_pipeline():
    ds = toy_dataset()
    res = republish(PublicationSequence(), ds, 2)
    K, _ = run_pipeline(ds, 2)
    assert sorted(sorted(Q.tuple_ids) for Q in res.publication.classes) == sorted(
        sorted(ds.ids[i] for i in C) for C in K
    )


def test_republish_counterfeit_flagged():
    # tuple 2 (FLU) was deleted and no FLU tuple arrives
    ds = Dataset.from_arrays([[18.0], [40.0], [41.0]], [0, 1, 2], ids=["1", "5", "6"], color_names=["HIV", "X", "Y"])
    res = republish(PublicationSequence([TABLE1]), ds, 2)
    assert res.counterfeits == 1
    fake = [(Q, t) for Q in res.publication.classes for t, f in zip(Q.tuple_ids, Q.counterfeit) if f]
    assert len(fake) == 1 and fake[0][0].signature == frozenset({"HIV", "FLU"})
    assert not any(t in ds.ids for _, t in fake)
    rep = verify_m_invariance(PublicationSequence([TABLE1, res.publication]), 2)
    assert rep.passed and "(1 counterfeit)" in rep.format()


def test_republish_pads_infeasible_new_tuples():
    ds = Dataset.from_arrays([[1.0], [2.0]], [0, 0], ids=["a", "b"], color_names=["A", "B", "C"])
    res = republish(PublicationSequence(), ds, 2)
    assert res.counterfeits == 2
    assert verify_m_unique(res.publication, 2).passed


def simulate(seed, epochs=3, n=40, m=3, n_values=8):
    rng = np.random.default_rng(seed)
    names = [f"v{k}" for k in range(n_values)]
    value = {}
    alive = []
    next_id = 0
    seq = PublicationSequence()
    for _ in range(epochs):
        if alive:
            keep = rng.random(len(alive)) > 0.3
            alive = [t for t, k in zip(alive, keep) if k]
        while len(alive) < n:
            value[str(next_id)] = int(rng.integers(0, n_values))
            alive.append(str(next_id))
            next_id += 1
        X = rng.random((len(alive), 2))
        ds = Dataset.from_arrays(X, [value[t] for t in alive], ids=alive, color_names=names)
        res = republish(seq, ds, m)
        assert res.counterfeits >= 0
        seq = seq.append(res.publication)
    return seq


@settings(max_examples=8)
@given(seed=st.integers(0, 10_000))
def test_republished_sequences_are_invariant(seed):
    seq = simulate(seed)
    assert verify_m_invariance(seq, 3).passed
