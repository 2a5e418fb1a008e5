from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import line, random_instance
from minvariance.core import InvalidInputError, cluster_weight
from minvariance.pricing import (
    PricingInstance,
    enumerate_columns,
    min_reduced_cost_cluster,
    price_all_sizes,
)


def all_clusters(ds, points, eta):
    for C in itertools.combinations(points, eta):
        if len({int(ds.colors[i]) for i in C}) == eta:
            yield C


def brute_min(ds, points, duals, eta):
    lam = dict(zip(points, duals))
    vals = [cluster_weight(C, ds) - sum(lam[i] for i in C) for C in all_clusters(ds, points, eta)]
    return min(vals) if vals else None


def test_three_points_tie_goes_to_first_pair():
    ds = line([0, 1, 2])
    inst = PricingInstance.build(ds, range(3), 2, duals=[10.0, 10.0, 10.0])
    res = min_reduced_cost_cluster(inst, 2)
    assert res.cluster == (0, 1)
    assert res.reduced_cost == pytest.approx(0.5 - 20.0)
    assert res.weight == pytest.approx(0.5)
    assert res.exact


def test_zero_duals_give_no_improving_column():
    rng = np.random.default_rng(1)
    ds = random_instance(rng, 9, 2, 4)
    inst = PricingInstance.build(ds, range(9), 2)
    res = min_reduced_cost_cluster(inst, 2)
    assert res.reduced_cost >= 0.0
    assert price_all_sizes(inst).column is None


def test_same_color_size_infeasible():
    ds = line([0, 1, 2], colors=[0, 0, 0])
    inst = PricingInstance.build(ds, range(3), 2, duals=[5.0, 5.0, 5.0])
    assert min_reduced_cost_cluster(inst, 2) is None
    assert price_all_sizes(inst).column is None


def test_exactly_m_points():
    ds = line([0, 1, 3])
    w = cluster_weight((0, 1, 2), ds)
    inst = PricingInstance.build(ds, range(3), 3, duals=[w / 3 + 0.1] * 3)
    assert price_all_sizes(inst).column.cluster == (0, 1, 2)
    assert price_all_sizes(inst.with_duals([w / 3 - 0.1] * 3)).column is None


def test_invalid_size_and_duals():
    inst = PricingInstance.build(line([0, 1]), range(2), 2)
    with pytest.raises(InvalidInputError):
        min_reduced_cost_cluster(inst, 0)
    with pytest.raises(InvalidInputError):
        inst.with_duals([1.0])


def test_global_indices_are_reported():
    ds = line([0, 100, 1, 200, 2])
    inst = PricingInstance.build(ds, [0, 2, 4], 2, duals=[10.0, 10.0, 10.0])
    assert min_reduced_cost_cluster(inst, 2).cluster == (0, 2)


@settings(max_examples=80)
@given(
    seed=st.integers(0, 100_000),
    p=st.integers(2, 12),
    k=st.integers(2, 6),
    eta=st.integers(1, 5),
    scale=st.floats(0.0, 3.0),
)
def test_matches_brute_force(seed, p, k, eta, scale):
    rng = np.random.default_rng(seed)
    ds = random_instance(rng, p, 2, k)
    duals = rng.normal(size=p) * scale
    inst = PricingInstance.build(ds, range(p), 2, duals=duals)
    expected = brute_min(ds, list(range(p)), duals, eta)
    for prune in (True, False):
        res = min_reduced_cost_cluster(inst, eta, prune=prune)
        if expected is None:
            assert res is None
            continue
        assert res.exact
        assert res.reduced_cost == pytest.approx(expected, abs=1e-9)
        assert len(res.cluster) == eta
        assert len({int(ds.colors[i]) for i in res.cluster}) == eta
        assert res.weight == pytest.approx(cluster_weight(res.cluster, ds), abs=1e-9)


@settings(max_examples=50)
@given(seed=st.integers(0, 100_000), p=st.integers(3, 12), m=st.integers(2, 3))
def test_enumeration_is_complete(seed, p, m):
    rng = np.random.default_rng(seed)
    ds = random_instance(rng, p, 2, 5)
    duals = np.abs(rng.normal(size=p)) * 0.3
    inst = PricingInstance.build(ds, range(p), m, duals=duals)
    threshold = 0.05
    found, complete = enumerate_columns(inst, threshold, limit=100_000)
    assert complete
    expected = set()
    for eta in range(m, 2 * m):
        for C in all_clusters(ds, range(p), eta):
            if cluster_weight(C, ds) - duals[list(C)].sum() < threshold:
                expected.add(C)
    assert {c.cluster for c in found} == expected


def test_enumeration_limit_is_strict():
    rng = np.random.default_rng(3)
    ds = random_instance(rng, 12, 2, 6)
    inst = PricingInstance.build(ds, range(12), 2, duals=np.full(12, 5.0))
    found, complete = enumerate_columns(inst, 0.0, limit=7)
    assert len(found) == 7 and not complete


def test_cutoff_and_node_cap():
    rng = np.random.default_rng(5)
    ds = random_instance(rng, 12, 2, 6)
    duals = rng.random(12)
    inst = PricingInstance.build(ds, range(12), 2, duals=duals)
    best = min_reduced_cost_cluster(inst, 3)
    assert min_reduced_cost_cluster(inst, 3, cutoff=best.reduced_cost) is None
    capped = min_reduced_cost_cluster(inst, 3, node_cap=2)
    assert not capped.exact
    assert price_all_sizes(inst, node_cap=2).exact is False


@settings(max_examples=40)
@given(seed=st.integers(0, 100_000), p=st.integers(4, 12), m=st.integers(2, 3))
def test_price_all_sizes_is_global_minimum(seed, p, m):
    rng = np.random.default_rng(seed)
    ds = random_instance(rng, p, 2, 5)
    duals = rng.random(p)
    inst = PricingInstance.build(ds, range(p), m, duals=duals)
    vals = [v for eta in range(m, 2 * m) if (v := brute_min(ds, list(range(p)), duals, eta)) is not None]
    out = price_all_sizes(inst)
    if not vals or min(vals) >= -1e-7:
        assert out.column is None
    else:
        assert out.column.reduced_cost == pytest.approx(min(vals), abs=1e-9)
