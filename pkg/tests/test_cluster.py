import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import silhouette_score

from cdlsim import cluster
from cdlsim._validation import ContractViolation
from cdlsim.cluster import CP, DF
from oracles import brute_force_kmeans_ss, silhouette_by_hand

FOUR = {0: 1.0, 1: 2.0, 2: 10.0, 3: 11.0}


def _values(rng, n):
    return {i: float(v) for i, v in enumerate(rng.uniform(0, 5, n))}


def test_four_point_example():
    a = cluster.kmeans_1d(FOUR, 2)
    assert a.labels == {0: 0, 1: 0, 2: 1, 3: 1}
    assert a.within_cluster_ss == 1.0
    assert a.centers == [1.5, 10.5]


def test_k_equals_n_is_all_singletons():
    a = cluster.kmeans_1d(FOUR, 4)
    assert a.within_cluster_ss == 0.0 and a.sizes == [1, 1, 1, 1]


def test_identical_values():
    a = cluster.kmeans_1d({i: 3.3 for i in range(5)}, 1)
    assert a.within_cluster_ss == 0.0 and a.centers == [pytest.approx(3.3)]


@pytest.mark.parametrize("k", [0, 5, -1])
def test_k_out_of_range(k):
    with pytest.raises(ContractViolation):
        cluster.kmeans_1d(FOUR, k)


def test_ties_favour_small_left_cluster():
    # splitting 0,1,2 into two has equal-cost options {0}|{1,2} and {0,1}|{2}
    a = cluster.kmeans_1d({0: 0.0, 1: 1.0, 2: 2.0}, 2)
    assert a.sizes == [1, 2]


def test_unsorted_ids_and_string_keys():
    a = cluster.kmeans_1d({"c": 10.0, "a": 1.0, "b": 11.0, "d": 2.0}, 2)
    assert a.members(0) == ["a", "d"] and a.members(1) == ["b", "c"]


def test_matches_brute_force_small_sets():
    rng = np.random.default_rng(77)
    for _ in range(150):
        n = int(rng.integers(1, 13))
        values = _values(rng, n)
        for k in range(1, min(n, 4) + 1):
            assert cluster.kmeans_1d(values, k).within_cluster_ss == brute_force_kmeans_ss(values.values(), k)


def test_prefix_sum_path_agrees_with_direct():
    rng = np.random.default_rng(3)
    x = np.sort(rng.normal(size=200))
    fast = cluster._cost_matrix(x)
    for i, j in [(0, 199), (10, 20), (150, 151), (5, 5)]:
        assert fast[i, j] == pytest.approx(cluster.segment_ss(x[i:j + 1]), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=15), st.integers(1, 4),
       st.floats(0.1, 10), st.floats(-50, 50))
def test_structure_and_affine_invariance(xs, k, scale, shift):
    values = dict(enumerate(xs))
    k = min(k, len(xs))
    a = cluster.kmeans_1d(values, k)
    assert all(s >= 1 for s in a.sizes)
    assert a.centers == sorted(a.centers)
    # clusters are contiguous in sorted order
    order = [a.labels[i] for i, _ in sorted(values.items(), key=lambda kv: (kv[1], kv[0]))]
    assert order == sorted(order)
    moved = cluster.kmeans_1d({i: scale * v + shift for i, v in values.items()}, k)
    assert moved.within_cluster_ss == pytest.approx(scale ** 2 * a.within_cluster_ss, rel=1e-6, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=3, max_size=12))
def test_more_clusters_never_costs_more(xs):
    values = dict(enumerate(xs))
    costs = [cluster.kmeans_1d(values, k).within_cluster_ss for k in range(1, len(xs) + 1)]
    assert all(b <= a + 1e-9 for a, b in zip(costs, costs[1:]))


def test_silhouette_matches_oracles():
    rng = np.random.default_rng(5)
    for _ in range(30):
        n = int(rng.integers(4, 12))
        values = _values(rng, n)
        k = int(rng.integers(2, n))
        labels = cluster.kmeans_1d(values, k).labels
        ours = cluster.silhouette(values, labels)
        x = np.array([values[i] for i in range(n)]).reshape(-1, 1)
        lab = [labels[i] for i in range(n)]
        assert ours == pytest.approx(silhouette_score(x, lab), abs=1e-12)
        assert ours == pytest.approx(silhouette_by_hand(x.ravel(), lab), abs=1e-12)


def test_choose_k_examples():
    assert cluster.choose_k({0: 0.0, 1: 0.1, 2: 50.0, 3: 50.1}, 3) == 2
    assert cluster.choose_k({0: 1.0, 1: 2.0}, 5) == 1
    tight = {0: 0.0, 1: 0.001, 2: 0.002}
    assert cluster.choose_k(tight, 2) == 2
    assert cluster.silhouette(tight, cluster.kmeans_1d(tight, 2).labels) < 0.5


def test_cluster_values_reports_silhouette():
    a = cluster.cluster_values(FOUR)
    assert a.k == 2 and a.silhouette == pytest.approx(silhouette_by_hand([1, 2, 10, 11], [0, 0, 1, 1]))
    assert cluster.cluster_values(FOUR, k=1).silhouette is None


def test_fair_strategy_examples():
    assert set(cluster.fair_strategy(cluster.kmeans_1d(FOUR, 1)).values()) == {CP}
    assert set(cluster.fair_strategy(cluster.kmeans_1d(FOUR, 4)).values()) == {DF}
    # eight close values and two far, separated outliers
    values = {i: 1.0 + 0.01 * i for i in range(8)}
    values.update({8: 5.0, 9: 9.0})
    a = cluster.kmeans_1d(values, 3)
    strategies = cluster.fair_strategy(a)
    assert sum(s == CP for s in strategies.values()) == 8
    assert strategies[8] == DF and strategies[9] == DF
    assert cluster.as_profile(strategies) == (CP,) * 8 + (DF, DF)


def test_to_dict_is_json_ready():
    d = cluster.kmeans_1d(FOUR, 2).to_dict()
    assert d["labels"] == {"0": 0, "1": 0, "2": 1, "3": 1} and d["k"] == 2
