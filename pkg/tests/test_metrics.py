import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from polarscope.metrics import (
    METRIC_COLUMNS,
    MetricInputError,
    UnsupportedConfigurationError,
    compute_all,
    inverted_normalized_entropy,
    lack_of_diversity_raw,
    normalize_ld,
    opinion_entropy,
    orient,
    oriented_opinion,
    polarization_score,
    source_entropy,
    spearman,
    split_source_entropy,
)

from conftest import make_dataset


def brute_inverted_entropy(counts, n, log=math.log2):
    # independent evaluation in base 2 with explicit 0 log 0 = 0
    total = float(sum(counts))
    h = 0.0
    for c in counts:
        if c:
            p = c / total
            h -= p * log(p)
    return 1.0 - (h / log(n) if n > 1 else 0.0)


# -- polarization score ---------------------------------------------------------


@pytest.mark.parametrize(
    "counts, expected",
    [({"pro": 7, "anti": 0}, 1.0), ({"pro": 4, "anti": 4}, 0.5), ({"pro": 3, "anti": 1}, 0.75)],
)
def test_polarization_score_examples(counts, expected):
    assert polarization_score(counts) == expected


def test_polarization_score_errors():
    with pytest.raises(MetricInputError):
        polarization_score({"a": 0, "b": 0})
    with pytest.raises(UnsupportedConfigurationError):
        polarization_score({"a": 3})


def test_polarization_score_lower_bound_many_communities():
    assert polarization_score([2, 2, 2, 2]) == 0.25


# -- lack of diversity ----------------------------------------------------------


def test_ld_raw_hand_values():
    v = lack_of_diversity_raw({"m1": 5, "m2": 2}, {"m1": 2, "m2": 10}, 10)
    assert v == pytest.approx(5 * math.log(5), abs=1e-12)
    assert v == pytest.approx(8.0472, abs=1e-4)
    assert lack_of_diversity_raw({"m1": 1}, {"m1": 1}, 10) == pytest.approx(2.3026, abs=1e-4)
    assert lack_of_diversity_raw({"m": 9}, {"m": 10}, 10) == 0.0


def test_ld_raw_population_errors():
    with pytest.raises(MetricInputError):
        lack_of_diversity_raw({"m": 1}, {"m": 0}, 10)
    with pytest.raises(MetricInputError):
        lack_of_diversity_raw({"m": 1}, {}, 10)
    with pytest.raises(MetricInputError):
        lack_of_diversity_raw({"m": 1}, {"m": 11}, 10)


def test_normalize_ld():
    out = normalize_ld([8.05, 4.02, 0.0])
    assert out[0] == 1.0 and out[2] == 0.0
    assert out[1] == pytest.approx(0.4994, abs=1e-4)
    assert normalize_ld([3.0, 3.0]) == [1.0, 1.0]
    assert normalize_ld([2.5]) == [1.0]
    assert normalize_ld([0.0, 0.0]) == [0.0, 0.0]
    with pytest.raises(MetricInputError):
        normalize_ld([])


# -- entropy -------------------------------------------------------------------


@pytest.mark.parametrize(
    "counts, n, expected, tol",
    [
        ([4, 4], 2, 0.0, 1e-15),
        ([9, 0], 2, 1.0, 0.0),
        ([3, 1], 2, 0.1887, 1e-4),
        ([8, 1, 1], 20, 0.7867, 1e-4),
        ([5], 1, 1.0, 0.0),
    ],
)
def test_entropy_examples(counts, n, expected, tol):
    assert inverted_normalized_entropy(counts, n) == pytest.approx(expected, abs=tol)


def test_entropy_accepts_mapping():
    assert inverted_normalized_entropy({"a": 3, "b": 1}, 2) == inverted_normalized_entropy([3, 1], 2)


def test_entropy_errors():
    with pytest.raises(MetricInputError):
        inverted_normalized_entropy([0, 0], 2)
    with pytest.raises(MetricInputError):
        inverted_normalized_entropy([1, 1, 1], 2)
    with pytest.raises(MetricInputError):
        inverted_normalized_entropy([1], 0)
    with pytest.raises(MetricInputError):
        inverted_normalized_entropy([-1, 2], 2)


def test_entropy_exhaustive_oracle():
    for size in range(1, 5):
        for counts in itertools.product(range(6), repeat=size):
            if sum(counts) == 0:
                continue
            got = inverted_normalized_entropy(counts, size)
            assert abs(got - brute_inverted_entropy(counts, size)) <= 1e-9


def test_entropy_matches_scipy():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(2, 21))
        counts = rng.integers(0, 50, size=n)
        counts[0] += 1
        expected = 1.0 - sps.entropy(counts) / math.log(n)
        assert inverted_normalized_entropy(counts.tolist(), n) == pytest.approx(expected, abs=1e-12)


count_maps = st.lists(st.integers(0, 1000), min_size=1, max_size=20).filter(lambda c: sum(c) > 0)


@given(count_maps)
def test_entropy_base_invariance(counts):
    n = len(counts)
    nat = brute_inverted_entropy(counts, n, log=math.log)
    two = brute_inverted_entropy(counts, n, log=math.log2)
    assert abs(nat - two) <= 1e-12
    assert abs(inverted_normalized_entropy(counts, n) - two) <= 1e-12


@given(count_maps, st.integers(1, 50))
def test_entropy_scale_invariance(counts, k):
    n = len(counts)
    assert inverted_normalized_entropy([c * k for c in counts], n) == pytest.approx(
        inverted_normalized_entropy(counts, n), abs=1e-12
    )


@given(count_maps, st.integers(0, 10))
def test_entropy_bounds(counts, extra):
    v = inverted_normalized_entropy(counts, len(counts) + extra)
    assert 0.0 <= v <= 1.0


# -- dataset-level metrics ----------------------------------------------------


def test_opinion_and_source_entropy(tiny_ds):
    assert opinion_entropy(tiny_ds, "alice") == 1.0
    assert opinion_entropy(tiny_ds, "bob") == 0.0
    assert source_entropy(tiny_ds, "alice") == pytest.approx(brute_inverted_entropy([4, 1], 4), abs=1e-12)


def test_source_entropy_twenty_source_universe():
    rows = [("u", f"s{j:02d}", "x" if j < 10 else "y", c) for j, c in enumerate([8, 1, 1] + [0] * 17)]
    # a second user touches every source so all 20 enter the registry
    rows += [("w", f"s{j:02d}", "x" if j < 10 else "y", 1) for j in range(20)]
    ds = make_dataset(rows)
    assert len(ds.sources) == 20
    assert source_entropy(ds, "u") == pytest.approx(0.7867, abs=1e-4)


def test_oriented_opinion(tiny_ds):
    assert oriented_opinion(tiny_ds, "carol", "pro") == 1.0
    assert oriented_opinion(tiny_ds, "alice", "pro") == 0.0
    assert oriented_opinion(tiny_ds, "bob", "pro") == 0.5
    assert oriented_opinion(tiny_ds, "bob", "anti") == 0.5
    with pytest.raises(KeyError):
        oriented_opinion(tiny_ds, "bob", "neutral")


def test_oriented_opinion_requires_two_communities():
    ds = make_dataset([("u", "a", "x", 1), ("u", "b", "y", 1), ("u", "c", "z", 1)])
    with pytest.raises(UnsupportedConfigurationError):
        oriented_opinion(ds, "u", "x")


def test_orient_anchors():
    assert orient(0.0, True) == orient(0.0, False) == 0.5
    assert orient(1.0, True) == 1.0
    assert orient(1.0, False) == 0.0


def test_split_source_entropy():
    pro = [f"p{j}" for j in range(10)]
    rows = [("one", "p0", "pro", 5), ("one", "a0", "anti", 1)]
    rows += [("uniform", s, "pro", 3) for s in pro]
    rows += [("antionly", "a0", "anti", 2)]
    ds = make_dataset(rows)
    assert split_source_entropy(ds, "one", "pro") == 1.0
    assert split_source_entropy(ds, "antionly", "pro") == 1.0
    assert split_source_entropy(ds, "uniform", "pro") == pytest.approx(0.0, abs=1e-15)


# -- spearman ---------------------------------------------------------------


def test_spearman_examples():
    assert tuple(spearman([1, 2, 3, 4], [1, 2, 3, 4])) == (1.0, 0.0)
    assert spearman([1, 2, 3, 4], [4, 3, 2, 1]).coefficient == -1.0
    assert spearman([1, 2, 3, 4, 5], [1, 3, 2, 5, 4]).coefficient == pytest.approx(0.8, abs=1e-12)


def test_spearman_errors():
    with pytest.raises(ValueError):
        spearman([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        spearman([1], [1])
    with pytest.raises(ValueError):
        spearman([1, 1, 1], [1, 2, 3])


def test_spearman_displacement_hand():
    # 20 items, threshold 1 position: swapping neighbors moves by exactly 1 (not counted)
    a = list(range(20))
    b = a[:]
    b[0], b[1] = b[1], b[0]
    assert spearman(a, b).rank_displacement_fraction == 0.0
    b = a[:]
    b[0], b[10] = b[10], b[0]
    assert spearman(a, b).rank_displacement_fraction == pytest.approx(2 / 20)


@given(
    st.lists(st.integers(-5, 5), min_size=3, max_size=40),
    st.lists(st.integers(-5, 5), min_size=3, max_size=40),
)
def test_spearman_matches_scipy_with_ties(a, b):
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    if len(set(a)) < 2 or len(set(b)) < 2:
        return
    expected = sps.spearmanr(a, b).statistic
    assert spearman(a, b).coefficient == pytest.approx(expected, abs=1e-12)


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=50, unique=True))
def test_spearman_monotone_anchors(a):
    a = sorted(a)
    assert spearman(a, a).coefficient == 1.0
    assert abs(spearman(a, a[::-1]).coefficient + 1.0) <= 1e-12


# -- batch -----------------------------------------------------------------


def test_compute_all_matches_kernels(tiny_ds):
    mv = compute_all(tiny_ds, "pro")
    assert [m.user_id for m in mv] == list(tiny_ds.users)
    for m in mv:
        assert m.h_op == opinion_entropy(tiny_ds, m.user_id)
        assert m.h_so == source_entropy(tiny_ds, m.user_id)
        assert m.h_op_oriented == oriented_opinion(tiny_ds, m.user_id, "pro")
        for c in tiny_ds.communities:
            assert m.h_so_per_community[c] == split_source_entropy(tiny_ds, m.user_id, c)
    assert max(m.ld for m in mv) == 1.0


def test_compute_all_ld_modes(tiny_ds):
    share = compute_all(tiny_ds, ld_mode="share")
    count = compute_all(tiny_ds, ld_mode="count")
    # alice: a1 has 4 of 5 interactions, reach 2 of 3 users
    alice_share = next(m for m in share if m.user_id == "alice")
    alice_count = next(m for m in count if m.user_id == "alice")
    assert alice_share.ld_raw == pytest.approx(max(0.8 * math.log(1.5), 0.2 * math.log(3)))
    assert alice_count.ld_raw == pytest.approx(max(4 * math.log(1.5), 1 * math.log(3)))
    with pytest.raises(ValueError):
        compute_all(tiny_ds, ld_mode="bits")


def test_compute_all_two_users():
    ds = make_dataset([("u", "a", "x", 2), ("v", "b", "y", 1)])
    mv = compute_all(ds)
    assert len(mv) == 2
    assert all(m.h_op_oriented is None for m in mv)


def test_compute_all_single_community_users():
    ds = make_dataset([("u", "a", "x", 2), ("v", "b", "y", 1), ("w", "a", "x", 5)])
    for m in compute_all(ds, "x"):
        assert m.rho == 1.0 and m.h_op == 1.0


def test_compute_all_one_community_dataset():
    ds = make_dataset([("u", "a", "x", 2), ("v", "b", "x", 1)])
    for m in compute_all(ds):
        assert m.rho == 1.0 and m.h_op == 1.0


def test_compute_all_unknown_positive(tiny_ds):
    with pytest.raises(KeyError):
        compute_all(tiny_ds, "neutral")


def test_metric_vector_serialization(tiny_ds):
    m = compute_all(tiny_ds, "pro")[0]
    row = m.as_row(tiny_ds.communities)
    assert len(row) == len(METRIC_COLUMNS) + len(tiny_ds.communities)
    assert json.loads(json.dumps(m.to_dict()))["user_id"] == m.user_id


def test_paper_profile_ld_span(paper_data):
    ds, _ = paper_data
    ld = [m.ld for m in compute_all(ds, "pro")]
    assert max(ld) == 1.0 and min(ld) > 0.0


# -- properties over random datasets --------------------------------------------


user_rows = st.lists(st.integers(0, 6), min_size=6, max_size=6).filter(lambda r: sum(r) > 0)


def _ds_from_matrix(matrix):
    rows = []
    for i, r in enumerate(matrix):
        for j, c in enumerate(r):
            rows.append((f"u{i}", f"s{j}", "anti" if j < 3 else "pro", c))
    return make_dataset(rows, communities=["anti", "pro"])


@settings(max_examples=60, deadline=None)
@given(st.lists(user_rows, min_size=1, max_size=8), st.integers(2, 9))
def test_user_scaling_leaves_shape_metrics_unchanged(matrix, k):
    base = compute_all(_ds_from_matrix(matrix), "pro")
    scaled_matrix = [[c * k for c in matrix[0]]] + matrix[1:]
    scaled = compute_all(_ds_from_matrix(scaled_matrix), "pro")
    for a, b in zip(base, scaled):
        assert (a.rho, a.h_op, a.h_so, a.h_op_oriented) == (b.rho, b.h_op, b.h_so, b.h_op_oriented)
        assert a.h_so_per_community == b.h_so_per_community
    # raw-count LD of the scaled user grows linearly
    base_c = compute_all(_ds_from_matrix(matrix), ld_mode="count")
    scaled_c = compute_all(_ds_from_matrix(scaled_matrix), ld_mode="count")
    assert scaled_c[0].ld_raw == pytest.approx(k * base_c[0].ld_raw, rel=1e-12, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(user_rows, min_size=1, max_size=8), st.integers(2, 9), st.sampled_from(["share", "count"]))
def test_population_scaling_leaves_ld_unchanged(matrix, k, mode):
    base = compute_all(_ds_from_matrix(matrix), ld_mode=mode)
    scaled = compute_all(_ds_from_matrix([[c * k for c in r] for r in matrix]), ld_mode=mode)
    for a, b in zip(base, scaled):
        assert a.ld == pytest.approx(b.ld, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(user_rows, min_size=1, max_size=8))
def test_metric_bounds_two_communities(matrix):
    for m in compute_all(_ds_from_matrix(matrix), "pro"):
        assert 0.5 <= m.rho <= 1.0
        for v in (m.h_op, m.h_so, m.h_op_oriented, *m.h_so_per_community.values(), m.ld):
            assert 0.0 <= v <= 1.0
        assert (m.rho == 1.0) == (m.h_op == 1.0)
        if m.h_op == 0.0:
            assert m.h_op_oriented == 0.5
