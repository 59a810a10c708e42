import numpy as np
import pytest

from vdecor.errors import ValidationError
from vdecor.geom import KnnIndex, as_locations, conditioning_sets, maxmin_order

from oracles import brute_conditioning_sets, brute_knn, brute_maxmin, check_maxmin_greedy


def test_as_locations_rejects_nonfinite_with_row():
    coords = np.array([[0.0, 0.0], [1.0, np.nan], [2.0, 2.0]])
    with pytest.raises(ValidationError, match="row 1"):
        as_locations(coords)


def test_as_locations_promotes_1d():
    assert as_locations([0.0, 0.5, 1.0]).shape == (3, 1)


def test_knn_singleton():
    idx = KnnIndex([[0.5, 0.5]])
    d, i = idx.query([0.5, 0.5], k=1)
    assert i.tolist() == [0]
    assert d[0] == 0.0


def test_knn_unit_square_tie_breaks_low_index():
    # corners indexed 0..3; from (0,0) the second neighbor is a tie between
    # (0,1) and (1,0), resolved to index 1
    corners = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    idx = KnnIndex(corners)
    _, i = idx.query([0.0, 0.0], k=2)
    assert i.tolist() == [0, 1]
    _, i = idx.query([0.0, 0.0], k=3)
    assert i.tolist() == [0, 1, 2]


@pytest.mark.parametrize("seed", range(6))
def test_knn_matches_exhaustive_scan(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 120))
    coords = rng.random((n, 2))
    idx = KnnIndex(coords)
    targets = rng.random((7, 2))
    for k in (1, min(3, n), n):
        d, i = idx.query(targets, k=k)
        for r, target in enumerate(targets):
            bd, bi = brute_knn(coords, target, k)
            assert i[r].tolist() == bi.tolist()
            np.testing.assert_allclose(d[r], bd, rtol=0, atol=0)


def test_knn_duplicate_points_tie_to_low_index():
    coords = np.array([[0.3, 0.3], [0.7, 0.7], [0.3, 0.3], [0.3, 0.3]])
    idx = KnnIndex(coords)
    _, i = idx.query([0.3, 0.3], k=3)
    assert i.tolist() == [0, 2, 3]


def test_knn_query_validation():
    idx = KnnIndex(np.random.default_rng(0).random((5, 2)))
    with pytest.raises(ValidationError):
        idx.query([0.1, 0.2], k=0)
    with pytest.raises(ValidationError):
        idx.query([0.1, 0.2], k=6)
    with pytest.raises(ValidationError):
        idx.query([0.1, 0.2, 0.3], k=1)
    with pytest.raises(ValidationError):
        idx.query([np.inf, 0.2], k=1)


def test_maxmin_singleton():
    assert maxmin_order([[0.1, 0.9]]).tolist() == [0]


def test_maxmin_collinear_hand_case():
    # points at 0, 0.5, 1: start at the centroid point (index 1), then the
    # 0/1 tie resolves to index 0, leaving index 2
    perm = maxmin_order([[0.0], [0.5], [1.0]])
    assert perm.tolist() == [1, 0, 2]


@pytest.mark.parametrize("seed", range(5))
def test_maxmin_greedy_optimality_bruteforce(seed):
    rng = np.random.default_rng(100 + seed)
    coords = rng.random((50, 2))
    perm = maxmin_order(coords)
    check_maxmin_greedy(coords, perm)
    assert perm.tolist() == brute_maxmin(coords).tolist()


def test_maxmin_deterministic_with_duplicates():
    rng = np.random.default_rng(7)
    base = rng.random((20, 2))
    coords = np.vstack([base, base[:5]])
    p1 = maxmin_order(coords)
    p2 = maxmin_order(coords)
    assert p1.tolist() == p2.tolist()
    assert sorted(p1.tolist()) == list(range(25))
    assert p1.tolist() == brute_maxmin(coords).tolist()


def test_conditioning_sets_first_empty_and_cardinality():
    rng = np.random.default_rng(3)
    coords = rng.random((40, 2))
    perm = maxmin_order(coords)
    cs = conditioning_sets(coords, perm, cap=8)
    assert cs[0].size == 0
    for i in range(40):
        assert cs[i].size == min(i, 8)


def test_conditioning_sets_cap_exceeding_history_gives_full_sets():
    rng = np.random.default_rng(4)
    coords = rng.random((5, 2))
    perm = maxmin_order(coords)
    cs = conditioning_sets(coords, perm, cap=10)
    for i in range(5):
        assert sorted(cs[i].tolist()) == sorted(perm[:i].tolist())


@pytest.mark.parametrize("n,cap,seed", [(200, 30, 0), (200, 30, 1), (64, 5, 2), (150, 12, 3)])
def test_conditioning_sets_match_exhaustive_scan(n, cap, seed):
    rng = np.random.default_rng(seed)
    coords = rng.random((n, 2))
    perm = maxmin_order(coords)
    cs = conditioning_sets(coords, perm, cap)
    expected = brute_conditioning_sets(coords, perm, cap)
    for i in range(n):
        assert cs[i].tolist() == expected[i].tolist(), f"position {i}"


def test_conditioning_sets_rejects_bad_cap_and_order():
    coords = np.random.default_rng(0).random((10, 2))
    perm = maxmin_order(coords)
    with pytest.raises(ValidationError):
        conditioning_sets(coords, perm, cap=0)
    with pytest.raises(ValidationError):
        conditioning_sets(coords, np.zeros(10, dtype=int), cap=3)


def test_padded_sets_roundtrip():
    rng = np.random.default_rng(9)
    coords = rng.random((30, 2))
    perm = maxmin_order(coords)
    cs = conditioning_sets(coords, perm, cap=6)
    idx, mask = cs.padded()
    assert idx.shape == (30, 6)
    for i in range(30):
        assert idx[i, mask[i]].tolist() == cs[i].tolist()
