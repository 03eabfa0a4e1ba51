import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpapprox.selection import (
    build_rpc,
    choose_subset,
    rpc_assign,
    select_fpc,
    select_random,
)


def brute_force_fpc(X, m, first):
    """Recompute every point's nearest-centre distance from scratch each round."""
    centres = [first]
    for _ in range(1, m):
        best, best_d = None, -1.0
        for i in range(len(X)):
            d = min(float(np.sum((X[i] - X[c]) ** 2)) for c in centres)
            if d > best_d:
                best, best_d = i, d
        centres.append(best)
    return centres


def check_partition(tree, n, m):
    allidx = np.concatenate(tree.leaves)
    assert np.array_equal(np.sort(allidx), np.arange(n))
    assert max(len(leaf) for leaf in tree.leaves) <= m
    for node in tree.internal_nodes():
        sizes = [sub_size(node.left), sub_size(node.right)]
        assert sizes[0] - sizes[1] in (0, 1)


def sub_size(node):
    return node.size


def replay_descent(tree, x):
    node = tree.root
    while node.leaf is None:
        if node.by_index:
            node = node.left
            continue
        s = 0.0
        for d in range(len(x)):
            s += (x[d] - node.pivot_a[d]) * (node.pivot_b[d] - node.pivot_a[d])
        node = node.left if s <= node.threshold else node.right
    return node.leaf


# random subsets

def test_random_full_subset():
    assert select_random(7, 7, seed=3).indices.tolist() == list(range(7))


def test_random_deterministic():
    a, b = select_random(100, 10, seed=9), select_random(100, 10, seed=9)
    assert np.array_equal(a.indices, b.indices)
    assert len(set(a.indices.tolist())) == 10


def test_random_uniform_inclusion():
    counts = np.zeros(10)
    for s in range(100_000):
        counts[select_random(10, 5, seed=s).indices] += 1
    np.testing.assert_allclose(counts / 100_000, 0.5, atol=0.01)


@pytest.mark.parametrize("m", [0, 11])
def test_random_bad_m(m):
    with pytest.raises(ValueError):
        select_random(10, m)


# farthest point clustering

def test_fpc_single_centre(rng):
    X = rng.standard_normal((20, 2))
    choice, assign = select_fpc(X, 1, seed=4)
    assert choice.indices[0] == np.random.default_rng(4).integers(20)
    assert np.all(assign == 0)


def test_fpc_line_example():
    X = np.array([[0.0], [1.0], [2.0], [10.0]])
    seed = next(s for s in range(100) if np.random.default_rng(s).integers(4) == 0)
    choice, assign = select_fpc(X, 2, seed=seed)
    assert choice.indices.tolist() == [0, 3]
    assert assign.tolist() == [0, 0, 0, 1]


def test_fpc_matches_brute_force_200(rng):
    X = rng.standard_normal((200, 3))
    choice, _ = select_fpc(X, 8, seed=17)
    assert choice.indices.tolist() == brute_force_fpc(X, 8, int(choice.indices[0]))


def test_fpc_assignment_is_nearest_centre(rng):
    X = rng.standard_normal((150, 2))
    choice, assign = select_fpc(X, 10, seed=1)
    C = X[choice.indices]
    d = ((X[:, None, :] - C[None]) ** 2).sum(-1)
    np.testing.assert_allclose(d[np.arange(150), assign], d.min(axis=1))


def test_fpc_duplicates_still_distinct():
    X = np.zeros((6, 2))
    X[3] = 1.0
    choice, _ = select_fpc(X, 4, seed=0)
    assert len(set(choice.indices.tolist())) == 4


def test_fpc_permutation_invariant(rng):
    X = rng.standard_normal((50, 2))
    choice, _ = select_fpc(X, 6, seed=2)
    perm = rng.permutation(50)
    pos = int(np.flatnonzero(perm == choice.indices[0])[0])
    seed = next(s for s in range(10_000) if np.random.default_rng(s).integers(50) == pos)
    choice_p, _ = select_fpc(X[perm], 6, seed=seed)
    np.testing.assert_array_equal(X[perm][choice_p.indices], X[choice.indices])


def test_fpc_linear_cost(rng):
    def best_time(n):
        X = rng.standard_normal((n, 4))
        times = []
        for _ in range(3):
            t0 = time.perf_counter()
            select_fpc(X, 32, seed=0)
            times.append(time.perf_counter() - t0)
        return min(times)

    assert best_time(80_000) / best_time(40_000) <= 3.0


def test_choose_subset_dispatch(rng):
    X = rng.standard_normal((30, 2))
    assert choose_subset(X, 5, "fpc", 1).method == "fpc"
    assert choose_subset(X, 5, "random", 1).method == "random"
    with pytest.raises(ValueError):
        choose_subset(X, 5, "kmeans", 1)


# recursive projection clustering

def test_rpc_single_leaf(rng):
    tree = build_rpc(rng.standard_normal((5, 2)), 8, seed=0)
    assert tree.n_leaves == 1 and tree.leaves[0].tolist() == list(range(5))
    assert rpc_assign(tree, rng.standard_normal(2)) == 0


def test_rpc_eight_by_two(rng):
    tree = build_rpc(rng.standard_normal((8, 3)), 2, seed=5)
    assert sorted(len(leaf) for leaf in tree.leaves) == [2, 2, 2, 2]


def test_rpc_leaf_sizes_500(rng):
    tree = build_rpc(rng.standard_normal((500, 3)), 64, seed=7)
    s = math.ceil(math.log2(500 / 64))
    lo, hi = math.floor(500 / 2 ** s), math.ceil(500 / 2 ** s)
    assert all(lo <= len(leaf) <= hi for leaf in tree.leaves)
    check_partition(tree, 500, 64)
    assert tree.depth() == s


def test_rpc_training_points_route_home(rng):
    X = rng.standard_normal((300, 4))
    tree = build_rpc(X, 20, seed=3)
    assigned = rpc_assign(tree, X)
    for leaf, idx in enumerate(tree.leaves):
        assert np.all(assigned[idx] == leaf)
    assert rpc_assign(tree, X[17]) == assigned[17]


def test_rpc_descent_replay(rng):
    X = rng.standard_normal((400, 3))
    tree = build_rpc(X, 30, seed=11)
    Q = 2.0 * rng.standard_normal((1000, 3))
    got = rpc_assign(tree, Q)
    assert got.tolist() == [replay_descent(tree, q) for q in Q]


def test_rpc_ties_go_left():
    # collinear duplicates: projections tie at the median
    X = np.array([[0.0], [1.0], [1.0], [1.0], [1.0], [2.0]])
    tree = build_rpc(X, 3, seed=0)
    check_partition(tree, 6, 3)
    assert sorted(len(leaf) for leaf in tree.leaves) == [3, 3]


def test_rpc_identical_points_split_by_index():
    X = np.ones((9, 2))
    tree = build_rpc(X, 2, seed=0)
    check_partition(tree, 9, 2)
    assert tree.root.by_index
    assert tree.leaves[0].tolist() == [0, 1]
    assert rpc_assign(tree, np.ones(2)) == 0


def test_rpc_deterministic(rng):
    X = rng.standard_normal((200, 2))
    a, b = build_rpc(X, 16, seed=4), build_rpc(X, 16, seed=4)
    assert all(np.array_equal(p, q) for p, q in zip(a.leaves, b.leaves))


def test_rpc_dimension_mismatch(rng):
    tree = build_rpc(rng.standard_normal((20, 2)), 4, seed=0)
    with pytest.raises(ValueError):
        rpc_assign(tree, rng.standard_normal((3, 3)))
    with pytest.raises(ValueError):
        build_rpc(rng.standard_normal((20, 2)), 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 300), st.integers(1, 64), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_rpc_structure_property(n, m, dim, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, dim))
    if seed % 3 == 0:
        X = np.round(X)  # many duplicates
    tree = build_rpc(X, m, seed=seed)
    check_partition(tree, n, m)
    assigned = rpc_assign(tree, X)
    assert np.all((assigned >= 0) & (assigned < tree.n_leaves))
    if seed % 3 != 0:
        # with tied projections a point can sit right of the median yet descend left
        for leaf, idx in enumerate(tree.leaves):
            assert np.all(assigned[idx] == leaf)
