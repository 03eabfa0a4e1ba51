"""Subset selection and data partitioning.

Three schemes are provided: uniform random subsets, farthest point
clustering (greedy k-centre) and recursive projection clustering, which
splits clusters at the median of a projection onto the line through two
random member points until no cluster is larger than ``m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import _as_2d

SELECTORS = ("random", "fpc")

# Attempts at drawing two distinct pivot points before falling back to an index split.
PIVOT_RETRIES = 10


@dataclass(frozen=True)
class SubsetChoice:
    indices: np.ndarray
    method: str
    seed: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return self.indices.shape[0]


def _check_m(n: int, m: int) -> None:
    if m < 1:
        raise ValueError(f"subset size must be at least 1, got {m}")
    if m > n:
        raise ValueError(f"subset size {m} exceeds the number of points {n}")


def select_random(n: int, m: int, seed: int = 0) -> SubsetChoice:
    """Uniform sample of ``m`` distinct indices out of ``range(n)``, sorted."""
    _check_m(n, m)
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=m, replace=False))
    return SubsetChoice(idx, "random", seed)


def _sqdist_to(X: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = X - c
    return np.einsum("ij,ij->i", diff, diff)


def select_fpc(X, m: int, seed: int = 0):
    """Farthest point clustering (Gonzalez's greedy k-centre).

    The first centre is a seeded random row; every later centre is the
    point farthest from its nearest chosen centre. Returns the centres (in
    order of selection) and, for every row of ``X``, the position of its
    nearest centre within that list.
    """
    X = _as_2d(X)
    n = X.shape[0]
    _check_m(n, m)
    rng = np.random.default_rng(seed)
    first = int(rng.integers(n))
    centres = [first]
    chosen = np.zeros(n, dtype=bool)
    chosen[first] = True
    nearest = _sqdist_to(X, X[first])
    assignment = np.zeros(n, dtype=np.intp)
    for k in range(1, m):
        nxt = int(np.argmax(nearest))
        if nearest[nxt] == 0.0:
            # every remaining point duplicates a centre
            nxt = int(np.flatnonzero(~chosen)[0])
        centres.append(nxt)
        chosen[nxt] = True
        d = _sqdist_to(X, X[nxt])
        closer = d < nearest
        closer[nxt] = True
        nearest[closer] = d[closer]
        assignment[closer] = k
    return SubsetChoice(np.array(centres), "fpc", seed), assignment


def choose_subset(X, m: int, selector: str = "random", seed: int = 0) -> SubsetChoice:
    if selector == "random":
        return select_random(_as_2d(X).shape[0], m, seed)
    if selector == "fpc":
        return select_fpc(X, m, seed)[0]
    raise ValueError(f"unknown selector {selector!r}; expected one of {SELECTORS}")


@dataclass
class RpcNode:
    """A split (pivots, direction, threshold, children) or a leaf (``leaf`` id)."""

    pivot_a: np.ndarray | None = None
    pivot_b: np.ndarray | None = None
    threshold: float = 0.0
    left: "RpcNode | None" = None
    right: "RpcNode | None" = None
    leaf: int | None = None
    by_index: bool = False
    size: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.leaf is not None

    def score(self, X: np.ndarray) -> np.ndarray:
        # Fixed summation order over dimensions: a point scores bit-identically
        # whether it is projected alone or inside a batch.
        direction = self.pivot_b - self.pivot_a
        s = np.zeros(X.shape[0])
        for d in range(X.shape[1]):
            s += (X[:, d] - self.pivot_a[d]) * direction[d]
        return s


@dataclass
class RpcTree:
    root: RpcNode
    leaves: list = field(default_factory=list)
    m: int = 1
    dim: int = 0
    seed: int = 0

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def depth(self) -> int:
        def walk(node):
            return 0 if node.is_leaf else 1 + max(walk(node.left), walk(node.right))
        return walk(self.root)

    def internal_nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            if not node.is_leaf:
                yield node
                stack.extend([node.right, node.left])


def build_rpc(X, m: int, seed: int = 0) -> RpcTree:
    """Recursive projection clustering of the rows of ``X`` into leaves of at most ``m`` points.

    Each split sorts the projections stably over ascending row indices, so
    the left child receives the first ``ceil(c/2)`` points and ties at the
    median go left. The stored threshold is the largest projection sent
    left.
    """
    X = _as_2d(X)
    if m < 1:
        raise ValueError(f"cluster size must be at least 1, got {m}")
    rng = np.random.default_rng(seed)
    leaves: list[np.ndarray] = []

    def split(idx: np.ndarray) -> RpcNode:
        c = idx.shape[0]
        if c <= m:
            leaves.append(idx)
            return RpcNode(leaf=len(leaves) - 1, size=c)
        half = (c + 1) // 2
        pts = X[idx]
        node = None
        for _ in range(PIVOT_RETRIES):
            i, j = rng.choice(c, size=2, replace=False)
            if np.any(pts[i] != pts[j]):
                node = RpcNode(pivot_a=pts[i].copy(), pivot_b=pts[j].copy(), size=c)
                break
        if node is None:
            node = RpcNode(pivot_a=pts[0].copy(), pivot_b=pts[0].copy(), by_index=True, size=c)
            left_idx, right_idx = idx[:half], idx[half:]
        else:
            s = node.score(pts)
            order = np.argsort(s, kind="stable")
            node.threshold = float(s[order[half - 1]])
            left_idx = np.sort(idx[order[:half]])
            right_idx = np.sort(idx[order[half:]])
        node.left = split(left_idx)
        node.right = split(right_idx)
        return node

    root = split(np.arange(X.shape[0], dtype=np.intp))
    return RpcTree(root=root, leaves=leaves, m=m, dim=X.shape[1], seed=seed)


def rpc_assign(tree: RpcTree, Xstar) -> np.ndarray | int:
    """Leaf id for each query point by descending the split tree.

    Scores equal to a node's threshold go left. Accepts one point (returns
    an int) or a matrix of points (returns an array).
    """
    single = np.ndim(Xstar) == 1
    Xstar = _as_2d(Xstar)
    if Xstar.shape[1] != tree.dim:
        raise ValueError(f"dimension mismatch: {Xstar.shape[1]} vs {tree.dim}")
    out = np.empty(Xstar.shape[0], dtype=np.intp)
    stack = [(tree.root, np.arange(Xstar.shape[0]))]
    while stack:
        node, rows = stack.pop()
        if rows.size == 0:
            continue
        if node.is_leaf:
            out[rows] = node.leaf
            continue
        if node.by_index:
            stack.append((node.left, rows))
            continue
        go_left = node.score(Xstar[rows]) <= node.threshold
        stack.append((node.left, rows[go_left]))
        stack.append((node.right, rows[~go_left]))
    return int(out[0]) if single else out
