"""Agglomerative clustering, cophenetic correlation, and dendrogram partitioning.

The partitioning procedure recursively splits a dendrogram at its root merge
as long as the cophenetic correlation between pairwise dissimilarities and
dendrogrammic distances exceeds a threshold. The correlation threshold is
independent of the measure's range, unlike a raw height cut.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dissimilarity import DissimilarityMatrix
from .errors import SingleLeaf, UndefinedCorrelation, UnknownMachine

LINKAGES = ("single", "complete", "average", "ward")

# Monotone linkages guarantee non-decreasing merge heights; ward on arbitrary
# (non squared-Euclidean) measures may produce inversions and is exempt.
_MONOTONE = ("single", "complete", "average")


@dataclass(frozen=True)
class Merge:
    """One agglomeration step joining two subtree nodes at a linkage height."""

    left: int
    right: int
    height: float


@dataclass(frozen=True, eq=False)
class Dendrogram:
    """Binary merge tree. Nodes 0..N-1 are leaves in ``leaves`` order; merge k
    creates node N+k. The last merge is the root."""

    leaves: tuple[str, ...]
    merges: tuple[Merge, ...]
    linkage: str = "single"

    def __post_init__(self) -> None:
        leaves = tuple(self.leaves)
        merges = tuple(self.merges)
        n = len(leaves)
        if n < 1 or len(set(leaves)) != n:
            raise ValueError("leaves must be a non-empty sequence of unique ids")
        if len(merges) != n - 1:
            raise ValueError(f"{n} leaves require {n - 1} merges, got {len(merges)}")
        used = set()
        for k, m in enumerate(merges):
            node = n + k
            for child in (m.left, m.right):
                if not 0 <= child < node:
                    raise ValueError(f"merge {k} references invalid node {child}")
                if child in used:
                    raise ValueError(f"node {child} appears as a child twice")
                used.add(child)
        if self.linkage in _MONOTONE:
            heights = [m.height for m in merges]
            if any(b < a - 1e-12 for a, b in zip(heights, heights[1:])):
                raise ValueError(f"{self.linkage} linkage heights must be non-decreasing")
        object.__setattr__(self, "leaves", leaves)
        object.__setattr__(self, "merges", merges)

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    @property
    def root(self) -> int:
        return self.n_leaves + len(self.merges) - 1

    def node_members(self) -> list[tuple[int, ...]]:
        """Leaf indices under every node, indexed by node id."""
        members: list[tuple[int, ...]] = [(i,) for i in range(self.n_leaves)]
        for m in self.merges:
            members.append(members[m.left] + members[m.right])
        return members

    def to_nested(self) -> dict:
        """Nested JSON-friendly structure: leaves and (height, children) merges."""
        nodes: list[dict] = [{"leaf": mid} for mid in self.leaves]
        for m in self.merges:
            nodes.append({"height": m.height, "children": [nodes[m.left], nodes[m.right]]})
        return nodes[-1]


@dataclass(frozen=True)
class Partition:
    """Disjoint machine-id clusters covering a fleet."""

    clusters: tuple[frozenset[str], ...]

    def __post_init__(self) -> None:
        clusters = tuple(frozenset(c) for c in self.clusters)
        if not clusters or any(not c for c in clusters):
            raise ValueError("clusters must be non-empty")
        total = sum(len(c) for c in clusters)
        if len(frozenset.union(*clusters)) != total:
            raise ValueError("clusters must be disjoint")
        object.__setattr__(self, "clusters", clusters)

    @property
    def machine_ids(self) -> frozenset[str]:
        return frozenset.union(*self.clusters)

    def cluster_of(self, machine_id: str) -> int:
        for idx, c in enumerate(self.clusters):
            if machine_id in c:
                return idx
        raise UnknownMachine(f"{machine_id!r} is not in this partition")


def agglomerate(matrix: DissimilarityMatrix, linkage: str = "single") -> Dendrogram:
    """Bottom-up merge tree via Lance-Williams distance updates.

    Ties between candidate merges are broken by the lexicographically smallest
    (cluster-id, cluster-id), where a cluster's id is its smallest member leaf
    index; this keeps results identical across platforms.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage {linkage!r}; expected one of {LINKAGES}")
    n = matrix.size
    if n < 2:
        raise ValueError("need at least two machines to cluster")
    # cid (smallest member leaf index) -> (tree node, cluster size)
    active: dict[int, tuple[int, int]] = {i: (i, 1) for i in range(n)}
    dist: dict[tuple[int, int], float] = {
        (i, j): float(matrix.values[i, j]) for i in range(n) for j in range(i + 1, n)
    }
    merges: list[Merge] = []
    next_node = n
    while len(active) > 1:
        (a, b), height = min(dist.items(), key=lambda kv: (kv[1], kv[0]))
        node_a, size_a = active[a]
        node_b, size_b = active[b]
        for c in active:
            if c in (a, b):
                continue
            key_ca = (min(a, c), max(a, c))
            key_cb = (min(b, c), max(b, c))
            d_ca, d_cb = dist[key_ca], dist[key_cb]
            if linkage == "single":
                d_new = min(d_ca, d_cb)
            elif linkage == "complete":
                d_new = max(d_ca, d_cb)
            elif linkage == "average":
                d_new = (size_a * d_ca + size_b * d_cb) / (size_a + size_b)
            else:  # ward, assumes squared-Euclidean geometry
                size_c = active[c][1]
                total = size_a + size_b + size_c
                d_new = np.sqrt(
                    max(
                        (
                            (size_a + size_c) * d_ca * d_ca
                            + (size_b + size_c) * d_cb * d_cb
                            - size_c * height * height
                        )
                        / total,
                        0.0,
                    )
                )
            dist[key_ca] = float(d_new)
            del dist[key_cb]
        del dist[(a, b)]
        del active[b]
        merges.append(Merge(node_a, node_b, height))
        active[a] = (next_node, size_a + size_b)
        next_node += 1
    return Dendrogram(matrix.machine_ids, tuple(merges), linkage)


def dendrogrammic_distance(dendrogram: Dendrogram, x: str, y: str) -> float:
    """Height of the lowest merge joining two machines (0 for x == y)."""
    try:
        ix = dendrogram.leaves.index(x)
        iy = dendrogram.leaves.index(y)
    except ValueError as exc:
        raise UnknownMachine(str(exc)) from None
    if ix == iy:
        return 0.0
    members = dendrogram.node_members()
    n = dendrogram.n_leaves
    for k, m in enumerate(dendrogram.merges):
        joined = set(members[n + k])
        if ix in joined and iy in joined:
            return m.height
    raise UnknownMachine(f"{x!r} and {y!r} are never joined")  # pragma: no cover


def pair_heights(dendrogram: Dendrogram) -> dict[tuple[int, int], float]:
    """Dendrogrammic distance for every leaf-index pair."""
    members = dendrogram.node_members()
    heights: dict[tuple[int, int], float] = {}
    for k, m in enumerate(dendrogram.merges):
        for i in members[m.left]:
            for j in members[m.right]:
                heights[(min(i, j), max(i, j))] = m.height
    return heights


def _degenerate(values: np.ndarray) -> bool:
    spread = float(values.max() - values.min())
    scale = max(1.0, float(np.abs(values).max()))
    return spread <= 1e-12 * scale


def cophenetic_correlation(matrix: DissimilarityMatrix, dendrogram: Dendrogram) -> float:
    """Pearson correlation between pairwise dissimilarities and dendrogrammic
    distances over all machine pairs.

    Raises ``UndefinedCorrelation`` for fewer than two pairs or when either
    series has zero variance; the partitioning procedure treats that as
    evidence against further splitting.
    """
    if set(matrix.machine_ids) != set(dendrogram.leaves):
        raise UnknownMachine("matrix and dendrogram cover different machines")
    n = dendrogram.n_leaves
    if n < 3:
        raise UndefinedCorrelation(f"{n} leaves give fewer than two pairs")
    heights = pair_heights(dendrogram)
    col = {mid: k for k, mid in enumerate(matrix.machine_ids)}
    s, t = [], []
    for i in range(n):
        for j in range(i + 1, n):
            a, b = dendrogram.leaves[i], dendrogram.leaves[j]
            s.append(matrix.values[col[a], col[b]])
            t.append(heights[(i, j)])
    s_arr = np.asarray(s)
    t_arr = np.asarray(t)
    if _degenerate(s_arr) or _degenerate(t_arr):
        raise UndefinedCorrelation("zero variance in pairwise or dendrogrammic distances")
    ds = s_arr - s_arr.mean()
    dt = t_arr - t_arr.mean()
    return float((ds * dt).sum() / np.sqrt((ds * ds).sum() * (dt * dt).sum()))


def _subtree(dendrogram: Dendrogram, node: int) -> Dendrogram:
    n = dendrogram.n_leaves
    if node < n:
        return Dendrogram((dendrogram.leaves[node],), (), dendrogram.linkage)
    # Collect the subtree's merge indices in original (bottom-up) order.
    wanted: list[int] = []
    stack = [node]
    while stack:
        cur = stack.pop()
        if cur >= n:
            k = cur - n
            wanted.append(k)
            stack.extend((dendrogram.merges[k].left, dendrogram.merges[k].right))
    wanted.sort()
    members = dendrogram.node_members()
    leaf_idx = sorted(members[node])
    leaves = tuple(dendrogram.leaves[i] for i in leaf_idx)
    remap = {i: new for new, i in enumerate(leaf_idx)}
    for new, k in enumerate(wanted):
        remap[n + k] = len(leaves) + new
    merges = tuple(
        Merge(remap[dendrogram.merges[k].left], remap[dendrogram.merges[k].right],
              dendrogram.merges[k].height)
        for k in wanted
    )
    return Dendrogram(leaves, merges, dendrogram.linkage)


def cut_at_highest_level(dendrogram: Dendrogram) -> tuple[Dendrogram, Dendrogram]:
    """The two subtrees below the root merge."""
    if dendrogram.n_leaves < 2:
        raise SingleLeaf("cannot cut a single-leaf dendrogram")
    root_merge = dendrogram.merges[-1]
    return _subtree(dendrogram, root_merge.left), _subtree(dendrogram, root_merge.right)


def partition(
    dendrogram: Dendrogram,
    matrix: DissimilarityMatrix,
    thr_cc: float,
) -> Partition:
    """Recursive top-down partitioning of a dendrogram.

    A subtree is split at its root while its cophenetic correlation (computed
    against the matrix restricted to the subtree's machines) strictly exceeds
    ``thr_cc``. Undefined correlations (two leaves, or a structureless group
    with equal distances) stop the recursion.
    """
    return Partition(tuple(frozenset(c) for c in _partition_rec(dendrogram, matrix, thr_cc)))


def _partition_rec(dendrogram: Dendrogram, matrix: DissimilarityMatrix, thr_cc: float) -> list:
    if dendrogram.n_leaves == 1:
        return [set(dendrogram.leaves)]
    sub_matrix = matrix.restrict(dendrogram.leaves)
    try:
        cc = cophenetic_correlation(sub_matrix, dendrogram)
    except UndefinedCorrelation:
        return [set(dendrogram.leaves)]
    if cc > thr_cc:
        d1, d2 = cut_at_highest_level(dendrogram)
        return _partition_rec(d1, matrix, thr_cc) + _partition_rec(d2, matrix, thr_cc)
    return [set(dendrogram.leaves)]
