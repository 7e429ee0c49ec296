"""Graph-level polarization statistics on the user-source interaction graph.

The graph is bipartite: users link to the sources they retweeted, weighted
by count. Nodes are ``("user", id)`` and ``("source", id)`` tuples so ids
may collide across the two kinds.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

import numpy as np

from . import kernels
from .model import InteractionDataset

Node = Hashable
Partition = dict  # node -> side label


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class InteractionGraph:
    """Undirected weighted graph in CSR form.

    Each undirected edge is stored in both endpoint rows; neighbors of a
    row are sorted by node index.
    """

    nodes: tuple
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    index: dict = field(repr=False)

    @classmethod
    def from_edges(cls, nodes: Iterable[Node], edges: Iterable[tuple[Node, Node, int]]) -> "InteractionGraph":
        nodes = tuple(nodes)
        index = {v: i for i, v in enumerate(nodes)}
        if len(index) != len(nodes):
            raise GraphError("duplicate node labels")
        adj: dict[int, dict[int, int]] = {i: {} for i in range(len(nodes))}
        for u, v, w in edges:
            w = int(w)
            if w < 1:
                raise GraphError(f"edge weight must be >= 1, got {w}")
            iu, iv = index[u], index[v]
            if iu == iv:
                raise GraphError(f"self-loop on {u!r}")
            adj[iu][iv] = adj[iu].get(iv, 0) + w
            adj[iv][iu] = adj[iv].get(iu, 0) + w
        indptr = np.zeros(len(nodes) + 1, dtype=np.int64)
        indices, weights = [], []
        for i in range(len(nodes)):
            for j in sorted(adj[i]):
                indices.append(j)
                weights.append(adj[i][j])
            indptr[i + 1] = len(indices)
        return cls(
            nodes=nodes,
            indptr=indptr,
            indices=np.asarray(indices, dtype=np.int64),
            weights=np.asarray(weights, dtype=np.int64),
            index=index,
        )

    def unit_weighted(self) -> "InteractionGraph":
        """Same topology with every edge weight set to 1."""
        return InteractionGraph(self.nodes, self.indptr, self.indices, np.ones_like(self.weights), self.index)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2

    @property
    def total_weight(self) -> int:
        return int(self.weights.sum()) // 2

    def degrees(self) -> np.ndarray:
        """Weighted degree of every node."""
        src = np.repeat(np.arange(self.n_nodes), np.diff(self.indptr))
        return np.bincount(src, weights=self.weights, minlength=self.n_nodes).astype(np.int64)

    def neighbors(self, node: Node) -> dict:
        i = self.index[node]
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return {self.nodes[j]: int(w) for j, w in zip(self.indices[lo:hi], self.weights[lo:hi])}

    def edges(self) -> list[tuple[Node, Node, int]]:
        out = []
        for i in range(self.n_nodes):
            for p in range(self.indptr[i], self.indptr[i + 1]):
                j = int(self.indices[p])
                if i < j:
                    out.append((self.nodes[i], self.nodes[j], int(self.weights[p])))
        return out

    def components(self) -> np.ndarray:
        """Connected-component id per node (ids in order of first node)."""
        comp = np.full(self.n_nodes, -1, dtype=np.int64)
        cid = 0
        for s in range(self.n_nodes):
            if comp[s] >= 0:
                continue
            comp[s] = cid
            queue = deque([s])
            while queue:
                i = queue.popleft()
                for j in self.indices[self.indptr[i] : self.indptr[i + 1]]:
                    if comp[j] < 0:
                        comp[j] = cid
                        queue.append(j)
            cid += 1
        return comp


def build_graph(ds: InteractionDataset) -> InteractionGraph:
    """Bipartite user-source graph, one edge per positive count cell."""
    nodes = [("user", u) for u in ds.users] + [("source", s) for s in ds.sources]
    rows, cols = np.nonzero(ds.counts)
    edges = (
        (("user", ds.users[i]), ("source", ds.sources[j]), int(ds.counts[i, j]))
        for i, j in zip(rows, cols)
    )
    return InteractionGraph.from_edges(nodes, edges)


# -- modularity -----------------------------------------------------------------


def modularity(g: InteractionGraph, partition: Mapping[Node, Hashable]) -> float:
    """Newman modularity ``Q = sum_s (e_ss - a_s^2)`` of a weighted partition."""
    two_m = float(g.weights.sum())
    if two_m <= 0:
        raise GraphError("modularity undefined for a graph without edge weight")
    try:
        labels = [partition[v] for v in g.nodes]
    except KeyError as exc:
        raise GraphError(f"partition does not cover node {exc}") from None
    codes = {lab: c for c, lab in enumerate(dict.fromkeys(labels))}
    side = np.array([codes[lab] for lab in labels], dtype=np.int64)
    k = len(codes)
    deg = g.degrees().astype(np.float64)
    a = np.bincount(side, weights=deg, minlength=k) / two_m
    src = np.repeat(np.arange(g.n_nodes), np.diff(g.indptr))
    inside = side[src] == side[g.indices]
    e = np.bincount(side[src][inside], weights=g.weights[inside].astype(np.float64), minlength=k) / two_m
    return float(np.sum(e - a * a))


@dataclass
class MergeHistory:
    """Sequence of greedy merges from singletons down to ``len(nodes) - len(merges)`` groups.

    ``q[t]`` is the modularity after ``t`` merges; ``best_level`` is the
    first level attaining the maximum.
    """

    merges: list[tuple[int, int]]
    q: list[float]
    n_nodes: int

    @property
    def best_level(self) -> int:
        return int(np.argmax(self.q))

    def groups_at(self, level: int) -> list[list[int]]:
        parent = list(range(self.n_nodes))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, j in self.merges[:level]:
            ri, rj = find(i), find(j)
            parent[max(ri, rj)] = min(ri, rj)
        groups: dict[int, list[int]] = {}
        for v in range(self.n_nodes):
            groups.setdefault(find(v), []).append(v)
        return sorted(groups.values(), key=lambda m: m[0])


def greedy_merge(g: InteractionGraph, stop_at: int = 1) -> MergeHistory:
    """Agglomerative modularity maximization (Clauset-Newman-Moore).

    Adjacent groups are merged by largest modularity gain. Merging continues
    past the modularity peak until ``stop_at`` groups remain; once no
    adjacent pair is left, the two lightest groups are joined.
    """
    n = g.n_nodes
    if n < 2:
        raise GraphError("community detection needs at least 2 nodes")
    two_m = float(g.weights.sum())
    if two_m <= 0:
        raise GraphError("community detection needs edge weight")
    deg = g.degrees().astype(np.float64)
    a = (deg / two_m).tolist()
    e: list[dict[int, float] | None] = [dict() for _ in range(n)]
    for i in range(n):
        for p in range(g.indptr[i], g.indptr[i + 1]):
            e[i][int(g.indices[p])] = float(g.weights[p]) / two_m
    version = [0] * n
    alive = [True] * n
    heap: list = []

    def push(i, j):
        if i > j:
            i, j = j, i
        dq = 2.0 * (e[i][j] - a[i] * a[j])
        heapq.heappush(heap, (-dq, i, j, version[i], version[j]))

    for i in range(n):
        for j in e[i]:
            if i < j:
                push(i, j)

    q = [-float(sum(x * x for x in a))]
    merges: list[tuple[int, int]] = []
    groups = n
    while groups > stop_at:
        pick = None
        while heap:
            negdq, i, j, vi, vj = heapq.heappop(heap)
            if alive[i] and alive[j] and version[i] == vi and version[j] == vj:
                pick = (i, j, -negdq)
                break
        if pick is None:
            # disconnected remainder: join the two lightest groups
            live = sorted((a[v], v) for v in range(n) if alive[v])
            i, j = sorted((live[0][1], live[1][1]))
            pick = (i, j, -2.0 * a[i] * a[j])
        i, j, dq = pick
        ei, ej = e[i], e[j]
        for k, w in ej.items():
            if k == i:
                continue
            ei[k] = ei.get(k, 0.0) + w
            e[k][i] = ei[k]
            del e[k][j]
        ei.pop(j, None)
        e[j] = None
        alive[j] = False
        a[i] += a[j]
        a[j] = 0.0
        version[i] += 1
        for k in ei:
            push(i, k)
        merges.append((i, j))
        q.append(q[-1] + dq)
        groups -= 1
    return MergeHistory(merges=merges, q=q, n_nodes=n)


def _weighted(g: InteractionGraph, weighting: str) -> InteractionGraph:
    if weighting == "weight":
        return g
    if weighting == "unit":
        return g.unit_weighted()
    raise ValueError(f"weighting must be 'weight' or 'unit', got {weighting!r}")


def max_modularity_partition(g: InteractionGraph, weighting: str = "weight") -> Partition:
    """Greedy partition at the modularity peak; labels are 0..k-1."""
    hist = greedy_merge(_weighted(g, weighting), stop_at=1)
    return _label(g, hist.groups_at(hist.best_level))


def detect_communities(g: InteractionGraph, n_sides: int | None = 2, weighting: str = "unit") -> Partition:
    """Greedy modularity communities.

    With ``n_sides=None`` the partition at the modularity peak is returned;
    otherwise merging continues until exactly ``n_sides`` groups remain.
    Side 0 always contains the first node.

    ``weighting="unit"`` (default) ignores interaction counts. With counts,
    a side carrying most of the volume dominates the modularity null model
    and the coarsening splits that side instead of separating communities.
    """
    if n_sides is None:
        return max_modularity_partition(g, weighting)
    if n_sides < 1 or n_sides > g.n_nodes:
        raise GraphError(f"cannot split {g.n_nodes} nodes into {n_sides} sides")
    hist = greedy_merge(_weighted(g, weighting), stop_at=n_sides)
    return _label(g, hist.groups_at(len(hist.merges)))


def _label(g: InteractionGraph, groups: list[list[int]]) -> Partition:
    out = {}
    for lab, members in enumerate(groups):
        for v in members:
            out[g.nodes[v]] = lab
    return out


# -- random-walk controversy ------------------------------------------------------


@dataclass(frozen=True)
class RwcResult:
    """Random-walk controversy and its ingredients.

    ``probabilities[(a, b)]`` is the fraction of walks started on side ``a``
    that ended at an authoritative node of side ``b``.
    """

    value: float
    probabilities: dict
    sides: tuple
    side_sizes: dict
    authoritative: dict
    walks_per_side: int
    resampled_walks: int
    stragglers: int


def default_k_authoritative(side_size: int) -> int:
    return max(1, math.ceil(0.05 * side_size))


def rwc(
    g: InteractionGraph,
    partition: Mapping[Node, Hashable],
    k_authoritative: int | None = None,
    walks_per_side: int = 10_000,
    max_steps: int = 100_000,
    seed: int = 0,
    max_resamples: int = 10_000,
) -> RwcResult:
    """Random-walk controversy ``P_XX * P_YY - P_XY * P_YX``.

    On each side the ``k_authoritative`` nodes with the largest weighted
    degree are authoritative (default: 5% of the side, at least one). Walks
    start at non-authoritative nodes and stop at the first authoritative
    node reached. Walks longer than ``max_steps`` and starts that cannot
    reach any authoritative node are resampled and counted.
    """
    labels = [partition[v] for v in g.nodes]
    distinct = list(dict.fromkeys(labels))
    if len(distinct) != 2:
        raise GraphError(f"RWC needs exactly 2 non-empty sides, got {len(distinct)}")
    # order sides by their first node so relabeling never changes the RNG streams
    side_of = np.array([distinct.index(lab) for lab in labels], dtype=np.int64)
    first = [int(np.flatnonzero(side_of == s)[0]) for s in range(2)]
    order = sorted(range(2), key=lambda s: first[s])
    side_of = np.array([order.index(s) for s in side_of], dtype=np.int64)
    side_labels = tuple(distinct[s] for s in order)

    deg = g.degrees()
    auth_side = np.full(g.n_nodes, -1, dtype=np.int8)
    starts_by_side = []
    authoritative = {}
    for s in range(2):
        members = np.flatnonzero(side_of == s)
        k = default_k_authoritative(len(members)) if k_authoritative is None else int(k_authoritative)
        if k < 1:
            raise GraphError("k_authoritative must be >= 1")
        if k >= len(members):
            raise GraphError(
                f"side {side_labels[s]!r} has {len(members)} nodes; "
                f"cannot designate {k} authoritative nodes and keep walk starts"
            )
        ranked = sorted(members.tolist(), key=lambda v: (-int(deg[v]), v))
        auth = ranked[:k]
        auth_side[auth] = s
        authoritative[side_labels[s]] = [g.nodes[v] for v in auth]
        starts_by_side.append(np.array(sorted(ranked[k:]), dtype=np.int64))

    comp = g.components()
    has_auth = set(comp[auth_side >= 0].tolist())
    reachable = np.array([c in has_auth for c in comp], dtype=np.int8)
    # isolated nodes have no edges to walk
    reachable[np.diff(g.indptr) == 0] = 0
    stragglers = int(sum((reachable[st] == 0).sum() for st in starts_by_side))
    for s in range(2):
        if not reachable[starts_by_side[s]].any():
            raise GraphError(f"no walk start on side {side_labels[s]!r} can reach an authoritative node")

    cumw = np.empty_like(g.weights)
    for i in range(g.n_nodes):
        lo, hi = g.indptr[i], g.indptr[i + 1]
        cumw[lo:hi] = np.cumsum(g.weights[lo:hi])

    probs = {}
    resampled = 0
    for s in range(2):
        end0, end1, res = kernels.random_walks(
            g.indptr, g.indices, cumw, auth_side, reachable, starts_by_side[s],
            int(walks_per_side), int(seed) & ((1 << 64) - 1), first[order[s]],
            int(max_steps), int(max_resamples),
        )
        resampled += int(res)
        probs[(side_labels[s], side_labels[0])] = end0 / walks_per_side
        probs[(side_labels[s], side_labels[1])] = end1 / walks_per_side
    x, y = side_labels
    value = probs[(x, x)] * probs[(y, y)] - probs[(x, y)] * probs[(y, x)]
    return RwcResult(
        value=float(value),
        probabilities=probs,
        sides=side_labels,
        side_sizes={side_labels[s]: int((side_of == s).sum()) for s in range(2)},
        authoritative=authoritative,
        walks_per_side=int(walks_per_side),
        resampled_walks=resampled,
        stragglers=stragglers,
    )
