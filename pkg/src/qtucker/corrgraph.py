"""Correlation graph over qubits and the partition search built on it.

Edge weights are pairwise correlation proxies computed from one- and
two-qubit marginals; partitions group strongly correlated qubits so the
inter-block cut weight is small.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numba
import numpy as np

from .errors import DimensionMismatch, InfeasibleConstraint, InvalidBlockSize, OddQubitCount, PartitionMismatch
from .statevec import StateVector

FROBENIUS = "frobenius"
MUTUAL_INFORMATION = "mi"
METRICS = (FROBENIUS, MUTUAL_INFORMATION)

ZERO_WEIGHT_TOL = 1e-10
IMPROVE_TOL = 1e-12
# Exact subset DP is used up to this many qubits; above it networkx's blossom.
DP_MAX_QUBITS = 16
AUGMENT_PER_VERTEX = 2


@dataclass(frozen=True, eq=False)
class CorrelationGraph:
    n: int
    weights: np.ndarray
    metric: str = FROBENIUS
    edges: frozenset = field(default_factory=frozenset)

    def weight(self, i: int, j: int) -> float:
        return float(self.weights[i, j])


@dataclass(frozen=True)
class Partition:
    """Disjoint qubit blocks covering ``range(n)``.

    Block order and in-block qubit order are significant: they fix the
    tensorization (block ``i`` is mode ``i``; first listed qubit is the most
    significant bit of the block index).
    """

    blocks: tuple
    n: int

    def __post_init__(self):
        blocks = tuple(tuple(int(q) for q in b) for b in self.blocks)
        flat = [q for b in blocks for q in b]
        if any(len(b) == 0 for b in blocks) or sorted(flat) != list(range(self.n)):
            raise PartitionMismatch(f"blocks {blocks} do not partition range({self.n})")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def of(cls, blocks: Iterable[Iterable[int]]) -> "Partition":
        blocks = tuple(tuple(b) for b in blocks)
        return cls(blocks, sum(len(b) for b in blocks))

    @property
    def block_size_max(self) -> int:
        return max(len(b) for b in self.blocks)

    @property
    def sizes(self) -> tuple:
        return tuple(len(b) for b in self.blocks)

    def canonical(self) -> "Partition":
        """Same partition with sorted blocks, ordered by smallest member."""
        return Partition(tuple(sorted(tuple(sorted(b)) for b in self.blocks)), self.n)

    def as_lists(self) -> list:
        return [list(b) for b in self.blocks]


@functools.lru_cache(maxsize=64)
def all_pairs(n: int) -> frozenset:
    return frozenset(itertools.combinations(range(n), 2))


@functools.lru_cache(maxsize=64)
def _pair_index(edges: frozenset) -> np.ndarray:
    arr = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    arr.flags.writeable = False
    return arr


def _normalize_edges(edges, n: int) -> frozenset:
    out = set()
    for e in edges:
        i, j = (int(x) for x in e)
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise DimensionMismatch(f"invalid edge ({i}, {j}) for n={n}")
        out.add((min(i, j), max(i, j)))
    return frozenset(out)


# ---------------------------------------------------------------------------
# Marginal accumulation


@numba.njit(cache=True)
def _single_marginals_kernel(amps, n):
    dim = amps.shape[0]
    out = np.zeros((n, 2, 2), dtype=np.complex128)
    for q in range(n):
        bit = 1 << (n - 1 - q)
        for idx in range(dim):
            if idx & bit:
                continue
            a = amps[idx]
            b = amps[idx | bit]
            out[q, 0, 0] += (a * np.conj(a)).real
            out[q, 1, 1] += (b * np.conj(b)).real
            out[q, 0, 1] += a * np.conj(b)
        out[q, 1, 0] = np.conj(out[q, 0, 1])
    return out


@numba.njit(cache=True)
def _pair_marginals_kernel(amps, n, pairs):
    dim = amps.shape[0]
    npairs = pairs.shape[0]
    out = np.zeros((npairs, 4, 4), dtype=np.complex128)
    v = np.empty(4, dtype=np.complex128)
    for p in range(npairs):
        bi = 1 << (n - 1 - pairs[p, 0])
        bj = 1 << (n - 1 - pairs[p, 1])
        mask = bi | bj
        acc = np.zeros((4, 4), dtype=np.complex128)
        for idx in range(dim):
            if idx & mask:
                continue
            v[0] = amps[idx]
            v[1] = amps[idx | bj]
            v[2] = amps[idx | bi]
            v[3] = amps[idx | mask]
            for r in range(4):
                for c in range(r, 4):
                    acc[r, c] += v[r] * np.conj(v[c])
        for r in range(4):
            for c in range(r + 1, 4):
                acc[c, r] = np.conj(acc[r, c])
        out[p] = acc
    return out


@numba.njit(cache=True)
def _frobenius_kernel(singles, rho_ij, pairs):
    # ||rho_ij - rho_i (x) rho_j||_F per pair
    out = np.empty(pairs.shape[0])
    for p in range(pairs.shape[0]):
        a = singles[pairs[p, 0]]
        b = singles[pairs[p, 1]]
        acc = 0.0
        for r in range(4):
            for c in range(4):
                d = rho_ij[p, r, c] - a[r >> 1, c >> 1] * b[r & 1, c & 1]
                acc += d.real * d.real + d.imag * d.imag
        out[p] = np.sqrt(acc)
    return out


def single_marginals(state: StateVector) -> np.ndarray:
    """All one-qubit marginals as an ``(n, 2, 2)`` stack."""
    return _single_marginals_kernel(state.amps, state.n)


def pair_marginals(state: StateVector, pairs: Sequence[tuple]) -> np.ndarray:
    """Two-qubit marginals ``rho_ij`` (row index bit order ``i, j``) for each pair.

    Equivalent to moving axes ``(i, j)`` to the front and forming the
    ``4 x 2**(n-2)`` Gram product, but accumulated in one pass per pair.
    """
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if arr.size and (arr.min() < 0 or arr.max() >= state.n or np.any(arr[:, 0] == arr[:, 1])):
        raise DimensionMismatch(f"invalid pair indices for n={state.n}")
    return _pair_marginals_kernel(state.amps, state.n, arr)


def _entropies(stack: np.ndarray) -> np.ndarray:
    lam = np.linalg.eigvalsh(stack)
    lam = np.where(lam > 1e-12, lam, 1.0)
    return -np.sum(lam * np.log2(lam), axis=-1)


def pair_weights(state: StateVector, metric: str = FROBENIUS, edges=None) -> CorrelationGraph:
    """Build the correlation graph of ``state``.

    Parameters
    ----------
    state : StateVector
    metric : {"frobenius", "mi"}
        ``frobenius`` uses ``||rho_ij - rho_i (x) rho_j||_F``; ``mi`` the
        mutual information ``S(rho_i) + S(rho_j) - S(rho_ij)`` in bits.
    edges : iterable of pairs, optional
        Admissible edges; weights are only computed on these (default: all
        pairs). Other entries of the weight matrix are zero.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    n = state.n
    edges = all_pairs(n) if edges is None else _normalize_edges(edges, n)
    weights = np.zeros((n, n))
    if n < 2 or not edges:
        return CorrelationGraph(n, weights, metric, edges)
    # edges are validated above, so the kernels can be called directly
    idx = _pair_index(edges)
    singles = _single_marginals_kernel(state.amps, n)
    rho_ij = _pair_marginals_kernel(state.amps, n, idx)
    if metric == FROBENIUS:
        w = _frobenius_kernel(singles, rho_ij, idx)
    else:
        s1 = _entropies(singles)
        w = s1[idx[:, 0]] + s1[idx[:, 1]] - _entropies(rho_ij)
    w = np.where(w > ZERO_WEIGHT_TOL, w, 0.0)
    weights[idx[:, 0], idx[:, 1]] = w
    weights[idx[:, 1], idx[:, 0]] = w
    return CorrelationGraph(n, weights, metric, edges)


def perturbed(graph: CorrelationGraph, magnitude: float, rng: np.random.Generator) -> CorrelationGraph:
    """Copy of ``graph`` with symmetric additive uniform noise on its edges."""
    if magnitude <= 0:
        return graph
    w = graph.weights.copy()
    for i, j in sorted(graph.edges):
        w[i, j] += magnitude * rng.random()
        w[j, i] = w[i, j]
    return CorrelationGraph(graph.n, w, graph.metric, graph.edges)


# ---------------------------------------------------------------------------
# Cut objective


def _check_cover(graph: CorrelationGraph, partition: Partition):
    if partition.n != graph.n:
        raise PartitionMismatch(f"partition over {partition.n} qubits, graph over {graph.n}")


def intra_value(graph: CorrelationGraph, partition: Partition) -> float:
    _check_cover(graph, partition)
    total = 0.0
    for b in partition.blocks:
        sub = graph.weights[np.ix_(b, b)]
        total += sub.sum() / 2.0
    return float(total)


def cut_value(graph: CorrelationGraph, partition: Partition) -> float:
    """Sum of weights over pairs whose endpoints lie in different blocks."""
    _check_cover(graph, partition)
    label = np.empty(graph.n, dtype=int)
    for a, b in enumerate(partition.blocks):
        label[list(b)] = a
    crossing = label[:, None] != label[None, :]
    return float(np.triu(graph.weights * crossing, 1).sum())


# ---------------------------------------------------------------------------
# Pair partitions (block size 2)


def _matching_weight(w: np.ndarray, pairs) -> float:
    return float(sum(w[i, j] for i, j in pairs))


def _exact_matching_dp(n: int, w: np.ndarray, edges: frozenset):
    """Maximum-weight perfect matching on ``edges`` by subset DP, or None."""
    adj = [[j for j in range(n) if (min(i, j), max(i, j)) in edges] for i in range(n)]
    full = (1 << n) - 1

    @functools.lru_cache(maxsize=None)
    def best(mask):
        if mask == full:
            return 0.0, ()
        i = 0
        while mask >> i & 1:
            i += 1
        result = None
        for j in adj[i]:
            if mask >> j & 1:
                continue
            sub = best(mask | 1 << i | 1 << j)
            if sub is None:
                continue
            value = w[i, j] + sub[0]
            if result is None or value > result[0]:
                result = (value, ((i, j),) + sub[1])
        return result

    out = best(0)
    best.cache_clear()
    return None if out is None else list(out[1])


def _exact_matching_blossom(n: int, w: np.ndarray, edges: frozenset):
    import networkx as nx

    g = nx.Graph()
    g.add_nodes_from(range(n))
    for i, j in sorted(edges):
        g.add_edge(i, j, weight=float(w[i, j]))
    m = nx.max_weight_matching(g, maxcardinality=True)
    if 2 * len(m) != n:
        return None
    return sorted((min(e), max(e)) for e in m)


def exact_matching(graph: CorrelationGraph, edges=None):
    """Exact maximum-weight perfect matching restricted to ``edges``, or None."""
    edges = graph.edges if edges is None else _normalize_edges(edges, graph.n)
    if graph.n <= DP_MAX_QUBITS:
        return _exact_matching_dp(graph.n, graph.weights, edges)
    return _exact_matching_blossom(graph.n, graph.weights, edges)


def greedy_matching(graph: CorrelationGraph, edges) -> list:
    """Greedy heaviest-edge matching; augments ``edges`` when it gets stuck."""
    n, w = graph.n, graph.weights
    edges = set(_normalize_edges(edges, n))
    free = set(range(n))
    matching = []
    while free:
        cand = [(i, j) for (i, j) in edges if i in free and j in free]
        if not cand:
            added = False
            for u in sorted(free):
                missing = [(min(u, v), max(u, v)) for v in free if v != u]
                missing = [e for e in missing if e not in edges]
                missing.sort(key=lambda e: (-w[e], e))
                for e in missing[:AUGMENT_PER_VERTEX]:
                    edges.add(e)
                    added = True
            if not added:
                raise InfeasibleConstraint(f"cannot complete a pairing of qubits {sorted(free)}")
            continue
        i, j = min(cand, key=lambda e: (-w[e], e))
        matching.append((i, j))
        free -= {i, j}
    return matching, frozenset(edges)


def two_opt(graph: CorrelationGraph, matching, edges=None) -> list:
    """Pairwise-exchange refinement; each accepted move strictly gains weight."""
    w = graph.weights
    matching = [tuple(sorted(p)) for p in matching]

    def ok(e):
        return edges is None or (min(e), max(e)) in edges

    improved = True
    while improved:
        improved = False
        for a, b in itertools.combinations(range(len(matching)), 2):
            (i, k), (j, l) = matching[a], matching[b]
            current = w[i, k] + w[j, l]
            best_gain, best_pairs = IMPROVE_TOL, None
            for p, q in (((i, j), (k, l)), ((i, l), (k, j))):
                if not (ok(p) and ok(q)):
                    continue
                gain = w[p] + w[q] - current
                if gain > best_gain:
                    best_gain, best_pairs = gain, (tuple(sorted(p)), tuple(sorted(q)))
            if best_pairs is not None:
                matching[a], matching[b] = best_pairs
                improved = True
    return matching


def partition_pairs(graph: CorrelationGraph, constraint=None) -> Partition:
    """Pair the qubits so that intra-pair weight is maximal.

    Uses the exact maximum-weight perfect matching on the admissible edges
    (``constraint`` if given, otherwise the graph's edge set). If no perfect
    matching exists there, falls back to greedy matching with minimal edge
    augmentation followed by 2-opt exchanges.
    """
    n = graph.n
    if n % 2:
        raise OddQubitCount(f"cannot pair {n} qubits")
    edges = graph.edges if constraint is None else _normalize_edges(constraint, n)
    pairs = exact_matching(graph, edges)
    if pairs is None:
        greedy, augmented = greedy_matching(graph, edges)
        pairs = two_opt(graph, greedy, augmented)
    return Partition(tuple(sorted(tuple(sorted(p)) for p in pairs)), n)


# ---------------------------------------------------------------------------
# k-set partitions


def _packable(sizes, bins: int, cap: int) -> bool:
    """Can groups of the given sizes be packed into ``bins`` bins of ``cap``?"""
    sizes = sorted(sizes, reverse=True)
    if sum(sizes) > bins * cap:
        return False
    loads = [0] * bins

    def place(t):
        if t == len(sizes):
            return True
        seen = set()
        for b in range(bins):
            if loads[b] + sizes[t] <= cap and loads[b] not in seen:
                seen.add(loads[b])
                loads[b] += sizes[t]
                if place(t + 1):
                    return True
                loads[b] -= sizes[t]
        return False

    return place(0)


def partition_blocks(graph: CorrelationGraph, k: int) -> Partition:
    """Partition into ``ceil(n / k)`` blocks of at most ``k`` qubits.

    Greedy agglomeration merges the pair of groups with the largest total
    inter-group weight (among merges that keep a valid final packing), then
    single-element exchanges between blocks run until none increases the
    intra-block weight.

    With ``k == 2`` and even ``n`` this is the pairing problem, which is
    solved exactly by :func:`partition_pairs` instead.
    """
    n, w = graph.n, graph.weights
    if k < 2 or k > n:
        raise InvalidBlockSize(f"block size {k} not in [2, {n}]")
    if k == 2 and n % 2 == 0:
        return partition_pairs(graph)
    bins = -(-n // k)
    groups = [[q] for q in range(n)]
    while len(groups) > bins:
        best = None
        for a, b in itertools.combinations(range(len(groups)), 2):
            if len(groups[a]) + len(groups[b]) > k:
                continue
            link = w[np.ix_(groups[a], groups[b])].sum()
            if best is not None and link <= best[0]:
                continue
            sizes = [len(g) for t, g in enumerate(groups) if t not in (a, b)]
            sizes.append(len(groups[a]) + len(groups[b]))
            if _packable(sizes, bins, k):
                best = (link, a, b)
        _, a, b = best
        groups[a] = groups[a] + groups[b]
        del groups[b]

    label = np.empty(n, dtype=int)
    for t, g in enumerate(groups):
        label[g] = t
    improved = True
    while improved:
        improved = False
        for x, y in itertools.combinations(range(n), 2):
            gx, gy = label[x], label[y]
            if gx == gy:
                continue
            in_x = label == gx
            in_y = label == gy
            # gain of swapping x and y between their blocks
            gain = (w[y, in_x].sum() - w[y, x]) + (w[x, in_y].sum() - w[x, y])
            gain -= w[x, in_x].sum() + w[y, in_y].sum()
            if gain > IMPROVE_TOL:
                label[x], label[y] = gy, gx
                improved = True
    blocks = [tuple(int(q) for q in np.flatnonzero(label == t)) for t in range(len(groups))]
    blocks = sorted((b for b in blocks if b), key=lambda b: (-len(b), b))
    return Partition(tuple(blocks), n)
