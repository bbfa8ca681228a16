"""Dissimilarity graphs, noise models, domain sampling and laterative orderings."""

import heapq
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInputError
from .geometry import Configuration, as_points

__all__ = [
    "DissimilarityGraph",
    "LaterativeOrdering",
    "NoiseSpec",
    "DomainSpec",
    "make_rng",
    "geometric_graph",
    "sample_domain",
    "apply_noise",
    "find_laterative_ordering",
    "is_laterative_ordering",
    "greedy_cliques",
    "write_graph",
    "read_graph",
]

NOISE_MODELS = ("additive-gaussian", "multiplicative-gaussian", "none")
CLIQUE_STRATEGIES = ("greedy", "minimal")


def make_rng(seed):
    """Counter-based generator (Philox) for a 64-bit seed or seed sequence."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


class DissimilarityGraph:
    """Undirected graph on ``range(n)`` with squared dissimilarities on edges.

    Edges are stored once, as ``(i, j)`` with ``i < j``, sorted
    lexicographically; ``d2[k]`` belongs to ``edges[k]``.
    """

    def __init__(self, n, edges, d2):
        n = int(n)
        if n < 1:
            raise InvalidInputError("graph needs at least one node")
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        w = np.asarray(d2, dtype=float).ravel()
        if e.shape[0] != w.shape[0]:
            raise InvalidInputError("edges and d2 differ in length")
        if e.size and (e.min() < 0 or e.max() >= n):
            raise InvalidInputError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise InvalidInputError("self-loops are not allowed")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidInputError("squared dissimilarities must be finite and >= 0")
        e = np.sort(e, axis=1)
        order = np.lexsort((e[:, 1], e[:, 0]))
        e, w = e[order], w[order]
        if e.shape[0] > 1 and np.any(np.all(e[1:] == e[:-1], axis=1)):
            raise InvalidInputError("duplicate edges")
        e.flags.writeable = False
        w.flags.writeable = False
        self._n = n
        self._edges = e
        self._d2 = w
        self._csr = None

    @property
    def n(self):
        return self._n

    @property
    def edges(self):
        return self._edges

    @property
    def d2(self):
        return self._d2

    @property
    def n_edges(self):
        return self._edges.shape[0]

    def with_d2(self, d2):
        """Same topology, new squared dissimilarities (aligned with ``edges``)."""
        g = DissimilarityGraph.__new__(DissimilarityGraph)
        w = np.array(d2, dtype=float).ravel()
        if w.shape != self._d2.shape:
            raise InvalidInputError("d2 must align with the edge list")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidInputError("squared dissimilarities must be finite and >= 0")
        w.flags.writeable = False
        g._n, g._edges, g._d2, g._csr = self._n, self._edges, w, None
        return g

    def _adjacency(self):
        if self._csr is None:
            m = self.n_edges
            rows = np.concatenate([self._edges[:, 0], self._edges[:, 1]])
            cols = np.concatenate([self._edges[:, 1], self._edges[:, 0]])
            vals = np.concatenate([self._d2, self._d2])
            eid = np.concatenate([np.arange(m), np.arange(m)])
            order = np.lexsort((cols, rows))
            indptr = np.zeros(self._n + 1, dtype=np.int64)
            np.add.at(indptr, rows + 1, 1)
            self._csr = (np.cumsum(indptr), cols[order], vals[order], eid[order])
        return self._csr

    def neighbors(self, i):
        indptr, cols, _, _ = self._adjacency()
        return cols[indptr[i]:indptr[i + 1]]

    def neighbor_d2(self, i):
        indptr, _, vals, _ = self._adjacency()
        return vals[indptr[i]:indptr[i + 1]]

    def degrees(self):
        return np.diff(self._adjacency()[0])

    def max_degree(self):
        return int(self.degrees().max()) if self.n_edges else 0

    def neighbor_sets(self):
        return [set(self.neighbors(i).tolist()) for i in range(self._n)]

    def has_edge(self, i, j):
        nb = self.neighbors(i)
        k = np.searchsorted(nb, j)
        return bool(k < nb.shape[0] and nb[k] == j)

    def d2_between(self, i, targets):
        """Squared dissimilarities from ``i`` to each of ``targets`` (all must be neighbors)."""
        nb = self.neighbors(i)
        targets = np.asarray(targets)
        k = np.searchsorted(nb, targets)
        if np.any(k >= nb.shape[0]) or np.any(nb[np.minimum(k, nb.shape[0] - 1)] != targets):
            raise InvalidInputError(f"node {i} is not adjacent to all requested targets")
        return self.neighbor_d2(i)[k]

    def sub_d2(self, nodes):
        """Complete ``m x m`` squared-dissimilarity matrix on a clique."""
        nodes = list(nodes)
        m = len(nodes)
        out = np.zeros((m, m))
        for a in range(m):
            if a + 1 < m:
                out[a, a + 1:] = self.d2_between(nodes[a], nodes[a + 1:])
        return out + out.T

    def to_dense(self, fill=np.nan):
        """``n x n`` matrix of squared dissimilarities, ``fill`` off the edge set."""
        out = np.full((self._n, self._n), fill, dtype=float)
        np.fill_diagonal(out, 0.0)
        out[self._edges[:, 0], self._edges[:, 1]] = self._d2
        out[self._edges[:, 1], self._edges[:, 0]] = self._d2
        return out

    def __eq__(self, other):
        if not isinstance(other, DissimilarityGraph):
            return NotImplemented
        return (
            self._n == other._n
            and np.array_equal(self._edges, other._edges)
            and np.array_equal(self._d2, other._d2)
        )

    __hash__ = None

    def __repr__(self):
        return f"DissimilarityGraph(n={self._n}, n_edges={self.n_edges})"


@dataclass(frozen=True)
class LaterativeOrdering:
    """Vertex order whose prefix is a clique and whose later vertices each
    have at least ``p + 1`` earlier neighbors.

    ``landmarks[k]`` lists the earlier neighbors of
    ``order[len(seed_clique) + k]`` used to laterate it.
    """

    order: tuple
    seed_clique: tuple
    landmarks: tuple = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(v) for v in self.order))
        object.__setattr__(self, "seed_clique", tuple(int(v) for v in self.seed_clique))
        object.__setattr__(
            self, "landmarks", tuple(tuple(int(u) for u in lm) for lm in self.landmarks)
        )

    def position_landmarks(self):
        """Pairs ``(node, landmark_ids)`` for every laterated node, in order."""
        c = len(self.seed_clique)
        return list(zip(self.order[c:], self.landmarks))


@dataclass(frozen=True)
class NoiseSpec:
    model: str = "additive-gaussian"
    variance: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.model not in NOISE_MODELS:
            raise InvalidInputError(f"unknown noise model {self.model!r}")
        if not np.isfinite(self.variance) or self.variance < 0:
            raise InvalidInputError("noise variance must be finite and >= 0")


@dataclass(frozen=True)
class DomainSpec:
    """Rectangle ``[-k, k] x [-1/k, 1/k]`` with its ``h``-scaled center removed."""

    h: float = 0.0
    kappa: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.h < 1.0:
            raise InvalidInputError(f"hollow fraction h must lie in [0, 1), got {self.h}")
        if not self.kappa > 0.0:
            raise InvalidInputError(f"kappa must be > 0, got {self.kappa}")

    @property
    def half_extents(self):
        return self.kappa, 1.0 / self.kappa

    @property
    def area(self):
        a, b = self.half_extents
        return 4.0 * a * b * (1.0 - self.h ** 2)

    def contains(self, points):
        x = np.atleast_2d(points)
        a, b = self.half_extents
        outer = (np.abs(x[:, 0]) <= a) & (np.abs(x[:, 1]) <= b)
        hole = (np.abs(x[:, 0]) <= self.h * a) & (np.abs(x[:, 1]) <= self.h * b)
        return outer & ~hole


def geometric_graph(config, radius):
    """Edges between all pairs within ``radius`` (inclusive), exact squared distances."""
    if not radius > 0:
        raise InvalidInputError("radius must be > 0")
    x = as_points(config)
    n = x.shape[0]
    pairs = cKDTree(x).query_pairs(radius * (1 + 1e-9) + 1e-300, output_type="ndarray")
    if pairs.size == 0:
        return DissimilarityGraph(n, np.zeros((0, 2), dtype=np.int64), np.zeros(0))
    diff = x[pairs[:, 0]] - x[pairs[:, 1]]
    d2 = np.einsum("ij,ij->i", diff, diff)
    keep = np.sqrt(d2) <= radius
    return DissimilarityGraph(n, pairs[keep], d2[keep])


def sample_domain(spec, n, seed):
    """``n`` i.i.d. uniform points on the hollow rectangle, by rejection."""
    if not isinstance(spec, DomainSpec):
        spec = DomainSpec(*spec)
    n = int(n)
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    rng = make_rng(seed)
    a, b = spec.half_extents
    accept_rate = 1.0 - spec.h ** 2
    out = []
    have = 0
    while have < n:
        batch = int((n - have) / accept_rate * 1.1) + 16
        cand = rng.uniform(-1.0, 1.0, size=(batch, 2)) * (a, b)
        cand = cand[spec.contains(cand)]
        out.append(cand)
        have += cand.shape[0]
    return Configuration(np.concatenate(out)[:n])


def apply_noise(graph, spec):
    """Corrupt exact squared distances on every edge.

    Returns
    -------
    noisy : DissimilarityGraph
        Same edge set, noisy squared dissimilarities.
    eps : ndarray of shape (n_edges,)
        Realized additive perturbation ``d2_noisy - d2_exact`` per edge,
        after truncation at zero. Multiplicative noise is reported in the
        same additive form.
    """
    exact = graph.d2
    if spec.model == "none" or spec.variance == 0.0:
        return graph, np.zeros_like(exact)
    rng = make_rng(spec.seed)
    z = rng.standard_normal(exact.shape[0]) * np.sqrt(spec.variance)
    if spec.model == "additive-gaussian":
        noisy = np.maximum(exact + z, 0.0)
    else:
        noisy = np.maximum(1.0 + z, 0.0) ** 2 * exact
    return graph.with_d2(noisy), noisy - exact


def greedy_cliques(graph, p, max_size=None, n_starts=20, nbr_sets=None):
    """Cliques of size >= p + 1 grown greedily from the highest-degree vertices.

    From each start vertex, repeatedly add the common neighbor of all
    current members having the most neighbors among the remaining common
    neighbors (ties: smaller id). Stops when no common neighbor is left or
    ``max_size`` is reached. Yields each distinct clique once.
    """
    if max_size is None:
        max_size = graph.n
    nbr = graph.neighbor_sets() if nbr_sets is None else nbr_sets
    deg = graph.degrees()
    starts = np.lexsort((np.arange(graph.n), -deg))[:n_starts]
    seen = set()
    for v in starts.tolist():
        members = [v]
        cand = set(nbr[v])
        while cand and len(members) < max_size:
            c = min(cand, key=lambda u: (-len(nbr[u] & cand), u))
            members.append(c)
            cand &= nbr[c]
        key = frozenset(members)
        if len(members) >= p + 1 and key not in seen:
            seen.add(key)
            yield members


def frontier_walk(graph, clique, p, accept=None):
    """Grow a laterative ordering from ``clique``.

    Repeatedly places the unplaced vertex with the most placed neighbors
    (ties: smaller id) among those with at least ``p + 1``. If ``accept``
    is given, it is called as ``accept(v, landmark_ids)`` and a ``False``
    answer defers ``v`` until it gains another placed neighbor.

    Returns ``(order, landmarks)``; ``order`` is shorter than ``n`` when the
    frontier stalls.
    """
    n = graph.n
    indptr, cols, _, _ = graph._adjacency()
    placed = np.zeros(n, dtype=bool)
    count = np.zeros(n, dtype=np.int64)
    order = list(clique)
    landmarks = []
    heap = []
    need = p + 1

    def bump(v):
        for u in cols[indptr[v]:indptr[v + 1]].tolist():
            if not placed[u]:
                count[u] += 1
                if count[u] >= need:
                    heapq.heappush(heap, (-int(count[u]), u))

    placed[list(clique)] = True
    for v in clique:
        bump(v)
    while heap and len(order) < n:
        negc, v = heapq.heappop(heap)
        if placed[v] or -negc != count[v]:
            continue
        nb = cols[indptr[v]:indptr[v + 1]]
        lm = nb[placed[nb]]
        if accept is not None and not accept(v, lm):
            continue
        order.append(v)
        landmarks.append(lm)
        placed[v] = True
        bump(v)
    return order, landmarks


def find_laterative_ordering(graph, p, clique_strategy="greedy", max_clique_size=None,
                             n_starts=20):
    """Search for a laterative ordering in dimension ``p``.

    Parameters
    ----------
    graph : DissimilarityGraph
    p : int
        Embedding dimension.
    clique_strategy : {"greedy", "minimal"}
        ``"greedy"`` grows the seed clique up to ``max_clique_size``
        (default ``3 * (p + 1)``); ``"minimal"`` stops at ``p + 1`` nodes.
    n_starts : int
        Number of highest-degree start vertices to try.

    Returns
    -------
    LaterativeOrdering or None
        ``None`` when the frontier stalls for every seed clique tried. The
        search is heuristic; ``None`` does not prove that no ordering exists.
    """
    p = int(p)
    if p < 1:
        raise InvalidInputError("p must be >= 1")
    if graph.n < p + 1:
        raise InvalidInputError(f"need n >= p + 1 = {p + 1} nodes, got {graph.n}")
    if clique_strategy not in CLIQUE_STRATEGIES:
        raise InvalidInputError(f"unknown clique strategy {clique_strategy!r}")
    if clique_strategy == "minimal":
        cap = p + 1
    else:
        cap = 3 * (p + 1) if max_clique_size is None else int(max_clique_size)
        if cap < p + 1:
            raise InvalidInputError("max_clique_size must be >= p + 1")
    for clique in greedy_cliques(graph, p, cap, n_starts):
        order, landmarks = frontier_walk(graph, clique, p)
        if len(order) == graph.n:
            return LaterativeOrdering(tuple(order), tuple(clique), tuple(landmarks))
    return None


def is_laterative_ordering(graph, ordering, p):
    """Exact check of every ordering invariant against ``graph``."""
    try:
        order = [int(v) for v in ordering.order]
        clique = [int(v) for v in ordering.seed_clique]
        n, c = graph.n, len(clique)
        if sorted(order) != list(range(n)) or c < p + 1 or order[:c] != clique:
            return False
        if len(ordering.landmarks) != n - c:
            return False
        for a in range(c):
            for b in range(a + 1, c):
                if not graph.has_edge(clique[a], clique[b]):
                    return False
        pos = {v: k for k, v in enumerate(order)}
        for k, lm in enumerate(ordering.landmarks):
            v = order[c + k]
            lm = [int(u) for u in lm]
            if len(lm) < p + 1 or len(set(lm)) != len(lm):
                return False
            for u in lm:
                if pos.get(u, n) >= c + k or not graph.has_edge(v, u):
                    return False
        return True
    except (AttributeError, TypeError, ValueError, IndexError, KeyError):
        return False


_HEADER = re.compile(r"#\s*n=(\d+)\s+p=(\d+|None)")


def write_graph(path, graph, p=None):
    with open(path, "w") as fh:
        fh.write(f"# n={graph.n} p={p}\n")
        fh.write("i,j,d2\n")
        for (i, j), w in zip(graph.edges.tolist(), graph.d2.tolist()):
            fh.write(f"{i},{j},{format(w, '.17g')}\n")


def read_graph(path):
    """Return ``(graph, p)``; ``p`` is ``None`` if the header does not record it."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    m = _HEADER.match(lines[0]) if lines else None
    if m is None:
        raise InvalidInputError(f"{path}: missing '# n=<n> p=<p>' header")
    n = int(m.group(1))
    p = None if m.group(2) == "None" else int(m.group(2))
    body = [ln for ln in lines[1:] if ln and not ln.startswith("i,")]
    edges = np.array([[int(t) for t in ln.split(",")[:2]] for ln in body], dtype=np.int64)
    d2 = np.array([float(ln.split(",")[2]) for ln in body])
    return DissimilarityGraph(n, edges.reshape(-1, 2), d2), p
