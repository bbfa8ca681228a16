"""Sequential lateration ('first' and 'best' variants) and its error constants."""

import itertools
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embedders import classical_lateration, classical_scaling
from .errors import (
    DegenerateLandmarksError,
    DegenerateStepError,
    InvalidInputError,
    NotLaterableError,
)
from .geometry import Configuration, as_points, diameter, embedding_error, shape_stats, write_configuration
from .graph import CLIQUE_STRATEGIES, LaterativeOrdering, frontier_walk, greedy_cliques, make_rng
from .stress import s_stress

__all__ = [
    "EmbeddingResult",
    "TheoryBound",
    "PerturbationCheck",
    "SEED_SCALED",
    "sequential_laterate_first",
    "sequential_laterate_best",
    "enumerate_cliques",
    "theory_bound",
    "accuracy_constant",
    "noise_threshold",
    "verify_perturbation_bound",
    "write_embedding_result",
]

SEED_SCALED = -1


@dataclass
class EmbeddingResult:
    """Output of sequential lateration.

    ``provenance[i]`` is :data:`SEED_SCALED` for nodes embedded by
    classical scaling, otherwise the position of node ``i`` in
    ``ordering.order`` (the lateration step).
    """

    config: Configuration
    ordering: LaterativeOrdering
    provenance: np.ndarray = field(repr=False)
    stress: float
    wall_time: float
    scaling_residual: float = 0.0
    n_candidates: int = 1

    @property
    def n_seed_scaled(self):
        return int(np.sum(self.provenance == SEED_SCALED))

    @property
    def n_laterated(self):
        return int(np.sum(self.provenance != SEED_SCALED))


def _walk(graph, clique, p):
    """Scale ``clique`` then laterate outward. Returns (coords, order, landmarks, deferred, residual)."""
    n = graph.n
    clique = sorted(int(v) for v in clique)
    y = np.zeros((n, p))
    scaled = classical_scaling(graph.sub_d2(clique), p)
    y[clique] = scaled.config.points
    deferred = [0]

    def accept(v, lm):
        try:
            y[v] = classical_lateration(y[lm], graph.d2_between(v, lm))
        except DegenerateLandmarksError:
            deferred[0] += 1
            return False
        return True

    order, landmarks = frontier_walk(graph, clique, p, accept)
    return y, order, landmarks, deferred[0], scaled.residual


def _package(graph, p, y, order, landmarks, clique, residual, t0, n_candidates=1):
    n = graph.n
    c = len(clique)
    prov = np.full(n, SEED_SCALED, dtype=np.int64)
    prov[np.asarray(order[c:], dtype=np.int64)] = np.arange(c, n)
    ordering = LaterativeOrdering(
        tuple(int(v) for v in order), tuple(sorted(int(v) for v in clique)), tuple(landmarks)
    )
    config = Configuration(y)
    return EmbeddingResult(
        config, ordering, prov, s_stress(config, graph), time.perf_counter() - t0,
        residual, n_candidates,
    )


def _clique_cap(p, clique_strategy, max_clique_size):
    if clique_strategy not in CLIQUE_STRATEGIES:
        raise InvalidInputError(f"unknown clique strategy {clique_strategy!r}")
    if clique_strategy == "minimal":
        return p + 1
    cap = 3 * (p + 1) if max_clique_size is None else int(max_clique_size)
    if cap < p + 1:
        raise InvalidInputError("max_clique_size must be >= p + 1")
    return cap


def _check_p(graph, p):
    p = int(p)
    if p < 1:
        raise InvalidInputError("p must be >= 1")
    if graph.n < p + 1:
        raise InvalidInputError(f"need n >= p + 1 = {p + 1} nodes, got {graph.n}")
    return p


def sequential_laterate_first(graph, p, clique_strategy="greedy", max_clique_size=None,
                              n_starts=20):
    """Embed by classical scaling of a greedy seed clique, then lateration.

    Every node is laterated from all of its already placed neighbors.
    Nodes whose landmark set is degenerate are deferred until they gain
    another placed neighbor. Seed cliques are tried in the order of
    :func:`~seqlat.graph.find_laterative_ordering`; the first walk that
    places every node is returned.

    Raises
    ------
    NotLaterableError
        No seed clique leads to a laterative ordering.
    DegenerateStepError
        Orderings exist, but every walk stalled on degenerate landmarks.
    """
    t0 = time.perf_counter()
    p = _check_p(graph, p)
    cap = _clique_cap(p, clique_strategy, max_clique_size)
    stalled_at = None
    for clique in greedy_cliques(graph, p, cap, n_starts):
        y, order, landmarks, deferred, residual = _walk(graph, clique, p)
        if len(order) == graph.n:
            return _package(graph, p, y, order, landmarks, clique, residual, t0)
        if deferred:
            stalled_at = max(stalled_at or 0, len(order))
    if stalled_at is not None:
        raise DegenerateStepError(
            f"lateration stalled on degenerate landmark sets after {stalled_at} nodes",
            stalled_at,
        )
    raise NotLaterableError(f"no laterative ordering found in dimension {p}")


def enumerate_cliques(graph, size, nbr_sets=None):
    """All cliques with exactly ``size`` nodes, as increasing tuples, in lexicographic order."""
    nbr = graph.neighbor_sets() if nbr_sets is None else nbr_sets

    def extend(clique, cand):
        if len(clique) == size:
            yield tuple(clique)
            return
        for v in sorted(cand):
            yield from extend(clique + [v], {u for u in cand & nbr[v] if u > v})

    for v in range(graph.n):
        yield from extend([v], {u for u in nbr[v] if u > v})


def _sample_cliques(graph, size, budget, rng, nbr):
    """Up to ``budget`` distinct ``size``-cliques by random growth.

    Each draw starts at a uniform random vertex and adds uniform random
    common neighbors until the clique is full or no candidate is left.
    The draw is not uniform over cliques; it is cheap and reproducible.
    """
    out = set()
    sorted_nbr = [sorted(s) for s in nbr]
    for _ in range(20 * budget):
        if len(out) >= budget:
            break
        v = int(rng.integers(graph.n))
        members = [v]
        cand = sorted_nbr[v]
        while cand and len(members) < size:
            u = cand[int(rng.integers(len(cand)))]
            members.append(u)
            cand = [w for w in cand if w != u and w in nbr[u]]
        if len(members) == size:
            out.add(tuple(sorted(members)))
    return sorted(out)


def sequential_laterate_best(graph, p, budget=200, seed=0, clique_strategy="greedy",
                             max_clique_size=None, n_starts=20):
    """Run the lateration walk from many seed cliques and keep the lowest s-stress.

    Candidates are the seed cliques tried by the 'first' variant plus all
    ``(p + 1)``-cliques of the graph when there are at most ``budget`` of
    them, otherwise up to ``budget`` distinct cliques drawn by seeded
    random growth (see :func:`_sample_cliques`). Ties in stress go to the
    lexicographically smallest sorted seed tuple.
    """
    t0 = time.perf_counter()
    p = _check_p(graph, p)
    budget = int(budget)
    if budget < 1:
        raise InvalidInputError("budget must be >= 1")
    cap = _clique_cap(p, clique_strategy, max_clique_size)
    nbr = graph.neighbor_sets()

    sample = list(itertools.islice(enumerate_cliques(graph, p + 1, nbr), budget + 1))
    if len(sample) > budget:
        sample = _sample_cliques(graph, p + 1, budget, make_rng(seed), nbr)
    candidates = {tuple(sorted(c)) for c in greedy_cliques(graph, p, cap, n_starts, nbr)}
    candidates.update(sample)

    best = None
    any_deferred = False
    for clique in sorted(candidates):
        y, order, landmarks, deferred, residual = _walk(graph, clique, p)
        if len(order) < graph.n:
            any_deferred |= bool(deferred)
            continue
        stress = s_stress(y, graph)
        if best is None or stress < best[0]:
            best = (stress, y, order, landmarks, clique, residual)
    if best is None:
        if any_deferred:
            raise DegenerateStepError("every candidate walk stalled on degenerate landmarks", 0)
        raise NotLaterableError(f"no laterative ordering found in dimension {p}")
    _, y, order, landmarks, clique, residual = best
    return _package(graph, p, y, order, landmarks, clique, residual, t0, len(candidates))


@dataclass(frozen=True)
class TheoryBound:
    """Worst-case constants of the sequential lateration error bound.

    ``A_n`` bounds ``min_g sum_i ||y_i - g(x_i)||^2 / sum_E eps_ij^2``
    whenever ``sum_E eps_ij^2 <= sqrt(sigma4_max)``.
    """

    alpha: float
    omega_min: float
    A_n: float
    sigma4_max: float
    C1: float
    C2: float
    n: int
    p: int


def _mix(alpha, C1, C2):
    return max(C1 * alpha, C2 / (1.0 + C2 * alpha))


def _growth(base, k):
    # base**k, saturating to inf instead of raising OverflowError
    try:
        return base ** k
    except OverflowError:
        return np.inf


def accuracy_constant(alpha, omega_min, n, p, C1, C2):
    """Closed form ``(1 + C2 a)^(n-p-1) / ((p+1) w^2) * max{C1 a, C2 / (1 + C2 a)}``.

    Returns ``inf`` when the power overflows a double, which happens for
    realistic ``n`` and aspect ratios.
    """
    return _growth(1.0 + C2 * alpha, n - p - 1) / ((p + 1) * omega_min ** 2) * _mix(alpha, C1, C2)


def noise_threshold(alpha, omega_min, n, p, C1, C2):
    """Admissible ``eta^4``: the minimum of the seed-scaling and lateration conditions."""
    first = (p + 1) ** 2 * (omega_min / C1) ** 4
    second = (p + 1) * omega_min ** 4 / (
        C2 ** 2 * _growth(1.0 + C2 * alpha, n - p - 2) * _mix(alpha, C1, C2)
    )
    return min(first, second)


def theory_bound(latent, ordering, C1=1.0, C2=1.0, p=None):
    """Evaluate the bound constants on the landmark sets of ``ordering``.

    The landmark sets are the seed clique and, for every laterated node,
    its landmark ids; ``alpha`` is the largest squared aspect ratio and
    ``omega_min`` the smallest width among them.
    """
    x = as_points(latent)
    p = x.shape[1] if p is None else int(p)
    if C1 < 1 or C2 < 1:
        raise InvalidInputError("C1 and C2 must be >= 1")
    sets = [list(ordering.seed_clique)] + [list(lm) for lm in ordering.landmarks]
    alpha = 0.0
    omega_min = np.inf
    for k, idx in enumerate(sets):
        st = shape_stats(x[idx])
        if st.width == 0.0:
            raise DegenerateLandmarksError(f"landmark set {k} has zero width")
        alpha = max(alpha, st.aspect)
        omega_min = min(omega_min, st.width)
    n = x.shape[0]
    return TheoryBound(
        alpha, omega_min,
        accuracy_constant(alpha, omega_min, n, p, C1, C2),
        noise_threshold(alpha, omega_min, n, p, C1, C2),
        float(C1), float(C2), n, p,
    )


@dataclass(frozen=True)
class PerturbationCheck:
    total_error: float
    eps_sq_sum: float
    ratio: float
    violation: bool


def verify_perturbation_bound(latent, graph_noisy, result, tol=None):
    """Empirical constant ``A`` for one instance.

    ``total_error`` is the aligned sum of squared deviations and
    ``eps_sq_sum`` the realized ``sum_E eps_ij^2`` recovered from the
    latent distances. ``violation`` is set when the noise is zero but the
    error exceeds ``tol`` (default ``1e-16 * n * diameter^2``).
    """
    x = as_points(latent)
    config = result.config if hasattr(result, "config") else result
    y = as_points(config)
    if x.shape != y.shape or graph_noisy.n != x.shape[0]:
        raise InvalidInputError("latent, graph and result sizes differ")
    n = x.shape[0]
    e = graph_noisy.edges
    diff = x[e[:, 0]] - x[e[:, 1]]
    eps = graph_noisy.d2 - np.einsum("ij,ij->i", diff, diff)
    eps_sq = float(eps @ eps)
    total = n * embedding_error(y, x)
    if tol is None:
        tol = 1e-16 * n * diameter(x) ** 2
    if eps_sq == 0.0:
        return PerturbationCheck(total, 0.0, np.nan, total > tol)
    return PerturbationCheck(total, eps_sq, total / eps_sq, False)


def write_embedding_result(path, result, **extra):
    """Write the configuration CSV and a JSON diagnostics sidecar next to it."""
    path = Path(path)
    write_configuration(path, result.config)
    info = {
        "stress": result.stress,
        "n_seed_scaled": result.n_seed_scaled,
        "n_laterated": result.n_laterated,
        "seed_clique": list(result.ordering.seed_clique),
        "wall_time": result.wall_time,
        "scaling_residual": result.scaling_residual,
        "n_candidates": result.n_candidates,
    }
    info.update(extra)
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(info, indent=2, default=float) + "\n")
    return sidecar
