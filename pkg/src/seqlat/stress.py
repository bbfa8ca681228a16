"""S-stress evaluation and minimization (gradient descent, SMACOF)."""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import factorized

from .errors import DegenerateStepError, InvalidInputError, NotLaterableError, NumericalFailureError
from .geometry import Configuration, as_points
from .graph import DissimilarityGraph, make_rng

__all__ = [
    "OptimizerConfig",
    "StressFit",
    "ScalingInstance",
    "s_stress",
    "s_stress_gradient",
    "raw_stress",
    "initial_configuration",
    "minimize_gd",
    "minimize_smacof",
    "make_scaling_instance",
    "admissible_eta",
]

logger = logging.getLogger(__name__)

SMACOF_ZERO_DIST = 1e-12


@dataclass(frozen=True)
class OptimizerConfig:
    """Iteration budget and tolerances shared by both optimizers.

    ``step_size`` is the initial gradient-descent step; ``None`` picks one
    from the dissimilarity scale and maximum degree. Accepted steps grow by
    ``growth``, rejected ones shrink by ``backtrack``.
    """

    max_iters: int = 5000
    step_size: float = None
    backtrack: float = 0.5
    growth: float = 1.1
    rel_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise InvalidInputError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise InvalidInputError("rel_tol must be > 0")
        if self.step_size is not None and not self.step_size > 0:
            raise InvalidInputError("step_size must be > 0")
        if not 0 < self.backtrack < 1 or not self.growth >= 1:
            raise InvalidInputError("need 0 < backtrack < 1 and growth >= 1")


@dataclass
class StressFit:
    """Optimizer output.

    ``history`` holds the objective after each accepted iterate (s-stress
    for gradient descent, raw stress for SMACOF), starting with the initial
    value.
    """

    config: Configuration
    s_stress: float
    raw_stress: float
    n_iter: int
    converged: bool
    history: list = field(default_factory=list, repr=False)


def _check(config, graph):
    y = as_points(config)
    if y.shape[0] != graph.n:
        raise InvalidInputError(
            f"configuration has {y.shape[0]} points, graph has {graph.n} nodes"
        )
    return y


def _edge_terms(y, graph):
    e = graph.edges
    diff = y[e[:, 0]] - y[e[:, 1]]
    return diff, np.einsum("ij,ij->i", diff, diff)


def s_stress(config, graph):
    """Sum over edges of ``(||y_i - y_j||^2 - d_ij^2)^2``."""
    y = _check(config, graph)
    _, sq = _edge_terms(y, graph)
    r = sq - graph.d2
    return float(r @ r)


def _scatter(n, e, vals):
    out = np.zeros((n, vals.shape[1]))
    for k in range(vals.shape[1]):
        out[:, k] = np.bincount(e[:, 0], vals[:, k], minlength=n) - np.bincount(
            e[:, 1], vals[:, k], minlength=n
        )
    return out


def s_stress_gradient(config, graph):
    """Analytic gradient of :func:`s_stress`, shape ``(n, p)``."""
    y = _check(config, graph)
    diff, sq = _edge_terms(y, graph)
    return _scatter(graph.n, graph.edges, 4.0 * (sq - graph.d2)[:, None] * diff)


def raw_stress(config, graph):
    """Kruskal raw stress ``sum_E (d_ij - ||y_i - y_j||)^2``."""
    y = _check(config, graph)
    _, sq = _edge_terms(y, graph)
    r = np.sqrt(graph.d2) - np.sqrt(sq)
    return float(r @ r)


def initial_configuration(graph, p, init="sequential-lateration", seed=0):
    """Starting point for an optimizer.

    ``init`` is a configuration, ``"random"`` (Gaussian with the spread of
    the dissimilarities) or ``"sequential-lateration"`` (falls back to
    random when the graph cannot be laterated).
    """
    if isinstance(init, str):
        if init == "sequential-lateration":
            from .sequential import sequential_laterate_first

            try:
                return sequential_laterate_first(graph, p).config
            except (NotLaterableError, DegenerateStepError):
                logger.warning("graph not laterable; using random initialization")
                init = "random"
        if init != "random":
            raise InvalidInputError(f"unknown init strategy {init!r}")
        scale = np.sqrt(graph.d2.mean()) if graph.n_edges else 1.0
        return Configuration(make_rng(seed).standard_normal((graph.n, p)) * max(scale, 1e-12))
    y = as_points(init)
    if y.shape != (graph.n, p):
        raise InvalidInputError(f"init must have shape ({graph.n}, {p}), got {y.shape}")
    return Configuration(y)


class _Trace:
    def __init__(self, target):
        self._fh = None
        self._writer = None
        if target is None:
            return
        if hasattr(target, "write"):
            fh = target
        else:
            fh = self._fh = open(target, "w", newline="")
        self._writer = csv.writer(fh)
        self._writer.writerow(["iteration", "stress", "grad_norm", "step"])

    def row(self, it, stress, grad_norm, step):
        if self._writer is not None:
            self._writer.writerow(
                [it, format(stress, ".17g"), format(grad_norm, ".17g"), format(step, ".17g")]
            )

    def close(self):
        if self._fh is not None:
            self._fh.close()


def minimize_gd(graph, p, init="sequential-lateration", opt=None, trace=None):
    """Gradient descent on s-stress with backtracking (Armijo) line search.

    Stops when the relative decrease of an accepted step is at most
    ``opt.rel_tol``, when no decreasing step can be found, or after
    ``opt.max_iters`` iterations. The returned stress never exceeds the
    initial stress.

    Parameters
    ----------
    trace : path or writable file, optional
        Receives one CSV row per iteration.
    """
    opt = OptimizerConfig() if opt is None else opt
    y = initial_configuration(graph, p, init, opt.seed).points.copy()
    f = s_stress(y, graph)
    if not np.isfinite(f):
        raise NumericalFailureError("non-finite initial stress")
    if opt.step_size is not None:
        t = opt.step_size
    else:
        scale = graph.d2.mean() if graph.n_edges else 1.0
        t = 1.0 / (8.0 * max(graph.max_degree(), 1) * max(scale, 1e-12))
    history = [f]
    tr = _Trace(trace)
    converged = False
    it = 0
    try:
        while it < opt.max_iters:
            if f == 0.0:
                converged = True
                break
            g = s_stress_gradient(y, graph)
            gn2 = float(np.sum(g * g))
            if gn2 == 0.0:
                converged = True
                break
            while True:
                y_new = y - t * g
                f_new = s_stress(y_new, graph)
                if np.isfinite(f_new) and f_new <= f - 1e-4 * t * gn2:
                    break
                t *= opt.backtrack
                if t * np.sqrt(gn2) <= 1e-300 or t == 0.0:
                    f_new = None
                    break
            if f_new is None:
                converged = True
                break
            it += 1
            tr.row(it, f_new, np.sqrt(gn2), t)
            decrease = f - f_new
            y, f = y_new, f_new
            history.append(f)
            if not np.isfinite(f):
                raise NumericalFailureError(f"non-finite stress at iteration {it}")
            if decrease <= opt.rel_tol * history[-2]:
                converged = True
                break
            t *= opt.growth
    finally:
        tr.close()
    return StressFit(Configuration(y), f, raw_stress(y, graph), it, converged, history)


def _laplacian_solver(graph):
    n = graph.n
    e = graph.edges
    ones = np.ones(e.shape[0])
    a = sp.coo_matrix((ones, (e[:, 0], e[:, 1])), shape=(n, n))
    a = (a + a.T).tocsr()
    lap = (sp.diags(np.asarray(a.sum(axis=1)).ravel()) - a).tocsc()
    ncomp, _ = connected_components(a, directed=False)
    if ncomp == 1 and n > 1:
        # grounding node 0 makes the reduced Laplacian positive definite
        solve = factorized(lap[1:, 1:].tocsc())

        def apply(rhs):
            out = np.zeros_like(rhs)
            for k in range(rhs.shape[1]):
                out[1:, k] = solve(np.ascontiguousarray(rhs[1:, k]))
            return out

        return apply
    pinv = np.linalg.pinv(lap.toarray())
    return lambda rhs: pinv @ rhs


def minimize_smacof(graph, p, init="sequential-lateration", opt=None, trace=None):
    """SMACOF iterative majorization of raw stress on the edge set (unit weights).

    Each step is the Guttman transform ``Y <- V^+ B(Y) Y`` with ``V`` the
    graph Laplacian; raw stress is non-increasing across iterations. The
    centroid of the initial configuration is preserved. The fit reports
    both raw stress and s-stress.
    """
    opt = OptimizerConfig(max_iters=1000) if opt is None else opt
    y = initial_configuration(graph, p, init, opt.seed).points.copy()
    center = y.mean(axis=0)
    if graph.n_edges == 0:
        return StressFit(Configuration(y), 0.0, 0.0, 0, True, [0.0])
    solve = _laplacian_solver(graph)
    e = graph.edges
    d = np.sqrt(graph.d2)

    f = raw_stress(y, graph)
    if not np.isfinite(f):
        raise NumericalFailureError("non-finite initial stress")
    history = [f]
    tr = _Trace(trace)
    converged = False
    it = 0
    try:
        while it < opt.max_iters:
            if f == 0.0:
                converged = True
                break
            diff, sq = _edge_terms(y, graph)
            dist = np.sqrt(sq)
            ratio = np.zeros_like(dist)
            ok = dist >= SMACOF_ZERO_DIST
            ratio[ok] = d[ok] / dist[ok]
            by = _scatter(graph.n, e, ratio[:, None] * diff)
            y_new = solve(by)
            y_new += center - y_new.mean(axis=0)
            f_new = raw_stress(y_new, graph)
            if not np.isfinite(f_new):
                raise NumericalFailureError(f"non-finite stress at iteration {it + 1}")
            it += 1
            step = float(np.sqrt(np.sum((y_new - y) ** 2)))
            tr.row(it, f_new, 0.0, step)
            decrease = f - f_new
            y, f = y_new, f_new
            history.append(f)
            if decrease <= opt.rel_tol * history[-2]:
                converged = True
                break
    finally:
        tr.close()
    return StressFit(Configuration(y), s_stress(y, graph), f, it, converged, history)


@dataclass(frozen=True)
class ScalingInstance:
    """Shrunken-distance instance whose stress minimizer is ``eta * latent``.

    ``eps`` is the additive perturbation per edge and ``a_const`` the
    lower-bound constant ``1 / (8 * max_degree)``.
    """

    eta: float
    graph: DissimilarityGraph
    latent: Configuration
    analytic_minimizer: Configuration
    a_const: float
    eps: np.ndarray = field(repr=False)

    @property
    def eps_sq_sum(self):
        return float(self.eps @ self.eps)


def _topology(graph_topology, n):
    if isinstance(graph_topology, DissimilarityGraph):
        if graph_topology.n != n:
            raise InvalidInputError("topology and latent differ in size")
        return graph_topology.edges
    return DissimilarityGraph(n, graph_topology, np.zeros(len(graph_topology))).edges


def make_scaling_instance(latent, graph_topology, eta):
    """Build dissimilarities ``d_ij^2 = eta^2 ||x_i - x_j||^2`` on the given edges."""
    eta = float(eta)
    if not 0.0 < eta <= 1.0:
        raise InvalidInputError(f"eta must lie in (0, 1], got {eta}")
    x = as_points(latent)
    edges = _topology(graph_topology, x.shape[0])
    diff = x[edges[:, 0]] - x[edges[:, 1]]
    exact = np.einsum("ij,ij->i", diff, diff)
    d2 = eta ** 2 * exact
    graph = DissimilarityGraph(x.shape[0], edges, d2)
    delta = graph.max_degree()
    a = 1.0 / (8.0 * delta) if delta else np.inf
    return ScalingInstance(eta, graph, Configuration(x), Configuration(eta * x), a, d2 - exact)


def admissible_eta(latent, graph_topology, sigma):
    """Smallest ``eta`` with ``sum_E eps_ij^2 <= sigma^2`` for the scaling instance.

    With ``eps_ij = (eta^2 - 1) ||x_i - x_j||^2`` the budget holds iff
    ``eta^2 >= 1 - sigma / sqrt(sum_E ||x_i - x_j||^4)``.
    """
    x = as_points(latent)
    edges = _topology(graph_topology, x.shape[0])
    diff = x[edges[:, 0]] - x[edges[:, 1]]
    sq = np.einsum("ij,ij->i", diff, diff)
    total = np.sqrt(float(sq @ sq))
    if total == 0.0:
        return 0.0
    lo = 1.0 - sigma / total
    return float(np.sqrt(lo)) if lo > 0 else 0.0
