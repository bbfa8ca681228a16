"""Scikit-learn style estimators over the functional API.

Every estimator takes either a :class:`~seqlat.graph.DissimilarityGraph`
or a square dissimilarity matrix with ``NaN`` for missing entries, and
exposes ``embedding_`` after ``fit``.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from ._validation import check_graph, check_n_components
from .embedders import classical_lateration, classical_scaling
from .errors import InvalidInputError
from .sequential import sequential_laterate_best, sequential_laterate_first
from .stress import OptimizerConfig, minimize_gd, minimize_smacof

__all__ = ["ClassicalScaling", "SequentialLateration", "StressMDS"]


def _laterate_rows(embedding, D, squared):
    """Place each row of ``D`` (dissimilarities to the fitted points) by lateration."""
    D = check_array(D, ensure_all_finite="allow-nan", dtype=float)
    n, p = embedding.shape
    if D.shape[1] != n:
        raise InvalidInputError(f"expected {n} columns, got {D.shape[1]}")
    out = np.empty((D.shape[0], p))
    for k, row in enumerate(D):
        have = ~np.isnan(row)
        d2 = row[have] if squared else row[have] ** 2
        out[k] = classical_lateration(embedding[have], d2)
    return out


class _LaterationTransformMixin(TransformerMixin):
    def transform(self, X):
        """Embed new points from their dissimilarities to the fitted points.

        ``X`` has one row per new point and one column per fitted point;
        ``NaN`` entries are ignored, and each row needs at least
        ``n_components + 1`` observed entries.
        """
        check_is_fitted(self, "embedding_")
        return _laterate_rows(self.embedding_, X, self.squared)


class ClassicalScaling(_LaterationTransformMixin, BaseEstimator):
    """Torgerson-Gower scaling of a complete dissimilarity matrix.

    Parameters
    ----------
    n_components : int
    squared : bool
        Whether the input holds squared dissimilarities.
    """

    def __init__(self, n_components=2, squared=False):
        self.n_components = n_components
        self.squared = squared

    def fit(self, X, y=None):
        p = check_n_components(self.n_components)
        graph = check_graph(X, self.squared)
        m = graph.n
        if graph.n_edges != m * (m - 1) // 2:
            raise InvalidInputError("classical scaling needs a complete dissimilarity matrix")
        out = classical_scaling(graph.to_dense(), p)
        self.embedding_ = np.array(out.config.points)
        self.eigenvalues_ = out.eigenvalues
        self.residual_ = out.residual
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_


class SequentialLateration(_LaterationTransformMixin, BaseEstimator):
    """Anchor-free embedding by sequential lateration.

    Parameters
    ----------
    n_components : int
        Embedding dimension ``p``.
    variant : {"first", "best"}
        ``"first"`` keeps the first complete embedding; ``"best"`` tries up
        to ``budget`` seed cliques and keeps the one with lowest s-stress.
    budget : int
        Seed-clique budget of the ``"best"`` variant.
    clique_strategy : {"greedy", "minimal"}
    max_clique_size : int or None
        Seed-clique cap, default ``3 * (n_components + 1)``.
    squared : bool
        Whether matrix input holds squared dissimilarities.
    random_state : int
        Seed for the ``"best"`` variant's clique sample.

    Attributes
    ----------
    embedding_ : ndarray of shape (n, n_components)
    ordering_ : LaterativeOrdering
    provenance_ : ndarray of shape (n,)
    stress_ : float
        S-stress of the embedding.
    """

    def __init__(self, n_components=2, variant="first", budget=200, clique_strategy="greedy",
                 max_clique_size=None, squared=False, random_state=0):
        self.n_components = n_components
        self.variant = variant
        self.budget = budget
        self.clique_strategy = clique_strategy
        self.max_clique_size = max_clique_size
        self.squared = squared
        self.random_state = random_state

    def fit(self, X, y=None):
        p = check_n_components(self.n_components)
        graph = check_graph(X, self.squared)
        if self.variant == "first":
            res = sequential_laterate_first(graph, p, self.clique_strategy, self.max_clique_size)
        elif self.variant == "best":
            res = sequential_laterate_best(
                graph, p, self.budget, self.random_state, self.clique_strategy, self.max_clique_size
            )
        else:
            raise InvalidInputError(f"variant must be 'first' or 'best', got {self.variant!r}")
        self.result_ = res
        self.embedding_ = np.array(res.config.points)
        self.ordering_ = res.ordering
        self.provenance_ = res.provenance
        self.stress_ = res.stress
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_


class StressMDS(BaseEstimator):
    """Stress minimization restricted to the observed edges.

    Parameters
    ----------
    n_components : int
    solver : {"smacof", "gd"}
        SMACOF majorizes raw stress; ``"gd"`` runs gradient descent on
        s-stress.
    init : {"lateration", "random"} or array-like of shape (n, n_components)
    max_iter : int or None
        Defaults to 1000 for SMACOF and 5000 for gradient descent.
    tol : float
        Relative decrease below which iteration stops.
    squared : bool
    random_state : int
    """

    def __init__(self, n_components=2, solver="smacof", init="lateration", max_iter=None,
                 tol=1e-10, squared=False, random_state=0):
        self.n_components = n_components
        self.solver = solver
        self.init = init
        self.max_iter = max_iter
        self.tol = tol
        self.squared = squared
        self.random_state = random_state

    def fit(self, X, y=None):
        p = check_n_components(self.n_components)
        graph = check_graph(X, self.squared)
        if self.solver not in ("smacof", "gd"):
            raise InvalidInputError(f"solver must be 'smacof' or 'gd', got {self.solver!r}")
        init = self.init
        if isinstance(init, str):
            init = {"lateration": "sequential-lateration"}.get(init, init)
        max_iter = self.max_iter or (1000 if self.solver == "smacof" else 5000)
        opt = OptimizerConfig(max_iters=max_iter, rel_tol=self.tol, seed=self.random_state)
        fn = minimize_smacof if self.solver == "smacof" else minimize_gd
        fit = fn(graph, p, init, opt)
        self.embedding_ = np.array(fit.config.points)
        self.stress_ = fit.s_stress
        self.raw_stress_ = fit.raw_stress
        self.n_iter_ = fit.n_iter
        self.converged_ = fit.converged
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_
