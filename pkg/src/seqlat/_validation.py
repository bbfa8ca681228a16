"""Input coercion for the estimator API."""

import numpy as np
from sklearn.utils import check_array

from .errors import InvalidInputError
from .graph import DissimilarityGraph


def check_graph(X, squared=False):
    """Coerce ``X`` to a :class:`DissimilarityGraph`.

    ``X`` is either a graph or a square symmetric matrix of dissimilarities
    with ``NaN`` marking absent edges. Entries are distances unless
    ``squared`` is set.
    """
    if isinstance(X, DissimilarityGraph):
        return X
    D = check_array(X, ensure_all_finite="allow-nan", dtype=float)
    n = D.shape[0]
    if D.shape != (n, n):
        raise InvalidInputError(f"dissimilarity matrix must be square, got {D.shape}")
    missing = np.isnan(D)
    if np.any(missing != missing.T) or np.any(D[~missing] != D.T[~missing]):
        raise InvalidInputError("dissimilarity matrix must be symmetric")
    if np.any(D[~missing] < 0):
        raise InvalidInputError("dissimilarities must be >= 0")
    iu, ju = np.triu_indices(n, k=1)
    keep = ~missing[iu, ju]
    w = D[iu[keep], ju[keep]]
    return DissimilarityGraph(n, np.column_stack([iu[keep], ju[keep]]), w if squared else w * w)


def check_n_components(n_components):
    if int(n_components) != n_components or n_components < 1:
        raise InvalidInputError(f"n_components must be a positive integer, got {n_components!r}")
    return int(n_components)
