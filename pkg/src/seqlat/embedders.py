"""Classical scaling and classical lateration."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLandmarksError, InvalidInputError
from .geometry import Configuration, as_points

__all__ = ["ScalingOutput", "classical_scaling", "classical_lateration", "LATERATION_COND_TOL"]

LATERATION_COND_TOL = 1e-10


@dataclass(frozen=True)
class ScalingOutput:
    """Result of :func:`classical_scaling`.

    Attributes
    ----------
    config : Configuration
        ``m`` points in ``R^p``, principal-axis aligned.
    eigenvalues : ndarray of shape (p,)
        Top ``p`` eigenvalues of the doubly centered matrix, descending,
        before clamping.
    residual : float
        Sum of ``|lambda|`` over the discarded eigenvalues plus the
        magnitude of any eigenvalue clamped to zero among the top ``p``
        (negative, or positive but below ``m * eps * max|lambda|``).
    tie : bool
        The ``p``-th and ``(p+1)``-th eigenvalues coincide to 1e-12 relative,
        so the selected subspace is not unique.
    """

    config: Configuration
    eigenvalues: np.ndarray
    residual: float
    tie: bool = False


def classical_scaling(d2, p):
    """Torgerson-Gower scaling of a complete squared-dissimilarity matrix.

    Parameters
    ----------
    d2 : array-like of shape (m, m)
        Symmetric squared dissimilarities with zero diagonal.
    p : int
        Target dimension, ``p <= m - 1``.

    Returns
    -------
    ScalingOutput
    """
    d2 = np.asarray(d2, dtype=float)
    p = int(p)
    if d2.ndim != 2 or d2.shape[0] != d2.shape[1]:
        raise InvalidInputError("d2 must be a square matrix")
    m = d2.shape[0]
    if p < 1 or m < p + 1:
        raise InvalidInputError(f"need m >= p + 1, got m={m}, p={p}")
    if not np.all(np.isfinite(d2)):
        raise InvalidInputError("d2 must be finite")
    scale = max(np.abs(d2).max(), 1.0)
    if np.abs(d2 - d2.T).max() > 1e-12 * scale:
        raise InvalidInputError("d2 is not symmetric")
    if np.abs(np.diag(d2)).max() > 1e-12 * scale:
        raise InvalidInputError("d2 has a nonzero diagonal")
    d2 = 0.5 * (d2 + d2.T)
    np.fill_diagonal(d2, 0.0)

    row = d2.mean(axis=0)
    b = -0.5 * (d2 - row[:, None] - row[None, :] + row.mean())
    b = 0.5 * (b + b.T)
    evals, evecs = np.linalg.eigh(b)
    # eigh is ascending; a stable reversal keeps index order among ties
    idx = np.argsort(-evals, kind="stable")
    evals, evecs = evals[idx], evecs[:, idx]

    top = evals[:p]
    # eigenvalues at roundoff level are zero; their square roots would
    # otherwise inflate into spurious O(sqrt(eps)) coordinates
    rank_tol = m * np.finfo(float).eps * max(np.abs(evals).max(), np.finfo(float).tiny)
    clamped = np.where(top > rank_tol, top, 0.0)
    vecs = evecs[:, :p].copy()
    for k in range(p):
        v = vecs[:, k]
        nz = np.flatnonzero(np.abs(v) > 1e-12 * np.abs(v).max())
        if nz.size and v[nz[0]] < 0:
            vecs[:, k] = -v
    coords = vecs * np.sqrt(clamped)

    residual = float(np.abs(evals[p:]).sum() + np.abs(top - clamped).sum())
    tie = bool(p < m and abs(evals[p - 1] - evals[p]) <= 1e-12 * max(np.abs(evals).max(), 1e-300))
    return ScalingOutput(Configuration(coords), top.copy(), residual, tie)


def classical_lateration(landmarks, d2_to_landmarks, cond_tol=LATERATION_COND_TOL):
    """Least-squares position of one point from squared dissimilarities to landmarks.

    Solves the linearized lateration system
    ``2 (y_i - ybar) . (y - ybar) = c_i - cbar - (delta_i - deltabar)`` where
    ``c_i = ||y_i - ybar||^2``, via the pseudoinverse of the centered
    landmark matrix.

    Raises
    ------
    DegenerateLandmarksError
        If the centered landmark matrix has condition ``s_min / s_max``
        at or below ``cond_tol``.
    """
    y = as_points(landmarks)
    delta = np.asarray(d2_to_landmarks, dtype=float).ravel()
    m, p = y.shape
    if m < p + 1:
        raise InvalidInputError(f"need at least p + 1 = {p + 1} landmarks, got {m}")
    if delta.shape[0] != m:
        raise InvalidInputError("one squared dissimilarity per landmark is required")
    ybar = y.mean(axis=0)
    yc = y - ybar
    u, s, vt = np.linalg.svd(yc, full_matrices=False)
    if s[0] == 0.0 or s[-1] <= cond_tol * s[0]:
        raise DegenerateLandmarksError(
            f"landmarks do not span R^{p} (condition {s[-1] / s[0] if s[0] else 0.0:.3g})"
        )
    c = np.einsum("ij,ij->i", yc, yc)
    rhs = 0.5 * ((c - c.mean()) - (delta - delta.mean()))
    return ybar + vt.T @ ((u.T @ rhs) / s)
