"""Point configurations, rigid alignment and shape statistics.

A configuration is an ordered set of ``n`` points in ``R^p``. Everything
here is a pure function of its inputs; the :class:`Configuration` and
:class:`RigidTransform` containers are immutable.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist
from scipy.stats import norm, qmc

from .errors import InvalidInputError

__all__ = [
    "Configuration",
    "RigidTransform",
    "ShapeStats",
    "as_points",
    "pairwise_sq_dists",
    "procrustes_align",
    "embedding_error",
    "diameter",
    "shape_stats",
    "in_general_position",
    "write_configuration",
    "read_configuration",
]

# width for p >= 3 is approximate: quasi-random direction scan + local refinement
N_WIDTH_DIRECTIONS = 20_000
N_WIDTH_REFINE = 5


class Configuration:
    """Immutable ordered set of ``n`` points in ``R^p``.

    Parameters
    ----------
    points : array-like of shape (n, p)
        Point coordinates. A 1-D input is read as ``n`` points in ``R^1``.
    """

    __slots__ = ("_points",)

    def __init__(self, points):
        pts = np.array(points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidInputError(
                f"points must have shape (n, p) with n, p >= 1, got {pts.shape}"
            )
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("coordinates must be finite")
        pts.flags.writeable = False
        object.__setattr__(self, "_points", pts)

    def __setattr__(self, name, value):
        raise AttributeError("Configuration is immutable")

    @property
    def points(self):
        return self._points

    @property
    def size(self):
        return self._points.shape[0]

    @property
    def dim(self):
        return self._points.shape[1]

    def __len__(self):
        return self.size

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._points
        return self._points.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return np.array_equal(self._points, other._points)

    def __hash__(self):
        return hash(self._points.tobytes())

    def __repr__(self):
        return f"Configuration(n={self.size}, p={self.dim})"


def as_points(config):
    """Return the ``(n, p)`` float array behind a configuration or array-like."""
    if isinstance(config, Configuration):
        return config.points
    return Configuration(config).points


@dataclass(frozen=True)
class RigidTransform:
    """The map ``x -> Q x + t`` with ``Q`` orthogonal (reflections allowed)."""

    orthogonal: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        q = np.array(self.orthogonal, dtype=float)
        t = np.array(self.translation, dtype=float).ravel()
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] != t.shape[0]:
            raise InvalidInputError("orthogonal must be p x p and translation length p")
        if not np.allclose(q.T @ q, np.eye(q.shape[0]), rtol=0.0, atol=1e-10):
            raise InvalidInputError("orthogonal part is not orthogonal")
        if abs(abs(np.linalg.det(q)) - 1.0) > 1e-10:
            raise InvalidInputError("orthogonal part must have |det| = 1")
        q.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "orthogonal", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls, p):
        return cls(np.eye(p), np.zeros(p))

    @property
    def dim(self):
        return self.translation.shape[0]

    def apply(self, config):
        x = as_points(config)
        return Configuration(x @ self.orthogonal.T + self.translation)

    def inverse(self):
        q = self.orthogonal.T
        return RigidTransform(q, -q @ self.translation)

    def compose(self, other):
        """Return ``self o other``."""
        return RigidTransform(
            self.orthogonal @ other.orthogonal,
            self.orthogonal @ other.translation + self.translation,
        )


@dataclass(frozen=True)
class ShapeStats:
    diameter: float
    width: float

    @property
    def aspect(self):
        if self.width == 0.0:
            return np.inf
        return (self.diameter / self.width) ** 2


def pairwise_sq_dists(config):
    """Symmetric matrix of squared Euclidean distances with exact zero diagonal."""
    x = as_points(config)
    diff = x[:, None, :] - x[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _check_pair(a, b):
    x = as_points(a)
    y = as_points(b)
    if x.shape != y.shape:
        raise InvalidInputError(
            f"configurations differ in shape: {x.shape} vs {y.shape}"
        )
    return x, y


def procrustes_align(source, target):
    """Optimal rigid map from ``source`` onto ``target``.

    Minimizes ``sum_i ||target_i - g(source_i)||^2`` over ``g(x) = Qx + t``
    with ``Q`` in the full orthogonal group.

    Returns
    -------
    transform : RigidTransform
    error : float
        The attained minimum, recomputed from the residuals.
    """
    x, y = _check_pair(source, target)
    p = x.shape[1]
    x_mean = x.mean(axis=0)
    y_mean = y.mean(axis=0)
    xc = x - x_mean
    yc = y - y_mean
    if not np.any(xc) or not np.any(yc):
        q = np.eye(p)
    else:
        u, _, vt = np.linalg.svd(yc.T @ xc)
        q = u @ vt
    g = RigidTransform(q, y_mean - q @ x_mean)
    resid = yc - xc @ q.T
    return g, float(np.sum(resid * resid))


def embedding_error(embedded, latent):
    """Mean squared deviation after optimal rigid alignment of ``latent``."""
    y, x = _check_pair(embedded, latent)
    _, err = procrustes_align(x, y)
    return err / x.shape[0]


def _is_flat(xc):
    s = np.linalg.svd(xc, compute_uv=False)
    return s[0] == 0.0 or s[-1] <= 1e-14 * s[0]


def _hull_vertices(x):
    try:
        return x[ConvexHull(x).vertices]
    except (QhullError, ValueError):
        return None


def _caliper_width(hull):
    # hull: vertices in counter-clockwise order, no three collinear
    h = len(hull)
    if h < 3:
        return 0.0

    def height(i, k):
        a = hull[i]
        e = hull[(i + 1) % h] - a
        d = hull[k] - a
        return (e[0] * d[1] - e[1] * d[0]) / np.hypot(e[0], e[1])

    best = np.inf
    j = 1
    for i in range(h):
        if j == i:
            j = (j + 1) % h
        steps = 0
        while steps < h and height(i, (j + 1) % h) > height(i, j):
            j = (j + 1) % h
            steps += 1
        best = min(best, height(i, j))
    return float(best)


def _extent(verts, u):
    proj = verts @ u
    return proj.max() - proj.min()


def _sampled_width(verts, p):
    sampler = qmc.Halton(d=p, scramble=True, seed=12345)
    u = norm.ppf(np.clip(sampler.random(N_WIDTH_DIRECTIONS), 1e-12, 1 - 1e-12))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    proj = verts @ u.T
    ext = proj.max(axis=0) - proj.min(axis=0)
    best = float(ext.min())

    def objective(v):
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return np.inf
        return _extent(verts, v / nv)

    for k in np.argsort(ext)[:N_WIDTH_REFINE]:
        res = minimize(
            objective, u[k], method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000},
        )
        best = min(best, float(res.fun))
    return best


def diameter(config):
    """Largest pairwise distance, computed on the convex hull when it exists."""
    x = as_points(config)
    if x.shape[0] < 2:
        return 0.0
    xc = x - x.mean(axis=0)
    verts = None
    if x.shape[1] >= 2 and x.shape[0] > x.shape[1] and not _is_flat(xc):
        verts = _hull_vertices(xc)
    if verts is None:
        verts = xc
    return float(np.sqrt(pdist(verts, "sqeuclidean").max()))


def shape_stats(config):
    """Diameter and width of a point set.

    The diameter is exact. The width is exact for ``p <= 2`` (rotating
    calipers on the convex hull); for ``p >= 3`` it is the smallest
    directional extent over a quasi-uniform sample of directions, refined
    by Nelder-Mead, hence an upper bound on the true width.
    """
    x = as_points(config)
    n, p = x.shape
    if n < 2:
        raise InvalidInputError("shape_stats needs at least two points")
    xc = x - x.mean(axis=0)
    if p == 1:
        d = float(x.max() - x.min())
        return ShapeStats(d, d)
    flat = n <= p or _is_flat(xc)
    verts = None if flat else _hull_vertices(xc)
    if verts is None:
        return ShapeStats(float(np.sqrt(pdist(xc, "sqeuclidean").max())), 0.0)
    diameter = float(np.sqrt(pdist(verts, "sqeuclidean").max()))
    if p == 2:
        width = _caliper_width(verts)
    else:
        width = _sampled_width(verts, p)
    return ShapeStats(diameter, min(width, diameter))


def in_general_position(config, indices, cond_tol=1e-8):
    """Whether the listed ``p + 1`` points span ``R^p``.

    True iff the difference vectors from the first listed point have
    ``s_min / s_max > cond_tol``.
    """
    x = as_points(config)
    p = x.shape[1]
    idx = list(indices)
    if len(idx) != p + 1:
        raise InvalidInputError(f"need exactly p + 1 = {p + 1} indices, got {len(idx)}")
    if len(set(idx)) != len(idx):
        raise InvalidInputError("indices must be distinct")
    diffs = x[idx[1:]] - x[idx[0]]
    s = np.linalg.svd(diffs, compute_uv=False)
    if s[0] == 0.0:
        return False
    return bool(s[-1] / s[0] > cond_tol)


def write_configuration(path, config):
    x = as_points(config)
    p = x.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + [f"x{k + 1}" for k in range(p)])
        for i, row in enumerate(x):
            w.writerow([i] + [format(v, ".17g") for v in row])


def read_configuration(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "id":
        raise InvalidInputError(f"{path}: missing 'id,x1,...' header")
    body = sorted(rows[1:], key=lambda r: int(r[0]))
    if [int(r[0]) for r in body] != list(range(len(body))):
        raise InvalidInputError(f"{path}: ids must be 0..n-1")
    return Configuration([[float(v) for v in r[1:]] for r in body])
