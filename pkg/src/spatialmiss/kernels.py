"""Distances, spatial correlation matrices and multivariate-normal helpers.

Two correlation families are supported for the latent spatial fields:

* ``ExponentialRange`` -- entry ``exp(-d / lam)``; ``lam`` is a *range*, so a
  larger value gives a longer-range, stronger correlation.
* ``CarAdjacency`` -- covariance ``(I - lam * D)^{-1}`` for a binary, symmetric
  adjacency matrix ``D``.

Cholesky failures are never patched with jitter; they surface as
:class:`~spatialmiss.errors.NotPositiveDefiniteError` so that a Metropolis
step proposing an invalid parameter can simply reject.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidInputError,
    InvalidParameterError,
    NotPositiveDefiniteError,
    SingularityError,
)

PIVOT_TOL = 1e-12
_LOG_2PI = np.log(2.0 * np.pi)


def pairwise_distances(coords):
    """Euclidean distance matrix between planar coordinates.

    Longitude/latitude pairs are treated as planar, no great-circle
    correction is applied.

    Parameters
    ----------
    coords : (S, 2) array_like

    Returns
    -------
    (S, S) ndarray
    """
    c = np.asarray(coords, dtype=float)
    if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] != 2:
        raise InvalidInputError(f"expected an (S, 2) coordinate array, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise InvalidInputError("coordinates must be finite")
    diff = c[:, None, :] - c[None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=-1))
    # exact symmetry regardless of rounding in the subtraction
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


@dataclass(frozen=True)
class LocationSet:
    """Point-referenced sites with their distance matrix.

    ``adjacency`` is optional and only needed for CAR structures.
    """

    ids: tuple
    coords: np.ndarray
    dist: np.ndarray = field(default=None, repr=False)
    adjacency: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "coords", coords)
        if len(self.ids) != coords.shape[0]:
            raise InvalidInputError("ids and coords differ in length")
        if len(set(self.ids)) != len(self.ids):
            raise InvalidInputError("location ids must be unique")
        if self.dist is None:
            object.__setattr__(self, "dist", pairwise_distances(coords))
        if self.adjacency is not None:
            adj = np.asarray(self.adjacency, dtype=float)
            _check_adjacency(adj, len(self.ids))
            object.__setattr__(self, "adjacency", adj)

    @property
    def size(self):
        return len(self.ids)

    @classmethod
    def from_coords(cls, coords, ids=None, adjacency=None):
        coords = np.asarray(coords, dtype=float)
        if ids is None:
            ids = [str(i + 1) for i in range(coords.shape[0])]
        return cls(ids=ids, coords=coords, adjacency=adjacency)


def _check_adjacency(adj, size=None):
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise InvalidInputError("adjacency must be square")
    if size is not None and adj.shape[0] != size:
        raise InvalidInputError("adjacency size does not match the number of locations")
    if not np.array_equal(adj, adj.T):
        raise InvalidInputError("adjacency must be symmetric")
    if np.any(np.diag(adj) != 0):
        raise InvalidInputError("adjacency must have a zero diagonal")
    if not np.all((adj == 0) | (adj == 1)):
        raise InvalidInputError("adjacency must be binary")


@dataclass(frozen=True)
class ExponentialRange:
    lam: float

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise InvalidParameterError(f"exponential range must be > 0, got {self.lam}")


@dataclass(frozen=True)
class CarAdjacency:
    adjacency: np.ndarray = field(repr=False)
    lam: float

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=float)
        _check_adjacency(adj)
        object.__setattr__(self, "adjacency", adj)
        lo, hi = car_lambda_bounds(adj)
        if not (lo < self.lam < hi):
            raise SingularityError(
                f"CAR coefficient {self.lam} outside the positive-definite range ({lo}, {hi})"
            )


def car_lambda_bounds(adjacency):
    """Open interval ``(1/e_min, 1/e_max)`` on which ``I - lam*D`` is PD."""
    eig = np.linalg.eigvalsh(np.asarray(adjacency, dtype=float))
    e_min, e_max = eig[0], eig[-1]
    lo = 1.0 / e_min if e_min < -1e-12 else -np.inf
    hi = 1.0 / e_max if e_max > 1e-12 else np.inf
    return lo, hi


def car_precision(adjacency, lam):
    """``I - lam * D``, the precision matrix of a CAR field."""
    adj = np.asarray(adjacency, dtype=float)
    return np.eye(adj.shape[0]) - lam * adj


def correlation_matrix(structure, dist=None):
    """Covariance matrix of a unit-scale spatial field.

    ``dist`` is required for :class:`ExponentialRange` and ignored for
    :class:`CarAdjacency`.
    """
    if isinstance(structure, ExponentialRange):
        if dist is None:
            raise InvalidInputError("exponential correlation needs a distance matrix")
        if not structure.lam > 0:
            raise InvalidParameterError("exponential range must be > 0")
        return np.exp(-np.asarray(dist, dtype=float) / structure.lam)
    if isinstance(structure, CarAdjacency):
        chol = cholesky(car_precision(structure.adjacency, structure.lam))
        inv = chol_inverse(chol)
        return 0.5 * (inv + inv.T)
    raise InvalidInputError(f"unknown correlation structure {structure!r}")


@dataclass(frozen=True)
class CholFactor:
    """Lower Cholesky factor ``L`` of a matrix ``M = L L'`` and ``log|M|``."""

    L: np.ndarray
    logdet: float

    @property
    def size(self):
        return self.L.shape[0]


def cholesky(M):
    """Cholesky factor with an explicit pivot check (tolerance ``1e-12``)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("matrix has non-finite entries")
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from None
    diag = np.diag(L)
    # pivots are the squared diagonal entries
    if not np.all(diag * diag > PIVOT_TOL):
        raise NotPositiveDefiniteError("matrix is not positive definite (pivot below 1e-12)")
    return CholFactor(L=L, logdet=2.0 * float(np.sum(np.log(diag))))


def _solve_lower(L, b):
    # scipy's triangular solver has noticeable call overhead at S ~ 20; the
    # generic LAPACK solve is faster here and just as exact.
    return np.linalg.solve(L, b)


def chol_solve(chol, b):
    """Solve ``M x = b`` given ``chol = cholesky(M)``."""
    L = chol.L
    return np.linalg.solve(L.T, np.linalg.solve(L, b))


def chol_inverse(chol):
    return chol_solve(chol, np.eye(chol.size))


def mvn_logpdf(x, mean, chol):
    """Log density of ``MVN(mean, L L')`` at ``x``."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    if x.shape != mean.shape or x.ndim != 1 or x.shape[0] != chol.size:
        raise InvalidInputError(
            f"dimension mismatch: x {x.shape}, mean {mean.shape}, covariance {chol.size}"
        )
    z = _solve_lower(chol.L, x - mean)
    return -0.5 * (x.shape[0] * _LOG_2PI + chol.logdet + float(z @ z))


def mvn_sample(mean, chol, rng):
    """One draw ``mean + L z`` with ``z`` i.i.d. standard normal."""
    mean = np.asarray(mean, dtype=float)
    if mean.ndim != 1 or mean.shape[0] != chol.size:
        raise InvalidInputError(f"mean of shape {mean.shape} does not match covariance {chol.size}")
    return mean + chol.L @ rng.standard_normal(mean.shape[0])
