import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.spatial.distance import cdist
from scipy.stats import multivariate_normal

from spatialmiss.errors import (
    InvalidInputError,
    InvalidParameterError,
    NotPositiveDefiniteError,
    SingularityError,
)
from spatialmiss.kernels import (
    CarAdjacency,
    ExponentialRange,
    LocationSet,
    car_lambda_bounds,
    car_precision,
    chol_inverse,
    chol_solve,
    cholesky,
    correlation_matrix,
    mvn_logpdf,
    mvn_sample,
    pairwise_distances,
)

from conftest import ring_adjacency

coords_strategy = arrays(np.float64, st.tuples(st.integers(1, 8), st.just(2)),
                         elements=st.floats(-100, 100, allow_nan=False, width=64).map(lambda v: round(v, 6)))


def test_distances_match_cdist(rng):
    c = rng.uniform(0, 20, size=(7, 2))
    np.testing.assert_allclose(pairwise_distances(c), cdist(c, c), atol=1e-12)


def test_distance_of_unit_offsets():
    d = pairwise_distances([[0.0, 0.0], [3.0, 4.0]])
    assert d[0, 1] == 5.0 and d[1, 0] == 5.0 and d[0, 0] == 0.0


@given(coords_strategy)
@settings(max_examples=60, deadline=None)
def test_distance_invariants(c):
    d = pairwise_distances(c)
    assert np.array_equal(d, d.T)
    assert np.all(np.diag(d) == 0)
    differ = np.any(c[:, None, :] != c[None, :, :], axis=2)
    assert np.all(d[differ] > 0)
    S = c.shape[0]
    for i in range(S):
        assert np.all(d[i][:, None] <= d[i][None, :] + d + 1e-9)


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_distance_rejects_non_finite(bad):
    with pytest.raises(InvalidInputError):
        pairwise_distances([[0.0, 0.0], [bad, 1.0]])


def test_location_set_checks_ids():
    with pytest.raises(InvalidInputError):
        LocationSet.from_coords(np.zeros((2, 2)), ids=["a", "a"])
    with pytest.raises(InvalidInputError):
        LocationSet.from_coords(np.zeros((2, 2)), ids=["a"])


def test_exponential_kernel_values():
    d = np.array([[0.0, 2.0], [2.0, 0.0]])
    H = correlation_matrix(ExponentialRange(2.0), d)
    assert H[0, 1] == pytest.approx(np.exp(-1.0))
    assert np.all(np.diag(H) == 1.0)


@pytest.mark.parametrize("lam", [0.0, -1.0])
def test_exponential_range_must_be_positive(lam):
    with pytest.raises(InvalidParameterError):
        ExponentialRange(lam)


def test_car_bounds_are_reciprocal_extreme_eigenvalues():
    adj = ring_adjacency(5)
    e = np.linalg.eigvalsh(adj)
    lo, hi = car_lambda_bounds(adj)
    assert lo == pytest.approx(1.0 / e.min())
    assert hi == pytest.approx(1.0 / e.max())


def test_car_covariance_inside_bounds_is_pd():
    adj = ring_adjacency(6)
    lo, hi = car_lambda_bounds(adj)
    for lam in np.linspace(lo, hi, 9)[1:-1]:
        Sigma = correlation_matrix(CarAdjacency(adj, lam))
        np.testing.assert_allclose(Sigma, np.linalg.inv(np.eye(6) - lam * adj), atol=1e-10)
        cholesky(Sigma)
    np.testing.assert_allclose(car_precision(adj, 0.3), np.eye(6) - 0.3 * adj)


@pytest.mark.parametrize("where", ["lo", "hi"])
def test_car_outside_bounds_is_singular(where):
    adj = ring_adjacency(4)
    lo, hi = car_lambda_bounds(adj)
    with pytest.raises(SingularityError):
        CarAdjacency(adj, lo if where == "lo" else hi)


def test_car_rejects_non_binary_adjacency():
    adj = ring_adjacency(4) * 0.5
    with pytest.raises(InvalidInputError):
        LocationSet.from_coords(np.zeros((4, 2)) + np.arange(4)[:, None], adjacency=adj)


def test_cholesky_reconstructs_and_logdet(rng):
    A = rng.standard_normal((6, 6))
    M = A @ A.T + 6 * np.eye(6)
    ch = cholesky(M)
    assert np.linalg.norm(ch.L @ ch.L.T - M) / np.linalg.norm(M) < 1e-8
    assert np.all(np.diag(ch.L) > 0)
    assert ch.logdet == pytest.approx(np.linalg.slogdet(M)[1], rel=1e-12)
    b = rng.standard_normal(6)
    np.testing.assert_allclose(chol_solve(ch, b), np.linalg.solve(M, b), rtol=1e-10)
    np.testing.assert_allclose(chol_inverse(ch), np.linalg.inv(M), rtol=1e-9, atol=1e-12)


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefiniteError):
        cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NotPositiveDefiniteError):
        cholesky(np.zeros((2, 2)))


def test_mvn_logpdf_matches_scipy(rng):
    A = rng.standard_normal((4, 4))
    C = A @ A.T + np.eye(4)
    x, m = rng.standard_normal(4), rng.standard_normal(4)
    assert mvn_logpdf(x, m, cholesky(C)) == pytest.approx(multivariate_normal(m, C).logpdf(x), abs=1e-10)


def test_mvn_sample_moments(rng):
    C = np.array([[2.0, 0.8], [0.8, 1.0]])
    ch = cholesky(C)
    draws = np.array([mvn_sample(np.array([1.0, -1.0]), ch, rng) for _ in range(20000)])
    np.testing.assert_allclose(draws.mean(axis=0), [1.0, -1.0], atol=0.05)
    np.testing.assert_allclose(np.cov(draws.T), C, atol=0.08)
