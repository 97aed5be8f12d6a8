"""Property-based checks of the structural invariants."""

import numpy as np
from hypothesis import given, settings, strategies as st

from spatialmiss.kernels import (
    CarAdjacency,
    ExponentialRange,
    car_lambda_bounds,
    car_precision,
    cholesky,
    correlation_matrix,
    mvn_logpdf,
    pairwise_distances,
)
from spatialmiss.mcmc import ChainConfig, run_chain
from spatialmiss.model import (
    CovariateSubModel,
    MissingnessSpec,
    ModelSpec,
    ResponseModel,
    check_state,
    init_state,
    validate,
)
from spatialmiss.simgen import SimDesign, SimTruths, gen_missingness, gen_replicate

from conftest import make_dataset

seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.integers(2, 8), st.floats(0.1, 10), st.floats(1.01, 5))
@settings(max_examples=60, deadline=None)
def test_exponential_correlation_increases_with_range(seed, S, lam, factor):
    d = pairwise_distances(np.random.default_rng(seed).uniform(0, 10, (S, 2)))
    small = correlation_matrix(ExponentialRange(lam), d)
    large = correlation_matrix(ExponentialRange(lam * factor), d)
    off = ~np.eye(S, dtype=bool)
    assert np.all(large[off] >= small[off])


@given(seeds, st.integers(1, 8))
@settings(max_examples=60, deadline=None)
def test_mvn_logpdf_matches_explicit_inverse(seed, S):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((S, S))
    C = A @ A.T + 0.5 * np.eye(S)
    x, m = rng.standard_normal(S), rng.standard_normal(S)
    r = x - m
    direct = -0.5 * (S * np.log(2 * np.pi) + np.linalg.slogdet(C)[1] + r @ np.linalg.inv(C) @ r)
    assert abs(mvn_logpdf(x, m, cholesky(C)) - direct) < 1e-9 * max(1.0, abs(direct))


@given(seeds, st.integers(2, 8), st.floats(0.01, 0.99))
@settings(max_examples=60, deadline=None)
def test_car_covariance_inverts_precision(seed, S, frac):
    rng = np.random.default_rng(seed)
    adj = np.triu((rng.uniform(size=(S, S)) < 0.5).astype(float), 1)
    adj = adj + adj.T
    lo, hi = car_lambda_bounds(adj)
    if not np.isfinite(lo):
        lo, hi = -1.0, 1.0  # no edges: every lambda is admissible
    lam = lo + frac * (hi - lo)
    Sigma = correlation_matrix(CarAdjacency(adj, lam))
    np.testing.assert_allclose(Sigma @ car_precision(adj, lam), np.eye(S), atol=1e-8)


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_mar_mask_is_blind_to_x1_x2(seed):
    rng = np.random.default_rng(seed)
    data, _ = gen_replicate(SimDesign(n_locations=3, n_per_location=10), SimTruths(), rng)
    X = data.X.copy()
    X[:, :2] = rng.standard_normal((data.n, 2)) * 100
    other = type(data)(locations=data.locations, loc=data.loc, y=data.y, X=X, observed=data.observed)
    t = SimTruths()
    assert np.array_equal(gen_missingness(data, t.phi1, t.phi2, np.random.default_rng(seed)),
                          gen_missingness(other, t.phi1, t.phi2, np.random.default_rng(seed)))


_effect = st.sampled_from([
    {"spatial": False},
    {"spatial": True},
    {"spatial": True, "sigma": 0.7},
    {"spatial": True, "sigma": 0.7, "lam": 2.0},
])


@given(seed=seeds, resp=_effect, e1=_effect, e2=_effect, sub2_uses_x1=st.booleans(),
       mech=st.sampled_from([None, "MAR", "MNAR"]), sample=st.booleans())
@settings(max_examples=30, deadline=None)
def test_valid_specs_can_be_fitted(seed, resp, e1, e2, sub2_uses_x1, mech, sample):
    rng = np.random.default_rng(seed)
    data = make_dataset(rng, S=3, N=5, missing=0.3)
    subs = (CovariateSubModel(0, (2,), **e1), CovariateSubModel(1, (2, 0) if sub2_uses_x1 else (2,), **e2))
    miss = None
    if mech == "MAR":
        miss = MissingnessSpec("MAR", (("x3", "y"), ("y", "r1")), sample=sample)
    elif mech == "MNAR":
        tokens = ["x3", "x2"] + [f"wx{k + 1}" for k, e in enumerate((e1, e2)) if e["spatial"]]
        miss = MissingnessSpec("MNAR", (tuple(tokens), ("x1", "r1")))
    spec = ModelSpec(ResponseModel((0, 1, 2), **resp), subs, miss)
    validate(spec, data)
    state = init_state(spec, data)
    chain = run_chain(spec, data, config=ChainConfig(n_burnin=3, n_kept=2, thin=1, seed=seed % 1000),
                      state=state)
    assert chain.n_draws == 2 and np.all(np.isfinite(chain.deviance))
    assert check_state(state, spec, data)
