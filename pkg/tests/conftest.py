import numpy as np
import pytest

from spatialmiss.kernels import LocationSet
from spatialmiss.model import CovariateSubModel, MissingnessSpec, ModelSpec, ResponseModel, SpatialDataset


def make_locations(S, rng, side=10.0, adjacency=None):
    return LocationSet.from_coords(rng.uniform(0.0, side, size=(S, 2)), adjacency=adjacency)


def ring_adjacency(S):
    adj = np.zeros((S, S))
    for s in range(S):
        adj[s, (s + 1) % S] = adj[(s + 1) % S, s] = 1.0
    return adj


def make_dataset(rng, S=4, N=6, p=3, q=2, missing=0.3, locations=None):
    """Small dataset with ``q`` missing-prone columns and roughly ``missing``
    of their cells masked (at least one observed value kept per column)."""
    locations = locations or make_locations(S, rng)
    loc = np.repeat(np.arange(locations.size), N)
    n = loc.shape[0]
    X = rng.standard_normal((n, p))
    y = X @ np.linspace(1.0, 2.0, p) + rng.standard_normal(n)
    observed = rng.uniform(size=(n, q)) > missing
    observed[0] = True
    return SpatialDataset(locations=locations, loc=loc, y=y, X=X, observed=observed)


def two_covariate_spec(spatial=True, missingness=None, sigma=None, lam=None):
    kw = {"spatial": spatial}
    if spatial:
        kw.update(sigma=sigma, lam=lam)
    return ModelSpec(
        response=ResponseModel(predictors=(0, 1, 2), **kw),
        submodels=(CovariateSubModel(target=0, predictors=(2,), **kw),
                   CovariateSubModel(target=1, predictors=(2, 0), **kw)),
        missingness=missingness,
    )


MAR2 = MissingnessSpec(mechanism="MAR", predictors=(("x3", "y"), ("x3", "y", "r1")))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting ------------------------------------------------------

ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    """Remember one criterion's outcome for the terminal summary."""
    ACCEPTANCE[number] = (bool(passed), detail)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
