"""Synthetic data for the two-missing-covariate simulation design.

Twenty sites are drawn uniformly on ``[0, 20]^2`` with fifty observations
each.  ``X3 ~ N(0, 1)``; ``X1 ~ N(X3 + sigma_x1 W_x1, 1)``;
``X2 ~ N(2 X1 + sigma_x2 W_x2, 1)``;
``Y = b0 + b1 X1 + b2 X2 + b3 X3 + sigma_y W_y + N(0, 1)``, with every field
``W ~ MVN(0, H(lam))`` under the exponential kernel ``exp(-d / lam)``.

Missingness of ``(X1, X2)`` is sequential logistic in ``(X3, Y)`` and then
``(X3, Y, R1)``, hence MAR.  Coefficient truths are not published, so
:func:`calibrate_phi` fits the intercepts (and the ``R1`` coefficient) to the
target missing rates; the defaults in :class:`SimTruths` are its output.

Missing rates are reported as the triple ``(P(X1 missing), P(X2 missing),
P(both missing))``; see :func:`pattern_rates`.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.special import expit

from .errors import CalibrationError, InvalidInputError
from .kernels import ExponentialRange, LocationSet, cholesky, correlation_matrix, mvn_sample
from .model import CovariateSubModel, MissingnessSpec, ModelSpec, ResponseModel, SpatialDataset

#: (X1 missing, X2 missing, both missing) as row fractions
TARGET_PATTERN_RATES = (0.3282, 0.3927, 0.2872)


@dataclass(frozen=True)
class SimTruths:
    beta: tuple = (1.0, 1.5, 1.0, 2.0)
    sigma_y: float = float(np.sqrt(2.0))
    sigma_x1: float = 1.0
    sigma_x2: float = float(np.sqrt(1.5))
    lam_y: float = 3.0
    lam_x1: float = 5.0
    lam_x2: float = 4.0
    tau_y: float = 1.0
    tau_x1: float = 1.0
    tau_x2: float = 1.0
    # (intercept, X3, Y) and (intercept, X3, Y, R1).  Slopes fixed by hand;
    # intercepts and the R1 coefficient from
    # calibrate_phi(SimDesign(), SimTruths(), rng=20240611, n_reps=40)
    phi1: tuple = (0.8408, 0.5, -0.1)
    phi2: tuple = (-2.3093, -0.5, 0.1, 4.0965)


@dataclass(frozen=True)
class SimDesign:
    n_locations: int = 20
    n_per_location: int = 50
    side: float = 20.0
    n_replicates: int = 100
    fixed_locations: bool = False

    def __post_init__(self):
        for name in ("n_locations", "n_per_location", "n_replicates", "side"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive, got {getattr(self, name)}")


def _field(locations, lam, rng):
    H = correlation_matrix(ExponentialRange(lam), locations.dist)
    return mvn_sample(np.zeros(locations.size), cholesky(H), rng)


def random_locations(design, rng):
    coords = rng.uniform(0.0, design.side, size=(design.n_locations, 2))
    return LocationSet.from_coords(coords)


def gen_replicate(design, truths, rng, locations=None):
    """One complete dataset plus its latent fields.

    Returns
    -------
    data : SpatialDataset
        Columns ``(x1, x2, x3)``, nothing masked yet.
    latent : dict
        ``w_y``, ``w_x1``, ``w_x2`` at the sites.
    """
    if locations is None:
        locations = random_locations(design, rng)
    S, m = locations.size, design.n_per_location
    w_y = _field(locations, truths.lam_y, rng)
    w_x1 = _field(locations, truths.lam_x1, rng)
    w_x2 = _field(locations, truths.lam_x2, rng)
    loc = np.repeat(np.arange(S), m)
    n = loc.shape[0]
    x3 = rng.standard_normal(n)
    x1 = x3 + truths.sigma_x1 * w_x1[loc] + rng.standard_normal(n) / np.sqrt(truths.tau_x1)
    x2 = 2.0 * x1 + truths.sigma_x2 * w_x2[loc] + rng.standard_normal(n) / np.sqrt(truths.tau_x2)
    b = truths.beta
    y = (b[0] + b[1] * x1 + b[2] * x2 + b[3] * x3 + truths.sigma_y * w_y[loc]
         + rng.standard_normal(n) / np.sqrt(truths.tau_y))
    data = SpatialDataset(locations=locations, loc=loc, y=y, X=np.column_stack([x1, x2, x3]),
                          observed=np.ones((n, 2), dtype=bool))
    return data, {"w_y": w_y, "w_x1": w_x1, "w_x2": w_x2}


def _indicator_probs(x3, y, phi1, phi2):
    p1 = expit(phi1[0] + phi1[1] * x3 + phi1[2] * y)
    eta2 = phi2[0] + phi2[1] * x3 + phi2[2] * y
    return p1, expit(eta2), expit(eta2 + phi2[3])


def gen_missingness(data, phi1, phi2, rng):
    """Sequential MAR indicators; returns the ``(n, 2)`` observed mask.

    Only ``X3`` and ``Y`` (and ``R1``) enter, so the mask is a function of
    those columns and the generator state alone.
    """
    x3, y = data.X[:, 2], data.y
    u = rng.uniform(size=(2, data.n))
    p1, p2_r0, p2_r1 = _indicator_probs(x3, y, phi1, phi2)
    r1 = u[0] < p1
    r2 = u[1] < np.where(r1, p2_r1, p2_r0)
    return np.column_stack([r1, r2])


def gen_missingness_mnar(data, latent, phi1, phi2, rng):
    """Non-ignorable indicators that also load on the covariate fields.

    ``phi1 = (intercept, X3, Y, W_x1, W_x2)`` and
    ``phi2 = (intercept, X3, Y, R1, W_x1, W_x2)``.
    """
    x3, y = data.X[:, 2], data.y
    w1, w2 = latent["w_x1"][data.loc], latent["w_x2"][data.loc]
    u = rng.uniform(size=(2, data.n))
    r1 = u[0] < expit(phi1[0] + phi1[1] * x3 + phi1[2] * y + phi1[3] * w1 + phi1[4] * w2)
    eta2 = phi2[0] + phi2[1] * x3 + phi2[2] * y + phi2[3] * r1 + phi2[4] * w1 + phi2[5] * w2
    r2 = u[1] < expit(eta2)
    return np.column_stack([r1, r2])


#: Non-ignorable scenario: the calibrated MAR coefficients plus loadings on
#: ``(W_x1, W_x2)`` for both indicators.
MNAR_PHI1 = (0.8408, 0.5, -0.1, 1.5, -1.0)
MNAR_PHI2 = (-2.3093, -0.5, 0.1, 4.0965, 1.0, 1.5)


def gen_dataset_mnar(design, truths, rng, phi1=MNAR_PHI1, phi2=MNAR_PHI2, locations=None):
    """Replicate with non-ignorable missingness: ``(data, full, latent)``."""
    full, latent = gen_replicate(design, truths, rng, locations=locations)
    mask = gen_missingness_mnar(full, latent, phi1, phi2, rng)
    return apply_mask(full, mask), full, latent


def apply_mask(data, observed):
    """Copy of ``data`` with the masked cells blanked out."""
    return SpatialDataset(locations=data.locations, loc=data.loc, y=data.y, X=data.X,
                          observed=observed, names=data.names)


def pattern_rates(observed):
    """Row fractions with X1 missing, with X2 missing, and with both missing.

    The first two are marginal rates, so the complete-case share is
    ``1 - r[0] - r[1] + r[2]``.
    """
    r1, r2 = observed[:, 0], observed[:, 1]
    return np.array([np.mean(~r1), np.mean(~r2), np.mean(~r1 & ~r2)])


def exclusive_pattern_rates(observed):
    """Row fractions with only X1, only X2, both, and neither missing."""
    r1, r2 = observed[:, 0], observed[:, 1]
    return np.array([np.mean(~r1 & r2), np.mean(r1 & ~r2), np.mean(~r1 & ~r2), np.mean(r1 & r2)])


def gen_dataset(design, truths, rng, locations=None):
    """Replicate with MAR missingness applied: ``(data, full, latent)``."""
    full, latent = gen_replicate(design, truths, rng, locations=locations)
    mask = gen_missingness(full, truths.phi1, truths.phi2, rng)
    return apply_mask(full, mask), full, latent


def calibrate_phi(design, truths, target_rates=TARGET_PATTERN_RATES, rng=None, n_reps=20, tol=0.03):
    """Fit ``(phi10, phi20, phi23)`` so that expected :func:`pattern_rates`
    match ``target_rates``; slopes are taken from ``truths``.

    Rates are averaged over ``n_reps`` simulated replicates using the exact
    pattern probabilities (no Bernoulli noise), which keeps the objective
    smooth and deterministic for a given generator.

    Returns
    -------
    phi1, phi2 : tuple
    rates : ndarray
    """
    rng = np.random.default_rng(rng)
    target = np.asarray(target_rates, dtype=float)
    if (target.shape != (3,) or np.any(target < 0) or np.any(target > 1)
            or target[2] > min(target[0], target[1]) or target[0] + target[1] - target[2] > 1):
        raise CalibrationError(f"infeasible target rates {target_rates}")
    reps = [gen_replicate(design, truths, rng)[0] for _ in range(n_reps)]
    x3 = np.concatenate([d.X[:, 2] for d in reps])
    y = np.concatenate([d.y for d in reps])
    s1, s2 = truths.phi1[1:], truths.phi2[1:3]

    def rates(theta):
        phi1 = (theta[0], *s1)
        phi2 = (theta[1], *s2, theta[2])
        p1, p2_r0, p2_r1 = _indicator_probs(x3, y, phi1, phi2)
        m2 = (1 - p1) * (1 - p2_r0) + p1 * (1 - p2_r1)
        return np.array([np.mean(1 - p1), np.mean(m2), np.mean((1 - p1) * (1 - p2_r0))])

    fit = least_squares(lambda th: rates(th) - target, x0=np.zeros(3), bounds=(-30.0, 30.0))
    best = rates(fit.x)
    phi1 = (float(fit.x[0]), *map(float, s1))
    phi2 = (float(fit.x[1]), *map(float, s2), float(fit.x[2]))
    if np.max(np.abs(best - target)) > tol:
        raise CalibrationError(
            f"best rates {np.round(best, 4)} miss targets {target} by more than {tol}",
            best_phi=(phi1, phi2), best_rates=best,
        )
    return phi1, phi2, best


# ---------------------------------------------------------------------------
# model family used in the simulation study
# ---------------------------------------------------------------------------

VARIANTS = ("M1", "M2", "M3", "M4")

#: which covariate sub-models carry a spatial effect: (x1, x2)
_SPATIAL = {"M1": (True, True), "M2": (False, False), "M3": (True, False), "M4": (False, True)}


def mar_missingness(sample=True):
    """The generating mechanism as a fitted model: R1 ~ (X3, Y), R2 ~ (X3, Y, R1)."""
    return MissingnessSpec(mechanism="MAR", predictors=(("x3", "y"), ("x3", "y", "r1")), sample=sample)


def simulation_model(variant="M1", free_spatial=False, truths=SimTruths(), missingness=None):
    """``M1 .. M4`` (fixed spatial scales and ranges at their truths) or the
    starred variants with ``free_spatial=True``.

    Covariate columns: ``x1``, ``x2`` missing-prone, ``x3`` observed.
    """
    if variant not in _SPATIAL:
        raise InvalidInputError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    sp1, sp2 = _SPATIAL[variant]

    def fixed(spatial, sigma, lam):
        if free_spatial or not spatial:
            return {"spatial": spatial}
        return {"spatial": True, "sigma": sigma, "lam": lam}

    response = ResponseModel(predictors=(0, 1, 2), **fixed(True, truths.sigma_y, truths.lam_y))
    sub1 = CovariateSubModel(target=0, predictors=(2,), **fixed(sp1, truths.sigma_x1, truths.lam_x1))
    sub2 = CovariateSubModel(target=1, predictors=(2, 0), **fixed(sp2, truths.sigma_x2, truths.lam_x2))
    return ModelSpec(response=response, submodels=(sub1, sub2), missingness=missingness)


def truth_table(truths=SimTruths(), spec=None):
    """True values keyed by summary-row name for parameters present in
    ``spec`` (defaults to ``M1``)."""
    spec = spec or simulation_model("M1", truths=truths)
    out = {f"beta.{k}": float(b) for k, b in enumerate(truths.beta)}
    out["tau_y"] = truths.tau_y
    out.update({"alpha.1.0": 0.0, "alpha.1.1": 1.0, "tau_x.1": truths.tau_x1,
                "alpha.2.0": 0.0, "alpha.2.1": 0.0, "alpha.2.2": 2.0, "tau_x.2": truths.tau_x2})
    free = [("y", spec.response, truths.sigma_y, truths.lam_y)]
    lookup = {0: (truths.sigma_x1, truths.lam_x1), 1: (truths.sigma_x2, truths.lam_x2)}
    for sub in spec.submodels:
        free.append((f"x.{sub.target + 1}", sub, *lookup[sub.target]))
    for tag, m, sigma, lam in free:
        if m.spatial and m.sigma is None:
            out[f"sigma_{tag}"] = float(sigma)
        if m.spatial and m.lam is None:
            out[f"log_lambda_{tag}"] = float(np.log(lam))
    return out
