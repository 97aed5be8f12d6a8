"""Datasets, model specifications, priors and the sampler state.

Covariate columns follow a fixed convention: the ``q`` missing-prone
covariates come first (columns ``0..q-1``), the fully observed ones after.
Missing cells hold ``NaN`` in :attr:`SpatialDataset.X`; the mask
``observed[:, l]`` is ``True`` where covariate ``l`` was observed, matching
the missingness indicator ``R = 1``.

Model specifications refer to covariates by 0-based column index.  In
serialized form (config files, :meth:`ModelSpec.to_dict`) the 1-based names
``x1 .. xp`` are used, and missingness predictors are written as tokens:

``xj``
    covariate column ``j``
``y``
    the response
``rj``
    an earlier missingness indicator
``wxj``
    the spatial effect of the sub-model for covariate ``j`` (MNAR only)
"""

from dataclasses import dataclass, replace
import re

import numpy as np

from .errors import (
    AdjacencyError,
    CannotInitializeError,
    CycleError,
    FixedParameterError,
    IndexOutOfRangeError,
    InvalidInputError,
    MARViolationError,
    SubModelCoverageError,
    ValidationError,
)
from .kernels import LocationSet, car_lambda_bounds

CORRELATIONS = ("exponential", "car")
MECHANISMS = ("MAR", "MNAR")


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpatialDataset:
    """Observations grouped by location.

    Attributes
    ----------
    locations : LocationSet
    loc : (n,) int ndarray
        Location index (into ``locations``) of every observation.
    y : (n,) ndarray
    X : (n, p) ndarray
        Covariates, ``NaN`` in masked-missing cells.
    observed : (n, q) bool ndarray
        Missingness indicators for the first ``q`` columns.
    names : tuple of str
        Column names, ``x1 .. xp`` unless given.
    """

    locations: LocationSet
    loc: np.ndarray
    y: np.ndarray
    X: np.ndarray
    observed: np.ndarray
    names: tuple = None

    def __post_init__(self):
        loc = np.asarray(self.loc, dtype=np.intp)
        y = np.asarray(self.y, dtype=float)
        X = np.array(self.X, dtype=float)
        obs = np.asarray(self.observed, dtype=bool)
        if X.ndim != 2:
            raise InvalidInputError("X must be two-dimensional")
        n, p = X.shape
        if obs.ndim != 2 or obs.shape[0] != n or obs.shape[1] > p:
            raise InvalidInputError(f"mask of shape {obs.shape} does not fit X of shape {X.shape}")
        if y.shape != (n,) or loc.shape != (n,):
            raise InvalidInputError("y, loc and X disagree on the number of observations")
        if n and (loc.min() < 0 or loc.max() >= self.locations.size):
            raise InvalidInputError("location index out of range")
        if not np.all(np.isfinite(y)):
            raise InvalidInputError("responses must be finite")
        q = obs.shape[1]
        prone = X[:, :q]
        if not np.all(np.isfinite(prone[obs])):
            raise InvalidInputError("observed covariate cells must be finite")
        if not np.all(np.isfinite(X[:, q:])):
            bad = [j + 1 for j in range(q, p) if not np.all(np.isfinite(X[:, j]))]
            raise InvalidInputError(f"columns {bad} are not missing-prone but contain missing values")
        # sentinel: masked cells always read as NaN
        prone[~obs] = np.nan
        X[:, :q] = prone
        names = tuple(self.names) if self.names is not None else tuple(f"x{j + 1}" for j in range(p))
        if len(names) != p:
            raise InvalidInputError("one name per covariate column is required")
        for arr in (loc, y, X, obs):
            arr.setflags(write=False)
        object.__setattr__(self, "loc", loc)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "observed", obs)
        object.__setattr__(self, "names", names)

    @classmethod
    def from_arrays(cls, locations, loc, y, X, q, names=None):
        """Build a dataset, deriving the mask from ``NaN`` cells of the first
        ``q`` columns."""
        X = np.asarray(X, dtype=float)
        observed = ~np.isnan(X[:, :q])
        return cls(locations=locations, loc=loc, y=y, X=X, observed=observed, names=names)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def q(self):
        return self.observed.shape[1]

    @property
    def counts(self):
        """Observations per location, ``N_s``."""
        return np.bincount(self.loc, minlength=self.locations.size)

    def missing_cells(self):
        """``(rows, cols)`` of every masked-missing cell, column-major order."""
        cols, rows = np.nonzero(~self.observed.T)
        return rows, cols

    def complete_cases(self):
        """Dataset restricted to rows with every covariate observed."""
        keep = self.observed.all(axis=1)
        return SpatialDataset(
            locations=self.locations,
            loc=self.loc[keep],
            y=self.y[keep],
            X=self.X[keep],
            observed=self.observed[keep],
            names=self.names,
        )

    def row_in_location(self):
        """0-based position of every observation within its location."""
        out = np.empty(self.n, dtype=np.intp)
        seen = np.zeros(self.locations.size, dtype=np.intp)
        for i, s in enumerate(self.loc):
            out[i] = seen[s]
            seen[s] += 1
        return out


# ---------------------------------------------------------------------------
# model specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResponseModel:
    """Gaussian response regression with an optional spatial effect.

    ``sigma`` / ``lam`` hold fixed values; ``None`` means the parameter is
    sampled.
    """

    predictors: tuple
    spatial: bool = True
    correlation: str = "exponential"
    sigma: float = None
    lam: float = None

    def __post_init__(self):
        object.__setattr__(self, "predictors", tuple(int(j) for j in self.predictors))


@dataclass(frozen=True)
class CovariateSubModel:
    """Normal regression of missing-prone covariate ``target`` on
    ``predictors`` (fully observed columns or earlier missing-prone ones)."""

    target: int
    predictors: tuple
    spatial: bool = True
    correlation: str = "exponential"
    sigma: float = None
    lam: float = None

    def __post_init__(self):
        object.__setattr__(self, "target", int(self.target))
        object.__setattr__(self, "predictors", tuple(int(j) for j in self.predictors))


@dataclass(frozen=True)
class MissingnessSpec:
    """Sequential logistic models for the indicators ``R_1 .. R_q``.

    ``predictors[l]`` lists the tokens entering ``logit P(R_l = 1)``
    (intercept implied).  With ``sample=False`` and a MAR mechanism the block
    is left out of the sampler entirely.
    """

    mechanism: str = "MAR"
    predictors: tuple = ()
    sample: bool = True

    def __post_init__(self):
        object.__setattr__(self, "predictors", tuple(tuple(p) for p in self.predictors))


@dataclass(frozen=True)
class ModelSpec:
    response: ResponseModel
    submodels: tuple = ()
    missingness: MissingnessSpec = None

    def __post_init__(self):
        object.__setattr__(self, "submodels", tuple(self.submodels))

    # -- derived lookups ---------------------------------------------------

    def submodel_for(self, target):
        for k, sub in enumerate(self.submodels):
            if sub.target == target:
                return k
        raise KeyError(target)

    @property
    def n_columns(self):
        """One past the highest covariate column referenced anywhere."""
        cols = [*self.response.predictors]
        for sub in self.submodels:
            cols += [sub.target, *sub.predictors]
        if self.missingness is not None:
            for tokens in self.missingness.predictors:
                cols += [j for kind, j in map(parse_token, tokens) if kind in ("x", "wx")]
        return max(cols) + 1 if cols else 0

    @property
    def samples_phi(self):
        m = self.missingness
        return m is not None and (m.sample or m.mechanism == "MNAR")

    # -- serialization -----------------------------------------------------

    def to_dict(self):
        def effect(m):
            d = {"spatial": m.spatial}
            if m.spatial:
                d["correlation"] = m.correlation
                if m.sigma is not None:
                    d["sigma"] = float(m.sigma)
                if m.lam is not None:
                    d["lambda"] = float(m.lam)
            return d

        out = {
            "response": {"predictors": [_name(j) for j in self.response.predictors],
                         **effect(self.response)},
            "covariates": [
                {"target": _name(s.target), "predictors": [_name(j) for j in s.predictors],
                 **effect(s)}
                for s in self.submodels
            ],
        }
        if self.missingness is not None:
            out["missingness"] = {
                "mechanism": self.missingness.mechanism,
                "sample": self.missingness.sample,
                "indicators": [list(p) for p in self.missingness.predictors],
            }
        return out

    @classmethod
    def from_dict(cls, d):
        try:
            r = d["response"]
            response = ResponseModel(
                predictors=[_index(t) for t in r["predictors"]],
                spatial=bool(r.get("spatial", True)),
                correlation=r.get("correlation", "exponential"),
                sigma=_opt_float(r.get("sigma")),
                lam=_opt_float(r.get("lambda")),
            )
            subs = [
                CovariateSubModel(
                    target=_index(c["target"]),
                    predictors=[_index(t) for t in c.get("predictors", [])],
                    spatial=bool(c.get("spatial", True)),
                    correlation=c.get("correlation", "exponential"),
                    sigma=_opt_float(c.get("sigma")),
                    lam=_opt_float(c.get("lambda")),
                )
                for c in d.get("covariates", []) or []
            ]
            miss = None
            if d.get("missingness") is not None:
                m = d["missingness"]
                miss = MissingnessSpec(
                    mechanism=str(m.get("mechanism", "MAR")).upper(),
                    predictors=[[str(t) for t in p] for p in m.get("indicators", [])],
                    sample=bool(m.get("sample", True)),
                )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed model description: {exc!r}") from None
        return cls(response=response, submodels=subs, missingness=miss)


def _name(j):
    return f"x{j + 1}"


_COL = re.compile(r"^x(\d+)$")
_TOKEN = re.compile(r"^(x|r|wx)(\d+)$|^(y)$")


def _index(name):
    if isinstance(name, (int, np.integer)):
        return int(name)
    m = _COL.match(str(name).strip())
    if not m or int(m.group(1)) < 1:
        raise ValueError(f"bad covariate name {name!r}")
    return int(m.group(1)) - 1


def _opt_float(v):
    return None if v is None else float(v)


def parse_token(token):
    """``'x3' -> ('x', 2)``, ``'y' -> ('y', None)``, ``'r1' -> ('r', 0)``,
    ``'wx2' -> ('wx', 1)``."""
    m = _TOKEN.match(str(token).strip())
    if not m:
        raise ValidationError(f"unknown missingness predictor {token!r}")
    if m.group(3):
        return "y", None
    idx = int(m.group(2))
    if idx < 1:
        raise IndexOutOfRangeError(f"indices are 1-based: {token!r}")
    return m.group(1), idx - 1


# ---------------------------------------------------------------------------
# priors and state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Priors:
    """Hyperparameters.

    Normal precisions ``psi_*`` for regression coefficients, half-normal
    precisions for the squared spatial scales, inverse-gamma ``(a, b)`` for
    the noise variances and log-normal precisions for the ranges.  Defaults
    are the non-informative values used throughout the simulation and
    real-data analyses.
    """

    psi_beta: float = 0.001
    psi_alpha: float = 0.001
    psi_phi: float = 0.001
    psi_sigma_y: float = 0.001
    psi_sigma_x: float = 0.001
    a_y: float = 0.001
    b_y: float = 0.001
    a_x: float = 0.001
    b_x: float = 0.001
    psi_lambda_y: float = 1.0
    psi_lambda_x: float = 1.0

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if not (np.isfinite(v) and v > 0):
                raise ValidationError(f"prior hyperparameter {name} must be > 0, got {v}")

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown prior keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class ParameterState:
    """One full sampler state; owned by exactly one chain.

    Sub-model quantities are lists indexed in the order of
    ``ModelSpec.submodels``; ``phi`` is indexed by indicator.  ``X`` is the
    covariate matrix with every missing cell replaced by its current
    imputation.
    """

    beta: np.ndarray
    tau_y: float
    sigma_y: float
    lam_y: float
    w_y: np.ndarray
    alpha: list
    tau_x: list
    sigma_x: list
    lam_x: list
    w_x: list
    phi: list
    X: np.ndarray

    def copy(self):
        return ParameterState(
            beta=self.beta.copy(), tau_y=self.tau_y, sigma_y=self.sigma_y, lam_y=self.lam_y,
            w_y=self.w_y.copy(), alpha=[a.copy() for a in self.alpha],
            tau_x=list(self.tau_x), sigma_x=list(self.sigma_x), lam_x=list(self.lam_x),
            w_x=[w.copy() for w in self.w_x], phi=[f.copy() for f in self.phi], X=self.X.copy(),
        )


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def validate(spec, data):
    """Check every invariant and cross-reference of ``spec`` against
    ``data``; raise a specific :class:`ValidationError` subclass on the
    first violation."""
    p, q = data.p, data.q

    def check_cols(cols, where):
        for j in cols:
            if not 0 <= j < p:
                raise IndexOutOfRangeError(f"{where}: covariate index {j + 1} outside 1..{p}")
        if len(set(cols)) != len(cols):
            raise ValidationError(f"{where}: duplicated predictors")

    def check_effect(m, where):
        if m.correlation not in CORRELATIONS:
            raise ValidationError(f"{where}: unknown correlation family {m.correlation!r}")
        if not m.spatial:
            if m.sigma is not None or m.lam is not None:
                raise FixedParameterError(f"{where}: fixed sigma/lambda given without a spatial effect")
            return
        if m.sigma is not None and not (np.isfinite(m.sigma) and m.sigma >= 0):
            raise FixedParameterError(f"{where}: fixed sigma must be >= 0")
        if m.correlation == "car":
            adj = data.locations.adjacency
            if adj is None:
                raise AdjacencyError(f"{where}: CAR structure needs a location adjacency matrix")
            if m.lam is not None:
                lo, hi = car_lambda_bounds(adj)
                if not lo < m.lam < hi:
                    raise FixedParameterError(f"{where}: CAR lambda outside ({lo:.4g}, {hi:.4g})")
        elif m.lam is not None and not (np.isfinite(m.lam) and m.lam > 0):
            raise FixedParameterError(f"{where}: fixed range must be > 0")

    check_cols(spec.response.predictors, "response")
    check_effect(spec.response, "response")

    targets = [s.target for s in spec.submodels]
    if sorted(targets) != list(range(q)):
        raise SubModelCoverageError(
            f"need exactly one sub-model per missing-prone covariate x1..x{q}, got targets "
            f"{[t + 1 for t in targets]}"
        )
    seen = set()
    for sub in spec.submodels:
        where = f"sub-model x{sub.target + 1}"
        check_cols(sub.predictors, where)
        check_effect(sub, where)
        for j in sub.predictors:
            if j == sub.target:
                raise CycleError(f"{where}: predicts its own target")
            if j < q and j not in seen:
                raise CycleError(f"{where}: x{j + 1} is missing-prone and not earlier in the ordering")
        seen.add(sub.target)

    miss = spec.missingness
    if miss is None:
        return
    if miss.mechanism not in MECHANISMS:
        raise ValidationError(f"unknown missingness mechanism {miss.mechanism!r}")
    if len(miss.predictors) != q:
        raise SubModelCoverageError(f"need {q} indicator models, got {len(miss.predictors)}")
    for ell, tokens in enumerate(miss.predictors):
        where = f"indicator r{ell + 1}"
        parsed = [parse_token(t) for t in tokens]
        if len(set(parsed)) != len(parsed):
            raise ValidationError(f"{where}: duplicated predictors")
        for kind, j in parsed:
            if kind == "x":
                if not 0 <= j < p:
                    raise IndexOutOfRangeError(f"{where}: covariate x{j + 1} outside 1..{p}")
                if j < q and miss.mechanism == "MAR":
                    raise MARViolationError(f"{where}: MAR model uses missing-prone covariate x{j + 1}")
            elif kind == "r":
                if j >= q:
                    raise IndexOutOfRangeError(f"{where}: no indicator r{j + 1}")
                if j >= ell:
                    raise CycleError(f"{where}: r{j + 1} is not an earlier indicator")
            elif kind == "wx":
                if miss.mechanism == "MAR":
                    raise MARViolationError(f"{where}: MAR model uses spatial effect wx{j + 1}")
                if j >= q:
                    raise IndexOutOfRangeError(f"{where}: no sub-model for x{j + 1}")
                if not spec.submodels[spec.submodel_for(j)].spatial:
                    raise ValidationError(f"{where}: sub-model x{j + 1} has no spatial effect")


def init_state(spec, data, rng=None):
    """Neutral starting point: zero coefficients and fields, unit precisions
    and ranges, ``0.5`` spatial scales (fixed values where given), and every
    missing cell at its column's observed mean.

    The state is a deterministic function of ``spec`` and ``data``; ``rng``
    is accepted for interface symmetry and left untouched.
    """
    S = data.locations.size
    X = np.array(data.X, dtype=float)
    for ell in range(data.q):
        col = X[:, ell]
        obs = data.observed[:, ell]
        if not obs.all():
            if not obs.any():
                raise CannotInitializeError(f"covariate {data.names[ell]} has no observed values")
            col[~obs] = col[obs].mean()

    def start(m):
        if not m.spatial:
            return 0.0, 1.0
        sigma = 0.5 if m.sigma is None else float(m.sigma)
        lam = m.lam
        if lam is None:
            lam = 0.0 if m.correlation == "car" else 1.0
        return sigma, float(lam)

    sigma_y, lam_y = start(spec.response)
    subs = [start(s) for s in spec.submodels]
    n_phi = []
    if spec.missingness is not None:
        n_phi = [len(t) + 1 for t in spec.missingness.predictors]
    return ParameterState(
        beta=np.zeros(len(spec.response.predictors) + 1),
        tau_y=1.0,
        sigma_y=sigma_y,
        lam_y=lam_y,
        w_y=np.zeros(S),
        alpha=[np.zeros(len(s.predictors) + 1) for s in spec.submodels],
        tau_x=[1.0] * len(spec.submodels),
        sigma_x=[s[0] for s in subs],
        lam_x=[s[1] for s in subs],
        w_x=[np.zeros(S) for _ in spec.submodels],
        phi=[np.zeros(k) for k in n_phi],
        X=X,
    )


def check_state(state, spec, data):
    """Raise ``AssertionError`` unless ``state`` satisfies every invariant."""
    S = data.locations.size
    assert state.beta.shape == (len(spec.response.predictors) + 1,)
    assert state.tau_y > 0 and state.sigma_y >= 0
    assert state.w_y.shape == (S,)
    if spec.response.correlation == "exponential":
        assert state.lam_y > 0
    assert len(state.alpha) == len(spec.submodels)
    for k, sub in enumerate(spec.submodels):
        assert state.alpha[k].shape == (len(sub.predictors) + 1,)
        assert state.tau_x[k] > 0 and state.sigma_x[k] >= 0
        assert state.w_x[k].shape == (S,)
        if sub.correlation == "exponential":
            assert state.lam_x[k] > 0
    assert state.X.shape == data.X.shape
    assert np.all(np.isfinite(state.X)), "imputations must cover every masked cell"
    known = ~np.isnan(data.X)
    assert np.array_equal(state.X[known], data.X[known]), "observed cells must not change"
    for f in state.phi:
        assert np.all(np.isfinite(f))
    return True


def with_fixed(spec, response=None, submodels=None):
    """Copy of ``spec`` with updated fixed-parameter fields."""
    resp = replace(spec.response, **(response or {}))
    subs = list(spec.submodels)
    for k, kw in (submodels or {}).items():
        subs[k] = replace(subs[k], **kw)
    return replace(spec, response=resp, submodels=tuple(subs))
