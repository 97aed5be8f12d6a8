"""Metropolis-within-Gibbs sampler for the joint response / covariate /
missingness model.

Sweep order: impute missing covariates, then the response regression
(``beta``, ``tau_y``, ``sigma_y``, ``lambda_y``, ``W_y``), then every
covariate sub-model in its conditional order (``alpha``, ``tau``, ``sigma``,
``lambda``, ``W``), then the missingness coefficients ``phi``.

Conjugate blocks are drawn exactly.  ``sigma`` and ``lambda`` use Gaussian
random walks on ``log sigma^2`` and ``log lambda`` (a logit transform of the
admissible interval for CAR coefficients); ``phi`` uses a random walk whose
shape is the inverse Fisher information of the logistic model.  Step sizes
adapt during burn-in only and are frozen afterwards.

When an MNAR missingness model uses a covariate spatial effect or a
missing-prone covariate, the corresponding block switches to Metropolis
steps that propose from the conjugate conditional (one site, or one cell, at
a time) and accept on the logistic likelihood ratio.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NotPositiveDefiniteError, SamplerError
from .kernels import (
    ExponentialRange,
    car_lambda_bounds,
    car_precision,
    chol_inverse,
    cholesky,
    correlation_matrix,
    mvn_logpdf,
)
from .likelihood import (
    LOG_2PI,
    bernoulli_logit_terms,
    design,
    indicator_design,
    missingness_deviance,
    response_loglik_terms,
)
from .model import Priors, parse_token


@dataclass(frozen=True)
class ChainConfig:
    """Run length, seeding and Metropolis tuning.

    Kept draws are taken every ``thin`` iterations after ``n_burnin``
    iterations; the chain therefore runs ``n_burnin + n_kept * thin``
    sweeps.
    """

    n_burnin: int = 2000
    n_kept: int = 1000
    thin: int = 5
    seed: int = 0
    init_step: float = 0.5
    adapt_window: int = 50
    target_accept: float = 0.44
    target_accept_vector: float = 0.234

    def __post_init__(self):
        if self.n_burnin < 0 or self.n_kept < 1 or self.thin < 1 or self.adapt_window < 1:
            raise InvalidInputError("n_burnin >= 0 and n_kept, thin, adapt_window >= 1 are required")
        for t in (self.target_accept, self.target_accept_vector):
            if not 0 < t < 1:
                raise InvalidInputError("target acceptance rates must lie in (0, 1)")
        if self.init_step < 0:
            raise InvalidInputError("init_step must be >= 0")

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown chain keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ChainOutput:
    """Thinned post-burn-in draws.

    ``draws`` maps parameter names to arrays whose first axis indexes kept
    draws.  Names: ``beta``, ``tau_y``, ``sigma_y``, ``lambda_y``, ``w_y`` and,
    per sub-model with target covariate ``t`` (1-based), ``alpha.t``,
    ``tau_x.t``, ``sigma_x.t``, ``lambda_x.t``, ``w_x.t``; per indicator
    ``phi.l``.  Spatial quantities are present only for spatial models.
    """

    draws: dict
    imputations: np.ndarray
    missing_rows: np.ndarray
    missing_cols: np.ndarray
    loglik: np.ndarray
    deviance: np.ndarray
    deviance_r: np.ndarray = None
    acceptance: dict = field(default_factory=dict)
    step_sizes: dict = field(default_factory=dict)

    @property
    def n_draws(self):
        return self.deviance.shape[0]


# ---------------------------------------------------------------------------
# spatial field priors
# ---------------------------------------------------------------------------

class SpatialField:
    """``MVN(0, H(lam))`` prior of a unit-scale spatial effect with its
    precision matrix and log-determinant cached."""

    def __init__(self, family, locations, lam):
        self.family = family
        self.locations = locations
        self.lam = float(lam)
        S = locations.size
        if family == "car":
            chol = cholesky(car_precision(locations.adjacency, self.lam))
            self.precision = car_precision(locations.adjacency, self.lam)
            self.logdet_cov = -chol.logdet
            self._chol_cov = None
        else:
            chol = cholesky(correlation_matrix(ExponentialRange(self.lam), locations.dist))
            self.precision = chol_inverse(chol)
            self.logdet_cov = chol.logdet
            self._chol_cov = chol
        self._const = -0.5 * (S * LOG_2PI + self.logdet_cov)

    def logpdf(self, w):
        if self._chol_cov is not None:
            return mvn_logpdf(w, np.zeros_like(w), self._chol_cov)
        return self._const - 0.5 * float(w @ self.precision @ w)


# ---------------------------------------------------------------------------
# the sampler
# ---------------------------------------------------------------------------

def _chol_draw(P, b, rng):
    """Draw from ``N(P^{-1} b, P^{-1})``."""
    L = np.linalg.cholesky(P)
    mean = np.linalg.solve(L.T, np.linalg.solve(L, b))
    return mean + np.linalg.solve(L.T, rng.standard_normal(b.shape[0]))


class Gibbs:
    """Mutable sampler bound to one :class:`ParameterState`.

    ``which`` arguments select a regression: ``"y"`` for the response or the
    position ``k`` of a covariate sub-model in ``spec.submodels``.
    """

    def __init__(self, spec, data, priors=None, state=None, config=None):
        self.spec = spec
        self.data = data
        self.priors = priors or Priors()
        self.config = config or ChainConfig()
        self.state = state
        self.S = data.locations.size
        self.counts = data.counts.astype(float)
        self._fields = {}
        self._Z = {}
        self.step = {}
        self._acc = {}
        self._prop = {}
        self._phi_shape = {}
        self._prepare_imputation()
        self._prepare_missingness()

    # -- bookkeeping -------------------------------------------------------

    def _spec_of(self, which):
        return self.spec.response if which == "y" else self.spec.submodels[which]

    def block_name(self, kind, which):
        if which == "y":
            return f"{kind}_y"
        return f"{kind}_x.{self.spec.submodels[which].target + 1}"

    def _step(self, name):
        if name not in self.step:
            self.step[name] = float(self.config.init_step)
            self._acc[name] = 0
            self._prop[name] = 0
        return self.step[name]

    def _count(self, name, accepted, n=1):
        self._acc[name] = self._acc.get(name, 0) + int(accepted)
        self._prop[name] = self._prop.get(name, 0) + n

    def reset_counts(self):
        for k in self._prop:
            self._acc[k] = 0
            self._prop[k] = 0

    def acceptance(self):
        return {k: self._acc[k] / self._prop[k] for k in self._prop if self._prop[k]}

    def adapt(self, n_windows):
        """Robbins-Monro update of every log step size from the acceptance
        rate of the window just finished."""
        gain = min(1.0, 3.0 / np.sqrt(n_windows))
        for name in self.step:
            if not self._prop.get(name):
                continue
            rate = self._acc[name] / self._prop[name]
            target = self.config.target_accept_vector if name.startswith("phi") else self.config.target_accept
            self.step[name] *= float(np.exp(gain * (rate - target)))
        self.reset_counts()
        if self.spec.samples_phi:
            for ell in range(len(self.spec.missingness.predictors)):
                self._phi_shape.pop(ell, None)

    # -- regression views --------------------------------------------------

    def invalidate_designs(self):
        self._Z.clear()

    def Z(self, which):
        if which not in self._Z:
            self._Z[which] = design(self.state.X, self._spec_of(which).predictors)
        return self._Z[which]

    def regression(self, which):
        """``(target, Z, coef, tau, sigma, w)`` of one regression."""
        st = self.state
        if which == "y":
            return self.data.y, self.Z("y"), st.beta, st.tau_y, st.sigma_y, st.w_y
        sub = self.spec.submodels[which]
        return (st.X[:, sub.target], self.Z(which), st.alpha[which], st.tau_x[which],
                st.sigma_x[which], st.w_x[which])

    def _set(self, attr, which, value):
        if which == "y":
            setattr(self.state, f"{attr}_y", value)
        else:
            getattr(self.state, f"{attr}_x")[which] = value

    def field(self, which):
        st = self.state
        lam = st.lam_y if which == "y" else st.lam_x[which]
        f = self._fields.get(which)
        if f is None or f.lam != lam:
            f = SpatialField(self._spec_of(which).correlation, self.data.locations, lam)
            self._fields[which] = f
        return f

    # -- conjugate blocks ----------------------------------------------------

    def update_coefficients(self, which, rng):
        target, Z, coef, tau, sigma, w = self.regression(which)
        psi = self.priors.psi_beta if which == "y" else self.priors.psi_alpha
        offset = target - sigma * w[self.data.loc] if sigma else target
        P = tau * (Z.T @ Z)
        P[np.diag_indices_from(P)] += psi
        new = _chol_draw(P, tau * (Z.T @ offset), rng)
        if which == "y":
            self.state.beta = new
        else:
            self.state.alpha[which] = new
        return new

    def update_precision(self, which, rng):
        target, Z, coef, tau, sigma, w = self.regression(which)
        r = target - Z @ coef
        if sigma:
            r = r - sigma * w[self.data.loc]
        a, b = (self.priors.a_y, self.priors.b_y) if which == "y" else (self.priors.a_x, self.priors.b_x)
        new = float(rng.gamma(a + 0.5 * r.shape[0], 1.0 / (b + 0.5 * float(r @ r))))
        self._set("tau", which, new)
        return new

    def _w_conditional(self, which):
        """Precision matrix and linear term of ``W | rest`` ignoring any
        logistic terms."""
        target, Z, coef, tau, sigma, w = self.regression(which)
        r = target - Z @ coef
        sums = np.bincount(self.data.loc, weights=r, minlength=self.S)
        P = self.field(which).precision.copy()
        P[np.diag_indices_from(P)] += self.counts * (sigma * sigma * tau)
        return P, (sigma * tau) * sums

    def update_spatial_effect(self, which, rng):
        P, b = self._w_conditional(which)
        uses = self._w_logistic_uses.get(which) if which != "y" else None
        if uses:
            return self._update_spatial_effect_mnar(which, P, b, uses, rng)
        w = _chol_draw(P, b, rng)
        self._set("w", which, w)
        return w

    def _update_spatial_effect_mnar(self, which, P, b, uses, rng):
        """Site-by-site Metropolis: propose ``W(s)`` from its conjugate
        conditional given the other sites, accept on the change in the
        logistic likelihood of that site's rows."""
        st, data = self.state, self.data
        w = st.w_x[which].copy()
        etas = [self.indicator_Z(ell) @ st.phi[ell] for ell, _ in uses]
        coefs = [st.phi[ell][c] for ell, c in uses]
        accepted = 0
        for s in range(self.S):
            prec = P[s, s]
            mean = w[s] + (b[s] - P[s] @ w) / prec
            d = mean + rng.standard_normal() / np.sqrt(prec) - w[s]
            rows = self._site_rows[s]
            delta = 0.0
            for (ell, _), eta, c in zip(uses, etas, coefs):
                r = data.observed[rows, ell]
                e = eta[rows]
                delta += float(np.sum(bernoulli_logit_terms(r, e + c * d) - bernoulli_logit_terms(r, e)))
            if np.log(rng.uniform()) < delta:
                w[s] += d
                for eta, c in zip(etas, coefs):
                    eta[rows] += c * d
                accepted += 1
        self._count(self.block_name("w", which), accepted, n=self.S)
        st.w_x[which] = w
        return w

    # -- Metropolis blocks ---------------------------------------------------

    def update_sigma(self, which, rng, use_likelihood=True):
        name = self.block_name("sigma", which)
        step = self._step(name)
        target, Z, coef, tau, sigma, w = self.regression(which)
        psi = self.priors.psi_sigma_y if which == "y" else self.priors.psi_sigma_x
        if use_likelihood:
            r = target - Z @ coef
            sums = np.bincount(self.data.loc, weights=r, minlength=self.S)
            B = float(w @ sums)
            C = float(self.counts @ (w * w))
        else:
            B = C = 0.0

        def log_target(u):
            s2 = np.exp(u)
            s = np.sqrt(s2)
            # half-normal prior on sigma^2, Jacobian of u = log sigma^2
            return tau * (s * B - 0.5 * s2 * C) - 0.5 * psi * s2 * s2 + u

        u = 2.0 * np.log(sigma) if sigma > 0 else np.log(1e-12)
        u_new = u + step * rng.standard_normal()
        accept = np.log(rng.uniform()) < log_target(u_new) - log_target(u)
        self._count(name, accept)
        if accept:
            sigma = float(np.exp(0.5 * u_new))
            self._set("sigma", which, sigma)
        return sigma

    def update_range(self, which, rng, use_likelihood=True):
        name = self.block_name("lambda", which)
        step = self._step(name)
        st = self.state
        lam = st.lam_y if which == "y" else st.lam_x[which]
        w = st.w_y if which == "y" else st.w_x[which]
        family = self._spec_of(which).correlation
        psi = self.priors.psi_lambda_y if which == "y" else self.priors.psi_lambda_x

        if family == "car":
            lo, hi = car_lambda_bounds(self.data.locations.adjacency)
            if not (np.isfinite(lo) and np.isfinite(hi)):
                return lam  # no edges: lambda does not enter the model

            def to_u(x):
                t = (x - lo) / (hi - lo)
                return np.log(t) - np.log1p(-t)

            def from_u(u):
                return lo + (hi - lo) / (1.0 + np.exp(-u))

            def log_prior(x, u):
                # uniform on (lo, hi); Jacobian of the logit transform
                return np.log(x - lo) + np.log(hi - x)
        else:
            to_u, from_u = np.log, np.exp

            def log_prior(x, u):
                # log-normal prior on lambda is normal on u, Jacobian cancels
                return -0.5 * psi * u * u

        u = float(to_u(lam))
        u_new = u + step * rng.standard_normal()
        lam_new = float(from_u(u_new))
        try:
            f_new = SpatialField(family, self.data.locations, lam_new)
        except NotPositiveDefiniteError:
            self._count(name, False)
            return lam
        log_ratio = log_prior(lam_new, u_new) - log_prior(lam, u)
        if use_likelihood:
            log_ratio += f_new.logpdf(w) - self.field(which).logpdf(w)
        accept = np.log(rng.uniform()) < log_ratio
        self._count(name, accept)
        if accept:
            self._set("lam", which, lam_new)
            self._fields[which] = f_new
            return lam_new
        return lam

    # -- imputation ----------------------------------------------------------

    def _prepare_imputation(self):
        spec, data = self.spec, self.data
        self._plan = []
        for j in range(data.q):
            rows = np.flatnonzero(~data.observed[:, j])
            if rows.size == 0:
                continue
            resp = None
            if j in spec.response.predictors:
                resp = spec.response.predictors.index(j) + 1
            down = [(m, sub.predictors.index(j) + 1) for m, sub in enumerate(spec.submodels)
                    if j in sub.predictors]
            logit = []
            if spec.missingness is not None and spec.missingness.mechanism == "MNAR":
                for ell, tokens in enumerate(spec.missingness.predictors):
                    for c, tok in enumerate(tokens, start=1):
                        if parse_token(tok) == ("x", j):
                            logit.append((ell, c))
            self._plan.append((j, rows, spec.submodel_for(j), resp, down, logit))

    def impute_missing(self, rng):
        st, data = self.state, self.data
        X = st.X
        for j, rows, own, resp, down, logit in self._plan:
            loc = data.loc[rows]
            Zo = design(X[rows], self.spec.submodels[own].predictors)
            prec = np.full(rows.shape[0], st.tau_x[own])
            lin = st.tau_x[own] * (Zo @ st.alpha[own] + st.sigma_x[own] * st.w_x[own][loc])
            xj = X[rows, j]
            if resp is not None:
                c = st.beta[resp]
                mu = design(X[rows], self.spec.response.predictors) @ st.beta + st.sigma_y * st.w_y[loc]
                prec += st.tau_y * c * c
                lin += st.tau_y * c * (data.y[rows] - (mu - c * xj))
            for m, pos in down:
                sub = self.spec.submodels[m]
                c = st.alpha[m][pos]
                mu = design(X[rows], sub.predictors) @ st.alpha[m] + st.sigma_x[m] * st.w_x[m][loc]
                prec += st.tau_x[m] * c * c
                lin += st.tau_x[m] * c * (X[rows, sub.target] - (mu - c * xj))
            proposal = lin / prec + rng.standard_normal(rows.shape[0]) / np.sqrt(prec)
            if logit:
                delta = np.zeros(rows.shape[0])
                for ell, c in logit:
                    Zr = indicator_design(self.spec.missingness.predictors[ell], X[rows], _Rows(data, rows),
                                          st.w_x, self.spec.submodel_for)
                    eta = Zr @ st.phi[ell]
                    eta_new = eta + st.phi[ell][c] * (proposal - xj)
                    r = data.observed[rows, ell]
                    delta += bernoulli_logit_terms(r, eta_new) - bernoulli_logit_terms(r, eta)
                accept = np.log(rng.uniform(size=rows.shape[0])) < delta
                self._count(f"imp.{j + 1}", int(accept.sum()), n=rows.shape[0])
                proposal = np.where(accept, proposal, xj)
            X[rows, j] = proposal
        self.invalidate_designs()

    # -- missingness model ---------------------------------------------------

    def _prepare_missingness(self):
        spec = self.spec
        self._w_logistic_uses = {}
        self._site_rows = [np.flatnonzero(self.data.loc == s) for s in range(self.S)]
        self._phi_static = {}
        self._phi_Z = {}
        if spec.missingness is None:
            return
        for ell, tokens in enumerate(spec.missingness.predictors):
            dynamic = False
            for c, tok in enumerate(tokens, start=1):
                kind, j = parse_token(tok)
                if kind == "wx":
                    k = spec.submodel_for(j)
                    self._w_logistic_uses.setdefault(k, []).append((ell, c))
                    dynamic = True
                elif kind == "x" and j < self.data.q:
                    dynamic = True
            self._phi_static[ell] = not dynamic

    def indicator_Z(self, ell):
        """Logistic design of indicator ``ell``; designs that only involve
        fully observed columns, ``y`` and other indicators are cached."""
        if self._phi_static.get(ell):
            Z = self._phi_Z.get(ell)
            if Z is None:
                Z = self._phi_Z[ell] = indicator_design(
                    self.spec.missingness.predictors[ell], self.state.X, self.data,
                    self.state.w_x, self.spec.submodel_for)
            return Z
        return indicator_design(self.spec.missingness.predictors[ell], self.state.X, self.data,
                                self.state.w_x, self.spec.submodel_for)

    def update_phi(self, rng, use_likelihood=True):
        st, psi = self.state, self.priors.psi_phi
        for ell in range(len(self.spec.missingness.predictors)):
            name = f"phi.{ell + 1}"
            step = self._step(name)
            phi = st.phi[ell]
            r = self.data.observed[:, ell]
            Z = self.indicator_Z(ell)
            L = self._phi_shape.get(ell)
            if L is None:
                info = np.zeros((phi.shape[0], phi.shape[0]))
                if use_likelihood:
                    prob = 1.0 / (1.0 + np.exp(-(Z @ phi)))
                    info = (Z * (prob * (1.0 - prob))[:, None]).T @ Z
                info[np.diag_indices_from(info)] += psi
                L = np.linalg.cholesky(np.linalg.inv(info))
                self._phi_shape[ell] = L
            new = phi + step * (L @ rng.standard_normal(phi.shape[0]))
            log_ratio = -0.5 * psi * (new @ new - phi @ phi)
            if use_likelihood:
                log_ratio += float(np.sum(bernoulli_logit_terms(r, Z @ new) - bernoulli_logit_terms(r, Z @ phi)))
            accept = np.log(rng.uniform()) < log_ratio
            self._count(name, accept)
            if accept:
                st.phi[ell] = new
        return st.phi

    # -- full sweep ----------------------------------------------------------

    def sweep(self, rng, rng_phi):
        spec = self.spec
        if self._plan:
            self.impute_missing(rng)
        self._regression_blocks("y", spec.response, rng)
        for k, sub in enumerate(spec.submodels):
            self._regression_blocks(k, sub, rng)
        if spec.samples_phi:
            self.update_phi(rng_phi)

    def _regression_blocks(self, which, m, rng):
        self.update_coefficients(which, rng)
        self.update_precision(which, rng)
        if m.spatial:
            if m.sigma is None:
                self.update_sigma(which, rng)
            if m.lam is None:
                self.update_range(which, rng)
            self.update_spatial_effect(which, rng)


class _Rows:
    """Row subset of a dataset exposing what :func:`indicator_design` reads."""

    def __init__(self, data, rows):
        self.n = rows.shape[0]
        self.y = data.y[rows]
        self.observed = data.observed[rows]
        self.loc = data.loc[rows]


# ---------------------------------------------------------------------------
# functional interface
# ---------------------------------------------------------------------------

def _bind(state, data, spec, priors):
    return Gibbs(spec, data, priors, state)


def update_beta(state, data, spec, rng, priors=None):
    """Exact draw of the response coefficients from their normal full
    conditional."""
    return _bind(state, data, spec, priors).update_coefficients("y", rng)


def update_alpha(state, data, spec, k, rng, priors=None):
    """Exact draw of the coefficients of covariate sub-model ``k``."""
    return _bind(state, data, spec, priors).update_coefficients(k, rng)


def update_precision(state, data, spec, which, rng, priors=None):
    """Gamma draw ``tau | rest ~ Gamma(a + n/2, b + SSR/2)``."""
    return _bind(state, data, spec, priors).update_precision(which, rng)


def update_spatial_effect(state, data, spec, which, rng, priors=None):
    return _bind(state, data, spec, priors).update_spatial_effect(which, rng)


def update_sigma(state, data, spec, which, rng, priors=None, step=0.5, use_likelihood=True):
    g = _bind(state, data, spec, priors)
    g.step[g.block_name("sigma", which)] = step
    return g.update_sigma(which, rng, use_likelihood=use_likelihood)


def update_range(state, data, spec, which, rng, priors=None, step=0.5, use_likelihood=True):
    g = _bind(state, data, spec, priors)
    g.step[g.block_name("lambda", which)] = step
    return g.update_range(which, rng, use_likelihood=use_likelihood)


def impute_missing(state, data, spec, rng, priors=None):
    g = _bind(state, data, spec, priors)
    g.impute_missing(rng)
    return state.X


def update_phi(state, data, spec, rng, priors=None, step=0.5, use_likelihood=True):
    g = _bind(state, data, spec, priors)
    for ell in range(len(spec.missingness.predictors)):
        g.step[f"phi.{ell + 1}"] = step
    return g.update_phi(rng, use_likelihood=use_likelihood)


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def chain_rngs(seed):
    """Independent generators for the main sweep and the ``phi`` block.

    Keeping ``phi`` on its own stream makes its MAR posterior draws
    identical across covariate models fitted with the same seed.
    """
    main, miss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(main), np.random.default_rng(miss)


def run_chain(spec, data, priors=None, config=None, state=None):
    """Run burn-in plus thinned sampling and collect a :class:`ChainOutput`."""
    from .model import init_state, validate

    priors = priors or Priors()
    config = config or ChainConfig()
    validate(spec, data)
    if state is None:
        state = init_state(spec, data)
    rng, rng_phi = chain_rngs(config.seed)
    g = Gibbs(spec, data, priors, state, config)

    T, n, S = config.n_kept, data.n, data.locations.size
    rows, cols = data.missing_cells()
    draws = {"beta": np.empty((T, state.beta.shape[0])), "tau_y": np.empty(T)}
    if spec.response.spatial:
        draws.update(sigma_y=np.empty(T), lambda_y=np.empty(T), w_y=np.empty((T, S)))
    for k, sub in enumerate(spec.submodels):
        t = sub.target + 1
        draws[f"alpha.{t}"] = np.empty((T, state.alpha[k].shape[0]))
        draws[f"tau_x.{t}"] = np.empty(T)
        if sub.spatial:
            draws[f"sigma_x.{t}"] = np.empty(T)
            draws[f"lambda_x.{t}"] = np.empty(T)
            draws[f"w_x.{t}"] = np.empty((T, S))
    if spec.samples_phi:
        for ell, f in enumerate(state.phi):
            draws[f"phi.{ell + 1}"] = np.empty((T, f.shape[0]))
    imputations = np.empty((T, rows.shape[0]))
    loglik = np.empty((T, n))
    deviance_r = np.empty(T) if spec.samples_phi else None
    steps = {}

    total = config.n_burnin + T * config.thin
    kept = 0
    n_windows = 0
    it = 0
    try:
        for it in range(total):
            g.sweep(rng, rng_phi)
            if it < config.n_burnin:
                if (it + 1) % config.adapt_window == 0:
                    n_windows += 1
                    g.adapt(n_windows)
                if it + 1 == config.n_burnin:
                    g.reset_counts()
                continue
            if (it - config.n_burnin + 1) % config.thin:
                continue
            _record(draws, state, spec, kept)
            imputations[kept] = state.X[rows, cols]
            loglik[kept] = response_loglik_terms(state.beta, state.tau_y, state.sigma_y, state.w_y,
                                                 state.X, data, spec)
            if deviance_r is not None:
                deviance_r[kept] = missingness_deviance(state.phi, state.X, data, spec, state.w_x)
            for name, s in g.step.items():
                steps.setdefault(name, np.empty(T))[kept] = s
            kept += 1
    except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        raise SamplerError(f"sampler failed at iteration {it}: {exc}", iteration=it) from exc

    return ChainOutput(
        draws=draws,
        imputations=imputations,
        missing_rows=rows,
        missing_cols=cols,
        loglik=loglik,
        deviance=-2.0 * loglik.sum(axis=1),
        deviance_r=deviance_r,
        acceptance=g.acceptance(),
        step_sizes=steps,
    )


def _record(draws, st, spec, t):
    draws["beta"][t] = st.beta
    draws["tau_y"][t] = st.tau_y
    if spec.response.spatial:
        draws["sigma_y"][t] = st.sigma_y
        draws["lambda_y"][t] = st.lam_y
        draws["w_y"][t] = st.w_y
    for k, sub in enumerate(spec.submodels):
        tgt = sub.target + 1
        draws[f"alpha.{tgt}"][t] = st.alpha[k]
        draws[f"tau_x.{tgt}"][t] = st.tau_x[k]
        if sub.spatial:
            draws[f"sigma_x.{tgt}"][t] = st.sigma_x[k]
            draws[f"lambda_x.{tgt}"][t] = st.lam_x[k]
            draws[f"w_x.{tgt}"][t] = st.w_x[k]
    if spec.samples_phi:
        for ell, f in enumerate(st.phi):
            draws[f"phi.{ell + 1}"][t] = f
