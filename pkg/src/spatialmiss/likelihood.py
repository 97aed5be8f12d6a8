"""Design matrices and log-likelihood terms shared by sampler and criteria."""

import numpy as np

from .model import parse_token

LOG_2PI = np.log(2.0 * np.pi)


def design(X, predictors):
    """``[1, X[:, predictors]]``; refuses to read unimputed sentinel cells."""
    Z = np.empty((X.shape[0], len(predictors) + 1))
    Z[:, 0] = 1.0
    if predictors:
        Z[:, 1:] = X[:, list(predictors)]
    assert not np.isnan(Z).any(), "design matrix touches an unimputed missing cell"
    return Z


def response_mean(beta, sigma, w, X, data, spec):
    return design(X, spec.response.predictors) @ beta + sigma * w[data.loc]


def response_loglik_terms(beta, tau, sigma, w, X, data, spec):
    """``log f(Y_i(s) | W_y(s), X_i(s), beta, sigma_y, tau_y)`` per observation."""
    r = data.y - response_mean(beta, sigma, w, X, data, spec)
    return 0.5 * (np.log(tau) - LOG_2PI) - 0.5 * tau * r * r


def response_deviance(beta, tau, sigma, w, X, data, spec):
    """``sum_s {N_s log(2 pi) - N_s log(tau) + tau ||r(s)||^2}``."""
    return -2.0 * float(np.sum(response_loglik_terms(beta, tau, sigma, w, X, data, spec)))


def indicator_design(tokens, X, data, w_x, submodel_index):
    """Logistic design ``[1, predictors...]`` for one missingness indicator.

    ``w_x`` is the list of covariate spatial effects, ``submodel_index`` maps
    a covariate column to its position in that list.
    """
    Z = np.empty((data.n, len(tokens) + 1))
    Z[:, 0] = 1.0
    for c, tok in enumerate(tokens, start=1):
        kind, j = parse_token(tok)
        if kind == "x":
            Z[:, c] = X[:, j]
        elif kind == "y":
            Z[:, c] = data.y
        elif kind == "r":
            Z[:, c] = data.observed[:, j]
        else:
            Z[:, c] = w_x[submodel_index(j)][data.loc]
    assert not np.isnan(Z).any(), "indicator design touches an unimputed missing cell"
    return Z


def bernoulli_logit_terms(r, eta):
    """Per-row ``log P(R = r)`` under ``logit P(R = 1) = eta``."""
    return r * eta - np.logaddexp(0.0, eta)


def missingness_deviance(phi, X, data, spec, w_x):
    """``-2 log f(R_1, .., R_q | phi, X)`` over every indicator."""
    total = 0.0
    idx = spec.submodel_for
    for ell, tokens in enumerate(spec.missingness.predictors):
        Z = indicator_design(tokens, X, data, w_x, idx)
        total += float(np.sum(bernoulli_logit_terms(data.observed[:, ell], Z @ phi[ell])))
    return -2.0 * total
