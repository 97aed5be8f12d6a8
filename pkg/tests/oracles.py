"""Independent reference computations used by the sampler tests."""

import numpy as np
from scipy import integrate
from scipy.special import logsumexp


def grid_moments(logpdf, lo, hi, n=200001):
    """Mean and variance of the 1-D density ``exp(logpdf)`` on ``[lo, hi]``."""
    x = np.linspace(lo, hi, n)
    lp = logpdf(x)
    w = np.exp(lp - logsumexp(lp))
    mean = float(np.sum(w * x))
    return mean, float(np.sum(w * (x - mean) ** 2))


def batch_means_mcse(draws, n_batches=40):
    """Monte Carlo standard error of the mean of each column by batch means."""
    d = np.asarray(draws, dtype=float)
    if d.ndim == 1:
        d = d[:, None]
    size = d.shape[0] // n_batches
    means = d[: size * n_batches].reshape(n_batches, size, -1).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(n_batches)


def nig_posterior_mean(Z, y, psi):
    """Posterior mean of ``beta`` under the normal-inverse-gamma prior
    ``beta | tau ~ N(0, (tau psi)^{-1} I)``: ``(Z'Z + psi I)^{-1} Z'y``."""
    return np.linalg.solve(Z.T @ Z + psi * np.eye(Z.shape[1]), Z.T @ y)


def semiconjugate_posterior_mean(Z, y, psi, a, b):
    """Exact posterior mean of ``beta`` under independent priors
    ``beta ~ N(0, psi^{-1} I)`` and ``tau ~ Gamma(a, b)``.

    ``E[beta | y] = int E[beta | tau, y] p(tau | y) dtau`` where the marginal
    ``y | tau ~ N(0, tau^{-1} I + psi^{-1} Z Z')`` is evaluated through its
    eigen-decomposition and the 1-D integral is done by quadrature on
    ``log tau``.
    """
    n, k = Z.shape
    G = Z.T @ Z
    evals, evecs = np.linalg.eigh(G)
    evals = np.clip(evals, 0.0, None)
    proj = evecs.T @ (Z.T @ y)
    yy = float(y @ y)

    def log_post(u):
        tau = np.exp(u)
        # y' (tau^{-1} I + psi^{-1} Z Z')^{-1} y via Woodbury on the k-dim side
        quad = tau * yy - tau * tau * np.sum(proj ** 2 / (psi + tau * evals))
        logdet = -n * u + np.sum(np.log1p(tau * evals / psi))
        return a * u - b * tau - 0.5 * logdet - 0.5 * quad

    u_hat = np.log(n / max(yy - float(proj @ (proj / np.maximum(evals, 1e-300))), 1e-12))
    u = np.linspace(u_hat - 12.0, u_hat + 12.0, 4001)
    lp = np.array([log_post(v) for v in u])
    w = np.exp(lp - lp.max())
    cond = np.array([np.linalg.solve(np.exp(v) * G + psi * np.eye(k), np.exp(v) * (Z.T @ y)) for v in u])
    return integrate.trapezoid(w[:, None] * cond, u, axis=0) / integrate.trapezoid(w, u)
