"""Model-comparison criteria, posterior summaries and simulation metrics."""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import logsumexp

from .errors import CriterionUnavailableError, DegenerateLikelihoodError, InvalidParameterError
from .likelihood import missingness_deviance, response_deviance


@dataclass(frozen=True)
class CriterionReport:
    mdic: float
    mlpml: float
    mcpo: np.ndarray
    dic_r: float = None

    def as_row(self):
        return {"mdic": self.mdic, "mlpml": self.mlpml, "dic_r": self.dic_r}


@dataclass(frozen=True)
class SummaryRow:
    name: str
    mean: float
    sd: float
    hpd_lo: float
    hpd_hi: float


@dataclass(frozen=True)
class SimMetrics:
    name: str
    truth: float
    bias: float
    sd: float
    mse: float
    cp: float
    n_replicates: int


def deviance(state, data, spec):
    """Response deviance ``-2 sum_s log MVN(Y(s); mean(s), tau_y^{-1} I)``
    at a complete state (imputations included)."""
    if not state.tau_y > 0:
        raise InvalidParameterError(f"tau_y must be > 0, got {state.tau_y}")
    return response_deviance(state.beta, state.tau_y, state.sigma_y, state.w_y, state.X, data, spec)


def _plugin_X(chain, data):
    """Covariates with every missing cell at its posterior-mean imputation."""
    X = np.array(data.X, dtype=float)
    if chain.missing_rows.size:
        X[chain.missing_rows, chain.missing_cols] = chain.imputations.mean(axis=0)
    return X


def _mean_or(chain, name, default):
    d = chain.draws.get(name)
    return default if d is None else d.mean(axis=0)


def mdic(chain, data, spec):
    """``2 E[Dev] - Dev(posterior means)``, the means covering ``beta``,
    ``sigma_y``, ``tau_y``, ``W_y`` and the imputed covariates.

    For fixed ``sigma_y`` (no ``sigma_y`` draws) the fixed value is used; a
    non-spatial response plugs in zero.
    """
    S = data.locations.size
    beta = chain.draws["beta"].mean(axis=0)
    tau = float(chain.draws["tau_y"].mean())
    sigma = float(_mean_or(chain, "sigma_y", spec.response.sigma or 0.0))
    w = _mean_or(chain, "w_y", np.zeros(S))
    dev_hat = response_deviance(beta, tau, sigma, w, _plugin_X(chain, data), data, spec)
    return 2.0 * float(np.mean(chain.deviance)) - dev_hat


def mlpml(chain):
    """Harmonic-mean estimate of every ``mCPO`` and their log-sum.

    Returns
    -------
    mlpml : float
    mcpo : (n,) ndarray
    """
    ll = np.asarray(chain.loglik, dtype=float)
    if not np.all(np.isfinite(ll)):
        raise DegenerateLikelihoodError("a recorded likelihood term is zero or not finite")
    T = ll.shape[0]
    # log mCPO_i = -log( (1/T) sum_t exp(-ll_ti) )
    log_cpo = -(logsumexp(-ll, axis=0) - math.log(T))
    return float(np.sum(log_cpo)), np.exp(log_cpo)


def dic_r(chain, data, spec):
    """DIC of the missingness model alone.

    Plug-in values are the posterior means of ``phi``, of the covariate
    spatial effects and of the imputed covariates.
    """
    if chain.deviance_r is None or spec.missingness is None:
        raise CriterionUnavailableError("no missingness-model draws were recorded")
    q = len(spec.missingness.predictors)
    phi = [chain.draws[f"phi.{ell + 1}"].mean(axis=0) for ell in range(q)]
    S = data.locations.size
    w_x = [_mean_or(chain, f"w_x.{sub.target + 1}", np.zeros(S)) for sub in spec.submodels]
    dev_hat = missingness_deviance(phi, _plugin_X(chain, data), data, spec, w_x)
    return 2.0 * float(np.mean(chain.deviance_r)) - dev_hat


def criteria(chain, data, spec):
    lp, cpo = mlpml(chain)
    dr = dic_r(chain, data, spec) if chain.deviance_r is not None else None
    return CriterionReport(mdic=mdic(chain, data, spec), mlpml=lp, mcpo=cpo, dic_r=dr)


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

def hpd_interval(draws, prob=0.95):
    """Shortest window holding ``ceil(prob * T)`` of the sorted draws."""
    x = np.sort(np.asarray(draws, dtype=float))
    T = x.shape[0]
    k = min(T, int(math.ceil(prob * T)))
    widths = x[k - 1:] - x[:T - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


def scalar_draws(chain, include_latent=False):
    """Flatten ``chain.draws`` into ``{row name: (T,) array}``.

    Vector parameters expand to ``name.k`` (0-based coefficient index, so
    ``beta.0`` is the intercept).  Every sampled range also gets a
    ``log_lambda_*`` row.  Spatial effects ``w_*`` are included only on
    request.
    """
    out = {}
    for name, d in chain.draws.items():
        if name.startswith("w_") and not include_latent:
            continue
        if d.ndim == 1:
            out[name] = d
            if name.startswith("lambda_"):
                out["log_" + name] = np.log(d)
        else:
            base = 1 if name.startswith("w_") else 0
            for k in range(d.shape[1]):
                out[f"{name}.{k + base}"] = d[:, k]
    return out


def posterior_summary(chain, include_latent=False, prob=0.95):
    """Mean, SD (divisor ``T - 1``) and HPD interval of every scalar."""
    rows = []
    for name, d in scalar_draws(chain, include_latent).items():
        sd = float(np.std(d, ddof=1)) if d.shape[0] > 1 else 0.0
        lo, hi = hpd_interval(d, prob)
        rows.append(SummaryRow(name=name, mean=float(np.mean(d)), sd=sd, hpd_lo=lo, hpd_hi=hi))
    return rows


def sim_metrics(estimates, truth, name=""):
    """Bias, average posterior SD, MSE and HPD coverage over replicates.

    ``estimates`` is a sequence of ``(mean, sd, hpd_lo, hpd_hi)`` tuples or
    :class:`SummaryRow` objects, one per replicate.  With this convention
    ``MSE = Bias^2 + var`` where ``var`` is the population variance (divisor
    ``T``) of the posterior means.
    """
    est = np.array([(e.mean, e.sd, e.hpd_lo, e.hpd_hi) if isinstance(e, SummaryRow) else tuple(e)
                    for e in estimates], dtype=float)
    if est.ndim != 2 or est.shape[0] < 1:
        raise ValueError("need at least one replicate")
    err = est[:, 0] - truth
    bias = float(err.mean())
    # mean(err^2) written as bias^2 + var keeps MSE >= Bias^2 exact in floating point
    mse = bias * bias + float(np.mean((err - bias) ** 2))
    covered = (est[:, 2] <= truth) & (truth <= est[:, 3])
    return SimMetrics(name=name, truth=float(truth), bias=bias, sd=float(est[:, 1].mean()),
                      mse=mse, cp=float(covered.mean()), n_replicates=est.shape[0])
