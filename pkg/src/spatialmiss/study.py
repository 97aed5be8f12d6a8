"""Replicate studies (simulate then fit, repeatedly) and model ranking."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .assessment import criteria, posterior_summary, sim_metrics
from .mcmc import run_chain
from .model import ModelSpec
from .simgen import apply_mask, gen_missingness, gen_replicate, random_locations, truth_table


def replicate_seeds(seed, r):
    """``(data generator, chain seed)`` for replicate ``r`` of a study seeded
    with ``seed``; independent across replicates and reproducible."""
    data_ss, chain_ss = np.random.SeedSequence([int(seed), int(r)]).spawn(2)
    return np.random.default_rng(data_ss), int(chain_ss.generate_state(1, dtype=np.uint32)[0])


def replicate_dataset(design, truths, seed, r, locations=None):
    """Replicate ``r``: ``(masked data, full data, latent fields, chain seed)``."""
    rng, chain_seed = replicate_seeds(seed, r)
    if locations is None and design.fixed_locations:
        locations = random_locations(design, np.random.default_rng([int(seed), 2**31 - 1]))
    full, latent = gen_replicate(design, truths, rng, locations=locations)
    mask = gen_missingness(full, truths.phi1, truths.phi2, rng)
    return apply_mask(full, mask), full, latent, chain_seed


def cc_model(spec):
    """The complete-case fit: same response and covariate regressions, no
    missingness model (nothing is missing after dropping rows)."""
    return ModelSpec(response=spec.response, submodels=spec.submodels, missingness=None)


@dataclass
class ReplicateFit:
    replicate: int
    label: str
    summary: dict
    mdic: float
    mlpml: float
    dic_r: float = None


def fit_replicate(args):
    """Worker: fit every model in ``models`` to one replicate."""
    r, models, design, truths, priors, chain_cfg, seed, cc = args
    data, _, _, chain_seed = replicate_dataset(design, truths, seed, r)
    if cc:
        data = data.complete_cases()
    out = []
    for label, spec in models.items():
        if cc:
            spec = cc_model(spec)
        chain = run_chain(spec, data, priors, replace(chain_cfg, seed=chain_seed))
        rep = criteria(chain, data, spec)
        out.append(ReplicateFit(
            replicate=r, label=label,
            summary={s.name: (s.mean, s.sd, s.hpd_lo, s.hpd_hi) for s in posterior_summary(chain)},
            mdic=rep.mdic, mlpml=rep.mlpml, dic_r=rep.dic_r,
        ))
    return out


def run_study(models, design, truths, priors, chain_cfg, seed=0, cc=False, threads=1, replicates=None,
              progress=None):
    """Fit ``models`` (label -> spec) to ``design.n_replicates`` replicates.

    Every model sees the same replicate datasets and the same chain seed per
    replicate.  Returns the list of :class:`ReplicateFit` ordered by
    replicate then model.
    """
    reps = range(design.n_replicates) if replicates is None else replicates
    jobs = [(r, models, design, truths, priors, chain_cfg, seed, cc) for r in reps]
    fits = []
    if threads <= 1:
        for job in jobs:
            fits.extend(fit_replicate(job))
            if progress:
                progress(job[0])
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for job, res in zip(jobs, pool.map(fit_replicate, jobs)):
                fits.extend(res)
                if progress:
                    progress(job[0])
    return fits


def metrics_table(fits, truths, models):
    """Bias / SD / MSE / CP rows per model and parameter with a known truth."""
    rows = []
    for label, spec in models.items():
        truth = truth_table(truths, spec)
        mine = [f for f in fits if f.label == label]
        for name, value in truth.items():
            est = [f.summary[name] for f in mine if name in f.summary]
            if not est:
                continue
            m = sim_metrics(est, value, name=name)
            rows.append({"model": label, "parameter": name, "truth": value, "bias": m.bias, "sd": m.sd,
                         "mse": m.mse, "cp": m.cp, "replicates": m.n_replicates})
    return rows


def criteria_table(fits, models):
    """Average mDIC / mLPML (and DIC(R) where available) per model, plus the
    share of replicates in which each model has the smallest mDIC."""
    reps = sorted({f.replicate for f in fits})
    best = {label: 0 for label in models}
    for r in reps:
        here = [f for f in fits if f.replicate == r]
        best[min(here, key=lambda f: f.mdic).label] += 1
    rows = []
    for label in models:
        mine = [f for f in fits if f.label == label]
        dr = [f.dic_r for f in mine if f.dic_r is not None]
        rows.append({
            "model": label,
            "mdic": float(np.mean([f.mdic for f in mine])),
            "mlpml": float(np.mean([f.mlpml for f in mine])),
            "dic_r": float(np.mean(dr)) if dr else None,
            "best_mdic_share": best[label] / len(reps),
            "replicates": len(mine),
        })
    return rows


def rank_models(entries):
    """Rank ``(label, mdic, mlpml)`` entries.

    Returns ``(rows, notes)``: rows carry ``rank_mdic`` (ascending mDIC) and
    ``rank_mlpml`` (descending mLPML) with competition ranking, so tied
    values share a rank; notes flag ties and a disagreement between the two
    criteria about the best model.
    """
    entries = list(entries)

    def ranks(values, ascending):
        key = np.asarray(values, dtype=float) * (1 if ascending else -1)
        return [1 + int(np.sum(key < k)) for k in key]

    r_dic = ranks([e[1] for e in entries], True)
    r_lpml = ranks([e[2] for e in entries], False)
    rows = [{"model": e[0], "mdic": e[1], "mlpml": e[2], "rank_mdic": a, "rank_mlpml": b}
            for e, a, b in zip(entries, r_dic, r_lpml)]
    rows.sort(key=lambda row: (row["rank_mdic"], row["rank_mlpml"], row["model"]))
    notes = []
    for crit, rk in (("mdic", "rank_mdic"), ("mlpml", "rank_mlpml")):
        seen = {}
        for row in rows:
            seen.setdefault(row[rk], []).append(row["model"])
        for rank, labels in sorted(seen.items()):
            if len(labels) > 1:
                notes.append(f"tie on {crit} at rank {rank}: {', '.join(labels)}")
    best_dic = {row["model"] for row in rows if row["rank_mdic"] == 1}
    best_lpml = {row["model"] for row in rows if row["rank_mlpml"] == 1}
    if not best_dic & best_lpml:
        notes.append(f"criteria disagree: mDIC prefers {sorted(best_dic)}, mLPML prefers {sorted(best_lpml)}")
    return rows, notes
