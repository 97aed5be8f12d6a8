"""Command-line interface: ``spatialmiss {simulate,fit,compare,study,summarize}``.

Every command writes a ``manifest.json`` next to its outputs recording the
command line, configuration digest, seed, software version and input file
digests.
"""

import argparse
from dataclasses import replace
import logging
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .assessment import criteria, posterior_summary
from .errors import SamplerError, SpatialMissError
from .io import (
    load_config,
    manifest,
    now,
    read_dataset,
    read_locations,
    read_table,
    require_file,
    save_chain,
    write_dataset,
    write_json,
    write_locations,
    write_table,
)
from .mcmc import run_chain
from .simgen import exclusive_pattern_rates, pattern_rates, TARGET_PATTERN_RATES
from .study import cc_model, criteria_table, metrics_table, rank_models, replicate_dataset, run_study

log = logging.getLogger("spatialmiss")

SUMMARY_COLUMNS = ["parameter", "mean", "sd", "hpd_lo", "hpd_hi"]
CRITERIA_COLUMNS = ["model", "mdic", "mlpml", "dic_r"]


def _seed(cfg, seed):
    return cfg.chain.seed if seed is None else int(seed)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(config, out, seed=None):
    """Write ``T`` replicate datasets, the truths sidecar and a pattern-rate
    report.

    Replicate ``r`` is written to ``out/replicate_<r>/`` as ``data.csv`` and
    ``locations.csv``; it is the same dataset the ``study`` command fits as
    replicate ``r`` under the same seed.
    """
    started = now()
    cfg = load_config(config)
    seed = _seed(cfg, seed)
    out = Path(out)
    rates, exclusive = [], []
    for r in range(cfg.design.n_replicates):
        data, _, _, _ = replicate_dataset(cfg.design, cfg.truths, seed, r)
        d = out / f"replicate_{r + 1:03d}"
        write_dataset(d / "data.csv", data)
        write_locations(d / "locations.csv", data.locations)
        rates.append(pattern_rates(data.observed))
        exclusive.append(exclusive_pattern_rates(data.observed))
    rates = np.array(rates)
    rows = [{"replicate": r + 1, "x1_missing": a, "x2_missing": b, "both_missing": c}
            for r, (a, b, c) in enumerate(rates)]
    write_table(out / "pattern_rates.csv", rows, ["replicate", "x1_missing", "x2_missing", "both_missing"])
    sidecar = {
        "truths": {k: getattr(cfg.truths, k) for k in cfg.truths.__dataclass_fields__},
        "design": {k: getattr(cfg.design, k) for k in cfg.design.__dataclass_fields__},
        "target_rates": dict(zip(["x1_missing", "x2_missing", "both_missing"], TARGET_PATTERN_RATES)),
        "average_rates": dict(zip(["x1_missing", "x2_missing", "both_missing"], rates.mean(axis=0))),
        "average_pattern_shares": dict(zip(["only_x1", "only_x2", "both", "complete"],
                                           np.mean(exclusive, axis=0))),
        "seed": seed,
    }
    write_json(out / "truths.json", sidecar)
    write_json(out / "manifest.json", manifest("simulate", cfg, seed, [config], started))
    return rates.mean(axis=0)


def _load_data(cfg, spec, dataset=None, locations=None, adjacency=None):
    d = cfg.data
    dataset = require_file(dataset or d.get("dataset"), "dataset")
    locations = require_file(locations or d.get("locations"), "locations file")
    adjacency = adjacency or d.get("adjacency")
    if adjacency is not None:
        adjacency = require_file(adjacency, "adjacency file")
    q = int(d.get("q", len(spec.submodels)))
    locs = read_locations(locations, adjacency)
    data = read_dataset(dataset, locs, q, d.get("covariates"), min_covariates=spec.n_columns)
    return data, [dataset, locations, adjacency]


def _pick(cfg, model):
    if not cfg.models:
        raise SpatialMissError("the configuration has no model section")
    if model is None:
        return next(iter(cfg.models.items()))
    if model not in cfg.models:
        raise SpatialMissError(f"no model labelled {model!r}; have {list(cfg.models)}")
    return model, cfg.models[model]


def fit_one(cfg, spec, data, seed, cc=False):
    if cc:
        data, spec = data.complete_cases(), cc_model(spec)
    chain = run_chain(spec, data, cfg.priors, replace(cfg.chain, seed=seed))
    return chain, data, spec


def _write_fit(out, label, chain, data, spec):
    out = Path(out)
    save_chain(out, chain, data)
    rows = [{"parameter": s.name, "mean": s.mean, "sd": s.sd, "hpd_lo": s.hpd_lo, "hpd_hi": s.hpd_hi}
            for s in posterior_summary(chain)]
    write_table(out / "summary.csv", rows, SUMMARY_COLUMNS)
    rep = criteria(chain, data, spec)
    write_table(out / "criteria.csv", [{"model": label, **rep.as_row()}], CRITERIA_COLUMNS)
    ids, within = data.locations.ids, data.row_in_location()
    write_table(out / "mcpo.csv",
                [{"location_id": ids[data.loc[i]], "row": int(within[i]) + 1, "mcpo": float(rep.mcpo[i])}
                 for i in range(data.n)], ["location_id", "row", "mcpo"])
    return rep


def cmd_fit(config, out, dataset=None, locations=None, adjacency=None, seed=None, cc=False, model=None):
    """Fit one model; writes ``draws.csv``, ``loglik.npy``, ``chain.json``,
    ``summary.csv``, ``criteria.csv``, ``mcpo.csv`` and ``manifest.json``."""
    started = now()
    cfg = load_config(config)
    label, spec = _pick(cfg, model)
    seed = _seed(cfg, seed)
    data, inputs = _load_data(cfg, spec, dataset, locations, adjacency)
    chain, data, spec = fit_one(cfg, spec, data, seed, cc)
    rep = _write_fit(out, label, chain, data, spec)
    write_json(Path(out) / "manifest.json",
               manifest("fit", cfg, seed, [config, *inputs], started,
                        extra={"model": label, "cc": bool(cc), "acceptance": chain.acceptance}))
    return rep


def cmd_compare(paths=(), out=None, config=None, dataset=None, locations=None, adjacency=None, seed=None,
                cc=False):
    """Rank fitted models by mDIC (ascending) and mLPML (descending).

    ``paths`` are output directories of ``fit``.  With ``config``, every
    model listed in it is fitted first (into ``out/<label>/``) and ranked
    together with ``paths``.
    """
    started = now()
    entries, inputs = [], []
    cfg = None
    if config is not None:
        cfg = load_config(config)
        seed = _seed(cfg, seed)
        base, _ = _pick(cfg, None)
        data0, inputs = _load_data(cfg, cfg.models[base], dataset, locations, adjacency)
        for label, spec in cfg.models.items():
            chain, data, spec = fit_one(cfg, spec, data0, seed, cc)
            rep = _write_fit(Path(out or ".") / label, label, chain, data, spec)
            entries.append((label, rep.mdic, rep.mlpml))
    for p in paths:
        row = read_table(Path(p) / "criteria.csv")[0]
        label = row.get("model") or Path(p).name
        if any(e[0] == label for e in entries):
            label = str(p)
        entries.append((label, float(row["mdic"]), float(row["mlpml"])))
    if not entries:
        raise SpatialMissError("nothing to compare: give fit directories or --config")
    rows, notes = rank_models(entries)
    if out is not None:
        write_table(Path(out) / "ranking.csv", rows, ["model", "mdic", "mlpml", "rank_mdic", "rank_mlpml"])
        write_json(Path(out) / "manifest.json",
                   manifest("compare", cfg, seed, [config, *inputs], started,
                            extra={"fits": [str(p) for p in paths], "notes": notes}))
    return rows, notes


def cmd_replicate_study(config, out, seed=None, threads=None, cc=None, progress=None):
    """Simulate-then-fit over ``T`` replicates and aggregate.

    Writes ``metrics.csv`` (bias / SD / MSE / CP per model and parameter),
    ``criteria.csv`` (average mDIC / mLPML per model) and
    ``replicates.csv`` (criteria per replicate).
    """
    started = now()
    cfg = load_config(config)
    seed = _seed(cfg, seed)
    threads = int(cfg.study.get("threads", 1) if threads is None else threads)
    cc = bool(cfg.study.get("cc", False) if cc is None else cc)
    if not cfg.models:
        raise SpatialMissError("the configuration has no model section")
    fits = run_study(cfg.models, cfg.design, cfg.truths, cfg.priors, cfg.chain, seed=seed, cc=cc,
                     threads=threads, progress=progress)
    out = Path(out)
    metrics = metrics_table(fits, cfg.truths, cfg.models)
    wanted = cfg.study.get("parameters")
    if wanted:
        metrics = [m for m in metrics if m["parameter"] in wanted]
    write_table(out / "metrics.csv", metrics,
                ["model", "parameter", "truth", "bias", "sd", "mse", "cp", "replicates"])
    crit = criteria_table(fits, cfg.models)
    write_table(out / "criteria.csv", crit, ["model", "mdic", "mlpml", "dic_r", "best_mdic_share", "replicates"])
    write_table(out / "replicates.csv",
                [{"replicate": f.replicate + 1, "model": f.label, "mdic": f.mdic, "mlpml": f.mlpml,
                  "dic_r": f.dic_r} for f in fits],
                ["replicate", "model", "mdic", "mlpml", "dic_r"])
    write_json(out / "manifest.json",
               manifest("study", cfg, seed, [config], started, extra={"cc": cc, "threads": threads}))
    return metrics, crit, fits


def cmd_summarize(path):
    return read_table(Path(path) / "summary.csv")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _print_rows(rows, columns, stream=None):
    stream = stream or sys.stdout

    def cell(v):
        if v is None or v == "":
            return "-"
        if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
            return str(v)
        try:
            return f"{float(v):.4f}"
        except (TypeError, ValueError):
            return str(v)
    table = [[cell(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(t[i]) for t in table)) if table else len(c) for i, c in enumerate(columns)]
    print("  ".join(c.rjust(w) for c, w in zip(columns, widths)), file=stream)
    for t in table:
        print("  ".join(v.rjust(w) for v, w in zip(t, widths)), file=stream)


def build_parser():
    p = argparse.ArgumentParser(prog="spatialmiss",
                                description="Bayesian spatial regression with missing covariates.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        sp.add_argument("--config", required=True, help="YAML run configuration")
        sp.add_argument("--seed", type=int, help="overrides chain.seed")
        sp.add_argument("--out", required=True, help="output directory")
        if data:
            sp.add_argument("--data", help="dataset CSV (overrides data.dataset)")
            sp.add_argument("--locations", help="locations CSV (overrides data.locations)")
            sp.add_argument("--adjacency", help="adjacency edge-list CSV for CAR models")
            sp.add_argument("--cc", action="store_true", help="complete-case analysis")

    s = sub.add_parser("simulate", help="generate replicate datasets")
    common(s, data=False)

    s = sub.add_parser("fit", help="fit one model to a dataset")
    common(s)
    s.add_argument("--model", help="label of the model to fit when the config lists several")
    s.add_argument("--threads", type=int, default=1, help="accepted for symmetry; a chain is sequential")

    s = sub.add_parser("compare", help="rank fitted models by mDIC and mLPML")
    s.add_argument("fits", nargs="*", help="output directories of previous fits")
    s.add_argument("--config", help="fit every model listed in this config first")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output directory")
    s.add_argument("--data")
    s.add_argument("--locations")
    s.add_argument("--adjacency")
    s.add_argument("--cc", action="store_true")

    s = sub.add_parser("study", help="replicate simulation study")
    common(s, data=False)
    s.add_argument("--threads", type=int, help="worker processes (overrides study.threads)")
    s.add_argument("--cc", action="store_true", default=None, help="complete-case analysis")

    s = sub.add_parser("summarize", help="print the summary table of a fit")
    s.add_argument("fit", help="output directory of a fit")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            rates = cmd_simulate(args.config, args.out, args.seed)
            print("average missing rates (x1, x2, both): " + ", ".join(f"{r:.4f}" for r in rates))
        elif args.command == "fit":
            rep = cmd_fit(args.config, args.out, args.data, args.locations, args.adjacency, args.seed,
                          args.cc, args.model)
            _print_rows([rep.as_row()], ["mdic", "mlpml", "dic_r"])
        elif args.command == "compare":
            rows, notes = cmd_compare(args.fits, args.out, args.config, args.data, args.locations,
                                      args.adjacency, args.seed, args.cc)
            _print_rows(rows, ["model", "mdic", "mlpml", "rank_mdic", "rank_mlpml"])
            for n in notes:
                print(f"note: {n}")
        elif args.command == "study":
            def progress(r):
                log.info("replicate %d done", r + 1)
            metrics, crit, _ = cmd_replicate_study(args.config, args.out, args.seed, args.threads, args.cc,
                                                   progress)
            _print_rows(metrics, ["model", "parameter", "truth", "bias", "sd", "mse", "cp"])
            print()
            _print_rows(crit, ["model", "mdic", "mlpml", "dic_r", "best_mdic_share"])
        elif args.command == "summarize":
            _print_rows(cmd_summarize(args.fit), SUMMARY_COLUMNS)
    except SamplerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (SpatialMissError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
