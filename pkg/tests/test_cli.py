import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from spatialmiss.cli import cmd_compare, cmd_fit, cmd_replicate_study, cmd_simulate, main
from spatialmiss.io import load_chain, read_table, write_dataset, write_locations
from spatialmiss.kernels import LocationSet
from spatialmiss.model import SpatialDataset
from spatialmiss.simgen import truth_table

from oracles import batch_means_mcse, semiconjugate_posterior_mean

SHORT = {"n_burnin": 100, "n_kept": 60, "thin": 1, "seed": 5, "adapt_window": 25}
SMALL = {"n_locations": 5, "n_per_location": 20, "n_replicates": 2}


def write_config(path, **sections):
    path.write_text(yaml.safe_dump(sections, sort_keys=False))
    return path


@pytest.fixture
def simulated(tmp_path):
    cfg = write_config(tmp_path / "sim.yaml", simulation=SMALL, chain=SHORT, model={"preset": "M1"})
    cmd_simulate(cfg, tmp_path / "sim")
    rep = tmp_path / "sim" / "replicate_001"
    return cfg, rep / "data.csv", rep / "locations.csv"


def _files(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(Path(root).rglob("*"))
            if p.is_file() and p.name != "manifest.json"}


def test_simulate_twice_is_identical(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", simulation=dict(SMALL, n_replicates=1), chain={"seed": 3})
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert a == b and len(a) == 4
    sidecar = json.loads((tmp_path / "a" / "truths.json").read_text())
    assert sidecar["truths"]["lam_y"] == 3.0 and set(sidecar["average_rates"]) == {
        "x1_missing", "x2_missing", "both_missing"}


def test_simulate_zero_replicates_is_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.yaml", simulation={"n_replicates": 0})
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "line 2" in capsys.readouterr().err


def test_fit_writes_every_output(tmp_path, simulated):
    cfg, data, locs = simulated
    out = tmp_path / "fit"
    assert main(["fit", "--config", str(cfg), "--data", str(data), "--locations", str(locs),
                 "--out", str(out)]) == 0
    for name in ("draws.csv", "loglik.npy", "chain.json", "summary.csv", "criteria.csv", "mcpo.csv",
                 "manifest.json"):
        assert (out / name).is_file(), name
    crit = read_table(out / "criteria.csv")[0]
    assert np.isfinite(float(crit["mdic"])) and np.isfinite(float(crit["mlpml"]))
    assert len(read_table(out / "mcpo.csv")) == 100
    names = {r["parameter"] for r in read_table(out / "summary.csv")}
    assert {"beta.0", "beta.3", "tau_y", "alpha.1.1", "phi.2.3"} <= names
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 5 and len(manifest["inputs"]) == 3


def test_fit_is_reproducible_from_its_manifest(tmp_path, simulated):
    cfg, data, locs = simulated
    cmd_fit(cfg, tmp_path / "a", data, locs)
    seed = json.loads((tmp_path / "a" / "manifest.json").read_text())["seed"]
    cmd_fit(cfg, tmp_path / "b", data, locs, seed=seed)
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_fit_names_the_missing_column(tmp_path, simulated, capsys):
    cfg, data, locs = simulated
    lines = data.read_text().splitlines()
    cut = [",".join(row.split(",")[:-1]) for row in lines]
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(cut) + "\n")
    code = main(["fit", "--config", str(cfg), "--data", str(bad), "--locations", str(locs),
                 "--out", str(tmp_path / "o")])
    assert code == 2 and "x3" in capsys.readouterr().err


def test_complete_case_fit(tmp_path, simulated):
    cfg, data, locs = simulated
    rep = cmd_fit(cfg, tmp_path / "cc", data, locs, cc=True)
    chain = load_chain(tmp_path / "cc")
    assert chain.imputations.shape[1] == 0 and rep.dic_r is None
    assert chain.loglik.shape[1] < 100


def test_complete_data_fit_matches_conjugate_oracle(tmp_path, rng):
    locs = LocationSet.from_coords(rng.uniform(0, 5, (3, 2)))
    n = 120
    X = rng.standard_normal((n, 2))
    y = 0.5 + X @ [1.0, -2.0] + rng.standard_normal(n)
    data = SpatialDataset(locations=locs, loc=np.arange(n) % 3, y=y, X=X, observed=np.ones((n, 0), bool))
    write_locations(tmp_path / "loc.csv", locs)
    write_dataset(tmp_path / "data.csv", data)
    cfg = write_config(
        tmp_path / "c.yaml",
        data={"dataset": "data.csv", "locations": "loc.csv", "q": 0},
        model={"response": {"predictors": ["x1", "x2"], "spatial": False}},
        chain={"n_burnin": 200, "n_kept": 4000, "thin": 1, "seed": 2},
    )
    cmd_fit(cfg, tmp_path / "fit", tmp_path / "data.csv", tmp_path / "loc.csv")
    chain = load_chain(tmp_path / "fit")
    summary = {r["parameter"]: float(r["mean"]) for r in read_table(tmp_path / "fit" / "summary.csv")}
    Z = np.column_stack([np.ones(n), X])
    exact = semiconjugate_posterior_mean(Z, y, 0.001, 0.001, 0.001)
    mcse = batch_means_mcse(chain.draws["beta"])
    got = np.array([summary[f"beta.{k}"] for k in range(3)])
    assert np.all(np.abs(got - exact) < 3 * mcse), (got, exact, mcse)


def test_compare_single_and_tied(tmp_path, simulated, capsys):
    cfg, data, locs = simulated
    cmd_fit(cfg, tmp_path / "a", data, locs)
    rows, notes = cmd_compare([tmp_path / "a"])
    assert rows[0]["rank_mdic"] == rows[0]["rank_mlpml"] == 1 and notes == []
    cmd_fit(cfg, tmp_path / "b", data, locs)
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "b"), "--out", str(tmp_path / "cmp")]) == 0
    printed = capsys.readouterr().out
    assert "tie on mdic at rank 1" in printed and "tie on mlpml at rank 1" in printed
    assert (tmp_path / "cmp" / "ranking.csv").is_file()


def test_compare_flags_disagreement():
    from spatialmiss.study import rank_models

    rows, notes = rank_models([("A", 10.0, -6.0), ("B", 11.0, -5.0)])
    assert [r["model"] for r in rows] == ["A", "B"]
    assert any(n.startswith("criteria disagree") for n in notes)


def test_study_smoke(tmp_path):
    cfg = write_config(tmp_path / "s.yaml", simulation=SMALL, chain=SHORT,
                       model=[{"preset": "M1*"}, {"preset": "M2"}])
    metrics, crit, fits = cmd_replicate_study(cfg, tmp_path / "study")
    assert len(fits) == 4
    for label, preset in (("M1*", "M1*"), ("M2", "M2")):
        from spatialmiss.presets import preset as resolve

        expected = set(truth_table(spec=resolve(preset)))
        assert {m["parameter"] for m in metrics if m["model"] == label} == expected
        assert all(m["replicates"] == 2 for m in metrics if m["model"] == label)
    assert sum(c["best_mdic_share"] for c in crit) == pytest.approx(1.0)
    for name in ("metrics.csv", "criteria.csv", "replicates.csv", "manifest.json"):
        assert (tmp_path / "study" / name).is_file()


def test_summarize_prints_table(tmp_path, simulated, capsys):
    cfg, data, locs = simulated
    cmd_fit(cfg, tmp_path / "a", data, locs)
    assert main(["summarize", str(tmp_path / "a")]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].split() == ["parameter", "mean", "sd", "hpd_lo", "hpd_hi"]
    assert "beta.1" in out


def test_missing_dataset_is_reported(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.yaml", model={"preset": "M1"})
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "dataset" in capsys.readouterr().err
