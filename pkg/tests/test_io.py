import numpy as np
import pytest
from hypothesis import given, strategies as st

from spatialmiss.errors import ConfigError, SchemaError
from spatialmiss.io import (
    fmt,
    load_chain,
    load_config,
    parse_config,
    read_dataset,
    read_locations,
    save_chain,
    write_adjacency,
    write_dataset,
    write_locations,
)
from spatialmiss.kernels import LocationSet
from spatialmiss.mcmc import ChainConfig, run_chain
from spatialmiss.simgen import SimTruths, simulation_model

from conftest import MAR2, make_dataset, ring_adjacency, two_covariate_spec


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_text_round_trip(v):
    assert float(fmt(v)) == v


def test_dataset_round_trip_keeps_missing_cells(tmp_path, rng):
    data = make_dataset(rng, S=3, N=5, missing=0.4)
    write_locations(tmp_path / "loc.csv", data.locations)
    write_dataset(tmp_path / "data.csv", data)
    assert "NA" in (tmp_path / "data.csv").read_text()
    locs = read_locations(tmp_path / "loc.csv")
    back = read_dataset(tmp_path / "data.csv", locs, q=2)
    np.testing.assert_array_equal(locs.coords, data.locations.coords)
    np.testing.assert_array_equal(back.X, data.X)
    np.testing.assert_array_equal(back.y, data.y)
    np.testing.assert_array_equal(back.loc, data.loc)
    np.testing.assert_array_equal(back.observed, data.observed)


def test_adjacency_round_trip(tmp_path, rng):
    locs = LocationSet.from_coords(rng.uniform(size=(5, 2)), adjacency=ring_adjacency(5))
    write_locations(tmp_path / "loc.csv", locs)
    write_adjacency(tmp_path / "adj.csv", locs)
    back = read_locations(tmp_path / "loc.csv", tmp_path / "adj.csv")
    np.testing.assert_array_equal(back.adjacency, locs.adjacency)


def _write(path, text):
    path.write_text(text)
    return path


@pytest.fixture
def locs(tmp_path):
    return read_locations(_write(tmp_path / "loc.csv", "location_id,coord1,coord2\na,0,0\nb,1,1\n"))


@pytest.mark.parametrize("text, columns", [
    ("location_id,y,x1,x3\na,1,2,3\n", ["x2"]),
    ("location_id,x1,x2,x3\na,1,2,3\n", ["y"]),
    ("location_id,y,x1,x2,x3,z\na,1,2,3,4,5\n", ["z"]),
    ("location_id,y,x1,x2,x3\na,1,2,3,NA\n", ["x3"]),
    ("location_id,y,x1,x2,x3\na,1,two,3,4\n", ["x1"]),
    ("location_id,y,x1,x2,x3\nzz,1,2,3,4\n", ["location_id"]),
])
def test_schema_errors_name_columns(tmp_path, locs, text, columns):
    with pytest.raises(SchemaError) as info:
        read_dataset(_write(tmp_path / "d.csv", text), locs, q=2)
    assert list(info.value.columns) == columns


def test_schema_error_for_column_a_model_needs(tmp_path, locs):
    path = _write(tmp_path / "d.csv", "location_id,y,x1,x2\na,1,2,3\n")
    with pytest.raises(SchemaError) as info:
        read_dataset(path, locs, q=2, min_covariates=3)
    assert list(info.value.columns) == ["x3"]


def test_locations_schema(tmp_path):
    with pytest.raises(SchemaError) as info:
        read_locations(_write(tmp_path / "l.csv", "location_id,coord1\na,0\n"))
    assert list(info.value.columns) == ["coord2"]
    with pytest.raises(SchemaError):
        read_locations(_write(tmp_path / "l.csv", "location_id,coord1,coord2\na,0,0\na,1,1\n"))


# -- configuration -------------------------------------------------------------

def test_example_config_parses():
    cfg = load_config("configs/example.yaml")
    assert cfg.model == simulation_model("M1", missingness=MAR2)
    assert cfg.chain.n_kept == 1000 and cfg.design.n_locations == 20


def test_shipped_configs_parse():
    for name in ("study_m1", "study_m1_m4", "study_m1_free", "real_data"):
        assert load_config(f"configs/{name}.yaml").models


def test_preset_list_and_truth_override():
    cfg = parse_config("""
simulation:
  truths: {lam_y: 2.0}
model:
  - {preset: M1}
  - {preset: M3, label: third, sample_phi: false}
""")
    assert list(cfg.models) == ["M1", "third"]
    assert cfg.truths.lam_y == 2.0 and cfg.models["M1"].response.lam == 2.0
    assert cfg.models["third"].missingness.sample is False


@pytest.mark.parametrize("text, line", [
    ("chain:\n  n_kept: 10\nbogus: 1\n", 3),
    ("data:\n  q: 2\n  datset: x.csv\n", 3),
    ("chain:\n  n_kept: [1\n", 3),
    ("chain:\n  seed: 1\nsimulation:\n  n_replicates: 0\n", 4),
    ("chain:\n  seed: 1\n  n_kept: 0\n", 3),
    ("model:\n  preset: M9\n", 2),
])
def test_config_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


def test_config_digest_tracks_text():
    assert parse_config("chain: {seed: 1}\n").sha256 != parse_config("chain: {seed: 2}\n").sha256


# -- draw files ------------------------------------------------------------------

def test_chain_round_trip(tmp_path, rng):
    data = make_dataset(rng, S=3, N=4)
    spec = two_covariate_spec(missingness=MAR2)
    chain = run_chain(spec, data, config=ChainConfig(n_burnin=20, n_kept=10, thin=1, adapt_window=5))
    save_chain(tmp_path, chain, data)
    header = (tmp_path / "draws.csv").read_text().splitlines()[0].split(",")
    assert "w_y.1" in header and "beta.0" in header and header[-2:] == ["deviance", "deviance_r"]
    assert any(h.startswith("imp.") for h in header)
    back = load_chain(tmp_path)
    for k, v in chain.draws.items():
        np.testing.assert_array_equal(back.draws[k], v)
    np.testing.assert_array_equal(back.imputations, chain.imputations)
    np.testing.assert_array_equal(back.loglik, chain.loglik)
    np.testing.assert_array_equal(back.deviance, chain.deviance)
    np.testing.assert_array_equal(back.deviance_r, chain.deviance_r)
    assert not list(tmp_path.glob("*.tmp*"))


def test_truth_defaults_reach_presets():
    cfg = parse_config("model: {preset: 'M1*'}\n")
    assert cfg.model.response.sigma is None and cfg.truths == SimTruths()
