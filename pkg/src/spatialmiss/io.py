"""Files: YAML run configuration, dataset / location CSVs, draw files and
run manifests.

Dataset CSV
    One row per observation: ``location_id, y, x1, .., xp``.  Missing cells
    hold the literal token ``NA``.
Locations CSV
    ``location_id, coord1, coord2``.
Adjacency CSV (CAR models)
    One undirected edge per row: ``location_a, location_b``.

Floats are written with 17 significant digits so every file reads back to
the identical binary value.  All writes go to a temporary file in the
target directory that is then renamed over the destination.
"""

from dataclasses import dataclass, field
import csv
from datetime import datetime, timezone
import hashlib
import io
import json
import os
from pathlib import Path
import re
import tempfile

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, InvalidInputError, SchemaError, SpatialMissError
from .kernels import LocationSet
from .mcmc import ChainConfig, ChainOutput
from .model import ModelSpec, Priors, SpatialDataset
from .simgen import SimDesign, SimTruths

NA = "NA"
FLOAT_FMT = "%.17g"
_XCOL = re.compile(r"^x(\d+)$")


# ---------------------------------------------------------------------------
# low-level helpers
# ---------------------------------------------------------------------------

def fmt(v):
    return NA if v is None or (isinstance(v, float) and np.isnan(v)) else FLOAT_FMT % v


def atomic_write(path, data):
    """Write ``data`` (str or bytes) to ``path`` via a temporary file and a
    rename, so readers never observe a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": "", "encoding": "utf-8"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_save_npy(path, arr):
    buf = io.BytesIO()
    np.save(buf, arr, allow_pickle=False)
    return atomic_write(path, buf.getvalue())


def write_json(path, obj):
    return atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_table(path, rows, columns):
    """Write a list of dicts as CSV; floats at full precision."""
    def cell(v):
        if isinstance(v, (float, np.floating)):
            return fmt(float(v))
        return "" if v is None else v
    return atomic_write(path, _csv_text(columns, [[cell(r.get(c)) for c in columns] for r in rows]))


def read_table(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

def write_locations(path, locations):
    rows = [[lid, fmt(c[0]), fmt(c[1])] for lid, c in zip(locations.ids, locations.coords)]
    return atomic_write(path, _csv_text(["location_id", "coord1", "coord2"], rows))


def write_adjacency(path, locations):
    adj = locations.adjacency
    ids = locations.ids
    rows = [[ids[a], ids[b]] for a, b in zip(*np.nonzero(np.triu(adj, 1)))]
    return atomic_write(path, _csv_text(["location_a", "location_b"], rows))


def read_locations(path, adjacency=None):
    """Read a locations CSV and optionally an adjacency edge list."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        need = ["location_id", "coord1", "coord2"]
        missing = [c for c in need if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}", columns=missing)
        idx = [header.index(c) for c in need]
        ids, coords = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                ids.append(row[idx[0]].strip())
                coords.append((float(row[idx[1]]), float(row[idx[2]])))
            except (IndexError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: bad location row ({exc})", columns=need[1:]) from None
    if len(set(ids)) != len(ids):
        raise SchemaError(f"{path}: duplicated location_id", columns=["location_id"])
    adj = None
    if adjacency is not None:
        pos = {lid: k for k, lid in enumerate(ids)}
        adj = np.zeros((len(ids), len(ids)))
        for row in read_table(adjacency):
            try:
                a, b = pos[row["location_a"].strip()], pos[row["location_b"].strip()]
            except KeyError as exc:
                raise SchemaError(f"{adjacency}: unknown location or column {exc}",
                                  columns=["location_a", "location_b"]) from None
            if a != b:
                adj[a, b] = adj[b, a] = 1.0
    return LocationSet.from_coords(np.array(coords, dtype=float).reshape(-1, 2), ids=ids, adjacency=adj)


def write_dataset(path, data):
    """Write the observation CSV (missing cells as ``NA``)."""
    ids = data.locations.ids
    header = ["location_id", "y", *data.names]
    X = data.X
    rows = []
    for i in range(data.n):
        rows.append([ids[data.loc[i]], fmt(data.y[i]), *(fmt(v) for v in X[i])])
    return atomic_write(path, _csv_text(header, rows))


def read_dataset(path, locations, q, covariates=None, min_covariates=0):
    """Read an observation CSV against a :class:`LocationSet`.

    Parameters
    ----------
    q : int
        Number of missing-prone covariates (the first ``q`` covariate
        columns).
    covariates : sequence of str, optional
        Expected covariate columns in order; defaults to every ``x<k>``
        column of the header, which must then be ``x1 .. xp``.
    min_covariates : int
        With inferred columns, the smallest acceptable ``p`` (the highest
        column a model refers to).

    Raises
    ------
    SchemaError
        Listing the offending columns: absent required columns, unexpected
        columns, unparsable values, or ``NA`` in a column that is not
        missing-prone.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        body = [row for row in reader if row]
    if covariates is None:
        xs = sorted((int(m.group(1)), h) for h in header if (m := _XCOL.match(h)))
        covariates = [h for _, h in xs]
        p = max([len(covariates), min_covariates] + [k for k, _ in xs])
        expected = [f"x{k + 1}" for k in range(p)]
        if covariates != expected:
            gaps = sorted(set(expected) - set(covariates))
            raise SchemaError(f"{path}: covariate columns must be x1..xp; missing {gaps}", columns=gaps)
    need = ["location_id", "y", *covariates]
    missing = [c for c in need if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}", columns=missing)
    extra = [h for h in header if h not in need]
    if extra:
        raise SchemaError(f"{path}: unexpected columns {extra}", columns=extra)
    if not 0 <= q <= len(covariates):
        raise SchemaError(f"{path}: q = {q} exceeds the {len(covariates)} covariate columns", columns=[])
    pos = {lid: k for k, lid in enumerate(locations.ids)}
    col = {c: header.index(c) for c in need}
    n, p = len(body), len(covariates)
    loc = np.empty(n, dtype=np.intp)
    y = np.empty(n)
    X = np.empty((n, p))
    bad = set()
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise SchemaError(f"{path}:{i + 2}: expected {len(header)} fields, got {len(row)}", columns=[])
        lid = row[col["location_id"]].strip()
        if lid not in pos:
            raise SchemaError(f"{path}:{i + 2}: unknown location_id {lid!r}", columns=["location_id"])
        loc[i] = pos[lid]
        try:
            y[i] = float(row[col["y"]])
        except ValueError:
            bad.add("y")
        for j, c in enumerate(covariates):
            v = row[col[c]].strip()
            if v == NA:
                if j >= q:
                    bad.add(c)
                X[i, j] = np.nan
                continue
            try:
                X[i, j] = float(v)
            except ValueError:
                bad.add(c)
    if bad:
        cols = [c for c in need if c in bad]
        raise SchemaError(f"{path}: unparsable or unexpectedly missing values in columns {cols}", columns=cols)
    return SpatialDataset.from_arrays(locations, loc, y, X, q, names=tuple(covariates))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Parsed configuration file.

    ``model`` is the fitted :class:`ModelSpec`; ``models`` holds every
    labelled spec when the ``model`` section lists several (used by
    ``compare`` and ``study``).
    """

    model: ModelSpec = None
    models: dict = field(default_factory=dict)
    priors: Priors = field(default_factory=Priors)
    chain: ChainConfig = field(default_factory=ChainConfig)
    design: SimDesign = field(default_factory=SimDesign)
    truths: SimTruths = field(default_factory=SimTruths)
    data: dict = field(default_factory=dict)
    study: dict = field(default_factory=dict)
    path: str = None
    sha256: str = None
    raw: dict = field(default_factory=dict)


SECTIONS = ("data", "model", "priors", "chain", "simulation", "study")
_STUDY_KEYS = {"cc", "threads", "parameters"}
_DATA_KEYS = {"dataset", "locations", "adjacency", "q", "covariates"}
_MODEL_KEYS = {"preset", "mechanism", "correlation", "sample_phi"}


def _key_lines(node, prefix=()):
    """Map key paths of a composed YAML mapping to 1-based line numbers."""
    out = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = prefix + (k.value,)
            out[path] = k.start_mark.line + 1
            out.update(_key_lines(v, path))
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            out[prefix + (i,)] = v.start_mark.line + 1
            out.update(_key_lines(v, prefix + (i,)))
    return out


def _model_from(d, truths):
    from .presets import preset

    if "preset" in d:
        unknown = set(d) - _MODEL_KEYS
        if unknown:
            raise ValueError(f"unknown keys next to a preset: {sorted(unknown)}")
        mech = d.get("mechanism", "MAR")
        mech = None if mech in (None, "none", "None") else str(mech)
        return preset(str(d["preset"]), mechanism=mech, correlation=d.get("correlation", "exponential"),
                      sample_phi=bool(d.get("sample_phi", True)), truths=truths)
    return ModelSpec.from_dict(d)


def parse_config(text, path=None):
    """Parse configuration text into a :class:`RunConfig`.

    Errors are raised as :class:`ConfigError` carrying the line of the
    offending key where it can be located.
    """
    try:
        raw = yaml.safe_load(text)
        lines = _key_lines(yaml.compose(text)) if raw else {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"cannot parse configuration: {getattr(exc, 'problem', exc)}", line=line) from None
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping of sections", line=1)
    for key in raw:
        if key not in SECTIONS:
            raise ConfigError(f"unknown section {key!r}; expected one of {list(SECTIONS)}", line=lines.get((key,)))

    def section(name, fn):
        try:
            return fn(raw.get(name) or {})
        except ConfigError:
            raise
        except (SpatialMissError, ValueError, TypeError, KeyError) as exc:
            # point at the first key of the section that the message names
            keys = [k for k in (raw.get(name) or {}) if isinstance(k, str) and re.search(rf"\b{k}\b", str(exc))] \
                if isinstance(raw.get(name), dict) else []
            line = lines.get((name, keys[0])) if keys else lines.get((name,))
            raise ConfigError(f"section {name!r}: {exc}", line=line) from None

    def check_keys(name, allowed):
        def fn(d):
            if not isinstance(d, dict):
                raise ValueError("expected a mapping")
            unknown = set(d) - allowed
            if unknown:
                bad = sorted(unknown)[0]
                raise ConfigError(f"section {name!r}: unknown key {bad!r}", line=lines.get((name, bad)))
            return dict(d)
        return fn

    cfg = RunConfig(path=str(path) if path else None, raw=raw,
                    sha256=hashlib.sha256(text.encode("utf-8")).hexdigest())
    sim = section("simulation", lambda d: dict(d))
    truths = sim.pop("truths", None) or {}
    cfg.truths = section("simulation", lambda _: SimTruths(**{k: tuple(v) if isinstance(v, list) else v
                                                             for k, v in truths.items()}))
    cfg.design = section("simulation", lambda _: SimDesign(**sim))
    cfg.priors = section("priors", Priors.from_dict)
    cfg.chain = section("chain", ChainConfig.from_dict)
    cfg.data = section("data", check_keys("data", _DATA_KEYS))
    cfg.study = section("study", check_keys("study", _STUDY_KEYS))

    def models(d):
        if isinstance(d, list):
            out = {}
            for i, item in enumerate(d):
                label = str(item.get("label") or item.get("preset") or f"model{i + 1}")
                out[label] = _model_from({k: v for k, v in item.items() if k != "label"}, cfg.truths)
            if not out:
                raise ValueError("empty model list")
            return out
        if not d:
            return {}
        label = str(d.get("label") or d.get("preset") or "model")
        return {label: _model_from({k: v for k, v in d.items() if k != "label"}, cfg.truths)}

    cfg.models = section("model", models)
    cfg.model = next(iter(cfg.models.values()), None)
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, path)


# ---------------------------------------------------------------------------
# draw files
# ---------------------------------------------------------------------------

def _element_names(name, shape):
    if not shape:
        return [name]
    base = 1 if name.startswith("w_") else 0
    return [f"{name}.{k + base}" for k in range(shape[0])]


def draw_header(chain, data):
    header = []
    for name, arr in chain.draws.items():
        header += _element_names(name, arr.shape[1:])
    ids = data.locations.ids
    within = data.row_in_location()
    for r, c in zip(chain.missing_rows, chain.missing_cols):
        header.append(f"imp.{ids[data.loc[r]]}.{within[r] + 1}.{data.names[c]}")
    header.append("deviance")
    if chain.deviance_r is not None:
        header.append("deviance_r")
    return header


def save_chain(out_dir, chain, data):
    """Write ``draws.csv``, the companion ``loglik.npy`` and ``chain.json``.

    ``draws.csv`` has one row per kept draw and one column per scalar; the
    per-observation log-likelihood terms live in ``loglik.npy`` (kept draws
    by observations).
    """
    out = Path(out_dir)
    cols = [a.reshape(a.shape[0], -1) for a in chain.draws.values()]
    cols.append(chain.imputations)
    cols.append(chain.deviance[:, None])
    if chain.deviance_r is not None:
        cols.append(chain.deviance_r[:, None])
    table = np.hstack(cols)
    buf = io.StringIO()
    buf.write(",".join(draw_header(chain, data)) + "\n")
    np.savetxt(buf, table, fmt=FLOAT_FMT, delimiter=",")
    atomic_write(out / "draws.csv", buf.getvalue())
    atomic_save_npy(out / "loglik.npy", chain.loglik)
    meta = {
        # a list, not a mapping: the order matches the columns of draws.csv
        "shapes": [[k, list(v.shape[1:])] for k, v in chain.draws.items()],
        "missing_rows": chain.missing_rows,
        "missing_cols": chain.missing_cols,
        "acceptance": chain.acceptance,
        "step_sizes": {k: v[-1] for k, v in chain.step_sizes.items()},
        "has_deviance_r": chain.deviance_r is not None,
    }
    write_json(out / "chain.json", meta)
    return out


def load_chain(out_dir):
    """Read a chain written by :func:`save_chain` back into a
    :class:`ChainOutput` (step-size traces are reduced to their final,
    frozen values)."""
    out = Path(out_dir)
    meta = json.loads((out / "chain.json").read_text(encoding="utf-8"))
    table = np.loadtxt(out / "draws.csv", delimiter=",", skiprows=1, ndmin=2)
    draws, pos = {}, 0
    for name, shape in meta["shapes"]:
        width = int(np.prod(shape)) if shape else 1
        block = table[:, pos:pos + width]
        draws[name] = block.reshape((table.shape[0], *shape)) if shape else block[:, 0].copy()
        pos += width
    rows = np.asarray(meta["missing_rows"], dtype=np.intp)
    imputations = table[:, pos:pos + rows.shape[0]]
    pos += rows.shape[0]
    deviance = table[:, pos].copy()
    deviance_r = table[:, pos + 1].copy() if meta["has_deviance_r"] else None
    T = table.shape[0]
    return ChainOutput(
        draws=draws, imputations=imputations, missing_rows=rows,
        missing_cols=np.asarray(meta["missing_cols"], dtype=np.intp),
        loglik=np.load(out / "loglik.npy"), deviance=deviance, deviance_r=deviance_r,
        acceptance=meta["acceptance"],
        step_sizes={k: np.full(T, v) for k, v in meta["step_sizes"].items()},
    )


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------

def now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def manifest(command, config=None, seed=None, inputs=(), started=None, extra=None):
    """Provenance record of one command invocation."""
    m = {
        "command": command,
        "config_sha256": None if config is None else config.sha256,
        "config_path": None if config is None else config.path,
        "seed": seed,
        "started": started or now(),
        "finished": now(),
        "version": __version__,
        "inputs": {str(p): sha256_file(p) for p in inputs if p is not None},
    }
    if extra:
        m.update(extra)
    return m


def require_file(path, what):
    if path is None:
        raise InvalidInputError(f"no {what} given")
    if not Path(path).is_file():
        raise InvalidInputError(f"{what} {path} does not exist")
    return Path(path)
