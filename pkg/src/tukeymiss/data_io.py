"""
File formats.

* datasets: CSV ``value,observed`` plus a JSON sidecar ``<path>.meta.json``
  holding ``n_missing`` (an integer, or null when the count is unknown);
* truth records, summaries and configs: JSON documents;
* posterior draws: CSV ``chain,iteration,<sorted column names>``.

Floats are written with Python's shortest round-trip repr, so every writer is
deterministic and every reader is lossless.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from pathlib import Path

import jsonschema
import numpy as np

from .core import AsymptoteLogit, LinearLogit, QuadraticLogit, TukeyModel, canonicalize
from .dataset import Dataset, TruthRecord
from .expfam import IntegrabilityError, MixtureModel
from .inference import (
    AsymptotePrior,
    KnownMechanism,
    LinearPrior,
    McarPrior,
    McmcConfig,
    PointPrior,
    PosteriorDraws,
    PriorConfig,
    QuadraticPrior,
)
from .simulate import ModelValidationError, SelectionNormal, SimConfig, TukeyProcess


class ParseError(ValueError):
    pass


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.key_path = path
        super().__init__(f"{path or '<root>'}: {message}")


def fmt(x) -> str:
    return repr(float(x))


def _write_text(path, text: str):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


# --- datasets -------------------------------------------------------------------

def sidecar_path(path) -> Path:
    return Path(str(path) + ".meta.json")


def write_dataset(data: Dataset, path):
    buf = io.StringIO()
    buf.write("value,observed\n")
    for v, o in zip(data.values, data.observed):
        buf.write(f"{fmt(v)},1\n" if o else ",0\n")
    _write_text(path, buf.getvalue())
    _write_text(sidecar_path(path), _dump_json({"n_missing": data.n_missing}))


def read_dataset(path) -> Dataset:
    values, observed = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["value", "observed"]:
            raise ParseError(f"{path}:1: expected header 'value,observed', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            raw, flag = row[0].strip(), row[1].strip()
            if flag not in ("0", "1"):
                raise ParseError(f"{path}:{lineno}: observed must be 0 or 1, got {flag!r}")
            if flag == "1":
                if not raw:
                    raise ParseError(f"{path}:{lineno}: observed record without a value")
                try:
                    v = float(raw)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: cannot parse value {raw!r}") from None
                if not math.isfinite(v):
                    raise ParseError(f"{path}:{lineno}: non-finite value {raw!r}")
                values.append(v)
                observed.append(True)
            else:
                if raw:
                    raise ParseError(f"{path}:{lineno}: value present on a missing record")
                values.append(np.nan)
                observed.append(False)
    n_unobserved = observed.count(False)
    meta_file = sidecar_path(path)
    if meta_file.exists():
        meta = json.loads(meta_file.read_text(encoding="utf-8"))
        n_missing = meta.get("n_missing")
        if n_missing is None:
            if n_unobserved:
                raise ParseError(f"{path}: sidecar says n_missing is unknown but "
                                 f"{n_unobserved} missing rows are present")
            return Dataset(values, observed, n_missing_known=False)
        if not isinstance(n_missing, int) or n_missing < 0:
            raise ParseError(f"{meta_file}: n_missing must be a non-negative integer or null")
        if n_unobserved == 0 and n_missing:
            values += [np.nan] * n_missing
            observed += [False] * n_missing
        elif n_unobserved != n_missing:
            raise ParseError(f"{path}: {n_unobserved} missing rows but sidecar says {n_missing}")
        return Dataset(values, observed)
    return Dataset(values, observed, n_missing_known=n_unobserved > 0)


# --- truth and summaries ---------------------------------------------------------

def write_truth(truth: TruthRecord, path):
    _write_text(path, _dump_json({
        "params": truth.params, "complete_mean": truth.complete_mean,
        "complete_sd": truth.complete_sd, "q": truth.q,
        "masked_values": truth.masked_values}))


def read_truth(path) -> TruthRecord:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return TruthRecord(doc["params"], doc["complete_mean"], doc["complete_sd"], doc["q"],
                       doc.get("masked_values"))


def write_summary(summary: dict, path):
    _write_text(path, _dump_json(summary))


def read_summary(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# --- posterior draws -------------------------------------------------------------

def write_draws(draws: PosteriorDraws, path):
    names = draws.names
    buf = io.StringIO()
    buf.write(",".join(["chain", "iteration", *names]) + "\n")
    cols = [draws.columns[k] for k in names]
    for i in range(len(draws)):
        fields = [str(int(draws.chain[i])), str(int(draws.iteration[i]))]
        fields += [fmt(c[i]) for c in cols]
        buf.write(",".join(fields) + "\n")
    _write_text(path, buf.getvalue())


def read_draws(path, expected_columns=None) -> PosteriorDraws:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["chain", "iteration"]:
            raise ParseError(f"{path}:1: draws header must start with 'chain,iteration'")
        names = header[2:]
        if names != sorted(names):
            raise ParseError(f"{path}:1: draw columns are not in sorted order")
        if expected_columns is not None and names != sorted(expected_columns):
            raise ParseError(f"{path}:1: header mismatch: {names!r}")
        rows = list(reader)
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
    arr = np.array(rows, dtype=object).reshape(len(rows), len(header))
    chain = arr[:, 0].astype(int) if rows else np.empty(0, int)
    iteration = arr[:, 1].astype(int) if rows else np.empty(0, int)
    columns = {name: (arr[:, j + 2].astype(float) if rows else np.empty(0))
               for j, name in enumerate(names)}
    return PosteriorDraws(chain, iteration, columns)


def write_table(rows: list[dict], columns: list[str], path):
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(row[c]) if isinstance(row[c], (float, np.floating))
                           else str(row[c]) for c in columns) + "\n")
    _write_text(path, buf.getvalue())


# --- configs ---------------------------------------------------------------------

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_PAIR = {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2}


def _obj(props: dict, required=(), **extra) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False, **extra}


_MECH_SPEC = {
    "linear": _obj({"type": {"const": "linear"}, "b0": _NUM, "b1": _NUM}, ["type", "b1"]),
    "quadratic": _obj({"type": {"const": "quadratic"}, "b0": _NUM, "b1": _NUM,
                       "b2": {"type": "number", "minimum": 0}}, ["type", "b1", "b2"]),
    "asymptote": _obj({"type": {"const": "asymptote"}, "b0": _NUM, "b1": _NUM,
                       "kappa": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}},
                      ["type", "b1", "kappa"]),
}

_OBSERVED = _obj({
    "lambda": {"type": "number", "minimum": 0, "maximum": 1},
    "components": {"type": "array", "items": _obj(
        {"weight": {"type": "number", "minimum": 0}, "mean": _NUM, "sd": _POS},
        ["weight", "mean", "sd"])},
    "atoms": {"type": "array", "items": _obj(
        {"prob": {"type": "number", "minimum": 0}, "location": _NUM}, ["prob", "location"])},
}, ["lambda"])

_PROCESS = {
    "tukey": _obj({"type": {"const": "tukey"}, "observed": _OBSERVED,
                   "mechanism": {"type": "object"},
                   "q": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
                  ["type", "observed", "mechanism"]),
    "selection_normal": _obj({"type": {"const": "selection_normal"}, "mu": _NUM,
                              "sigma": _POS, "b0": _NUM, "b1": _NUM},
                             ["type", "mu", "sigma", "b0", "b1"]),
}

_MECH_PRIOR = {
    "quadratic": _obj({"type": {"const": "quadratic"}, "b1_mean": _NUM,
                       "b1_sd": {"type": "number", "minimum": 0}, "b2_scale": _POS,
                       "b2_beta": _PAIR}, ["type"]),
    "asymptote": _obj({"type": {"const": "asymptote"}, "b1_beta": _PAIR,
                       "kappa_beta": _PAIR}, ["type"]),
    "linear": _obj({"type": {"const": "linear"}, "b1_mean": _NUM,
                    "b1_sd": {"type": "number", "minimum": 0}}, ["type"]),
    "mcar": _obj({"type": {"const": "mcar"}}, ["type"]),
    "point": _obj({"type": {"const": "point"}, "spec": {"type": "object"}}, ["type", "spec"]),
    "known": _obj({"type": {"const": "known"}, "spec": {"type": "object"}}, ["type", "spec"]),
}

_HEADER = {"schema_version": {"const": 1},
           "kind": {"enum": ["simulation", "prior", "mcmc"]}}

SCHEMAS = {
    "simulation": _obj({**_HEADER, "n": {"type": "integer", "minimum": 1},
                        "seed": {"type": "integer"}, "record_missing_values": {"type": "boolean"},
                        "process": {"type": "object"}},
                       ["schema_version", "kind", "n", "seed", "process"]),
    "prior": _obj({**_HEADER, "K": {"type": "integer", "minimum": 1},
                   "atom_locations": {"type": "array", "items": _NUM, "uniqueItems": True},
                   "mean_prior_sd": _POS, "sd_prior_upper": _POS, "weights_dirichlet": _POS,
                   "atoms_dirichlet": _POS, "lambda_beta": _PAIR,
                   "mechanism": {"type": "object"},
                   "q_prior": _obj({"type": {"enum": ["uniform", "beta"]}, "a": _POS, "b": _POS},
                                   ["type"])},
                  ["schema_version", "kind", "K", "mechanism"]),
    "mcmc": _obj({**_HEADER, "chains": {"type": "integer", "minimum": 1},
                  "iterations": {"type": "integer", "minimum": 1},
                  "burnin": {"type": "integer", "minimum": 0},
                  "thin": {"type": "integer", "minimum": 1}, "seed": {"type": "integer"}},
                 ["schema_version", "kind"]),
}


def _check(doc, schema, where: str = ""):
    err = jsonschema.exceptions.best_match(jsonschema.Draft202012Validator(schema).iter_errors(doc))
    if err is not None:
        path = "/".join([where.strip("/")] + [str(p) for p in err.absolute_path]).strip("/")
        raise ConfigError(path, err.message)


def _dispatch(doc, table: dict, where: str):
    kind = doc.get("type")
    if kind not in table:
        raise ConfigError(f"{where}/type", f"unknown type {kind!r}; expected one of {sorted(table)}")
    _check(doc, table[kind], where)
    return kind


def parse_mechanism_spec(doc: dict, where: str = "mechanism", need_b0: bool = False):
    kind = _dispatch(doc, _MECH_SPEC, where)
    if need_b0 and "b0" not in doc:
        raise ConfigError(f"{where}/b0", "intercept b0 is required here")
    b0 = doc.get("b0")
    if kind == "linear":
        return LinearLogit(b0, doc["b1"])
    if kind == "quadratic":
        return QuadraticLogit(b0, doc["b1"], doc["b2"])
    return AsymptoteLogit(b0, doc["b1"], doc["kappa"])


def parse_observed(doc: dict) -> MixtureModel:
    comps = doc.get("components", [])
    atoms = doc.get("atoms", [])
    try:
        return MixtureModel.from_moments(
            doc["lambda"], [c["weight"] for c in comps], [c["mean"] for c in comps],
            [c["sd"] for c in comps], [a["prob"] for a in atoms], [a["location"] for a in atoms])
    except ValueError as exc:
        raise ConfigError("process/observed", str(exc)) from None


def parse_process(doc: dict):
    """Build the process without checking model consistency."""
    kind = _dispatch(doc, _PROCESS, "process")
    if kind == "selection_normal":
        return SelectionNormal(doc["mu"], doc["sigma"], doc["b0"], doc["b1"])
    obs = parse_observed(doc["observed"])
    spec = parse_mechanism_spec(doc["mechanism"], "process/mechanism")
    has_q, has_b0 = "q" in doc, spec.b0 is not None
    if not (has_q or has_b0):
        raise ConfigError("process", "give either q or mechanism/b0")
    mech = canonicalize(spec)
    try:
        if has_q and not has_b0:
            try:
                model = TukeyModel.with_target_q(obs, mech, doc["q"])
            except IntegrabilityError:
                # keep the unsolved model so validation can name every violation
                model = TukeyModel(obs, mech, doc["q"])
        elif has_q:
            model = TukeyModel(obs, mech, doc["q"])
        else:
            model = TukeyModel.from_parts(obs, mech)
    except ValueError as exc:
        raise ConfigError("process", str(exc)) from None
    return TukeyProcess(model, spec)


def _parse_mech_prior(doc: dict):
    kind = _dispatch(doc, _MECH_PRIOR, "mechanism")
    if kind == "quadratic":
        d = QuadraticPrior()
        return QuadraticPrior(doc.get("b1_mean", d.b1_mean), doc.get("b1_sd", d.b1_sd),
                              doc.get("b2_scale", d.b2_scale),
                              tuple(doc.get("b2_beta", d.b2_beta)))
    if kind == "asymptote":
        d = AsymptotePrior()
        return AsymptotePrior(tuple(doc.get("b1_beta", d.b1_beta)),
                              tuple(doc.get("kappa_beta", d.kappa_beta)))
    if kind == "linear":
        d = LinearPrior()
        return LinearPrior(doc.get("b1_mean", d.b1_mean), doc.get("b1_sd", d.b1_sd))
    if kind == "mcar":
        return McarPrior()
    if kind == "point":
        return PointPrior(parse_mechanism_spec(doc["spec"], "mechanism/spec"))
    return KnownMechanism(parse_mechanism_spec(doc["spec"], "mechanism/spec", need_b0=True))


def parse_config(doc: dict):
    if not isinstance(doc, dict):
        raise ConfigError("", "config must be a JSON object")
    _check(doc, _obj(_HEADER, ["schema_version", "kind"], additionalProperties=True))
    kind = doc["kind"]
    _check(doc, SCHEMAS[kind])
    try:
        if kind == "simulation":
            return SimConfig(parse_process(doc["process"]), doc["n"], doc["seed"],
                             doc.get("record_missing_values", True))
        if kind == "prior":
            d = PriorConfig()
            qp = doc.get("q_prior", {"type": "uniform"})
            q_beta = (1.0, 1.0) if qp["type"] == "uniform" else (qp.get("a", 1.0), qp.get("b", 1.0))
            return PriorConfig(
                K=doc["K"], atom_locations=tuple(float(g) for g in doc.get("atom_locations", [])),
                mean_prior_sd=doc.get("mean_prior_sd", d.mean_prior_sd),
                sd_prior_upper=doc.get("sd_prior_upper", d.sd_prior_upper),
                weights_dirichlet=doc.get("weights_dirichlet", d.weights_dirichlet),
                atoms_dirichlet=doc.get("atoms_dirichlet", d.atoms_dirichlet),
                lambda_beta=tuple(doc.get("lambda_beta", d.lambda_beta)),
                mechanism=_parse_mech_prior(doc["mechanism"]), q_beta=q_beta)
        d = McmcConfig()
        return McmcConfig(doc.get("chains", d.chains), doc.get("iterations", d.iterations),
                          doc.get("burnin", d.burnin), doc.get("thin", d.thin),
                          doc.get("seed", d.seed))
    except (ConfigError, ModelValidationError):
        raise
    except ValueError as exc:
        raise ConfigError(kind, str(exc)) from None


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON in {path}: {exc}") from None


def read_config(path):
    """Parse a simulation, prior or MCMC config document."""
    return parse_config(load_json(path))


def read_process(path):
    """The process of a simulation config, without validating the model."""
    doc = load_json(path)
    _check(doc, SCHEMAS["simulation"])
    return parse_process(doc["process"])


def ensure_parent(prefix) -> Path:
    parent = Path(prefix).parent
    if not parent.is_dir():
        raise FileNotFoundError(f"output directory {str(parent)!r} does not exist")
    return parent


def paths_distinct(inputs, outputs) -> bool:
    ins = {os.path.realpath(p) for p in inputs}
    return not any(os.path.realpath(p) in ins for p in outputs)
