"""Command-line front end: experiment configs, sweep execution, invariant
suites, and machine-readable CSV/JSON output.

Configs are flat ``key = value`` text files (full-line # comments only); dotted
keys carry the parameters of the chosen model/forcing/observable. Unknown keys
fail fast with the offending line number. Results go to three files per run:
replicas.csv (one row per kind/eta/replica), summary.csv (one row per cell),
and manifest.json (config echo, version, timestamp, cell statuses, file
inventory). Progress goes to stderr; stdout carries machine-readable output
only. Exit codes: 0 success, 1 invariant or cell failure, 2 configuration
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, checks, engine
from .dynamics import SimParams, make_forcing, make_model, make_observable
from .errors import ConfigError, TransportCVError
from .estimators import eta_sweep
from .oracles import gaussian_tv_isotropic, ou_stationary

__all__ = ["ExperimentConfig", "parse_config", "serialize_config", "main"]

REPLICA_COLUMNS = (
    "kind", "eta", "replica", "alpha_hat", "summand_var", "asym_var_hat",
    "meet_fraction", "mean_sq_dist", "blowup",
)
SUMMARY_COLUMNS = (
    "kind", "eta", "replicas_ok", "alpha_hat", "se", "var_alpha", "asym_var_hat",
    "summand_var", "meet_fraction", "mean_sq_dist", "blowups", "status",
)

_MODEL_PARAMS = {
    "harmonic": {},
    "cosine_well": {"L": float},
    "lj_cluster": {"n_particles": int, "alpha": float, "L": float, "epsilon": float, "sigma": float},
}
_FORCING_PARAMS = {
    "none": {},
    "linear_shear": {},
    "sinusoidal_shear": {},
    "lj_shear": {"L": float},
}
_OBSERVABLE_PARAMS = {
    "cov": {},
    "mobility": {"L": float},
    "tilt": {"eps": float},
}

# (type, required, default); list fields hold tuples
_FIELDS = {
    "model": (str, True, None),
    "forcing": (str, False, "none"),
    "observable": (str, True, None),
    "kinds": ("list_str", True, None),
    "beta": (float, True, None),
    "dt": (float, True, None),
    "etas": ("list_float", True, None),
    "n_steps": (int, True, None),
    "n_burnin": (int, False, 0),
    "replicas": (int, True, None),
    "seed": (int, False, 0),
    "outdir": (str, True, None),
    "n_batches": (int, False, 50),
    "r0_mean": (float, False, 0.0),
}


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    observable: str
    kinds: tuple
    beta: float
    dt: float
    etas: tuple
    n_steps: int
    replicas: int
    outdir: str
    forcing: str = "none"
    n_burnin: int = 0
    seed: int = 0
    n_batches: int = 50
    r0_mean: float = 0.0
    model_params: dict = field(default_factory=dict)
    forcing_params: dict = field(default_factory=dict)
    observable_params: dict = field(default_factory=dict)

    def build(self):
        """Resolve all keys into live objects; raises on anything invalid."""
        model = make_model(self.model, **self.model_params)
        forcing = make_forcing(self.forcing, **self.forcing_params)
        obs = make_observable(self.observable, **self.observable_params)
        obs.bind(model.with_forcing(forcing))
        if self.replicas < 1:
            raise ConfigError(f"replicas must be >= 1, got {self.replicas}")
        params = SimParams(
            dt=self.dt, beta=self.beta, eta=self.etas[0], n_steps=self.n_steps,
            n_burnin=self.n_burnin, seed=self.seed,
        )
        for kind in self.kinds:
            if kind not in engine.KINDS:
                raise ConfigError(f"unknown estimator kind {kind!r}")
        if not self.etas or any(e == 0.0 for e in self.etas):
            raise ConfigError("etas must be non-empty and nonzero")
        return model, forcing, obs, params


def _convert(raw: str, typ, line_no: int, key: str):
    try:
        if typ is str:
            return raw
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        if typ == "list_str":
            return tuple(s.strip() for s in raw.split(",") if s.strip())
        if typ == "list_float":
            return tuple(float(s) for s in raw.split(",") if s.strip())
    except ValueError as err:
        raise ConfigError(f"line {line_no}: field '{key}': {err}") from None
    raise ConfigError(f"line {line_no}: field '{key}': unsupported type")


def parse_config(text: str) -> ExperimentConfig:
    """Parse a flat key = value config; unknown keys and type errors carry
    their line number."""
    values: dict = {}
    dotted: dict = {"model": {}, "forcing": {}, "observable": {}}
    dotted_lines: dict = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if "." in key:
            head, _, sub = key.partition(".")
            if head not in dotted:
                raise ConfigError(f"line {line_no}: unknown key {key!r}")
            if sub in dotted[head]:
                raise ConfigError(f"line {line_no}: duplicate key {key!r}")
            dotted[head][sub] = raw
            dotted_lines[key] = line_no
            continue
        if key not in _FIELDS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        values[key] = _convert(raw, _FIELDS[key][0], line_no, key)

    for key, (typ, required, default) in _FIELDS.items():
        if key not in values:
            if required:
                raise ConfigError(f"missing required key {key!r}")
            values[key] = default

    param_schemas = (
        ("model", _MODEL_PARAMS, values["model"]),
        ("forcing", _FORCING_PARAMS, values["forcing"]),
        ("observable", _OBSERVABLE_PARAMS, values["observable"]),
    )
    params = {}
    for head, schemas, chosen in param_schemas:
        if chosen not in schemas:
            raise ConfigError(f"unknown {head} key {chosen!r}; expected one of {sorted(schemas)}")
        schema = schemas[chosen]
        out = {}
        for sub, raw in dotted[head].items():
            full = f"{head}.{sub}"
            if sub not in schema:
                raise ConfigError(f"line {dotted_lines[full]}: unknown key {full!r} for {head} '{chosen}'")
            out[sub] = _convert(raw, schema[sub], dotted_lines[full], full)
        params[head] = out

    cfg = ExperimentConfig(
        model=values["model"],
        forcing=values["forcing"],
        observable=values["observable"],
        kinds=values["kinds"],
        beta=values["beta"],
        dt=values["dt"],
        etas=values["etas"],
        n_steps=values["n_steps"],
        n_burnin=values["n_burnin"],
        replicas=values["replicas"],
        seed=values["seed"],
        outdir=values["outdir"],
        n_batches=values["n_batches"],
        r0_mean=values["r0_mean"],
        model_params=params["model"],
        forcing_params=params["forcing"],
        observable_params=params["observable"],
    )
    try:
        cfg.build()
    except TransportCVError as err:
        raise ConfigError(str(err)) from err
    return cfg


def _fmt(v) -> str:
    """Serialize one scalar with full (round-trippable) precision."""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Emit a config in canonical key order; parsing it back is the identity."""
    lines = []
    for key in _FIELDS:
        v = getattr(cfg, key)
        if isinstance(v, tuple):
            lines.append(f"{key} = {', '.join(_fmt(x) for x in v)}")
        else:
            lines.append(f"{key} = {_fmt(v)}")
        if key in ("model", "forcing", "observable"):
            sub = getattr(cfg, f"{key}_params")
            for name in sorted(sub):
                lines.append(f"{key}.{name} = {_fmt(sub[name])}")
    return "\n".join(lines) + "\n"


def config_to_dict(cfg: ExperimentConfig) -> dict:
    d = {key: getattr(cfg, key) for key in _FIELDS}
    d["kinds"] = list(cfg.kinds)
    d["etas"] = list(cfg.etas)
    d["model_params"] = dict(cfg.model_params)
    d["forcing_params"] = dict(cfg.forcing_params)
    d["observable_params"] = dict(cfg.observable_params)
    return d


def _load_config_text(ref: str) -> str:
    path = Path(ref)
    if path.exists():
        return path.read_text()
    bundled = resources.files("transportcv").joinpath(f"configs/{ref}.cfg")
    if bundled.is_file():
        return bundled.read_text()
    raise ConfigError(f"no config file at {ref!r} and no bundled config of that name")


def _csv_cell(v) -> str:
    if isinstance(v, float):
        # plain-float repr; numpy scalars would otherwise stringify as
        # np.float64(...) wrappers
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row])


def run_experiment(cfg: ExperimentConfig, outdir=None, progress=None) -> dict:
    """Execute the configured sweep and write replicas.csv, summary.csv and
    manifest.json; returns the manifest dict."""
    model, forcing, obs, params = cfg.build()
    out = Path(outdir if outdir is not None else cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    engine.set_worker_count()

    results = eta_sweep(
        list(cfg.kinds), model, forcing, obs, list(cfg.etas), cfg.replicas, params,
        n_batches=cfg.n_batches, r0_mean=cfg.r0_mean, progress=progress,
    )

    replica_rows = []
    summary_rows = []
    for res in sorted(results, key=lambda r: (r.kind, r.eta)):
        for rec in res.replicas:
            replica_rows.append(
                (res.kind, res.eta, rec.replica, rec.alpha_hat, rec.summand_var,
                 rec.asym_var_hat, rec.meet_fraction, rec.mean_sq_dist, int(rec.blowup))
            )
        summary_rows.append(
            (res.kind, res.eta, res.n_replicas - res.blowups, res.alpha_hat, res.se,
             res.var_alpha, res.asym_var_hat, res.summand_var, res.meet_fraction,
             res.mean_sq_dist, res.blowups, res.status)
        )
    _write_csv(out / "replicas.csv", REPLICA_COLUMNS, replica_rows)
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows)

    manifest = {
        "config": config_to_dict(cfg),
        "version": __version__,
        "timestamp_utc": datetime.now(timezone.utc).isoformat(),
        "cells": [
            {"kind": r.kind, "eta": r.eta, "status": r.status}
            for r in sorted(results, key=lambda r: (r.kind, r.eta))
        ],
        "files": ["replicas.csv", "summary.csv", "manifest.json"],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def cmd_run(args) -> int:
    cfg = parse_config(_load_config_text(args.config))
    t0 = time.time()

    def progress(res):
        print(
            f"cell kind={res.kind} eta={res.eta:g}: alpha={res.alpha_hat:.6g} "
            f"se={res.se:.3g} blowups={res.blowups} [{time.time() - t0:.1f}s]",
            file=sys.stderr,
        )

    manifest = run_experiment(cfg, outdir=args.outdir, progress=progress)
    print(json.dumps(manifest))
    bad = [c for c in manifest["cells"] if c["status"] != "ok"]
    return 1 if bad else 0


def cmd_check(args) -> int:
    engine.set_worker_count()
    results = checks.run_checks(args.level)
    failed = 0
    for res in results:
        tag = "PASS" if res.passed else "FAIL"
        print(f"[{tag}] {res.name}: {res.detail}")
        failed += 0 if res.passed else 1
    return 1 if failed else 0


def _parse_kv(pairs):
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"expected key=value, got {pair!r}")
        k, _, v = pair.partition("=")
        out[k.strip()] = v.strip()
    return out


def _vector(raw: str) -> np.ndarray:
    return np.array([float(s) for s in raw.split(",") if s.strip()])


def cmd_oracle(args) -> int:
    kv = _parse_kv(args.params)
    if args.name == "ou":
        beta = float(kv.pop("beta", 1.0))
        eta = float(kv.pop("eta", 0.0))
        if kv:
            raise ConfigError(f"unknown oracle parameters {sorted(kv)}")
        res = ou_stationary(beta, eta)
        s = res.sigma.astype(float)
        print(
            f"sigma=[[{float(s[0, 0])!r},{float(s[0, 1])!r}],"
            f"[{float(s[1, 0])!r},{float(s[1, 1])!r}]] alpha={res.alpha!r}"
        )
        return 0
    if args.name == "tv":
        sigma = float(kv.pop("sigma", 1.0))
        if "distance" in kv:
            dist = float(kv.pop("distance"))
            mu1, mu2 = np.zeros(1), np.array([dist])
        else:
            mu1 = _vector(kv.pop("mu1"))
            mu2 = _vector(kv.pop("mu2"))
        if kv:
            raise ConfigError(f"unknown oracle parameters {sorted(kv)}")
        print(f"tv={gaussian_tv_isotropic(mu1, mu2, sigma)!r}")
        return 0
    raise ConfigError(f"unknown oracle {args.name!r}; expected 'ou' or 'tv'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transportcv",
        description="Transport-coefficient estimation with coupling-based control variates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a sweep config and write CSV/manifest results")
    p_run.add_argument("config", help="path to a config file, or the name of a bundled config")
    p_run.add_argument("--outdir", default=None, help="override the configured output directory")
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="run the invariant suites")
    p_check.add_argument("--level", choices=("fast", "full"), default="fast")
    p_check.set_defaults(func=cmd_check)

    p_oracle = sub.add_parser("oracle", help="print closed-form oracle values")
    p_oracle.add_argument("name", help="'ou' or 'tv'")
    p_oracle.add_argument("params", nargs="*", help="key=value parameters")
    p_oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except TransportCVError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
