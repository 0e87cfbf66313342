"""Command-line runner: ``igeo <command> [options]``.

Commands
  divergence P Q --divergence NAME   value of D(p, q) for two JSON pmf files
  metric --config PATH               closed-form vs finite-difference metrics
  connections --config PATH          connection tensors and duality residuals
  crlb --config PATH                 Cramer-Rao gaps / efficiency certificates
  counterexample --config PATH       eta-coordinate identity, witness, escort correspondence

Exit codes: 0 all checks pass, 2 usage or config error, 3 a mathematical check failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import crlb, eguchi, families
from .distributions import EscortMap, ParametricModel, as_pmf, simplex_chart
from .divergences import DivergenceSpec, get_generator
from .errors import ConfigError, IgeoError

SCHEMA = "igeo-config/1"
EXIT_OK, EXIT_USAGE, EXIT_CHECK = 0, 2, 3
CONFIG_FIELDS = {"schema", "family", "divergence", "theta_grid", "alpha_list", "fd_step",
                 "tolerances", "output", "estimator"}
TOLERANCE_FIELDS = {"metric", "duality", "gap"}
DEFAULT_TOLERANCES = {"metric": 1e-5, "duality": 1e-3, "gap": 1e-8}
CSV_COLUMNS = ["instance_id", "theta", "alpha", "quantity", "value"]
CORRESPONDENCE_TOL = 1e-12
MAX_CONDITION = 1e12

log = logging.getLogger("igeo")


# configuration ----------------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    family: dict
    divergence: Optional[str]
    theta_grid: list
    alpha_list: list
    fd_step: float
    tolerances: dict
    output: dict
    estimator: Optional[dict]
    raw: dict = field(repr=False)


def _positive(value, name):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if not np.isfinite(v) or v <= 0:
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return v


def _theta_grid(spec):
    """Explicit list of vectors, {"linspace": [start, stop, num]} (k = 1) or {"random": n}."""
    if isinstance(spec, list):
        return [np.atleast_1d(np.asarray(t, dtype=float)).tolist() for t in spec]
    if isinstance(spec, dict) and set(spec) == {"linspace"}:
        start, stop, num = spec["linspace"]
        return [[float(t)] for t in np.linspace(start, stop, int(num))]
    if isinstance(spec, dict) and set(spec) <= {"random", "min_mass"}:
        return {"random": int(spec["random"]), "min_mass": float(spec.get("min_mass", 0.05))}
    raise ConfigError(f"theta_grid must be a list of vectors, {{'linspace': [a, b, n]}} or "
                      f"{{'random': n}}, got {spec!r}")


def load_config(raw: dict, seed: int = 0) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if raw.get("schema") != SCHEMA:
        raise ConfigError(f"config 'schema' must be {SCHEMA!r}, got {raw.get('schema')!r}")
    if "family" not in raw or "theta_grid" not in raw:
        raise ConfigError("config needs 'family' and 'theta_grid'")
    tol = dict(DEFAULT_TOLERANCES)
    given = raw.get("tolerances", {})
    if not isinstance(given, dict) or set(given) - TOLERANCE_FIELDS:
        raise ConfigError(f"tolerances accepts only {sorted(TOLERANCE_FIELDS)}")
    tol.update({k: _positive(v, f"tolerances.{k}") for k, v in given.items()})
    alphas = raw.get("alpha_list", [])
    if not isinstance(alphas, list):
        raise ConfigError("alpha_list must be a list")
    alphas = [_positive(a, "alpha_list entry") for a in alphas]
    output = raw.get("output", {})
    if not isinstance(output, dict) or set(output) - {"path", "format"}:
        raise ConfigError("output accepts only 'path' and 'format'")
    if output.get("format", "json") not in ("json", "csv"):
        raise ConfigError("output.format must be json or csv")
    grid = _theta_grid(raw["theta_grid"])
    cfg = ExperimentConfig(raw["family"], raw.get("divergence"), grid, alphas,
                           _positive(raw.get("fd_step", eguchi.METRIC_STEP), "fd_step"),
                           tol, output, raw.get("estimator"), raw)
    if isinstance(grid, dict):
        cfg.theta_grid = _random_thetas(cfg, grid, seed)
    return cfg


def _random_thetas(cfg, spec, seed):
    rng = np.random.default_rng(seed)
    fam = cfg.family
    if fam.get("kind") == "simplex":
        M = int(fam.get("M", 1))
        out = []
        while len(out) < spec["random"]:
            p = rng.dirichlet(np.ones(M + 1))
            if p.min() >= spec["min_mass"]:
                out.append(p[1:].tolist())
        return out
    k = len(np.atleast_2d(fam.get("features", fam.get("h", [[0]]))))
    return [(0.1 * rng.standard_normal(k)).tolist() for _ in range(spec["random"])]


def build_model(family: dict, alpha: Optional[float] = None) -> ParametricModel:
    """Model for one instance; ``alpha`` overrides the order stored in a family spec."""
    if not isinstance(family, dict) or "kind" not in family:
        raise ConfigError("family must be an object with a 'kind'")
    kind = family["kind"]
    try:
        if kind == "simplex":
            if set(family) - {"kind", "M"}:
                raise ConfigError("simplex family accepts only 'M'")
            return simplex_chart(family.get("M", 1))
        if kind in families.KINDS:
            return families.family_model(family_spec(family, alpha))
        if kind == "exponential_escort":
            if set(family) - {"kind", "c", "h", "alpha"}:
                raise ConfigError("exponential_escort family accepts 'c', 'h', 'alpha'")
            return families.exponential_escort_model(family["c"], family["h"],
                                                     family.get("alpha", 1.0))
    except KeyError as exc:
        raise ConfigError(f"family is missing field {exc}") from None
    raise ConfigError(f"unknown family kind {kind!r}")


def family_spec(family: dict, alpha: Optional[float] = None) -> families.FamilySpec:
    d = dict(family)
    if alpha is not None:
        d["alpha"] = alpha
    d.pop("theta", None)
    try:
        return families.FamilySpec.from_dict(d)
    except KeyError as exc:
        raise ConfigError(f"family is missing field {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def resolve_divergence(name: Optional[str], alpha: Optional[float]) -> DivergenceSpec:
    """Bare names (alpha, renyi, gen:<f>:escort) take their order from the alpha list."""
    if not name:
        raise ConfigError("config needs a 'divergence' for this command")
    try:
        if alpha is not None:
            if name == "alpha":
                return DivergenceSpec.kl() if alpha == 1 else DivergenceSpec.relative_alpha(alpha)
            if name == "renyi":
                return DivergenceSpec.kl() if alpha == 1 else DivergenceSpec.renyi(alpha)
            head, _, rest = name.partition(":")
            if head == "gen" and rest.endswith(":escort"):
                F = EscortMap.identity() if alpha == 1 else EscortMap.alpha_escort(alpha)
                return DivergenceSpec.generalized(get_generator(rest[:-len(":escort")]), F)
        if name in ("alpha", "renyi") or name.endswith(":escort"):
            raise ConfigError(f"divergence {name!r} needs an alpha_list")
        return DivergenceSpec.parse(name)
    except ConfigError:
        raise
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad divergence {name!r}: {exc}") from None


def instances(cfg: ExperimentConfig):
    alphas = cfg.alpha_list or [None]
    return [{"instance_id": i, "theta": list(t), "alpha": a}
            for i, (t, a) in enumerate(itertools.product(cfg.theta_grid, alphas))]


def validate_instances(cfg, command):
    for inst in instances(cfg):
        model = build_model(cfg.family, inst["alpha"] if command == "counterexample" else None)
        if not model.in_domain(inst["theta"]):
            raise ConfigError(f"theta {inst['theta']} is outside the family domain")
        if command in ("metric", "connections"):
            resolve_divergence(cfg.divergence, inst["alpha"])


# per-instance work ------------------------------------------------------------------------------

def _metric_instance(cfg, inst):
    S = build_model(cfg.family)
    D = resolve_divergence(cfg.divergence, inst["alpha"])
    rep = eguchi.metric_report(D, S, inst["theta"], h=cfg.fd_step)
    g_ref = rep.g_closed if rep.g_closed is not None else rep.g_fd
    tol = max(cfg.tolerances["metric"], 1e-3 * float(np.max(np.abs(g_ref))))
    singular = not (rep.min_eigenvalue > 0 and rep.condition_number <= MAX_CONDITION)
    ok = (rep.max_abs_diff is None or rep.max_abs_diff <= tol) and not singular
    q = rep.to_dict()
    q.pop("theta")
    q.update(tolerance=tol, singular=singular)
    return ok, q


def _connections_instance(cfg, inst):
    S = build_model(cfg.family)
    D = resolve_divergence(cfg.divergence, inst["alpha"])
    theta = np.asarray(inst["theta"], dtype=float)
    gam, gam_star = eguchi.eguchi_connections_fd(D, S, theta)
    resid = float(np.max(np.abs(eguchi.duality_residual(D, S, theta))))
    return resid <= cfg.tolerances["duality"], {
        "divergence": D.name, "gamma": gam.gamma.tolist(), "gamma_star": gam_star.gamma.tolist(),
        "duality_max_residual": resid}


def _estimator_for(cfg, S, theta):
    spec = cfg.estimator or {"kind": "indicator"}
    kind = spec.get("kind")
    if kind == "indicator":
        if S.size != S.k + 1:
            raise ConfigError("the indicator estimator needs the simplex chart")
        return crlb.indicator_estimator(theta)
    if kind == "values":
        return crlb.Estimator(spec["values"], theta, "p")
    raise ConfigError(f"unknown estimator kind {kind!r}")


def _crlb_instance(cfg, inst):
    theta = np.asarray(inst["theta"], dtype=float)
    fam = cfg.family
    if fam.get("kind") == "exponential_escort":
        a = fam.get("alpha", 1.0)
        S = build_model(fam)
        F = EscortMap.identity() if a == 1 else EscortMap.alpha_escort(a)
        rep = crlb.exponential_escort_efficiency(S, theta, F, fam["c"], fam["h"],
                                                 families.log_partition(fam["c"], fam["h"]))
        q = rep.to_dict()
        q.pop("theta")
        return rep.passes() and rep.crlb.efficient, q
    S = build_model(fam)
    a = inst["alpha"] if inst["alpha"] is not None else 1.0
    est = crlb.to_escort_estimator(_estimator_for(cfg, S, theta), S, theta, a)
    rep = crlb.alpha_crlb_report(S, theta, a, est)
    q = rep.to_dict()
    q.pop("theta")
    q["gap_norm"] = rep.gap_norm
    return rep.min_gap_eigenvalue >= -cfg.tolerances["gap"], q


def _counterexample_instance(cfg, inst):
    spec = family_spec(cfg.family, inst["alpha"])
    if spec.kind != "power_law":
        raise ConfigError("counterexample needs a power_law family")
    rep = families.counterexample_report(spec, inst["theta"])
    dev = families.escort_correspondence(spec).deviation(inst["theta"])
    q = rep.to_dict()
    q.pop("theta")
    q["escort_correspondence_deviation"] = dev
    return rep.identity_holds and dev <= CORRESPONDENCE_TOL, q


WORKERS = {"metric": _metric_instance, "connections": _connections_instance,
           "crlb": _crlb_instance, "counterexample": _counterexample_instance}


def run_instance(command, cfg, inst):
    rec = dict(inst)
    try:
        ok, q = WORKERS[command](cfg, inst)
        rec.update(passed=bool(ok), quantities=q)
    except ConfigError:
        raise
    except IgeoError as exc:
        # a failed mathematical precondition (bias, singular metric, ...) fails the instance
        rec.update(passed=False, quantities={}, error=f"{type(exc).__name__}: {exc}")
    log.info("instance %d theta=%s alpha=%s passed=%s", rec["instance_id"], rec["theta"],
             rec["alpha"], rec["passed"])
    return rec


def _run_star(args):
    return run_instance(*args)


def run(command, cfg: ExperimentConfig, parallel: int = 1) -> dict:
    validate_instances(cfg, command)
    jobs = [(command, cfg, inst) for inst in instances(cfg)]
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            records = list(pool.map(_run_star, jobs))
    else:
        records = [_run_star(j) for j in jobs]
    records.sort(key=lambda r: r["instance_id"])
    return {"command": command, "config": cfg.raw, "records": records, "summary": summarize(records)}


def summarize(records):
    worst = {}
    for r in records:
        for k, v in r.get("quantities", {}).items():
            if k in ("max_abs_diff", "duality_max_residual", "identity_residual",
                     "escort_correspondence_deviation", "witness") and isinstance(v, (int, float)):
                worst[k] = max(worst.get(k, v), v)
            if k == "min_gap_eigenvalue":
                worst[k] = min(worst.get(k, v), v)
    passed = sum(r["passed"] for r in records)
    return {"instances": len(records), "passed": passed, "failed": len(records) - passed,
            "worst": worst}


# serialization ----------------------------------------------------------------------------------

def _flatten(prefix, value):
    if isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            yield from _flatten(f"{prefix}[{i}]", v)
    elif isinstance(value, dict):
        for k, v in value.items():
            yield from _flatten(f"{prefix}.{k}" if prefix else k, v)
    elif isinstance(value, (bool, int, float)) or value is None:
        yield prefix, value


def to_csv(result: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in result["records"]:
        theta = ";".join(repr(float(t)) for t in r["theta"])
        alpha = "" if r["alpha"] is None else repr(float(r["alpha"]))
        rows = [("passed", r["passed"])] + list(_flatten("", r.get("quantities", {})))
        for name, value in rows:
            if isinstance(value, bool):
                value = int(value)
            w.writerow([r["instance_id"], theta, alpha, name,
                        "" if value is None else repr(float(value))])
    return buf.getvalue()


def read_csv(text: str) -> list:
    """Parse :func:`to_csv` output back into rows with numeric fields."""
    rows = []
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    for row in reader:
        rows.append({"instance_id": int(row["instance_id"]),
                     "theta": [float(t) for t in row["theta"].split(";")],
                     "alpha": None if row["alpha"] == "" else float(row["alpha"]),
                     "quantity": row["quantity"],
                     "value": None if row["value"] == "" else float(row["value"])})
    return rows


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def emit(result: dict, fmt: str, out: Optional[str]):
    text = to_csv(result) if fmt == "csv" else json.dumps(result, indent=2, default=_json_default) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# entry point ------------------------------------------------------------------------------------

def _read_pmf(path):
    try:
        with open(path) as fh:
            return as_pmf(json.load(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read pmf from {path}: {exc}") from None


def cmd_divergence(args) -> int:
    p, q = _read_pmf(args.p), _read_pmf(args.q)
    try:
        D = DivergenceSpec.parse(args.divergence)
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    value = D(p, q)
    result = {"command": "divergence", "divergence": D.name, "p": p.tolist(), "q": q.tolist(),
              "value": value}
    if args.format == "csv":
        text = "divergence,value\n" + f"{D.name},{value!r}\n"
    else:
        text = json.dumps(result) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    cfg = load_config(raw, seed=args.seed)
    if args.fd_step is not None:
        cfg.fd_step = _positive(args.fd_step, "--fd-step")
    if args.tol_metric is not None:
        cfg.tolerances["metric"] = _positive(args.tol_metric, "--tol-metric")
    if args.tol_gap is not None:
        cfg.tolerances["gap"] = _positive(args.tol_gap, "--tol-gap")
    result = run(args.command, cfg, parallel=args.parallel)
    fmt = args.format or cfg.output.get("format", "json")
    emit(result, fmt, args.out or cfg.output.get("path"))
    s = result["summary"]
    log.info("%s: %d/%d instances passed", args.command, s["passed"], s["instances"])
    return EXIT_OK if s["failed"] == 0 else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default=None)

    parser = argparse.ArgumentParser(prog="igeo", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("divergence", parents=[common], help="D(p, q) for two JSON pmf files")
    d.add_argument("p")
    d.add_argument("q")
    d.add_argument("--divergence", "-d", required=True,
                   help="kl | alpha:<a> | renyi:<l> | csiszar:<f> | gen:<f>:<F>")
    d.set_defaults(func=cmd_divergence)

    for name, text in (("metric", "closed-form vs finite-difference metrics"),
                       ("connections", "connections and duality residuals"),
                       ("crlb", "Cramer-Rao gaps and efficiency"),
                       ("counterexample", "eta identity, non-duality witness, escort correspondence")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--fd-step", type=float)
        p.add_argument("--tol-metric", type=float)
        p.add_argument("--tol-gap", type=float)
        p.add_argument("--parallel", type=int, default=1, help="worker processes")
        p.add_argument("--seed", type=int, default=0, help="seed for random theta grids")
        p.set_defaults(func=cmd_experiment)
    return parser


def _setup_logging():
    level = {"off": logging.CRITICAL + 1, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("IGEO_LOG", "off").lower(), logging.CRITICAL + 1)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(level)


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "divergence" and args.format is None:
        args.format = "json"
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"igeo: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IgeoError as exc:
        print(f"igeo: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
