"""Command-line harness: one experiment per invocation, JSON config in, reports out.

    tugwar <subcommand> --config cfg.json [--seed N] [--out DIR] [--workers K] [--tol X] [--force]
    tugwar compare REPORT_A REPORT_B [--tol X]

Exit codes: 0 ok, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import datetime as _dt
import json
import logging
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import boundary as bd
from . import geometry as geo
from .estimator import (estimate_measure, estimate_value, perturbation_experiment,
                        staged_escape_experiment, union_experiments)
from .game import GameParams
from .solver import NonConvergence, PreconditionError, SolverConfig, SolverError, solve
from .strategies import (PlanError, RandomMoves, dpp_greedy, pull_toward, select_subsequence,
                         solve_stage, stage_infimum)

log = logging.getLogger(__name__)

EXPERIMENTS = ("solve", "simulate", "measure", "perturb", "theta", "escape", "union")
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


# -- schema --------------------------------------------------------------------------

_point = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 3}
_points = {"type": "array", "items": _point}
_num_list = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}

_set_schema = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["point", "finite_point_set", "point_sequence", "arc", "sphere_cap",
                          "union", "empty"]},
        "point": _point,
        "points": _points,
        "members": {"type": "array", "items": {"$ref": "#/$defs/set"}},
    },
}

_payoff_schema = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["constant", "linear", "angular_cos", "mollified_indicator",
                          "half_indicator"]},
        "value": {"type": "number"},
        "index": {"type": "integer", "minimum": 0, "maximum": 2},
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "E": {"$ref": "#/$defs/set"},
    },
}

_strategy_schema = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["dpp_greedy", "pull_toward", "random"]},
        "sense": {"enum": ["maximize", "minimize"]},
        "target": _point,
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"set": _set_schema},
    "type": "object",
    "required": ["experiment", "domain"],
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "domain": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": sorted(geo._BUILDERS)}},
        },
        "payoff": _payoff_schema,
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p": {"type": "number", "exclusiveMinimum": 1},
                "eps": {"type": "number", "exclusiveMinimum": 0},
                "max_steps": {"type": "integer", "minimum": 1},
            },
        },
        "strategies": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"I": _strategy_schema, "II": _strategy_schema},
        },
        "schedule": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"eps": _num_list, "delta": _num_list},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "h_ratio": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.25},
                "directions": {"type": ["integer", "null"], "minimum": 4},
                "magnitudes": {"type": "array", "items": {"type": "number"}},
                "noise_points": {"type": "integer", "minimum": 2},
                "candidate_samples": {"type": "integer", "minimum": 0},
                "max_iterations": {"type": "integer", "minimum": 1},
                "method": {"enum": ["newton", "jacobi"]},
                "max_newton": {"type": "integer", "minimum": 0},
                "jacobi_burst": {"type": "integer", "minimum": 1},
                "warm_start": {"type": "boolean"},
                "warm_start_nodes": {"type": "integer", "minimum": 0},
            },
        },
        "points": _points,
        "x0": _point,
        "E": {"$ref": "#/$defs/set"},
        "F": {"$ref": "#/$defs/set"},
        "E_list": {"type": "array", "items": {"$ref": "#/$defs/set"}},
        "overrides": {"type": "array", "items": {
            "type": "array", "prefixItems": [_point, {"type": "number"}], "minItems": 2, "maxItems": 2}},
        "plan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "candidates": _points,
                "x0": _point,
                "stages": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "i": {"type": "integer", "minimum": 1},
                "delta": {"type": "number", "exclusiveMinimum": 0},
                "x_start": _point,
                "stage_eps": {"type": "number", "exclusiveMinimum": 0},
                "samples": {"type": "integer", "minimum": 8},
            },
        },
        "tolerance": {"type": "number", "minimum": 0},
        "n_samples": {"type": "integer", "minimum": 1},
        "block_size": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "output": {"type": "string"},
        "workers": {"type": "integer", "minimum": 1},
    },
}


def _path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        missing = err.message.split("'")[1] if "'" in err.message else ""
        parts.append(missing)
    if err.validator == "additionalProperties" and "'" in err.message:
        parts.append(err.message.split("'")[1])
    return ".".join(p for p in parts if p)


def validate(raw: dict) -> None:
    v = jsonschema.Draft202012Validator(SCHEMA)
    errs = sorted(v.iter_errors(raw), key=lambda e: (len(list(e.absolute_path)), str(e.absolute_path)))
    if errs:
        e = jsonschema.exceptions.best_match(errs) or errs[0]
        raise ConfigError(_path(e), e.message)


# -- config --------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    experiment: str
    domain: dict
    payoff: dict | None = None
    params: dict = field(default_factory=dict)
    strategies: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    points: list | None = None
    x0: list | None = None
    E: dict | None = None
    F: dict | None = None
    E_list: list | None = None
    overrides: list | None = None
    plan: dict | None = None
    tolerance: float | None = None
    n_samples: int = 1000
    block_size: int = 1000
    seed: int = 0
    tol: float = 1e-6
    output: str = "results"
    workers: int = 1

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        validate(raw)
        return cls(**copy.deepcopy(raw))

    def to_dict(self) -> dict:
        return {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self)
                if getattr(self, f.name) is not None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("", "config must be a JSON object")
        return cls.from_dict(raw)


# -- builders ------------------------------------------------------------------------

def build_domain(desc: dict) -> geo.Domain:
    kw = {k: v for k, v in desc.items() if k != "kind"}
    try:
        return geo.make_domain(desc["kind"], **kw)
    except TypeError as exc:
        raise ConfigError("domain", str(exc)) from exc
    except geo.DomainError as exc:
        raise ConfigError("domain", str(exc)) from exc


def build_set(desc: dict, path: str = "E") -> bd.BoundarySet:
    k = desc["kind"]
    try:
        if k == "point":
            return bd.point(desc["point"])
        if k == "finite_point_set":
            return bd.finite_point_set(desc["points"])
        if k == "empty":
            return bd.empty_set()
        if k == "point_sequence":
            return bd.point_sequence_set(desc["origin"], desc["scale"], desc["ratio"], desc["direction"],
                                         desc["k_max"], desc.get("include_limit", False))
        if k == "arc":
            return bd.arc(desc.get("center", (0.0, 0.0)), desc.get("radius", 1.0),
                          desc["theta1"], desc["theta2"])
        if k == "sphere_cap":
            return bd.sphere_cap(desc.get("center", (0.0, 0.0, 0.0)), desc.get("radius", 1.0),
                                 desc.get("axis", (0.0, 0.0, 1.0)), desc["half_angle"])
        if k == "union":
            return bd.union(*[build_set(m, f"{path}.members.{i}") for i, m in enumerate(desc["members"])])
    except KeyError as exc:
        raise ConfigError(path, f"missing key {exc}") from exc
    except bd.BoundaryError as exc:
        raise ConfigError(path, str(exc)) from exc
    raise ConfigError(f"{path}.kind", f"unknown set kind {k!r}")


def build_payoff(desc: dict | None, domain: geo.Domain) -> bd.BoundaryFunction:
    if desc is None:
        raise ConfigError("payoff", "this experiment needs a payoff")
    k = desc["kind"]
    try:
        if k == "constant":
            return bd.Constant(domain, float(desc.get("value", 0.0)))
        if k == "linear":
            return bd.LinearCoordinate(domain, int(desc.get("index", 0)), float(desc.get("scale", 1.0)),
                                       float(desc.get("offset", 0.0)))
        if k == "angular_cos":
            return bd.angular_profile(domain, np.cos)
        if k == "half_indicator":
            E = bd.arc(domain.center.tolist(), domain.bounding_radius, 0.0, math.pi)
            return bd.mollified_indicator(domain, E, float(desc.get("delta", 0.1)))
        if k == "mollified_indicator":
            if "E" not in desc:
                raise ConfigError("payoff.E", "mollified_indicator needs a set E")
            return bd.mollified_indicator(domain, build_set(desc["E"], "payoff.E"), float(desc["delta"]))
    except KeyError as exc:
        raise ConfigError("payoff", f"missing key {exc}") from exc
    except bd.BoundaryError as exc:
        raise ConfigError("payoff", str(exc)) from exc
    raise ConfigError("payoff.kind", f"unknown payoff kind {k!r}")


def build_params(cfg: ExperimentConfig, domain: geo.Domain) -> GameParams:
    p = cfg.params
    for key in ("p", "eps"):
        if key not in p:
            raise ConfigError(f"params.{key}", "required")
    try:
        return GameParams(domain.n, float(p["p"]), float(p["eps"]), int(p.get("max_steps", 1_000_000)))
    except ValueError as exc:
        raise ConfigError("params", str(exc)) from exc


def build_solver(cfg: ExperimentConfig) -> SolverConfig:
    kw = dict(cfg.solver)
    if "magnitudes" in kw:
        kw["magnitudes"] = tuple(kw["magnitudes"])
    return SolverConfig(tol=cfg.tol, **kw)


def _strategy(desc: dict, role: str, field_):
    k = desc["kind"]
    if k == "pull_toward":
        if "target" not in desc:
            raise ConfigError(f"strategies.{role}.target", "required for pull_toward")
        return pull_toward(desc["target"])
    if k == "random":
        return RandomMoves()
    default = "maximize" if role == "I" else "minimize"
    return dpp_greedy(field_(), desc.get("sense", default))


def _require(cfg, name):
    v = getattr(cfg, name)
    if v is None:
        raise ConfigError(name, f"required for experiment {cfg.experiment!r}")
    return v


def _schedule(cfg):
    s = cfg.schedule
    for key in ("eps", "delta"):
        if key not in s:
            raise ConfigError(f"schedule.{key}", "required")
    return s["eps"], s["delta"]


def _p(cfg):
    if "p" not in cfg.params:
        raise ConfigError("params.p", "required")
    return float(cfg.params["p"])


# -- experiments -----------------------------------------------------------------------

def _tolist(x):
    return np.asarray(x, float).tolist()


def run_experiment(cfg: ExperimentConfig) -> tuple[dict, dict]:
    """Run one experiment; returns (report body, extra files name -> text)."""
    domain = build_domain(cfg.domain)
    files: dict = {}
    kind = cfg.experiment
    solver_cfg = build_solver(cfg)

    if kind == "solve":
        f = build_payoff(cfg.payoff, domain)
        params = build_params(cfg, domain)
        fld = solve(domain, f, params, solver_cfg)
        body = {"summary": fld.summary(), "residual_check": fld.residual_check()}
        if cfg.points:
            body["points"] = cfg.points
            body["values"] = _tolist(fld.evaluate(np.asarray(cfg.points, float)))
        files["field.txt"] = fld.to_text()
        return body, files

    if kind == "simulate":
        f = build_payoff(cfg.payoff, domain)
        params = build_params(cfg, domain)
        pts = cfg.points or ([cfg.x0] if cfg.x0 else None)
        if not pts:
            raise ConfigError("points", "simulate needs points or x0")
        cache = {}

        def field_():
            if "f" not in cache:
                cache["f"] = solve(domain, f, params, solver_cfg)
            return cache["f"]

        sI = _strategy(cfg.strategies.get("I", {"kind": "dpp_greedy"}), "I", field_)
        sII = _strategy(cfg.strategies.get("II", {"kind": "dpp_greedy"}), "II", field_)
        reps = [estimate_value(domain, f, sI, sII, x, params, cfg.n_samples, cfg.seed, cfg.block_size)
                for x in pts]
        return {"points": pts, "values": [r.mean for r in reps],
                "estimates": [r.to_dict() for r in reps]}, files

    if kind == "measure":
        E = build_set(_require(cfg, "E"))
        eps, deltas = _schedule(cfg)
        table = estimate_measure(domain, E, _require(cfg, "x0"), eps, deltas, cfg.n_samples if
                                 cfg.n_samples > 1 else 0, cfg.seed, p=_p(cfg), config=solver_cfg)
        files["measure.csv"] = table.to_csv()
        return {"table": table.to_dict(), "monotone": table.is_monotone(2 * cfg.tol)}, files

    if kind == "perturb":
        f = build_payoff(cfg.payoff, domain)
        params = build_params(cfg, domain)
        overrides = [(q, v) for q, v in (cfg.overrides or [])]
        sI = _strategy(cfg.strategies.get("I", {"kind": "random"}), "I", lambda: solve(domain, f, params, solver_cfg))
        sII = _strategy(cfg.strategies.get("II", {"kind": "random"}), "II",
                        lambda: solve(domain, f, params, solver_cfg))
        rep = perturbation_experiment(domain, f, overrides, _require(cfg, "x0"), params, cfg.n_samples,
                                      cfg.seed, sI, sII, cfg.block_size)
        return rep.to_dict(), files

    if kind == "theta":
        plan_cfg = _require(cfg, "plan")
        plan = _plan(plan_cfg, domain)
        eps_s = float(plan_cfg.get("stage_eps", 0.02))
        stages = plan_cfg.get("stages", [1, 2])
        cache: dict = {}
        thetas = []
        for k in stages:
            if k not in plan.stages:
                raise ConfigError("plan.stages", f"stage {k} outside 1..{plan.K - 1}")
            sol = solve_stage(plan, k, _p(cfg), eps_s, solver_cfg, cache)
            thetas.append(stage_infimum(sol, int(plan_cfg.get("samples", 720))))
        return {"plan": plan.to_dict(), "stages": stages, "theta": thetas, "stage_eps": eps_s}, files

    if kind == "escape":
        plan_cfg = _require(cfg, "plan")
        for key in ("i", "delta", "x_start"):
            if key not in plan_cfg:
                raise ConfigError(f"plan.{key}", "required for escape")
        cand = plan_cfg.get("candidates", domain.punctures.tolist())
        x0 = plan_cfg.get("x0", None if domain.accumulation is None else domain.accumulation.tolist())
        if x0 is None:
            raise ConfigError("plan.x0", "required when the domain has no accumulation point")
        rep = staged_escape_experiment(
            domain, cand, x0, plan_cfg["x_start"], p=_p(cfg), i=plan_cfg["i"], delta=plan_cfg["delta"],
            stage_eps=float(plan_cfg.get("stage_eps", 0.02)), n_samples=cfg.n_samples, seed=cfg.seed,
            config=solver_cfg, max_steps=int(cfg.params.get("max_steps", 20_000)),
            block_size=cfg.block_size)
        return rep.to_dict(), files

    if kind == "union":
        eps, deltas = _schedule(cfg)
        E_list = [build_set(e, f"E_list.{i}") for i, e in enumerate(cfg.E_list or [])]
        F = build_set(cfg.F, "F") if cfg.F else None
        rep = union_experiments(domain, E_list, F, _require(cfg, "x0"), p=_p(cfg), eps_list=eps,
                                delta_list=deltas, tolerance=cfg.tolerance if cfg.tolerance is not None
                                else 0.05, config=solver_cfg)
        for name, t in (("union_E", rep.union_E), ("F", rep.F), ("E_and_F", rep.E_and_F)):
            if t is not None:
                files[f"{name}.csv"] = t.to_csv()
        return rep.to_dict(), files

    raise ConfigError("experiment", f"unknown experiment {kind!r}")  # pragma: no cover


def _plan(plan_cfg: dict, domain: geo.Domain):
    cand = plan_cfg.get("candidates", domain.punctures.tolist())
    x0 = plan_cfg.get("x0", None if domain.accumulation is None else domain.accumulation.tolist())
    if x0 is None:
        raise ConfigError("plan.x0", "required when the domain has no accumulation point")
    try:
        return select_subsequence(cand, x0)
    except PlanError as exc:
        raise ConfigError("plan.candidates", str(exc)) from exc


# -- reports ---------------------------------------------------------------------------

STOCHASTIC_KEYS = frozenset({
    "seed", "mean", "stderr", "ci95", "values", "estimate", "estimates", "difference", "mean_f",
    "mean_g", "hit_rate", "near_rate", "termination_rate", "mean_steps", "margin", "escape",
    "strategy_failures", "extrapolated",
})


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def make_report(cfg: ExperimentConfig, body: dict, workers: int = 1) -> dict:
    header = {"tool": "tugwar", "version": __version__,
              "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
              "workers": workers}
    return {"header": header, "experiment": cfg.experiment, "config": cfg.to_dict(),
            "result": _jsonable(body)}


def write_outputs(out: Path, report: dict, files: dict, force: bool) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    target = out / "report.json"
    paths = [target] + [out / name for name in files]
    clash = [p for p in paths if p.exists()]
    if clash and not force:
        raise ConfigError("output", f"{clash[0]} exists; pass --force to overwrite")
    target.write_text(json.dumps(report, indent=2) + "\n")
    for name, text in files.items():
        (out / name).write_text(text)
    return target


# -- compare ---------------------------------------------------------------------------

def _walk(a, b, path, out, tol):
    if isinstance(a, dict) and isinstance(b, dict):
        for k in sorted(set(a) | set(b)):
            if k not in a or k not in b:
                out.append({"path": f"{path}.{k}".lstrip("."), "a": a.get(k), "b": b.get(k),
                            "abs_diff": None})
            else:
                _walk(a[k], b[k], f"{path}.{k}", out, tol)
        return
    if isinstance(a, list) and isinstance(b, list) and len(a) == len(b):
        for i, (x, y) in enumerate(zip(a, b)):
            _walk(x, y, f"{path}.{i}", out, tol)
        return
    num = (int, float)
    if isinstance(a, num) and isinstance(b, num) and not isinstance(a, bool) and not isinstance(b, bool):
        d = abs(float(a) - float(b))
        if d > tol:
            out.append({"path": path.lstrip("."), "a": a, "b": b, "abs_diff": d})
        return
    if a != b:
        out.append({"path": path.lstrip("."), "a": a, "b": b, "abs_diff": None})


# where results were written and how many workers ran do not change them
BOOKKEEPING_PATHS = frozenset({"config.output", "config.workers"})


def is_stochastic(path: str) -> bool:
    return any(part in STOCHASTIC_KEYS for part in path.split("."))


def compare(report_a: dict, report_b: dict, tol: float = 0.0) -> dict:
    """Field-by-field diff of two reports (headers, output path and worker
    count are ignored)."""
    ka, kb = report_a.get("experiment"), report_b.get("experiment")
    if ka != kb:
        if {ka, kb} == {"solve", "simulate"}:
            va = np.asarray(report_a["result"]["values"], float)
            vb = np.asarray(report_b["result"]["values"], float)
            if report_a["result"]["points"] != report_b["result"]["points"] or va.shape != vb.shape:
                raise ValueError("solve and simulate reports must share their evaluation points")
            d = np.abs(va - vb)
            return {"kinds": [ka, kb], "diffs": [], "point_abs_diff": d.tolist(),
                    "max_abs_diff": float(d.max()), "stochastic_only": True}
        raise ValueError(f"cannot compare a {ka!r} report with a {kb!r} report")
    diffs: list = []
    for key in ("experiment", "config", "result"):
        _walk(report_a.get(key), report_b.get(key), key, diffs, tol)
    diffs = [d for d in diffs if d["path"] not in BOOKKEEPING_PATHS]
    numeric = [d["abs_diff"] for d in diffs if d["abs_diff"] is not None]
    return {"kinds": [ka, kb], "diffs": diffs,
            "max_abs_diff": max(numeric) if numeric else 0.0,
            "stochastic_only": all(is_stochastic(d["path"]) for d in diffs)}


# -- entry point -------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tugwar", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        article = "an" if name[0] in "aeiou" else "a"
        sp = sub.add_parser(name, help=f"run {article} {name} experiment")
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", type=Path)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--force", action="store_true", help="overwrite existing outputs")
        sp.add_argument("-v", "--verbose", action="store_true")
    cp = sub.add_parser("compare", help="diff two reports")
    cp.add_argument("a", type=Path)
    cp.add_argument("b", type=Path)
    cp.add_argument("--tol", type=float, default=0.0)
    return ap


def load_config(path: Path, command: str, overrides: dict) -> ExperimentConfig:
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError("", f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("", "config must be a JSON object")
    raw.setdefault("experiment", command)
    if raw["experiment"] != command:
        raise ConfigError("experiment", f"config is for {raw['experiment']!r}, not {command!r}")
    for key, value in overrides.items():
        if value is not None:
            raw[key] = value
    return ExperimentConfig.from_dict(raw)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "compare":
        try:
            a = json.loads(args.a.read_text())
            b = json.loads(args.b.read_text())
            print(json.dumps(compare(a, b, args.tol), indent=2))
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.command,
                          {"seed": args.seed, "tol": args.tol, "workers": args.workers,
                           "output": None if args.out is None else str(args.out)})
        body, files = run_experiment(cfg)
        report = make_report(cfg, body, cfg.workers)
        path = write_outputs(Path(cfg.output), report, files, args.force)
    except ConfigError as exc:
        print(f"config error at {exc.path or '<root>'}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergence as exc:
        print(f"numerical failure: {exc} (residual {exc.residual:.3e})", file=sys.stderr)
        return EXIT_NUMERIC
    except PreconditionError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(path)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
