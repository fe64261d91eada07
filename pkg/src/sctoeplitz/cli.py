"""Command line front end.

Every command prints one JSON report on stdout.  Reports carry a hash of
the effective configuration, the tolerances in force and a provenance tag
(``exact`` for rational arithmetic, ``quadrature`` for numerical results).
Errors go to stderr as JSON.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 divergence verdict from a command that did not expect one.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import classifier
from .bergman import KernelContext, WhitneyQuadrature, kernel, szego
from .geometry import GeometryError, Polygon, check_whitney_invariants, named_polygon, whitney_decompose
from .quadrature import QuadratureError, QuadratureSpec
from .scmap import ConformalMap, SCError, corner_domain
from .toeplitz import (DIVERGENCE_MARGIN, apply_classical, apply_generalized, check_symbol_condition,
                       check_symbol_condition_weighted, divergence_probe, e0a_integrand, example_53_identity,
                       example_54_theta_integral, example_e0b_boundedness, polynomial_function,
                       psi_power_integrand, symbol_from_config)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DIVERGENT = 0, 2, 3, 4
EXPERIMENTS = ("e0a", "e0b", "e1a", "e1b", "e2-closed-form", "e3-szego")


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# -- configuration ------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    polygon: str | list | None = None
    p: float | None = None
    symbol: dict | None = None
    quadrature: dict = field(default_factory=dict)
    max_level: int = 5
    output: str | None = None
    csv: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.p is not None and not self.p > 1:
            raise ConfigError("p must exceed 1")
        if self.max_level < 0:
            raise ConfigError("max_level must be nonnegative")

    @classmethod
    def load(cls, path: str | None) -> "ExperimentConfig":
        if path is None:
            return cls()
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        unknown = set(doc) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if isinstance(doc.get("polygon"), str) and Path(doc["polygon"]).suffix == ".json":
            base = Path(path).parent
            poly_path = base / doc["polygon"]
            try:
                doc["polygon"] = json.loads(poly_path.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read polygon file {poly_path}: {exc}") from exc
        return cls(**doc)

    def quad_spec(self) -> QuadratureSpec:
        try:
            return QuadratureSpec.from_config(self.quadrature)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def resolve_polygon(src) -> Polygon:
    if src is None:
        raise ConfigError("a polygon is required")
    try:
        if isinstance(src, str):
            if src.strip().startswith("["):
                src = json.loads(src)
            else:
                return named_polygon(src)
        if isinstance(src, dict):
            return Polygon.from_json(src)
        return Polygon(np.asarray(src, dtype=float))
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    except (GeometryError, ValueError) as exc:
        raise ConfigError(f"invalid polygon: {exc}") from exc


def _point(text: str) -> complex:
    try:
        parts = [float(x) for x in text.replace("i", "").split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad point {text!r}; use re,im") from exc
    if len(parts) == 1:
        return complex(parts[0], 0.0)
    if len(parts) != 2:
        raise ConfigError(f"bad point {text!r}; use re,im")
    return complex(parts[0], parts[1])


def _int_range(text: str) -> list[int]:
    try:
        if ".." in text:
            a, b = text.split("..")
            return list(range(int(a), int(b) + 1))
        return [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad integer range {text!r}") from exc


# -- report emission ----------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if hasattr(obj, "to_json"):
        return _jsonable(obj.to_json())
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    return obj


def config_hash(doc) -> str:
    text = json.dumps(_jsonable(doc), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def emit(command: str, effective: dict, result, provenance: str, tolerances: dict,
         output: str | None = None, rows: list | None = None, csv_path: str | None = None) -> str:
    report = {
        "command": command,
        "config": _jsonable(effective),
        "config_hash": config_hash(effective),
        "provenance": provenance,
        "tolerances": _jsonable(tolerances),
        "result": _jsonable(result),
    }
    text = json.dumps(report, sort_keys=True, indent=2)
    if output:
        Path(output).write_text(text + "\n")
    if csv_path and rows:
        keys = sorted({k for r in rows for k in r})
        with open(csv_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys)
            writer.writeheader()
            for r in rows:
                writer.writerow({k: _jsonable(r.get(k)) for k in keys})
    print(text)
    return text


# -- subcommands ----------------------------------------------------------------------------


def cmd_map_solve(args, cfg: ExperimentConfig) -> int:
    poly = resolve_polygon(args.polygon or cfg.polygon)
    cmap = ConformalMap(poly)
    result = {"config": cmap.config.to_json(), "vertex_residual": cmap.vertex_residual(),
              "relative_residual": cmap.vertex_residual() / poly.diameter, "min_gap": cmap.config.min_gap()}
    emit("map-solve", {"polygon": poly.to_json()}, result, "quadrature", {"newton": cmap.newton_tol},
         args.output or cfg.output)
    return EXIT_OK


def cmd_whitney(args, cfg: ExperimentConfig) -> int:
    poly = resolve_polygon(args.polygon or cfg.polygon)
    level = args.max_level if args.max_level is not None else cfg.max_level
    dec = whitney_decompose(poly, level)
    checks = check_whitney_invariants(poly, dec, samples=args.samples, seed=args.seed)
    result = {"squares": dec.to_json(), "level_counts": dec.level_counts(), "collar": dec.collar, "checks": checks}
    emit("whitney", {"polygon": poly.to_json(), "max_level": level, "samples": args.samples, "seed": args.seed},
         result, "exact", {"distance_rel": 1e-12}, args.output or cfg.output)
    return EXIT_OK


def cmd_kernel(args, cfg: ExperimentConfig) -> int:
    poly = resolve_polygon(args.polygon or cfg.polygon)
    ctx = KernelContext(ConformalMap(poly))
    z, w = _point(args.z), _point(args.w)
    val = complex(np.asarray(kernel(ctx, np.array([z]), np.array([w])))[0])
    emit("kernel", {"polygon": poly.to_json(), "z": z, "w": w}, {"kernel": val}, "quadrature", {},
         args.output or cfg.output)
    return EXIT_OK


def cmd_toeplitz_apply(args, cfg: ExperimentConfig) -> int:
    poly = resolve_polygon(args.polygon or cfg.polygon)
    cmap = ConformalMap(poly)
    sym_doc = cfg.symbol or {"kind": args.symbol, "params": {}}
    try:
        a = symbol_from_config(sym_doc, poly, cmap)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad symbol: {exc}") from exc
    coeffs = cfg.params.get("f", [[0, 0], [0, 0], [1, 0]])
    f = polynomial_function([complex(*c) for c in coeffs])
    pts = cfg.params.get("z") or [list(map(float, args.z.split(",")))]
    z = np.array([complex(*c) for c in pts])
    level = args.max_level if args.max_level is not None else cfg.max_level
    quad = WhitneyQuadrature(cmap, whitney_decompose(poly, level))
    app = apply_generalized(a, f, quad, z, tol=args.tol)
    result = {"generalized": app}
    code = EXIT_OK
    if args.classical:
        cla = apply_classical(a, f, quad, z)
        result["classical"] = cla
        if cla["status"] == "divergent":
            code = EXIT_DIVERGENT
    emit("toeplitz-apply", {"polygon": poly.to_json(), "symbol": sym_doc, "f": coeffs, "z": z, "max_level": level,
                            "tol": args.tol, "classical": args.classical}, result, "quadrature",
         {"increment": args.tol}, args.output or cfg.output)
    return code


def cmd_classify(args, cfg: ExperimentConfig) -> int:
    try:
        verdict = classifier.classify(args.p, args.alpha_max, weighted=args.weighted)
    except classifier.ClassifierDomainError as exc:
        raise ConfigError(str(exc)) from exc
    except classifier.NoWeightedRegime as exc:
        raise ConfigError(str(exc)) from exc
    emit("classify", {"p": args.p, "alpha_max": args.alpha_max, "weighted": args.weighted}, verdict, "exact", {},
         args.output or cfg.output)
    return EXIT_OK


def cmd_symbol_check(args, cfg: ExperimentConfig) -> int:
    poly = resolve_polygon(args.polygon or cfg.polygon)
    level = args.max_level if args.max_level is not None else cfg.max_level
    sym_doc = cfg.symbol or {"kind": args.symbol, "params": json.loads(args.params) if args.params else {}}
    needs_map = sym_doc.get("kind") not in ("constant", "linear", "inv_boundary_dist") or args.t is not None
    cmap = ConformalMap(poly) if needs_map else None
    try:
        a = symbol_from_config(sym_doc, poly, cmap)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad symbol: {exc}") from exc
    if args.t is not None:
        vertex = args.vertex if args.vertex is not None else poly.max_vertex
        rep = check_symbol_condition_weighted(a, cmap, args.t, vertex, level, translates=args.translates,
                                              seed=args.seed)
    else:
        rep = check_symbol_condition(a, poly, level, translates=args.translates, seed=args.seed)
    emit("symbol-check", {"polygon": poly.to_json(), "symbol": sym_doc, "max_level": level, "t": args.t,
                          "translates": args.translates, "seed": args.seed}, rep, "quadrature",
         {"growth_fail": rep.growth_threshold}, args.output or cfg.output)
    return EXIT_OK


# -- experiments ----------------------------------------------------------------------------


def _probe_result(rep, expected: str) -> dict:
    out = rep.to_json()
    out["expected"] = expected
    out["as_expected"] = rep.verdict == expected
    return out


@dataclass
class ExperimentOutcome:
    effective: dict
    result: dict
    provenance: str
    rows: list
    success: bool
    unexpected_divergence: bool = False

    @property
    def exit_code(self) -> int:
        if self.success:
            return EXIT_OK
        return EXIT_DIVERGENT if self.unexpected_divergence else EXIT_NUMERIC


def _probe_settings(prm: dict) -> dict:
    """Verdict thresholds; pinned defaults, overridable from the config ``params``."""
    return {"margin": float(prm.get("margin", DIVERGENCE_MARGIN)), "tail": int(prm.get("tail", 4))}


def run_experiment(name: str, args, cfg: ExperimentConfig) -> ExperimentOutcome:
    prm = dict(cfg.params)
    probe = _probe_settings(prm)
    qspec = cfg.quad_spec() if cfg.quadrature else None
    if name == "e0a":
        p, am = cfg.p or 1.2, prm.get("alpha_max", 1.9)
        cmap = _corner(am)
        angles = [float(cmap.config.args[0])]
        rep = divergence_probe(e0a_integrand(cmap.config, 0), singular_angles=angles, spec=qspec, **probe)
        res = {"classify": classifier.classify(p, am), "probe": _probe_result(rep, "DIVERGENT")}
        return ExperimentOutcome({"p": p, "alpha_max": am, **probe}, res, "quadrature", _rows(rep),
                                 rep.verdict == "DIVERGENT")
    if name in ("e1a", "e1b"):
        am = prm.get("alpha_max", 1.8)
        cmap = _corner(am)
        p_div, p_conv = cfg.p or 5.0, prm.get("p_bounded", 3.0)
        R = prm.get("R", 0.5)
        scale = (lambda p: 2.0**-p) if name == "e1a" else (lambda p: R ** (2 * p))
        angles = [float(cmap.config.args[0])]
        div = divergence_probe(psi_power_integrand(cmap.config, p_div, scale(p_div)), singular_angles=angles,
                               spec=qspec, **probe)
        conv = divergence_probe(psi_power_integrand(cmap.config, p_conv, scale(p_conv)), singular_angles=angles,
                                spec=qspec, **probe)
        res = {"unbounded_case": _probe_result(div, "DIVERGENT"), "bounded_case": _probe_result(conv, "CONVERGENT"),
               "expected_growth_exponent": (am - 1) * (2 - p_div) + 2}
        ok = div.verdict == "DIVERGENT" and conv.verdict == "CONVERGENT"
        eff = {"alpha_max": am, "p": p_div, "p_bounded": p_conv, **probe, **({"R": R} if name == "e1b" else {})}
        return ExperimentOutcome(eff, res, "quadrature", _rows(div) + _rows(conv), ok, conv.verdict == "DIVERGENT")
    if name == "e0b":
        p, am = cfg.p or 1.2, prm.get("alpha_max", 1.9)
        cmap = _corner(am)
        try:
            t_min = float(classifier.weighted_exponent_threshold(p, am))
        except (classifier.NoWeightedRegime, classifier.ClassifierDomainError) as exc:
            raise ConfigError(str(exc)) from exc
        t = prm.get("t", 2 * t_min)
        exps = prm.get("exponents", [1.0, 1.5, 2.0, 2.5])
        limit = float(prm.get("growth_limit", 0.10))
        out = example_e0b_boundedness(cmap.config, p, t, exps, vertex=0, growth_limit=limit)
        ok = out["table"].bounded and out["control"].verdict == "DIVERGENT"
        res = {"t_min": t_min, **out}
        eff = {"p": p, "alpha_max": am, "t": t, "exponents": exps, "growth_limit": limit}
        return ExperimentOutcome(eff, res, "quadrature", out["table"].rows, ok, not out["table"].bounded)
    if name == "e2-closed-form":
        ns = _int_range(args.n) if args.n else list(range(11))
        if any(n < 0 for n in ns):
            raise ConfigError("n must be nonnegative")
        rows = [example_53_identity(n) for n in ns]
        ok = all(r["exact"] and r["numeric_residual"] <= 1e-8 for r in rows)
        return ExperimentOutcome({"n": ns}, {"cases": rows, "all_exact": ok}, "exact", rows, ok)
    if name == "e3-szego":
        rows = []
        for n in (0, 1, 3):
            for m in (2, 3, 4):
                for r in (0.3, 0.7):
                    for z in (0j, 0.3 + 0.2j, -0.5 + 0j):
                        out = example_54_theta_integral(n, m, r, z)
                        rows.append({"n": n, "m": m, "r": r, "z": z, **out})
        w = 0.4 - 0.3j
        repro = [abs(szego(lambda t, k=k: np.exp(1j * k * t), w) - w**k) for k in range(11)]
        worst = max(r["residual"] for r in rows)
        ok = worst <= 1e-8 and max(repro) <= 1e-10
        res = {"cases": rows, "max_residual": worst, "szego_reproduction": max(repro)}
        eff = {"n": [0, 1, 3], "m": [2, 3, 4], "r": [0.3, 0.7], "z": [0j, 0.3 + 0.2j, -0.5 + 0j]}
        return ExperimentOutcome(eff, res, "quadrature", rows, ok)
    raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")


def _corner(alpha_max) -> ConformalMap:
    try:
        return corner_domain(float(alpha_max))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _rows(rep) -> list:
    return [{"radius": r, "value": v} for r, v in zip(rep.radii, rep.values)]


def cmd_experiment(args, cfg: ExperimentConfig) -> int:
    out = run_experiment(args.name, args, cfg)
    eff = {"experiment": args.name, **out.effective}
    res = {**out.result, "success": out.success}
    tol = {"divergence_margin": eff.get("margin", DIVERGENCE_MARGIN), "growth_limit": eff.get("growth_limit", 0.10),
           "closed_form_residual": 1e-8, "quadrature": cfg.quadrature}
    emit("experiment", eff, res, out.provenance, tol, args.output or cfg.output, out.rows, args.csv or cfg.csv)
    return out.exit_code


# -- entry point ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sctoeplitz", description="Bergman and Toeplitz operators on polygons")
    parser.add_argument("--config", help="JSON experiment config")
    parser.add_argument("--output", help="also write the JSON report here")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("map-solve", help="solve the prevertex problem")
    p.add_argument("--polygon")
    p.set_defaults(func=cmd_map_solve)

    p = sub.add_parser("whitney", help="Whitney decomposition with invariant checks")
    p.add_argument("--polygon")
    p.add_argument("--max-level", type=int)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_whitney)

    p = sub.add_parser("kernel", help="Bergman kernel K(z, w)")
    p.add_argument("--polygon")
    p.add_argument("--z", required=True)
    p.add_argument("--w", required=True)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("toeplitz-apply", help="partial sums of a Toeplitz operator at a point")
    p.add_argument("--polygon")
    p.add_argument("--symbol", default="constant")
    p.add_argument("--z", default="0.5,0.5")
    p.add_argument("--max-level", type=int)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--classical", action="store_true", help="also integrate a*f directly and check divergence")
    p.set_defaults(func=cmd_toeplitz_apply)

    p = sub.add_parser("classify", help="exact boundedness verdict")
    p.add_argument("--p", required=True, type=str)
    p.add_argument("--alpha-max", required=True, type=str)
    p.add_argument("--weighted", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("symbol-check", help="box-average condition for a symbol")
    p.add_argument("--polygon")
    p.add_argument("--symbol", default="constant")
    p.add_argument("--params", help="symbol parameters as JSON")
    p.add_argument("--max-level", type=int, default=6)
    p.add_argument("--t", type=float)
    p.add_argument("--vertex", type=int)
    p.add_argument("--translates", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_symbol_check)

    p = sub.add_parser("experiment", help="run a worked example")
    p.add_argument("name")
    p.add_argument("--n", help="index range such as 0..10")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_experiment)
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = ExperimentConfig.load(args.config)
        return args.func(args, cfg)
    except (ConfigError, GeometryError) as exc:
        return _fail("config", str(exc), EXIT_CONFIG)
    except (SCError, QuadratureError, ArithmeticError) as exc:
        return _fail("numerical", str(exc), EXIT_NUMERIC)


if __name__ == "__main__":
    sys.exit(main())
