"""Configuration-driven command line entry point.

Subcommands: region | norms | caloric | hyper | linear | solve | lifespan
| rh | suite.  A run reads one JSON config document (all keys optional,
flags override), writes CSV/JSON outputs plus a manifest into --out, and
exits 0 on success, 1 on invalid configuration, 2 on an invariant
violation, 3 on numerical failure.  Identical config and seed give
byte-identical CSVs; wall time lives only in the manifest.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import data as datagen
from .coefficients import generate_field
from .duhamel import SIOSpec, hyper_probe
from .elliptic import assemble_operator
from .errors import (InvalidParams, NonConvergence, NumericalFailure,
                     RoughHeatError)
from .exponents import (admissible_region, exponent_report, rat,
                        rh_exponents, sobolev_upper)
from .geometry import GridSpec, TimeLadder, whitney_box
from .pipeline import (ScenarioConfig, linear_cauchy_scenario,
                       rd_wellposedness_scenario)
from .solver import NonlinearitySpec, estimate_lifespan, free_evolution, \
    picard_solve
from .spaces import BesovParams, LPLadder, ZParams, besov_norm, \
    weighted_lp_norm, z_norm
from .verify import rh_check

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2
EXIT_NUMERICAL = 3

DEFAULT_CONFIG = {
    "dimension": 1,
    "grid_points": 128,
    "domain_length": float(2 * np.pi),
    "horizon": 1.0,
    "ladder_depth": 12,
    "samples_per_rung": 4,
    "coefficient": {"kind": "constant", "contrast": [1.0, 1.0],
                    "cells": 8, "seed": 0},
    "nonlinearity": {"kind": "power", "rho": 3.0, "mu": 1.0},
    "exponents": {"p": 4.0, "q": 2.0, "r": 4.0, "beta": 0.0,
                  "alpha": -0.5, "Q": 10.0 / 7.0, "n": 3, "rho": 1.2},
    "probes": {"count": 12, "seed": 0},
    "tolerances": {"tol": 1e-10, "residual": 1e-4},
    "amplitude": 0.2,
    "lifespan_cap": 1e6,
    "lifespan_amplitudes": [0.5, 0.75, 1.0, 1.5, 2.0],
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path: str | None, flag_overrides: dict) -> dict:
    config = dict(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidParams(f"config not parseable: {exc}") from exc
        if not isinstance(user, dict):
            raise InvalidParams("config root must be a JSON object")
        unknown = set(user) - set(DEFAULT_CONFIG)
        if unknown:
            raise InvalidParams(f"unknown config keys: {sorted(unknown)}")
        config = _merge(config, user)
    config = _merge(config, flag_overrides)
    _validate_config(config)
    return config


def _validate_config(config: dict) -> None:
    if config["dimension"] not in (1, 2):
        raise InvalidParams(f"dimension must be 1 or 2, got"
                            f" {config['dimension']}")
    n = config["grid_points"]
    if n < 8 or n & (n - 1):
        raise InvalidParams(f"grid_points must be a power of two >= 8, got {n}")
    if config["horizon"] <= 0:
        raise InvalidParams("horizon must be positive")
    kind = config["coefficient"]["kind"]
    if kind not in ("constant", "checkerboard", "layered"):
        raise InvalidParams(f"unknown coefficient kind {kind!r}")
    contrast = config["coefficient"]["contrast"]
    if len(contrast) != 2 or not 0 < contrast[0] <= contrast[1]:
        raise InvalidParams(f"invalid contrast pair {contrast}")


def _run_id(config: dict, subcommand: str) -> str:
    blob = json.dumps({"cmd": subcommand, "config": config},
                      sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


class Runner:
    """Owns the output directory, the manifest and the CSV writers."""

    def __init__(self, subcommand: str, config: dict, out_dir: str):
        self.subcommand = subcommand
        self.config = config
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.run_id = _run_id(config, subcommand)
        self.outputs: list[str] = []
        self.started = time.time()
        self.manifest_path = self.out / "manifest.json"
        self._write_manifest(final=False)

    def _write_manifest(self, final: bool) -> None:
        doc = {
            "run_id": self.run_id,
            "subcommand": self.subcommand,
            "config": self.config,
            "seed": self.config.get("probes", {}).get("seed", 0),
            "version": __version__,
            "outputs": self.outputs,
            "finalized": final,
        }
        if final:
            doc["wall_time_s"] = time.time() - self.started
        with open(self.manifest_path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, name: str, fieldnames: list[str],
                  rows: list[dict]) -> Path:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _fmt(row.get(k)) for k in fieldnames})
        self.outputs.append(name)
        return path

    def write_json(self, name: str, doc) -> Path:
        path = self.out / name
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")
        self.outputs.append(name)
        return path

    def finalize(self) -> None:
        self._write_manifest(final=True)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Fraction):
        return repr(float(value))
    return str(value)


def _jsonable(value):
    if isinstance(value, Fraction):
        return float(value)
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if value == np.inf:
        return "inf"
    return str(value)


# ---------------------------------------------------------------------------
# subcommands


def cmd_region(runner: Runner) -> int:
    exps = runner.config["exponents"]
    region = admissible_region(exps["n"], rat(exps["rho"]), rat(exps["Q"]))
    rows = [{"vertex_id": i, "inv_p": float(x), "alpha": float(a)}
            for i, (x, a) in enumerate(region.vertices)]
    runner.write_csv("region_vertices.csv", ["vertex_id", "inv_p", "alpha"],
                     rows)
    seg_rows = []
    if region.critical_segment is not None:
        for i, (x, a) in enumerate(region.critical_segment):
            seg_rows.append({"endpoint_id": i, "inv_p": float(x),
                             "alpha": float(a)})
    runner.write_csv("critical_segment.csv", ["endpoint_id", "inv_p", "alpha"],
                     seg_rows)
    res = 64
    xs, als, mask = region.mask(res)
    mask_rows = [
        {"inv_p": float(x), "alpha": float(a), "admissible": int(mask[i][j])}
        for i, a in enumerate(als) for j, x in enumerate(xs)
    ]
    runner.write_csv("region_mask.csv", ["inv_p", "alpha", "admissible"],
                     mask_rows)
    runner.write_json("region_meta.json", {
        "n": exps["n"], "rho": float(rat(exps["rho"])),
        "Q": float(rat(exps["Q"])),
        "rd_plus_inverse": float(region.rd_plus_inverse),
    })
    return EXIT_OK


def _setup(config: dict):
    grid = GridSpec(config["dimension"], config["grid_points"],
                    config["domain_length"])
    ladder = TimeLadder(config["horizon"], config["ladder_depth"],
                        config["samples_per_rung"])
    coeff_cfg = config["coefficient"]
    coeff = generate_field(grid, coeff_cfg["kind"],
                           tuple(coeff_cfg["contrast"]),
                           cells=coeff_cfg["cells"], seed=coeff_cfg["seed"])
    op = assemble_operator(coeff, grid)
    return grid, ladder, coeff, op


def cmd_norms(runner: Runner) -> int:
    config = runner.config
    grid, ladder, coeff, op = _setup(config)
    seed = config["probes"]["seed"]
    u = datagen.random_field(grid, ladder, seed=seed)
    exps = config["exponents"]
    rows = []
    for p, q in ((exps["p"], exps["q"]), (exps["p"], np.inf),
                 (exps["p"], exps["p"])):
        val = z_norm(u, ZParams(p, q, exps["beta"], config["horizon"]))
        rows.append({"norm_kind": "z", "p": p, "q": q, "beta": exps["beta"],
                     "alpha": "", "T": config["horizon"], "value": val})
    rows.append({"norm_kind": "weighted_lp", "p": exps["p"], "q": "",
                 "beta": exps["beta"], "alpha": "", "T": config["horizon"],
                 "value": weighted_lp_norm(u, exps["p"], exps["beta"],
                                           config["horizon"])})
    u0 = datagen.band_limited_datum(grid, seed)
    lp = LPLadder.for_grid(grid)
    rows.append({"norm_kind": "besov", "p": exps["p"], "q": "",
                 "beta": "", "alpha": exps["alpha"], "T": "",
                 "value": besov_norm(u0, BesovParams(exps["alpha"],
                                                     exps["p"]), lp)})
    runner.write_csv("norms.csv",
                     ["norm_kind", "p", "q", "beta", "alpha", "T", "value"],
                     rows)
    return EXIT_OK


def cmd_caloric(runner: Runner) -> int:
    config = runner.config
    grid, ladder, coeff, op = _setup(config)
    exps = config["exponents"]
    alpha, p = exps["alpha"], exps["p"]
    lp = LPLadder.for_grid(grid)
    seed = config["probes"]["seed"]
    count = config["probes"]["count"]
    rows = []
    for i in range(count):
        u0 = datagen.band_limited_datum(grid, seed + i)
        bn = besov_norm(u0, BesovParams(alpha, p), lp)
        ev = free_evolution(op, u0, ladder)
        for q in (exps["q"], np.inf):
            zn = z_norm(ev, ZParams(p, q, alpha / 2, config["horizon"]))
            rows.append({"probe_id": i, "p": p, "q": q, "alpha": alpha,
                         "besov": bn, "z_norm": zn,
                         "ratio": zn / bn if bn > 0 else ""})
    runner.write_csv("caloric.csv",
                     ["probe_id", "p", "q", "alpha", "besov", "z_norm",
                      "ratio"], rows)
    return EXIT_OK


def cmd_hyper(runner: Runner) -> int:
    config = runner.config
    grid, ladder, coeff, op = _setup(config)
    exps = config["exponents"]
    seed = config["probes"]["seed"]
    count = config["probes"]["count"]
    n = grid.dimension
    r_up = float(rat(sobolev_upper(2, n))) if n > 2 else np.inf
    specs = [
        SIOSpec("source", q=2.0, r=np.inf if np.isinf(r_up) else r_up,
                kappa=1.0),
        SIOSpec("div_source", q=2.0, r=2.0, kappa=0.5),
    ]
    rows = []
    for sio in specs:
        maker = (lambda s: datagen.random_vector_field(grid, ladder, seed + s)) \
            if sio.takes_vector else \
            (lambda s: datagen.random_field(grid, ladder, seed + s))
        report = hyper_probe(op, sio, exps["p"], exps["beta"], maker,
                             ensemble=count, grid_tag=f"N{grid.points}")
        rows.extend(report.rows(runner.subcommand, seed))
    runner.write_csv(
        "hyper_probes.csv",
        ["scenario", "seed", "probe_id", "op", "p", "q", "r", "beta",
         "kappa", "input_norm", "output_norm", "ratio", "grid_tag"], rows)
    return EXIT_OK


def _scenario_config(config: dict, name: str) -> ScenarioConfig:
    exps = config["exponents"]
    coeff = config["coefficient"]
    nl = config["nonlinearity"]
    return ScenarioConfig(
        name=name,
        dimension=config["dimension"],
        grid_points=config["grid_points"],
        domain_length=config["domain_length"],
        horizon=config["horizon"],
        ladder_depth=config["ladder_depth"],
        samples_per_rung=config["samples_per_rung"],
        coefficient_kind=coeff["kind"],
        contrast=tuple(coeff["contrast"]),
        cells=coeff["cells"],
        coefficient_seed=coeff["seed"],
        rho=nl["rho"],
        mu=nl.get("mu", 1.0),
        nonlinearity=nl["kind"],
        p=exps["p"], q=exps["q"], r=exps["r"], beta=exps["beta"],
        alpha=exps["alpha"], Q=exps["Q"],
        amplitude=config["amplitude"],
        probes=config["probes"]["count"],
        seed=config["probes"]["seed"],
        tol=config["tolerances"]["tol"],
        residual_tol=config["tolerances"]["residual"],
        lifespan_cap=config["lifespan_cap"],
    )


def cmd_linear(runner: Runner) -> int:
    report = linear_cauchy_scenario(_scenario_config(runner.config, "linear"))
    runner.write_json("linear_report.json", report)
    return EXIT_OK if report["ok"] else EXIT_INVARIANT


def cmd_solve(runner: Runner) -> int:
    config = runner.config
    grid, ladder, coeff, op = _setup(config)
    spec_cfg = config["nonlinearity"]
    spec = NonlinearitySpec(kind=spec_cfg["kind"], rho=spec_cfg["rho"],
                            mu=spec_cfg.get("mu", 1.0),
                            cutoff=spec_cfg.get("cutoff", np.inf))
    seed = config["probes"]["seed"]
    u0 = config["amplitude"] * datagen.band_limited_datum(grid, seed)
    sol = picard_solve(op, u0, spec, ladder, r=config["exponents"]["r"],
                       tol=config["tolerances"]["tol"])
    runner.write_csv(
        "solve_runs.csv",
        ["run_id", "n", "N", "rho", "mu", "coeff_kind", "T", "iterations",
         "contraction_max", "residual"],
        [{"run_id": runner.run_id, "n": grid.dimension, "N": grid.points,
          "rho": spec.rho, "mu": spec.mu,
          "coeff_kind": config["coefficient"]["kind"],
          "T": config["horizon"], "iterations": sol.iterations,
          "contraction_max": sol.contraction_max,
          "residual": sol.residual}])
    return EXIT_OK


def cmd_lifespan(runner: Runner) -> int:
    config = runner.config
    grid, ladder, coeff, op = _setup(config)
    spec_cfg = config["nonlinearity"]
    spec = NonlinearitySpec(kind=spec_cfg["kind"], rho=spec_cfg["rho"],
                            mu=spec_cfg.get("mu", 1.0),
                            cutoff=spec_cfg.get("cutoff", np.inf))
    rows = []
    for amp in config["lifespan_amplitudes"]:
        u0 = amp * np.ones(grid.shape)
        est = estimate_lifespan(op, u0, spec, horizon=config["horizon"],
                                cap=config["lifespan_cap"])
        rows.append({"amplitude": amp, "tau": est.tau,
                     "censored": int(est.censored),
                     "refinement_ratio": est.refinement_ratio})
    runner.write_csv("lifespan.csv",
                     ["amplitude", "tau", "censored", "refinement_ratio"],
                     rows)
    return EXIT_OK


def cmd_rh(runner: Runner) -> int:
    config = runner.config
    report = rd_wellposedness_scenario(_scenario_config(runner.config, "rh"))
    rh_stage = report["stages"].get("reverse_holder", {})
    if not rh_stage.get("ok"):
        runner.write_json("rh_report.json", report)
        return EXIT_INVARIANT
    grid, ladder, coeff, op = _setup(config)
    spec_cfg = config["nonlinearity"]
    spec = NonlinearitySpec(kind=spec_cfg["kind"], rho=spec_cfg["rho"],
                            mu=spec_cfg.get("mu", 1.0))
    seed = config["probes"]["seed"]
    u0 = config["amplitude"] * datagen.band_limited_datum(grid, seed)
    sol = picard_solve(op, u0, spec, ladder, r=config["exponents"]["r"],
                       tol=config["tolerances"]["tol"])
    boxes = [whitney_box(grid, [0.5 * grid.length] * grid.dimension,
                         ladder.heights[m], horizon=ladder.horizon)
             for m in range(2, min(6, ladder.depth))]
    plain = rh_check(sol.field, spec.rho, boxes)
    runner.write_csv("rh_boxes.csv",
                     ["box_id", "t", "lhs", "rhs1", "rhs2", "ratio", "theta",
                      "q"], plain.rows)
    runner.write_json("rh_report.json", report)
    return EXIT_OK


def cmd_suite(runner: Runner, profile: str) -> int:
    """Curated end-to-end run; 'quick' shrinks sizes, 'full' keeps them."""
    config = dict(runner.config)
    if profile == "quick":
        config = _merge(config, {"grid_points": 64, "ladder_depth": 10,
                                 "samples_per_rung": 4,
                                 "probes": {"count": 6}})
    sub_runners = []
    failures = []
    for name, fn in (("region", cmd_region), ("norms", cmd_norms),
                     ("caloric", cmd_caloric), ("hyper", cmd_hyper),
                     ("linear", cmd_linear), ("solve", cmd_solve),
                     ("lifespan", cmd_lifespan)):
        sub = Runner(name, config, str(runner.out / name))
        code = fn(sub)
        sub.finalize()
        sub_runners.append((name, code))
        if code != EXIT_OK:
            failures.append(name)
    runner.write_json("suite_summary.json",
                      {"profile": profile,
                       "results": {n: c for n, c in sub_runners},
                       "failures": failures})
    return EXIT_OK if not failures else EXIT_INVARIANT


# ---------------------------------------------------------------------------
# argument parsing and dispatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roughheat",
        description="Numerical laboratory for rough-coefficient parabolic "
                    "equations")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in ("region", "norms", "caloric", "hyper", "linear", "solve",
                 "lifespan", "rh", "suite"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None,
                        help="JSON config document")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--n", type=int, default=None,
                        help="exponent-table dimension")
        sp.add_argument("--dimension", type=int, default=None)
        sp.add_argument("--grid-points", type=int, default=None)
        sp.add_argument("--rho", type=str, default=None)
        sp.add_argument("--Q", type=str, default=None)
        sp.add_argument("--p", type=float, default=None)
        sp.add_argument("--q", type=float, default=None)
        sp.add_argument("--r", type=float, default=None)
        sp.add_argument("--alpha", type=float, default=None)
        sp.add_argument("--horizon", type=float, default=None)
        sp.add_argument("--amplitude", type=float, default=None)
        if name == "suite":
            sp.add_argument("--profile", choices=("quick", "full"),
                            default="quick")
    return parser


def _flag_overrides(args: argparse.Namespace) -> dict:
    over: dict = {}
    exps: dict = {}
    if args.seed is not None:
        over["probes"] = {"seed": args.seed}
        over.setdefault("coefficient", {})["seed"] = args.seed
    if args.dimension is not None:
        over["dimension"] = args.dimension
    if args.grid_points is not None:
        over["grid_points"] = args.grid_points
    if args.horizon is not None:
        over["horizon"] = args.horizon
    if args.amplitude is not None:
        over["amplitude"] = args.amplitude
    if args.n is not None:
        exps["n"] = args.n
    if args.rho is not None:
        exps["rho"] = float(Fraction(args.rho))
        over["nonlinearity"] = {"rho": float(Fraction(args.rho))}
    if args.Q is not None:
        exps["Q"] = float(Fraction(args.Q))
    for key in ("p", "q", "r", "alpha"):
        val = getattr(args, key)
        if val is not None:
            exps[key] = val
    if exps:
        over["exponents"] = exps
    return over


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, _flag_overrides(args))
    except InvalidParams as exc:
        print(f"error: {exc}", file=sys.stderr)
        _write_error(args.out, "InvalidParams", str(exc))
        return EXIT_CONFIG
    runner = Runner(args.subcommand, config, args.out)
    handlers = {
        "region": cmd_region, "norms": cmd_norms, "caloric": cmd_caloric,
        "hyper": cmd_hyper, "linear": cmd_linear, "solve": cmd_solve,
        "lifespan": cmd_lifespan, "rh": cmd_rh,
    }
    try:
        if args.subcommand == "suite":
            code = cmd_suite(runner, args.profile)
        else:
            code = handlers[args.subcommand](runner)
    except InvalidParams as exc:
        print(f"error: {exc}", file=sys.stderr)
        _write_error(args.out, type(exc).__name__, str(exc))
        return EXIT_CONFIG
    except (NonConvergence, NumericalFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        _write_error(args.out, type(exc).__name__, str(exc))
        return EXIT_NUMERICAL
    except RoughHeatError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        _write_error(args.out, type(exc).__name__, str(exc))
        return EXIT_INVARIANT
    runner.finalize()
    return code


def _write_error(out_dir: str, kind: str, message: str) -> None:
    try:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        with open(path / "error.json", "w") as fh:
            json.dump({"error": kind, "message": message}, fh, indent=2)
            fh.write("\n")
    except OSError:
        pass


if __name__ == "__main__":
    sys.exit(main())
