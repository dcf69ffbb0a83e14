"""Configuration ingestion, subcommand dispatch, and artifact emission.

One JSON config drives every subcommand; expressions for the exponents,
weights, source, and boundary datum are strings in the expression language
of :mod:`doublephase.exprparse`.  Reports are emitted as pretty-printed JSON
with sorted keys so identical configs and seeds reproduce byte-identical
files apart from the ``timing_seconds`` entry.

Exit codes: 0 success, 1 usage or config error, 2 non-convergence or failed
verification, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .convexity import sweep_monotonicity, sweep_two_point, sweep_uc_pairs
from .exprparse import Expr, ParseError, parse, sample
from .mesh import Grid, ScalarField, build_grid
from .modular import (
    luxemburg_norm,
    norm_modular_sandwich,
    overline_equivalence_check,
    rho,
)
from .phase import PhasePair, PhaseStructure
from .solver import LineSearchError, Problem, SolverError, SolverOptions, solve_weak


class ConfigError(Exception):
    """Configuration rejected; the message includes the offending path."""


_SOLVER_DEFAULTS = {
    "max_iterations": 50_000,
    "gradient_tolerance": None,
    "energy_tolerance": 1e-14,
    "armijo_constant": 1e-4,
    "shrink_factor": 0.5,
    "initial_step": 1.0,
    "step_floor": 1e-16,
    "method": "cg",
    "two_start_check": False,
    "dual_bound": None,
    "dual_probes": 256,
    "uc_epsilon": 0.5,
}

_VERIFY_DEFAULTS = {
    "samples": 500,
    "epsilon": None,
    "amplitude": 10.0,
    "exponent_max": 8.0,
}


def _require_keys(obj: dict, path: str, required, optional):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    for key in obj:
        if key not in required and key not in optional:
            raise ConfigError(f"{path}: unknown key '{key}'")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{path}: missing required key '{key}'")


def _parse_expr(text, path: str) -> Expr:
    if not isinstance(text, str):
        raise ConfigError(f"{path}: expected an expression string")
    try:
        return parse(text)
    except ParseError as err:
        raise ConfigError(f"{path}: {err}") from err


@dataclass
class Config:
    grid: Grid
    p_expr: Expr
    phase_exprs: list[tuple[Expr, Expr]]  # (q_j, mu_j)
    source_expr: Expr
    boundary_expr: Expr
    solver: dict
    verify: dict
    seed: int
    out_dir: str | None
    raw: dict


def parse_config(source: str | Path) -> Config:
    """Parse and validate a config from a path or a JSON string."""
    try:
        is_file = Path(source).exists()
    except OSError:
        is_file = False
    text = Path(source).read_text(encoding="utf-8") if is_file else str(source)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err

    _require_keys(
        raw,
        "config",
        required=("domain", "phase"),
        optional=("source", "boundary", "solver", "verify", "seed", "output"),
    )

    dom = raw["domain"]
    _require_keys(dom, "domain", required=("dim", "extents", "resolution"), optional=())
    try:
        grid = build_grid(dom["dim"], dom["extents"], dom["resolution"])
    except (TypeError, ValueError) as err:
        raise ConfigError(f"domain: {err}") from err

    ph = raw["phase"]
    _require_keys(ph, "phase", required=("p", "phases"), optional=())
    p_expr = _parse_expr(ph["p"], "phase.p")
    if not isinstance(ph["phases"], list) or not ph["phases"]:
        raise ConfigError("phase.phases: expected a non-empty list")
    phase_exprs = []
    for j, pair in enumerate(ph["phases"]):
        _require_keys(pair, f"phase.phases[{j}]", required=("q", "mu"), optional=())
        phase_exprs.append(
            (
                _parse_expr(pair["q"], f"phase.phases[{j}].q"),
                _parse_expr(pair["mu"], f"phase.phases[{j}].mu"),
            )
        )

    source_expr = _parse_expr(raw.get("source", "0"), "source")
    boundary_expr = _parse_expr(raw.get("boundary", "0"), "boundary")

    solver = dict(_SOLVER_DEFAULTS)
    if "solver" in raw:
        _require_keys(raw["solver"], "solver", required=(), optional=tuple(_SOLVER_DEFAULTS))
        solver.update(raw["solver"])

    verify = dict(_VERIFY_DEFAULTS)
    if "verify" in raw:
        _require_keys(raw["verify"], "verify", required=(), optional=tuple(_VERIFY_DEFAULTS))
        verify.update(raw["verify"])

    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed: expected an integer")

    out_dir = None
    if "output" in raw:
        _require_keys(raw["output"], "output", required=(), optional=("dir",))
        out_dir = raw["output"].get("dir")

    return Config(
        grid=grid,
        p_expr=p_expr,
        phase_exprs=phase_exprs,
        source_expr=source_expr,
        boundary_expr=boundary_expr,
        solver=solver,
        verify=verify,
        seed=seed,
        out_dir=out_dir,
        raw=raw,
    )


def build_phase(config: Config) -> PhaseStructure:
    grid = config.grid
    p = sample(config.p_expr, grid, "cells")
    pairs = tuple(
        PhasePair(sample(q, grid, "cells"), sample(mu, grid, "cells"))
        for q, mu in config.phase_exprs
    )
    try:
        return PhaseStructure(grid, p, pairs)
    except ValueError as err:
        raise ConfigError(f"phase: {err}") from err


def build_problem(config: Config) -> Problem:
    grid = config.grid
    return Problem(
        grid=grid,
        phase=build_phase(config),
        phi=ScalarField(grid, sample(config.boundary_expr, grid, "nodes")),
        f=ScalarField(grid, sample(config.source_expr, grid, "nodes")),
        dual_bound=config.solver["dual_bound"],
    )


def solver_options(config: Config) -> SolverOptions:
    s = config.solver
    try:
        return SolverOptions(
            max_iterations=s["max_iterations"],
            gradient_tolerance=s["gradient_tolerance"],
            energy_tolerance=s["energy_tolerance"],
            armijo_constant=s["armijo_constant"],
            shrink_factor=s["shrink_factor"],
            initial_step=s["initial_step"],
            step_floor=s["step_floor"],
            method=s["method"],
            two_start_check=s["two_start_check"],
            dual_probes=s["dual_probes"],
            uc_epsilon=s["uc_epsilon"],
            seed=config.seed,
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(f"solver: {err}") from err


def _versions() -> dict:
    return {
        "doublephase": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }


def _report(command: str, config: Config, results: dict, started: float) -> dict:
    return {
        "command": command,
        "config": config.raw,
        "results": results,
        "seed": config.seed,
        "timing_seconds": time.perf_counter() - started,
        "versions": _versions(),
    }


def _write_report(report: dict, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    with path.open("w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_solution_csv(path: Path, grid: Grid, u: np.ndarray, w: np.ndarray):
    coords = grid.node_coords()
    header = ("x", "y")[: grid.dim] + ("u", "w")
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(grid.n_nodes):
            cells = [repr(float(c)) for c in coords[i]]
            cells.append(repr(float(u[i])))
            cells.append(repr(float(w[i])))
            fh.write(",".join(cells) + "\n")


def cmd_solve(config: Config, out_dir: Path) -> int:
    started = time.perf_counter()
    prob = build_problem(config)
    opts = solver_options(config)
    error = None
    try:
        sol = solve_weak(prob, opts)
    except LineSearchError as err:
        grid = config.grid
        u = err.u_values
        results = {
            "error": str(err),
            "iterations": err.iteration,
            "energy": err.energy,
            "converged": False,
        }
        report = _report("solve", config, results, started)
        _write_report(report, out_dir)
        _write_solution_csv(out_dir / "solution.csv", grid, u, prob.phi.values - u)
        return 2

    results = {
        "converged": sol.converged,
        "termination": sol.termination,
        "iterations": sol.iterations,
        "energy": float(sol.energy_history[-1]),
        "energy_history": [float(v) for v in sol.energy_history],
        "residual": sol.weak_residual,
        "gradient_norm": sol.gradient_norm,
        "dual_bound": sol.dual_bound,
        "lower_bound": sol.lower_bound_used,
        "lower_bound_satisfied": sol.lower_bound_satisfied,
    }
    if sol.uc_certificate is not None:
        results["uniqueness"] = {
            "modular_distance": sol.modular_distance,
            "certificate": sol.uniqueness_gap,
            "gradients_equal": sol.gradients_equal,
            "uc_verdict": sol.uc_certificate.verdict,
            "uc_epsilon": sol.uc_certificate.epsilon,
            "uc_delta": sol.uc_certificate.delta,
        }
    report = _report("solve", config, results, started)
    _write_report(report, out_dir)
    _write_solution_csv(
        out_dir / "solution.csv", config.grid, sol.u_star.values, sol.w_star.values
    )
    return 0 if sol.converged else 2


def cmd_norm(config: Config, field_expr: str, kind: str | None, out_dir: Path | None) -> int:
    started = time.perf_counter()
    phase = build_phase(config)
    expr = _parse_expr(field_expr, "--field")
    u = ScalarField(config.grid, sample(expr, config.grid, "nodes"))
    kinds = (kind,) if kind else ("zero_order", "gradient", "sobolev")
    results: dict = {"field": field_expr, "kinds": {}}
    for k in kinds:
        lower, upper, holds = norm_modular_sandwich(u, phase, k)
        results["kinds"][k] = {
            "modular": rho(u, phase, k).value,
            "luxemburg_norm": luxemburg_norm(u, phase, k),
            "sandwich_lower": lower,
            "sandwich_upper": upper,
            "sandwich_holds": holds,
        }
    if phase.k == 1:
        results["overline_equivalent"] = all(
            overline_equivalence_check(u, phase, k) for k in kinds
        )
    report = _report("norm", config, results, started)
    print(json.dumps(report["results"], indent=2, sort_keys=True))
    if out_dir is not None:
        _write_report(report, out_dir)
    return 0


def _sweep_sandwich(config: Config, phase: PhaseStructure) -> dict:
    grid = config.grid
    rng = np.random.default_rng(config.seed)
    n = int(config.verify["samples"])
    fails = 0
    checks = 0
    for _ in range(n):
        scale = 10.0 ** rng.uniform(-2, 2)
        u = ScalarField(grid, scale * rng.normal(size=grid.n_nodes))
        kind = ("zero_order", "gradient", "sobolev")[int(rng.integers(0, 3))]
        _, _, holds = norm_modular_sandwich(u, phase, kind)
        norm = luxemburg_norm(u, phase, kind)
        unit_ok = True
        if norm > 0:
            unit = ScalarField(grid, u.values / norm)
            unit_ok = abs(rho(unit, phase, kind).value - 1.0) <= 1e-9
        c = float(rng.uniform(0.1, 10.0))
        hom_ok = abs(
            luxemburg_norm(ScalarField(grid, c * u.values), phase, kind) - c * norm
        ) <= 1e-12 * max(1.0, c * norm)
        over_ok = (
            overline_equivalence_check(u, phase, kind) if phase.k == 1 else True
        )
        checks += 1
        if not (holds and unit_ok and hom_ok and over_ok):
            fails += 1
    return {"samples": checks, "fails": fails}


def cmd_verify(config: Config, suite: str, out_dir: Path | None) -> int:
    started = time.perf_counter()
    verify = config.verify
    if suite == "uc":
        phase = build_phase(config)
        eps = verify["epsilon"]
        try:
            tallies = sweep_uc_pairs(
                config.grid,
                phase,
                int(verify["samples"]),
                config.seed,
                kinds=("gradient", "zero_order", "sobolev"),
                eps=eps,
            )
        except ValueError as err:
            raise ConfigError(f"verify.epsilon: {err}") from err
        fails = sum(t["fail"] for t in tallies.values())
        results = {"suite": "uc", "tallies": tallies, "fails": fails,
                   "multiphase": phase.k > 1}
    elif suite == "monotone":
        out = sweep_monotonicity(
            int(verify["samples"]),
            config.seed,
            r_max=float(verify["exponent_max"]),
            amplitude=float(verify["amplitude"]),
        )
        fails = out["fails"]
        results = {"suite": "monotone", **out}
    elif suite == "inequalities":
        out = sweep_two_point(
            int(verify["samples"]),
            config.seed,
            h_max=float(verify["exponent_max"]),
            amplitude=float(verify["amplitude"]),
        )
        fails = out["fails"]
        results = {"suite": "inequalities", **out}
    elif suite == "sandwich":
        phase = build_phase(config)
        out = _sweep_sandwich(config, phase)
        fails = out["fails"]
        results = {"suite": "sandwich", **out}
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown suite {suite!r}")

    report = _report(f"verify-{suite}", config, results, started)
    print(json.dumps(report["results"], indent=2, sort_keys=True))
    if out_dir is not None:
        _write_report(report, out_dir)
    return 0 if fails == 0 else 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doublephase",
        description="Double-phase Poisson solver and modular geometry verifier",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("config", help="path to a JSON config (or inline JSON)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out-dir", default=None, help="override the output directory")

    add_common(sub.add_parser("solve", help="minimize the energy and emit the solution"))
    norm_p = sub.add_parser("norm", help="modulars and Luxemburg norms of a field")
    add_common(norm_p)
    norm_p.add_argument("--field", required=True, help="expression for the field")
    norm_p.add_argument(
        "--kind", choices=("zero_order", "gradient", "sobolev"), default=None
    )
    add_common(sub.add_parser("verify-uc", help="uniform-convexity sweep"))
    add_common(sub.add_parser("check-monotone", help="flux monotonicity sweep"))
    add_common(sub.add_parser("check-inequalities", help="two-point inequality sweep"))
    add_common(sub.add_parser("check-sandwich", help="norm-modular sandwich sweep"))
    return parser


_SUITES = {
    "verify-uc": "uc",
    "check-monotone": "monotone",
    "check-inequalities": "inequalities",
    "check-sandwich": "sandwich",
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = parse_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
            config.raw = dict(config.raw, seed=args.seed)
        out_dir = args.out_dir if args.out_dir is not None else config.out_dir
        out_path = Path(out_dir) if out_dir is not None else None

        if args.command == "solve":
            return cmd_solve(config, out_path if out_path is not None else Path("."))
        if args.command == "norm":
            return cmd_norm(config, args.field, args.kind, out_path)
        return cmd_verify(config, _SUITES[args.command], out_path)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except SolverError as err:
        print(f"solver error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
