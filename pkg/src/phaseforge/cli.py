"""Batch front door: simulate | baselines | fit | sweep.

Configuration is line-oriented key=value (via --config) with command-line
flags taking precedence.  Exit codes: 0 success, 1 computational failure,
2 input/schema error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import baseline_table
from .design import DesignPolicy
from .errors import PhaseforgeError, SchemaError
from .fitting import backward_eliminate, extrapolate_coefficients, fit_exponential, fit_power_models
from .io import (
    read_ensembles_csv,
    write_baselines_csv,
    write_ensembles_csv,
    write_fits_json,
    write_steps_csv,
    write_summary_json,
    write_trials_csv,
)
from .model import ProbeSpec, reduce_angle
from .strategy import run_ensemble

EXIT_OK = 0
EXIT_COMPUTE = 1
EXIT_INPUT = 2

COST_ALIASES = {"sharpness": "expected_sharpness", "mi": "mutual_information"}

_CONFIG_KEYS = {
    "alpha_sq", "steps", "pnr", "trials", "seed", "grid", "cost", "phase_mode",
    "out", "emit_steps", "theta_candidates", "refine_iters", "beta_cap_epsilon",
}


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters for one simulate invocation."""

    alpha_sq: float = 1.0
    steps: int = 10
    pnr: int = 1
    trials: int = 100
    seed: int = 0
    grid: int = 1024
    cost: str = "sharpness"
    phase_mode: str = "random"
    fixed_phase: float = 0.0
    out: str = "."
    emit_steps: bool = False
    theta_candidates: int = 32
    refine_iters: int = 20
    beta_cap_epsilon: float = 0.05

    def probe_spec(self) -> ProbeSpec:
        return ProbeSpec(alpha=math.sqrt(self.alpha_sq), steps_L=self.steps,
                         pnr_m=self.pnr)

    def design_policy(self) -> DesignPolicy:
        return DesignPolicy(cost_function=COST_ALIASES[self.cost],
                            theta_candidates=self.theta_candidates,
                            refine_iters=self.refine_iters,
                            beta_cap_epsilon=self.beta_cap_epsilon)

    def echo(self) -> dict:
        return {
            "alpha_sq": self.alpha_sq, "steps": self.steps, "pnr": self.pnr,
            "trials": self.trials, "seed": self.seed, "grid": self.grid,
            "cost": self.cost, "phase_mode": self.phase_mode,
            "fixed_phase": self.fixed_phase if self.phase_mode == "fixed" else None,
            "emit_steps": self.emit_steps,
            "theta_candidates": self.theta_candidates,
            "refine_iters": self.refine_iters,
            "beta_cap_epsilon": self.beta_cap_epsilon,
        }


def _parse_phase_mode(text: str) -> tuple[str, float]:
    if text == "random":
        return "random", 0.0
    if text.startswith("fixed:"):
        try:
            return "fixed", reduce_angle(float(text.split(":", 1)[1]))
        except ValueError as err:
            raise SchemaError(f"bad phase mode {text!r}: {err}") from err
    raise SchemaError(f"phase mode must be 'random' or 'fixed:<radians>', got {text!r}")


def _parse_config_value(key: str, value: str):
    try:
        if key in ("alpha_sq", "beta_cap_epsilon"):
            return float(value)
        if key in ("steps", "pnr", "trials", "seed", "grid",
                   "theta_candidates", "refine_iters"):
            return int(value)
        if key == "emit_steps":
            if value.lower() in ("true", "1", "yes"):
                return True
            if value.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"expected a boolean, got {value!r}")
        if key == "cost":
            if value not in COST_ALIASES:
                raise ValueError(f"cost must be one of {sorted(COST_ALIASES)}")
            return value
        return value
    except ValueError as err:
        raise SchemaError(f"field {key!r}: {err}") from err


def load_config_file(path: str) -> dict:
    """Parse a key=value config file; '#' starts a comment."""
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as err:
        raise SchemaError(f"cannot read config {path!r}: {err}") from err
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemaError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise SchemaError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _parse_config_value(key, value)
    return values


def _build_run_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    if args.config:
        file_values = load_config_file(args.config)
        phase = file_values.pop("phase_mode", None)
        config = replace(config, **file_values)
        if phase is not None:
            mode, fixed = _parse_phase_mode(phase)
            config = replace(config, phase_mode=mode, fixed_phase=fixed)
    overrides = {}
    for key in ("alpha_sq", "steps", "pnr", "trials", "seed", "grid", "cost",
                "theta_candidates", "refine_iters", "beta_cap_epsilon"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if args.out is not None:
        overrides["out"] = args.out
    if getattr(args, "emit_steps", False):
        overrides["emit_steps"] = True
    if getattr(args, "phase_mode", None) is not None:
        mode, fixed = _parse_phase_mode(args.phase_mode)
        overrides["phase_mode"] = mode
        overrides["fixed_phase"] = fixed
    config = replace(config, **overrides)
    try:
        config.probe_spec()
        config.design_policy()
        if config.trials < 1:
            raise ValueError(f"trials must be >= 1, got {config.trials}")
        if not (config.grid >= 8 and (config.grid & (config.grid - 1)) == 0):
            raise ValueError(f"grid must be a power of two >= 8, got {config.grid}")
    except ValueError as err:
        raise SchemaError(f"invalid configuration: {err}") from err
    return config


def _ensemble_entry(config: RunConfig, result) -> dict:
    return {
        "alpha_sq": config.alpha_sq, "steps_L": config.steps, "pnr_m": config.pnr,
        "trials": result.trials, "cost_function": config.cost,
        "holevo_variance": result.holevo_variance,
        "holevo_stderr": result.holevo_stderr,
        "mean_delta_design_final": result.mean_delta_design_final,
    }


def _simulate_once(config: RunConfig, out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    result, records = run_ensemble(
        config.probe_spec(), config.design_policy(), config.trials, config.seed,
        phase_mode="fixed" if config.phase_mode == "fixed" else "random_uniform",
        fixed_phase=config.fixed_phase if config.phase_mode == "fixed" else None,
        grid_size=config.grid)
    write_trials_csv(out_dir / "trials.csv", records)
    if config.emit_steps:
        write_steps_csv(out_dir / "steps.csv", records)
    write_summary_json(out_dir / "summary.json", result, config.echo(), __version__)
    return _ensemble_entry(config, result)


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _build_run_config(args)
    _simulate_once(config, Path(config.out))
    return EXIT_OK


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as err:
        raise SchemaError(f"{flag}: {err}") from err


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as err:
        raise SchemaError(f"{flag}: {err}") from err


def cmd_baselines(args: argparse.Namespace) -> int:
    alpha_sqs = _parse_float_list(args.alpha_sq or "1,2,5,10,20,50,100", "--alpha-sq")
    if any(a <= 0 for a in alpha_sqs):
        raise SchemaError("--alpha-sq values must be > 0")
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_baselines_csv(out_dir / "baselines.csv", baseline_table(alpha_sqs))
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    base = _build_run_config(args)
    alpha_sqs = _parse_float_list(args.alpha_sq_list or str(base.alpha_sq), "--alpha-sq")
    steps_list = _parse_int_list(args.steps_list or str(base.steps), "--steps")
    pnr_list = _parse_int_list(args.pnr_list or str(base.pnr), "--pnr")
    out_dir = Path(base.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    combo = 0
    for asq in alpha_sqs:
        for steps in steps_list:
            for pnr in pnr_list:
                seed = int(np.random.SeedSequence((base.seed, combo)).generate_state(
                    1, np.uint64)[0])
                config = replace(base, alpha_sq=asq, steps=steps, pnr=pnr, seed=seed)
                sub = out_dir / f"a2_{asq:g}_L{steps}_m{pnr}"
                entries.append(_simulate_once(config, sub))
                combo += 1
    write_ensembles_csv(out_dir / "ensembles.csv", entries)
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    entries = []
    for path in args.inputs:
        entries.extend(read_ensembles_csv(path))
    if not entries:
        raise SchemaError("fit inputs contain no ensemble rows")
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)

    exponential_fits = []
    groups: dict[tuple, list[dict]] = {}
    for e in entries:
        groups.setdefault((e["alpha_sq"], e["pnr_m"], e["cost_function"]), []).append(e)
    for (asq, pnr, cost), rows in sorted(groups.items()):
        if len(rows) < 4:
            continue
        points = [(r["steps_L"], r["holevo_variance"], max(r["holevo_stderr"], 1e-12))
                  for r in sorted(rows, key=lambda r: r["steps_L"])]
        exponential_fits.append({"alpha_sq": asq, "pnr_m": pnr, "cost_function": cost,
                                 "fit": fit_exponential(points)})

    power_fits = []
    selections = []
    trend_points: dict[str, list] = {"A1": [], "A3": []}
    by_steps: dict[int, list[dict]] = {}
    for e in entries:
        by_steps.setdefault(e["steps_L"], []).append(e)
    for steps, rows in sorted(by_steps.items()):
        points = [(r["alpha_sq"], r["holevo_variance"], max(r["holevo_stderr"], 1e-12))
                  for r in sorted(rows, key=lambda r: r["alpha_sq"])]
        usable = sum(1 for a, _, _ in points if a > 5.0)
        if usable < 4:
            continue
        fit3 = fit_power_models(points, "y3")
        power_fits.append({"steps_L": steps, "fit": fit3})
        if usable >= 5:  # the full three-term model needs one more point
            selections.append({"steps_L": steps,
                               "selection": backward_eliminate(points)})
        for name in ("A1", "A3"):
            trend_points[name].append((steps, fit3.coefficients[name],
                                       max(fit3.standard_errors[name], 1e-12)))

    extrapolations = []
    for name in ("A1", "A3"):
        if len(trend_points[name]) >= 4:
            trend = extrapolate_coefficients(trend_points[name])
            extrapolations.append({"coefficient": name, "fit": trend,
                                   "limit": trend.coefficients["F"],
                                   "limit_stderr": trend.standard_errors["F"]})

    write_fits_json(out_dir / "fits.json", exponential_fits, power_fits,
                    selections, extrapolations, __version__)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phaseforge",
        description="Adaptive photon-counting phase estimation simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, list_mode: bool = False) -> None:
        if list_mode:
            p.add_argument("--alpha-sq", dest="alpha_sq_list", metavar="LIST",
                           help="comma-separated mean photon numbers")
            p.add_argument("--steps", dest="steps_list", metavar="LIST",
                           help="comma-separated adaptive step counts")
            p.add_argument("--pnr", dest="pnr_list", metavar="LIST",
                           help="comma-separated detector resolutions")
        else:
            p.add_argument("--alpha-sq", dest="alpha_sq", type=float,
                           help="mean photon number |alpha|^2")
            p.add_argument("--steps", dest="steps", type=int,
                           help="number of adaptive steps L")
            p.add_argument("--pnr", dest="pnr", type=int,
                           help="detector photon-number resolution m")
        p.add_argument("--trials", type=int, help="Monte Carlo trials")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--grid", type=int, help="posterior grid size (power of two)")
        p.add_argument("--cost", choices=sorted(COST_ALIASES),
                       help="design cost function")
        p.add_argument("--phase-mode", dest="phase_mode",
                       help="'random' or 'fixed:<radians>'")
        p.add_argument("--theta-candidates", dest="theta_candidates", type=int,
                       help=argparse.SUPPRESS)
        p.add_argument("--refine-iters", dest="refine_iters", type=int,
                       help=argparse.SUPPRESS)
        p.add_argument("--beta-cap-epsilon", dest="beta_cap_epsilon", type=float,
                       help=argparse.SUPPRESS)
        p.add_argument("--out", help="output directory")
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--emit-steps", dest="emit_steps", action="store_true",
                       help="also write per-step trajectories")

    sim = sub.add_parser("simulate", help="run one Monte Carlo ensemble")
    add_common(sim)
    sim.set_defaults(handler=cmd_simulate)

    base = sub.add_parser("baselines", help="emit the benchmark variance table")
    base.add_argument("--alpha-sq", dest="alpha_sq", metavar="LIST",
                      help="comma-separated mean photon numbers")
    base.add_argument("--out", help="output directory")
    base.set_defaults(handler=cmd_baselines)

    sweep = sub.add_parser("sweep", help="cartesian alpha_sq x L x m sweep of simulate")
    add_common(sweep, list_mode=True)
    sweep.set_defaults(handler=cmd_sweep)

    fit = sub.add_parser("fit", help="fit convergence and asymptote models")
    fit.add_argument("inputs", nargs="+", help="ensembles.csv files")
    fit.add_argument("--out", help="output directory")
    fit.set_defaults(handler=cmd_fit)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except SchemaError as err:
        print(f"phaseforge: input error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (PhaseforgeError, OSError, ValueError) as err:
        print(f"phaseforge: error: {err}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
