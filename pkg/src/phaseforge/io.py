"""CSV and JSON persistence with explicit schema versioning.

Every file starts with a schema marker; readers reject unknown versions.
Angles are written with 17 significant digits so float64 values survive a
round trip bit-for-bit.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .baselines import BaselineRow
from .errors import SchemaError
from .fitting import FitResult, ModelSelection
from .model import wrap_signed
from .strategy import EnsembleResult, TrialRecord

TRIALS_SCHEMA = "phaseforge.trials.v1"
STEPS_SCHEMA = "phaseforge.steps.v1"
ENSEMBLES_SCHEMA = "phaseforge.ensembles.v1"
BASELINES_SCHEMA = "phaseforge.baselines.v1"
SUMMARY_SCHEMA = "phaseforge.summary.v1"
FITS_SCHEMA = "phaseforge.fits.v1"

TRIALS_COLUMNS = ["trial", "seed", "true_phase", "final_estimate", "delta",
                  "final_theta", "final_beta_mag"]
STEPS_COLUMNS = ["trial", "step", "theta", "beta_magnitude", "outcome",
                 "map_estimate", "mean_estimate", "delta_design"]
ENSEMBLES_COLUMNS = ["alpha_sq", "steps_L", "pnr_m", "trials", "cost_function",
                     "holevo_variance", "holevo_stderr", "mean_delta_design_final"]
BASELINES_COLUMNS = ["alpha_sq", "qcrb", "heterodyne", "mkii_asymptotic",
                     "cpm_exact", "cpm_asymptotic", "nongaussian_asymptotic",
                     "excess_heterodyne", "excess_mkii_asymptotic",
                     "excess_cpm_asymptotic", "excess_nongaussian_asymptotic"]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, schema: str, columns: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {schema}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)


def _read_csv(path: Path, schema: str, columns: list[str]) -> list[dict[str, str]]:
    with open(path, "r", newline="") as fh:
        first = fh.readline().strip()
        if first != f"# {schema}":
            raise SchemaError(f"{path}: expected schema '# {schema}', got {first!r}")
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration as err:
            raise SchemaError(f"{path}: missing header row") from err
        if header != columns:
            raise SchemaError(f"{path}: header {header} != expected {columns}")
        out = []
        for lineno, row in enumerate(reader, start=3):
            if len(row) != len(columns):
                raise SchemaError(f"{path}:{lineno}: expected {len(columns)} fields, "
                                  f"got {len(row)}")
            out.append(dict(zip(columns, row)))
        return out


def write_trials_csv(path, records: list[TrialRecord]) -> None:
    rows = []
    for t, rec in enumerate(records):
        delta = wrap_signed(rec.final_estimate - rec.true_phase)
        rows.append([t, rec.seed, _fmt(rec.true_phase), _fmt(rec.final_estimate),
                     _fmt(delta), _fmt(rec.thetas[-1]), _fmt(rec.beta_mags[-1])])
    _write_csv(Path(path), TRIALS_SCHEMA, TRIALS_COLUMNS, rows)


def write_steps_csv(path, records: list[TrialRecord]) -> None:
    rows = []
    for t, rec in enumerate(records):
        for l in range(rec.steps):
            rows.append([t, l, _fmt(rec.thetas[l]), _fmt(rec.beta_mags[l]),
                         int(rec.outcomes[l]), _fmt(rec.map_estimates[l]),
                         _fmt(rec.mean_estimates[l]), _fmt(rec.delta_designs[l])])
    _write_csv(Path(path), STEPS_SCHEMA, STEPS_COLUMNS, rows)


def read_trials_csv(path) -> list[dict]:
    rows = _read_csv(Path(path), TRIALS_SCHEMA, TRIALS_COLUMNS)
    out = []
    for row in rows:
        out.append({
            "trial": int(row["trial"]),
            "seed": int(row["seed"]),
            "true_phase": float(row["true_phase"]),
            "final_estimate": float(row["final_estimate"]),
            "delta": float(row["delta"]),
            "final_theta": float(row["final_theta"]),
            "final_beta_mag": float(row["final_beta_mag"]),
        })
    return out


def load_trial_records(trials_path, steps_path) -> list[TrialRecord]:
    """Rebuild full TrialRecords from a trials.csv + steps.csv pair."""
    trials = read_trials_csv(trials_path)
    steps = _read_csv(Path(steps_path), STEPS_SCHEMA, STEPS_COLUMNS)
    per_trial: dict[int, list[dict[str, str]]] = {}
    for row in steps:
        per_trial.setdefault(int(row["trial"]), []).append(row)
    records = []
    for trial in trials:
        t = trial["trial"]
        rows = sorted(per_trial.get(t, []), key=lambda r: int(r["step"]))
        if not rows:
            raise SchemaError(f"steps file has no rows for trial {t}")
        records.append(TrialRecord(
            true_phase=trial["true_phase"],
            seed=trial["seed"],
            thetas=np.array([float(r["theta"]) for r in rows]),
            beta_mags=np.array([float(r["beta_magnitude"]) for r in rows]),
            outcomes=np.array([int(r["outcome"]) for r in rows], dtype=np.int64),
            map_estimates=np.array([float(r["map_estimate"]) for r in rows]),
            mean_estimates=np.array([float(r["mean_estimate"]) for r in rows]),
            delta_designs=np.array([float(r["delta_design"]) for r in rows]),
            final_estimate=trial["final_estimate"],
        ))
    return records


def write_summary_json(path, result: EnsembleResult, config_echo: dict,
                       version: str) -> None:
    payload = {
        "schema": SUMMARY_SCHEMA,
        "artifact_version": version,
        "config": config_echo,
        "trials": result.trials,
        "excluded_trials": result.excluded_trials,
        "holevo_variance": result.holevo_variance,
        "holevo_stderr": result.holevo_stderr,
        "mean_delta_design_final": result.mean_delta_design_final,
        "per_step_holevo": [None if math.isinf(v) else v
                            for v in result.per_step_holevo.tolist()],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_summary_json(path) -> dict:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("schema") != SUMMARY_SCHEMA:
        raise SchemaError(f"{path}: unknown summary schema {payload.get('schema')!r}")
    return payload


def write_baselines_csv(path, rows: list[BaselineRow]) -> None:
    out = []
    for r in rows:
        out.append([_fmt(r.alpha_sq), _fmt(r.qcrb), _fmt(r.heterodyne),
                    _fmt(r.mkii_asymptotic), _fmt(r.cpm_exact),
                    _fmt(r.cpm_asymptotic), _fmt(r.nongaussian_asymptotic),
                    _fmt(r.heterodyne - r.cpm_exact),
                    _fmt(r.mkii_asymptotic - r.cpm_exact),
                    _fmt(r.cpm_asymptotic - r.cpm_exact),
                    _fmt(r.nongaussian_asymptotic - r.cpm_exact)])
    _write_csv(Path(path), BASELINES_SCHEMA, BASELINES_COLUMNS, out)


def read_baselines_csv(path) -> list[dict]:
    rows = _read_csv(Path(path), BASELINES_SCHEMA, BASELINES_COLUMNS)
    return [{k: float(v) for k, v in row.items()} for row in rows]


def write_ensembles_csv(path, entries: list[dict]) -> None:
    rows = []
    for e in entries:
        rows.append([_fmt(e["alpha_sq"]), int(e["steps_L"]), int(e["pnr_m"]),
                     int(e["trials"]), e["cost_function"],
                     _fmt(e["holevo_variance"]), _fmt(e["holevo_stderr"]),
                     _fmt(e["mean_delta_design_final"])])
    _write_csv(Path(path), ENSEMBLES_SCHEMA, ENSEMBLES_COLUMNS, rows)


def read_ensembles_csv(path) -> list[dict]:
    rows = _read_csv(Path(path), ENSEMBLES_SCHEMA, ENSEMBLES_COLUMNS)
    out = []
    for lineno, row in enumerate(rows, start=3):
        try:
            out.append({
                "alpha_sq": float(row["alpha_sq"]),
                "steps_L": int(row["steps_L"]),
                "pnr_m": int(row["pnr_m"]),
                "trials": int(row["trials"]),
                "cost_function": row["cost_function"],
                "holevo_variance": float(row["holevo_variance"]),
                "holevo_stderr": float(row["holevo_stderr"]),
                "mean_delta_design_final": float(row["mean_delta_design_final"]),
            })
        except ValueError as err:
            raise SchemaError(f"{path}:{lineno}: {err}") from err
    return out


def _fit_payload(fit: FitResult) -> dict:
    return {
        "model_id": fit.model_id,
        "coefficients": fit.coefficients,
        "standard_errors": fit.standard_errors,
        "p_values": fit.p_values,
        "residual_standard_error": fit.residual_standard_error,
        "covariance": fit.covariance.tolist(),
        "dof": fit.dof,
    }


def write_fits_json(path, exponential_fits: list[dict], power_fits: list[dict],
                    selections: list[dict], extrapolations: list[dict],
                    version: str) -> None:
    def encode(entry: dict) -> dict:
        out = dict(entry)
        if isinstance(out.get("fit"), FitResult):
            out["fit"] = _fit_payload(out["fit"])
        if isinstance(out.get("selection"), ModelSelection):
            sel = out.pop("selection")
            out["status"] = sel.status
            out["model_id"] = sel.model_id
            out["steps"] = sel.steps
            out["fit"] = _fit_payload(sel.fit)
        return out

    payload = {
        "schema": FITS_SCHEMA,
        "artifact_version": version,
        "exponential_fits": [encode(e) for e in exponential_fits],
        "power_fits": [encode(e) for e in power_fits],
        "eliminations": [encode(e) for e in selections],
        "extrapolations": [encode(e) for e in extrapolations],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_fits_json(path) -> dict:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("schema") != FITS_SCHEMA:
        raise SchemaError(f"{path}: unknown fits schema {payload.get('schema')!r}")
    return payload
