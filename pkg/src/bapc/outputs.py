"""CSV and JSON writers for experiment results.

CSV files use a header row, commas, LF line endings and 17 significant
digits for reals, so values round-trip exactly. Missing values are empty.
"""

from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

import numpy as np

from bapc import __version__
from bapc.core import SIGN_CONVENTION
from bapc.drag import INTERVALS, DragRun, SweepTable, interval_report
from bapc.newsvendor import McResult, ShiftResult
from bapc.base_models import success_matrix

FITS_COLUMNS = [
    "t",
    "v_true",
    "v_noisy_or_empty",
    "f_theta",
    "f_corrected",
    "f_theta_prime_I1",
    "f_tilde_I1",
    "f_theta_prime_I2",
    "f_tilde_I2",
]
CRITERIA_COLUMNS = [
    "noise",
    "eta",
    "interval",
    "t",
    "y",
    "abs_eps",
    "abs_delta_eps",
    "abs_eps_hat_minus_delta_f",
    "c1_ok",
    "c2_ok",
    "zero_eps",
]
SWEEP_COLUMNS = ["noise", "eta", "radius", "delta1_hat", "delta2_hat", "n_eval"]
MONTHS_COLUMNS = ["index", "demand", "order", "profit", "success", "perturbed"]
CORRECTIONS_COLUMNS = [
    "demand",
    "perturbed",
    "success",
    "s_hat_before",
    "eps_hat",
    "corrected_target",
    "s_hat_after",
]
HISTOGRAM_COLUMNS = ["repeat_index", "corrector", "delta", "delta_lambda"]
DELTA_CURVE_COLUMNS = ["delta", "mean_delta_lambda", "std_delta_lambda", "stderr_delta_lambda", "n_repeats"]
OBJECTIVE_COLUMNS = ["lambda", "objective_step1", "smoothed_step1", "objective_step3", "smoothed_step3"]


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, columns, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(path: Path, payload: dict) -> Path:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def summary_schema() -> dict:
    return json.loads(resources.files("bapc").joinpath("schemas/summary.schema.json").read_text("utf-8"))


def base_summary(experiment: str, config: dict, seed: int, substreams) -> dict:
    return {
        "version": __version__,
        "experiment": experiment,
        "config": config,
        "seeds": {"root": seed, "substreams": sorted(substreams)},
        "sign_convention": SIGN_CONVENTION,
    }


# --------------------------------------------------------------------------
# Drag
# --------------------------------------------------------------------------


def fits_rows(run: DragRun):
    curves = run.curves
    rows = []
    for i, t in enumerate(curves["t"]):
        rows.append((t, 0, [t, curves["v_true"][i], None] + [curves[c][i] for c in FITS_COLUMNS[3:]]))
    fit, corr = run.results["I1"].fit, run.corrector
    t = run.data.t
    extra = {
        "f_theta": fit.predict(t),
        "f_corrected": fit.predict(t) + corr.predict(t),
    }
    for iv in INTERVALS:
        fp = run.results[iv.name].fit_prime
        extra[f"f_theta_prime_{iv.name}"] = fp.predict(t)
        extra[f"f_tilde_{iv.name}"] = 2 * fit.predict(t) - fp.predict(t)
    for i, ti in enumerate(t):
        rows.append((ti, 1, [ti, run.data.v_true[i], run.data.v[i]] + [extra[c][i] for c in FITS_COLUMNS[3:]]))
    rows.sort(key=lambda r: (r[0], r[1]))
    return [r[2] for r in rows]


def criteria_rows(run: DragRun, eta: float):
    rows = []
    for iv in INTERVALS:
        rep = interval_report(run, iv, eta, eta)
        inside = iv.nbhd.contains(run.data.t)
        ys = run.data.v[inside]
        for i in range(rep.n):
            rows.append(
                [
                    run.data.noise.label,
                    eta,
                    iv.name,
                    rep.x[i],
                    ys[i],
                    rep.abs_eps[i],
                    rep.abs_delta_eps[i],
                    rep.abs_fidelity_gap[i],
                    rep.c1_ok[i],
                    rep.c2_ok[i],
                    rep.zero_eps[i],
                ]
            )
    return rows


def sweep_rows(tables: list[SweepTable]):
    return [
        [tab.noise.label, tab.eta, row.radius, row.delta1_hat, row.delta2_hat, row.n_eval]
        for tab in tables
        for row in tab.rows
    ]


def drag_summary(run: DragRun, tables: list[SweepTable], config: dict, seed: int) -> dict:
    out = base_summary("drag", config, seed, ["time-points", "noise", "corrector-init"])
    out["theta"] = run.results["I1"].theta
    out["intervals"] = {}
    for iv in INTERVALS:
        res = run.results[iv.name]
        rep = interval_report(run, iv, 1.0, 1.0)
        out["intervals"][iv.name] = {
            "center": iv.center,
            "radius": iv.radius,
            "theta_prime": res.theta_prime,
            "delta_theta": res.delta_theta,
            "delta_theta_tilde": res.delta_theta_tilde,
            "delta1_hat": rep.delta1_hat,
            "delta2_hat": rep.delta2_hat,
            "n_points": rep.n,
        }
    out["corrector"] = {"kind": run.corrector.kind, **run.corrector.diagnostics}
    if tables:
        out["sweep"] = [
            {"noise": t.noise.label, "eta": t.eta, "delta1_hat": [r.delta1_hat for r in t.rows],
             "delta2_hat": [r.delta2_hat for r in t.rows], "radii": [r.radius for r in t.rows]}
            for t in tables
        ]
    return out


def emit_drag(run: DragRun, tables: list[SweepTable], out_dir, config: dict, seed: int) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    etas = sorted({t.eta for t in tables}, reverse=True) or [1.0]
    return [
        write_csv(out / "fits.csv", FITS_COLUMNS, fits_rows(run)),
        write_csv(out / "criteria.csv", CRITERIA_COLUMNS, [r for e in etas for r in criteria_rows(run, e)]),
        write_csv(out / "delta_sweep.csv", SWEEP_COLUMNS, sweep_rows(tables)),
        write_json(out / "summary.json", drag_summary(run, tables, config, seed)),
    ]


def emit_criteria_sweep(runs: dict, tables: list[SweepTable], out_dir, config: dict, seed: int) -> list[Path]:
    """``runs`` maps noise label to the DragRun used for its tables."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    crit = [r for t in tables for r in criteria_rows(runs[t.noise.label], t.eta)]
    summary = base_summary("criteria-sweep", config, seed, ["time-points", "noise", "corrector-init"])
    summary["sweep"] = [
        {"noise": t.noise.label, "eta": t.eta, "radii": [r.radius for r in t.rows],
         "delta1_hat": [r.delta1_hat for r in t.rows], "delta2_hat": [r.delta2_hat for r in t.rows]}
        for t in tables
    ]
    return [
        write_csv(out / "criteria.csv", CRITERIA_COLUMNS, crit),
        write_csv(out / "delta_sweep.csv", SWEEP_COLUMNS, sweep_rows(tables)),
        write_json(out / "summary.json", summary),
    ]


# --------------------------------------------------------------------------
# Newsvendor
# --------------------------------------------------------------------------


def shift_stats(res: McResult) -> dict:
    return {
        "corrector": res.corrector,
        "delta": res.delta,
        "n_repeats": int(res.shifts.size),
        "mean": res.mean,
        "std": res.std,
        "stderr": res.stderr,
        "min": float(res.shifts.min()),
        "max": float(res.shifts.max()),
    }


def emit_newsvendor(
    months,
    example: ShiftResult,
    mc: McResult,
    curve: list[McResult],
    out_dir,
    config: dict,
    seed: int,
    p: float,
    c: float,
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    month_rows = [
        [i, months.demand[i], months.order[i], months.profit[i], months.success[i], months.perturbed[i]]
        for i in range(len(months))
    ]
    test = example.test
    before = success_matrix([example.lambda_star], test.demand, test.demand, mc.delta, p, c)[0]
    after = success_matrix([example.lambda_prime_star], test.demand, test.demand, mc.delta, p, c)[0]
    order = np.argsort(test.demand, kind="stable")
    corr_rows = [
        [test.demand[i], test.perturbed[i], test.success[i], before[i], example.eps_hat[i],
         example.corrected_targets[i], after[i]]
        for i in order
    ]
    hist_rows = [[k, mc.corrector, mc.delta, s] for k, s in enumerate(mc.shifts)]
    curve_rows = [[r.delta, r.mean, r.std, r.stderr, r.shifts.size] for r in curve]
    s1, s3 = example.step1, example.step3
    obj_rows = [[s1.grid[i], s1.objective[i], s1.smoothed[i], s3.objective[i], s3.smoothed[i]] for i in range(s1.grid.size)]

    summary = base_summary("newsvendor", config, seed, ["demand", "fold-split", "corrector-init"])
    summary["q_hat"] = months.q_hat
    summary["example_repeat"] = {
        "lambda_star": example.lambda_star,
        "lambda_prime_star": example.lambda_prime_star,
        "delta_lambda": example.delta_lambda,
    }
    summary["delta_lambda"] = shift_stats(mc)
    if curve:
        stds = [r.std for r in curve]
        summary["delta_curve"] = {
            "deltas": [r.delta for r in curve],
            "std": stds,
            "delta_star": curve[int(np.argmin(stds))].delta,
        }
    return [
        write_csv(out / "months.csv", MONTHS_COLUMNS, month_rows),
        write_csv(out / "corrections.csv", CORRECTIONS_COLUMNS, corr_rows),
        write_csv(out / "shift_histogram.csv", HISTOGRAM_COLUMNS, hist_rows),
        write_csv(out / "delta_curve.csv", DELTA_CURVE_COLUMNS, curve_rows),
        write_csv(out / "objective.csv", OBJECTIVE_COLUMNS, obj_rows),
        write_json(out / "summary.json", summary),
    ]
