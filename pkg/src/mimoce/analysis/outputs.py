"""CSV/JSON writers for experiment bundles."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

__all__ = ["RESULT_COLUMNS", "FIGURE_AXES", "emit_outputs", "write_results_csv", "read_results_csv", "figure_tables"]

RESULT_COLUMNS = ["estimator", "snr_db", "angular_spread_deg", "n_antennas", "n_rf", "rf_ratio",
                  "mse_linear", "mse_db", "stderr", "n", "seed", "config_hash"]

# figure name -> x-axis column
FIGURE_AXES = {
    "mse_vs_snr": "snr_db",
    "mse_vs_angular_spread": "angular_spread_deg",
    "mse_vs_n_antennas": "n_antennas",
    "mse_vs_rf_ratio": "rf_ratio",
}

_INT_COLUMNS = {"n_antennas", "n_rf", "n", "seed"}
_STR_COLUMNS = {"estimator", "config_hash"}


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_results_csv(rows: list[dict], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=RESULT_COLUMNS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k)) for k in RESULT_COLUMNS})
    return path


def read_results_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        for raw in csv.DictReader(f):
            row = {}
            for k, v in raw.items():
                if k in _STR_COLUMNS:
                    row[k] = v
                elif k in _INT_COLUMNS:
                    row[k] = int(v)
                else:
                    row[k] = float(v)
            rows.append(row)
    return rows


def figure_tables(rows: list[dict]) -> dict[str, tuple[list[str], list[list]]]:
    """Wide MSE (dB) tables, one per figure axis, for every fixed combination of the other axes."""
    tables = {}
    estimators = sorted({r["estimator"] for r in rows})
    for name, axis in FIGURE_AXES.items():
        others = [a for a in FIGURE_AXES.values() if a != axis and a != "n_rf"]
        header = others + [axis] + estimators
        grouped: dict[tuple, dict] = {}
        for r in rows:
            key = tuple(r[a] for a in others) + (r[axis],)
            grouped.setdefault(key, {})[r["estimator"]] = r["mse_db"]
        body = [list(k) + [grouped[k].get(e, "") for e in estimators] for k in sorted(grouped)]
        tables[name] = (header, body)
    return tables


def emit_outputs(bundle: dict, out_dir, formats=("csv", "json")) -> list[Path]:
    """Write ``results.csv`` (long format), ``results.json`` (provenance) and per-figure CSVs."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot write outputs to {out_dir}: {exc}") from exc
    rows = bundle.get("rows", [])
    for r in rows:
        if r.get("mse_linear", 0) > 0 and not math.isclose(r["mse_db"], 10 * math.log10(r["mse_linear"]),
                                                           rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"row {r} has an inconsistent dB column")
    written = []
    if "csv" in formats:
        written.append(write_results_csv(rows, out_dir / "results.csv"))
        for name, (header, body) in figure_tables(rows).items():
            p = out_dir / f"{name}.csv"
            with open(p, "w", newline="", encoding="utf-8") as f:
                w = csv.writer(f, lineterminator="\n")
                w.writerow(header)
                w.writerows([[_fmt(v) for v in line] for line in body])
            written.append(p)
    if "json" in formats:
        p = out_dir / "results.json"
        p.write_text(json.dumps(bundle, indent=1, sort_keys=True, default=_json_default), encoding="utf-8")
        written.append(p)
    return written


def _json_default(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "__dict__"):
        return o.__dict__
    raise TypeError(f"cannot serialise {type(o).__name__}")
