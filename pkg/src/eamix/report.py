"""Deterministic report writers.

report.json carries the whole bundle; the CSV files are projections of the
same bundle, cell for cell, so the two formats can never drift apart. No
timestamps, no environment data: bytes depend only on the config.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .schemas import AnalyzeBundle, Bundle, CurveBundle, DesignBundle, SimulateBundle

ANALYZE_HEADER = ["strategy", "rho_T", "rate_R", "hitting_T", "m_min", "m_max", "m_mean", "traps"]
RUNS_HEADER = ["strategy", "run_index", "start_state", "generations", "censored", "final_fitness"]
CURVE_HEADER = ["rho", "rate_R", "hitting_T", "product"]


def encode_num(value) -> float | int | str | None:
    """Report-safe number: plain int/float, or 'inf'/'-inf'/'nan' strings."""
    if value is None:
        return None
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("booleans are not report numbers")
    if isinstance(value, (int, np.integer)):
        return int(value)
    value = float(value)
    if math.isfinite(value):
        return value
    if math.isnan(value):
        return "nan"
    return "inf" if value > 0 else "-inf"


def _cell(value) -> str:
    """One CSV cell, byte-identical to the JSON rendering of the same value."""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ";".join(str(v) for v in value)
    if value is None:
        return ""
    raise TypeError(f"no CSV rendering for {type(value).__name__}")


def to_json_bytes(bundle: Bundle) -> bytes:
    payload = bundle.model_dump(mode="python")
    return (json.dumps(payload, indent=2, allow_nan=False, ensure_ascii=False) + "\n").encode()


def _csv_bytes(header: list[str], rows: list[list]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue().encode()


def analyze_csv_bytes(bundle: AnalyzeBundle | DesignBundle) -> bytes:
    if isinstance(bundle, AnalyzeBundle):
        rows = list(bundle.strategies)
    else:
        rows = list(bundle.baselines) + ([bundle.designed] if bundle.designed else [])
    table = [
        [r.strategy, r.rho_T, r.rate_R, r.hitting_T, r.m_min, r.m_max, r.m_mean, r.traps]
        for r in rows
    ]
    return _csv_bytes(ANALYZE_HEADER, table)


def runs_csv_bytes(bundle: SimulateBundle) -> bytes:
    table = [
        [r.strategy, r.run_index, r.start_state, r.generations, r.censored, r.final_fitness]
        for r in bundle.run_rows
    ]
    return _csv_bytes(RUNS_HEADER, table)


def curve_csv_bytes(bundle: CurveBundle) -> bytes:
    table = [[r.rho, r.rate_R, r.hitting_T, r.product] for r in bundle.rows]
    return _csv_bytes(CURVE_HEADER, table)


def write_bundle(bundle: Bundle, out_dir: str | Path) -> list[Path]:
    """Write report.json plus the bundle's CSV projection; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "report.json"]
    written[0].write_bytes(to_json_bytes(bundle))
    if isinstance(bundle, (AnalyzeBundle, DesignBundle)):
        path = out / "report.csv"
        path.write_bytes(analyze_csv_bytes(bundle))
        written.append(path)
    elif isinstance(bundle, SimulateBundle):
        path = out / "runs.csv"
        path.write_bytes(runs_csv_bytes(bundle))
        written.append(path)
    elif isinstance(bundle, CurveBundle):
        path = out / "curve.csv"
        path.write_bytes(curve_csv_bytes(bundle))
        written.append(path)
    return written
