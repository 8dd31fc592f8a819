"""Record serialization and run reports.

A run writes two files: a records table (CSV by default, JSON on
request) with one row per (trajectory, checkpoint, predictor), and a
``summary.json`` next to it holding the config, the per-trajectory
summaries and the bound verdicts. Floats are written with ``repr`` so
a rerun of the same config and seed reproduces both files byte for
byte.

``read_records`` and ``read_summary`` invert the writers; the check
and report commands work entirely from these files.
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import asdict
from pathlib import Path

from .bounds import Verdict
from .runner import COLUMNS, RunResult

_INT_COLUMNS = {"trajectory", "step", "selected_index", "errors_cum", "seed"}
_FLOAT_COLUMNS = {"score_bits", "d_h", "d_h_stderr", "log_ratio_bits",
                  "value_sel", "value_true", "value_gap"}


def _cell(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(result: RunResult, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in result.rows:
            writer.writerow([_cell(row[c]) for c in COLUMNS])


def write_json(result: RunResult, path) -> None:
    path = Path(path)
    payload = {"columns": list(COLUMNS),
               "rows": [[row[c] for c in COLUMNS] for row in result.rows]}
    with path.open("w") as fh:
        json.dump(payload, fh, separators=(",", ":"))
        fh.write("\n")


def _parse_cell(column: str, text: str):
    if text == "":
        return None
    if column in _INT_COLUMNS:
        return int(text)
    if column in _FLOAT_COLUMNS:
        return float(text)
    return text


def read_records(path) -> list[dict]:
    """Rows of a records file as dicts keyed by column name."""
    path = Path(path)
    if path.suffix == ".json":
        with path.open() as fh:
            payload = json.load(fh)
        cols = payload["columns"]
        return [dict(zip(cols, row)) for row in payload["rows"]]
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        return [{c: _parse_cell(c, row[c]) for c in reader.fieldnames}
                for row in reader]


def write_summary(result: RunResult, verdicts: list[Verdict], path) -> None:
    path = Path(path)
    payload = {
        "config": result.config,
        "config_hash": result.config_hash,
        "run_id": result.run_id,
        "verdicts": [asdict(v) for v in verdicts],
        "trajectory_summaries": result.trajectory_summaries,
    }
    with path.open("w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_summary(path) -> dict:
    with Path(path).open() as fh:
        return json.load(fh)


def summary_path_for(records_path) -> Path:
    """The summary file written alongside a records file."""
    return Path(records_path).with_name("summary.json")


# --- human-readable report ---------------------------------------------------


def _median_by(rows: list[dict], key: str, predictor: str, step: int):
    vals = [r[key] for r in rows
            if r["predictor"] == predictor and r["step"] == step
            and r[key] is not None]
    return statistics.median(vals) if vals else None


def render_report(summary: dict | None, rows: list[dict]) -> str:
    """Plain-text digest of one run: header, verdicts, final-step medians."""
    lines: list[str] = []
    if summary is not None:
        cfg = summary["config"]
        name = cfg.get("scenario") or "custom config"
        lines.append(f"run {summary['run_id']}  ({name})")
        if cfg.get("description"):
            lines.append(cfg["description"])
        lines.append(f"trajectories {cfg['trajectories']}, steps {cfg['steps']}, "
                     f"horizon {cfg['horizon']}, seed {cfg['seed']}")
        lines.append("")
        verdicts = summary.get("verdicts", [])
        if verdicts:
            lines.append("bounds:")
            for v in verdicts:
                status = "PASS" if v["passed"] else "FAIL"
                lines.append(f"  {status} {v['name']}: {v['detail']}")
        else:
            lines.append("bounds: none declared")
        lines.append("")

    if rows:
        preds = sorted({r["predictor"] for r in rows})
        last = max(r["step"] for r in rows)
        lines.append(f"final checkpoint (step {last}) medians over trajectories:")
        for p in preds:
            parts = [f"  {p:<13}"]
            d = _median_by(rows, "d_h", p, last)
            if d is not None:
                parts.append(f"d_h {d:.6f}")
            e = _median_by(rows, "errors_cum", p, last)
            if e is not None:
                parts.append(f"errors {e:g}")
            g = _median_by(rows, "value_gap", p, last)
            if g is not None:
                parts.append(f"value gap {g:.6f}")
            s = _median_by(rows, "score_bits", p, last)
            if s is not None:
                parts.append(f"score {s:.3f} bits")
            lines.append("  ".join(parts))
    else:
        lines.append("no rows recorded")
    return "\n".join(lines) + "\n"
