"""Command-line entry point.

Four commands:

- ``run CONFIG``: run a YAML config file or a named scenario, write the
  records table and ``summary.json`` into the output directory, print
  the bound verdicts.
- ``check RECORDS CONFIG``: re-evaluate the config's bounds against
  previously written records.
- ``report RECORDS``: print a plain-text digest of written records.
- ``list-scenarios``: one line per registered scenario.

Exit codes: 0 on success, 2 when any checked bound is violated, 1 on
errors (bad config, unreadable records, missing data).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from ..errors import ConfigError, MdlPredictError
from .bounds import evaluate_bounds
from .config import config_hash, resolve_config
from .report import (
    read_records,
    read_summary,
    render_report,
    summary_path_for,
    write_csv,
    write_json,
    write_summary,
)
from .runner import run_experiment
from .scenarios import list_scenarios


def _resolve_cli_config(spec: str, seed: int | None) -> dict:
    """CONFIG argument: a YAML file path or a registered scenario name."""
    path = Path(spec)
    if path.exists():
        with path.open("r", encoding="utf-8") as fh:
            try:
                raw = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise ConfigError(f"{spec}: not parseable as YAML ({exc})") from exc
        if raw is None:
            raise ConfigError(f"{spec}: the file is empty")
    elif spec in {name for name, _ in list_scenarios()}:
        raw = {"scenario": spec}
    else:
        raise ConfigError(
            f"{spec}: neither a config file nor a scenario name; "
            "try 'mdlpredict list-scenarios'"
        )
    if seed is not None:
        raw = dict(raw)
        raw["seed"] = seed
    return resolve_config(raw)


def _print_verdicts(verdicts) -> int:
    if not verdicts:
        print("no bounds declared")
        return 0
    failed = False
    for v in verdicts:
        print(v.line())
        failed = failed or not v.passed
    return 2 if failed else 0


def _cmd_run(args) -> int:
    cfg = _resolve_cli_config(args.config, args.seed)
    result = run_experiment(cfg, jobs=args.jobs)
    verdicts = evaluate_bounds(cfg, result.trajectory_summaries)

    out_dir = Path(args.out) if args.out else Path("runs") / result.run_id
    out_dir.mkdir(parents=True, exist_ok=True)
    records = out_dir / f"records.{args.format}"
    if args.format == "csv":
        write_csv(result, records)
    else:
        write_json(result, records)
    write_summary(result, verdicts, out_dir / "summary.json")

    print(f"wrote {records}")
    print(f"wrote {out_dir / 'summary.json'}")
    return _print_verdicts(verdicts)


def _cmd_check(args) -> int:
    cfg = _resolve_cli_config(args.config, None)
    rows = read_records(args.records)
    expected = config_hash(cfg)
    if rows and rows[0]["run_id"] != expected[:12]:
        print(f"error: records were produced by run {rows[0]['run_id']}, "
              f"the given config hashes to {expected[:12]}", file=sys.stderr)
        return 1

    spath = summary_path_for(args.records)
    if not spath.exists():
        print(f"error: {spath} not found; bound checks read the trajectory "
              "summaries written next to the records", file=sys.stderr)
        return 1
    summary = read_summary(spath)
    if summary.get("config_hash") != expected:
        print("error: summary.json belongs to a different config "
              f"({summary.get('config_hash', '?')[:12]} != {expected[:12]})",
              file=sys.stderr)
        return 1
    verdicts = evaluate_bounds(cfg, summary["trajectory_summaries"])
    return _print_verdicts(verdicts)


def _cmd_report(args) -> int:
    rows = read_records(args.records)
    spath = summary_path_for(args.records)
    summary = read_summary(spath) if spath.exists() else None
    print(render_report(summary, rows), end="")
    return 0


def _cmd_list(_args) -> int:
    for name, desc in list_scenarios():
        print(f"{name:<26} {desc}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdlpredict",
        description="online sequence prediction experiments over countable model classes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a config file or named scenario")
    p_run.add_argument("config", help="YAML config path or scenario name")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the config's master seed")
    p_run.add_argument("--out", default=None,
                       help="output directory (default: runs/<run_id>)")
    p_run.add_argument("--jobs", type=int, default=None,
                       help="worker processes (default: MDLPREDICT_JOBS or 1)")
    p_run.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="records file format")
    p_run.set_defaults(func=_cmd_run)

    p_check = sub.add_parser("check", help="re-check bounds against written records")
    p_check.add_argument("records", help="records file a run wrote")
    p_check.add_argument("config", help="YAML config path or scenario name")
    p_check.set_defaults(func=_cmd_check)

    p_report = sub.add_parser("report", help="print a digest of written records")
    p_report.add_argument("records", help="records file a run wrote")
    p_report.set_defaults(func=_cmd_report)

    p_list = sub.add_parser("list-scenarios", help="list registered scenarios")
    p_list.set_defaults(func=_cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MdlPredictError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
