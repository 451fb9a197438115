"""Operator command line.

Exit codes are a stable contract:
    0  clean (no findings at/above --fail-on; no changes for diff)
    1  operational error (unreadable file, bad config, locked data dir...)
    2  audit findings at or above the --fail-on threshold
    3  diff: changes present, none triggering
    4  diff: changes present and at least one alert trigger matched
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from eucctl.changes import AlertRuleSet, ChangeLog, apply_alert_rules, diff as diff_workbooks
from eucctl.ingest import FileFormat, IngestError, import_xlsx, sniff_format
from eucctl.integrity import SEVERITY_RANK, Severity
from eucctl.inventory import Registry, demo_seed_specs
from eucctl.model import WorkbookError, Workbook, parse_canonical
from eucctl.standards import (
    AuditReport,
    ConfigError,
    EffortWeights,
    RuleConfig,
    audit,
    build_plan,
)

SCHEMA_VERSION = 1

DEFAULT_DATA_DIR = "euc_data"


class CliError(Exception):
    pass


def _data_dir(value: str | None) -> Path:
    return Path(value or os.environ.get("EUCCTL_DATA_DIR") or DEFAULT_DATA_DIR)


def load_workbook_file(path: str | Path) -> Workbook:
    """Sniff and load either canonical JSON or an xlsx/CFB container."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    if sniff_format(data) is not FileFormat.UNKNOWN:
        try:
            return import_xlsx(data, name=Path(path).stem).workbook
        except IngestError as exc:
            raise CliError(f"cannot import {path}: {exc}") from exc
    try:
        return parse_canonical(data.decode("utf-8"))
    except (UnicodeDecodeError, WorkbookError) as exc:
        raise CliError(f"{path} is neither an xlsx container nor canonical JSON: {exc}") from exc


def _load_config(path: str | None):
    if path is None:
        return RuleConfig(), EffortWeights()
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        rules = RuleConfig.from_dict(doc.get("rules", {}))
        effort = EffortWeights.from_dict(doc.get("effort", {}))
        return rules, effort
    except (OSError, json.JSONDecodeError, ConfigError, ValueError) as exc:
        raise CliError(f"bad config {path}: {exc}") from exc


# --- lock file ------------------------------------------------------------------


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


def acquire_data_dir_lock(data_dir: Path) -> Path:
    """Exclusive writer lock; stale locks from killed processes are
    reclaimed by a pid liveness check."""
    data_dir.mkdir(parents=True, exist_ok=True)
    lock_path = data_dir / "lock"
    if lock_path.exists():
        try:
            other = int(lock_path.read_text().strip() or "0")
        except ValueError:
            other = 0
        if other and _pid_alive(other):
            raise CliError(
                f"data-dir-locked: {data_dir} is owned by running process {other}"
            )
        lock_path.unlink(missing_ok=True)
    fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    with os.fdopen(fd, "w") as fh:
        fh.write(str(os.getpid()))
    return lock_path


# --- audit -----------------------------------------------------------------------


def _print_report_text(report: AuditReport, out) -> None:
    for finding in report.findings:
        where = finding.sheet or "workbook"
        if finding.addr is not None:
            where = f"{finding.sheet}!{finding.addr.a1}"
        line = f"{finding.severity.value.upper():6} {finding.rule_id:10} {where:20} {finding.message}"
        print(line, file=out)
        if finding.evidence:
            print(f"       {'':10} {'':20} evidence: {finding.evidence}", file=out)
    passed = len(report.rules_passed)
    failed = len(report.failed_rule_ids)
    print(
        f"{report.workbook_name}: {len(report.findings)} finding(s), "
        f"score {report.compliance_score:.2f} ({passed}/{passed + failed} rules passed)",
        file=out,
    )


def cmd_audit(args) -> int:
    rules, _ = _load_config(args.config)
    wb = load_workbook_file(args.file)
    report = audit(wb, rules, source_path=str(Path(args.file).resolve()))
    if args.format == "json":
        print(json.dumps(report.to_dict(), indent=2))
    else:
        _print_report_text(report, sys.stdout)
    threshold = SEVERITY_RANK[Severity(args.fail_on)]
    gate_hit = any(SEVERITY_RANK[f.severity] >= threshold for f in report.findings)
    return 2 if gate_hit else 0


# --- diff ------------------------------------------------------------------------


def cmd_diff(args) -> int:
    old = load_workbook_file(args.old)
    new = load_workbook_file(args.new)
    changes, structural = diff_workbooks(old, new)
    if args.rules:
        try:
            rules = AlertRuleSet.load(args.rules)
        except (OSError, ValueError) as exc:
            raise CliError(f"bad rules file {args.rules}: {exc}") from exc
        triggered = apply_alert_rules(changes, structural, old, rules)
    else:
        triggered = []
    if args.format == "json":
        print(
            json.dumps(
                {
                    "schema_version": SCHEMA_VERSION,
                    "changes": [c.to_dict() for c in changes],
                    "structural": structural,
                    "triggered_rules": triggered,
                },
                indent=2,
            )
        )
    else:
        for change in changes:
            before = change.before.formula or (
                change.before.value.raw if change.before else None
            )
            after = change.after.formula or (
                change.after.value.raw if change.after else None
            )
            print(
                f"{change.kind.value:16} {change.sheet}!{change.addr.a1:8} "
                f"{before!r} -> {after!r}"
            )
        if structural:
            print("structural change detected")
        if triggered:
            print("triggered: " + ", ".join(triggered))
        print(f"{len(changes)} cell change(s)")
    if not changes and not structural:
        return 0
    return 4 if triggered else 3


# --- plan ------------------------------------------------------------------------


def cmd_plan(args) -> int:
    _, effort = _load_config(args.config)
    try:
        with open(args.report, encoding="utf-8") as fh:
            report = AuditReport.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise CliError(f"cannot read report {args.report}: {exc}") from exc
    plan = build_plan(report, effort)
    print(json.dumps(plan.to_dict(), indent=2))
    return 0


# --- service ----------------------------------------------------------------------


def cmd_serve(args) -> int:
    import uvicorn

    from eucctl.service import ServiceConfig, create_app

    data_dir = _data_dir(args.data_dir)
    lock_path = acquire_data_dir_lock(data_dir)
    try:
        if args.config:
            try:
                config = ServiceConfig.load(args.config)
            except (OSError, json.JSONDecodeError, ValueError) as exc:
                raise CliError(f"bad config {args.config}: {exc}") from exc
        else:
            config = ServiceConfig()
        registry = Registry(data_dir)
        changelog = ChangeLog(data_dir)
        static_dir = args.static_dir if args.static_dir and Path(args.static_dir).is_dir() else None
        app = create_app(registry, changelog, config, static_dir=static_dir)
        try:
            uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
        except SystemExit as exc:  # uvicorn raises on bind failure
            raise CliError(
                f"cannot serve on port {args.port} (already in use?)"
            ) from exc
        registry.compact()
        registry.close()
        changelog.close()
        return 0
    finally:
        lock_path.unlink(missing_ok=True)


def cmd_seed_demo(args) -> int:
    data_dir = _data_dir(args.data_dir)
    lock_path = acquire_data_dir_lock(data_dir)
    try:
        registry = Registry(data_dir)
        created = registry.register_many(demo_seed_specs(), principal="seed-demo")
        registry.compact()
        registry.close()
        print(f"seeded {len(created)} records into {data_dir}")
        return 0
    finally:
        lock_path.unlink(missing_ok=True)


# --- entry point --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eucctl",
        description="Audit, diff and inventory controls for EUC spreadsheets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_audit = sub.add_parser("audit", help="audit a workbook against the design standards")
    p_audit.add_argument("file", help="canonical JSON or xlsx workbook")
    p_audit.add_argument("--config", help="JSON config with rule parameters")
    p_audit.add_argument("--format", choices=("text", "json"), default="text")
    p_audit.add_argument(
        "--fail-on",
        choices=("high", "medium", "low"),
        default="high",
        help="lowest severity that makes the exit code 2 (default high)",
    )
    p_audit.set_defaults(func=cmd_audit)

    p_diff = sub.add_parser("diff", help="cell-level diff of two workbook versions")
    p_diff.add_argument("old")
    p_diff.add_argument("new")
    p_diff.add_argument("--rules", help="JSON alert rule set to evaluate")
    p_diff.add_argument("--format", choices=("text", "json"), default="text")
    p_diff.set_defaults(func=cmd_diff)

    p_plan = sub.add_parser("plan", help="build a remediation plan from an audit report")
    p_plan.add_argument("report", help="audit report JSON (from audit --format json)")
    p_plan.add_argument("--config", help="JSON config with effort weights")
    p_plan.set_defaults(func=cmd_plan)

    p_serve = sub.add_parser("serve", help="run the inventory/changes HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8377)
    p_serve.add_argument("--data-dir", help="state directory (default $EUCCTL_DATA_DIR)")
    p_serve.add_argument("--config", help="JSON config (rules/effort/alerts)")
    p_serve.add_argument("--static-dir", help="directory with the web UI build to serve at /")
    p_serve.set_defaults(func=cmd_serve)

    p_seed = sub.add_parser("seed-demo", help="load the demo registry (700 financial / 200 operational)")
    p_seed.add_argument("--data-dir", help="state directory (default $EUCCTL_DATA_DIR)")
    p_seed.set_defaults(func=cmd_seed_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"eucctl: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
