"""Design-standards audit: rule catalogue, gap analysis, compliance score,
remediation planning and the QA re-check.

The DS rules encode the construction standards a controlled file must
meet (documentation template, labelling, separation of concerns, cell
locking, check cells, change/review logs, transparency, security).  The
audit runs them together with the integrity checks and reports a
compliance score of passed / applicable rules.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum
from pathlib import Path, PurePath

from eucctl.model import CellAddr, Sheet, SheetPurpose, SourceFormat, Workbook, col_to_letters
from eucctl.integrity import (
    DEFAULT_CONSTANT_EXEMPTIONS,
    Finding,
    INTEGRITY_RULES,
    Severity,
    finding_sort_key,
    run_integrity_checks,
)
from eucctl.formula.precedents import DEFAULT_VOLATILE_FUNCTIONS, ReferenceIndex, referenced_by
from eucctl.util import format_ts, parse_ts, utc_now

STANDARDS_RULES = (
    "DS-DOC-01",
    "DS-LAB-01",
    "DS-SEP-01",
    "DS-LOCK-01",
    "DS-CHK-01",
    "DS-LOG-01",
    "DS-LOG-02",
    "DS-TRA-01",
    "DS-SEC-01",
)

ARCHIVE_RULE = "ARC-01"

KNOWN_RULES = frozenset(STANDARDS_RULES) | frozenset(INTEGRITY_RULES) | {ARCHIVE_RULE}

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RuleConfig:
    """Per-deployment rule parameters.  Defaults are the published
    templates; everything is overridable from a JSON config file."""

    enabled_rules: frozenset[str] = frozenset(STANDARDS_RULES) | frozenset(INTEGRITY_RULES)
    documentation_sheet: str = "Documentation"
    required_doc_labels: tuple[str, ...] = ("Purpose", "Owner", "Version", "Last Updated")
    change_log_sheet: str = "Change_Log"
    change_log_headers: tuple[str, ...] = (
        "Date",
        "Author",
        "Description",
        "Reason",
        "Reviewer",
        "Review Date",
    )
    review_log_sheet: str = "Review_Log"
    review_log_headers: tuple[str, ...] = ("Date", "Check Performed", "Result", "Reviewer")
    check_prefix: str = "CHK_"
    header_row: int = 1
    require_units_marker: bool = False
    units_marker: str = "Units"
    restricted_paths: tuple[str, ...] = ()
    archive_pattern: str | None = None
    constant_exemptions: frozenset[float] = DEFAULT_CONSTANT_EXEMPTIONS
    volatile_functions: frozenset[str] = DEFAULT_VOLATILE_FUNCTIONS

    @staticmethod
    def from_dict(obj: dict) -> "RuleConfig":
        known = {
            "enabled_rules",
            "documentation_sheet",
            "required_doc_labels",
            "change_log_sheet",
            "change_log_headers",
            "review_log_sheet",
            "review_log_headers",
            "check_prefix",
            "header_row",
            "require_units_marker",
            "units_marker",
            "restricted_paths",
            "archive_pattern",
            "constant_exemptions",
            "volatile_functions",
        }
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown rule config keys: {sorted(unknown)}")
        kwargs: dict = {}
        if "enabled_rules" in obj:
            rules = frozenset(obj["enabled_rules"])
            bad = rules - KNOWN_RULES
            if bad:
                raise ConfigError(f"unknown rule ids: {sorted(bad)}")
            kwargs["enabled_rules"] = rules
        for key in (
            "documentation_sheet",
            "change_log_sheet",
            "review_log_sheet",
            "check_prefix",
            "units_marker",
            "archive_pattern",
        ):
            if key in obj:
                kwargs[key] = obj[key]
        for key in (
            "required_doc_labels",
            "change_log_headers",
            "review_log_headers",
            "restricted_paths",
        ):
            if key in obj:
                kwargs[key] = tuple(obj[key])
        if "header_row" in obj:
            kwargs["header_row"] = int(obj["header_row"])
        if "require_units_marker" in obj:
            kwargs["require_units_marker"] = bool(obj["require_units_marker"])
        if "constant_exemptions" in obj:
            kwargs["constant_exemptions"] = frozenset(float(v) for v in obj["constant_exemptions"])
        if "volatile_functions" in obj:
            kwargs["volatile_functions"] = frozenset(str(v).upper() for v in obj["volatile_functions"])
        return RuleConfig(**kwargs)

    @staticmethod
    def load(path: str | Path) -> "RuleConfig":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ConfigError("rule config must be a JSON object")
        return RuleConfig.from_dict(doc.get("rules", doc))


@dataclass
class AuditReport:
    workbook_name: str
    audited_at: datetime
    findings: list[Finding]
    rules_passed: list[str]
    rules_not_applicable: list[str]
    compliance_score: float

    def findings_for(self, rule_id: str) -> list[Finding]:
        return [f for f in self.findings if f.rule_id == rule_id]

    @property
    def failed_rule_ids(self) -> list[str]:
        return sorted({f.rule_id for f in self.findings})

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "workbook_name": self.workbook_name,
            "audited_at": format_ts(self.audited_at),
            "findings": [f.to_dict() for f in self.findings],
            "rules_passed": list(self.rules_passed),
            "rules_not_applicable": list(self.rules_not_applicable),
            "compliance_score": self.compliance_score,
        }

    @staticmethod
    def from_dict(obj: dict) -> "AuditReport":
        return AuditReport(
            workbook_name=obj["workbook_name"],
            audited_at=parse_ts(obj["audited_at"]),
            findings=[Finding.from_dict(f) for f in obj["findings"]],
            rules_passed=list(obj["rules_passed"]),
            rules_not_applicable=list(obj.get("rules_not_applicable", [])),
            compliance_score=float(obj["compliance_score"]),
        )


# --- sheet purposes ----------------------------------------------------------


def effective_purposes(wb: Workbook, cfg: RuleConfig) -> dict[str, SheetPurpose]:
    """Sheet name -> purpose.  Explicit `declared_purpose` fields win; for
    undeclared sheets, a (sheet name, purpose) pair in columns A/B of the
    documentation sheet counts as a declaration.  Nothing is guessed."""
    purposes = {sh.name: sh.declared_purpose for sh in wb.sheets}
    doc = wb.sheet(cfg.documentation_sheet)
    if doc is None:
        return purposes
    declared: dict[str, str] = {}
    for addr, cell in doc.cells.items():
        if addr.col != 1 or not cell.value.is_text:
            continue
        value_cell = doc.cells.get(CellAddr(2, addr.row))
        if value_cell is None or not value_cell.value.is_text:
            continue
        declared[str(cell.value.raw).lower()] = str(value_cell.value.raw).lower()
    for sh in wb.sheets:
        if purposes[sh.name] is not SheetPurpose.UNDECLARED:
            continue
        tag = declared.get(sh.name.lower())
        if tag is None:
            continue
        try:
            purposes[sh.name] = SheetPurpose(tag)
        except ValueError:
            pass
    return purposes


# --- individual DS rules ------------------------------------------------------


def _text_of(sheet: Sheet, addr: CellAddr) -> str | None:
    cell = sheet.cells.get(addr)
    if cell is None or not cell.value.is_text:
        return None
    text = str(cell.value.raw).strip()
    return text or None


def _check_documentation(wb: Workbook, cfg: RuleConfig) -> list[Finding]:
    doc = wb.sheet(cfg.documentation_sheet)
    if doc is None:
        return [
            Finding(
                rule_id="DS-DOC-01",
                severity=Severity.HIGH,
                sheet=None,
                addr=None,
                message=f"documentation sheet {cfg.documentation_sheet!r} is missing",
            )
        ]
    labels = {}
    for addr, cell in doc.cells.items():
        if addr.col == 1 and cell.value.is_text:
            labels[str(cell.value.raw).strip().lower()] = addr.row
    findings = []
    for label in cfg.required_doc_labels:
        row = labels.get(label.lower())
        if row is None:
            findings.append(
                Finding(
                    rule_id="DS-DOC-01",
                    severity=Severity.HIGH,
                    sheet=doc.name,
                    addr=None,
                    message=f"documentation label {label!r} is missing from column A",
                )
            )
            continue
        value_cell = doc.cells.get(CellAddr(2, row))
        if value_cell is None or (
            value_cell.value.is_text and not str(value_cell.value.raw).strip()
        ):
            findings.append(
                Finding(
                    rule_id="DS-DOC-01",
                    severity=Severity.HIGH,
                    sheet=doc.name,
                    addr=CellAddr(2, row),
                    message=f"documentation entry {label!r} has no value in column B",
                )
            )
    return findings


def _check_labelling(
    wb: Workbook, cfg: RuleConfig, purposes: dict[str, SheetPurpose]
) -> list[Finding]:
    findings = []
    for sheet in wb.sheets:
        if purposes[sheet.name] is not SheetPurpose.INPUT:
            continue
        data_cols: set[int] = set()
        for addr, cell in sheet.cells.items():
            if addr.row <= cfg.header_row or cell.formula is not None:
                continue
            if not cell.value.is_text and not cell.value.is_blank:
                data_cols.add(addr.col)
        for col in sorted(data_cols):
            header_addr = CellAddr(col, cfg.header_row)
            if _text_of(sheet, header_addr) is None:
                findings.append(
                    Finding(
                        rule_id="DS-LAB-01",
                        severity=Severity.MEDIUM,
                        sheet=sheet.name,
                        addr=header_addr,
                        message=(
                            f"input column {col_to_letters(col)} has no text label "
                            f"in header row {cfg.header_row}"
                        ),
                    )
                )
        if cfg.require_units_marker:
            marker = cfg.units_marker.lower()
            has_marker = any(
                cell.value.is_text and marker in str(cell.value.raw).lower()
                for cell in sheet.cells.values()
            )
            if not has_marker:
                findings.append(
                    Finding(
                        rule_id="DS-LAB-01",
                        severity=Severity.MEDIUM,
                        sheet=sheet.name,
                        addr=None,
                        message=f"no units marker ({cfg.units_marker!r}) found on input sheet",
                    )
                )
    return findings


def _check_cells(wb: Workbook, cfg: RuleConfig) -> dict[str, set[CellAddr]]:
    """sheet name -> addresses inside CHK_-prefixed named ranges."""
    out: dict[str, set[CellAddr]] = {}
    for name, ref in wb.named_ranges.items():
        if not name.upper().startswith(cfg.check_prefix.upper()):
            continue
        target = wb.sheet(ref.sheet)
        if target is None:
            continue
        out.setdefault(target.name, set()).update(ref.cells())
    return out


def _check_separation(
    wb: Workbook, cfg: RuleConfig, purposes: dict[str, SheetPurpose], index: ReferenceIndex
) -> list[Finding]:
    findings = []
    check_addrs = _check_cells(wb, cfg)
    for sheet in wb.sheets:
        purpose = purposes[sheet.name]
        if purpose is SheetPurpose.INPUT:
            exempt = check_addrs.get(sheet.name, set())
            for addr in sorted(sheet.cells, key=lambda a: a.sort_key):
                cell = sheet.cells[addr]
                if cell.formula is not None and addr not in exempt:
                    findings.append(
                        Finding(
                            rule_id="DS-SEP-01",
                            severity=Severity.HIGH,
                            sheet=sheet.name,
                            addr=addr,
                            message="formula on an input sheet (only check cells may calculate)",
                            evidence=cell.formula,
                        )
                    )
        elif purpose is SheetPurpose.CALCULATION:
            for addr in sorted(sheet.cells, key=lambda a: a.sort_key):
                cell = sheet.cells[addr]
                if cell.formula is None and not cell.value.is_text and not cell.value.is_blank:
                    findings.append(
                        Finding(
                            rule_id="DS-SEP-01",
                            severity=Severity.HIGH,
                            sheet=sheet.name,
                            addr=addr,
                            message=(
                                "non-label constant on a calculation sheet "
                                "(inputs belong on input sheets)"
                            ),
                            evidence=str(cell.value.raw),
                        )
                    )
        elif purpose is SheetPurpose.OUTPUT:
            for addr in sorted(sheet.cells, key=lambda a: a.sort_key):
                readers = {
                    reader_sheet
                    for reader_sheet, _ in index.referencers_of(sheet.name, addr)
                    if reader_sheet.lower() != sheet.name.lower()
                }
                if readers:
                    findings.append(
                        Finding(
                            rule_id="DS-SEP-01",
                            severity=Severity.HIGH,
                            sheet=sheet.name,
                            addr=addr,
                            message="output cell is read back by other sheets",
                            evidence="referenced from " + ", ".join(sorted(readers)),
                        )
                    )
    return findings


def _check_locking(wb: Workbook, cfg: RuleConfig) -> list[Finding]:
    findings = []
    for sheet in wb.sheets:
        for addr in sorted(sheet.cells, key=lambda a: a.sort_key):
            cell = sheet.cells[addr]
            if cell.formula is None:
                continue
            if not cell.locked or not sheet.protection_enabled:
                reason = []
                if not cell.locked:
                    reason.append("cell is unlocked")
                if not sheet.protection_enabled:
                    reason.append("sheet protection is off")
                findings.append(
                    Finding(
                        rule_id="DS-LOCK-01",
                        severity=Severity.HIGH,
                        sheet=sheet.name,
                        addr=addr,
                        message="formula cell is not protected: " + " and ".join(reason),
                        evidence=cell.formula,
                    )
                )
    return findings


def _check_check_cells(wb: Workbook, cfg: RuleConfig) -> list[Finding]:
    for sheet_name, addrs in _check_cells(wb, cfg).items():
        sheet = wb.sheet(sheet_name)
        if sheet and any(addr in sheet.cells for addr in addrs):
            return []
    return [
        Finding(
            rule_id="DS-CHK-01",
            severity=Severity.MEDIUM,
            sheet=None,
            addr=None,
            message=(
                f"no check cell found: no populated named range with "
                f"prefix {cfg.check_prefix!r}"
            ),
        )
    ]


def _check_log_template(
    wb: Workbook, rule_id: str, sheet_name: str, headers: tuple[str, ...]
) -> list[Finding]:
    sheet = wb.sheet(sheet_name)
    if sheet is None:
        return [
            Finding(
                rule_id=rule_id,
                severity=Severity.HIGH if rule_id == "DS-LOG-01" else Severity.MEDIUM,
                sheet=None,
                addr=None,
                message=f"log sheet {sheet_name!r} is missing",
            )
        ]
    actual = []
    col = 1
    while True:
        text = _text_of(sheet, CellAddr(col, 1))
        if text is None:
            break
        actual.append(text)
        col += 1
    if tuple(actual) != headers:
        return [
            Finding(
                rule_id=rule_id,
                severity=Severity.HIGH if rule_id == "DS-LOG-01" else Severity.MEDIUM,
                sheet=sheet.name,
                addr=CellAddr(1, 1),
                message=f"log sheet {sheet_name!r} header row does not match the template",
                evidence=f"expected {' | '.join(headers)}; found {' | '.join(actual) or '(empty)'}",
            )
        ]
    return []


def _check_transparency(wb: Workbook, cfg: RuleConfig) -> list[Finding]:
    doc = wb.sheet(cfg.documentation_sheet)
    doc_texts = []
    if doc is not None:
        doc_texts = [
            str(cell.value.raw).lower() for cell in doc.cells.values() if cell.value.is_text
        ]
    findings = []
    for sheet in wb.sheets:
        if not sheet.hidden:
            continue
        documented = any(sheet.name.lower() in text for text in doc_texts)
        if not documented:
            findings.append(
                Finding(
                    rule_id="DS-TRA-01",
                    severity=Severity.LOW,
                    sheet=sheet.name,
                    addr=None,
                    message=(
                        f"sheet {sheet.name!r} is hidden and not mentioned on the "
                        "documentation sheet"
                    ),
                )
            )
    return findings


def _check_security(wb: Workbook, cfg: RuleConfig, source_path: str | None) -> list[Finding]:
    if wb.security.encrypted:
        return []
    if source_path is not None:
        resolved = PurePath(source_path)
        for root in cfg.restricted_paths:
            try:
                resolved.relative_to(root)
                return []
            except ValueError:
                continue
    return [
        Finding(
            rule_id="DS-SEC-01",
            severity=Severity.MEDIUM,
            sheet=None,
            addr=None,
            message=(
                "workbook is not password-protected and does not reside under "
                "a restricted directory"
            ),
        )
    ]


# --- the audit ---------------------------------------------------------------

# Rules that still apply when the file is an opaque encrypted container.
_OPAQUE_APPLICABLE = frozenset({"DS-SEC-01"})


def audit(
    wb: Workbook,
    cfg: RuleConfig | None = None,
    *,
    source_path: str | None = None,
    at: datetime | None = None,
) -> AuditReport:
    """Run every enabled rule; deterministic for a given workbook and
    timestamp (`at` is injected so the rule engine itself never reads a
    clock)."""
    cfg = cfg or RuleConfig()
    at = at or utc_now()
    purposes = effective_purposes(wb, cfg)

    ds_checks = {
        "DS-DOC-01": lambda: _check_documentation(wb, cfg),
        "DS-LAB-01": lambda: _check_labelling(wb, cfg, purposes),
        "DS-SEP-01": lambda: _check_separation(wb, cfg, purposes, referenced_by(wb)),
        "DS-LOCK-01": lambda: _check_locking(wb, cfg),
        "DS-CHK-01": lambda: _check_check_cells(wb, cfg),
        "DS-LOG-01": lambda: _check_log_template(
            wb, "DS-LOG-01", cfg.change_log_sheet, cfg.change_log_headers
        ),
        "DS-LOG-02": lambda: _check_log_template(
            wb, "DS-LOG-02", cfg.review_log_sheet, cfg.review_log_headers
        ),
        "DS-TRA-01": lambda: _check_transparency(wb, cfg),
        "DS-SEC-01": lambda: _check_security(wb, cfg, source_path),
    }

    opaque = wb.source_format is SourceFormat.ENCRYPTED_OPAQUE
    findings: list[Finding] = []
    passed: list[str] = []
    not_applicable: list[str] = []

    for rule_id in STANDARDS_RULES:
        if rule_id not in cfg.enabled_rules:
            not_applicable.append(rule_id)
            continue
        if opaque and rule_id not in _OPAQUE_APPLICABLE:
            not_applicable.append(rule_id)
            continue
        rule_findings = ds_checks[rule_id]()
        if rule_findings:
            findings.extend(rule_findings)
        else:
            passed.append(rule_id)

    for rule_id in INTEGRITY_RULES:
        if rule_id not in cfg.enabled_rules or opaque:
            not_applicable.append(rule_id)
            continue
        rule_findings = run_integrity_checks(wb, frozenset({rule_id}))
        if rule_findings:
            findings.extend(rule_findings)
        else:
            passed.append(rule_id)

    findings.sort(key=finding_sort_key)
    failed = {f.rule_id for f in findings}
    applicable = len(passed) + len(failed)
    score = 1.0 if applicable == 0 else len(passed) / applicable
    return AuditReport(
        workbook_name=wb.name,
        audited_at=at,
        findings=findings,
        rules_passed=sorted(passed),
        rules_not_applicable=sorted(not_applicable),
        compliance_score=score,
    )


# --- cell classification (advisory) ------------------------------------------


class CellCategory(str, Enum):
    INPUT = "input"
    CALCULATION = "calculation"
    OUTPUT = "output"
    LABEL = "label"
    CHECK = "check"


def classify_cells(
    wb: Workbook, cfg: RuleConfig | None = None
) -> dict[tuple[str, CellAddr], frozenset[CellCategory]]:
    """Heuristic role of every non-empty cell.  Advisory only: the
    separation rule judges declared purposes, never this classifier.

    Formula cells are calculations, and also outputs when nothing reads
    them.  Constants read by a formula are inputs; text nobody reads is a
    label; other unread constants are treated as (dead) inputs.  Membership
    in a check-cell named range overrides everything."""
    cfg = cfg or RuleConfig()
    index = referenced_by(wb)
    check_addrs = _check_cells(wb, cfg)
    out: dict[tuple[str, CellAddr], frozenset[CellCategory]] = {}
    for sheet in wb.sheets:
        checks = check_addrs.get(sheet.name, set())
        for addr, cell in sheet.cells.items():
            if addr in checks:
                out[(sheet.name, addr)] = frozenset({CellCategory.CHECK})
                continue
            referenced = bool(index.referencers_of(sheet.name, addr))
            if cell.formula is not None:
                cats = {CellCategory.CALCULATION}
                if not referenced:
                    cats.add(CellCategory.OUTPUT)
            elif referenced:
                cats = {CellCategory.INPUT}
            elif cell.value.is_text:
                cats = {CellCategory.LABEL}
            else:
                cats = {CellCategory.INPUT}
            out[(sheet.name, addr)] = frozenset(cats)
    return out


# --- remediation plans --------------------------------------------------------


class ItemStatus(str, Enum):
    OPEN = "open"
    IN_PROGRESS = "in_progress"
    DONE = "done"
    ACCEPTED_RISK = "accepted_risk"


_ALLOWED_TRANSITIONS = {
    ItemStatus.OPEN: {ItemStatus.IN_PROGRESS, ItemStatus.DONE, ItemStatus.ACCEPTED_RISK},
    ItemStatus.IN_PROGRESS: {ItemStatus.DONE, ItemStatus.ACCEPTED_RISK},
    ItemStatus.DONE: {ItemStatus.OPEN},
    ItemStatus.ACCEPTED_RISK: set(),
}


class PlanTransitionError(ValueError):
    pass


@dataclass(frozen=True)
class EffortWeights:
    """Per-severity day weights; defaults put a typical first-audit file
    (a couple of high findings, a few medium, some low) in the 3-5 day
    band."""

    high: float = 1.0
    medium: float = 0.5
    low: float = 0.25
    info: float = 0.0
    floor: float = 0.0
    ceiling: float = 20.0

    def weight(self, severity: Severity) -> float:
        return {
            Severity.HIGH: self.high,
            Severity.MEDIUM: self.medium,
            Severity.LOW: self.low,
            Severity.INFO: self.info,
        }[severity]

    @staticmethod
    def from_dict(obj: dict) -> "EffortWeights":
        known = {"high", "medium", "low", "info", "floor", "ceiling"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown effort config keys: {sorted(unknown)}")
        return EffortWeights(**{k: float(v) for k, v in obj.items()})


@dataclass
class PlanItem:
    item_id: str
    finding_ref: str
    action_text: str
    status: ItemStatus = ItemStatus.OPEN
    owner: str = ""
    regression: bool = False

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "finding_ref": self.finding_ref,
            "action_text": self.action_text,
            "status": self.status.value,
            "owner": self.owner,
            "regression": self.regression,
        }

    @staticmethod
    def from_dict(obj: dict) -> "PlanItem":
        return PlanItem(
            item_id=obj["item_id"],
            finding_ref=obj["finding_ref"],
            action_text=obj["action_text"],
            status=ItemStatus(obj["status"]),
            owner=obj.get("owner", ""),
            regression=bool(obj.get("regression", False)),
        )


@dataclass
class RemediationPlan:
    workbook_name: str
    created_at: datetime
    items: list[PlanItem]
    estimated_effort_days: float

    def item(self, item_id: str) -> PlanItem | None:
        for item in self.items:
            if item.item_id == item_id:
                return item
        return None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "workbook_name": self.workbook_name,
            "created_at": format_ts(self.created_at),
            "items": [i.to_dict() for i in self.items],
            "estimated_effort_days": self.estimated_effort_days,
        }

    @staticmethod
    def from_dict(obj: dict) -> "RemediationPlan":
        return RemediationPlan(
            workbook_name=obj["workbook_name"],
            created_at=parse_ts(obj["created_at"]),
            items=[PlanItem.from_dict(i) for i in obj["items"]],
            estimated_effort_days=float(obj["estimated_effort_days"]),
        )


_ACTION_TEMPLATES = {
    "DS-DOC-01": "Complete the standard documentation template",
    "DS-LAB-01": "Label the input column and units",
    "DS-SEP-01": "Move the offending content to the sheet matching its role",
    "DS-LOCK-01": "Lock the formula cell and enable worksheet protection",
    "DS-CHK-01": "Add a check cell (control total or criteria test) in a CHK_ named range",
    "DS-LOG-01": "Add the standard change log template",
    "DS-LOG-02": "Add the standard review log template",
    "DS-TRA-01": "Unhide the sheet or document why it is hidden",
    "DS-SEC-01": "Password-protect the file or move it to a restricted directory",
    "INT-01": "Align the formula with the rest of its region (or document why it differs)",
    "INT-02": "Resolve the stored error value",
    "INT-03": "Move the hardcoded constant to a labelled input cell",
    "INT-04": "Break the circular reference chain",
    "INT-05": "Point the formula at a populated cell or widen it to a range",
    "ARC-01": "Rename the file to the versioned archive convention",
}


def build_plan(
    report: AuditReport,
    effort_cfg: EffortWeights | None = None,
    *,
    at: datetime | None = None,
) -> RemediationPlan:
    """One open item per finding, with severity-weighted effort estimate
    clamped to the configured floor/ceiling."""
    effort_cfg = effort_cfg or EffortWeights()
    at = at or report.audited_at
    items = []
    for i, finding in enumerate(report.findings, start=1):
        action = _ACTION_TEMPLATES.get(finding.rule_id, "Remediate the finding")
        where = f"{finding.sheet}!{finding.addr.a1}" if finding.sheet and finding.addr else (
            finding.sheet or "workbook"
        )
        items.append(
            PlanItem(
                item_id=str(i),
                finding_ref=finding.ref,
                action_text=f"{action} ({where}): {finding.message}",
            )
        )
    total = sum(effort_cfg.weight(f.severity) for f in report.findings)
    if items:
        total = min(max(total, effort_cfg.floor), effort_cfg.ceiling)
    return RemediationPlan(
        workbook_name=report.workbook_name,
        created_at=at,
        items=items,
        estimated_effort_days=total,
    )


def transition_item(
    item: PlanItem, new_status: ItemStatus, justification: str = ""
) -> PlanItem:
    """Validate and apply a status transition; accepted_risk demands a
    written justification which is appended to the action text."""
    if new_status not in _ALLOWED_TRANSITIONS[item.status]:
        raise PlanTransitionError(
            f"cannot move item {item.item_id} from {item.status.value} to {new_status.value}"
        )
    action_text = item.action_text
    if new_status is ItemStatus.ACCEPTED_RISK:
        if not justification.strip():
            raise PlanTransitionError("accepted_risk requires a justification")
        action_text = f"{action_text} | accepted risk: {justification.strip()}"
    return replace(item, status=new_status, action_text=action_text)


def qa_recheck(
    wb: Workbook,
    plan: RemediationPlan,
    cfg: RuleConfig | None = None,
    *,
    source_path: str | None = None,
    at: datetime | None = None,
) -> AuditReport:
    """Full re-audit plus verification that every item marked done no
    longer reproduces its finding; persisting ones get the regression flag
    set on the plan item."""
    report = audit(wb, cfg, source_path=source_path, at=at)
    live_refs = {f.ref for f in report.findings}
    for item in plan.items:
        item.regression = item.status is ItemStatus.DONE and item.finding_ref in live_refs
    return report
