"""Inventory of EUC applications: registration, tiered control
requirements, periodic-validation scheduling, archive naming and the
persistent registry behind the HTTP service.

Persistence is an append-only JSON-lines event log plus a periodically
compacted snapshot, loaded fully into memory at start.  Every successful
write is flushed and fsynced before the call returns, so a crash right
after a register call cannot lose the record.
"""

from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from enum import Enum
from pathlib import Path

from eucctl.integrity import Finding, Severity
from eucctl.standards import AuditReport, RemediationPlan
from eucctl.util import format_ts, parse_ts, utc_now


class InventoryError(ValueError):
    pass


class ValidationError(InventoryError):
    def __init__(self, message: str, field_name: str | None = None):
        self.field = field_name
        super().__init__(message)


class DuplicateFileKeyError(InventoryError):
    pass


class StaleRecordError(InventoryError):
    """Optimistic-concurrency failure: the record changed under the caller."""


class RecordRetiredError(InventoryError):
    pass


class Category(str, Enum):
    FINANCIAL = "financial"
    OPERATIONAL = "operational"


class Tier(str, Enum):
    CRITICAL = "critical"
    SIGNIFICANT = "significant"
    STANDARD = "standard"


class RecordStatus(str, Enum):
    ACTIVE = "active"
    RETIRED = "retired"
    REPLACED = "replaced"


class ValidationState(str, Enum):
    NEVER_VALIDATED = "never_validated"
    DUE = "due"
    OVERDUE = "overdue"
    CURRENT = "current"


DUE_SOON_DAYS = 14

CONTROL_NAMES = (
    "inventory_listed",
    "design_standards",
    "independent_validation",
    "checking_controls",
    "change_logs",
    "change_monitoring",
    "security",
    "archiving",
)


@dataclass(frozen=True)
class ControlRequirementSet:
    inventory_listed: bool = False
    design_standards: bool = False
    independent_validation: bool = False
    checking_controls: bool = False
    change_logs: bool = False
    change_monitoring: bool = False
    security: bool = False
    archiving: bool = False

    def enabled_count(self) -> int:
        return sum(getattr(self, name) for name in CONTROL_NAMES)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in CONTROL_NAMES}


_ALL_CONTROLS = ControlRequirementSet(**{name: True for name in CONTROL_NAMES})

# The tier table: criticality drives controls; category only segments
# reporting.  critical = everything; significant = everything except
# automated change monitoring; standard = listed + archived only.
_TIER_TABLE: dict[Tier, ControlRequirementSet] = {
    Tier.CRITICAL: _ALL_CONTROLS,
    Tier.SIGNIFICANT: replace(_ALL_CONTROLS, change_monitoring=False),
    Tier.STANDARD: ControlRequirementSet(inventory_listed=True, archiving=True),
}


@dataclass
class EucRecord:
    record_id: int
    name: str
    owner: str
    line_manager: str
    business_process: str
    category: Category
    tier: Tier
    file_key: str | None
    last_validated_at: datetime | None
    validation_frequency_days: int
    status: RecordStatus
    status_note: str
    created_at: datetime
    updated_at: datetime

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "name": self.name,
            "owner": self.owner,
            "line_manager": self.line_manager,
            "business_process": self.business_process,
            "category": self.category.value,
            "tier": self.tier.value,
            "file_key": self.file_key,
            "last_validated_at": format_ts(self.last_validated_at)
            if self.last_validated_at
            else None,
            "validation_frequency_days": self.validation_frequency_days,
            "status": self.status.value,
            "status_note": self.status_note,
            "created_at": format_ts(self.created_at),
            "updated_at": format_ts(self.updated_at),
        }

    @staticmethod
    def from_dict(obj: dict) -> "EucRecord":
        return EucRecord(
            record_id=obj["record_id"],
            name=obj["name"],
            owner=obj["owner"],
            line_manager=obj.get("line_manager", ""),
            business_process=obj.get("business_process", ""),
            category=Category(obj["category"]),
            tier=Tier(obj["tier"]),
            file_key=obj.get("file_key"),
            last_validated_at=parse_ts(obj["last_validated_at"])
            if obj.get("last_validated_at")
            else None,
            validation_frequency_days=obj["validation_frequency_days"],
            status=RecordStatus(obj["status"]),
            status_note=obj.get("status_note", ""),
            created_at=parse_ts(obj["created_at"]),
            updated_at=parse_ts(obj["updated_at"]),
        )


def required_controls(rec: EucRecord) -> ControlRequirementSet:
    """Pure tier-table lookup; identical across categories."""
    return _TIER_TABLE[rec.tier]


def validation_due(rec: EucRecord, today: datetime) -> ValidationState:
    """Where the record sits in its periodic-validation cycle; monotone as
    `today` advances."""
    if rec.last_validated_at is None:
        return ValidationState.NEVER_VALIDATED
    deadline = rec.last_validated_at + timedelta(days=rec.validation_frequency_days)
    if today > deadline:
        return ValidationState.OVERDUE
    if deadline - today <= timedelta(days=DUE_SOON_DAYS):
        return ValidationState.DUE
    return ValidationState.CURRENT


# --- archive naming -------------------------------------------------------------

DEFAULT_ARCHIVE_PATTERN = (
    r"^(?P<base>.+)_v(?P<major>\d+)\.(?P<minor>\d+)_(?P<date>\d{8})\.(?P<ext>[A-Za-z0-9]+)$"
)
ARCHIVE_CONVENTION = "<base>_v<major>.<minor>_<YYYYMMDD>.<ext>"


def check_archive_name(filename: str, pattern: str | None = None) -> Finding | None:
    """ARC-01: versioned archive naming.  None means the name passes."""
    rx = re.compile(pattern) if pattern else re.compile(DEFAULT_ARCHIVE_PATTERN)
    m = rx.match(filename)
    reason = None
    if not m:
        reason = "name does not match the convention"
    elif pattern is None:
        try:
            datetime.strptime(m.group("date"), "%Y%m%d")
        except ValueError:
            reason = f"date part {m.group('date')} is not a valid YYYYMMDD date"
    if reason is None:
        return None
    return Finding(
        rule_id="ARC-01",
        severity=Severity.LOW,
        sheet=None,
        addr=None,
        message=f"archive name {filename!r}: {reason}",
        evidence=f"expected pattern {ARCHIVE_CONVENTION}",
    )


# --- the persistent registry ------------------------------------------------------

_COMPACT_THRESHOLD_LINES = 10_000


class Registry:
    """In-memory registry backed by registry.jsonl (append-only) and
    registry.snapshot.json (compacted checkpoint)."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._log_path = self.data_dir / "registry.jsonl"
        self._snapshot_path = self.data_dir / "registry.snapshot.json"
        self._lock = threading.RLock()
        self.records: dict[int, EucRecord] = {}
        self.audits: dict[int, AuditReport] = {}
        self.plans: dict[int, RemediationPlan] = {}
        self._next_record_id = 1
        self._next_item_id = 1
        self._log_lines = 0
        self._load()
        self._fh = open(self._log_path, "a", encoding="utf-8")
        if self._log_lines >= _COMPACT_THRESHOLD_LINES:
            self.compact()

    # -- persistence ---------------------------------------------------------------

    def _load(self) -> None:
        if self._snapshot_path.exists():
            snap = json.loads(self._snapshot_path.read_text(encoding="utf-8"))
            for rec_obj in snap.get("records", []):
                rec = EucRecord.from_dict(rec_obj)
                self.records[rec.record_id] = rec
            for key, report_obj in snap.get("audits", {}).items():
                self.audits[int(key)] = AuditReport.from_dict(report_obj)
            for key, plan_obj in snap.get("plans", {}).items():
                self.plans[int(key)] = RemediationPlan.from_dict(plan_obj)
            self._next_record_id = snap.get("next_record_id", 1)
            self._next_item_id = snap.get("next_item_id", 1)
        if self._log_path.exists():
            with open(self._log_path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        entry = json.loads(line)
                    except json.JSONDecodeError:
                        continue  # torn tail write from a crash
                    self._apply(entry)
                    self._log_lines += 1

    def _apply(self, entry: dict) -> None:
        kind = entry.get("kind")
        if kind == "record":
            rec = EucRecord.from_dict(entry["record"])
            self.records[rec.record_id] = rec
            self._next_record_id = max(self._next_record_id, rec.record_id + 1)
        elif kind == "audit":
            self.audits[entry["record_id"]] = AuditReport.from_dict(entry["report"])
        elif kind == "plan":
            self.plans[entry["record_id"]] = RemediationPlan.from_dict(entry["plan"])
            self._next_item_id = max(
                self._next_item_id, entry.get("next_item_id", self._next_item_id)
            )

    def _append(self, entry: dict, principal: str | None = None) -> None:
        if principal is not None:
            entry = {**entry, "principal": principal}
        self._fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self._log_lines += 1

    def compact(self) -> None:
        """Write a full snapshot and truncate the log."""
        with self._lock:
            snap = {
                "records": [
                    self.records[rid].to_dict() for rid in sorted(self.records)
                ],
                "audits": {str(rid): report.to_dict() for rid, report in self.audits.items()},
                "plans": {str(rid): plan.to_dict() for rid, plan in self.plans.items()},
                "next_record_id": self._next_record_id,
                "next_item_id": self._next_item_id,
            }
            tmp = self._snapshot_path.with_suffix(".tmp")
            tmp.write_text(json.dumps(snap, ensure_ascii=False), encoding="utf-8")
            with open(tmp, "r+b") as fh:
                os.fsync(fh.fileno())
            tmp.replace(self._snapshot_path)
            self._fh.close()
            self._fh = open(self._log_path, "w", encoding="utf-8")
            self._fh.flush()
            os.fsync(self._fh.fileno())
            self._log_lines = 0

    def close(self) -> None:
        self._fh.close()

    # -- record lifecycle -----------------------------------------------------------

    def _validate_new(self, fields_in: dict) -> None:
        if not str(fields_in.get("name", "")).strip():
            raise ValidationError("name is required", "name")
        if not str(fields_in.get("owner", "")).strip():
            raise ValidationError("owner is required", "owner")
        try:
            Category(fields_in.get("category"))
        except ValueError:
            raise ValidationError(
                f"category must be one of {[c.value for c in Category]}", "category"
            )
        try:
            Tier(fields_in.get("tier"))
        except ValueError:
            raise ValidationError(f"tier must be one of {[t.value for t in Tier]}", "tier")
        freq = fields_in.get("validation_frequency_days", 365)
        if not isinstance(freq, int) or isinstance(freq, bool) or freq <= 0:
            raise ValidationError("validation_frequency_days must be a positive integer",
                                  "validation_frequency_days")

    @staticmethod
    def _coerce_ts(value) -> datetime | None:
        if value is None or isinstance(value, datetime):
            return value
        return parse_ts(value)

    def _assert_file_key_free(self, file_key: str | None, ignore_record: int | None = None) -> None:
        if file_key is None:
            return
        for rec in self.records.values():
            if (
                rec.record_id != ignore_record
                and rec.status is RecordStatus.ACTIVE
                and rec.file_key == file_key
            ):
                raise DuplicateFileKeyError(
                    f"file_key {file_key!r} already belongs to active record {rec.record_id}"
                )

    def register(
        self, principal: str = "anonymous", at: datetime | None = None, **fields_in
    ) -> EucRecord:
        """Validate, persist durably and return the new record."""
        with self._lock:
            self._validate_new(fields_in)
            self._assert_file_key_free(fields_in.get("file_key"))
            at = at or utc_now()
            rec = EucRecord(
                record_id=self._next_record_id,
                name=str(fields_in["name"]).strip(),
                owner=str(fields_in["owner"]).strip(),
                line_manager=str(fields_in.get("line_manager", "")),
                business_process=str(fields_in.get("business_process", "")),
                category=Category(fields_in["category"]),
                tier=Tier(fields_in["tier"]),
                file_key=fields_in.get("file_key"),
                last_validated_at=self._coerce_ts(fields_in.get("last_validated_at")),
                validation_frequency_days=fields_in.get("validation_frequency_days", 365),
                status=RecordStatus.ACTIVE,
                status_note="",
                created_at=at,
                updated_at=at,
            )
            self._append({"kind": "record", "record": rec.to_dict()}, principal)
            self.records[rec.record_id] = rec
            self._next_record_id += 1
            return rec

    def register_many(self, specs: list[dict], principal: str = "seed") -> list[EucRecord]:
        """Bulk registration with one fsync at the end (demo seeding)."""
        with self._lock:
            at = utc_now()
            out = []
            lines = []
            for fields_in in specs:
                self._validate_new(fields_in)
                self._assert_file_key_free(fields_in.get("file_key"))
                rec = EucRecord(
                    record_id=self._next_record_id,
                    name=str(fields_in["name"]).strip(),
                    owner=str(fields_in["owner"]).strip(),
                    line_manager=str(fields_in.get("line_manager", "")),
                    business_process=str(fields_in.get("business_process", "")),
                    category=Category(fields_in["category"]),
                    tier=Tier(fields_in["tier"]),
                    file_key=fields_in.get("file_key"),
                    last_validated_at=self._coerce_ts(fields_in.get("last_validated_at")),
                    validation_frequency_days=fields_in.get("validation_frequency_days", 365),
                    status=RecordStatus.ACTIVE,
                    status_note="",
                    created_at=at,
                    updated_at=at,
                )
                lines.append(
                    json.dumps(
                        {"kind": "record", "record": rec.to_dict(), "principal": principal},
                        ensure_ascii=False,
                    )
                )
                self.records[rec.record_id] = rec
                self._next_record_id += 1
                out.append(rec)
            self._fh.write("\n".join(lines) + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())
            self._log_lines += len(lines)
            return out

    _MUTABLE_FIELDS = {
        "name",
        "owner",
        "line_manager",
        "business_process",
        "category",
        "tier",
        "file_key",
        "last_validated_at",
        "validation_frequency_days",
        "status",
        "status_note",
    }

    def update(
        self,
        record_id: int,
        updates: dict,
        expected_updated_at: datetime | None = None,
        principal: str = "anonymous",
        at: datetime | None = None,
    ) -> EucRecord:
        """Field update with optimistic concurrency.  Retired/replaced
        records accept only status notes (and nothing else)."""
        with self._lock:
            rec = self.records.get(record_id)
            if rec is None:
                raise ValidationError(f"no record {record_id}")
            if expected_updated_at is not None and expected_updated_at != rec.updated_at:
                raise StaleRecordError(
                    f"record {record_id} changed at {format_ts(rec.updated_at)}; "
                    "refresh and retry"
                )
            unknown = set(updates) - self._MUTABLE_FIELDS
            if unknown:
                raise ValidationError(f"unknown fields: {sorted(unknown)}", sorted(unknown)[0])
            if rec.status is not RecordStatus.ACTIVE and set(updates) - {"status_note"}:
                raise RecordRetiredError(
                    f"record {record_id} is {rec.status.value}; only status notes may change"
                )
            merged = rec.to_dict()
            for key, value in updates.items():
                merged[key] = value
            if "owner" in updates and not str(updates["owner"]).strip():
                raise ValidationError("owner is required", "owner")
            try:
                category = Category(merged["category"])
                tier = Tier(merged["tier"])
                status = RecordStatus(merged["status"])
            except ValueError as exc:
                raise ValidationError(str(exc))
            freq = merged["validation_frequency_days"]
            if not isinstance(freq, int) or freq <= 0:
                raise ValidationError("validation_frequency_days must be a positive integer",
                                      "validation_frequency_days")
            if "file_key" in updates:
                self._assert_file_key_free(updates["file_key"], ignore_record=record_id)
            last_validated = merged["last_validated_at"]
            if isinstance(last_validated, str):
                last_validated = parse_ts(last_validated)
            # keep updated_at strictly increasing: with second precision two
            # updates in one second would defeat the optimistic check
            new_stamp = at or utc_now()
            if new_stamp <= rec.updated_at:
                new_stamp = rec.updated_at + timedelta(seconds=1)
            updated = EucRecord(
                record_id=rec.record_id,
                name=str(merged["name"]),
                owner=str(merged["owner"]),
                line_manager=str(merged["line_manager"]),
                business_process=str(merged["business_process"]),
                category=category,
                tier=tier,
                file_key=merged["file_key"],
                last_validated_at=last_validated,
                validation_frequency_days=freq,
                status=status,
                status_note=str(merged["status_note"]),
                created_at=rec.created_at,
                updated_at=new_stamp,
            )
            self._append({"kind": "record", "record": updated.to_dict()}, principal)
            self.records[record_id] = updated
            return updated

    # -- audits and plans --------------------------------------------------------------

    def store_audit(
        self, record_id: int, report: AuditReport, plan: RemediationPlan, principal: str = "anonymous"
    ) -> None:
        with self._lock:
            if record_id not in self.records:
                raise ValidationError(f"no record {record_id}")
            for item in plan.items:
                item.item_id = str(self._next_item_id)
                self._next_item_id += 1
            self._append({"kind": "audit", "record_id": record_id, "report": report.to_dict()},
                         principal)
            self._append(
                {
                    "kind": "plan",
                    "record_id": record_id,
                    "plan": plan.to_dict(),
                    "next_item_id": self._next_item_id,
                },
                principal,
            )
            self.audits[record_id] = report
            self.plans[record_id] = plan

    def latest_audit(self, record_id: int) -> AuditReport | None:
        return self.audits.get(record_id)

    def plan_for(self, record_id: int) -> RemediationPlan | None:
        return self.plans.get(record_id)

    def find_plan_item(self, item_id: str):
        for record_id, plan in self.plans.items():
            item = plan.item(item_id)
            if item is not None:
                return record_id, plan, item
        return None

    def update_plan_item(
        self, item_id: str, new_status, justification: str = "", principal: str = "anonymous"
    ):
        from eucctl.standards import transition_item

        with self._lock:
            located = self.find_plan_item(item_id)
            if located is None:
                raise ValidationError(f"no plan item {item_id}")
            record_id, plan, item = located
            updated = transition_item(item, new_status, justification)
            plan.items[plan.items.index(item)] = updated
            self._append(
                {
                    "kind": "plan",
                    "record_id": record_id,
                    "plan": plan.to_dict(),
                    "next_item_id": self._next_item_id,
                },
                principal,
            )
            return updated

    # -- reporting ----------------------------------------------------------------------

    def dashboard_summary(self, today: datetime | None = None) -> dict:
        """Counts by category x tier x status, the validation-state
        histogram for active records, and each record's latest score."""
        today = today or utc_now()
        counts: dict[str, dict[str, dict[str, int]]] = {
            c.value: {t.value: {s.value: 0 for s in RecordStatus} for t in Tier}
            for c in Category
        }
        validation_hist = {state.value: 0 for state in ValidationState}
        by_category = {c.value: 0 for c in Category}
        scores = {}
        for rec in self.records.values():
            counts[rec.category.value][rec.tier.value][rec.status.value] += 1
            if rec.status is RecordStatus.ACTIVE:
                by_category[rec.category.value] += 1
                validation_hist[validation_due(rec, today).value] += 1
            report = self.audits.get(rec.record_id)
            if report is not None:
                scores[str(rec.record_id)] = report.compliance_score
        return {
            "schema_version": 1,
            "total_records": len(self.records),
            "active_by_category": by_category,
            "counts": counts,
            "validation_states": validation_hist,
            "latest_scores": scores,
        }


def demo_seed_specs() -> list[dict]:
    """The demo registry: ~700 financial and ~200 operational applications
    with a deterministic spread of tiers, owners and processes."""
    tiers = [Tier.CRITICAL, Tier.SIGNIFICANT, Tier.STANDARD]
    processes = {
        Category.FINANCIAL: (
            "Group reporting",
            "Balance sheet reconciliation",
            "Tax provisioning",
            "Budgeting and forecasting",
        ),
        Category.OPERATIONAL: (
            "Trade capture",
            "Position reconciliation",
            "Market risk reporting",
            "Settlement tracking",
        ),
    }
    specs = []
    for category, count in ((Category.FINANCIAL, 700), (Category.OPERATIONAL, 200)):
        for i in range(1, count + 1):
            tier = tiers[i % 3]
            specs.append(
                {
                    "name": f"{category.value.title()} model {i:03d}",
                    "owner": f"owner{(i % 40) + 1}",
                    "line_manager": f"manager{(i % 12) + 1}",
                    "business_process": processes[category][i % 4],
                    "category": category.value,
                    "tier": tier.value,
                    "validation_frequency_days": 90 if tier is Tier.CRITICAL else 365,
                }
            )
    return specs
