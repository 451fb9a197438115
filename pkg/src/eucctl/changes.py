"""Baseline snapshots, cell-level diffing, alert triggers and the
independent review/sign-off state machine.

Storage is an append-only JSON-lines log: one line per snapshot header,
change event or decision, with workbook bodies stored adjacent under
their content hash.  All writes go through a single lock; a crash after a
flushed+fsynced line is recoverable by replay.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path

from eucctl.model import (
    Cell,
    CellAddr,
    Workbook,
    a1_to_addr,
    parse_canonical,
    serialize_canonical,
)
from eucctl.formula.parser import FormulaSyntaxError, parse_formula
from eucctl.formula.precedents import precedents
from eucctl.util import format_ts, parse_ts, utc_now

TEMPLATE_SHEETS = ("Documentation", "Change_Log", "Review_Log")

VALUE_CHANGE_EPSILON = 1e-12


class ChangeError(ValueError):
    pass


class NotPendingError(ChangeError):
    pass


class SelfReviewError(ChangeError):
    pass


class MissingCommentError(ChangeError):
    pass


class ChangeKind(str, Enum):
    VALUE_CHANGED = "value_changed"
    FORMULA_CHANGED = "formula_changed"
    CELL_ADDED = "cell_added"
    CELL_REMOVED = "cell_removed"
    LOCK_CHANGED = "lock_changed"


class EventState(str, Enum):
    AUTO_LOGGED = "auto_logged"
    PENDING_REVIEW = "pending_review"
    APPROVED = "approved"
    REJECTED = "rejected"


class Trigger(str, Enum):
    FORMULA_CHANGE_ANY = "formula_change_any"
    FORMULA_CHANGE_IN_LOCKED = "formula_change_in_locked"
    VALUE_CHANGE_OVER_PCT = "value_change_over_pct"
    STRUCTURAL_CHANGE = "structural_change"
    NEW_EXTERNAL_REFERENCE = "new_external_reference"
    TEMPLATE_SHEET_MODIFIED = "template_sheet_modified"


@dataclass(frozen=True)
class AlertRuleSet:
    triggers: frozenset[Trigger] = frozenset()
    value_change_threshold: float | None = None

    def __post_init__(self) -> None:
        if Trigger.VALUE_CHANGE_OVER_PCT in self.triggers:
            if self.value_change_threshold is None or self.value_change_threshold <= 0:
                raise ChangeError("value_change_over_pct needs a threshold > 0")

    @staticmethod
    def from_dict(obj: dict) -> "AlertRuleSet":
        known = {"triggers", "value_change_threshold"}
        unknown = set(obj) - known
        if unknown:
            raise ChangeError(f"unknown alert rule keys: {sorted(unknown)}")
        triggers = frozenset(Trigger(t) for t in obj.get("triggers", []))
        threshold = obj.get("value_change_threshold")
        return AlertRuleSet(
            triggers=triggers,
            value_change_threshold=float(threshold) if threshold is not None else None,
        )

    @staticmethod
    def load(path: str | Path) -> "AlertRuleSet":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        return AlertRuleSet.from_dict(doc.get("alerts", doc))


def _cell_to_dict(cell: Cell | None) -> dict | None:
    if cell is None:
        return None
    from eucctl.model import _cell_to_json  # same wire shape as canonical cells

    return _cell_to_json(cell)


def _cell_from_dict(obj: dict | None) -> Cell | None:
    if obj is None:
        return None
    from eucctl.model import _cell_from_json

    _, cell = _cell_from_json("A1", obj, "change")
    return cell


@dataclass(frozen=True)
class CellChange:
    sheet: str
    addr: CellAddr
    kind: ChangeKind
    before: Cell | None = None
    after: Cell | None = None

    def to_dict(self) -> dict:
        return {
            "sheet": self.sheet,
            "addr": self.addr.a1,
            "kind": self.kind.value,
            "before": _cell_to_dict(self.before),
            "after": _cell_to_dict(self.after),
        }

    @staticmethod
    def from_dict(obj: dict) -> "CellChange":
        return CellChange(
            sheet=obj["sheet"],
            addr=a1_to_addr(obj["addr"]),
            kind=ChangeKind(obj["kind"]),
            before=_cell_from_dict(obj.get("before")),
            after=_cell_from_dict(obj.get("after")),
        )


@dataclass(frozen=True)
class ReviewDecision:
    reviewer: str
    decided_at: datetime
    verdict: EventState  # APPROVED or REJECTED
    comment: str = ""

    def to_dict(self) -> dict:
        return {
            "reviewer": self.reviewer,
            "decided_at": format_ts(self.decided_at),
            "verdict": self.verdict.value,
            "comment": self.comment,
        }

    @staticmethod
    def from_dict(obj: dict) -> "ReviewDecision":
        return ReviewDecision(
            reviewer=obj["reviewer"],
            decided_at=parse_ts(obj["decided_at"]),
            verdict=EventState(obj["verdict"]),
            comment=obj.get("comment", ""),
        )


@dataclass
class ChangeEvent:
    event_id: int
    file_key: str
    from_snapshot: int
    to_snapshot: int
    changes: list[CellChange]
    structural: bool
    author: str
    triggered_rules: list[str]
    state: EventState
    recorded_at: datetime
    decision: ReviewDecision | None = None

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "file_key": self.file_key,
            "from_snapshot": self.from_snapshot,
            "to_snapshot": self.to_snapshot,
            "changes": [c.to_dict() for c in self.changes],
            "structural": self.structural,
            "author": self.author,
            "triggered_rules": list(self.triggered_rules),
            "state": self.state.value,
            "recorded_at": format_ts(self.recorded_at),
            "decision": self.decision.to_dict() if self.decision else None,
        }

    @staticmethod
    def from_dict(obj: dict) -> "ChangeEvent":
        return ChangeEvent(
            event_id=obj["event_id"],
            file_key=obj["file_key"],
            from_snapshot=obj["from_snapshot"],
            to_snapshot=obj["to_snapshot"],
            changes=[CellChange.from_dict(c) for c in obj["changes"]],
            structural=obj["structural"],
            author=obj["author"],
            triggered_rules=list(obj["triggered_rules"]),
            state=EventState(obj["state"]),
            recorded_at=parse_ts(obj["recorded_at"]),
            decision=ReviewDecision.from_dict(obj["decision"]) if obj.get("decision") else None,
        )


@dataclass(frozen=True)
class Snapshot:
    snapshot_id: int
    file_key: str
    taken_at: datetime
    content_hash: str
    workbook: Workbook

    def header(self) -> dict:
        return {
            "snapshot_id": self.snapshot_id,
            "file_key": self.file_key,
            "taken_at": format_ts(self.taken_at),
            "content_hash": self.content_hash,
        }


def content_hash(wb: Workbook) -> str:
    return hashlib.sha256(serialize_canonical(wb).encode("utf-8")).hexdigest()


# --- diffing -------------------------------------------------------------------


def _normalize_formula_text(text: str | None) -> str | None:
    if text is None:
        return None
    return "".join(text.split())


def diff(old: Workbook, new: Workbook) -> tuple[list[CellChange], bool]:
    """Address-aligned cell comparison; no move detection — a shifted block
    reads as explicit adds/removes plus a structural flag.  Per cell the
    first differing aspect wins (formula, then value, then lock)."""
    changes: list[CellChange] = []
    old_sheets = {sh.name.lower(): sh for sh in old.sheets}
    new_sheets = {sh.name.lower(): sh for sh in new.sheets}
    structural = False

    for key in sorted(set(old_sheets) | set(new_sheets)):
        old_sheet = old_sheets.get(key)
        new_sheet = new_sheets.get(key)
        if old_sheet is None or new_sheet is None:
            structural = True
            present = old_sheet or new_sheet
            kind = ChangeKind.CELL_REMOVED if new_sheet is None else ChangeKind.CELL_ADDED
            for addr in sorted(present.cells, key=lambda a: a.sort_key):
                cell = present.cells[addr]
                changes.append(
                    CellChange(
                        sheet=present.name,
                        addr=addr,
                        kind=kind,
                        before=cell if new_sheet is None else None,
                        after=None if new_sheet is None else cell,
                    )
                )
            continue
        if old_sheet.populated_bounds() != new_sheet.populated_bounds():
            old_b, new_b = old_sheet.populated_bounds(), new_sheet.populated_bounds()
            old_shape = (
                (old_b[2] - old_b[0] + 1, old_b[3] - old_b[1] + 1) if old_b else (0, 0)
            )
            new_shape = (
                (new_b[2] - new_b[0] + 1, new_b[3] - new_b[1] + 1) if new_b else (0, 0)
            )
            if old_shape != new_shape:
                structural = True
        for addr in sorted(
            set(old_sheet.cells) | set(new_sheet.cells), key=lambda a: a.sort_key
        ):
            before = old_sheet.cells.get(addr)
            after = new_sheet.cells.get(addr)
            if before is None and after is None:
                continue
            if before is None:
                kind = ChangeKind.CELL_ADDED
            elif after is None:
                kind = ChangeKind.CELL_REMOVED
            elif _normalize_formula_text(before.formula) != _normalize_formula_text(
                after.formula
            ):
                kind = ChangeKind.FORMULA_CHANGED
            elif before.value != after.value:
                kind = ChangeKind.VALUE_CHANGED
            elif before.locked != after.locked:
                kind = ChangeKind.LOCK_CHANGED
            else:
                continue
            changes.append(
                CellChange(sheet=new_sheet.name, addr=addr, kind=kind, before=before, after=after)
            )
    return changes, structural


def apply_changes(base: Workbook, changes: list[CellChange]) -> dict[str, dict[CellAddr, Cell]]:
    """Cell-wise replay of a diff onto `base`; returns the reconstructed
    sheet-name -> cells maps (empty sheets dropped).  This is the patch
    half of the diff/patch property."""
    cells: dict[str, dict[CellAddr, Cell]] = {
        sh.name: dict(sh.cells) for sh in base.sheets
    }
    by_lower = {name.lower(): name for name in cells}
    for change in changes:
        name = by_lower.get(change.sheet.lower())
        if name is None:
            name = change.sheet
            by_lower[name.lower()] = name
            cells[name] = {}
        if change.kind is ChangeKind.CELL_REMOVED:
            cells[name].pop(change.addr, None)
        else:
            cells[name][change.addr] = change.after
    return {name: sheet_cells for name, sheet_cells in cells.items() if sheet_cells}


# --- alert rules ----------------------------------------------------------------


def _has_external_ref(formula: str | None) -> bool:
    if not formula:
        return False
    try:
        ast = parse_formula(formula)
    except FormulaSyntaxError:
        return "[" in formula
    return precedents(ast, "_").has_external_ref


def apply_alert_rules(
    changes: list[CellChange],
    structural: bool,
    old_wb: Workbook,
    rules: AlertRuleSet,
    template_sheets: tuple[str, ...] = TEMPLATE_SHEETS,
) -> list[str]:
    """Trigger ids matching this change set, in a stable order."""
    hits: set[Trigger] = set()
    old_sheets = {sh.name.lower(): sh for sh in old_wb.sheets}
    templates = {name.lower() for name in template_sheets}

    for change in changes:
        if Trigger.TEMPLATE_SHEET_MODIFIED in rules.triggers and (
            change.sheet.lower() in templates
        ):
            hits.add(Trigger.TEMPLATE_SHEET_MODIFIED)
        if change.kind is ChangeKind.FORMULA_CHANGED:
            if Trigger.FORMULA_CHANGE_ANY in rules.triggers:
                hits.add(Trigger.FORMULA_CHANGE_ANY)
            if Trigger.FORMULA_CHANGE_IN_LOCKED in rules.triggers:
                old_sheet = old_sheets.get(change.sheet.lower())
                if (
                    change.before is not None
                    and change.before.locked
                    and old_sheet is not None
                    and old_sheet.protection_enabled
                ):
                    hits.add(Trigger.FORMULA_CHANGE_IN_LOCKED)
            if Trigger.NEW_EXTERNAL_REFERENCE in rules.triggers:
                before_f = change.before.formula if change.before else None
                after_f = change.after.formula if change.after else None
                if _has_external_ref(after_f) and not _has_external_ref(before_f):
                    hits.add(Trigger.NEW_EXTERNAL_REFERENCE)
        if Trigger.VALUE_CHANGE_OVER_PCT in rules.triggers:
            before_v = change.before.value if change.before else None
            after_v = change.after.value if change.after else None
            if (
                before_v is not None
                and after_v is not None
                and before_v.is_number
                and after_v.is_number
                and before_v.raw != after_v.raw
            ):
                delta = abs(float(after_v.raw) - float(before_v.raw))
                base = max(abs(float(before_v.raw)), VALUE_CHANGE_EPSILON)
                if delta / base > rules.value_change_threshold:
                    hits.add(Trigger.VALUE_CHANGE_OVER_PCT)

    if structural and Trigger.STRUCTURAL_CHANGE in rules.triggers:
        hits.add(Trigger.STRUCTURAL_CHANGE)
    return [t.value for t in Trigger if t in hits]


# --- persistent change log --------------------------------------------------------


class ChangeLog:
    """Per-data-dir store of snapshots and change events.

    Single writer: every mutation appends one JSON line and fsyncs before
    returning.  Workbook bodies live under workbooks/<sha256>.json so the
    log itself stays small.
    """

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        (self.data_dir / "workbooks").mkdir(exist_ok=True)
        self._log_path = self.data_dir / "changes.jsonl"
        self._lock = threading.RLock()
        self._snapshots: dict[str, list[Snapshot]] = {}
        self._baselines: dict[str, int] = {}
        self._events: dict[int, ChangeEvent] = {}
        self._next_event_id = 1
        self._replay()
        self._fh = open(self._log_path, "a", encoding="utf-8")

    # -- persistence ------------------------------------------------------------

    def _replay(self) -> None:
        if not self._log_path.exists():
            return
        with open(self._log_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn tail write from a crash; ignore
                self._apply(entry)

    def _apply(self, entry: dict) -> None:
        kind = entry.get("kind")
        if kind == "snapshot":
            wb = self._load_body(entry["content_hash"])
            snap = Snapshot(
                snapshot_id=entry["snapshot_id"],
                file_key=entry["file_key"],
                taken_at=parse_ts(entry["taken_at"]),
                content_hash=entry["content_hash"],
                workbook=wb,
            )
            self._snapshots.setdefault(snap.file_key, []).append(snap)
            self._baselines.setdefault(snap.file_key, snap.snapshot_id)
        elif kind == "event":
            event = ChangeEvent.from_dict(entry["event"])
            self._events[event.event_id] = event
            self._next_event_id = max(self._next_event_id, event.event_id + 1)
        elif kind == "decision":
            event = self._events.get(entry["event_id"])
            if event is not None:
                event.decision = ReviewDecision.from_dict(entry["decision"])
                event.state = event.decision.verdict
                if entry.get("rebaseline") and event.state is EventState.APPROVED:
                    self._baselines[event.file_key] = event.to_snapshot
        elif kind == "baseline":
            self._baselines[entry["file_key"]] = entry["snapshot_id"]

    def _append(self, entry: dict) -> None:
        self._fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def _body_path(self, digest: str) -> Path:
        return self.data_dir / "workbooks" / f"{digest}.json"

    def _store_body(self, wb: Workbook) -> str:
        digest = content_hash(wb)
        path = self._body_path(digest)
        if not path.exists():
            tmp = path.with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write(serialize_canonical(wb))
                fh.flush()
                os.fsync(fh.fileno())  # body must be durable before its header line
            tmp.replace(path)
        return digest

    def _load_body(self, digest: str) -> Workbook:
        return parse_canonical(self._body_path(digest).read_text(encoding="utf-8"))

    def close(self) -> None:
        self._fh.close()

    # -- snapshots ----------------------------------------------------------------

    def take_snapshot(
        self, file_key: str, wb: Workbook, at: datetime | None = None
    ) -> Snapshot:
        with self._lock:
            at = at or utc_now()
            digest = self._store_body(wb)
            previous = self._snapshots.get(file_key, [])
            snap = Snapshot(
                snapshot_id=previous[-1].snapshot_id + 1 if previous else 1,
                file_key=file_key,
                taken_at=at,
                content_hash=digest,
                workbook=wb,
            )
            self._append({"kind": "snapshot", **snap.header()})
            self._snapshots.setdefault(file_key, []).append(snap)
            self._baselines.setdefault(file_key, snap.snapshot_id)
            return snap

    def snapshots(self, file_key: str) -> list[Snapshot]:
        return list(self._snapshots.get(file_key, []))

    def snapshot(self, file_key: str, snapshot_id: int) -> Snapshot | None:
        for snap in self._snapshots.get(file_key, []):
            if snap.snapshot_id == snapshot_id:
                return snap
        return None

    def baseline(self, file_key: str) -> Snapshot | None:
        snapshot_id = self._baselines.get(file_key)
        if snapshot_id is None:
            return None
        return self.snapshot(file_key, snapshot_id)

    def set_baseline(self, file_key: str, snapshot_id: int) -> None:
        with self._lock:
            if self.snapshot(file_key, snapshot_id) is None:
                raise ChangeError(f"no snapshot {snapshot_id} for {file_key!r}")
            self._append(
                {"kind": "baseline", "file_key": file_key, "snapshot_id": snapshot_id}
            )
            self._baselines[file_key] = snapshot_id

    # -- events ---------------------------------------------------------------------

    def record_event(
        self,
        file_key: str,
        from_snapshot: int,
        to_snapshot: int,
        changes: list[CellChange],
        structural: bool,
        author: str,
        triggered_rules: list[str],
        at: datetime | None = None,
    ) -> ChangeEvent:
        with self._lock:
            event = ChangeEvent(
                event_id=self._next_event_id,
                file_key=file_key,
                from_snapshot=from_snapshot,
                to_snapshot=to_snapshot,
                changes=changes,
                structural=structural,
                author=author,
                triggered_rules=list(triggered_rules),
                state=EventState.PENDING_REVIEW if triggered_rules else EventState.AUTO_LOGGED,
                recorded_at=at or utc_now(),
            )
            self._append({"kind": "event", "event": event.to_dict()})
            self._events[event.event_id] = event
            self._next_event_id += 1
            return event

    def submit_version(
        self,
        file_key: str,
        wb: Workbook,
        author: str,
        rules: AlertRuleSet,
        at: datetime | None = None,
    ) -> tuple[Snapshot, ChangeEvent | None]:
        """Snapshot a new version, diff it against the controlled baseline
        and record an event when anything changed."""
        with self._lock:
            base = self.baseline(file_key)
            snap = self.take_snapshot(file_key, wb, at=at)
            if base is None:
                return snap, None
            cell_changes, structural = diff(base.workbook, wb)
            if not cell_changes and not structural:
                return snap, None
            triggered = apply_alert_rules(cell_changes, structural, base.workbook, rules)
            event = self.record_event(
                file_key=file_key,
                from_snapshot=base.snapshot_id,
                to_snapshot=snap.snapshot_id,
                changes=cell_changes,
                structural=structural,
                author=author,
                triggered_rules=triggered,
                at=at,
            )
            if not triggered:
                # Nothing exceptional: the new version becomes the reference.
                self.set_baseline(file_key, snap.snapshot_id)
            return snap, event

    def events(self, state: EventState | None = None) -> list[ChangeEvent]:
        events = sorted(self._events.values(), key=lambda e: e.event_id)
        if state is not None:
            events = [e for e in events if e.state is state]
        return events

    def event(self, event_id: int) -> ChangeEvent | None:
        return self._events.get(event_id)

    def decide(
        self,
        event_id: int,
        reviewer: str,
        verdict: EventState,
        comment: str = "",
        at: datetime | None = None,
        rebaseline: bool = True,
    ) -> ChangeEvent:
        """pending_review -> approved|rejected, atomically.  The reviewer
        must not be the author; a rejection must carry a comment.  Approval
        moves the controlled baseline forward unless told otherwise."""
        if verdict not in (EventState.APPROVED, EventState.REJECTED):
            raise ChangeError(f"verdict must be approved or rejected, not {verdict.value}")
        with self._lock:
            event = self._events.get(event_id)
            if event is None:
                raise ChangeError(f"no event {event_id}")
            if event.state is not EventState.PENDING_REVIEW:
                raise NotPendingError(
                    f"event {event_id} is {event.state.value}; only pending_review "
                    "events accept decisions"
                )
            if reviewer == event.author:
                raise SelfReviewError(
                    f"reviewer {reviewer!r} authored the change; review must be independent"
                )
            if verdict is EventState.REJECTED and not comment.strip():
                raise MissingCommentError("rejections must carry a remediation comment")
            decision = ReviewDecision(
                reviewer=reviewer,
                decided_at=at or utc_now(),
                verdict=verdict,
                comment=comment,
            )
            apply_rebaseline = rebaseline and verdict is EventState.APPROVED
            self._append(
                {
                    "kind": "decision",
                    "event_id": event_id,
                    "decision": decision.to_dict(),
                    "rebaseline": apply_rebaseline,
                }
            )
            event.decision = decision
            event.state = verdict
            if apply_rebaseline:
                self._baselines[event.file_key] = event.to_snapshot
            return event
