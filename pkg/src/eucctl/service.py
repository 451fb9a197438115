"""HTTP/JSON API over the inventory and change-control stores.

Errors are JSON problem objects ``{code, message, field?}``.  The caller
identity is the pluggable ``X-Principal`` header; it is recorded verbatim
in the audit trail and used as the author/reviewer identity.  All writes
funnel through the stores' single-writer locks, so endpoint handlers stay
free of their own locking.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from fastapi import Body, FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from eucctl.changes import (
    AlertRuleSet,
    ChangeError,
    ChangeLog,
    EventState,
    MissingCommentError,
    NotPendingError,
    SelfReviewError,
    Trigger,
)
from eucctl.ingest import IngestError, import_xlsx, sniff_format, FileFormat
from eucctl.inventory import (
    DuplicateFileKeyError,
    InventoryError,
    RecordRetiredError,
    Registry,
    StaleRecordError,
    ValidationError,
    required_controls,
    validation_due,
)
from eucctl.model import WorkbookError, parse_canonical
from eucctl.standards import (
    EffortWeights,
    ItemStatus,
    PlanTransitionError,
    RuleConfig,
    audit,
    build_plan,
)
from eucctl.util import parse_ts, utc_now

DEFAULT_ALERT_RULES = AlertRuleSet(
    triggers=frozenset(
        {
            Trigger.FORMULA_CHANGE_ANY,
            Trigger.STRUCTURAL_CHANGE,
            Trigger.NEW_EXTERNAL_REFERENCE,
            Trigger.TEMPLATE_SHEET_MODIFIED,
        }
    )
)


@dataclass
class ServiceConfig:
    rules: RuleConfig = field(default_factory=RuleConfig)
    effort: EffortWeights = field(default_factory=EffortWeights)
    alerts: AlertRuleSet = field(default_factory=lambda: DEFAULT_ALERT_RULES)

    @staticmethod
    def load(path) -> "ServiceConfig":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        return ServiceConfig(
            rules=RuleConfig.from_dict(doc.get("rules", {})),
            effort=EffortWeights.from_dict(doc.get("effort", {})),
            alerts=AlertRuleSet.from_dict(doc["alerts"]) if "alerts" in doc else DEFAULT_ALERT_RULES,
        )


def _problem(status: int, code: str, message: str, field_name: str | None = None) -> JSONResponse:
    body: dict = {"code": code, "message": message}
    if field_name is not None:
        body["field"] = field_name
    return JSONResponse(status_code=status, content=body)


def _record_view(registry: Registry, rec) -> dict:
    view = rec.to_dict()
    view["required_controls"] = required_controls(rec).to_dict()
    view["validation_state"] = validation_due(rec, utc_now()).value
    report = registry.latest_audit(rec.record_id)
    view["compliance_score"] = report.compliance_score if report else None
    return view


def _workbook_from_bytes(data: bytes, name: str):
    if sniff_format(data) is not FileFormat.UNKNOWN:
        return import_xlsx(data, name=name).workbook
    return parse_canonical(data.decode("utf-8"))


def create_app(
    registry: Registry,
    changelog: ChangeLog,
    config: ServiceConfig | None = None,
    static_dir: str | None = None,
) -> FastAPI:
    cfg = config or ServiceConfig()
    app = FastAPI(title="eucctl inventory service", docs_url=None, redoc_url=None)

    @app.exception_handler(ValidationError)
    def _on_validation(_, exc: ValidationError):
        return _problem(400, "validation-error", str(exc), exc.field)

    @app.exception_handler(DuplicateFileKeyError)
    def _on_duplicate(_, exc):
        return _problem(409, "duplicate-file-key", str(exc), "file_key")

    @app.exception_handler(StaleRecordError)
    def _on_stale(_, exc):
        return _problem(409, "stale-record", str(exc))

    @app.exception_handler(RecordRetiredError)
    def _on_retired(_, exc):
        return _problem(409, "record-retired", str(exc))

    @app.exception_handler(NotPendingError)
    def _on_not_pending(_, exc):
        return _problem(409, "not-pending", str(exc))

    @app.exception_handler(SelfReviewError)
    def _on_self_review(_, exc):
        return _problem(403, "self-review", str(exc))

    @app.exception_handler(MissingCommentError)
    def _on_missing_comment(_, exc):
        return _problem(400, "missing-comment", str(exc), "comment")

    @app.exception_handler(PlanTransitionError)
    def _on_plan_transition(_, exc):
        return _problem(409, "invalid-transition", str(exc))

    @app.exception_handler(WorkbookError)
    def _on_workbook_error(_, exc):
        return _problem(400, "bad-workbook", str(exc))

    @app.exception_handler(IngestError)
    def _on_ingest_error(_, exc):
        return _problem(400, "bad-workbook", str(exc))

    @app.exception_handler(ChangeError)
    def _on_change_error(_, exc):
        return _problem(400, "change-error", str(exc))

    # -- applications ------------------------------------------------------

    @app.get("/api/applications")
    def list_applications(
        category: str | None = Query(default=None),
        tier: str | None = Query(default=None),
        status: str | None = Query(default=None),
    ):
        records = [registry.records[rid] for rid in sorted(registry.records)]
        if category:
            records = [r for r in records if r.category.value == category]
        if tier:
            records = [r for r in records if r.tier.value == tier]
        if status:
            records = [r for r in records if r.status.value == status]
        return {"applications": [_record_view(registry, r) for r in records]}

    @app.post("/api/applications", status_code=201)
    def register_application(
        payload: dict = Body(...),
        principal: str = Header(default="anonymous", alias="X-Principal"),
    ):
        allowed = {
            "name",
            "owner",
            "line_manager",
            "business_process",
            "category",
            "tier",
            "file_key",
            "last_validated_at",
            "validation_frequency_days",
        }
        unknown = set(payload) - allowed
        if unknown:
            raise ValidationError(f"unknown fields: {sorted(unknown)}", sorted(unknown)[0])
        rec = registry.register(principal=principal, **payload)
        return _record_view(registry, rec)

    @app.get("/api/applications/{record_id}")
    def get_application(record_id: int):
        rec = registry.records.get(record_id)
        if rec is None:
            return _problem(404, "not-found", f"no record {record_id}")
        return _record_view(registry, rec)

    @app.patch("/api/applications/{record_id}")
    def update_application(
        record_id: int,
        payload: dict = Body(...),
        principal: str = Header(default="anonymous", alias="X-Principal"),
    ):
        expected = payload.pop("expected_updated_at", None)
        expected_dt = parse_ts(expected) if expected else None
        rec = registry.update(
            record_id, payload, expected_updated_at=expected_dt, principal=principal
        )
        return _record_view(registry, rec)

    # -- audits and plans ----------------------------------------------------

    @app.get("/api/applications/{record_id}/audit")
    def get_audit(record_id: int):
        if record_id not in registry.records:
            return _problem(404, "not-found", f"no record {record_id}")
        report = registry.latest_audit(record_id)
        if report is None:
            return _problem(404, "no-audit", f"record {record_id} has not been audited")
        return report.to_dict()

    @app.post("/api/applications/{record_id}/audit")
    async def run_audit(
        record_id: int,
        request: Request,
        principal: str = Header(default="anonymous", alias="X-Principal"),
    ):
        rec = registry.records.get(record_id)
        if rec is None:
            return _problem(404, "not-found", f"no record {record_id}")
        data = await request.body()
        if not data:
            return _problem(400, "bad-workbook", "request body must be a workbook")
        wb = _workbook_from_bytes(data, name=rec.name)
        report = audit(wb, cfg.rules)
        plan = build_plan(report, cfg.effort)
        registry.store_audit(record_id, report, plan, principal=principal)
        return report.to_dict()

    @app.get("/api/applications/{record_id}/plan")
    def get_plan(record_id: int):
        if record_id not in registry.records:
            return _problem(404, "not-found", f"no record {record_id}")
        plan = registry.plan_for(record_id)
        if plan is None:
            return _problem(404, "no-plan", f"record {record_id} has no remediation plan")
        return plan.to_dict()

    @app.patch("/api/plan-items/{item_id}")
    def update_plan_item(
        item_id: str,
        payload: dict = Body(...),
        principal: str = Header(default="anonymous", alias="X-Principal"),
    ):
        try:
            status = ItemStatus(payload.get("status"))
        except ValueError:
            raise ValidationError(
                f"status must be one of {[s.value for s in ItemStatus]}", "status"
            )
        item = registry.update_plan_item(
            item_id,
            status,
            justification=payload.get("justification", ""),
            principal=principal,
        )
        return item.to_dict()

    # -- change monitoring ------------------------------------------------------

    @app.post("/api/applications/{record_id}/snapshot")
    async def submit_snapshot(
        record_id: int,
        request: Request,
        principal: str = Header(default="anonymous", alias="X-Principal"),
    ):
        rec = registry.records.get(record_id)
        if rec is None:
            return _problem(404, "not-found", f"no record {record_id}")
        if not rec.file_key:
            return _problem(
                409, "not-monitored", f"record {record_id} has no file_key to monitor"
            )
        data = await request.body()
        if not data:
            return _problem(400, "bad-workbook", "request body must be a workbook")
        wb = _workbook_from_bytes(data, name=rec.name)
        snap, event = changelog.submit_version(rec.file_key, wb, principal, cfg.alerts)
        return {
            "snapshot": snap.header(),
            "event": event.to_dict() if event else None,
        }

    @app.get("/api/changes")
    def list_changes(state: str | None = Query(default=None)):
        parsed_state = None
        if state is not None:
            try:
                parsed_state = EventState(state)
            except ValueError:
                raise ValidationError(
                    f"state must be one of {[s.value for s in EventState]}", "state"
                )
        return {"changes": [e.to_dict() for e in changelog.events(parsed_state)]}

    @app.get("/api/changes/{event_id}")
    def get_change(event_id: int):
        event = changelog.event(event_id)
        if event is None:
            return _problem(404, "not-found", f"no change event {event_id}")
        return event.to_dict()

    @app.post("/api/changes/{event_id}/decision")
    def decide_change(
        event_id: int,
        payload: dict = Body(...),
        principal: str = Header(default="anonymous", alias="X-Principal"),
    ):
        if changelog.event(event_id) is None:
            return _problem(404, "not-found", f"no change event {event_id}")
        verdict_tag = payload.get("verdict")
        if verdict_tag not in (EventState.APPROVED.value, EventState.REJECTED.value):
            raise ValidationError("verdict must be approved or rejected", "verdict")
        event = changelog.decide(
            event_id,
            reviewer=principal,
            verdict=EventState(verdict_tag),
            comment=payload.get("comment", ""),
            rebaseline=bool(payload.get("rebaseline", True)),
        )
        return event.to_dict()

    # -- summary --------------------------------------------------------------

    @app.get("/api/summary")
    def summary():
        return registry.dashboard_summary()

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
