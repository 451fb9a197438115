"""eucctl: audit, change-control and inventory tooling for end-user
computing spreadsheets."""

__version__ = "0.1.0"

from eucctl.model import (
    Cell,
    CellAddr,
    CellValue,
    RangeRef,
    SecurityInfo,
    Sheet,
    SheetPurpose,
    SourceFormat,
    Workbook,
    a1_to_addr,
    addr_to_a1,
    cell_at,
    parse_canonical,
    serialize_canonical,
)
from eucctl.integrity import Finding, Severity
from eucctl.standards import AuditReport, RemediationPlan, RuleConfig, audit, build_plan

__all__ = [
    "AuditReport",
    "Cell",
    "CellAddr",
    "CellValue",
    "Finding",
    "RangeRef",
    "RemediationPlan",
    "RuleConfig",
    "SecurityInfo",
    "Severity",
    "Sheet",
    "SheetPurpose",
    "SourceFormat",
    "Workbook",
    "a1_to_addr",
    "addr_to_a1",
    "audit",
    "build_plan",
    "cell_at",
    "parse_canonical",
    "serialize_canonical",
]
