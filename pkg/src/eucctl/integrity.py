"""Logical-integrity checks over a workbook.

Rules:
    INT-01  inconsistent formulas in a contiguous run (majority vote over
            the R1C1-normalized form)
    INT-02  stored error values
    INT-03  hardcoded numeric constants inside formulas
    INT-04  circular references
    INT-05  single-cell references to blank cells

All checks are pure: they never mutate the workbook and their findings are
sorted deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from eucctl.model import CellAddr, Workbook
from eucctl.formula.ast import BinaryOp, Call, Node, Number, Paren, UnaryOp
from eucctl.formula.parser import FormulaSyntaxError, parse_formula
from eucctl.formula.normalize import normalize_r1c1
from eucctl.formula.precedents import (
    RANGE_EXPANSION_CAP,
    expand_ranges,
    precedents,
)


class Severity(str, Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"
    INFO = "info"


SEVERITY_RANK = {
    Severity.INFO: 0,
    Severity.LOW: 1,
    Severity.MEDIUM: 2,
    Severity.HIGH: 3,
}

DEFAULT_CONSTANT_EXEMPTIONS = frozenset({0.0, 1.0, -1.0, 100.0})

# Second argument of these is a digit position, not business data.
ROUND_FAMILY = frozenset({"ROUND", "ROUNDUP", "ROUNDDOWN", "TRUNC", "FIXED"})

INTEGRITY_RULES = ("INT-01", "INT-02", "INT-03", "INT-04", "INT-05")


@dataclass(frozen=True)
class Finding:
    rule_id: str
    severity: Severity
    sheet: str | None
    addr: CellAddr | None
    message: str
    evidence: str = ""

    @property
    def ref(self) -> str:
        """Stable identity used by remediation plans and QA rechecks."""
        where = f"{self.sheet or '-'}!{self.addr.a1 if self.addr else '-'}"
        return f"{self.rule_id}@{where}"

    def to_dict(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "severity": self.severity.value,
            "sheet": self.sheet,
            "addr": self.addr.a1 if self.addr else None,
            "message": self.message,
            "evidence": self.evidence,
        }

    @staticmethod
    def from_dict(obj: dict) -> "Finding":
        from eucctl.model import a1_to_addr

        return Finding(
            rule_id=obj["rule_id"],
            severity=Severity(obj["severity"]),
            sheet=obj.get("sheet"),
            addr=a1_to_addr(obj["addr"]) if obj.get("addr") else None,
            message=obj["message"],
            evidence=obj.get("evidence", ""),
        )


def finding_sort_key(f: Finding) -> tuple:
    return (
        f.sheet or "",
        f.addr.row if f.addr else 0,
        f.addr.col if f.addr else 0,
        f.rule_id,
    )


class Orientation(str, Enum):
    ROW = "row"
    COLUMN = "column"


@dataclass(frozen=True)
class FormulaRegion:
    """A maximal run (length >= 3) of contiguous parsable-formula cells."""

    sheet: str
    cells: tuple[CellAddr, ...]
    orientation: Orientation


MIN_REGION_LENGTH = 3


@dataclass
class _ParsedSheet:
    """Per-sheet parse cache shared by the checks."""

    asts: dict[CellAddr, Node] = field(default_factory=dict)
    failures: dict[CellAddr, str] = field(default_factory=dict)


def _parse_sheet(sheet) -> _ParsedSheet:
    out = _ParsedSheet()
    for addr, cell in sheet.cells.items():
        if cell.formula is None:
            continue
        try:
            out.asts[addr] = parse_formula(cell.formula)
        except FormulaSyntaxError as exc:
            out.failures[addr] = str(exc)
    return out


def _maximal_runs(values: list[int]) -> list[list[int]]:
    runs: list[list[int]] = []
    current: list[int] = []
    for v in sorted(values):
        if current and v == current[-1] + 1:
            current.append(v)
        else:
            if current:
                runs.append(current)
            current = [v]
    if current:
        runs.append(current)
    return runs


def detect_regions(wb: Workbook) -> list[FormulaRegion]:
    """Maximal horizontal and vertical runs of parsable formula cells;
    runs shorter than 3 are noise and dropped.  A cell may sit in one row
    run and one column run."""
    regions: list[FormulaRegion] = []
    for sheet in wb.sheets:
        parsed = _parse_sheet(sheet)
        by_row: dict[int, list[int]] = {}
        by_col: dict[int, list[int]] = {}
        for addr in parsed.asts:
            by_row.setdefault(addr.row, []).append(addr.col)
            by_col.setdefault(addr.col, []).append(addr.row)
        for row in sorted(by_row):
            for run in _maximal_runs(by_row[row]):
                if len(run) >= MIN_REGION_LENGTH:
                    cells = tuple(CellAddr(col, row) for col in run)
                    regions.append(FormulaRegion(sheet.name, cells, Orientation.ROW))
        for col in sorted(by_col):
            for run in _maximal_runs(by_col[col]):
                if len(run) >= MIN_REGION_LENGTH:
                    cells = tuple(CellAddr(col, row) for row in run)
                    regions.append(FormulaRegion(sheet.name, cells, Orientation.COLUMN))
    return regions


def check_inconsistent_formulas(wb: Workbook) -> list[Finding]:
    """INT-01: within each region, the strict-majority normalized form is
    the intended one; minority cells are deviations.  No strict majority
    means the region is heterogeneous, which is only worth an info note."""
    findings: list[Finding] = []
    parsed_cache = {sheet.name: _parse_sheet(sheet) for sheet in wb.sheets}
    for region in detect_regions(wb):
        asts = parsed_cache[region.sheet].asts
        normalized = {
            addr: normalize_r1c1(asts[addr], addr).canonical_text for addr in region.cells
        }
        counts: dict[str, int] = {}
        for text in normalized.values():
            counts[text] = counts.get(text, 0) + 1
        majority = None
        for text, count in counts.items():
            if count * 2 > len(region.cells):
                majority = text
        if majority is None:
            if len(counts) > 1:
                start, end = region.cells[0], region.cells[-1]
                findings.append(
                    Finding(
                        rule_id="INT-01",
                        severity=Severity.INFO,
                        sheet=region.sheet,
                        addr=start,
                        message=(
                            f"heterogeneous {region.orientation.value} region "
                            f"{start.a1}:{end.a1} has no majority formula"
                        ),
                        evidence="; ".join(
                            f"{text} x{count}" for text, count in sorted(counts.items())
                        ),
                    )
                )
            continue
        for addr in region.cells:
            if normalized[addr] != majority:
                findings.append(
                    Finding(
                        rule_id="INT-01",
                        severity=Severity.HIGH,
                        sheet=region.sheet,
                        addr=addr,
                        message=(
                            f"formula deviates from the majority of its "
                            f"{region.orientation.value} region"
                        ),
                        evidence=f"cell normalizes to {normalized[addr]}; "
                        f"majority is {majority} "
                        f"({counts[majority]} of {len(region.cells)})",
                    )
                )
    findings.sort(key=finding_sort_key)
    return findings


def check_error_values(wb: Workbook) -> list[Finding]:
    """INT-02: stored error values are never acceptable in a controlled file."""
    findings = []
    for sheet in wb.sheets:
        for addr, cell in sheet.cells.items():
            if cell.value.is_error:
                findings.append(
                    Finding(
                        rule_id="INT-02",
                        severity=Severity.HIGH,
                        sheet=sheet.name,
                        addr=addr,
                        message=f"cell holds error value {cell.value.raw}",
                        evidence=cell.formula or "",
                    )
                )
    findings.sort(key=finding_sort_key)
    return findings


def _effective_literals(node: Node) -> list[tuple[float, Node | None, int]]:
    """(value, parent, arg_index) for every numeric literal, folding a
    leading unary minus into the value."""
    out: list[tuple[float, Node | None, int]] = []

    def visit(n: Node, parent: Node | None, arg_index: int) -> None:
        if isinstance(n, UnaryOp) and n.op == "-" and isinstance(n.operand, Number):
            out.append((-n.operand.value, parent, arg_index))
            return
        if isinstance(n, Number):
            out.append((n.value, parent, arg_index))
            return
        if isinstance(n, BinaryOp):
            visit(n.left, n, 0)
            visit(n.right, n, 1)
        elif isinstance(n, UnaryOp):
            visit(n.operand, n, 0)
        elif isinstance(n, Paren):
            # parens do not change a literal's position
            visit(n.inner, parent, arg_index)
        elif isinstance(n, Call):
            for i, arg in enumerate(n.args):
                visit(arg, n, i)

    visit(node, None, 0)
    return out


def _in_arithmetic_position(parent: Node | None) -> bool:
    if isinstance(parent, BinaryOp):
        return parent.op in ("+", "-", "*", "/", "^")
    if isinstance(parent, UnaryOp):
        return parent.op == "%"
    return False


def check_hardcoded_constants(
    wb: Workbook,
    exemptions: frozenset[float] = DEFAULT_CONSTANT_EXEMPTIONS,
) -> list[Finding]:
    """INT-03: numeric literals buried in arithmetic hide business inputs.
    The exempt values ({0, 1, -1, 100} by default) and digit positions of
    the ROUND family are structural, not data."""
    findings = []
    for sheet in wb.sheets:
        parsed = _parse_sheet(sheet)
        for addr in parsed.asts:
            offenders = []
            for value, parent, arg_index in _effective_literals(parsed.asts[addr]):
                if value in exemptions:
                    continue
                if (
                    isinstance(parent, Call)
                    and parent.name in ROUND_FAMILY
                    and arg_index == 1
                ):
                    continue
                if _in_arithmetic_position(parent):
                    offenders.append(value)
            if offenders:
                shown = ", ".join(
                    str(int(v)) if v == int(v) else repr(v) for v in offenders
                )
                findings.append(
                    Finding(
                        rule_id="INT-03",
                        severity=Severity.MEDIUM,
                        sheet=sheet.name,
                        addr=addr,
                        message=f"formula embeds hardcoded constant(s): {shown}",
                        evidence=sheet.cells[addr].formula or "",
                    )
                )
    findings.sort(key=finding_sort_key)
    return findings


def _strongly_connected(
    nodes: list[tuple[str, CellAddr]],
    edges: dict[tuple[str, CellAddr], list[tuple[str, CellAddr]]],
) -> list[list[tuple[str, CellAddr]]]:
    """Iterative Tarjan; recursion depth is unbounded on desk-size chains."""
    index_of: dict[tuple[str, CellAddr], int] = {}
    lowlink: dict[tuple[str, CellAddr], int] = {}
    on_stack: set[tuple[str, CellAddr]] = set()
    stack: list[tuple[str, CellAddr]] = []
    sccs: list[list[tuple[str, CellAddr]]] = []
    counter = 0

    for root in nodes:
        if root in index_of:
            continue
        work = [(root, 0)]
        while work:
            node, child_idx = work.pop()
            if child_idx == 0:
                index_of[node] = counter
                lowlink[node] = counter
                counter += 1
                stack.append(node)
                on_stack.add(node)
            recurse = False
            children = edges.get(node, [])
            for i in range(child_idx, len(children)):
                child = children[i]
                if child not in index_of:
                    work.append((node, i + 1))
                    work.append((child, 0))
                    recurse = True
                    break
                if child in on_stack:
                    lowlink[node] = min(lowlink[node], index_of[child])
            if recurse:
                continue
            if lowlink[node] == index_of[node]:
                scc = []
                while True:
                    popped = stack.pop()
                    on_stack.discard(popped)
                    scc.append(popped)
                    if popped == node:
                        break
                sccs.append(scc)
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
    return sccs


def check_circular_references(wb: Workbook) -> list[Finding]:
    """INT-04: strongly-connected components of the cell dependency graph
    (or self-loops) are circular calculation chains."""
    findings: list[Finding] = []
    edges: dict[tuple[str, CellAddr], list[tuple[str, CellAddr]]] = {}
    nodes: list[tuple[str, CellAddr]] = []
    capped: list[tuple[str, CellAddr]] = []
    for sheet in wb.sheets:
        parsed = _parse_sheet(sheet)
        for addr in sorted(parsed.asts, key=lambda a: a.sort_key):
            source = (sheet.name, addr)
            nodes.append(source)
            pre = precedents(parsed.asts[addr], sheet.name)
            targets, hit_cap = expand_ranges(pre.ranges, wb)
            if hit_cap:
                capped.append(source)
            edges[source] = targets
    self_loops = {n for n in nodes if n in edges.get(n, [])}
    for scc in _strongly_connected(nodes, edges):
        members = sorted(scc, key=lambda t: (t[0], t[1].sort_key))
        if len(members) < 2 and members[0] not in self_loops:
            continue
        first_sheet, first_addr = members[0]
        cycle_text = " -> ".join(f"{s}!{a.a1}" for s, a in members)
        findings.append(
            Finding(
                rule_id="INT-04",
                severity=Severity.HIGH,
                sheet=first_sheet,
                addr=first_addr,
                message=f"circular reference among {len(members)} cell(s)",
                evidence=cycle_text,
            )
        )
    for sheet_name, addr in capped:
        findings.append(
            Finding(
                rule_id="INT-04",
                severity=Severity.INFO,
                sheet=sheet_name,
                addr=addr,
                message=(
                    f"range expansion capped at {RANGE_EXPANSION_CAP} edges; "
                    "cycle detection for this formula is incomplete"
                ),
            )
        )
    findings.sort(key=finding_sort_key)
    return findings


def check_refs_to_blank(wb: Workbook) -> list[Finding]:
    """INT-05: a formula naming one specific blank cell probably points at
    the wrong place.  Multi-cell ranges are exempt; blank-padded ranges
    are normal."""
    findings = []
    for sheet in wb.sheets:
        parsed = _parse_sheet(sheet)
        for addr in sorted(parsed.asts, key=lambda a: a.sort_key):
            pre = precedents(parsed.asts[addr], sheet.name)
            blanks = []
            for ref in sorted(
                pre.ranges, key=lambda r: (r.sheet, r.top_left.sort_key)
            ):
                if not ref.is_single_cell:
                    continue
                target_sheet = wb.sheet(ref.sheet)
                if target_sheet is None:
                    continue
                if ref.top_left not in target_sheet.cells:
                    blanks.append(f"{target_sheet.name}!{ref.top_left.a1}")
            if blanks:
                findings.append(
                    Finding(
                        rule_id="INT-05",
                        severity=Severity.LOW,
                        sheet=sheet.name,
                        addr=addr,
                        message=f"formula references blank cell(s): {', '.join(blanks)}",
                        evidence=sheet.cells[addr].formula or "",
                    )
                )
    findings.sort(key=finding_sort_key)
    return findings


ALL_INTEGRITY_CHECKS = {
    "INT-01": check_inconsistent_formulas,
    "INT-02": check_error_values,
    "INT-03": check_hardcoded_constants,
    "INT-04": check_circular_references,
    "INT-05": check_refs_to_blank,
}


def run_integrity_checks(
    wb: Workbook, enabled: frozenset[str] | None = None
) -> list[Finding]:
    """Run the enabled INT checks and merge their findings deterministically."""
    findings: list[Finding] = []
    for rule_id, check in ALL_INTEGRITY_CHECKS.items():
        if enabled is None or rule_id in enabled:
            findings.extend(check(wb))
    findings.sort(key=finding_sort_key)
    return findings
