"""Precedent extraction: which cells a formula reads.

This is the substrate for the dependency-driven checks (inconsistency
regions ride on normalization instead, but circular references, blank
references and cell classification all consume precedents).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from eucctl.model import CellAddr, RangeRef, Workbook
from eucctl.formula.ast import Call, CellRef, Node, RangeNode
from eucctl.formula.parser import FormulaSyntaxError, parse_formula

DEFAULT_VOLATILE_FUNCTIONS = frozenset(
    {"NOW", "TODAY", "RAND", "RANDBETWEEN", "OFFSET", "INDIRECT"}
)

# More expanded edges than this per formula and we stop: keeps adversarial
# whole-sheet ranges from blowing up the dependency graph.
RANGE_EXPANSION_CAP = 10_000


@dataclass(frozen=True)
class Precedents:
    ranges: frozenset[RangeRef]
    has_external_ref: bool = False
    volatile: bool = False


def _range_of(start: CellRef, end: CellRef, host_sheet: str) -> RangeRef:
    sheet = start.sheet if start.sheet is not None else host_sheet
    top_left = CellAddr(min(start.col, end.col), min(start.row, end.row))
    bottom_right = CellAddr(max(start.col, end.col), max(start.row, end.row))
    return RangeRef(sheet, top_left, bottom_right)


def precedents(
    node: Node,
    host_sheet: str,
    volatile_functions: frozenset[str] = DEFAULT_VOLATILE_FUNCTIONS,
) -> Precedents:
    """Collect referenced ranges (single cells as 1x1), inheriting the host
    sheet for unqualified references.  External-workbook references set the
    flag and stay out of the range set."""
    ranges: set[RangeRef] = set()
    external = False
    volatile = False

    def walk(n: Node) -> None:
        nonlocal external, volatile
        if isinstance(n, RangeNode):
            if n.start.book is not None:
                external = True
                return
            ranges.add(_range_of(n.start, n.end, host_sheet))
            return
        if isinstance(n, CellRef):
            if n.book is not None:
                external = True
                return
            ranges.add(_range_of(n, n, host_sheet))
            return
        if isinstance(n, Call):
            if n.name in volatile_functions:
                volatile = True
            for arg in n.args:
                walk(arg)
            return
        for attr in ("left", "right", "operand", "inner"):
            child = getattr(n, attr, None)
            if isinstance(child, Node):
                walk(child)

    walk(node)
    return Precedents(frozenset(ranges), has_external_ref=external, volatile=volatile)


@dataclass
class ReferenceIndex:
    """Inverse precedent map over a whole workbook.

    `referencing` maps a referenced (sheet, addr) to the set of formula
    cells reading it.  Formulas that fail to parse contribute nothing but
    are listed; formulas whose range expansion hit the cap are listed too.
    """

    referencing: dict[tuple[str, CellAddr], set[tuple[str, CellAddr]]] = field(
        default_factory=dict
    )
    unparsable: list[tuple[str, CellAddr, str]] = field(default_factory=list)
    capped: list[tuple[str, CellAddr]] = field(default_factory=list)

    def referencers_of(self, sheet: str, addr: CellAddr) -> set[tuple[str, CellAddr]]:
        return self.referencing.get((sheet, addr), set())


def expand_ranges(
    ranges: frozenset[RangeRef], wb: Workbook, cap: int = RANGE_EXPANSION_CAP
) -> tuple[list[tuple[str, CellAddr]], bool]:
    """Expand ranges to (sheet, addr) targets, dropping unknown sheets and
    stopping at `cap` cells.  Returns (targets, hit_cap)."""
    targets: list[tuple[str, CellAddr]] = []
    for ref in sorted(ranges, key=lambda r: (r.sheet, r.top_left.sort_key, r.bottom_right.sort_key)):
        sheet = wb.sheet(ref.sheet)
        if sheet is None:
            continue
        for addr in ref.cells():
            if len(targets) >= cap:
                return targets, True
            targets.append((sheet.name, addr))
    return targets, False


def referenced_by(wb: Workbook) -> ReferenceIndex:
    """Inverse of `precedents` expanded over ranges, for every parsable
    formula in the workbook."""
    index = ReferenceIndex()
    for sheet in wb.sheets:
        for addr in sorted(sheet.cells, key=lambda a: a.sort_key):
            cell = sheet.cells[addr]
            if cell.formula is None:
                continue
            try:
                ast = parse_formula(cell.formula)
            except FormulaSyntaxError as exc:
                index.unparsable.append((sheet.name, addr, str(exc)))
                continue
            pre = precedents(ast, sheet.name)
            targets, hit_cap = expand_ranges(pre.ranges, wb)
            if hit_cap:
                index.capped.append((sheet.name, addr))
            for target in targets:
                index.referencing.setdefault(target, set()).add((sheet.name, addr))
    return index
