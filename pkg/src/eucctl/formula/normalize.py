"""R1C1-relative canonical form.

Rewriting every relative reference as an offset from its host cell makes
"the same formula dragged across a range" textually identical, which is
what the inconsistency checks compare.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from eucctl.model import MAX_COL, MAX_ROW, CellAddr
from eucctl.formula.ast import CellRef, Node
from eucctl.formula.printer import format_qualifier, render


@dataclass(frozen=True)
class NormalizedFormula:
    """Canonical R1C1 text; equality of `canonical_text` is the
    formula-equivalence test used by the integrity rules."""

    canonical_text: str


def format_r1c1_ref(ref: CellRef, host: CellAddr) -> str:
    if ref.row_abs:
        row = f"R{ref.row}"
    elif ref.row == host.row:
        row = "R"
    else:
        row = f"R[{ref.row - host.row}]"
    if ref.col_abs:
        col = f"C{ref.col}"
    elif ref.col == host.col:
        col = "C"
    else:
        col = f"C[{ref.col - host.col}]"
    return format_qualifier(ref) + row + col


def normalize_r1c1(node: Node, host: CellAddr) -> NormalizedFormula:
    return NormalizedFormula(render(node, lambda ref: format_r1c1_ref(ref, host)))


class TranslationRangeError(ValueError):
    """Shifting a relative reference pushed it off the grid."""


def _shift_ref(ref: CellRef, delta_col: int, delta_row: int) -> CellRef:
    col = ref.col if ref.col_abs else ref.col + delta_col
    row = ref.row if ref.row_abs else ref.row + delta_row
    if not (1 <= col <= MAX_COL) or not (1 <= row <= MAX_ROW):
        raise TranslationRangeError(
            f"reference shifts to column {col}, row {row}, outside the grid"
        )
    return replace(ref, col=col, row=row)


def translate_formula(node: Node, delta_col: int, delta_row: int) -> Node:
    """The "drag" transform: shift every relative reference component by
    the given deltas, leaving absolute components alone."""
    if isinstance(node, CellRef):
        return _shift_ref(node, delta_col, delta_row)
    if not isinstance(node, Node):
        return node
    changes = {}
    for f in fields(node):
        value = getattr(node, f.name)
        if isinstance(value, Node):
            changes[f.name] = translate_formula(value, delta_col, delta_row)
        elif isinstance(value, tuple):
            changes[f.name] = tuple(
                translate_formula(v, delta_col, delta_row) if isinstance(v, Node) else v
                for v in value
            )
    return replace(node, **changes) if changes else node
