"""Canonical text rendering of formula ASTs.

The printer reproduces the parsed structure verbatim (explicit `Paren`
nodes are the only source of parentheses), emits no whitespace, and
uppercases nothing that the parser has not already uppercased.  For every
parsed AST, ``parse_formula(print_formula(ast)) == ast``.
"""

from __future__ import annotations

from typing import Callable

from eucctl.model import col_to_letters
from eucctl.formula.ast import (
    BinaryOp,
    Boolean,
    Call,
    CellRef,
    ErrorLit,
    Node,
    Number,
    Opaque,
    Paren,
    RangeNode,
    Text,
    UnaryOp,
)
from eucctl.formula.parser import is_bare_sheet_name


def format_number(value: float) -> str:
    if value == int(value) and abs(value) < 2**53:
        return str(int(value))
    return repr(value)


def format_qualifier(ref: CellRef) -> str:
    """Book/sheet prefix ("[FY22.xlsx]Data!", "'My Sheet'!", or "")."""
    book = f"[{ref.book}]" if ref.book is not None else ""
    if ref.sheet is None:
        return book  # bare book prefix carries no "!"
    if not is_bare_sheet_name(ref.sheet):
        quoted = (book + ref.sheet).replace("'", "''")
        return f"'{quoted}'!"
    return f"{book}{ref.sheet}!"


def format_a1_ref(ref: CellRef) -> str:
    return (
        format_qualifier(ref)
        + ("$" if ref.col_abs else "")
        + col_to_letters(ref.col)
        + ("$" if ref.row_abs else "")
        + str(ref.row)
    )


def render(node: Node, ref_fmt: Callable[[CellRef], str]) -> str:
    """Shared renderer; `ref_fmt` decides how single references print."""
    if isinstance(node, Number):
        return format_number(node.value)
    if isinstance(node, Text):
        return '"' + node.value.replace('"', '""') + '"'
    if isinstance(node, Boolean):
        return "TRUE" if node.value else "FALSE"
    if isinstance(node, ErrorLit):
        return node.code
    if isinstance(node, CellRef):
        return ref_fmt(node)
    if isinstance(node, RangeNode):
        return f"{ref_fmt(node.start)}:{ref_fmt(node.end)}"
    if isinstance(node, Call):
        return node.name + "(" + ",".join(render(a, ref_fmt) for a in node.args) + ")"
    if isinstance(node, BinaryOp):
        return render(node.left, ref_fmt) + node.op + render(node.right, ref_fmt)
    if isinstance(node, UnaryOp):
        if node.op == "%":
            return render(node.operand, ref_fmt) + "%"
        return node.op + render(node.operand, ref_fmt)
    if isinstance(node, Paren):
        return "(" + render(node.inner, ref_fmt) + ")"
    if isinstance(node, Opaque):
        return node.text
    raise TypeError(f"not a formula node: {node!r}")


def print_formula(node: Node) -> str:
    return render(node, format_a1_ref)
