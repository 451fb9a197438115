"""AST node types for the A1 formula grammar.

Nodes are frozen dataclasses so structural equality and hashing come for
free; the parser/printer round-trip tests lean on that.
"""

from __future__ import annotations

from dataclasses import dataclass


class Node:
    """Base class for all formula AST nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Number(Node):
    value: float


@dataclass(frozen=True)
class Text(Node):
    value: str


@dataclass(frozen=True)
class Boolean(Node):
    value: bool


@dataclass(frozen=True)
class ErrorLit(Node):
    code: str


@dataclass(frozen=True)
class CellRef(Node):
    """A single-cell reference with its absolute markers kept as written.

    `book` carries an external-workbook prefix ("[FY22.xlsx]"); `sheet` the
    optional sheet qualifier, unquoted.
    """

    col: int
    row: int
    col_abs: bool = False
    row_abs: bool = False
    sheet: str | None = None
    book: str | None = None


@dataclass(frozen=True)
class RangeNode(Node):
    """start:end — sheet/book qualifiers live on `start`."""

    start: CellRef
    end: CellRef


@dataclass(frozen=True)
class Call(Node):
    """Function call; names are stored uppercase, arity as parsed."""

    name: str
    args: tuple[Node, ...] = ()


@dataclass(frozen=True)
class BinaryOp(Node):
    op: str  # one of + - * / ^ & = <> < <= > >=
    left: Node
    right: Node


@dataclass(frozen=True)
class UnaryOp(Node):
    op: str  # prefix "+" / "-", postfix "%"
    operand: Node


@dataclass(frozen=True)
class Paren(Node):
    inner: Node


@dataclass(frozen=True)
class Opaque(Node):
    """Array literal or structured-table reference kept as raw text.

    These parse without crashing and round-trip verbatim, but contribute
    nothing to precedent extraction.
    """

    text: str


COMPARISON_OPS = ("=", "<>", "<=", ">=", "<", ">")
ARITHMETIC_OPS = ("+", "-", "*", "/", "^")
