"""Recursive-descent parser for the A1 formula grammar.

Operator precedence (low to high): comparisons, ``&``, ``+ -``, ``* /``,
``^`` (right-associative), prefix ``+ -`` (binding tighter than ``^``, so
``-2^2`` is ``(-2)^2``), postfix ``%``.  Whitespace is insignificant and
dropped.  Function names are open-world: any identifier followed by a
parenthesis parses as a call.

Array literals ``{...}`` and structured-table references ``Name[...]``
are kept as opaque tokens so they never break an audit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from eucctl.model import ERROR_CODES, MAX_COL, MAX_ROW, letters_to_col
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


class FormulaSyntaxError(ValueError):
    """Formula text does not match the grammar; `offset` is the byte
    offset of the first offending character."""

    def __init__(self, message: str, text: str, pos: int):
        self.offset = len(text[:pos].encode("utf-8"))
        super().__init__(f"{message} (at offset {self.offset})")


class UnbalancedParensError(FormulaSyntaxError):
    pass


class BadReferenceError(FormulaSyntaxError):
    pass


_NUMBER_RE = re.compile(r"(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_REF_RE = re.compile(r"(\$?)([A-Za-z]{1,3})(\$?)([0-9]+)(?![0-9A-Za-z_.(])")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")
# longest alternatives first so "#NUM!" wins over a would-be "#N"
_ERROR_RE = re.compile(
    "|".join(re.escape(c) for c in sorted(ERROR_CODES, key=len, reverse=True))
)
_TWO_CHAR_OPS = ("<>", "<=", ">=")
_ONE_CHAR_OPS = "+-*/^&=<>%(),:!"

# the desktop-spreadsheet nesting limit; also keeps the recursive descent
# well inside the interpreter's stack on degenerate inputs
MAX_NESTING = 64

_BARE_SHEET_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")


@dataclass(frozen=True)
class _Token:
    kind: str  # NUMBER STRING QUOTED ERROR REF IDENT BOOK OPAQUE OP EOF
    value: object
    pos: int


def _scan_string(text: str, i: int) -> tuple[str, int]:
    # i sits on the opening quote; "" is an escaped quote
    quote = text[i]
    j = i + 1
    out: list[str] = []
    while j < len(text):
        if text[j] == quote:
            if j + 1 < len(text) and text[j + 1] == quote:
                out.append(quote)
                j += 2
                continue
            return "".join(out), j + 1
        out.append(text[j])
        j += 1
    raise FormulaSyntaxError("unterminated string literal", text, i)


def _scan_brackets(text: str, i: int) -> tuple[str, int]:
    # balanced [ ] run starting at i
    depth = 0
    j = i
    while j < len(text):
        if text[j] == "[":
            depth += 1
        elif text[j] == "]":
            depth -= 1
            if depth == 0:
                return text[i : j + 1], j + 1
        j += 1
    raise FormulaSyntaxError("unterminated bracket", text, i)


def _scan_braces(text: str, i: int) -> tuple[str, int]:
    j = i + 1
    while j < len(text):
        if text[j] == '"':
            _, j = _scan_string(text, j)
            continue
        if text[j] == "}":
            return text[i : j + 1], j + 1
        j += 1
    raise FormulaSyntaxError("unterminated array literal", text, i)


def tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch == '"':
            value, j = _scan_string(text, i)
            tokens.append(_Token("STRING", value, i))
            i = j
            continue
        if ch == "'":
            value, j = _scan_string(text, i)
            tokens.append(_Token("QUOTED", value, i))
            i = j
            continue
        if ch == "#":
            m = _ERROR_RE.match(text, i)
            if not m:
                raise FormulaSyntaxError("unknown error literal", text, i)
            tokens.append(_Token("ERROR", m.group(0), i))
            i = m.end()
            continue
        if ch == "{":
            raw, j = _scan_braces(text, i)
            tokens.append(_Token("OPAQUE", raw, i))
            i = j
            continue
        if ch == "[":
            raw, j = _scan_brackets(text, i)
            tokens.append(_Token("BOOK", raw[1:-1], i))
            i = j
            continue
        m = _NUMBER_RE.match(text, i)
        if m:
            tokens.append(_Token("NUMBER", float(m.group(0)), i))
            i = m.end()
            continue
        m = _REF_RE.match(text, i)
        if m:
            tokens.append(_Token("REF", m.groups(), i))
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            name = m.group(0)
            if m.end() < n and text[m.end()] == "[":
                raw, j = _scan_brackets(text, m.end())
                tokens.append(_Token("OPAQUE", name + raw, i))
                i = j
                continue
            tokens.append(_Token("IDENT", name, i))
            i = m.end()
            continue
        if text[i : i + 2] in _TWO_CHAR_OPS:
            tokens.append(_Token("OP", text[i : i + 2], i))
            i += 2
            continue
        if ch in _ONE_CHAR_OPS:
            tokens.append(_Token("OP", ch, i))
            i += 1
            continue
        raise FormulaSyntaxError(f"unexpected character {ch!r}", text, i)
    tokens.append(_Token("EOF", None, n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0
        self.depth = 0

    # -- token plumbing ----------------------------------------------------

    def _descend(self) -> None:
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise FormulaSyntaxError(
                f"formula nests deeper than {MAX_NESTING} levels",
                self.text,
                self.peek().pos,
            )

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def at_op(self, *ops: str) -> bool:
        tok = self.peek()
        return tok.kind == "OP" and tok.value in ops

    def expect_op(self, op: str, error_cls=FormulaSyntaxError) -> None:
        tok = self.peek()
        if tok.kind != "OP" or tok.value != op:
            raise error_cls(f"expected {op!r}", self.text, tok.pos)
        self.next()

    # -- grammar -------------------------------------------------------------

    def parse(self) -> Node:
        node = self.compare()
        tok = self.peek()
        if tok.kind != "EOF":
            if tok.kind == "OP" and tok.value == ")":
                raise UnbalancedParensError("unmatched ')'", self.text, tok.pos)
            raise FormulaSyntaxError("trailing input after formula", self.text, tok.pos)
        return node

    def compare(self) -> Node:
        node = self.concat()
        while self.at_op("=", "<>", "<=", ">=", "<", ">"):
            op = self.next().value
            node = BinaryOp(op, node, self.concat())
        return node

    def concat(self) -> Node:
        node = self.additive()
        while self.at_op("&"):
            self.next()
            node = BinaryOp("&", node, self.additive())
        return node

    def additive(self) -> Node:
        node = self.multiplicative()
        while self.at_op("+", "-"):
            op = self.next().value
            node = BinaryOp(op, node, self.multiplicative())
        return node

    def multiplicative(self) -> Node:
        node = self.power()
        while self.at_op("*", "/"):
            op = self.next().value
            node = BinaryOp(op, node, self.power())
        return node

    def power(self) -> Node:
        node = self.unary()
        if self.at_op("^"):
            self.next()
            self._descend()
            try:
                return BinaryOp("^", node, self.power())
            finally:
                self.depth -= 1
        return node

    def unary(self) -> Node:
        if self.at_op("+", "-"):
            op = self.next().value
            self._descend()
            try:
                return UnaryOp(op, self.unary())
            finally:
                self.depth -= 1
        return self.postfix()

    def postfix(self) -> Node:
        node = self.primary()
        while self.at_op("%"):
            self.next()
            node = UnaryOp("%", node)
        return node

    def primary(self) -> Node:
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.next()
            return Number(tok.value)
        if tok.kind == "STRING":
            self.next()
            return Text(tok.value)
        if tok.kind == "ERROR":
            self.next()
            return ErrorLit(tok.value)
        if tok.kind == "OPAQUE":
            self.next()
            return Opaque(tok.value)
        if tok.kind == "OP" and tok.value == "(":
            self.next()
            self._descend()
            try:
                inner = self.compare()
            finally:
                self.depth -= 1
            self.expect_op(")", UnbalancedParensError)
            return Paren(inner)
        if tok.kind == "BOOK":
            return self.reference(book=self.next().value)
        if tok.kind == "QUOTED":
            return self.reference()
        if tok.kind == "REF":
            return self.reference()
        if tok.kind == "IDENT":
            nxt = self.tokens[self.pos + 1]
            if nxt.kind == "OP" and nxt.value == "(":
                return self.call()
            if nxt.kind == "OP" and nxt.value == "!":
                return self.reference()
            if tok.value.upper() in ("TRUE", "FALSE"):
                self.next()
                return Boolean(tok.value.upper() == "TRUE")
            raise BadReferenceError(
                f"{tok.value!r} is neither a reference, a literal nor a call",
                self.text,
                tok.pos,
            )
        raise FormulaSyntaxError("expected a value, reference or call", self.text, tok.pos)

    def call(self) -> Node:
        name = self.next().value.upper()
        self.expect_op("(")
        self._descend()
        args: list[Node] = []
        if self.at_op(")"):
            self.depth -= 1
            self.next()
            return Call(name, ())
        while True:
            args.append(self.compare())
            if self.at_op(")"):
                self.depth -= 1
                self.next()
                return Call(name, tuple(args))
            if self.at_op(","):
                self.next()
                continue
            tok = self.peek()
            if tok.kind == "EOF":
                raise UnbalancedParensError("unterminated call", self.text, tok.pos)
            raise FormulaSyntaxError("expected ',' or ')' in call", self.text, tok.pos)

    def reference(self, book: str | None = None) -> Node:
        sheet: str | None = None
        tok = self.peek()
        if tok.kind == "QUOTED":
            self.next()
            content = tok.value
            if book is None and content.startswith("[") and "]" in content:
                book, content = content[1 : content.index("]")], content[content.index("]") + 1 :]
            sheet = content
            self.expect_op("!")
        elif tok.kind == "IDENT":
            sheet = self.next().value
            self.expect_op("!")
        start = self.cell_token(sheet=sheet, book=book)
        if self.at_op(":"):
            self.next()
            end_sheet: str | None = None
            nxt = self.peek()
            if nxt.kind in ("QUOTED", "IDENT"):
                end_sheet = self.next().value
                self.expect_op("!")
            end = self.cell_token(sheet=end_sheet, book=None)
            return RangeNode(start, end)
        return start

    def cell_token(self, sheet: str | None, book: str | None) -> CellRef:
        tok = self.peek()
        if tok.kind != "REF":
            raise BadReferenceError("expected a cell reference", self.text, tok.pos)
        self.next()
        col_dollar, letters, row_dollar, row_digits = tok.value
        col = letters_to_col(letters.upper())
        row = int(row_digits)
        if col > MAX_COL or row < 1 or row > MAX_ROW:
            raise BadReferenceError(
                f"reference {letters}{row_digits} outside the grid", self.text, tok.pos
            )
        return CellRef(
            col=col,
            row=row,
            col_abs=bool(col_dollar),
            row_abs=bool(row_dollar),
            sheet=sheet,
            book=book,
        )


def parse_formula(text: str) -> Node:
    """Parse formula text (without its leading "=") to an AST."""
    return _Parser(text).parse()


def is_bare_sheet_name(name: str) -> bool:
    """True when a sheet name can be printed unquoted: it must look like an
    identifier and not collide with a cell reference or boolean literal."""
    if not _BARE_SHEET_RE.fullmatch(name):
        return False
    if re.fullmatch(r"[A-Za-z]{1,3}[0-9]+", name):
        return False
    return name.upper() not in ("TRUE", "FALSE")
