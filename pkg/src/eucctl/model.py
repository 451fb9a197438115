"""Canonical workbook model and its JSON interchange format.

Every analysis in this package operates on the in-memory model defined
here, never on a vendor file format directly.  Cells store last-saved
values; nothing in this package ever recomputes a formula.

The canonical JSON grammar (also documented in the README):

    {
      "name": "...",
      "sheets": [
        {"name": "...", "protection_enabled": bool, "hidden": bool,
         "declared_purpose": "input|calculation|output|documentation|log|undeclared",
         "cells": {"A1": {"t": "n|s|b|e|blank", "v": ..., "f": "A1*2",
                          "locked": bool, "note": "..."}}}
      ],
      "named_ranges": {"NAME": "Sheet!A1:B2"},
      "security": {"encrypted": bool, "sheet_protection_count": int},
      "source_format": "canonical_json|xlsx|encrypted_opaque"   # optional
    }

`source_format` is emitted only when it differs from "canonical_json" so
that round-trips of imported workbooks are lossless.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum

MAX_COL = 16384
MAX_ROW = 1048576

ERROR_CODES = frozenset(
    {"#DIV/0!", "#N/A", "#NAME?", "#NULL!", "#NUM!", "#REF!", "#VALUE!"}
)


class WorkbookError(ValueError):
    """Base class for canonical-format and model errors."""


class MalformedJsonError(WorkbookError):
    pass


class InvariantViolationError(WorkbookError):
    """A type invariant does not hold; message names the invariant and place."""


class AddressOutOfRangeError(WorkbookError):
    pass


class MalformedAddressError(WorkbookError):
    pass


class UnknownSheetError(WorkbookError):
    pass


class SourceFormat(str, Enum):
    CANONICAL_JSON = "canonical_json"
    XLSX = "xlsx"
    ENCRYPTED_OPAQUE = "encrypted_opaque"


class SheetPurpose(str, Enum):
    INPUT = "input"
    CALCULATION = "calculation"
    OUTPUT = "output"
    DOCUMENTATION = "documentation"
    LOG = "log"
    UNDECLARED = "undeclared"


class ValueType(str, Enum):
    NUMBER = "n"
    TEXT = "s"
    BOOLEAN = "b"
    ERROR = "e"
    BLANK = "blank"


@dataclass(frozen=True)
class CellValue:
    """Tagged last-saved value of a cell."""

    type: ValueType
    raw: float | str | bool | None = None

    @staticmethod
    def number(x: float) -> "CellValue":
        return CellValue(ValueType.NUMBER, float(x))

    @staticmethod
    def text(s: str) -> "CellValue":
        return CellValue(ValueType.TEXT, s)

    @staticmethod
    def boolean(b: bool) -> "CellValue":
        return CellValue(ValueType.BOOLEAN, bool(b))

    @staticmethod
    def error(code: str) -> "CellValue":
        if code not in ERROR_CODES:
            raise InvariantViolationError(f"unknown error code {code!r}")
        return CellValue(ValueType.ERROR, code)

    @staticmethod
    def blank() -> "CellValue":
        return CellValue(ValueType.BLANK, None)

    @property
    def is_blank(self) -> bool:
        return self.type is ValueType.BLANK

    @property
    def is_number(self) -> bool:
        return self.type is ValueType.NUMBER

    @property
    def is_text(self) -> bool:
        return self.type is ValueType.TEXT

    @property
    def is_error(self) -> bool:
        return self.type is ValueType.ERROR


BLANK = CellValue.blank()


@dataclass(frozen=True, order=True)
class CellAddr:
    """1-based (col, row) grid address; "A1" is (1, 1).

    Ordering is (col, row); use `sort_key` when (row, col) order is wanted.
    """

    col: int
    row: int

    def __post_init__(self) -> None:
        if not (1 <= self.col <= MAX_COL):
            raise AddressOutOfRangeError(f"column {self.col} outside 1..{MAX_COL}")
        if not (1 <= self.row <= MAX_ROW):
            raise AddressOutOfRangeError(f"row {self.row} outside 1..{MAX_ROW}")

    @property
    def sort_key(self) -> tuple[int, int]:
        return (self.row, self.col)

    @property
    def a1(self) -> str:
        return addr_to_a1(self)


@dataclass(frozen=True)
class Cell:
    """One non-empty cell.  `locked` defaults to true, matching the
    spreadsheet-format convention; it only means anything once the owning
    sheet has protection enabled."""

    value: CellValue = BLANK
    formula: str | None = None
    locked: bool = True
    note: str | None = None

    @property
    def is_empty(self) -> bool:
        return self.value.is_blank and self.formula is None and self.note is None


@dataclass(frozen=True)
class RangeRef:
    """A rectangular, sheet-qualified cell region (single cells are 1x1)."""

    sheet: str
    top_left: CellAddr
    bottom_right: CellAddr

    def __post_init__(self) -> None:
        if (
            self.top_left.col > self.bottom_right.col
            or self.top_left.row > self.bottom_right.row
        ):
            raise InvariantViolationError(
                f"range corners out of order: {self.top_left} .. {self.bottom_right}"
            )

    @property
    def cell_count(self) -> int:
        return (self.bottom_right.col - self.top_left.col + 1) * (
            self.bottom_right.row - self.top_left.row + 1
        )

    @property
    def is_single_cell(self) -> bool:
        return self.top_left == self.bottom_right

    def cells(self):
        """Iterate contained addresses row-major."""
        for row in range(self.top_left.row, self.bottom_right.row + 1):
            for col in range(self.top_left.col, self.bottom_right.col + 1):
                yield CellAddr(col, row)

    def contains(self, addr: CellAddr) -> bool:
        return (
            self.top_left.col <= addr.col <= self.bottom_right.col
            and self.top_left.row <= addr.row <= self.bottom_right.row
        )


@dataclass(frozen=True)
class SecurityInfo:
    encrypted: bool = False
    sheet_protection_count: int = 0


@dataclass
class Sheet:
    name: str
    cells: dict[CellAddr, Cell] = field(default_factory=dict)
    protection_enabled: bool = False
    declared_purpose: SheetPurpose = SheetPurpose.UNDECLARED
    hidden: bool = False

    def populated_bounds(self) -> tuple[int, int, int, int] | None:
        """(min_col, min_row, max_col, max_row) of stored cells, or None."""
        if not self.cells:
            return None
        cols = [a.col for a in self.cells]
        rows = [a.row for a in self.cells]
        return (min(cols), min(rows), max(cols), max(rows))


@dataclass
class Workbook:
    name: str
    sheets: list[Sheet] = field(default_factory=list)
    named_ranges: dict[str, RangeRef] = field(default_factory=dict)
    security: SecurityInfo = field(default_factory=SecurityInfo)
    source_format: SourceFormat = SourceFormat.CANONICAL_JSON

    def sheet(self, name: str) -> Sheet | None:
        """Case-insensitive sheet lookup (names are unique that way)."""
        lowered = name.lower()
        for sh in self.sheets:
            if sh.name.lower() == lowered:
                return sh
        return None

    def sheet_names(self) -> list[str]:
        return [sh.name for sh in self.sheets]


# --- address <-> A1 conversion --------------------------------------------

_A1_RE = re.compile(r"^\$?([A-Z]+)\$?([1-9][0-9]*)$")


def col_to_letters(col: int) -> str:
    """1 -> "A", 26 -> "Z", 27 -> "AA" (bijective base 26)."""
    if col < 1:
        raise AddressOutOfRangeError(f"column {col} outside 1..{MAX_COL}")
    out = ""
    while col > 0:
        col, rem = divmod(col - 1, 26)
        out = chr(ord("A") + rem) + out
    return out


def letters_to_col(letters: str) -> int:
    col = 0
    for ch in letters:
        col = col * 26 + (ord(ch) - ord("A") + 1)
    return col


def addr_to_a1(addr: CellAddr) -> str:
    return f"{col_to_letters(addr.col)}{addr.row}"


def a1_to_addr(text: str) -> CellAddr:
    """Parse "A1" (absolute markers accepted and ignored here; the formula
    module records them separately)."""
    m = _A1_RE.match(text)
    if not m:
        raise MalformedAddressError(f"not an A1 address: {text!r}")
    return CellAddr(letters_to_col(m.group(1)), int(m.group(2)))


# --- lookups ----------------------------------------------------------------


def cell_at(wb: Workbook, sheet: str, addr: CellAddr) -> Cell | None:
    """Cell if stored, None for blank cells; unknown sheet is an error."""
    sh = wb.sheet(sheet)
    if sh is None:
        raise UnknownSheetError(f"no sheet named {sheet!r}")
    return sh.cells.get(addr)


# --- named-range string form ------------------------------------------------

_RANGE_SHEET_RE = re.compile(r"^(?:'((?:[^']|'')+)'|([^'!]+))!(.+)$")


def format_range(ref: RangeRef) -> str:
    sheet = ref.sheet
    if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.]*", sheet):
        sheet = "'" + sheet.replace("'", "''") + "'"
    return f"{sheet}!{addr_to_a1(ref.top_left)}:{addr_to_a1(ref.bottom_right)}"


def parse_range(text: str) -> RangeRef:
    """Parse "Sheet!A1:B2" (or a single-cell "Sheet!A1")."""
    m = _RANGE_SHEET_RE.match(text)
    if not m:
        raise MalformedAddressError(f"not a sheet-qualified range: {text!r}")
    sheet = m.group(1).replace("''", "'") if m.group(1) else m.group(2)
    body = m.group(3)
    if ":" in body:
        left, right = body.split(":", 1)
        a, b = a1_to_addr(left), a1_to_addr(right)
    else:
        a = b = a1_to_addr(body)
    return RangeRef(sheet, a, b)


# --- canonical JSON ---------------------------------------------------------

_TOP_LEVEL_KEYS = {"name", "sheets", "named_ranges", "security", "source_format"}
_SHEET_KEYS = {"name", "protection_enabled", "hidden", "declared_purpose", "cells"}
_CELL_KEYS = {"t", "v", "f", "locked", "note"}


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise InvariantViolationError(message)


def _cell_from_json(a1: str, obj: dict, where: str) -> tuple[CellAddr, Cell]:
    if not isinstance(obj, dict):
        raise MalformedJsonError(f"{where}: cell {a1} is not an object")
    unknown = set(obj) - _CELL_KEYS
    _require(not unknown, f"{where}: cell {a1} has unknown fields {sorted(unknown)}")
    addr = a1_to_addr(a1)
    ttag = obj.get("t", "blank")
    raw = obj.get("v")
    try:
        vtype = ValueType(ttag)
    except ValueError:
        raise InvariantViolationError(f"{where}: cell {a1} has unknown type {ttag!r}")
    if vtype is ValueType.NUMBER:
        _require(isinstance(raw, (int, float)) and not isinstance(raw, bool),
                 f"{where}: cell {a1} type n needs a numeric v")
        value = CellValue.number(float(raw))
    elif vtype is ValueType.TEXT:
        _require(isinstance(raw, str), f"{where}: cell {a1} type s needs a string v")
        value = CellValue.text(raw)
    elif vtype is ValueType.BOOLEAN:
        _require(isinstance(raw, bool), f"{where}: cell {a1} type b needs a boolean v")
        value = CellValue.boolean(raw)
    elif vtype is ValueType.ERROR:
        _require(isinstance(raw, str) and raw in ERROR_CODES,
                 f"{where}: cell {a1} type e needs one of {sorted(ERROR_CODES)}")
        value = CellValue.error(raw)
    else:
        _require(raw is None, f"{where}: cell {a1} blank cells carry no v")
        value = BLANK
    formula = obj.get("f")
    _require(formula is None or isinstance(formula, str),
             f"{where}: cell {a1} formula must be a string")
    note = obj.get("note")
    _require(note is None or isinstance(note, str),
             f"{where}: cell {a1} note must be a string")
    locked = obj.get("locked", True)
    _require(isinstance(locked, bool), f"{where}: cell {a1} locked must be a boolean")
    cell = Cell(value=value, formula=formula, locked=locked, note=note)
    _require(not cell.is_empty,
             f"{where}: cell {a1} is fully empty; sparse form stores only non-empty cells")
    return addr, cell


def _sheet_from_json(obj: dict, index: int) -> Sheet:
    where = f"sheets[{index}]"
    if not isinstance(obj, dict):
        raise MalformedJsonError(f"{where} is not an object")
    unknown = set(obj) - _SHEET_KEYS
    _require(not unknown, f"{where} has unknown fields {sorted(unknown)}")
    name = obj.get("name")
    _require(isinstance(name, str) and name != "", f"{where}: sheet name must be non-empty")
    purpose_tag = obj.get("declared_purpose", "undeclared")
    try:
        purpose = SheetPurpose(purpose_tag)
    except ValueError:
        raise InvariantViolationError(f"{where}: unknown declared_purpose {purpose_tag!r}")
    cells_obj = obj.get("cells", {})
    if not isinstance(cells_obj, dict):
        raise MalformedJsonError(f"{where}: cells must be an object")
    cells: dict[CellAddr, Cell] = {}
    for a1, cell_obj in cells_obj.items():
        addr, cell = _cell_from_json(a1, cell_obj, where)
        _require(addr not in cells, f"{where}: duplicate cell address {a1}")
        cells[addr] = cell
    return Sheet(
        name=name,
        cells=cells,
        protection_enabled=bool(obj.get("protection_enabled", False)),
        declared_purpose=purpose,
        hidden=bool(obj.get("hidden", False)),
    )


def validate_workbook(wb: Workbook) -> None:
    """Check every type invariant; raises InvariantViolationError."""
    seen: set[str] = set()
    for sh in wb.sheets:
        _require(sh.name != "", "sheet names must be non-empty")
        lowered = sh.name.lower()
        _require(lowered not in seen, f"duplicate sheet name {sh.name!r} (case-insensitive)")
        seen.add(lowered)
        for addr, cell in sh.cells.items():
            _require(not cell.is_empty, f"{sh.name}!{addr.a1} is fully empty")
            if cell.value.type is ValueType.ERROR:
                _require(cell.value.raw in ERROR_CODES,
                         f"{sh.name}!{addr.a1} has unknown error code")
    for name, ref in wb.named_ranges.items():
        _require(wb.sheet(ref.sheet) is not None,
                 f"named range {name!r} targets unknown sheet {ref.sheet!r}")
    _require(wb.security.sheet_protection_count >= 0,
             "sheet_protection_count must be >= 0")
    _require(wb.security.sheet_protection_count <= len(wb.sheets),
             "sheet_protection_count exceeds number of sheets")
    if wb.source_format is SourceFormat.ENCRYPTED_OPAQUE:
        _require(not wb.sheets, "encrypted_opaque workbooks carry no sheets")
        _require(wb.security.encrypted, "encrypted_opaque requires security.encrypted")


def parse_canonical(json_text: str) -> Workbook:
    """Parse the canonical JSON form; rejects unknown top-level fields and
    anything violating a model invariant."""
    try:
        doc = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise MalformedJsonError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedJsonError("top level must be an object")
    unknown = set(doc) - _TOP_LEVEL_KEYS
    _require(not unknown, f"unknown top-level fields {sorted(unknown)}")
    name = doc.get("name")
    _require(isinstance(name, str) and name != "", "workbook name must be non-empty")
    sheets_obj = doc.get("sheets", [])
    if not isinstance(sheets_obj, list):
        raise MalformedJsonError("sheets must be an array")
    sheets = [_sheet_from_json(s, i) for i, s in enumerate(sheets_obj)]
    ranges_obj = doc.get("named_ranges", {})
    if not isinstance(ranges_obj, dict):
        raise MalformedJsonError("named_ranges must be an object")
    named_ranges = {rng_name: parse_range(target) for rng_name, target in ranges_obj.items()}
    sec_obj = doc.get("security", {})
    if not isinstance(sec_obj, dict):
        raise MalformedJsonError("security must be an object")
    security = SecurityInfo(
        encrypted=bool(sec_obj.get("encrypted", False)),
        sheet_protection_count=int(sec_obj.get("sheet_protection_count", 0)),
    )
    fmt_tag = doc.get("source_format", "canonical_json")
    try:
        fmt = SourceFormat(fmt_tag)
    except ValueError:
        raise InvariantViolationError(f"unknown source_format {fmt_tag!r}")
    wb = Workbook(name=name, sheets=sheets, named_ranges=named_ranges,
                  security=security, source_format=fmt)
    validate_workbook(wb)
    return wb


def _cell_to_json(cell: Cell) -> dict:
    out: dict = {"t": cell.value.type.value}
    if not cell.value.is_blank:
        raw = cell.value.raw
        if cell.value.is_number:
            f = float(raw)
            raw = int(f) if f.is_integer() and abs(f) < 2**53 else f
        out["v"] = raw
    if cell.formula is not None:
        out["f"] = cell.formula
    out["locked"] = cell.locked
    if cell.note is not None:
        out["note"] = cell.note
    return out


def workbook_to_dict(wb: Workbook) -> dict:
    """Plain-dict form with deterministic member order (sheets as listed,
    cell keys sorted by (row, col), named ranges by name)."""
    doc: dict = {
        "name": wb.name,
        "sheets": [
            {
                "name": sh.name,
                "protection_enabled": sh.protection_enabled,
                "hidden": sh.hidden,
                "declared_purpose": sh.declared_purpose.value,
                "cells": {
                    addr.a1: _cell_to_json(sh.cells[addr])
                    for addr in sorted(sh.cells, key=lambda a: a.sort_key)
                },
            }
            for sh in wb.sheets
        ],
        "named_ranges": {
            name: format_range(wb.named_ranges[name]) for name in sorted(wb.named_ranges)
        },
        "security": {
            "encrypted": wb.security.encrypted,
            "sheet_protection_count": wb.security.sheet_protection_count,
        },
    }
    if wb.source_format is not SourceFormat.CANONICAL_JSON:
        doc["source_format"] = wb.source_format.value
    return doc


def serialize_canonical(wb: Workbook) -> str:
    """Deterministic canonical serialization; equal workbooks produce
    byte-identical output and parse_canonical round-trips it."""
    validate_workbook(wb)
    return json.dumps(workbook_to_dict(wb), ensure_ascii=False, separators=(",", ":"))
