"""Import of zipped-XML spreadsheets (SpreadsheetML subset) into the
canonical model, plus detection of encrypted OLE/CFB containers.

The supported subset is exactly what the audit rules consume: cell values
and types, formulas (as text, parsed lazily downstream), shared and
inline strings, the locked flag from cellXfs, sheet protection and hidden
state, and defined names.  Everything else degrades to a warning, never a
crash.  Encrypted containers are first-class: they import as an opaque
workbook so the inventory can still record their existence.
"""

from __future__ import annotations

import io
import re
import zipfile
from dataclasses import dataclass, field
from enum import Enum
from xml.etree import ElementTree

from eucctl.model import (
    BLANK,
    Cell,
    CellAddr,
    CellValue,
    ERROR_CODES,
    MalformedAddressError,
    RangeRef,
    SecurityInfo,
    Sheet,
    SheetPurpose,
    SourceFormat,
    Workbook,
    a1_to_addr,
    validate_workbook,
)
from eucctl.formula.parser import FormulaSyntaxError, parse_formula
from eucctl.formula.normalize import TranslationRangeError, translate_formula
from eucctl.formula.printer import print_formula

ZIP_MAGIC = b"PK\x03\x04"
CFB_MAGIC = b"\xd0\xcf\x11\xe0\xa1\xb1\x1a\xe1"

_NS = "{http://schemas.openxmlformats.org/spreadsheetml/2006/main}"
_REL_NS = "{http://schemas.openxmlformats.org/package/2006/relationships}"
_RID_ATTR = "{http://schemas.openxmlformats.org/officeDocument/2006/relationships}id"


class IngestError(ValueError):
    pass


class NotASpreadsheetError(IngestError):
    pass


class CorruptZipError(IngestError):
    pass


class MissingPartError(IngestError):
    pass


class FileFormat(str, Enum):
    XLSX_ZIP = "xlsx_zip"
    CFB_ENCRYPTED = "cfb_encrypted"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class IngestWarning:
    code: str
    location: str
    message: str


@dataclass
class IngestReport:
    workbook: Workbook
    warnings: list[IngestWarning] = field(default_factory=list)


def sniff_format(data: bytes) -> FileFormat:
    """Decide from magic bytes only."""
    if data.startswith(ZIP_MAGIC):
        return FileFormat.XLSX_ZIP
    if data.startswith(CFB_MAGIC):
        return FileFormat.CFB_ENCRYPTED
    return FileFormat.UNKNOWN


def _shared_strings(zf: zipfile.ZipFile, warnings: list[IngestWarning]) -> list[str]:
    try:
        data = zf.read("xl/sharedStrings.xml")
    except KeyError:
        return []
    try:
        root = ElementTree.fromstring(data)
    except ElementTree.ParseError as exc:
        warnings.append(
            IngestWarning("bad-shared-strings", "xl/sharedStrings.xml", str(exc))
        )
        return []
    strings = []
    for si in root.findall(f"{_NS}si"):
        # either one <t> or a sequence of rich runs <r><t>
        parts = [t.text or "" for t in si.iter(f"{_NS}t")]
        strings.append("".join(parts))
    return strings


def _locked_styles(zf: zipfile.ZipFile, warnings: list[IngestWarning]) -> list[bool]:
    """cellXfs index -> locked flag (format default is locked)."""
    try:
        data = zf.read("xl/styles.xml")
    except KeyError:
        return []
    try:
        root = ElementTree.fromstring(data)
    except ElementTree.ParseError as exc:
        warnings.append(IngestWarning("bad-styles", "xl/styles.xml", str(exc)))
        return []
    flags = []
    cell_xfs = root.find(f"{_NS}cellXfs")
    if cell_xfs is None:
        return []
    for xf in cell_xfs.findall(f"{_NS}xf"):
        locked = True
        protection = xf.find(f"{_NS}protection")
        if protection is not None and protection.get("locked") in ("0", "false"):
            locked = False
        flags.append(locked)
    return flags


def _sheet_rel_targets(zf: zipfile.ZipFile) -> dict[str, str]:
    """relationship id -> worksheet part path."""
    try:
        data = zf.read("xl/_rels/workbook.xml.rels")
    except KeyError:
        return {}
    try:
        root = ElementTree.fromstring(data)
    except ElementTree.ParseError:
        return {}
    out = {}
    for rel in root.findall(f"{_REL_NS}Relationship"):
        target = rel.get("Target", "")
        if "worksheets" not in target:
            continue
        target = target.lstrip("/")
        if not target.startswith("xl/"):
            target = "xl/" + target
        out[rel.get("Id", "")] = target
    return out


_CELL_TYPE_HANDLED = {"s", "str", "b", "e", "inlineStr", "n", None}


def _parse_cell_value(
    ctype: str | None,
    raw: str | None,
    shared: list[str],
    location: str,
    warnings: list[IngestWarning],
) -> CellValue:
    if raw is None:
        return BLANK
    if ctype == "s":
        try:
            return CellValue.text(shared[int(raw)])
        except (ValueError, IndexError):
            warnings.append(
                IngestWarning(
                    "shared-string-out-of-range",
                    location,
                    f"shared string index {raw!r} has no entry",
                )
            )
            return BLANK
    if ctype in ("str", "inlineStr"):
        return CellValue.text(raw)
    if ctype == "b":
        return CellValue.boolean(raw not in ("0", "false", ""))
    if ctype == "e":
        if raw in ERROR_CODES:
            return CellValue.error(raw)
        warnings.append(
            IngestWarning("unknown-error-code", location, f"unrecognized error {raw!r}")
        )
        return CellValue.text(raw)
    try:
        return CellValue.number(float(raw))
    except ValueError:
        warnings.append(
            IngestWarning("unparsable-number", location, f"cannot read number {raw!r}")
        )
        return CellValue.text(raw)


def _expand_shared_formula(
    master_text: str, master_addr: CellAddr, target_addr: CellAddr
) -> str | None:
    try:
        ast = parse_formula(master_text)
        shifted = translate_formula(
            ast, target_addr.col - master_addr.col, target_addr.row - master_addr.row
        )
        return print_formula(shifted)
    except (FormulaSyntaxError, TranslationRangeError):
        return None


def _import_sheet(
    zf: zipfile.ZipFile,
    part: str,
    name: str,
    hidden: bool,
    shared: list[str],
    locked_styles: list[bool],
    warnings: list[IngestWarning],
) -> Sheet:
    try:
        data = zf.read(part)
    except KeyError:
        warnings.append(
            IngestWarning("missing-sheet-part", part, f"worksheet part for {name!r} missing")
        )
        return Sheet(name=name, hidden=hidden)
    try:
        root = ElementTree.fromstring(data)
    except ElementTree.ParseError as exc:
        warnings.append(IngestWarning("bad-sheet-xml", part, str(exc)))
        return Sheet(name=name, hidden=hidden)

    protection = root.find(f"{_NS}sheetProtection") is not None
    cells: dict[CellAddr, Cell] = {}
    shared_masters: dict[str, tuple[str, CellAddr]] = {}

    for c in root.iter(f"{_NS}c"):
        ref = c.get("r")
        if not ref:
            warnings.append(
                IngestWarning("cell-without-address", part, "cell element lacks r attribute")
            )
            continue
        location = f"{name}!{ref}"
        try:
            addr = a1_to_addr(ref)
        except MalformedAddressError:
            warnings.append(
                IngestWarning("bad-cell-address", location, f"unreadable address {ref!r}")
            )
            continue
        ctype = c.get("t")
        if ctype not in _CELL_TYPE_HANDLED:
            warnings.append(
                IngestWarning(
                    "unsupported-cell-type", location, f"cell type {ctype!r} treated as text"
                )
            )
        v_el = c.find(f"{_NS}v")
        raw = v_el.text if v_el is not None else None
        if ctype == "inlineStr":
            is_el = c.find(f"{_NS}is")
            raw = "".join(t.text or "" for t in is_el.iter(f"{_NS}t")) if is_el is not None else ""
        value = _parse_cell_value(ctype, raw, shared, location, warnings)

        formula = None
        f_el = c.find(f"{_NS}f")
        if f_el is not None:
            formula = f_el.text
            if f_el.get("t") == "shared":
                si = f_el.get("si", "")
                if formula:
                    shared_masters[si] = (formula, addr)
                else:
                    master = shared_masters.get(si)
                    formula = (
                        _expand_shared_formula(master[0], master[1], addr) if master else None
                    )
                    if formula is None:
                        warnings.append(
                            IngestWarning(
                                "shared-formula-unresolved",
                                location,
                                f"shared formula group {si!r} could not be expanded",
                            )
                        )

        locked = True
        style = c.get("s")
        if style is not None:
            try:
                locked = locked_styles[int(style)]
            except (ValueError, IndexError):
                pass

        cell = Cell(value=value, formula=formula, locked=locked)
        if not cell.is_empty:
            cells[addr] = cell

    return Sheet(
        name=name,
        cells=cells,
        protection_enabled=protection,
        declared_purpose=SheetPurpose.UNDECLARED,
        hidden=hidden,
    )


_DEFINED_NAME_RE = re.compile(
    r"^(?:'((?:[^']|'')+)'|([^'!]+))!\$?([A-Z]+)\$?([1-9][0-9]*)(?::\$?([A-Z]+)\$?([1-9][0-9]*))?$"
)


def _defined_names(
    root: ElementTree.Element, sheet_names: list[str], warnings: list[IngestWarning]
) -> dict[str, RangeRef]:
    from eucctl.model import letters_to_col

    out: dict[str, RangeRef] = {}
    names_el = root.find(f"{_NS}definedNames")
    if names_el is None:
        return out
    known = {n.lower() for n in sheet_names}
    for el in names_el.findall(f"{_NS}definedName"):
        name = el.get("name", "")
        text = (el.text or "").strip()
        if name.startswith("_xlnm"):
            warnings.append(
                IngestWarning("builtin-name-skipped", name, f"built-in name {name!r} ignored")
            )
            continue
        m = _DEFINED_NAME_RE.match(text)
        if not m:
            warnings.append(
                IngestWarning(
                    "defined-name-skipped", name, f"target {text!r} is not a simple range"
                )
            )
            continue
        sheet = (m.group(1) or m.group(2)).replace("''", "'")
        if sheet.lower() not in known:
            warnings.append(
                IngestWarning(
                    "defined-name-skipped", name, f"target sheet {sheet!r} does not exist"
                )
            )
            continue
        start = CellAddr(letters_to_col(m.group(3)), int(m.group(4)))
        if m.group(5):
            end = CellAddr(letters_to_col(m.group(5)), int(m.group(6)))
        else:
            end = start
        out[name] = RangeRef(
            sheet,
            CellAddr(min(start.col, end.col), min(start.row, end.row)),
            CellAddr(max(start.col, end.col), max(start.row, end.row)),
        )
    return out


def import_xlsx(data: bytes, name: str = "workbook") -> IngestReport:
    """Import xlsx bytes; encrypted CFB containers come back as opaque
    workbooks with the encrypted flag set."""
    fmt = sniff_format(data)
    if fmt is FileFormat.CFB_ENCRYPTED:
        wb = Workbook(
            name=name,
            sheets=[],
            security=SecurityInfo(encrypted=True, sheet_protection_count=0),
            source_format=SourceFormat.ENCRYPTED_OPAQUE,
        )
        return IngestReport(
            workbook=wb,
            warnings=[
                IngestWarning(
                    "encrypted-container",
                    name,
                    "password-protected compound file; contents not read",
                )
            ],
        )
    if fmt is not FileFormat.XLSX_ZIP:
        raise NotASpreadsheetError("neither a zip container nor a compound file")

    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
        part_names = set(zf.namelist())
    except zipfile.BadZipFile as exc:
        raise CorruptZipError(f"unreadable zip container: {exc}") from exc

    if "xl/workbook.xml" not in part_names:
        raise MissingPartError("xl/workbook.xml missing; not a spreadsheet package")

    warnings: list[IngestWarning] = []
    try:
        wb_root = ElementTree.fromstring(zf.read("xl/workbook.xml"))
    except ElementTree.ParseError as exc:
        raise MissingPartError(f"xl/workbook.xml unreadable: {exc}") from exc

    shared = _shared_strings(zf, warnings)
    locked_styles = _locked_styles(zf, warnings)
    rel_targets = _sheet_rel_targets(zf)

    sheets: list[Sheet] = []
    sheets_el = wb_root.find(f"{_NS}sheets")
    sheet_els = sheets_el.findall(f"{_NS}sheet") if sheets_el is not None else []
    for i, el in enumerate(sheet_els, start=1):
        sheet_name = el.get("name", f"Sheet{i}")
        hidden = el.get("state") in ("hidden", "veryHidden")
        rid = el.get(_RID_ATTR)
        part = rel_targets.get(rid or "", f"xl/worksheets/sheet{i}.xml")
        sheets.append(
            _import_sheet(zf, part, sheet_name, hidden, shared, locked_styles, warnings)
        )

    named_ranges = _defined_names(wb_root, [s.name for s in sheets], warnings)
    protection_count = sum(1 for s in sheets if s.protection_enabled)
    wb = Workbook(
        name=name,
        sheets=sheets,
        named_ranges=named_ranges,
        security=SecurityInfo(encrypted=False, sheet_protection_count=protection_count),
        source_format=SourceFormat.XLSX,
    )
    validate_workbook(wb)
    return IngestReport(workbook=wb, warnings=warnings)
