"""Integrity checks, including the INT-01 brute-force oracle equivalence."""

from __future__ import annotations

from collections import Counter

from hypothesis import given, settings, strategies as st

from eucctl.formula import normalize_r1c1, parse_formula
from eucctl.integrity import (
    Orientation,
    Severity,
    check_circular_references,
    check_error_values,
    check_hardcoded_constants,
    check_inconsistent_formulas,
    check_refs_to_blank,
    detect_regions,
    run_integrity_checks,
)
from eucctl.model import Workbook, a1_to_addr
from wbfixtures import cell, sheet_of


def wb_of(cells: dict[str, object], sheet: str = "S") -> Workbook:
    return Workbook(name="w", sheets=[sheet_of(sheet, cells)])


def formula_cell(text: str):
    return cell(0, formula=text)


class TestDetectRegions:
    def test_column_run_of_four(self):
        wb = wb_of({f"B{r}": formula_cell(f"A{r}*2") for r in range(2, 6)})
        regions = detect_regions(wb)
        assert len(regions) == 1
        region = regions[0]
        assert region.orientation is Orientation.COLUMN
        assert [a.a1 for a in region.cells] == ["B2", "B3", "B4", "B5"]

    def test_isolated_formula_no_region(self):
        wb = wb_of({"B2": formula_cell("A2*2")})
        assert detect_regions(wb) == []

    def test_three_by_three_block(self):
        cells = {
            f"{col}{row}": formula_cell(f"A{row}*2")
            for col in ("C", "D", "E")
            for row in (2, 3, 4)
        }
        regions = detect_regions(wb_of(cells))
        orientations = Counter(r.orientation for r in regions)
        assert orientations[Orientation.ROW] == 3
        assert orientations[Orientation.COLUMN] == 3

    def test_unparsable_formula_breaks_run(self):
        cells = {
            "B2": formula_cell("A2*2"),
            "B3": formula_cell("SUM("),
            "B4": formula_cell("A4*2"),
            "B5": formula_cell("A5*2"),
        }
        assert detect_regions(wb_of(cells)) == []


class TestInconsistentFormulas:
    def test_single_deviant_flagged(self):
        wb = wb_of(
            {
                "B2": formula_cell("A2*2"),
                "B3": formula_cell("A3*2"),
                "B4": formula_cell("A4+2"),
                "B5": formula_cell("A5*2"),
            }
        )
        findings = check_inconsistent_formulas(wb)
        assert len(findings) == 1
        f = findings[0]
        assert f.addr == a1_to_addr("B4")
        assert f.severity is Severity.HIGH
        assert "RC[-1]+2" in f.evidence
        assert "RC[-1]*2" in f.evidence

    def test_consistent_region_clean(self):
        wb = wb_of({f"B{r}": formula_cell(f"A{r}*2") for r in range(2, 6)})
        assert check_inconsistent_formulas(wb) == []

    def test_two_against_two_is_heterogeneous_info(self):
        wb = wb_of(
            {
                "B2": formula_cell("A2*2"),
                "B3": formula_cell("A3*2"),
                "B4": formula_cell("A4+2"),
                "B5": formula_cell("A5+2"),
            }
        )
        findings = check_inconsistent_formulas(wb)
        assert len(findings) == 1
        assert findings[0].severity is Severity.INFO
        assert "heterogeneous" in findings[0].message


class TestErrorValues:
    def test_error_cell_flagged(self):
        findings = check_error_values(wb_of({"A1": cell("#REF!")}))
        assert len(findings) == 1
        assert findings[0].rule_id == "INT-02"

    def test_clean(self):
        assert check_error_values(wb_of({"A1": cell(5)})) == []

    def test_three_errors_three_findings(self):
        wb = wb_of({"A1": cell("#REF!"), "B2": cell("#N/A"), "C3": cell("#VALUE!")})
        assert len(check_error_values(wb)) == 3


class TestHardcodedConstants:
    def test_embedded_rate(self):
        findings = check_hardcoded_constants(wb_of({"B1": formula_cell("A1*1.05")}))
        assert len(findings) == 1
        assert "1.05" in findings[0].message

    def test_pure_references_clean(self):
        assert check_hardcoded_constants(wb_of({"B1": formula_cell("A1*B1")})) == []

    def test_round_digit_position_exempt(self):
        assert check_hardcoded_constants(wb_of({"B1": formula_cell("ROUND(A1,2)")})) == []

    def test_exempt_values(self):
        wb = wb_of({"B1": formula_cell("A1*1+0-(-1)+A2/100")})
        assert check_hardcoded_constants(wb) == []

    def test_round_value_position_not_exempt(self):
        findings = check_hardcoded_constants(wb_of({"B1": formula_cell("ROUND(A1*7,2)")}))
        assert len(findings) == 1
        assert "7" in findings[0].message

    def test_literal_outside_arithmetic_position_ignored(self):
        assert check_hardcoded_constants(wb_of({"B1": formula_cell("IF(A1>3,A1,A2)")})) == []


class TestCircularReferences:
    def test_two_cell_cycle(self):
        wb = wb_of({"A1": formula_cell("B1"), "B1": formula_cell("A1")})
        findings = check_circular_references(wb)
        assert len(findings) == 1
        assert "S!A1" in findings[0].evidence and "S!B1" in findings[0].evidence

    def test_self_loop(self):
        findings = check_circular_references(wb_of({"A1": formula_cell("A1")}))
        assert len(findings) == 1

    def test_acyclic_chain_clean(self):
        wb = wb_of(
            {"A1": cell(1), "B1": formula_cell("A1*2"), "C1": formula_cell("B1*2")}
        )
        assert check_circular_references(wb) == []

    def test_cycle_through_range(self):
        wb = wb_of({"A1": formula_cell("SUM(A1:A2)"), "A2": cell(1)})
        assert len(check_circular_references(wb)) == 1


class TestRefsToBlank:
    def test_single_blank_reference(self):
        findings = check_refs_to_blank(wb_of({"B1": formula_cell("A1*2")}))
        assert len(findings) == 1
        assert "S!A1" in findings[0].message

    def test_range_exempt(self):
        wb = wb_of({"B1": formula_cell("SUM(A1:A10)")})
        assert check_refs_to_blank(wb) == []

    def test_populated_clean(self):
        wb = wb_of({"A1": cell(3), "B1": formula_cell("A1*2")})
        assert check_refs_to_blank(wb) == []


class TestDeterminism:
    def test_runs_twice_identical(self):
        wb = wb_of(
            {
                "A1": formula_cell("B1"),
                "B1": formula_cell("A1"),
                "C1": cell("#REF!"),
                "D1": formula_cell("A9*3"),
            }
        )
        first = run_integrity_checks(wb)
        second = run_integrity_checks(wb)
        assert first == second
        keys = [(f.sheet, f.addr.row if f.addr else 0, f.addr.col if f.addr else 0, f.rule_id)
                for f in first]
        assert keys == sorted(keys)


# --- the INT-01 oracle -------------------------------------------------------


def oracle_inconsistencies(wb: Workbook) -> list[tuple]:
    """Brute-force reimplementation: dense scan for maximal runs, majority
    per run, minority cells flagged.  Kept deliberately naive."""
    results = []
    for sheet in wb.sheets:
        texts: dict[tuple[int, int], str] = {}
        for addr, c in sheet.cells.items():
            if c.formula is None:
                continue
            try:
                ast = parse_formula(c.formula)
            except Exception:
                continue
            texts[(addr.row, addr.col)] = normalize_r1c1(ast, addr).canonical_text
        if not texts:
            continue
        max_row = max(r for r, _ in texts)
        max_col = max(c for _, c in texts)
        runs: list[list[tuple[int, int]]] = []
        for row in range(1, max_row + 1):
            run: list[tuple[int, int]] = []
            for col in range(1, max_col + 2):
                if (row, col) in texts:
                    run.append((row, col))
                else:
                    if len(run) >= 3:
                        runs.append(run)
                    run = []
        for col in range(1, max_col + 1):
            run = []
            for row in range(1, max_row + 2):
                if (row, col) in texts:
                    run.append((row, col))
                else:
                    if len(run) >= 3:
                        runs.append(run)
                    run = []
        for run in runs:
            counts = Counter(texts[pos] for pos in run)
            best, best_count = counts.most_common(1)[0]
            if best_count * 2 > len(run):
                for pos in run:
                    if texts[pos] != best:
                        results.append(("deviant", sheet.name, pos))
            elif len(counts) > 1:
                results.append(("hetero", sheet.name, run[0]))
    return sorted(results)


def implementation_as_tuples(wb: Workbook) -> list[tuple]:
    out = []
    for f in check_inconsistent_formulas(wb):
        kind = "deviant" if f.severity is Severity.HIGH else "hetero"
        out.append((kind, f.sheet, (f.addr.row, f.addr.col)))
    return sorted(out)


BASE_PATTERNS = ("A{row}*2", "A{row}+B{row}", "SUM(A{row}:B{row})")
DEVIANT_PATTERN = "A{row}+97"


@st.composite
def grids_with_deviants(draw):
    """<=8x8 grid: a few vertical formula runs over data columns A/B, with
    0-3 planted deviants anywhere among the formula cells."""
    cells: dict[str, object] = {}
    for row in range(1, 9):
        cells[f"A{row}"] = cell(row)
        cells[f"B{row}"] = cell(row * 10)
    formula_addrs: list[str] = []
    n_runs = draw(st.integers(1, 3))
    columns = draw(
        st.lists(st.sampled_from("CDEFGH"), min_size=n_runs, max_size=n_runs, unique=True)
    )
    for col in columns:
        pattern = draw(st.sampled_from(BASE_PATTERNS))
        start = draw(st.integers(1, 5))
        length = draw(st.integers(3, 8 - start + 1))
        for row in range(start, start + length):
            a1 = f"{col}{row}"
            cells[a1] = formula_cell(pattern.format(row=row))
            formula_addrs.append(a1)
    n_deviants = draw(st.integers(0, min(3, len(formula_addrs))))
    deviant_at = draw(
        st.lists(
            st.sampled_from(formula_addrs),
            min_size=n_deviants,
            max_size=n_deviants,
            unique=True,
        )
    )
    for a1 in deviant_at:
        row = int(a1[1:])
        cells[a1] = formula_cell(DEVIANT_PATTERN.format(row=row))
    return wb_of(cells)


class TestOracleEquivalence:
    @settings(max_examples=150, deadline=None)
    @given(wb=grids_with_deviants())
    def test_matches_brute_force(self, wb):
        assert implementation_as_tuples(wb) == oracle_inconsistencies(wb)

    def test_planted_deviant_found(self):
        wb = wb_of(
            {
                "A2": cell(1),
                "A3": cell(2),
                "A4": cell(3),
                "B2": formula_cell("A2*2"),
                "B3": formula_cell("A3+97"),
                "B4": formula_cell("A4*2"),
            }
        )
        assert implementation_as_tuples(wb) == [("deviant", "S", (3, 2))]
        assert oracle_inconsistencies(wb) == [("deviant", "S", (3, 2))]
