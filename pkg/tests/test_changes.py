"""Diffing, alert triggers, snapshots and the review state machine."""

from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from eucctl.changes import (
    AlertRuleSet,
    ChangeError,
    ChangeKind,
    ChangeLog,
    EventState,
    MissingCommentError,
    NotPendingError,
    SelfReviewError,
    Trigger,
    apply_alert_rules,
    apply_changes,
    content_hash,
    diff,
)
from eucctl.model import Cell, CellAddr, Sheet, Workbook, a1_to_addr, serialize_canonical
from wbfixtures import cell, golden_workbook, sheet_of


def wb_of(cells: dict[str, Cell], name="w", sheet="S", protected=False) -> Workbook:
    return Workbook(name=name, sheets=[sheet_of(sheet, cells, protected=protected)])


class TestDiff:
    def test_identical_workbooks_empty(self):
        wb = golden_workbook()
        changes, structural = diff(wb, wb)
        assert changes == []
        assert structural is False

    def test_value_change(self):
        old = wb_of({"A1": cell(5)})
        new = wb_of({"A1": cell(6)})
        changes, structural = diff(old, new)
        assert [c.kind for c in changes] == [ChangeKind.VALUE_CHANGED]
        assert structural is False

    def test_formula_change_with_equal_values(self):
        old = wb_of({"A1": cell(2), "B1": cell(4, formula="A1*2")})
        new = wb_of({"A1": cell(2), "B1": cell(4, formula="A1*3")})
        changes, _ = diff(old, new)
        assert [(c.addr.a1, c.kind) for c in changes] == [
            ("B1", ChangeKind.FORMULA_CHANGED)
        ]

    def test_formula_whitespace_insignificant(self):
        old = wb_of({"B1": cell(4, formula="A1*2")})
        new = wb_of({"B1": cell(4, formula="A1 * 2")})
        changes, _ = diff(old, new)
        assert changes == []

    def test_lock_change(self):
        old = wb_of({"A1": cell(5, locked=True)})
        new = wb_of({"A1": cell(5, locked=False)})
        changes, _ = diff(old, new)
        assert [c.kind for c in changes] == [ChangeKind.LOCK_CHANGED]

    def test_added_and_removed_cells(self):
        old = wb_of({"A1": cell(1), "B1": cell(2)})
        new = wb_of({"A1": cell(1), "C1": cell(3)})
        changes, structural = diff(old, new)
        kinds = {c.addr.a1: c.kind for c in changes}
        assert kinds == {
            "B1": ChangeKind.CELL_REMOVED,
            "C1": ChangeKind.CELL_ADDED,
        }

    def test_sheet_added_is_structural(self):
        old = golden_workbook()
        new = golden_workbook()
        new.sheets.append(sheet_of("Extra", {"A1": cell(1)}))
        changes, structural = diff(old, new)
        assert structural is True
        assert [c.kind for c in changes] == [ChangeKind.CELL_ADDED]
        assert changes[0].sheet == "Extra"

    def test_bounding_box_shape_change_is_structural(self):
        old = wb_of({"A1": cell(1), "B2": cell(2)})
        new = wb_of({"A1": cell(1), "B2": cell(2), "C3": cell(3)})
        _, structural = diff(old, new)
        assert structural is True

    def test_translation_keeps_shape_not_structural(self):
        old = wb_of({"A1": cell(1), "B2": cell(2)})
        new = wb_of({"B2": cell(1), "C3": cell(2)})  # same 2x2 box, shifted
        changes, structural = diff(old, new)
        assert structural is False
        assert len(changes) == 3  # A1 removed, B2 changed, C3 added


VALUES = (5.0, 6.0, "x", "y", True)
FORMULAS = (None, None, "A1*2", "SUM(B1:B3)", 'C1&"x"')
SHEET_POOL = ("Alpha", "Beta", "Gamma")


@st.composite
def random_cells(draw):
    return cell(
        draw(st.sampled_from(VALUES)),
        formula=draw(st.sampled_from(FORMULAS)),
        locked=draw(st.booleans()),
    )


@st.composite
def random_workbooks(draw):
    names = draw(
        st.lists(st.sampled_from(SHEET_POOL), min_size=1, max_size=3, unique=True)
    )
    sheets = []
    for name in names:
        n = draw(st.integers(0, 8))
        cells = {}
        for _ in range(n):
            addr = CellAddr(draw(st.integers(1, 5)), draw(st.integers(1, 5)))
            cells[addr] = draw(random_cells())
        sheets.append(Sheet(name=name, cells=cells, protection_enabled=draw(st.booleans())))
    return Workbook(name="w", sheets=sheets)


def cells_by_sheet(wb: Workbook) -> dict[str, dict]:
    return {sh.name.lower(): dict(sh.cells) for sh in wb.sheets if sh.cells}


class TestDiffProperties:
    @settings(max_examples=150, deadline=None)
    @given(a=random_workbooks(), b=random_workbooks())
    def test_patch_replay_reconstructs_target(self, a, b):
        changes, _ = diff(a, b)
        replayed = apply_changes(a, changes)
        assert {k.lower(): v for k, v in replayed.items()} == cells_by_sheet(b)

    @settings(max_examples=80, deadline=None)
    @given(a=random_workbooks())
    def test_self_diff_empty(self, a):
        changes, structural = diff(a, a)
        assert changes == []
        assert structural is False


class TestAlertRules:
    def make_change(self, old_cells, new_cells, protected=False):
        old = wb_of(old_cells, protected=protected)
        new = wb_of(new_cells, protected=protected)
        changes, structural = diff(old, new)
        return changes, structural, old

    def test_value_change_does_not_trip_formula_rule(self):
        changes, structural, old = self.make_change({"A1": cell(5)}, {"A1": cell(6)})
        rules = AlertRuleSet(triggers=frozenset({Trigger.FORMULA_CHANGE_ANY}))
        assert apply_alert_rules(changes, structural, old, rules) == []

    def test_locked_formula_edit_under_protection(self):
        changes, structural, old = self.make_change(
            {"B1": cell(4, formula="A1*2", locked=True)},
            {"B1": cell(4, formula="A1*3", locked=True)},
            protected=True,
        )
        rules = AlertRuleSet(triggers=frozenset({Trigger.FORMULA_CHANGE_IN_LOCKED}))
        assert apply_alert_rules(changes, structural, old, rules) == [
            "formula_change_in_locked"
        ]

    def test_locked_formula_edit_without_protection_quiet(self):
        changes, structural, old = self.make_change(
            {"B1": cell(4, formula="A1*2", locked=True)},
            {"B1": cell(4, formula="A1*3", locked=True)},
            protected=False,
        )
        rules = AlertRuleSet(triggers=frozenset({Trigger.FORMULA_CHANGE_IN_LOCKED}))
        assert apply_alert_rules(changes, structural, old, rules) == []

    def test_value_change_over_threshold(self):
        changes, structural, old = self.make_change({"A1": cell(100)}, {"A1": cell(120)})
        rules = AlertRuleSet(
            triggers=frozenset({Trigger.VALUE_CHANGE_OVER_PCT}),
            value_change_threshold=0.1,
        )
        # |120-100|/100 = 0.2 > 0.1
        assert apply_alert_rules(changes, structural, old, rules) == [
            "value_change_over_pct"
        ]

    def test_value_change_under_threshold_quiet(self):
        changes, structural, old = self.make_change({"A1": cell(100)}, {"A1": cell(105)})
        rules = AlertRuleSet(
            triggers=frozenset({Trigger.VALUE_CHANGE_OVER_PCT}),
            value_change_threshold=0.1,
        )
        assert apply_alert_rules(changes, structural, old, rules) == []

    def test_change_from_zero_always_triggers(self):
        changes, structural, old = self.make_change({"A1": cell(0)}, {"A1": cell(1e-9)})
        rules = AlertRuleSet(
            triggers=frozenset({Trigger.VALUE_CHANGE_OVER_PCT}),
            value_change_threshold=0.5,
        )
        assert apply_alert_rules(changes, structural, old, rules) == [
            "value_change_over_pct"
        ]

    def test_new_external_reference(self):
        changes, structural, old = self.make_change(
            {"B1": cell(4, formula="A1*2")},
            {"B1": cell(4, formula="[FY22.xlsx]Data!A1*2")},
        )
        rules = AlertRuleSet(triggers=frozenset({Trigger.NEW_EXTERNAL_REFERENCE}))
        assert apply_alert_rules(changes, structural, old, rules) == [
            "new_external_reference"
        ]

    def test_template_sheet_modified(self):
        old = golden_workbook()
        new = golden_workbook()
        log = new.sheet("Change_Log")
        log.cells[a1_to_addr("A3")] = cell("2024-02-01")
        changes, structural = diff(old, new)
        rules = AlertRuleSet(triggers=frozenset({Trigger.TEMPLATE_SHEET_MODIFIED}))
        assert apply_alert_rules(changes, structural, old, rules) == [
            "template_sheet_modified"
        ]

    def test_structural_change(self):
        old = wb_of({"A1": cell(1)})
        new = Workbook(name="w", sheets=[])
        changes, structural = diff(old, new)
        rules = AlertRuleSet(triggers=frozenset({Trigger.STRUCTURAL_CHANGE}))
        assert apply_alert_rules(changes, structural, old, rules) == ["structural_change"]

    def test_threshold_required(self):
        with pytest.raises(ChangeError, match="threshold"):
            AlertRuleSet(triggers=frozenset({Trigger.VALUE_CHANGE_OVER_PCT}))


class TestSnapshots:
    def test_first_snapshot_is_baseline(self, tmp_path):
        log = ChangeLog(tmp_path)
        snap = log.take_snapshot("f1", golden_workbook())
        assert snap.snapshot_id == 1
        assert log.baseline("f1").snapshot_id == 1

    def test_same_content_new_id_same_hash(self, tmp_path):
        log = ChangeLog(tmp_path)
        s1 = log.take_snapshot("f1", golden_workbook())
        s2 = log.take_snapshot("f1", golden_workbook())
        assert (s1.snapshot_id, s2.snapshot_id) == (1, 2)
        assert s1.content_hash == s2.content_hash

    def test_interleaved_files_independent_sequences(self, tmp_path):
        log = ChangeLog(tmp_path)
        assert log.take_snapshot("f1", golden_workbook()).snapshot_id == 1
        assert log.take_snapshot("f2", golden_workbook()).snapshot_id == 1
        assert log.take_snapshot("f1", golden_workbook()).snapshot_id == 2
        assert log.take_snapshot("f2", golden_workbook()).snapshot_id == 2

    def test_hash_matches_canonical_bytes(self, tmp_path):
        import hashlib

        wb = golden_workbook()
        snap = ChangeLog(tmp_path).take_snapshot("f1", wb)
        assert snap.content_hash == hashlib.sha256(
            serialize_canonical(wb).encode()
        ).hexdigest()

    def test_replay_after_reopen(self, tmp_path):
        log = ChangeLog(tmp_path)
        log.take_snapshot("f1", golden_workbook())
        edited = golden_workbook()
        edited.sheet("Inputs").cells[a1_to_addr("B2")] = cell(111, locked=False)
        log.submit_version("f1", edited, "alice", AlertRuleSet())
        log.close()

        reopened = ChangeLog(tmp_path)
        assert len(reopened.snapshots("f1")) == 2
        assert reopened.baseline("f1").workbook == edited  # auto-logged rebaselined
        assert len(reopened.events()) == 1


def make_pending_event(tmp_path, author="alice"):
    log = ChangeLog(tmp_path)
    log.take_snapshot("f1", golden_workbook())
    edited = golden_workbook()
    calc = edited.sheet("Calc")
    calc.cells[a1_to_addr("D3")] = cell(900, formula="Inputs!B3*Inputs!C3*2")
    rules = AlertRuleSet(triggers=frozenset({Trigger.FORMULA_CHANGE_ANY}))
    _, event = log.submit_version("f1", edited, author, rules)
    return log, event


class TestEventStateMachine:
    def test_no_triggers_auto_logged(self, tmp_path):
        log = ChangeLog(tmp_path)
        log.take_snapshot("f1", golden_workbook())
        edited = golden_workbook()
        edited.sheet("Inputs").cells[a1_to_addr("B2")] = cell(101, locked=False)
        _, event = log.submit_version(
            "f1", edited, "alice", AlertRuleSet(triggers=frozenset({Trigger.FORMULA_CHANGE_ANY}))
        )
        assert event.state is EventState.AUTO_LOGGED
        assert event.triggered_rules == []

    def test_triggered_event_pending(self, tmp_path):
        _, event = make_pending_event(tmp_path)
        assert event.state is EventState.PENDING_REVIEW
        assert event.triggered_rules == ["formula_change_any"]
        assert event.decision is None

    def test_approve_by_independent_reviewer(self, tmp_path):
        log, event = make_pending_event(tmp_path)
        decided = log.decide(event.event_id, "bob", EventState.APPROVED, "looks right")
        assert decided.state is EventState.APPROVED
        assert decided.decision.reviewer == "bob"

    def test_self_review_rejected(self, tmp_path):
        log, event = make_pending_event(tmp_path, author="alice")
        with pytest.raises(SelfReviewError):
            log.decide(event.event_id, "alice", EventState.APPROVED)

    def test_reject_requires_comment(self, tmp_path):
        log, event = make_pending_event(tmp_path)
        with pytest.raises(MissingCommentError):
            log.decide(event.event_id, "bob", EventState.REJECTED, "  ")
        still = log.event(event.event_id)
        assert still.state is EventState.PENDING_REVIEW

    def test_decide_twice_not_pending(self, tmp_path):
        log, event = make_pending_event(tmp_path)
        log.decide(event.event_id, "bob", EventState.APPROVED)
        with pytest.raises(NotPendingError):
            log.decide(event.event_id, "carol", EventState.REJECTED, "never mind")

    def test_exhaustive_transition_enumeration(self, tmp_path):
        # Only pending_review accepts decisions; every other state refuses
        # both verdicts and never mutates.
        for state in EventState:
            for verdict in (EventState.APPROVED, EventState.REJECTED):
                sub = tmp_path / f"{state.value}-{verdict.value}"
                log, event = make_pending_event(sub)
                if state is EventState.AUTO_LOGGED:
                    log2 = ChangeLog(sub / "auto")
                    log2.take_snapshot("f1", golden_workbook())
                    edited = golden_workbook()
                    edited.sheet("Inputs").cells[a1_to_addr("B2")] = cell(1, locked=False)
                    _, event = log2.submit_version("f1", edited, "alice", AlertRuleSet())
                    log = log2
                elif state in (EventState.APPROVED, EventState.REJECTED):
                    log.decide(
                        event.event_id,
                        "bob",
                        state,
                        "prior decision" if state is EventState.REJECTED else "",
                    )
                event = log.event(event.event_id)
                before_state = event.state
                assert before_state is state
                if state is EventState.PENDING_REVIEW:
                    decided = log.decide(
                        event.event_id, "carol", verdict, "changes were wrong"
                    )
                    assert decided.state is verdict
                else:
                    with pytest.raises(NotPendingError):
                        log.decide(event.event_id, "carol", verdict, "late decision")
                    assert log.event(event.event_id).state is before_state

    def test_approve_rebaselines_by_default(self, tmp_path):
        log, event = make_pending_event(tmp_path)
        assert log.baseline("f1").snapshot_id == 1
        log.decide(event.event_id, "bob", EventState.APPROVED)
        assert log.baseline("f1").snapshot_id == event.to_snapshot

    def test_reject_keeps_baseline(self, tmp_path):
        log, event = make_pending_event(tmp_path)
        log.decide(event.event_id, "bob", EventState.REJECTED, "roll it back")
        assert log.baseline("f1").snapshot_id == 1

    def test_decision_survives_reopen(self, tmp_path):
        log, event = make_pending_event(tmp_path)
        log.decide(event.event_id, "bob", EventState.APPROVED, "fine")
        log.close()
        reopened = ChangeLog(tmp_path)
        replayed = reopened.event(event.event_id)
        assert replayed.state is EventState.APPROVED
        assert replayed.decision.reviewer == "bob"
        assert reopened.baseline("f1").snapshot_id == event.to_snapshot
