"""Unit and property tests for the evidence calculus.

The frozen numbers below were worked by hand with Dempster's rule (focal
set intersection tables) before the fast paths were written; the property
tests then hold the fast paths to the power-set oracle.
"""

from __future__ import annotations

import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from scenematch import ds
from scenematch.ds import (
    BeliefState,
    Frame,
    FrameMismatch,
    GeneralBpa,
    SimpleEvidence,
    TotalConflict,
    combine_pool,
    combine_same_focus,
    current_label,
    lift,
    oracle_combine,
    oracle_pool,
    simple_evidence,
    vacuous,
)

TOL = 1e-9


def sef(focus, mass_for, mass_against=0.0):
    return simple_evidence(focus, mass_for, mass_against)


class TestFrame:
    def test_preserves_insertion_order(self):
        frame = Frame.of(["B", "A", "C"])
        assert frame.labels == ("B", "A", "C")

    def test_union_appends_unseen(self):
        frame = Frame.of(["A", "B"]).union(["C", "A", "D"])
        assert frame.labels == ("A", "B", "C", "D")

    def test_rejects_duplicates_and_empty(self):
        with pytest.raises(ValueError):
            Frame.of(["A", "A"])
        with pytest.raises(ValueError):
            Frame.of([])


class TestSimpleEvidence:
    def test_rejects_bad_masses(self):
        with pytest.raises(ValueError):
            SimpleEvidence("A", 0.6, 0.6, -0.2)
        with pytest.raises(ValueError):
            SimpleEvidence("A", 0.5, 0.4, 0.2)

    def test_helper_absorbs_dust(self):
        e = simple_evidence("A", 0.3, 0.7 - 1e-16)
        assert e.mass_theta >= 0.0


class TestCombineSameFocus:
    def test_two_supporting_functions(self):
        out = combine_same_focus(sef("A", 0.6), sef("A", 0.5))
        assert out.mass_for == pytest.approx(0.8, abs=TOL)
        assert out.mass_against == pytest.approx(0.0, abs=TOL)
        assert out.mass_theta == pytest.approx(0.2, abs=TOL)

    def test_support_meets_refutation(self):
        out = combine_same_focus(sef("A", 0.5), sef("A", 0.0, 0.4))
        # conflict 0.5*0.4 = 0.2
        assert out.mass_for == pytest.approx(0.375, abs=TOL)
        assert out.mass_against == pytest.approx(0.25, abs=TOL)
        assert out.mass_theta == pytest.approx(0.375, abs=TOL)

    def test_vacuous_is_identity(self):
        x = sef("A", 0.34, 0.21)
        out = combine_same_focus(x, vacuous("A"))
        assert out == x

    def test_total_conflict(self):
        with pytest.raises(TotalConflict):
            combine_same_focus(sef("A", 1.0), sef("A", 0.0, 1.0))

    def test_focus_mismatch(self):
        with pytest.raises(FrameMismatch):
            combine_same_focus(sef("A", 0.5), sef("B", 0.5))


class TestCombinePool:
    def test_two_foci_with_conflict(self):
        frame = Frame.of(["A", "B"])
        masses = combine_pool([sef("A", 0.6), sef("B", 0.5)], frame)
        # conflict 0.6*0.5 = 0.3
        assert masses["A"] == pytest.approx(0.3 / 0.7, abs=TOL)
        assert masses["B"] == pytest.approx(0.2 / 0.7, abs=TOL)

    def test_empty_pool_is_all_zero(self):
        frame = Frame.of(["A", "B", "C"])
        assert combine_pool([], frame) == {"A": 0.0, "B": 0.0, "C": 0.0}

    def test_single_function_passes_through(self):
        frame = Frame.of(["A", "B", "C"])
        masses = combine_pool([simple_evidence("A", 0.7, 0.1)], frame)
        assert masses["A"] == pytest.approx(0.7, abs=TOL)
        assert masses["B"] == pytest.approx(0.0, abs=TOL)
        assert masses["C"] == pytest.approx(0.0, abs=TOL)

    def test_one_label_frame_conditions_to_certainty(self):
        frame = Frame.of(["A"])
        masses = combine_pool([simple_evidence("A", 0.3, 0.5)], frame)
        assert masses["A"] == pytest.approx(1.0, abs=TOL)

    def test_focus_outside_frame(self):
        with pytest.raises(FrameMismatch):
            combine_pool([sef("Z", 0.5)], Frame.of(["A", "B"]))

    def test_total_conflict(self):
        frame = Frame.of(["A", "B"])
        with pytest.raises(TotalConflict):
            combine_pool([sef("A", 1.0), sef("B", 1.0)], frame)


class TestOracle:
    def test_hand_worked_general_combination(self):
        frame = Frame.of(["A", "B", "C"])
        m1 = GeneralBpa(
            frame,
            {
                frozenset({"A"}): 0.4,
                frozenset({"A", "B"}): 0.3,
                frozenset({"A", "B", "C"}): 0.3,
            },
        )
        m2 = GeneralBpa(
            frame,
            {
                frozenset({"B"}): 0.5,
                frozenset({"A", "C"}): 0.2,
                frozenset({"A", "B", "C"}): 0.3,
            },
        )
        out = oracle_combine(m1, m2)
        assert out.mass({"A"}) == pytest.approx(0.325, abs=TOL)
        assert out.mass({"B"}) == pytest.approx(0.375, abs=TOL)
        assert out.mass({"A", "B"}) == pytest.approx(0.1125, abs=TOL)
        assert out.mass({"A", "C"}) == pytest.approx(0.075, abs=TOL)
        assert out.mass({"A", "B", "C"}) == pytest.approx(0.1125, abs=TOL)

    def test_rejects_empty_focal_set(self):
        frame = Frame.of(["A", "B"])
        with pytest.raises(ValueError):
            GeneralBpa(frame, {frozenset(): 0.5, frozenset({"A"}): 0.5})

    def test_rejects_frame_mismatch(self):
        a = GeneralBpa(Frame.of(["A", "B"]), {frozenset({"A"}): 1.0})
        b = GeneralBpa(Frame.of(["A", "C"]), {frozenset({"A"}): 1.0})
        with pytest.raises(FrameMismatch):
            oracle_combine(a, b)

    def test_total_conflict(self):
        frame = Frame.of(["A", "B"])
        a = GeneralBpa(frame, {frozenset({"A"}): 1.0})
        b = GeneralBpa(frame, {frozenset({"B"}): 1.0})
        with pytest.raises(TotalConflict):
            oracle_combine(a, b)

    def test_lift_round_trip(self):
        frame = Frame.of(["A", "B", "C"])
        g = lift(simple_evidence("B", 0.5, 0.3), frame)
        assert g.mass({"B"}) == pytest.approx(0.5)
        assert g.mass({"A", "C"}) == pytest.approx(0.3)
        assert g.mass({"A", "B", "C"}) == pytest.approx(0.2)


class TestCurrentLabel:
    def test_argmax(self):
        state = BeliefState(Frame.of(["A", "B"]))
        state.add(sef("B", 0.6))
        state.recombine()
        assert current_label(state) == "B"

    def test_tie_breaks_by_frame_order(self):
        state = BeliefState(Frame.of(["B", "A"]))
        state.add(sef("B", 0.5))
        state.add(sef("A", 0.5))
        state.recombine()
        assert state.singleton_mass["A"] == pytest.approx(state.singleton_mass["B"])
        assert current_label(state) == "B"

    def test_none_for_empty_pool(self):
        assert current_label(BeliefState(Frame.of(["A"]))) is None

    def test_none_when_all_masses_zero(self):
        state = BeliefState(Frame.of(["A", "B", "C"]))
        state.add(vacuous("A"))
        state.recombine()
        assert current_label(state) is None


class TestBeliefState:
    def test_enlarge_keeps_pool_and_recombines(self):
        state = BeliefState(Frame.of(["A", "B"]))
        state.add(simple_evidence("A", 0.6, 0.2))
        state.add(simple_evidence("B", 0.3, 0.4))
        state.recombine()
        assert state.enlarge(["C", "A"])
        assert state.frame.labels == ("A", "B", "C")
        expected = oracle_pool(state.evidence(), state.frame).singleton_masses()
        for label in state.frame:
            assert state.singleton_mass[label] == pytest.approx(expected[label], abs=TOL)

    def test_enlarge_with_known_labels_is_noop(self):
        state = BeliefState(Frame.of(["A", "B"]))
        assert not state.enlarge(["B"])

    def test_support_ignores_other_foci(self):
        state = BeliefState(Frame.of(["A", "B"]))
        state.add(sef("A", 0.5))
        state.add(sef("B", 0.9))
        state.recombine()
        assert state.support("A") == pytest.approx(0.5)
        assert state.support("C") == 0.0


# ---------------------------------------------------------------------------
# Property tests


@st.composite
def evidence_functions(draw, focus=None):
    if focus is None:
        focus = draw(st.sampled_from(["A", "B", "C", "D"]))
    committed = draw(st.floats(min_value=0.0, max_value=0.999))
    split = draw(st.floats(min_value=0.0, max_value=1.0))
    return simple_evidence(focus, committed * split, committed * (1.0 - split))


@st.composite
def frames_and_pools(draw, max_labels=4, max_pool=6):
    n = draw(st.integers(min_value=1, max_value=max_labels))
    labels = ["A", "B", "C", "D"][:n]
    frame = Frame.of(labels)
    size = draw(st.integers(min_value=0, max_value=max_pool))
    pool = [draw(evidence_functions(focus=draw(st.sampled_from(labels)))) for _ in range(size)]
    if n == 1:
        # mass against the only label cannot be lifted to the oracle
        pool = [simple_evidence(e.focus, e.mass_for, 0.0) for e in pool]
    return frame, pool


@given(evidence_functions(focus="A"), evidence_functions(focus="A"))
def test_combine_same_focus_commutes(a, b):
    try:
        left = combine_same_focus(a, b)
        right = combine_same_focus(b, a)
    except TotalConflict:
        return
    assert math.isclose(left.mass_for, right.mass_for, abs_tol=TOL)
    assert math.isclose(left.mass_against, right.mass_against, abs_tol=TOL)
    assert math.isclose(left.mass_theta, right.mass_theta, abs_tol=TOL)


@given(
    evidence_functions(focus="A"),
    evidence_functions(focus="A"),
    evidence_functions(focus="A"),
)
def test_combine_same_focus_associates(a, b, c):
    try:
        left = combine_same_focus(combine_same_focus(a, b), c)
        right = combine_same_focus(a, combine_same_focus(b, c))
    except TotalConflict:
        return
    assert math.isclose(left.mass_for, right.mass_for, abs_tol=TOL)
    assert math.isclose(left.mass_against, right.mass_against, abs_tol=TOL)
    assert math.isclose(left.mass_theta, right.mass_theta, abs_tol=TOL)


@settings(max_examples=300)
@given(frames_and_pools())
def test_combine_pool_matches_oracle(frame_pool):
    frame, pool = frame_pool
    try:
        fast = combine_pool(pool, frame)
    except TotalConflict:
        with pytest.raises(TotalConflict):
            oracle_pool(pool, frame)
        return
    slow = oracle_pool(pool, frame).singleton_masses() if pool else {l: 0.0 for l in frame}
    for label in frame:
        assert math.isclose(fast[label], slow[label], abs_tol=TOL)


@given(frames_and_pools(), st.sampled_from(["A", "B", "C", "D"]))
def test_vacuous_function_changes_nothing(frame_pool, focus):
    frame, pool = frame_pool
    assume(focus in frame)
    # On a one-label frame any non-empty pool conditions the label to 1,
    # while the empty pool is pinned to 0: skip that transition.
    assume(pool or len(frame) > 1)
    try:
        base = combine_pool(pool, frame)
    except TotalConflict:
        return
    padded = combine_pool(list(pool) + [vacuous(focus)], frame)
    for label in frame:
        assert math.isclose(base[label], padded[label], abs_tol=TOL)


@given(frames_and_pools())
def test_recombine_reproduces_cached_masses(frame_pool):
    frame, pool = frame_pool
    state = BeliefState(frame)
    for e in pool:
        state.add(e)
    try:
        first = dict(state.recombine())
    except TotalConflict:
        return
    second = state.recombine()
    for label in frame:
        assert math.isclose(first[label], second[label], abs_tol=TOL)
