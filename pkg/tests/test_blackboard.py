"""Tests for the blackboard store, agenda and monitor behaviour."""

from __future__ import annotations

import pytest

from scenematch.blackboard import (
    BadHierarchy,
    Blackboard,
    DuplicateId,
    Element,
    Goal,
    KsKind,
    KsarStatus,
    Level,
    Panel,
)
from scenematch.ds import BeliefState, Frame, simple_evidence
from scenematch.geometry import Segment2


def edge(bb, panel, x=0.0, eid=None):
    e = Element(
        id=eid or bb.make_id(panel, Level.EDGE),
        panel=panel,
        level=Level.EDGE,
        geometry=Segment2((x, 0.0), (x + 10.0, 0.0)),
    )
    return bb.insert_element(e)


class TestInsertion:
    def test_data_edges_get_grouper_ksars(self):
        bb = Blackboard()
        for i in range(13):
            edge(bb, Panel.DATA, x=float(20 * i))
        groupers = bb.pending_ksars(KsKind.GROUPER)
        assert len(groupers) == 13
        assert [k.target for k in groupers] == [e.id for e in bb.panel_elements(Panel.DATA)]

    def test_model_elements_never_get_ksars(self):
        bb = Blackboard()
        edge(bb, Panel.MODEL)
        assert bb.pending_ksars() == []

    def test_vertex_and_scene_levels_are_not_grouping_seeds(self):
        bb = Blackboard()
        bb.insert_element(Element("d-v", Panel.DATA, Level.VERTEX, geometry=(1.0, 2.0)))
        bb.insert_element(Element("d-s", Panel.DATA, Level.SCENE))
        assert bb.pending_ksars() == []

    def test_parented_insert_spawns_no_ksar(self):
        bb = Blackboard()
        v0 = bb.insert_element(Element("v0", Panel.DATA, Level.VERTEX, geometry=(0.0, 0.0)))
        v1 = bb.insert_element(Element("v1", Panel.DATA, Level.VERTEX, geometry=(10.0, 0.0)))
        e = Element(
            "e0", Panel.DATA, Level.EDGE,
            children=["v0", "v1"], geometry=Segment2((0.0, 0.0), (10.0, 0.0)),
        )
        bb.insert_element(e)
        assert v0.parents == ["e0"] and v1.parents == ["e0"]
        assert len(bb.pending_ksars(KsKind.GROUPER)) == 1  # only the edge itself

    def test_duplicate_id_rejected(self):
        bb = Blackboard()
        edge(bb, Panel.DATA, eid="dup")
        with pytest.raises(DuplicateId):
            edge(bb, Panel.DATA, eid="dup")

    def test_child_must_be_one_level_below(self):
        bb = Blackboard()
        edge(bb, Panel.DATA, eid="e0")
        with pytest.raises(BadHierarchy):
            bb.insert_element(Element("o0", Panel.DATA, Level.OBJECT, children=["e0"]))

    def test_child_must_share_panel(self):
        bb = Blackboard()
        edge(bb, Panel.MODEL, eid="m0")
        with pytest.raises(BadHierarchy):
            bb.insert_element(Element("f0", Panel.DATA, Level.FACE, children=["m0"]))

    def test_unknown_child_rejected(self):
        bb = Blackboard()
        with pytest.raises(BadHierarchy):
            bb.insert_element(Element("f0", Panel.DATA, Level.FACE, children=["ghost"]))


class TestQueries:
    def test_orphans_in_insertion_order(self):
        bb = Blackboard()
        ids = [edge(bb, Panel.DATA, x=float(i)).id for i in range(4)]
        bb.insert_element(
            Element("f0", Panel.DATA, Level.FACE, children=[ids[1], ids[2]])
        )
        assert [e.id for e in bb.orphans(Panel.DATA, Level.EDGE)] == [ids[0], ids[3]]

    def test_correspondents_matches_current_label(self):
        bb = Blackboard()
        m = edge(bb, Panel.MODEL, eid="m-e")
        d1 = edge(bb, Panel.DATA, x=0.0)
        d2 = edge(bb, Panel.DATA, x=30.0)
        d1.belief = BeliefState(Frame.of(["m-e"]))
        d1.belief.add(simple_evidence("m-e", 0.8, 0.0))
        d1.belief.recombine()
        d1.refresh_label()
        assert [e.id for e in bb.correspondents("m-e")] == [d1.id]
        assert d2.label is None

    def test_descendants_at(self):
        bb = Blackboard()
        e0 = edge(bb, Panel.DATA, x=0.0)
        e1 = edge(bb, Panel.DATA, x=20.0)
        e2 = edge(bb, Panel.DATA, x=40.0)
        bb.insert_element(Element("f0", Panel.DATA, Level.FACE, children=[e0.id, e1.id]))
        bb.insert_element(Element("f1", Panel.DATA, Level.FACE, children=[e1.id, e2.id]))
        bb.insert_element(Element("o0", Panel.DATA, Level.OBJECT, children=["f0", "f1"]))
        names = [e.id for e in bb.descendants_at("o0", Level.EDGE)]
        assert names == [e0.id, e1.id, e2.id]  # deduplicated, first-visit order


class TestKsars:
    def test_legal_lifecycle(self):
        bb = Blackboard()
        k = bb.post_ksar(KsKind.SPLITTER, "x")
        k.transition(KsarStatus.ACTIVE)
        k.transition(KsarStatus.DONE)
        assert k.status is KsarStatus.DONE

    def test_illegal_transitions_rejected(self):
        bb = Blackboard()
        k = bb.post_ksar(KsKind.MERGER, "x")
        with pytest.raises(ValueError):
            k.transition(KsarStatus.DONE)  # must go through active
        k.transition(KsarStatus.ACTIVE)
        k.transition(KsarStatus.DONE)
        with pytest.raises(ValueError):
            k.transition(KsarStatus.CANCELLED)

    def test_cancel_element_cancels_its_pending_ksars(self):
        bb = Blackboard()
        d = edge(bb, Panel.DATA)
        assert len(bb.pending_ksars()) == 1
        bb.cancel_element(d.id)
        assert bb.pending_ksars() == []
        assert not d.active

    def test_cancel_unlinks_parents_and_children(self):
        bb = Blackboard()
        e0 = edge(bb, Panel.DATA, x=0.0)
        e1 = edge(bb, Panel.DATA, x=20.0)
        f = bb.insert_element(Element("f0", Panel.DATA, Level.FACE, children=[e0.id, e1.id]))
        bb.cancel_element(f.id)
        assert e0.parents == [] and e1.parents == []
        assert [x.id for x in bb.orphans(Panel.DATA, Level.EDGE)] == [e0.id, e1.id]


class TestGoals:
    def test_goal_requires_positive_deficit(self):
        with pytest.raises(ValueError):
            Goal("m", 0)


class TestDump:
    def test_dump_shape_and_determinism(self):
        bb = Blackboard()
        m = edge(bb, Panel.MODEL, eid="m-e-0000")
        d = edge(bb, Panel.DATA, x=1.0)
        d.belief = BeliefState(Frame.of(["m-e-0000"]))
        d.belief.add(simple_evidence("m-e-0000", 0.75, 0.05))
        d.belief.recombine()
        d.refresh_label()
        out = bb.dump()
        assert out == bb.dump()
        lines = out.strip().split("\n")
        assert lines[0] == "m-e-0000 model edge label=- top=[]"
        assert lines[1].startswith("d-edge-0000 data edge label=m-e-0000 top=[m-e-0000:1.000000")

    def test_cancelled_elements_are_omitted(self):
        bb = Blackboard()
        d = edge(bb, Panel.DATA)
        bb.cancel_element(d.id)
        assert bb.dump() == "\n"
