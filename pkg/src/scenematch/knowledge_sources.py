"""Knowledge sources: the labeler family, grouper, splitter and merger.

Each function here is one knowledge-source firing.  They mutate the
blackboard and report what changed; sequencing, KSAR bookkeeping and the
relabel cascades are the scheduler's business.

The labeler family carries the evidence lifecycle of a data element:

* init      - build the frame of discernment from nearby model elements
              and pool one similarity expert per candidate label,
* enlarge   - grow the frame with the children of a parent's label,
* update    - revise children of a labeled parent with relational experts
              (sibling mass times relational (dis)similarity),
* propagate - fold each child's update evidence, re-focus it on the
              parent's label, and push the combined vote into the parent,
* relabel   - after a parent's label flips, wipe the children's pools and
              give them the new label's children as their frame.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

from .blackboard import Blackboard, Element, Level, Panel
from .ds import (
    INIT_EVIDENCE,
    UPDATE_EVIDENCE,
    BeliefState,
    Frame,
    SimpleEvidence,
    TotalConflict,
    fold_same_focus,
    simple_evidence,
)
from .geometry import (
    AggregateGeometry,
    MetricParams,
    Segment2,
    aggregate_rel_similarity,
    aggregate_similarity,
    mod_pi_distance,
    rel_similarity,
    similarity,
)


class EmptyFod(ValueError):
    """No model element close enough to seed a frame of discernment."""


@dataclass(frozen=True)
class MatchingParams:
    """Metric constants plus the grouping and merging thresholds."""

    metric: MetricParams = MetricParams()
    tau_grow: Optional[float] = None  # default 0.5 * alpha
    eps_theta_deg: float = 3.0
    eps_gap_px: float = 8.0
    eps_offset_px: float = 2.0

    @property
    def grow_threshold(self) -> float:
        return 0.5 * self.metric.alpha if self.tau_grow is None else self.tau_grow


@dataclass(frozen=True)
class Grouping:
    parent_id: str
    member_ids: Tuple[str, ...]
    model_target: str


@dataclass(frozen=True)
class MergeRecord:
    merged_id: str
    constituent_ids: Tuple[str, ...]


@dataclass(frozen=True)
class LabelFlip:
    element_id: str
    old_label: Optional[str]
    new_label: Optional[str]


@dataclass(frozen=True)
class PropagateResult:
    flip: Optional[LabelFlip]
    conflict: bool
    children_contributing: int


def geometry_center(geometry) -> Tuple[float, float]:
    if isinstance(geometry, Segment2):
        return geometry.midpoint
    if isinstance(geometry, AggregateGeometry):
        return geometry.centroid
    raise ValueError(f"element geometry {geometry!r} has no centre")


def element_similarity(data_geom, model_geom, params: MetricParams) -> Tuple[float, float]:
    if isinstance(data_geom, Segment2) and isinstance(model_geom, Segment2):
        return similarity(data_geom, model_geom, params)
    if isinstance(data_geom, AggregateGeometry) and isinstance(model_geom, AggregateGeometry):
        return aggregate_similarity(data_geom, model_geom, params)
    raise ValueError("cannot score similarity across geometry kinds")


def element_rel_similarity(d1, d2, m1, m2, params: MetricParams) -> Tuple[float, float]:
    if all(isinstance(g, Segment2) for g in (d1, d2, m1, m2)):
        return rel_similarity(d1, d2, m1, m2, params)
    if all(isinstance(g, AggregateGeometry) for g in (d1, d2, m1, m2)):
        return aggregate_rel_similarity(d1, d2, m1, m2, params)
    raise ValueError("cannot score relational similarity across geometry kinds")


# ---------------------------------------------------------------------------
# Labeler


def labeler_init(bb: Blackboard, target_id: str, params: MatchingParams) -> Element:
    """Assign an initial belief state and label to one data element.

    The frame is every same-level model element whose centre lies within
    r_max of the element's centre (insertion order), unless a relabel has
    already pinned a fresh empty-pool frame on the element, in which case
    that frame is scored instead.  One similarity expert per frame label
    is pooled and the element takes the argmax label.
    """
    element = bb.element(target_id)
    if element.panel is not Panel.DATA:
        raise ValueError(f"{target_id} is not a data element")

    if element.belief is not None and not element.belief.pool:
        frame = element.belief.frame  # frame pinned by a relabel
    else:
        centre = geometry_center(element.geometry)
        fod = []
        for model in bb.panel_elements(Panel.MODEL, element.level):
            mc = geometry_center(model.geometry)
            if math.hypot(centre[0] - mc[0], centre[1] - mc[1]) <= params.metric.r_max_px:
                fod.append(model.id)
        if not fod:
            raise EmptyFod(f"no model {element.level.name.lower()} within r_max of {target_id}")
        frame = Frame.of(fod)

    state = BeliefState(frame)
    for model_id in frame:
        model = bb.element(model_id)
        sim, dissim = element_similarity(element.geometry, model.geometry, params.metric)
        state.add(simple_evidence(model_id, sim, dissim), INIT_EVIDENCE)
    state.recombine()
    element.belief = state
    element.refresh_label()
    element.empty_fod = False
    return element


def labeler_enlarge_fod(
    bb: Blackboard, element_id: str, parent_label: str, params: MatchingParams
) -> bool:
    """Union the children of a parent's model label into an element's frame.

    Each genuinely new label also gets its own similarity expert pooled
    (as at init) so that it can actually attract mass.  Applied once per
    parent a grouped element acquires, so an element shared by two
    groupings accumulates both unions.
    """
    element = bb.element(element_id)
    if element.belief is None:
        return False
    extra = bb.element(parent_label).children
    new_labels = [label for label in extra if label not in element.belief.frame]
    if not new_labels:
        return False
    element.belief.enlarge(new_labels)
    for model_id in new_labels:
        model = bb.element(model_id)
        sim, dissim = element_similarity(element.geometry, model.geometry, params.metric)
        element.belief.add(simple_evidence(model_id, sim, dissim), INIT_EVIDENCE)
    element.belief.recombine()
    element.refresh_label()
    return True


def labeler_update(bb: Blackboard, parent_id: str, params: MatchingParams) -> List[LabelFlip]:
    """Relational revision of a labeled parent's children; returns label flips.

    For each labeled child e (current label A) and each labeled sibling s
    (label X), one expert focused on A is pooled with

        mass_for     = m_s({X}) * rel_similarity(s, e; X, A)
        mass_against = m_s({X}) * rel_dissimilarity(s, e; X, A)

    Labels and masses are snapshotted at entry, so the experts of one
    firing all describe the same labelling.
    """
    parent = bb.element(parent_id)
    if parent.label is None:
        raise ValueError(f"{parent_id} has no current label to update under")
    children = [bb.element(c) for c in parent.children if bb.element(c).active]
    snapshot = {
        c.id: (c.label, c.belief.mass(c.label), c.geometry)
        for c in children
        if c.label is not None and c.belief is not None
    }
    flips: List[LabelFlip] = []
    for child in children:
        if child.id not in snapshot:
            continue  # unlabeled children receive no relational update
        label_e, _, geom_e = snapshot[child.id]
        model_e = bb.element(label_e).geometry
        appended = False
        for sibling in children:
            if sibling.id == child.id or sibling.id not in snapshot:
                continue
            label_s, mass_s, geom_s = snapshot[sibling.id]
            if mass_s <= 0.0:
                continue
            model_s = bb.element(label_s).geometry
            rel_sim, rel_dissim = element_rel_similarity(
                geom_s, geom_e, model_s, model_e, params.metric
            )
            child.belief.add(
                simple_evidence(label_e, mass_s * rel_sim, mass_s * rel_dissim),
                UPDATE_EVIDENCE,
            )
            appended = True
        if appended:
            child.belief.recombine()
            if child.refresh_label():
                flips.append(LabelFlip(child.id, label_e, child.label))
    return flips


def labeler_propagate(bb: Blackboard, parent_id: str) -> PropagateResult:
    """Push the children's update evidence one level up.

    Each child's update functions (those focused on its current label)
    fold into a single confidence vote, which is re-focused on the
    parent's label: agreement with the child's role supports the parent
    hypothesis, disagreement refutes it, ignorance stays ignorance.  The
    per-child votes are folded and appended to the parent's pool as update
    evidence.  On total conflict the parent's belief is left untouched and
    the conflict reported.
    """
    parent = bb.element(parent_id)
    if parent.label is None or parent.belief is None:
        raise ValueError(f"{parent_id} has no labeled belief to propagate into")
    old_label = parent.label
    votes: List[SimpleEvidence] = []
    for child_id in parent.children:
        child = bb.element(child_id)
        if not child.active or child.label is None or child.belief is None:
            continue
        updates = child.belief.update_evidence(child.label)
        if not updates:
            continue
        try:
            folded = fold_same_focus(updates)
        except TotalConflict:
            return PropagateResult(None, True, 0)
        votes.append(
            SimpleEvidence(
                parent.label, folded.mass_for, folded.mass_against, folded.mass_theta
            )
        )
    if not votes:
        return PropagateResult(None, False, 0)
    try:
        combined = fold_same_focus(votes)
    except TotalConflict:
        return PropagateResult(None, True, len(votes))
    parent.belief.add(combined, UPDATE_EVIDENCE)
    try:
        parent.belief.recombine()
    except TotalConflict:
        # leave the parent's prior belief standing; drop the vote
        parent.belief.pool = [
            e for e in parent.belief.pool if e.evidence is not combined
        ]
        return PropagateResult(None, True, len(votes))
    changed = parent.refresh_label()
    flip = LabelFlip(parent.id, old_label, parent.label) if changed else None
    return PropagateResult(flip, False, len(votes))


def labeler_relabel(
    bb: Blackboard, node_id: str, new_label: str, old_label: Optional[str] = None
) -> List[str]:
    """Reset the children of a relabeled node for re-initialisation.

    Every active child loses its pool and frame and is pinned a fresh
    empty-pool frame holding exactly the children of the new model label;
    the scheduler then re-fires init and update work on the subtree.
    Relabelling to the same label is a no-op; callers that have already
    refreshed the node's cached label pass the previous label explicitly.
    """
    node = bb.element(node_id)
    if old_label is None:
        old_label = node.label
    if old_label == new_label:
        return []
    node.label = new_label
    fresh_frame_labels = bb.element(new_label).children
    reset: List[str] = []
    for child_id in node.children:
        child = bb.element(child_id)
        if not child.active:
            continue
        if not fresh_frame_labels:
            child.belief = None
            child.label = None
            continue
        child.belief = BeliefState(Frame.of(fresh_frame_labels))
        child.label = None
        child.empty_fod = False
        reset.append(child_id)
    return reset


# ---------------------------------------------------------------------------
# Grouper


def grouper(
    bb: Blackboard, seed_id: str, model_target: str, params: MatchingParams
) -> Optional[Grouping]:
    """Grow one grouping hypothesis under a model node from a seed element.

    Starting from the seed, repeatedly add the best-scoring data element
    whose label is a still-unclaimed child of the model target and whose
    relational similarity to some member (against their model labels)
    exceeds the growth threshold.  A grouping identical to an existing one
    at the same level is discarded.
    """
    seed = bb.element(seed_id)
    target = bb.element(model_target)
    if seed.label is None or seed.label not in target.children:
        raise ValueError(f"seed {seed_id} does not carry a child label of {model_target}")
    level = seed.level
    members: List[Element] = [seed]
    claimed: Set[str] = {seed.label}
    candidates = bb.panel_elements(Panel.DATA, level)
    tau = params.grow_threshold
    while True:
        best: Optional[Element] = None
        best_score = tau
        member_ids = {m.id for m in members}
        for cand in candidates:
            if (
                cand.id in member_ids
                or cand.label is None
                or cand.label not in target.children
                or cand.label in claimed
            ):
                continue
            score = 0.0
            for member in members:
                rel_sim, _ = element_rel_similarity(
                    member.geometry,
                    cand.geometry,
                    bb.element(member.label).geometry,
                    bb.element(cand.label).geometry,
                    params.metric,
                )
                score = max(score, rel_sim)
            if score > best_score:
                best = cand
                best_score = score
        if best is None:
            break
        members.append(best)
        claimed.add(best.label)

    member_ids = frozenset(m.id for m in members)
    for existing in bb.panel_elements(Panel.DATA, Level(level + 1)):
        if frozenset(existing.children) == member_ids:
            return None
    parent = Element(
        id=bb.make_id(Panel.DATA, Level(level + 1)),
        panel=Panel.DATA,
        level=Level(level + 1),
        children=[m.id for m in members],
        geometry=bb.aggregate_of([m.id for m in members]),
    )
    bb.insert_element(parent)
    return Grouping(parent.id, tuple(m.id for m in members), model_target)


# ---------------------------------------------------------------------------
# Splitter


def splitter(bb: Blackboard, group_id: str) -> List[Grouping]:
    """Separate label competitors inside one grouping into alternatives.

    Members with equal current labels compete; for each maximal competitor
    set of size k there are k ways to keep exactly one, and independent
    sets multiply (cartesian product).  The original group is replaced by
    the alternatives; with no competitors (or only already-existing
    alternatives) the group is left untouched.
    """
    group = bb.element(group_id)
    members = [bb.element(c) for c in group.children if bb.element(c).active]
    by_label: Dict[str, List[str]] = {}
    for member in members:
        if member.label is not None:
            by_label.setdefault(member.label, []).append(member.id)
    competitor_sets = [ids for ids in by_label.values() if len(ids) >= 2]
    if not competitor_sets:
        return []
    competitors_flat = {mid for ids in competitor_sets for mid in ids}

    existing = {
        frozenset(e.children)
        for e in bb.panel_elements(Panel.DATA, group.level)
        if e.id != group_id
    }
    alternatives: List[List[str]] = []
    for keep in itertools.product(*competitor_sets):
        kept = set(keep)
        alt = [m.id for m in members if m.id not in competitors_flat or m.id in kept]
        if frozenset(alt) not in existing:
            existing.add(frozenset(alt))
            alternatives.append(alt)
    if not alternatives:
        return []

    bb.cancel_element(group_id)
    out: List[Grouping] = []
    for alt in alternatives:
        parent = Element(
            id=bb.make_id(Panel.DATA, group.level),
            panel=Panel.DATA,
            level=group.level,
            children=alt,
            geometry=bb.aggregate_of(alt),
        )
        bb.insert_element(parent)
        out.append(Grouping(parent.id, tuple(alt), group.label or ""))
    return out


# ---------------------------------------------------------------------------
# Merger


def merger(
    bb: Blackboard,
    panel: Panel,
    level: Level,
    params: MatchingParams,
    labeler: Optional[Callable[[str], None]] = None,
) -> List[MergeRecord]:
    """Merge same-label near-collinear edge runs, or overlapping face groups.

    Sweeps until no merge applies; each sweep consumes the constituents of
    the merges it performs.  Only orphan elements are merged (fragments
    are normally fused before any grouping claims them).  Each merged
    element is labeled immediately so later sweeps can chain onto it.
    """
    if labeler is None:
        def labeler(new_id: str) -> None:
            try:
                labeler_init(bb, new_id, params)
            except EmptyFod:
                bb.element(new_id).empty_fod = True

    records: List[MergeRecord] = []
    while True:
        if level == Level.EDGE:
            sweep = _edge_merge_sweep(bb, panel, params)
        elif level == Level.FACE:
            sweep = _face_merge_sweep(bb, panel, params)
        else:
            raise ValueError(f"merger does not operate at {level.name}")
        if not sweep:
            break
        records.extend(sweep)
        for record in sweep:
            labeler(record.merged_id)
    return records


def _line_offset(base: Segment2, other: Segment2) -> float:
    """Largest perpendicular distance of other's endpoints from base's line."""
    bx, by = base.p0
    dx = base.p1[0] - bx
    dy = base.p1[1] - by
    norm = math.hypot(dx, dy)
    out = 0.0
    for px, py in (other.p0, other.p1):
        out = max(out, abs((px - bx) * dy - (py - by) * dx) / norm)
    return out


def _edge_merge_candidates(a: Segment2, b: Segment2, params: MatchingParams) -> bool:
    if mod_pi_distance(a.angle, b.angle) >= math.radians(params.eps_theta_deg):
        return False
    if max(_line_offset(a, b), _line_offset(b, a)) >= params.eps_offset_px:
        return False
    # gap between the 1-D shadows of the two segments on their mean direction
    theta = a.angle if a.length >= b.length else b.angle
    ux, uy = math.cos(theta), math.sin(theta)
    sa = sorted((a.p0[0] * ux + a.p0[1] * uy, a.p1[0] * ux + a.p1[1] * uy))
    sb = sorted((b.p0[0] * ux + b.p0[1] * uy, b.p1[0] * ux + b.p1[1] * uy))
    gap = max(sb[0] - sa[1], sa[0] - sb[1])
    return gap < params.eps_gap_px


def _merge_segments(a: Segment2, b: Segment2) -> Segment2:
    """Span of both segments along the longer one's direction."""
    theta = a.angle if a.length >= b.length else b.angle
    ux, uy = math.cos(theta), math.sin(theta)
    points = [a.p0, a.p1, b.p0, b.p1]
    projections = [(p[0] * ux + p[1] * uy, p) for p in points]
    lo = min(projections, key=lambda t: t[0])[1]
    hi = max(projections, key=lambda t: t[0])[1]
    return Segment2(lo, hi)


def _edge_merge_sweep(bb: Blackboard, panel: Panel, params: MatchingParams) -> List[MergeRecord]:
    candidates = [e for e in bb.orphans(panel, Level.EDGE) if e.label is not None]
    consumed: Set[str] = set()
    records: List[MergeRecord] = []
    for i, a in enumerate(candidates):
        if a.id in consumed:
            continue
        for b in candidates[i + 1 :]:
            if b.id in consumed or a.label != b.label:
                continue
            if not _edge_merge_candidates(a.geometry, b.geometry, params):
                continue
            merged = Element(
                id=bb.make_id(panel, Level.EDGE),
                panel=panel,
                level=Level.EDGE,
                children=list(dict.fromkeys(a.children + b.children)),
                geometry=_merge_segments(a.geometry, b.geometry),
                value=max(a.value or 0.0, b.value or 0.0) or None,
            )
            bb.cancel_element(a.id)
            bb.cancel_element(b.id)
            bb.insert_element(merged)
            consumed.update((a.id, b.id))
            records.append(MergeRecord(merged.id, (a.id, b.id)))
            break
    return records


def _faces_adjacent(bb: Blackboard, a: Element, b: Element, params: MatchingParams) -> bool:
    if set(a.children) & set(b.children):
        return True
    for ca in a.children:
        ga = bb.element(ca).geometry
        if not isinstance(ga, Segment2):
            continue
        for cb in b.children:
            gb = bb.element(cb).geometry
            if not isinstance(gb, Segment2):
                continue
            for pa in (ga.p0, ga.p1):
                for pb in (gb.p0, gb.p1):
                    if math.hypot(pa[0] - pb[0], pa[1] - pb[1]) < params.eps_gap_px:
                        return True
    return False


def _member_labels(bb: Blackboard, group: Element) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for child_id in group.children:
        child = bb.element(child_id)
        if child.active and child.label is not None:
            out[child_id] = child.label
    return out


def _complementary(bb: Blackboard, a: Element, b: Element) -> bool:
    """True unless the groups hold different representatives of one label.

    Two partial views of the same face may be fused; two alternative
    hypotheses (competing elements carrying the same child label) must
    stay separate or the merge would recreate the competitors a split
    just removed.
    """
    la, lb = _member_labels(bb, a), _member_labels(bb, b)
    for child_a, label_a in la.items():
        for child_b, label_b in lb.items():
            if label_a == label_b and child_a != child_b:
                return False
    return True


def _face_merge_sweep(bb: Blackboard, panel: Panel, params: MatchingParams) -> List[MergeRecord]:
    candidates = [f for f in bb.orphans(panel, Level.FACE) if f.label is not None]
    consumed: Set[str] = set()
    records: List[MergeRecord] = []
    for i, a in enumerate(candidates):
        if a.id in consumed:
            continue
        for b in candidates[i + 1 :]:
            if b.id in consumed or a.label != b.label:
                continue
            if not _complementary(bb, a, b):
                continue
            if not _faces_adjacent(bb, a, b, params):
                continue
            children = list(dict.fromkeys(a.children + b.children))
            bb.cancel_element(a.id)
            bb.cancel_element(b.id)
            merged = Element(
                id=bb.make_id(panel, Level.FACE),
                panel=panel,
                level=Level.FACE,
                children=children,
                geometry=bb.aggregate_of(children),
            )
            bb.insert_element(merged)
            consumed.update((a.id, b.id))
            records.append(MergeRecord(merged.id, (a.id, b.id)))
            break
    return records
