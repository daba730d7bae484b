"""Two-panel, five-level blackboard store.

The left panel holds the rendered model expectation, the right panel the
perceived data; both are organised as vertex / edge / face / object /
scene hierarchies whose parent-child links always span exactly one level.
Labels on data elements are model element ids and must always equal the
argmax of the element's recombined belief pool.

Knowledge sources never run here.  The store only keeps elements, the
KSAR agenda (knowledge-source activation records) and goals, and performs
the monitor duties synchronously: inserting a parentless data element
above the vertex level queues a grouping KSAR for it, and cancelling an
element cancels its pending KSARs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .ds import BeliefState
from .geometry import AggregateGeometry, Point, Segment2

Geometry = Union[Segment2, AggregateGeometry, Point, None]


class Panel(enum.Enum):
    MODEL = "model"
    DATA = "data"


class Level(enum.IntEnum):
    VERTEX = 0
    EDGE = 1
    FACE = 2
    OBJECT = 3
    SCENE = 4


class KsKind(enum.Enum):
    LABELER_INIT = "labeler-init"
    LABELER_UPDATE = "labeler-update"
    LABELER_PROPAGATE = "labeler-propagate"
    LABELER_RELABEL = "labeler-relabel"
    GROUPER = "grouper"
    SPLITTER = "splitter"
    MERGER = "merger"


class KsarStatus(enum.Enum):
    PENDING = "pending"
    ACTIVE = "active"
    DONE = "done"
    CANCELLED = "cancelled"


class BadHierarchy(ValueError):
    """Child links that do not span exactly one level within one panel."""


class DuplicateId(ValueError):
    pass


_STATUS_FLOW = {
    KsarStatus.PENDING: {KsarStatus.ACTIVE, KsarStatus.CANCELLED},
    KsarStatus.ACTIVE: {KsarStatus.DONE, KsarStatus.CANCELLED},
    KsarStatus.DONE: set(),
    KsarStatus.CANCELLED: set(),
}


@dataclass
class Ksar:
    """Activation record: which knowledge source to run on which element."""

    id: int
    ks: KsKind
    target: str
    created_seq: int
    status: KsarStatus = KsarStatus.PENDING
    payload: Dict[str, str] = field(default_factory=dict)

    def transition(self, status: KsarStatus) -> None:
        if status not in _STATUS_FLOW[self.status]:
            raise ValueError(f"ksar {self.id}: illegal {self.status.value} -> {status.value}")
        self.status = status


@dataclass
class Goal:
    """Deficit of data hypotheses for one model node."""

    model_node: str
    deficit: int

    def __post_init__(self) -> None:
        if self.deficit < 1:
            raise ValueError("a goal records a deficit of at least 1")


@dataclass
class Element:
    """One blackboard node.

    `label` caches the current label of `belief`; `world_edge` carries the
    source 3-D edge on rendered model edges so self-location can recover
    metric geometry from an image-space match.  Cancelled elements stay in
    the store (their ids may be referenced by logs and old groupings) but
    are skipped by every query.
    """

    id: str
    panel: Panel
    level: Level
    children: List[str] = field(default_factory=list)
    parents: List[str] = field(default_factory=list)
    geometry: Geometry = None
    value: Optional[float] = None
    belief: Optional[BeliefState] = None
    label: Optional[str] = None
    world_edge: Optional[object] = None
    active: bool = True
    empty_fod: bool = False

    def refresh_label(self) -> bool:
        """Sync the cached label from the belief state; True if it changed."""
        new = self.belief.current_label() if self.belief is not None else None
        changed = new != self.label
        self.label = new
        return changed


class Blackboard:
    def __init__(self) -> None:
        self.elements: Dict[str, Element] = {}
        self.ksars: List[Ksar] = []
        self.goals: List[Goal] = []
        self._insert_seq: Dict[str, int] = {}
        self._seq = 0
        self._ksar_seq = 0
        self._id_counters: Dict[Tuple[Panel, Level], int] = {}

    # -- element management -------------------------------------------------

    def make_id(self, panel: Panel, level: Level) -> str:
        n = self._id_counters.get((panel, level), 0)
        self._id_counters[(panel, level)] = n + 1
        return f"{panel.value[0]}-{level.name.lower()}-{n:04d}"

    def insert_element(self, element: Element) -> Element:
        if element.id in self.elements:
            raise DuplicateId(element.id)
        for child_id in element.children:
            child = self.elements.get(child_id)
            if child is None:
                raise BadHierarchy(f"{element.id}: unknown child {child_id}")
            if child.panel is not element.panel:
                raise BadHierarchy(f"{element.id}: child {child_id} is on the other panel")
            if child.level != element.level - 1:
                raise BadHierarchy(
                    f"{element.id}: child {child_id} is at {child.level.name}, "
                    f"not one level below {element.level.name}"
                )
        self.elements[element.id] = element
        self._insert_seq[element.id] = self._seq
        self._seq += 1
        for child_id in element.children:
            self.elements[child_id].parents.append(element.id)
        # Monitor: new parentless data elements above the vertex level are
        # candidate grouping seeds.
        if (
            element.panel is Panel.DATA
            and not element.parents
            and Level.VERTEX < element.level < Level.SCENE
        ):
            self.post_ksar(KsKind.GROUPER, element.id)
        return element

    def element(self, element_id: str) -> Element:
        return self.elements[element_id]

    def insertion_order(self, element_id: str) -> int:
        return self._insert_seq[element_id]

    def panel_elements(self, panel: Panel, level: Optional[Level] = None) -> List[Element]:
        return [
            e
            for e in self.elements.values()
            if e.active and e.panel is panel and (level is None or e.level == level)
        ]

    def orphans(self, panel: Panel, level: Level) -> List[Element]:
        return [e for e in self.panel_elements(panel, level) if not self.active_parents(e)]

    def active_parents(self, element: Element) -> List[str]:
        return [p for p in element.parents if self.elements[p].active]

    def correspondents(self, model_node: str) -> List[Element]:
        """Active data elements at the model node's level carrying its label."""
        model = self.elements[model_node]
        return [e for e in self.panel_elements(Panel.DATA, model.level) if e.label == model_node]

    def descendants_at(self, element_id: str, level: Level) -> List[Element]:
        """Active descendants at a level, first-visit order, deduplicated."""
        out: List[Element] = []
        seen = set()
        stack = [element_id]
        while stack:
            current = self.elements[stack.pop(0)]
            if current.level == level:
                if current.active and current.id not in seen:
                    seen.add(current.id)
                    out.append(current)
                continue
            if current.level > level:
                stack = [c for c in current.children if c not in seen] + stack
        return out

    def cancel_element(self, element_id: str) -> None:
        """Deactivate an element, unlink it from parents/children, drop its KSARs."""
        element = self.elements[element_id]
        if not element.active:
            return
        element.active = False
        for parent_id in element.parents:
            parent = self.elements[parent_id]
            parent.children = [c for c in parent.children if c != element_id]
        for child_id in element.children:
            child = self.elements[child_id]
            child.parents = [p for p in child.parents if p != element_id]
        for ksar in self.ksars:
            if ksar.target == element_id and ksar.status is KsarStatus.PENDING:
                ksar.transition(KsarStatus.CANCELLED)

    def aggregate_of(self, member_ids: Sequence[str]) -> AggregateGeometry:
        """Centroid/total-length summary over the segment descendants."""
        total = 0.0
        cx = 0.0
        cy = 0.0
        for member_id in member_ids:
            member = self.elements[member_id]
            if isinstance(member.geometry, Segment2):
                seg = member.geometry
                mid = seg.midpoint
                total += seg.length
                cx += mid[0] * seg.length
                cy += mid[1] * seg.length
            elif isinstance(member.geometry, AggregateGeometry):
                agg = member.geometry
                total += agg.size
                cx += agg.centroid[0] * agg.size
                cy += agg.centroid[1] * agg.size
            else:
                raise BadHierarchy(f"{member_id} has no measurable geometry")
        if total <= 0.0:
            raise BadHierarchy("cannot aggregate zero total length")
        return AggregateGeometry((cx / total, cy / total), total)

    # -- agenda -------------------------------------------------------------

    def post_ksar(
        self, ks: KsKind, target: str, payload: Optional[Dict[str, str]] = None
    ) -> Ksar:
        ksar = Ksar(
            id=self._ksar_seq,
            ks=ks,
            target=target,
            created_seq=self._ksar_seq,
            payload=payload or {},
        )
        self._ksar_seq += 1
        self.ksars.append(ksar)
        return ksar

    def pending_ksars(self, ks: Optional[KsKind] = None) -> List[Ksar]:
        return [
            k
            for k in self.ksars
            if k.status is KsarStatus.PENDING and (ks is None or k.ks is ks)
        ]

    def cancel_pending(self, ks: Optional[KsKind] = None, target: Optional[str] = None) -> int:
        n = 0
        for ksar in self.pending_ksars(ks):
            if target is None or ksar.target == target:
                ksar.transition(KsarStatus.CANCELLED)
                n += 1
        return n

    def post_goal(self, model_node: str, deficit: int) -> Goal:
        goal = Goal(model_node, deficit)
        self.goals.append(goal)
        return goal

    # -- reporting ----------------------------------------------------------

    def dump(self) -> str:
        """Deterministic one-line-per-element text dump for golden tests."""
        lines = []
        for element in self.elements.values():
            if not element.active:
                continue
            top = ""
            if element.belief is not None:
                ranked = sorted(
                    element.belief.singleton_mass.items(),
                    key=lambda kv: (-kv[1], element.belief.frame.labels.index(kv[0])),
                )[:3]
                top = ",".join(f"{label}:{mass:.6f}" for label, mass in ranked)
            lines.append(
                f"{element.id} {element.panel.value} {element.level.name.lower()} "
                f"label={element.label or '-'} top=[{top}]"
            )
        return "\n".join(lines) + "\n"
