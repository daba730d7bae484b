"""Three-phase scheduler: init, update, propagate.

The engine owns control flow; the knowledge sources own the work.  All
work is mediated by KSARs on the blackboard so the firing order is
observable and testable:

* init      - post goals for every model node top-down, label all data
              edges, fuse fragments, then drain the monitor's grouper
              KSARs bottom-up so hypotheses grow edge -> face -> object
              -> scene, each capped by the goal deficit.
* update    - fire relational updates top-down (scene, object, face).
              A label flip re-queues the updates it invalidates, posts a
              relabel cascade for the flipped node's subtree, and posts a
              splitter for any grouping the flip split into competitors.
* propagate - push the children's update evidence bottom-up (face,
              object, scene); flips here are cascaded at the start of the
              next round's update.

update and propagate alternate until a round produces no flips and no
splits (or until `max_rounds`).  Within a phase, pending KSARs are
selected by class priority - splitter and merger first, then labelers,
then groupers - with FIFO order inside a class, except that grouper
KSARs fire lowest level first and, within a level, strongest seed first
(the seed's singleton mass for its label).  Every firing counts against
a budget; exceeding it aborts the run with the partial state attached,
which is a diagnostic for a non-converging board, not a result.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from .blackboard import Blackboard, Element, KsKind, Ksar, KsarStatus, Level, Panel
from .knowledge_sources import (
    EmptyFod,
    MatchingParams,
    grouper,
    labeler_enlarge_fod,
    labeler_init,
    labeler_propagate,
    labeler_relabel,
    labeler_update,
    merger,
    splitter,
)


class Phase(enum.Enum):
    INIT = "init"
    UPDATE = "update"
    PROPAGATE = "propagate"


_PRIORITY = {
    KsKind.SPLITTER: 0,
    KsKind.MERGER: 0,
    KsKind.LABELER_INIT: 1,
    KsKind.LABELER_UPDATE: 1,
    KsKind.LABELER_PROPAGATE: 1,
    KsKind.LABELER_RELABEL: 1,
    KsKind.GROUPER: 2,
}

_PHASE_KINDS: Dict[Phase, FrozenSet[KsKind]] = {
    Phase.INIT: frozenset(
        {KsKind.SPLITTER, KsKind.MERGER, KsKind.LABELER_INIT, KsKind.GROUPER}
    ),
    Phase.UPDATE: frozenset(
        {
            KsKind.SPLITTER,
            KsKind.MERGER,
            KsKind.LABELER_INIT,
            KsKind.LABELER_UPDATE,
            KsKind.LABELER_RELABEL,
            KsKind.GROUPER,
        }
    ),
    Phase.PROPAGATE: frozenset({KsKind.LABELER_PROPAGATE}),
}

# merger KSARs carry a panel:level token instead of an element id
MERGE_EDGES = "data:edge"
MERGE_FACES = "data:face"
_MERGE_LEVEL = {MERGE_EDGES: Level.EDGE, MERGE_FACES: Level.FACE}


@dataclass(frozen=True)
class SchedulerConfig:
    params: MatchingParams = MatchingParams()
    n_hypotheses: int = 3  # grouping hypotheses retained per model node
    max_firings: Optional[int] = None  # None: 50 x element count at start
    max_rounds: int = 8  # update/propagate alternations


@dataclass(frozen=True)
class Event:
    seq: int
    phase: str
    action: str
    target: str
    detail: str = ""

    def line(self) -> str:
        tail = f" {self.detail}" if self.detail else ""
        return f"{self.seq:05d} {self.phase} {self.action} {self.target}{tail}"


@dataclass
class RunResult:
    scene_hypothesis: Optional[str]
    scene_ranking: List[str]
    firings: int
    rounds: int
    converged: bool
    events: List[Event] = field(default_factory=list)


class FiringBudgetExceeded(RuntimeError):
    """The board did not settle within the firing budget."""

    def __init__(self, partial: RunResult):
        super().__init__(
            f"firing budget exhausted after {partial.firings} firings "
            f"({partial.rounds} rounds complete)"
        )
        self.partial = partial


def rank_scenes(bb: Blackboard) -> List:
    """Scene hypotheses, best first.

    Ordered by label mass, then by accumulated support (the mass of a
    one-label frame is pinned at 1.0, so support is what separates rival
    hypotheses in practice), then by insertion order for determinism.
    """
    scenes = [
        s
        for s in bb.panel_elements(Panel.DATA, Level.SCENE)
        if s.label is not None and s.belief is not None
    ]
    scenes.sort(
        key=lambda s: (
            -s.belief.mass(s.label),
            -s.belief.support(s.label),
            bb.insertion_order(s.id),
        )
    )
    return scenes


class Engine:
    def __init__(self, bb: Blackboard, config: Optional[SchedulerConfig] = None):
        self.bb = bb
        self.config = config or SchedulerConfig()
        self.phase = Phase.INIT
        self.events: List[Event] = []
        self.firings = 0
        self.rounds = 0
        if self.config.max_firings is not None:
            self.max_firings = self.config.max_firings
        else:
            population = sum(1 for e in bb.elements.values() if e.active)
            self.max_firings = 50 * max(1, population)

    # -- bookkeeping ---------------------------------------------------------

    def _log(self, action: str, target: str, detail: str = "") -> None:
        self.events.append(Event(len(self.events), self.phase.value, action, target, detail))

    def _post_once(
        self, ks: KsKind, target: str, payload: Optional[Dict[str, str]] = None
    ) -> None:
        for ksar in self.bb.pending_ksars(ks):
            if ksar.target == target:
                return
        self.bb.post_ksar(ks, target, payload)

    def _result(self, converged: bool) -> RunResult:
        scenes = rank_scenes(self.bb)
        return RunResult(
            scene_hypothesis=scenes[0].id if scenes else None,
            scene_ranking=[s.id for s in scenes],
            firings=self.firings,
            rounds=self.rounds,
            converged=converged,
            events=self.events,
        )

    # -- selection -----------------------------------------------------------

    def select_ksar(self, mask: Optional[FrozenSet[KsKind]] = None) -> Optional[Ksar]:
        """Highest-priority pending KSAR under the phase (or given) mask."""
        allowed = _PHASE_KINDS[self.phase] if mask is None else mask
        pending = [k for k in self.bb.pending_ksars() if k.ks in allowed]
        if not pending:
            return None

        def key(ksar: Ksar) -> Tuple:
            if ksar.ks is KsKind.GROUPER:
                element = self.bb.elements.get(ksar.target)
                level = int(element.level) if element is not None else 99
                strength = 0.0
                if element is not None and element.label and element.belief is not None:
                    strength = element.belief.mass(element.label)
                return (_PRIORITY[ksar.ks], level, -strength, ksar.created_seq)
            return (_PRIORITY[ksar.ks], 0, 0.0, ksar.created_seq)

        return min(pending, key=key)

    # -- the run -------------------------------------------------------------

    def run(self) -> RunResult:
        self._phase_init()
        converged = False
        while self.rounds < self.config.max_rounds:
            self.rounds += 1
            changes = self._phase_update()
            changes += self._phase_propagate()
            if changes == 0:
                converged = True
                break
        leftovers = self.bb.cancel_pending()
        if leftovers:
            self._log("cancel-leftovers", "-", str(leftovers))
        return self._result(converged)

    def _phase_init(self) -> None:
        self.phase = Phase.INIT
        bb = self.bb
        for level in (Level.SCENE, Level.OBJECT, Level.FACE):
            for node in bb.panel_elements(Panel.MODEL, level):
                bb.post_goal(node.id, self.config.n_hypotheses)
                self._log("goal", node.id, f"deficit={self.config.n_hypotheses}")
        for edge in bb.panel_elements(Panel.DATA, Level.EDGE):
            self._post_once(KsKind.LABELER_INIT, edge.id)
        self._drain(frozenset({KsKind.LABELER_INIT}))
        # fragments must fuse before any grouping claims them
        self._post_once(KsKind.MERGER, MERGE_EDGES)
        self._drain(frozenset({KsKind.MERGER, KsKind.LABELER_INIT}))
        # monitor-posted grouper KSARs now grow the hierarchy bottom-up
        self._drain()
        self._post_once(KsKind.MERGER, MERGE_FACES)
        self._drain()

    def _phase_update(self) -> int:
        self.phase = Phase.UPDATE
        for level in (Level.SCENE, Level.OBJECT, Level.FACE):
            for element in self.bb.panel_elements(Panel.DATA, level):
                if element.label and element.belief is not None and element.children:
                    self._post_once(KsKind.LABELER_UPDATE, element.id)
        return self._drain()

    def _phase_propagate(self) -> int:
        self.phase = Phase.PROPAGATE
        for level in (Level.FACE, Level.OBJECT, Level.SCENE):
            for element in self.bb.panel_elements(Panel.DATA, level):
                if element.label and element.belief is not None and element.children:
                    self._post_once(KsKind.LABELER_PROPAGATE, element.id)
        return self._drain()

    # -- execution -----------------------------------------------------------

    def _drain(self, mask: Optional[FrozenSet[KsKind]] = None) -> int:
        changes = 0
        while True:
            ksar = self.select_ksar(mask)
            if ksar is None:
                return changes
            if self.firings >= self.max_firings:
                raise FiringBudgetExceeded(self._result(converged=False))
            self.firings += 1
            ksar.transition(KsarStatus.ACTIVE)
            changes += self._execute(ksar)
            ksar.transition(KsarStatus.DONE)

    def _execute(self, ksar: Ksar) -> int:
        handler = {
            KsKind.LABELER_INIT: self._fire_init,
            KsKind.LABELER_UPDATE: self._fire_update,
            KsKind.LABELER_PROPAGATE: self._fire_propagate,
            KsKind.LABELER_RELABEL: self._fire_relabel,
            KsKind.GROUPER: self._fire_grouper,
            KsKind.SPLITTER: self._fire_splitter,
            KsKind.MERGER: self._fire_merger,
        }[ksar.ks]
        return handler(ksar)

    def _label_new_group(self, group_id: str) -> None:
        """Init a fresh grouping's belief, then widen its members' frames."""
        bb = self.bb
        group = bb.elements[group_id]
        try:
            labeler_init(bb, group_id, self.config.params)
        except EmptyFod:
            group.empty_fod = True
            self._log("empty-fod", group_id)
            return
        self._log("labeled", group_id, f"label={group.label}")
        if group.label is None:
            return
        for member_id in group.children:
            if bb.elements[member_id].active:
                labeler_enlarge_fod(bb, member_id, group.label, self.config.params)

    def _fire_init(self, ksar: Ksar) -> int:
        element = self.bb.elements.get(ksar.target)
        if element is None or not element.active:
            return 0
        try:
            labeler_init(self.bb, element.id, self.config.params)
            self._log("labeled", element.id, f"label={element.label}")
        except EmptyFod:
            element.empty_fod = True
            self._log("empty-fod", element.id)
        return 0

    def _fire_update(self, ksar: Ksar) -> int:
        element = self.bb.elements.get(ksar.target)
        if (
            element is None
            or not element.active
            or element.label is None
            or element.belief is None
        ):
            return 0
        flips = labeler_update(self.bb, element.id, self.config.params)
        for flip in flips:
            self._log("flip", flip.element_id, f"{flip.old_label}->{flip.new_label}")
            self._cascade_flip(flip.element_id, flip.old_label, flip.new_label)
        return len(flips)

    def _fire_propagate(self, ksar: Ksar) -> int:
        element = self.bb.elements.get(ksar.target)
        if (
            element is None
            or not element.active
            or element.label is None
            or element.belief is None
        ):
            return 0
        result = labeler_propagate(self.bb, element.id)
        if result.conflict:
            self._log("conflict", element.id)
            return 0
        if result.flip is None:
            return 0
        flip = result.flip
        self._log("flip", flip.element_id, f"{flip.old_label}->{flip.new_label}")
        # cascade work is posted now but runs in the next update phase
        self._cascade_flip(flip.element_id, flip.old_label, flip.new_label)
        return 1

    def _cascade_flip(
        self, element_id: str, old_label: Optional[str], new_label: Optional[str]
    ) -> None:
        bb = self.bb
        element = bb.elements[element_id]
        if new_label is not None and element.level >= Level.FACE and element.children:
            self._post_once(
                KsKind.LABELER_RELABEL,
                element_id,
                {"new": new_label, "old": old_label or ""},
            )
        for parent_id in bb.active_parents(element):
            parent = bb.elements[parent_id]
            if self._competing_labels(parent):
                self._post_once(KsKind.SPLITTER, parent_id)
            if parent.label and parent.belief is not None:
                self._post_once(KsKind.LABELER_UPDATE, parent_id)

    def _competing_labels(self, group: Element) -> bool:
        seen: Set[str] = set()
        for child_id in group.children:
            child = self.bb.elements[child_id]
            if not child.active or child.label is None:
                continue
            if child.label in seen:
                return True
            seen.add(child.label)
        return False

    def _fire_relabel(self, ksar: Ksar) -> int:
        element = self.bb.elements.get(ksar.target)
        if element is None or not element.active:
            return 0
        new_label = ksar.payload["new"]
        old_label = ksar.payload.get("old") or None
        reset = labeler_relabel(self.bb, ksar.target, new_label, old_label)
        self._log("relabel", ksar.target, f"{old_label}->{new_label} reset={len(reset)}")
        for child_id in reset:
            self._post_once(KsKind.LABELER_INIT, child_id)
        if reset:
            self._post_once(KsKind.LABELER_UPDATE, ksar.target)
        return 0

    def _goal_deficit(self, model_id: str) -> int:
        for goal in self.bb.goals:
            if goal.model_node == model_id:
                return goal.deficit
        return self.config.n_hypotheses

    def _fire_grouper(self, ksar: Ksar) -> int:
        bb = self.bb
        seed = bb.elements.get(ksar.target)
        if seed is None or not seed.active or seed.label is None:
            return 0
        if bb.active_parents(seed):
            return 0  # already adopted by some grouping
        model_label = bb.elements.get(seed.label)
        if model_label is None:
            return 0
        for target_id in model_label.parents:
            target = bb.elements[target_id]
            if not target.active:
                continue
            if len(bb.correspondents(target_id)) >= self._goal_deficit(target_id):
                continue
            grouping = grouper(bb, seed.id, target_id, self.config.params)
            if grouping is None:
                self._log("group-dup", seed.id, f"target={target_id}")
                continue
            self._log(
                "group",
                grouping.parent_id,
                f"target={target_id} members={len(grouping.member_ids)}",
            )
            self._label_new_group(grouping.parent_id)
        return 0

    def _fire_splitter(self, ksar: Ksar) -> int:
        bb = self.bb
        group = bb.elements.get(ksar.target)
        if group is None or not group.active:
            return 0
        alternatives = splitter(bb, ksar.target)
        if not alternatives:
            return 0
        self._log("split", ksar.target, f"alternatives={len(alternatives)}")
        for alt in alternatives:
            self._label_new_group(alt.parent_id)
            self._post_once(KsKind.LABELER_UPDATE, alt.parent_id)
        return 1

    def _fire_merger(self, ksar: Ksar) -> int:
        level = _MERGE_LEVEL[ksar.target]
        records = merger(self.bb, Panel.DATA, level, self.config.params)
        for record in records:
            self._log(
                "merge", record.merged_id, f"from={','.join(record.constituent_ids)}"
            )
        return 0


def run_match(bb: Blackboard, config: Optional[SchedulerConfig] = None) -> RunResult:
    """Convenience wrapper: build an engine and run the full protocol."""
    return Engine(bb, config).run()
