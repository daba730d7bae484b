"""Dempster-Shafer evidence calculus over label hypotheses.

Every data element on the blackboard carries a frame of discernment (the
candidate model labels) and a pool of *simple evidence functions*: basic
probability assignments whose only focal elements are a single label {A},
its complement, and the whole frame.  That restricted family is closed
under Dempster's rule when both operands share the focus, and the pool as
a whole can be combined in closed form instead of enumerating the power
set.  The power-set combiner is kept alongside as the correctness oracle;
the fast paths are required to agree with it to 1e-9.

Masses for a belief state are reported only for singletons, since the
current label of an element is the argmax singleton.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

SUM_TOL = 1e-12
CONFLICT_CEILING = 1.0 - 1e-12

ORACLE_MAX_FRAME = 16


class TotalConflict(ArithmeticError):
    """Raised when combination puts (almost) all mass on the empty set."""


class FrameMismatch(ValueError):
    """Raised when operands do not live on the same frame of discernment."""


# Optional instrumentation hook: receives every bpa constructed anywhere.
# Used by the acceptance suite to audit mass sanity across a full run.
_mass_observer: Optional[Callable[[object], None]] = None


def set_mass_observer(observer: Optional[Callable[[object], None]]) -> None:
    global _mass_observer
    _mass_observer = observer


def _observe(bpa: object) -> None:
    if _mass_observer is not None:
        _mass_observer(bpa)


@dataclass(frozen=True)
class Frame:
    """Ordered frame of discernment.

    Label order is the insertion order and is load-bearing: argmax ties
    are broken in favour of the earlier label, and enlarging a frame
    appends the new labels after the existing ones.
    """

    labels: Tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.labels:
            raise ValueError("frame must contain at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("frame labels must be unique")

    @classmethod
    def of(cls, labels: Iterable[str]) -> "Frame":
        return cls(tuple(labels))

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __contains__(self, label: object) -> bool:
        return label in self.labels

    def union(self, extra: Iterable[str]) -> "Frame":
        """Frame enlarged with unseen labels appended in the given order."""
        merged = list(self.labels)
        seen = set(merged)
        for label in extra:
            if label not in seen:
                merged.append(label)
                seen.add(label)
        return Frame(tuple(merged))


@dataclass(frozen=True)
class SimpleEvidence:
    """Simple evidence function: mass on {focus}, on its complement, on the frame.

    The complement is interpreted against whatever frame the function is
    later combined on, so a stored function stays valid when the frame of
    its owner grows: the mass_against simply re-targets the enlarged
    complement.
    """

    focus: str
    mass_for: float
    mass_against: float
    mass_theta: float

    def __post_init__(self) -> None:
        for m in (self.mass_for, self.mass_against, self.mass_theta):
            if m < 0.0:
                raise ValueError(f"negative mass {m!r} in simple evidence function")
        total = self.mass_for + self.mass_against + self.mass_theta
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"simple evidence masses sum to {total!r}, not 1")
        _observe(self)

    def is_vacuous(self) -> bool:
        return self.mass_theta == 1.0


def simple_evidence(focus: str, mass_for: float, mass_against: float) -> SimpleEvidence:
    """Build a simple evidence function, absorbing float dust into theta."""
    theta = 1.0 - mass_for - mass_against
    if -SUM_TOL < theta < 0.0:
        theta = 0.0
    return SimpleEvidence(focus, mass_for, mass_against, theta)


def vacuous(focus: str) -> SimpleEvidence:
    return SimpleEvidence(focus, 0.0, 0.0, 1.0)


def combine_same_focus(a: SimpleEvidence, b: SimpleEvidence) -> SimpleEvidence:
    """Dempster's rule for two simple evidence functions sharing a focus.

    Conflict is mass_for of one meeting mass_against of the other; the
    surviving focal elements are again {focus}, complement and theta, so
    the family is closed under this combination.
    """
    if a.focus != b.focus:
        raise FrameMismatch(f"cannot fast-combine foci {a.focus!r} and {b.focus!r}")
    conflict = a.mass_for * b.mass_against + a.mass_against * b.mass_for
    if conflict >= CONFLICT_CEILING:
        raise TotalConflict(f"same-focus combination conflict {conflict!r}")
    norm = 1.0 - conflict
    mass_for = (
        a.mass_for * b.mass_for
        + a.mass_for * b.mass_theta
        + a.mass_theta * b.mass_for
    ) / norm
    mass_against = (
        a.mass_against * b.mass_against
        + a.mass_against * b.mass_theta
        + a.mass_theta * b.mass_against
    ) / norm
    # Exact residual instead of t_a*t_b/norm: identical in real arithmetic
    # (the three normalised masses partition 1) but immune to the float
    # dust that otherwise accumulates over long fold chains.
    return simple_evidence(a.focus, mass_for, mass_against)


def fold_same_focus(pool: Sequence[SimpleEvidence]) -> SimpleEvidence:
    """Fold a non-empty pool of same-focus functions with combine_same_focus."""
    if not pool:
        raise ValueError("cannot fold an empty pool")
    acc = pool[0]
    for sef in pool[1:]:
        acc = combine_same_focus(acc, sef)
    return acc


def combine_pool(pool: Sequence[SimpleEvidence], frame: Frame) -> Dict[str, float]:
    """Combined singleton masses of a pool of simple evidence functions.

    Works per label: functions sharing a focus are folded with the
    same-focus fast path, then the cross-focus combination is evaluated in
    closed form.  Writing f_i, a_i, t_i for the folded for/against/theta
    masses of label i, the unnormalised singleton mass of label j is

        f_j * prod_{i!=j} (a_i + t_i)  +  t_j * prod_{i!=j} a_i

    (the second term is the intersection of every other complement), and
    the global conflict is

        K = 1 - prod_i (1 - f_i) - sum_j f_j prod_{i!=j} (1 - f_i) + prod_i a_i

    i.e. two distinct foci asserted together, or every complement at once.
    The result must agree with the power-set oracle; on a single-label
    frame the complement is empty, so any mass against the label becomes
    conflict and the label conditions to certainty.
    """
    if not pool:
        return {label: 0.0 for label in frame}
    folded: Dict[str, SimpleEvidence] = {}
    for sef in pool:
        if sef.focus not in frame:
            raise FrameMismatch(f"focus {sef.focus!r} is not in the frame")
        if sef.focus in folded:
            folded[sef.focus] = combine_same_focus(folded[sef.focus], sef)
        else:
            folded[sef.focus] = sef

    labels = frame.labels
    f = [folded[l].mass_for if l in folded else 0.0 for l in labels]
    a = [folded[l].mass_against if l in folded else 0.0 for l in labels]
    t = [folded[l].mass_theta if l in folded else 1.0 for l in labels]
    n = len(labels)

    def prod_except(values: List[float], skip: int) -> float:
        out = 1.0
        for i, v in enumerate(values):
            if i != skip:
                out *= v
        return out

    one_minus_f = [1.0 - fi for fi in f]
    prod_all_omf = math.prod(one_minus_f)
    single_focus = sum(f[j] * prod_except(one_minus_f, j) for j in range(n))
    conflict = (1.0 - prod_all_omf - single_focus) + math.prod(a)
    if conflict >= CONFLICT_CEILING:
        raise TotalConflict(f"pool combination conflict {conflict!r}")
    norm = 1.0 - conflict

    masses: Dict[str, float] = {}
    for j, label in enumerate(labels):
        at = prod_except([a[i] + t[i] for i in range(n)], j)
        all_against = prod_except(a, j)
        masses[label] = (f[j] * at + t[j] * all_against) / norm
    return masses


# ---------------------------------------------------------------------------
# Power-set oracle


@dataclass(frozen=True)
class GeneralBpa:
    """Unrestricted basic probability assignment over subsets of a frame.

    Deliberately naive: it exists to define correctness for the fast
    paths, not to be fast itself.
    """

    frame: Frame
    masses: Mapping[FrozenSet[str], float]

    def __post_init__(self) -> None:
        if len(self.frame) > ORACLE_MAX_FRAME:
            raise ValueError(f"oracle limited to {ORACLE_MAX_FRAME} labels")
        universe = frozenset(self.frame.labels)
        total = 0.0
        for subset, mass in self.masses.items():
            if not subset:
                raise ValueError("bpa must not assign mass to the empty set")
            if not subset <= universe:
                raise FrameMismatch(f"focal element {set(subset)!r} outside the frame")
            if mass < 0.0:
                raise ValueError(f"negative mass {mass!r}")
            total += mass
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"bpa masses sum to {total!r}, not 1")
        _observe(self)

    def mass(self, subset: Iterable[str]) -> float:
        return self.masses.get(frozenset(subset), 0.0)

    def singleton_masses(self) -> Dict[str, float]:
        return {label: self.mass({label}) for label in self.frame}


def vacuous_bpa(frame: Frame) -> GeneralBpa:
    return GeneralBpa(frame, {frozenset(frame.labels): 1.0})


def lift(sef: SimpleEvidence, frame: Frame) -> GeneralBpa:
    """Materialise a simple evidence function on a concrete frame."""
    if sef.focus not in frame:
        raise FrameMismatch(f"focus {sef.focus!r} is not in the frame")
    universe = frozenset(frame.labels)
    complement = universe - {sef.focus}
    if not complement and sef.mass_against > 0.0:
        raise ValueError("cannot lift mass against the only label in the frame")
    masses: Dict[FrozenSet[str], float] = {}
    for subset, mass in (
        (frozenset({sef.focus}), sef.mass_for),
        (complement, sef.mass_against),
        (universe, sef.mass_theta),
    ):
        if mass > 0.0:
            masses[subset] = masses.get(subset, 0.0) + mass
    if not masses:  # all three masses zero cannot happen; keep the type total
        masses[universe] = 1.0
    return GeneralBpa(frame, masses)


def oracle_combine(a: GeneralBpa, b: GeneralBpa) -> GeneralBpa:
    """Dempster's rule by brute-force focal-set intersection."""
    if a.frame != b.frame:
        raise FrameMismatch("oracle operands must share a frame")
    raw: Dict[FrozenSet[str], float] = {}
    conflict = 0.0
    for sa, ma in a.masses.items():
        for sb, mb in b.masses.items():
            meet = sa & sb
            product = ma * mb
            if meet:
                raw[meet] = raw.get(meet, 0.0) + product
            else:
                conflict += product
    if conflict >= CONFLICT_CEILING:
        raise TotalConflict(f"oracle combination conflict {conflict!r}")
    norm = 1.0 - conflict
    return GeneralBpa(a.frame, {s: m / norm for s, m in raw.items()})


def oracle_pool(pool: Sequence[SimpleEvidence], frame: Frame) -> GeneralBpa:
    """Fold a pool through the power-set oracle, lifting each function."""
    acc = vacuous_bpa(frame)
    for sef in pool:
        acc = oracle_combine(acc, lift(sef, frame))
    return acc


# ---------------------------------------------------------------------------
# Belief state


INIT_EVIDENCE = "init"
UPDATE_EVIDENCE = "update"


@dataclass(frozen=True)
class PoolEntry:
    evidence: SimpleEvidence
    kind: str  # INIT_EVIDENCE or UPDATE_EVIDENCE


@dataclass
class BeliefState:
    """Frame, the full evidence pool, and cached combined singleton masses.

    The pool is never forgotten: recombination of the stored pool must
    reproduce singleton_mass, which is what makes frame enlargement sound
    (old functions are reinterpreted on the grown frame, not rescaled).
    """

    frame: Frame
    pool: List[PoolEntry] = field(default_factory=list)
    singleton_mass: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.singleton_mass:
            self.singleton_mass = {label: 0.0 for label in self.frame}

    def evidence(self) -> List[SimpleEvidence]:
        return [entry.evidence for entry in self.pool]

    def add(self, sef: SimpleEvidence, kind: str = INIT_EVIDENCE) -> None:
        if sef.focus not in self.frame:
            raise FrameMismatch(f"focus {sef.focus!r} is not in the frame")
        if kind not in (INIT_EVIDENCE, UPDATE_EVIDENCE):
            raise ValueError(f"unknown evidence kind {kind!r}")
        self.pool.append(PoolEntry(sef, kind))

    def recombine(self) -> Dict[str, float]:
        self.singleton_mass = combine_pool(self.evidence(), self.frame)
        return self.singleton_mass

    def enlarge(self, extra: Iterable[str]) -> bool:
        """Union new labels into the frame; returns True if the frame grew."""
        grown = self.frame.union(extra)
        if grown == self.frame:
            return False
        self.frame = grown
        self.recombine()
        return True

    def current_label(self) -> Optional[str]:
        return current_label(self)

    def mass(self, label: str) -> float:
        # normalisation can leave one-ulp dust above 1.0; clamp it away
        return min(1.0, self.singleton_mass.get(label, 0.0))

    def support(self, label: str) -> float:
        """Committed mass for a label from folding just its own functions.

        Unlike the combined singleton mass this does not condition away
        refuting mass, so it stays informative on one-label frames (where
        Dempster normalisation drives the singleton to certainty).
        """
        own = [e for e in self.evidence() if e.focus == label]
        if not own:
            return 0.0
        return fold_same_focus(own).mass_for

    def update_evidence(self, focus: str) -> List[SimpleEvidence]:
        return [
            entry.evidence
            for entry in self.pool
            if entry.kind == UPDATE_EVIDENCE and entry.evidence.focus == focus
        ]


def current_label(state: BeliefState) -> Optional[str]:
    """Argmax singleton label; ties go to the earlier frame label.

    None when no evidence has been pooled or every singleton mass is zero.
    """
    if not state.pool:
        return None
    best_label: Optional[str] = None
    best_mass = 0.0
    for label in state.frame:
        mass = state.singleton_mass.get(label, 0.0)
        if mass > best_mass:
            best_label = label
            best_mass = mass
    return best_label
