"""Planar pose recovery from believed image-to-model edge matches.

Each retained match ties an image segment to a 3-D model edge.  The two
sight rays through the segment's endpoints span a plane through the camera
center (the interpretation plane) that must contain the 3-D edge, and that
containment is the whole geometric currency here:

- a *horizontal* model edge pins the robot's heading, because the only
  horizontal direction inside the interpretation plane is `n x z_hat` and
  it must rotate onto the edge's known world direction;
- any match constrains the robot's position linearly (the plane, re-anchored
  at the unknown origin, must still contain the edge), so two matches with
  non-parallel constraints fix (x, y) by a 2x2 solve.

Estimates from all usable edges/pairs are averaged with belief-derived
weights; when either family of evidence is missing, the odometry prior fills
in and the fix is flagged as degraded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .blackboard import Blackboard, Level
from .camera import CameraModel, Edge3, Pose2, ang_diff, normalize_angle, rot_z
from .geometry import Segment2
from .scheduler import rank_scenes

RETENTION_THRESHOLD = 0.9  # label mass a match must reach to be trusted
CONDITION_LIMIT = 1e6  # 2x2 position systems worse than this are rejected
_PLANE_TOL = 1e-9


class NoSceneNode(LookupError):
    """The data panel holds no labeled scene hypothesis to extract from."""


class DegenerateGeometry(ArithmeticError):
    """The interpretation plane carries no heading information."""


class NearParallel(ArithmeticError):
    """The pair's position constraints are too close to collinear."""


class InsufficientMatches(ValueError):
    """Not enough usable evidence for a component of the pose."""


@dataclass(frozen=True)
class EdgeMatch:
    """A believed correspondence between an image segment and a model edge."""

    image_segment: Segment2
    model_edge: Edge3
    belief: float
    is_horizontal: bool

    def __post_init__(self) -> None:
        if not 0.0 <= self.belief <= 1.0:
            raise ValueError(f"belief {self.belief!r} outside [0, 1]")


@dataclass(frozen=True)
class Fix:
    """A self-location result plus how much evidence went into it."""

    pose: Pose2
    n_matches: int
    n_heading_edges: int
    n_position_pairs: int
    degraded: bool

    def log_fields(self) -> str:
        flag = "degraded" if self.degraded else "ok"
        return (
            f"fix=({self.pose.x:.6f},{self.pose.y:.6f},{self.pose.heading:.6f})"
            f" n_matches={self.n_matches} n_heading={self.n_heading_edges}"
            f" n_pairs={self.n_position_pairs} {flag}"
        )


def extract_matches(bb: Blackboard, threshold: float = RETENTION_THRESHOLD) -> List[EdgeMatch]:
    """Collect trustworthy edge correspondences from the winning scene.

    Takes the best-ranked data-panel scene hypothesis, walks down to its
    edges, and keeps those whose label mass reaches the threshold and whose
    model edge carries world geometry (edges without it cannot contribute
    metric constraints and are skipped).
    """
    scenes = rank_scenes(bb)
    if not scenes:
        raise NoSceneNode("no labeled scene hypothesis on the data panel")
    out: List[EdgeMatch] = []
    for edge in bb.descendants_at(scenes[0].id, Level.EDGE):
        if edge.label is None or edge.belief is None or edge.geometry is None:
            continue
        mass = edge.belief.mass(edge.label)
        if mass < threshold:
            continue
        model = bb.elements.get(edge.label)
        if model is None or model.world_edge is None:
            continue
        world: Edge3 = model.world_edge
        out.append(
            EdgeMatch(
                image_segment=edge.geometry,
                model_edge=world,
                belief=mass,
                is_horizontal=world.is_horizontal,
            )
        )
    return out


def interpretation_normal(segment: Segment2, cam: CameraModel) -> np.ndarray:
    """Unit normal (robot frame) of the plane spanned by the two sight rays."""
    _, d0 = cam.ray_robot(*segment.p0)
    _, d1 = cam.ray_robot(*segment.p1)
    n = np.cross(d0, d1)
    norm = float(np.linalg.norm(n))
    if norm < _PLANE_TOL:
        raise DegenerateGeometry("sight rays are parallel; the segment spans no plane")
    return n / norm


def orientation_from_edge(match: EdgeMatch, cam: CameraModel, prior_heading: float) -> float:
    """Robot heading from one horizontal-edge correspondence.

    The model edge's direction in the robot frame must be the horizontal
    direction inside the interpretation plane; the heading is whatever
    rotation carries that onto the edge's world direction.  The two-fold
    ambiguity (the plane does not orient the edge) is settled by picking the
    candidate nearer the odometry prior.
    """
    if not match.is_horizontal:
        raise ValueError("heading needs a horizontal model edge")
    n = interpretation_normal(match.image_segment, cam)
    hx, hy = float(n[1]), float(-n[0])  # n x z_hat
    if math.hypot(hx, hy) < _PLANE_TOL:
        raise DegenerateGeometry("horizontal interpretation plane")
    d = match.model_edge.direction
    theta = normalize_angle(math.atan2(d[1], d[0]) - math.atan2(hy, hx))
    flipped = normalize_angle(theta + math.pi)
    if abs(ang_diff(flipped, prior_heading)) < abs(ang_diff(theta, prior_heading)):
        return flipped
    return theta


def _position_row(
    match: EdgeMatch, rz: np.ndarray, cam_offset_w: np.ndarray, cam: CameraModel
) -> Tuple[np.ndarray, float]:
    """One linear constraint a . (x, y) = b from a match's plane containment."""
    n_w = rz @ interpretation_normal(match.image_segment, cam)
    anchor = np.asarray(match.model_edge.midpoint, dtype=float)
    b = float(n_w @ anchor) - float(n_w @ cam_offset_w)
    return n_w[:2], b


def model_lines_non_parallel(a: Edge3, b: Edge3, tol: float = 1e-6) -> bool:
    """Whether two model edges lie on non-parallel 3-D lines.

    This is the necessary condition for a pair to fix the position.  It is
    checked on the exact world geometry rather than on the noisy image
    constraints: a parallel pair whose pixels have been jittered produces a
    system that is catastrophically sensitive yet no longer *exactly*
    singular, so the algebraic condition check alone would let it through.
    """
    da = np.asarray(a.direction)
    db = np.asarray(b.direction)
    return float(np.linalg.norm(np.cross(da, db))) > tol


def position_from_pair(
    m1: EdgeMatch, m2: EdgeMatch, heading: float, cam: CameraModel
) -> Tuple[float, float]:
    """Robot position from two matches whose constraints are independent.

    With the heading known, each interpretation plane becomes a world-frame
    plane anchored at the unknown robot origin; requiring it to contain its
    model edge is linear in (x, y).  Two such constraints are solved
    directly; pairs of parallel model lines and ill-conditioned systems are
    rejected.
    """
    if not model_lines_non_parallel(m1.model_edge, m2.model_edge):
        raise NearParallel("model lines are parallel")
    rz = rot_z(heading)
    cam_offset_w = rz @ cam.camera_center_robot
    rows = []
    rhs = []
    for m in (m1, m2):
        a, b = _position_row(m, rz, cam_offset_w, cam)
        rows.append(a)
        rhs.append(b)
    system = np.vstack(rows)
    cond = np.linalg.cond(system)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise NearParallel(f"position system condition {cond:.3g}")
    x, y = np.linalg.solve(system, np.asarray(rhs))
    return float(x), float(y)


def weighted_circular_mean(terms: Iterable[Tuple[float, float]]) -> float:
    """Weighted mean of angles by resultant vector; safe across the wrap."""
    c = 0.0
    s = 0.0
    for angle, weight in terms:
        c += weight * math.cos(angle)
        s += weight * math.sin(angle)
    if math.hypot(c, s) < 1e-12:
        raise InsufficientMatches("heading evidence cancels or is empty")
    return math.atan2(s, c)


def self_locate(matches: Sequence[EdgeMatch], prior: Pose2, cam: CameraModel) -> Fix:
    """Fuse all usable matches into one pose fix.

    Heading first (belief-weighted circular mean over horizontal edges),
    then position (belief-product-weighted mean over all well-conditioned
    pairs, evaluated at that heading).  Whenever a component has no usable
    evidence the prior's component is kept and the fix is marked degraded.
    """
    degraded = False

    heading_terms: List[Tuple[float, float]] = []
    for m in matches:
        if not m.is_horizontal:
            continue
        try:
            heading_terms.append((orientation_from_edge(m, cam, prior.heading), m.belief))
        except DegenerateGeometry:
            continue
    try:
        heading = weighted_circular_mean(heading_terms)
        n_heading = len(heading_terms)
    except InsufficientMatches:
        heading = prior.heading
        n_heading = 0
        degraded = True

    positions: List[Tuple[Tuple[float, float], float]] = []
    for m1, m2 in combinations(matches, 2):
        try:
            xy = position_from_pair(m1, m2, heading, cam)
        except (NearParallel, DegenerateGeometry):
            continue
        positions.append((xy, m1.belief * m2.belief))
    weight_sum = sum(w for _, w in positions)
    if positions and weight_sum > 0.0:
        x = sum(p[0] * w for p, w in positions) / weight_sum
        y = sum(p[1] * w for p, w in positions) / weight_sum
        n_pairs = len(positions)
    else:
        x, y = prior.x, prior.y
        n_pairs = 0
        degraded = True

    return Fix(
        pose=Pose2(x, y, heading),
        n_matches=len(matches),
        n_heading_edges=n_heading,
        n_position_pairs=n_pairs,
        degraded=degraded,
    )
