"""Rendering world edges into the image plane.

The lower half of this module is the geometric toolkit: rigid transforms
into the camera, near-plane clipping in 3-D, pinhole projection, and
rectangle clipping in pixels.  Clipping moves endpoints *along* the same
3-D line, so downstream consumers that only care about the projected line
(the evidential matcher, the pose solver) lose nothing when an edge is
partially out of view.

On top of that sit the two scene builders:

* `render_expectation` draws the hallway wireframe from a believed pose -
  plan-view occlusion culling, then projection - preserving the
  vertex/edge/face hierarchy and recording each segment's source 3-D
  edge.  It is a pure function of (world, pose, camera).
* `synthesize_perception` renders from the *true* pose and then roughs
  the result up the way a real segment extractor would: fragments,
  dropouts, endpoint jitter, and spurious glare segments on the floor.
  Ground-truth provenance rides along for evaluation only.

`populate_model_panel` / `populate_data_panel` load the two renderings
onto a blackboard in the five-level shape the matcher works on; the model
side gets a single pass-through object node between faces and scene.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .blackboard import Blackboard, Element, Level, Panel
from .camera import CameraModel, Edge3, Pose2
from .geometry import Segment2
from .world import HallwayModel, PoseOutsideWorld

NEAR_PLANE_M = 0.05
MIN_EDGE_PX = 4.0
MIN_PIECE_PX = 6.0
_FRAG_GAP_FRAC = 0.08


def _clip_near(
    c0: np.ndarray, c1: np.ndarray, near: float
) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Cut a camera-frame segment at the near plane; None if fully behind."""
    z0, z1 = float(c0[2]), float(c1[2])
    if z0 < near and z1 < near:
        return None
    if z0 < near:
        t = (near - z0) / (z1 - z0)
        c0 = c0 + t * (c1 - c0)
    elif z1 < near:
        t = (near - z1) / (z0 - z1)
        c1 = c1 + t * (c0 - c1)
    return c0, c1


def clip_to_frame(
    p0: Tuple[float, float],
    p1: Tuple[float, float],
    width: float,
    height: float,
) -> Optional[Tuple[Tuple[float, float], Tuple[float, float]]]:
    """Clip a pixel segment to [0, width] x [0, height]; None if outside."""
    t0, t1 = 0.0, 1.0
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    for p, q in (
        (-dx, p0[0]),
        (dx, width - p0[0]),
        (-dy, p0[1]),
        (dy, height - p0[1]),
    ):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        r = q / p
        if p < 0.0:
            if r > t1:
                return None
            if r > t0:
                t0 = r
        else:
            if r < t0:
                return None
            if r < t1:
                t1 = r
    return (
        (p0[0] + t0 * dx, p0[1] + t0 * dy),
        (p0[0] + t1 * dx, p0[1] + t1 * dy),
    )


def project_edge(
    edge: Edge3,
    pose: Pose2,
    cam: CameraModel,
    near_m: float = NEAR_PLANE_M,
    min_len_px: float = MIN_EDGE_PX,
) -> Optional[Segment2]:
    """The visible pixel extent of one world edge, or None.

    Near-clips in 3-D, projects, then clips to the image rectangle; edges
    shorter than `min_len_px` on screen are discarded as unusable.
    """
    c0 = cam.to_camera(pose.world_to_robot(edge.p0))
    c1 = cam.to_camera(pose.world_to_robot(edge.p1))
    clipped = _clip_near(c0, c1, near_m)
    if clipped is None:
        return None
    cx, cy = cam.principal_point
    pix = []
    for c in clipped:
        pix.append((cx + cam.focal_px * c[0] / c[2], cy + cam.focal_px * c[1] / c[2]))
    framed = clip_to_frame(pix[0], pix[1], float(cam.width_px), float(cam.height_px))
    if framed is None:
        return None
    q0, q1 = framed
    if np.hypot(q1[0] - q0[0], q1[1] - q0[1]) < min_len_px:
        return None
    return Segment2(q0, q1)


def project_edges(
    edges: Sequence[Edge3],
    pose: Pose2,
    cam: CameraModel,
    near_m: float = NEAR_PLANE_M,
    min_len_px: float = MIN_EDGE_PX,
) -> List[Tuple[Edge3, Segment2]]:
    """Project every edge, keeping (source edge, pixel segment) pairs."""
    out: List[Tuple[Edge3, Segment2]] = []
    for edge in edges:
        seg = project_edge(edge, pose, cam, near_m=near_m, min_len_px=min_len_px)
        if seg is not None:
            out.append((edge, seg))
    return out


# -- expectation rendering -----------------------------------------------------


@dataclass(frozen=True)
class RenderedEdge:
    """One projected wireframe edge with its provenance."""

    segment: Segment2
    source: Edge3
    face: str


@dataclass
class Expectation:
    """The visible wireframe from one pose: edges grouped under face names."""

    edges: List[RenderedEdge] = field(default_factory=list)
    face_order: List[str] = field(default_factory=list)

    def face_members(self) -> Dict[str, List[int]]:
        members: Dict[str, List[int]] = {name: [] for name in self.face_order}
        for i, re in enumerate(self.edges):
            members[re.face].append(i)
        return members


def camera_plan_position(pose: Pose2, cam: CameraModel) -> Tuple[float, float]:
    """World plan-view position of the camera's optical centre."""
    c = pose.robot_to_world(cam.camera_center_robot)
    return (float(c[0]), float(c[1]))


def _plan_distance(eye: Tuple[float, float], edge: Edge3) -> float:
    from .world import point_to_segment_distance

    return point_to_segment_distance(eye, (edge.p0[0], edge.p0[1]), (edge.p1[0], edge.p1[1]))


def render_expectation(
    model: HallwayModel,
    pose: Pose2,
    cam: CameraModel,
    near_m: float = NEAR_PLANE_M,
    min_len_px: float = MIN_EDGE_PX,
    max_range_m: Optional[float] = None,
) -> Expectation:
    """Project the hallway wireframe visible from a pose.

    Visibility is plan-view: walls all rise to the same height, so an edge
    hidden behind a wall in plan is hidden at every height.  Edges are
    culled whole by majority sampling, then near-clipped, projected and
    frame-clipped individually.

    `max_range_m` models the reach of the segment extractor: edges whose
    plan distance exceeds it are omitted.  Distant lines carry little
    pose information but plenty of confusion - their interpretation
    planes graze the vertical and neighbouring structures collapse to a
    few pixels apart - so matching runs usually want a finite reach.
    """
    if not model.contains((pose.x, pose.y)):
        raise PoseOutsideWorld(f"pose ({pose.x:.3f}, {pose.y:.3f}) is outside the hallway")
    eye = camera_plan_position(pose, cam)
    exp = Expectation()
    for face in model.faces:
        rendered_any = False
        for idx in face.edge_indices:
            edge = model.edges[idx]
            if max_range_m is not None and _plan_distance(eye, edge) > max_range_m:
                continue
            if not model.edge_visible(eye, edge):
                continue
            seg = project_edge(edge, pose, cam, near_m=near_m, min_len_px=min_len_px)
            if seg is None:
                continue
            exp.edges.append(RenderedEdge(seg, edge, face.name))
            rendered_any = True
        if rendered_any:
            exp.face_order.append(face.name)
    return exp


# -- loading renderings onto the blackboard ---------------------------------------


class EmptyRendering(ValueError):
    """Nothing projected into the frame; there is no scene to match."""


def _insert_edge_element(
    bb: Blackboard,
    panel: Panel,
    segment: Segment2,
    world_edge: Optional[Edge3] = None,
) -> Element:
    v0 = bb.insert_element(
        Element(bb.make_id(panel, Level.VERTEX), panel, Level.VERTEX, geometry=segment.p0)
    )
    v1 = bb.insert_element(
        Element(bb.make_id(panel, Level.VERTEX), panel, Level.VERTEX, geometry=segment.p1)
    )
    return bb.insert_element(
        Element(
            bb.make_id(panel, Level.EDGE),
            panel,
            Level.EDGE,
            children=[v0.id, v1.id],
            geometry=segment,
            value=1.0,
            world_edge=world_edge,
        )
    )


@dataclass(frozen=True)
class ModelPanelIds:
    edges: Tuple[str, ...]
    faces: Dict[str, str]  # face name -> element id
    object_id: str
    scene_id: str


def populate_model_panel(bb: Blackboard, exp: Expectation) -> ModelPanelIds:
    """Insert an expectation as the model-side hierarchy.

    Faces with no visible edge are omitted.  A single object node bridges
    the rendered face set to the scene node, keeping the five-level board
    shape over the four levels the rendering distinguishes.
    """
    if not exp.edges:
        raise EmptyRendering("expectation rendered no edges")
    edge_ids = [
        _insert_edge_element(bb, Panel.MODEL, re.segment, world_edge=re.source).id
        for re in exp.edges
    ]
    members = exp.face_members()
    face_ids: Dict[str, str] = {}
    for name in exp.face_order:
        children = [edge_ids[i] for i in members[name]]
        face = bb.insert_element(
            Element(
                bb.make_id(Panel.MODEL, Level.FACE),
                Panel.MODEL,
                Level.FACE,
                children=children,
                geometry=bb.aggregate_of(children),
            )
        )
        face_ids[name] = face.id
    object_el = bb.insert_element(
        Element(
            bb.make_id(Panel.MODEL, Level.OBJECT),
            Panel.MODEL,
            Level.OBJECT,
            children=list(face_ids.values()),
            geometry=bb.aggregate_of(list(face_ids.values())),
        )
    )
    scene_el = bb.insert_element(
        Element(
            bb.make_id(Panel.MODEL, Level.SCENE),
            Panel.MODEL,
            Level.SCENE,
            children=[object_el.id],
            geometry=bb.aggregate_of([object_el.id]),
        )
    )
    return ModelPanelIds(tuple(edge_ids), face_ids, object_el.id, scene_el.id)


def populate_data_panel(bb: Blackboard, segments: Sequence[Segment2]) -> List[str]:
    """Insert perceived segments as parentless data edges (with vertices)."""
    if not segments:
        raise EmptyRendering("perception produced no segments")
    return [_insert_edge_element(bb, Panel.DATA, seg).id for seg in segments]


# -- perception synthesis -----------------------------------------------------------


@dataclass(frozen=True)
class PerceptionNoise:
    """Degradations applied to the true-pose rendering.

    `frag_prob` breaks an edge into 2-4 pieces with small gaps,
    `drop_prob` deletes it outright, `endpoint_sigma_px` jitters surviving
    endpoints, and `spurious_rate` is the expected count of glare
    segments scattered over the floor region of the image.
    """

    frag_prob: float = 0.0
    drop_prob: float = 0.0
    spurious_rate: float = 0.0
    endpoint_sigma_px: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("frag_prob", "drop_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("spurious_rate", "endpoint_sigma_px"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class PerceivedSegment:
    """A data segment plus its generating edge (None for spurious)."""

    segment: Segment2
    truth: Optional[Edge3]


def _fragment_params(rng: np.random.Generator) -> List[Tuple[float, float]]:
    """Sub-intervals of [0, 1] for 2-4 pieces separated by small gaps."""
    pieces = int(rng.integers(2, 5))
    cuts = np.sort(rng.uniform(0.15, 0.85, size=pieces - 1))
    bounds = [0.0] + [float(c) for c in cuts] + [1.0]
    out = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        gap = _FRAG_GAP_FRAC * (b - a)
        out.append((a + gap, b - gap))
    return out


def _spurious_segment(
    rng: np.random.Generator, cam: CameraModel
) -> Optional[Segment2]:
    """One glare streak: a random stroke through a projected floor point."""
    floor = np.array(
        [float(rng.uniform(1.2, 7.0)), float(rng.uniform(-2.5, 2.5)), 0.0]
    )
    phi = float(rng.uniform(0.0, np.pi))
    half = float(rng.uniform(12.0, 45.0))
    centre = cam.project_robot(floor)
    if centre is None or not cam.in_frame(centre[0], centre[1]):
        return None
    p0 = (centre[0] - half * np.cos(phi), centre[1] - half * np.sin(phi))
    p1 = (centre[0] + half * np.cos(phi), centre[1] + half * np.sin(phi))
    framed = clip_to_frame(p0, p1, float(cam.width_px), float(cam.height_px))
    if framed is None:
        return None
    q0, q1 = framed
    if np.hypot(q1[0] - q0[0], q1[1] - q0[1]) < MIN_PIECE_PX:
        return None
    return Segment2(q0, q1)


def synthesize_perception(
    model: HallwayModel,
    true_pose: Pose2,
    cam: CameraModel,
    noise: PerceptionNoise,
    near_m: float = NEAR_PLANE_M,
    min_len_px: float = MIN_EDGE_PX,
    max_range_m: Optional[float] = None,
) -> List[PerceivedSegment]:
    """Render from the true pose, then degrade like a segment extractor.

    Deterministic for a fixed noise seed.  With all rates zero the output
    segments equal the true-pose expectation exactly; with drop_prob one,
    only spurious segments survive.  The `truth` field never feeds the
    matcher - it exists so evaluations can score correspondence recovery.
    """
    exp = render_expectation(
        model, true_pose, cam, near_m=near_m, min_len_px=min_len_px, max_range_m=max_range_m
    )
    rng = np.random.default_rng(noise.seed)
    out: List[PerceivedSegment] = []
    for re in exp.edges:
        if rng.uniform() < noise.drop_prob:
            continue
        seg = re.segment
        fragmented = rng.uniform() < noise.frag_prob
        if not fragmented and noise.endpoint_sigma_px <= 0.0:
            out.append(PerceivedSegment(seg, re.source))  # bit-exact passthrough
            continue
        spans = _fragment_params(rng) if fragmented else [(0.0, 1.0)]
        (x0, y0), (x1, y1) = seg.p0, seg.p1
        for a, b in spans:
            q0 = (x0 + a * (x1 - x0), y0 + a * (y1 - y0))
            q1 = (x0 + b * (x1 - x0), y0 + b * (y1 - y0))
            if noise.endpoint_sigma_px > 0.0:
                jit = rng.normal(0.0, noise.endpoint_sigma_px, size=4)
                q0 = (q0[0] + jit[0], q0[1] + jit[1])
                q1 = (q1[0] + jit[2], q1[1] + jit[3])
            if np.hypot(q1[0] - q0[0], q1[1] - q0[1]) < MIN_PIECE_PX:
                continue
            out.append(PerceivedSegment(Segment2(q0, q1), re.source))
    for _ in range(int(rng.poisson(noise.spurious_rate))):
        seg = _spurious_segment(rng, cam)
        if seg is not None:
            out.append(PerceivedSegment(seg, None))
    return out
