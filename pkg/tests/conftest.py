"""Shared synthetic-scene helpers for pose-recovery tests.

`corridor_edges` is a hand-built 3-D wireframe of a straight hallway
section (two side walls, a far wall, a door frame, a bulletin board) that
offers both horizontal and vertical edges in view of a robot near the
middle.  `synthetic_matches` projects those edges at a *true* pose and
wraps them as believed correspondences, optionally jittering endpoints —
an independent generator that the pose solver must invert.
"""

from typing import List, Optional, Sequence

import numpy as np

from scenematch.camera import CameraModel, Edge3, Pose2
from scenematch.geometry import Segment2
from scenematch.render import project_edge
from scenematch.self_location import EdgeMatch

CORRIDOR_HALF_WIDTH = 1.5
CORRIDOR_LENGTH = 10.0
WALL_HEIGHT = 2.4


def corridor_edges() -> List[Edge3]:
    w = CORRIDOR_HALF_WIDTH
    far = CORRIDOR_LENGTH
    h = WALL_HEIGHT
    edges = []
    for y in (-w, w):  # side-wall base and top lines
        edges.append(Edge3((0.0, y, 0.0), (far, y, 0.0)))
        edges.append(Edge3((0.0, y, h), (far, y, h)))
    # Far wall: base, top, and the two corner verticals.
    edges.append(Edge3((far, -w, 0.0), (far, w, 0.0)))
    edges.append(Edge3((far, -w, h), (far, w, h)))
    edges.append(Edge3((far, -w, 0.0), (far, -w, h)))
    edges.append(Edge3((far, w, 0.0), (far, w, h)))
    # Door frame on the right wall.
    edges.append(Edge3((4.0, -w, 0.0), (4.0, -w, 2.1)))
    edges.append(Edge3((4.9, -w, 0.0), (4.9, -w, 2.1)))
    edges.append(Edge3((4.0, -w, 2.1), (4.9, -w, 2.1)))
    # Bulletin board on the left wall.
    edges.append(Edge3((5.0, w, 1.1), (5.0, w, 1.9)))
    edges.append(Edge3((6.2, w, 1.1), (6.2, w, 1.9)))
    edges.append(Edge3((5.0, w, 1.1), (6.2, w, 1.1)))
    edges.append(Edge3((5.0, w, 1.9), (6.2, w, 1.9)))
    return edges


def pose_recovery_trials(
    seed: int,
    trials: int,
    sigma_px: float,
    belief: float = 0.95,
) -> List[tuple]:
    """Monte-Carlo pose-recovery errors on the corridor scene.

    Each trial samples a true pose within +/-0.5 m and +/-10 degrees of the
    believed pose, renders noisy matches at the truth, solves, and records
    (position error m, heading error rad).  Shared by the recorded envelope
    calibration and the acceptance check so both measure the same process.
    """
    from scenematch.self_location import self_locate

    rng = np.random.default_rng(seed)
    believed = Pose2(2.0, 0.0, 0.0)
    cam = CameraModel.level_mount(height_m=1.0)
    edges = corridor_edges()
    errors = []
    for _ in range(trials):
        true = Pose2(
            believed.x + rng.uniform(-0.5, 0.5),
            believed.y + rng.uniform(-0.5, 0.5),
            believed.heading + rng.uniform(-np.radians(10.0), np.radians(10.0)),
        )
        matches = synthetic_matches(
            edges, true, cam, belief=belief, sigma_px=sigma_px, rng=rng
        )
        assert len(matches) >= 6
        fix = self_locate(matches, believed, cam)
        errors.append((fix.pose.position_error(true), fix.pose.heading_error(true)))
    return errors


def synthetic_matches(
    edges: Sequence[Edge3],
    true_pose: Pose2,
    cam: CameraModel,
    belief: float = 1.0,
    sigma_px: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    min_len_px: float = 6.0,
) -> List[EdgeMatch]:
    out = []
    for edge in edges:
        seg = project_edge(edge, true_pose, cam, min_len_px=min_len_px)
        if seg is None:
            continue
        p0, p1 = seg.p0, seg.p1
        if sigma_px > 0.0:
            assert rng is not None
            p0 = (p0[0] + rng.normal(0.0, sigma_px), p0[1] + rng.normal(0.0, sigma_px))
            p1 = (p1[0] + rng.normal(0.0, sigma_px), p1[1] + rng.normal(0.0, sigma_px))
        out.append(EdgeMatch(Segment2(p0, p1), edge, belief, edge.is_horizontal))
    return out
