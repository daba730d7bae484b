"""Hallway world model.

A hallway is described by one closed, non-self-intersecting boundary
polygon in the floor plane: its segments are the walls (all extruded to a
common height), and its interior is the navigable free space.  Doors and
bulletin boards are rectangles attached to a wall at an offset along it.

From that plan description the model derives the 3-D wireframe the matcher
works against: wall base/top lines, corner verticals, and door/bulletin
frames, each edge assigned to exactly one face, with the face list feeding
one object and one scene node.

World files are YAML with units spelled out in the key names.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import yaml

from .camera import Edge3

Point2 = Tuple[float, float]

_EPS = 1e-9


class WorldFileError(ValueError):
    """The world file is syntactically or semantically invalid."""


class PoseOutsideWorld(ValueError):
    """A pose or waypoint lies outside the hallway free space."""


# -- plan-view primitives -----------------------------------------------------


def point_in_polygon(p: Point2, poly: Sequence[Point2]) -> bool:
    """Strict interior test by ray crossing; boundary points count as outside."""
    x, y = p
    inside = False
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        if point_to_segment_distance(p, (x0, y0), (x1, y1)) < _EPS:
            return False
        if (y0 > y) != (y1 > y):
            t = (y - y0) / (y1 - y0)
            if x < x0 + t * (x1 - x0):
                inside = not inside
    return inside


def segments_properly_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool:
    """Whether the open segments (a, b) and (c, d) cross at interior points."""
    r = (b[0] - a[0], b[1] - a[1])
    s = (d[0] - c[0], d[1] - c[1])
    denom = r[0] * s[1] - r[1] * s[0]
    if abs(denom) < _EPS:
        return False
    qp = (c[0] - a[0], c[1] - a[1])
    t = (qp[0] * s[1] - qp[1] * s[0]) / denom
    u = (qp[0] * r[1] - qp[1] * r[0]) / denom
    return _EPS < t < 1.0 - _EPS and _EPS < u < 1.0 - _EPS


def point_to_segment_distance(p: Point2, a: Point2, b: Point2) -> float:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    len2 = dx * dx + dy * dy
    if len2 <= 0.0:
        return math.hypot(p[0] - ax, p[1] - ay)
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / len2
    t = min(1.0, max(0.0, t))
    return math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))


def segment_to_segment_distance(a: Point2, b: Point2, c: Point2, d: Point2) -> float:
    if segments_properly_intersect(a, b, c, d):
        return 0.0
    return min(
        point_to_segment_distance(a, c, d),
        point_to_segment_distance(b, c, d),
        point_to_segment_distance(c, a, b),
        point_to_segment_distance(d, a, b),
    )


# -- fixtures on walls ----------------------------------------------------------


@dataclass(frozen=True)
class Door:
    wall: int
    offset_m: float
    width_m: float
    height_m: float


@dataclass(frozen=True)
class Bulletin:
    wall: int
    offset_m: float
    width_m: float
    bottom_m: float
    top_m: float


@dataclass(frozen=True)
class ModelFace:
    """A named planar patch owning a set of derived edges (by index)."""

    name: str
    edge_indices: Tuple[int, ...]


# -- the world -------------------------------------------------------------------


@dataclass
class HallwayModel:
    boundary: List[Point2]
    wall_height_m: float
    doors: List[Door] = field(default_factory=list)
    bulletins: List[Bulletin] = field(default_factory=list)
    waypoints: List[Point2] = field(default_factory=list)
    edges: List[Edge3] = field(init=False, default_factory=list)
    faces: List[ModelFace] = field(init=False, default_factory=list)

    def __post_init__(self) -> None:
        self._validate_plan()
        self._derive_wireframe()

    # -- validation and derivation ------------------------------------------

    def _validate_plan(self) -> None:
        n = len(self.boundary)
        if n < 3:
            raise WorldFileError("boundary needs at least 3 points")
        if self.wall_height_m <= 0.0:
            raise WorldFileError("wall_height_m must be positive")
        for i in range(n):
            a, b = self.wall_endpoints(i)
            if math.hypot(b[0] - a[0], b[1] - a[1]) < _EPS:
                raise WorldFileError(f"wall {i} is degenerate")
            for j in range(i + 1, n):
                c, d = self.wall_endpoints(j)
                if segments_properly_intersect(a, b, c, d):
                    raise WorldFileError(f"walls {i} and {j} cross: boundary self-intersects")
        for k, door in enumerate(self.doors):
            self._check_fixture(f"door {k}", door.wall, door.offset_m, door.width_m)
            if not 0.0 < door.height_m <= self.wall_height_m:
                raise WorldFileError(f"door {k}: height outside (0, wall height]")
        for k, bul in enumerate(self.bulletins):
            self._check_fixture(f"bulletin {k}", bul.wall, bul.offset_m, bul.width_m)
            if not 0.0 <= bul.bottom_m < bul.top_m <= self.wall_height_m:
                raise WorldFileError(f"bulletin {k}: vertical extent invalid")
        for k, wp in enumerate(self.waypoints):
            if not point_in_polygon(wp, self.boundary):
                raise WorldFileError(f"waypoint {k} at {wp} is outside the hallway")

    def _check_fixture(self, what: str, wall: int, offset: float, width: float) -> None:
        if not 0 <= wall < len(self.boundary):
            raise WorldFileError(f"{what}: wall index {wall} out of range")
        if width <= 0.0 or offset < 0.0:
            raise WorldFileError(f"{what}: offset/width must be non-negative/positive")
        a, b = self.wall_endpoints(wall)
        if offset + width > math.hypot(b[0] - a[0], b[1] - a[1]) + _EPS:
            raise WorldFileError(f"{what}: extends past the end of wall {wall}")

    def wall_endpoints(self, i: int) -> Tuple[Point2, Point2]:
        return self.boundary[i], self.boundary[(i + 1) % len(self.boundary)]

    def _wall_point(self, wall: int, offset: float) -> Point2:
        a, b = self.wall_endpoints(wall)
        length = math.hypot(b[0] - a[0], b[1] - a[1])
        t = offset / length
        return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))

    def _derive_wireframe(self) -> None:
        h = self.wall_height_m
        edges: List[Edge3] = []
        faces: List[ModelFace] = []

        def add_face(name: str, face_edges: List[Edge3]) -> None:
            start = len(edges)
            edges.extend(face_edges)
            faces.append(ModelFace(name, tuple(range(start, start + len(face_edges)))))

        for i in range(len(self.boundary)):
            (x0, y0), (x1, y1) = self.wall_endpoints(i)
            add_face(
                f"wall-{i}",
                [
                    Edge3((x0, y0, 0.0), (x1, y1, 0.0)),
                    Edge3((x0, y0, h), (x1, y1, h)),
                    # The corner vertical where this wall starts; the one at
                    # the far end belongs to the next wall, keeping every
                    # edge on exactly one face.
                    Edge3((x0, y0, 0.0), (x0, y0, h)),
                ],
            )
        for k, door in enumerate(self.doors):
            ax, ay = self._wall_point(door.wall, door.offset_m)
            bx, by = self._wall_point(door.wall, door.offset_m + door.width_m)
            dh = door.height_m
            add_face(
                f"door-{k}",
                [
                    Edge3((ax, ay, 0.0), (ax, ay, dh)),
                    Edge3((bx, by, 0.0), (bx, by, dh)),
                    Edge3((ax, ay, dh), (bx, by, dh)),
                ],
            )
        for k, bul in enumerate(self.bulletins):
            ax, ay = self._wall_point(bul.wall, bul.offset_m)
            bx, by = self._wall_point(bul.wall, bul.offset_m + bul.width_m)
            z0, z1 = bul.bottom_m, bul.top_m
            add_face(
                f"bulletin-{k}",
                [
                    Edge3((ax, ay, z0), (bx, by, z0)),
                    Edge3((ax, ay, z1), (bx, by, z1)),
                    Edge3((ax, ay, z0), (ax, ay, z1)),
                    Edge3((bx, by, z0), (bx, by, z1)),
                ],
            )
        self.edges = edges
        self.faces = faces

    # -- queries ---------------------------------------------------------------

    def contains(self, p: Point2, clearance_m: float = 0.0) -> bool:
        if not point_in_polygon(p, self.boundary):
            return False
        if clearance_m > 0.0:
            return self.clearance_at(p) >= clearance_m
        return True

    def clearance_at(self, p: Point2) -> float:
        return min(
            point_to_segment_distance(p, *self.wall_endpoints(i))
            for i in range(len(self.boundary))
        )

    def path_hits_wall(self, a: Point2, b: Point2, clearance_m: float = 0.0) -> bool:
        """Whether moving along the segment a->b contacts any wall."""
        for i in range(len(self.boundary)):
            w0, w1 = self.wall_endpoints(i)
            if segment_to_segment_distance(a, b, w0, w1) <= clearance_m + _EPS:
                return True
        return False

    def plan_occluded(self, camera: Point2, target: Point2) -> bool:
        """Whether a wall blocks the plan-view sight line camera->target.

        Walls are opaque from floor to the common height, so plan-view
        blocking is exact for the extruded geometry.  Endpoint touches do
        not block: a target lying on a wall is seen, not self-occluded.
        """
        for i in range(len(self.boundary)):
            w0, w1 = self.wall_endpoints(i)
            if segments_properly_intersect(camera, target, w0, w1):
                return True
        return False

    def edge_visible(self, camera: Point2, edge: Edge3, samples: int = 9) -> bool:
        """Plan-view visibility: a majority of sample points must be in sight."""
        p0 = (edge.p0[0], edge.p0[1])
        p1 = (edge.p1[0], edge.p1[1])
        if math.hypot(p1[0] - p0[0], p1[1] - p0[1]) < _EPS:  # vertical edge
            return not self.plan_occluded(camera, p0)
        seen = 0
        for k in range(samples):
            t = (k + 0.5) / samples
            q = (p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1]))
            if not self.plan_occluded(camera, q):
                seen += 1
        return seen * 2 >= samples


# -- world file parsing ------------------------------------------------------------


def _require(mapping: Dict, key: str, what: str):
    if key not in mapping:
        raise WorldFileError(f"{what}: missing required key {key!r}")
    return mapping[key]


def world_from_dict(doc: Dict) -> HallwayModel:
    if not isinstance(doc, dict):
        raise WorldFileError("world document must be a mapping")
    boundary = [
        (float(p[0]), float(p[1])) for p in _require(doc, "boundary_m", "world")
    ]
    doors = [
        Door(
            wall=int(_require(d, "wall", "door")),
            offset_m=float(_require(d, "offset_m", "door")),
            width_m=float(_require(d, "width_m", "door")),
            height_m=float(_require(d, "height_m", "door")),
        )
        for d in doc.get("doors", [])
    ]
    bulletins = [
        Bulletin(
            wall=int(_require(b, "wall", "bulletin")),
            offset_m=float(_require(b, "offset_m", "bulletin")),
            width_m=float(_require(b, "width_m", "bulletin")),
            bottom_m=float(_require(b, "bottom_m", "bulletin")),
            top_m=float(_require(b, "top_m", "bulletin")),
        )
        for b in doc.get("bulletins", [])
    ]
    waypoints = [(float(p[0]), float(p[1])) for p in doc.get("waypoints_m", [])]
    try:
        return HallwayModel(
            boundary=boundary,
            wall_height_m=float(_require(doc, "wall_height_m", "world")),
            doors=doors,
            bulletins=bulletins,
            waypoints=waypoints,
        )
    except (TypeError, IndexError) as exc:
        raise WorldFileError(f"malformed world geometry: {exc}") from exc


def load_world(path: str) -> HallwayModel:
    """Parse a world YAML file; syntax errors surface with line numbers."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise WorldFileError(f"{path}: {exc}") from exc
    return world_from_dict(doc)
