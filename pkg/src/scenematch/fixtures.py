"""Synthetic box-drawing fixture: three visible faces of a cube.

A hexagonal outline with three internal edges meeting at the centre is
the classic wireframe of a cube seen corner-on: nine distinct edges, each
internal edge shared by two of the three visible faces.  The model panel
carries the drawing itself; the data panel carries a congruent copy in
which four of the outline edges arrive fragmented in two pieces (with a
gap too wide for the merger), giving thirteen data edges.

Used by the self-test command and throughout the test suite, where the
returned generator map is the ground truth a run must reproduce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .blackboard import Blackboard, Element, Level, Panel
from .geometry import Segment2

Point = Tuple[float, float]

CENTRE: Point = (320.0, 240.0)
RADIUS = 140.0
FRAGMENT_SPAN = 0.42  # each fragment covers this fraction of its edge


@dataclass
class CubeScene:
    bb: Blackboard
    model_edges: List[str]
    model_faces: List[str]
    model_object: str
    model_scene: str
    data_edges: List[str]
    generator: Dict[str, str]  # data edge id -> model edge id that produced it


def _hexagon() -> List[Point]:
    points = []
    for k in range(6):
        theta = math.radians(30.0 + 60.0 * k)
        points.append(
            (CENTRE[0] + RADIUS * math.cos(theta), CENTRE[1] + RADIUS * math.sin(theta))
        )
    return points


def _cube_edges() -> Tuple[List[Tuple[Point, Point]], List[List[int]]]:
    """Nine undirected edges and the per-face edge index lists."""
    h = _hexagon()
    c = CENTRE
    edges = [
        (c, h[0]),  # 0 internal
        (c, h[2]),  # 1 internal
        (c, h[4]),  # 2 internal
        (h[0], h[1]),  # 3 outline
        (h[1], h[2]),  # 4 outline
        (h[2], h[3]),  # 5 outline
        (h[3], h[4]),  # 6 outline
        (h[4], h[5]),  # 7 outline
        (h[5], h[0]),  # 8 outline
    ]
    faces = [
        [0, 3, 4, 1],  # centre, h0, h1, h2
        [1, 5, 6, 2],  # centre, h2, h3, h4
        [2, 7, 8, 0],  # centre, h4, h5, h0
    ]
    return edges, faces


def insert_edge(
    bb: Blackboard, panel: Panel, p0: Point, p1: Point
) -> Element:
    v0 = bb.insert_element(
        Element(bb.make_id(panel, Level.VERTEX), panel, Level.VERTEX, geometry=p0)
    )
    v1 = bb.insert_element(
        Element(bb.make_id(panel, Level.VERTEX), panel, Level.VERTEX, geometry=p1)
    )
    return bb.insert_element(
        Element(
            bb.make_id(panel, Level.EDGE),
            panel,
            Level.EDGE,
            children=[v0.id, v1.id],
            geometry=Segment2(p0, p1),
            value=1.0,
        )
    )


def build_cube_scene(
    fragmented_edges: Tuple[int, ...] = (3, 4, 5, 7),
    bb: Optional[Blackboard] = None,
) -> CubeScene:
    """Build the two panels; `fragmented_edges` indexes the nine edges."""
    if bb is None:
        bb = Blackboard()
    edges, faces = _cube_edges()

    model_edges: List[str] = []
    for p0, p1 in edges:
        model_edges.append(insert_edge(bb, Panel.MODEL, p0, p1).id)
    model_faces: List[str] = []
    for face in faces:
        children = [model_edges[i] for i in face]
        face_el = bb.insert_element(
            Element(
                bb.make_id(Panel.MODEL, Level.FACE),
                Panel.MODEL,
                Level.FACE,
                children=children,
                geometry=bb.aggregate_of(children),
            )
        )
        model_faces.append(face_el.id)
    model_object = bb.insert_element(
        Element(
            bb.make_id(Panel.MODEL, Level.OBJECT),
            Panel.MODEL,
            Level.OBJECT,
            children=model_faces,
            geometry=bb.aggregate_of(model_faces),
        )
    ).id
    model_scene = bb.insert_element(
        Element(
            bb.make_id(Panel.MODEL, Level.SCENE),
            Panel.MODEL,
            Level.SCENE,
            children=[model_object],
            geometry=bb.aggregate_of([model_object]),
        )
    ).id

    data_edges: List[str] = []
    generator: Dict[str, str] = {}
    for index, (p0, p1) in enumerate(edges):
        if index in fragmented_edges:
            dx, dy = p1[0] - p0[0], p1[1] - p0[1]
            pieces = [
                (p0, (p0[0] + FRAGMENT_SPAN * dx, p0[1] + FRAGMENT_SPAN * dy)),
                ((p1[0] - FRAGMENT_SPAN * dx, p1[1] - FRAGMENT_SPAN * dy), p1),
            ]
        else:
            pieces = [(p0, p1)]
        for q0, q1 in pieces:
            element = insert_edge(bb, Panel.DATA, q0, q1)
            data_edges.append(element.id)
            generator[element.id] = model_edges[index]

    return CubeScene(
        bb=bb,
        model_edges=model_edges,
        model_faces=model_faces,
        model_object=model_object,
        model_scene=model_scene,
        data_edges=data_edges,
        generator=generator,
    )
