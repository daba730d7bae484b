"""Image-space segment geometry and the similarity metrics.

Perceived and expected scenes are compared in the image plane, so every
metric here works on 2-D pixel segments (or, above the edge level, on
centroid/size aggregates of them).  Segments are undirected: angles live
in [0, pi) and angular distances are taken modulo pi.

Each metric returns a (similarity, dissimilarity) pair that sums exactly
to alpha < 1, never to 1: the remainder 1 - alpha is the metric's own
ignorance and ends up on the whole frame when the pair is turned into a
simple evidence function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

Point = Tuple[float, float]


@dataclass(frozen=True)
class Segment2:
    """Undirected line segment in pixel coordinates."""

    p0: Point
    p1: Point

    def __post_init__(self) -> None:
        if self.length <= 0.0:
            raise ValueError(f"degenerate segment at {self.p0}")

    @property
    def length(self) -> float:
        return math.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])

    @property
    def midpoint(self) -> Point:
        return ((self.p0[0] + self.p1[0]) / 2.0, (self.p0[1] + self.p1[1]) / 2.0)

    @property
    def angle(self) -> float:
        """Direction in [0, pi)."""
        theta = math.atan2(self.p1[1] - self.p0[1], self.p1[0] - self.p0[0])
        return theta % math.pi

    def translated(self, dx: float, dy: float) -> "Segment2":
        return Segment2(
            (self.p0[0] + dx, self.p0[1] + dy),
            (self.p1[0] + dx, self.p1[1] + dy),
        )


@dataclass(frozen=True)
class AggregateGeometry:
    """Centroid and accumulated edge length of a grouped element."""

    centroid: Point
    size: float

    def __post_init__(self) -> None:
        if self.size <= 0.0:
            raise ValueError("aggregate size must be positive")


@dataclass(frozen=True)
class PairTransform:
    """Relative placement of segment b with respect to segment a."""

    dtheta: float  # undirected rotation, [0, pi)
    dt: Point  # midpoint offset, pixels
    scale_ref: float  # pair length scale, pixels

    def __post_init__(self) -> None:
        if not 0.0 <= self.dtheta < math.pi:
            raise ValueError(f"dtheta {self.dtheta!r} outside [0, pi)")
        if self.scale_ref <= 0.0:
            raise ValueError("scale_ref must be positive")


@dataclass(frozen=True)
class MetricParams:
    r_max_px: float = 120.0
    alpha: float = 0.9
    sigma_rot: float = 0.2  # radians
    sigma_trans: float = 1.0  # in units of scale_ref

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie strictly inside (0, 1), got {self.alpha!r}")
        for name in ("r_max_px", "sigma_rot", "sigma_trans"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


def mod_pi_distance(a: float, b: float) -> float:
    """Distance between two undirected angles, in [0, pi/2]."""
    d = abs(a - b) % math.pi
    return min(d, math.pi - d)


def similarity(data: Segment2, model: Segment2, params: MetricParams) -> Tuple[float, float]:
    """Location/orientation/length agreement of a data and a model segment.

    The three factors each fall from 1 to 0 as the pair diverges:
    orientation linearly over a quarter turn, midpoint distance linearly
    over r_max, and length as the short/long ratio.  alpha scales the
    committed mass so sim + dissim == alpha exactly.
    """
    s_angle = max(0.0, 1.0 - mod_pi_distance(data.angle, model.angle) / (math.pi / 2.0))
    mid_d, mid_m = data.midpoint, model.midpoint
    dist = math.hypot(mid_d[0] - mid_m[0], mid_d[1] - mid_m[1])
    s_dist = max(0.0, 1.0 - dist / params.r_max_px)
    lengths = sorted((data.length, model.length))
    s_len = lengths[0] / lengths[1]
    s = s_angle * s_dist * s_len
    return params.alpha * s, params.alpha * (1.0 - s)


def pair_transform(a: Segment2, b: Segment2) -> PairTransform:
    """Rigid relation of b to a: rotation mod pi, midpoint offset, scale.

    The scale is the mean of the two lengths, making the transform (up to
    the sign of dt) symmetric in the pair; relational scores must not
    change when both the data pair and the model pair are swapped
    consistently.
    """
    mid_a, mid_b = a.midpoint, b.midpoint
    dtheta = (b.angle - a.angle) % math.pi
    if dtheta >= math.pi:  # a hair below pi can round up to pi itself
        dtheta = 0.0
    return PairTransform(
        dtheta=dtheta,
        dt=(mid_b[0] - mid_a[0], mid_b[1] - mid_a[1]),
        scale_ref=(a.length + b.length) / 2.0,
    )


def rel_similarity(
    d1: Segment2,
    d2: Segment2,
    m1: Segment2,
    m2: Segment2,
    params: MetricParams,
) -> Tuple[float, float]:
    """How closely the (d1, d2) relation matches the (m1, m2) relation.

    Exponential kernels on the rotation difference and on the
    scale-normalised midpoint offsets; depends only on relative placement,
    so translating either panel rigidly changes nothing.
    """
    td = pair_transform(d1, d2)
    tm = pair_transform(m1, m2)
    rot = mod_pi_distance(td.dtheta, tm.dtheta)
    ox = td.dt[0] / td.scale_ref - tm.dt[0] / tm.scale_ref
    oy = td.dt[1] / td.scale_ref - tm.dt[1] / tm.scale_ref
    r = math.exp(-rot / params.sigma_rot) * math.exp(-math.hypot(ox, oy) / params.sigma_trans)
    return params.alpha * r, params.alpha * (1.0 - r)


def aggregate_similarity(
    data: AggregateGeometry, model: AggregateGeometry, params: MetricParams
) -> Tuple[float, float]:
    """Similarity for grouped elements: centroid distance and size ratio."""
    dist = math.hypot(
        data.centroid[0] - model.centroid[0], data.centroid[1] - model.centroid[1]
    )
    s_dist = max(0.0, 1.0 - dist / params.r_max_px)
    sizes = sorted((data.size, model.size))
    s = s_dist * (sizes[0] / sizes[1])
    return params.alpha * s, params.alpha * (1.0 - s)


def aggregate_rel_similarity(
    d1: AggregateGeometry,
    d2: AggregateGeometry,
    m1: AggregateGeometry,
    m2: AggregateGeometry,
    params: MetricParams,
) -> Tuple[float, float]:
    """Relational similarity for grouped elements (offset term only)."""
    sd = (d1.size + d2.size) / 2.0
    sm = (m1.size + m2.size) / 2.0
    ox = (d2.centroid[0] - d1.centroid[0]) / sd - (m2.centroid[0] - m1.centroid[0]) / sm
    oy = (d2.centroid[1] - d1.centroid[1]) / sd - (m2.centroid[1] - m1.centroid[1]) / sm
    r = math.exp(-math.hypot(ox, oy) / params.sigma_trans)
    return params.alpha * r, params.alpha * (1.0 - r)
