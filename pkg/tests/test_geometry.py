"""Tests for segment geometry and the similarity metrics."""

from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from scenematch.geometry import (
    AggregateGeometry,
    MetricParams,
    Segment2,
    aggregate_rel_similarity,
    aggregate_similarity,
    mod_pi_distance,
    pair_transform,
    rel_similarity,
    similarity,
)

PARAMS = MetricParams()


def seg(x0, y0, x1, y1):
    return Segment2((x0, y0), (x1, y1))


class TestSegment2:
    def test_basic_properties(self):
        s = seg(0, 0, 10, 0)
        assert s.length == pytest.approx(10.0)
        assert s.midpoint == (5.0, 0.0)
        assert s.angle == pytest.approx(0.0)

    def test_angle_is_undirected(self):
        assert seg(0, 0, -5, -5).angle == pytest.approx(seg(0, 0, 5, 5).angle)

    def test_degenerate_segment_rejected(self):
        with pytest.raises(ValueError):
            seg(3, 4, 3, 4)


class TestMetricParams:
    def test_alpha_must_stay_below_one(self):
        with pytest.raises(ValueError):
            MetricParams(alpha=1.0)
        with pytest.raises(ValueError):
            MetricParams(alpha=1.2)


class TestSimilarity:
    def test_identical_segments_score_alpha(self):
        s = seg(10, 20, 110, 20)
        sim, dissim = similarity(s, s, PARAMS)
        assert sim == pytest.approx(PARAMS.alpha)
        assert dissim == pytest.approx(0.0)

    def test_quarter_of_a_right_angle_halves_score(self):
        # same midpoint and length, rotated by pi/4 -> s_angle = 0.5
        a = seg(-50, 0, 50, 0)
        c, s = 50 * math.cos(math.pi / 4), 50 * math.sin(math.pi / 4)
        b = Segment2((-c, -s), (c, s))
        sim, dissim = similarity(a, b, PARAMS)
        assert sim == pytest.approx(0.45, abs=1e-9)
        assert dissim == pytest.approx(0.45, abs=1e-9)

    def test_far_apart_segments_score_zero(self):
        a = seg(0, 0, 10, 0)
        b = seg(0, 500, 10, 500)
        sim, dissim = similarity(a, b, PARAMS)
        assert sim == 0.0
        assert dissim == pytest.approx(PARAMS.alpha)

    @given(
        st.floats(-200, 200), st.floats(-200, 200),
        st.floats(-200, 200), st.floats(-200, 200),
        st.floats(1, 100), st.floats(1, 100),
        st.floats(0, math.pi), st.floats(0, math.pi),
    )
    def test_sum_is_exactly_alpha(self, x0, y0, x1, y1, l0, l1, t0, t1):
        a = Segment2((x0, y0), (x0 + l0 * math.cos(t0), y0 + l0 * math.sin(t0)))
        b = Segment2((x1, y1), (x1 + l1 * math.cos(t1), y1 + l1 * math.sin(t1)))
        sim, dissim = similarity(a, b, PARAMS)
        assert sim + dissim == pytest.approx(PARAMS.alpha, abs=1e-12)
        assert sim >= 0.0 and dissim >= 0.0


class TestPairTransform:
    def test_identity_pair(self):
        s = seg(5, 5, 25, 5)
        t = pair_transform(s, s)
        assert t.dtheta == pytest.approx(0.0)
        assert t.dt == (0.0, 0.0)
        assert t.scale_ref == pytest.approx(s.length)

    def test_perpendicular_offset_pair(self):
        a = seg(-5, 0, 5, 0)
        b = seg(5, -5, 5, 5)
        t = pair_transform(a, b)
        assert t.dtheta == pytest.approx(math.pi / 2)
        assert t.dt == (5.0, 0.0)


class TestRelSimilarity:
    def test_congruent_pairs_score_alpha(self):
        d1, d2 = seg(0, 0, 40, 0), seg(60, 10, 60, 50)
        m1, m2 = d1.translated(300, 120), d2.translated(300, 120)
        sim, dissim = rel_similarity(d1, d2, m1, m2, PARAMS)
        assert sim == pytest.approx(PARAMS.alpha, abs=1e-12)
        assert dissim == pytest.approx(0.0, abs=1e-12)

    def test_rotated_by_sigma_scores_inverse_e(self):
        d1 = seg(-20, 0, 20, 0)
        rot = PARAMS.sigma_rot
        d2 = Segment2(
            (-20 * math.cos(rot), -20 * math.sin(rot)),
            (20 * math.cos(rot), 20 * math.sin(rot)),
        )
        m1, m2 = d1, d1  # model pair with dtheta 0 and identical offsets
        sim, _ = rel_similarity(d1, d2, m1, m2, PARAMS)
        assert sim == pytest.approx(PARAMS.alpha * math.exp(-1.0), abs=1e-9)

    def test_translation_invariance(self):
        d1, d2 = seg(0, 0, 30, 10), seg(50, 5, 20, 45)
        m1, m2 = seg(3, 7, 33, 17), seg(53, 12, 23, 52)
        base = rel_similarity(d1, d2, m1, m2, PARAMS)
        shifted = rel_similarity(
            d1.translated(17, -40), d2.translated(17, -40),
            m1.translated(-8, 3), m2.translated(-8, 3),
            PARAMS,
        )
        assert base[0] == pytest.approx(shifted[0], abs=1e-12)

    def test_consistent_swap_symmetry(self):
        d1, d2 = seg(0, 0, 30, 10), seg(50, 5, 20, 45)
        m1, m2 = seg(3, 7, 40, 17), seg(53, 12, 23, 60)
        forward = rel_similarity(d1, d2, m1, m2, PARAMS)
        swapped = rel_similarity(d2, d1, m2, m1, PARAMS)
        assert forward[0] == pytest.approx(swapped[0], abs=1e-12)

    def test_swap_symmetry_with_axis_aligned_pairs(self):
        # dtheta lands on 0 for one pair; the mod-pi distance keeps the
        # swapped call consistent.
        d1, d2 = seg(0, 0, 30, 0), seg(50, 5, 80, 5)
        m1, m2 = seg(0, 0, 30, 2), seg(50, 5, 80, 8)
        forward = rel_similarity(d1, d2, m1, m2, PARAMS)
        swapped = rel_similarity(d2, d1, m2, m1, PARAMS)
        assert forward[0] == pytest.approx(swapped[0], abs=1e-12)


class TestModPiDistance:
    def test_wraps_around_pi(self):
        assert mod_pi_distance(0.05, math.pi - 0.05) == pytest.approx(0.1)

    @given(st.floats(0, math.pi), st.floats(0, math.pi))
    def test_bounded_and_symmetric(self, a, b):
        d = mod_pi_distance(a, b)
        assert 0.0 <= d <= math.pi / 2 + 1e-12
        assert d == pytest.approx(mod_pi_distance(b, a))


class TestAggregates:
    def test_identical_aggregates_score_alpha(self):
        g = AggregateGeometry((320.0, 240.0), 400.0)
        sim, dissim = aggregate_similarity(g, g, PARAMS)
        assert sim == pytest.approx(PARAMS.alpha)
        assert dissim == pytest.approx(0.0)

    def test_rel_similarity_congruent(self):
        a1 = AggregateGeometry((100.0, 100.0), 300.0)
        a2 = AggregateGeometry((260.0, 140.0), 280.0)
        sim, _ = aggregate_rel_similarity(a1, a2, a1, a2, PARAMS)
        assert sim == pytest.approx(PARAMS.alpha)

    def test_sum_is_alpha(self):
        a = AggregateGeometry((10.0, 20.0), 50.0)
        b = AggregateGeometry((500.0, 400.0), 120.0)
        sim, dissim = aggregate_similarity(a, b, PARAMS)
        assert sim + dissim == pytest.approx(PARAMS.alpha, abs=1e-12)
