import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plan2osm.areagraph import AreaGraph, RoomArea
from plan2osm.errors import WrongCase
from plan2osm.ingest import TextAnnotation
from plan2osm.raster import GridTransform
from plan2osm.semantics import (Assignment, AssociationResult, ScoreParams,
                                ScoringContext, apply_assignments,
                                associate_texts, score_inside, score_nearby)


def rect(x0, y0, x1, y1):
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]


def square_ctx(p, side=100.0):
    return ScoringContext.build(p, rect(0, 0, side, side))


def ctx_with_rho(rho):
    """Context with an exact rho value for formula evaluation."""
    s = 100.0
    return ScoringContext(p=(rho * s, 0.0), polygon=rect(0, 0, 1, 1),
                          centroid=(0.0, 0.0), area=math.pi * s * s,
                          char_radius=s, d_center=rho * s, d_boundary=0.0,
                          rho=rho, inside=True)


class TestScoreInside:
    def test_centroid_scores_100(self):
        assert score_inside(ctx_with_rho(0.0)) == pytest.approx(100.0, abs=1e-9)

    def test_rho_at_limit(self):
        # the boundary value takes the first branch, with its 65 -> 50 jump
        assert score_inside(ctx_with_rho(0.7)) == pytest.approx(65.0, abs=1e-9)
        assert score_inside(ctx_with_rho(0.7 + 1e-12)) < 50.1

    def test_rho_above_limit(self):
        # rho = 1.1 needs a point still inside: char radius of the square
        # is ~0.56 side, so 1.1*S < side/2 fails on the x axis; use a thin
        # rectangle where the centroid distance grows while staying inside
        poly = rect(0, 0, 400, 10)
        ctx = ScoringContext.build((200 + 1.1 * math.sqrt(4000 / math.pi), 5), poly)
        assert ctx.inside
        assert ctx.rho == pytest.approx(1.1, rel=1e-9)
        assert score_inside(ctx) == pytest.approx(40.0, abs=1e-9)

    def test_score_can_go_negative(self):
        poly = rect(0, 0, 400, 10)
        s = math.sqrt(4000 / math.pi)
        ctx = ScoringContext.build((200 + 3.0 * s, 5), poly)
        assert ctx.inside
        assert score_inside(ctx) == pytest.approx(-7.5, abs=1e-9)

    def test_outside_point_is_wrong_case(self):
        ctx = ScoringContext.build((500.0, 500.0), rect(0, 0, 100, 100))
        with pytest.raises(WrongCase):
            score_inside(ctx)

    def test_boundary_counts_as_inside(self):
        ctx = ScoringContext.build((100.0, 50.0), rect(0, 0, 100, 100))
        assert ctx.inside
        score_inside(ctx)  # must not raise

    @given(st.floats(0.0, 0.69), st.floats(0.001, 0.069))
    @settings(max_examples=100, deadline=None)
    def test_strictly_decreasing_first_branch(self, rho, delta):
        poly = rect(0, 0, 400, 10)
        s = math.sqrt(4000 / math.pi)
        a = ScoringContext.build((200 + rho * s, 5), poly)
        b = ScoringContext.build((200 + (rho + delta) * s, 5), poly)
        assert score_inside(a) > score_inside(b)

    def test_scale_covariance(self):
        # rho is dimensionless: scaling all coordinates by k preserves it
        for k in (0.5, 3.0, 17.0):
            a = ScoringContext.build((140.0, 100.0), rect(0, 0, 200, 200))
            b = ScoringContext.build((140.0 * k, 100.0 * k),
                                     rect(0, 0, 200 * k, 200 * k))
            assert score_inside(a) == pytest.approx(score_inside(b), abs=1e-9)


class TestScoreNearby:
    def near_ctx(self, area_side, d_b):
        poly = rect(0, 0, area_side, area_side)
        return ScoringContext.build((-d_b, area_side / 2), poly)

    def test_limiting_case_small_room_zero_distance(self):
        ctx = self.near_ctx(1e-6, 1e-9)
        assert score_nearby(ctx) == pytest.approx(90.0, abs=1e-6)

    def test_area_90000_zero_distance(self):
        ctx = self.near_ctx(300.0, 1e-12)  # A = 90000 px^2
        assert score_nearby(ctx) == pytest.approx(75.0, abs=1e-6)

    def test_area_90000_half_distance(self):
        ctx = self.near_ctx(300.0, 25.0)
        assert score_nearby(ctx) == pytest.approx(65.0, abs=1e-9)

    def test_inside_point_is_wrong_case(self):
        ctx = square_ctx((50.0, 50.0))
        with pytest.raises(WrongCase):
            score_nearby(ctx)

    def test_beyond_threshold_is_wrong_case(self):
        ctx = self.near_ctx(100.0, 60.0)
        with pytest.raises(WrongCase):
            score_nearby(ctx)

    @given(st.floats(1.0, 48.0), st.floats(0.5, 40.0))
    @settings(max_examples=100, deadline=None)
    def test_decreasing_in_distance(self, d1, delta):
        d2 = d1 + delta
        if d2 >= 50.0:
            return
        a = self.near_ctx(100.0, d1)
        b = self.near_ctx(100.0, d2)
        assert score_nearby(a) > score_nearby(b)

    @given(st.floats(10.0, 400.0), st.floats(1.1, 4.0))
    @settings(max_examples=100, deadline=None)
    def test_decreasing_in_area(self, side, factor):
        a = self.near_ctx(side, 10.0)
        b = self.near_ctx(side * factor, 10.0)
        assert score_nearby(a) > score_nearby(b)

    @given(st.floats(1.0, 1000.0), st.floats(0.01, 49.9))
    @settings(max_examples=100, deadline=None)
    def test_range(self, side, d_b):
        score = score_nearby(self.near_ctx(side, d_b))
        assert 40.0 < score <= 90.0


class TestAssociate:
    def test_text_at_centroid(self):
        rooms = {1: rect(0, 0, 100, 100)}
        texts = [TextAnnotation("Office", (50.0, 50.0), "T")]
        result = associate_texts(texts, rooms)
        assert len(result.assignments) == 1
        a = result.assignments[0]
        assert a.room_id == 1
        assert a.score == pytest.approx(100.0)
        assert a.case == "inside"

    def test_far_text_unassigned(self):
        rooms = {1: rect(0, 0, 100, 100)}
        texts = [TextAnnotation("hvac note", (200.0, 50.0), "T")]  # d_b = 100
        result = associate_texts(texts, rooms, ScoreParams(d_max=50.0))
        assert result.assignments == []
        assert len(result.unassigned) == 1

    def test_nearby_small_room_beats_inside_big_room(self):
        # inside the big room at rho=1.9 scores 20; 5 px from the small
        # room (A=10000) scores ~87.1, so the small room wins
        big = rect(0, 0, 1000, 20)  # A = 20000, S = 79.8
        s_big = math.sqrt(20000 / math.pi)
        p = (500 + 1.9 * s_big, 10)
        small_x = p[0] + 5
        small = rect(small_x, -40, small_x + 100, 60)  # A = 10000, 5 px right
        ctx_big = ScoringContext.build(p, big)
        assert ctx_big.inside and ctx_big.rho == pytest.approx(1.9, rel=1e-6)
        result = associate_texts([TextAnnotation("Lab", p, "T")],
                                 {1: big, 2: small})
        assert result.assignments[0].room_id == 2
        assert result.assignments[0].score == pytest.approx(
            40 + 30 / (1 + math.log10(2)) + 20 * 0.9, abs=1e-6)

    def test_tie_breaks_to_smaller_area_then_lower_id(self):
        # identical squares, text exactly between them at equal distance
        a = rect(0, 0, 100, 100)
        b = rect(110, 0, 210, 100)
        result = associate_texts([TextAnnotation("X", (105.0, 50.0), "T")],
                                 {2: b, 1: a})
        assert result.assignments[0].room_id == 1  # equal area: lower id

    def test_each_text_assigned_at_most_once(self):
        rooms = {1: rect(0, 0, 100, 100), 2: rect(100, 0, 200, 100)}
        texts = [TextAnnotation("A", (50.0, 50.0), "T"),
                 TextAnnotation("B", (150.0, 50.0), "T"),
                 TextAnnotation("C", (75.0, 50.0), "T")]
        result = associate_texts(texts, rooms)
        assert len(result.assignments) == 3


def test_apply_assignments_name_and_extra_text():
    room = RoomArea(1, rect(0, 0, 10, 10), 100.0)
    graph = AreaGraph(rooms=[room], passages=[],
                      transform=GridTransform(0.05, (0.0, 0.0)))
    result = AssociationResult(assignments=[
        Assignment(TextAnnotation("Office 1", (1, 1), "L1"), 1, 90.0, "inside"),
        Assignment(TextAnnotation("copy room", (2, 2), "L2"), 1, 80.0, "inside"),
        Assignment(TextAnnotation("storage", (3, 3), "L2"), 1, 70.0, "inside"),
    ])
    apply_assignments(graph, result)
    assert room.tags["name"] == "Office 1"
    assert room.tags["osmAG:extra_text"] == "copy room;storage"
    assert room.tags["osmAG:textLayer"] == "L1"
