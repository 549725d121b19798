import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from robotids.geometry import (EMPTY, Region, SectorSpec, area, contains_point, difference, disjoint_parts,
                               intersect, is_empty, is_subset, region_equal, region_from_disc,
                               region_from_polygon, region_from_rect, region_from_sector, square, union)
from robotids.oracles import sampled_subset


def rect(x0, x1, y0, y1):
    return region_from_rect(x0, x1, y0, y1)


coord = st.integers(-6, 6).map(float)


@st.composite
def rects(draw):
    x0, y0 = draw(coord), draw(coord)
    return rect(x0, x0 + draw(st.integers(1, 5)), y0, y0 + draw(st.integers(1, 5)))


@st.composite
def regions(draw):
    return union(*draw(st.lists(rects(), min_size=0, max_size=3)))


def test_rect_area_and_bounds():
    r = rect(0, 2, 0, 3)
    assert area(r) == pytest.approx(6.0)
    assert r.bounds() == (0, 0, 2, 3)
    assert EMPTY.bounds() is None


def test_degenerate_inputs_rejected():
    with pytest.raises(ValueError):
        rect(1, 1, 0, 2)
    with pytest.raises(ValueError):
        Region((((0, 0), (1, 0)),))
    with pytest.raises(ValueError):
        Region((((0, 0), (1, 0), (math.nan, 1)),))
    with pytest.raises(ValueError):
        region_from_polygon([(0, 0), (2, 0), (1, 0.5), (2, 2), (0, 2)])
    with pytest.raises(ValueError):
        region_from_disc((0, 0), 0.0)
    with pytest.raises(ValueError):
        SectorSpec((0, 0), 1.0, 0.0, 1.0, 0.5)


def test_polygon_orientation_normalized():
    cw = region_from_polygon([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert area(cw) == pytest.approx(1.0)


def test_overlapping_union_area_counts_once():
    r = union(rect(0, 2, 0, 2), rect(1, 3, 0, 2))
    assert area(r) == pytest.approx(6.0)
    assert area(disjoint_parts(r)) == pytest.approx(6.0)


def test_intersection_and_difference():
    a, b = rect(0, 2, 0, 2), rect(1, 3, 1, 3)
    assert area(intersect(a, b)) == pytest.approx(1.0)
    assert area(difference(a, b)) == pytest.approx(3.0)
    assert is_empty(intersect(a, rect(5, 6, 5, 6)))
    assert difference(a, EMPTY) is a


def test_intersection_of_overlapping_parts_stays_small():
    a = union(rect(0, 3, 0, 3), rect(1, 4, 1, 4))
    r = a
    for _ in range(6):
        r = intersect(r, a)
    assert len(r) <= 3
    assert region_equal(r, a)


def test_subset_and_equality():
    a = rect(0, 1, 0, 1)
    b = union(rect(0, 0.5, 0, 1), rect(0.5, 1, 0, 1))
    assert is_subset(a, b) and is_subset(b, a)
    assert region_equal(a, b)
    assert not is_subset(rect(0, 2, 0, 1), a)
    assert is_subset(EMPTY, a)


def test_subset_tolerance():
    a = rect(0, 1, 0, 1)
    sliver = union(a, rect(1, 1 + 1e-11, 0, 1))
    assert is_subset(sliver, a)
    assert not is_subset(sliver, a, area_tol=0.0)
    with pytest.raises(ValueError):
        is_subset(a, a, area_tol=-1.0)


def test_contains_point_closed():
    a = rect(0, 1, 0, 1)
    assert contains_point(a, (1.0, 0.5))
    assert contains_point(a, (0.5, 0.5))
    assert not contains_point(a, (1.1, 0.5))


def test_sector_is_inscribed():
    spec = SectorSpec((1.0, 2.0), 3.0, 0.4, -math.pi / 2, math.pi / 4, 32)
    s = region_from_sector(spec)
    exact = 0.5 * 9.0 * (3 * math.pi / 4)
    assert area(s) < exact
    assert area(s) == pytest.approx(exact, rel=5e-3)
    for poly in s.parts:
        for x, y in poly:
            assert math.hypot(x - 1.0, y - 2.0) <= 3.0 + 1e-9


def test_wide_sector_is_split_into_convex_slices():
    s = region_from_sector(SectorSpec((0, 0), 1.0, 0.0, -2.5, 2.5, 32))
    assert len(s) == 2
    full = region_from_sector(SectorSpec((0, 0), 1.0, 0.0, -math.pi, math.pi, 32))
    assert area(full) == pytest.approx(area(region_from_disc((0, 0), 1.0, 32)), rel=1e-9)


def test_outer_disc_contains_inner():
    inner = region_from_disc((0, 0), 2.0, 16)
    outer = region_from_disc((0, 0), 2.0, 16, outer=True)
    assert is_subset(inner, outer)
    assert area(outer) > math.pi * 4 > area(inner)


def test_json_round_trip():
    r = union(square((1, 1), 0.5), region_from_disc((3, 3), 1.0, 12))
    back = Region.from_json(r.to_json())
    assert region_equal(r, back)


@settings(max_examples=60, deadline=None)
@given(regions(), regions())
def test_boolean_algebra_areas(a, b):
    inter = intersect(a, b)
    diff = difference(a, b)
    assert area(inter) + area(diff) == pytest.approx(area(a), abs=1e-7)
    assert is_subset(inter, a) and is_subset(inter, b)
    assert is_empty(intersect(diff, b))
    assert region_equal(intersect(a, b), intersect(b, a))


@settings(max_examples=40, deadline=None)
@given(regions(), regions())
def test_subset_agrees_with_sampling(a, b):
    rng = random.Random(0)
    if is_subset(a, b):
        assert sampled_subset(a, b, rng, 300)
    if not sampled_subset(a, b, rng, 300):
        assert not is_subset(a, b)


def test_full_disc_area():
    full = region_from_sector(SectorSpec((0, 0), 1.0, 0.0, -math.pi, math.pi, 64))
    assert area(full) == pytest.approx(math.pi, rel=3e-3)


def test_quarter_sector_points_satisfy_sector_inequalities():
    d = 3.0
    spec = SectorSpec((0.0, 0.0), d, 0.7, 0.0, math.pi / 2, 32)
    s = region_from_sector(spec)
    rng = random.Random(3)
    hits = 0
    while hits < 500:
        p = (rng.uniform(-d, d), rng.uniform(-d, d))
        if not contains_point(s, p, 0.0):
            continue
        hits += 1
        bearing = math.remainder(math.atan2(p[1], p[0]) - spec.heading, 2 * math.pi)
        assert math.hypot(*p) <= d + 1e-9
        assert -1e-9 <= bearing <= math.pi / 2 + 1e-9


@pytest.mark.parametrize("span, n", [(math.pi / 2, 32), (3 * math.pi / 4, 32), (2 * math.pi, 8), (1.0, 8)])
def test_sector_area_error_bound(span, n):
    s = region_from_sector(SectorSpec((0, 0), 2.0, 0.0, -span / 2, span / 2, n))
    exact = 0.5 * 4.0 * span
    phi = span / n     # central angle of one polygon triangle
    assert exact - area(s) <= exact * (1 - math.sin(phi) / phi) + 1e-12


def test_sector_inside_disc_at_equal_segments():
    for n in (8, 32, 64):
        sec = region_from_sector(SectorSpec((1.0, -1.0), 2.5, 0.3, -math.pi / 2, math.pi / 4, n))
        assert is_subset(sec, region_from_disc((1.0, -1.0), 2.5, n, outer=True))
