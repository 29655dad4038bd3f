"""Overlap geometry against exact values and the rasterization oracle."""

import numpy as np
import pytest

from trax.errors import DegenerateRegionWarning
from trax.geometry import region_overlap
from trax.model import Polygon, Rectangle, Special

from .oracles import random_convex_polygon, rasterized_iou, rect_corners


def test_identity():
    r = Rectangle(0, 0, 2, 2)
    assert region_overlap(r, r) == 1.0


def test_disjoint():
    assert region_overlap(Rectangle(0, 0, 1, 1), Rectangle(5, 5, 1, 1)) == 0.0


def test_exact_one_third():
    # intersection 1x2 = 2, union 4 + 4 - 2 = 6
    value = region_overlap(Rectangle(0, 0, 2, 2), Rectangle(1, 0, 2, 2))
    assert abs(value - 1 / 3) <= 1e-9


def test_rect_vs_equivalent_polygon_is_one():
    rect = Rectangle(1, 2, 3, 4)
    poly = Polygon(((1, 2), (4, 2), (4, 6), (1, 6)))
    assert region_overlap(rect, poly) == 1.0


def test_special_zero_overlaps_nothing():
    assert region_overlap(Special(0), Rectangle(0, 0, 2, 2)) == 0.0
    assert region_overlap(Rectangle(0, 0, 2, 2), Special(0)) == 0.0


def test_special_markers_rejected():
    with pytest.raises(ValueError):
        region_overlap(Special(1), Rectangle(0, 0, 2, 2))


def test_degenerate_polygon_warns_and_is_zero():
    flat = Polygon(((0, 0), (2, 0), (4, 0)))
    with pytest.warns(DegenerateRegionWarning):
        assert region_overlap(flat, Rectangle(0, 0, 2, 2)) == 0.0


def test_touching_rectangles_overlap_zero():
    assert region_overlap(Rectangle(0, 0, 2, 2), Rectangle(2, 0, 2, 2)) == 0.0


def test_nonconvex_falls_back_to_raster():
    # L-shape vs the square covering it; exact areas: L = 3, square = 4.
    l_shape = Polygon(((0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)))
    square = Rectangle(0, 0, 2, 2)
    value = region_overlap(l_shape, square)
    assert abs(value - 3 / 4) <= 5e-3


def test_oracle_agreement_smoke():
    # 150 random convex pairs; the acceptance suite runs the full 1000.
    rng = np.random.RandomState(11)
    for _ in range(150):
        a = random_convex_polygon(rng)
        b = random_convex_polygon(rng)
        got = region_overlap(Polygon(tuple(a)), Polygon(tuple(b)))
        want = rasterized_iou(a, b)
        assert abs(got - want) <= 5e-3


def test_symmetry_and_bounds_random():
    rng = np.random.RandomState(5)
    for _ in range(200):
        a = Polygon(tuple(random_convex_polygon(rng)))
        if rng.rand() < 0.5:
            x, y = rng.uniform(0, 80, 2)
            b = Rectangle(x, y, rng.uniform(1, 40), rng.uniform(1, 40))
        else:
            b = Polygon(tuple(random_convex_polygon(rng)))
        ab = region_overlap(a, b)
        ba = region_overlap(b, a)
        assert ab == ba
        assert 0.0 <= ab <= 1.0


def test_rect_pairs_match_oracle():
    rng = np.random.RandomState(3)
    for _ in range(100):
        ax, ay, bx, by = rng.uniform(0, 50, 4)
        aw, ah, bw, bh = rng.uniform(5, 40, 4)
        got = region_overlap(Rectangle(ax, ay, aw, ah), Rectangle(bx, by, bw, bh))
        want = rasterized_iou(rect_corners(ax, ay, aw, ah), rect_corners(bx, by, bw, bh))
        assert abs(got - want) <= 5e-3
