import numpy as np
import pytest

from cropaware.common import InvalidArgument
from cropaware.geometry import (
    Box,
    CropRect,
    Delta,
    crop_box,
    decode,
    encode,
    format_box,
    iou,
    is_rho_member,
    parse_box,
    sample_rho_member,
    touching_sides,
)


def test_encode_matches_definition():
    g = Box(10, 20, 4, 8)
    a = Box(8, 16, 4, 4)
    assert encode(g, a) == Delta(0.5, 1.0, 1.0, 2.0)
    assert encode(a, a) == Delta(0.0, 0.0, 1.0, 1.0)


def test_decode_inverts_encode():
    a = Box(8, 16, 4, 4)
    assert decode(a, Delta(0.5, 1.0, 1.0, 2.0)) == Box(10, 20, 4, 8)
    assert decode(a, Delta(0, 0, 1, 1)) == a


def test_encode_decode_random_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        g = Box(*rng.uniform(-500, 500, 2), *rng.uniform(1, 400, 2))
        a = Box(*rng.uniform(-500, 500, 2), *rng.uniform(1, 400, 2))
        back = decode(a, encode(g, a))
        assert back.cx == pytest.approx(g.cx, rel=1e-9, abs=1e-9)
        assert back.cy == pytest.approx(g.cy, rel=1e-9, abs=1e-9)
        assert back.w == pytest.approx(g.w, rel=1e-9)
        assert back.h == pytest.approx(g.h, rel=1e-9)


def test_non_positive_dims_rejected():
    with pytest.raises(InvalidArgument):
        Box(0, 0, 0, 1)
    with pytest.raises(InvalidArgument):
        Delta(0, 0, 1, -1)
    with pytest.raises(InvalidArgument):
        CropRect(0, 10)


def test_crop_box_cases():
    c = CropRect(400, 400)
    assert crop_box(Box.from_corners(-100, 50, 500, 300), c).corners == (0, 50, 400, 300)
    assert crop_box(Box.from_corners(500, 500, 600, 600), c) is None

    inside = Box(200, 200, 50, 30)
    assert crop_box(inside, c) is inside


def test_crop_box_with_origin():
    c = CropRect(100, 100, 50, 50)
    assert crop_box(Box.from_corners(0, 0, 100, 100), c).corners == (50, 50, 100, 100)


def test_iou():
    b = Box(10, 10, 4, 4)
    assert iou(b, b) == 1.0
    assert iou(b, Box(100, 100, 4, 4)) == 0.0
    original = Box.from_corners(0, 0, 200, 200)
    cropped = crop_box(original, CropRect(200, 100))
    assert iou(cropped, original) == 0.5


def test_touching_sides():
    c = CropRect(400, 400)
    cropped = crop_box(Box.from_corners(-10, 100, 200, 450), c)
    assert touching_sides(cropped, c) == (True, False, False, True)


def test_rho_member_of_inside_box_is_the_box():
    g = Box(200, 200, 50, 30)
    c = CropRect(400, 400)
    assert sample_rho_member(g, c, np.random.default_rng(0)) == g


def test_rho_members_share_the_crop():
    rng = np.random.default_rng(3)
    c = CropRect(300, 200, 10, 20)
    for _ in range(500):
        g = Box.from_corners(*rng.uniform(-100, 150, 2), *rng.uniform(160, 450, 2))
        x = sample_rho_member(g, c, rng)
        assert is_rho_member(x, g, c)


def test_rho_member_fails_for_disjoint_gt():
    with pytest.raises(InvalidArgument):
        sample_rho_member(Box(1000, 1000, 10, 10), CropRect(100, 100), np.random.default_rng(0))


def test_parse_and_format_box():
    assert parse_box("1,2,3,4") == Box(1, 2, 3, 4)
    assert parse_box("0,0,10,20", "corners") == Box(5, 10, 10, 20)
    assert format_box(Box(5, 10, 10, 20), "corners") == "0.0,0.0,10.0,20.0"
    with pytest.raises(InvalidArgument):
        parse_box("1,2,3")
    with pytest.raises(InvalidArgument):
        parse_box("1,2,3,4", "xyxy")
