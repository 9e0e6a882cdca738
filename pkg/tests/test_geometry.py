import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridabs.geometry import (
    Ball,
    Box,
    ball_intersects_box,
    distance_to_set,
    inflate,
    project,
)


def test_inflate_ball_adds_radius():
    out = inflate(Ball([0.0], 1.0), 0.3)
    assert out.radius == pytest.approx(1.3)
    assert np.array_equal(out.center, [0.0])


def test_inflate_zero_is_identity():
    ball = Ball([1.0, 2.0], 0.5)
    out = inflate(ball, 0.0)
    assert out.radius == ball.radius
    box = Box([0.0, 0.0], [1.0, 1.0])
    out = inflate(box, 0.0)
    assert np.array_equal(out.lower, box.lower)
    assert np.array_equal(out.upper, box.upper)


def test_inflate_rejects_negative():
    with pytest.raises(ValueError):
        inflate(Ball([0.0], 1.0), -0.1)


def test_box_inflation_contains_exact_minkowski_sum():
    # Oracle: dense samples of {b + u : b in box, |u| <= c} all land inside.
    box = Box([0.0, 0.0], [1.0, 1.0])
    c = 0.5
    grown = inflate(box, c)
    assert np.allclose(grown.lower, [-0.5, -0.5])
    assert np.allclose(grown.upper, [1.5, 1.5])
    rng = np.random.default_rng(0)
    base = box.sample(rng, size=2000)
    angles = rng.uniform(0, 2 * np.pi, size=2000)
    radii = c * np.sqrt(rng.random(2000))
    pts = base + np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=-1)
    assert bool(np.all(grown.contains(pts)))


def test_inflation_semigroup_equality():
    ball = Ball([0.5, -1.0], 0.7)
    twice = inflate(inflate(ball, 0.2), 0.3)
    once = inflate(ball, 0.5)
    assert twice.radius == pytest.approx(once.radius)
    box = Box([0.0], [1.0])
    twice = inflate(inflate(box, 0.2), 0.3)
    once = inflate(box, 0.5)
    assert np.allclose(twice.lower, once.lower)
    assert np.allclose(twice.upper, once.upper)


def test_distance_interior_point_is_zero():
    assert distance_to_set([0.5, 0.5], Box([0.0, 0.0], [1.0, 1.0])) == 0.0


def test_distance_face():
    assert distance_to_set([2.0, 0.0], Box([0.0, 0.0], [1.0, 1.0])) == pytest.approx(1.0)


def test_distance_corner_matches_brute_force():
    box = Box([0.0, 0.0], [1.0, 1.0])
    x = np.array([2.0, 2.0])
    grid = np.linspace(0.0, 1.0, 401)
    gx, gy = np.meshgrid(grid, grid)
    pts = np.stack([gx.reshape(-1), gy.reshape(-1)], axis=-1)
    brute = np.min(np.linalg.norm(pts - x, axis=-1))
    assert distance_to_set(x, box) == pytest.approx(np.sqrt(2.0), abs=1e-12)
    assert distance_to_set(x, box) == pytest.approx(brute, abs=1e-6)


def test_distance_dimension_mismatch():
    with pytest.raises(ValueError):
        distance_to_set([1.0, 2.0, 3.0], Box([0.0], [1.0]))


def test_distance_zero_iff_member():
    box = Box([0.0, 0.0], [1.0, 1.0])
    rng = np.random.default_rng(5)
    pts = rng.uniform(-1.0, 2.0, size=(500, 2))
    for p in pts:
        inside = bool(box.contains(p))
        assert (distance_to_set(p, box) == 0.0) == inside


def test_project_identity_inside():
    ball = Ball([0.0, 0.0], 1.0)
    x = np.array([0.3, -0.4])
    assert np.allclose(project(x, ball), x)
    box = Box([0.0], [1.0])
    assert project(np.array([0.5]), box)[0] == 0.5


def test_project_ball_radial():
    out = project(np.array([3.0, 0.0]), Ball([0.0, 0.0], 1.0))
    assert np.allclose(out, [1.0, 0.0])


def test_project_box_matches_grid_search():
    box = Box([-1.0, 0.0], [1.0, 2.0])
    rng = np.random.default_rng(42)
    grid = np.linspace(0.0, 1.0, 301)
    gx, gy = np.meshgrid(grid, grid)
    candidates = np.stack(
        [box.lower[0] + 2.0 * gx.reshape(-1), box.lower[1] + 2.0 * gy.reshape(-1)],
        axis=-1,
    )
    for x in rng.uniform(-3.0, 3.0, size=(20, 2)):
        best = candidates[np.argmin(np.linalg.norm(candidates - x, axis=-1))]
        assert np.linalg.norm(project(x, box) - best) < 1e-2
        assert np.linalg.norm(x - project(x, box)) <= np.linalg.norm(x - best) + 1e-6


def test_project_idempotent():
    ball = Ball([1.0, 1.0], 2.0)
    x = np.array([9.0, -4.0])
    once = project(x, ball)
    assert np.allclose(project(once, ball), once)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-10, 10), min_size=2, max_size=2),
    st.lists(st.floats(-10, 10), min_size=2, max_size=2),
)
def test_projection_is_nonexpansive(xs, ys):
    ball = Ball([0.0, 0.0], 1.5)
    box = Box([-1.0, -2.0], [0.5, 0.5])
    x, y = np.array(xs), np.array(ys)
    for region in (ball, box):
        px, py = project(x, region), project(y, region)
        assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-12


def test_ball_intersects_box_center_inside():
    assert ball_intersects_box(Ball([0.5, 0.5], 0.01), Box([0.0, 0.0], [1.0, 1.0]))


def test_ball_intersects_box_far_ball():
    assert not ball_intersects_box(Ball([2.0, 0.0], 0.5), Box([0.0, 0.0], [1.0, 1.0]))


def test_ball_intersects_box_corner_witness():
    # Oracle: dense sampling of the ball finds a point inside the box.
    ball = Ball([1.4, 1.4], 0.6)
    box = Box([0.0, 0.0], [1.0, 1.0])
    assert ball_intersects_box(ball, box)
    rng = np.random.default_rng(1)
    angles = rng.uniform(0, 2 * np.pi, 20000)
    radii = ball.radius * np.sqrt(rng.random(20000))
    pts = ball.center + np.stack(
        [radii * np.cos(angles), radii * np.sin(angles)], axis=-1
    )
    assert bool(np.any(box.contains(pts)))


def test_ball_radius_must_be_nonnegative():
    with pytest.raises(ValueError):
        Ball([0.0], -1.0)


def test_box_ordering_enforced():
    with pytest.raises(ValueError):
        Box([1.0], [0.0])
