import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evfb.cmax import Iwe
from evfb.evstream import EventStream, Label
from evfb.labeler import (CircleLabel, circle_assignment, circles_from_clusters, connected_components,
                          hot_pixel_mask, label_by_circles, label_hot_pixels, load_circles, run_labeling,
                          save_circles, star_radius)
from evfb.synthgen import SceneConfig, generate_scene_with_truth

from conftest import random_stream


def _flood_fill_clusters(binary):
    """Independent 8-connected component count by BFS."""
    h, w = binary.shape
    seen = np.zeros_like(binary)
    sizes = []
    for y in range(h):
        for x in range(w):
            if binary[y, x] and not seen[y, x]:
                stack, n = [(y, x)], 0
                seen[y, x] = True
                while stack:
                    cy, cx = stack.pop()
                    n += 1
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            ny, nx = cy + dy, cx + dx
                            if 0 <= ny < h and 0 <= nx < w and binary[ny, nx] and not seen[ny, nx]:
                                seen[ny, nx] = True
                                stack.append((ny, nx))
                sizes.append(n)
    return sorted(sizes)


def test_zero_image_no_clusters():
    assert connected_components(Iwe(np.zeros((10, 10)))) == []


def test_two_blobs():
    img = np.zeros((20, 20))
    img[2:5, 2:5] = 10
    img[10:13, 12:15] = 10
    cl = connected_components(img, k=10)
    assert sorted(c.pixel_count for c in cl) == [9, 9] == _flood_fill_clusters(img > 0)
    centers = sorted(c.center for c in cl)
    assert centers[0] == pytest.approx((3.0, 3.0)) and centers[1] == pytest.approx((13.0, 11.0))


def test_single_bright_pixel():
    img = np.zeros((8, 8))
    img[5, 2] = 7
    (c,) = connected_components(img, k=10)
    assert c.center == (2.0, 5.0) and c.pixel_count == 1


def test_diagonal_is_connected():
    img = np.zeros((5, 5))
    img[1, 1] = img[2, 2] = 5
    assert len(connected_components(img, k=100)) == 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_cca_matches_flood_fill(seed):
    rng = np.random.default_rng(seed)
    img = rng.poisson(0.7, size=(15, 18)).astype(float)
    k = float(rng.integers(1, 100))
    active = img[img > 0]
    cl = connected_components(img, k)
    if active.size == 0:
        assert cl == []
        return
    binary = img >= np.quantile(active, 1 - k / 100)
    binary &= img > 0
    assert sorted(c.pixel_count for c in cl) == _flood_fill_clusters(binary)


def test_k_out_of_range():
    with pytest.raises(ValueError):
        connected_components(np.ones((2, 2)), k=120)


def test_no_circles_keeps_everything():
    s = random_stream(0, n=50)
    cap, rest = label_by_circles(s, [], (0, 0))
    assert len(cap) == 0 and rest == s


def test_boundary_is_inside():
    s = EventStream(20, 20, [0], [8], [5], [1])
    cap, rest = label_by_circles(s, [CircleLabel(5, 5, 3, 1)], (0, 0))
    assert len(cap) == 1 and len(rest) == 0 and cap.label[0] == 1


def test_first_circle_wins():
    s = EventStream(20, 20, [0], [5], [5], [1])
    hit = circle_assignment(s, [CircleLabel(5, 5, 2, 3), CircleLabel(5, 5, 2, 1)], (0, 0))
    assert hit[0] == 0


def test_circle_validation():
    with pytest.raises(ValueError):
        CircleLabel(0, 0, 0, 1)
    with pytest.raises(ValueError):
        CircleLabel(0, 0, 1, 7)


def test_circles_json(tmp_path):
    cs = [CircleLabel(1.5, 2, 3, 3), CircleLabel(10, 11, 4, 1)]
    save_circles(cs, tmp_path / "c.json")
    assert load_circles(tmp_path / "c.json") == cs


def test_star_radius_clipped():
    assert star_radius(20, 10) == 2.0
    assert star_radius(0, 20) == 12.0
    assert star_radius(9, 10) == pytest.approx(3.5)


def test_satellite_capture_rate():
    cfg = SceneConfig(n_stars=0, n_hot_pixels=0, background_rate=0, n_satellites=1,
                      satellite_velocities=[(-60.0, 8.0)], duration=10, jitter=0.7, seed=6)
    s, truth = generate_scene_with_truth(cfg)
    sat = truth.satellites[0]
    t_ref = int(s.t[0])
    cx, cy = sat.position(t_ref / 1e6)
    cap, _ = label_by_circles(s, [CircleLabel(cx, cy, 3, 1)], sat.velocity, t_ref)
    assert len(cap) >= 0.99 * len(s)


def test_uniform_counts_no_hot_pixels():
    s = EventStream(10, 10, np.arange(20), np.arange(20) % 10, np.arange(20) // 10, np.ones(20, int))
    assert not hot_pixel_mask(s).any()


def test_one_bright_pixel_among_100():
    xs = list(range(100)) + [5] * 999
    ys = [0] * 100 + [1] * 999
    n = len(xs)
    s = EventStream(100, 2, np.arange(n), xs, ys, np.ones(n, int))
    hot, rest = label_hot_pixels(s, 98)
    assert len(hot) == 999 and np.all(hot.label == Label.HOT_PIXEL)
    assert np.all(rest.label == Label.NOISE)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000))
def test_hot_pixels_order_invariant(seed):
    s = random_stream(seed, n=400, width=8, height=8)
    perm = np.random.default_rng(seed).permutation(len(s))
    shuffled_mask = hot_pixel_mask(EventStream(8, 8, np.arange(len(s)), s.x[perm], s.y[perm], s.p[perm],
                                               validate=True))
    assert np.array_equal(hot_pixel_mask(s)[perm], shuffled_mask)


def test_planted_hot_pixels_found():
    cfg = SceneConfig(n_stars=0, n_satellites=0, n_hot_pixels=20, hot_rate_range=(1.0, 3.0),
                      background_rate=0.01, duration=10, seed=8)
    s, _ = generate_scene_with_truth(cfg)
    hot, _ = label_hot_pixels(s)
    truth_hot = s.label == Label.HOT_PIXEL
    mask = hot_pixel_mask(s)
    assert mask[truth_hot].mean() >= 0.95


def test_empty_circle_lists_give_noise_and_hot_only():
    s = random_stream(1, n=500)
    out = run_labeling(s, [], [], (0, 0), (0, 0))
    assert set(np.unique(out.label)) <= {0, 2}


def test_single_event_conserved():
    s = EventStream(5, 5, [3], [1], [1], [1])
    out = run_labeling(s, [], [], (0, 0), (0, 0))
    assert len(out) == 1


def test_conflict_warns_and_star_wins(caplog):
    s = EventStream(20, 20, [0, 10], [5, 15], [5, 15], [1, 1])
    out = run_labeling(s, [CircleLabel(5, 5, 2, 3)], [CircleLabel(5, 5, 2, 1)], (0, 0), (0, 0))
    assert out.label[0] == Label.STAR
    assert "both star and satellite" in caplog.text


def test_oracle_circles_reproduce_generator_labels():
    cfg = SceneConfig(n_satellites=1, satellite_velocities=[(-55.0, 6.0)], duration=10,
                      n_hot_pixels=60, hot_rate_range=(1.0, 20.0), jitter=0.7, seed=12)
    s, truth = generate_scene_with_truth(cfg)
    t_ref = int(s.t[0])
    stars = []
    for st_ in truth.stars:
        cx, cy = st_.position(t_ref / 1e6)
        stars.append(CircleLabel(cx, cy, 3.5, int(Label.STAR)))
    sat = truth.satellites[0]
    sx, sy = sat.position(t_ref / 1e6)
    out = run_labeling(s.without_labels(), stars, [CircleLabel(sx, sy, 3.5, 1)],
                       truth.stars[0].velocity, sat.velocity)
    assert np.mean(out.label == s.label) >= 0.95
