import json
import math

import numpy as np
import pandas as pd
import pytest

from src.metrics import (
    CSV_COLUMNS,
    BinaryMask,
    MetricsReport,
    accuracy,
    add_gaussian_noise,
    boundary,
    confusion_counts,
    dice,
    f1_pixels,
    hd95,
    image_metrics,
    iou,
)
from src.tensor import Tensor
from src.utils.errors import ShapeError


def block(shape, top, left, size=2):
    m = np.zeros(shape, dtype=np.uint8)
    m[top:top + size, left:left + size] = 1
    return m


def brute_force_hd95(p, g):
    def edge(mask):
        h, w = mask.shape
        pts = []
        for i in range(h):
            for j in range(w):
                if not mask[i, j]:
                    continue
                neighbours = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
                if any(not (0 <= a < h and 0 <= b < w) or not mask[a, b] for a, b in neighbours):
                    pts.append((i, j))
        return pts

    def directed(src, dst):
        nearest = [min(math.sqrt((a - c) ** 2 + (b - d) ** 2) for c, d in dst) for a, b in src]
        return float(np.percentile(nearest, 95))

    bp, bg = edge(p.astype(bool)), edge(g.astype(bool))
    if not bp and not bg:
        return 0.0
    if not bp or not bg:
        return math.hypot(*p.shape)
    return max(directed(bp, bg), directed(bg, bp))


def counted_overlap(p, g):
    """Dice and IoU from plain pixel counts; 1.0 for two empty masks."""
    pf, gf = [bool(v) for v in p.ravel()], [bool(v) for v in g.ravel()]
    both = sum(1 for a, b in zip(pf, gf) if a and b)
    either = sum(1 for a, b in zip(pf, gf) if a or b)
    if either == 0:
        return 1.0, 1.0
    return 2 * both / (sum(pf) + sum(gf)), both / either


def random_pairs(rng, n, max_side):
    """n mask pairs; every tenth pair has an empty prediction, ground truth, or both."""
    for i in range(n):
        shape = tuple(int(s) for s in rng.integers(1, max_side + 1, size=2))
        p = rng.uniform(size=shape) < rng.uniform()
        g = rng.uniform(size=shape) < rng.uniform()
        if i % 10 in (0, 2):
            p[:] = False
        if i % 10 in (1, 2):
            g[:] = False
        yield p, g


class TestBinaryMask:
    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            BinaryMask(np.array([[0, 2]]))

    def test_threshold(self):
        mask = BinaryMask.from_array(np.array([[0.2, 0.5], [0.7, 0.1]]), threshold=0.5)
        np.testing.assert_array_equal(mask.values, [[0, 1], [1, 0]])

    def test_rank(self):
        with pytest.raises(ShapeError):
            BinaryMask(np.zeros((2, 2, 2), dtype=np.uint8))


class TestOverlap:
    def test_identical_masks(self):
        m = block((6, 6), 1, 1, 3)
        assert dice(m, m) == pytest.approx(1.0, abs=1e-6)
        assert iou(m, m) == accuracy(m, m) == 1.0
        c = confusion_counts(m, m)
        assert f1_pixels(c.tp, c.fp, c.fn) == 1.0

    def test_disjoint(self):
        assert dice(block((6, 6), 0, 0), block((6, 6), 4, 4)) == pytest.approx(0.0, abs=1e-6)

    def test_half_overlap(self):
        p, g = block((6, 6), 1, 1), block((6, 6), 1, 2)
        assert dice(p, g) == pytest.approx(0.5)
        assert iou(p, g) == pytest.approx(1.0 / 3.0)

    def test_both_empty_scores_one(self):
        empty = np.zeros((4, 4), dtype=np.uint8)
        assert dice(empty, empty) == 1.0
        assert iou(empty, empty) == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            dice(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_random_pairs_match_pixel_counts(self, rng):
        for p, g in random_pairs(rng, 1000, 8):
            d, j, a = dice(p, g), iou(p, g), accuracy(p, g)
            expected_d, expected_j = counted_overlap(p, g)
            assert d == pytest.approx(expected_d, abs=1e-9)
            assert j == pytest.approx(expected_j, abs=1e-9)
            assert 0.0 <= a <= 1.0
            assert d == dice(g, p)
            assert j == iou(g, p)


class TestHd95:
    def test_identical(self):
        m = block((8, 8), 2, 2, 4)
        assert hd95(m, m) == 0.0

    def test_empty_policies(self):
        empty = np.zeros((3, 4), dtype=np.uint8)
        assert hd95(empty, empty) == 0.0
        assert hd95(empty, block((3, 4), 0, 0)) == 5.0

    def test_single_pixels(self):
        p, g = np.zeros((6, 6), dtype=np.uint8), np.zeros((6, 6), dtype=np.uint8)
        p[0, 0] = 1
        g[3, 4] = 1
        assert hd95(p, g) == 5.0

    def test_boundary_of_filled_square(self):
        m = block((5, 5), 0, 0, 4).astype(bool)
        expected = m.copy()
        expected[1:3, 1:3] = False
        np.testing.assert_array_equal(boundary(m), expected)

    def test_matches_brute_force(self, rng):
        for p, g in random_pairs(rng, 1000, 12):
            assert hd95(p, g) == brute_force_hd95(p, g)
            assert hd95(p, g) == hd95(g, p)

    def test_distances_in_small_chunks(self, mocker, rng):
        mocker.patch("src.metrics.hausdorff.MAX_PAIRS", 1)
        for p, g in random_pairs(rng, 50, 12):
            assert hd95(p, g) == brute_force_hd95(p, g)

    def test_large_masks_chunked(self, mocker):
        yy, xx = np.ogrid[:512, :512]
        p = (yy - 256) ** 2 + (xx - 256) ** 2 <= 150 ** 2
        g = (yy - 262) ** 2 + (xx - 250) ** 2 <= 140 ** 2
        whole = hd95(p, g)
        mocker.patch("src.metrics.hausdorff.MAX_PAIRS", 5000)
        assert hd95(p, g) == whole
        assert 6.0 < whole < 30.0


class TestNoise:
    def test_level_zero_is_identity(self, rng):
        image = rng.uniform(size=(1, 8, 8))
        np.testing.assert_array_equal(add_gaussian_noise(image, 0.0, seed=1), image)

    def test_seeded(self, rng):
        image = Tensor(rng.uniform(size=(1, 8, 8)))
        a = add_gaussian_noise(image, 0.2, seed=9)
        b = add_gaussian_noise(image, 0.2, seed=9)
        assert isinstance(a, Tensor)
        np.testing.assert_array_equal(a.data, b.data)

    def test_sample_std(self):
        noisy = add_gaussian_noise(np.full((128, 128), 0.5), 0.2, seed=0)
        assert 0.18 <= noisy.std() <= 0.22
        assert noisy.min() >= 0.0 and noisy.max() <= 1.0

    def test_negative_level(self):
        with pytest.raises(ValueError):
            add_gaussian_noise(np.zeros(3), -0.1, seed=0)


class TestReport:
    def test_aggregation(self):
        gt = block((6, 6), 1, 1)
        report = MetricsReport(
            [image_metrics("a", gt, gt), image_metrics("b", block((6, 6), 1, 2), gt)]
        )
        agg = report.aggregate
        assert agg.n_images == 2
        assert agg.dice == pytest.approx((1.0 + 0.5) / 2, abs=1e-6)
        # pooled counts: tp = 4 + 2, fp = 0 + 2, fn = 0 + 2
        assert agg.f1 == pytest.approx(12 / 16)
        assert report.dice == agg.dice

    def test_empty_report(self):
        with pytest.raises(ValueError):
            MetricsReport([])

    def test_files(self, tmp_path):
        gt = block((6, 6), 1, 1)
        report = MetricsReport.from_masks(["x", "y"], [gt, gt], [gt, gt])
        frame = pd.read_csv(report.to_csv(tmp_path / "m" / "metrics.csv"))
        assert list(frame.columns) == CSV_COLUMNS
        assert list(frame["id"]) == ["x", "y"]
        summary = json.loads(report.to_json(tmp_path / "metrics.json").read_text())
        assert set(summary) == {"dice", "hd95", "acc", "iou", "f1", "n_images"}
