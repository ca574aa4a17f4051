import math

import numpy as np
import pytest

from geoproto.errors import EmptyMask, LengthMismatch, ShapeMismatch
from geoproto.losses import (
    align_loss,
    ce_loss,
    dice_loss,
    dice_score,
    edge_loss,
    hd95,
    loss_report,
    prob_map_from_fg,
    softmax,
)
from geoproto.oracles import brute_dice, brute_hd95, central_difference

from conftest import random_mask


def test_ce_examples(rng):
    t = random_mask(rng, 5, 5)
    assert ce_loss(prob_map_from_fg(t.astype(float)), t)[0] == pytest.approx(0.0, abs=1e-12)
    assert ce_loss(prob_map_from_fg(np.full((5, 5), 0.5)), t)[0] == pytest.approx(math.log(2))
    with pytest.raises(ShapeMismatch):
        ce_loss(np.full((2, 3, 3), 0.5), t)


def test_dice_loss_examples(rng):
    t = random_mask(rng, 6, 6)
    assert dice_loss(t.astype(float), t)[0] == pytest.approx(0.0, abs=1e-9)
    assert dice_loss(1.0 - t, t)[0] == pytest.approx(1.0, abs=1e-6)
    for _ in range(10):
        p = random_mask(rng, 6, 6)
        assert dice_loss(p.astype(float), t)[0] == pytest.approx(1 - dice_score(p, t), abs=1e-6)


def test_ce_gradient_finite_difference(rng):
    t = random_mask(rng, 4, 5)
    s = rng.normal(size=(2, 4, 5))
    _, grad = ce_loss(softmax(s), t)
    for _ in range(20):
        idx = tuple(rng.integers(0, n) for n in s.shape)
        num = central_difference(lambda x: ce_loss(softmax(x), t)[0], s, idx)
        assert abs(num - grad[idx]) <= 1e-5 * max(abs(num), 1e-3)


def test_dice_gradient_finite_difference(rng):
    t = random_mask(rng, 5, 5)
    p = rng.uniform(0.05, 0.95, (5, 5))
    _, grad = dice_loss(p, t)
    for _ in range(20):
        idx = tuple(rng.integers(0, n) for n in p.shape)
        num = central_difference(lambda x: dice_loss(x, t)[0], p, idx)
        assert abs(num - grad[idx]) <= 1e-5 * max(abs(num), 1e-3)


def test_edge_closed_form():
    z = np.zeros((6, 6))
    e = 1e-4
    want = -(e * math.log(e) + (1 - e) * math.log(1 - e))
    assert edge_loss(z, z) == pytest.approx(want, rel=1e-9)
    assert want == pytest.approx(1.021e-3, rel=1e-3)


def test_edge_linear_in_weights(rng):
    t = random_mask(rng, 8, 8)
    p = rng.random((8, 8))
    w = rng.random((8, 8))
    assert edge_loss(p, t, 2 * w) == pytest.approx(2 * edge_loss(p, t, w), rel=1e-12)


def test_edge_minimal_at_target(rng):
    for _ in range(10):
        t = random_mask(rng, 10, 10)
        base = edge_loss(t.astype(float), t)
        for _ in range(5):
            p = np.clip(t + rng.normal(0, 0.2, t.shape), 0, 1)
            assert edge_loss(p, t) >= base - 1e-12


def test_align_loss():
    m = np.array([[0, 1], [1, 1]], dtype=np.uint8)
    perfect = prob_map_from_fg(m.astype(float))
    assert align_loss([perfect], [m]) == pytest.approx(0.0, abs=1e-12)
    uni = prob_map_from_fg(np.full((2, 2), 0.5))
    assert align_loss([uni, uni], [m, m]) == pytest.approx(math.log(2))
    p = prob_map_from_fg(np.array([[0.2, 0.7], [0.9, 0.4]]))
    assert align_loss([p, uni], [m, m]) == pytest.approx((ce_loss(p, m)[0] + math.log(2)) / 2, abs=1e-12)
    with pytest.raises(LengthMismatch):
        align_loss([p], [m, m])


def test_report_additive(rng):
    t = random_mask(rng, 8, 8)
    r = loss_report(rng.random((8, 8)), t, [prob_map_from_fg(np.full((8, 8), 0.5))], [t])
    assert r.total == pytest.approx(r.seg_ce + r.seg_dice + r.edge + r.align, abs=1e-12)


def test_dice_score_examples():
    a = np.zeros((4, 5), dtype=np.uint8)
    a[1:3, 1:3] = 1
    b = np.roll(a, 1, axis=1)
    assert dice_score(a, a) == 1.0
    assert dice_score(a, 1 - a) == 0.0
    assert dice_score(a, b) == 0.5
    z = np.zeros((3, 3), dtype=np.uint8)
    assert dice_score(z, z) == 1.0


def test_hd95_examples():
    a = np.zeros((6, 6), dtype=np.uint8)
    a[2, 2] = 1
    assert hd95(a, a) == 0.0
    assert hd95(a, np.roll(a, 1, axis=1)) == 1.0
    assert hd95(a, np.roll(a, 1, axis=1), spacing=0.5) == 0.5
    with pytest.raises(EmptyMask):
        hd95(a, np.zeros_like(a))


def test_metrics_match_brute_force(rng):
    for _ in range(30):
        h, w = rng.integers(2, 25, size=2)
        a = random_mask(rng, h, w, 0.4)
        b = random_mask(rng, h, w, 0.4)
        assert dice_score(a, b) == brute_dice(a, b) == dice_score(b, a)
        if a.any() and b.any():
            assert abs(hd95(a, b) - brute_hd95(a, b)) <= 1e-9
            assert hd95(a, b) == hd95(b, a)
