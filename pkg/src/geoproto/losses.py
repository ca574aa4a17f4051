"""Training-objective terms and evaluation metrics.

Probability maps are ``(2, H, W)`` arrays with channel 0 = background and
channel 1 = foreground.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMask, LengthMismatch, ShapeMismatch
from .geodesic import boundary_pixels, sobel_gradient_magnitude, squared_distance_to_set
from .tensor_core import as_mask, check_same_shape

CE_FLOOR = 1e-12
BCE_CLAMP = 1e-7


@dataclass(frozen=True)
class LossReport:
    seg_ce: float
    seg_dice: float
    edge: float
    align: float

    @property
    def total(self) -> float:
        return self.seg_ce + self.seg_dice + self.edge + self.align


def softmax(scores: np.ndarray, axis: int = 0) -> np.ndarray:
    z = scores - scores.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def prob_map_from_fg(prob_fg) -> np.ndarray:
    p = np.asarray(prob_fg, dtype=np.float64)
    return np.stack([1.0 - p, p])


def one_hot(target, classes: int = 2) -> np.ndarray:
    t = np.asarray(target).astype(np.int64)
    return np.stack([(t == c).astype(np.float64) for c in range(classes)])


def ce_loss(pred, target) -> tuple[float, np.ndarray]:
    """Mean pixel cross-entropy and its gradient w.r.t. the pre-softmax scores."""
    p = np.asarray(pred, dtype=np.float64)
    t = as_mask(target)
    if p.ndim != 3 or p.shape[1:] != t.shape:
        raise ShapeMismatch(f"prob map {p.shape} vs target {t.shape}")
    y = one_hot(t, p.shape[0])
    n = t.size
    value = float(-(y * np.log(np.maximum(p, CE_FLOOR))).sum() / n)
    return value, (p - y) / n


def dice_loss(pred_fg, target, eps: float = 1e-6) -> tuple[float, np.ndarray]:
    p = np.asarray(pred_fg, dtype=np.float64)
    y = as_mask(target).astype(np.float64)
    check_same_shape(p, y)
    inter = float((y * p).sum())
    denom = float(y.sum() + p.sum()) + eps
    num = 2.0 * inter + eps
    value = 1.0 - num / denom
    grad = -(2.0 * y * denom - num) / denom**2
    return value, grad


def _bce(p: np.ndarray, t: np.ndarray) -> np.ndarray:
    p = np.clip(p, BCE_CLAMP, 1.0 - BCE_CLAMP)
    return -(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))


def edge_map(field, eps_grad: float = 1e-8) -> np.ndarray:
    return np.clip(sobel_gradient_magnitude(field, eps_grad), 0.0, 1.0)


def edge_loss(pred_fg, target, weights=None, eps_grad: float = 1e-8) -> float:
    p = np.asarray(pred_fg, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    check_same_shape(p, t)
    w = np.ones_like(p) if weights is None else np.asarray(weights, dtype=np.float64)
    check_same_shape(p, w)
    e_pred, e_tgt = edge_map(p, eps_grad), edge_map(t, eps_grad)
    return float((w * _bce(e_pred, e_tgt)).sum() / p.size)


def align_loss(support_preds, support_masks) -> float:
    """Mean cross-entropy of support re-predictions against the true support masks."""
    if len(support_preds) != len(support_masks):
        raise LengthMismatch(f"{len(support_preds)} predictions vs {len(support_masks)} masks")
    if not support_preds:
        return 0.0
    return float(np.mean([ce_loss(p, m)[0] for p, m in zip(support_preds, support_masks)]))


def loss_report(prob_fg, target, support_preds=(), support_masks=(), edge_weights=None) -> LossReport:
    pm = prob_map_from_fg(prob_fg)
    return LossReport(
        seg_ce=ce_loss(pm, target)[0],
        seg_dice=dice_loss(prob_fg, target)[0],
        edge=edge_loss(prob_fg, target, edge_weights),
        align=align_loss(list(support_preds), list(support_masks)),
    )


# ---------------------------------------------------------------------------
# metrics


def dice_score(a, b) -> float:
    a, b = as_mask(a).astype(bool), as_mask(b).astype(bool)
    check_same_shape(a, b)
    sa, sb = int(a.sum()), int(b.sum())
    if sa + sb == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / (sa + sb)


def hd95(a, b, spacing: float = 1.0) -> float:
    """95th percentile of pooled boundary-to-boundary distances, in ``spacing`` units.

    Boundaries are 4-neighbour boundaries with the image frame counted as
    background; the percentile interpolates linearly between order statistics.
    """
    a, b = as_mask(a), as_mask(b)
    check_same_shape(a, b)
    if not a.any() or not b.any():
        raise EmptyMask("hd95 needs two non-empty masks")
    ba = boundary_pixels(a, frame_is_background=True)
    bb = boundary_pixels(b, frame_is_background=True)
    d_to_b = np.sqrt(squared_distance_to_set(bb))
    d_to_a = np.sqrt(squared_distance_to_set(ba))
    pooled = np.concatenate([d_to_b[ba], d_to_a[bb]])
    return float(np.percentile(pooled, 95.0)) * spacing
