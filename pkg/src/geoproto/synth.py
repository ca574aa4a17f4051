"""Synthetic few-shot corpus: organ-like shapes with deformed queries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError

SHAPE_KINDS = ("ellipse", "crescent", "blob")


@dataclass(frozen=True)
class SynthSpec:
    shape_kind: str = "ellipse"
    count: int = 100
    noise_sigma: float = 0.05
    deform_amp: float = 0.05
    size: tuple[int, int] = (256, 256)
    seed: int = 0
    shots: int = 5

    def __post_init__(self):
        if self.shape_kind not in SHAPE_KINDS + ("mixed",):
            raise ConfigError(f"unknown shape_kind {self.shape_kind!r}")
        if self.count < 1 or self.shots < 1:
            raise ConfigError("count and shots must be >= 1")
        if min(self.size) < 16:
            raise ConfigError(f"size {self.size} too small")


@dataclass(frozen=True)
class SynthEpisode:
    support_images: list
    support_masks: list
    query_image: np.ndarray
    query_mask: np.ndarray
    shape_kind: str


def _base_level(kind: str, rng, h: int, w: int):
    """Return a function of (rows, cols) that is < 0 inside the shape."""
    cy = h * rng.uniform(0.4, 0.6)
    cx = w * rng.uniform(0.4, 0.6)
    s = min(h, w)
    if kind == "ellipse":
        a, b = s * rng.uniform(0.16, 0.26), s * rng.uniform(0.12, 0.2)
        ang = rng.uniform(0, np.pi)
        ca, sa = np.cos(ang), np.sin(ang)

        def level(r, c):
            u = ((c - cx) * ca + (r - cy) * sa) / a
            v = (-(c - cx) * sa + (r - cy) * ca) / b
            return np.sqrt(u * u + v * v) - 1.0

        return level
    if kind == "crescent":
        r1 = s * rng.uniform(0.2, 0.27)
        r2 = r1 * rng.uniform(0.7, 0.85)
        ang = rng.uniform(0, 2 * np.pi)
        off = r1 * rng.uniform(0.45, 0.6)
        oy, ox = cy + off * np.sin(ang), cx + off * np.cos(ang)

        def level(r, c):
            outer = np.hypot(r - cy, c - cx) / r1 - 1.0
            inner = 1.0 - np.hypot(r - oy, c - ox) / r2
            return np.maximum(outer, inner)

        return level
    base = s * rng.uniform(0.17, 0.23)
    k = np.arange(2, 6)
    amps = rng.uniform(0.04, 0.12, size=k.size)
    phases = rng.uniform(0, 2 * np.pi, size=k.size)

    def level(r, c):
        phi = np.arctan2(r - cy, c - cx)
        rad = base * (1.0 + (amps[:, None, None] * np.cos(k[:, None, None] * phi + phases[:, None, None])).sum(0))
        return np.hypot(r - cy, c - cx) / rad - 1.0

    return level


def _smooth_field(rng, h: int, w: int, n_waves: int = 3) -> np.ndarray:
    rr, cc = np.mgrid[0:h, 0:w].astype(np.float64)
    out = np.zeros((h, w))
    for _ in range(n_waves):
        fy, fx = rng.uniform(0.5, 2.0, size=2) * 2 * np.pi / np.array([h, w])
        out += np.sin(fy * rr + fx * cc + rng.uniform(0, 2 * np.pi))
    return out / n_waves


def _warp(level, rng, h: int, w: int, amp: float):
    """Sample the level function on a smoothly displaced grid."""
    rr, cc = np.mgrid[0:h, 0:w].astype(np.float64)
    if amp > 0:
        scale = amp * min(h, w)
        rr = rr + scale * _smooth_field(rng, h, w)
        cc = cc + scale * _smooth_field(rng, h, w)
    return level(rr, cc)


def _render(mask: np.ndarray, texture: dict, rng, noise_sigma: float) -> np.ndarray:
    """Organ intensity with internal heterogeneity, a darker transition rim and textured background."""
    h, w = mask.shape
    m = mask.astype(bool)
    depth = ndimage.distance_transform_edt(m)
    img = 0.25 + 0.03 * texture["bg"]
    organ = 0.7 + 0.05 * texture["organ"]
    rim = depth <= texture["rim_width"]
    img = np.where(m, organ, img)
    img = np.where(m & rim, texture["rim_level"], img)
    if noise_sigma > 0:
        img = img + rng.normal(0.0, noise_sigma, size=(h, w))
    return img


def generate_episode(spec: SynthSpec, index: int) -> SynthEpisode:
    rng = np.random.default_rng([spec.seed, index])
    h, w = spec.size
    kind = spec.shape_kind
    if kind == "mixed":
        kind = SHAPE_KINDS[index % len(SHAPE_KINDS)]
    level = _base_level(kind, rng, h, w)
    texture = {
        "bg": _smooth_field(rng, h, w),
        "organ": _smooth_field(rng, h, w),
        "rim_width": float(rng.uniform(3.0, 6.0)),
        "rim_level": float(rng.uniform(0.42, 0.48)),
    }
    masks = []
    for _ in range(spec.shots + 1):
        lv = _warp(level, rng, h, w, spec.deform_amp)
        masks.append((lv < 0).astype(np.uint8))
    images = [_render(m, texture, rng, spec.noise_sigma) for m in masks]
    return SynthEpisode(images[:-1], masks[:-1], images[-1], masks[-1], kind)


def generate_corpus(spec: SynthSpec):
    return [generate_episode(spec, i) for i in range(spec.count)]


def validate_mask(mask: np.ndarray) -> bool:
    return bool(mask.any()) and not bool(mask.all()) and min(mask.shape) >= 3
