"""Handcrafted feature maps standing in for a CNN backbone."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError, DimMismatch, NonFinite
from .geodesic import sobel_gradient_magnitude
from .tensor_core import as_features, read_tensor

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class FeatureConfig:
    scales: tuple[float, ...] = (1.0, 2.0)
    include_gradient: bool = True
    window: int = 5
    normalize: str = "per_channel_zscore"
    downsample: int = 8

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        if not self.scales or any(s <= 0 for s in self.scales):
            raise ConfigError("scales must be a non-empty list of positive values")
        if self.window < 3 or self.window % 2 == 0:
            raise ConfigError(f"window must be odd and >= 3, got {self.window}")
        if self.normalize not in ("none", "per_channel_zscore"):
            raise ConfigError(f"unknown normalize mode {self.normalize!r}")
        if self.downsample < 1:
            raise ConfigError("downsample must be >= 1")

    @property
    def channels(self) -> int:
        return 1 + len(self.scales) + int(self.include_gradient) + 2


def average_pool(x: np.ndarray, factor: int) -> np.ndarray:
    """Mean over non-overlapping ``factor x factor`` blocks (trailing partial blocks dropped)."""
    if factor == 1:
        return x.copy()
    c, h, w = x.shape
    hh, ww = h // factor, w // factor
    if hh == 0 or ww == 0:
        raise DimMismatch(f"image {h}x{w} smaller than pooling factor {factor}")
    x = x[:, : hh * factor, : ww * factor]
    return x.reshape(c, hh, factor, ww, factor).mean(axis=(2, 4))


def extract(image, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise DimMismatch(f"image must be 2-D, got {img.shape}")
    if not np.all(np.isfinite(img)):
        raise NonFinite("image contains NaN or Inf")
    chans = [img]
    for s in cfg.scales:
        chans.append(ndimage.gaussian_filter(img, s, mode="nearest"))
    if cfg.include_gradient:
        chans.append(sobel_gradient_magnitude(img, 0.0))
    mean = ndimage.uniform_filter(img, cfg.window, mode="nearest")
    sq = ndimage.uniform_filter(img * img, cfg.window, mode="nearest")
    chans.append(mean)
    var = sq - mean * mean
    # cancellation noise on flat regions
    var[var < 1e-12 * (1.0 + mean * mean)] = 0.0
    chans.append(np.sqrt(var))
    feats = average_pool(np.stack(chans), cfg.downsample)
    if cfg.normalize == "per_channel_zscore":
        mu = feats.mean(axis=(1, 2), keepdims=True)
        sd = np.maximum(feats.std(axis=(1, 2), keepdims=True), STD_FLOOR)
        feats = (feats - mu) / sd
    return feats


def ingest(path, expected_hw: tuple[int, int] | None = None) -> np.ndarray:
    """Load externally computed ``(C, H, W)`` features from a TensorFile."""
    arr = read_tensor(path)
    if arr.ndim != 3:
        raise DimMismatch(f"feature file must be 3-D, got ndim={arr.ndim}")
    if expected_hw is not None and tuple(arr.shape[1:]) != tuple(expected_hw):
        raise DimMismatch(f"feature grid {arr.shape[1:]} != expected {tuple(expected_hw)}")
    return as_features(arr)
