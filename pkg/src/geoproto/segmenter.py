"""Few-shot episode segmentation with geodesic prototypes.

Each support mask goes through the geodesic stage at mask resolution; the
resulting weights are resampled to the feature grid where prototypes are
formed.  Query pixels are scored by scaled cosine similarity against the
pooled foreground prototypes and the (uniformly weighted) background
prototypes, and the two-way softmax is upsampled back to mask resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .adaptive import AdaptiveParams, GeometryStats, compute_stats, derive_params, weight_field
from .errors import ConfigError, ShapeMismatch
from .features import FeatureConfig, extract
from .geodesic import (
    RefineConfig,
    SpeedField,
    edt_init,
    gradient_for,
    refine,
    speed_function,
    stability_report,
)
from .prototype import (
    PrototypeSet,
    background_prototype,
    density_field,
    global_prototype,
    grid_prototypes,
    unified_set,
)
from .tensor_core import as_mask, resize_bilinear


@dataclass(frozen=True)
class PipelineConfig:
    refine: RefineConfig = field(default_factory=RefineConfig)
    params: AdaptiveParams = field(default_factory=AdaptiveParams)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    grid_shape: tuple[int, int] = (8, 8)
    occupancy_min: float = 1e-3
    proto_eps: float = 1e-6
    scale_alpha: float = 20.0
    normalize_g: bool = True
    pooling: str = "union"
    # "geodesic": geodesic weights + grid; "uniform": plain masked average, global only
    mode: str = "geodesic"
    # "grid": uniform global + uniform grid prototypes of the complement; "global": global only
    background: str = "grid"
    fixed_theta: float | None = None
    fixed_beta: float | None = None

    def __post_init__(self):
        if self.pooling not in ("union", "mean"):
            raise ConfigError(f"pooling must be 'union' or 'mean', got {self.pooling!r}")
        if self.mode not in ("geodesic", "uniform"):
            raise ConfigError(f"mode must be 'geodesic' or 'uniform', got {self.mode!r}")
        if self.background not in ("grid", "global"):
            raise ConfigError(f"background must be 'grid' or 'global', got {self.background!r}")
        if len(self.grid_shape) != 2 or min(self.grid_shape) < 1:
            raise ConfigError(f"bad grid_shape {self.grid_shape}")


@dataclass(frozen=True)
class GeodesicResult:
    grad: np.ndarray
    speed: SpeedField
    distance: DistanceField
    stats: GeometryStats
    params: AdaptiveParams
    weights: np.ndarray
    stability: dict


def geodesic_stage(mask, cfg: PipelineConfig, image=None) -> GeodesicResult:
    """Distance field, adaptive parameters and weights for one support mask.

    A first refinement with the initial beta supplies the statistics for
    the adaptive parameters; the speed and distance fields are then
    recomputed with the adapted beta.
    """
    m = as_mask(mask, min_size=3)
    grad = gradient_for(m, cfg.refine, image)
    g0 = edt_init(m)
    speed0 = speed_function(grad, cfg.params.beta)
    dist0 = refine(m, speed0, cfg.refine, g0=g0)
    stats = compute_stats(dist0, m, speed0, eps=cfg.params.eps, eps_grad=cfg.refine.eps_grad)
    params = derive_params(stats, cfg.params)
    if cfg.fixed_theta is not None:
        params = replace(params, theta=cfg.fixed_theta)
    if cfg.fixed_beta is not None:
        params = replace(params, beta=cfg.fixed_beta)
    speed = speed_function(grad, params.beta)
    dist = refine(m, speed, cfg.refine, g0=g0)
    weights = weight_field(dist, params, normalize=cfg.normalize_g, mask=m)
    return GeodesicResult(grad, speed, dist, stats, params, weights,
                          stability_report(cfg.refine, speed))


@dataclass(frozen=True)
class SupportPrototypes:
    foreground: PrototypeSet
    background: PrototypeSet | None
    geodesic: GeodesicResult | None


def background_set(features, mask_small, cfg: PipelineConfig) -> PrototypeSet | None:
    """Uniformly weighted prototypes of the mask complement (no geodesic weighting)."""
    gp = background_prototype(features, mask_small, cfg.proto_eps)
    if gp is None:
        return None
    grid = []
    if cfg.background == "grid":
        comp = 1 - np.asarray(mask_small, dtype=np.float64)
        ones = np.ones(comp.shape)
        grid = [replace(p, kind="background")
                for p in grid_prototypes(features, comp, ones, ones, cfg.grid_shape,
                                         cfg.occupancy_min, cfg.proto_eps)]
    return unified_set(gp, grid, cfg.grid_shape)


def features_for(image, cfg: PipelineConfig) -> np.ndarray:
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 3:
        return arr
    return extract(arr, cfg.features)


def feature_mask(mask, hw) -> np.ndarray:
    m = np.asarray(mask, dtype=np.float64)
    return (resize_bilinear(m, hw) >= 0.5).astype(np.uint8)


def support_prototypes(image, mask, cfg: PipelineConfig, feats=None) -> SupportPrototypes:
    m = as_mask(mask, min_size=3)
    f = features_for(image, cfg) if feats is None else feats
    hw = f.shape[1:]
    m_small = feature_mask(m, hw)
    bg = background_set(f, m_small, cfg)
    if cfg.mode == "uniform":
        gp = global_prototype(f, m_small, np.ones(hw), cfg.proto_eps)
        return SupportPrototypes(unified_set(gp, [], cfg.grid_shape), bg, None)
    img = np.asarray(image) if np.ndim(image) == 2 else None
    geo = geodesic_stage(m, cfg, image=img)
    w_small = resize_bilinear(geo.weights, hw)
    rho = resize_bilinear(density_field(geo.distance, geo.params), hw)
    gp = global_prototype(f, m_small, w_small, cfg.proto_eps)
    grid = grid_prototypes(f, m_small, w_small, rho, cfg.grid_shape, cfg.occupancy_min, cfg.proto_eps)
    return SupportPrototypes(unified_set(gp, grid, cfg.grid_shape, rho), bg, geo)


def pool_sets(sets: list[PrototypeSet], how: str = "union") -> np.ndarray:
    """Stack foreground prototype vectors across shots.

    ``union`` keeps every prototype; ``mean`` averages the globals and
    each grid cell over the shots that populate it.
    """
    if how == "union":
        return np.concatenate([s.vectors() for s in sets])
    cells: dict[tuple[int, int], list[np.ndarray]] = {}
    for s in sets:
        for p in s.grid:
            cells.setdefault(p.cell, []).append(p.vector)
    rows = [np.mean(cells[k], axis=0) for k in sorted(cells)]
    rows.append(np.mean([s.global_proto.vector for s in sets], axis=0))
    return np.stack(rows)


def _unit_rows(x: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(x, axis=-1, keepdims=True)
    return np.where(n > 0, x / np.where(n > 0, n, 1.0), 0.0)


def cosine_scores(features: np.ndarray, protos: np.ndarray, alpha: float) -> np.ndarray:
    """``alpha * max_k cos(f(p), P_k)`` for every pixel of a (C, H, W) map."""
    c, h, w = features.shape
    if protos.shape[-1] != c:
        raise ShapeMismatch(f"prototypes have {protos.shape[-1]} channels, features {c}")
    fu = _unit_rows(features.reshape(c, -1).T)
    pu = _unit_rows(np.atleast_2d(protos))
    return alpha * (fu @ pu.T).max(axis=1).reshape(h, w)


def score_pixel(feature, pset, scale_alpha: float = 20.0) -> float:
    protos = pset.vectors() if isinstance(pset, PrototypeSet) else np.atleast_2d(pset)
    f = np.asarray(feature, dtype=np.float64)
    return float(cosine_scores(f.reshape(-1, 1, 1), protos, scale_alpha)[0, 0])


@dataclass(frozen=True)
class Episode:
    supports: list  # [(image or (C,H,W) features, mask), ...]
    query_image: np.ndarray
    query_mask: np.ndarray | None = None

    def __post_init__(self):
        if len(self.supports) < 1:
            raise ShapeMismatch("episode needs at least one support")
        shapes = {np.shape(m) for _, m in self.supports}
        if self.query_mask is not None:
            shapes.add(np.shape(self.query_mask))
        if len(shapes) != 1:
            raise ShapeMismatch(f"support/query masks have differing shapes {sorted(shapes)}")
        kinds = {np.shape(img) for img, _ in self.supports} | {np.shape(self.query_image)}
        if len(kinds) != 1:
            raise ShapeMismatch(f"support/query images have differing shapes {sorted(kinds)}")

    @property
    def mask_shape(self) -> tuple[int, int]:
        return tuple(np.shape(self.supports[0][1]))

    def with_shots(self, k: int) -> "Episode":
        return replace(self, supports=list(self.supports[:k]))


@dataclass(frozen=True)
class Prediction:
    prob: np.ndarray
    mask: np.ndarray
    scores: np.ndarray | None = None
    n_prototypes: int = 0


def segment_episode(ep: Episode, cfg: PipelineConfig = PipelineConfig()) -> Prediction:
    sup = [support_prototypes(img, m, cfg) for img, m in ep.supports]
    fg = pool_sets([s.foreground for s in sup], cfg.pooling)
    bgs = [s.background for s in sup if s.background is not None]
    qf = features_for(ep.query_image, cfg)
    fg_score = cosine_scores(qf, fg, cfg.scale_alpha)
    if bgs:
        bg_score = cosine_scores(qf, pool_sets(bgs, cfg.pooling), cfg.scale_alpha)
        prob_small = 1.0 / (1.0 + np.exp(bg_score - fg_score))
    else:
        bg_score = np.full_like(fg_score, -math.inf)
        prob_small = np.ones_like(fg_score)
    prob = np.clip(resize_bilinear(prob_small, ep.mask_shape), 0.0, 1.0)
    return Prediction(prob, (prob > 0.5).astype(np.uint8),
                      np.stack([fg_score, bg_score]), int(fg.shape[0]))


@dataclass(frozen=True)
class AlignResult:
    predictions: list
    skipped: bool = False


def align_episode(ep: Episode, pred: Prediction, cfg: PipelineConfig = PipelineConfig()) -> AlignResult:
    """Re-segment every support using the query and its predicted mask as the support."""
    if not pred.mask.any():
        return AlignResult([], skipped=True)
    out = []
    for img, _ in ep.supports:
        rev = Episode([(ep.query_image, pred.mask)], img)
        out.append(segment_episode(rev, cfg))
    return AlignResult(out)
