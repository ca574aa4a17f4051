"""Per-image adaptive parameters and the geodesic weighting field."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .geodesic import BETA_MAX, BETA_MIN, sobel_gradient_magnitude
from .tensor_core import as_mask, check_same_shape

SIGMA_RANGE = (1.0, 4.0)
TAU_RANGE = (0.5, 3.0)
# saturation pivots for the sigma / tau_density maps
BS_PIVOT = 0.5
SV_PIVOT = 0.1


@dataclass(frozen=True)
class GeometryStats:
    centrality_cg: float
    boundary_bs: float
    speed_var_sv: float


@dataclass(frozen=True)
class AdaptiveParams:
    """Adaptive weighting parameters.

    ``beta`` doubles as the initial speed sensitivity before adaptation.
    ``clamps`` lists the parameters that hit a range limit in
    ``derive_params``.
    """

    theta: float = 0.5
    beta: float = 1.0
    beta_base: float = 0.5
    lambda_scale: float = 4.0
    sigma_density: float = 1.0
    tau_density: float = 0.5
    eps: float = 1e-6
    clamps: tuple[str, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError(f"theta must lie in [0, 1], got {self.theta}")
        if not BETA_MIN <= self.beta <= BETA_MAX:
            raise ConfigError(f"beta must lie in [{BETA_MIN}, {BETA_MAX}], got {self.beta}")
        if not SIGMA_RANGE[0] <= self.sigma_density <= SIGMA_RANGE[1]:
            raise ConfigError(f"sigma_density out of range: {self.sigma_density}")
        if not TAU_RANGE[0] <= self.tau_density <= TAU_RANGE[1]:
            raise ConfigError(f"tau_density out of range: {self.tau_density}")


def compute_stats(g, mask, speed, eps: float = 1e-6, eps_grad: float = 1e-8) -> GeometryStats:
    gv = getattr(g, "values", g)
    fv = getattr(speed, "values", speed)
    m = as_mask(mask, min_size=3)
    check_same_shape(gv, m, fv)
    mf = m.astype(np.float64)
    cg = float((gv * mf).sum() / (mf.sum() + eps))
    bs = float(sobel_gradient_magnitude(mf, eps_grad).mean())
    sv = float(np.var(fv))
    return GeometryStats(cg, bs, sv)


def derive_params(stats: GeometryStats, defaults: AdaptiveParams = AdaptiveParams()) -> AdaptiveParams:
    eps = defaults.eps
    cg, bs, sv = stats.centrality_cg, stats.boundary_bs, stats.speed_var_sv
    theta = cg / (cg + bs + eps)
    beta_raw = defaults.beta_base + defaults.lambda_scale / (sv + eps)
    beta = min(max(beta_raw, BETA_MIN), BETA_MAX)
    sigma = SIGMA_RANGE[0] + (SIGMA_RANGE[1] - SIGMA_RANGE[0]) * min(1.0, bs / BS_PIVOT)
    tau = TAU_RANGE[0] + (TAU_RANGE[1] - TAU_RANGE[0]) * min(1.0, sv / SV_PIVOT)
    clamps = []
    if beta != beta_raw:
        clamps.append("beta")
    if bs >= BS_PIVOT:
        clamps.append("sigma_density")
    if sv >= SV_PIVOT:
        clamps.append("tau_density")
    return replace(
        defaults,
        theta=min(max(theta, 0.0), 1.0),
        beta=beta,
        sigma_density=sigma,
        tau_density=tau,
        clamps=tuple(clamps),
    )


def weight_field(g, params: AdaptiveParams, normalize: bool = True, mask=None) -> np.ndarray:
    """``theta * tanh(beta G) + (1 - theta) * (1 - tanh(beta G))``.

    With ``normalize`` G is first divided by its maximum over ``mask``
    (over the whole field when no mask is given); a zero maximum leaves
    G at zero.
    """
    gv = np.asarray(getattr(g, "values", g), dtype=np.float64)
    if normalize:
        region = gv if mask is None else gv[np.asarray(mask) > 0]
        gmax = float(region.max()) if region.size else 0.0
        gv = gv / gmax if gmax > 0 else np.zeros_like(gv)
    t = np.tanh(params.beta * gv)
    return params.theta * t + (1.0 - params.theta) * (1.0 - t)
