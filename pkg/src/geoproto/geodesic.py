"""Edge-aware geodesic distance fields.

Pipeline: exact EDT initialisation, Sobel gradient magnitude, edge-stopping
speed ``F = 1 / (1 + beta * |grad|)``, then damped 8-neighbour
min-plus refinement.  ``dijkstra_oracle`` solves the refinement's fixed
point directly by label-setting and is used only for verification.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeMismatch, TooSmall
from .tensor_core import as_field, as_mask, check_same_shape

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()

BETA_MIN = 0.5
BETA_MAX = 5.0

# (drow, dcol) for the 8-neighbourhood, centre excluded
NEIGHBOURS_8 = tuple((dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0))


@dataclass(frozen=True)
class RefineConfig:
    step_lambda: float = 0.1
    mix_mu: float = 0.7
    mask_tau: float = 0.5
    iterations_T: int = 3
    eps_div: float = 1e-6
    eps_grad: float = 1e-8
    gradient_source: str = "mask"

    def __post_init__(self):
        if not 0.0 < self.mix_mu < 1.0:
            raise ConfigError(f"mix_mu must lie in (0, 1), got {self.mix_mu}")
        if not self.step_lambda > 0.0:
            raise ConfigError(f"step_lambda must be positive, got {self.step_lambda}")
        if int(self.iterations_T) != self.iterations_T or self.iterations_T < 1:
            raise ConfigError(f"iterations_T must be an integer >= 1, got {self.iterations_T}")
        if self.gradient_source not in ("mask", "intensity"):
            raise ConfigError(f"gradient_source must be 'mask' or 'intensity', got {self.gradient_source!r}")


@dataclass(frozen=True)
class SpeedField:
    values: np.ndarray
    beta_used: float


@dataclass(frozen=True)
class DistanceField:
    values: np.ndarray
    converged_residual: float = 0.0
    iterations_run: int = 0
    residuals: tuple[float, ...] = ()
    flags: tuple[str, ...] = field(default=())


# ---------------------------------------------------------------------------
# EDT


def boundary_pixels(mask: np.ndarray, frame_is_background: bool = False) -> np.ndarray:
    """Mask pixels with at least one 4-neighbour in the background.

    Out-of-bounds neighbours count as background only when
    ``frame_is_background`` is set.
    """
    m = np.asarray(mask).astype(bool)
    pad = np.pad(m, 1, constant_values=not frame_is_background)
    bg_nbr = (
        ~pad[:-2, 1:-1] | ~pad[2:, 1:-1] | ~pad[1:-1, :-2] | ~pad[1:-1, 2:]
    )
    return m & bg_nbr


def _column_distance(zero: np.ndarray) -> np.ndarray:
    """Per-column 1-D distance to the nearest True entry (inf if none)."""
    h, w = zero.shape
    d = np.full((h, w), np.inf)
    run = np.full(w, np.inf)
    for i in range(h):
        run = np.where(zero[i], 0.0, run + 1.0)
        d[i] = run
    run = np.full(w, np.inf)
    for i in range(h - 1, -1, -1):
        run = np.where(zero[i], 0.0, run + 1.0)
        d[i] = np.minimum(d[i], run)
    return d


def squared_distance_to_set(zero, chunk_elems: int = 1 << 22) -> np.ndarray:
    """Exact squared Euclidean distance from every pixel to the True set.

    Separable two-pass method: exact 1-D distances down each column, then
    a min-plus pass with the parabola ``(x - x')**2`` along each row.
    Pixels are at integer coordinates; an empty set yields ``inf``.
    """
    zero = np.asarray(zero, dtype=bool)
    h, w = zero.shape
    g = _column_distance(zero) ** 2
    xs = np.arange(w, dtype=np.float64)
    parab = (xs[:, None] - xs[None, :]) ** 2  # [x, x']
    out = np.empty((h, w))
    rows = max(1, chunk_elems // max(1, w * w))
    for r0 in range(0, h, rows):
        block = g[r0 : r0 + rows]
        out[r0 : r0 + rows] = (block[:, None, :] + parab[None, :, :]).min(axis=2)
    return out


def zero_set(mask: np.ndarray) -> np.ndarray:
    """Background pixels together with the 4-neighbour boundary of the mask."""
    m = np.asarray(mask).astype(bool)
    return ~m | boundary_pixels(m)


def edt_init(mask) -> DistanceField:
    """Exact distance from each interior mask pixel to background-or-boundary.

    G is zero on the background and on mask pixels that touch the background
    through a 4-neighbour.  Masks with no such pixels (all-zero, or covering
    the whole frame) give an all-zero field with a flag.
    """
    m = as_mask(mask)
    flags: tuple[str, ...] = ()
    if not m.any():
        return DistanceField(np.zeros(m.shape), flags=("empty_mask",))
    z = zero_set(m)
    if not z.any():
        return DistanceField(np.zeros(m.shape), flags=("no_zero_set",))
    return DistanceField(np.sqrt(squared_distance_to_set(z)), flags=flags)


# ---------------------------------------------------------------------------
# gradients and speed


def _correlate3(field: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    pad = np.pad(field, 1, mode="edge")
    h, w = field.shape
    out = np.zeros((h, w))
    for dr in range(3):
        for dc in range(3):
            k = kernel[dr, dc]
            if k != 0.0:
                out += k * pad[dr : dr + h, dc : dc + w]
    return out


def sobel_components(field) -> tuple[np.ndarray, np.ndarray]:
    f = as_field(field)
    if f.shape[0] < 3 or f.shape[1] < 3:
        raise TooSmall(f"Sobel needs at least 3x3, got {f.shape}")
    return _correlate3(f, SOBEL_X), _correlate3(f, SOBEL_Y)


def sobel_gradient_magnitude(field, eps_grad: float = 1e-8) -> np.ndarray:
    """``sqrt(Gx**2 + Gy**2 + eps_grad)`` with replicate-padded 3x3 Sobel."""
    gx, gy = sobel_components(field)
    return np.sqrt(gx * gx + gy * gy + eps_grad)


def speed_function(grad_mag, beta: float) -> SpeedField:
    g = as_field(grad_mag)
    return SpeedField(values=1.0 / (1.0 + beta * g), beta_used=float(beta))


def gradient_for(mask, cfg: RefineConfig, image=None) -> np.ndarray:
    """Gradient magnitude of the mask, or of ``image`` in intensity mode."""
    if cfg.gradient_source == "intensity":
        if image is None:
            raise ConfigError("intensity gradient source needs an image")
        check_same_shape(np.asarray(mask), np.asarray(image))
        return sobel_gradient_magnitude(image, cfg.eps_grad)
    return sobel_gradient_magnitude(as_mask(mask, min_size=3), cfg.eps_grad)


# ---------------------------------------------------------------------------
# refinement


def neighbour_min(g: np.ndarray) -> np.ndarray:
    """Minimum over in-bounds 8-neighbours (inf where a pixel has none)."""
    h, w = g.shape
    pad = np.pad(g, 1, constant_values=np.inf)
    out = np.full((h, w), np.inf)
    for dr, dc in NEIGHBOURS_8:
        np.minimum(out, pad[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w], out=out)
    return out


def _values(x) -> np.ndarray:
    return x.values if hasattr(x, "values") else np.asarray(x, dtype=np.float64)


def refine_step(g_prev, speed, mask, cfg: RefineConfig) -> DistanceField:
    g = _values(g_prev)
    f = _values(speed)
    m = np.asarray(mask)
    if g.shape != f.shape or g.shape != m.shape:
        raise ShapeMismatch(f"shapes differ: G {g.shape}, F {f.shape}, M {m.shape}")
    upd = neighbour_min(g) + cfg.step_lambda / (f + cfg.eps_div)
    active = (m > cfg.mask_tau) & np.isfinite(upd)
    out = np.where(active, cfg.mix_mu * g + (1.0 - cfg.mix_mu) * upd, g)
    return DistanceField(out)


def refine(mask, speed, cfg: RefineConfig, g0=None, tol: float | None = None,
           max_iter: int = 100_000) -> DistanceField:
    """Iterate ``refine_step`` from the EDT field.

    Runs ``cfg.iterations_T`` steps, or, when ``tol`` is given, until the
    sup-norm residual drops below ``tol`` (at most ``max_iter`` steps).
    """
    m = as_mask(mask)
    init = edt_init(m) if g0 is None else g0
    g = _values(init)
    flags = getattr(init, "flags", ())
    n = cfg.iterations_T if tol is None else max_iter
    residuals = []
    for _ in range(n):
        nxt = refine_step(g, speed, m, cfg).values
        residuals.append(float(np.max(np.abs(nxt - g))) if g.size else 0.0)
        g = nxt
        if tol is not None and residuals[-1] < tol:
            break
    return DistanceField(
        g,
        converged_residual=residuals[-1] if residuals else 0.0,
        iterations_run=len(residuals),
        residuals=tuple(residuals),
        flags=flags,
    )


def dijkstra_oracle(mask, speed, cfg: RefineConfig) -> DistanceField:
    """Fixed point of the refinement, by priority-queue label setting.

    Pixels with ``M <= mask_tau`` are sources at 0; entering a masked pixel
    p from any 8-neighbour costs ``step_lambda / (F(p) + eps_div)``.
    Unreachable pixels are left at ``inf``.
    """
    m = np.asarray(mask)
    f = _values(speed)
    check_same_shape(m, f)
    h, w = m.shape
    cost = cfg.step_lambda / (f + cfg.eps_div)
    dist = np.full((h, w), np.inf)
    heap = []
    for r in range(h):
        for c in range(w):
            if not m[r, c] > cfg.mask_tau:
                dist[r, c] = 0.0
                heap.append((0.0, r, c))
    heapq.heapify(heap)
    done = np.zeros((h, w), dtype=bool)
    while heap:
        d, r, c = heapq.heappop(heap)
        if done[r, c]:
            continue
        done[r, c] = True
        for dr, dc in NEIGHBOURS_8:
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and not done[rr, cc] and m[rr, cc] > cfg.mask_tau:
                nd = d + cost[rr, cc]
                if nd < dist[rr, cc]:
                    dist[rr, cc] = nd
                    heapq.heappush(heap, (nd, rr, cc))
    return DistanceField(dist)


# ---------------------------------------------------------------------------
# diagnostics


def stability_report(cfg: RefineConfig, speed) -> dict:
    """Check ``mu <= 1 - lambda / min(F)``; violations are warnings only."""
    fmin = float(np.min(_values(speed)))
    bound = 1.0 - cfg.step_lambda / fmin
    ok = cfg.mix_mu <= bound
    rec = {"mu": cfg.mix_mu, "min_speed": fmin, "mu_bound": bound, "stable": ok}
    if not ok:
        rec["warning"] = (
            f"mu={cfg.mix_mu:g} exceeds 1 - lambda/min(F) = {bound:.4g} (min F = {fmin:.4g})"
        )
    return rec


def contraction_ratio(residuals) -> float:
    """Largest observed ratio r_t / r_{t-1} over consecutive residuals."""
    r = [x for x in residuals]
    ratios = [b / a for a, b in zip(r, r[1:]) if a > 0]
    return max(ratios) if ratios else math.nan
