"""Geodesic-weighted global prototype and adaptive grid prototypes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adaptive import AdaptiveParams
from .errors import ChannelMismatch, ShapeMismatch

OCCUPANCY_MIN = 1e-3


@dataclass(frozen=True)
class Prototype:
    vector: np.ndarray
    kind: str  # "global" | "grid" | "background"
    cell: tuple[int, int] | None = None
    support_weight: float = 0.0


@dataclass(frozen=True)
class PrototypeSet:
    global_proto: Prototype
    grid: tuple[Prototype, ...]
    grid_shape: tuple[int, int] = (8, 8)
    density_field: np.ndarray | None = None

    def __len__(self):
        return 1 + len(self.grid)

    @property
    def channels(self) -> int:
        return self.global_proto.vector.shape[0]

    def vectors(self) -> np.ndarray:
        """Prototypes as rows, grid cells first, global last."""
        return np.stack([p.vector for p in self.grid] + [self.global_proto.vector])

    def prototypes(self) -> list[Prototype]:
        return list(self.grid) + [self.global_proto]


def _spatial_check(features, *fields):
    hw = features.shape[1:]
    for f in fields:
        if np.shape(f) != hw:
            raise ShapeMismatch(f"field {np.shape(f)} does not match feature grid {hw}")


def weighted_average(features: np.ndarray, weight: np.ndarray, eps: float) -> tuple[np.ndarray, float]:
    """``sum(weight * f) / (sum(weight) + eps)`` with a fixed summation order."""
    c = features.shape[0]
    flat_w = weight.reshape(-1)
    mass = float(flat_w.sum())
    vec = features.reshape(c, -1) @ flat_w
    return vec / (mass + eps), mass


def global_prototype(features, mask, weights, eps: float = 1e-6) -> Prototype:
    f = np.asarray(features, dtype=np.float64)
    _spatial_check(f, mask, weights)
    mw = np.asarray(mask, dtype=np.float64) * np.asarray(weights, dtype=np.float64)
    vec, mass = weighted_average(f, mw, eps)
    return Prototype(vec, "global", None, mass)


def central_gradient_norm(g) -> np.ndarray:
    """``|grad G|`` by central differences, one-sided on the border."""
    gv = np.asarray(getattr(g, "values", g), dtype=np.float64)
    parts = []
    for axis in (0, 1):
        if gv.shape[axis] < 2:
            parts.append(np.zeros_like(gv))
        else:
            parts.append(np.gradient(gv, axis=axis))
    return np.sqrt(parts[0] ** 2 + parts[1] ** 2)


def density_field(g, params: AdaptiveParams) -> np.ndarray:
    """Sampling density ``1 + sigma * tau * |grad G|``."""
    return 1.0 + params.sigma_density * params.tau_density * central_gradient_norm(g)


def cell_bounds(n: int, cells: int) -> list[tuple[int, int]]:
    """Split ``range(n)`` into ``cells`` contiguous blocks of ceil(n/cells); the last may be smaller."""
    size = -(-n // cells)
    return [(min(i * size, n), min((i + 1) * size, n)) for i in range(cells)]


def grid_prototypes(features, mask, weights, rho, grid_shape=(8, 8),
                    occupancy_min: float = OCCUPANCY_MIN, eps: float = 1e-6) -> list[Prototype]:
    f = np.asarray(features, dtype=np.float64)
    _spatial_check(f, mask, weights, rho)
    wm = np.asarray(rho, dtype=np.float64) * np.asarray(weights, dtype=np.float64) \
        * np.asarray(mask, dtype=np.float64)
    _, h, w = f.shape
    out = []
    for gi, (r0, r1) in enumerate(cell_bounds(h, grid_shape[0])):
        for gj, (c0, c1) in enumerate(cell_bounds(w, grid_shape[1])):
            if r1 <= r0 or c1 <= c0:
                continue
            cw = wm[r0:r1, c0:c1]
            mass = float(cw.sum())
            if mass < occupancy_min:
                continue
            vec, _ = weighted_average(np.ascontiguousarray(f[:, r0:r1, c0:c1]), cw, eps)
            out.append(Prototype(vec, "grid", (gi, gj), mass))
    return out


def unified_set(global_proto: Prototype, grid, grid_shape=(8, 8), density=None) -> PrototypeSet:
    c = global_proto.vector.shape[0]
    for p in grid:
        if p.vector.shape[0] != c:
            raise ChannelMismatch(f"grid prototype has {p.vector.shape[0]} channels, global has {c}")
    return PrototypeSet(global_proto, tuple(grid), tuple(grid_shape), density)


def background_prototype(features, mask, eps: float = 1e-6) -> Prototype | None:
    """Uniform average over the mask complement; None when the complement is empty."""
    f = np.asarray(features, dtype=np.float64)
    comp = 1.0 - np.asarray(mask, dtype=np.float64)
    if comp.sum() <= 0:
        return None
    vec, mass = weighted_average(f, comp, eps)
    return Prototype(vec, "background", None, mass)


def prototype_matrix(pset: PrototypeSet) -> np.ndarray:
    """Serialise a set as rows ``[vector..., kind, cell_row, cell_col, support_weight]``.

    kind is 0 for global and 1 for grid; global rows carry cell (-1, -1).
    """
    rows = []
    for p in pset.prototypes():
        kind = 0.0 if p.kind == "global" else 1.0
        r, c = p.cell if p.cell is not None else (-1, -1)
        rows.append(np.concatenate([p.vector, [kind, r, c, p.support_weight]]))
    return np.stack(rows)
