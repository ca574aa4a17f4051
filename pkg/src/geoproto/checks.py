"""Named property suites run by ``geoproto check``.

Every suite is seeded and returns ``CheckResult`` records instead of
raising, so a failing property is reported alongside the others.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import oracles
from .adaptive import AdaptiveParams
from .errors import ConfigError, EmptyMask
from .geodesic import (
    RefineConfig,
    dijkstra_oracle,
    edt_init,
    refine,
    refine_step,
    sobel_gradient_magnitude,
    speed_function,
    stability_report,
)
from .losses import ce_loss, dice_loss, dice_score, hd95, softmax
from .prototype import cell_bounds, central_gradient_norm, density_field, global_prototype, grid_prototypes

SUITES = ("edt", "speed", "refine", "prototypes", "losses")


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    metrics: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  {self.detail}".rstrip()


def random_mask(rng, h: int, w: int) -> np.ndarray:
    """Smoothed-noise blobs, occasionally pure Bernoulli noise."""
    if rng.random() < 0.2:
        return (rng.random((h, w)) < rng.uniform(0.2, 0.8)).astype(np.uint8)
    noise = ndimage.gaussian_filter(rng.normal(size=(h, w)), rng.uniform(0.8, 2.5))
    return (noise > np.quantile(noise, rng.uniform(0.2, 0.8))).astype(np.uint8)


def random_speed(rng, mask, cfg: RefineConfig):
    beta = rng.uniform(0.5, 5.0)
    return speed_function(sobel_gradient_magnitude(mask.astype(np.float64), cfg.eps_grad), beta)


# ---------------------------------------------------------------------------
# edt


def check_edt_oracle(seed: int = 0, n: int = 200, max_size: int = 32) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(n):
        h, w = rng.integers(3, max_size + 1, size=2)
        m = random_mask(rng, h, w)
        worst = max(worst, float(np.max(np.abs(edt_init(m).values - oracles.brute_edt(m)))))
    dt = time.perf_counter() - t0
    return CheckResult("edt.oracle_equivalence", worst <= 1e-9,
                       f"{n} masks <= {max_size}x{max_size}, max |err| = {worst:.3g}, {dt:.1f}s",
                       {"max_error": worst, "seconds": dt})


def check_edt_properties(seed: int = 1, n: int = 60, max_size: int = 16) -> CheckResult:
    """Zero on background and boundary, monotone in distance, 1-Lipschitz (all pixel pairs)."""
    rng = np.random.default_rng(seed)
    bad = []
    for t in range(n):
        h, w = rng.integers(3, max_size + 1, size=2)
        m = random_mask(rng, h, w)
        g = edt_init(m).values
        z = oracles.brute_zero_set(m)
        if z and any(g[p] != 0.0 for p in z):
            bad.append(f"boundary#{t}")
        d = oracles.brute_edt(m).ravel()
        gv = g.ravel()
        order = np.argsort(d, kind="stable")
        if np.any(np.diff(gv[order]) < -1e-12):
            bad.append(f"monotone#{t}")
        rr, cc = np.divmod(np.arange(h * w), w)
        dist = np.hypot(rr[:, None] - rr[None, :], cc[:, None] - cc[None, :])
        if np.any(np.abs(gv[:, None] - gv[None, :]) > dist + 1e-12):
            bad.append(f"lipschitz#{t}")
    return CheckResult("edt.boundary_monotone_lipschitz", not bad,
                       f"{n} masks <= {max_size}x{max_size}" + (f", failures: {bad[:5]}" if bad else ""))


# ---------------------------------------------------------------------------
# speed


def check_speed_bounds(seed: int = 2, n: int = 1000) -> CheckResult:
    rng = np.random.default_rng(seed)
    g = np.abs(rng.normal(0.0, 2.0, size=n)) * rng.choice([0.0, 1.0, 10.0], size=n) + 1e-4
    betas = rng.uniform(0.5, 5.0, size=n)
    viol = 0
    for gi, b in zip(g, betas):
        f = speed_function(np.array([[gi]]), b).values[0, 0]
        lo, hi = 1.0 / (1.0 + 5.0 * gi), 1.0 / (1.0 + 0.5 * gi)
        if not (lo <= f <= hi) or not (0.0 < f <= 1.0):
            viol += 1
    return CheckResult("speed.sandwich_bounds", viol == 0, f"{n} draws, {viol} violations",
                       {"violations": viol})


# ---------------------------------------------------------------------------
# refine


def check_refine_config(cfg_items: dict | None = None) -> tuple[CheckResult, RefineConfig | None]:
    from .manifest import config_from_kv

    try:
        cfg = config_from_kv(cfg_items or {}, strict=False).refine
    except ConfigError as exc:
        return CheckResult("refine.config_invariants", False, str(exc)), None
    return CheckResult("refine.config_invariants", True,
                       f"mu={cfg.mix_mu:g}, lambda={cfg.step_lambda:g}, T={cfg.iterations_T}"), cfg


def check_non_expansive(cfg: RefineConfig, seed: int = 3, n: int = 1000) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_excess = -math.inf
    ratios = []
    for _ in range(n):
        h, w = rng.integers(3, 13, size=2)
        m = random_mask(rng, h, w)
        sp = random_speed(rng, m, cfg)
        g1 = rng.uniform(0.0, 5.0, size=(h, w))
        if rng.random() < 0.5:
            g2 = g1 + rng.uniform(-1.0, 1.0) * m
        else:
            g2 = np.maximum(g1 + rng.normal(0.0, 0.5, size=(h, w)), 0.0)
        din = float(np.max(np.abs(g1 - g2)))
        dout = float(np.max(np.abs(refine_step(g1, sp, m, cfg).values - refine_step(g2, sp, m, cfg).values)))
        worst_excess = max(worst_excess, dout - din)
        if din > 0:
            ratios.append(dout / din)
    ratio = max(ratios) if ratios else math.nan
    return CheckResult("refine.non_expansive", worst_excess <= 1e-12,
                       f"{n} pairs, max(out-in) = {worst_excess:.3g}, max ratio = {ratio:.4f}",
                       {"max_ratio": ratio, "max_excess": worst_excess})


def check_fixed_point(cfg: RefineConfig, seed: int = 4, n: int = 50, size: int = 16) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    ratios = []
    mono_bad = 0
    neg = 0
    warnings = 0
    t0 = time.perf_counter()
    for _ in range(n):
        m = random_mask(rng, size, size)
        if m.all():
            m[0, 0] = 0
        sp = random_speed(rng, m, cfg)
        res = refine(m, sp, cfg, tol=1e-9, max_iter=20000)
        ref = dijkstra_oracle(m, sp, cfg).values
        worst = max(worst, float(np.max(np.abs(res.values - ref))))
        r = np.array(res.residuals)
        if np.any(np.diff(r[1:]) > 1e-12):
            mono_bad += 1
        if np.any(res.values < 0):
            neg += 1
        nz = r[r > 1e-12]
        ratios.extend((nz[2:] / nz[1:-1]).tolist())
        if not stability_report(cfg, sp)["stable"]:
            warnings += 1
    dt = time.perf_counter() - t0
    ratio = float(np.median(ratios)) if ratios else math.nan
    ok = worst <= 1e-6 and mono_bad == 0 and neg == 0
    return CheckResult(
        "refine.fixed_point_agreement", ok,
        f"{n} masks {size}x{size}, sup |refine - dijkstra| = {worst:.3g}, non-monotone residuals: {mono_bad}, "
        f"negative: {neg}, median residual ratio = {ratio:.4f} (mu = {cfg.mix_mu:g}), "
        f"stability warnings: {warnings}/{n}, {dt:.1f}s",
        {"max_error": worst, "residual_ratio": ratio, "stability_warnings": warnings, "seconds": dt},
    )


# ---------------------------------------------------------------------------
# prototypes


def check_prototype_bounds(seed: int = 5, n: int = 500) -> CheckResult:
    rng = np.random.default_rng(seed)
    norm_viol = 0
    dens_viol = 0
    for _ in range(n):
        c = int(rng.integers(1, 9))
        h, w = rng.integers(4, 33, size=2)
        f = rng.normal(0.0, rng.uniform(0.1, 100.0), size=(c, h, w))
        m = random_mask(rng, h, w)
        wts = rng.uniform(0.0, 1.0, size=(h, w))
        g = edt_init(m).values * rng.uniform(0.1, 3.0)
        params = AdaptiveParams(sigma_density=rng.uniform(1.0, 4.0), tau_density=rng.uniform(0.5, 3.0))
        rho = density_field(g, params)
        gmax = float(central_gradient_norm(g).max())
        if rho.min() < 1.0 or rho.max() > 1.0 + 12.0 * gmax + 1e-12:
            dens_viol += 1
        norms = np.sqrt((f**2).sum(axis=0))
        gp = global_prototype(f, m, wts)
        region = norms[m > 0]
        cap = float(region.max()) if region.size else 0.0
        if np.linalg.norm(gp.vector) > cap + 1e-9:
            norm_viol += 1
        gs = (int(rng.integers(1, 9)), int(rng.integers(1, 9)))
        rb, cb = cell_bounds(h, gs[0]), cell_bounds(w, gs[1])
        for p in grid_prototypes(f, m, wts, rho, gs):
            (r0, r1), (c0, c1) = rb[p.cell[0]], cb[p.cell[1]]
            if np.linalg.norm(p.vector) > norms[r0:r1, c0:c1].max() + 1e-9:
                norm_viol += 1
    return CheckResult("prototypes.norm_and_density_bounds", norm_viol == 0 and dens_viol == 0,
                       f"{n} draws, norm violations {norm_viol}, density violations {dens_viol}")


# ---------------------------------------------------------------------------
# losses and metrics


def _rel_err(a: float, b: float, floor: float = 1e-10) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def check_gradients(seed: int = 6, points: int = 20, h: float = 1e-5) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_ce = worst_dice = 0.0
    for _ in range(points):
        hh, ww = rng.integers(3, 8, size=2)
        t = (rng.random((hh, ww)) < 0.5).astype(np.uint8)
        z = rng.normal(0.0, 1.5, size=(2, hh, ww))
        _, grad = ce_loss(softmax(z), t)
        idx = (int(rng.integers(2)), int(rng.integers(hh)), int(rng.integers(ww)))
        num = oracles.central_difference(lambda x: ce_loss(softmax(x), t)[0], z, idx, h)
        worst_ce = max(worst_ce, _rel_err(grad[idx], num))
        p = rng.uniform(0.05, 0.95, size=(hh, ww))
        _, gd = dice_loss(p, t)
        idx2 = (int(rng.integers(hh)), int(rng.integers(ww)))
        num2 = oracles.central_difference(lambda x: dice_loss(x, t)[0], p, idx2, h)
        worst_dice = max(worst_dice, _rel_err(gd[idx2], num2))
    ok = worst_ce < 1e-4 and worst_dice < 1e-4
    return CheckResult("losses.gradient_finite_difference", ok,
                       f"{points} points each, max rel err CE {worst_ce:.2g}, Dice {worst_dice:.2g}",
                       {"ce": worst_ce, "dice": worst_dice})


def check_metric_oracles(seed: int = 7, n: int = 100, max_size: int = 24) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_d = worst_h = 0.0
    for _ in range(n):
        hh, ww = rng.integers(3, max_size + 1, size=2)
        a, b = random_mask(rng, hh, ww), random_mask(rng, hh, ww)
        if not a.any():
            a[rng.integers(hh), rng.integers(ww)] = 1
        if not b.any():
            b[rng.integers(hh), rng.integers(ww)] = 1
        worst_d = max(worst_d, abs(dice_score(a, b) - oracles.brute_dice(a, b)))
        sp = float(rng.uniform(0.5, 2.0))
        try:
            worst_h = max(worst_h, abs(hd95(a, b, sp) - oracles.brute_hd95(a, b, sp)))
        except EmptyMask:
            worst_h = math.inf
    return CheckResult("losses.metric_oracles", worst_d == 0.0 and worst_h <= 1e-9,
                       f"{n} pairs <= {max_size}x{max_size}, dice max err {worst_d:.3g}, hd95 max err {worst_h:.3g}")


def run_suite(name: str, cfg_items: dict | None = None, seed: int = 0) -> list[CheckResult]:
    if name == "all":
        out = []
        for s in SUITES:
            out.extend(run_suite(s, cfg_items, seed))
        return out
    if name == "edt":
        return [check_edt_oracle(seed), check_edt_properties(seed + 1)]
    if name == "speed":
        return [check_speed_bounds(seed + 2)]
    if name == "refine":
        res, cfg = check_refine_config(cfg_items)
        if cfg is None:
            return [res]
        return [res, check_non_expansive(cfg, seed + 3), check_fixed_point(cfg, seed + 4)]
    if name == "prototypes":
        return [check_prototype_bounds(seed + 5)]
    if name == "losses":
        return [check_gradients(seed + 6), check_metric_oracles(seed + 7)]
    raise ConfigError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
