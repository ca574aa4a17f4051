"""``geoproto`` command line.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import checks
from .errors import ConfigError, IoFailure, ValidationError
from .experiments import (
    CSV_COLUMNS,
    evaluate,
    map_ordered,
    mean_row,
    resolve_threads,
    rows_to_csv,
)
from .features import extract
from .geodesic import edt_init
from .manifest import (
    EpisodeEntry,
    RunManifest,
    check_paths_exist,
    config_from_kv,
    config_to_kv,
    read_kv,
    read_manifest,
    write_kv,
)
from .prototype import prototype_matrix
from .segmenter import (
    Episode,
    PipelineConfig,
    Prediction,
    align_episode,
    geodesic_stage,
    segment_episode,
    support_prototypes,
)
from .synth import SHAPE_KINDS, SynthSpec, generate_episode, validate_mask
from .tensor_core import (
    atomic_write_text,
    load_field_or_mask,
    load_image,
    read_tensor,
    write_pgm,
    write_tensor,
)


def _size(text: str) -> tuple[int, int]:
    parts = text.lower().replace(",", "x").split("x")
    if len(parts) == 1:
        parts = parts * 2
    try:
        h, w = (int(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad size {text!r}, expected HxW") from exc
    return h, w


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d if suppress else 0)
    p.add_argument("--config", type=Path, default=d, help="key=value config file")
    p.add_argument("--out", type=Path, default=d if suppress else Path("."))
    p.add_argument("--dump-pgm", action="store_true", default=d if suppress else False)
    p.add_argument("--threads", type=int, default=d,
                   help="worker threads (0 = auto; falls back to GEOPROTO_THREADS)")


def _pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", type=float, help="fix theta instead of deriving it")
    p.add_argument("--beta", type=float, help="fix beta instead of deriving it")
    p.add_argument("--no-normalize-g", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geoproto", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic episode corpus")
    _global_flags(p, suppress=True)
    p.add_argument("--shape-kind", choices=SHAPE_KINDS + ("mixed",), default="mixed")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--noise-sigma", type=float, default=SynthSpec.noise_sigma)
    p.add_argument("--deform-amp", type=float, default=SynthSpec.deform_amp)
    p.add_argument("--size", type=_size, default=(256, 256))
    p.add_argument("--shots", type=int, default=5)

    p = sub.add_parser("features", help="handcrafted feature map of an image")
    _global_flags(p, suppress=True)
    p.add_argument("--image", type=Path, required=True)

    p = sub.add_parser("distfield", help="speed, gradient and geodesic distance fields of a mask")
    _global_flags(p, suppress=True)
    _pipeline_flags(p)
    p.add_argument("--mask", type=Path, required=True)
    p.add_argument("--image", type=Path, help="intensity image (intensity gradient mode)")

    p = sub.add_parser("protos", help="prototype set of one support image/mask")
    _global_flags(p, suppress=True)
    _pipeline_flags(p)
    p.add_argument("--image", type=Path, required=True, help="image or (C,H,W) feature TensorFile")
    p.add_argument("--mask", type=Path, required=True)

    p = sub.add_parser("segment", help="segment every episode of a manifest")
    _global_flags(p, suppress=True)
    _pipeline_flags(p)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--shots", type=int, default=1)
    p.add_argument("--no-align", action="store_true", help="skip support re-prediction")

    p = sub.add_parser("evaluate", help="score predictions written by segment")
    _global_flags(p, suppress=True)
    p.add_argument("--predictions", type=Path, required=True)
    p.add_argument("--spacing", type=float, default=1.0, help="mm per pixel for HD95")

    p = sub.add_parser("check", help="run the property suites")
    _global_flags(p, suppress=True)
    p.add_argument("suite", nargs="?", default="all", choices=checks.SUITES + ("all",))
    return parser


def _config(args, manifest_cfg: dict | None = None) -> PipelineConfig:
    cfg = config_from_kv(manifest_cfg or {})
    if getattr(args, "config", None):
        cfg = config_from_kv(read_kv(args.config), base=cfg)
    if getattr(args, "theta", None) is not None:
        cfg = replace(cfg, fixed_theta=args.theta)
    if getattr(args, "beta", None) is not None:
        cfg = replace(cfg, fixed_beta=args.beta)
    if getattr(args, "no_normalize_g", False):
        cfg = replace(cfg, normalize_g=False)
    return cfg


def _write_field(out: Path, name: str, arr, dump_pgm: bool) -> list[str]:
    write_tensor(arr, out / f"{name}.gpt")
    written = [f"{name}.gpt"]
    if dump_pgm and np.ndim(arr) == 2:
        write_pgm(arr, out / f"{name}.pgm")
        written.append(f"{name}.pgm")
    return written


def cmd_synth(args) -> int:
    spec = SynthSpec(shape_kind=args.shape_kind, count=args.count, noise_sigma=args.noise_sigma,
                     deform_amp=args.deform_amp, size=args.size, seed=args.seed, shots=args.shots)
    out: Path = args.out
    episodes = [generate_episode(spec, i) for i in range(spec.count)]
    for i, e in enumerate(episodes):
        for m in [*e.support_masks, e.query_mask]:
            if not validate_mask(m):
                raise ValidationError(f"episode {i}: generated mask is empty or full-frame")
    man = RunManifest(seed=spec.seed, extra={
        "synth.shape_kind": spec.shape_kind, "synth.count": str(spec.count),
        "synth.noise_sigma": repr(spec.noise_sigma), "synth.deform_amp": repr(spec.deform_amp),
        "synth.size": f"{spec.size[0]}x{spec.size[1]}", "synth.shots": str(spec.shots),
    })
    for i, e in enumerate(episodes):
        d = out / f"ep{i:03d}"
        imgs, masks = [], []
        for k, (img, m) in enumerate(zip(e.support_images, e.support_masks)):
            write_tensor(img, d / f"support{k}_image.gpt")
            write_tensor(m, d / f"support{k}_mask.gpt")
            imgs.append(d / f"support{k}_image.gpt")
            masks.append(d / f"support{k}_mask.gpt")
        write_tensor(e.query_image, d / "query_image.gpt")
        write_tensor(e.query_mask, d / "query_mask.gpt")
        if args.dump_pgm:
            write_pgm(e.query_image, d / "query_image.pgm")
            write_pgm(e.query_mask, d / "query_mask.pgm")
        man.episodes.append(EpisodeEntry(f"{i:03d}", imgs, masks, d / "query_image.gpt",
                                         d / "query_mask.gpt"))
    man.write(out / "manifest.txt")
    print(f"wrote {spec.count} episodes to {out / 'manifest.txt'}")
    return 0


def cmd_features(args) -> int:
    cfg = _config(args)
    feats = extract(load_image(args.image), cfg.features)
    write_tensor(feats, args.out / "features.gpt")
    print(f"features {feats.shape} -> {args.out / 'features.gpt'}")
    return 0


def cmd_distfield(args) -> int:
    cfg = _config(args)
    mask = load_field_or_mask(args.mask)
    image = load_image(args.image) if args.image else None
    geo = geodesic_stage(mask, cfg, image=image)
    out: Path = args.out
    written = []
    written += _write_field(out, "G", geo.distance.values, args.dump_pgm)
    written += _write_field(out, "F", geo.speed.values, args.dump_pgm)
    written += _write_field(out, "grad", geo.grad, args.dump_pgm)
    written += _write_field(out, "weights", geo.weights, args.dump_pgm)
    p = geo.params
    meta = {
        "gradient_source": cfg.refine.gradient_source,
        "beta_used": repr(geo.speed.beta_used),
        "iterations_run": str(geo.distance.iterations_run),
        "converged_residual": repr(geo.distance.converged_residual),
        "flags": ",".join(edt_init(mask).flags) or "none",
        "theta": repr(p.theta), "beta": repr(p.beta), "sigma_density": repr(p.sigma_density),
        "tau_density": repr(p.tau_density), "clamps": ",".join(p.clamps) or "none",
        "centrality_cg": repr(geo.stats.centrality_cg), "boundary_bs": repr(geo.stats.boundary_bs),
        "speed_var_sv": repr(geo.stats.speed_var_sv),
        "stable": str(geo.stability["stable"]).lower(),
        "mu_bound": repr(geo.stability["mu_bound"]),
    }
    meta.update({f"output.{i}": w for i, w in enumerate(written)})
    write_kv(out / "distfield.txt", meta)
    if not geo.stability["stable"]:
        print(f"warning: {geo.stability['warning']}", file=sys.stderr)
    print(f"distance field written to {out}")
    return 0


def cmd_protos(args) -> int:
    cfg = _config(args)
    mask = load_field_or_mask(args.mask)
    sp = support_prototypes(load_image(args.image), mask, cfg)
    mat = prototype_matrix(sp.foreground)
    write_tensor(mat, args.out / "protos.gpt")
    meta = {
        "num_prototypes": str(len(sp.foreground)),
        "num_grid": str(len(sp.foreground.grid)),
        "channels": str(sp.foreground.channels),
        "grid_shape": f"{cfg.grid_shape[0]}x{cfg.grid_shape[1]}",
        "columns": "vector[0:C],kind(0=global;1=grid),cell_row,cell_col,support_weight",
    }
    if sp.geodesic is not None:
        meta.update({"theta": repr(sp.geodesic.params.theta), "beta": repr(sp.geodesic.params.beta)})
    meta.update(config_to_kv(cfg))
    write_kv(args.out / "protos.txt", meta)
    if args.dump_pgm and sp.foreground.density_field is not None:
        write_pgm(sp.foreground.density_field, args.out / "density.pgm")
    print(f"{len(sp.foreground)} prototypes -> {args.out / 'protos.gpt'}")
    return 0


def _load_episode(entry: EpisodeEntry, shots: int) -> Episode:
    sup = [(load_image(i), load_field_or_mask(m))
           for i, m in list(zip(entry.support_images, entry.support_masks))[:shots]]
    qm = load_field_or_mask(entry.query_mask) if entry.query_mask else None
    return Episode(sup, load_image(entry.query_image), qm)


def cmd_segment(args) -> int:
    man = read_manifest(args.manifest)
    check_paths_exist(man)
    cfg = _config(args, man.config)
    if args.shots < 1:
        raise ConfigError("--shots must be >= 1")
    threads = resolve_threads(args.threads)
    entries = man.episodes

    def work(entry: EpisodeEntry):
        ep = _load_episode(entry, args.shots)
        pred = segment_episode(ep, cfg)
        al = None if args.no_align else align_episode(ep, pred, cfg)
        return pred, al

    results = map_ordered(work, entries, threads)
    out: Path = args.out
    kv = {"episodes_manifest": str(Path(args.manifest).resolve()), "shots": str(args.shots),
          "seed": str(man.seed)}
    kv.update(config_to_kv(cfg))
    for i, (entry, (pred, al)) in enumerate(zip(entries, results)):
        stem = f"ep{entry.episode_id}"
        _write_field(out, f"{stem}_prob", pred.prob, args.dump_pgm)
        _write_field(out, f"{stem}_mask", pred.mask, args.dump_pgm)
        kv[f"pred.{i}.id"] = entry.episode_id
        kv[f"pred.{i}.prob"] = f"{stem}_prob.gpt"
        kv[f"pred.{i}.mask"] = f"{stem}_mask.gpt"
        if al is not None:
            kv[f"pred.{i}.align_skipped"] = str(al.skipped).lower()
            for k, sp in enumerate(al.predictions):
                write_tensor(sp.prob, out / f"{stem}_align{k}_prob.gpt")
                kv[f"pred.{i}.align.{k}.prob"] = f"{stem}_align{k}_prob.gpt"
    write_kv(out / "predictions.txt", kv)
    print(f"segmented {len(entries)} episodes ({args.shots}-shot) -> {out / 'predictions.txt'}")
    return 0


def cmd_evaluate(args) -> int:
    kv = read_kv(args.predictions)
    root = Path(args.predictions).parent
    if "episodes_manifest" not in kv:
        raise ConfigError("predictions manifest lacks episodes_manifest")
    man = read_manifest(kv["episodes_manifest"])
    check_paths_exist(man)
    shots = int(kv.get("shots", "1"))
    by_id = {e.episode_id: e for e in man.episodes}
    cfg = config_from_kv({k: v for k, v in kv.items() if "." not in k}, strict=False)
    rows = []
    i = 0
    while f"pred.{i}.id" in kv:
        eid = kv[f"pred.{i}.id"]
        if eid not in by_id:
            raise ValidationError(f"prediction {eid} has no episode in the manifest")
        entry = by_id[eid]
        if entry.query_mask is None:
            raise ValidationError(f"episode {eid} has no query mask")
        ep = _load_episode(entry, shots)
        prob = read_tensor(root / kv[f"pred.{i}.prob"])
        mask = read_tensor(root / kv[f"pred.{i}.mask"])
        aligned = []
        k = 0
        while f"pred.{i}.align.{k}.prob" in kv:
            p = read_tensor(root / kv[f"pred.{i}.align.{k}.prob"])
            aligned.append(Prediction(p, (p > 0.5).astype(np.uint8)))
            k += 1
        row = evaluate(ep, cfg, spacing=args.spacing, pred=Prediction(prob, mask),
                       support_preds=aligned)
        row["episode_id"] = eid
        rows.append(row)
        i += 1
    if not rows:
        raise ValidationError("no predictions listed")
    rows.append(mean_row(rows))
    atomic_write_text(args.out / "evaluate.csv", rows_to_csv(rows, CSV_COLUMNS))
    m = rows[-1]
    print(f"{len(rows) - 1} episodes: mean dice {m['dice']:.4f}, mean hd95 {m['hd95_mm']:.3f} mm "
          f"-> {args.out / 'evaluate.csv'}")
    return 0


def cmd_check(args) -> int:
    items = read_kv(args.config) if getattr(args, "config", None) else {}
    results = checks.run_suite(args.suite, items, seed=args.seed)
    for r in results:
        print(r.line())
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} properties passed")
    return 0 if n_fail == 0 else 1


COMMANDS = {
    "synth": cmd_synth,
    "features": cmd_features,
    "distfield": cmd_distfield,
    "protos": cmd_protos,
    "segment": cmd_segment,
    "evaluate": cmd_evaluate,
    "check": cmd_check,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename or exc}", file=sys.stderr)
        return 2
    except IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
