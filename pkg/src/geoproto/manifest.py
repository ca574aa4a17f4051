"""Plain ``key=value`` manifests for configs, episodes and run outputs.

Layout of an episode manifest::

    seed=7
    synth.shape_kind=mixed
    step_lambda=0.1            # any PipelineConfig / sub-config field
    episode.0.support.0.image=ep000/support0_image.gpt
    episode.0.support.0.mask=ep000/support0_mask.gpt
    episode.0.query.image=ep000/query_image.gpt
    episode.0.query.mask=ep000/query_mask.gpt

Relative paths resolve against the manifest's directory.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .adaptive import AdaptiveParams
from .errors import ConfigError
from .features import FeatureConfig
from .geodesic import RefineConfig
from .segmenter import PipelineConfig
from .tensor_core import atomic_write_text


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise ConfigError(f"line {n}: empty key")
        if k in out:
            raise ConfigError(f"line {n}: duplicate key {k!r}")
        out[k] = v
    return out


def dump_kv(items: dict) -> str:
    return "".join(f"{k}={v}\n" for k, v in items.items())


def read_kv(path) -> dict[str, str]:
    return parse_kv(Path(path).read_text(encoding="utf-8"))


def write_kv(path, items: dict) -> None:
    atomic_write_text(path, dump_kv(items))


# ---------------------------------------------------------------------------
# config <-> key=value

_SECTIONS = {"refine": RefineConfig, "params": AdaptiveParams, "features": FeatureConfig}
_SKIP = {"clamps"}


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def _parse(text: str, like, name: str):
    t = text.strip()
    try:
        if name in ("fixed_theta", "fixed_beta"):
            return None if t.lower() == "none" else float(t)
        if isinstance(like, bool):
            if t.lower() in ("1", "true", "yes", "on"):
                return True
            if t.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(t)
        if isinstance(like, int):
            return int(t)
        if isinstance(like, float):
            return float(t)
        if isinstance(like, tuple):
            kind = type(like[0]) if like else float
            return tuple(kind(x) for x in t.replace("x", ",").split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse {name}={text!r}") from exc
    return t


def config_to_kv(cfg: PipelineConfig) -> dict[str, str]:
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name in _SECTIONS:
            for g in fields(v):
                if g.name not in _SKIP:
                    out[g.name] = _fmt(getattr(v, g.name))
        else:
            out[f.name] = _fmt(v)
    return out


def config_keys() -> set[str]:
    return set(config_to_kv(PipelineConfig()))


def config_from_kv(items: dict[str, str], base: PipelineConfig | None = None,
                   strict: bool = True) -> PipelineConfig:
    """Build a ``PipelineConfig`` from flat keys; unknown keys fail when ``strict``."""
    base = base or PipelineConfig()
    owner = {}
    for sec in _SECTIONS:
        for g in fields(getattr(base, sec)):
            if g.name not in _SKIP:
                owner[g.name] = sec
    top = {f.name for f in fields(base)} - set(_SECTIONS)
    updates: dict[str, dict] = {sec: {} for sec in _SECTIONS}
    top_updates = {}
    for k, v in items.items():
        if k in owner:
            sec = owner[k]
            updates[sec][k] = _parse(v, getattr(getattr(base, sec), k), k)
        elif k in top:
            top_updates[k] = _parse(v, getattr(base, k), k)
        elif strict:
            raise ConfigError(f"unknown config key {k!r}")
    for sec, up in updates.items():
        if up:
            top_updates[sec] = replace(getattr(base, sec), **up)
    return replace(base, **top_updates)


# ---------------------------------------------------------------------------
# run manifests


@dataclass
class EpisodeEntry:
    episode_id: str
    support_images: list[Path]
    support_masks: list[Path]
    query_image: Path
    query_mask: Path | None = None


@dataclass
class RunManifest:
    config: dict[str, str] = field(default_factory=dict)
    seed: int = 0
    episodes: list[EpisodeEntry] = field(default_factory=list)
    extra: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)

    def to_kv(self, root: Path | None = None) -> dict[str, str]:
        def rel(p):
            p = Path(p)
            if root is not None:
                try:
                    return p.resolve().relative_to(Path(root).resolve()).as_posix()
                except ValueError:
                    return str(p)
            return str(p)

        out = {"seed": str(self.seed)}
        out.update(self.extra)
        out.update(self.config)
        for i, ep in enumerate(self.episodes):
            pre = f"episode.{i}"
            out[f"{pre}.id"] = ep.episode_id
            for k, (img, m) in enumerate(zip(ep.support_images, ep.support_masks)):
                out[f"{pre}.support.{k}.image"] = rel(img)
                out[f"{pre}.support.{k}.mask"] = rel(m)
            out[f"{pre}.query.image"] = rel(ep.query_image)
            if ep.query_mask is not None:
                out[f"{pre}.query.mask"] = rel(ep.query_mask)
        for k, v in self.outputs.items():
            out[f"output.{k}"] = v
        return out

    def write(self, path) -> None:
        write_kv(path, self.to_kv(Path(path).parent))


def read_manifest(path) -> RunManifest:
    path = Path(path)
    kv = read_kv(path)
    root = path.parent
    known = config_keys()
    man = RunManifest()
    eps: dict[int, dict[str, str]] = {}
    for k, v in kv.items():
        if k == "seed":
            try:
                man.seed = int(v)
            except ValueError as exc:
                raise ConfigError(f"bad seed {v!r}") from exc
        elif k.startswith("episode."):
            parts = k.split(".", 2)
            if len(parts) < 3 or not parts[1].isdigit():
                raise ConfigError(f"bad episode key {k!r}")
            eps.setdefault(int(parts[1]), {})[parts[2]] = v
        elif k.startswith("output."):
            man.outputs[k[len("output."):]] = v
        elif k in known:
            man.config[k] = v
        else:
            man.extra[k] = v
    for i in sorted(eps):
        e = eps[i]
        imgs, masks = [], []
        k = 0
        while f"support.{k}.image" in e:
            imgs.append(root / e[f"support.{k}.image"])
            if f"support.{k}.mask" not in e:
                raise ConfigError(f"episode {i}: support {k} has no mask")
            masks.append(root / e[f"support.{k}.mask"])
            k += 1
        if not imgs or "query.image" not in e:
            raise ConfigError(f"episode {i}: needs at least one support and a query image")
        qm = root / e["query.mask"] if "query.mask" in e else None
        man.episodes.append(EpisodeEntry(e.get("id", f"{i:03d}"), imgs, masks,
                                         root / e["query.image"], qm))
    return man


def check_paths_exist(man: RunManifest) -> None:
    for ep in man.episodes:
        for p in [*ep.support_images, *ep.support_masks, ep.query_image,
                  *([ep.query_mask] if ep.query_mask else [])]:
            if not Path(p).exists():
                raise FileNotFoundError(2, "No such file", str(p))

