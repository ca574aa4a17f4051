import numpy as np
import pytest

from geoproto.errors import ConfigError
from geoproto.manifest import (
    EpisodeEntry,
    RunManifest,
    config_from_kv,
    config_to_kv,
    parse_kv,
    read_manifest,
)
from geoproto.segmenter import PipelineConfig
from geoproto.synth import SynthSpec, generate_corpus, generate_episode, validate_mask


def test_synth_deterministic():
    spec = SynthSpec(shape_kind="mixed", count=4, size=(64, 64), seed=7)
    a, b = generate_corpus(spec), generate_corpus(spec)
    for x, y in zip(a, b):
        assert x.query_image.tobytes() == y.query_image.tobytes()
        assert x.query_mask.tobytes() == y.query_mask.tobytes()


def test_identity_deformation():
    spec = SynthSpec(shape_kind="blob", count=3, deform_amp=0.0, noise_sigma=0.0, seed=7)
    for e in generate_corpus(spec):
        for m in e.support_masks:
            np.testing.assert_array_equal(m, e.query_mask)


@pytest.mark.parametrize("kind", ["ellipse", "crescent", "blob"])
def test_generated_masks_valid(kind):
    spec = SynthSpec(shape_kind=kind, count=15, seed=11)
    for e in generate_corpus(spec):
        for m in [*e.support_masks, e.query_mask]:
            assert m.dtype == np.uint8 and validate_mask(m)


def test_spec_validation():
    with pytest.raises(ConfigError):
        SynthSpec(shape_kind="square")
    with pytest.raises(ConfigError):
        SynthSpec(size=(8, 8))


def test_kv_parsing():
    assert parse_kv("a=1\n# note\nb = x y  # trailing\n") == {"a": "1", "b": "x y"}
    with pytest.raises(ConfigError):
        parse_kv("a=1\na=2\n")
    with pytest.raises(ConfigError):
        parse_kv("justtext\n")


def test_config_roundtrip():
    cfg = PipelineConfig(fixed_theta=0.3, normalize_g=False, pooling="mean")
    assert config_from_kv(config_to_kv(cfg)) == cfg
    assert config_from_kv(config_to_kv(PipelineConfig())) == PipelineConfig()
    with pytest.raises(ConfigError):
        config_from_kv({"bogus": "1"})
    with pytest.raises(ConfigError):
        config_from_kv({"mix_mu": "1.2"})


def test_manifest_roundtrip(tmp_path):
    man = RunManifest(config={"step_lambda": "0.2"}, seed=9, extra={"synth.count": "1"})
    man.episodes.append(EpisodeEntry("000", [tmp_path / "s.gpt"], [tmp_path / "sm.gpt"],
                                     tmp_path / "q.gpt", tmp_path / "qm.gpt"))
    man.write(tmp_path / "manifest.txt")
    back = read_manifest(tmp_path / "manifest.txt")
    assert back.seed == 9 and back.config == {"step_lambda": "0.2"}
    assert back.extra == {"synth.count": "1"}
    assert back.episodes[0].query_mask == tmp_path / "qm.gpt"
    assert "episode.0.query.image=q.gpt" in (tmp_path / "manifest.txt").read_text()
