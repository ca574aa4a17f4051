import numpy as np
import pytest

from geoproto.errors import ConfigError, DimMismatch, NonFinite
from geoproto.features import FeatureConfig, extract, ingest
from geoproto.tensor_core import write_tensor


def test_default_channels_and_resolution(rng):
    f = extract(rng.random((64, 48)))
    assert f.shape == (6, 8, 6)


def test_constant_image():
    f = extract(np.full((32, 32), 0.7))
    assert np.max(np.abs(f)) < 1e-6


def test_zscore_stats(rng):
    f = extract(rng.random((64, 64)))
    np.testing.assert_allclose(f.mean(axis=(1, 2)), 0, atol=1e-6)
    np.testing.assert_allclose(f.std(axis=(1, 2)), 1, atol=1e-6)


def test_shift_equivariance(rng):
    img = np.zeros((96, 96))
    img[24:64, 24:56] = rng.random((40, 32))
    shifted = np.roll(img, 8, axis=1)
    a, b = extract(img), extract(shifted)
    np.testing.assert_allclose(b[:, :, 2:-1], a[:, :, 1:-2], atol=1e-9)


def test_deterministic(rng):
    img = rng.random((40, 40))
    assert extract(img).tobytes() == extract(img.copy()).tobytes()


def test_bad_inputs():
    with pytest.raises(NonFinite):
        extract(np.full((16, 16), np.nan))
    with pytest.raises(ConfigError):
        FeatureConfig(window=4)
    with pytest.raises(ConfigError):
        FeatureConfig(scales=())


def test_ingest(tmp_path, rng):
    t = rng.normal(size=(6, 32, 32))
    write_tensor(t, tmp_path / "f.gpt")
    np.testing.assert_array_equal(ingest(tmp_path / "f.gpt", (32, 32)), t)
    write_tensor(rng.normal(size=(6, 64, 64)), tmp_path / "g.gpt")
    with pytest.raises(DimMismatch):
        ingest(tmp_path / "g.gpt", (32, 32))
