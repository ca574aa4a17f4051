import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from geoproto.errors import BadMagic, DimMismatch, NonBinaryMask, NotP5, TruncatedPayload, ZeroArea
from geoproto.tensor_core import (
    HEADER_FIXED,
    MAGIC,
    decode_tensor,
    encode_tensor,
    pgm_bytes,
    read_pgm,
    read_tensor,
    resize_bilinear,
    write_pgm,
    write_tensor,
)


def _header(code, dims):
    return MAGIC + bytes([code, len(dims)]) + np.asarray(dims, dtype="<u8").tobytes()


def test_f64_2x2_roundtrip():
    vals = np.array([[1.0, -2.5], [3.25, 0.0]])
    raw = _header(0, [2, 2]) + vals.astype("<f8").tobytes()
    out = decode_tensor(raw)
    assert out.shape == (2, 2)
    np.testing.assert_array_equal(out, vals)
    assert encode_tensor(out) == raw


def test_u8_with_value_2_rejected():
    raw = _header(1, [3, 3]) + bytes([0, 1, 0, 1, 2, 0, 0, 0, 1])
    with pytest.raises(NonBinaryMask):
        decode_tensor(raw)


def test_empty_dims_rejected():
    with pytest.raises(DimMismatch):
        decode_tensor(MAGIC + bytes([0, 0]))
    with pytest.raises(DimMismatch):
        encode_tensor(np.float64(3.0))


def test_scalar_zero_payload_is_eight_zero_bytes():
    raw = encode_tensor(np.zeros((1, 1)))
    assert raw[HEADER_FIXED + 16:] == b"\x00" * 8


def test_bad_magic_and_truncation():
    raw = encode_tensor(np.ones((2, 3)))
    with pytest.raises(BadMagic):
        decode_tensor(b"NOTATENS" + raw[8:])
    with pytest.raises(TruncatedPayload):
        decode_tensor(raw[:-1])


def test_random_feature_maps_roundtrip(tmp_path, rng):
    for i in range(100):
        t = rng.normal(size=(4, 5, 6))
        p = tmp_path / f"t{i}.gpt"
        write_tensor(t, p)
        back = read_tensor(p)
        assert back.tobytes() == t.astype("<f8").tobytes()


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=1, max_dims=4, max_side=5),
                  elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_encode_decode_identity(arr):
    back = decode_tensor(encode_tensor(arr))
    assert back.shape == arr.shape
    assert back.tobytes() == arr.tobytes()


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.uint8, hnp.array_shapes(min_dims=2, max_dims=2, min_side=1, max_side=12),
                  elements=st.integers(0, 1)))
def test_mask_pgm_roundtrip(mask):
    from geoproto.tensor_core import _parse_pgm

    img = _parse_pgm(pgm_bytes(mask))
    back = (img >= 128).astype(np.uint8)
    if mask.min() == mask.max():
        # constant fields normalise to all zero
        assert not back.any()
    else:
        np.testing.assert_array_equal(back, mask)


def test_pgm_threshold(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 0, 255]))
    np.testing.assert_array_equal(read_pgm(p), [[0, 1], [0, 1]])


def test_constant_field_pgm_all_zero(tmp_path):
    p = tmp_path / "c.pgm"
    write_pgm(np.full((3, 4), 7.0), p)
    assert p.read_bytes().endswith(bytes(12))


def test_pgm_errors(tmp_path):
    p = tmp_path / "x.pgm"
    p.write_bytes(b"P2\n1 1\n255\n0")
    with pytest.raises(NotP5):
        read_pgm(p)
    p.write_bytes(b"P5\n0 2\n255\n")
    with pytest.raises(ZeroArea):
        read_pgm(p)


def test_atomic_write_leaves_no_temp(tmp_path):
    write_tensor(np.ones((2, 2)), tmp_path / "sub" / "a.gpt")
    assert sorted(x.name for x in (tmp_path / "sub").iterdir()) == ["a.gpt"]


def test_resize_identity_and_constant():
    x = np.arange(12.0).reshape(3, 4)
    np.testing.assert_allclose(resize_bilinear(x, (3, 4)), x)
    np.testing.assert_allclose(resize_bilinear(np.full((8, 8), 2.5), (3, 5)), 2.5)
