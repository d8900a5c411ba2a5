import struct

import numpy as np
import pytest

from csad import tensor_io
from csad.errors import BadMagic, DimMismatch, NonFinite, TooManyClasses, UnsupportedFormat
from csad.tensor_io import (FeatureTensor, LabelMap, MaskSet, read_label_map,
                            read_mask_set, read_tensor, write_label_map,
                            write_mask_set, write_tensor)


def test_minimal_tensor_roundtrip(tmp_path):
    t = FeatureTensor(np.zeros((1, 1, 1), dtype=np.float32))
    write_tensor(t, tmp_path / "t.cstf")
    back = read_tensor(tmp_path / "t.cstf")
    assert back.dims == (1, 1, 1)
    assert back.data[0, 0, 0] == 0.0


def test_reference_shape_accepted(tmp_path):
    t = FeatureTensor(np.zeros((512, 56, 56), dtype=np.float32))
    write_tensor(t, tmp_path / "big.cstf")
    assert read_tensor(tmp_path / "big.cstf").dims == (512, 56, 56)


def test_payload_length_mismatch(tmp_path):
    header = b"CSTF" + struct.pack("<II", 1, 3) + struct.pack("<3I", 2, 2, 2)
    (tmp_path / "bad.cstf").write_bytes(header + b"\x00" * 4 * 7)
    with pytest.raises(DimMismatch):
        read_tensor(tmp_path / "bad.cstf")


def test_trailing_bytes_rejected(tmp_path):
    t = FeatureTensor(np.ones((2, 2), dtype=np.float32))
    write_tensor(t, tmp_path / "t.cstf")
    raw = (tmp_path / "t.cstf").read_bytes()
    (tmp_path / "t2.cstf").write_bytes(raw + b"\x00\x00\x00\x00")
    with pytest.raises(DimMismatch):
        read_tensor(tmp_path / "t2.cstf")


def test_bad_magic(tmp_path):
    (tmp_path / "x.cstf").write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(BadMagic):
        read_tensor(tmp_path / "x.cstf")


def test_nonfinite_rejected(tmp_path):
    with pytest.raises(NonFinite):
        FeatureTensor(np.array([[np.nan]], dtype=np.float32))
    good = FeatureTensor(np.ones((1, 1), dtype=np.float32))
    write_tensor(good, tmp_path / "t.cstf")
    raw = bytearray((tmp_path / "t.cstf").read_bytes())
    raw[-4:] = struct.pack("<f", np.inf)
    (tmp_path / "inf.cstf").write_bytes(bytes(raw))
    with pytest.raises(NonFinite):
        read_tensor(tmp_path / "inf.cstf")


def test_roundtrip_bit_exact_random(tmp_path):
    rng = np.random.default_rng(7)
    t = FeatureTensor(rng.normal(size=(3, 4, 5)).astype(np.float32))
    write_tensor(t, tmp_path / "r.cstf")
    assert np.array_equal(read_tensor(tmp_path / "r.cstf").data, t.data)


def test_roundtrip_extreme_magnitudes(tmp_path):
    t = FeatureTensor(np.array([1e-38, 1e38, -1e-38, -1e38], dtype=np.float32))
    write_tensor(t, tmp_path / "e.cstf")
    a = read_tensor(tmp_path / "e.cstf").data
    assert a.tobytes() == t.data.tobytes()


def test_header_is_little_endian(tmp_path):
    t = FeatureTensor(np.arange(6, dtype=np.float32).reshape(2, 3))
    write_tensor(t, tmp_path / "le.cstf")
    raw = (tmp_path / "le.cstf").read_bytes()
    assert raw[:4] == b"CSTF"
    assert struct.unpack("<II", raw[4:12]) == (1, 2)
    assert struct.unpack("<2I", raw[12:20]) == (2, 3)
    assert np.frombuffer(raw[20:], dtype="<f4").tolist() == list(range(6))


def test_label_map_roundtrip(tmp_path):
    lm = LabelMap(np.array([[0, 1], [1, 0]], dtype=np.uint8))
    write_label_map(lm, tmp_path / "m.pgm")
    raw = (tmp_path / "m.pgm").read_bytes()
    assert raw.endswith(b"\x00\x01\x01\x00")
    back = read_label_map(tmp_path / "m.pgm")
    assert np.array_equal(back.pixels, lm.pixels)


def test_label_map_class_255_ok(tmp_path):
    lm = LabelMap(np.full((3, 3), 255, dtype=np.uint8))
    write_label_map(lm, tmp_path / "m.pgm")
    assert read_label_map(tmp_path / "m.pgm").pixels.max() == 255


def test_label_map_too_many_classes():
    with pytest.raises(TooManyClasses):
        LabelMap(np.arange(300).reshape(20, 15))


def test_label_map_rejects_plain_pgm(tmp_path):
    (tmp_path / "a.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
    with pytest.raises(UnsupportedFormat):
        read_label_map(tmp_path / "a.pgm")


def test_label_map_roundtrip_random(tmp_path):
    rng = np.random.default_rng(3)
    for i in range(10):
        px = rng.integers(0, 256, size=(rng.integers(1, 40), rng.integers(1, 40)),
                          dtype=np.uint8)
        write_label_map(LabelMap(px), tmp_path / f"{i}.pgm")
        assert np.array_equal(read_label_map(tmp_path / f"{i}.pgm").pixels, px)


def test_mask_set_roundtrip(tmp_path):
    rng = np.random.default_rng(11)
    masks = tuple(rng.random((9, 7)) > 0.5 for _ in range(4))
    ms = MaskSet(masks)
    write_mask_set(ms, tmp_path / "ms")
    back = read_mask_set(tmp_path / "ms")
    assert len(back) == 4
    for a, b in zip(ms, back):
        assert np.array_equal(a, b)


def test_mask_set_dim_mismatch():
    with pytest.raises(DimMismatch):
        MaskSet((np.zeros((2, 2), bool), np.zeros((3, 3), bool)))
