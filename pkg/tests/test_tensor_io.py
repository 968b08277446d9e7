"""Tensor/mask I/O against the numpy reference reader and writer."""

import numpy as np
import pytest

from eigenseg.errors import (
    DimensionError,
    FormatError,
    InvalidValue,
    IoError,
    UnsupportedLayout,
)
from eigenseg.tensor_io import (
    FeatureMap,
    LabelMask,
    load_mask,
    load_tensor,
    save_mask,
    save_matrix,
    save_tensor,
)


def random_tensor(rng, shape):
    return rng.standard_normal(shape)


def test_save_tensor_read_back_by_numpy(tmp_path):
    rng = np.random.default_rng(11)
    arr = random_tensor(rng, (5, 7, 3))
    path = tmp_path / "t.npy"
    save_tensor(FeatureMap(arr), path)
    loaded = np.load(path)
    assert loaded.dtype == np.dtype("<f8")
    assert loaded.shape == (5, 7, 3)
    assert (loaded == arr).all()
    assert not np.isfortran(loaded)


def test_numpy_file_read_back_by_load_tensor(tmp_path):
    rng = np.random.default_rng(12)
    arr = random_tensor(rng, (4, 4, 6))
    path = tmp_path / "t.npy"
    np.save(path, arr)
    fm = load_tensor(path)
    assert (fm.data == arr).all()
    assert fm.height == 4 and fm.width == 4 and fm.channels == 6


def test_float32_widens_exactly(tmp_path):
    rng = np.random.default_rng(13)
    arr = rng.standard_normal((3, 5, 2)).astype(np.float32)
    path = tmp_path / "t32.npy"
    np.save(path, arr)
    fm = load_tensor(path)
    assert fm.data.dtype == np.float64
    assert (fm.data == arr.astype(np.float64)).all()


def test_save_is_byte_deterministic(tmp_path):
    rng = np.random.default_rng(14)
    fm = FeatureMap(random_tensor(rng, (6, 6, 4)))
    a, b = tmp_path / "a.npy", tmp_path / "b.npy"
    save_tensor(fm, a)
    save_tensor(fm, b)
    assert a.read_bytes() == b.read_bytes()


def test_header_is_64_byte_aligned(tmp_path):
    path = tmp_path / "t.npy"
    save_tensor(FeatureMap(np.zeros((2, 3, 4))), path)
    raw = path.read_bytes()
    hlen = int.from_bytes(raw[8:10], "little")
    assert (10 + hlen) % 64 == 0
    assert raw[10 + hlen - 1 : 10 + hlen] == b"\n"


def test_mask_roundtrip_both_directions(tmp_path):
    labels = np.array([[0, 1, 2], [3, 0, 1]], dtype=np.int64)
    path = tmp_path / "m.npy"
    save_mask(LabelMask(labels), path)
    loaded = np.load(path)
    assert loaded.dtype == np.dtype("<u4")
    assert (loaded == labels).all()

    np_path = tmp_path / "m2.npy"
    np.save(np_path, labels.astype(np.uint8))
    mask = load_mask(np_path)
    assert mask.labels.dtype == np.int64
    assert (mask.labels == labels).all()


def test_pgm_export_bytes(tmp_path):
    labels = np.array([[0, 1], [2, 255]], dtype=np.int64)
    path = tmp_path / "m.pgm"
    save_mask(LabelMask(labels), path)
    raw = path.read_bytes()
    assert raw == b"P5\n2 2\n255\n" + bytes([0, 1, 2, 255])


def test_pgm_rejects_wide_labels(tmp_path):
    labels = np.full((2, 2), 256, dtype=np.int64)
    with pytest.raises(FormatError):
        save_mask(LabelMask(labels), tmp_path / "m.pgm")


def test_save_matrix_roundtrip(tmp_path):
    rng = np.random.default_rng(15)
    mat = rng.standard_normal((4, 9))
    path = tmp_path / "w.npy"
    save_matrix(mat, path)
    assert (np.load(path) == mat).all()
    with pytest.raises(DimensionError):
        save_matrix(np.zeros(3), tmp_path / "bad.npy")


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(IoError):
        load_tensor(tmp_path / "nope.npy")
    with pytest.raises(IoError):
        load_mask(tmp_path / "nope.npy")


def test_bad_magic_is_format_error(tmp_path):
    path = tmp_path / "junk.npy"
    path.write_bytes(b"not an npy file at all")
    with pytest.raises(FormatError):
        load_tensor(path)


def test_unsupported_npy_version(tmp_path):
    path = tmp_path / "v2.npy"
    good = tmp_path / "good.npy"
    np.save(good, np.zeros((2, 2, 2)))
    raw = bytearray(good.read_bytes())
    raw[6:8] = bytes((2, 0))
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        load_tensor(path)


def test_fortran_order_rejected(tmp_path):
    arr = np.asfortranarray(np.arange(24, dtype=np.float64).reshape(2, 3, 4))
    path = tmp_path / "f.npy"
    np.save(path, arr)
    with pytest.raises(UnsupportedLayout):
        load_tensor(path)


def test_wrong_rank_rejected(tmp_path):
    path = tmp_path / "r2.npy"
    np.save(path, np.zeros((3, 3)))
    with pytest.raises(UnsupportedLayout):
        load_tensor(path)
    path_r3 = tmp_path / "r3.npy"
    np.save(path_r3, np.zeros((2, 2, 2), dtype=np.uint8).astype(np.float64))
    with pytest.raises(UnsupportedLayout):
        load_mask(path_r3)


def test_wrong_dtype_rejected(tmp_path):
    path = tmp_path / "i8.npy"
    np.save(path, np.zeros((2, 2, 2), dtype=np.int64))
    with pytest.raises(FormatError):
        load_tensor(path)
    path_f = tmp_path / "f8mask.npy"
    np.save(path_f, np.zeros((2, 2)))
    with pytest.raises(FormatError):
        load_mask(path_f)


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "trunc.npy"
    np.save(path, np.zeros((4, 4, 4)))
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(FormatError):
        load_tensor(path)


def test_nonfinite_tensor_rejected(tmp_path):
    arr = np.zeros((2, 2, 2))
    arr[0, 0, 0] = np.nan
    path = tmp_path / "nan.npy"
    np.save(path, arr)
    with pytest.raises(InvalidValue):
        load_tensor(path)


def test_feature_map_validation():
    with pytest.raises(DimensionError):
        FeatureMap(np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        FeatureMap(np.zeros((2, 0, 2)))
    with pytest.raises(InvalidValue):
        FeatureMap(np.full((1, 1, 1), np.inf))
    fm = FeatureMap(np.zeros((2, 3, 4)))
    with pytest.raises(ValueError):
        fm.data[0, 0, 0] = 1.0  # read-only view


def test_label_mask_validation():
    with pytest.raises(DimensionError):
        LabelMask(np.zeros((2, 2, 2), dtype=np.int64))
    with pytest.raises(FormatError):
        LabelMask(np.zeros((2, 2)))
    with pytest.raises(FormatError):
        LabelMask(np.array([[-1, 0]], dtype=np.int64))


def test_label_mask_canonicalized():
    mask = LabelMask(np.array([[0, 5], [9, 5]], dtype=np.int64))
    canon = mask.canonicalized()
    assert (canon.labels == np.array([[0, 1], [2, 1]])).all()
    assert list(canon.label_values()) == [0, 1, 2]
