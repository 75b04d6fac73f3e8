import io
import struct

import numpy as np
import numpy.testing as npt
import pytest

from slrtrack import matio
from slrtrack.exceptions import DimensionError


def test_matrix_file_layout(tmp_path):
    path = tmp_path / "m.slrm"
    M = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    matio.write_matrix(str(path), M)
    raw = path.read_bytes()
    assert raw[:4] == b"SLRM"
    assert struct.unpack("<II", raw[4:12]) == (2, 3)
    assert struct.unpack("<d", raw[12:20])[0] == 1.0
    assert struct.unpack("<d", raw[20:28])[0] == 2.0
    npt.assert_array_equal(matio.read_matrix(str(path)), M)


def test_matrix_bad_magic(tmp_path):
    path = tmp_path / "bad.slrm"
    path.write_bytes(b"XXXX" + struct.pack("<II", 1, 1) + struct.pack("<d", 1.0))
    with pytest.raises(DimensionError):
        matio.read_matrix(str(path))


def test_matrix_truncated_payload(tmp_path):
    path = tmp_path / "short.slrm"
    path.write_bytes(b"SLRM" + struct.pack("<II", 2, 2) + struct.pack("<d", 1.0))
    with pytest.raises(DimensionError):
        matio.read_matrix(str(path))


def test_mask_bit_packing(tmp_path, rng):
    path = tmp_path / "mask.slrb"
    mask = rng.random((7, 5)) < 0.4
    matio.write_mask(str(path), mask)
    assert len(path.read_bytes()) == 12 + (35 + 7) // 8
    npt.assert_array_equal(matio.read_mask(str(path)), mask)


def test_csv_matrix(tmp_path, rng):
    path = tmp_path / "m.csv"
    M = rng.standard_normal((3, 4))
    matio.write_csv(str(path), M)
    npt.assert_array_equal(matio.read_csv(str(path)), M)


def test_frame_stream():
    fh = io.BytesIO()
    frames = [np.arange(4.0), -np.arange(4.0)]
    for f in frames:
        matio.write_frame(fh, f)
    fh.seek(0)
    out = list(matio.iter_frames(fh))
    assert len(out) == 2
    for a, b in zip(out, frames):
        npt.assert_array_equal(a, b)


def test_frame_stream_length_change():
    fh = io.BytesIO()
    matio.write_frame(fh, np.zeros(3))
    matio.write_frame(fh, np.zeros(4))
    fh.seek(0)
    with pytest.raises(DimensionError):
        list(matio.iter_frames(fh))


def test_frame_stream_truncated():
    fh = io.BytesIO(struct.pack("<I", 3) + struct.pack("<d", 1.0))
    with pytest.raises(DimensionError):
        list(matio.iter_frames(fh))
