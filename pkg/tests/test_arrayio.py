import struct

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from PIL import Image

from mlcrf.arrayio import (
    FormatError,
    read_array,
    read_depth_png,
    read_png_color,
    read_png_mask,
    write_array,
    write_depth_png,
    write_png_color,
    write_png_mask,
)
from mlcrf.fields import ColorField, DepthField, LabelField, LogitField, ProbabilityField


def test_read_zero_logits(tmp_path):
    path = tmp_path / "z.mlf"
    path.write_bytes(b"MLF1" + struct.pack("<4I", 1, 2, 2, 2) + b"\x00" * 32)
    field = read_array(path)
    assert isinstance(field, LogitField)
    assert (field.height, field.width, field.classes) == (2, 2, 2)
    assert np.all(field.data == 0)


def test_payload_size_mismatch(tmp_path):
    path = tmp_path / "bad.mlf"
    path.write_bytes(b"MLF1" + struct.pack("<4I", 1, 3, 3, 1) + b"\x00" * 32)
    with pytest.raises(FormatError, match="payload"):
        read_array(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.mlf"
    path.write_bytes(b"NOPE" + struct.pack("<4I", 1, 1, 1, 1) + b"\x00" * 4)
    with pytest.raises(FormatError, match="magic"):
        read_array(path)


def test_unknown_dtype_code(tmp_path):
    path = tmp_path / "bad.mlf"
    path.write_bytes(b"MLF1" + struct.pack("<4I", 9, 1, 1, 1) + b"\x00" * 4)
    with pytest.raises(FormatError, match="dtype"):
        read_array(path)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_array(tmp_path / "nope.mlf")


def test_nonfinite_logits_rejected(tmp_path):
    path = tmp_path / "nan.mlf"
    payload = np.full((1, 1, 2), np.nan, dtype="<f4").tobytes()
    path.write_bytes(b"MLF1" + struct.pack("<4I", 1, 1, 1, 2) + payload)
    with pytest.raises(ValueError, match="finite"):
        read_array(path)


def test_single_pixel_probability_payload(tmp_path):
    path = tmp_path / "p.mlf"
    write_array(ProbabilityField(np.full((1, 1, 2), 0.5, np.float32)), path)
    blob = path.read_bytes()
    assert len(blob) == 4 + 16 + 8  # magic + header + two float32s
    again = read_array(path, expect="probabilities")
    assert isinstance(again, ProbabilityField)
    assert np.array_equal(again.data, np.full((1, 1, 2), 0.5, np.float32))


def test_empty_path_rejected():
    field = LogitField(np.zeros((1, 1, 2), np.float32))
    with pytest.raises(ValueError, match="empty path"):
        write_array(field, "")


def test_depth_round_trip_with_sentinel(tmp_path):
    data = np.array([[100.5, 0.0], [3.25, 42.0]], np.float32)
    missing = np.array([[False, True], [False, False]])
    path = tmp_path / "d.mlf"
    write_array(DepthField(data, missing), path)
    again = read_array(path)
    assert isinstance(again, DepthField)
    assert np.array_equal(again.data, data)
    assert np.array_equal(again.missing, missing)


def test_color_and_label_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    color = ColorField(rng.integers(0, 256, (5, 7, 3), dtype=np.uint8))
    write_array(color, tmp_path / "c.mlf")
    assert np.array_equal(read_array(tmp_path / "c.mlf").data, color.data)

    labels = LabelField(rng.integers(0, 2, (5, 7), dtype=np.uint8))
    write_array(labels, tmp_path / "l.mlf")
    again = read_array(tmp_path / "l.mlf")
    assert isinstance(again, LabelField)
    assert np.array_equal(again.data, labels.data)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(
    height=st.integers(1, 8),
    width=st.integers(1, 8),
    channels=st.integers(2, 5),
    seed=st.integers(0, 2**31 - 1),
)
def test_write_read_byte_identical(tmp_path, height, width, channels, seed):
    # read_array . write_array is the identity on valid files, bit for bit.
    rng = np.random.default_rng(seed)
    payload = rng.normal(size=(height, width, channels)).astype("<f4")
    path = tmp_path / f"rt_{seed}.mlf"
    path.write_bytes(
        b"MLF1" + struct.pack("<4I", 1, height, width, channels) + payload.tobytes()
    )
    original = path.read_bytes()
    field = read_array(path)
    write_array(field, path)
    assert path.read_bytes() == original


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(
    height=st.integers(1, 8),
    width=st.integers(1, 8),
    channels=st.integers(2, 4),
    seed=st.integers(0, 2**31 - 1),
)
def test_probability_field_round_trip(tmp_path, height, width, channels, seed):
    rng = np.random.default_rng(seed)
    raw = rng.random((height, width, channels))
    probs = ProbabilityField(
        (raw / raw.sum(axis=2, keepdims=True)).astype(np.float32)
    )
    path = tmp_path / f"p_{seed}.mlf"
    write_array(probs, path)
    again = read_array(path, expect="probabilities")
    assert np.array_equal(again.data, probs.data)


def test_png_mask_all_zero(tmp_path):
    path = tmp_path / "m.png"
    Image.fromarray(np.zeros((4, 6), np.uint8), mode="L").save(path)
    labels = read_png_mask(path)
    assert (labels.height, labels.width) == (4, 6)
    assert not labels.data.any()


def test_png_mask_single_pixel(tmp_path):
    arr = np.zeros((3, 3), np.uint8)
    arr[0, 0] = 255
    path = tmp_path / "m.png"
    Image.fromarray(arr, mode="L").save(path)
    labels = read_png_mask(path)
    assert labels.data[0, 0] == 1
    assert labels.data.sum() == 1


def test_png_mask_dimensions_and_binary_values(tmp_path):
    rng = np.random.default_rng(3)
    arr = rng.integers(0, 256, (480, 640), dtype=np.uint8)
    path = tmp_path / "m.png"
    Image.fromarray(arr, mode="L").save(path)
    labels = read_png_mask(path)
    assert (labels.height, labels.width) == (480, 640)
    assert set(np.unique(labels.data)) <= {0, 1}
    assert np.array_equal(labels.data, (arr != 0).astype(np.uint8))


def test_png_mask_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    labels = LabelField(rng.integers(0, 2, (9, 11), dtype=np.uint8))
    path = tmp_path / "m.png"
    write_png_mask(labels, path)
    assert np.array_equal(read_png_mask(path).data, labels.data)


def test_png_color_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    color = ColorField(rng.integers(0, 256, (6, 8, 3), dtype=np.uint8))
    path = tmp_path / "c.png"
    write_png_color(color, path)
    assert np.array_equal(read_png_color(path).data, color.data)


def test_depth_png_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    mm = rng.integers(0, 5000, (6, 8)).astype(np.float32)
    depth = DepthField.from_sentinel(mm)
    path = tmp_path / "d.png"
    write_depth_png(depth, path)
    again = read_depth_png(path)
    assert np.array_equal(again.data, depth.data)
    assert np.array_equal(again.missing, depth.missing)
