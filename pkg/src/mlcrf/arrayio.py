"""Portable array file format and PNG ingestion.

File layout: the 4 magic bytes ``MLF1``, then four little-endian u32 fields
(dtype code, height, width, channels), then the raw little-endian row-major
payload. Dtype codes: 1 = float32, 2 = uint16, 3 = uint8. The format carries
no semantics beyond dtype and shape; ``read_array`` maps the header onto a
field type (float32 multi-channel data defaults to logits, pass
``expect="probabilities"`` to get a validated ProbabilityField instead).

Depth files use the 0-sentinel convention for missing pixels, so a depth
field round-trips through a single float32 (or uint16) channel.
"""

from __future__ import annotations

import os
import struct

import numpy as np
from PIL import Image

from .fields import ColorField, DepthField, LabelField, LogitField, ProbabilityField

MAGIC = b"MLF1"
_HEADER = struct.Struct("<4I")

_CODE_TO_DTYPE = {1: np.dtype("<f4"), 2: np.dtype("<u2"), 3: np.dtype("u1")}
_EXPECT_KINDS = (None, "logits", "probabilities", "depth")


class FormatError(ValueError):
    """Raised for malformed portable array files."""


def read_array(path, expect: str | None = None):
    """Read a portable array file into a field.

    Args:
        path: file to read.
        expect: optional semantic override, one of ``"logits"``,
            ``"probabilities"``, ``"depth"``. Without it the header decides:
            float32/uint16 single channel -> DepthField, float32 multi-channel
            -> LogitField, uint8 3-channel -> ColorField, uint8 single
            channel -> LabelField.

    Raises:
        FileNotFoundError: missing file.
        FormatError: bad magic, unknown dtype code, zero dimensions, or a
            payload whose size disagrees with the header.
        ValueError: payload violates the target field's invariants.
    """
    if expect not in _EXPECT_KINDS:
        raise ValueError(f"unknown expect kind {expect!r}")
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 + _HEADER.size or blob[:4] != MAGIC:
        raise FormatError(f"{path}: not a portable array file (bad magic)")
    code, height, width, channels = _HEADER.unpack_from(blob, 4)
    if code not in _CODE_TO_DTYPE:
        raise FormatError(f"{path}: unknown dtype code {code}")
    if height < 1 or width < 1 or channels < 1:
        raise FormatError(f"{path}: bad dimensions {height}x{width}x{channels}")
    dtype = _CODE_TO_DTYPE[code]
    expected = height * width * channels * dtype.itemsize
    payload = blob[4 + _HEADER.size:]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    arr = np.frombuffer(payload, dtype=dtype).reshape(height, width, channels)

    if expect == "depth":
        if channels != 1:
            raise FormatError(f"{path}: depth requires 1 channel, got {channels}")
        return DepthField.from_sentinel(arr[:, :, 0])
    if expect in ("logits", "probabilities"):
        if code != 1 or channels < 2:
            raise FormatError(f"{path}: {expect} require float32 multi-channel data")
        return LogitField(arr) if expect == "logits" else ProbabilityField(arr)

    if code == 1:
        if channels == 1:
            return DepthField.from_sentinel(arr[:, :, 0])
        return LogitField(arr)
    if code == 2:
        if channels != 1:
            raise FormatError(f"{path}: uint16 data must be single channel")
        return DepthField.from_sentinel(arr[:, :, 0])
    # uint8
    if channels == 3:
        return ColorField(arr)
    if channels == 1:
        lab = arr[:, :, 0]
        return LabelField(lab, classes=max(2, int(lab.max()) + 1))
    raise FormatError(f"{path}: uint8 data must have 1 or 3 channels, got {channels}")


def write_array(field, path) -> None:
    """Write a field as a portable array file readable by ``read_array``."""
    if not path:
        raise ValueError("write_array: empty path")
    if isinstance(field, (ProbabilityField, LogitField)):
        code, payload = 1, field.data
    elif isinstance(field, DepthField):
        code, payload = 1, field.data[:, :, None]
    elif isinstance(field, ColorField):
        code, payload = 3, field.data
    elif isinstance(field, LabelField):
        code, payload = 3, field.data[:, :, None]
    else:
        raise TypeError(f"write_array: unsupported field type {type(field).__name__}")
    h, w, c = payload.shape
    dtype = _CODE_TO_DTYPE[code]
    blob = MAGIC + _HEADER.pack(code, h, w, c)
    blob += np.ascontiguousarray(payload, dtype=dtype).tobytes()
    with open(path, "wb") as fh:
        fh.write(blob)


def read_png_mask(path) -> LabelField:
    """Read a grayscale or indexed PNG as a binary label map (nonzero = waste)."""
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.ndim == 3:
        arr = arr.any(axis=2)
    return LabelField((arr != 0).astype(np.uint8), classes=2)


def write_png_mask(labels: LabelField, path) -> None:
    """Write a binary label map as an 8-bit PNG with values 0/255."""
    Image.fromarray((labels.data != 0).astype(np.uint8) * 255, mode="L").save(
        path, format="PNG"
    )


def read_png_color(path) -> ColorField:
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        return ColorField(np.asarray(rgb))


def write_png_color(color: ColorField, path) -> None:
    Image.fromarray(color.data, mode="RGB").save(path, format="PNG")


def read_depth_png(path) -> DepthField:
    """Read a 16-bit PNG depth map in millimeters (0 = missing)."""
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.ndim != 2:
        raise FormatError(f"{path}: depth PNG must be single channel")
    return DepthField.from_sentinel(arr.astype(np.float32))


def write_depth_png(depth: DepthField, path) -> None:
    """Write depth as a 16-bit PNG, missing pixels stored as 0."""
    mm = np.clip(np.rint(depth.data), 0, 65535).astype(np.uint16)
    mm[depth.missing] = 0
    Image.fromarray(mm).save(path, format="PNG")


def list_image_ids(directory, suffix: str) -> list[str]:
    """Sorted stems of all files in ``directory`` ending in ``suffix``."""
    ids = [
        name[: -len(suffix)]
        for name in os.listdir(directory)
        if name.endswith(suffix)
    ]
    return sorted(ids)
