"""Core raster containers.

Every stage of the pipeline exchanges data through the field types defined
here. All of them wrap a numpy array in row-major layout with the origin at
the top-left corner, validate their invariants once at construction, and are
frozen afterwards (the underlying buffer is marked read-only), so instances
can be shared freely across threads.

Disk-facing payloads (probabilities, logits, depth) are float32 to match the
portable array file format bit-for-bit; color is uint8 and labels uint8.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Maximum per-pixel deviation of a probability vector from sum 1.
PROB_SUM_TOL = 1e-5


def _frozen(data, dtype, ndim: int, what: str) -> np.ndarray:
    arr = np.array(data, dtype=dtype, order="C")
    if arr.ndim != ndim:
        raise ValueError(f"{what}: expected {ndim}-d data, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{what}: empty raster {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ColorField:
    """8-bit RGB image, shape (height, width, 3)."""

    data: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.data, np.uint8, 3, "ColorField")
        if arr.shape[2] != 3:
            raise ValueError(f"ColorField: expected 3 channels, got {arr.shape[2]}")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class DepthField:
    """Per-pixel depth in millimeters with an explicit missing-value mask.

    Missing pixels hold the sentinel value 0 and are flagged in ``missing``;
    non-missing values must be finite and non-negative.
    """

    data: np.ndarray
    missing: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float32, order="C")
        if arr.ndim != 2:
            raise ValueError(f"DepthField: expected 2-d data, got shape {arr.shape}")
        miss = np.array(self.missing, dtype=bool, order="C")
        if miss.shape != arr.shape:
            raise ValueError(
                f"DepthField: mask shape {miss.shape} != data shape {arr.shape}"
            )
        valid = arr[~miss]
        if valid.size and (not np.all(np.isfinite(valid)) or valid.min() < 0):
            raise ValueError("DepthField: non-missing values must be finite and >= 0")
        arr[miss] = 0.0
        arr.flags.writeable = False
        miss.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "missing", miss)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_sentinel(cls, data) -> "DepthField":
        """Build from a raw depth map where 0 marks missing pixels."""
        arr = np.asarray(data)
        return cls(arr, arr == 0)


@dataclass(frozen=True)
class ProbabilityField:
    """Per-pixel class distributions, shape (height, width, classes)."""

    data: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.data, np.float32, 3, "ProbabilityField")
        if arr.shape[2] < 2:
            raise ValueError("ProbabilityField: needs at least 2 classes")
        if not np.all(np.isfinite(arr)):
            raise ValueError("ProbabilityField: non-finite entries")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("ProbabilityField: entries outside [0, 1]")
        sums = arr.sum(axis=2, dtype=np.float64)
        worst = float(np.abs(sums - 1.0).max())
        if worst > PROB_SUM_TOL:
            raise ValueError(
                f"ProbabilityField: pixel sums deviate from 1 by {worst:.3g} "
                f"(tolerance {PROB_SUM_TOL})"
            )
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def classes(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class LogitField:
    """Per-pixel real class scores, shape (height, width, classes)."""

    data: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.data, np.float32, 3, "LogitField")
        if not np.all(np.isfinite(arr)):
            raise ValueError("LogitField: non-finite entries")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def classes(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class LabelField:
    """Per-pixel class indices in {0, ..., classes-1}; 0 is background."""

    data: np.ndarray
    classes: int = 2

    def __post_init__(self):
        arr = _frozen(self.data, np.uint8, 2, "LabelField")
        if self.classes < 2:
            raise ValueError("LabelField: classes must be >= 2")
        if arr.size and int(arr.max()) >= self.classes:
            raise ValueError(
                f"LabelField: label {int(arr.max())} >= classes {self.classes}"
            )
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]
