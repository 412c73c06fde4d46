"""Unary potentials: scene-level costs and object-region overrides.

The data term of the energy is a per-pixel negative-log-probability map. The
scene-level term comes straight from the coarse model's softmax; the
object-level term replaces it inside each proposal rectangle with the fine
model's output (resampled to the rectangle's footprint) and falls back to
the scene term everywhere else.

Unary costs are kept in float64: downstream MAP decoding compares costs
pixelwise and must agree bit-exactly with probability argmax.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import LogitField, ProbabilityField

DEFAULT_PROB_FLOOR = 1e-8


@dataclass(frozen=True)
class UnaryField:
    """Per-pixel per-class costs in nats, shape (height, width, classes)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C")
        if arr.ndim != 3 or arr.shape[2] < 2:
            raise ValueError(f"UnaryField: bad shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0:
            raise ValueError("UnaryField: entries must be finite and >= 0")
        arr.flags.writeable = False
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
class RegionTranslation:
    """Placement of a region raster inside its parent image.

    Image pixel (i, j) with ``offset_row <= i < offset_row + region_height``
    and the analogous column bound maps to region pixel
    (i - offset_row, j - offset_col).
    """

    offset_row: int
    offset_col: int
    region_height: int
    region_width: int

    def __post_init__(self):
        if self.region_height < 1 or self.region_width < 1:
            raise ValueError("RegionTranslation: empty region")
        if self.offset_row < 0 or self.offset_col < 0:
            raise ValueError("RegionTranslation: negative offset")

    def inside(self, parent_height: int, parent_width: int) -> bool:
        return (
            self.offset_row + self.region_height <= parent_height
            and self.offset_col + self.region_width <= parent_width
        )

    def overlaps(self, other: "RegionTranslation") -> bool:
        return (
            self.offset_row < other.offset_row + other.region_height
            and other.offset_row < self.offset_row + self.region_height
            and self.offset_col < other.offset_col + other.region_width
            and other.offset_col < self.offset_col + self.region_width
        )


def softmax(logits: LogitField) -> ProbabilityField:
    """Pixelwise softmax, stabilized by per-pixel max subtraction."""
    z = logits.data.astype(np.float64)
    z = z - z.max(axis=2, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=2, keepdims=True)
    return ProbabilityField(p.astype(np.float32))


def to_unary(probs: ProbabilityField, floor: float = DEFAULT_PROB_FLOOR) -> UnaryField:
    """Negative log probabilities, clamped away from zero.

    Saturated softmax inputs can emit exact zeros; clamping at ``floor``
    keeps the costs finite. Requires 0 < floor < 1/classes so the clamp can
    never touch a pixel's most probable class.
    """
    if not 0.0 < floor < 1.0 / probs.classes:
        raise ValueError(f"floor must be in (0, 1/{probs.classes}), got {floor}")
    p = np.clip(probs.data.astype(np.float64), floor, 1.0)
    return UnaryField(-np.log(p))


def fuse_object_unary(
    scene: UnaryField,
    regions: list[tuple[RegionTranslation, UnaryField]],
) -> UnaryField:
    """Overlay region unaries onto the scene unary.

    Inside each (non-overlapping) region rectangle the output takes the
    region's costs; everywhere else it falls back to the scene costs.
    """
    for idx, (tr, unary) in enumerate(regions):
        if not tr.inside(scene.height, scene.width):
            raise ValueError(f"region {idx} extends outside the image")
        if (unary.height, unary.width) != (tr.region_height, tr.region_width):
            raise ValueError(
                f"region {idx}: unary is {unary.height}x{unary.width}, "
                f"translation says {tr.region_height}x{tr.region_width}"
            )
        if unary.classes != scene.classes:
            raise ValueError(f"region {idx}: class count mismatch")
    for a in range(len(regions)):
        for b in range(a + 1, len(regions)):
            if regions[a][0].overlaps(regions[b][0]):
                raise ValueError(f"regions {a} and {b} overlap")

    fused = scene.data.copy()
    for tr, unary in regions:
        fused[
            tr.offset_row : tr.offset_row + tr.region_height,
            tr.offset_col : tr.offset_col + tr.region_width,
        ] = unary.data
    return UnaryField(fused)


def resample_bilinear(
    field: ProbabilityField, new_width: int, new_height: int
) -> ProbabilityField:
    """Bilinearly resize per channel, then renormalize each pixel to sum 1.

    Sampling uses half-pixel centers with edge clamping, so an identity
    resize reproduces the input (up to renormalization rounding).
    """
    if new_width < 1 or new_height < 1:
        raise ValueError("target dimensions must be >= 1")
    src = field.data.astype(np.float64)
    h, w = field.height, field.width

    def axis_coords(n_dst: int, n_src: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pos = (np.arange(n_dst, dtype=np.float64) + 0.5) * (n_src / n_dst) - 0.5
        pos = np.clip(pos, 0.0, n_src - 1.0)
        lo = np.floor(pos).astype(np.intp)
        hi = np.minimum(lo + 1, n_src - 1)
        return lo, hi, pos - lo

    r0, r1, fr = axis_coords(new_height, h)
    c0, c1, fc = axis_coords(new_width, w)
    fr = fr[:, None, None]
    fc = fc[None, :, None]
    out = (
        src[np.ix_(r0, c0)] * (1 - fr) * (1 - fc)
        + src[np.ix_(r0, c1)] * (1 - fr) * fc
        + src[np.ix_(r1, c0)] * fr * (1 - fc)
        + src[np.ix_(r1, c1)] * fr * fc
    )
    out /= out.sum(axis=2, keepdims=True)
    return ProbabilityField(out.astype(np.float32))
