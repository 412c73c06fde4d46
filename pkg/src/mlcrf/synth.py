"""Synthetic desk-scale scenes standing in for CNN outputs.

Each scene is one ellipse or rectangle "waste object" on a textured
background, with co-registered color, depth (including sensor-style holes),
a ground-truth mask, and degraded class scores. Scene-level scores are the
truth log-odds blurred and perturbed with spatially correlated noise, so the
coarse argmax has exactly the failure mode the refinement targets: wobbly,
rounded boundaries. Region-level scores are built from truth crops at twice
the region resolution with far milder degradation, playing the role of the
sharper zoomed-in model.

Everything is driven by one numpy Generator, so a fixed seed reproduces a
scene bit-for-bit. At noise level 0 no degradation is applied at all and
the scene argmax equals the truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .fields import ColorField, DepthField, LabelField, LogitField
from .proposer import RegionProposal

# Scene-score degradation at noise level 1, relative to a 64 px image.
SCENE_MARGIN = 4.0
SCENE_BLUR_FRAC = 1.0 / 24.0
SCENE_NOISE_AMP = 1.2
NOISE_CORR_FRAC = 1.0 / 32.0

# Region-score degradation (applied on the 2x upsampled crop grid).
REGION_MARGIN = 3.0
REGION_BLUR = 1.6
REGION_NOISE_AMP = 1.0
REGION_UPSAMPLE = 2

# Camouflaged scenes get firmer unaries: with the color channel useless the
# pairwise smoothing pressure would otherwise erode the object outright,
# leaving nothing for the depth term to demonstrate on.
CAMOUFLAGE_MARGIN_GAIN = 2.0

BACKGROUND_DEPTH_MM = 1500.0
OBJECT_DEPTH_MM = 950.0
HOLE_FRACTION = 0.03


@dataclass(frozen=True)
class SyntheticScene:
    color: ColorField
    depth: DepthField  # raw, with holes
    truth: LabelField
    scene_logits: LogitField


def _object_mask(
    rng: np.random.Generator, size: int, radius_range: tuple[float, float]
) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cy = rng.uniform(0.35, 0.65) * size
    cx = rng.uniform(0.35, 0.65) * size
    ry = rng.uniform(*radius_range) * size
    rx = rng.uniform(*radius_range) * size
    if rng.random() < 0.5:
        mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    else:
        mask = (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
    return mask


def _correlated_noise(rng: np.random.Generator, shape, corr_sigma: float) -> np.ndarray:
    raw = rng.normal(size=shape)
    smooth = ndimage.gaussian_filter(raw, corr_sigma)
    return smooth / smooth.std()


def _logits_from_mask(
    mask: np.ndarray,
    rng: np.random.Generator,
    margin: float,
    blur_sigma: float,
    noise_amp: float,
    corr_sigma: float,
) -> LogitField:
    z = margin * (2.0 * mask.astype(np.float64) - 1.0)
    if blur_sigma > 0:
        z = ndimage.gaussian_filter(z, blur_sigma)
    if noise_amp > 0:
        z = z + noise_amp * _correlated_noise(rng, mask.shape, corr_sigma)
    return LogitField(
        np.stack([-0.5 * z, 0.5 * z], axis=2).astype(np.float32)
    )


def generate_scene(
    rng: np.random.Generator,
    size: int = 64,
    noise: float = 1.0,
    camouflage: bool = False,
) -> SyntheticScene:
    """Generate one scene.

    Args:
        rng: the generator driving every random choice.
        size: square image side, >= 16.
        noise: degradation level for the scene scores; 0 disables blur and
            noise entirely.
        camouflage: draw the object in the background's color so only depth
            separates it.
    """
    if size < 16:
        raise ValueError("size must be >= 16")
    if noise < 0:
        raise ValueError("noise must be >= 0")

    # Camouflaged objects are drawn a bit larger: they must survive on depth
    # affinity alone, without any color edge to anchor the boundary.
    mask = _object_mask(rng, size, (0.28, 0.36) if camouflage else (0.17, 0.26))

    if camouflage:
        # Disruptive-pattern coloring that continues across the object: color
        # bands with mutually distant palette entries carry zero boundary
        # information, and the appearance affinity stays band-local instead
        # of degenerating into one global smoother.
        pattern = _correlated_noise(rng, (size, size), size / 8.0)
        edges = np.quantile(pattern, [0.2, 0.4, 0.6, 0.8])
        bands = np.digitize(pattern, edges)
        palette = np.array(
            [[60, 60, 60], [180, 60, 60], [60, 180, 60], [60, 60, 180], [180, 180, 60]],
            dtype=np.float64,
        )
        rgb = palette[rng.permutation(5)][bands]
    else:
        bg_color = rng.uniform(50, 110, size=3)
        swirl = np.stack(
            [_correlated_noise(rng, (size, size), size / 8.0) for _ in range(3)],
            axis=2,
        )
        obj_color = rng.uniform(160, 230, size=3)
        rgb = np.where(mask[:, :, None], obj_color + 12.0 * swirl, bg_color + 28.0 * swirl)
    rgb = rgb + rng.normal(0.0, 8.0, size=rgb.shape)
    color = ColorField(np.clip(rgb, 0, 255).astype(np.uint8))

    rows = np.arange(size, dtype=np.float64)[:, None] / size
    depth_mm = BACKGROUND_DEPTH_MM + 250.0 * rows + rng.normal(0.0, 12.0, (size, size))
    obj_depth = OBJECT_DEPTH_MM + rng.normal(0.0, 8.0, (size, size))
    depth_mm = np.where(mask, obj_depth, depth_mm)

    holes = rng.random((size, size)) < HOLE_FRACTION
    boundary = ndimage.binary_dilation(mask, iterations=2) & ~ndimage.binary_erosion(
        mask, iterations=2
    )
    holes |= boundary & (rng.random((size, size)) < 0.5)
    depth = DepthField(np.where(holes, 0.0, depth_mm), holes)

    truth = LabelField(mask.astype(np.uint8), classes=2)
    gain = CAMOUFLAGE_MARGIN_GAIN if camouflage else 1.0
    scene_logits = _logits_from_mask(
        mask,
        rng,
        margin=SCENE_MARGIN * gain,
        blur_sigma=SCENE_BLUR_FRAC * size * noise,
        noise_amp=SCENE_NOISE_AMP * noise,
        corr_sigma=max(NOISE_CORR_FRAC * size, 1.0),
    )
    return SyntheticScene(color=color, depth=depth, truth=truth, scene_logits=scene_logits)


def generate_region_logits(
    truth: LabelField,
    proposal: RegionProposal,
    rng: np.random.Generator,
    noise: float = 1.0,
    upsample: int = REGION_UPSAMPLE,
    margin_gain: float = 1.0,
) -> LogitField:
    """Fine-model scores for one proposal: a mildly degraded truth crop.

    Emitted at ``upsample`` times the proposal resolution, as a zoomed-in
    model would produce; the refinement stage resamples them back onto the
    image grid.
    """
    crop = truth.data[
        proposal.top : proposal.bottom, proposal.left : proposal.right
    ].astype(bool)
    up = np.kron(crop, np.ones((upsample, upsample), dtype=bool))
    return _logits_from_mask(
        up,
        rng,
        margin=REGION_MARGIN * margin_gain,
        blur_sigma=REGION_BLUR * noise,
        noise_amp=REGION_NOISE_AMP * noise,
        corr_sigma=2.0,
    )
