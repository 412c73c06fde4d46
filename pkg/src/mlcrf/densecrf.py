"""Densely connected CRF energy and its mean-field minimization.

The energy couples two unary terms (scene cost plus alpha times the fused
object-level cost) with Potts-gated pairwise potentials expressed as a
linear combination of Gaussian kernels: an appearance kernel over position
and color, a spatial smoothing kernel, and (when a depth map is available)
a depth kernel over position and depth. Mean-field inference replaces the
joint distribution with a per-pixel factorized one; each sweep evaluates
all pairwise messages as Gaussian filterings of the current marginals,
applies the Potts transform, and renormalizes against the unaries.

Message passing defaults to the truncated fast filter; pass
``filter_impl="bruteforce"`` to run the exact dense reference instead (same
update code, different filter), which is what the oracle tests compare
against.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .fields import ColorField, DepthField, LabelField
from .filtering import (
    DEFAULT_CUTOFF,
    GaussianFilter,
    gaussian_filter_bruteforce,
)
from .unary import UnaryField

FILTER_IMPLS = ("fast", "bruteforce")

# Beyond this many pixels the exhaustive energy diagnostic refuses to run.
ENERGY_PIXEL_CAP = 64 * 64


@dataclass(frozen=True)
class CrfConfig:
    """All scalar parameters of the energy.

    Bandwidths are in the units of their feature: pixels for theta_alpha,
    theta_gamma, theta_delta; 0-255 color levels for theta_beta; depth units
    (millimeters) for theta_epsilon.
    """

    alpha: float = 1.0
    w_appearance: float = 3.0
    w_smooth: float = 1.0
    w_depth: float = 1.0
    theta_alpha: float = 20.0
    theta_beta: float = 20.0
    theta_gamma: float = 1.0
    theta_delta: float = 10.0
    theta_epsilon: float = 20.0
    iterations: int = 10
    use_depth: bool = True
    init: str = "unary"
    kernel_norm: str = "none"

    def __post_init__(self):
        if min(self.alpha, self.w_appearance, self.w_smooth, self.w_depth) < 0:
            raise ValueError("weights must be >= 0")
        thetas = (
            self.theta_alpha,
            self.theta_beta,
            self.theta_gamma,
            self.theta_delta,
            self.theta_epsilon,
        )
        if min(thetas) <= 0:
            raise ValueError("bandwidths must be > 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.init not in ("unary", "uniform"):
            raise ValueError("init must be 'unary' or 'uniform'")
        if self.kernel_norm not in ("none", "symmetric"):
            raise ValueError("kernel_norm must be 'none' or 'symmetric'")

    def with_depth(self, enabled: bool) -> "CrfConfig":
        return replace(self, use_depth=enabled)


@dataclass(frozen=True)
class Kernel:
    """One pairwise Gaussian kernel: weight and pre-scaled feature points."""

    name: str
    weight: float
    features: np.ndarray  # (N, d), each coordinate already divided by its theta

    def __post_init__(self):
        arr = np.array(self.features, dtype=np.float64, order="C")
        if arr.ndim != 2:
            raise ValueError("Kernel features must be (N, d)")
        if not np.all(np.isfinite(arr)):
            raise ValueError("Kernel features must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "features", arr)


@dataclass(frozen=True)
class MarginalField:
    """Per-pixel factorized distribution, shape (height, width, classes)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C")
        if arr.ndim != 3 or arr.shape[2] < 2:
            raise ValueError(f"MarginalField: bad shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("MarginalField: entries outside [0, 1]")
        if np.abs(arr.sum(axis=2) - 1.0).max() > 1e-5:
            raise ValueError("MarginalField: pixel sums deviate from 1")
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


def _position_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    yy, xx = np.mgrid[0:height, 0:width]
    return xx.ravel().astype(np.float64), yy.ravel().astype(np.float64)


def build_kernels(
    image: ColorField, depth: DepthField | None, cfg: CrfConfig
) -> list[Kernel]:
    """Assemble the pairwise kernels for one image.

    Always returns the appearance kernel (position/theta_alpha,
    rgb/theta_beta) and the smoothing kernel (position/theta_gamma); adds
    the depth kernel (position/theta_delta, depth/theta_epsilon) only when
    a depth map is supplied and cfg.use_depth is set. The depth map must be
    hole-filled first.
    """
    x, y = _position_grid(image.height, image.width)
    rgb = image.data.reshape(-1, 3).astype(np.float64)

    appearance = np.column_stack(
        [x / cfg.theta_alpha, y / cfg.theta_alpha, rgb / cfg.theta_beta]
    )
    smoothing = np.column_stack([x / cfg.theta_gamma, y / cfg.theta_gamma])
    kernels = [
        Kernel("appearance", cfg.w_appearance, appearance),
        Kernel("smoothing", cfg.w_smooth, smoothing),
    ]
    if depth is not None and cfg.use_depth:
        if (depth.height, depth.width) != (image.height, image.width):
            raise ValueError("depth dimensions do not match the image")
        if depth.missing.any():
            raise ValueError("depth still has missing values; fill holes first")
        d = depth.data.ravel().astype(np.float64)
        feat = np.column_stack(
            [x / cfg.theta_delta, y / cfg.theta_delta, d / cfg.theta_epsilon]
        )
        kernels.append(Kernel("depth", cfg.w_depth, feat))
    return kernels


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def mean_field(
    unary_scene: UnaryField,
    unary_fused: UnaryField,
    kernels: list[Kernel],
    cfg: CrfConfig,
    filter_impl: str = "fast",
    cutoff: float = DEFAULT_CUTOFF,
) -> MarginalField:
    """Run the fixed-point message-passing updates for cfg.iterations sweeps.

    The combined unary is scene + alpha * fused. Marginals start from its
    softmax (or uniform, per cfg.init). Each sweep filters the current
    marginals through every kernel, subtracts each point's self
    contribution, weights and sums the results, applies the Potts transform
    (a class is penalized by the other classes' messages), and renormalizes
    exp(-unary - penalty) per pixel. Deterministic for fixed inputs.
    """
    if filter_impl not in FILTER_IMPLS:
        raise ValueError(f"filter_impl must be one of {FILTER_IMPLS}")
    shape_s = (unary_scene.height, unary_scene.width, unary_scene.classes)
    shape_f = (unary_fused.height, unary_fused.width, unary_fused.classes)
    if shape_s != shape_f:
        raise ValueError(f"unary shapes differ: {shape_s} vs {shape_f}")
    n = unary_scene.height * unary_scene.width
    c = unary_scene.classes
    for k in kernels:
        if k.features.shape[0] != n:
            raise ValueError(f"kernel '{k.name}' has {k.features.shape[0]} points, image has {n}")

    u = unary_scene.data.reshape(n, c) + cfg.alpha * unary_fused.data.reshape(n, c)

    if filter_impl == "fast":
        filters = [
            GaussianFilter(k.features, cutoff=cutoff, norm=cfg.kernel_norm)
            for k in kernels
        ]
    else:
        filters = [
            (lambda v, f=k.features: gaussian_filter_bruteforce(f, v, norm=cfg.kernel_norm))
            for k in kernels
        ]

    q = _softmax_rows(-u) if cfg.init == "unary" else np.full((n, c), 1.0 / c)
    for _ in range(cfg.iterations):
        message = np.zeros((n, c))
        for kern, filt in zip(kernels, filters):
            message += kern.weight * (filt(q) - q)
        penalty = message.sum(axis=1, keepdims=True) - message
        q = _softmax_rows(-u - penalty)

    return MarginalField(q.reshape(shape_s))


def map_labels(q: MarginalField) -> LabelField:
    """Per-pixel argmax of the marginals; ties go to the lower class index."""
    return LabelField(
        np.argmax(q.data, axis=2).astype(np.uint8), classes=q.classes
    )


def energy(
    labels: LabelField,
    unary_scene: UnaryField,
    unary_fused: UnaryField,
    kernels: list[Kernel],
    cfg: CrfConfig,
    pixel_cap: int = ENERGY_PIXEL_CAP,
) -> float:
    """Exhaustively evaluate the energy of a labeling, in nats.

    Diagnostic only: the pairwise part enumerates every ordered pixel pair
    (both (p, q) and (q, p) count, matching the double-sum form), so the
    image must stay within ``pixel_cap`` pixels.
    """
    h, w = labels.height, labels.width
    n = h * w
    if n > pixel_cap:
        raise ValueError(f"energy diagnostic capped at {pixel_cap} pixels, got {n}")
    if (unary_scene.height, unary_scene.width) != (h, w):
        raise ValueError("unary dimensions do not match the labeling")

    lab = labels.data.ravel().astype(np.intp)
    pick = np.arange(n)
    total = float(unary_scene.data.reshape(n, -1)[pick, lab].sum())
    total += cfg.alpha * float(unary_fused.data.reshape(n, -1)[pick, lab].sum())

    differs = (lab[:, None] != lab[None, :]).astype(np.float64)
    for kern in kernels:
        f = kern.features
        sq = np.einsum("ij,ij->i", f, f)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (f @ f.T)
        np.maximum(d2, 0.0, out=d2)
        total += kern.weight * float((np.exp(-0.5 * d2) * differs).sum())
    return total
