"""Object region proposals from a coarse labeling.

The coarse segmentation's foreground blobs indicate where objects sit, so
proposals are built directly from them: connected components of the
foreground, a tight bounding box per component, extension by a fraction of
the box extent on every side (truncated at the image border), fixpoint
merging of overlapping boxes, and finally an area filter. No objectness
model, no extra annotations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .fields import LabelField

# MJU-Waste / TACO area thresholds for a proposal, in pixels.
MJU_SIZE_LIMITS = (900, 40_000)
TACO_SIZE_LIMITS = (25_000, 250_000)


@dataclass(frozen=True)
class ProposerConfig:
    extension_fraction: float = 0.30
    n_min: int = MJU_SIZE_LIMITS[0]
    n_max: int = MJU_SIZE_LIMITS[1]
    connectivity: int = 8

    def __post_init__(self):
        if self.extension_fraction < 0:
            raise ValueError("extension_fraction must be >= 0")
        if not 0 < self.n_min < self.n_max:
            raise ValueError("need 0 < n_min < n_max")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")


@dataclass(frozen=True)
class RegionProposal:
    """Axis-aligned rectangle [top, top+height) x [left, left+width)."""

    top: int
    left: int
    height: int
    width: int
    source_component_ids: tuple[int, ...] = field(default_factory=tuple)

    @property
    def area(self) -> int:
        return self.height * self.width

    @property
    def bottom(self) -> int:
        return self.top + self.height

    @property
    def right(self) -> int:
        return self.left + self.width

    def overlaps(self, other: "RegionProposal") -> bool:
        # Overlap needs at least one shared pixel; touching edges don't count.
        return (
            self.top < other.bottom
            and other.top < self.bottom
            and self.left < other.right
            and other.left < self.right
        )

    def union(self, other: "RegionProposal") -> "RegionProposal":
        top = min(self.top, other.top)
        left = min(self.left, other.left)
        return RegionProposal(
            top=top,
            left=left,
            height=max(self.bottom, other.bottom) - top,
            width=max(self.right, other.right) - left,
            source_component_ids=tuple(
                sorted(set(self.source_component_ids) | set(other.source_component_ids))
            ),
        )


@dataclass(frozen=True)
class Component:
    """One foreground connected component with its tight bounding box."""

    id: int
    top: int
    left: int
    height: int
    width: int
    pixel_count: int


def connected_components(
    labels: LabelField, connectivity: int = 8
) -> tuple[np.ndarray, list[Component]]:
    """Label foreground components of a binary map.

    Returns the component id map (0 = background, ids start at 1) and the
    component list in id order. Ids are assigned in row-major discovery
    order, so the result is deterministic.
    """
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    if labels.classes != 2:
        raise ValueError("connected_components expects a binary LabelField")
    structure = ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)
    comp_map, count = ndimage.label(labels.data != 0, structure=structure)
    components = []
    for cid, slc in enumerate(ndimage.find_objects(comp_map), start=1):
        rows, cols = slc
        components.append(
            Component(
                id=cid,
                top=rows.start,
                left=cols.start,
                height=rows.stop - rows.start,
                width=cols.stop - cols.start,
                pixel_count=int((comp_map[slc] == cid).sum()),
            )
        )
    assert len(components) == count
    return comp_map, components


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def propose(labels: LabelField, cfg: ProposerConfig) -> list[RegionProposal]:
    """Generate non-overlapping, size-filtered region proposals.

    Per component the tight box grows by round(extension_fraction * extent)
    on each side (box height for north/south, box width for west/east),
    truncated at the image boundary. Overlapping boxes are merged into their
    union until no overlaps remain, then boxes with area outside
    [n_min, n_max] are discarded. Output is sorted by (top, left).
    """
    _, components = connected_components(labels, cfg.connectivity)
    h, w = labels.height, labels.width

    boxes: list[RegionProposal] = []
    for comp in components:
        dv = _half_up(cfg.extension_fraction * comp.height)
        dh = _half_up(cfg.extension_fraction * comp.width)
        top = max(comp.top - dv, 0)
        left = max(comp.left - dh, 0)
        bottom = min(comp.top + comp.height + dv, h)
        right = min(comp.left + comp.width + dh, w)
        boxes.append(
            RegionProposal(
                top=top,
                left=left,
                height=bottom - top,
                width=right - left,
                source_component_ids=(comp.id,),
            )
        )

    # Merge to a fixpoint: any overlapping pair collapses into its union
    # box, which may create new overlaps. Merging precedes size filtering.
    merged = True
    while merged:
        merged = False
        for a in range(len(boxes)):
            for b in range(a + 1, len(boxes)):
                if boxes[a].overlaps(boxes[b]):
                    union = boxes[a].union(boxes[b])
                    boxes = [r for i, r in enumerate(boxes) if i not in (a, b)]
                    boxes.append(union)
                    merged = True
                    break
            if merged:
                break

    kept = [r for r in boxes if cfg.n_min <= r.area <= cfg.n_max]
    return sorted(kept, key=lambda r: (r.top, r.left))
