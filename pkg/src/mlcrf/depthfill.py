"""Median-filter hole filling for depth maps.

Sensor depth frames carry missing values at reflective surfaces, occlusion
boundaries, and distant regions. Before the depth affinity term can use a
frame, every hole is filled by repeated median passes: each pass replaces a
missing pixel with the median of the non-missing pixels inside a centered
square window, reading only the previous pass's state, until no holes
remain. Large holes are therefore filled frontier-inward over several passes.

The median of an even-sized sample is the lower middle element, so filled
values always come from the observed value set.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .fields import DepthField


def fill_missing(depth: DepthField, window: int = 5) -> DepthField:
    """Fill all missing depth pixels by multi-pass windowed medians.

    Args:
        depth: input depth map; must contain at least one non-missing pixel.
        window: odd window side length, >= 3.

    Returns:
        A DepthField with no missing pixels. Originally non-missing pixels
        are unchanged bit-for-bit; if the input has no holes it is returned
        as-is.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    if not depth.missing.any():
        return depth
    if depth.missing.all():
        raise ValueError("cannot fill an all-missing depth map")

    radius = window // 2
    values = depth.data.copy()
    missing = depth.missing.copy()

    while missing.any():
        before = int(missing.sum())
        # Snapshot of the previous pass: holes read as NaN.
        snap = values.astype(np.float64)
        snap[missing] = np.nan
        padded = np.pad(snap, radius, constant_values=np.nan)
        windows = sliding_window_view(padded, (window, window))
        rows, cols = np.nonzero(missing)
        samples = windows[rows, cols].reshape(len(rows), -1)
        samples = np.sort(samples, axis=1)  # NaNs sort to the end
        n_valid = samples.shape[1] - np.isnan(samples).sum(axis=1)
        fillable = n_valid > 0
        # A hole bordering the non-missing frontier always has a valid
        # neighbor, so progress is guaranteed while any pixel is known.
        assert fillable.any(), "no fillable pixel despite non-missing input"
        medians = samples[np.nonzero(fillable)[0], (n_valid[fillable] - 1) // 2]
        values[rows[fillable], cols[fillable]] = medians.astype(np.float32)
        missing[rows[fillable], cols[fillable]] = False
        assert int(missing.sum()) < before

    return DepthField(values, np.zeros_like(missing))
