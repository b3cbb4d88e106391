"""Segmentation metrics and automatic click placement.

Click placement follows the center-of-mass-free convention: the first click
lands at the interior point of the largest connected component that is
farthest from any non-foreground pixel (image border counts as background),
with ties broken by smallest row then column. Subsequent clicks are
error-guided: the same rule applied to the false-negative region.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import ValidationError
from .rasters import LabelMap, SimilarityMap

_STRUCTURES = {
    4: np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    8: np.ones((3, 3), dtype=bool),
}

# Above this many labeled pixels the threshold sweep quantizes to 16-bit levels.
BINNED_SWEEP_PIXELS = 2**22


def connected_components(mask: np.ndarray, connectivity: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Label connected foreground regions.

    Returns (labels, sizes): labels is int32 with 0 for background and
    1..n for components in raster-scan discovery order; sizes[i] is the
    pixel count of component i+1.
    """
    if connectivity not in _STRUCTURES:
        raise ValidationError("connectivity must be 4 or 8")
    mask = np.asarray(mask, dtype=bool)
    labels, count = ndimage.label(mask, structure=_STRUCTURES[connectivity])
    sizes = np.bincount(labels.ravel(), minlength=count + 1)[1:]
    return labels.astype(np.int32), sizes


def distance_transform(mask: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance to the nearest non-foreground pixel.

    The image border counts as background (a lone corner pixel gets 1.0, not
    infinity); background pixels get 0.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return np.zeros(mask.shape, dtype=np.float64)
    padded = np.pad(mask, 1, mode="constant", constant_values=False)
    return ndimage.distance_transform_edt(padded)[1:-1, 1:-1].astype(np.float64)


def center_of_largest_component(mask: np.ndarray, connectivity: int = 8) -> tuple[int, int]:
    """Deepest-interior pixel of the largest connected component of ``mask``.

    The distance transform is taken over the whole mask and the argmax is
    restricted to the largest component; ties go to the smallest row, then
    the smallest column (and, for equally sized components, to the one
    discovered first in raster order).
    """
    labels, sizes = connected_components(mask, connectivity)
    if sizes.size == 0:
        raise ValidationError("mask has no foreground")
    largest = int(np.argmax(sizes)) + 1  # argmax keeps the first (raster-order) tie
    dist = distance_transform(mask)
    candidate = np.where(labels == largest, dist, -1.0)
    flat_index = int(np.argmax(candidate))  # C-order scan: smallest row, then col
    return np.unravel_index(flat_index, mask.shape)  # type: ignore[return-value]


def place_first_click(labels: LabelMap, cls: int, connectivity: int = 8) -> tuple[int, int]:
    """First click for a class: center of its largest connected component."""
    mask = labels.class_mask(cls)
    if not mask.any():
        raise ValidationError(f"empty class {cls}")
    return center_of_largest_component(mask, connectivity)


def place_next_click(
    labels: LabelMap, cls: int, current_mask: np.ndarray, connectivity: int = 8
) -> tuple[int, int]:
    """Error-guided follow-up click.

    Targets the false-negative region (class minus prediction); when the
    prediction already covers the class, falls back to the full class region.
    The returned pixel always lies on the target class.
    """
    class_mask = labels.class_mask(cls)
    if not class_mask.any():
        raise ValidationError(f"empty class {cls}")
    false_neg = class_mask & ~np.asarray(current_mask, dtype=bool)
    region = false_neg if false_neg.any() else class_mask
    return center_of_largest_component(region, connectivity)


def dice(a: np.ndarray, b: np.ndarray, empty_value: float = 1.0) -> float:
    """Sorensen-Dice overlap 2|a&b| / (|a|+|b|); ``empty_value`` when both are empty."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return empty_value
    return 2.0 * int((a & b).sum()) / total


def d_at_threshold(
    m: SimilarityMap,
    gt: np.ndarray,
    eval_mask: np.ndarray,
    threshold: float = 0.5,
    empty_value: float = 1.0,
) -> float:
    """Dice of (map >= threshold) against ground truth, on labeled pixels only."""
    gt = np.asarray(gt, dtype=bool)
    eval_mask = np.asarray(eval_mask, dtype=bool)
    if m.data.shape != gt.shape or gt.shape != eval_mask.shape:
        raise ValidationError("map, ground truth, and mask must share dimensions")
    pred = (m.data >= threshold) & eval_mask
    return dice(pred, gt & eval_mask, empty_value=empty_value)


def d_at_max(
    m: SimilarityMap,
    gt: np.ndarray,
    eval_mask: np.ndarray,
    max_distinct: int = BINNED_SWEEP_PIXELS,
) -> tuple[float, float]:
    """Best Dice over every achievable threshold, with the smallest argmax.

    Candidate thresholds are all distinct map values on labeled pixels plus
    0 and just-above-1, which together produce every achievable prediction
    mask. This makes the score exactly invariant under strictly increasing
    transforms of the map. Beyond ``max_distinct`` labeled pixels the values
    are first quantized to 16-bit levels.
    """
    gt = np.asarray(gt, dtype=bool)
    eval_mask = np.asarray(eval_mask, dtype=bool)
    if m.data.shape != gt.shape or gt.shape != eval_mask.shape:
        raise ValidationError("map, ground truth, and mask must share dimensions")

    vals = m.data[eval_mask].astype(np.float64)
    g = gt[eval_mask]
    if vals.size == 0:
        raise ValidationError("no labeled pixels")
    gt_count = int(g.sum())
    if gt_count == 0:
        raise ValidationError("ground truth empty on the labeled region")

    if vals.size > max_distinct:
        vals = np.rint(vals * 65535.0) / 65535.0

    order = np.argsort(-vals, kind="stable")
    sv = vals[order]
    cum_tp = np.cumsum(g[order].astype(np.int64))
    cum_n = np.arange(1, vals.size + 1, dtype=np.int64)

    # inclusive end index of each run of equal values in the descending sort
    group_end = np.append(np.nonzero(np.diff(sv))[0], vals.size - 1)
    scores = 2.0 * cum_tp[group_end] / (cum_n[group_end] + gt_count)
    thresholds = sv[group_end]

    best = float(scores.max())
    achieving = thresholds[scores == best]
    best_threshold = float(achieving.min())
    # candidate threshold 0 yields the same all-foreground mask as the smallest value
    if scores[-1] == best:
        best_threshold = 0.0
    return best, best_threshold
