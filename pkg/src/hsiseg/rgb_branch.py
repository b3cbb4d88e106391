"""RGB-branch probability maps.

The real pipeline expects an external interactive RGB model's confidence map
saved to disk. For self-contained runs there is a deliberately simple
click-conditioned color-similarity stand-in: it fills the same slot in the
data flow but makes no claim to the external model's quality.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .fileio import load_probability_map
from .rasters import ClickSet, RgbImage, SimilarityMap


@dataclass(frozen=True)
class ExternalMap:
    """A probability map produced outside this package (SMAP or 16-bit PNG)."""

    path: str | Path


@dataclass(frozen=True)
class ChromaStandIn:
    """Gaussian similarity in 8-bit RGB space; sigma is the color-distance scale."""

    sigma: float = 25.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValidationError("sigma must be positive")


RgbBranchSource = ExternalMap | ChromaStandIn


def rgb_probability_map(
    source: RgbBranchSource, rgb: RgbImage, clicks: ClickSet
) -> SimilarityMap:
    """Probability map for the RGB branch.

    External maps are returned verbatim (dimensions must match). The stand-in
    scores each pixel by exp(-d^2 / 2 sigma^2) against the nearest positive
    click's color, then multiplies in (1 - exp(-d^2 / 2 sigma^2)) per negative
    click to suppress its color.
    """
    if isinstance(source, ExternalMap):
        m = load_probability_map(source.path)
        if (m.height, m.width) != (rgb.height, rgb.width):
            raise ValidationError(
                f"external map is {m.height}x{m.width}, image is {rgb.height}x{rgb.width}"
            )
        return m

    positives = clicks.positives()
    if not positives:
        raise ValidationError("the color stand-in needs at least one positive click")
    clicks.check_bounds(rgb.height, rgb.width)

    pixels = rgb.data.reshape(-1, 3).astype(np.float64)
    inv = 1.0 / (2.0 * source.sigma**2)

    pos_colors = np.stack([rgb.data[c.row, c.col].astype(np.float64) for c in positives])
    d2 = ((pixels[:, None, :] - pos_colors[None, :, :]) ** 2).sum(axis=2)
    values = np.exp(-d2 * inv).max(axis=1)

    for c in clicks.negatives():
        neg = rgb.data[c.row, c.col].astype(np.float64)
        d2n = ((pixels - neg) ** 2).sum(axis=1)
        values *= 1.0 - np.exp(-d2n * inv)

    return SimilarityMap(np.clip(values, 0.0, 1.0).reshape(rgb.height, rgb.width))
