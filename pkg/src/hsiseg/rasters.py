"""Core raster types: hyperspectral cubes, label maps, similarity maps, clicks.

All types are immutable after construction (backing numpy arrays are marked
read-only), so instances can be shared freely across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ValidationError

UNLABELED = 255


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HyperCube:
    """H x W x C radiance/reflectance cube with per-band wavelengths in nm.

    Internal layout is band-interleaved-by-pixel: ``data[r, c, :]`` is one
    pixel's full spectrum, contiguous in memory.
    """

    wavelengths: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=np.float64)
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if wl.ndim != 1:
            raise ValidationError("wavelengths must be a 1-D sequence")
        if data.ndim != 3:
            raise ValidationError("cube data must have shape (height, width, bands)")
        if data.shape[2] != wl.size:
            raise ValidationError(
                f"wavelength count mismatch: {wl.size} wavelengths for {data.shape[2]} bands"
            )
        if wl.size and (np.any(wl <= 0) or np.any(np.diff(wl) <= 0)):
            raise ValidationError("wavelengths must be strictly increasing and positive")
        if not np.all(np.isfinite(data)):
            raise ValidationError("cube data contains non-finite values")
        if data.size and data.min() < 0:
            raise ValidationError("cube data contains negative values")
        object.__setattr__(self, "wavelengths", _readonly(wl))
        object.__setattr__(self, "data", _readonly(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]

    def spectrum(self, row: int, col: int) -> np.ndarray:
        """The full spectrum at one pixel, as float64."""
        return self.data[row, col].astype(np.float64)


@dataclass(frozen=True)
class LabelMap:
    """H x W class indices; 255 is the reserved unlabeled sentinel."""

    data: np.ndarray
    classes: int

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.uint8)
        if data.ndim != 2:
            raise ValidationError("label data must be 2-D")
        non_sentinel = data[data != UNLABELED]
        if non_sentinel.size and int(non_sentinel.max()) >= self.classes:
            raise ValidationError(
                f"label value {int(non_sentinel.max())} exceeds class count {self.classes}"
            )
        object.__setattr__(self, "data", _readonly(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def labeled_mask(self) -> np.ndarray:
        """Boolean mask of pixels that carry a real class label."""
        return self.data != UNLABELED

    def class_mask(self, cls: int) -> np.ndarray:
        return self.data == cls


@dataclass(frozen=True)
class SimilarityMap:
    """H x W map of values in [0, 1]; 1 means strong similarity."""

    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data)
        if data.dtype not in (np.float32, np.float64):
            data = data.astype(np.float64)
        if data.ndim != 2:
            raise ValidationError("similarity map must be 2-D")
        if not np.all(np.isfinite(data)):
            raise ValidationError("similarity map contains non-finite values")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise ValidationError("similarity map values must lie in [0, 1]")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class RgbImage:
    """H x W 8-bit RGB image (pseudo-RGB rendering of a cube)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.uint8)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ValidationError("rgb image must have shape (height, width, 3)")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


class Click(NamedTuple):
    row: int
    col: int
    positive: bool = True

    @property
    def polarity(self) -> str:
        return "positive" if self.positive else "negative"


@dataclass(frozen=True)
class ClickSet:
    """Ordered, duplicate-free set of user clicks."""

    clicks: tuple[Click, ...] = field(default_factory=tuple)

    def __post_init__(self):
        clicks = tuple(Click(int(c[0]), int(c[1]), bool(c[2]) if len(c) > 2 else True)
                       for c in self.clicks)
        coords = [(c.row, c.col) for c in clicks]
        if len(set(coords)) != len(coords):
            raise ValidationError("duplicate click coordinates")
        object.__setattr__(self, "clicks", clicks)

    def __len__(self) -> int:
        return len(self.clicks)

    def __iter__(self):
        return iter(self.clicks)

    def positives(self) -> tuple[Click, ...]:
        return tuple(c for c in self.clicks if c.positive)

    def negatives(self) -> tuple[Click, ...]:
        return tuple(c for c in self.clicks if not c.positive)

    def added(self, click: Click) -> "ClickSet":
        return ClickSet(self.clicks + (click,))

    def without_last(self) -> "ClickSet":
        if not self.clicks:
            raise ValidationError("click history is empty")
        return ClickSet(self.clicks[:-1])

    def check_bounds(self, height: int, width: int) -> None:
        for c in self.clicks:
            if not (0 <= c.row < height and 0 <= c.col < width):
                raise ValidationError(f"click ({c.row}, {c.col}) outside {height}x{width} image")

    @staticmethod
    def of(*coords: tuple) -> "ClickSet":
        """Convenience constructor from (row, col[, positive]) tuples."""
        return ClickSet(tuple(Click(*c) for c in coords))


@dataclass(frozen=True)
class BandSelection:
    """Pseudo-RGB recipe: one target wavelength per channel plus a window."""

    targets_nm: tuple[float, float, float] = (630.0, 532.0, 465.0)
    bandwidth_nm: float = 20.0
    percentiles: tuple[float, float] = (1.0, 99.0)

    def __post_init__(self):
        if len(self.targets_nm) != 3:
            raise ValidationError("pseudo-RGB needs exactly three target wavelengths")
        if self.bandwidth_nm <= 0:
            raise ValidationError("bandwidth must be positive")


def adaptive_selection(cube: HyperCube, base: BandSelection | None = None) -> BandSelection:
    """A BandSelection guaranteed to find bands in any cube.

    Clamps each target into the cube's wavelength range and widens the window
    to half the coarsest band spacing, so every channel window is non-empty.
    """
    base = base or BandSelection()
    wl = cube.wavelengths
    if wl.size == 0:
        raise ValidationError("cube has no bands")
    lo, hi = float(wl[0]), float(wl[-1])
    targets = tuple(min(max(t, lo), hi) for t in base.targets_nm)
    spacing = float(np.diff(wl).max()) if wl.size > 1 else 0.0
    bandwidth = max(base.bandwidth_nm, spacing / 2.0 + 1e-9)
    return BandSelection(targets_nm=targets, bandwidth_nm=bandwidth,
                         percentiles=base.percentiles)


def pseudo_rgb(cube: HyperCube, selection: BandSelection | None = None) -> RgbImage:
    """Render an 8-bit pseudo-RGB image from a cube.

    Each channel averages the bands within ``bandwidth_nm`` of its target
    wavelength, then stretches the channel by its global low/high percentiles
    (default 1st-99th) to 0-255 with clamping.
    """
    sel = selection or BandSelection()
    wl = cube.wavelengths
    out = np.zeros((cube.height, cube.width, 3), dtype=np.uint8)
    for ch, target in enumerate(sel.targets_nm):
        window = np.abs(wl - target) <= sel.bandwidth_nm
        if not window.any():
            raise ValidationError(
                f"empty band window: no band within {sel.bandwidth_nm} nm of {target} nm"
            )
        channel = cube.data[:, :, window].astype(np.float64).mean(axis=2)
        lo, hi = np.percentile(channel, sel.percentiles)
        if hi > lo:
            scaled = np.clip((channel - lo) / (hi - lo), 0.0, 1.0)
        else:
            scaled = np.zeros_like(channel)
        out[:, :, ch] = np.rint(scaled * 255.0).astype(np.uint8)
    return RgbImage(out)
