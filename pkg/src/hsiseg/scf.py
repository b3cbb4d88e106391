"""Spectral comparison functions: spectral angle and Pearson correlation.

A click selects a reference spectrum; every pixel is scored against all
reference spectra and keeps its highest similarity. Similarities live in
[0, 1]: the spectral-angle score is ``1 - angle / (pi/2)`` (clamped at 0),
and the correlation score is ``(r + 1) / 2`` so anti-correlation maps to 0
instead of being clipped away.

The equalized variants push the max-aggregated map through its exact
empirical CDF, which spreads values over (0, 1] while preserving ranks.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from enum import Enum

import numpy as np

from .errors import ValidationError
from .rasters import ClickSet, HyperCube, SimilarityMap

log = logging.getLogger(__name__)

_HALF_PI = np.pi / 2.0


class ScfMethod(Enum):
    SA = "sa"
    PCC = "pcc"
    SA_EQUALIZED = "sa_eq"
    PCC_EQUALIZED = "pcc_eq"

    @property
    def equalized(self) -> bool:
        return self in (ScfMethod.SA_EQUALIZED, ScfMethod.PCC_EQUALIZED)

    @property
    def uses_correlation(self) -> bool:
        return self in (ScfMethod.PCC, ScfMethod.PCC_EQUALIZED)


def _as_vector(s, name: str) -> np.ndarray:
    v = np.asarray(s, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValidationError(f"{name} spectrum is empty")
    return v


def spectral_angle(s, t) -> float:
    """Angle in radians between two spectra; 0 for parallel, pi/2 for orthogonal.

    Computed from the chord between the unit vectors, 2*asin(|u - v|/2),
    which is well conditioned near zero and exactly 0 for identical inputs
    (the plain arccos of a dot product loses ~1e-8 there).
    """
    sv, tv = _as_vector(s, "first"), _as_vector(t, "second")
    if sv.size != tv.size:
        raise ValidationError(f"spectrum length mismatch: {sv.size} vs {tv.size}")
    ns, nt = np.linalg.norm(sv), np.linalg.norm(tv)
    if ns == 0.0 or nt == 0.0:
        raise ValidationError("zero-norm spectrum has no direction")
    half_chord = np.linalg.norm(sv / ns - tv / nt) / 2.0
    return float(2.0 * np.arcsin(min(1.0, half_chord)))


def sa_similarity(s, t) -> float:
    """Spectral-angle similarity in [0, 1]; scale-invariant in either argument."""
    return max(0.0, 1.0 - spectral_angle(s, t) / _HALF_PI)


def pcc(s, t) -> float:
    """Pearson correlation coefficient between two spectra, in [-1, 1].

    The correlation is the cosine between the mean-centered spectra,
    recovered from the chord between their unit vectors (1 - |u - v|^2 / 2);
    identical inputs give exactly 1.
    """
    sv, tv = _as_vector(s, "first"), _as_vector(t, "second")
    if sv.size != tv.size:
        raise ValidationError(f"spectrum length mismatch: {sv.size} vs {tv.size}")
    if sv.size < 2:
        raise ValidationError("correlation needs at least two bands")
    sc, tc = sv - sv.mean(), tv - tv.mean()
    ns, nt = np.linalg.norm(sc), np.linalg.norm(tc)
    if ns == 0.0 or nt == 0.0:
        raise ValidationError("zero-variance spectrum has no correlation")
    chord_sq = float(((sc / ns - tc / nt) ** 2).sum())
    return float(np.clip(1.0 - chord_sq / 2.0, -1.0, 1.0))


def pcc_similarity(s, t) -> float:
    """Correlation similarity in [0, 1]: 1 correlated, 0.5 unrelated, 0 anti-correlated."""
    return (pcc(s, t) + 1.0) / 2.0


def reference_spectra(cube: HyperCube, clicks: ClickSet, method: ScfMethod) -> np.ndarray:
    """Gather and validate the clicked spectra as a (k, bands) float64 matrix.

    Negative clicks are ignored by the spectral branch. A click on a dead
    pixel (zero norm, or zero variance under correlation) is a hard error.
    """
    positives = clicks.positives()
    if not positives:
        raise ValidationError("at least one positive click is required")
    clicks.check_bounds(cube.height, cube.width)
    spectra = np.stack([cube.spectrum(c.row, c.col) for c in positives])
    if method.uses_correlation:
        if cube.bands < 2:
            raise ValidationError("correlation needs at least two bands")
        centered = spectra - spectra.mean(axis=1, keepdims=True)
        bad = np.linalg.norm(centered, axis=1) == 0.0
        if bad.any():
            c = positives[int(np.argmax(bad))]
            raise ValidationError(f"click at ({c.row}, {c.col}) has zero-variance spectrum")
    else:
        bad = np.linalg.norm(spectra, axis=1) == 0.0
        if bad.any():
            c = positives[int(np.argmax(bad))]
            raise ValidationError(f"click at ({c.row}, {c.col}) has zero-norm spectrum")
    return spectra


def _sa_block(pixels: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """Max spectral-angle similarity of each pixel row against every reference.

    References are scored one at a time (matrix-vector products): the bits of
    each reference's column then never depend on how many clicks exist, which
    keeps multi-click monotonicity exact rather than approximate.
    """
    norms = np.linalg.norm(pixels, axis=1)
    live = norms > 0.0
    best = np.zeros(pixels.shape[0])
    for ref in refs:
        cos = np.zeros(pixels.shape[0])
        cos[live] = (pixels[live] @ ref) / (norms[live] * np.linalg.norm(ref))
        angles = np.arccos(np.clip(cos, -1.0, 1.0))
        np.maximum(best, np.clip(1.0 - angles / _HALF_PI, 0.0, 1.0), out=best)
    best[~live] = 0.0  # dead pixels have no direction: no similarity
    return best


def _pcc_block(pixels: np.ndarray, refs: np.ndarray) -> tuple[np.ndarray, int]:
    """Max correlation similarity per pixel row; returns (sims, flat-spectra count)."""
    centered = pixels - pixels.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    live = norms > 0.0
    best = np.zeros(pixels.shape[0])
    for ref in refs:
        ref_c = ref - ref.mean()
        r = np.zeros(pixels.shape[0])
        r[live] = (centered[live] @ ref_c) / (norms[live] * np.linalg.norm(ref_c))
        np.maximum(best, (np.clip(r, -1.0, 1.0) + 1.0) / 2.0, out=best)
    best[~live] = 0.5  # flat spectrum: correlation treated as 0
    return best, int(np.count_nonzero(~live))


def equalize(m: SimilarityMap) -> SimilarityMap:
    """Histogram-equalize by the exact empirical CDF.

    Output at a pixel is (# pixels with value <= its value) / (total pixels),
    so ranks are preserved, ties stay tied, and values land in (0, 1].
    """
    flat = m.data.ravel()
    sorted_vals = np.sort(flat)
    cdf = np.searchsorted(sorted_vals, flat, side="right") / flat.size
    return SimilarityMap(cdf.reshape(m.data.shape))


def scf_map(
    cube: HyperCube,
    clicks: ClickSet,
    method: ScfMethod = ScfMethod.SA,
    threads: int = 1,
) -> SimilarityMap:
    """Similarity of every pixel to the clicked spectra, max-aggregated.

    Results are exact and independent of ``threads``; row blocks are fully
    independent so the partitioning cannot change any per-pixel value.
    """
    refs = reference_spectra(cube, clicks, method)
    pixels = cube.data.reshape(-1, cube.bands).astype(np.float64)
    out = np.empty(pixels.shape[0], dtype=np.float64)

    def run(lo: int, hi: int) -> int:
        if method.uses_correlation:
            out[lo:hi], n_flat = _pcc_block(pixels[lo:hi], refs)
            return n_flat
        out[lo:hi] = _sa_block(pixels[lo:hi], refs)
        return 0

    n = pixels.shape[0]
    if threads <= 1 or n < 2 * threads:
        flat_count = run(0, n)
    else:
        bounds = np.linspace(0, n, threads + 1, dtype=int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            flat_count = sum(pool.map(lambda i: run(bounds[i], bounds[i + 1]), range(threads)))

    if flat_count:
        log.warning("scf_map: %d zero-variance pixel spectra scored as 0.5", flat_count)

    # A clicked pixel's self-term makes its similarity exactly 1 in exact
    # arithmetic; pin it so rounding in the bulk kernel cannot bleed through.
    for c in clicks.positives():
        out[c.row * cube.width + c.col] = 1.0

    result = SimilarityMap(out.reshape(cube.height, cube.width))
    return equalize(result) if method.equalized else result
