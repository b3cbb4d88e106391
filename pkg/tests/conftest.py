"""Shared fixtures and independent brute-force oracles.

The oracles here deliberately avoid the library's code paths (scipy labeling,
EDT, vectorized sweeps) so that implementation and check stay independent.
"""
from __future__ import annotations

from collections import deque

import numpy as np
import pytest

from hsiseg import ClassSpec, SceneSpec, Shading, generate_scene


def orthogonal_scene(seed: int = 0, height: int = 24, width: int = 24, bands: int = 8,
                     n_classes: int = 2, noise: float = 0.0, border: int = 1,
                     shading: tuple[float, float] = (1.0, 1.0)) -> SceneSpec:
    """Scene whose class prototypes are one-hot on distinct bands.

    Gaussians 1 nm wide centered exactly on band wavelengths underflow to
    zero at every other band, so prototypes are exactly orthogonal.
    """
    wl = np.linspace(400.0, 700.0, bands)
    classes = tuple(
        ClassSpec(centers_nm=(float(wl[i]),), widths_nm=(1.0,), amplitudes=(1.0,),
                  region_seeds=2)
        for i in range(n_classes)
    )
    return SceneSpec(height=height, width=width, bands=bands,
                     wavelength_range=(400.0, 700.0), classes=classes,
                     shading=Shading(shading[0], shading[1], 8.0),
                     noise_sigma=noise, border=border, seed=seed)


def smooth_scene(seed: int = 0, height: int = 32, width: int = 32, bands: int = 16,
                 n_classes: int = 3, noise: float = 0.08, border: int = 1,
                 shading: tuple[float, float] = (0.8, 1.2)) -> SceneSpec:
    """Scene with broad, overlapping prototypes: distinct but not orthogonal."""
    centers = np.linspace(480.0, 880.0, n_classes)
    classes = tuple(
        ClassSpec(centers_nm=(float(c),), widths_nm=(45.0,), amplitudes=(1.0,),
                  region_seeds=2, baseline=0.05)
        for c in centers
    )
    return SceneSpec(height=height, width=width, bands=bands,
                     wavelength_range=(450.0, 950.0), classes=classes,
                     shading=Shading(shading[0], shading[1], 10.0),
                     noise_sigma=noise, border=border, seed=seed)


@pytest.fixture
def ortho_scene():
    return generate_scene(orthogonal_scene())


# ---------------------------------------------------------------- oracles

def bfs_components(mask: np.ndarray, connectivity: int) -> list[set[tuple[int, int]]]:
    """Flood-fill component enumeration, no scipy."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    if connectivity == 4:
        steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    else:
        steps = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]
    seen = np.zeros_like(mask)
    components = []
    for r in range(h):
        for c in range(w):
            if mask[r, c] and not seen[r, c]:
                comp = set()
                queue = deque([(r, c)])
                seen[r, c] = True
                while queue:
                    cr, cc = queue.popleft()
                    comp.add((cr, cc))
                    for dr, dc in steps:
                        nr, nc = cr + dr, cc + dc
                        if 0 <= nr < h and 0 <= nc < w and mask[nr, nc] and not seen[nr, nc]:
                            seen[nr, nc] = True
                            queue.append((nr, nc))
                components.append(comp)
    return components


def brute_distance_transform(mask: np.ndarray) -> np.ndarray:
    """All-pairs distance to the nearest background-or-border pixel."""
    mask = np.asarray(mask, dtype=bool)
    padded = np.pad(mask, 1, mode="constant", constant_values=False)
    fg = np.argwhere(padded).astype(np.float64)
    bg = np.argwhere(~padded).astype(np.float64)
    out = np.zeros(padded.shape)
    if fg.size and bg.size:
        d2 = ((fg[:, None, :] - bg[None, :, :]) ** 2).sum(axis=2)
        out[padded] = np.sqrt(d2.min(axis=1))
    return out[1:-1, 1:-1]


def brute_center(mask: np.ndarray, connectivity: int) -> tuple[int, int]:
    """Reference click placement: largest component, deepest pixel, row/col ties."""
    comps = bfs_components(mask, connectivity)
    assert comps, "oracle needs non-empty mask"
    sizes = [len(c) for c in comps]
    biggest = max(sizes)
    # first component in raster order among the largest
    comp = next(c for c in comps if len(c) == biggest)
    dist = brute_distance_transform(mask)
    best = None
    for r, c in sorted(comp):
        key = (-dist[r, c], r, c)
        if best is None or key < best[0]:
            best = (key, (r, c))
    return best[1]


def brute_dice(a: np.ndarray, b: np.ndarray, empty_value: float = 1.0) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    na, nb, overlap = 0, 0, 0
    for r in range(a.shape[0]):
        for c in range(a.shape[1]):
            na += int(a[r, c])
            nb += int(b[r, c])
            overlap += int(a[r, c] and b[r, c])
    if na + nb == 0:
        return empty_value
    return 2.0 * overlap / (na + nb)


def brute_d_at_max(values: np.ndarray, gt: np.ndarray, eval_mask: np.ndarray) -> tuple[float, float]:
    """Sweep every candidate threshold (distinct labeled values, 0, above-1)."""
    eval_mask = np.asarray(eval_mask, dtype=bool)
    gt_m = np.asarray(gt, dtype=bool) & eval_mask
    candidates = sorted(set(float(v) for v in values[eval_mask]) | {0.0, 1.0 + 1e-9})
    best, best_t = -1.0, None
    for t in candidates:
        pred = (values >= t) & eval_mask
        score = brute_dice(pred, gt_m)
        if score > best or (score == best and t < best_t):
            best, best_t = score, t
    return best, best_t
