"""Synthetic hyperspectral scenes with ground truth.

Scenes are Voronoi mosaics: random seed points are dealt to classes
round-robin and every pixel takes the class of its nearest seed, which gives
irregular boundaries and multiple components per class. Each pixel's spectrum
is its class prototype (a Gaussian mixture over wavelength) scaled by a
smooth multiplicative shading field, with optional relative Gaussian noise.
A configurable border ring is marked unlabeled.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .rasters import UNLABELED, HyperCube, LabelMap


@dataclass(frozen=True)
class ClassSpec:
    """Spectral prototype: Gaussian mixture over wavelength, plus region count."""

    centers_nm: tuple[float, ...]
    widths_nm: tuple[float, ...]
    amplitudes: tuple[float, ...]
    region_seeds: int = 2
    baseline: float = 0.0

    def __post_init__(self):
        if not (len(self.centers_nm) == len(self.widths_nm) == len(self.amplitudes)):
            raise ValidationError("centers, widths, and amplitudes must align")
        if self.region_seeds < 1:
            raise ValidationError("each class needs at least one region seed")
        if any(w <= 0 for w in self.widths_nm) or any(a < 0 for a in self.amplitudes):
            raise ValidationError("widths must be positive and amplitudes non-negative")

    def prototype(self, wavelengths: np.ndarray) -> np.ndarray:
        spectrum = np.full(wavelengths.shape, self.baseline, dtype=np.float64)
        for c, w, a in zip(self.centers_nm, self.widths_nm, self.amplitudes):
            spectrum += a * np.exp(-((wavelengths - c) ** 2) / (2.0 * w**2))
        return spectrum


@dataclass(frozen=True)
class Shading:
    minimum: float = 1.0
    maximum: float = 1.0
    smoothness: float = 8.0  # pixels per low-resolution grid cell

    def __post_init__(self):
        if self.minimum <= 0 or self.maximum < self.minimum:
            raise ValidationError("shading range must satisfy 0 < min <= max")
        if self.smoothness <= 0:
            raise ValidationError("shading smoothness must be positive")


@dataclass(frozen=True)
class SceneSpec:
    height: int
    width: int
    bands: int
    wavelength_range: tuple[float, float] = (450.0, 950.0)
    classes: tuple[ClassSpec, ...] = ()
    shading: Shading = field(default_factory=Shading)
    noise_sigma: float = 0.0
    border: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.bands < 2:
            raise ValidationError("a scene needs at least two bands")
        if len(self.classes) < 2:
            raise ValidationError("a scene needs at least two classes")
        lo, hi = self.wavelength_range
        if not (0 < lo < hi):
            raise ValidationError("wavelength range must be positive and increasing")
        if self.noise_sigma < 0 or self.border < 0:
            raise ValidationError("noise sigma and border must be non-negative")

    def to_json(self) -> str:
        doc = {
            "height": self.height,
            "width": self.width,
            "bands": self.bands,
            "wavelength_range": list(self.wavelength_range),
            "classes": [
                {
                    "centers_nm": list(c.centers_nm),
                    "widths_nm": list(c.widths_nm),
                    "amplitudes": list(c.amplitudes),
                    "region_seeds": c.region_seeds,
                    "baseline": c.baseline,
                }
                for c in self.classes
            ],
            "shading": {
                "min": self.shading.minimum,
                "max": self.shading.maximum,
                "smoothness": self.shading.smoothness,
            },
            "noise_sigma": self.noise_sigma,
            "border": self.border,
            "seed": self.seed,
        }
        return json.dumps(doc, indent=2)

    @staticmethod
    def from_json(text: str) -> "SceneSpec":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"bad scene spec JSON: {exc}") from exc
        try:
            shading_doc = doc.get("shading", {})
            return SceneSpec(
                height=int(doc["height"]),
                width=int(doc["width"]),
                bands=int(doc["bands"]),
                wavelength_range=tuple(doc.get("wavelength_range", (450.0, 950.0))),
                classes=tuple(
                    ClassSpec(
                        centers_nm=tuple(c["centers_nm"]),
                        widths_nm=tuple(c["widths_nm"]),
                        amplitudes=tuple(c["amplitudes"]),
                        region_seeds=int(c.get("region_seeds", 2)),
                        baseline=float(c.get("baseline", 0.0)),
                    )
                    for c in doc["classes"]
                ),
                shading=Shading(
                    minimum=float(shading_doc.get("min", 1.0)),
                    maximum=float(shading_doc.get("max", 1.0)),
                    smoothness=float(shading_doc.get("smoothness", 8.0)),
                ),
                noise_sigma=float(doc.get("noise_sigma", 0.0)),
                border=int(doc.get("border", 0)),
                seed=int(doc.get("seed", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"bad scene spec: {exc}") from exc

    @staticmethod
    def load(path: str | Path) -> "SceneSpec":
        return SceneSpec.from_json(Path(path).read_text())


def _bilinear_field(rng: np.random.Generator, spec: SceneSpec) -> np.ndarray:
    """Smooth shading field: bilinear upsampling of a low-resolution random grid."""
    sh = spec.shading
    if sh.minimum == sh.maximum:
        return np.full((spec.height, spec.width), sh.minimum)
    grid_h = int(np.ceil(spec.height / sh.smoothness)) + 1
    grid_w = int(np.ceil(spec.width / sh.smoothness)) + 1
    grid = rng.uniform(sh.minimum, sh.maximum, size=(grid_h, grid_w))

    r = np.arange(spec.height) / sh.smoothness
    c = np.arange(spec.width) / sh.smoothness
    r0 = np.minimum(r.astype(int), grid_h - 2)
    c0 = np.minimum(c.astype(int), grid_w - 2)
    fr = (r - r0)[:, None]
    fc = (c - c0)[None, :]
    top = grid[r0][:, c0] * (1 - fc) + grid[r0][:, c0 + 1] * fc
    bottom = grid[r0 + 1][:, c0] * (1 - fc) + grid[r0 + 1][:, c0 + 1] * fc
    return top * (1 - fr) + bottom * fr


def generate_scene(spec: SceneSpec) -> tuple[HyperCube, LabelMap]:
    """Deterministic scene synthesis; identical bits for identical specs."""
    rng = np.random.default_rng(spec.seed)

    # deal region seeds to classes round-robin, then drop them at random positions
    remaining = [c.region_seeds for c in spec.classes]
    seed_classes: list[int] = []
    while any(remaining):
        for ci in range(len(spec.classes)):
            if remaining[ci] > 0:
                seed_classes.append(ci)
                remaining[ci] -= 1
    points = np.column_stack(
        [
            rng.uniform(0, spec.height, size=len(seed_classes)),
            rng.uniform(0, spec.width, size=len(seed_classes)),
        ]
    )

    rows, cols = np.mgrid[0 : spec.height, 0 : spec.width]
    d2 = (rows[..., None] - points[:, 0]) ** 2 + (cols[..., None] - points[:, 1]) ** 2
    nearest = np.argmin(d2, axis=2)
    class_index = np.array(seed_classes, dtype=np.uint8)[nearest]

    wavelengths = np.linspace(*spec.wavelength_range, spec.bands)
    prototypes = np.stack([c.prototype(wavelengths) for c in spec.classes])
    shading = _bilinear_field(rng, spec)

    data = prototypes[class_index] * shading[:, :, None]
    if spec.noise_sigma > 0:
        noise = rng.standard_normal(size=data.shape) * spec.noise_sigma
        data = data * (1.0 + noise)
    data = np.maximum(data, 0.0)  # relative noise can undershoot; keep radiance non-negative

    labels = class_index.copy()
    if spec.border > 0:
        b = spec.border
        labels[:b, :] = UNLABELED
        labels[-b:, :] = UNLABELED
        labels[:, :b] = UNLABELED
        labels[:, -b:] = UNLABELED

    cube = HyperCube(wavelengths=wavelengths, data=data.astype(np.float32))
    return cube, LabelMap(data=labels, classes=len(spec.classes))


def apply_shading(cube: HyperCube, shading_field: np.ndarray) -> HyperCube:
    """Scale every pixel's spectrum by a positive per-pixel factor."""
    shading_field = np.asarray(shading_field, dtype=np.float64)
    if shading_field.shape != (cube.height, cube.width):
        raise ValidationError("shading field must match the cube's spatial dimensions")
    if shading_field.size and shading_field.min() <= 0:
        raise ValidationError("shading field must be strictly positive")
    scaled = cube.data.astype(np.float64) * shading_field[:, :, None]
    return HyperCube(wavelengths=cube.wavelengths, data=scaled.astype(np.float32))
