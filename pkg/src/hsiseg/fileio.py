"""Bit-exact file I/O: ENVI-style cubes, SMAP/LMAP rasters, label and map PNGs.

Supported formats (all little-endian):

* ENVI-style cube: ASCII ``.hdr`` with ``key = value`` lines next to a raw
  binary file. Required keys: samples, lines, bands, data type (4=float32,
  12=uint16), interleave (bip|bil|bsq), byte order (0), wavelength = {...}.
  uint16 samples are divided by ``reflectance scale factor`` when present,
  otherwise by 65535.
* SMAP probability raster: magic ``SMAP`` + u32 height + u32 width +
  u32 reserved + height*width float32.
* LMAP label raster: magic ``LMAP`` + the same 16-byte header + u8 payload.
* PNG: 16-bit grayscale for probability maps (value/65535), 8-bit grayscale
  for labels.
"""
from __future__ import annotations

import logging
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, ValidationError
from .rasters import UNLABELED, HyperCube, LabelMap, SimilarityMap

log = logging.getLogger(__name__)

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_SMAP_MAGIC = b"SMAP"
_LMAP_MAGIC = b"LMAP"
_BINARY_SUFFIXES = ("", ".raw", ".bin", ".dat", ".img")

# ENVI numeric codes for the two supported sample types
_DTYPE_BY_CODE = {4: np.dtype("<f4"), 12: np.dtype("<u2")}


def _parse_envi_header(text: str, path: Path) -> dict:
    """Parse ``key = value`` lines; brace-delimited lists may span lines."""
    fields: dict[str, str] = {}
    lines = iter(text.splitlines())
    for line in lines:
        line = line.strip()
        if not line or line.upper() == "ENVI" or line.startswith(";"):
            continue
        if "=" not in line:
            raise FormatError(f"{path}: malformed header line {line!r}")
        key, _, value = line.partition("=")
        value = value.strip()
        if value.startswith("{") and "}" not in value:
            parts = [value]
            for cont in lines:
                parts.append(cont.strip())
                if "}" in cont:
                    break
            else:
                raise FormatError(f"{path}: unterminated list for key {key.strip()!r}")
            value = " ".join(parts)
        fields[key.strip().lower()] = value
    return fields


def _require(fields: dict, key: str, path: Path) -> str:
    if key not in fields:
        raise FormatError(f"{path}: missing required header field {key!r}")
    return fields[key]


def _parse_float_list(raw: str, key: str, path: Path) -> np.ndarray:
    raw = raw.strip()
    if not (raw.startswith("{") and raw.endswith("}")):
        raise FormatError(f"{path}: field {key!r} must be a brace-delimited list")
    items = [s for s in raw[1:-1].replace("\n", " ").split(",") if s.strip()]
    try:
        return np.array([float(s) for s in items], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: bad number in {key!r}: {exc}") from exc


def _sibling_binary(header_path: Path) -> Path:
    stem = header_path.with_suffix("") if header_path.suffix == ".hdr" else header_path
    for suffix in _BINARY_SUFFIXES:
        candidate = stem.parent / (stem.name + suffix)
        if candidate.exists() and candidate != header_path:
            return candidate
    raise FormatError(f"no binary file found next to {header_path}")


def load_cube(path: str | Path) -> HyperCube:
    """Load an ENVI-style cube; converts any interleave to the internal layout."""
    header_path = Path(path)
    try:
        text = header_path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read header {header_path}: {exc}") from exc
    fields = _parse_envi_header(text, header_path)

    try:
        samples = int(_require(fields, "samples", header_path))
        lines = int(_require(fields, "lines", header_path))
        bands = int(_require(fields, "bands", header_path))
        dtype_code = int(_require(fields, "data type", header_path))
        byte_order = int(_require(fields, "byte order", header_path))
    except ValueError as exc:
        raise FormatError(f"{header_path}: non-integer header field: {exc}") from exc
    interleave = _require(fields, "interleave", header_path).lower()

    if samples <= 0 or lines <= 0 or bands <= 0:
        raise FormatError(f"{header_path}: samples/lines/bands must be positive")
    if byte_order != 0:
        raise FormatError(f"{header_path}: only little-endian (byte order = 0) is supported")
    if interleave not in ("bip", "bil", "bsq"):
        raise FormatError(f"{header_path}: unsupported interleave {interleave!r}")
    if dtype_code not in _DTYPE_BY_CODE:
        raise FormatError(f"{header_path}: unsupported data type {dtype_code}")

    wavelengths = _parse_float_list(
        _require(fields, "wavelength", header_path), "wavelength", header_path
    )
    if wavelengths.size != bands:
        raise FormatError(
            f"{header_path}: wavelength count mismatch: "
            f"{wavelengths.size} wavelengths for {bands} bands"
        )

    dtype = _DTYPE_BY_CODE[dtype_code]
    binary_path = _sibling_binary(header_path)
    raw = np.fromfile(binary_path, dtype=dtype)
    expected = samples * lines * bands
    if raw.size != expected:
        raise FormatError(
            f"{binary_path}: dimension mismatch: {raw.size} samples on disk, "
            f"header implies {expected}"
        )

    if interleave == "bip":
        cube = raw.reshape(lines, samples, bands)
    elif interleave == "bil":
        cube = raw.reshape(lines, bands, samples).transpose(0, 2, 1)
    else:  # bsq
        cube = raw.reshape(bands, lines, samples).transpose(1, 2, 0)

    if dtype_code == 12:
        scale = float(fields.get("reflectance scale factor", 2**16 - 1))
        data = cube.astype(np.float32) / np.float32(scale)
    else:
        data = np.ascontiguousarray(cube)

    try:
        return HyperCube(wavelengths=wavelengths, data=data)
    except ValidationError as exc:
        raise FormatError(f"{header_path}: {exc}") from exc


def save_cube(cube: HyperCube, path: str | Path) -> None:
    """Write a float32 BIP cube readable by :func:`load_cube`, bit-exactly."""
    if cube.bands == 0:
        raise ValidationError("zero-band cube cannot be written")
    header_path = Path(path)
    if header_path.suffix != ".hdr":
        header_path = header_path.with_suffix(header_path.suffix + ".hdr")
    binary_path = header_path.with_suffix(".raw")

    wl = ", ".join(repr(float(w)) for w in cube.wavelengths)
    header = (
        "ENVI\n"
        f"samples = {cube.width}\n"
        f"lines = {cube.height}\n"
        f"bands = {cube.bands}\n"
        "data type = 4\n"
        "interleave = bip\n"
        "byte order = 0\n"
        f"wavelength = {{{wl}}}\n"
    )
    header_path.write_text(header)
    cube.data.astype("<f4").tofile(binary_path)


def _read_block_raster(path: Path, magic: bytes, itemsize: int) -> tuple[int, int, bytes]:
    blob = path.read_bytes()
    if len(blob) < 16 or blob[:4] != magic:
        raise FormatError(f"{path}: magic mismatch, expected {magic.decode()}")
    height, width, _reserved = struct.unpack("<III", blob[4:16])
    if height == 0 or width == 0 or height * width > 2**31:
        raise FormatError(f"{path}: dimension overflow ({height}x{width})")
    payload = blob[16:]
    if len(payload) != height * width * itemsize:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, expected {height * width * itemsize}"
        )
    return height, width, payload


def _write_block_raster(path: Path, magic: bytes, array: np.ndarray) -> None:
    header = magic + struct.pack("<III", array.shape[0], array.shape[1], 0)
    path.write_bytes(header + array.tobytes())


def load_probability_map(path: str | Path) -> SimilarityMap:
    """Load a probability map from an SMAP raster or a 16-bit grayscale PNG.

    Out-of-range values are clamped to [0, 1] (and logged); NaNs are an error.
    """
    path = Path(path)
    head = path.read_bytes()[:8] if path.exists() else b""
    if head.startswith(_PNG_SIGNATURE):
        img = Image.open(path)
        if img.mode not in ("I;16", "I;16B", "I"):
            raise FormatError(f"{path}: probability PNG must be 16-bit grayscale, got {img.mode}")
        values = np.asarray(img, dtype=np.float64) / 65535.0
    else:
        height, width, payload = _read_block_raster(path, _SMAP_MAGIC, 4)
        values = np.frombuffer(payload, dtype="<f4").reshape(height, width).astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{path}: non-finite probability values")
    if values.min() < 0.0 or values.max() > 1.0:
        log.warning("%s: clamping probabilities outside [0, 1] (range %.4g..%.4g)",
                    path, values.min(), values.max())
        values = np.clip(values, 0.0, 1.0)
    return SimilarityMap(values)


def save_probability_map(m: SimilarityMap, path: str | Path) -> None:
    """Write a SMAP float32 raster, or a 16-bit PNG if the path ends in .png."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        quantized = np.rint(m.data * 65535.0).astype(np.uint16)
        Image.fromarray(quantized).save(path, format="PNG")
    else:
        _write_block_raster(path, _SMAP_MAGIC, m.data.astype("<f4"))


def load_labels(path: str | Path, classes: int | None = None) -> LabelMap:
    """Load labels from an 8-bit grayscale PNG or an LMAP raster.

    ``classes`` defaults to (max non-sentinel value) + 1.
    """
    path = Path(path)
    head = path.read_bytes()[:8] if path.exists() else b""
    if head.startswith(_PNG_SIGNATURE):
        img = Image.open(path)
        if img.mode != "L":
            raise FormatError(f"{path}: label PNG must be 8-bit grayscale, got {img.mode}")
        data = np.asarray(img, dtype=np.uint8)
    else:
        height, width, payload = _read_block_raster(path, _LMAP_MAGIC, 1)
        data = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    if classes is None:
        non_sentinel = data[data != UNLABELED]
        classes = int(non_sentinel.max()) + 1 if non_sentinel.size else 0
    return LabelMap(data=data, classes=classes)


def save_labels(labels: LabelMap, path: str | Path) -> None:
    """Write labels as an 8-bit PNG, or an LMAP raster for non-.png paths."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        Image.fromarray(labels.data).save(path, format="PNG")
    else:
        _write_block_raster(path, _LMAP_MAGIC, labels.data)
