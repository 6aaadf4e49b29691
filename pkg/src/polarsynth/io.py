"""PFM / PGM / PPM readers and writers and the on-disk scene directory convention.

A scene directory holds exactly one of three layouts plus ``meta.txt``:

* angle images ``I000.pfm I045.pfm I090.pfm I135.pfm``
* property maps ``s0.pfm aolp.pfm dolp.pfm`` (``valid.pfm`` optional, 0/1)
* a mosaic frame ``mosaic.pfm``

``meta.txt`` is ``key=value`` per line with keys pattern, peak, bitdepth,
seed and gray_weights.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeError
from .mosaic import MosaicFrame, MosaicPattern
from .stokes import LUMA_WEIGHTS, PolarizationStack, PolarStateMap, to_grayscale

ANGLE_FILES = ("I000.pfm", "I045.pfm", "I090.pfm", "I135.pfm")
MAP_FILES = ("s0.pfm", "aolp.pfm", "dolp.pfm")
MOSAIC_FILE = "mosaic.pfm"
META_FILE = "meta.txt"
META_KEYS = ("pattern", "peak", "bitdepth", "seed", "gray_weights")

_PFM_HEADER = re.compile(rb"(P[Ff])\s+(\d+)\s+(\d+)\s+([-+]?[0-9.]+(?:[eE][-+]?\d+)?)\s")
_PNM_HEADER = re.compile(rb"(P[56])\s+(\d+)\s+(\d+)\s+(\d+)\s")


# --------------------------------------------------------------------- PFM


def write_pfm(path, image) -> None:
    """Write float32 little-endian PFM, rows stored bottom-up."""
    image = np.asarray(image, dtype=np.float32)
    if image.ndim == 3 and image.shape[2] == 1:
        image = image[..., 0]
    if image.ndim == 2:
        tag = b"Pf"
    elif image.ndim == 3 and image.shape[2] == 3:
        tag = b"PF"
    else:
        raise ShapeError(f"PFM stores 1 or 3 channels, got shape {image.shape}")
    h, w = image.shape[:2]
    with open(path, "wb") as f:
        f.write(tag + b"\n")
        f.write(f"{w} {h}\n".encode())
        f.write(b"-1.0\n")
        f.write(np.flipud(image).astype("<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"missing file {path}")
    raw = path.read_bytes()
    m = _PFM_HEADER.match(raw)
    if m is None:
        raise FormatError(f"malformed PFM header in {path}")
    channels = 3 if m.group(1) == b"PF" else 1
    w, h = int(m.group(2)), int(m.group(3))
    scale = float(m.group(4))
    if scale == 0 or w <= 0 or h <= 0:
        raise FormatError(f"invalid PFM header values in {path}")
    dtype = "<f4" if scale < 0 else ">f4"
    payload = raw[m.end():]
    expected = w * h * channels * 4
    if len(payload) != expected:
        raise FormatError(f"{path}: expected {expected} data bytes, found {len(payload)}")
    data = np.frombuffer(payload, dtype=dtype).astype(np.float32)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return np.flipud(data.reshape(shape)).copy()


# --------------------------------------------------------------------- PGM / PPM


def write_pnm(path, image, maxval: int = 255) -> None:
    """Write binary PGM (2-D) or PPM (H, W, 3) from integer codes in [0, maxval]."""
    if maxval not in (255, 65535):
        raise ValueError("maxval must be 255 or 65535")
    image = np.asarray(image)
    if image.ndim == 2:
        tag = b"P5"
    elif image.ndim == 3 and image.shape[2] == 3:
        tag = b"P6"
    else:
        raise ShapeError(f"PNM stores 1 or 3 channels, got shape {image.shape}")
    if np.any(image < 0) or np.any(image > maxval):
        raise ValueError(f"sample values must lie in [0, {maxval}]")
    dtype = ">u2" if maxval > 255 else "u1"
    h, w = image.shape[:2]
    with open(path, "wb") as f:
        f.write(tag + f"\n{w} {h}\n{maxval}\n".encode())
        f.write(image.astype(dtype).tobytes())


def read_pnm(path) -> tuple[np.ndarray, int]:
    """Return (integer samples, maxval)."""
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"missing file {path}")
    raw = path.read_bytes()
    m = _PNM_HEADER.match(raw)
    if m is None:
        raise FormatError(f"malformed PNM header in {path}")
    channels = 3 if m.group(1) == b"P6" else 1
    w, h, maxval = int(m.group(2)), int(m.group(3)), int(m.group(4))
    if not 0 < maxval < 65536:
        raise FormatError(f"invalid maxval {maxval} in {path}")
    dtype = ">u2" if maxval > 255 else "u1"
    nbytes = 2 if maxval > 255 else 1
    payload = raw[m.end():]
    if len(payload) != w * h * channels * nbytes:
        raise FormatError(f"{path}: truncated or oversized PNM payload")
    data = np.frombuffer(payload, dtype=dtype).astype(np.uint16 if nbytes == 2 else np.uint8)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return data.reshape(shape).copy(), maxval


def to_codes(values, maxval: int = 255) -> np.ndarray:
    """Quantize [0, 1] floats to integer codes with round-half-up."""
    values = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(values * maxval + 0.5 + 1e-9).astype(np.int64)


# --------------------------------------------------------------------- meta.txt


def read_meta(scene_dir) -> dict[str, str]:
    path = Path(scene_dir) / META_FILE
    if not path.exists():
        return {}
    meta = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in META_KEYS:
            raise FormatError(f"{path}:{lineno}: unknown key {key!r}")
        meta[key] = value
    return meta


def write_meta(scene_dir, meta: dict) -> None:
    unknown = set(meta) - set(META_KEYS)
    if unknown:
        raise ValueError(f"unknown meta keys {sorted(unknown)}")
    lines = [f"{k}={meta[k]}" for k in META_KEYS if k in meta]
    (Path(scene_dir) / META_FILE).write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------------- scenes


def detect_layout(scene_dir) -> str:
    """Return 'angles', 'maps' or 'mosaic'; raise if none or several are present."""
    d = Path(scene_dir)
    if not d.is_dir():
        raise FormatError(f"scene directory {d} not found")
    found = []
    if all((d / f).exists() for f in ANGLE_FILES):
        found.append("angles")
    if all((d / f).exists() for f in MAP_FILES):
        found.append("maps")
    if (d / MOSAIC_FILE).exists():
        found.append("mosaic")
    if len(found) != 1:
        raise FormatError(f"{d}: expected exactly one scene layout, found {found or 'none'}")
    return found[0]


def save_stack(scene_dir, stack: PolarizationStack, meta: dict | None = None) -> None:
    d = Path(scene_dir)
    d.mkdir(parents=True, exist_ok=True)
    for name, img in zip(ANGLE_FILES, stack.as_list()):
        write_pfm(d / name, img)
    if meta is not None:
        write_meta(d, meta)


def load_stack(scene_dir, grayscale: bool = True) -> PolarizationStack:
    """Read angle images; 3-channel images are luma-reduced unless ``grayscale`` is False."""
    d = Path(scene_dir)
    missing = [f for f in ANGLE_FILES if not (d / f).exists()]
    if missing:
        raise FormatError(f"{d}: missing angle images {missing}")
    images = [read_pfm(d / f).astype(np.float64) for f in ANGLE_FILES]
    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise ShapeError(f"{d}: angle images differ in shape {sorted(shapes)}")
    if grayscale:
        weights = _gray_weights(read_meta(d))
        images = [to_grayscale(img, weights) for img in images]
    return PolarizationStack.from_list(images)


def _gray_weights(meta: dict) -> tuple[float, ...]:
    if "gray_weights" in meta:
        vals = tuple(float(v) for v in meta["gray_weights"].split(","))
        if len(vals) != 3:
            raise FormatError("gray_weights needs three comma-separated values")
        return vals
    return LUMA_WEIGHTS


def save_state(scene_dir, state: PolarStateMap, meta: dict | None = None) -> None:
    d = Path(scene_dir)
    d.mkdir(parents=True, exist_ok=True)
    write_pfm(d / "s0.pfm", state.s0)
    write_pfm(d / "aolp.pfm", state.aolp)
    write_pfm(d / "dolp.pfm", state.dolp)
    write_pfm(d / "valid.pfm", state.valid.astype(np.float32))
    if meta is not None:
        write_meta(d, meta)


def load_state(scene_dir) -> PolarStateMap:
    d = Path(scene_dir)
    missing = [f for f in MAP_FILES if not (d / f).exists()]
    if missing:
        raise FormatError(f"{d}: missing property maps {missing}")
    s0, aolp, dolp = (read_pfm(d / f).astype(np.float64) for f in MAP_FILES)
    if not s0.shape == aolp.shape == dolp.shape:
        raise ShapeError(f"{d}: property maps differ in shape")
    if (d / "valid.pfm").exists():
        valid = read_pfm(d / "valid.pfm") > 0.5
        if valid.shape != s0.shape:
            raise ShapeError(f"{d}: validity map shape mismatch")
        return PolarStateMap(s0, dolp, np.where(valid, aolp, 0.0), valid)
    return PolarStateMap.from_arrays(s0, dolp, aolp)


def save_mosaic(scene_dir, frame: MosaicFrame, meta: dict | None = None) -> None:
    d = Path(scene_dir)
    d.mkdir(parents=True, exist_ok=True)
    write_pfm(d / MOSAIC_FILE, frame.data)
    meta = dict(meta or {})
    meta["pattern"] = frame.pattern.to_string()
    write_meta(d, meta)


def load_mosaic(scene_dir) -> MosaicFrame:
    d = Path(scene_dir)
    data = read_pfm(d / MOSAIC_FILE).astype(np.float64)
    if data.ndim != 2:
        raise FormatError(f"{d}: mosaic frame must be single-channel")
    meta = read_meta(d)
    pattern = MosaicPattern.from_string(meta["pattern"]) if "pattern" in meta else MosaicPattern()
    return MosaicFrame(data, pattern)

