"""Division-of-focal-plane polarization sensor: mosaicing, bilinear demosaicing, noise."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .stokes import STACK_ANGLES_DEG, PolarizationStack

DEFAULT_PATTERN = ((90, 45), (135, 0))


@dataclass(frozen=True)
class MosaicPattern:
    """Analyzer angle (degrees) of each cell of the 2x2 superpixel, row-major."""

    layout: tuple[tuple[int, int], tuple[int, int]] = DEFAULT_PATTERN

    def __post_init__(self):
        cells = [a for row in self.layout for a in row]
        if len(self.layout) != 2 or any(len(r) != 2 for r in self.layout):
            raise PreconditionError("pattern must be 2x2")
        if sorted(cells) != sorted(STACK_ANGLES_DEG):
            raise PreconditionError(f"pattern must hold each of {STACK_ANGLES_DEG} once, got {cells}")

    def offset(self, angle: int) -> tuple[int, int]:
        """(row, col) position of ``angle`` inside the superpixel."""
        for r in range(2):
            for c in range(2):
                if self.layout[r][c] == angle:
                    return r, c
        raise KeyError(angle)

    def to_string(self) -> str:
        return ",".join(str(a) for row in self.layout for a in row)

    @classmethod
    def from_string(cls, text: str) -> MosaicPattern:
        vals = [int(v) for v in text.replace(";", ",").split(",") if v.strip()]
        if len(vals) != 4:
            raise PreconditionError(f"pattern needs 4 angles, got {text!r}")
        return cls(((vals[0], vals[1]), (vals[2], vals[3])))


@dataclass
class MosaicFrame:
    data: np.ndarray
    pattern: MosaicPattern = field(default_factory=MosaicPattern)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise PreconditionError("mosaic frames are single-channel 2-D arrays")
        h, w = self.data.shape
        if h % 2 or w % 2:
            raise PreconditionError(f"mosaic dimensions must be even, got {w}x{h}")
        if not np.all(np.isfinite(self.data)) or np.any(self.data < 0):
            raise PreconditionError("mosaic values must be finite and non-negative")


@dataclass(frozen=True)
class SensorNoiseModel:
    read_sigma: float = 0.0
    shot_gain: float = 0.0  # photons per unit intensity; 0 disables shot noise
    bit_depth: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.read_sigma < 0 or self.shot_gain < 0:
            raise PreconditionError("noise parameters must be non-negative")
        if self.bit_depth not in (None, 8, 12, 16):
            raise PreconditionError(f"unsupported bit depth {self.bit_depth}")


def _stack_by_angle(stack: PolarizationStack) -> dict[int, np.ndarray]:
    return dict(zip(STACK_ANGLES_DEG, stack.as_list()))


def mosaic(stack: PolarizationStack, pattern: MosaicPattern | None = None) -> MosaicFrame:
    pattern = pattern or MosaicPattern()
    if len(stack.shape) != 2:
        raise PreconditionError("mosaic expects single-channel stacks")
    h, w = stack.shape
    if h % 2 or w % 2:
        raise PreconditionError(f"mosaic dimensions must be even, got {w}x{h}")
    out = np.empty((h, w), dtype=np.float64)
    for angle, img in _stack_by_angle(stack).items():
        r, c = pattern.offset(angle)
        out[r::2, c::2] = img[r::2, c::2]
    return MosaicFrame(out, pattern)


def _interp_axis(samples: np.ndarray, offset: int, full: int, axis: int) -> np.ndarray:
    # full-grid position p maps to lattice coordinate (p - offset) / 2, clamped to the lattice
    n = samples.shape[axis]
    u = np.clip((np.arange(full) - offset) / 2.0, 0.0, n - 1)
    lo = np.floor(u).astype(int)
    hi = np.minimum(lo + 1, n - 1)
    f = u - lo
    a = np.take(samples, lo, axis=axis)
    b = np.take(samples, hi, axis=axis)
    shape = [1, 1]
    shape[axis] = full
    f = f.reshape(shape)
    return a + f * (b - a)


def demosaic(frame: MosaicFrame) -> PolarizationStack:
    """Bilinear reconstruction of each analyzer channel from its quarter-resolution lattice."""
    h, w = frame.data.shape
    channels = []
    for angle in STACK_ANGLES_DEG:
        r, c = frame.pattern.offset(angle)
        lattice = frame.data[r::2, c::2]
        rows = _interp_axis(lattice, r, h, axis=0)
        full = _interp_axis(rows, c, w, axis=1)
        channels.append(np.maximum(full, 0.0))
    return PolarizationStack.from_list(channels)


def quantize(data, bit_depth: int) -> np.ndarray:
    """Round to the 2^b - 1 level grid with round-half-up."""
    data = np.asarray(data, dtype=np.float64)
    if np.any(data < 0) or np.any(data > 1) or not np.all(np.isfinite(data)):
        raise PreconditionError("quantize expects values in [0, 1]")
    levels = float(2**bit_depth - 1)
    # the small guard keeps exact halves such as 1/510 * 255 from rounding down
    codes = np.floor(data * levels + 0.5 + 1e-9)
    return codes / levels


def quantize_frame(frame: MosaicFrame, bit_depth: int) -> MosaicFrame:
    return MosaicFrame(quantize(frame.data, bit_depth), frame.pattern)


def apply_noise(frame: MosaicFrame, model: SensorNoiseModel) -> MosaicFrame:
    """Shot + read noise, then optional quantization; deterministic in ``model.seed``.

    Draws are made in row-major pixel order from a single seeded stream, so the
    result depends only on the seed and the frame size.
    """
    rng = np.random.default_rng(model.seed)
    v = frame.data.copy()
    if model.shot_gain > 0:
        v = rng.poisson(v * model.shot_gain).astype(np.float64) / model.shot_gain
    if model.read_sigma > 0:
        v = v + rng.normal(0.0, model.read_sigma, size=v.shape)
    v = np.maximum(v, 0.0)
    if model.bit_depth is not None:
        v = quantize(np.minimum(v, 1.0), model.bit_depth)
    return MosaicFrame(v, frame.pattern)


def extract_samples(frame: MosaicFrame, angle: int) -> np.ndarray:
    """Quarter-resolution lattice of raw samples for one analyzer angle."""
    r, c = frame.pattern.offset(angle)
    return frame.data[r::2, c::2]

