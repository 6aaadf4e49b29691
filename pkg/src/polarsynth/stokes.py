"""Linear polarization image formation, Stokes recovery and the sinusoidal AoLP encoding.

Images are numpy arrays of shape (H, W) or (H, W, 3) holding linear radiance.
All operations are elementwise, so 3-channel inputs are processed per channel;
use :func:`to_grayscale` first when a single-channel result is wanted.

Angles are radians. The angle of linear polarization (AoLP) is only defined
modulo pi and is kept in the canonical range (-pi/2, pi/2].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, ShapeError

# Relative Stokes magnitude below which AoLP is considered undefined.
EPS_POL = 1e-6
# Absolute s0 below which a pixel is treated as dark.
EPS_DARK = 1e-8
# Rounding slack so a synthesized stack at exactly P = EPS_POL stays valid.
_POL_SLACK = 1.0 - 1e-9
# Minimum length of an encoded (cos 2phi, sin 2phi) vector for a defined AoLP.
EPS_ENC = 1e-6

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
STACK_ANGLES_DEG = (0, 45, 90, 135)

HALF_PI = 0.5 * np.pi


def _same_shape(**arrays: np.ndarray) -> tuple[int, ...]:
    shapes = {name: np.shape(a) for name, a in arrays.items()}
    first = next(iter(shapes.values()))
    if any(s != first for s in shapes.values()):
        raise ShapeError(f"dimension mismatch: {shapes}")
    return first


@dataclass
class PolarStateMap:
    """Per-pixel total intensity, DoLP, AoLP and AoLP validity."""

    s0: np.ndarray
    dolp: np.ndarray
    aolp: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.s0 = np.asarray(self.s0, dtype=np.float64)
        self.dolp = np.asarray(self.dolp, dtype=np.float64)
        self.aolp = np.asarray(self.aolp, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        _same_shape(s0=self.s0, dolp=self.dolp, aolp=self.aolp, valid=self.valid)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.s0.shape

    @classmethod
    def from_arrays(cls, s0, dolp, aolp, valid=None) -> PolarStateMap:
        """Build a state, deriving validity from the thresholds when not given."""
        s0 = np.asarray(s0, dtype=np.float64)
        dolp = np.asarray(dolp, dtype=np.float64)
        if valid is None:
            valid = (dolp >= EPS_POL) & (s0 >= EPS_DARK)
        return cls(s0, dolp, wrap_aolp(aolp), valid)


@dataclass
class PolarizationStack:
    """Four registered images behind analyzers at 0, 45, 90 and 135 degrees."""

    i0: np.ndarray
    i45: np.ndarray
    i90: np.ndarray
    i135: np.ndarray

    def __post_init__(self):
        self.i0 = np.asarray(self.i0, dtype=np.float64)
        self.i45 = np.asarray(self.i45, dtype=np.float64)
        self.i90 = np.asarray(self.i90, dtype=np.float64)
        self.i135 = np.asarray(self.i135, dtype=np.float64)
        _same_shape(i0=self.i0, i45=self.i45, i90=self.i90, i135=self.i135)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.i0.shape

    def as_list(self) -> list[np.ndarray]:
        return [self.i0, self.i45, self.i90, self.i135]

    @classmethod
    def from_list(cls, images) -> PolarizationStack:
        i0, i45, i90, i135 = images
        return cls(i0, i45, i90, i135)


@dataclass
class EncodedPolarMap:
    """Diffusion target: (cos 2phi, sin 2phi, 2P - 1)."""

    c: np.ndarray
    s: np.ndarray
    p_norm: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64)
        self.s = np.asarray(self.s, dtype=np.float64)
        self.p_norm = np.asarray(self.p_norm, dtype=np.float64)
        _same_shape(c=self.c, s=self.s, p_norm=self.p_norm)

    def to_array(self) -> np.ndarray:
        """Stack into a channel-first (3, ...) array."""
        return np.stack([self.c, self.s, self.p_norm])

    @classmethod
    def from_array(cls, arr) -> EncodedPolarMap:
        arr = np.asarray(arr)
        if arr.shape[0] != 3:
            raise ShapeError(f"expected 3 leading channels, got {arr.shape}")
        return cls(arr[0], arr[1], arr[2])


def wrap_aolp(phi):
    """Map an angle (radians) onto its representative modulo pi in (-pi/2, pi/2]."""
    phi = np.asarray(phi, dtype=np.float64)
    if not np.all(np.isfinite(phi)):
        raise PreconditionError("AoLP must be finite")
    n = np.ceil((phi - HALF_PI) / np.pi)
    # for |n| == 1 the subtraction is exact (Sterbenz), so phi+pi wraps back to phi
    out = np.where(n == 0, phi, phi - n * np.pi)
    out = np.where(out <= -HALF_PI, out + np.pi, out)
    out = np.where(out > HALF_PI, out - np.pi, out)
    return out if out.ndim else float(out)


def to_grayscale(img, weights=LUMA_WEIGHTS) -> np.ndarray:
    """Reduce an (H, W, 3) image to (H, W) with luma weights; 2-D input passes through."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3 and img.shape[-1] == 3:
        w = np.asarray(weights, dtype=np.float64)
        return img[..., 0] * w[0] + img[..., 1] * w[1] + img[..., 2] * w[2]
    if img.ndim == 3 and img.shape[-1] == 1:
        return img[..., 0]
    return img


def _double_angle_trig(theta: float) -> tuple[float, float]:
    # exact values on the 45-degree lattice keep the synthesized stack redundancy-exact
    quarter = 2.0 * theta / HALF_PI
    k = round(quarter)
    if abs(quarter - k) < 1e-12:
        return ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[k % 4]
    return float(np.cos(2.0 * theta)), float(np.sin(2.0 * theta))


def malus_intensity(state: PolarStateMap, theta: float) -> np.ndarray:
    """Intensity seen through an ideal linear analyzer at angle ``theta``.

    I = s0/2 * (1 + P cos(2 theta - 2 phi)); invalid pixels are treated as
    unpolarized.
    """
    if not np.isfinite(theta):
        raise PreconditionError("analyzer angle must be finite")
    _same_shape(s0=state.s0, dolp=state.dolp, aolp=state.aolp, valid=state.valid)
    ct, st = _double_angle_trig(theta)
    p = np.where(state.valid, state.dolp, 0.0)
    phi = np.where(state.valid, state.aolp, 0.0)
    half = 0.5 * state.s0
    # cos(2t - 2phi) expanded so that analyzer pairs 90 degrees apart cancel exactly
    cos_term = np.cos(2.0 * phi) * ct + np.sin(2.0 * phi) * st
    out = half + half * p * cos_term
    return np.maximum(out, 0.0)


def synthesize_stack(state: PolarStateMap) -> PolarizationStack:
    return PolarizationStack.from_list(
        [malus_intensity(state, np.deg2rad(a)) for a in STACK_ANGLES_DEG]
    )


def _check_stack(stack: PolarizationStack) -> None:
    _same_shape(i0=stack.i0, i45=stack.i45, i90=stack.i90, i135=stack.i135)
    for img in stack.as_list():
        if not np.all(np.isfinite(img)):
            raise PreconditionError("stack contains non-finite values")
        if np.any(img < 0):
            raise PreconditionError("stack contains negative intensities")


def unpolarized_intensity(stack: PolarizationStack) -> np.ndarray:
    _check_stack(stack)
    return (stack.i0 + stack.i45 + stack.i90 + stack.i135) / 2.0


def decompose_stack(stack: PolarizationStack) -> PolarStateMap:
    """Recover s0, DoLP and AoLP from a four-angle stack."""
    _check_stack(stack)
    s0 = unpolarized_intensity(stack)
    s1 = stack.i0 - stack.i90
    s2 = stack.i45 - stack.i135
    mag = np.hypot(s1, s2)
    valid = (mag >= EPS_POL * _POL_SLACK * s0) & (s0 >= EPS_DARK)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(s0 > 0, mag / np.where(s0 > 0, s0, 1.0), 0.0)
    p = np.clip(p, 0.0, 1.0)
    phi = np.where(valid, wrap_aolp(0.5 * np.arctan2(s2, s1)), 0.0)
    return PolarStateMap(s0, p, phi, valid)


def consistency_residual(stack: PolarizationStack) -> float:
    """Largest relative violation of i0 + i90 == i45 + i135 over the image."""
    _check_stack(stack)
    s0 = unpolarized_intensity(stack)
    diff = np.abs((stack.i0 + stack.i90) - (stack.i45 + stack.i135))
    return float(np.max(diff / np.maximum(s0, EPS_DARK)))


def encode(state: PolarStateMap) -> EncodedPolarMap:
    phi = np.where(state.valid, wrap_aolp(state.aolp), 0.0)
    c = np.where(state.valid, np.cos(2.0 * phi), 1.0)
    s = np.where(state.valid, np.sin(2.0 * phi), 0.0)
    p_norm = np.where(state.valid, 2.0 * state.dolp - 1.0, -1.0)
    return EncodedPolarMap(c, s, p_norm)


def decode(enc: EncodedPolarMap, s0) -> PolarStateMap:
    """Invert :func:`encode`; (c, s) need not lie on the unit circle."""
    s0 = np.asarray(s0, dtype=np.float64)
    _same_shape(c=enc.c, s0=s0)
    valid = np.hypot(enc.c, enc.s) >= EPS_ENC
    phi = np.where(valid, wrap_aolp(0.5 * np.arctan2(enc.s, enc.c)), 0.0)
    p = np.clip((enc.p_norm + 1.0) / 2.0, 0.0, 1.0)
    return PolarStateMap(s0, p, phi, valid)
