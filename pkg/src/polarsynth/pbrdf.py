"""Closed-form Fresnel polarization renderer and diffuse shape-from-polarization inverter.

Viewing is orthographic along +z. Image coordinates are x = column offset and
y = row offset from the shape centre, so a normal's azimuth is measured in the
same frame as the AoLP of the rendered maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, ShapeError
from .stokes import EPS_POL, PolarStateMap, wrap_aolp

MAX_ZENITH = np.deg2rad(89.9)


@dataclass
class NormalMap:
    normals: np.ndarray  # (H, W, 3), unit length on mask
    mask: np.ndarray  # (H, W) bool

    def __post_init__(self):
        self.normals = np.asarray(self.normals, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.normals.shape[:2] != self.mask.shape or self.normals.shape[-1] != 3:
            raise ShapeError(f"normals {self.normals.shape} vs mask {self.mask.shape}")

    def zenith(self) -> np.ndarray:
        return np.arccos(np.clip(self.normals[..., 2], -1.0, 1.0))

    def azimuth(self) -> np.ndarray:
        return np.arctan2(self.normals[..., 1], self.normals[..., 0])


@dataclass(frozen=True)
class Material:
    eta: float = 1.5
    mode: str = "diffuse"
    albedo: float = 0.8

    def __post_init__(self):
        if not 1.0 < self.eta <= 3.0:
            raise PreconditionError(f"refractive index must lie in (1, 3], got {self.eta}")
        if self.mode not in ("diffuse", "specular"):
            raise PreconditionError(f"unknown reflection mode {self.mode!r}")
        if not 0.0 <= self.albedo <= 1.0:
            raise PreconditionError("albedo must lie in [0, 1]")


@dataclass(frozen=True)
class SceneLight:
    direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    ambient: float = 0.0

    def __post_init__(self):
        if abs(np.linalg.norm(self.direction) - 1.0) > 1e-6:
            raise PreconditionError("light direction must be a unit vector")
        if not 0.0 <= self.ambient <= 1.0:
            raise PreconditionError("ambient must lie in [0, 1]")


def _check_zenith(theta, eta):
    theta = np.asarray(theta, dtype=np.float64)
    if eta <= 1.0:
        raise PreconditionError(f"refractive index must exceed 1, got {eta}")
    if np.any(theta < 0) or np.any(theta >= 0.5 * np.pi) or not np.all(np.isfinite(theta)):
        raise PreconditionError("zenith angle must lie in [0, pi/2)")
    return theta


def rho_diffuse(theta, eta: float):
    """DoLP of diffusely reflected light at zenith ``theta`` for refractive index ``eta``."""
    theta = _check_zenith(theta, eta)
    s2 = np.sin(theta) ** 2
    num = (eta - 1.0 / eta) ** 2 * s2
    den = 2.0 + 2.0 * eta**2 - (eta + 1.0 / eta) ** 2 * s2 + 4.0 * np.cos(theta) * np.sqrt(eta**2 - s2)
    out = num / den
    return out if out.ndim else float(out)


def rho_specular(theta, eta: float):
    """DoLP of specularly reflected light at zenith ``theta``."""
    theta = _check_zenith(theta, eta)
    s2 = np.sin(theta) ** 2
    num = 2.0 * s2 * np.cos(theta) * np.sqrt(eta**2 - s2)
    den = eta**2 - s2 - eta**2 * s2 + 2.0 * s2**2
    out = num / den
    return out if out.ndim else float(out)


def make_sphere(resolution: int, radius_fraction: float = 0.9, center=None) -> NormalMap:
    """Orthographic sphere normals filling ``radius_fraction`` of the half-width.

    ``center`` is (row, col) in pixels; defaults to the image centre.
    """
    if resolution < 16:
        raise PreconditionError("sphere resolution must be at least 16")
    if not 0.0 < radius_fraction <= 1.0:
        raise PreconditionError("radius_fraction must lie in (0, 1]")
    r = radius_fraction * resolution / 2.0
    if center is None:
        cy = cx = (resolution - 1) / 2.0
    else:
        cy, cx = center
    rows, cols = np.mgrid[0:resolution, 0:resolution].astype(np.float64)
    x = (cols - cx) / r
    y = (rows - cy) / r
    rr = x * x + y * y
    mask = rr < 1.0
    z = np.sqrt(np.clip(1.0 - rr, 0.0, None))
    normals = np.stack([x, y, z], axis=-1)
    normals[~mask] = (0.0, 0.0, 1.0)
    # renormalize to kill rounding drift
    normals /= np.linalg.norm(normals, axis=-1, keepdims=True)
    return NormalMap(normals, mask)


def render_polar(normals: NormalMap, material: Material, light: SceneLight) -> PolarStateMap:
    n = normals.normals
    zen = np.arccos(np.clip(n[..., 2], -1.0, 1.0))
    az = np.arctan2(n[..., 1], n[..., 0])
    ok = normals.mask & (zen < 0.5 * np.pi) & (n[..., 2] > 0)
    zen_safe = np.where(ok, zen, 0.0)
    if material.mode == "diffuse":
        p = rho_diffuse(zen_safe, material.eta)
        phi = wrap_aolp(az)
    else:
        p = rho_specular(zen_safe, material.eta)
        phi = wrap_aolp(az + 0.5 * np.pi)
    p = np.where(ok, np.clip(p, 0.0, 1.0), 0.0)
    shade = np.maximum(0.0, n @ np.asarray(light.direction, dtype=np.float64))
    s0 = np.where(normals.mask, material.albedo * shade + light.ambient, 0.0)
    valid = ok & (p >= EPS_POL)
    return PolarStateMap(s0, p, np.where(valid, phi, 0.0), valid)


def _mask_centroid(mask: np.ndarray) -> tuple[float, float]:
    rows, cols = np.nonzero(mask)
    return float(rows.mean()), float(cols.mean())


def invert_diffuse(state: PolarStateMap, material: Material, tol: float = 1e-10) -> NormalMap:
    """Recover normals from diffuse DoLP/AoLP.

    The zenith comes from bisection of the monotone diffuse DoLP curve; the
    azimuth pi-ambiguity is resolved by pointing (n_x, n_y) away from the
    centroid of the valid region.
    """
    if material is None or material.eta is None:
        raise PreconditionError("refractive index is required")
    eta = material.eta
    if len(state.shape) != 2:
        raise ShapeError("invert_diffuse expects single-channel maps")
    p = state.dolp
    p_max = rho_diffuse(MAX_ZENITH, eta)
    usable = state.valid & (p > 0) & (p <= p_max)

    lo = np.zeros_like(p)
    hi = np.full_like(p, MAX_ZENITH)
    target = np.where(usable, p, 0.0)
    while np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        above = rho_diffuse(mid, eta) > target
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    zen = 0.5 * (lo + hi)

    normals = np.zeros(p.shape + (3,))
    normals[..., 2] = 1.0
    if not usable.any():
        return NormalMap(normals, usable)
    cy, cx = _mask_centroid(usable)
    rows, cols = np.mgrid[0 : p.shape[0], 0 : p.shape[1]].astype(np.float64)
    az = state.aolp.copy()
    outward = np.cos(az) * (cols - cx) + np.sin(az) * (rows - cy)
    az = np.where(outward < 0, az + np.pi, az)
    sin_z = np.sin(zen)
    normals[..., 0] = np.where(usable, sin_z * np.cos(az), 0.0)
    normals[..., 1] = np.where(usable, sin_z * np.sin(az), 0.0)
    normals[..., 2] = np.where(usable, np.cos(zen), 1.0)
    return NormalMap(normals, usable)


def normal_angular_error(a: NormalMap, b: NormalMap, mask=None) -> np.ndarray:
    """Per-pixel angle (degrees) between two normal maps, restricted to ``mask``."""
    if a.normals.shape != b.normals.shape:
        raise ShapeError("normal maps differ in shape")
    if mask is None:
        mask = a.mask & b.mask
    dot = np.clip(np.sum(a.normals * b.normals, axis=-1), -1.0, 1.0)
    return np.rad2deg(np.arccos(dot))[mask]
