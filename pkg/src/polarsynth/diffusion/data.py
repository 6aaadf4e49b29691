"""Diffusion targets for the three polarization representations, and oracle training patches."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from ..pbrdf import Material, SceneLight, make_sphere, render_polar
from ..stokes import (
    EncodedPolarMap,
    PolarizationStack,
    PolarStateMap,
    decode,
    decompose_stack,
    encode,
    synthesize_stack,
    wrap_aolp,
)


class TargetRepresentation(str, enum.Enum):
    POLAR_IMAGES4 = "images"
    RAW_AOLP_DOLP = "raw"
    ENCODED_AOLP_DOLP = "encoded"

    @property
    def channels(self) -> int:
        return {"images": 1, "raw": 2, "encoded": 3}[self.value]

    @property
    def grid(self) -> int:
        """Spatial upscale of the target relative to the condition patch."""
        return 2 if self is TargetRepresentation.POLAR_IMAGES4 else 1


def to_target(state: PolarStateMap, rep: TargetRepresentation, peak: float = 1.0) -> np.ndarray:
    """Channel-first target array in [-1, 1] for a single-channel state."""
    rep = TargetRepresentation(rep)
    if rep is TargetRepresentation.ENCODED_AOLP_DOLP:
        return encode(state).to_array()
    if rep is TargetRepresentation.RAW_AOLP_DOLP:
        enc = encode(state)
        phi = np.where(state.valid, wrap_aolp(state.aolp), 0.0)
        return np.stack([phi / (0.5 * np.pi), enc.p_norm])
    st = synthesize_stack(state)
    grid = np.block([[st.i0, st.i45], [st.i90, st.i135]])
    return (2.0 * grid / peak - 1.0)[None]


def condition_input(s0, rep: TargetRepresentation, peak: float = 1.0) -> np.ndarray:
    """Condition patch in [-1, 1], tiled 2x2 when the target is a polarization-image grid."""
    c = 2.0 * np.asarray(s0, dtype=np.float64) / peak - 1.0
    if TargetRepresentation(rep).grid == 2:
        c = np.tile(c, (2, 2))
    return c[None]


def split_grid(grid: np.ndarray) -> PolarizationStack:
    h, w = grid.shape
    if h % 2 or w % 2:
        raise ShapeError("grid must have even dimensions")
    hh, hw = h // 2, w // 2
    return PolarizationStack(grid[:hh, :hw], grid[:hh, hw:], grid[hh:, :hw], grid[hh:, hw:])


def decode_representation(
    tensor, rep: TargetRepresentation, s0=None, peak: float = 1.0
) -> tuple[PolarStateMap, PolarizationStack]:
    """Turn a generated target back into polarization state and a 4-angle stack.

    ``s0`` is the condition intensity; the image-grid representation carries its
    own and ignores it.
    """
    rep = TargetRepresentation(rep)
    tensor = np.asarray(tensor, dtype=np.float64)
    if tensor.ndim != 3 or tensor.shape[0] != rep.channels:
        raise ShapeError(f"{rep.value} expects {rep.channels} channels, got shape {tensor.shape}")
    if rep is TargetRepresentation.POLAR_IMAGES4:
        images = np.clip((tensor[0] + 1.0) / 2.0 * peak, 0.0, None)
        stack = split_grid(images)
        return decompose_stack(stack), stack
    if rep is TargetRepresentation.ENCODED_AOLP_DOLP:
        state = decode(EncodedPolarMap.from_array(tensor), s0)
    else:
        phi = wrap_aolp(np.clip(tensor[0], -1.0, 1.0) * 0.5 * np.pi)
        p = np.clip((tensor[1] + 1.0) / 2.0, 0.0, 1.0)
        state = PolarStateMap(s0, p, phi, np.ones_like(p, dtype=bool))
    return state, synthesize_stack(state)


@dataclass
class OraclePatches:
    """Rendered oracle states, stacked along a leading patch axis."""

    s0: np.ndarray
    dolp: np.ndarray
    aolp: np.ndarray
    valid: np.ndarray
    mask: np.ndarray

    def __len__(self) -> int:
        return len(self.s0)

    def state(self, i: int) -> PolarStateMap:
        return PolarStateMap(self.s0[i], self.dolp[i], self.aolp[i], self.valid[i])

    def subset(self, idx) -> OraclePatches:
        return OraclePatches(self.s0[idx], self.dolp[idx], self.aolp[idx], self.valid[idx], self.mask[idx])


def _random_light(rng: np.random.Generator) -> SceneLight:
    # upper cone of directions, at most 60 degrees off the view axis
    cos_z = rng.uniform(0.5, 1.0)
    az = rng.uniform(-np.pi, np.pi)
    sin_z = np.sqrt(1.0 - cos_z**2)
    d = np.array([sin_z * np.cos(az), sin_z * np.sin(az), cos_z])
    return SceneLight(tuple(d / np.linalg.norm(d)), ambient=rng.uniform(0.05, 0.2))


def oracle_patches(
    n: int,
    patch_size: int = 16,
    seed: int = 0,
    eta_range: tuple[float, float] = (1.3, 1.8),
    modes: tuple[str, ...] = ("diffuse",),
    radius_range: tuple[float, float] = (0.6, 1.0),
    jitter: float = 2.0,
) -> OraclePatches:
    """Render ``n`` sphere patches with randomized index, light, albedo, size and position."""
    rng = np.random.default_rng(seed)
    out = {k: [] for k in ("s0", "dolp", "aolp", "valid", "mask")}
    c = (patch_size - 1) / 2.0
    for _ in range(n):
        center = (c + rng.uniform(-jitter, jitter), c + rng.uniform(-jitter, jitter))
        normals = make_sphere(patch_size, rng.uniform(*radius_range), center=center)
        material = Material(
            eta=rng.uniform(*eta_range), mode=modes[rng.integers(len(modes))], albedo=rng.uniform(0.5, 0.8)
        )
        state = render_polar(normals, material, _random_light(rng))
        out["s0"].append(state.s0)
        out["dolp"].append(state.dolp)
        out["aolp"].append(state.aolp)
        out["valid"].append(state.valid)
        out["mask"].append(normals.mask)
    return OraclePatches(**{k: np.stack(v) for k, v in out.items()})


def build_arrays(patches: OraclePatches, rep: TargetRepresentation, peak: float = 1.0):
    """(conditions, targets) as float32 arrays of shape (N, C, H, W)."""
    conds = np.stack([condition_input(patches.s0[i], rep, peak) for i in range(len(patches))])
    targets = np.stack([to_target(patches.state(i), rep, peak) for i in range(len(patches))])
    return conds.astype(np.float32), targets.astype(np.float32)
