"""Small image-conditioned U-Net noise predictor.

The condition path is two cascaded modules: a conv/SiLU feature extractor over
the grayscale condition patch, followed by an encoder with the same level
structure as the denoiser's encoder. Its per-level features are added into the
denoiser's middle and decoder stages.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
from torch import nn
from torch.nn import functional as F

from ..errors import ShapeError


@dataclass(frozen=True)
class Architecture:
    target_channels: int = 3
    cond_channels: int = 1
    widths: tuple[int, ...] = (16, 32, 32)
    time_dim: int = 32

    def to_dict(self) -> dict:
        d = asdict(self)
        d["widths"] = list(self.widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Architecture:
        d = dict(d)
        d["widths"] = tuple(d["widths"])
        return cls(**d)


def timestep_embedding(t: torch.Tensor, dim: int, dtype=torch.float32) -> torch.Tensor:
    """Sinusoidal embedding of 1-based integer timesteps, shape (B, dim)."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=dtype) / half)
    args = t.to(dtype)[:, None] * freqs[None, :]
    return torch.cat([torch.cos(args), torch.sin(args)], dim=1)


def conv3(cin: int, cout: int) -> nn.Conv2d:
    return nn.Conv2d(cin, cout, 3, padding=1)


class Block(nn.Module):
    """conv -> +time bias -> SiLU -> conv -> SiLU."""

    def __init__(self, cin: int, cout: int, emb_dim: int):
        super().__init__()
        self.conv1 = conv3(cin, cout)
        self.conv2 = conv3(cout, cout)
        self.emb = nn.Linear(emb_dim, cout)

    def forward(self, x, emb):
        h = F.silu(self.conv1(x) + self.emb(emb)[:, :, None, None])
        return F.silu(self.conv2(h))


class ConditionEncoder(nn.Module):
    def __init__(self, arch: Architecture):
        super().__init__()
        w = arch.widths
        self.extract = nn.Sequential(
            conv3(arch.cond_channels, w[0]), nn.SiLU(), conv3(w[0], w[0]), nn.SiLU()
        )
        self.levels = nn.ModuleList()
        for i, wi in enumerate(w):
            cin = w[0] if i == 0 else w[i - 1]
            self.levels.append(nn.Sequential(conv3(cin, wi), nn.SiLU(), conv3(wi, wi), nn.SiLU()))
        self.fuse = nn.ModuleList(nn.Conv2d(wi, wi, 1) for wi in w)

    def forward(self, cond: torch.Tensor) -> list[torch.Tensor]:
        h = self.extract(cond)
        feats = []
        for i, (level, fuse) in enumerate(zip(self.levels, self.fuse)):
            if i > 0:
                h = F.avg_pool2d(h, 2)
            h = level(h)
            feats.append(fuse(h))
        return feats


class Denoiser(nn.Module):
    def __init__(self, arch: Architecture):
        super().__init__()
        w = arch.widths
        emb = 2 * arch.time_dim
        self.time_dim = arch.time_dim
        self.time_mlp = nn.Sequential(nn.Linear(arch.time_dim, emb), nn.SiLU(), nn.Linear(emb, emb))
        self.inp = conv3(arch.target_channels, w[0])
        self.down = nn.ModuleList(
            Block(w[0] if i == 0 else w[i - 1], wi, emb) for i, wi in enumerate(w)
        )
        self.mid = Block(w[-1], w[-1], emb)
        self.up = nn.ModuleList(Block(w[i + 1] + w[i], w[i], emb) for i in range(len(w) - 1))
        self.out = conv3(w[0], arch.target_channels)
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)

    def forward(self, z, t, cond_feats):
        emb = self.time_mlp(timestep_embedding(t, self.time_dim, z.dtype))
        h = self.inp(z)
        skips = []
        for i, block in enumerate(self.down):
            if i > 0:
                h = F.avg_pool2d(h, 2)
            h = block(h, emb)
            skips.append(h)
        h = self.mid(h, emb) + cond_feats[-1]
        for i in reversed(range(len(self.up))):
            h = F.interpolate(h, scale_factor=2, mode="nearest")
            h = self.up[i](torch.cat([h, skips[i]], dim=1), emb) + cond_feats[i]
        return self.out(h)


class ConditionalNoisePredictor(nn.Module):
    """eps_theta(z_t, t, E_img(condition))."""

    def __init__(self, arch: Architecture):
        super().__init__()
        self.arch = arch
        self.encoder = ConditionEncoder(arch)
        self.denoiser = Denoiser(arch)

    def check_size(self, height: int, width: int) -> None:
        factor = 2 ** (len(self.arch.widths) - 1)
        if height % factor or width % factor:
            raise ShapeError(f"spatial size {height}x{width} must be divisible by {factor}")

    def forward(self, z: torch.Tensor, t: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        if z.shape[-2:] != cond.shape[-2:]:
            raise ShapeError(f"target {tuple(z.shape)} and condition {tuple(cond.shape)} differ spatially")
        self.check_size(*z.shape[-2:])
        return self.denoiser(z, t, self.encoder(cond))


def build_model(arch: Architecture, seed: int = 0, dtype=torch.float32) -> ConditionalNoisePredictor:
    """Deterministically initialized predictor (zero output head)."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = ConditionalNoisePredictor(arch)
    return model.to(dtype)
