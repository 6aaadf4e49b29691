"""Epsilon-prediction training and ancestral sampling."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from ..errors import NumericalError, PreconditionError, ShapeError
from .data import OraclePatches, TargetRepresentation, build_arrays
from .model import Architecture, ConditionalNoisePredictor, build_model
from .schedule import NoiseSchedule, forward_diffuse, make_schedule

log = logging.getLogger(__name__)


@dataclass
class TrainingConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.001
    steps: int = 3000
    seed: int = 0
    patch_size: int = 16
    T: int = 200
    beta_start: float = 1e-4
    beta_end: float = 0.1
    widths: tuple[int, ...] = (16, 32, 32)
    time_dim: int = 32

    def __post_init__(self):
        self.widths = tuple(self.widths)
        if self.learning_rate < 0:
            raise PreconditionError("learning_rate must be non-negative")
        if self.batch_size < 1:
            raise PreconditionError("batch_size must be at least 1")
        if self.patch_size % 2:
            raise PreconditionError("patch_size must be even")
        if self.steps < 1:
            raise PreconditionError("steps must be at least 1")

    def schedule(self) -> NoiseSchedule:
        return make_schedule(self.T, self.beta_start, self.beta_end)

    def architecture(self, rep: TargetRepresentation) -> Architecture:
        return Architecture(
            target_channels=TargetRepresentation(rep).channels,
            cond_channels=1,
            widths=self.widths,
            time_dim=self.time_dim,
        )

    def as_dict(self) -> dict:
        d = asdict(self)
        d["widths"] = "x".join(str(w) for w in self.widths)
        return d


@dataclass
class TrainResult:
    model: ConditionalNoisePredictor
    representation: TargetRepresentation
    config: TrainingConfig
    losses: list[float] = field(default_factory=list)


def training_loss(
    model: ConditionalNoisePredictor,
    schedule: NoiseSchedule,
    cond: torch.Tensor,
    z0: torch.Tensor,
    t: torch.Tensor,
    noise: torch.Tensor,
) -> torch.Tensor:
    """Mean squared error between the injected noise and the model's estimate of it."""
    if z0.shape != noise.shape:
        raise ShapeError(f"noise {tuple(noise.shape)} vs target {tuple(z0.shape)}")
    if cond.shape[0] != z0.shape[0] or cond.shape[-2:] != z0.shape[-2:]:
        raise ShapeError(f"condition {tuple(cond.shape)} vs target {tuple(z0.shape)}")
    zt = forward_diffuse(z0, t, noise, schedule)
    return torch.mean((noise - model(zt, t, cond)) ** 2)


def _as_arrays(dataset, rep):
    if isinstance(dataset, OraclePatches):
        return build_arrays(dataset, rep)
    conds, targets = dataset
    return np.asarray(conds, dtype=np.float32), np.asarray(targets, dtype=np.float32)


def train(dataset, config: TrainingConfig, representation: TargetRepresentation) -> TrainResult:
    """Train a fresh model; fully determined by ``config.seed``.

    ``dataset`` is either :class:`OraclePatches` or a ``(conditions, targets)``
    pair of (N, C, H, W) arrays already in the representation's layout.
    """
    rep = TargetRepresentation(representation)
    conds, targets = _as_arrays(dataset, rep)
    if len(conds) == 0:
        raise PreconditionError("empty dataset")
    if targets.shape[1] != rep.channels:
        raise ShapeError(f"targets have {targets.shape[1]} channels, {rep.value} needs {rep.channels}")
    schedule = config.schedule()
    model = build_model(config.architecture(rep), seed=config.seed)
    opt = torch.optim.AdamW(
        model.parameters(),
        lr=config.learning_rate,
        betas=(config.beta1, config.beta2),
        weight_decay=config.weight_decay,
    )
    gen = torch.Generator().manual_seed(config.seed)
    conds_t = torch.from_numpy(conds)
    targets_t = torch.from_numpy(targets)
    n = len(conds_t)
    result = TrainResult(model, rep, config)
    model.train()
    for step in range(config.steps):
        idx = torch.randint(0, n, (config.batch_size,), generator=gen)
        z0 = targets_t[idx]
        t = torch.randint(1, schedule.T + 1, (config.batch_size,), generator=gen)
        noise = torch.randn(z0.shape, generator=gen)
        loss = training_loss(model, schedule, conds_t[idx], z0, t, noise)
        value = loss.item()
        if not math.isfinite(value):
            raise NumericalError(f"non-finite loss {value} at step {step}")
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()
        result.losses.append(value)
        if step % 500 == 0:
            log.info("%s step %d loss %.4f", rep.value, step, value)
    model.eval()
    return result


@torch.no_grad()
def sample(
    model: ConditionalNoisePredictor,
    cond,
    schedule: NoiseSchedule,
    seed: int = 0,
) -> np.ndarray:
    """Ancestral DDPM sampling from z_T ~ N(0, I) down to z_0, clamped to [-1, 1].

    ``cond`` is (N, 1, H, W) or (1, H, W); returns (N, C, H, W) (or (C, H, W)).
    """
    cond = torch.as_tensor(np.asarray(cond), dtype=next(model.parameters()).dtype)
    single = cond.dim() == 3
    if single:
        cond = cond[None]
    model.check_size(*cond.shape[-2:])
    gen = torch.Generator().manual_seed(seed)
    shape = (cond.shape[0], model.arch.target_channels, *cond.shape[-2:])
    z = torch.randn(shape, generator=gen, dtype=cond.dtype)
    beta = schedule.beta
    alpha = schedule.alpha
    alpha_bar = schedule.alpha_bar
    feats = model.encoder(cond)
    for t in range(schedule.T, 0, -1):
        tt = torch.full((shape[0],), t, dtype=torch.long)
        eps = model.denoiser(z, tt, feats)
        coef = beta[t - 1] / math.sqrt(1.0 - alpha_bar[t - 1])
        z = (z - coef * eps) / math.sqrt(alpha[t - 1])
        if t > 1:
            z = z + math.sqrt(beta[t - 1]) * torch.randn(shape, generator=gen, dtype=cond.dtype)
    out = z.clamp(-1.0, 1.0).numpy().astype(np.float64)
    return out[0] if single else out
