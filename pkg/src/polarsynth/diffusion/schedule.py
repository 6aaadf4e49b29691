"""Linear DDPM variance schedule and the closed-form forward process."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..errors import PreconditionError


@dataclass(frozen=True)
class NoiseSchedule:
    """beta_1..beta_T with derived alpha and cumulative alpha_bar (float64).

    Timesteps are 1-based; ``alpha_bar[t - 1]`` belongs to step t.
    """

    beta: np.ndarray

    @property
    def T(self) -> int:
        return len(self.beta)

    @property
    def alpha(self) -> np.ndarray:
        return 1.0 - self.beta

    @property
    def alpha_bar(self) -> np.ndarray:
        return np.cumprod(self.alpha)

    def check(self) -> None:
        b = self.beta
        if not (np.all(np.diff(b) > 0) and 0 < b[0] < b[-1] < 1):
            raise PreconditionError("beta must be strictly increasing inside (0, 1)")
        ab = self.alpha_bar
        if not (np.all(np.diff(ab) < 0) and ab[-1] < 0.01):
            raise PreconditionError(f"alpha_bar_T = {ab[-1]:.4g} must fall below 0.01")


def make_schedule(T: int = 200, beta_start: float = 1e-4, beta_end: float = 0.1) -> NoiseSchedule:
    if T < 10:
        raise PreconditionError("T must be at least 10")
    if not 0 < beta_start < beta_end < 1:
        raise PreconditionError("need 0 < beta_start < beta_end < 1")
    sched = NoiseSchedule(np.linspace(beta_start, beta_end, T, dtype=np.float64))
    sched.check()
    return sched


def _per_sample(values: np.ndarray, t, like: torch.Tensor) -> torch.Tensor:
    t = torch.as_tensor(t, dtype=torch.long)
    v = torch.as_tensor(values, dtype=like.dtype)[t - 1]
    return v.reshape(-1, *([1] * (like.dim() - 1))) if v.dim() else v


def forward_diffuse(z0: torch.Tensor, t, noise: torch.Tensor, schedule: NoiseSchedule) -> torch.Tensor:
    """Sample q(z_t | z_0) = sqrt(alpha_bar_t) z_0 + sqrt(1 - alpha_bar_t) noise.

    ``t`` is an int or a per-sample tensor of 1-based steps.
    """
    t_arr = torch.as_tensor(t)
    if torch.any(t_arr < 1) or torch.any(t_arr > schedule.T):
        raise PreconditionError(f"timestep outside [1, {schedule.T}]")
    if noise.shape != z0.shape:
        raise PreconditionError("noise must match z0 in shape")
    ab = schedule.alpha_bar
    return _per_sample(np.sqrt(ab), t, z0) * z0 + _per_sample(np.sqrt(1.0 - ab), t, z0) * noise
