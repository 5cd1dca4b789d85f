"""Noise schedule, forward corruption, and ancestral sampling around an x0-predictor.

The forward chain q(x_t | x_{t-1}) = N(sqrt(a_t) x_{t-1}, (1 - a_t) I) collapses to
x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps with abar_t the running product of the
decay coefficients. The reverse chain steps through the posterior of q given a
predicted clean sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from .errors import InvalidConfig, InvalidStep, ShapeMismatch
from .motion import FRAME_DIM, GroupMotion

SCHEDULE_KINDS = ("linear", "cosine")


def make_rng(seed) -> torch.Generator:
    """Seeded CPU generator; all sampling randomness flows through one of these."""
    if isinstance(seed, torch.Generator):
        return seed
    g = torch.Generator(device="cpu")
    g.manual_seed(int(seed))
    return g


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step decay coefficients alpha and their cumulative products alpha_bar."""

    alpha: torch.Tensor      # (T,) in (0, 1)
    alpha_bar: torch.Tensor  # (T,) strictly decreasing, in (0, 1)

    def __post_init__(self):
        if self.alpha.dim() != 1 or self.alpha.shape != self.alpha_bar.shape:
            raise InvalidConfig("alpha and alpha_bar must be matching 1-D tensors")
        if (self.alpha <= 0).any() or (self.alpha >= 1).any():
            raise InvalidConfig("alpha values must lie in (0, 1)")
        if (self.alpha_bar <= 0).any() or (self.alpha_bar >= 1).any():
            raise InvalidConfig("alpha_bar values must lie in (0, 1)")
        if (self.alpha_bar[1:] >= self.alpha_bar[:-1]).any():
            raise InvalidConfig("alpha_bar must be strictly decreasing")

    @property
    def steps(self) -> int:
        return self.alpha.shape[0]


def make_schedule(steps: int, kind: str = "cosine") -> NoiseSchedule:
    """Build a noise schedule. Deterministic for fixed (steps, kind).

    "linear": betas linearly spaced and rescaled so short schedules still reach
    high noise. "cosine": the squared-cosine abar profile, betas clipped at 0.999.
    """
    if steps < 1:
        raise InvalidConfig("schedule needs at least one step")
    if kind == "linear":
        scale = 1000.0 / steps
        beta = torch.linspace(1e-4 * scale, 0.02 * scale, steps, dtype=torch.float64)
        beta = beta.clamp(1e-8, 0.999)
    elif kind == "cosine":
        s = 0.008
        grid = torch.arange(steps + 1, dtype=torch.float64) / steps
        f = torch.cos((grid + s) / (1 + s) * math.pi / 2) ** 2
        abar = f / f[0]
        beta = (1 - abar[1:] / abar[:-1]).clamp(1e-8, 0.999)
    else:
        raise InvalidConfig(f"unknown schedule kind {kind!r}")
    alpha = 1.0 - beta
    return NoiseSchedule(alpha=alpha, alpha_bar=torch.cumprod(alpha, dim=0))


def _gather(values: torch.Tensor, t, like: torch.Tensor) -> torch.Tensor:
    """Pick per-element schedule values for scalar or (B,) step indices."""
    if torch.is_tensor(t) and t.dim() > 0:
        picked = values[t]
        return picked.view(-1, *([1] * (like.dim() - 1)))
    return values[int(t)]


def q_sample(x0: torch.Tensor, t, noise: torch.Tensor, sched: NoiseSchedule) -> torch.Tensor:
    """Corrupt x0 to step t: sqrt(abar_t) x0 + sqrt(1 - abar_t) noise."""
    if x0.shape != noise.shape:
        raise ShapeMismatch(f"x0 {tuple(x0.shape)} vs noise {tuple(noise.shape)}")
    abar = _gather(sched.alpha_bar, t, x0)
    return torch.sqrt(abar) * x0 + torch.sqrt(1.0 - abar) * noise


def p_step(x_t: torch.Tensor, x0_hat: torch.Tensor, t: int, noise: torch.Tensor,
           sched: NoiseSchedule) -> torch.Tensor:
    """One reverse step: posterior mean of q(x_{t-1} | x_t, x0_hat) plus scaled noise.

    At t == 1 the noise term is dropped so the final transition is deterministic.
    """
    t = int(t)
    if t < 1:
        raise InvalidStep("reverse step requires t >= 1")
    if t >= sched.steps:
        raise InvalidStep(f"t={t} outside schedule with {sched.steps} steps")
    if x_t.shape != x0_hat.shape or x_t.shape != noise.shape:
        raise ShapeMismatch("x_t, x0_hat, and noise must share a shape")
    alpha_t = sched.alpha[t]
    abar_t = sched.alpha_bar[t]
    abar_prev = sched.alpha_bar[t - 1]
    coef_x0 = torch.sqrt(abar_prev) * (1 - alpha_t) / (1 - abar_t)
    coef_xt = torch.sqrt(alpha_t) * (1 - abar_prev) / (1 - abar_t)
    mean = coef_x0 * x0_hat + coef_xt * x_t
    if t == 1:
        return mean
    var = (1 - alpha_t) * (1 - abar_prev) / (1 - abar_t)
    return mean + torch.sqrt(var) * noise


def sample_chain(denoiser, shape, music, swap, sched: NoiseSchedule, rng,
                 init_noise: torch.Tensor = None) -> torch.Tensor:
    """Run the full reverse chain and return the final clean-motion estimate.

    The chain starts from standard Gaussian noise (or `init_noise` if provided),
    repeatedly substitutes the denoiser's x0 prediction into the posterior step
    for t = T-1 .. 1, and returns the prediction at t = 0.
    """
    rng = make_rng(rng)
    x = init_noise if init_noise is not None else \
        torch.randn(shape, dtype=torch.float64, generator=rng)
    if x.shape != tuple(shape):
        raise ShapeMismatch(f"init noise {tuple(x.shape)} does not match {tuple(shape)}")
    for t in range(sched.steps - 1, 0, -1):
        x0_hat = denoiser(x, t, music, swap)
        step_noise = torch.randn(x.shape, dtype=torch.float64, generator=rng)
        x = p_step(x, x0_hat, t, step_noise, sched)
    return denoiser(x, 0, music, swap)


def sample_loop(denoiser, shape, music, swap, sched: NoiseSchedule, seed) -> GroupMotion:
    """Seeded single-window generation; deterministic for a fixed seed."""
    if len(shape) == 2:
        shape = (*shape, FRAME_DIM)
    if shape[-1] != FRAME_DIM:
        raise ShapeMismatch(f"motion shape must end in {FRAME_DIM}, got {shape}")
    x0 = sample_chain(denoiser, tuple(shape), music, swap, sched, make_rng(seed))
    return GroupMotion.from_prediction(x0)
