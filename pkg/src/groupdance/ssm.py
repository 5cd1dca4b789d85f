"""Diagonal state-space sequence layer with zero-order-hold discretization.

Each feature channel carries an independent scalar state: the continuous system
h' = a h + b u, y = c h is discretized per step as abar = exp(delta * a) and
bbar = (exp(delta * a) - 1) / (delta * a) * delta * b, then scanned causally.
With input-independent delta the same system is a causal convolution with the
structured kernel (c bbar, c abar bbar, ..., c abar^(L-1) bbar).
"""
from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import NumericalDegeneracy, ShapeMismatch

_SERIES_CUTOFF = 1e-6


def _zoh_discretize(a: torch.Tensor, b: torch.Tensor, deltas: torch.Tensor):
    """Per-step (abar, bbar) for diagonal dynamics; broadcast over leading dims.

    Near delta*a == 0 the exact coefficient (exp(x)-1)/x is replaced by its
    two-term series 1 + x/2 to avoid the singular division.
    """
    x = deltas * a
    if not torch.isfinite(x).all():
        raise NumericalDegeneracy("non-finite delta * a in ZOH discretization")
    abar = torch.exp(x)
    small = x.abs() < _SERIES_CUTOFF
    x_safe = torch.where(small, torch.ones_like(x), x)
    ratio = torch.where(small, 1.0 + x / 2.0, (abar - 1.0) / x_safe)
    bbar = ratio * deltas * b
    return abar, bbar


def ssm_scan(u: torch.Tensor, a: torch.Tensor, b: torch.Tensor, c: torch.Tensor,
             deltas: torch.Tensor) -> torch.Tensor:
    """Causal recurrence over (..., L, d) inputs with per-step step sizes.

    h_0 = bbar_0 u_0; h_l = abar_l h_{l-1} + bbar_l u_l; y_l = c h_l.
    """
    if u.shape != deltas.shape:
        raise ShapeMismatch(f"u {tuple(u.shape)} vs deltas {tuple(deltas.shape)}")
    if (deltas <= 0).any():
        raise NumericalDegeneracy("step sizes must be positive")
    abar, bbar = _zoh_discretize(a, b, deltas)
    L = u.shape[-2]
    h = bbar[..., 0, :] * u[..., 0, :]
    ys = [c * h]
    for l in range(1, L):
        h = abar[..., l, :] * h + bbar[..., l, :] * u[..., l, :]
        ys.append(c * h)
    return torch.stack(ys, dim=-2)


def ssm_kernel(a: torch.Tensor, b: torch.Tensor, c: torch.Tensor,
               delta: torch.Tensor, length: int) -> torch.Tensor:
    """Structured kernel (length, d): k_l = c * abar^l * bbar for fixed delta."""
    abar, bbar = _zoh_discretize(a, b, delta)
    powers = abar.unsqueeze(0) ** torch.arange(length, dtype=torch.float64).unsqueeze(-1)
    return c * powers * bbar


def ssm_kernel_conv(u: torch.Tensor, a: torch.Tensor, b: torch.Tensor,
                    c: torch.Tensor, delta: torch.Tensor) -> torch.Tensor:
    """Causal convolution y_l = sum_{k<=l} kernel_k u_{l-k}; fixed-delta test mode."""
    L = u.shape[-2]
    kernel = ssm_kernel(a, b, c, delta, L)
    y = torch.zeros_like(u)
    for k in range(L):
        y[..., k:, :] += kernel[k] * u[..., :L - k, :]
    return y


class SelectiveSSM(nn.Module):
    """Channel-wise SSM whose step size is an input-dependent softplus projection."""

    def __init__(self, width: int):
        super().__init__()
        self.log_a = nn.Parameter(torch.zeros(width, dtype=torch.float64))
        self.b = nn.Parameter(torch.zeros(width, dtype=torch.float64))
        self.c = nn.Parameter(torch.zeros(width, dtype=torch.float64))
        self.delta_proj = nn.Linear(width, width, dtype=torch.float64)

    @property
    def a(self) -> torch.Tensor:
        # Negative continuous-time dynamics keep the recurrence stable.
        return -torch.exp(self.log_a)

    def step_sizes(self, x: torch.Tensor) -> torch.Tensor:
        return F.softplus(self.delta_proj(x)) + 1e-4

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return ssm_scan(x, self.a, self.b, self.c, self.step_sizes(x))
