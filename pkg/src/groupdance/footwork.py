"""Footwork refinement conditioned on root velocity.

The adaptor reads full pose frames, conditions every block on the frame-wise
root velocity, and emits full frames; only the contacts/root/lower-body part of
its output survives the final merge, replacing the raw lower body while the raw
upper body passes through untouched.
"""
from __future__ import annotations

import torch
import torch.nn as nn

from .errors import ShapeMismatch
from .motion import (FRAME_DIM, ROOT, GroupMotion, merge_body_parts,
                     root_velocity, split_merge_body)

VELOCITY_DIM = 3


class ConcatSquashLinear(nn.Module):
    """Affine feature map gated and biased by a context vector.

    out = affine_x(x) * sigmoid(affine_gate(ctx)) + affine_bias(ctx)
    """

    def __init__(self, in_width: int, out_width: int, ctx_width: int = VELOCITY_DIM):
        super().__init__()
        self.feature = nn.Linear(in_width, out_width, dtype=torch.float64)
        self.gate = nn.Linear(ctx_width, out_width, dtype=torch.float64)
        self.bias_map = nn.Linear(ctx_width, out_width, dtype=torch.float64)

    def forward(self, x: torch.Tensor, ctx: torch.Tensor) -> torch.Tensor:
        if x.shape[:-1] != ctx.shape[:-1]:
            raise ShapeMismatch(
                f"features {tuple(x.shape)} and context {tuple(ctx.shape)} disagree")
        return self.feature(x) * torch.sigmoid(self.gate(ctx)) + self.bias_map(ctx)


class FootworkAdaptor(nn.Module):
    """Input affine map, a stack of concat-squash blocks, and an output affine map."""

    def __init__(self, blocks: int = 3, hidden: int = 64):
        super().__init__()
        if blocks < 1:
            raise ShapeMismatch("need at least one concat-squash block")
        self.input_proj = nn.Linear(FRAME_DIM, hidden, dtype=torch.float64)
        self.blocks = nn.ModuleList(
            [ConcatSquashLinear(hidden, hidden) for _ in range(blocks)])
        self.output_proj = nn.Linear(hidden, FRAME_DIM, dtype=torch.float64)

    def forward(self, raw: torch.Tensor) -> torch.Tensor:
        """Adapt (..., L, 151) raw motion using its own root velocity as context."""
        if raw.shape[-1] != FRAME_DIM:
            raise ShapeMismatch(f"raw motion must end in {FRAME_DIM} channels")
        vel = root_velocity(raw[..., ROOT])
        h = self.input_proj(raw)
        for block in self.blocks:
            h = block(h, vel)
        return self.output_proj(h)


def adapt_footwork(raw: GroupMotion, adaptor: FootworkAdaptor) -> GroupMotion:
    """Run the adaptor over a group motion, emitting full adapted frames."""
    return GroupMotion.from_prediction(adaptor(raw.data))


def finalize(raw: GroupMotion, adapted: GroupMotion) -> GroupMotion:
    """Merge: upper body from raw, contacts/root/lower body from adapted."""
    return split_merge_body(raw, adapted)


def finalize_tensors(raw: torch.Tensor, adapted: torch.Tensor) -> torch.Tensor:
    """Differentiable tensor-level merge used inside the training loop."""
    return merge_body_parts(raw, adapted)
