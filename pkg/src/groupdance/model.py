"""Group dance denoiser: positioning offsets, fusion projection, sequence decoder.

The network predicts the clean motion directly from a noisy input, a diffusion
step, a music track, and the swap-mode ordering. Dancers are assumed already
sorted left-to-right; a per-dancer scalar offset (broadcast over frames and
channels) marks each slot, a shared projection mixes all dancers per frame to
sharpen their distinction, and a stack of decoder layers (self-attention,
selective SSM, music cross-attention, feature-wise modulation) refines the
sequence before the output head maps back to pose space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import MUSIC_DIM
from .errors import InvalidConfig, ShapeMismatch
from .motion import FRAME_DIM
from .ssm import SelectiveSSM


@dataclass(frozen=True)
class SwapMode:
    """Left-to-right dancer ordering at the final frame, used as a spatial condition."""

    order: tuple

    def __post_init__(self):
        n = len(self.order)
        if sorted(self.order) != list(range(n)):
            raise InvalidConfig(f"swap order must be a permutation of 0..{n - 1}")

    @classmethod
    def identity(cls, dancers: int) -> "SwapMode":
        return cls(tuple(range(dancers)))


@dataclass(frozen=True)
class ConditionBundle:
    """Embedded conditions: timestep (B, d), per-frame music (B, L, d), swap (B, d)."""

    timestep: torch.Tensor
    music: torch.Tensor
    swap: torch.Tensor

    def film_vector(self) -> torch.Tensor:
        """Concatenated (timestep, pooled music, swap) vector of width 3d."""
        return torch.cat([self.timestep, self.music.mean(dim=1), self.swap], dim=-1)


def timestep_embedding(t: torch.Tensor, width: int) -> torch.Tensor:
    """Sinusoidal embedding (B, width): sin halves first, cos halves second."""
    half = width // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float64) / half)
    args = t.to(torch.float64).unsqueeze(-1) * freqs
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=-1)
    if width % 2:
        emb = torch.cat([emb, torch.zeros_like(emb[..., :1])], dim=-1)
    return emb


def dpe_add(x: torch.Tensor, dpe: torch.Tensor) -> torch.Tensor:
    """Add one scalar offset per dancer, broadcast over frames and channels."""
    if x.dim() < 3 or dpe.dim() != 1 or x.shape[-3] != dpe.shape[0]:
        raise ShapeMismatch(
            f"features {tuple(x.shape)} incompatible with {tuple(dpe.shape)} offsets")
    return x + dpe.view(-1, 1, 1)


def film_modulate(x: torch.Tensor, scale: torch.Tensor, shift: torch.Tensor) -> torch.Tensor:
    """Per-channel affine modulation: scale * x + shift."""
    if scale.shape[-1] != x.shape[-1] or shift.shape[-1] != x.shape[-1]:
        raise ShapeMismatch("scale/shift width must match the feature width")
    return scale * x + shift


class FusionProjection(nn.Module):
    """Mixes all dancers' features per frame through one shared 3-layer stack.

    (B, C, L, d) -> reshape to (B, L, C*d) -> affine/ReLU/affine/ReLU/affine ->
    reshape back. Mapping every dancer jointly lets the stack separate slots that
    carry identical per-dancer features.
    """

    def __init__(self, dancers: int, width: int):
        super().__init__()
        self.dancers = dancers
        self.width = width
        full = dancers * width
        self.lin1 = nn.Linear(full, width, dtype=torch.float64)
        self.lin2 = nn.Linear(width, width, dtype=torch.float64)
        self.lin3 = nn.Linear(width, full, dtype=torch.float64)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, c, l, d = x.shape
        if c != self.dancers or d != self.width:
            raise ShapeMismatch(
                f"fusion trained for C={self.dancers}, d={self.width}; got C={c}, d={d}")
        flat = x.permute(0, 2, 1, 3).reshape(b, l, c * d)
        out = self.lin3(F.relu(self.lin2(F.relu(self.lin1(flat)))))
        return out.reshape(b, l, c, d).permute(0, 2, 1, 3)


class MultiHeadAttention(nn.Module):
    """Plain softmax attention; queries from x, keys/values from x or a context."""

    def __init__(self, width: int, heads: int):
        super().__init__()
        if width % heads:
            raise InvalidConfig(f"width {width} not divisible by {heads} heads")
        self.heads = heads
        self.q = nn.Linear(width, width, dtype=torch.float64)
        self.k = nn.Linear(width, width, dtype=torch.float64)
        self.v = nn.Linear(width, width, dtype=torch.float64)
        self.out = nn.Linear(width, width, dtype=torch.float64)

    def forward(self, x, context=None, need_weights=False):
        context = x if context is None else context
        b, lq, d = x.shape
        lk = context.shape[1]
        h = self.heads
        q = self.q(x).reshape(b, lq, h, d // h).transpose(1, 2)
        k = self.k(context).reshape(b, lk, h, d // h).transpose(1, 2)
        v = self.v(context).reshape(b, lk, h, d // h).transpose(1, 2)
        attn = torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(d // h), dim=-1)
        y = (attn @ v).transpose(1, 2).reshape(b, lq, d)
        y = self.out(y)
        if need_weights:
            return y, attn
        return y


class SequenceDecoderLayer(nn.Module):
    """Self-attention, selective SSM, music cross-attention, then FiLM; each
    sublayer is pre-normalized and wrapped in a residual connection."""

    def __init__(self, width: int, heads: int):
        super().__init__()
        self.norm_attn = nn.LayerNorm(width, dtype=torch.float64)
        self.self_attn = MultiHeadAttention(width, heads)
        self.norm_ssm = nn.LayerNorm(width, dtype=torch.float64)
        self.ssm = SelectiveSSM(width)
        self.norm_cross = nn.LayerNorm(width, dtype=torch.float64)
        self.cross_attn = MultiHeadAttention(width, heads)
        self.norm_film = nn.LayerNorm(width, dtype=torch.float64)
        self.film = nn.Linear(3 * width, 2 * width, dtype=torch.float64)

    def film_scale_shift(self, cond_vec: torch.Tensor):
        scale_delta, shift = self.film(cond_vec).chunk(2, dim=-1)
        return 1.0 + scale_delta, shift

    def forward(self, x: torch.Tensor, music_emb: torch.Tensor,
                cond_vec: torch.Tensor) -> torch.Tensor:
        x = x + self.self_attn(self.norm_attn(x))
        x = x + self.ssm(self.norm_ssm(x))
        x = x + self.cross_attn(self.norm_cross(x), context=music_emb)
        scale, shift = self.film_scale_shift(cond_vec)
        x = x + film_modulate(self.norm_film(x), scale.unsqueeze(1), shift.unsqueeze(1))
        return x


class GroupDanceDenoiser(nn.Module):
    """x0-predicting denoiser over (C, L, 151) group motion.

    Structurally fixed to one dancer count C: both the positioning offsets and
    the fusion projection are sized for it.
    """

    def __init__(self, dancers: int, width: int = 512, layers: int = 8, heads: int = 8):
        super().__init__()
        if dancers < 1 or layers < 1:
            raise InvalidConfig("need at least one dancer and one layer")
        self.dancers = dancers
        self.width = width
        self.input_proj = nn.Linear(FRAME_DIM, width, dtype=torch.float64)
        self.dpe = nn.Parameter(torch.zeros(dancers, dtype=torch.float64))
        self.fusion = FusionProjection(dancers, width)
        self.music_proj = nn.Linear(MUSIC_DIM, width, dtype=torch.float64)
        self.swap_proj = nn.Linear(dancers * dancers, width, dtype=torch.float64)
        self.blocks = nn.ModuleList(
            [SequenceDecoderLayer(width, heads) for _ in range(layers)])
        self.output_proj = nn.Linear(width, FRAME_DIM, dtype=torch.float64)

    def _swap_tensor(self, swap, batch: int) -> torch.Tensor:
        if isinstance(swap, SwapMode):
            order = torch.as_tensor(swap.order, dtype=torch.long).unsqueeze(0)
            order = order.expand(batch, -1)
        else:
            order = torch.as_tensor(swap, dtype=torch.long)
            if order.dim() == 1:
                order = order.unsqueeze(0).expand(batch, -1)
        if order.shape != (batch, self.dancers):
            raise ShapeMismatch(f"swap order must be ({batch}, {self.dancers})")
        onehot = F.one_hot(order, num_classes=self.dancers).to(torch.float64)
        return onehot.reshape(batch, -1)

    def build_conditioning(self, t, music: torch.Tensor, swap, frames: int,
                           batch: int) -> ConditionBundle:
        """Embed (timestep, music, swap order) for an L-frame window."""
        if not torch.is_tensor(t):
            t = torch.full((batch,), int(t), dtype=torch.long)
        if music.dim() == 2:
            music = music.unsqueeze(0).expand(batch, -1, -1)
        if music.shape[1] != frames or music.shape[-1] != MUSIC_DIM:
            raise ShapeMismatch(
                f"music must be (B, {frames}, {MUSIC_DIM}), got {tuple(music.shape)}")
        return ConditionBundle(
            timestep=timestep_embedding(t, self.width),
            music=self.music_proj(music),
            swap=self.swap_proj(self._swap_tensor(swap, batch)),
        )

    def forward(self, x_t: torch.Tensor, t, music, swap) -> torch.Tensor:
        unbatched = x_t.dim() == 3
        if unbatched:
            x_t = x_t.unsqueeze(0)
        b, c, l, f = x_t.shape
        if c != self.dancers or f != FRAME_DIM:
            raise ShapeMismatch(
                f"expected (B, {self.dancers}, L, {FRAME_DIM}), got {tuple(x_t.shape)}")
        music_t = music if torch.is_tensor(music) else music.channels
        cond = self.build_conditioning(t, music_t, swap, l, b)
        h = self.input_proj(x_t)
        h = dpe_add(h, self.dpe)
        h = self.fusion(h)
        flat = h.reshape(b * c, l, self.width)
        music_emb = cond.music.repeat_interleave(c, dim=0)
        cond_vec = cond.film_vector().repeat_interleave(c, dim=0)
        for block in self.blocks:
            flat = block(flat, music_emb, cond_vec)
        out = self.output_proj(flat).reshape(b, c, l, FRAME_DIM)
        return out.squeeze(0) if unbatched else out
