"""Long-sequence generation by autoregressive window extension.

Each window after the first starts from an input built by re-noising the frames
it shares with already-committed output, concatenated with fresh noise for the
new tail. The overlap region of the new window is discarded after sampling so
committed frames are never rewritten; only the tail is appended. The swap-mode
condition for every window is recomputed from the final committed frame so the
spatial conditioning tracks the evolving formation.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch

from .diffusion import NoiseSchedule, make_rng, q_sample, sample_chain
from .errors import InvalidLength, ShapeMismatch
from .model import SwapMode
from .motion import FRAME_DIM, ROOT, GroupMotion, sort_order_by_x


@dataclass(frozen=True)
class WindowPlan:
    """Ordered half-open frame ranges covering [0, total) with a fixed overlap."""

    window_len: int
    hop: int
    segments: tuple

    @property
    def overlap(self) -> int:
        return self.window_len - self.hop

    @property
    def total(self) -> int:
        return self.segments[-1][1]


def plan_windows(total: int, window_len: int = 150, hop: int = 75) -> WindowPlan:
    """Segments [(k*hop, k*hop + window_len)] for k = 0 .. (total - window_len)/hop."""
    if window_len < 1 or hop < 1:
        raise InvalidLength("window_len and hop must be positive")
    if hop > window_len:
        raise InvalidLength("hop larger than the window leaves uncovered frames")
    if total < window_len:
        raise InvalidLength(f"total {total} shorter than one window {window_len}")
    if (total - window_len) % hop != 0:
        raise InvalidLength(
            f"(total - window_len) = {total - window_len} not divisible by hop {hop}")
    count = (total - window_len) // hop + 1
    segments = tuple((k * hop, k * hop + window_len) for k in range(count))
    return WindowPlan(window_len=window_len, hop=hop, segments=segments)


def renoise_segment(x0_segment: torch.Tensor, sched: NoiseSchedule, seed) -> torch.Tensor:
    """Drive a clean segment back to the terminal noise level of the schedule."""
    if x0_segment.shape[-1] != FRAME_DIM:
        raise ShapeMismatch(f"segment must end in {FRAME_DIM} channels")
    rng = make_rng(seed)
    noise = torch.randn(x0_segment.shape, dtype=torch.float64, generator=rng)
    return q_sample(x0_segment, sched.steps - 1, noise, sched)


def extend_sequence(denoiser, total: int, music, swap, sched: NoiseSchedule, seed,
                    window_len: int = 150, hop: int = 75, dancers: int = None,
                    trace: dict = None) -> GroupMotion:
    """Generate `total` frames by stitching overlapping windows; seeded and
    deterministic. `music` must cover all `total` frames."""
    plan = plan_windows(total, window_len, hop)
    music_t = music if torch.is_tensor(music) else music.channels
    if music_t.shape[0] < total:
        raise ShapeMismatch(f"music covers {music_t.shape[0]} frames, need {total}")
    c = dancers if dancers is not None else getattr(denoiser, "dancers")
    rng = make_rng(seed)
    shape = (c, window_len, FRAME_DIM)

    if trace is not None:
        trace["plan"] = plan
        trace["windows"] = []

    kept = None
    for widx, (start, end) in enumerate(plan.segments):
        window_music = music_t[start:end]
        if widx == 0:
            window_swap = swap
            init = torch.randn(shape, dtype=torch.float64, generator=rng)
            prefix_record = None
        else:
            prefix_x0 = kept[:, start:start + plan.overlap]
            prefix_noise = torch.randn(prefix_x0.shape, dtype=torch.float64,
                                       generator=rng)
            prefix_noised = q_sample(prefix_x0, sched.steps - 1, prefix_noise, sched)
            tail = torch.randn((c, hop, FRAME_DIM), dtype=torch.float64, generator=rng)
            init = torch.cat([prefix_noised, tail], dim=1)
            window_swap = SwapMode(sort_order_by_x(kept[:, -1, ROOT.start]))
            prefix_record = (prefix_x0, prefix_noise, prefix_noised)
        out = sample_chain(denoiser, shape, window_music, window_swap, sched, rng,
                           init_noise=init)
        if widx == 0:
            kept = out
        else:
            kept = torch.cat([kept, out[:, plan.overlap:]], dim=1)
        if trace is not None:
            trace["windows"].append({
                "start": start, "end": end, "swap": window_swap,
                "prefix": prefix_record, "output": out,
            })
    return GroupMotion.from_prediction(kept)


def seam_statistics(motion: GroupMotion, plan: WindowPlan) -> dict:
    """Root-displacement summary: the largest jump across window seams versus the
    largest frame-to-frame displacement inside windows."""
    roots = motion.roots
    disp = torch.linalg.vector_norm(roots[:, 1:] - roots[:, :-1], dim=-1)
    seam_frames = {seg[0] + plan.overlap for seg in plan.segments[1:]}
    seam_mask = torch.zeros(disp.shape[1], dtype=torch.bool)
    for f in seam_frames:
        seam_mask[f - 1] = True  # displacement index i covers frames i -> i+1
    max_seam = float(disp[:, seam_mask].max()) if seam_mask.any() else 0.0
    max_within = float(disp[:, ~seam_mask].max()) if (~seam_mask).any() else 0.0
    ratio = max_seam / max_within if max_within > 0 else 0.0
    return {"max_seam_jump": max_seam, "max_within_disp": max_within,
            "seam_ratio": ratio}
