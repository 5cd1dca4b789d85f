"""Training objectives: reconstruction, kinematic, velocity, contact, spacing.

All losses are means over their natural element counts so magnitudes stay
comparable across sequence lengths and dancer counts. The spacing loss keeps the
1/(C-1) pair scaling of its definition and is additionally divided by the frame
count so curriculum lengths do not rescale it.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import torch

from .errors import InvalidConfig, ShapeMismatch
from .motion import (CONTACT_JOINTS, CONTACTS, ROOT, GroupMotion, SkeletonSpec,
                     joint_positions)


@dataclass(frozen=True)
class LossWeights:
    sim: float = 0.636
    fk: float = 0.646
    vel: float = 2.964
    con: float = 10.942
    dist: float = 0.636

    def __post_init__(self):
        for name in ("sim", "fk", "vel", "con", "dist"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidConfig(f"loss weight {name} must be finite and nonnegative")


def _as_tensor(motion) -> torch.Tensor:
    return motion.data if isinstance(motion, GroupMotion) else motion


def reconstruction_losses(gt, pred, skel: SkeletonSpec):
    """(sim, fk, vel, con) scalars for (C, L, 151) or (B, C, L, 151) motion.

    sim: mean squared error over every channel.
    fk: mean squared difference of world joint positions.
    vel: mean squared difference of per-frame feature deltas.
    con: mean squared contact-joint displacement gated by the predicted flags.
    """
    gt, pred = _as_tensor(gt), _as_tensor(pred)
    if gt.shape != pred.shape:
        raise ShapeMismatch(f"gt {tuple(gt.shape)} vs pred {tuple(pred.shape)}")
    sim = ((gt - pred) ** 2).mean()

    pos_gt = joint_positions(gt, skel)
    pos_pred = joint_positions(pred, skel)
    fk = ((pos_gt - pos_pred) ** 2).mean()

    dgt = gt[..., 1:, :] - gt[..., :-1, :]
    dpred = pred[..., 1:, :] - pred[..., :-1, :]
    vel = ((dgt - dpred) ** 2).mean() if gt.shape[-2] > 1 else gt.new_zeros(())

    if gt.shape[-2] > 1:
        foot = pos_pred[..., CONTACT_JOINTS, :]
        disp = foot[..., 1:, :, :] - foot[..., :-1, :, :]
        flags = pred[..., :-1, CONTACTS].unsqueeze(-1)
        con = ((disp * flags) ** 2).mean()
    else:
        con = gt.new_zeros(())
    return sim, fk, vel, con


def distance_consistency_loss(gt, pred) -> torch.Tensor:
    """Squared error of pairwise root offsets, summed over unordered dancer pairs,
    scaled by 1/(C-1), and averaged over frames."""
    gt, pred = _as_tensor(gt), _as_tensor(pred)
    if gt.shape != pred.shape:
        raise ShapeMismatch(f"gt {tuple(gt.shape)} vs pred {tuple(pred.shape)}")
    c = gt.shape[-3]
    if c < 2:
        warnings.warn("distance consistency needs at least two dancers; returning 0",
                      stacklevel=2)
        return gt.new_zeros(())
    roots_gt = gt[..., ROOT]
    roots_pred = pred[..., ROOT]
    total = gt.new_zeros(())
    for i in range(c):
        for j in range(i + 1, c):
            diff_gt = roots_gt[..., i, :, :] - roots_gt[..., j, :, :]
            diff_pred = roots_pred[..., i, :, :] - roots_pred[..., j, :, :]
            total = total + ((diff_gt - diff_pred) ** 2).sum(-1).mean(-1).mean()
    return total / (c - 1)


def total_loss(components, weights: LossWeights) -> torch.Tensor:
    """Weighted sum of (sim, fk, vel, con, dist)."""
    sim, fk, vel, con, dist = components
    return (weights.sim * sim + weights.fk * fk + weights.vel * vel
            + weights.con * con + weights.dist * dist)


def all_losses(gt, pred, skel: SkeletonSpec):
    """Convenience bundle: dict of the five components plus nothing else."""
    sim, fk, vel, con = reconstruction_losses(gt, pred, skel)
    dist = distance_consistency_loss(gt, pred)
    return {"sim": sim, "fk": fk, "vel": vel, "con": con, "dist": dist}
