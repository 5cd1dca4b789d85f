"""Desk-computable evaluation metrics.

Collision frequency, foot-contact physicality, group correlation, beat
alignment, and kinematic diversity; all pure functions of the motion (and music
where relevant). Feature-extractor metrics that require pretrained models are
reported as n/a.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from .errors import InvalidConfig
from .motion import (LEFT_FOOT_JOINT, RIGHT_FOOT_JOINT, GroupMotion, SkeletonSpec,
                     joint_positions)

# Ground plane is x-z with y up; "horizontal" distance ignores the y coordinate.
HORIZONTAL = (0, 2)


@dataclass(frozen=True)
class MetricReport:
    tif: float
    pfc: float
    gmc: float
    mmc: float
    div: float

    def __post_init__(self):
        for name in ("tif", "pfc", "gmc", "mmc", "div"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidConfig(f"metric {name} is not finite")
        if not 0.0 <= self.tif <= 1.0:
            raise InvalidConfig("tif must lie in [0, 1]")
        if not -1.0 <= self.gmc <= 1.0:
            raise InvalidConfig("gmc must lie in [-1, 1]")
        if not 0.0 <= self.mmc <= 1.0:
            raise InvalidConfig("mmc must lie in [0, 1]")
        if self.pfc < 0 or self.div < 0:
            raise InvalidConfig("pfc and div must be nonnegative")

    def lines(self, extra: dict = None) -> str:
        rows = [("tif", f"{self.tif:.12g}"), ("pfc", f"{self.pfc:.12g}"),
                ("gmc", f"{self.gmc:.12g}"), ("mmc", f"{self.mmc:.12g}"),
                ("div", f"{self.div:.12g}"), ("gmr", "n/a"), ("fid", "n/a")]
        if extra:
            rows += [(k, f"{v:.12g}" if isinstance(v, float) else str(v))
                     for k, v in sorted(extra.items())]
        return "".join(f"{k} {v}\n" for k, v in rows)


def tif(motion: GroupMotion, radius: float = 0.2) -> float:
    """Fraction of frames where any dancer pair is closer than 2*radius in the
    ground plane."""
    if motion.dancers < 2:
        raise InvalidConfig("collision frequency needs at least two dancers")
    xz = motion.roots[..., HORIZONTAL]
    hit = torch.zeros(motion.frames, dtype=torch.bool)
    for i in range(motion.dancers):
        for j in range(i + 1, motion.dancers):
            dist = torch.linalg.vector_norm(xz[i] - xz[j], dim=-1)
            hit |= dist < 2.0 * radius
    return float(hit.to(torch.float64).mean())


def pfc(dancer: torch.Tensor, skel: SkeletonSpec, fps: float = 30.0) -> float:
    """Foot-contact physicality of one dancer's (L, 151) sequence.

    Scores center-of-mass acceleration that is unsupported by a static foot:
    mean over interior frames of |a_com| * min(|v_lfoot|, |v_rfoot|), normalized
    by the peak |a_com|; a perfectly static sequence scores 0.
    """
    if dancer.dim() != 2 or dancer.shape[0] < 3:
        raise InvalidConfig("need a single dancer with at least three frames")
    root = dancer[:, 4:7]
    acc = (root[2:] - 2 * root[1:-1] + root[:-2]) * fps * fps
    acc_norm = torch.linalg.vector_norm(acc, dim=-1)
    pos = joint_positions(dancer, skel)
    feet = pos[:, (LEFT_FOOT_JOINT, RIGHT_FOOT_JOINT), :]
    vel = (feet[2:] - feet[:-2]) * (fps / 2.0)
    vel_norm = torch.linalg.vector_norm(vel, dim=-1)
    slower_foot = vel_norm.min(dim=-1).values
    peak = float(acc_norm.max())
    if peak <= 1e-8:  # only rounding residue: unaccelerated motion scores 0
        return 0.0
    return float((acc_norm * slower_foot).mean() / peak)


def _pearson(u: torch.Tensor, v: torch.Tensor) -> float:
    uc = u - u.mean()
    vc = v - v.mean()
    nu = torch.linalg.vector_norm(uc)
    nv = torch.linalg.vector_norm(vc)
    if nu == 0 or nv == 0:
        return 0.0
    return float((uc @ vc) / (nu * nv))


def gmc(motion: GroupMotion, skel: SkeletonSpec = None) -> float:
    """Mean zero-lag correlation of flattened joint-velocity sequences over all
    unordered dancer pairs; zero-variance sequences contribute 0."""
    if motion.dancers < 2:
        raise InvalidConfig("group correlation needs at least two dancers")
    if motion.frames < 2:
        raise InvalidConfig("group correlation needs at least two frames")
    skel = skel or SkeletonSpec.default()
    pos = joint_positions(motion.data, skel)
    vel = (pos[:, 1:] - pos[:, :-1]).reshape(motion.dancers, -1)
    vals = []
    for i in range(motion.dancers):
        for j in range(i + 1, motion.dancers):
            vals.append(_pearson(vel[i], vel[j]))
    return sum(vals) / len(vals)


def kinematic_beats(dancer: torch.Tensor, skel: SkeletonSpec) -> list:
    """Frames where the total joint speed is a local minimum.

    Speed at frame i is the central-difference displacement norm summed over
    joints; a beat needs to be no larger than both neighbors and strictly
    smaller than at least one, so constant-speed stretches produce no beats.
    """
    pos = joint_positions(dancer, skel)
    speed = torch.linalg.vector_norm(pos[2:] - pos[:-2], dim=-1).sum(-1) / 2.0
    beats = []
    for i in range(1, speed.shape[0] - 1):
        here, prev, nxt = (float(speed[i]), float(speed[i - 1]), float(speed[i + 1]))
        tol = 1e-9 * max(1.0, abs(here))  # ignore ulp-level wobble
        if (here <= prev + tol and here <= nxt + tol
                and (here < prev - tol or here < nxt - tol)):
            beats.append(i + 1)  # central-difference index i sits at frame i+1
    return beats


def mmc(dancer: torch.Tensor, music, sigma: float = 3.0,
        skel: SkeletonSpec = None) -> float:
    """Beat alignment: mean over music beats of a Gaussian kernel on the distance
    to the nearest kinematic beat. No kinematic beats (or no music beats) -> 0."""
    skel = skel or SkeletonSpec.default()
    music_t = music if torch.is_tensor(music) else music.channels
    music_beats = torch.nonzero(music_t[:, 33] > 0.5).flatten().tolist()
    kin = kinematic_beats(dancer, skel)
    if not kin or not music_beats:
        return 0.0
    score = 0.0
    for b in music_beats:
        nearest = min((b - k) ** 2 for k in kin)
        score += math.exp(-nearest / (2.0 * sigma * sigma))
    return score / len(music_beats)


def kinetic_feature(dancer: torch.Tensor, skel: SkeletonSpec = None) -> torch.Tensor:
    """24-dim per-joint mean speed of one dancer's (L, 151) sequence."""
    skel = skel or SkeletonSpec.default()
    pos = joint_positions(dancer, skel)
    return torch.linalg.vector_norm(pos[1:] - pos[:-1], dim=-1).mean(0)


def feature_diversity(features) -> float:
    """Mean pairwise Euclidean distance between feature vectors."""
    if len(features) < 2:
        raise InvalidConfig("diversity needs at least two sequences")
    dists = []
    for i in range(len(features)):
        for j in range(i + 1, len(features)):
            dists.append(float(torch.linalg.vector_norm(features[i] - features[j])))
    return sum(dists) / len(dists)


def diversity(dancers, skel: SkeletonSpec = None) -> float:
    """Diversity of a set of (L, 151) dancer sequences via kinetic features."""
    return feature_diversity([kinetic_feature(d, skel) for d in dancers])


def evaluate(motion: GroupMotion, music, skel: SkeletonSpec = None,
             radius: float = 0.2, fps: float = 30.0, sigma: float = 3.0) -> MetricReport:
    """Full report for one group motion; per-dancer metrics are averaged."""
    skel = skel or SkeletonSpec.default()
    per_dancer_pfc = [pfc(motion.data[c], skel, fps) for c in range(motion.dancers)]
    per_dancer_mmc = [mmc(motion.data[c], music, sigma, skel)
                      for c in range(motion.dancers)]
    return MetricReport(
        tif=tif(motion, radius),
        pfc=sum(per_dancer_pfc) / len(per_dancer_pfc),
        gmc=gmc(motion, skel),
        mmc=sum(per_dancer_mmc) / len(per_dancer_mmc),
        div=diversity([motion.data[c] for c in range(motion.dancers)], skel),
    )
