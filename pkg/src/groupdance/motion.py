"""Motion representation and kinematics.

A pose frame is a 151-dim vector laid out as [contacts(4), root(3), rot6d(24*6)]:
four binary foot-contact indicators, the 3D root position in meters, and per-joint
rotations in the 6D representation (first two columns of the rotation matrix).
Group motion is a (dancers, frames, 151) tensor over a 24-joint kinematic tree.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import DegenerateInput, InvalidConfig, ShapeMismatch

CONTACT_DIM = 4
ROOT_DIM = 3
NUM_JOINTS = 24
ROT6D_DIM = NUM_JOINTS * 6
FRAME_DIM = CONTACT_DIM + ROOT_DIM + ROT6D_DIM  # 151

CONTACTS = slice(0, CONTACT_DIM)
ROOT = slice(CONTACT_DIM, CONTACT_DIM + ROOT_DIM)
ROT6D = slice(CONTACT_DIM + ROOT_DIM, FRAME_DIM)

# Lower body: hips, knees, ankles, feet. Root translation and the contact flags
# belong to the lower-body partition (positional change is footwork-driven).
LOWER_BODY_JOINTS = (1, 2, 4, 5, 7, 8, 10, 11)
# Contact-flag order (Lheel, Rheel, Ltoe, Rtoe) mapped onto ankle/foot joints.
CONTACT_JOINTS = (7, 8, 10, 11)
LEFT_FOOT_JOINT = 10
RIGHT_FOOT_JOINT = 11

SMPL_PARENTS = (-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8,
                9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21)

# Synthetic rest offsets in meters, y up, x lateral, z forward. Plausible human
# proportions; not measured from any capture subject.
_DEFAULT_OFFSETS = (
    (0.00, 0.00, 0.00),    # 0 pelvis
    (0.09, -0.09, 0.00),   # 1 left hip
    (-0.09, -0.09, 0.00),  # 2 right hip
    (0.00, 0.11, 0.00),    # 3 spine1
    (0.04, -0.38, 0.00),   # 4 left knee
    (-0.04, -0.38, 0.00),  # 5 right knee
    (0.00, 0.14, 0.00),    # 6 spine2
    (0.00, -0.40, -0.02),  # 7 left ankle
    (0.00, -0.40, -0.02),  # 8 right ankle
    (0.00, 0.06, 0.00),    # 9 spine3
    (0.00, -0.06, 0.12),   # 10 left foot
    (0.00, -0.06, 0.12),   # 11 right foot
    (0.00, 0.22, -0.02),   # 12 neck
    (0.07, 0.12, 0.00),    # 13 left collar
    (-0.07, 0.12, 0.00),   # 14 right collar
    (0.00, 0.09, 0.02),    # 15 head
    (0.09, 0.04, 0.00),    # 16 left shoulder
    (-0.09, 0.04, 0.00),   # 17 right shoulder
    (0.26, 0.00, 0.00),    # 18 left elbow
    (-0.26, 0.00, 0.00),   # 19 right elbow
    (0.25, 0.00, 0.00),    # 20 left wrist
    (-0.25, 0.00, 0.00),   # 21 right wrist
    (0.08, 0.00, 0.00),    # 22 left hand
    (-0.08, 0.00, 0.00),   # 23 right hand
)


@dataclass(frozen=True)
class SkeletonSpec:
    """24-joint kinematic tree: parent index per joint (root = -1) and rest offsets."""

    parents: tuple
    offsets: torch.Tensor  # (24, 3) float64, meters

    def __post_init__(self):
        if len(self.parents) != NUM_JOINTS:
            raise InvalidConfig(f"expected {NUM_JOINTS} parents, got {len(self.parents)}")
        if self.parents[0] != -1:
            raise InvalidConfig("joint 0 must be the root (parent -1)")
        for j, p in enumerate(self.parents[1:], start=1):
            if not 0 <= p < j:
                raise InvalidConfig(f"parent of joint {j} must precede it, got {p}")
        if self.offsets.shape != (NUM_JOINTS, 3):
            raise ShapeMismatch(f"offsets must be (24, 3), got {tuple(self.offsets.shape)}")
        if not torch.isfinite(self.offsets).all():
            raise InvalidConfig("offsets must be finite")

    @classmethod
    def default(cls) -> "SkeletonSpec":
        offs = torch.tensor(_DEFAULT_OFFSETS, dtype=torch.float64)
        return cls(parents=SMPL_PARENTS, offsets=offs)


@dataclass(frozen=True)
class MotionFrame:
    """One dancer pose: contact flags, root position, per-joint 6D rotations."""

    contacts: torch.Tensor  # (4,)
    root: torch.Tensor      # (3,)
    rot6d: torch.Tensor     # (24, 6)

    def as_vector(self) -> torch.Tensor:
        return torch.cat([self.contacts, self.root, self.rot6d.reshape(-1)])

    @classmethod
    def from_vector(cls, v: torch.Tensor) -> "MotionFrame":
        if v.shape != (FRAME_DIM,):
            raise ShapeMismatch(f"frame vector must be ({FRAME_DIM},), got {tuple(v.shape)}")
        return cls(contacts=v[CONTACTS], root=v[ROOT],
                   rot6d=v[ROT6D].reshape(NUM_JOINTS, 6))


@dataclass(frozen=True)
class GroupMotion:
    """C dancers x L frames x 151 motion descriptors.

    The wrapped tensor is treated as immutable; C and L are fixed at construction.
    """

    data: torch.Tensor  # (C, L, 151) float64

    def __post_init__(self):
        if self.data.dim() != 3 or self.data.shape[-1] != FRAME_DIM:
            raise ShapeMismatch(
                f"group motion must be (C, L, {FRAME_DIM}), got {tuple(self.data.shape)}")
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise InvalidConfig("need at least one dancer and one frame")
        if not torch.isfinite(self.data).all():
            raise InvalidConfig("motion data must be finite")
        c = self.data[..., CONTACTS]
        if c.min() < 0.0 or c.max() > 1.0:
            raise InvalidConfig("contact flags must lie in [0, 1]")

    @classmethod
    def from_prediction(cls, raw: torch.Tensor) -> "GroupMotion":
        """Wrap a raw network output; contact channels are clamped into [0, 1]."""
        out = raw.detach().clone()
        out[..., CONTACTS] = out[..., CONTACTS].clamp(0.0, 1.0)
        return cls(out)

    @property
    def dancers(self) -> int:
        return self.data.shape[0]

    @property
    def frames(self) -> int:
        return self.data.shape[1]

    @property
    def contacts(self) -> torch.Tensor:
        return self.data[..., CONTACTS]

    @property
    def roots(self) -> torch.Tensor:
        return self.data[..., ROOT]

    @property
    def rot6d(self) -> torch.Tensor:
        return self.data[..., ROT6D].reshape(self.dancers, self.frames, NUM_JOINTS, 6)

    def frame(self, dancer: int, frame: int) -> MotionFrame:
        return MotionFrame.from_vector(self.data[dancer, frame])


@dataclass(frozen=True)
class DancerPermutation:
    """Bijection on dancer slots; order[slot] = original dancer index."""

    order: tuple

    def __post_init__(self):
        n = len(self.order)
        if sorted(self.order) != list(range(n)):
            raise InvalidConfig(f"not a permutation of 0..{n - 1}: {self.order}")

    def inverse(self) -> "DancerPermutation":
        inv = [0] * len(self.order)
        for slot, orig in enumerate(self.order):
            inv[orig] = slot
        return DancerPermutation(tuple(inv))

    def apply(self, data: torch.Tensor) -> torch.Tensor:
        """Reorder the dancer axis (axis 0) so slot s holds dancer order[s]."""
        idx = torch.as_tensor(self.order, dtype=torch.long)
        return data.index_select(0, idx)


def rot6d_to_matrix(r: torch.Tensor) -> torch.Tensor:
    """Gram-Schmidt a (..., 6) tensor of stacked column pairs into (..., 3, 3) rotations.

    The first triple is normalized into column 0, the second is orthogonalized
    against it for column 1, and column 2 is their cross product.
    """
    if r.shape[-1] != 6:
        raise ShapeMismatch(f"rot6d input must end in 6 channels, got {tuple(r.shape)}")
    a, b = r[..., :3], r[..., 3:]
    na = torch.linalg.vector_norm(a, dim=-1, keepdim=True)
    if (na < 1e-8).any():
        raise DegenerateInput("first rot6d column has near-zero norm")
    c0 = a / na
    b_perp = b - (c0 * b).sum(-1, keepdim=True) * c0
    nb = torch.linalg.vector_norm(b_perp, dim=-1, keepdim=True)
    if (nb < 1e-8).any():
        raise DegenerateInput("second rot6d column is near-parallel to the first")
    c1 = b_perp / nb
    c2 = torch.cross(c0, c1, dim=-1)
    return torch.stack([c0, c1, c2], dim=-1)


def matrix_to_rot6d(m: torch.Tensor) -> torch.Tensor:
    """Inverse embedding: first two columns of (..., 3, 3), flattened to (..., 6)."""
    if m.shape[-2:] != (3, 3):
        raise ShapeMismatch(f"expected (..., 3, 3), got {tuple(m.shape)}")
    return torch.cat([m[..., :, 0], m[..., :, 1]], dim=-1)


def joint_positions(frames: torch.Tensor, skel: SkeletonSpec) -> torch.Tensor:
    """Forward kinematics for (..., 151) frames: world positions (..., 24, 3).

    Rotations compose down the parent chain; each joint sits at its parent's
    position plus the accumulated rotation applied to its rest offset. The root
    joint sits exactly at the root translation.
    """
    if frames.shape[-1] != FRAME_DIM:
        raise ShapeMismatch(f"frames must end in {FRAME_DIM} channels")
    rot = rot6d_to_matrix(frames[..., ROT6D].reshape(*frames.shape[:-1], NUM_JOINTS, 6))
    root = frames[..., ROOT]
    glob_rot = [None] * NUM_JOINTS
    pos = [None] * NUM_JOINTS
    glob_rot[0] = rot[..., 0, :, :]
    pos[0] = root
    offsets = skel.offsets.to(frames.dtype)
    for j in range(1, NUM_JOINTS):
        p = skel.parents[j]
        pos[j] = pos[p] + torch.matmul(glob_rot[p], offsets[j])
        glob_rot[j] = glob_rot[p] @ rot[..., j, :, :]
    return torch.stack(pos, dim=-2)


def forward_kinematics(frame: MotionFrame, skel: SkeletonSpec) -> torch.Tensor:
    """World positions (24, 3) of a single pose frame."""
    return joint_positions(frame.as_vector(), skel)


def root_velocity(roots: torch.Tensor) -> torch.Tensor:
    """Frame-wise root velocity: v[i] = p[i] - p[i-1], with v[0] = 0.

    Padding frame 0 with zeros keeps the velocity stream the same length as the
    motion it conditions.
    """
    if roots.shape[-1] != ROOT_DIM or roots.dim() < 2:
        raise ShapeMismatch(f"roots must be (..., L, 3), got {tuple(roots.shape)}")
    vel = torch.zeros_like(roots)
    vel[..., 1:, :] = roots[..., 1:, :] - roots[..., :-1, :]
    return vel


def lower_body_channel_mask(dtype=torch.bool) -> torch.Tensor:
    """151-length mask selecting contacts, root, and lower-body rot6d channels."""
    mask = torch.zeros(FRAME_DIM, dtype=torch.bool)
    mask[CONTACTS] = True
    mask[ROOT] = True
    for j in LOWER_BODY_JOINTS:
        start = ROT6D.start + 6 * j
        mask[start:start + 6] = True
    return mask.to(dtype)


def merge_body_parts(raw: torch.Tensor, adapted: torch.Tensor) -> torch.Tensor:
    """Combine upper body from `raw` with contacts/root/lower body from `adapted`."""
    if raw.shape != adapted.shape:
        raise ShapeMismatch(
            f"raw {tuple(raw.shape)} and adapted {tuple(adapted.shape)} differ")
    mask = lower_body_channel_mask().to(raw.device)
    return torch.where(mask, adapted, raw)


def split_merge_body(raw: GroupMotion, adapted: GroupMotion) -> GroupMotion:
    """GroupMotion wrapper around merge_body_parts."""
    return GroupMotion(merge_body_parts(raw.data, adapted.data))


def sort_order_by_x(roots_x: torch.Tensor) -> tuple:
    """Stable argsort of per-dancer x coordinates; ties keep original order."""
    idx = torch.argsort(roots_x, stable=True)
    return tuple(int(i) for i in idx)


def sort_dancers(motion: GroupMotion) -> tuple:
    """Reorder dancers left-to-right by their frame-0 root x coordinate.

    Returns the sorted motion and the permutation (slot -> original index);
    applying the inverse permutation recovers the input.
    """
    perm = DancerPermutation(sort_order_by_x(motion.data[:, 0, ROOT.start]))
    return GroupMotion(perm.apply(motion.data)), perm
