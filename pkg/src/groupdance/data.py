"""Synthetic choreography corpus and the on-disk motion container format.

Music tracks are 35-channel feature frames: [0] envelope, [1:21] spectral
proxies, [21:33] chroma proxies, [33] beat indicator, [34] peak indicator.
Motion/music/skeleton triples are stored in a single self-describing container:
an ASCII key/value header followed by raw little-endian float64 blocks, so
round-trips are bit-exact. See docs/format.md for the byte layout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .errors import FormatError, InvalidConfig
from .motion import (CONTACT_JOINTS, FRAME_DIM, NUM_JOINTS, GroupMotion,
                     SkeletonSpec, joint_positions, matrix_to_rot6d)

MUSIC_DIM = 35
ENVELOPE = 0
SPECTRAL = slice(1, 21)
CHROMA = slice(21, 33)
BEAT = 33
PEAK = 34

PATTERNS = ("line", "circle", "swap", "converge-diverge")
CONTACT_SPEED_THRESHOLD = 0.02  # m/frame

_MAGIC = "GDMC 1"


@dataclass(frozen=True)
class MusicTrack:
    """L frames of 35 conditioning channels with binary beat/peak indicators."""

    channels: torch.Tensor  # (L, 35) float64

    def __post_init__(self):
        if self.channels.dim() != 2 or self.channels.shape[1] != MUSIC_DIM:
            raise InvalidConfig(
                f"music must be (L, {MUSIC_DIM}), got {tuple(self.channels.shape)}")
        if not torch.isfinite(self.channels).all():
            raise InvalidConfig("music channels must be finite")
        for ch in (BEAT, PEAK):
            col = self.channels[:, ch]
            if not torch.logical_or(col == 0.0, col == 1.0).all():
                raise InvalidConfig("beat and peak channels must be binary")

    @property
    def frames(self) -> int:
        return self.channels.shape[0]

    def beat_frames(self) -> list:
        return torch.nonzero(self.channels[:, BEAT] > 0.5).flatten().tolist()

    def slice(self, start: int, end: int) -> "MusicTrack":
        return MusicTrack(self.channels[start:end])


@dataclass(frozen=True)
class ChoreographyRecipe:
    """Everything needed to synthesize one (motion, music) pair deterministically."""

    dancers: int
    frames: int
    pattern: str
    beat_period: int = 15
    fps: float = 30.0
    seed: int = 0

    def __post_init__(self):
        if not 2 <= self.dancers <= 5:
            raise InvalidConfig("dancer count must be in [2, 5]")
        if self.frames < 30:
            raise InvalidConfig("need at least 30 frames")
        if self.beat_period < 2:
            raise InvalidConfig("beat period must be at least 2 frames")
        if self.pattern not in PATTERNS:
            raise InvalidConfig(f"unknown pattern {self.pattern!r}; choose from {PATTERNS}")


def synth_music(recipe: ChoreographyRecipe) -> MusicTrack:
    """Deterministic synthetic feature track honoring the 35-channel layout."""
    rng = np.random.default_rng([recipe.seed, 0xA0D10])
    L, bp = recipe.frames, recipe.beat_period
    t = np.arange(L, dtype=np.float64)
    out = np.zeros((L, MUSIC_DIM), dtype=np.float64)

    phase = rng.uniform(0, 2 * math.pi)
    out[:, ENVELOPE] = 0.55 + 0.35 * np.sin(2 * math.pi * t / (2 * bp) + phase)

    for ch in range(SPECTRAL.start, SPECTRAL.stop):
        for _ in range(3):
            f = rng.uniform(0.5 / L, 0.08)
            out[:, ch] += rng.uniform(0.1, 0.4) * np.sin(
                2 * math.pi * f * t + rng.uniform(0, 2 * math.pi))
    for ch in range(CHROMA.start, CHROMA.stop):
        f = rng.uniform(0.5 / L, 0.05)
        out[:, ch] = 0.5 + 0.5 * np.sin(2 * math.pi * f * t + rng.uniform(0, 2 * math.pi))

    out[::bp, BEAT] = 1.0
    env = out[:, ENVELOPE]
    for i in range(1, L - 1):
        if env[i] > env[i - 1] and env[i] >= env[i + 1]:
            out[i, PEAK] = 1.0
    return MusicTrack(torch.from_numpy(out))


def _smoothstep(x: np.ndarray) -> np.ndarray:
    s = np.clip(x, 0.0, 1.0)
    return 3 * s * s - 2 * s * s * s


def _root_paths(recipe: ChoreographyRecipe, rng: np.random.Generator) -> np.ndarray:
    """(C, L, 3) root trajectories; y up, smooth, pairwise spacing kept >= 0.5 m."""
    C, L, bp = recipe.dancers, recipe.frames, recipe.beat_period
    t = np.arange(L, dtype=np.float64)
    roots = np.zeros((C, L, 3), dtype=np.float64)
    base_x = (np.arange(C) - (C - 1) / 2.0) * 1.2
    for c in range(C):
        roots[c, :, 1] = 0.92 + 0.015 * np.sin(2 * math.pi * t / bp + 0.7 * c)

    if recipe.pattern == "line":
        for c in range(C):
            roots[c, :, 0] = base_x[c] + 0.12 * np.sin(
                2 * math.pi * t / (4 * bp) + 0.9 * c)
            roots[c, :, 2] = 0.25 * np.sin(2 * math.pi * t / (6 * bp))
    elif recipe.pattern == "circle":
        radius = max(1.0, 0.35 / math.sin(math.pi / C))
        spin = 2 * math.pi * 0.25 * t / max(L - 1, 1)
        for c in range(C):
            theta = 2 * math.pi * c / C + spin
            roots[c, :, 0] = radius * np.sin(theta)
            roots[c, :, 2] = radius * np.cos(theta)
    elif recipe.pattern == "swap":
        s = _smoothstep((t - L / 3.0) / (L / 3.0))
        lo, hi = 0, C - 1
        for c in range(C):
            if c == lo:
                roots[c, :, 0] = base_x[lo] + s * (base_x[hi] - base_x[lo])
                roots[c, :, 2] = 0.9 * np.sin(math.pi * s)
            elif c == hi:
                roots[c, :, 0] = base_x[hi] + s * (base_x[lo] - base_x[hi])
                roots[c, :, 2] = -0.9 * np.sin(math.pi * s)
            else:
                roots[c, :, 0] = base_x[c]
                roots[c, :, 2] = 0.05 * np.sin(2 * math.pi * t / (5 * bp) + c)
    elif recipe.pattern == "converge-diverge":
        scale = 1.0 - 0.4 * np.sin(math.pi * t / max(L - 1, 1)) ** 2
        for c in range(C):
            roots[c, :, 0] = base_x[c] * scale
            roots[c, :, 2] = 0.1 * np.sin(2 * math.pi * t / (6 * bp) + 0.5 * c)
    return roots


# Per-joint swing amplitudes (radians) and axes for the limb oscillation.
_JOINT_AMP = {16: 0.35, 17: 0.35, 18: 0.30, 19: 0.30, 20: 0.25, 21: 0.25,
              22: 0.15, 23: 0.15, 13: 0.08, 14: 0.08, 12: 0.06, 15: 0.06,
              3: 0.05, 6: 0.05, 9: 0.05, 1: 0.10, 2: 0.10, 4: 0.12, 5: 0.12,
              7: 0.06, 8: 0.06, 10: 0.04, 11: 0.04, 0: 0.03}


def _axis_rotation(axis: int, angle: np.ndarray) -> np.ndarray:
    """(L, 3, 3) rotations about a coordinate axis for per-frame angles."""
    L = angle.shape[0]
    m = np.zeros((L, 3, 3), dtype=np.float64)
    ca, sa = np.cos(angle), np.sin(angle)
    i, j = [(1, 2), (2, 0), (0, 1)][axis]
    m[:, axis, axis] = 1.0
    m[:, i, i] = ca
    m[:, i, j] = -sa
    m[:, j, i] = sa
    m[:, j, j] = ca
    return m


def synth_group_sequence(recipe: ChoreographyRecipe):
    """(GroupMotion, MusicTrack) with beat-locked limb swings and derived contacts.

    Contact flags are set wherever the corresponding contact joint moves slower
    than the threshold, so flags and kinematics agree by construction.
    """
    music = synth_music(recipe)
    rng = np.random.default_rng([recipe.seed, 0x0DA2CE])
    C, L, bp = recipe.dancers, recipe.frames, recipe.beat_period
    t = np.arange(L, dtype=np.float64)
    roots = _root_paths(recipe, rng)

    rot = np.zeros((C, L, NUM_JOINTS, 6), dtype=np.float64)
    for c in range(C):
        for j in range(NUM_JOINTS):
            amp = _JOINT_AMP[j]
            axis = (j + c) % 3
            angle = amp * np.sin(2 * math.pi * t / bp + rng.uniform(0, 2 * math.pi))
            mats = _axis_rotation(axis, angle)
            rot[c, :, j, :] = matrix_to_rot6d(torch.from_numpy(mats)).numpy()

    data = np.zeros((C, L, FRAME_DIM), dtype=np.float64)
    data[..., 4:7] = roots
    data[..., 7:] = rot.reshape(C, L, -1)

    tensor = torch.from_numpy(data)
    pos = joint_positions(tensor, SkeletonSpec.default())
    for k, joint in enumerate(CONTACT_JOINTS):
        speed = torch.linalg.vector_norm(
            pos[:, 1:, joint] - pos[:, :-1, joint], dim=-1)
        flags = (speed < CONTACT_SPEED_THRESHOLD).to(torch.float64)
        tensor[:, 1:, k] = flags
        tensor[:, 0, k] = flags[:, 0]
    return GroupMotion(tensor), music


@dataclass(frozen=True)
class MotionBundle:
    """Contents of one container file."""

    motion: GroupMotion
    music: MusicTrack
    skeleton: SkeletonSpec
    fps: float


def write_motion(path, motion: GroupMotion, music: MusicTrack,
                 skeleton: SkeletonSpec = None, fps: float = 30.0) -> None:
    """Serialize a motion/music/skeleton triple; floats are written verbatim."""
    skeleton = skeleton or SkeletonSpec.default()
    if music.frames != motion.frames:
        raise FormatError("music and motion frame counts differ")
    header = "\n".join([
        _MAGIC,
        f"fps {fps!r}",
        f"dancers {motion.dancers}",
        f"frames {motion.frames}",
        f"joints {NUM_JOINTS}",
        "parents " + " ".join(str(p) for p in skeleton.parents),
        f"layout contacts=0:4 root=4:7 rot6d=7:{FRAME_DIM}",
        f"music_channels {MUSIC_DIM}",
        "end_header",
    ]) + "\n"
    blocks = [motion.data, skeleton.offsets, music.channels]
    for b in blocks:
        if not torch.isfinite(b).all():
            raise FormatError("refusing to write non-finite values")
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        for b in blocks:
            f.write(b.numpy().astype("<f8", copy=False).tobytes())


def read_motion(path) -> MotionBundle:
    """Parse a container file; shape, version, and value problems raise FormatError."""
    try:
        with open(path, "rb") as f:
            payload = f.read()
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}") from e
    sep = payload.find(b"end_header\n")
    if sep < 0:
        raise FormatError("missing end_header marker")
    head = payload[:sep].decode("ascii", errors="replace").splitlines()
    body = payload[sep + len(b"end_header\n"):]
    if not head or head[0] != _MAGIC:
        raise FormatError(f"bad magic/version line: {head[:1]}")
    fields = {}
    for line in head[1:]:
        key, _, value = line.partition(" ")
        fields[key] = value
    try:
        fps = float(fields["fps"])
        dancers = int(fields["dancers"])
        frames = int(fields["frames"])
        joints = int(fields["joints"])
        parents = tuple(int(p) for p in fields["parents"].split())
    except (KeyError, ValueError) as e:
        raise FormatError(f"malformed header field: {e}") from e
    if dancers < 1 or frames < 1:
        raise FormatError("dancer and frame counts must be positive")
    if joints != NUM_JOINTS or len(parents) != NUM_JOINTS:
        raise FormatError(f"expected {NUM_JOINTS} joints")

    sizes = (dancers * frames * FRAME_DIM, NUM_JOINTS * 3, frames * MUSIC_DIM)
    if len(body) != 8 * sum(sizes):
        raise FormatError(
            f"payload is {len(body)} bytes, expected {8 * sum(sizes)}")
    arrays, off = [], 0
    for n in sizes:
        arrays.append(np.frombuffer(body, dtype="<f8", count=n, offset=off).copy())
        off += 8 * n
    motion_arr, offsets_arr, music_arr = arrays
    for a in arrays:
        if not np.isfinite(a).all():
            raise FormatError("non-finite values in payload")
    skel = SkeletonSpec(parents=parents,
                        offsets=torch.from_numpy(offsets_arr.reshape(NUM_JOINTS, 3)))
    motion = GroupMotion(torch.from_numpy(
        motion_arr.reshape(dancers, frames, FRAME_DIM)))
    music = MusicTrack(torch.from_numpy(music_arr.reshape(frames, MUSIC_DIM)))
    return MotionBundle(motion=motion, music=music, skeleton=skel, fps=fps)
