import numpy as np
import pytest
import torch

import groupdance as gd
from groupdance.config import ModelConfig, TrainConfig

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def skel():
    return gd.SkeletonSpec.default()


@pytest.fixture(scope="session")
def tiny_pair():
    """One small synthetic (motion, music) pair."""
    recipe = gd.ChoreographyRecipe(dancers=2, frames=30, pattern="line", seed=7)
    return gd.synth_group_sequence(recipe)


@pytest.fixture(scope="session")
def tiny_corpus():
    """Four small sequences, one per formation pattern."""
    out = []
    for i, pattern in enumerate(("line", "swap", "circle", "converge-diverge")):
        recipe = gd.ChoreographyRecipe(dancers=2, frames=30, pattern=pattern,
                                       seed=10 + i)
        out.append(gd.synth_group_sequence(recipe))
    return out


@pytest.fixture()
def toy_model():
    config = ModelConfig(dancers=2, width=8, layers=1, heads=4, fa_blocks=1,
                         fa_hidden=8, timesteps=10)
    gdd, fa = gd.init_params(config, seed=0)
    return config, gdd, fa


def gram_schmidt_np(r6):
    """Independent 6D-rotation oracle in numpy."""
    a, b = np.asarray(r6[:3], float), np.asarray(r6[3:], float)
    c0 = a / np.linalg.norm(a)
    b = b - np.dot(c0, b) * c0
    c1 = b / np.linalg.norm(b)
    c2 = np.cross(c0, c1)
    return np.stack([c0, c1, c2], axis=1)


def fk_oracle(frame_vec, parents, offsets):
    """Brute-force forward kinematics: compose rotations down every ancestor path."""
    v = np.asarray(frame_vec, float)
    root = v[4:7]
    mats = [gram_schmidt_np(v[7 + 6 * j: 13 + 6 * j]) for j in range(24)]
    offs = np.asarray(offsets, float)
    pos = np.zeros((24, 3))
    pos[0] = root
    for j in range(1, 24):
        chain = []
        k = j
        while k != 0:
            chain.append(k)
            k = parents[k]
        chain.reverse()
        p = root.copy()
        rot = mats[0]
        for k in chain:
            p = p + rot @ offs[k]
            rot = rot @ mats[k]
        pos[j] = p
    return pos


def random_rot6d(rng, n):
    """(n, 6) numpy array of generic (non-degenerate almost surely) inputs."""
    return rng.normal(size=(n, 6)) * rng.uniform(0.5, 2.0, size=(n, 1))


def random_tree(rng):
    """Random topologically-ordered 24-joint tree with random offsets."""
    parents = [-1] + [int(rng.integers(0, j)) for j in range(1, 24)]
    offsets = rng.normal(scale=0.3, size=(24, 3))
    return tuple(parents), offsets


def identity_frame(root=(0.0, 0.0, 0.0)):
    """(151,) frame: zero contacts, given root, identity rotations."""
    v = torch.zeros(151, dtype=torch.float64)
    v[4:7] = torch.tensor(root, dtype=torch.float64)
    ident = torch.tensor([1.0, 0, 0, 0, 1.0, 0], dtype=torch.float64)
    v[7:] = ident.repeat(24)
    return v


def static_motion(dancers=2, frames=10, offset=1.2):
    """Motion whose every frame is an identity pose; dancers spread along x."""
    frames_v = torch.stack([identity_frame((c * offset, 0.9, 0.0))
                            for c in range(dancers)])
    return gd.GroupMotion(frames_v.unsqueeze(1).expand(dancers, frames, 151).clone())


def motion_from_roots(roots):
    """GroupMotion with identity poses riding given (C, L, 3) root paths."""
    roots = torch.as_tensor(roots, dtype=torch.float64)
    c, l, _ = roots.shape
    data = torch.zeros(c, l, 151, dtype=torch.float64)
    data[..., 4:7] = roots
    ident = torch.tensor([1.0, 0, 0, 0, 1.0, 0], dtype=torch.float64)
    data[..., 7:] = ident.repeat(24)
    return gd.GroupMotion(data)


def toy_train_configs(width=8, steps=2, lr=1e-3, seed=0):
    mc = ModelConfig(dancers=2, width=width, layers=1, heads=4, fa_blocks=1,
                     fa_hidden=width, timesteps=10)
    tc = TrainConfig(learning_rate=lr, steps=steps, batch_size=2, seed=seed)
    return mc, tc
