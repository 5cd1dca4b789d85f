"""Parameter initialization, the training loop, and gradient verification.

The objective is evaluated end to end: sorted ground truth is corrupted, the
denoiser predicts the clean motion, the footwork adaptor refines it, the merged
result is scored by every loss term, and one Adam update is applied. Reverse-mode
gradients are checked against central finite differences; that check is the
arbiter of differentiation correctness for every parameter group.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import torch
import torch.nn as nn

from .config import ModelConfig, TrainConfig
from .diffusion import NoiseSchedule, make_rng, make_schedule, q_sample
from .errors import InvalidConfig, NonFiniteLoss
from .footwork import FootworkAdaptor, finalize_tensors
from .losses import all_losses, total_loss
from .model import GroupDanceDenoiser
from .motion import ROOT, GroupMotion, SkeletonSpec, sort_dancers
from .ssm import SelectiveSSM

LOSS_KEYS = ("sim", "fk", "vel", "con", "dist")


def _fill_uniform(t: torch.Tensor, bound: float, g: torch.Generator) -> None:
    with torch.no_grad():
        t.uniform_(-bound, bound, generator=g)


def init_params(config: ModelConfig, seed):
    """Seeded construction of the denoiser and footwork adaptor.

    Affine weights and biases draw from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    The per-dancer offsets and the FiLM projections start at zero so both begin
    as identity maps; layer norms start as identity.
    """
    g = make_rng(seed)
    gdd = GroupDanceDenoiser(config.dancers, config.width, config.layers, config.heads)
    fa = FootworkAdaptor(config.fa_blocks, config.fa_hidden)
    for module in itertools.chain(gdd.modules(), fa.modules()):
        if isinstance(module, SelectiveSSM):
            _fill_uniform(module.log_a, 0.5, g)
            _fill_uniform(module.b, 0.5, g)
            _fill_uniform(module.c, 0.5, g)
        elif isinstance(module, nn.Linear):
            bound = 1.0 / (module.in_features ** 0.5)
            _fill_uniform(module.weight, bound, g)
            if module.bias is not None:
                _fill_uniform(module.bias, bound, g)
        elif isinstance(module, nn.LayerNorm):
            with torch.no_grad():
                module.weight.fill_(1.0)
                module.bias.fill_(0.0)
    with torch.no_grad():
        gdd.dpe.zero_()
        for block in gdd.blocks:
            block.film.weight.zero_()
            block.film.bias.zero_()
    return gdd, fa


def count_parameters(*modules) -> int:
    return sum(p.numel() for m in modules for p in m.parameters())


def sort_batch(motions) -> torch.Tensor:
    """Stack (B, C, L, 151) with each sequence's dancers sorted left to right."""
    out = []
    for m in motions:
        if not isinstance(m, GroupMotion):
            m = GroupMotion(m)
        out.append(sort_dancers(m)[0].data)
    return torch.stack(out)


def swap_orders_from(gt: torch.Tensor) -> torch.Tensor:
    """(B, C) final-frame left-to-right rankings for a sorted batch."""
    final_x = gt[:, :, -1, ROOT.start]
    return torch.argsort(final_x, dim=1, stable=True)


@dataclass
class TrainState:
    gdd: GroupDanceDenoiser
    fa: FootworkAdaptor
    optimizer: torch.optim.Optimizer
    skeleton: SkeletonSpec
    step: int = 0


def make_train_state(model_config: ModelConfig, train_config: TrainConfig,
                     rng=None, skeleton: SkeletonSpec = None) -> TrainState:
    gdd, fa = init_params(model_config, rng if rng is not None else train_config.seed)
    opt = torch.optim.Adam(
        itertools.chain(gdd.parameters(), fa.parameters()),
        lr=train_config.learning_rate)
    return TrainState(gdd=gdd, fa=fa, optimizer=opt,
                      skeleton=skeleton or SkeletonSpec.default())


def forward_losses(gdd, fa, skel, gt, music, t, noise, sched, weights):
    """Corrupt -> denoise -> adapt -> merge -> score. Returns (components, total)."""
    x_t = q_sample(gt, t, noise, sched)
    raw = gdd(x_t, t, music, swap_orders_from(gt))
    merged = finalize_tensors(raw, fa(raw))
    comps = all_losses(gt, merged, skel)
    return comps, total_loss(tuple(comps[k] for k in LOSS_KEYS), weights)


def train_step(state: TrainState, batch, sched: NoiseSchedule,
               config: TrainConfig, rng) -> dict:
    """One optimization step on a batch of (motion, music) pairs.

    Ground truth is dancer-sorted, a uniform timestep corrupts it, and the
    weighted objective drives one Adam update. Returns every loss component
    (floats) plus the weighted total.
    """
    motions, musics = zip(*batch)
    gt = sort_batch(motions)
    music = torch.stack([m.channels if not torch.is_tensor(m) else m for m in musics])
    b = gt.shape[0]
    t = torch.randint(0, sched.steps, (b,), generator=rng)
    noise = torch.randn(gt.shape, dtype=torch.float64, generator=rng)
    comps, total = forward_losses(state.gdd, state.fa, state.skeleton,
                                  gt, music, t, noise, sched, config.weights)
    if not torch.isfinite(total):
        detail = {k: float(v.detach()) for k, v in comps.items()}
        raise NonFiniteLoss(f"non-finite loss at step {state.step}: {detail}")
    state.optimizer.zero_grad()
    total.backward()
    state.optimizer.step()
    state.step += 1
    out = {k: float(v.detach()) for k, v in comps.items()}
    out["total"] = float(total.detach())
    return out


def overfit_run(corpus, model_config: ModelConfig, train_config: TrainConfig,
                sched: NoiseSchedule = None, log_path=None):
    """Train on a tiny corpus until the step budget; returns (curve, state).

    Batches cycle through the corpus deterministically; the whole run is a pure
    function of (corpus, configs, seed). Per-step components go to `log_path`
    exactly as returned by the loss module.
    """
    if not 1 <= len(corpus) <= 8:
        raise InvalidConfig("overfit corpus must hold 1..8 sequences")
    sched = sched or make_schedule(model_config.timesteps, model_config.schedule)
    rng = make_rng(train_config.seed)
    state = make_train_state(model_config, train_config, rng=rng)
    n = len(corpus)
    curve = []
    log = open(log_path, "w") if log_path else None
    try:
        for step in range(train_config.steps):
            batch = [corpus[(step * train_config.batch_size + i) % n]
                     for i in range(min(train_config.batch_size, n))]
            comps = train_step(state, batch, sched, train_config, rng)
            curve.append(comps)
            if log:
                parts = " ".join(f"{k} {comps[k]:.12g}" for k in (*LOSS_KEYS, "total"))
                log.write(f"step {step} {parts}\n")
    finally:
        if log:
            log.close()
    return curve, state


def grad_check(gdd, fa, batch, sched: NoiseSchedule, weights, epsilon: float = 1e-5,
               samples: int = 200, seed: int = 0, jitter: float = 0.02,
               skeleton: SkeletonSpec = None) -> float:
    """Max relative error between autograd and central finite differences.

    At least one coordinate of every named parameter tensor is probed, then the
    budget is filled with random coordinates, so every group (positioning
    offsets, fusion, attention, SSM, FiLM, concat-squash, heads) is covered.
    Parameters are jittered first so zero-initialized groups are off their
    identity point.
    """
    skel = skeleton or SkeletonSpec.default()
    g = make_rng(seed)
    named = [(f"gdd.{n}", p) for n, p in gdd.named_parameters()]
    named += [(f"fa.{n}", p) for n, p in fa.named_parameters()]
    with torch.no_grad():
        for _, p in named:
            p.add_(jitter * torch.randn(p.shape, dtype=torch.float64, generator=g))

    motions, musics = zip(*batch)
    gt = sort_batch(motions)
    music = torch.stack([m.channels if not torch.is_tensor(m) else m for m in musics])
    b = gt.shape[0]
    t = torch.randint(0, sched.steps, (b,), generator=g)
    noise = torch.randn(gt.shape, dtype=torch.float64, generator=g)

    def loss_tensor():
        _, total = forward_losses(gdd, fa, skel, gt, music, t, noise, sched, weights)
        return total

    for _, p in named:
        p.grad = None
    loss_tensor().backward()
    grads = {name: p.grad.detach().clone() for name, p in named}

    picks = []
    for name, p in named:
        picks.append((name, int(torch.randint(p.numel(), (1,), generator=g))))
    while len(picks) < samples:
        which = int(torch.randint(len(named), (1,), generator=g))
        name, p = named[which]
        picks.append((name, int(torch.randint(p.numel(), (1,), generator=g))))

    by_name = dict(named)
    worst = 0.0
    with torch.no_grad():
        for name, idx in picks:
            p = by_name[name]
            flat = p.view(-1)
            orig = float(flat[idx])
            eps = epsilon * max(1.0, abs(orig))
            flat[idx] = orig + eps
            f_plus = float(loss_tensor())
            flat[idx] = orig - eps
            f_minus = float(loss_tensor())
            flat[idx] = orig
            fd = (f_plus - f_minus) / (2.0 * eps)
            an = float(grads[name].view(-1)[idx])
            rel = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
            worst = max(worst, rel)
    return worst
