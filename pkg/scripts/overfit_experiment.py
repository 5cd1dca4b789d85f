#!/usr/bin/env python3
"""Overfit a small model on four synthetic sequences, then stretch it to four
times the training window and report seam quality.

Usage: python scripts/overfit_experiment.py [--steps N] [--out DIR]
"""
import argparse
import time
from pathlib import Path

import torch

import groupdance as gd
from groupdance.checkpoint import save_checkpoint
from groupdance.config import ModelConfig, TrainConfig
from groupdance.lgds import seam_statistics
from groupdance.training import count_parameters


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--out", default="runs/overfit")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    torch.set_num_threads(1)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    corpus = []
    for i, pattern in enumerate(("line", "swap", "circle", "converge-diverge")):
        recipe = gd.ChoreographyRecipe(dancers=2, frames=30, pattern=pattern,
                                       seed=10 + i)
        corpus.append(gd.synth_group_sequence(recipe))

    model_config = ModelConfig(dancers=2, width=64, layers=2, heads=8,
                               fa_blocks=3, fa_hidden=64, timesteps=50)
    train_config = TrainConfig(steps=args.steps, batch_size=4, seed=args.seed)

    start = time.time()
    curve, state = gd.overfit_run(corpus, model_config, train_config,
                                  log_path=out / "train.log")
    elapsed = time.time() - start
    print(f"{count_parameters(state.gdd, state.fa)} parameters, "
          f"{args.steps} steps in {elapsed:.0f}s")
    if curve:
        print(f"total loss {curve[0]['total']:.4f} -> {curve[-1]['total']:.4f} "
              f"(ratio {curve[-1]['total'] / curve[0]['total']:.3f})")
    save_checkpoint(out / "model.gdck", model_config, state.gdd, state.fa)

    # long-form extension: 4x the training window
    total, window, hop = 120, 30, 15
    sched = gd.make_schedule(model_config.timesteps, model_config.schedule)
    music = gd.synth_music(gd.ChoreographyRecipe(dancers=2, frames=total,
                                                 pattern="line", seed=99))
    with torch.no_grad():
        raw = gd.extend_sequence(state.gdd, total, music, gd.SwapMode.identity(2),
                                 sched, seed=args.seed, window_len=window, hop=hop)
        final = gd.finalize(raw, gd.adapt_footwork(raw, state.fa))
    gd.write_motion(out / "extended.gdmc", final, music.slice(0, total))

    plan = gd.plan_windows(total, window, hop)
    stats = seam_statistics(final, plan)
    report = gd.evaluate(final, music.slice(0, total))
    (out / "report.txt").write_text(report.lines(stats))
    print((out / "report.txt").read_text())


if __name__ == "__main__":
    main()
