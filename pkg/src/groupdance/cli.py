"""Command-line entry point.

Subcommands: synth (emit a corpus), train (overfit on a corpus), sample
(single-window generation), sample-long (windowed extension), eval (metrics
over a file), gradcheck (finite-difference verification). Exit codes: 0 on
success, 1 on validation errors, 2 on runtime errors. Flag values override a
JSON config file, which overrides built-in defaults. When ``--out`` is omitted
the GROUPDANCE_OUT directory is used.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import torch

from . import checkpoint as ckpt
from . import data, diffusion, lgds, metrics, training, viz
from .config import ModelConfig, TrainConfig
from .errors import FormatError, GroupDanceError, InvalidConfig, InvalidLength
from .footwork import adapt_footwork, finalize
from .losses import LossWeights
from .model import SwapMode

_DEFAULTS = {
    "synth": {"dancers": 3, "frames": 60, "pattern": "line", "beat_period": 15,
              "fps": 30.0, "seed": 0, "count": 4},
    "train": {"steps": 2000, "lr": 5e-5, "batch": 4, "seed": 0, "width": 64,
              "layers": 2, "heads": 8, "fa_blocks": 3, "fa_hidden": 64,
              "timesteps": 50, "schedule": "cosine"},
    "sample": {"seed": 0},
    "sample-long": {"seed": 0, "window": 150, "hop": 75},
    "eval": {"radius": 0.2, "sigma": 3.0},
    "gradcheck": {"dancers": 2, "width": 8, "layers": 1, "frames": 6, "seed": 0,
                  "samples": 200, "epsilon": 1e-5, "tolerance": 1e-4},
}


class ValidationError(Exception):
    pass


def _fail(msg: str) -> None:
    raise ValidationError(msg)


def _merge(command: str, args: argparse.Namespace) -> dict:
    merged = dict(_DEFAULTS[command])
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            _fail(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            _fail(f"config file is not valid JSON: {e}")
        unknown = set(loaded) - set(merged)
        if unknown:
            _fail(f"unknown config keys for {command}: {sorted(unknown)}")
        merged.update(loaded)
    for key in merged:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    return merged


def _out_path(args, default_name: str) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    base = os.environ.get("GROUPDANCE_OUT")
    if base:
        return Path(base) / default_name
    _fail("no --out given and GROUPDANCE_OUT is not set")


def _load_corpus(directory: Path):
    files = sorted(directory.glob("*.gdmc"))
    if not files:
        _fail(f"no .gdmc files in {directory}")
    bundles = [data.read_motion(f) for f in files]
    dancers = {b.motion.dancers for b in bundles}
    if len(dancers) != 1:
        _fail(f"corpus mixes dancer counts {sorted(dancers)}")
    return bundles


def _parse_swap(text: str, dancers: int) -> SwapMode:
    try:
        order = tuple(int(x) for x in text.split(","))
        if len(order) != dancers:
            raise ValueError(f"need {dancers} entries")
        return SwapMode(order)
    except (ValueError, GroupDanceError) as e:
        _fail(f"bad --swap-order {text!r}: {e}")


def cmd_synth(args) -> int:
    opt = _merge("synth", args)
    out_dir = _out_path(args, "corpus")
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(opt["count"]):
        recipe = data.ChoreographyRecipe(
            dancers=opt["dancers"], frames=opt["frames"], pattern=opt["pattern"],
            beat_period=opt["beat_period"], fps=opt["fps"], seed=opt["seed"] + i)
        motion, music = data.synth_group_sequence(recipe)
        name = f"{opt['pattern']}_c{opt['dancers']}_L{opt['frames']}_s{recipe.seed}.gdmc"
        data.write_motion(out_dir / name, motion, music, fps=opt["fps"])
        print(f"wrote {out_dir / name}")
    return 0


def cmd_train(args) -> int:
    opt = _merge("train", args)
    corpus_dir = Path(args.corpus)
    if not corpus_dir.is_dir():
        _fail(f"corpus directory not found: {corpus_dir}")
    bundles = _load_corpus(corpus_dir)
    out = _out_path(args, "model.gdck")
    model_config = ModelConfig(
        dancers=bundles[0].motion.dancers, width=opt["width"], layers=opt["layers"],
        heads=opt["heads"], fa_blocks=opt["fa_blocks"], fa_hidden=opt["fa_hidden"],
        timesteps=opt["timesteps"], schedule=opt["schedule"])
    train_config = TrainConfig(learning_rate=opt["lr"], steps=opt["steps"],
                               batch_size=opt["batch"], weights=LossWeights(),
                               seed=opt["seed"])
    corpus = [(b.motion, b.music) for b in bundles]
    log_path = Path(args.log) if args.log else out.with_suffix(".log")
    curve, state = training.overfit_run(corpus, model_config, train_config,
                                        log_path=log_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    ckpt.save_checkpoint(out, model_config, state.gdd, state.fa)
    n_params = training.count_parameters(state.gdd, state.fa)
    print(f"trained {opt['steps']} steps on {len(corpus)} sequences "
          f"({n_params} parameters)")
    if curve:
        print(f"loss {curve[0]['total']:.6g} -> {curve[-1]['total']:.6g}")
    print(f"wrote {out} and {log_path}")
    return 0


def _load_model_and_music(args):
    ckpt_path = Path(args.checkpoint)
    if not ckpt_path.is_file():
        _fail(f"checkpoint not found: {ckpt_path}")
    music_path = Path(args.music)
    if not music_path.is_file():
        _fail(f"music container not found: {music_path}")
    config, gdd, fa = ckpt.load_checkpoint(ckpt_path)
    bundle = data.read_motion(music_path)
    return config, gdd, fa, bundle


def cmd_sample(args) -> int:
    opt = _merge("sample", args)
    config, gdd, fa, bundle = _load_model_and_music(args)
    frames = args.frames or bundle.music.frames
    if frames > bundle.music.frames:
        _fail(f"requested {frames} frames but music has {bundle.music.frames}")
    out = _out_path(args, "sample.gdmc")
    sched = diffusion.make_schedule(config.timesteps, config.schedule)
    swap = _parse_swap(args.swap_order, config.dancers) if args.swap_order \
        else SwapMode.identity(config.dancers)
    music = bundle.music.slice(0, frames)
    with torch.no_grad():
        raw = diffusion.sample_loop(gdd, (config.dancers, frames), music, swap,
                                    sched, opt["seed"])
        final = _refine(raw, fa)
    out.parent.mkdir(parents=True, exist_ok=True)
    data.write_motion(out, final, music, bundle.skeleton, bundle.fps)
    if args.plot:
        viz.write_svg(args.plot, viz.trajectory_svg(final))
    print(f"wrote {out}")
    return 0


def _refine(raw, fa):
    """Footwork refinement applied once after sampling, then the body merge."""
    return finalize(raw, adapt_footwork(raw, fa))


def cmd_sample_long(args) -> int:
    opt = _merge("sample-long", args)
    config, gdd, fa, bundle = _load_model_and_music(args)
    frames = args.frames
    if frames is None:
        _fail("--frames is required for sample-long")
    if frames > bundle.music.frames:
        _fail(f"requested {frames} frames but music has {bundle.music.frames}")
    out = _out_path(args, "long.gdmc")
    sched = diffusion.make_schedule(config.timesteps, config.schedule)
    swap = _parse_swap(args.swap_order, config.dancers) if args.swap_order \
        else SwapMode.identity(config.dancers)
    plan = lgds.plan_windows(frames, opt["window"], opt["hop"])
    with torch.no_grad():
        raw = lgds.extend_sequence(gdd, frames, bundle.music, swap, sched,
                                   opt["seed"], window_len=opt["window"],
                                   hop=opt["hop"])
        final = _refine(raw, fa)
    out.parent.mkdir(parents=True, exist_ok=True)
    music = bundle.music.slice(0, frames)
    data.write_motion(out, final, music, bundle.skeleton, bundle.fps)
    stats = lgds.seam_statistics(final, plan)
    for k, v in sorted(stats.items()):
        print(f"{k} {v:.12g}")
    if args.plot:
        viz.write_svg(args.plot, viz.trajectory_svg(final))
    if args.seam_plot:
        seams = [seg[0] + plan.overlap for seg in plan.segments[1:]]
        viz.write_svg(args.seam_plot, viz.displacement_svg(final, seams))
    print(f"wrote {out}")
    return 0


def cmd_eval(args) -> int:
    opt = _merge("eval", args)
    pred_path = Path(args.pred)
    if not pred_path.is_file():
        _fail(f"prediction file not found: {pred_path}")
    bundle = data.read_motion(pred_path)
    report = metrics.evaluate(bundle.motion, bundle.music, bundle.skeleton,
                              radius=opt["radius"], fps=bundle.fps,
                              sigma=opt["sigma"])
    extra = {}
    if args.window and args.hop:
        plan = lgds.plan_windows(bundle.motion.frames, args.window, args.hop)
        extra.update(lgds.seam_statistics(bundle.motion, plan))
    text = report.lines(extra)
    if args.report:
        Path(args.report).write_text(text)
        print(f"wrote {args.report}")
    else:
        sys.stdout.write(text)
    if args.plot:
        viz.write_svg(args.plot, viz.trajectory_svg(bundle.motion))
    return 0


def cmd_gradcheck(args) -> int:
    opt = _merge("gradcheck", args)
    model_config = ModelConfig(dancers=opt["dancers"], width=opt["width"],
                               layers=opt["layers"], heads=min(4, opt["width"]),
                               fa_hidden=opt["width"], timesteps=10)
    gdd, fa = training.init_params(model_config, opt["seed"])
    recipe = data.ChoreographyRecipe(dancers=opt["dancers"], frames=max(30, opt["frames"]),
                                     pattern="line", seed=opt["seed"])
    motion, music = data.synth_group_sequence(recipe)
    f = opt["frames"]
    batch = [(motion.data[:, :f], music.channels[:f])]
    sched = diffusion.make_schedule(model_config.timesteps, model_config.schedule)
    err = training.grad_check(gdd, fa, batch, sched, LossWeights(),
                              epsilon=opt["epsilon"], samples=opt["samples"],
                              seed=opt["seed"])
    print(f"max relative gradient error: {err:.3e} (tolerance {opt['tolerance']:.0e})")
    return 0 if err < opt["tolerance"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="groupdance",
                                description="Music-driven group choreography toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic corpus")
    sp.add_argument("--dancers", type=int)
    sp.add_argument("--frames", type=int)
    sp.add_argument("--pattern", choices=data.PATTERNS)
    sp.add_argument("--beat-period", dest="beat_period", type=int)
    sp.add_argument("--fps", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--count", type=int)
    sp.add_argument("--out")
    sp.add_argument("--config")

    tp = sub.add_parser("train", help="overfit a model on a corpus directory")
    tp.add_argument("--corpus", required=True)
    tp.add_argument("--out")
    tp.add_argument("--log")
    tp.add_argument("--steps", type=int)
    tp.add_argument("--lr", type=float)
    tp.add_argument("--batch", type=int)
    tp.add_argument("--seed", type=int)
    tp.add_argument("--width", type=int)
    tp.add_argument("--layers", type=int)
    tp.add_argument("--heads", type=int)
    tp.add_argument("--fa-blocks", dest="fa_blocks", type=int)
    tp.add_argument("--fa-hidden", dest="fa_hidden", type=int)
    tp.add_argument("--timesteps", type=int)
    tp.add_argument("--schedule", choices=diffusion.SCHEDULE_KINDS)
    tp.add_argument("--config")

    for name in ("sample", "sample-long"):
        xp = sub.add_parser(name, help=f"{name} from a trained checkpoint")
        xp.add_argument("--checkpoint", required=True)
        xp.add_argument("--music", required=True,
                        help="container file providing music and skeleton")
        xp.add_argument("--frames", type=int)
        xp.add_argument("--swap-order", dest="swap_order")
        xp.add_argument("--seed", type=int)
        xp.add_argument("--out")
        xp.add_argument("--plot")
        xp.add_argument("--config")
        if name == "sample-long":
            xp.add_argument("--window", type=int)
            xp.add_argument("--hop", type=int)
            xp.add_argument("--seam-plot", dest="seam_plot")

    ep = sub.add_parser("eval", help="compute metrics for a motion file")
    ep.add_argument("--pred", required=True)
    ep.add_argument("--report")
    ep.add_argument("--radius", type=float)
    ep.add_argument("--sigma", type=float)
    ep.add_argument("--window", type=int)
    ep.add_argument("--hop", type=int)
    ep.add_argument("--plot")
    ep.add_argument("--config")

    gp = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    for flag, typ in (("dancers", int), ("width", int), ("layers", int),
                      ("frames", int), ("seed", int), ("samples", int),
                      ("epsilon", float), ("tolerance", float)):
        gp.add_argument(f"--{flag}", type=typ)
    gp.add_argument("--config")
    return p


_COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "sample": cmd_sample,
    "sample-long": cmd_sample_long,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    torch.set_num_threads(1)  # byte-reproducible outputs across runs
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ValidationError, InvalidConfig, InvalidLength, FormatError) as e:
        # bad flag values, inconsistent sizes, or unusable input files
        print(f"error: {e}", file=sys.stderr)
        return 1
    except GroupDanceError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
