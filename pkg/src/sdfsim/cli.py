"""Command-line front end.

Subcommands:
  gen      generate a terrain and write it as HFLD (+ 16-bit PGM preview)
  render   render one clean stereo depth pair (PFM + PGM previews)
  augment  run the full render+augment pipeline, dump tensors and optionally
           per-stage color panels
  bench    measure full-pipeline throughput, one JSON-lines record per trial

All commands are deterministic given a config (bench timings aside). Flags
override config-file values, which override built-in defaults; environment
variables SDF_<KEY> slot between file and flags.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .augment import STAGE_NAMES
from .config import ConfigError, RunConfig, load_config
from .formats import (save_depth_ppm, save_heightfield_pgm16, save_pfm, save_pgm8,
                      save_ppm, depth_colormap)
from .session import Session
from .terrain import Heightfield, make_terrain

TARGET_ENV_FRAMES_PER_S = 1024 * 50.0

_STAGE_FILES = ("input_left", "input_right") + STAGE_NAMES


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="config file path")
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--envs", type=int, default=None, help="override env_count")
    p.add_argument("--frames", type=int, default=None, help="override frame_count")
    p.add_argument("--workers", type=int, default=None, help="override worker count")
    p.add_argument("--out", type=Path, default=None, help="override output directory")
    p.add_argument("--baseline", type=float, default=None, help="override stereo baseline (m)")
    p.add_argument("--family", type=str, default=None, help="override terrain family")
    p.add_argument("--difficulty", type=int, default=None, help="override terrain difficulty")
    for stage in ("stereo-fusion", "conv", "gauss", "perlin", "scale", "failures",
                  "clip", "crop"):
        p.add_argument(f"--no-{stage}", action="store_true",
                       help=f"disable the {stage.replace('-', ' ')} stage")
    p.add_argument("--no-noise", action="store_true",
                   help="disable conv, gauss, perlin and scale stages")


def _build_config(args) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {
        "master_seed": args.seed, "env_count": args.envs, "frame_count": args.frames,
        "workers": args.workers, "baseline": args.baseline, "family": args.family,
        "difficulty": args.difficulty,
    }
    for key, val in overrides.items():
        if val is not None:
            setattr(cfg, key, val)
    if args.out is not None:
        cfg.output_dir = str(args.out)
    if args.no_noise:
        cfg.random_conv = cfg.gaussian_noise = cfg.perlin_noise = cfg.scale = False
    flag_map = {
        "no_stereo_fusion": "stereo_fusion", "no_conv": "random_conv",
        "no_gauss": "gaussian_noise", "no_perlin": "perlin_noise",
        "no_scale": "scale", "no_failures": "pixel_failures",
        "no_clip": "clip", "no_crop": "crop",
    }
    for flag, field in flag_map.items():
        if getattr(args, flag):
            setattr(cfg, field, False)
    return cfg.validate()


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen(args) -> int:
    cfg = _build_config(args)
    out = _outdir(cfg)
    spec = cfg.terrain_spec()
    field = make_terrain(spec)
    path = out / f"{spec.family.value}_{spec.difficulty:02d}.hfld"
    field.save(path)
    save_heightfield_pgm16(field, path.with_suffix(".pgm"))

    reloaded = Heightfield.load(path)
    if not np.array_equal(reloaded.heights, field.heights):
        print("error: HFLD round-trip mismatch", file=sys.stderr)
        return 1
    h = field.heights
    print(f"wrote {path}")
    print(f"grid {field.rows}x{field.cols} res {field.resolution} m | "
          f"height min {h.min():+.3f} max {h.max():+.3f} mean {h.mean():+.3f} m")
    return 0


def cmd_render(args) -> int:
    cfg = _build_config(args)
    out = _outdir(cfg)
    session = Session(cfg)
    env = session.envs[0]
    capture: dict = {}
    session._step_env(env, 0, session.default_pose(0, env.env_id), capture)
    left, right = capture["input_left"], capture["input_right"]
    for name, img in (("left", left), ("right", right)):
        save_pfm(img, out / f"{name}.pfm")
        save_pgm8(img, out / f"{name}.pgm")
        save_depth_ppm(img, out / f"{name}.ppm")
    valid = left.valid_mask.mean() * 100.0
    print(f"wrote left/right PFM+PGM+PPM to {out} "
          f"({left.width}x{left.height}, {valid:.1f}% valid pixels)")
    return 0


def cmd_augment(args) -> int:
    cfg = _build_config(args)
    out = _outdir(cfg)
    session = Session(cfg)
    frames, n = cfg.frame_count, cfg.env_count

    student = np.empty((frames, n, 1, session.out_height, session.out_width), np.float32)
    clean = np.empty_like(student)
    capture: dict = {}
    for f in range(frames):
        cap = capture if (args.dump_stages and f == frames - 1) else None
        step = session.step(capture_env=0, capture=cap)
        student[f] = step.student
        clean[f] = step.clean

    student.tofile(out / "student.bin")
    clean.tofile(out / "clean.bin")
    meta = {
        "shape": list(student.shape),
        "dtype": "float32",
        "order": "C",
        "layout": "frame-major, then env-major; each image row-major",
        "master_seed": cfg.master_seed,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")

    if args.dump_stages:
        for idx, name in enumerate(_STAGE_FILES):
            img = capture.get(name)
            if img is None:
                continue
            # normalized stages are re-expanded onto the metric color range
            data = img.data * 2.0 if name == "clip_crop" else img.data
            save_ppm(depth_colormap(data), out / f"stage_{idx:02d}_{name}.ppm")

    if cfg.clip and cfg.crop:
        ok = student.min() >= 0.0 and student.max() <= 1.0
        if not ok:
            print("error: student tensor escaped [0, 1]", file=sys.stderr)
            return 1
    print(f"wrote {frames}x{n} student/clean tensors "
          f"({session.out_height}x{session.out_width}) to {out}")
    return 0


def cmd_bench(args) -> int:
    cfg = _build_config(args)
    out = _outdir(cfg)
    session = Session(cfg)
    session.step()  # warmup, excluded from timing

    records = []
    for trial in range(args.trials):
        session.stage_seconds.clear()
        t0 = time.perf_counter()
        for _ in range(cfg.frame_count):
            session.step()
        elapsed = time.perf_counter() - t0
        env_frames = cfg.env_count * cfg.frame_count
        rate = env_frames / elapsed
        record = {
            "trial": trial,
            "envs": cfg.env_count,
            "frames": cfg.frame_count,
            "workers": cfg.workers,
            "elapsed_s": elapsed,
            "env_frames_per_s": rate,
            "frames_per_s": cfg.frame_count / elapsed,
            "stage_seconds": {k: round(v, 6) for k, v in sorted(session.stage_seconds.items())},
            "target_env_frames_per_s": TARGET_ENV_FRAMES_PER_S,
            "meets_target": rate >= TARGET_ENV_FRAMES_PER_S,
        }
        records.append(record)
        print(json.dumps(record))

    with open(out / "bench.jsonl", "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record) + "\n")
    best = max(r["env_frames_per_s"] for r in records)
    if best < TARGET_ENV_FRAMES_PER_S:
        print(f"regression: {best:.0f} env-frames/s below the "
              f"{TARGET_ENV_FRAMES_PER_S:.0f} target", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdfsim",
                                     description="stereo depth sensor simulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate terrain heightfields")
    p_render = sub.add_parser("render", help="render one clean stereo pair")
    p_aug = sub.add_parser("augment", help="run the full augmentation pipeline")
    p_bench = sub.add_parser("bench", help="measure pipeline throughput")

    for p in (p_gen, p_render, p_aug, p_bench):
        _add_common(p)
    p_aug.add_argument("--dump-stages", action="store_true",
                       help="write one color panel per pipeline stage (+ input pair)")
    p_bench.add_argument("--trials", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"gen": cmd_gen, "render": cmd_render, "augment": cmd_augment,
                "bench": cmd_bench}
    try:
        return handlers[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
