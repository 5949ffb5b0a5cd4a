"""Command-line surface: one subcommand per pipeline stage.

Exit codes: 0 success, 2 missing input file, 64 bad usage/flags,
3 training divergence, 1 anything else. Errors print as a single
`error: ...` line on stderr so scripts can parse them.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .config import DEFAULT_CONFIG, SynthConfig, config_from_json
from .errors import FormatError, TrainingDiverged
from .features import build_dataset
from .gan import build_models, train
from .grid import GridSpec, build_grid_sounds, cell_image, render_mosaic
from .inversion import invert_cell
from .engine import ScheduledMix, pointer_to_triggers, quantize_pcm16, render, simulate_gesture
from . import modelio

EXIT_MISSING_FILE = 2
EXIT_DIVERGED = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"error: {message}\n")


def _load_config(path) -> SynthConfig:
    if path is None:
        return DEFAULT_CONFIG
    return config_from_json(Path(path).read_text())


def _require(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(p)
    return p


def _load_model(path, cfg):
    return modelio.load_model(_require(path), cfg)


def build_parser() -> _Parser:
    parser = _Parser(prog="snakesynth", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON config file (defaults internal)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-dataset", help="WAV directory -> spectral image dataset")
    p.add_argument("wav_dir")
    p.add_argument("--out", default="dataset.npz")

    p = sub.add_parser("train", help="train the generator/discriminator pair")
    p.add_argument("dataset")
    p.add_argument("--epochs", type=int, default=None, help="total epochs (default from config)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="model.ssyn")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--literal-minimax", action="store_true",
                   help="use the saturating generator objective")
    p.add_argument("--losses", help="loss history CSV (default <out>.losses.csv)")

    p = sub.add_parser("render-grid", help="render the latent grid mosaic image")
    p.add_argument("model")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--out", default="mosaic.png")

    p = sub.add_parser("invert", help="invert one grid cell to a WAV clip")
    p.add_argument("model")
    p.add_argument("--cell", required=True, help="row,col")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--out", default="cell.wav")

    p = sub.add_parser("simulate", help="render a scripted gesture through the grid")
    p.add_argument("model")
    p.add_argument("--gesture", required=True,
                   choices=["click", "linear", "direction_change", "circular", "chaotic"])
    p.add_argument("--duration", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--cache", help="clip cache directory")
    p.add_argument("--out", default="gesture.wav")

    p = sub.add_parser("serve", help="start the live session server")
    p.add_argument("model")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--cache", help="clip cache directory")
    p.add_argument("--ui", help="directory with the built browser pad")
    return parser


def _spec(args, cfg) -> GridSpec:
    return GridSpec(args.n if args.n is not None else cfg.grid_n, cfg.coverage)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _load_config(args.config)

    if args.command == "build-dataset":
        images, manifest = build_dataset(_require(args.wav_dir), cfg)
        modelio.save_dataset(args.out, images, manifest, cfg)
        print(f"wrote {len(images)} images to {args.out}")
        return 0

    if args.command == "train":
        images = modelio.load_dataset(_require(args.dataset), cfg)
        state = _load_model(args.resume, cfg) if args.resume else build_models(cfg, args.seed)
        train(images, cfg, seed=args.seed, epochs=args.epochs, state=state,
              literal=args.literal_minimax, log=print)
        digest = modelio.save_model(args.out, state)
        losses_path = args.losses or f"{args.out}.losses.csv"
        with open(losses_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "step", "g_loss", "d_loss"])
            w.writerows(state.step_losses)
        print(f"wrote {args.out} (digest {digest[:12]}), losses to {losses_path}")
        return 0

    if args.command == "render-grid":
        state = _load_model(args.model, cfg)
        mosaic = render_mosaic(state.generator, _spec(args, cfg))
        modelio.write_png_gray(args.out, mosaic)
        print(f"wrote {mosaic.shape[1]}x{mosaic.shape[0]} mosaic to {args.out}")
        return 0

    if args.command == "invert":
        state = _load_model(args.model, cfg)
        spec = _spec(args, cfg)
        try:
            i, j = (int(v) for v in args.cell.split(","))
        except ValueError:
            build_parser().error(f"--cell wants row,col integers, got {args.cell!r}")
        if not (0 <= i < spec.n and 0 <= j < spec.n):
            build_parser().error(f"cell {i},{j} outside the {spec.n}x{spec.n} grid")
        clip = invert_cell(cell_image(state.generator, i, j, spec, cfg), cfg,
                           source_cell=(i, j))
        modelio.write_wav_pcm16(args.out, quantize_pcm16(clip.samples), cfg.sample_rate)
        print(f"wrote cell ({i},{j}) clip to {args.out}")
        return 0

    if args.command == "simulate":
        state = _load_model(args.model, cfg)
        spec = _spec(args, cfg)
        digest = modelio.params_digest(state.generator.parameters()
                                       + state.discriminator.parameters())
        clips = build_grid_sounds(state.generator, spec, cfg,
                                  cache_dir=args.cache, model_digest=digest)
        events = simulate_gesture(args.gesture, duration=args.duration, seed=args.seed)
        triggers = pointer_to_triggers(events, spec)
        audio = render(ScheduledMix(triggers, clips, cfg.sample_rate),
                       until_t=args.duration + 1.0)
        modelio.write_wav_pcm16(args.out, quantize_pcm16(audio), cfg.sample_rate)
        print(f"{len(triggers)} triggers, {len(audio) / cfg.sample_rate:.2f} s -> {args.out}")
        return 0

    if args.command == "serve":
        from .server import serve as run_server
        state = _load_model(args.model, cfg)
        spec = _spec(args, cfg)
        digest = modelio.params_digest(state.generator.parameters()
                                       + state.discriminator.parameters())
        clips = build_grid_sounds(state.generator, spec, cfg,
                                  cache_dir=args.cache, model_digest=digest)
        mosaic_png = modelio.png_gray_bytes(render_mosaic(state.generator, spec))
        print(f"serving on {args.host}:{args.port} with {spec.n}x{spec.n} grid")
        run_server(clips, cfg, spec, mosaic_png, host=args.host, port=args.port,
                   ui_dir=args.ui)
        return 0

    raise AssertionError(f"unhandled command {args.command}")


def entry() -> None:
    try:
        sys.exit(main())
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        sys.exit(EXIT_MISSING_FILE)
    except TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        sys.exit(EXIT_DIVERGED)
    except (FormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    entry()
