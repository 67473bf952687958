"""Command-line interface.

Subcommands: ``track`` (stream beat times from an activation source or a
WAV file), ``eval`` (score a dataset directory), ``sweep`` (particle-count
sweep), and ``synth`` (generate synthetic activation + annotation files).
Exit codes: 0 ok, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import BeatstreamError
from .evaluation import (DEFAULT_SKIPS, DEFAULT_TOLERANCE_S, DatasetItem,
                         evaluate_dataset, particle_sweep)
from .frontend import (AudioFrameSpec, DEFAULT_FRAME_RATE, FilterbankSpec,
                       FeaturePipeline, FluxActivation, iter_blocks,
                       open_activation_stream, read_wav,
                       write_activations_bact, write_activations_text)
from .state_space import (ConstantCount, Fractional, GaussianSoft,
                          StateSpaceConfig)
from .synth import TempoScript, generate
from .tracker import BeatTracker, TrackerConfig

OK = 0
USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _tracker_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("tracker")
    group.add_argument("--particles", type=int, default=1000,
                       help="number of particles (default 1000)")
    group.add_argument("--lambda", dest="transition_lambda", type=float,
                       default=30.0, metavar="LAMBDA",
                       help="tempo transition sharpness (default 30)")
    group.add_argument("--gamma", type=float, default=0.03,
                       help="non-beat likelihood floor (default 0.03)")
    group.add_argument("--tempo-min", type=float, default=55.0,
                       help="slowest tracked tempo in BPM (default 55)")
    group.add_argument("--tempo-max", type=float, default=215.0,
                       help="fastest tracked tempo in BPM (default 215)")
    group.add_argument("--discriminator",
                       choices=["fractional", "constant", "gaussian"],
                       default="fractional",
                       help="beat/non-beat boundary model")
    group.add_argument("--alpha", type=float, default=1.0 / 60.0,
                       help="fractional boundary (default 1/60)")
    group.add_argument("--count", type=int, default=1,
                       help="beat states per row for --discriminator "
                            "constant (default 1)")
    group.add_argument("--sigma-frac", type=float, default=0.05,
                       help="sigma as a fraction of the row length for "
                            "--discriminator gaussian (default 0.05)")
    group.add_argument("--rho", type=float, default=0.02,
                       help="double/half tempo investigator fraction "
                            "(default 0.02; 0 disables)")
    group.add_argument("--seed", type=int, default=0,
                       help="random seed (default 0)")
    group.add_argument("--fps", type=float, default=DEFAULT_FRAME_RATE,
                       help="activation frame rate in Hz (default 100)")
    group.add_argument("--resample", choices=["every", "ess"],
                       default="every",
                       help="resampling cadence: every frame or on low "
                            "effective sample size")


def _tracker_config(args, frame_rate: float | None = None) -> TrackerConfig:
    if args.discriminator == "fractional":
        disc = Fractional(args.alpha)
    elif args.discriminator == "constant":
        disc = ConstantCount(args.count)
    else:
        disc = GaussianSoft(args.sigma_frac)
    fps = frame_rate if frame_rate is not None else args.fps
    return TrackerConfig(
        n_particles=args.particles,
        transition_lambda=args.transition_lambda,
        gamma=args.gamma,
        state_space=StateSpaceConfig(
            frame_period_s=1.0 / fps,
            tempo_min_bpm=args.tempo_min,
            tempo_max_bpm=args.tempo_max,
            discriminator=disc,
        ),
        tempo_injection_fraction=args.rho,
        seed=args.seed,
        resample_policy=args.resample,
    )


def _iter_source_activations(args):
    """Yield activation values for `track`, plus the stream frame rate."""
    if args.flux:
        rate, samples = read_wav(args.source)
        spec = AudioFrameSpec(rate, hop_s=1.0 / args.fps)
        fb = FilterbankSpec()
        pipeline = FeaturePipeline(spec, fb)
        flux = FluxActivation(pipeline.n_bands, spec.frame_rate)
        frames = (flux.process(pipeline.process_block(block)).b
                  for block in iter_blocks(samples, spec))
        return frames, spec.frame_rate, None
    source = sys.stdin if args.source == "-" else args.source
    stream = open_activation_stream(source, frame_rate=args.fps)
    return stream.values(), stream.frame_rate, stream


def _cmd_track(args) -> int:
    try:
        values, frame_rate, stream = _iter_source_activations(args)
        tracker = BeatTracker(_tracker_config(args, frame_rate))
        out = sys.stdout
        for b in values:
            event = tracker.process_frame(b)
            if event is not None:
                if args.tempo:
                    out.write(f"{event.time_s:.3f}\t"
                              f"{event.tempo_bpm_estimate:.2f}\n")
                else:
                    out.write(f"{event.time_s:.3f}\n")
                out.flush()
    except (OSError, BeatstreamError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    if stream is not None and stream.clamp_warnings:
        print(f"warning: {stream.clamp_warnings} activation value(s) "
              f"clamped to [0, 1]", file=sys.stderr)
    return OK


def discover_dataset(directory) -> list[DatasetItem]:
    """Pair `<stem>.{bact|txt}` with `<stem>.beats` under a directory."""
    directory = Path(directory)
    items = []
    for beats in sorted(directory.glob("*.beats")):
        stem = beats.with_suffix("")
        for suffix in (".bact", ".txt"):
            activation = stem.with_suffix(suffix)
            if activation.exists():
                items.append(DatasetItem(
                    stem.name, str(activation), str(beats)))
                break
    return items


def _cmd_eval(args) -> int:
    items = discover_dataset(args.dataset_dir)
    if not items:
        print(f"error: no activation/annotation pairs under "
              f"{args.dataset_dir}", file=sys.stderr)
        return DATA_ERROR
    report = evaluate_dataset(
        items, _tracker_config(args), tol_s=args.tolerance,
        skips=args.skip, jobs=args.jobs)
    sys.stdout.write(report.table())
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as out:
            report.to_csv(out)
    if not report.ok_items:
        return DATA_ERROR
    return OK


def _cmd_sweep(args) -> int:
    items = discover_dataset(args.dataset_dir)
    if not items:
        print(f"error: no activation/annotation pairs under "
              f"{args.dataset_dir}", file=sys.stderr)
        return DATA_ERROR
    sweep = particle_sweep(
        items, args.particles, _tracker_config_for_sweep(args),
        tol_s=args.tolerance, skips=args.skip, jobs=args.jobs)
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as out:
            sweep.to_csv(out)
    sweep.to_csv(sys.stdout)
    return OK


def _tracker_config_for_sweep(args) -> TrackerConfig:
    # the sweep overrides n_particles per row; base config carries the rest
    base_particles = args.particles[0]
    saved = args.particles
    args.particles = base_particles
    config = _tracker_config(args)
    args.particles = saved
    return config


def _parse_segments(text: str) -> tuple[tuple[float, float], ...]:
    segments = []
    for part in text.split(","):
        try:
            start, tempo = part.split(":")
            segments.append((float(start), float(tempo)))
        except ValueError:
            raise BeatstreamError(
                f"cannot parse segment {part!r}; expected START:BPM")
    return tuple(segments)


def _cmd_synth(args) -> int:
    try:
        if args.segments:
            segments = _parse_segments(args.segments)
        else:
            segments = ((0.0, args.tempo),)
        script = TempoScript(
            segments=segments,
            duration_s=args.duration,
            pulse_width_frames=args.pulse_width,
            peak=args.peak,
            noise_floor=args.noise_floor,
            jitter_s=args.jitter,
            dropout_prob=args.dropout,
            seed=args.seed,
        )
        activations, beats = generate(script, args.fps)
        stem = Path(args.stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        if args.format == "bact":
            activation_path = stem.with_suffix(".bact")
            write_activations_bact(activation_path, activations, args.fps)
        else:
            activation_path = stem.with_suffix(".txt")
            write_activations_text(activation_path, activations)
        beats_path = stem.with_suffix(".beats")
        with open(beats_path, "w", encoding="utf-8") as out:
            for t in beats:
                out.write(f"{t:.6f}\n")
    except (OSError, BeatstreamError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    print(f"wrote {activation_path} ({activations.size} frames) and "
          f"{beats_path} ({beats.size} beats)", file=sys.stderr)
    return OK


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="beatstream",
        description="Streaming particle-filter beat tracker.")
    sub = parser.add_subparsers(dest="command", required=True)

    track = sub.add_parser(
        "track", help="stream beat times from an activation source")
    track.add_argument("source",
                       help="activation file (text or .bact), '-' for "
                            "stdin, or a WAV file with --flux")
    track.add_argument("--flux", action="store_true",
                       help="treat the source as WAV audio and use the "
                            "spectral-flux front-end")
    track.add_argument("--tempo", action="store_true",
                       help="append the tempo estimate to each beat line")
    _tracker_flags(track)
    track.set_defaults(func=_cmd_track)

    ev = sub.add_parser("eval", help="evaluate a dataset directory")
    ev.add_argument("dataset_dir")
    ev.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE_S,
                    help="matching window in seconds (default 0.07)")
    ev.add_argument("--skip", type=float, nargs="+",
                    default=list(DEFAULT_SKIPS),
                    help="head seconds to discard (default: 0 and 5)")
    ev.add_argument("--csv", help="also write the per-item report as CSV")
    ev.add_argument("--jobs", type=int, default=1,
                    help="parallel worker processes (default 1)")
    _tracker_flags(ev)
    ev.set_defaults(func=_cmd_eval)

    sw = sub.add_parser("sweep", help="particle-count sweep over a dataset")
    sw.add_argument("dataset_dir")
    sw.add_argument("--particles", type=int, nargs="+", required=True,
                    help="particle counts to evaluate")
    sw.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE_S)
    sw.add_argument("--skip", type=float, nargs="+",
                    default=list(DEFAULT_SKIPS))
    sw.add_argument("--csv", help="also write the sweep table as CSV")
    sw.add_argument("--jobs", type=int, default=1)
    group = sw.add_argument_group("tracker")
    group.add_argument("--lambda", dest="transition_lambda", type=float,
                       default=30.0)
    group.add_argument("--gamma", type=float, default=0.03)
    group.add_argument("--tempo-min", type=float, default=55.0)
    group.add_argument("--tempo-max", type=float, default=215.0)
    group.add_argument("--discriminator",
                       choices=["fractional", "constant", "gaussian"],
                       default="fractional")
    group.add_argument("--alpha", type=float, default=1.0 / 60.0)
    group.add_argument("--count", type=int, default=1)
    group.add_argument("--sigma-frac", type=float, default=0.05)
    group.add_argument("--rho", type=float, default=0.02)
    group.add_argument("--seed", type=int, default=0)
    group.add_argument("--fps", type=float, default=DEFAULT_FRAME_RATE)
    group.add_argument("--resample", choices=["every", "ess"],
                       default="every")
    sw.set_defaults(func=_cmd_sweep)

    sy = sub.add_parser(
        "synth", help="generate a synthetic activation/annotation pair")
    sy.add_argument("stem", help="output path stem (writes <stem>.bact or "
                                 "<stem>.txt plus <stem>.beats)")
    sy.add_argument("--tempo", type=float, default=120.0,
                    help="constant tempo in BPM (default 120)")
    sy.add_argument("--segments",
                    help="piecewise tempo as START:BPM[,START:BPM...]; "
                         "overrides --tempo")
    sy.add_argument("--duration", type=float, default=30.0,
                    help="stream length in seconds (default 30)")
    sy.add_argument("--pulse-width", type=float, default=1.5,
                    help="activation bump sigma in frames (default 1.5)")
    sy.add_argument("--peak", type=float, default=0.9)
    sy.add_argument("--noise-floor", type=float, default=0.02)
    sy.add_argument("--jitter", type=float, default=0.0,
                    help="per-beat timing jitter sigma in seconds")
    sy.add_argument("--dropout", type=float, default=0.0,
                    help="probability a beat's bump is suppressed")
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--fps", type=float, default=DEFAULT_FRAME_RATE)
    sy.add_argument("--format", choices=["bact", "txt"], default="bact")
    sy.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BeatstreamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
