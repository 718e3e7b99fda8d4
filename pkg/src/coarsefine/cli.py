"""Command-line entry point: ``track run``, ``track bench`` and ``track synth``.

Exit codes: 0 success, 2 malformed input (sequence, config), 3 tracker or
feature-backend failure, 4 file-system error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from coarsefine.bench.ope import make_report, run_ope
from coarsefine.bench.report import emit_report, write_trajectory
from coarsefine.bench.sequence import Sequence, is_sequence_dir, load_sequence, write_sequence
from coarsefine.bench.synth import KINDS, make_sequence
from coarsefine.errors import BackendError, FormatError, TrackingError
from coarsefine.tracker import VARIANTS, TrackerConfig, load_config

log = logging.getLogger("coarsefine")

EXIT_OK, EXIT_FORMAT, EXIT_TRACKER, EXIT_IO = 0, 2, 3, 4


def _config(args) -> TrackerConfig:
    return load_config(args.config, variant=args.variant, backend=args.backend,
                       model_path=args.model)


def _write_run_extras(out: Path, config: TrackerConfig, timing: dict) -> None:
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    (out / "timing.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")


def cmd_run(args) -> int:
    config = _config(args)
    seq = load_sequence(args.seq)
    log.info("tracking %s (%d frames, variant %s)", seq.name, len(seq), config.variant)
    traj = run_ope(config, seq)
    out = Path(args.out)
    report = make_report([(traj, seq)])
    emit_report(report, out, plots=not args.no_plots)
    write_trajectory(traj, out / "trajectory.csv")
    _write_run_extras(out, config, {seq.name: {"seconds": traj.wall_time, "fps": traj.fps}})
    print(f"{seq.name}: precision@20 {report.precision_at_20:.3f}  AUC {report.auc:.3f}  "
          f"{traj.fps:.1f} fps  -> {out}")
    return EXIT_OK


def _bench_one(config: TrackerConfig, seq_dir: str):
    seq = load_sequence(seq_dir)
    return run_ope(config, seq), seq


def cmd_bench(args) -> int:
    config = _config(args)
    root = Path(args.dataset)
    if not root.is_dir():
        raise FormatError(f"{root}: dataset directory not found")
    dirs = [str(p) for p in sorted(root.iterdir()) if is_sequence_dir(p)]
    if not dirs:
        raise FormatError(f"{root}: no OTB-layout sequences (img/ + groundtruth_rect.txt) found")
    log.info("benchmarking %d sequences with %d job(s)", len(dirs), args.jobs)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_bench_one, [config] * len(dirs), dirs))
    else:
        results = [_bench_one(config, d) for d in dirs]
    out = Path(args.out)
    report = make_report(results)
    emit_report(report, out, plots=not args.no_plots)
    for traj, seq in results:
        write_trajectory(traj, out / "trajectories" / f"{seq.name}.csv")
    _write_run_extras(out, config, {seq.name: {"seconds": traj.wall_time, "fps": traj.fps}
                                    for traj, seq in results})
    print(f"{len(results)} sequences, {report.frames} frames: precision@20 {report.precision_at_20:.3f}  "
          f"AUC {report.auc:.3f}  -> {out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    syn = make_sequence(args.kind, args.frames, seed=args.seed, speed=args.speed)
    seq = Sequence(syn.name, syn.frames, syn.ground_truth, syn.attributes)
    path = write_sequence(seq, args.out)
    print(f"wrote {len(seq)} frames of {syn.name} to {path}")
    return EXIT_OK


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="track", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    tracking = argparse.ArgumentParser(add_help=False)
    tracking.add_argument("--config", help="JSON or TOML file of tracker settings")
    tracking.add_argument("--variant", choices=VARIANTS, help="ablation variant (default: complete)")
    tracking.add_argument("--backend", choices=("synthetic", "deep"), help="feature backend")
    tracking.add_argument("--model", help="model file for the deep backend (.onnx, .pb, ...)")
    tracking.add_argument("--out", required=True, help="output directory")
    tracking.add_argument("--no-plots", action="store_true", help="skip the SVG plots")

    run = sub.add_parser("run", parents=[tracking], help="track one OTB-layout sequence")
    run.add_argument("--seq", required=True, help="sequence directory")
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", parents=[tracking], help="one-pass evaluation over a dataset")
    bench.add_argument("--dataset", required=True, help="directory of sequence directories")
    bench.add_argument("--jobs", type=_positive_int, default=1, help="parallel worker processes")
    bench.set_defaults(func=cmd_bench)

    synth = sub.add_parser("synth", help="write a synthetic sequence in OTB layout")
    synth.add_argument("--kind", choices=KINDS, default="translate")
    synth.add_argument("--frames", type=_positive_int, default=100)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--speed", type=float, help="target speed in px/frame (default depends on kind)")
    synth.add_argument("--out", required=True, help="sequence directory to create")
    synth.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"track: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (TrackingError, BackendError) as exc:
        print(f"track: tracker error: {exc}", file=sys.stderr)
        return EXIT_TRACKER
    except OSError as exc:
        print(f"track: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
