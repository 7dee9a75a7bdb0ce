"""slitlab command line.

    slitlab simulate [--frames M] [--noiseless] [--format binary|csv]
    slitlab analyze FRAME_FILE [--baseline V] [--guard-pixels K]
    slitlab curve [--xi-max X] [--samples N] [--bound TABLE]
    slitlab report REPORT.json [REPORT.json ...]

Global flags (before or after the subcommand): --config, --seed, --out,
--json, --quiet. Exit codes: 0 success, 1 data or numerical error,
2 usage or configuration error.
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, frames_io
from .analytic import capture_probability, heisenberg_step
from .ccdsim import generate_frameset
from .config import RunConfig, load_config
from .errors import ConfigError, DataError, SlitlabError

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _fmt(value):
    return repr(float(value))


def _config(args):
    path = getattr(args, "config", None)
    cfg = load_config(path) if path else RunConfig()
    seed = getattr(args, "seed", None)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed).validate()
    return cfg


def _emit(args, text, payload):
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2))
    elif not getattr(args, "quiet", False):
        print(text)


def cmd_simulate(args):
    cfg = _config(args)
    if args.frames is not None:
        cfg = dataclasses.replace(cfg, frames=args.frames).validate()
    if args.format is not None:
        cfg = dataclasses.replace(cfg, frame_format=args.format).validate()
    sensor = cfg.sensor()
    if args.noiseless:
        sensor = sensor.noiseless()
    fs = generate_frameset(sensor, cfg.beam(), cfg.frames, cfg.seed, max_values=cfg.max_values)
    out = getattr(args, "out", None) or cfg.frame_file
    frames_io.write_frames(out, fs, cfg.frame_format)
    peak = float(fs.frames.max())
    _emit(args,
          f"simulated M={fs.frame_count} N={sensor.pixel_count} seed={fs.seed} "
          f"peak={peak:.6g} V -> {out}",
          {"frames": fs.frame_count, "pixels": sensor.pixel_count, "seed": fs.seed,
           "peak_voltage": peak, "path": str(out)})
    return EXIT_OK


def cmd_analyze(args):
    has_config = getattr(args, "config", None) is not None
    cfg = _config(args)
    fs = frames_io.read_frames(args.frame_file)
    sensor = fs.sensor
    if cfg.center_pixel is not None:
        sensor = dataclasses.replace(sensor, center_pixel=cfg.center_pixel)
    guard = args.guard_pixels if args.guard_pixels is not None else cfg.guard_pixels
    result = analysis.analyze(
        fs, fs.geometry, sensor.pixel_pitch, positions=sensor.positions(),
        guard_pixels=guard, baseline=args.baseline, baseline_spread=cfg.baseline_spread,
        baseline_configured=cfg.baseline_voltage if has_config else None)
    out = getattr(args, "out", None) or cfg.output_dir
    analysis.write_outputs(result, out)
    rep = result.report
    _emit(args,
          f"max |dP| = {rep.max_abs_deviation:.3e}, forbidden fraction "
          f"empirical {rep.empirical_forbidden_fraction:.4f} / analytic "
          f"{rep.analytic_forbidden_fraction:.4f}, window deficit {rep.window_deficit:.3e} "
          f"-> {out}",
          rep.to_dict())
    return EXIT_OK


def _read_bound(path):
    rows = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = [p.strip() for p in body.split(",")]
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except (ValueError, IndexError):
                if rows:
                    raise UsageError(f"{path}: bad bound row on line {lineno}") from None
                continue  # header line
    if len(rows) < 2:
        raise UsageError(f"{path}: bound table needs at least two rows")
    table = np.array(sorted(rows))
    return table[:, 0], table[:, 1]


def cmd_curve(args):
    if not args.xi_max > 0:
        raise UsageError("--xi-max must be positive")
    if args.samples < 2:
        raise UsageError("--samples must be >= 2")
    xi = np.arange(args.samples) * args.xi_max / (args.samples - 1)
    planewave = capture_probability(xi)
    step = heisenberg_step(xi)
    bound = None
    if args.bound:
        bx, by = _read_bound(args.bound)
        bound = [_fmt(v) if bx[0] <= x <= bx[-1] else ""
                 for x, v in zip(xi, np.interp(xi, bx, by))]
    lines = ["# p_step is right-continuous: 0 for xi < 1, 1 for xi >= 1"]
    lines.append("xi,p_planewave,p_step" + (",p_bound" if bound is not None else ""))
    for i in range(xi.size):
        row = f"{_fmt(xi[i])},{_fmt(planewave[i])},{_fmt(step[i])}"
        if bound is not None:
            row += "," + bound[i]
        lines.append(row)
    text = "\n".join(lines) + "\n"
    out = getattr(args, "out", None)
    if out:
        Path(out).write_text(text)
        if not getattr(args, "quiet", False):
            print(f"wrote {xi.size} rows -> {out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args):
    entries = []
    for path in args.reports:
        try:
            rep = analysis.read_report(path)
        except (OSError, ValueError) as exc:
            raise DataError(f"{path}: {exc}") from None
        entries.append((str(path), rep))
    if getattr(args, "json", False):
        payload = {"reports": [dict(path=path, **rep.to_dict()) for path, rep in entries]}
        text = json.dumps(payload, indent=2)
    else:
        out = [f"analytic forbidden fraction: {_fmt(entries[0][1].analytic_forbidden_fraction)}"]
        for path, rep in entries:
            out.append(f"[{path}]")
            out.append(f"  analytic forbidden fraction:  {_fmt(rep.analytic_forbidden_fraction)}")
            out.append(f"  empirical forbidden fraction: {_fmt(rep.empirical_forbidden_fraction)}")
            if rep.window_deficit is not None:
                out.append(f"  window deficit:               {_fmt(rep.window_deficit)}")
            out.append(f"  max |dP|: {_fmt(rep.max_abs_deviation)}  "
                       f"mean |dP|: {_fmt(rep.mean_abs_deviation)}")
            for band, stats in rep.deviation_by_band.items():
                out.append(f"    xi in {band:<9} n={stats['count']:<5d} "
                           f"max={stats['max_abs_deviation']:.3e} "
                           f"mean={stats['mean_abs_deviation']:.3e} "
                           f"signed={stats['mean_signed_deviation']:+.3e}")
        text = "\n".join(out)
    print(text)
    return EXIT_OK


def _global_flags(parser):
    # SUPPRESS lets the flags appear before or after the subcommand
    parser.add_argument("--config", default=argparse.SUPPRESS, help="run configuration file")
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the seed")
    parser.add_argument("--out", default=argparse.SUPPRESS, help="output file or directory")
    parser.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                        help="machine-readable output")
    parser.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS,
                        help="suppress the summary line")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common)
    parser = argparse.ArgumentParser(prog="slitlab", description=__doc__.splitlines()[0],
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="write a synthetic frame file")
    p.add_argument("--frames", type=int, help="number of frames M")
    p.add_argument("--noiseless", action="store_true", help="switch off all noise")
    p.add_argument("--format", choices=("binary", "csv"))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", parents=[common], help="analyze a frame file")
    p.add_argument("frame_file")
    p.add_argument("--baseline", type=float, help="dark level in volts (skips estimation)")
    p.add_argument("--guard-pixels", type=int)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("curve", parents=[common], help="closed-form P(xi) and step law")
    p.add_argument("--xi-max", type=float, default=5.0)
    p.add_argument("--samples", type=int, default=501)
    p.add_argument("--bound", help="CSV table xi,p of an upper-bound curve")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("report", parents=[common], help="summarize report.json files")
    p.add_argument("reports", nargs="+")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"slitlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SlitlabError, OSError) as exc:
        print(f"slitlab: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
