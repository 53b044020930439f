"""Command line front end.

Subcommands: analyze (scale sweep over a field), synth (phantom generator),
compare (orientation difference between two runs), resample (2x down/up),
calibrate (measure the line overshoot ratio, or refit the 3D correction).

Exit codes are stable: 0 success, 2 I/O (missing or malformed files),
3 configuration, 4 shape mismatch, 5 numerical failure. Output files are
written atomically and contain no timestamps, so a rerun with identical
arguments reproduces every byte.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .fieldio import (FileFormatError, ShapeMismatchError,
                      atomic_write_bytes, read_field, read_input_field,
                      read_mask, write_field, write_histogram_csv,
                      write_json, write_mask, write_orientation_preview)
from .scalecalc import (DEFAULT_GAMMA, DEFAULT_K, GammaParams,
                        calibrate_anis_ratio)
from .scalespace import (DEFAULT_ANIS_RATIO, DEFAULT_CORRECTION_3D, ScaleGrid,
                         Spacing, optimize_correction_3d, range_advice,
                         scale_histogram, sweep)
from .synth import (NoiseKind, PhantomKind, PhantomSpec, add_noise,
                    downscale2, generate, three_feature_scene)

_MEASURE_NAMES_3D = ("fa", "linearity", "planarity", "sphericity")


class _Parser(argparse.ArgumentParser):
    """argparse reports usage problems via error(); route them to the
    configuration exit code instead of argparse's own SystemExit(2)."""

    def error(self, message):
        raise ValueError(message)


def _add_grid_flags(cmd):
    cmd.add_argument("--gamma", type=float, default=DEFAULT_GAMMA,
                     help="derivative normalization exponent (default %(default)s)")
    cmd.add_argument("--k", type=float, default=DEFAULT_K,
                     help="ring inner/outer width ratio (default %(default)s)")
    cmd.add_argument("--sigma-min", type=float, default=1.0)
    cmd.add_argument("--sigma-max", type=float, default=14.0)
    cmd.add_argument("--sigma-step", type=float, default=1.0,
                     help="additive step (linear) or multiplicative ratio (geometric)")
    cmd.add_argument("--spacing", choices=[s.value for s in Spacing],
                     default="linear")


def _build_grid(args) -> ScaleGrid:
    if args.spacing == "linear":
        return ScaleGrid.linear(args.sigma_min, args.sigma_max, args.sigma_step)
    return ScaleGrid.geometric(args.sigma_min, args.sigma_max, args.sigma_step)


def _parse_shape(text, rank=None):
    try:
        shape = tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise ValueError(f"bad --shape {text!r}: {exc}") from exc
    if rank is not None and len(shape) != rank:
        raise ValueError(f"--shape {text!r} has {len(shape)} extents, need {rank}")
    return shape


def _stats_block(arr, mask):
    def block(values):
        return {"mean": float(np.mean(values)), "std": float(np.std(values)),
                "median": float(np.median(values))}

    return {"full": block(arr.ravel()),
            "mask": block(arr[mask]) if mask is not None else None}


def cmd_analyze(args) -> int:
    field = read_input_field(args.input)
    if field.ndim not in (2, 3):
        raise ValueError(f"analyze expects a 2D or 3D field, got rank {field.ndim}")
    mask = None
    if args.mask is not None:
        mask = read_mask(args.mask)
        if mask.shape != field.shape:
            raise ShapeMismatchError(
                f"mask shape {mask.shape} != field shape {field.shape}")
    if args.preview and field.ndim != 2:
        raise ValueError("--preview renders 2D orientation only")

    grid = _build_grid(args)
    params = GammaParams.from_gamma(args.gamma)
    correct = not args.no_correction

    # Resolve the 2D anisotropy ratio here so run.json can echo the value
    # the sweep actually used.
    anis_ratio = None
    if correct and field.ndim == 2:
        if args.gamma == DEFAULT_GAMMA and args.k == DEFAULT_K:
            anis_ratio = DEFAULT_ANIS_RATIO
        else:
            anis_ratio = calibrate_anis_ratio((10.0, 20.0, 30.0),
                                              args.gamma, args.k).mean_ratio

    result = sweep(field, grid, params=params, k=args.k,
                   post_smooth_sigma=args.post_smooth, correct=correct,
                   anis_ratio=anis_ratio, threads=args.threads)

    os.makedirs(args.outdir, exist_ok=True)
    out = lambda name: os.path.join(args.outdir, name)

    maps = {"scale": result.scale,
            "scale_corrected": result.corrected_scale,
            "width": result.width}
    if field.ndim == 2:
        maps["anisotropy"] = result.measures.anisotropy
        maps["orientation"] = result.orientation
    else:
        for name in _MEASURE_NAMES_3D:
            maps[name] = getattr(result.measures, name)
        for label, component in zip("zyx", result.orientation):
            maps[f"orientation_{label}"] = component

    stats = {}
    for name, arr in maps.items():
        write_field(out(name), arr)
        stats[name] = _stats_block(arr, mask)
    write_json(out("stats.json"), stats)

    hist = scale_histogram(result.scale, mask=mask, bins=args.bins,
                           span=(grid.sigmas[0], grid.sigmas[-1]))
    write_histogram_csv(out("histogram.csv"), hist)
    advice = range_advice(hist, grid)
    atomic_write_bytes(out("advice.txt"), (advice.value + "\n").encode("ascii"))

    if args.preview:
        write_orientation_preview(out("preview.ppm"), result.orientation,
                                  result.measures.anisotropy)

    config = {"command": "analyze", "version": __version__,
              "input": args.input, "shape": list(field.shape),
              "gamma": args.gamma, "t": params.t, "k": args.k,
              "sigma_min": args.sigma_min, "sigma_max": args.sigma_max,
              "sigma_step": args.sigma_step, "spacing": args.spacing,
              "sigmas": [float(s) for s in grid.sigmas],
              "post_smooth": args.post_smooth, "correction": correct,
              "anis_ratio": anis_ratio,
              "correction_3d": (list(DEFAULT_CORRECTION_3D)
                                if correct and field.ndim == 3 else None),
              "mask": args.mask, "bins": args.bins, "seed": args.seed,
              "threads": args.threads, "advice": advice.value}
    write_json(out("run.json"), config)
    print(f"analyze: wrote {len(maps)} maps to {args.outdir} "
          f"(advice: {advice.value})")
    return 0


def cmd_synth(args) -> int:
    default_shapes = {"rect1d": "512", "disk2d": "128,128",
                      "line2d": "128,128", "ellipse2d": "192,192",
                      "lines2d-increasing": "256,256",
                      "sphere3d": "64,64,64", "cylinder3d": "64,64,64",
                      "slab3d": "64,64,64", "scene2d": "256,256"}
    shape = _parse_shape(args.shape or default_shapes[args.kind])

    if args.kind == "scene2d":
        phantom = three_feature_scene(width=args.width, shape=shape,
                                      foreground=args.fg, background=args.bg)
    else:
        spec = PhantomSpec(kind=PhantomKind(args.kind), width=args.width,
                           shape=shape, foreground=args.fg,
                           background=args.bg, seed=args.seed,
                           aspect=args.aspect, width_max=args.width_max,
                           bands=args.bands)
        phantom = generate(spec)

    field = phantom.field
    if args.noise is not None:
        field = add_noise(field, NoiseKind(args.noise), args.noise_amplitude,
                          axis=args.noise_axis,
                          smoothing_sigma=args.noise_sigma, seed=args.seed)

    os.makedirs(args.outdir, exist_ok=True)
    out = lambda name: os.path.join(args.outdir, name)
    write_field(out("field"), field)
    write_mask(out("feature"), phantom.feature)
    write_mask(out("skeleton"), phantom.skeleton)
    if phantom.labels is not None:
        write_mask(out("labels"), phantom.labels)

    config = {"command": "synth", "version": __version__, "kind": args.kind,
              "width": args.width, "shape": list(shape), "fg": args.fg,
              "bg": args.bg, "aspect": args.aspect,
              "width_max": args.width_max, "bands": args.bands,
              "noise": args.noise, "noise_amplitude": args.noise_amplitude,
              "noise_axis": args.noise_axis, "noise_sigma": args.noise_sigma,
              "seed": args.seed}
    write_json(out("synth.json"), config)
    print(f"synth: wrote {args.kind} (shape {shape}) to {args.outdir}")
    return 0


def _load_orientation(path):
    """An analyze output directory, or a bare .f32 angle field (2D only)."""
    if os.path.isdir(path):
        angle_base = os.path.join(path, "orientation")
        if os.path.exists(angle_base + ".f32"):
            return read_field(angle_base)
        vec_base = os.path.join(path, "orientation_z")
        if os.path.exists(vec_base + ".f32"):
            return np.stack([read_field(os.path.join(path, f"orientation_{c}"))
                             for c in "zyx"])
        raise FileFormatError(f"{path}: no orientation outputs found")
    return read_field(path)


def cmd_compare(args) -> int:
    a = _load_orientation(args.a)
    b = _load_orientation(args.b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"orientation shapes differ: {a.shape} vs {b.shape}")

    if a.ndim == 2:  # angle fields: axial difference folded to [0, 90] deg
        diff = np.abs(a - b) % np.pi
        diff = np.minimum(diff, np.pi - diff)
        degrees = np.degrees(diff)
    else:  # (3, *shape) unit vector fields: acos |dot|
        dot = np.clip(np.abs((a * b).sum(axis=0)), 0.0, 1.0)
        degrees = np.degrees(np.arccos(dot))

    mask = None
    if args.mask is not None:
        mask = read_mask(args.mask)
        if mask.shape != degrees.shape:
            raise ShapeMismatchError(
                f"mask shape {mask.shape} != field shape {degrees.shape}")

    report = {"command": "compare", "a": args.a, "b": args.b,
              "unit": "degrees", "angular_difference": _stats_block(degrees, mask)}
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        write_json(args.out, report)
    return 0


def cmd_resample(args) -> int:
    field = read_input_field(args.input)
    if args.factor == "down2":
        resampled = downscale2(field)
    else:  # up2: nearest neighbor
        resampled = field
        for axis in range(field.ndim):
            resampled = np.repeat(resampled, 2, axis=axis)
    os.makedirs(args.outdir, exist_ok=True)
    write_field(os.path.join(args.outdir, "field"), resampled)
    print(f"resample: {field.shape} -> {resampled.shape}")
    return 0


def cmd_calibrate(args) -> int:
    os.makedirs(args.outdir, exist_ok=True)
    path = os.path.join(args.outdir, "calibration.csv")

    if args.mode == "anis-ratio":
        widths = tuple(float(w) for w in args.widths.split(","))
        result = calibrate_anis_ratio(widths, gamma=args.gamma, k=args.k)
        lines = ["width,ratio"]
        for width, ratio in zip(result.widths, result.ratios):
            lines.append(f"{width:.17g},{ratio:.17g}")
        lines.append(f"mean,{result.mean_ratio:.17g}")
    else:  # corr3d
        grid = _build_grid(args)
        params = GammaParams.from_gamma(args.gamma)
        fit = optimize_correction_3d(args.width, grid, params=params, k=args.k)
        names = ("c0", "c_sphericity", "c_planarity", "c_linearity")
        lines = ["coefficient,value"]
        for name, value in zip(names, fit.coefficients):
            lines.append(f"{name},{value:.17g}")
        lines.append(f"objective_start,{fit.objective_start:.17g}")
        lines.append(f"objective_end,{fit.objective_end:.17g}")
        lines.append(f"improved,{int(fit.improved)}")

    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))
    print("\n".join(lines))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tensorscale",
                     description="Feature-centered structure tensor scale "
                                 "analysis for 2D/3D fields.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    analyze = sub.add_parser("analyze", help="per-pixel scale sweep")
    analyze.add_argument("--input", required=True,
                         help=".f32 field (with JSON sidecar) or .pgm image")
    analyze.add_argument("--outdir", required=True)
    _add_grid_flags(analyze)
    analyze.add_argument("--post-smooth", type=float, default=None,
                         metavar="SIGMA", help="tensor channel smoothing")
    analyze.add_argument("--no-correction", action="store_true",
                         help="report raw argmax scales")
    analyze.add_argument("--mask", default=None,
                         help="u8 mask restricting stats and histogram")
    analyze.add_argument("--bins", type=int, default=16)
    analyze.add_argument("--seed", type=int, default=0)
    analyze.add_argument("--threads", type=int, default=1)
    analyze.add_argument("--preview", action="store_true",
                         help="write an HSV orientation preview (2D)")
    analyze.set_defaults(func=cmd_analyze)

    synth = sub.add_parser("synth", help="generate a phantom")
    synth.add_argument("--kind", required=True,
                       choices=[k.value for k in PhantomKind] + ["scene2d"])
    synth.add_argument("--outdir", required=True)
    synth.add_argument("--width", type=float, default=20.0)
    synth.add_argument("--shape", default=None,
                       help="comma-separated extents, e.g. 128,128")
    synth.add_argument("--fg", type=float, default=1.0)
    synth.add_argument("--bg", type=float, default=0.0)
    synth.add_argument("--aspect", type=float, default=3.0,
                       help="ellipse major/minor ratio")
    synth.add_argument("--width-max", type=float, default=None,
                       help="largest bar width (lines2d-increasing)")
    synth.add_argument("--bands", type=int, default=6,
                       help="band count (lines2d-increasing)")
    synth.add_argument("--noise", choices=[k.value for k in NoiseKind],
                       default=None)
    synth.add_argument("--noise-amplitude", type=float, default=0.1,
                       help="noise standard deviation")
    synth.add_argument("--noise-axis", type=int, default=0)
    synth.add_argument("--noise-sigma", type=float, default=2.0,
                       help="smoothing along --noise-axis (anisotropic)")
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(func=cmd_synth)

    compare = sub.add_parser("compare",
                             help="angular difference of two orientation maps")
    compare.add_argument("--a", required=True,
                         help="analyze outdir or 2D angle .f32")
    compare.add_argument("--b", required=True)
    compare.add_argument("--mask", default=None)
    compare.add_argument("--out", default=None, help="also write the JSON here")
    compare.set_defaults(func=cmd_compare)

    resample = sub.add_parser("resample", help="resample a field by 2x")
    resample.add_argument("--input", required=True)
    resample.add_argument("--outdir", required=True)
    resample.add_argument("--factor", choices=["down2", "up2"],
                          default="down2",
                          help="down2: 2x block mean; up2: nearest neighbor")
    resample.set_defaults(func=cmd_resample)

    calibrate = sub.add_parser("calibrate",
                               help="measure correction constants")
    calibrate.add_argument("--mode", choices=["anis-ratio", "corr3d"],
                           required=True)
    calibrate.add_argument("--outdir", required=True)
    calibrate.add_argument("--widths", default="10,20,40",
                           help="line widths for anis-ratio")
    calibrate.add_argument("--width", type=float, default=12.0,
                           help="phantom width for corr3d")
    _add_grid_flags(calibrate)
    calibrate.set_defaults(func=cmd_calibrate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ShapeMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ArithmeticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
