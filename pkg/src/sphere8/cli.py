"""``sphere8`` command line: estimate, synth, synth-sweep, ransac, diagnose.

Exit codes: 0 success, 2 usage or parse error, 3 degenerate geometry,
4 non-convergence (the report is still written, flagged).
"""
import argparse
import json
import sys
import time

import numpy as np

from . import experiments, formats
from .errors import DegenerateConfigurationError, Sphere8Error
from .geometry import ImageSize, essential_from_pose, pose_errors
from .normalization import NormalizationParams, build_n, gram_frob_sq, has_unit_rows, motion_parallax, sigma8, \
    sigma8_bound
from .optim import opt_sk, residuals
from .pipelines import parse_method, run_method
from .robust import RansacConfig, ransac_essential
from .solver8pt import build_observation_matrix, eight_point, kron_rows
from .synth import NoiseModel, SceneConfig, make_trial

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE, EXIT_NONCONVERGED = 0, 2, 3, 4
SWEEP_DEFAULTS = {
    "outliers": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7],
    "noise": [100.0, 200.0, 500.0, 1000.0],
    "npoints": [8, 20, 50, 100, 200],
}
_OUTPUT_ARGS = ("output", "truth", "pixel_output", "func")


class UsageError(Exception):
    pass


def _echo(args):
    return {"name": args.command,
            "args": {k: v for k, v in sorted(vars(args).items()) if k not in _OUTPUT_ARGS and k != "command"}}


def _emit(text, path):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _pose_dict(pose):
    return {"R": pose.R.reshape(9), "t": pose.t}


def _stats(x):
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    if not x.size:
        return None
    q = np.quantile(x, [0.0, 0.25, 0.5, 0.75, 1.0])
    return {"min": q[0], "q25": q[1], "median": q[2], "q75": q[3], "max": q[4], "mean": float(np.mean(x))}


def _load(args):
    corrs, correction = formats.read_correspondences(args.input, args.format, args.width, args.height)
    return corrs, correction


def _method_tag(args):
    tag = parse_method(args.method)
    if args.refine and args.refine != "none":
        if tag.refiner != "none":
            raise UsageError("--refine given but --method already names a refiner")
        sub = f":{args.weights}" if args.weights else ""
        tag = parse_method(f"{tag.estimator}+{args.refine}{sub}")
    return tag


# --- subcommands ----------------------------------------------------------

def cmd_estimate(args):
    corrs, correction = _load(args)
    tag = _method_tag(args)
    t0 = time.perf_counter()
    result = run_method(corrs, tag)
    wall = time.perf_counter() - t0
    E = essential_from_pose(result.pose)
    res = residuals(corrs, E)
    out = {"method": tag.label, "n": len(corrs), "max_unit_correction": correction,
           "pose": _pose_dict(result.pose), "E": E.reshape(9), "converged": bool(result.converged),
           "residuals": _stats(res)}
    if result.sk is not None:
        out["S"], out["K"] = result.sk
    if args.time:
        out["wall_time"] = wall
    _emit(formats.report_json(_echo(args), args.seed, out), args.output)
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def cmd_synth(args):
    scene = SceneConfig(n_points=args.points)
    noise = NoiseModel(kappa=args.kappa, outlier_ratio=args.outlier_ratio)
    trial = make_trial(args.trial, scene, noise, args.seed)
    if args.output is None:
        raise UsageError("synth needs --output for the bearing file")
    formats.write_bearings(args.output, trial.corrs)
    if args.pixel_output:
        if args.width is None or args.height is None:
            raise UsageError("--pixel-output needs --width and --height")
        formats.write_pixels(args.pixel_output, trial.corrs, ImageSize(args.width, args.height))
    if args.truth:
        doc = {"pose": _pose_dict(trial.pose), "baseline": trial.baseline,
               "outliers": trial.outlier_labels.astype(int), "checksum": trial.checksum()}
        _emit(formats.report_json(_echo(args), args.seed, doc), args.truth)
    return EXIT_OK


def _float_list(text, cast=float):
    try:
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse value list {text!r}") from None


def cmd_synth_sweep(args):
    methods = [m for m in args.methods.split(",") if m]
    for m in methods:
        parse_method(m)
    cast = int if args.sweep == "npoints" else float
    values = _float_list(args.values, cast) if args.values else SWEEP_DEFAULTS[args.sweep]
    common = dict(seed=args.seed, workers=args.threads, diagnostics=False)
    if args.sweep == "outliers":
        report = experiments.sweep_outliers(methods, args.trials, values, n_points=args.points,
                                            kappa=args.kappa, **common)
    elif args.sweep == "noise":
        report = experiments.sweep_noise(methods, args.trials, values, n_points=args.points,
                                         outlier_ratio=args.outlier_ratio, **common)
    else:
        report = experiments.sweep_npoints(methods, args.trials, values, kappa=args.kappa,
                                           outlier_ratio=args.outlier_ratio, **common)
    text = formats.sweep_csv(report, include_time=args.time)
    doc = report.to_dict()
    if not args.time:
        for cell in doc["cells"]:
            cell.pop("mean_time")
    if args.output is None:
        sys.stdout.write(text)
    else:
        _emit(text, args.output + ".csv")
        _emit(formats.report_json(_echo(args), args.seed, doc), args.output + ".json")
    return EXIT_OK


def cmd_ransac(args):
    cfg = RansacConfig(threshold=args.threshold, confidence=args.confidence, max_iterations=args.max_iterations,
                       seed=args.seed)
    trial = None
    if args.input:
        corrs, _ = _load(args)
    else:
        scene = SceneConfig(n_points=args.points)
        noise = NoiseModel(kappa=args.kappa, outlier_ratio=args.outlier_ratio)
        trial = make_trial(args.trial, scene, noise, args.seed)
        corrs = trial.corrs
    t0 = time.perf_counter()
    res = ransac_essential(corrs, cfg, args.final)
    wall = time.perf_counter() - t0
    out = {"final": args.final, "success": res.success, "converged": res.converged,
           "iterations_run": res.iterations_run, "samples_drawn": res.samples_drawn,
           "best_hypothesis_inliers": res.best_hypothesis_inliers,
           "inlier_count": int(np.count_nonzero(res.inlier_mask)),
           "mean_inlier_residual": res.mean_inlier_residual,
           "inlier_mask": res.inlier_mask.astype(int)}
    if res.success:
        out["pose"] = _pose_dict(res.pose)
        out["E"] = res.E.reshape(9)
    if trial is not None:
        truth = ~trial.outlier_labels
        out["recall"] = float(np.count_nonzero(res.inlier_mask & truth) / np.count_nonzero(truth))
        if res.success:
            out["rot_err"], out["tran_err"] = pose_errors(trial.pose, res.pose)
    if args.time:
        out["wall_time"] = wall
    _emit(formats.report_json(_echo(args), args.seed, out), args.output)
    if not res.success:
        return EXIT_DEGENERATE
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def _domain_report(A, identity):
    s8 = sigma8(A)
    g = gram_frob_sq(A)
    bound = "n/a"
    if identity and has_unit_rows(A):
        bound = sigma8_bound(A, gram=g)
    return {"sigma8": s8, "gram_frob_sq": g, "sigma8_bound": bound}


def cmd_diagnose(args):
    corrs, correction = _load(args)
    converged = True
    pose = None
    if args.sk.strip().lower() == "opt":
        sk = opt_sk(corrs)
        params = NormalizationParams(sk.S, sk.K)
        pose, converged = sk.pose, sk.converged
    else:
        vals = _float_list(args.sk)
        if len(vals) != 2:
            raise UsageError("--sk expects S,K or opt")
        params = NormalizationParams(*vals)
        try:
            pose = eight_point(corrs)[1]
        except DegenerateConfigurationError:
            pose = None
    n = np.array([params.S, params.S, params.K])
    out = {"n": len(corrs), "max_unit_correction": correction, "S": params.S, "K": params.K,
           "plain": _domain_report(build_observation_matrix(corrs), True),
           "normalized": _domain_report(kron_rows(corrs.q1 * n, corrs.q2 * n), params.is_identity),
           "converged": converged}
    if pose is not None:
        out["pose"] = _pose_dict(pose)
        out["plain"]["parallax_rad"] = _stats(motion_parallax(corrs, pose))
        out["normalized"]["parallax_rad"] = _stats(motion_parallax(corrs, pose, params))
    assert np.allclose(build_n(params).diagonal(), n)
    _emit(formats.report_json(_echo(args), args.seed, out), args.output)
    return EXIT_OK if converged else EXIT_NONCONVERGED


# --- parser ---------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _input_args(p, required=True):
    if required:
        p.add_argument("input", help="correspondence CSV (bearing or pixel columns)")
    else:
        p.add_argument("input", nargs="?", help="correspondence CSV; omit for a synthetic scene")
    p.add_argument("--format", choices=("auto", "bearing", "pixel"), default="auto")
    p.add_argument("--width", type=int, help="image width, pixel files only")
    p.add_argument("--height", type=int, help="image height, pixel files only")


def build_parser():
    parser = _Parser(prog="sphere8", description="Relative pose between two spherical cameras.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--output", "-o", help="output path (default: stdout)")
        p.add_argument("--time", action="store_true", help="include wall-clock fields")

    p = sub.add_parser("estimate", help="pose from a correspondence file")
    _input_args(p)
    p.add_argument("--method", default="8pa", help="method tag, e.g. 8pa, opt-sk, opt-sk+wgsm-sk")
    p.add_argument("--refine", default="none", help="refiner appended to --method")
    p.add_argument("--weights", choices=("gauss", "t"), help="weight distribution for wgsm refiners")
    common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("synth", help="write a synthetic correspondence file")
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--kappa", type=float, default=None, help="vMF concentration (default: noise-free)")
    p.add_argument("--outlier-ratio", type=float, default=0.0)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--truth", help="JSON file for the generating pose")
    p.add_argument("--pixel-output", help="also write the pixel form")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("synth-sweep", help="Monte-Carlo sweep on synthetic scenes")
    p.add_argument("--sweep", choices=tuple(SWEEP_DEFAULTS), required=True)
    p.add_argument("--methods", default="8pa,opt-sk,gsm,wgsm-sk")
    p.add_argument("--trials", type=int, default=experiments.DEFAULT_TRIALS)
    p.add_argument("--values", help="comma-separated axis values")
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--kappa", type=float, default=experiments.DEFAULT_KAPPA)
    p.add_argument("--outlier-ratio", type=float, default=0.0)
    p.add_argument("--threads", type=int, default=None, help=f"pool size (capped by {experiments.THREADS_ENV})")
    common(p)
    p.set_defaults(func=cmd_synth_sweep)

    p = sub.add_parser("ransac", help="RANSAC on a file or a synthetic scene")
    _input_args(p, required=False)
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--confidence", type=float, default=0.9)
    p.add_argument("--max-iterations", type=int, default=5000)
    p.add_argument("--final", default="8pa")
    p.add_argument("--points", type=int, default=400)
    p.add_argument("--kappa", type=float, default=experiments.DEFAULT_KAPPA)
    p.add_argument("--outlier-ratio", type=float, default=0.5)
    p.add_argument("--trial", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_ransac)

    p = sub.add_parser("diagnose", help="DLT stability diagnostics")
    _input_args(p)
    p.add_argument("--sk", default="1,1", help="S,K or opt")
    common(p)
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"sphere8: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateConfigurationError as exc:
        print(f"sphere8: degenerate configuration: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (Sphere8Error, ValueError) as exc:
        print(f"sphere8: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"sphere8: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
