"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 parse or validation error,
3 segment left unclassified.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import classify
from .errors import InvalidInputError, ParseError, ValidationError
from .fitting import fit_model
from .io import (Config, load_config, load_params, load_profile, load_segment, save_params, save_report,
                 save_segment, segment_to_csv, write_table)
from .models import ConstraintKind, canonicalize
from .synthetic import MotionProfile, generate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_UNCLASSIFIED = 0, 1, 2, 3

log = logging.getLogger("constraint_inference")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _kind(text):
    try:
        return ConstraintKind.parse(text)
    except InvalidInputError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _fmt_vec(v):
    return "(" + ", ".join(f"{x:.6g}" for x in np.ravel(v)) + ")"


def _print_geometry(geo, out):
    for key, val in {**geo.points, **geo.directions}.items():
        text = _fmt_vec(val) if np.ndim(val) else f"{float(val):.6g}"
        print(f"  {key:12s} {text}", file=out)


def _config(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else Config()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "starts", None) is not None:
        overrides["n_starts"] = args.starts
    if overrides:
        try:
            cfg.fit = dataclasses.replace(cfg.fit, **overrides)
        except InvalidInputError as exc:
            raise UsageError(str(exc)) from None
    if getattr(args, "min_fraction", None) is not None:
        if not 0.0 <= args.min_fraction <= 1.0:
            raise UsageError("--min-fraction must lie in [0, 1]")
        cfg.min_fraction = args.min_fraction
    return cfg


def _companion(path, suffix):
    path = Path(path)
    return path.with_name(path.stem + suffix)


def cmd_classify(args, out):
    from .plotting import plot_error_traces, plot_votes
    from .studies import error_traces

    cfg = _config(args)
    seg = load_segment(args.segment, args.format)
    for w in seg.warnings:
        log.warning("%s", w)
    report = classify(seg, cfg.fit, cfg.thresholds, use_wrench=not args.kinematics_only,
                      min_fraction=cfg.min_fraction)
    print(f"winner: {report.label} (eligible fraction {report.eligible_fraction:.3f})", file=out)
    if report.winner is not None:
        _print_geometry(canonicalize(report.winner_params), out)
    print(f"{'model':22s} {'eligible':>8s} {'pos':>5s} {'force':>5s} {'moment':>6s}  fit", file=out)
    for kind in report.ranking():
        v = report.votes[kind]
        fit = report.fits[kind]
        status = "ok" if v.valid else ("degenerate" if fit.degenerate else "unconverged")
        print(f"{kind.value:22s} {v.eligible_count:8d} {int(v.L_k.sum()):5d} {int(v.L_f.sum()):5d} "
              f"{int(v.L_n.sum()):6d}  {status}", file=out)
    if args.report:
        save_report(report, args.report, seg, args.segment, cfg.fit)
        traces = {k.label: error_traces(seg, f.params) for k, f in report.fits.items()}
        header = ["t"] + [f"{k.value}_{key}" for k in report.fits for key in ("kinematic_error", "f_error", "n_error")]
        cols = [seg.t] + [traces[k.label][key] for k in report.fits
                          for key in ("kinematic_error", "f_error", "n_error")]
        write_table(_companion(args.report, ".traces.csv"), header, np.column_stack(cols).tolist())
        plot_error_traces(traces, _companion(args.report, ".traces.png"),
                          {k.label: cfg.thresholds[k] for k in report.fits}, title=f"winner: {report.label}")
        plot_votes(report, _companion(args.report, ".votes.png"))
        print(f"report written to {args.report}", file=out)
    return EXIT_OK if report.winner is not None else EXIT_UNCLASSIFIED


def cmd_fit(args, out):
    cfg = _config(args)
    seg = load_segment(args.segment, args.format)
    res = fit_model(args.model, seg, cfg.fit)
    print(f"model:          {res.kind.value}", file=out)
    print(f"objective:      {res.objective:.6e}", file=out)
    print(f"converged:      {res.converged}", file=out)
    print(f"degenerate:     {res.degenerate}", file=out)
    print(f"iterations:     {res.iterations} over {res.starts_tried} start(s)", file=out)
    print(f"kinematic err:  mean {res.mean_kinematic_error:.6e} m, "
          f"max {float(np.max(res.per_sample_kinematic_error)):.6e} m", file=out)
    for msg in res.messages:
        print(f"note:           {msg}", file=out)
    print("parameters:", file=out)
    for name, val in res.params.as_dict().items():
        print(f"  {name:12s} {_fmt_vec(val)}", file=out)
    print("geometry:", file=out)
    _print_geometry(res.geometry, out)
    if args.out:
        save_params(res.params, args.out)
    return EXIT_OK


def cmd_generate(args, out):
    params = load_params(args.params, args.model)
    if args.profile:
        profile = load_profile(args.profile)
    else:
        profile = MotionProfile()
    if args.seed is not None:
        profile = profile.replace(seed=args.seed)
    seg = generate(args.model, params, profile, with_noise=not args.noiseless)
    if seg.degenerate:
        log.warning("profile excites no motion: the segment is degenerate")
    if args.out:
        save_segment(seg, args.out, args.format, include_twist=not args.no_twist)
        print(f"{len(seg)} samples written to {args.out}", file=out)
    elif args.format == "json":
        raise UsageError("JSON output needs --out")
    else:
        out.write(segment_to_csv(seg, include_twist=not args.no_twist))
    return EXIT_OK


def cmd_errors(args, out):
    from .plotting import plot_error_traces
    from .studies import error_traces

    cfg = _config(args)
    seg = load_segment(args.segment, args.format)
    params = load_params(args.params, args.model)
    traces = error_traces(seg, params)
    header = ["t", "kinematic_error", "f_error", "n_error"]
    rows = np.column_stack([traces[k] for k in header]).tolist()
    if args.out:
        write_table(args.out, header, rows)
        plot_error_traces({params.kind.label: traces}, _companion(args.out, ".png"),
                          {params.kind.label: cfg.thresholds[params.kind]}, title=params.kind.label)
        print(f"{len(rows)} rows written to {args.out}", file=out)
    else:
        write_table(out, header, rows)
    return EXIT_OK


def cmd_bench_sampling(args, out):
    from .plotting import plot_sampling_study
    from .studies import sampling_study

    cfg = _config(args)
    seg = load_segment(args.segment, args.format)
    counts = None
    if args.counts:
        try:
            counts = [int(c) for c in args.counts.split(",")]
        except ValueError:
            raise UsageError("--counts expects comma-separated integers") from None
    study = sampling_study(seg, args.model, counts, n_seeds=args.seeds, seed=cfg.fit.seed, cfg=cfg.fit)
    header = ["samples", "contiguous_median", "random_median", "contiguous_q25", "contiguous_q75",
              "random_q25", "random_q75"]
    cq = np.percentile(study.contiguous, [25, 75], axis=0)
    rq = np.percentile(study.random, [25, 75], axis=0)
    rows = [[int(n), float(c), float(r), float(cq[0][j]), float(cq[1][j]), float(rq[0][j]), float(rq[1][j])]
            for j, (n, c, r) in enumerate(study.rows())]
    if args.out:
        write_table(args.out, header, rows)
        plot_sampling_study(study, _companion(args.out, ".png"), title=study.kind.label)
        print(f"{len(rows)} rows written to {args.out}", file=out)
    else:
        write_table(out, header, rows)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="constraint-inference", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def segment_args(sp):
        sp.add_argument("segment", help="segment file (.csv or .json)")
        sp.add_argument("--format", choices=("csv", "json"), help="override format detection")
        sp.add_argument("--config", help="JSON config with thresholds, fit settings and profiles")

    def fit_args(sp):
        sp.add_argument("--seed", type=int, help="multi-start seed")
        sp.add_argument("--starts", type=int, help="number of optimizer starts")

    c = sub.add_parser("classify", help="fit all models and vote for the active constraint")
    segment_args(c)
    fit_args(c)
    c.add_argument("--report", help="write a JSON report (plus traces CSV and figures next to it)")
    c.add_argument("--kinematics-only", action="store_true", help="ignore force and moment criteria")
    c.add_argument("--min-fraction", type=float, help="minimum eligible fraction for a winner")
    c.set_defaults(func=cmd_classify)

    f = sub.add_parser("fit", help="fit one model and print diagnostics")
    segment_args(f)
    fit_args(f)
    f.add_argument("--model", type=_kind, required=True)
    f.add_argument("--out", help="write fitted parameters as JSON")
    f.set_defaults(func=cmd_fit)

    g = sub.add_parser("generate", help="synthesize a segment")
    g.add_argument("--model", type=_kind, required=True)
    g.add_argument("--params", required=True, help="parameter JSON file or preset name")
    g.add_argument("--profile", help="motion profile JSON (default profile if omitted)")
    g.add_argument("--seed", type=int, help="override the profile seed")
    g.add_argument("--noiseless", action="store_true", help="skip the noise model")
    g.add_argument("--no-twist", action="store_true", help="omit twist columns from the output")
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--out", help="output file (CSV to stdout if omitted)")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("errors", help="per-sample error traces of one model")
    segment_args(e)
    e.add_argument("--model", type=_kind, required=True)
    e.add_argument("--params", required=True, help="parameter JSON file or preset name")
    e.add_argument("--out", help="CSV output; a PNG is written next to it")
    e.set_defaults(func=cmd_errors)

    b = sub.add_parser("bench-sampling", help="contiguous vs random sample-count study")
    segment_args(b)
    fit_args(b)
    b.add_argument("--model", type=_kind, default=ConstraintKind.POINT_ON_PLANE)
    b.add_argument("--seeds", type=int, default=20)
    b.add_argument("--counts", help="comma-separated sample counts (default: doubling grid)")
    b.add_argument("--out", help="CSV output; a PNG is written next to it")
    b.set_defaults(func=cmd_bench_sampling)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ValidationError, InvalidInputError) as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"{parser.prog}: error: {exc.strerror}: {exc.filename}", file=sys.stderr)
        return EXIT_DATA
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
