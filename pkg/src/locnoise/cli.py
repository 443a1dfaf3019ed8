"""Command-line entry point: ``locnoise {simulate,test,bandwidth,anchors,sweep,plotdata}``.

Exit codes: 0 success, 1 statistical-procedure failure (a diagnostic JSON
object is written to stderr), 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiment
from .anchors import AnchorSet, draw_anchors
from .dataset import PRESETS, Standardizer, load_csv
from .errors import LocNoiseError, ParseError, ValidationError
from .hypothesis import CONVENTIONS, MODES, test_multi
from .kernel_basis import BasisSpec, KernelSpec
from .local_mle import FitOptions, select_bandwidth_details
from .parametric import test_parametric

EXIT_OK = 0
EXIT_STATISTICAL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _noise_list(text: str) -> list:
    """``"0:0,0:0.1"`` -> CCN specs; ``"un:0.2"`` entries give uniform noise."""
    out = []
    for tok in text.split(","):
        a, _, b = tok.partition(":")
        if a.strip().lower() == "un":
            out.append({"kind": "UN", "tau": float(b)})
        else:
            out.append({"kind": "CCN", "alpha": float(a), "beta": float(b)})
    return out


def _fit_options(args) -> FitOptions:
    return FitOptions(max_iterations=args.max_iterations, grad_tolerance=args.grad_tolerance)


def _add_fit_flags(p):
    p.add_argument("--max-iterations", type=int, default=50, help="Newton iteration cap per local fit")
    p.add_argument("--grad-tolerance", type=float, default=1e-8, help="gradient sup-norm convergence tolerance")


def _add_bandwidth_flags(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--bandwidth", type=float, help="fixed kernel bandwidth h")
    g.add_argument("--bandwidth-grid", type=_floats, help="comma-separated h grid for LOO-CV selection")
    p.add_argument("--subsample", type=int, default=100, help="LOO-CV evaluation subsample size")
    p.add_argument("--seed", type=int, default=0, help="seed for the LOO-CV subsample")
    p.add_argument("--order", type=int, default=1, choices=(0, 1, 2), help="local polynomial order")


def _write(text: str, path) -> None:
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _load_dataset(path):
    if not Path(path).is_file():
        raise UsageError(f"dataset file not found: {path}")
    return load_csv(path)


def _kernel(args, ds):
    if args.bandwidth is not None:
        if not args.bandwidth > 0:
            raise UsageError("--bandwidth must be positive")
        return KernelSpec(args.bandwidth), None
    sel = select_bandwidth_details(
        ds, args.bandwidth_grid, BasisSpec(args.order, ds.d), min(args.subsample, ds.n), args.seed, _fit_options(args)
    )
    return sel.kernel, sel


# ---------------------------------------------------------------------------
# subcommands


def cmd_test(args) -> int:
    ds = _load_dataset(args.dataset)
    if not Path(args.anchors).is_file():
        raise UsageError(f"anchor file not found: {args.anchors}")
    if args.anchors.endswith(".json"):
        anchors = AnchorSet.from_json(args.anchors)
        if args.delta is not None:
            anchors = AnchorSet(anchors.points, args.delta, "relaxed" if args.delta > 0 else "strict")
    else:
        anchors = AnchorSet.from_csv(args.anchors, args.delta or 0.0, ds.d)
    if args.standardize:
        st = Standardizer.fit(ds)
        ds = st.apply(ds)
        anchors = AnchorSet(st.transform(anchors.points), anchors.delta, anchors.kind, anchors.true_posteriors)
    opts = _fit_options(args)
    if args.method == "parametric":
        report = test_parametric(ds, anchors, anchors.delta, opts, args.mode, args.variance_convention)
    else:
        kernel, sel = _kernel(args, ds)
        report = test_multi(ds, anchors, kernel, BasisSpec(args.order, ds.d), opts, args.mode, args.variance_convention)
        if sel is not None:
            report.metadata["bandwidth_selection"] = sel.to_dict()
    report.metadata["standardized"] = bool(args.standardize)
    _write(report.to_json(indent=2), args.output)
    if args.threshold is not None:
        verdict = "reject" if report.reject(args.threshold) else "fail-to-reject"
        print(f"{verdict} at {args.threshold:g} (p={report.p_value:.6g})")
    return EXIT_OK


def cmd_bandwidth(args) -> int:
    ds = _load_dataset(args.dataset)
    if args.standardize:
        ds = Standardizer.fit(ds).apply(ds)
    kernel, sel = _kernel(args, ds)
    out = sel.to_dict() if sel is not None else {"h": kernel.h}
    _write(json.dumps(out, indent=2), args.output)
    return EXIT_OK


def cmd_anchors(args) -> int:
    spec = PRESETS[args.mixture]()
    anchors = draw_anchors(spec, args.box, args.delta, args.k, args.seed)
    if args.output and args.output.endswith(".json"):
        anchors.to_json(args.output)
    elif args.output:
        anchors.to_csv(args.output)
    else:
        print(json.dumps(anchors.to_dict(), indent=2))
    return EXIT_OK


def _config(args) -> experiment.ExperimentConfig:
    if args.config:
        if not Path(args.config).is_file():
            raise UsageError(f"config file not found: {args.config}")
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from exc
    else:
        base = {}
    overrides = {
        "mixture": args.mixture,
        "input_csv": args.input_csv,
        "anchors_file": args.anchors_file,
        "noise": args.noise,
        "n_grid": args.n_grid,
        "k_grid": getattr(args, "k_grid", None),
        "delta_grid": getattr(args, "delta_grid", None),
        "runs": args.runs,
        "draws": getattr(args, "draws", None),
        "bandwidth": getattr(args, "bandwidth", None),
        "bandwidth_grid": getattr(args, "bandwidth_grid", None),
        "method": getattr(args, "method", None),
        "seed": args.seed,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if args.input_csv is not None and args.mixture is None:
        base["mixture"] = None
    return experiment.ExperimentConfig.from_dict(base)


def cmd_simulate(args) -> int:
    manifest = experiment.simulate(_config(args), args.output_dir)
    print(json.dumps({"files": len(manifest["files"]), "output_dir": str(args.output_dir)}))
    return EXIT_OK


def cmd_sweep(args) -> int:
    summary = experiment.sweep(_config(args), args.output_dir, args.workers)
    print(json.dumps({"cells": len(summary["cells"]), "output_dir": str(args.output_dir)}))
    return EXIT_OK


def cmd_plotdata(args) -> int:
    if not Path(args.results).is_file():
        raise UsageError(f"results file not found: {args.results}")
    n = experiment.write_plotdata(args.results, args.output)
    print(json.dumps({"records": n, "output": str(args.output)}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_experiment_flags(p, sweep: bool):
    p.add_argument("--config", help="JSON experiment config; flags below override its keys")
    p.add_argument("--mixture", choices=sorted(PRESETS), help="synthetic mixture preset")
    p.add_argument("--input-csv", help="sample training sets from this CSV instead of a mixture")
    p.add_argument("--anchors-file", help="anchor CSV/JSON to draw k-subsets from instead of the mixture")
    p.add_argument("--noise", type=_noise_list, help="noise grid, e.g. '0:0,0:0.1' or 'un:0.2'")
    p.add_argument("--n-grid", type=_ints, help="comma-separated sample sizes")
    p.add_argument("--runs", type=int, help="dataset draws per N")
    p.add_argument("--seed", type=int, help="root seed")
    p.add_argument("--output-dir", required=True, help="directory for CSVs and manifest")
    if sweep:
        p.add_argument("--k-grid", type=_ints, help="comma-separated anchor counts")
        p.add_argument("--delta-grid", type=_floats, help="comma-separated anchor relaxations")
        p.add_argument("--draws", type=int, help="anchor-set draws per trained model and cell")
        g = p.add_mutually_exclusive_group()
        g.add_argument("--bandwidth", type=float, help="fixed bandwidth instead of LOO-CV")
        g.add_argument("--bandwidth-grid", type=_floats, help="LOO-CV bandwidth grid")
        p.add_argument("--method", choices=("nonparametric", "parametric", "both"), help="which test(s) to run")
        p.add_argument("--workers", type=int, help=f"worker processes (default: ${experiment.WORKERS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="locnoise", description="Tests for class-conditional label noise.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write clean and noisy training CSVs")
    _add_experiment_flags(p, sweep=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("test", help="run the label-noise test on a dataset")
    p.add_argument("dataset", help="training CSV (x1..xd,y)")
    p.add_argument("anchors", help="anchor CSV (x1..xd[,eta]) or JSON")
    p.add_argument("--method", choices=("nonparametric", "parametric"), default="nonparametric",
                   help="local likelihood test or global logistic baseline")
    p.add_argument("--delta", type=float, help="anchor relaxation; > 0 treats anchors as relaxed")
    p.add_argument("--mode", choices=MODES, default="exact", help="'approx' ignores the relaxation correction")
    p.add_argument("--variance-convention", choices=CONVENTIONS, default="paper",
                   help="constant in the relaxation variance term")
    p.add_argument("--standardize", action="store_true", help="z-score features before fitting")
    p.add_argument("--threshold", type=float, help="also print reject / fail-to-reject at this level")
    p.add_argument("--output", help="write the report JSON here instead of stdout")
    _add_bandwidth_flags(p)
    _add_fit_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("bandwidth", help="select h by subsampled LOO-CV")
    p.add_argument("dataset", help="training CSV (x1..xd,y)")
    p.add_argument("--standardize", action="store_true", help="z-score features before fitting")
    p.add_argument("--output", help="write the selection JSON here instead of stdout")
    _add_bandwidth_flags(p)
    _add_fit_flags(p)
    p.set_defaults(func=cmd_bandwidth)

    p = sub.add_parser("anchors", help="draw anchors from a synthetic mixture")
    p.add_argument("--mixture", choices=sorted(PRESETS), default="symmetric_xor", help="synthetic mixture preset")
    p.add_argument("-k", type=int, default=16, help="number of anchors")
    p.add_argument("--delta", type=float, default=0.0, help="0 for strict anchors, > 0 for relaxed")
    p.add_argument("--box", type=_floats, default=[-4.0, 4.0], help="lo,hi of the search box")
    p.add_argument("--seed", type=int, default=0, help="anchor sampling seed")
    p.add_argument("--output", help=".csv or .json path (default: JSON to stdout)")
    p.set_defaults(func=cmd_anchors)

    p = sub.add_parser("sweep", help="run the full experiment grid")
    _add_experiment_flags(p, sweep=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plotdata", help="reshape a results CSV for box plots")
    p.add_argument("results", help="results.csv written by sweep")
    p.add_argument("--output", required=True, help="long-format CSV with one row per record")
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, ParseError, ValidationError, FileNotFoundError, PermissionError) as exc:
        print(f"locnoise: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LocNoiseError as exc:
        diag = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("anchor_index", "anchor", "diagnostics", "terms", "condition_number"):
            if hasattr(exc, attr):
                diag[attr] = getattr(exc, attr)
        print(json.dumps(diag, default=str), file=sys.stderr)
        return EXIT_STATISTICAL


if __name__ == "__main__":
    sys.exit(main())
