"""Command-line entry point: ``bilinreg {train,figure,gradcheck,equivalence,inspect}``.

Exit codes: 0 success, 1 invalid arguments or configuration, 2 missing or
malformed data, 3 numeric failure (non-finite objective, failed check).
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import experiments, gradcheck
from ._accel import backend_name
from .evaluate import CSV_HEADER, CvGrid, parameter_count
from .exceptions import ConfigError, DataError, NumericError
from .model import (
    BilinearModel,
    BilinearSoftmaxModel,
    LinearModel,
    LinearSoftmaxModel,
    batch_scores,
    decompose_w,
    load_model,
    reconstruct_w,
    save_model,
)
from .optim import LineSearchParams, TrainConfig

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
GRADCHECK_THRESHOLD = 1e-5
EQUIVALENCE_THRESHOLD = 1e-9


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_data_args(p):
    p.add_argument("-d", "--data-dir", default=os.environ.get("BILINREG_DATA_DIR"),
                   help="directory holding the MNIST IDX files (env BILINREG_DATA_DIR)")
    for key, name in (("train-images", "train-images-idx3-ubyte"), ("train-labels", "train-labels-idx1-ubyte"),
                      ("test-images", "t10k-images-idx3-ubyte"), ("test-labels", "t10k-labels-idx1-ubyte")):
        p.add_argument(f"--{key}", default=None, help=f"explicit path overriding <data-dir>/{name}[.gz]")


def _add_training_args(p):
    p.add_argument("-a", "--alphas", type=_float_list, default=CvGrid().alphas,
                   help="alpha grid for validation selection (comma-separated)")
    p.add_argument("-r", "--regularizer", choices=("sum", "product"), default="product",
                   help="regularizer for bilinear models; linear models always use ||W||^2/2")
    p.add_argument("-i", "--outer-sweeps", type=int, default=10, help="outer alternating sweeps i_max")
    p.add_argument("--inner-tol", type=float, default=1e-6, help="relative objective decrease ending an inner loop")
    p.add_argument("--inner-max-iters", type=int, default=100, help="iteration cap per inner loop")
    p.add_argument("--initial-step", type=float, default=1.0, help="first line-search step")
    p.add_argument("--raw-pixels", action="store_true", help="keep pixels in 0-255 instead of scaling to [0, 1]")
    p.add_argument("--val-size", type=int, default=None, help="validation images (default 2000 pairs, 10000 multiclass)")
    p.add_argument("--test-size", type=int, default=None, help="test images (default 2000 pairs, 10000 multiclass)")


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="bilinreg", description="Bilinear logistic / softmax regression on MNIST.",
                     formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one configuration and report its accuracy", formatter_class=fmt)
    p.add_argument("-e", "--experiment", required=True, help="pair-8v9, pair-5v8, pair-PvQ or multiclass")
    p.add_argument("-m", "--model", required=True, choices=("llr", "blr", "lsr", "bsr"))
    p.add_argument("-L", "--rank", type=int, default=1, help="rank L of bilinear models")
    p.add_argument("-T", "--train-size", type=int, default=1024, help="training images")
    p.add_argument("-s", "--seed", type=int, default=0, help="seed for the split and initialisation")
    p.add_argument("--seeds", type=_int_list, default=None, help="several seeds; adds a mean row")
    p.add_argument("-o", "--model-out", default=None, help="write the trained model here")
    p.add_argument("--results", default=None, help="append the CSV row(s) to this file")
    _add_data_args(p)
    _add_training_args(p)

    p = sub.add_parser("figure", help="reproduce one accuracy table as CSV", formatter_class=fmt)
    p.add_argument("-e", "--experiment", required=True, help="pair-8v9, pair-5v8, pair-PvQ or multiclass")
    scale = p.add_mutually_exclusive_group()
    scale.add_argument("--desk-scale", dest="full", action="store_false", help="short T sweep (default)")
    scale.add_argument("--full", dest="full", action="store_true", help="the complete T sweep")
    p.set_defaults(full=False)
    p.add_argument("--train-sizes", type=_int_list, default=None, help="explicit T sweep overriding the presets")
    p.add_argument("-s", "--seeds", type=_int_list, default=(0,), help="comma-separated seeds")
    p.add_argument("-o", "--output", default=None, help="CSV path (stdout when omitted)")
    p.add_argument("--details", default=None, help="also write per-cell report rows (with timings) here")
    p.add_argument("-w", "--workers", type=int, default=None, help="worker processes (env BILINREG_WORKERS, default 1)")
    _add_data_args(p)
    _add_training_args(p)

    p = sub.add_parser("gradcheck", help="finite-difference check of every gradient", formatter_class=fmt)
    p.add_argument("-M", type=int, default=5, help="image rows")
    p.add_argument("-N", type=int, default=5, help="image columns")
    p.add_argument("-L", "--rank", type=int, default=2)
    p.add_argument("-T", "--samples", type=int, default=10)
    p.add_argument("-K", "--classes", type=int, default=3)
    p.add_argument("-s", "--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-6, help="finite-difference step h")
    p.add_argument("--corrupt", default=None, help=argparse.SUPPRESS)

    p = sub.add_parser("equivalence", help="check linear <-> bilinear equivalence via SVD", formatter_class=fmt)
    p.add_argument("-s", "--seed", type=int, default=0)
    p.add_argument("-n", "--samples", type=int, default=100, help="random images per shape")

    p = sub.add_parser("inspect", help="describe a saved model file", formatter_class=fmt)
    p.add_argument("path")
    return parser


def _train_config(args, seed=0, rank=1):
    return TrainConfig(
        rank=rank,
        regularizer=args.regularizer,
        outer_sweeps=args.outer_sweeps,
        inner_tol=args.inner_tol,
        inner_max_iters=args.inner_max_iters,
        seed=seed,
        line_search=LineSearchParams(initial_step=args.initial_step),
    )


def _paths(args):
    return {
        "train_images": args.train_images,
        "train_labels": args.train_labels,
        "test_images": args.test_images,
        "test_labels": args.test_labels,
    }


def _model_path(template, seed, several):
    if not several:
        return template
    stem, ext = os.path.splitext(template)
    return f"{stem}.seed{seed}{ext}"


def cmd_train(args, out):
    seeds = args.seeds or (args.seed,)
    spec = experiments.ExperimentSpec(
        args.experiment, args.model, args.rank, (args.train_size,), seeds, CvGrid(args.alphas),
        _train_config(args, rank=args.rank), args.val_size, args.test_size, not args.raw_pixels,
    )
    if args.data_dir is None and not all(_paths(args).values()):
        raise DataError("no data directory given (use --data-dir or BILINREG_DATA_DIR)")
    from .data import load_mnist

    pools = load_mnist(args.data_dir, **_paths(args))
    rows = []
    reports = []
    for seed in seeds:
        report, model = experiments.run_cell(pools, spec, args.train_size, seed)
        reports.append(report)
        rows.append(report.csv_row())
        if args.model_out:
            save_model(model, _model_path(args.model_out, seed, len(seeds) > 1))
    if len(seeds) > 1:
        rows.append(experiments.mean_row(reports))

    out.write(CSV_HEADER + "\n")
    for row in rows:
        out.write(row + "\n")
    if args.results:
        fresh = not os.path.exists(args.results) or os.path.getsize(args.results) == 0
        with open(args.results, "a", encoding="utf-8") as fh:
            if fresh:
                fh.write(CSV_HEADER + "\n")
            fh.writelines(row + "\n" for row in rows)
    return EXIT_OK


def cmd_figure(args, out):
    experiments.parse_experiment(args.experiment)
    layout = experiments.figure_layout(args.experiment)
    sizes = args.train_sizes or (layout["full"] if args.full else layout["desk"])
    seeds = args.seeds
    if not seeds:
        raise ConfigError("at least one seed is required")
    grid = CvGrid(args.alphas)
    cfg = _train_config(args)
    workers = args.workers if args.workers is not None else experiments.default_workers()
    if args.data_dir is None and not all(_paths(args).values()):
        raise DataError("no data directory given (use --data-dir or BILINREG_DATA_DIR)")
    if args.val_size is not None or args.test_size is not None:
        raise ConfigError("figure uses the fixed validation/test sizes of each experiment")

    results = experiments.run_figure(
        args.experiment, sizes, seeds, grid, cfg, args.data_dir, _paths(args), workers, not args.raw_pixels
    )
    metadata = [
        ("train_sizes", ",".join(map(str, sizes))),
        ("seeds", ",".join(map(str, seeds))),
        ("alphas", ",".join(repr(a) for a in grid.alphas)),
        ("regularizer", args.regularizer),
        ("outer_sweeps", args.outer_sweeps),
        ("inner_tol", repr(args.inner_tol)),
        ("inner_max_iters", args.inner_max_iters),
        ("initial_step", repr(args.initial_step)),
        ("pixels", "raw" if args.raw_pixels else "scaled"),
    ]
    text = experiments.figure_csv(args.experiment, sizes, seeds, results, metadata)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)
    if args.details:
        with open(args.details, "w", encoding="utf-8", newline="") as fh:
            fh.write(experiments.details_csv(results))
    failed = [key for key, (report, _) in results.items() if report is None]
    if failed:
        print(f"{len(failed)} of {len(results)} cells failed; see '# error' lines", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_gradcheck(args, out):
    worst = 0.0
    failures = 0
    for name, err in gradcheck.gradient_checks(
        args.M, args.N, args.rank, args.samples, args.classes, args.seed, h=args.step, corrupt=args.corrupt
    ):
        ok = err <= GRADCHECK_THRESHOLD
        failures += not ok
        worst = max(worst, err)
        out.write(f"{name:<40s} {err:.3e} {'ok' if ok else 'FAIL'}\n")
    out.write(f"max relative error {worst:.3e} (threshold {GRADCHECK_THRESHOLD:g})\n")
    return EXIT_OK if failures == 0 else EXIT_NUMERIC


def cmd_equivalence(args, out):
    rng = np.random.default_rng(args.seed)
    failed = False
    for M, N in ((5, 7), (28, 28)):
        W = rng.standard_normal((M, N))
        L = min(M, N)
        bilinear = decompose_w(LinearModel(W), L)
        X = rng.standard_normal((args.samples, M, N))
        gap = float(np.max(np.abs(batch_scores(bilinear, X) - batch_scores(LinearModel(W), X))))
        ok = gap <= EQUIVALENCE_THRESHOLD
        failed |= not ok
        out.write(f"{M}x{N} L={L}: max |z_blr - z_llr| = {gap:.3e} {'ok' if ok else 'FAIL'}\n")

    W1 = np.outer(rng.standard_normal(6), rng.standard_normal(4))
    rec = reconstruct_w(decompose_w(LinearModel(W1), 1)).W
    gap = float(np.linalg.norm(rec - W1) / np.linalg.norm(W1))
    failed |= gap > EQUIVALENCE_THRESHOLD
    out.write(f"rank-1 6x4 L=1: relative reconstruction error = {gap:.3e}\n")

    W = rng.standard_normal((5, 7))
    for L in range(1, 5):
        rec = reconstruct_w(decompose_w(LinearModel(W), L)).W
        rel = float(np.linalg.norm(rec - W) / np.linalg.norm(W))
        out.write(f"5x7 L={L} (below full rank): relative reconstruction gap = {rel:.3e}\n")
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_inspect(args, out):
    if not os.path.exists(args.path):
        raise DataError(f"missing model file {args.path}")
    m = load_model(args.path)
    M, N = m.shape
    out.write(f"kind: {type(m).__name__}\nshape: {M}x{N}\n")
    if isinstance(m, (BilinearModel, BilinearSoftmaxModel)):
        out.write(f"rank: {m.rank}\n")
    if isinstance(m, (LinearSoftmaxModel, BilinearSoftmaxModel)):
        out.write(f"classes: {m.n_classes}\n")
    out.write(f"parameters: {parameter_count(m)}\n")
    if isinstance(m, LinearModel):
        out.write(f"||W||_F: {np.linalg.norm(m.W):.6g}\n")
    elif isinstance(m, LinearSoftmaxModel):
        for k, Wk in enumerate(m.W):
            out.write(f"class {k} ||W||_F: {np.linalg.norm(Wk):.6g}\n")
    else:
        blocks = [m] if isinstance(m, BilinearModel) else [m.class_model(k) for k in range(m.n_classes)]
        for k, b in enumerate(blocks):
            prefix = "" if len(blocks) == 1 else f"class {k} "
            a_norms = " ".join(f"{v:.4g}" for v in np.linalg.norm(b.A, axis=0))
            b_norms = " ".join(f"{v:.4g}" for v in np.linalg.norm(b.B, axis=0))
            out.write(f"{prefix}||a_l||: {a_norms}\n{prefix}||b_l||: {b_norms}\n")
            out.write(f"{prefix}||sum_l a_l b_l^T||_F: {np.linalg.norm(reconstruct_w(b).W):.6g}\n")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "figure": cmd_figure,
    "gradcheck": cmd_gradcheck,
    "equivalence": cmd_equivalence,
    "inspect": cmd_inspect,
}


def main(argv=None, out=None):
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger(__name__).debug("kernel backend: %s", backend_name())
    try:
        return COMMANDS[args.command](args, out)
    except ConfigError as exc:
        print(f"bilinreg: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"bilinreg: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"bilinreg: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
