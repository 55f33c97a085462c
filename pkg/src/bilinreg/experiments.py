"""MNIST experiment grids: single training cells and whole accuracy tables."""

import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import data, optim
from .evaluate import CSV_HEADER, CvGrid, evaluate, select_alpha
from .exceptions import ConfigError, DataError, NumericError

FORMAT_VERSION = 1

PAIRS = {"pair-8v9": (8, 9), "pair-5v8": (5, 8)}
BINARY_KINDS = ("llr", "blr")
SOFTMAX_KINDS = ("lsr", "bsr")
TRAINERS = {
    "llr": optim.train_llr,
    "blr": optim.train_blr,
    "lsr": optim.train_lsr,
    "bsr": optim.train_bsr,
}

FIGURES = {
    "pair-8v9": {
        "columns": [("llr", 0), ("blr", 1), ("blr", 2), ("blr", 3), ("blr", 4)],
        "full": (32, 128, 512, 1024, 4096, 8192),
        "desk": (32, 128, 512, 1024),
    },
    "pair-5v8": {
        "columns": [("llr", 0), ("blr", 1), ("blr", 2), ("blr", 3), ("blr", 4)],
        "full": (32, 128, 512, 1024, 4096, 8192),
        "desk": (32, 128, 512, 1024),
    },
    "multiclass": {
        "columns": [("lsr", 0), ("bsr", 1), ("bsr", 2), ("bsr", 3)],
        "full": (160, 640, 2560, 5120),
        "desk": (160, 640),
    },
}

DEFAULT_SIZES = {"pair": (2000, 2000), "multiclass": (10000, 10000)}


def parse_experiment(name):
    """``(p, q)`` for a pair experiment, ``None`` for multiclass."""
    if name == "multiclass":
        return None
    if name in PAIRS:
        return PAIRS[name]
    match = re.fullmatch(r"pair-(\d)v(\d)", name)
    if match and match.group(1) != match.group(2):
        return int(match.group(1)), int(match.group(2))
    raise ConfigError(f"unknown experiment {name!r}; use pair-8v9, pair-5v8, multiclass or pair-PvQ")


def figure_layout(experiment):
    """Columns and T sweeps of the table for ``experiment``; custom pairs reuse the 8v9 layout."""
    if experiment in FIGURES:
        return FIGURES[experiment]
    pair = parse_experiment(experiment)
    return FIGURES["multiclass" if pair is None else "pair-8v9"]


def column_name(kind, rank):
    return kind if rank == 0 else f"{kind}{rank}"


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: str
    model: str = "blr"
    rank: int = 1
    train_sizes: tuple = (1024,)
    seeds: tuple = (0,)
    grid: CvGrid = field(default_factory=CvGrid)
    train: optim.TrainConfig = field(default_factory=lambda: optim.TrainConfig(regularizer="product"))
    val_size: int = None
    test_size: int = None
    scale: bool = True

    def __post_init__(self):
        pair = parse_experiment(self.experiment)
        if self.model not in TRAINERS:
            raise ConfigError(f"unknown model {self.model!r}; choose one of {', '.join(TRAINERS)}")
        if pair is not None and self.model not in BINARY_KINDS:
            raise ConfigError(f"model {self.model} needs the multiclass experiment, not {self.experiment}")
        if pair is None and self.model not in SOFTMAX_KINDS:
            raise ConfigError(f"model {self.model} is binary and cannot run the multiclass experiment")
        if self.model in ("blr", "bsr") and self.rank < 1:
            raise ConfigError("bilinear models need rank >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        defaults = DEFAULT_SIZES["pair" if pair is not None else "multiclass"]
        if self.val_size is None:
            object.__setattr__(self, "val_size", defaults[0])
        if self.test_size is None:
            object.__setattr__(self, "test_size", defaults[1])
        if self.val_size < 1:
            raise ConfigError("validation size must be >= 1 for alpha selection")

    @property
    def pair(self):
        return parse_experiment(self.experiment)

    @property
    def effective_rank(self):
        return self.rank if self.model in ("blr", "bsr") else 0


def build_split(pools, spec, T, seed):
    train_pool, test_pool = pools
    split = data.SplitSpec(T, spec.val_size, spec.test_size, seed=seed, scale=spec.scale)
    if spec.pair is None:
        return data.make_multiclass_split(train_pool, test_pool, split)
    return data.make_binary_split(train_pool, test_pool, spec.pair, split)


def run_cell(pools, spec, T, seed):
    """Select alpha on the validation set and evaluate. Returns ``(EvalReport, model)``."""
    started = time.perf_counter()
    train, val, test = build_split(pools, spec, T, seed)
    cfg = replace(spec.train, rank=max(spec.effective_rank, 1), seed=seed)
    chosen = select_alpha(TRAINERS[spec.model], train, val, spec.grid, cfg)
    report = evaluate(spec.experiment, spec.model, chosen.model, chosen.alpha, seed, train, val, test, started)
    return report, chosen.model


def mean_row(reports):
    first = reports[0]
    return (
        f"{first.experiment},{first.model_kind},{first.rank},{first.train_size},,mean,"
        f"{np.mean([r.train_accuracy for r in reports]):.6f},"
        f"{np.mean([r.val_accuracy for r in reports]):.6f},"
        f"{np.mean([r.test_accuracy for r in reports]):.6f},"
        f"{first.test_count},{first.parameters},{sum(r.wall_time for r in reports):.3f}"
    )


# --- figure grids ----------------------------------------------------------------


_WORKER_POOLS = None


def _init_worker(data_dir, paths):
    global _WORKER_POOLS
    _WORKER_POOLS = data.load_mnist(data_dir, **paths)


def _figure_cell(args):
    spec, T, seed = args
    try:
        report, _ = run_cell(_WORKER_POOLS, spec, T, seed)
        return report, None
    except (ConfigError, DataError, NumericError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def figure_cells(experiment, train_sizes, seeds):
    """Grid cells ``(kind, rank, T, seed)`` in output order."""
    columns = figure_layout(experiment)["columns"]
    return [(kind, rank, T, seed) for seed in seeds for T in train_sizes for kind, rank in columns]


def run_figure(experiment, train_sizes, seeds, grid, train_cfg, data_dir, paths=None, workers=1, scale=True):
    """Run every cell of a figure; returns ``{(kind, rank, T, seed): (report | None, error | None)}``."""
    parse_experiment(experiment)
    paths = paths or {}
    jobs = []
    for kind, rank, T, seed in figure_cells(experiment, train_sizes, seeds):
        spec = ExperimentSpec(
            experiment, kind, max(rank, 1), (T,), (seed,), grid, train_cfg, scale=scale
        )
        jobs.append(((kind, rank, T, seed), (spec, T, seed)))

    if workers <= 1:
        _init_worker(data_dir, paths)
        results = [_figure_cell(args) for _, args in jobs]
    else:
        # fail fast on missing files before spawning workers
        data.load_mnist(data_dir, **paths)
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(data_dir, paths)) as pool:
            results = list(pool.map(_figure_cell, [args for _, args in jobs]))
    return {key: result for (key, _), result in zip(jobs, results)}


def figure_csv(experiment, train_sizes, seeds, results, metadata):
    """Accuracy table in percent: one row per (seed, T), one column per bar.

    With several seeds a ``mean`` row per T follows the per-seed rows.
    """
    columns = figure_layout(experiment)["columns"]
    names = [column_name(kind, rank) for kind, rank in columns]
    lines = [f"# bilinreg figure {experiment}", f"# format_version={FORMAT_VERSION}"]
    lines.extend(f"# {key}={value}" for key, value in metadata)
    lines.append("seed,T," + ",".join(names))

    def cell(kind, rank, T, seed):
        report, _ = results[(kind, rank, T, seed)]
        return report.test_accuracy * 100 if report is not None else float("nan")

    for seed in seeds:
        for T in train_sizes:
            values = [cell(kind, rank, T, seed) for kind, rank in columns]
            lines.append(f"{seed},{T}," + ",".join(f"{v:.2f}" for v in values))
    if len(seeds) > 1:
        for T in train_sizes:
            values = [np.mean([cell(kind, rank, T, s) for s in seeds]) for kind, rank in columns]
            lines.append(f"mean,{T}," + ",".join(f"{v:.2f}" for v in values))

    for (kind, rank, T, seed), (report, error) in results.items():
        if report is not None:
            lines.append(f"# alpha {column_name(kind, rank)} T={T} seed={seed}: {report.alpha!r}")
        else:
            lines.append(f"# error {column_name(kind, rank)} T={T} seed={seed}: {error}")
    return "\n".join(lines) + "\n"


def details_csv(results):
    lines = [CSV_HEADER]
    lines.extend(report.csv_row() for report, _ in results.values() if report is not None)
    return "\n".join(lines) + "\n"


def default_workers():
    try:
        return max(1, int(os.environ.get("BILINREG_WORKERS", "1")))
    except ValueError:
        raise ConfigError("BILINREG_WORKERS must be an integer") from None

