"""MNIST IDX files and the train / validation / test splits.

The IDX container is big-endian: a 4-byte magic (0x00000803 for images,
0x00000801 for labels), one u32 per dimension, then raw unsigned bytes.
Files may be gzip-compressed; that is detected from the first two bytes.
"""

import gzip
import os
import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DataError
from .objective import BinaryBatch, MulticlassBatch

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
GZIP_MAGIC = b"\x1f\x8b"

FILE_NAMES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def _maybe_gunzip(data):
    if data[:2] == GZIP_MAGIC:
        return gzip.decompress(data)
    return data


def _header(data, magic, n_dims, what):
    size = 4 * (1 + n_dims)
    if len(data) < size:
        raise DataError(f"{what}: header needs {size} bytes, got {len(data)}")
    fields = struct.unpack(f">{1 + n_dims}I", data[:size])
    if fields[0] != magic:
        raise DataError(f"{what}: bad magic 0x{fields[0]:08x}, expected 0x{magic:08x}")
    return fields[1:], size


def parse_idx_images(data):
    """Decode an IDX image file into a uint8 array of shape (count, rows, cols)."""
    data = _maybe_gunzip(bytes(data))
    (count, rows, cols), offset = _header(data, IMAGE_MAGIC, 3, "image file")
    expected = count * rows * cols
    actual = len(data) - offset
    if actual != expected:
        raise DataError(
            f"image file: header declares {count}x{rows}x{cols} = {expected} pixel bytes, payload has {actual}"
        )
    return np.frombuffer(data, dtype=np.uint8, offset=offset).reshape(count, rows, cols).copy()


def parse_idx_labels(data):
    data = _maybe_gunzip(bytes(data))
    (count,), offset = _header(data, LABEL_MAGIC, 1, "label file")
    actual = len(data) - offset
    if actual != count:
        raise DataError(f"label file: header declares {count} labels, payload has {actual}")
    labels = np.frombuffer(data, dtype=np.uint8, offset=offset).copy()
    if labels.size and labels.max() > 9:
        raise DataError(f"label file: label {int(labels.max())} outside 0-9")
    return labels


def serialize_idx_images(images):
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    return struct.pack(">4I", IMAGE_MAGIC, count, rows, cols) + images.tobytes()


def serialize_idx_labels(labels):
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">2I", LABEL_MAGIC, labels.shape[0]) + labels.tobytes()


def normalize(image, scale=True):
    """Pixel bytes to float64, divided by 255 unless ``scale`` is False."""
    image = np.asarray(image, dtype=np.float64)
    return image / 255.0 if scale else image


@dataclass
class RawMnist:
    images: np.ndarray  # (count, 28, 28) uint8
    labels: np.ndarray  # (count,) uint8
    source: str  # "train-pool" or "test-pool"

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise DataError(f"{self.source}: {self.images.shape[0]} images but {self.labels.shape[0]} labels")

    def __len__(self):
        return self.labels.shape[0]


def _find(data_dir, name):
    for candidate in (name, name + ".gz", name.replace("-idx", ".idx"), name.replace("-idx", ".idx") + ".gz"):
        path = os.path.join(data_dir, candidate)
        if os.path.exists(path):
            return path
    raise DataError(f"missing MNIST file {name} (or {name}.gz) in {data_dir}")


def read_file(path):
    if not os.path.exists(path):
        raise DataError(f"missing file {path}")
    with open(path, "rb") as fh:
        return fh.read()


def load_mnist(data_dir, **paths):
    """Load the train and test pools.

    ``paths`` may override any of ``train_images``, ``train_labels``,
    ``test_images``, ``test_labels`` with an explicit file path.
    """
    resolved = {}
    for key, name in FILE_NAMES.items():
        override = paths.get(key)
        if override:
            resolved[key] = override
        else:
            if data_dir is None or not os.path.isdir(data_dir):
                raise DataError(f"data directory {data_dir!r} does not exist (needed for {name})")
            resolved[key] = _find(data_dir, name)
    train = RawMnist(
        parse_idx_images(read_file(resolved["train_images"])),
        parse_idx_labels(read_file(resolved["train_labels"])),
        "train-pool",
    )
    test = RawMnist(
        parse_idx_images(read_file(resolved["test_images"])),
        parse_idx_labels(read_file(resolved["test_labels"])),
        "test-pool",
    )
    return train, test


# --- splits --------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    train_size: int
    val_size: int
    test_size: int
    seed: int = 0
    scale: bool = True

    def __post_init__(self):
        if self.train_size < 1 or self.val_size < 0 or self.test_size < 0:
            raise ConfigError(
                f"split sizes must be train >= 1, val >= 0, test >= 0 (got {self.train_size}, {self.val_size}, {self.test_size})"
            )


def balanced_counts(total, n_classes):
    """Split ``total`` as evenly as possible; the remainder goes to the lowest classes."""
    base, extra = divmod(total, n_classes)
    return [base + (1 if k < extra else 0) for k in range(n_classes)]


def split_indices(train_labels, test_labels, classes, spec):
    """Seeded stratified index selection.

    Returns ``(train_idx, val_idx, test_idx)``; the first two index the train
    pool and are disjoint, the last indexes the test pool. Only labels in
    ``classes`` are used.
    """
    rng = np.random.default_rng(spec.seed)
    train_labels = np.asarray(train_labels)
    test_labels = np.asarray(test_labels)
    K = len(classes)
    n_train = balanced_counts(spec.train_size, K)
    n_val = balanced_counts(spec.val_size, K)

    by_class = [np.flatnonzero(train_labels == cls) for cls in classes]
    short = [
        f"class {cls}: need {n_train[k] + n_val[k]}, have {len(by_class[k])}"
        for k, cls in enumerate(classes)
        if len(by_class[k]) < n_train[k] + n_val[k]
    ]
    if short:
        raise DataError("train pool too small for the requested split (" + "; ".join(short) + ")")

    train_parts, val_parts = [], []
    for k, idx in enumerate(by_class):
        chosen = rng.permutation(idx)
        train_parts.append(chosen[: n_train[k]])
        val_parts.append(chosen[n_train[k] : n_train[k] + n_val[k]])
    train_idx = rng.permutation(np.concatenate(train_parts))
    val_idx = rng.permutation(np.concatenate(val_parts))

    pool = np.flatnonzero(np.isin(test_labels, classes))
    test_idx = rng.permutation(pool)[: spec.test_size]
    return train_idx, val_idx, test_idx


def _stack(raw, idx, scale):
    return normalize(raw.images[idx], scale)


def make_binary_split(raw_train, raw_test, pair, spec):
    """Batches for digit ``pair = (p, q)`` with p mapped to 0 and q to 1.

    The test batch holds ``min(spec.test_size, available)`` images; check
    ``len(test)`` for the actual denominator.
    """
    p, q = pair
    if p == q:
        raise ConfigError(f"pair must name two different digits, got {pair}")
    train_idx, val_idx, test_idx = split_indices(raw_train.labels, raw_test.labels, (p, q), spec)

    def batch(raw, idx):
        return BinaryBatch(_stack(raw, idx, spec.scale), (raw.labels[idx] == q).astype(np.int64))

    val = batch(raw_train, val_idx) if len(val_idx) else None
    test = batch(raw_test, test_idx) if len(test_idx) else None
    return batch(raw_train, train_idx), val, test


def make_multiclass_split(raw_train, raw_test, spec, n_classes=10):
    """Stratified batches over all classes; label k maps to one-hot index k."""
    classes = tuple(range(n_classes))
    train_idx, val_idx, test_idx = split_indices(raw_train.labels, raw_test.labels, classes, spec)

    def batch(raw, idx):
        return MulticlassBatch.from_labels(_stack(raw, idx, spec.scale), raw.labels[idx], n_classes)

    val = batch(raw_train, val_idx) if len(val_idx) else None
    test = batch(raw_test, test_idx) if len(test_idx) else None
    return batch(raw_train, train_idx), val, test
