import os

import numpy as np
import pytest

MNIST_CANDIDATES = [
    os.environ.get("BILINREG_DATA_DIR"),
    os.path.join(os.path.dirname(__file__), "..", "data", "mnist"),
    "/root/data/mnist",
]


def find_mnist():
    for d in MNIST_CANDIDATES:
        if not d:
            continue
        if any(os.path.exists(os.path.join(d, "train-labels-idx1-ubyte" + ext)) for ext in ("", ".gz")):
            return os.path.abspath(d)
    return None


@pytest.fixture(scope="session")
def mnist_dir():
    d = find_mnist()
    if d is None:
        pytest.skip("MNIST IDX files not found; set BILINREG_DATA_DIR")
    return d


@pytest.fixture(scope="session")
def mnist_pools(mnist_dir):
    from bilinreg.data import load_mnist

    return load_mnist(mnist_dir)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_synthetic_mnist(directory, per_class_train=1100, per_class_test=60, shape=(6, 6), seed=0):
    """Learnable IDX files: each digit is a fixed random prototype plus pixel noise."""
    from bilinreg.data import serialize_idx_images, serialize_idx_labels

    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    protos = rng.uniform(0, 255, (10, *shape))

    def pool(per_class):
        labels = np.repeat(np.arange(10), per_class)
        rng.shuffle(labels)
        images = np.clip(protos[labels] + rng.normal(0, 90, (labels.size, *shape)), 0, 255)
        return images.astype(np.uint8), labels.astype(np.uint8)

    for prefix, per_class in (("train", per_class_train), ("t10k", per_class_test)):
        images, labels = pool(per_class)
        (directory / f"{prefix}-images-idx3-ubyte").write_bytes(serialize_idx_images(images))
        (directory / f"{prefix}-labels-idx1-ubyte").write_bytes(serialize_idx_labels(labels))
    return directory


@pytest.fixture(scope="session")
def synthetic_mnist(tmp_path_factory):
    return str(write_synthetic_mnist(tmp_path_factory.mktemp("synthetic-mnist")))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
