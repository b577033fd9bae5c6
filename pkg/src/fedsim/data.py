"""Dataset loading and generation.

A dataset is a LabeledSet: a float64 feature matrix with values in [0, 1]
plus an int64 label vector. Loaders exist for the two raw binary formats
below; a synthetic Gaussian-blob generator covers fast, download-free runs.

MNIST IDX (big-endian):
    image file: magic 0x00000803, then count, rows, cols (uint32 each),
                then count*rows*cols unsigned bytes
    label file: magic 0x00000801, then count (uint32), then count bytes

CIFAR binary:
    cifar10:  records of 1 label byte + 3072 pixel bytes (R, G, B planes),
              files data_batch_1.bin .. data_batch_5.bin and test_batch.bin
    cifar100: records of 1 coarse + 1 fine label byte + 3072 pixel bytes,
              files train.bin and test.bin; the fine label is used

Pixels are scaled by 1/255 and flattened; no other normalization is applied.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    CountMismatch,
    DatasetMissing,
    DimensionMismatch,
    InvalidParam,
    TruncatedFile,
    UnknownVariant,
)

_IMAGE_MAGIC = 0x00000803
_LABEL_MAGIC = 0x00000801

_MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}

_CIFAR10_TRAIN = [f"data_batch_{i}.bin" for i in range(1, 6)]
_CIFAR10_TEST = ["test_batch.bin"]


@dataclass
class LabeledSet:
    """Immutable-by-convention collection of labeled feature vectors."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DimensionMismatch("features must be a 2-D array (samples, dims)")
        if self.labels.ndim != 1 or self.labels.shape[0] != self.features.shape[0]:
            raise DimensionMismatch("labels must be 1-D and match the sample count")
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        if len(self.labels) and (
            self.labels.min() < 0 or self.labels.max() >= self.num_classes
        ):
            raise ValueError("labels must lie in [0, num_classes)")

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.features.shape[1])

    def subset(self, indices) -> "LabeledSet":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledSet(self.features[idx], self.labels[idx], self.num_classes)


def concat_sets(a: LabeledSet, b: LabeledSet) -> LabeledSet:
    if a.input_dim != b.input_dim:
        raise DimensionMismatch("feature widths differ")
    if a.num_classes != b.num_classes:
        raise DimensionMismatch("class counts differ")
    return LabeledSet(
        np.concatenate([a.features, b.features]),
        np.concatenate([a.labels, b.labels]),
        a.num_classes,
    )


@dataclass(frozen=True)
class DatasetMeta:
    name: str
    num_classes: int
    input_dim: int
    train_size: int
    test_size: int


def class_histogram(samples, num_classes: int) -> np.ndarray:
    """Per-class counts (int64 vector of length `num_classes`)."""
    labels = samples.labels if isinstance(samples, LabeledSet) else np.asarray(samples)
    labels = labels.astype(np.int64)
    if len(labels) and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError("labels must lie in [0, num_classes)")
    return np.bincount(labels, minlength=num_classes).astype(np.int64)


# ---------------------------------------------------------------------------
# MNIST IDX


def _read_idx_images(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < 16:
        raise TruncatedFile(f"{path.name}: header needs 16 bytes, file has {len(raw)}")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != _IMAGE_MAGIC:
        raise BadMagic(f"{path.name}: magic {magic:#010x}, expected {_IMAGE_MAGIC:#010x}")
    needed = 16 + count * rows * cols
    if len(raw) < needed:
        raise TruncatedFile(f"{path.name}: expected {needed} bytes, found {len(raw)}")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=count * rows * cols, offset=16)
    return pixels.reshape(count, rows * cols)


def _read_idx_labels(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < 8:
        raise TruncatedFile(f"{path.name}: header needs 8 bytes, file has {len(raw)}")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != _LABEL_MAGIC:
        raise BadMagic(f"{path.name}: magic {magic:#010x}, expected {_LABEL_MAGIC:#010x}")
    if len(raw) < 8 + count:
        raise TruncatedFile(f"{path.name}: expected {8 + count} bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=8)


def load_mnist(dir_path) -> tuple[LabeledSet, LabeledSet, DatasetMeta]:
    """Load the four canonical MNIST IDX files from `dir_path`."""
    base = Path(dir_path)
    paths = {key: base / name for key, name in _MNIST_FILES.items()}
    missing = [p.name for p in paths.values() if not p.is_file()]
    if missing:
        raise DatasetMissing(f"missing MNIST files in {base}: {', '.join(missing)}")

    def _split(images_key: str, labels_key: str) -> LabeledSet:
        images = _read_idx_images(paths[images_key])
        labels = _read_idx_labels(paths[labels_key])
        if images.shape[0] != labels.shape[0]:
            raise CountMismatch(
                f"{images.shape[0]} images vs {labels.shape[0]} labels"
            )
        return LabeledSet(images.astype(np.float64) / 255.0, labels, num_classes=10)

    train = _split("train_images", "train_labels")
    test = _split("test_images", "test_labels")
    meta = DatasetMeta("mnist", 10, train.input_dim, len(train), len(test))
    return train, test, meta


# ---------------------------------------------------------------------------
# CIFAR binary


def _read_cifar_file(path: Path, record: int, label_byte: int) -> tuple[np.ndarray, np.ndarray]:
    raw = path.read_bytes()
    if len(raw) == 0 or len(raw) % record != 0:
        raise TruncatedFile(
            f"{path.name}: size {len(raw)} is not a multiple of record size {record}"
        )
    rows = np.frombuffer(raw, dtype=np.uint8).reshape(-1, record)
    labels = rows[:, label_byte]
    pixels = rows[:, record - 3072 :]
    return pixels, labels


def load_cifar(dir_path, variant: str) -> tuple[LabeledSet, LabeledSet, DatasetMeta]:
    """Load CIFAR binary batches; `variant` is "cifar10" or "cifar100"."""
    base = Path(dir_path)
    if variant == "cifar10":
        train_files, test_files = _CIFAR10_TRAIN, _CIFAR10_TEST
        record, label_byte, num_classes = 3073, 0, 10
    elif variant == "cifar100":
        train_files, test_files = ["train.bin"], ["test.bin"]
        record, label_byte, num_classes = 3074, 1, 100
    else:
        raise UnknownVariant(f"variant must be cifar10 or cifar100, got {variant!r}")

    missing = [n for n in train_files + test_files if not (base / n).is_file()]
    if missing:
        raise DatasetMissing(f"missing {variant} files in {base}: {', '.join(missing)}")

    def _load(names: list[str]) -> LabeledSet:
        parts = [_read_cifar_file(base / n, record, label_byte) for n in names]
        pixels = np.concatenate([p for p, _ in parts])
        labels = np.concatenate([l for _, l in parts])
        return LabeledSet(pixels.astype(np.float64) / 255.0, labels, num_classes)

    train = _load(train_files)
    test = _load(test_files)
    meta = DatasetMeta(variant, num_classes, train.input_dim, len(train), len(test))
    return train, test, meta


# ---------------------------------------------------------------------------
# Synthetic blobs


def _class_means(num_classes: int, input_dim: int) -> np.ndarray:
    """Deterministic well-separated class means inside [0.2, 0.8]^d.

    Class c sits at angle 2*pi*c/C on a circle replicated across every
    coordinate pair, which keeps distinct classes apart for any d >= 2.
    """
    angles = 2.0 * math.pi * np.arange(num_classes) / num_classes
    directions = np.zeros((num_classes, input_dim))
    directions[:, 0::2] = np.cos(angles)[:, None]
    directions[:, 1::2] = np.sin(angles)[:, None]
    return 0.5 + 0.3 * directions


def make_synthetic(
    num_classes: int,
    per_class: int,
    input_dim: int,
    spread: float,
    seed: int,
) -> tuple[LabeledSet, LabeledSet, DatasetMeta]:
    """Gaussian class blobs with an 80/20 per-class train/test split.

    `per_class` counts samples per class before the split; `spread` is the
    per-coordinate standard deviation. Features are clipped to [0, 1].
    """
    if num_classes < 2 or per_class < 2 or input_dim < 2:
        raise InvalidParam("need num_classes >= 2, per_class >= 2, input_dim >= 2")
    if spread < 0:
        raise InvalidParam("spread must be nonnegative")

    rng = np.random.default_rng(int(seed))
    means = _class_means(num_classes, input_dim)
    n_train = max(1, int(per_class * 0.8))

    train_x, train_y, test_x, test_y = [], [], [], []
    for c in range(num_classes):
        pts = means[c] + spread * rng.standard_normal((per_class, input_dim))
        np.clip(pts, 0.0, 1.0, out=pts)
        train_x.append(pts[:n_train])
        test_x.append(pts[n_train:])
        train_y.append(np.full(n_train, c))
        test_y.append(np.full(per_class - n_train, c))

    train = LabeledSet(np.concatenate(train_x), np.concatenate(train_y), num_classes)
    test = LabeledSet(np.concatenate(test_x), np.concatenate(test_y), num_classes)
    meta = DatasetMeta("synthetic", num_classes, input_dim, len(train), len(test))
    return train, test, meta


# ---------------------------------------------------------------------------
# Plain-text serialization (rows of label,f1,...,fd)


def save_csv(dataset: LabeledSet, path) -> Path:
    path = Path(path)
    with path.open("w", encoding="ascii") as fh:
        for label, row in zip(dataset.labels, dataset.features):
            fh.write(str(int(label)))
            for value in row:
                fh.write("," + repr(float(value)))
            fh.write("\n")
    return path


def load_csv(path, num_classes: int | None = None) -> LabeledSet:
    path = Path(path)
    labels, rows = [], []
    with path.open("r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            labels.append(int(parts[0]))
            rows.append([float(v) for v in parts[1:]])
    if not rows:
        raise TruncatedFile(f"{path}: no data rows")
    if num_classes is None:
        num_classes = max(labels) + 1
    return LabeledSet(np.array(rows), np.array(labels), num_classes)
