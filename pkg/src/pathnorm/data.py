"""Dataset ingestion, synthetic data generation and metrics persistence."""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, IdxFormatError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    """Feature rows in [0, 1] with integer class labels."""

    name: str
    inputs: np.ndarray   # (N, D) float64
    labels: np.ndarray   # (N,) int64
    n_classes: int

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or y.shape != (len(x),):
            raise ConfigError("inputs must be (N, D) with one label per row")
        if len(x) and (not np.isfinite(x).all() or x.min() < 0 or x.max() > 1):
            raise ConfigError("feature values must be finite and within [0, 1]")
        if len(y) and (y.min() < 0 or y.max() >= self.n_classes):
            raise ConfigError("labels outside [0, n_classes)")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return len(self.inputs)

    @property
    def dim(self):
        return self.inputs.shape[1]


def _read_be32(data: bytes, offset: int, what: str) -> int:
    if offset + 4 > len(data):
        raise IdxFormatError(f"truncated file: {what} needs 4 bytes at offset "
                             f"{offset}, file has {len(data)}", offset=offset)
    return struct.unpack(">i", data[offset:offset + 4])[0]


def _load_idx(path, magic_wanted: int, ndim: int):
    data = Path(path).read_bytes()
    magic = _read_be32(data, 0, "magic")
    if magic != magic_wanted:
        raise IdxFormatError(f"magic mismatch in {path}: got {magic:#010x}, "
                             f"expected {magic_wanted:#010x}", offset=0)
    dims = [_read_be32(data, 4 + 4 * i, f"dimension {i}") for i in range(ndim)]
    header = 4 + 4 * ndim
    expected = header + int(np.prod(dims))
    if len(data) < expected:
        raise IdxFormatError(f"truncated file {path}: expected {expected} bytes, "
                             f"got {len(data)}", offset=len(data))
    raw = np.frombuffer(data, dtype=np.uint8, count=expected - header, offset=header)
    return raw.reshape(dims)


def load_mnist_idx(images_path, labels_path, name: str = "mnist",
                   n_classes: int = 10) -> Dataset:
    """Load an IDX image/label pair; pixels are scaled to [0, 1]."""
    images = _load_idx(images_path, IDX_IMAGE_MAGIC, ndim=3)
    labels = _load_idx(labels_path, IDX_LABEL_MAGIC, ndim=1)
    if len(images) != len(labels):
        raise IdxFormatError(f"image count {len(images)} != label count {len(labels)}")
    x = images.reshape(len(images), -1).astype(np.float64) / 255.0
    return Dataset(name=name, inputs=x, labels=labels.astype(np.int64),
                   n_classes=n_classes)


def write_idx_images(path, images: np.ndarray):
    """Write uint8 images of shape (N, R, C) in IDX format."""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    if images.ndim != 3:
        raise ConfigError("images must have shape (N, rows, cols)")
    with open(path, "wb") as f:
        f.write(struct.pack(">iiii", IDX_IMAGE_MAGIC, *images.shape))
        f.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray):
    """Write uint8 labels of shape (N,) in IDX format."""
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    if labels.ndim != 1:
        raise ConfigError("labels must be one-dimensional")
    with open(path, "wb") as f:
        f.write(struct.pack(">ii", IDX_LABEL_MAGIC, len(labels)))
        f.write(labels.tobytes())


def make_synthetic(teacher_arch, n: int, seed: int, label_noise: float = 0.0,
                   name: str = "synthetic") -> Dataset:
    """Uniform [0,1] inputs labeled by a random teacher network's argmax.

    The teacher is a balanced-initialized layered network; label_noise
    replaces that fraction of labels with uniform random classes.
    """
    from .graph import build_layered
    from .initialization import init_balanced
    from .network import forward_batch

    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    if not 0.0 <= label_noise <= 1.0:
        raise ConfigError(f"label_noise must be in [0, 1], got {label_noise}")
    g = build_layered(teacher_arch)
    ss = np.random.SeedSequence(seed)
    w_seed, x_seed, noise_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(3))
    w = init_balanced(g, w_seed)
    rng = np.random.Generator(np.random.PCG64(x_seed))
    x = rng.random((n, g.n_inputs))
    labels = np.argmax(forward_batch(g, w, x), axis=1) if n else np.zeros(0, np.int64)
    if label_noise > 0 and n:
        nrng = np.random.Generator(np.random.PCG64(noise_seed))
        flip = nrng.random(n) < label_noise
        labels = np.where(flip, nrng.integers(0, g.n_outputs, size=n), labels)
    return Dataset(name=name, inputs=x, labels=labels.astype(np.int64),
                   n_classes=g.n_outputs)


def split_validation(ds: Dataset, n_holdout: int, seed: int):
    """Disjoint uniform (train, validation) split, deterministic per seed."""
    if n_holdout < 0 or n_holdout >= len(ds):
        raise ConfigError(f"holdout size {n_holdout} must be in [0, {len(ds)})")
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(len(ds))
    val_idx, train_idx = perm[:n_holdout], perm[n_holdout:]
    mk = lambda idx, tag: Dataset(name=f"{ds.name}-{tag}", inputs=ds.inputs[idx],
                                  labels=ds.labels[idx], n_classes=ds.n_classes)
    return mk(train_idx, "train"), mk(val_idx, "val")


@dataclass(frozen=True)
class MetricRecord:
    """One epoch's training metrics; inf marks a diverged run."""

    epoch: int
    optimizer: str
    ce_train: float
    err_train: float
    err_test: float
    wall_s: float


METRICS_HEADER = ["epoch", "optimizer", "ce_train", "err_train", "err_test", "wall_s"]


def write_metrics(records, path, config: dict | None = None):
    """Write metric records as CSV; optionally a config.json sidecar."""
    path = Path(path)
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(METRICS_HEADER)
            for r in records:
                writer.writerow([r.epoch, r.optimizer, repr(r.ce_train),
                                 repr(r.err_train), repr(r.err_test), repr(r.wall_s)])
        if config is not None:
            sidecar = path.parent / "config.json"
            sidecar.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    except OSError as e:
        raise ConfigError(f"cannot write metrics to {path}: {e}") from e


def read_metrics(path):
    """Read a metrics CSV back into MetricRecord objects."""
    path = Path(path)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != METRICS_HEADER:
            raise ConfigError(f"unexpected metrics header in {path}: {header}")
        return [MetricRecord(epoch=int(row[0]), optimizer=row[1],
                             ce_train=float(row[2]), err_train=float(row[3]),
                             err_test=float(row[4]), wall_s=float(row[5]))
                for row in reader]
