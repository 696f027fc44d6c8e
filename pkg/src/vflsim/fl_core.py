"""Datasets, non-iid partitioning, the MLP, local training and FedAvg.

The model is a 784 -> 64 -> 10 multilayer perceptron (50 890 parameters,
~1.63 Mbit at 32 bits each) trained with plain minibatch SGD on softmax
cross-entropy. Aggregation accumulates in 64-bit precision in the caller's
(ascending client id) order and rounds once to 32-bit, which makes whole runs
bit-reproducible.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ConfigError, TrainingConfig

LAYER_SIZES = (784, 64, 10)
PARAM_COUNT = (
    LAYER_SIZES[0] * LAYER_SIZES[1]
    + LAYER_SIZES[1]
    + LAYER_SIZES[1] * LAYER_SIZES[2]
    + LAYER_SIZES[2]
)
PAYLOAD_BITS = PARAM_COUNT * 32

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CHECKPOINT_MAGIC = b"VFL1"


class IdxFormatError(ValueError):
    pass


class BadMagicError(IdxFormatError):
    pass


class DimensionMismatchError(IdxFormatError):
    pass


class TruncatedFileError(IdxFormatError):
    pass


class EmptyDataError(ValueError):
    pass


class EmptyUpdatesError(ValueError):
    pass


class ShapeMismatchError(ValueError):
    pass


class InfeasiblePartitionError(ValueError):
    pass


@dataclass
class Dataset:
    images: np.ndarray
    labels: np.ndarray
    num_classes: int = 10

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DimensionMismatchError("images and labels lengths differ")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("labels out of range")

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class GradientFingerprint:
    client_id: int
    delta: np.ndarray
    norm: float


def make_fingerprint(client_id: int, local: np.ndarray, global_params: np.ndarray) -> GradientFingerprint:
    delta = (local.astype(np.float64) - global_params.astype(np.float64)).astype(np.float32)
    norm = float(np.linalg.norm(delta.astype(np.float64)))
    return GradientFingerprint(client_id, delta, norm)


# ---------------------------------------------------------------------------
# IDX file format


def _read_exact(fh, count: int, path: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise TruncatedFileError(f"{path}: expected {count} bytes, got {len(data)}")
    return data


def _load_idx_images(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, count, rows, cols = struct.unpack(">IIII", _read_exact(fh, 16, str(path)))
        if magic != IDX_IMAGES_MAGIC:
            raise BadMagicError(f"{path}: magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")
        raw = _read_exact(fh, count * rows * cols, str(path))
    if rows * cols != LAYER_SIZES[0]:
        raise DimensionMismatchError(
            f"{path}: images are {rows}x{cols}, expected {LAYER_SIZES[0]} features"
        )
    return np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)


def _load_idx_labels(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, count = struct.unpack(">II", _read_exact(fh, 8, str(path)))
        if magic != IDX_LABELS_MAGIC:
            raise BadMagicError(f"{path}: magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")
        raw = _read_exact(fh, count, str(path))
    return np.frombuffer(raw, dtype=np.uint8)


def load_idx_dataset(images_path: str | Path, labels_path: str | Path, num_classes: int = 10) -> Dataset:
    """Load an IDX image/label file pair, scaling pixels to [0, 1]."""
    images = _load_idx_images(images_path)
    labels = _load_idx_labels(labels_path)
    if len(images) != len(labels):
        raise DimensionMismatchError(
            f"{images_path} has {len(images)} items but {labels_path} has {len(labels)}"
        )
    return Dataset(
        images=(images.astype(np.float32) / 255.0),
        labels=labels.astype(np.int64),
        num_classes=num_classes,
    )


def write_idx_images(path: str | Path, images: np.ndarray) -> None:
    """Write uint8 images of shape (n, rows, cols) in IDX format."""
    n, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(np.ascontiguousarray(images, dtype=np.uint8).tobytes())


def write_idx_labels(path: str | Path, labels: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        fh.write(np.ascontiguousarray(labels, dtype=np.uint8).tobytes())


# ---------------------------------------------------------------------------
# Synthetic datasets


@dataclass(frozen=True)
class SyntheticConfig:
    num_classes: int = 10
    samples_per_class: int = 100
    separation: float = 3.0
    noise_std: float = 0.05
    feature_dim: int = 784
    seed: int = 0


def generate_synthetic_dataset(config: SyntheticConfig) -> Dataset:
    """Seeded Gaussian class blobs, linearly separable at separation >= 3 sigma.

    Inputs are sparse: the background is zero and class c lights up one
    coordinate, so every pair of centers is exactly separation * noise_std
    apart and a small network picks up the signal within a few epochs.
    """
    if config.num_classes < 2:
        raise ConfigError("num_classes must be >= 2")
    if config.num_classes > config.feature_dim:
        raise ConfigError("need feature_dim >= num_classes for orthogonal centers")
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 5]))
    axes = rng.permutation(config.feature_dim)[: config.num_classes]
    offset = config.separation * config.noise_std / math.sqrt(2.0)
    centers = np.zeros((config.num_classes, config.feature_dim), dtype=np.float64)
    centers[np.arange(config.num_classes), axes] = offset

    total = config.num_classes * config.samples_per_class
    labels = np.repeat(np.arange(config.num_classes), config.samples_per_class)
    noise = rng.normal(0.0, config.noise_std, (total, config.feature_dim))
    images = np.clip(centers[labels] + noise, 0.0, 1.0)
    order = rng.permutation(total)
    return Dataset(
        images=images[order].astype(np.float32),
        labels=labels[order].astype(np.int64),
        num_classes=config.num_classes,
    )


@dataclass(frozen=True)
class SurrogateConfig:
    """MNIST-shaped stand-in: shifted noisy class templates, 28x28 in [0,1]."""

    num_classes: int = 10
    train_samples: int = 20000
    test_samples: int = 4000
    shift_max: int = 4
    noise_std: float = 0.20
    seed: int = 0


def _upsample_bilinear(field: np.ndarray, size: int) -> np.ndarray:
    src = np.linspace(0.0, field.shape[0] - 1.0, size)
    rows = np.empty((field.shape[0], size))
    for i in range(field.shape[0]):
        rows[i] = np.interp(src, np.arange(field.shape[1]), field[i])
    out = np.empty((size, size))
    for j in range(size):
        out[:, j] = np.interp(src, np.arange(field.shape[0]), rows[:, j])
    return out


def _shift_pad(image: np.ndarray, dx: int, dy: int) -> np.ndarray:
    out = np.zeros_like(image)
    h, w = image.shape
    ys = slice(max(0, dy), min(h, h + dy))
    xs = slice(max(0, dx), min(w, w + dx))
    ys_src = slice(max(0, -dy), min(h, h - dy))
    xs_src = slice(max(0, -dx), min(w, w - dx))
    out[ys, xs] = image[ys_src, xs_src]
    return out


def _surrogate_split(
    templates: np.ndarray, labels: np.ndarray, config: SurrogateConfig, rng: np.random.Generator
) -> Dataset:
    count = len(labels)
    images = np.empty((count, 28 * 28), dtype=np.float32)
    shifts = rng.integers(-config.shift_max, config.shift_max + 1, (count, 2))
    scales = rng.uniform(0.6, 1.0, count)
    noise = rng.normal(0.0, config.noise_std, (count, 28, 28))
    for i in range(count):
        shifted = _shift_pad(templates[labels[i]], int(shifts[i, 0]), int(shifts[i, 1]))
        sample = np.clip(scales[i] * shifted + noise[i], 0.0, 1.0)
        images[i] = np.round(sample * 255.0).astype(np.uint8).reshape(-1) / np.float32(255.0)
    return Dataset(images=images, labels=labels.astype(np.int64), num_classes=config.num_classes)


def generate_surrogate_dataset(config: SurrogateConfig) -> tuple[Dataset, Dataset]:
    """Deterministic (train, test) pair of template-image data.

    Pixel values are quantized to uint8 steps so that writing the arrays to
    IDX files and reloading them reproduces the datasets exactly.
    """
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 6]))
    templates = np.empty((config.num_classes, 28, 28))
    for c in range(config.num_classes):
        field = rng.normal(0.0, 1.0, (7, 7))
        up = _upsample_bilinear(field, 28)
        templates[c] = (up - up.min()) / (up.max() - up.min())
    train_labels = np.concatenate(
        [np.full(config.train_samples // config.num_classes, c) for c in range(config.num_classes)]
    )
    test_labels = np.concatenate(
        [np.full(config.test_samples // config.num_classes, c) for c in range(config.num_classes)]
    )
    train_labels = train_labels[rng.permutation(len(train_labels))]
    test_labels = test_labels[rng.permutation(len(test_labels))]
    train = _surrogate_split(templates, train_labels, config, rng)
    test = _surrogate_split(templates, test_labels, config, rng)
    return train, test


def write_surrogate_idx(directory: str | Path, config: SurrogateConfig) -> dict[str, Path]:
    """Materialize the surrogate as IDX files; returns the four paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tag = f"surrogate-s{config.seed}-n{config.train_samples}-{config.test_samples}"
    paths = {
        "train_images": directory / f"{tag}-train-images.idx",
        "train_labels": directory / f"{tag}-train-labels.idx",
        "test_images": directory / f"{tag}-test-images.idx",
        "test_labels": directory / f"{tag}-test-labels.idx",
    }
    if all(p.exists() for p in paths.values()):
        return paths
    train, test = generate_surrogate_dataset(config)
    for split, dataset in (("train", train), ("test", test)):
        images = np.round(dataset.images * 255.0).astype(np.uint8).reshape(-1, 28, 28)
        write_idx_images(paths[f"{split}_images"], images)
        write_idx_labels(paths[f"{split}_labels"], dataset.labels.astype(np.uint8))
    return paths


# ---------------------------------------------------------------------------
# Non-iid partition


def partition_non_iid(
    dataset: Dataset, client_count: int, classes_per_client: int, seed: int
) -> list[np.ndarray]:
    """Shard-based label-skewed partition.

    Indices are sorted by label and cut into client_count * classes_per_client
    single-label shards (per-label shard quotas apportioned by largest
    remainder). Shards are dealt through a seeded rotation so every client
    receives exactly classes_per_client shards of distinct labels; the result
    is disjoint and exhaustive.
    """
    labels = dataset.labels
    num_classes = dataset.num_classes
    present = [c for c in range(num_classes) if np.any(labels == c)]
    if classes_per_client > len(present):
        raise InfeasiblePartitionError(
            f"classes_per_client={classes_per_client} exceeds {len(present)} present classes"
        )
    total_shards = client_count * classes_per_client
    counts = np.array([np.sum(labels == c) for c in present], dtype=np.int64)
    if total_shards < len(present):
        raise InfeasiblePartitionError("fewer shards than classes; partition cannot be exhaustive")

    ideal = total_shards * counts / counts.sum()
    quotas = np.floor(ideal).astype(np.int64)
    shortfall = total_shards - int(quotas.sum())
    for idx in np.argsort(-(ideal - quotas), kind="stable")[:shortfall]:
        quotas[idx] += 1
    # every present class must own at least one shard or the partition
    # cannot be exhaustive; steal from the largest quota
    while np.any(quotas == 0):
        quotas[int(np.argmin(quotas))] += 1
        quotas[int(np.argmax(quotas))] -= 1
    if quotas.max() > client_count:
        raise InfeasiblePartitionError("a class needs more shards than there are clients")
    if np.any(counts < quotas):
        raise InfeasiblePartitionError("a class has fewer samples than its shard quota")

    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    label_order = rng.permutation(len(present))
    shards_by_slot: list[np.ndarray] = []
    slot_labels: list[int] = []
    for li in label_order:
        c = present[li]
        idx_c = np.nonzero(labels == c)[0]
        chunks = np.array_split(idx_c, quotas[li])
        chunk_order = rng.permutation(len(chunks))
        for k in chunk_order:
            shards_by_slot.append(chunks[k])
            slot_labels.append(c)

    rotation = int(rng.integers(0, total_shards))
    client_perm = rng.permutation(client_count)
    assignments: list[list[np.ndarray]] = [[] for _ in range(client_count)]
    for s in range(total_shards):
        slot = (s + rotation) % total_shards
        client = client_perm[s % client_count]
        assignments[client].append(shards_by_slot[slot])
    return [np.sort(np.concatenate(chunks)) for chunks in assignments]


def label_histogram(dataset: Dataset, indices: np.ndarray) -> np.ndarray:
    return np.bincount(dataset.labels[indices], minlength=dataset.num_classes)


# ---------------------------------------------------------------------------
# Model


def init_params(seed: int) -> np.ndarray:
    """He-normal weights, zero biases, flattened to one float32 vector."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 4]))
    d_in, d_hidden, d_out = LAYER_SIZES
    w1 = rng.normal(0.0, math.sqrt(2.0 / d_in), (d_in, d_hidden))
    w2 = rng.normal(0.0, math.sqrt(2.0 / d_hidden), (d_hidden, d_out))
    params = np.concatenate(
        [w1.ravel(), np.zeros(d_hidden), w2.ravel(), np.zeros(d_out)]
    )
    return params.astype(np.float32)


def unpack_params(params: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    d_in, d_hidden, d_out = LAYER_SIZES
    if params.shape != (PARAM_COUNT,):
        raise ShapeMismatchError(f"expected {PARAM_COUNT} parameters, got {params.shape}")
    a = d_in * d_hidden
    b = a + d_hidden
    c = b + d_hidden * d_out
    w1 = params[:a].reshape(d_in, d_hidden)
    b1 = params[a:b]
    w2 = params[b:c].reshape(d_hidden, d_out)
    b2 = params[c:]
    return w1, b1, w2, b2


def forward_logits(params: np.ndarray, images: np.ndarray) -> np.ndarray:
    w1, b1, w2, b2 = unpack_params(params)
    hidden = np.maximum(images @ w1 + b1, 0.0)
    return hidden @ w2 + b2


def loss_and_gradient(
    params: np.ndarray, images: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its flat gradient.

    Arithmetic follows the dtype of params (float64 params give float64
    gradients, which the finite-difference checks rely on).
    """
    w1, b1, w2, b2 = unpack_params(params)
    n = len(labels)
    pre = images @ w1 + b1
    hidden = np.maximum(pre, 0.0)
    logits = hidden @ w2 + b2
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    eps = np.finfo(probs.dtype).tiny
    loss = float(-np.log(probs[np.arange(n), labels] + eps).mean())

    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    dw2 = hidden.T @ dlogits
    db2 = dlogits.sum(axis=0)
    dhidden = dlogits @ w2.T
    dhidden[pre <= 0.0] = 0.0
    dw1 = images.T @ dhidden
    db1 = dhidden.sum(axis=0)
    grad = np.concatenate([dw1.ravel(), db1, dw2.ravel(), db2])
    return loss, grad


def local_train(
    global_params: np.ndarray,
    images: np.ndarray,
    labels: np.ndarray,
    config: TrainingConfig,
    rng: np.random.Generator,
    epochs: int | None = None,
) -> tuple[np.ndarray, int]:
    """Minibatch SGD from the global parameters on one client's data."""
    n = len(labels)
    if n == 0:
        raise EmptyDataError("client has no data")
    params = global_params.astype(np.float32).copy()
    epochs = config.local_epochs if epochs is None else epochs
    lr = np.float32(config.learning_rate)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            _, grad = loss_and_gradient(params, images[batch], labels[batch])
            params -= lr * grad.astype(np.float32)
    return params, n


def fedavg(updates: Sequence[tuple[np.ndarray, int]]) -> np.ndarray:
    """Sample-count-weighted mean, 64-bit accumulation, one 32-bit rounding.

    Callers pass updates in ascending client id order so the accumulation
    order (and hence the bit pattern) is platform independent.
    """
    if not updates:
        raise EmptyUpdatesError("no updates to aggregate")
    length = updates[0][0].shape
    acc = np.zeros(length, dtype=np.float64)
    total = 0
    for params, count in updates:
        if params.shape != length:
            raise ShapeMismatchError("parameter vectors differ in length")
        acc += params.astype(np.float64) * count
        total += count
    return (acc / total).astype(np.float32)


def evaluate(params: np.ndarray, dataset: Dataset) -> float:
    """Fraction of argmax-correct predictions; logit ties go to the lowest class."""
    if len(dataset) == 0:
        raise EmptyDataError("empty test set")
    predictions = np.argmax(forward_logits(params, dataset.images), axis=1)
    return float(np.mean(predictions == dataset.labels))


def compute_time(sample_count: int, config: TrainingConfig, epochs: int | None = None) -> float:
    """Simulated local-training cost: c_batch per minibatch per epoch."""
    epochs = config.local_epochs if epochs is None else epochs
    batches = math.ceil(sample_count / config.batch_size)
    return config.c_batch * batches * epochs


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(path: str | Path, params: np.ndarray) -> None:
    """Versioned binary blob: magic, layer shape descriptor, float32 LE data."""
    if params.shape != (PARAM_COUNT,):
        raise ShapeMismatchError(f"expected {PARAM_COUNT} parameters")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(LAYER_SIZES)))
        fh.write(struct.pack(f"<{len(LAYER_SIZES)}I", *LAYER_SIZES))
        fh.write(params.astype("<f4").tobytes())


def load_checkpoint(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, str(path))
        if magic != CHECKPOINT_MAGIC:
            raise BadMagicError(f"{path}: not a checkpoint file")
        (n_layers,) = struct.unpack("<I", _read_exact(fh, 4, str(path)))
        sizes = struct.unpack(f"<{n_layers}I", _read_exact(fh, 4 * n_layers, str(path)))
        if tuple(sizes) != LAYER_SIZES:
            raise DimensionMismatchError(f"{path}: layer sizes {sizes} != {LAYER_SIZES}")
        raw = _read_exact(fh, PARAM_COUNT * 4, str(path))
    return np.frombuffer(raw, dtype="<f4").astype(np.float32)
