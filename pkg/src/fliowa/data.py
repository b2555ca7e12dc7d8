"""Datasets, IDX ingestion, non-IID partitioning and dirty-label poisoning."""

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DerangementError,
    EmptyDataError,
    IDXConsistencyError,
    IDXFormatError,
    IDXReadError,
    PartitionError,
    SplitError,
)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.features.shape}")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError(f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels outside [0, {self.num_classes})")

    def __len__(self):
        return int(self.labels.shape[0])

    @property
    def dim(self):
        return int(self.features.shape[1])

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.num_classes)

    def with_labels(self, labels):
        return Dataset(self.features, labels, self.num_classes)


@dataclass(frozen=True)
class PartitionPlan:
    n_clients: int
    labels_per_client: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.n_clients < 1:
            raise PartitionError(f"n_clients must be >= 1, got {self.n_clients}")
        if self.labels_per_client < 1:
            raise PartitionError(f"labels_per_client must be >= 1, got {self.labels_per_client}")


def concatenate(datasets):
    datasets = list(datasets)
    return Dataset(
        np.concatenate([d.features for d in datasets]),
        np.concatenate([d.labels for d in datasets]),
        datasets[0].num_classes,
    )


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------


def class_centroids(num_classes, dim, seed):
    """Unit-simplex vertices (pairwise distance sqrt(2)) under a seeded rotation.

    When ``dim < num_classes`` the vertices are projected by a random
    orthonormal map and no longer equidistant.
    """
    rng = np.random.default_rng(seed)
    size = max(dim, num_classes)
    q, r = np.linalg.qr(rng.standard_normal((size, size)))
    q = q * np.sign(np.diag(r))
    return np.ascontiguousarray(q[:num_classes, :dim])


def generate_synthetic(num_classes, dim, samples_per_class, spread, seed):
    """Isotropic Gaussian blobs, ``samples_per_class`` per class.

    ``spread`` is the per-coordinate standard deviation; centroids come from
    :func:`class_centroids`.  Samples are grouped by class.
    """
    if num_classes < 2:
        raise ValueError(f"num_classes must be >= 2, got {num_classes}")
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    if samples_per_class < 1:
        raise ValueError(f"samples_per_class must be >= 1, got {samples_per_class}")
    if spread < 0:
        raise ValueError(f"spread must be non-negative, got {spread}")
    rng = np.random.default_rng(seed)
    centroids = class_centroids(num_classes, dim, rng.integers(2**63))
    labels = np.repeat(np.arange(num_classes), samples_per_class)
    noise = rng.standard_normal((labels.size, dim)) * spread
    return Dataset(centroids[labels] + noise, labels, num_classes)


# ---------------------------------------------------------------------------
# IDX files
# ---------------------------------------------------------------------------


def _open(path, mode):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode)
    return open(path, mode)


def _read_idx(path, expected_magic):
    with _open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise IDXReadError(f"{path}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise IDXFormatError(f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IDXReadError(f"{path}: truncated header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header < count:
        raise IDXReadError(f"{path}: payload has {len(raw) - header} bytes, header declares {count}")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_idx(images_path, labels_path, num_classes=None):
    """Read an IDX image/label file pair (optionally gzipped).

    Images are flattened row-major and scaled to [0, 1].
    """
    images = _read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise IDXConsistencyError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    labels = labels.astype(np.int64)
    if num_classes is None:
        num_classes = max(int(labels.max()) + 1 if labels.size else 0, 2)
    return Dataset(features, labels, num_classes)


def write_idx(dataset, images_path, labels_path, image_shape=None):
    """Write ``dataset`` as an IDX pair; features must lie in [0, 1]."""
    n, d = dataset.features.shape
    if image_shape is None:
        side = int(round(np.sqrt(d)))
        image_shape = (side, side) if side * side == d else (d,)
    if int(np.prod(image_shape)) != d:
        raise ValueError(f"image shape {image_shape} does not hold {d} features")
    if dataset.labels.size and dataset.labels.max() > 255:
        raise ValueError("IDX labels are single bytes")
    pixels = np.clip(np.rint(dataset.features * 255.0), 0, 255).astype(np.uint8)
    dims = (n, *image_shape)
    with _open(images_path, "wb") as fh:
        fh.write(struct.pack(">I", 0x00000800 | len(dims)))
        fh.write(struct.pack(f">{len(dims)}I", *dims))
        fh.write(pixels.tobytes())
    with _open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, n))
        fh.write(dataset.labels.astype(np.uint8).tobytes())


# ---------------------------------------------------------------------------
# splitting and partitioning
# ---------------------------------------------------------------------------


def split_validation(data, validation_fraction, seed):
    """Stratified split into ``(train, validation)``.

    Each class contributes ``round(fraction * count)`` samples to validation.
    """
    if not 0.0 < validation_fraction < 1.0:
        raise SplitError(f"validation_fraction must be in (0, 1), got {validation_fraction}")
    rng = np.random.default_rng(seed)
    train_idx, val_idx = [], []
    for cls in range(data.num_classes):
        idx = np.flatnonzero(data.labels == cls)
        if idx.size == 0:
            continue
        idx = rng.permutation(idx)
        k = int(np.floor(validation_fraction * idx.size + 0.5))
        val_idx.append(idx[:k])
        train_idx.append(idx[k:])
    train_idx = np.sort(np.concatenate(train_idx)) if train_idx else np.empty(0, np.int64)
    val_idx = np.sort(np.concatenate(val_idx)) if val_idx else np.empty(0, np.int64)
    if train_idx.size == 0 or val_idx.size == 0:
        raise SplitError(
            f"fraction {validation_fraction} on {len(data)} samples leaves an empty split "
            f"(train={train_idx.size}, validation={val_idx.size})"
        )
    return data.subset(train_idx), data.subset(val_idx)


def assign_labels(num_classes, plan):
    """Per-client label sets, greedily balancing how many clients hold each class."""
    if plan.labels_per_client > num_classes:
        raise PartitionError(f"labels_per_client={plan.labels_per_client} exceeds {num_classes} classes")
    if plan.n_clients * plan.labels_per_client < num_classes:
        raise PartitionError(
            f"{plan.n_clients} clients x {plan.labels_per_client} labels cannot cover {num_classes} classes"
        )
    rng = np.random.default_rng(plan.seed)
    holders = np.zeros(num_classes, dtype=np.int64)
    assignment = []
    for _ in range(plan.n_clients):
        # least-held classes first, random among ties
        keys = np.lexsort((rng.random(num_classes), holders))
        chosen = np.sort(keys[: plan.labels_per_client])
        holders[chosen] += 1
        assignment.append(tuple(int(c) for c in chosen))
    return assignment


def partition_non_iid(data, plan):
    """Split ``data`` across clients so each holds only a few classes.

    Classes present in ``data`` are dealt to clients by :func:`assign_labels`;
    each class's samples are shuffled and divided as evenly as possible among
    its holders.  Every sample lands on exactly one client.
    """
    labels_sets = assign_labels(data.num_classes, plan)
    rng = np.random.default_rng(np.random.SeedSequence([plan.seed, 1]))
    per_client = [[] for _ in range(plan.n_clients)]
    for cls in range(data.num_classes):
        idx = np.flatnonzero(data.labels == cls)
        owners = [i for i, labs in enumerate(labels_sets) if cls in labs]
        if idx.size == 0:
            continue
        idx = rng.permutation(idx)
        for owner, chunk in zip(owners, np.array_split(idx, len(owners))):
            per_client[owner].append(chunk)
    out = []
    for chunks in per_client:
        idx = np.sort(np.concatenate(chunks)) if chunks else np.empty(0, np.int64)
        out.append(data.subset(idx))
    return out


# ---------------------------------------------------------------------------
# poisoning
# ---------------------------------------------------------------------------


def random_derangement(values, rng):
    """Random permutation of ``values`` with no fixed point."""
    values = np.asarray(values)
    if values.size < 2:
        raise DerangementError(f"no derangement of {values.size} element(s)")
    while True:
        perm = rng.permutation(values.size)
        if not np.any(perm == np.arange(values.size)):
            return values[perm]


def poison_labels(data, mode="shuffle", seed=0):
    """Dirty-label poisoning of a client dataset.

    ``shuffle`` permutes the label vector across samples (the label multiset
    is kept); ``class-map`` relabels every class through a random derangement
    of the classes present.  Features are never touched.
    """
    if len(data) == 0:
        raise EmptyDataError("cannot poison an empty dataset")
    rng = np.random.default_rng(seed)
    if mode == "shuffle":
        return data.with_labels(data.labels[rng.permutation(len(data))])
    if mode == "class-map":
        present = np.unique(data.labels)
        if present.size < 2:
            raise DerangementError(f"class-map needs at least 2 distinct labels, found {present.size}")
        image = random_derangement(present, rng)
        mapping = np.arange(data.num_classes)
        mapping[present] = image
        return data.with_labels(mapping[data.labels])
    raise ValueError(f"unknown poison mode {mode!r}")
