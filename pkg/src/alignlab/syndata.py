"""Synthetic paired-modality dataset with controlled redundancy.

Two 12-dimensional binary modalities share an 8-dim common block and carry
4 modality-specific dims each. Labels are drawn from a temperature-scaled
softmax over 8 task-relevant features: R picked from the shared pool and
the remaining U = 8 - R split floor/ceil between the two unique pools.
Unselected dims act as irrelevant noise features.

Canonical split sizes are 45,920 / 9,828 / 9,828 (train/val/test); their
sum, 65,576, is the default dataset size. Generation is a pure function of
the GenSpec.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

from .rng import Rng

TOTAL_RELEVANT = 8
SHARED_DIM = 8
UNIQUE_DIM = 4
N_CLASSES = 4
CANONICAL_SPLITS = (45920, 9828, 9828)
DATASET_FORMAT = "alignlab-dataset"
DATASET_VERSION = 1


class DatasetFormatError(ValueError):
    """Raised when a dataset file is malformed or violates invariants."""


@dataclass(frozen=True)
class GenSpec:
    """Recipe for one synthetic dataset."""

    r: int
    tau: float = 1.0
    seed: int = 0
    split_sizes: tuple[int, int, int] = CANONICAL_SPLITS

    def __post_init__(self):
        if not 0 <= self.r <= TOTAL_RELEVANT:
            raise ValueError(f"redundancy level must be in [0, {TOTAL_RELEVANT}], got {self.r}")
        if not self.tau > 0:
            raise ValueError(f"label temperature must be > 0, got {self.tau}")
        u = TOTAL_RELEVANT - self.r
        if (u + 1) // 2 > UNIQUE_DIM:
            raise ValueError(f"uniqueness {u} does not fit unique pools of size {UNIQUE_DIM}")
        if any(s <= 0 for s in self.split_sizes):
            raise ValueError(f"split sizes must be positive, got {self.split_sizes}")

    @property
    def u(self) -> int:
        return TOTAL_RELEVANT - self.r

    @property
    def n_total(self) -> int:
        return sum(self.split_sizes)

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "tau": self.tau,
            "seed": self.seed,
            "split_sizes": list(self.split_sizes),
        }

    @staticmethod
    def from_dict(d: dict) -> "GenSpec":
        return GenSpec(
            r=int(d["r"]),
            tau=float(d["tau"]),
            seed=int(d["seed"]),
            split_sizes=tuple(int(s) for s in d["split_sizes"]),
        )


@dataclass(frozen=True)
class FeatureAllocation:
    """Which pool columns feed label generation, in the fixed order
    (shared ascending, unique1 ascending, unique2 ascending)."""

    shared_idx: tuple[int, ...]
    unique1_idx: tuple[int, ...]
    unique2_idx: tuple[int, ...]

    def __post_init__(self):
        total = len(self.shared_idx) + len(self.unique1_idx) + len(self.unique2_idx)
        if total != TOTAL_RELEVANT:
            raise ValueError(f"allocation must select {TOTAL_RELEVANT} features, got {total}")
        for name, idx, pool in (
            ("shared", self.shared_idx, SHARED_DIM),
            ("unique1", self.unique1_idx, UNIQUE_DIM),
            ("unique2", self.unique2_idx, UNIQUE_DIM),
        ):
            if len(set(idx)) != len(idx):
                raise ValueError(f"duplicate indices in {name} allocation: {idx}")
            if any(not 0 <= i < pool for i in idx):
                raise ValueError(f"{name} index out of range for pool size {pool}: {idx}")

    def to_dict(self) -> dict:
        return {
            "shared_idx": list(self.shared_idx),
            "unique1_idx": list(self.unique1_idx),
            "unique2_idx": list(self.unique2_idx),
        }

    @staticmethod
    def from_dict(d: dict) -> "FeatureAllocation":
        return FeatureAllocation(
            shared_idx=tuple(int(i) for i in d["shared_idx"]),
            unique1_idx=tuple(int(i) for i in d["unique1_idx"]),
            unique2_idx=tuple(int(i) for i in d["unique2_idx"]),
        )


@dataclass
class SyntheticDataset:
    """Immutable generated dataset plus its full recipe."""

    x1: np.ndarray  # n x 12, {0,1} as float64
    x2: np.ndarray  # n x 12
    y: np.ndarray  # n, int64 in {0..3}
    splits: dict  # name -> int64 index array
    spec: GenSpec
    allocation: FeatureAllocation
    label_weights: np.ndarray  # 8 x 4

    def relevant_features(self) -> np.ndarray:
        """The n x 8 matrix that fed label generation, in documented order."""
        shared = self.x1[:, list(self.allocation.shared_idx)]
        u1 = self.x1[:, [SHARED_DIM + i for i in self.allocation.unique1_idx]]
        u2 = self.x2[:, [SHARED_DIM + i for i in self.allocation.unique2_idx]]
        return np.concatenate([shared, u1, u2], axis=1)

    def equals(self, other: "SyntheticDataset") -> bool:
        return (
            self.spec == other.spec
            and self.allocation == other.allocation
            and np.array_equal(self.x1, other.x1)
            and np.array_equal(self.x2, other.x2)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.label_weights, other.label_weights)
            and all(np.array_equal(self.splits[k], other.splits[k]) for k in ("train", "val", "test"))
        )


def allocate_features(spec: GenSpec, rng: Rng) -> FeatureAllocation:
    """Sample the relevant-feature indices without replacement."""
    u = spec.u
    n1, n2 = u // 2, (u + 1) // 2
    shared = rng.choice_without_replacement(SHARED_DIM, spec.r)
    u1 = rng.choice_without_replacement(UNIQUE_DIM, n1)
    u2 = rng.choice_without_replacement(UNIQUE_DIM, n2)
    return FeatureAllocation(
        shared_idx=tuple(sorted(int(i) for i in shared)),
        unique1_idx=tuple(sorted(int(i) for i in u1)),
        unique2_idx=tuple(sorted(int(i) for i in u2)),
    )


def generate_labels(features: np.ndarray, w: np.ndarray, tau: float, rng: Rng) -> np.ndarray:
    """Sample one label per row from softmax(features @ w / tau)."""
    if tau <= 0:
        raise ValueError(f"label temperature must be > 0, got {tau}")
    logits = (features @ w) / tau
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    cum = np.cumsum(p, axis=1)
    cum[:, -1] = 1.0
    u = rng.random(features.shape[0])
    return (u[:, None] > cum).sum(axis=1).astype(np.int64)


def softmax_label_probs(features: np.ndarray, w: np.ndarray, tau: float) -> np.ndarray:
    """Class probabilities used by generate_labels (exposed for tests)."""
    logits = (features @ w) / tau
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    return p / p.sum(axis=1, keepdims=True)


def _stratified_split(y: np.ndarray, sizes: tuple[int, int, int], rng: Rng) -> dict:
    """Exact-size stratified 3-way split.

    Per-class val/test quotas are apportioned by largest fractional
    remainder (ties to the lower class index) so the global split sizes
    come out exact; the remainder of every class goes to train.
    """
    n = len(y)
    train_n, val_n, test_n = sizes
    classes = np.arange(N_CLASSES)
    per_class = [np.flatnonzero(y == c) for c in classes]
    counts = np.array([len(ix) for ix in per_class])
    if counts.min() == 0:
        raise ValueError("every class must be present before splitting")

    def apportion(total):
        exact = counts * (total / n)
        base = np.floor(exact).astype(int)
        rem = total - base.sum()
        order = np.argsort(-(exact - base), kind="stable")
        take = base.copy()
        take[order[:rem]] += 1
        return take

    val_take = apportion(val_n)
    test_take = apportion(test_n)
    train_idx, val_idx, test_idx = [], [], []
    for c in classes:
        ix = per_class[c][rng.child(f"class-{c}").permutation(counts[c])]
        v, t = val_take[c], test_take[c]
        val_idx.append(ix[:v])
        test_idx.append(ix[v : v + t])
        train_idx.append(ix[v + t :])
    splits = {
        "train": np.sort(np.concatenate(train_idx)).astype(np.int64),
        "val": np.sort(np.concatenate(val_idx)).astype(np.int64),
        "test": np.sort(np.concatenate(test_idx)).astype(np.int64),
    }
    assert len(splits["train"]) == train_n
    assert len(splits["val"]) == val_n and len(splits["test"]) == test_n
    return splits


def generate(spec: GenSpec) -> SyntheticDataset:
    """Generate the full dataset deterministically from its spec."""
    rng = Rng(spec.seed)
    n = spec.n_total
    allocation = allocate_features(spec, rng.child("alloc"))
    shared = rng.child("shared").bernoulli(0.5, (n, SHARED_DIM))
    u1 = rng.child("unique1").bernoulli(0.5, (n, UNIQUE_DIM))
    u2 = rng.child("unique2").bernoulli(0.5, (n, UNIQUE_DIM))
    x1 = np.concatenate([shared, u1], axis=1)
    x2 = np.concatenate([shared, u2], axis=1)
    w = rng.child("weights").normal((TOTAL_RELEVANT, N_CLASSES))

    feats = np.concatenate(
        [
            shared[:, list(allocation.shared_idx)],
            u1[:, list(allocation.unique1_idx)],
            u2[:, list(allocation.unique2_idx)],
        ],
        axis=1,
    )
    y = generate_labels(feats, w, spec.tau, rng.child("labels"))
    splits = _stratified_split(y, spec.split_sizes, rng.child("split"))
    return SyntheticDataset(
        x1=x1, x2=x2, y=y, splits=splits, spec=spec, allocation=allocation, label_weights=w
    )


# ---------------------------------------------------------------- file I/O


def _b64(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr).tobytes()).decode("ascii")


def _unb64(payload: str, dtype, shape, name: str) -> np.ndarray:
    try:
        raw = base64.b64decode(payload.encode("ascii"), validate=True)
    except Exception as exc:
        raise DatasetFormatError(f"field '{name}': invalid base64 payload ({exc})") from exc
    arr = np.frombuffer(raw, dtype=dtype)
    expected = int(np.prod(shape))
    if arr.size != expected:
        raise DatasetFormatError(
            f"field '{name}': expected {expected} values for shape {shape}, got {arr.size}"
        )
    return arr.reshape(shape).copy()


def serialize(ds: SyntheticDataset, path) -> None:
    """Write the dataset as a single self-describing JSON container.

    Feature blocks are row-major uint8, labels and split indices int64,
    label weights float64 — all base64-encoded little-endian."""
    doc = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "spec": ds.spec.to_dict(),
        "allocation": ds.allocation.to_dict(),
        "n_total": ds.spec.n_total,
        "label_weights": _b64(ds.label_weights.astype("<f8")),
        "x1": _b64(ds.x1.astype(np.uint8)),
        "x2": _b64(ds.x2.astype(np.uint8)),
        "y": _b64(ds.y.astype("<i8")),
        "splits": {k: _b64(v.astype("<i8")) for k, v in ds.splits.items()},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def deserialize(path) -> SyntheticDataset:
    """Read a dataset container, validating structure and invariants."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(
                f"malformed dataset file at byte offset {exc.pos}: {exc.msg}"
            ) from exc
    try:
        if doc["format"] != DATASET_FORMAT:
            raise DatasetFormatError(f"unexpected format tag {doc['format']!r}")
        if doc["version"] != DATASET_VERSION:
            raise DatasetFormatError(f"unsupported dataset version {doc['version']}")
        try:
            spec = GenSpec.from_dict(doc["spec"])
            allocation = FeatureAllocation.from_dict(doc["allocation"])
        except ValueError as exc:
            raise DatasetFormatError(f"invalid header: {exc}") from exc
        n = spec.n_total
        x1 = _unb64(doc["x1"], np.uint8, (n, SHARED_DIM + UNIQUE_DIM), "x1").astype(np.float64)
        x2 = _unb64(doc["x2"], np.uint8, (n, SHARED_DIM + UNIQUE_DIM), "x2").astype(np.float64)
        y = _unb64(doc["y"], "<i8", (n,), "y")
        w = _unb64(doc["label_weights"], "<f8", (TOTAL_RELEVANT, N_CLASSES), "label_weights")
        splits = {
            k: _unb64(doc["splits"][k], "<i8", (spec.split_sizes[i],), f"splits.{k}")
            for i, k in enumerate(("train", "val", "test"))
        }
    except KeyError as exc:
        raise DatasetFormatError(f"missing field {exc.args[0]!r} in dataset file") from exc
    if not np.array_equal(x1[:, :SHARED_DIM], x2[:, :SHARED_DIM]):
        raise DatasetFormatError("shared blocks of x1 and x2 differ")
    if y.min() < 0 or y.max() >= N_CLASSES:
        raise DatasetFormatError("labels out of range")
    return SyntheticDataset(
        x1=x1, x2=x2, y=y, splits=splits, spec=spec, allocation=allocation, label_weights=w
    )
