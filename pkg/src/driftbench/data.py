"""Datasets, label coarsening, non-IID four-way splits and client sharding.

Splits and shards hold example ids only. Features and labels stay in the
source :class:`Dataset` and are gathered on demand through :meth:`Dataset.subset`.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Sequence

import numpy as np

from .errors import DataError, ParseError, PartitionError, ShardError

SPLIT_NAMES = ("A", "B", "C", "D")

CIFAR_RECORD_BYTES = 2 + 3072

# Standard CIFAR-100 fine label -> superclass table (fine labels in alphabetical order).
CIFAR100_FINE_TO_COARSE = (
    4, 1, 14, 8, 0, 6, 7, 7, 18, 3, 3, 14, 9, 18, 7, 11, 3, 9, 7, 11,
    6, 11, 5, 10, 7, 6, 13, 15, 3, 15, 0, 11, 1, 10, 12, 14, 16, 9, 11, 5,
    5, 19, 8, 8, 15, 13, 14, 17, 18, 10, 16, 4, 17, 4, 2, 0, 17, 4, 18, 17,
    10, 3, 2, 12, 12, 16, 12, 1, 9, 19, 2, 10, 0, 1, 16, 12, 9, 13, 15, 13,
    16, 19, 2, 4, 6, 19, 5, 5, 8, 19, 18, 1, 2, 15, 6, 0, 17, 8, 14, 13,
)


@dataclass(frozen=True)
class LabeledExample:
    id: int
    features: np.ndarray
    label: int


class Dataset:
    """Immutable table of ``(id, features, label)`` rows."""

    def __init__(self, ids, features, labels, num_classes: int):
        self.ids = np.asarray(ids, dtype=np.int64)
        self.features = np.asarray(features, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.num_classes = int(num_classes)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-d array")
        n = len(self.ids)
        if self.features.shape[0] != n or self.labels.shape != (n,):
            raise DataError("ids, features and labels disagree on the number of examples")
        if len(np.unique(self.ids)) != n:
            raise DataError("example ids must be unique")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DataError(f"labels must lie in [0, {self.num_classes})")
        for arr in (self.ids, self.features, self.labels):
            arr.setflags(write=False)
        self._row = {int(i): r for r, i in enumerate(self.ids)}

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return len(self.ids)

    def __iter__(self):
        for r in range(len(self)):
            yield LabeledExample(int(self.ids[r]), self.features[r], int(self.labels[r]))

    def rows(self, ids) -> np.ndarray:
        try:
            return np.array([self._row[int(i)] for i in ids], dtype=np.int64)
        except KeyError as exc:
            raise DataError(f"unknown example id {exc.args[0]}") from None

    def subset(self, ids) -> "Dataset":
        r = self.rows(ids)
        return Dataset(self.ids[r], self.features[r].reshape(len(r), self.feature_dim),
                       self.labels[r], self.num_classes)

    def example(self, id_) -> LabeledExample:
        r = self.rows([id_])[0]
        return LabeledExample(int(id_), self.features[r], int(self.labels[r]))

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.num_classes).tobytes())
        for arr in (self.ids, self.labels, self.features):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


# ---------------------------------------------------------------------------
# ingestion


def _parse_csv(text: str):
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError("empty csv file")
    labels, feats = [], []
    width = None
    for i, row in enumerate(rows):
        if len(row) < 2:
            raise ParseError("expected a label followed by at least one feature", i)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"expected {width} columns, got {len(row)}", i)
        try:
            label = int(row[0])
            values = [float(c) for c in row[1:]]
        except ValueError as exc:
            raise ParseError(str(exc), i) from None
        if not np.all(np.isfinite(values)):
            raise ParseError("non-finite feature value", i)
        labels.append(label)
        feats.append(values)
    return np.array(labels, dtype=np.int64), np.array(feats, dtype=np.float64)


def _parse_cifar(blob: bytes, label_mode: str):
    if not blob:
        raise ParseError("empty binary file")
    if len(blob) % CIFAR_RECORD_BYTES:
        raise ParseError(
            f"truncated record: file length {len(blob)} is not a multiple of {CIFAR_RECORD_BYTES}",
            len(blob) // CIFAR_RECORD_BYTES,
        )
    rec = np.frombuffer(blob, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
    coarse, fine = rec[:, 0].astype(np.int64), rec[:, 1].astype(np.int64)
    for name, labels, bound in (("coarse", coarse, 20), ("fine", fine, 100)):
        bad = np.flatnonzero(labels >= bound)
        if len(bad):
            raise DataError(f"record {int(bad[0])}: {name} label {int(labels[bad[0]])} out of range")
    labels = coarse if label_mode == "coarse" else fine
    return labels, rec[:, 2:].astype(np.float64) / 255.0, (20 if label_mode == "coarse" else 100)


def load_dataset(path, format: str = "csv", num_classes: int | None = None,
                 label_mode: str = "coarse") -> Dataset:
    """Load a label-first CSV or a CIFAR-100 style binary file.

    Ids are assigned in file order starting from 0. For CSV input the class
    count defaults to ``max(label) + 1``.
    """
    path = Path(path)
    if format == "csv":
        labels, feats = _parse_csv(path.read_text())
        k = int(labels.max()) + 1 if num_classes is None else int(num_classes)
        if labels.min() < 0 or labels.max() >= k:
            raise DataError(f"labels must lie in [0, {k})")
    elif format == "binary_cifar":
        if label_mode not in ("coarse", "fine"):
            raise DataError(f"label_mode must be 'coarse' or 'fine', got {label_mode!r}")
        labels, feats, k = _parse_cifar(path.read_bytes(), label_mode)
    else:
        raise DataError(f"unknown dataset format {format!r}")
    return Dataset(np.arange(len(labels)), feats, labels, k)


def synthesize_dataset(num_classes: int, per_class: int, feature_dim: int,
                       class_separation: float, seed: int, noise: float = 1.0) -> Dataset:
    """Gaussian blobs with class means at pairwise distance >= ``class_separation``.

    Means are random unit directions scaled by ``class_separation``; directions
    are redrawn until every pair is far enough apart, which for the dimensions
    used here terminates almost immediately. In one dimension the means fall
    back to an evenly spaced grid.
    """
    if min(num_classes, per_class, feature_dim) < 1 or not class_separation > 0:
        raise DataError("class count, per-class count, dimension and separation must be positive")
    rng = np.random.default_rng(seed)
    means = None
    for _ in range(1000):
        d = rng.normal(size=(num_classes, feature_dim))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        cand = d * class_separation
        gaps = np.linalg.norm(cand[:, None] - cand[None, :], axis=-1)
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() >= class_separation:
            means = cand
            break
    if means is None:
        means = np.zeros((num_classes, feature_dim))
        means[:, 0] = np.arange(num_classes) * class_separation
    labels = np.repeat(np.arange(num_classes), per_class)
    feats = means[labels] + noise * rng.normal(size=(len(labels), feature_dim))
    return Dataset(np.arange(len(labels)), feats, labels, num_classes)


def coarsen_labels(dataset: Dataset, mapping) -> Dataset:
    """Relabel through a fine -> coarse table (a dict, or a sequence indexed by fine label)."""
    table = dict(enumerate(mapping)) if not isinstance(mapping, Mapping) else dict(mapping)
    table = {int(k): int(v) for k, v in table.items()}
    coarse = sorted(set(table.values()))
    if coarse != list(range(len(coarse))):
        raise DataError("coarse labels must form a contiguous range starting at 0")
    try:
        labels = np.array([table[int(l)] for l in dataset.labels], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"label {exc.args[0]} has no coarse mapping") from None
    return Dataset(dataset.ids, dataset.features, labels, len(coarse))


# ---------------------------------------------------------------------------
# partitioning


@dataclass(frozen=True)
class SplitSet:
    splits: Dict[str, Dict[str, List[int]]]
    seed: int
    alpha: float
    test_fraction: float
    dataset_digest: str

    def train(self, name) -> List[int]:
        return self.splits[name]["train"]

    def test(self, name) -> List[int]:
        return self.splits[name]["test"]

    def all_ids(self) -> List[int]:
        return sorted(i for s in self.splits.values() for half in s.values() for i in half)

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "alpha": self.alpha,
            "test_fraction": self.test_fraction,
            "dataset_digest": self.dataset_digest,
            "splits": {k: {"train": list(v["train"]), "test": list(v["test"])}
                       for k, v in self.splits.items()},
        }
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SplitSet":
        doc = json.loads(text)
        splits = {k: {"train": [int(i) for i in v["train"]], "test": [int(i) for i in v["test"]]}
                  for k, v in doc["splits"].items()}
        return cls(splits, int(doc["seed"]), float(doc["alpha"]),
                   float(doc.get("test_fraction", 0.2)), str(doc.get("dataset_digest", "")))


def largest_remainder(proportions, total: int) -> np.ndarray:
    """Integer counts summing to ``total``, closest to ``proportions * total``.

    Ties in the fractional parts go to the lower index.
    """
    p = np.asarray(proportions, dtype=np.float64)
    raw = p / p.sum() * total
    counts = np.floor(raw).astype(np.int64)
    short = total - int(counts.sum())
    if short:
        frac = raw - counts
        order = np.lexsort((np.arange(len(p)), -frac))
        counts[order[:short]] += 1
    return counts


def validate_splitset(splitset: SplitSet, dataset: Dataset | None = None) -> None:
    """Raise PartitionError unless the eight id lists are disjoint, nonempty and (given a dataset) complete."""
    if sorted(splitset.splits) != list(SPLIT_NAMES):
        raise PartitionError(f"expected splits {SPLIT_NAMES}, got {sorted(splitset.splits)}")
    seen = set()
    total = 0
    for name in SPLIT_NAMES:
        for half in ("train", "test"):
            ids = splitset.splits[name][half]
            if not ids:
                raise PartitionError(f"split {name} has an empty {half} half")
            seen.update(ids)
            total += len(ids)
    if len(seen) != total:
        raise PartitionError("split id lists are not pairwise disjoint")
    if dataset is not None and seen != set(int(i) for i in dataset.ids):
        raise PartitionError("split ids do not cover the dataset exactly")


def partition_noniid(dataset: Dataset, num_splits: int = 4, alpha: float = 0.5,
                     test_fraction: float = 0.2, seed: int = 0) -> SplitSet:
    """Per-class Dirichlet allocation of examples to splits A-D with a stratified test holdout."""
    if num_splits != len(SPLIT_NAMES):
        raise PartitionError(f"only {len(SPLIT_NAMES)} splits are supported")
    if not alpha > 0 or not 0 < test_fraction < 1:
        raise PartitionError("alpha must be positive and test_fraction in (0, 1)")
    counts = dataset.class_counts()
    if counts.min() < num_splits:
        raise PartitionError(
            f"every class needs at least {num_splits} examples; class {int(counts.argmin())} has {int(counts.min())}"
        )
    rng = np.random.default_rng(seed)
    train = {s: [] for s in SPLIT_NAMES}
    test = {s: [] for s in SPLIT_NAMES}
    order = np.argsort(dataset.ids, kind="stable")
    ids_sorted, labels_sorted = dataset.ids[order], dataset.labels[order]
    for c in range(dataset.num_classes):
        members = ids_sorted[labels_sorted == c]
        if not len(members):
            continue
        props = rng.dirichlet(np.full(num_splits, alpha))
        alloc = largest_remainder(props, len(members))
        shuffled = rng.permutation(members)
        bounds = np.concatenate([[0], np.cumsum(alloc)])
        for k, s in enumerate(SPLIT_NAMES):
            chunk = shuffled[bounds[k]:bounds[k + 1]]
            n_test = int(np.floor(test_fraction * len(chunk) + 0.5))
            chunk = rng.permutation(chunk)
            test[s].extend(int(i) for i in chunk[:n_test])
            train[s].extend(int(i) for i in chunk[n_test:])
    for s in SPLIT_NAMES:
        for half, ids in (("train", train[s]), ("test", test[s])):
            if not ids:
                raise PartitionError(
                    f"split {s} received an empty {half} half; use a larger dataset or a larger alpha"
                )
    splits = {s: {"train": sorted(train[s]), "test": sorted(test[s])} for s in SPLIT_NAMES}
    return SplitSet(splits, int(seed), float(alpha), float(test_fraction), dataset.digest())


def split_histogram(splitset: SplitSet, dataset: Dataset) -> Dict[str, np.ndarray]:
    """Per-split class counts over the train and test halves together."""
    out = {}
    for s in SPLIT_NAMES:
        ids = splitset.train(s) + splitset.test(s)
        out[s] = np.bincount(dataset.labels[dataset.rows(ids)], minlength=dataset.num_classes)
    return out


# ---------------------------------------------------------------------------
# sharding


@dataclass(frozen=True)
class ClientShards:
    shards: Dict[int, List[int]]
    seed: int

    def sizes(self) -> List[int]:
        return [len(self.shards[c]) for c in sorted(self.shards)]


def shard_for_clients(split_train: Sequence[int], num_clients: int, seed: int) -> ClientShards:
    """Seeded shuffle, then deal ids round-robin so shard sizes differ by at most one."""
    if num_clients < 1:
        raise ShardError("num_clients must be at least 1")
    ids = np.asarray(sorted(int(i) for i in split_train), dtype=np.int64)
    if num_clients > len(ids):
        raise ShardError(
            f"{num_clients} clients but only {len(ids)} examples: every client shard would not be nonempty"
        )
    shuffled = np.random.default_rng(seed).permutation(ids)
    shards = {c: [int(i) for i in shuffled[c::num_clients]] for c in range(num_clients)}
    return ClientShards(shards, int(seed))
