"""Feature datasets, the manifest + raw-blob file format, and the synthetic
benchmark generator.

A manifest is a UTF-8 text file of ``key: value`` lines. Blob entries look like
``blob.visual: visual.f32 720x32``; each blob is a raw little-endian float32
array in row-major order. Integer-valued roles (labels, split, class ids,
provenance) are stored as float32 as well.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ClassOverlapError,
    FormatVersionError,
    LabelRangeError,
    LeakageError,
    ManifestError,
    NonFiniteDataError,
    ShapeMismatchError,
    TruncatedBlobError,
)
from .nn import RngStream

FORMAT_NAME = "dfs-gzsl-manifest"
FORMAT_VERSION = 1
TRAIN, TEST = 0, 1
_LE_F32 = np.dtype("<f4")


class FeatureDataset:
    """Visual features with labels, per-class semantic rows and a seen/unseen split.

    Visual rows are read through :meth:`visual_rows` (or the :attr:`visual`
    property for the whole matrix), so access can be audited.
    """

    def __init__(self, visual, labels, semantic, seen_classes, unseen_classes, split, validate=True):
        self._visual = np.asarray(visual, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.semantic = np.asarray(semantic, dtype=np.float64)
        self.seen_classes = tuple(sorted(int(c) for c in seen_classes))
        self.unseen_classes = tuple(sorted(int(c) for c in unseen_classes))
        self.split = np.asarray(split, dtype=np.int64)
        if validate:
            self.validate()

    def validate(self) -> None:
        v = self._visual
        if v.ndim != 2 or self.semantic.ndim != 2:
            raise ShapeMismatchError("visual and semantic must be matrices")
        n = v.shape[0]
        if self.labels.shape != (n,) or self.split.shape != (n,):
            raise ShapeMismatchError(f"labels {self.labels.shape} / split {self.split.shape} do not match {n} samples")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(self.semantic))):
            raise NonFiniteDataError("dataset contains NaN or Inf")
        overlap = set(self.seen_classes) & set(self.unseen_classes)
        if overlap:
            raise ClassOverlapError(f"classes {sorted(overlap)} are both seen and unseen")
        c = self.num_classes
        ids = self.seen_classes + self.unseen_classes
        if n and (self.labels.min() < 0 or self.labels.max() >= c):
            raise LabelRangeError(f"labels must lie in [0, {c})")
        if any(i < 0 or i >= c for i in ids):
            raise LabelRangeError(f"class ids must lie in [0, {c})")
        if not np.all(np.isin(self.split, (TRAIN, TEST))):
            raise ManifestError("split values must be 0 (train) or 1 (test)")
        train_labels = self.labels[self.split == TRAIN]
        bad = np.setdiff1d(train_labels, np.array(self.seen_classes, dtype=np.int64))
        if bad.size:
            raise LeakageError(f"TRAIN samples labelled with non-seen classes {bad.tolist()}")

    @property
    def visual(self) -> np.ndarray:
        return self._visual

    def visual_rows(self, idx) -> np.ndarray:
        return self._visual[np.asarray(idx, dtype=np.int64)]

    @property
    def num_samples(self) -> int:
        return self._visual.shape[0]

    @property
    def num_classes(self) -> int:
        return self.semantic.shape[0]

    @property
    def visual_dim(self) -> int:
        return self._visual.shape[1]

    @property
    def semantic_dim(self) -> int:
        return self.semantic.shape[1]

    def train_indices(self) -> np.ndarray:
        return np.flatnonzero(self.split == TRAIN)

    def test_indices(self) -> np.ndarray:
        return np.flatnonzero(self.split == TEST)

    def class_train_indices(self, c: int) -> np.ndarray:
        return np.flatnonzero((self.split == TRAIN) & (self.labels == c))


# ---------------------------------------------------------------- manifest io

def _fmt_shape(shape) -> str:
    return "x".join(str(int(s)) for s in shape)


def write_blob(path: Path, arr) -> None:
    Path(path).write_bytes(np.ascontiguousarray(arr, dtype=_LE_F32).tobytes())


def read_blob(path: Path, shape) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"missing blob {path}")
    raw = path.read_bytes()
    expected = int(np.prod(shape)) * 4
    if len(raw) < expected:
        raise TruncatedBlobError(f"{path.name}: {len(raw)} bytes, expected {expected}")
    if len(raw) != expected:
        raise ShapeMismatchError(f"{path.name}: {len(raw)} bytes do not match declared shape {tuple(shape)}")
    return np.frombuffer(raw, dtype=_LE_F32).reshape(shape).astype(np.float64)


def write_manifest(path, kind: str, fields: dict, blobs: dict) -> Path:
    """Write ``blobs`` (role -> array) next to a manifest at ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"format: {FORMAT_NAME}", f"format_version: {FORMAT_VERSION}", f"kind: {kind}"]
    for key, value in fields.items():
        lines.append(f"{key}: {value}")
    for role, arr in blobs.items():
        arr = np.asarray(arr)
        fname = f"{role}.f32"
        write_blob(path.parent / fname, arr)
        lines.append(f"blob.{role}: {fname} {_fmt_shape(arr.shape)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_manifest(path, kind: str | None = None) -> tuple[dict, dict]:
    """Returns (scalar fields, role -> float64 array)."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest {path} not found")
    fields, blobs = {}, {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise ManifestError(f"{path.name}:{lineno}: expected 'key: value'")
        key, value = key.strip(), value.strip()
        if key.startswith("blob."):
            parts = value.split()
            if len(parts) != 2:
                raise ManifestError(f"{path.name}:{lineno}: blob entry needs 'file shape'")
            try:
                shape = tuple(int(s) for s in parts[1].split("x"))
            except ValueError:
                raise ManifestError(f"{path.name}:{lineno}: bad shape {parts[1]!r}") from None
            blobs[key[5:]] = (parts[0], shape)
        else:
            fields[key] = value
    if fields.get("format") != FORMAT_NAME:
        raise ManifestError(f"{path.name}: not a {FORMAT_NAME} file")
    if fields.get("format_version") != str(FORMAT_VERSION):
        raise FormatVersionError(
            f"{path.name}: format_version {fields.get('format_version')!r}, supported {FORMAT_VERSION}")
    if kind is not None and fields.get("kind") != kind:
        raise ManifestError(f"{path.name}: kind {fields.get('kind')!r}, expected {kind!r}")
    arrays = {role: read_blob(path.parent / fname, shape) for role, (fname, shape) in blobs.items()}
    return fields, arrays


def _as_ints(arr: np.ndarray, role: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteDataError(f"{role} contains NaN or Inf")
    ints = np.rint(arr)
    if np.any(ints != arr):
        raise ManifestError(f"{role} must hold integer values")
    return ints.astype(np.int64)


DATASET_ROLES = ("visual", "labels", "semantic", "split", "seen_ids", "unseen_ids")


def save_dataset(dataset: FeatureDataset, out_dir, name: str = "dataset.manifest") -> Path:
    out = Path(out_dir) / name
    return write_manifest(out, "dataset", {"num_classes": dataset.num_classes}, {
        "visual": dataset.visual,
        "labels": dataset.labels,
        "semantic": dataset.semantic,
        "split": dataset.split,
        "seen_ids": np.array(dataset.seen_classes),
        "unseen_ids": np.array(dataset.unseen_classes),
    })


def load_dataset(manifest_path) -> FeatureDataset:
    fields, arrays = read_manifest(manifest_path, kind="dataset")
    missing = [r for r in DATASET_ROLES if r not in arrays]
    if missing:
        raise ManifestError(f"manifest lacks blobs {missing}")
    visual, semantic = arrays["visual"], arrays["semantic"]
    if visual.ndim != 2 or semantic.ndim != 2:
        raise ShapeMismatchError("visual and semantic blobs must be 2-D")
    if "num_classes" in fields and int(fields["num_classes"]) != semantic.shape[0]:
        raise ShapeMismatchError(f"num_classes {fields['num_classes']} != semantic rows {semantic.shape[0]}")
    for role in ("labels", "split", "seen_ids", "unseen_ids"):
        if arrays[role].ndim != 1:
            raise ShapeMismatchError(f"{role} blob must be 1-D")
    return FeatureDataset(
        visual,
        _as_ints(arrays["labels"], "labels"),
        semantic,
        _as_ints(arrays["seen_ids"], "seen_ids"),
        _as_ints(arrays["unseen_ids"], "unseen_ids"),
        _as_ints(arrays["split"], "split"),
    )


# --------------------------------------------------------- synthetic benchmark

@dataclass
class SyntheticBenchmarkSpec:
    """Class-conditional Gaussian benchmark.

    Semantic prototypes live on a ``semantic_rank``-dimensional subspace (plus
    noise) so a map learned on seen classes can transfer to unseen ones. Class
    means are a linear image of the prototypes plus ``map_noise``.

    Within-class covariance is ``scale**2 * ((1 - iso) * L L^T + iso * I)`` where
    ``L`` (unit-norm rows, rank ``within_rank``) is shared by all classes and
    ``iso = isotropic_fraction``; every coordinate therefore has variance
    ``scale**2``, with ``scale = covariance_scale * (1 + jitter)`` per class.

    The defaults put visual features on a scale of a few units per coordinate,
    large enough that the summed L1 reconstruction error dominates the
    alignment term, as it does with real CNN features.
    """

    num_seen: int = 8
    num_unseen: int = 4
    visual_dim: int = 32
    semantic_dim: int = 12
    samples_per_class: int = 60
    semantic_rank: int = 4
    semantic_noise: float = 0.05
    map_gain: float = 5.0
    map_noise: float = 0.1
    covariance_scale: float = 6.0
    within_rank: int = 3
    isotropic_fraction: float = 0.2
    scale_jitter: float = 0.0
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        counts = (self.num_seen, self.num_unseen, self.visual_dim, self.semantic_dim,
                  self.samples_per_class, self.semantic_rank, self.within_rank)
        if min(counts) < 1:
            raise ValueError("benchmark counts and dimensions must be >= 1")
        if self.covariance_scale < 0 or self.semantic_noise < 0 or self.map_noise < 0:
            raise ValueError("noise and covariance scales must be non-negative")
        if not 0.0 <= self.isotropic_fraction <= 1.0:
            raise ValueError("isotropic_fraction must lie in [0, 1]")
        if not 0.0 <= self.scale_jitter < 1.0:
            raise ValueError("scale_jitter must lie in [0, 1)")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")

    @property
    def num_classes(self) -> int:
        return self.num_seen + self.num_unseen

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BenchmarkTruth:
    semantic: np.ndarray
    class_means: np.ndarray
    class_scales: np.ndarray
    within_factor: np.ndarray
    unseen_classes: tuple


def benchmark_truth(spec: SyntheticBenchmarkSpec) -> BenchmarkTruth:
    """Ground-truth generative parameters (independent of the sample draw)."""
    rng = RngStream(spec.seed).child("truth")
    c, r = spec.num_classes, spec.semantic_rank
    factors = rng.normal((c, r))
    basis = rng.normal((r, spec.semantic_dim)) / np.sqrt(r)
    semantic = factors @ basis + spec.semantic_noise * rng.normal((c, spec.semantic_dim))
    lin = spec.map_gain * rng.normal((spec.semantic_dim, spec.visual_dim)) / np.sqrt(spec.semantic_dim)
    means = semantic @ lin + spec.map_noise * rng.normal((c, spec.visual_dim))
    scales = spec.covariance_scale * (1.0 + spec.scale_jitter * rng.uniform(-1.0, 1.0, c))
    unseen = tuple(sorted(int(i) for i in rng.permutation(c)[: spec.num_unseen]))
    factor = rng.normal((spec.visual_dim, spec.within_rank))
    factor /= np.linalg.norm(factor, axis=1, keepdims=True)
    f32 = lambda a: a.astype(np.float32).astype(np.float64)  # noqa: E731
    return BenchmarkTruth(f32(semantic), means, scales, factor, unseen)


def generate_synthetic_benchmark(spec: SyntheticBenchmarkSpec | None = None) -> FeatureDataset:
    spec = spec or SyntheticBenchmarkSpec()
    truth = benchmark_truth(spec)
    rng = RngStream(spec.seed).child("samples")
    n = spec.samples_per_class
    n_train = max(1, min(n - 1, int(round(spec.train_fraction * n)))) if n > 1 else 1
    visual, labels, split = [], [], []
    for c in range(spec.num_classes):
        structured = rng.normal((n, spec.within_rank)) @ truth.within_factor.T
        iso = rng.normal((n, spec.visual_dim))
        noise = np.sqrt(1.0 - spec.isotropic_fraction) * structured + np.sqrt(spec.isotropic_fraction) * iso
        visual.append(truth.class_means[c] + truth.class_scales[c] * noise)
        labels.append(np.full(n, c))
        s = np.full(n, TEST)
        if c not in truth.unseen_classes:
            s[:n_train] = TRAIN
        split.append(s)
    seen = [c for c in range(spec.num_classes) if c not in truth.unseen_classes]
    return FeatureDataset(
        np.vstack(visual).astype(np.float32).astype(np.float64),
        np.concatenate(labels),
        truth.semantic,
        seen,
        truth.unseen_classes,
        np.concatenate(split),
    )
