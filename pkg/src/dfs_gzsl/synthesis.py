"""Inference-time feature production in the aligned space.

Seen classes: posterior samples of real training features under E2.
Unseen classes: D3 decodes standard-normal noise joined with the class
condition. The baseline generator samples the semantic posterior directly.
Each class draws from its own sub-stream keyed on (seed, class id).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .afg import AfgModel, encode_semantic, encode_visual
from .data_io import FeatureDataset, read_manifest, write_manifest
from .errors import DataError, ShapeMismatchError
from .nn import RngStream, reparameterize
from .sfg import ConditionMode, SfgModel, decode, make_condition


class Provenance(IntEnum):
    SEEN_POSTERIOR = 0
    UNSEEN_DECODED = 1
    UNSEEN_BASELINE = 2


@dataclass
class SynthesisPlan:
    per_seen_class_count: int = 200
    per_unseen_class_count: int = 400
    seed: int = 0

    def __post_init__(self):
        if self.per_seen_class_count < 1 or self.per_unseen_class_count < 1:
            raise ValueError("synthesis counts must be >= 1")


@dataclass
class SynthesizedSet:
    features: np.ndarray
    labels: np.ndarray
    provenance: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.provenance = np.asarray(self.provenance, dtype=np.int64)
        if self.features.ndim != 2:
            raise ShapeMismatchError("features must be a matrix")
        n = self.features.shape[0]
        if self.labels.shape != (n,) or self.provenance.shape != (n,):
            raise ShapeMismatchError("features, labels and provenance differ in row count")

    @classmethod
    def empty(cls, dim: int) -> "SynthesizedSet":
        return cls(np.zeros((0, dim)), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def synthesize_seen(afg: AfgModel, dataset: FeatureDataset, plan: SynthesisPlan) -> SynthesizedSet:
    rng = RngStream(plan.seed).child("seen")
    k = plan.per_seen_class_count
    feats, labels = [], []
    for c in dataset.seen_classes:
        idx = dataset.class_train_indices(c)
        if idx.size == 0:
            raise DataError(f"seen class {c} has no training features")
        sub = rng.child(c)
        picks = idx[sub.integers(idx.size, k)]
        g2 = encode_visual(afg, dataset.visual_rows(picks))
        feats.append(reparameterize(g2, sub))
        labels.append(np.full(k, c))
    if not feats:
        return SynthesizedSet.empty(afg.aligned_dim)
    return SynthesizedSet(np.vstack(feats), np.concatenate(labels),
                          np.full(k * len(feats), Provenance.SEEN_POSTERIOR))


def _unseen_semantic(dataset: FeatureDataset, c: int) -> np.ndarray:
    if c >= dataset.semantic.shape[0] or not np.all(np.isfinite(dataset.semantic[c])):
        raise DataError(f"unseen class {c} has no semantic embedding")
    return dataset.semantic[c]


def synthesize_unseen(afg: AfgModel, sfg: SfgModel, dataset: FeatureDataset, plan: SynthesisPlan) -> SynthesizedSet:
    """Decode noise joined with each unseen class's condition; reads no visual data."""
    rng = RngStream(plan.seed).child("unseen")
    k = plan.per_unseen_class_count
    feats, labels = [], []
    for c in dataset.unseen_classes:
        a = _unseen_semantic(dataset, c)
        sub = rng.child(c)
        noise = sub.normal((k, sfg.latent_dim))
        if sfg.condition_mode is ConditionMode.SAMPLED_Z1:
            cond = make_condition(afg, sfg.condition_mode, np.repeat(a[None, :], k, axis=0), sub)
        else:
            cond = np.repeat(make_condition(afg, sfg.condition_mode, a), k, axis=0)
        feats.append(decode(sfg, noise, cond))
        labels.append(np.full(k, c))
    if not feats:
        return SynthesizedSet.empty(afg.aligned_dim)
    return SynthesizedSet(np.vstack(feats), np.concatenate(labels),
                          np.full(k * len(feats), Provenance.UNSEEN_DECODED))


def synthesize_unseen_baseline(afg: AfgModel, dataset: FeatureDataset, plan: SynthesisPlan) -> SynthesizedSet:
    """Baseline generator: z ~ N(mu1, sigma1) from the class's semantic posterior."""
    rng = RngStream(plan.seed).child("unseen")
    k = plan.per_unseen_class_count
    feats, labels = [], []
    for c in dataset.unseen_classes:
        a = _unseen_semantic(dataset, c)
        g1 = encode_semantic(afg, np.repeat(a[None, :], k, axis=0))
        feats.append(reparameterize(g1, rng.child(c)))
        labels.append(np.full(k, c))
    if not feats:
        return SynthesizedSet.empty(afg.aligned_dim)
    return SynthesizedSet(np.vstack(feats), np.concatenate(labels),
                          np.full(k * len(feats), Provenance.UNSEEN_BASELINE))


def diversity_score(s: SynthesizedSet) -> dict[int, float]:
    """Per class: trace of the unbiased sample covariance of its rows."""
    out = {}
    for c in np.unique(s.labels):
        rows = s.features[s.labels == c]
        if rows.shape[0] < 2:
            raise DataError(f"class {int(c)} has fewer than 2 rows")
        out[int(c)] = float(rows.var(axis=0, ddof=1).sum())
    return out


def build_classifier_trainset(seen: SynthesizedSet, unseen: SynthesizedSet) -> SynthesizedSet:
    """Seen block then unseen block, each stably sorted by class id."""
    if len(seen) and len(unseen) and seen.dim != unseen.dim:
        raise ShapeMismatchError(f"aligned dims differ: {seen.dim} vs {unseen.dim}")
    blocks = []
    for s in (seen, unseen):
        order = np.argsort(s.labels, kind="stable")
        blocks.append((s.features[order], s.labels[order], s.provenance[order]))
    dim = seen.dim if len(seen) else unseen.dim
    return SynthesizedSet(
        np.vstack([b[0].reshape(-1, dim) for b in blocks]),
        np.concatenate([b[1] for b in blocks]),
        np.concatenate([b[2] for b in blocks]),
    )


def save_synthesized(s: SynthesizedSet, out_dir, name: str = "synthesized.manifest") -> Path:
    return write_manifest(Path(out_dir) / name, "synthesized", {"aligned_dim": s.dim}, {
        "features": s.features,
        "labels": s.labels,
        "provenance": s.provenance,
    })


def load_synthesized(manifest_path) -> SynthesizedSet:
    _, arrays = read_manifest(manifest_path, kind="synthesized")
    return SynthesizedSet(arrays["features"].reshape(arrays["labels"].shape[0], -1),
                          np.rint(arrays["labels"]), np.rint(arrays["provenance"]))
