"""Softmax linear classifier in the aligned space and GZSL metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .afg import AfgModel, encode_visual
from .errors import DataError, NumericError
from .nn import MlpNet, OptimState, RngStream, optim_step
from .synthesis import SynthesizedSet


class LinearClassifier:
    """Logits ``X @ W + b`` over ``class_ids`` (ascending). Ties in the argmax go
    to the lowest class id."""

    def __init__(self, net: MlpNet, class_ids):
        self.net = net
        self.class_ids = tuple(int(c) for c in class_ids)
        if len(set(self.class_ids)) != len(self.class_ids):
            raise ValueError("duplicate class ids")
        if list(self.class_ids) != sorted(self.class_ids):
            raise ValueError("class ids must be ascending")
        if len(net.layer_sizes) != 2 or net.out_dim != len(self.class_ids):
            raise ValueError("classifier net must be a single affine layer over the class list")

    @property
    def weight(self) -> np.ndarray:
        """``(num_classes, dim)`` view of the weights."""
        return self.net.weights[0].T

    @property
    def bias(self) -> np.ndarray:
        return self.net.biases[0]

    def logits(self, x) -> np.ndarray:
        return self.net.forward(np.atleast_2d(x))

    def predict(self, x) -> np.ndarray:
        return np.asarray(self.class_ids)[np.argmax(self.logits(x), axis=1)]


class OracleClassifier:
    """Test shortcut: returns the recorded label of each exact feature row."""

    def __init__(self, features, labels):
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        self._table = {row.tobytes(): int(y) for row, y in zip(features, labels)}
        self.class_ids = tuple(sorted(set(self._table.values())))

    def predict(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.array([self._table[row.tobytes()] for row in x], dtype=np.int64)


def train_linear_classifier(trainset: SynthesizedSet, epochs: int = 200, lr: float = 1e-3, seed: int = 0,
                            batch_size: int = 64, class_ids=None) -> LinearClassifier:
    """Minimise mean softmax cross-entropy with Adam over shuffled mini-batches."""
    ids = tuple(sorted(set(class_ids) if class_ids is not None else set(trainset.labels.tolist())))
    if len(ids) < 2:
        raise DataError("classifier needs at least two classes")
    missing = set(trainset.labels.tolist()) - set(ids)
    if missing:
        raise DataError(f"training labels {sorted(missing)} not in the class list")
    rng = RngStream(seed).child("classifier")
    clf = LinearClassifier(MlpNet([trainset.dim, len(ids)], rng.child("init")), ids)
    if epochs == 0 or len(trainset) == 0:
        return clf
    lookup = {c: i for i, c in enumerate(ids)}
    y = np.array([lookup[c] for c in trainset.labels.tolist()], dtype=np.int64)
    x = trainset.features
    params = clf.net.params()
    state = OptimState.for_params(params, learning_rate=lr)
    n = x.shape[0]
    for epoch in range(epochs):
        perm = rng.permutation(n)
        for start in range(0, n, batch_size):
            sel = perm[start:start + batch_size]
            xb = x[sel]
            logits = xb @ params[0] + params[1]
            vals, dlogits = kernels.softmax_xent_rows(logits, y[sel])
            if not np.isfinite(vals).all():
                raise NumericError(f"non-finite classifier loss at epoch {epoch}")
            dlogits /= sel.size
            optim_step(params, [xb.T @ dlogits, dlogits.sum(axis=0)], state)
    return clf


def per_class_accuracy_from_predictions(pred, labels, class_subset) -> tuple[float, dict]:
    pred = np.asarray(pred)
    labels = np.asarray(labels)
    per = {}
    for c in class_subset:
        mask = labels == c
        if not mask.any():
            raise DataError(f"class {c} has no samples")
        per[int(c)] = float(np.mean(pred[mask] == c))
    if not per:
        raise DataError("empty class subset")
    return float(np.mean(list(per.values()))), per


def per_class_accuracy(clf, features, labels, class_subset) -> tuple[float, dict]:
    """Unweighted mean over classes of each class's top-1 accuracy."""
    return per_class_accuracy_from_predictions(clf.predict(features), labels, class_subset)


def harmonic_mean(acc_s: float, acc_u: float) -> float:
    for a in (acc_s, acc_u):
        if not (0.0 <= a <= 1.0) or math.isnan(a):
            raise ValueError(f"accuracy {a} outside [0, 1]")
    if acc_s + acc_u == 0.0:
        return 0.0
    return 2.0 * acc_s * acc_u / (acc_s + acc_u)


@dataclass
class EvalReport:
    acc_s: float
    acc_u: float
    acc_h: float
    per_class: dict
    class_counts: dict
    seen_classes: tuple
    unseen_classes: tuple
    diversity: dict = field(default_factory=dict)
    fingerprint: str = ""
    label: str = "dfs"

    def to_text(self) -> str:
        lines = [
            f"label={self.label}",
            f"acc_s={self.acc_s!r}",
            f"acc_u={self.acc_u!r}",
            f"acc_h={self.acc_h!r}",
            f"num_seen_classes={len(self.seen_classes)}",
            f"num_unseen_classes={len(self.unseen_classes)}",
        ]
        if self.diversity:
            lines.append(f"mean_unseen_diversity={self.mean_unseen_diversity()!r}")
        lines.append(f"config_fingerprint={self.fingerprint}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        rows = ["class_id,group,accuracy,num_samples,diversity"]
        for c in sorted(self.per_class):
            group = "seen" if c in self.seen_classes else "unseen"
            div = self.diversity.get(c)
            rows.append(f"{c},{group},{self.per_class[c]!r},{self.class_counts[c]},"
                        f"{'' if div is None else repr(div)}")
        return "\n".join(rows) + "\n"

    def mean_unseen_diversity(self) -> float:
        vals = [self.diversity[c] for c in self.unseen_classes if c in self.diversity]
        return float(np.mean(vals)) if vals else float("nan")

    def write(self, out_dir, prefix: str = "") -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report = out / f"{prefix}report.txt"
        table = out / f"{prefix}per_class.csv"
        report.write_text(self.to_text(), encoding="utf-8")
        table.write_text(self.to_csv(), encoding="utf-8")
        return report, table


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        key, _, value = line.partition("=")
        out[key] = value
    return out


def aligned_test_features(afg: AfgModel, test_visual) -> np.ndarray:
    """Posterior means under E2; test-time mapping draws no samples."""
    return encode_visual(afg, np.atleast_2d(test_visual)).mean


def evaluate_aligned(clf, features, labels, seen_classes, unseen_classes, fingerprint="", label="dfs") -> EvalReport:
    labels = np.asarray(labels, dtype=np.int64)
    known = set(clf.class_ids)
    unknown = set(labels.tolist()) - known
    if unknown:
        raise DataError(f"test labels {sorted(unknown)} not covered by the classifier")
    pred = clf.predict(features)
    seen_present = [c for c in seen_classes if np.any(labels == c)]
    unseen_present = [c for c in unseen_classes if np.any(labels == c)]
    if not seen_present or not unseen_present:
        raise DataError("test set needs both seen and unseen samples")
    acc_s, per_s = per_class_accuracy_from_predictions(pred, labels, seen_present)
    acc_u, per_u = per_class_accuracy_from_predictions(pred, labels, unseen_present)
    counts = {int(c): int(np.sum(labels == c)) for c in seen_present + unseen_present}
    return EvalReport(acc_s, acc_u, harmonic_mean(acc_s, acc_u), {**per_s, **per_u}, counts,
                      tuple(seen_present), tuple(unseen_present), {}, fingerprint, label)


def evaluate_gzsl(clf, afg: AfgModel, test_visual_features, test_labels, seen_classes, unseen_classes,
                  fingerprint: str = "", label: str = "dfs") -> EvalReport:
    feats = aligned_test_features(afg, test_visual_features)
    return evaluate_aligned(clf, feats, test_labels, seen_classes, unseen_classes, fingerprint, label)
