"""End-to-end runs: train both stages, synthesize, fit the classifier, evaluate."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .afg import AfgConfig, AfgModel, train_afg
from .classifier import EvalReport, evaluate_gzsl, train_linear_classifier
from .data_io import FeatureDataset, SyntheticBenchmarkSpec
from .sfg import SfgConfig, SfgModel, train_sfg
from .synthesis import (
    SynthesisPlan,
    build_classifier_trainset,
    diversity_score,
    synthesize_seen,
    synthesize_unseen,
    synthesize_unseen_baseline,
)


@dataclass
class ClassifierSettings:
    epochs: int = 200
    lr: float = 1e-3
    batch_size: int = 64


@dataclass
class RunConfig:
    afg: AfgConfig = field(default_factory=AfgConfig)
    sfg: SfgConfig = field(default_factory=SfgConfig)
    plan: SynthesisPlan = field(default_factory=SynthesisPlan)
    classifier: ClassifierSettings = field(default_factory=ClassifierSettings)
    dataset_path: str | None = None
    benchmark: SyntheticBenchmarkSpec | None = None
    out_dir: str | None = None
    seed: int = 0

    def __post_init__(self):
        if (self.dataset_path is None) == (self.benchmark is None):
            raise ValueError("set exactly one of dataset_path / benchmark")

    def to_dict(self) -> dict:
        return {
            "afg": self.afg.to_dict(),
            "sfg": self.sfg.to_dict(),
            "plan": asdict(self.plan),
            "classifier": asdict(self.classifier),
            "dataset_path": self.dataset_path,
            "benchmark": self.benchmark.to_dict() if self.benchmark else None,
            "seed": self.seed,
        }

    def fingerprint(self) -> str:
        return fingerprint_of(self.to_dict())


def fingerprint_of(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def seeded(seed: int, afg: AfgConfig | None = None, sfg: SfgConfig | None = None):
    """Copies of the stage configs with their seeds set to ``seed``."""
    a = AfgConfig(**{**vars(afg or AfgConfig()), "seed": seed})
    s = SfgConfig(**{**vars(sfg or SfgConfig()), "seed": seed})
    return a, s


def train_models(dataset: FeatureDataset, afg_config: AfgConfig, sfg_config: SfgConfig):
    afg = train_afg(dataset, afg_config)
    sfg = train_sfg(dataset, afg, sfg_config)
    return afg, sfg


def evaluate_models(afg: AfgModel, sfg: SfgModel | None, dataset: FeatureDataset, plan: SynthesisPlan,
                    clf: ClassifierSettings, baseline: bool = False, fingerprint: str = "") -> EvalReport:
    """Synthesize the classifier set with DFS (or the baseline generator) and evaluate."""
    seen = synthesize_seen(afg, dataset, plan)
    if baseline:
        unseen = synthesize_unseen_baseline(afg, dataset, plan)
    else:
        unseen = synthesize_unseen(afg, sfg, dataset, plan)
    trainset = build_classifier_trainset(seen, unseen)
    model = train_linear_classifier(trainset, clf.epochs, clf.lr, plan.seed, clf.batch_size,
                                    class_ids=dataset.seen_classes + dataset.unseen_classes)
    test = dataset.test_indices()
    report = evaluate_gzsl(model, afg, dataset.visual_rows(test), dataset.labels[test],
                           dataset.seen_classes, dataset.unseen_classes, fingerprint,
                           label="baseline" if baseline else "dfs")
    report.diversity = diversity_score(unseen)
    return report


@dataclass
class PairedResult:
    seed: int
    dfs: EvalReport
    baseline: EvalReport | None

    def summary(self) -> dict:
        out = {"seed": self.seed, "dfs_acc_h": self.dfs.acc_h,
               "dfs_diversity": self.dfs.mean_unseen_diversity()}
        if self.baseline is not None:
            out.update(baseline_acc_h=self.baseline.acc_h,
                       baseline_diversity=self.baseline.mean_unseen_diversity())
        return out


def run_paired(dataset: FeatureDataset, seed: int, afg_config: AfgConfig | None = None,
               sfg_config: SfgConfig | None = None, plan: SynthesisPlan | None = None,
               clf: ClassifierSettings | None = None, compare_baseline: bool = True) -> PairedResult:
    a, s = seeded(seed, afg_config, sfg_config)
    plan = SynthesisPlan(**{**vars(plan or SynthesisPlan()), "seed": seed})
    clf = clf or ClassifierSettings()
    afg, sfg = train_models(dataset, a, s)
    fp = fingerprint_of({"afg": a.to_dict(), "sfg": s.to_dict(), "plan": asdict(plan), "clf": asdict(clf)})
    dfs = evaluate_models(afg, sfg, dataset, plan, clf, baseline=False, fingerprint=fp)
    base = evaluate_models(afg, None, dataset, plan, clf, baseline=True, fingerprint=fp) if compare_baseline else None
    return PairedResult(seed, dfs, base)


def mean_or_nan(values) -> float:
    values = list(values)
    return float(np.mean(values)) if values else float("nan")
