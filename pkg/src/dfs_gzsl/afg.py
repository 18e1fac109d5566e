"""Stage 1: the aligned feature generator.

Two VAEs, one per modality (1 = semantic, 2 = visual), trained jointly with a
2-Wasserstein distribution-alignment term and an L1 cross-reconstruction term.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .data_io import FeatureDataset
from .errors import DataError, NumericError, ShapeMismatchError
from .losses import AfgLossWeights, AfgNets, LossBreakdown, Schedule, afg_loss_and_grads
from .nn import GaussianParams, MlpNet, OptimState, RngStream, gaussian_head, optim_step, snap_to_float32


@dataclass
class AfgConfig:
    """Stage-1 settings. Defaults are sized for the synthetic benchmark: with a
    few hundred training rows, 100 epochs give roughly a tenth of the optimizer
    steps of a full-scale run, so the default learning rate is raised to 1e-3.
    ``full_scale_fine_grained`` restores the full-scale values."""

    aligned_dim: int = 16
    e_sem_hidden: tuple = (64,)
    d_sem_hidden: tuple = (64,)
    e_vis_hidden: tuple = (64,)
    d_vis_hidden: tuple = (64,)
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    weights: AfgLossWeights = field(default_factory=AfgLossWeights)
    seed: int = 0

    def __post_init__(self):
        if self.aligned_dim < 1:
            raise ValueError("aligned_dim must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @classmethod
    def full_scale_fine_grained(cls, **overrides) -> "AfgConfig":
        """Full-scale sizes for fine-grained datasets (aligned dim 256)."""
        base = dict(aligned_dim=256, e_sem_hidden=(3600,), d_sem_hidden=(1330,),
                    e_vis_hidden=(6240,), d_vis_hidden=(4980,), batch_size=50, learning_rate=1.5e-4)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = _weights_dict(self.weights)
        return d


def _weights_dict(w: AfgLossWeights) -> dict:
    return {k: (asdict(v) if isinstance(v, Schedule) else v) for k, v in vars(w).items()}


@dataclass
class AfgModel:
    nets: AfgNets
    aligned_dim: int
    history: list = field(default_factory=list)
    config: AfgConfig | None = None
    trained: bool = False

    @property
    def e_sem(self) -> MlpNet:
        return self.nets.e_sem

    @property
    def d_sem(self) -> MlpNet:
        return self.nets.d_sem

    @property
    def e_vis(self) -> MlpNet:
        return self.nets.e_vis

    @property
    def d_vis(self) -> MlpNet:
        return self.nets.d_vis

    def fingerprint(self) -> str:
        return "".join(net.fingerprint()[:16] for net in self.nets.as_list())


def init_afg(semantic_dim: int, visual_dim: int, config: AfgConfig) -> AfgModel:
    rng = RngStream(config.seed).child("afg-init")
    d = config.aligned_dim
    nets = AfgNets(
        e_sem=MlpNet([semantic_dim, *config.e_sem_hidden, 2 * d], rng.child("e_sem")),
        d_sem=MlpNet([d, *config.d_sem_hidden, semantic_dim], rng.child("d_sem")),
        e_vis=MlpNet([visual_dim, *config.e_vis_hidden, 2 * d], rng.child("e_vis")),
        d_vis=MlpNet([d, *config.d_vis_hidden, visual_dim], rng.child("d_vis")),
    )
    return AfgModel(nets, d, [], config)


def train_afg(dataset: FeatureDataset, config: AfgConfig) -> AfgModel:
    """Fit stage 1 on the seen-class TRAIN samples only."""
    if not dataset.seen_classes:
        raise DataError("dataset has no seen classes")
    idx = dataset.train_indices()
    if idx.size == 0:
        raise DataError("dataset has no training samples")
    model = init_afg(dataset.semantic_dim, dataset.visual_dim, config)
    model.trained = True
    if config.epochs == 0:
        return model

    x_vis = dataset.visual_rows(idx)
    x_sem = dataset.semantic[dataset.labels[idx]]
    n, d, bs = idx.size, config.aligned_dim, config.batch_size
    params = model.nets.params()
    state = OptimState.for_params(params, learning_rate=config.learning_rate)
    rng = RngStream(config.seed).child("afg-train")

    for epoch in range(config.epochs):
        beta1, eta, delta = config.weights.at(epoch)
        perm = rng.permutation(n)
        items, counts = [], []
        for b, start in enumerate(range(0, n, bs)):
            sel = perm[start:start + bs]
            eps_sem = rng.normal((sel.size, d))
            eps_vis = rng.normal((sel.size, d))
            bd, grads = afg_loss_and_grads(model.nets, x_sem[sel], x_vis[sel], eps_sem, eps_vis,
                                           beta1, eta, delta)
            if not np.isfinite(bd.total):
                raise NumericError(f"non-finite AFG loss at epoch {epoch}, batch {b}")
            try:
                optim_step(params, grads, state)
            except NumericError as exc:
                raise NumericError(f"AFG epoch {epoch}, batch {b}: {exc}") from None
            items.append(bd)
            counts.append(sel.size)
        model.history.append(LossBreakdown.mean(items, counts))

    snap_to_float32(model.nets.as_list())
    return model


def _encode(net: MlpNet, x, dim: int, in_dim: int) -> GaussianParams:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != in_dim:
        raise ShapeMismatchError(f"input dimension {x.shape[-1]} != {in_dim}")
    g, _ = gaussian_head(net.forward(x), dim)
    return g


def encode_semantic(model: AfgModel, a) -> GaussianParams:
    return _encode(model.e_sem, a, model.aligned_dim, model.e_sem.in_dim)


def encode_visual(model: AfgModel, v) -> GaussianParams:
    return _encode(model.e_vis, v, model.aligned_dim, model.e_vis.in_dim)
