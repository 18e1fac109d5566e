"""Stage 2: the synthetic feature generator, a conditional VAE in the aligned space.

E3 reads ``(condition || z2)`` and D3 reads ``(z3 || condition)``. The AFG is
frozen throughout.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .afg import AfgModel, encode_semantic, encode_visual
from .data_io import FeatureDataset
from .errors import DataError, NumericError, ShapeMismatchError, StateError
from .losses import LossBreakdown, sfg_loss_and_grads
from .nn import MlpNet, OptimState, RngStream, gaussian_head, optim_step, reparameterize, snap_to_float32


class ConditionMode(str, Enum):
    RAW_SEMANTIC = "raw"
    SAMPLED_Z1 = "sampled"
    MEAN_Z1 = "mean"


@dataclass
class SfgConfig:
    latent_dim: int | None = None  # None: same as the aligned dim
    e3_hidden: tuple = (64,)
    d3_hidden: tuple = (64,)
    beta2: float = 0.6
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    condition_mode: ConditionMode = ConditionMode.MEAN_Z1
    seed: int = 0

    def __post_init__(self):
        self.condition_mode = ConditionMode(self.condition_mode)
        if self.latent_dim is not None and self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if self.beta2 < 0:
            raise ValueError("beta2 must be >= 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")

    @classmethod
    def full_scale(cls, **overrides) -> "SfgConfig":
        """Full-scale hidden sizes and the full-scale learning rate."""
        base = dict(e3_hidden=(1990,), d3_hidden=(1560,), batch_size=50, learning_rate=1.5e-4)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["condition_mode"] = self.condition_mode.value
        return d


@dataclass
class SfgModel:
    e3: MlpNet
    d3: MlpNet
    latent_dim: int
    condition_mode: ConditionMode
    history: list = field(default_factory=list)
    config: SfgConfig | None = None

    @property
    def condition_dim(self) -> int:
        return self.d3.in_dim - self.latent_dim

    @property
    def aligned_dim(self) -> int:
        return self.d3.out_dim

    def fingerprint(self) -> str:
        return self.e3.fingerprint()[:16] + self.d3.fingerprint()[:16]


def init_sfg(afg: AfgModel, semantic_dim: int, config: SfgConfig) -> SfgModel:
    d = afg.aligned_dim
    latent = config.latent_dim or d
    cond = semantic_dim if config.condition_mode is ConditionMode.RAW_SEMANTIC else d
    rng = RngStream(config.seed).child("sfg-init")
    e3 = MlpNet([cond + d, *config.e3_hidden, 2 * latent], rng.child("e3"))
    d3 = MlpNet([latent + cond, *config.d3_hidden, d], rng.child("d3"))
    return SfgModel(e3, d3, latent, config.condition_mode, [], config)


def make_condition(afg: AfgModel, mode: ConditionMode, semantic_rows, rng: RngStream | None = None) -> np.ndarray:
    """Condition rows for D3 from class semantic rows under ``mode``."""
    mode = ConditionMode(mode)
    semantic_rows = np.atleast_2d(np.asarray(semantic_rows, dtype=np.float64))
    if mode is ConditionMode.RAW_SEMANTIC:
        return semantic_rows.copy()
    g1 = encode_semantic(afg, semantic_rows)
    if mode is ConditionMode.MEAN_Z1:
        return g1.mean.copy()
    if rng is None:
        raise ValueError("sampled condition needs an rng")
    return reparameterize(g1, rng)


def train_sfg(dataset: FeatureDataset, afg: AfgModel, config: SfgConfig) -> SfgModel:
    """Fit E3/D3 on aligned pairs of seen-class TRAIN samples; AFG stays fixed."""
    if afg is None or not afg.trained:
        raise StateError("AFG model is not trained")
    idx = dataset.train_indices()
    if idx.size == 0:
        raise DataError("dataset has no training samples")
    model = init_sfg(afg, dataset.semantic_dim, config)
    if config.epochs == 0:
        return model
    before = afg.fingerprint()

    x_vis = dataset.visual_rows(idx)
    sem = dataset.semantic[dataset.labels[idx]]
    g1 = encode_semantic(afg, sem)
    g2 = encode_visual(afg, x_vis)
    n, bs, d, latent = idx.size, config.batch_size, afg.aligned_dim, model.latent_dim
    mode = config.condition_mode
    params = model.e3.params() + model.d3.params()
    state = OptimState.for_params(params, learning_rate=config.learning_rate)
    rng = RngStream(config.seed).child("sfg-train")

    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        items, counts = [], []
        for b, start in enumerate(range(0, n, bs)):
            sel = perm[start:start + bs]
            if mode is ConditionMode.MEAN_Z1:
                cond = g1.mean[sel]
            elif mode is ConditionMode.SAMPLED_Z1:
                cond = g1.mean[sel] + g1.std[sel] * rng.normal((sel.size, d))
            else:
                cond = sem[sel]
            z2 = g2.mean[sel] + g2.std[sel] * rng.normal((sel.size, d))
            eps3 = rng.normal((sel.size, latent))
            bd, grads = sfg_loss_and_grads(model.e3, model.d3, cond, z2, eps3, config.beta2)
            if not np.isfinite(bd.total):
                raise NumericError(f"non-finite SFG loss at epoch {epoch}, batch {b}")
            try:
                optim_step(params, grads, state)
            except NumericError as exc:
                raise NumericError(f"SFG epoch {epoch}, batch {b}: {exc}") from None
            items.append(bd)
            counts.append(sel.size)
        model.history.append(LossBreakdown.mean(items, counts))

    snap_to_float32([model.e3, model.d3])
    if afg.fingerprint() != before:
        raise StateError("AFG parameters changed during SFG training")
    return model


def sfg_reconstruct(sfg: SfgModel, z1, z2, rng: RngStream) -> np.ndarray:
    """Encode ``(z1, z2)``, sample z3, decode with condition ``z1``."""
    single = np.ndim(z2) == 1
    z1 = np.atleast_2d(np.asarray(z1, dtype=np.float64))
    z2 = np.atleast_2d(np.asarray(z2, dtype=np.float64))
    if z1.shape[1] != sfg.condition_dim or z2.shape[1] != sfg.aligned_dim:
        raise ShapeMismatchError(
            f"expected condition dim {sfg.condition_dim} and aligned dim {sfg.aligned_dim}, "
            f"got {z1.shape[1]} and {z2.shape[1]}")
    g3, _ = gaussian_head(sfg.e3.forward(np.hstack([z1, z2])), sfg.latent_dim)
    z3 = reparameterize(g3, rng)
    out = sfg.d3.forward(np.hstack([z3, z1]))
    return out[0] if single else out


def decode(sfg: SfgModel, noise, cond) -> np.ndarray:
    noise = np.atleast_2d(noise)
    cond = np.atleast_2d(cond)
    return sfg.d3.forward(np.hstack([noise, cond]))
