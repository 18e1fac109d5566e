"""Loss terms for both training stages.

Every function accepts a single vector or a row batch; batch values are the
arithmetic mean over rows of the per-row quantity. The ``*_grad`` helpers
return gradients of that mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ShapeMismatchError
from .nn import ForwardCache, GaussianParams, MlpNet, gaussian_head, reparameterize_backward


def _rows(a) -> np.ndarray:
    return np.atleast_2d(np.asarray(a, dtype=np.float64))


def _same(a, b, what):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{what}: shapes {a.shape} and {b.shape} differ")


@dataclass
class Schedule:
    """Linear warm-up from 0 at ``start`` epoch to ``final`` at ``end`` epoch."""

    final: float
    start: int = 0
    end: int = 0

    def __post_init__(self):
        if self.final < 0:
            raise ValueError("loss weights must be non-negative")
        if self.end < self.start:
            raise ValueError("warm-up end must not precede its start")

    def at(self, epoch: int) -> float:
        if self.end == self.start:
            return self.final if epoch >= self.start else 0.0
        frac = (epoch - self.start) / (self.end - self.start)
        return self.final * min(max(frac, 0.0), 1.0)


@dataclass
class AfgLossWeights:
    beta1: float = 0.5
    eta: float = 5.0
    delta: float = 2.0
    beta1_warmup: Schedule | None = None
    eta_warmup: Schedule | None = None
    delta_warmup: Schedule | None = None

    def __post_init__(self):
        if min(self.beta1, self.eta, self.delta) < 0:
            raise ValueError("loss weights must be non-negative")

    def at(self, epoch: int) -> tuple[float, float, float]:
        def pick(value, sched):
            return value if sched is None else sched.at(epoch)
        return (pick(self.beta1, self.beta1_warmup), pick(self.eta, self.eta_warmup),
                pick(self.delta, self.delta_warmup))


@dataclass
class LossBreakdown:
    """``total`` equals ``sum(weights[k] * components[k])``; ``parts`` holds
    per-modality sub-values for reporting."""

    total: float
    components: dict
    weights: dict
    parts: dict = field(default_factory=dict)

    def recomposed(self) -> float:
        return float(sum(self.weights[k] * v for k, v in self.components.items()))

    @staticmethod
    def mean(items: list["LossBreakdown"], counts: list[int]) -> "LossBreakdown":
        """Count-weighted average of breakdowns sharing one weight set."""
        n = float(sum(counts))
        first = items[0]

        def avg(get):
            return float(sum(get(it) * c for it, c in zip(items, counts)) / n)

        comps = {k: avg(lambda it, k=k: it.components[k]) for k in first.components}
        parts = {k: avg(lambda it, k=k: it.parts[k]) for k in first.parts}
        total = float(sum(first.weights[k] * v for k, v in comps.items()))
        return LossBreakdown(total, comps, dict(first.weights), parts)


def kl_to_standard_normal(g: GaussianParams) -> float:
    vals, _, _ = kernels.kl_rows(_rows(g.mean), _rows(g.log_var))
    return float(vals.mean())


def kl_grad(g: GaussianParams):
    mu, lv = _rows(g.mean), _rows(g.log_var)
    _, dmu, dlv = kernels.kl_rows(mu, lv)
    n = mu.shape[0]
    return dmu / n, dlv / n


def l1_distance(a, b) -> float:
    a, b = _rows(a), _rows(b)
    _same(a, b, "l1_distance")
    vals, _ = kernels.l1_rows(a, b)
    return float(vals.mean())


def l1_grad(a, b) -> np.ndarray:
    """Gradient of the mean L1 w.r.t. ``a`` (0 at ties)."""
    a, b = _rows(a), _rows(b)
    _same(a, b, "l1_distance")
    _, g = kernels.l1_rows(a, b)
    return g / a.shape[0]


def vae_loss(recon, target, g: GaussianParams, beta1: float) -> LossBreakdown:
    rec = l1_distance(recon, target)
    kl = kl_to_standard_normal(g)
    return LossBreakdown(rec + beta1 * kl, {"reconstruction": rec, "kl": kl},
                         {"reconstruction": 1.0, "kl": float(beta1)})


def da_loss(g1: GaussianParams, g2: GaussianParams) -> float:
    """2-Wasserstein distance between two diagonal Gaussians (batch mean)."""
    if g1.mean.shape != g2.mean.shape:
        raise ShapeMismatchError(f"da_loss: dims {g1.mean.shape} and {g2.mean.shape} differ")
    vals = kernels.w2_rows(_rows(g1.mean), _rows(g1.log_var), _rows(g2.mean), _rows(g2.log_var))[0]
    return float(vals.mean())


def da_grad(g1: GaussianParams, g2: GaussianParams):
    """Gradients of ``da_loss`` w.r.t. (mu1, lv1, mu2, lv2)."""
    if g1.mean.shape != g2.mean.shape:
        raise ShapeMismatchError(f"da_loss: dims {g1.mean.shape} and {g2.mean.shape} differ")
    m1 = _rows(g1.mean)
    _, a, b, c, d = kernels.w2_rows(m1, _rows(g1.log_var), _rows(g2.mean), _rows(g2.log_var))
    n = m1.shape[0]
    return a / n, b / n, c / n, d / n


def ca_loss(x1, x2, z1, z2, d1: MlpNet, d2: MlpNet) -> float:
    """Cross-reconstruction: each modality decoded from the other's latent."""
    return l1_distance(d1.forward(_rows(z2)), x1) + l1_distance(d2.forward(_rows(z1)), x2)


def cvae_loss(z2, z2_recon, g3: GaussianParams, beta2: float = 0.6) -> LossBreakdown:
    rec = l1_distance(z2_recon, z2)
    kl = kl_to_standard_normal(g3)
    return LossBreakdown(rec + beta2 * kl, {"reconstruction": rec, "kl": kl},
                         {"reconstruction": 1.0, "kl": float(beta2)})


@dataclass
class AfgNets:
    e_sem: MlpNet
    d_sem: MlpNet
    e_vis: MlpNet
    d_vis: MlpNet

    def as_list(self) -> list[MlpNet]:
        return [self.e_sem, self.d_sem, self.e_vis, self.d_vis]

    def params(self) -> list[np.ndarray]:
        return [p for net in self.as_list() for p in net.params()]


def afg_loss_and_grads(nets: AfgNets, x_sem, x_vis, noise_sem, noise_vis,
                       beta1: float, eta: float, delta: float, need_grads: bool = True):
    """Stage-1 objective on a batch and its gradients w.r.t. ``nets.params()``.

    Semantic is modality 1, visual modality 2. ``noise_*`` are the standard
    normal draws used by the reparameterisation, shape ``(batch, aligned_dim)``.
    """
    x_sem, x_vis = _rows(x_sem), _rows(x_vis)
    n = x_sem.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    if x_vis.shape[0] != n:
        raise ShapeMismatchError("semantic and visual batches differ in length")
    dim = nets.d_sem.in_dim
    noise_sem, noise_vis = _rows(noise_sem), _rows(noise_vis)

    h1, c_es = nets.e_sem.forward_cached(x_sem)
    h2, c_ev = nets.e_vis.forward_cached(x_vis)
    g1, mask1 = gaussian_head(h1, dim)
    g2, mask2 = gaussian_head(h2, dim)
    z1 = g1.mean + g1.std * noise_sem
    z2 = g2.mean + g2.std * noise_vis

    # one decoder pass per decoder: rows [own latent; other modality's latent]
    r_sem, c_ds = nets.d_sem.forward_cached(np.vstack([z1, z2]))
    r_vis, c_dv = nets.d_vis.forward_cached(np.vstack([z2, z1]))

    rec_sem_rows, s_rec_sem = kernels.l1_rows(r_sem[:n], x_sem)
    ca_sem_rows, s_ca_sem = kernels.l1_rows(r_sem[n:], x_sem)
    rec_vis_rows, s_rec_vis = kernels.l1_rows(r_vis[:n], x_vis)
    ca_vis_rows, s_ca_vis = kernels.l1_rows(r_vis[n:], x_vis)
    kl1_rows, dmu1_kl, dlv1_kl = kernels.kl_rows(g1.mean, g1.log_var)
    kl2_rows, dmu2_kl, dlv2_kl = kernels.kl_rows(g2.mean, g2.log_var)
    da_rows, dmu1_da, dlv1_da, dmu2_da, dlv2_da = kernels.w2_rows(g1.mean, g1.log_var, g2.mean, g2.log_var)

    parts = {
        "reconstruction_sem": float(rec_sem_rows.mean()),
        "reconstruction_vis": float(rec_vis_rows.mean()),
        "kl_sem": float(kl1_rows.mean()),
        "kl_vis": float(kl2_rows.mean()),
        "ca_sem": float(ca_sem_rows.mean()),
        "ca_vis": float(ca_vis_rows.mean()),
    }
    comps = {
        "reconstruction": parts["reconstruction_sem"] + parts["reconstruction_vis"],
        "kl": parts["kl_sem"] + parts["kl_vis"],
        "da": float(da_rows.mean()),
        "ca": parts["ca_sem"] + parts["ca_vis"],
    }
    weights = {"reconstruction": 1.0, "kl": float(beta1), "da": float(eta), "ca": float(delta)}
    total = float(sum(weights[k] * v for k, v in comps.items()))
    breakdown = LossBreakdown(total, comps, weights, parts)
    if not need_grads:
        return breakdown, None

    inv = 1.0 / n
    g_sem_dec, dz_sem_stack = nets.d_sem.backward(c_ds, np.vstack([s_rec_sem, delta * s_ca_sem]) * inv)
    g_vis_dec, dz_vis_stack = nets.d_vis.backward(c_dv, np.vstack([s_rec_vis, delta * s_ca_vis]) * inv)
    dz1 = dz_sem_stack[:n] + dz_vis_stack[n:]
    dz2 = dz_vis_stack[:n] + dz_sem_stack[n:]

    dmu1, dlv1 = reparameterize_backward(g1, noise_sem, dz1)
    dmu2, dlv2 = reparameterize_backward(g2, noise_vis, dz2)
    dmu1 = dmu1 + (beta1 * dmu1_kl + eta * dmu1_da) * inv
    dlv1 = dlv1 + (beta1 * dlv1_kl + eta * dlv1_da) * inv
    dmu2 = dmu2 + (beta1 * dmu2_kl + eta * dmu2_da) * inv
    dlv2 = dlv2 + (beta1 * dlv2_kl + eta * dlv2_da) * inv

    g_sem_enc, _ = nets.e_sem.backward(c_es, np.hstack([dmu1, dlv1 * mask1]))
    g_vis_enc, _ = nets.e_vis.backward(c_ev, np.hstack([dmu2, dlv2 * mask2]))
    return breakdown, g_sem_enc + g_sem_dec + g_vis_enc + g_vis_dec


def afg_loss(batch, nets: AfgNets, weights: AfgLossWeights, epoch: int, noise) -> LossBreakdown:
    """Stage-1 loss for ``batch = (x_sem, x_vis)`` with fixed ``noise = (eps_sem, eps_vis)``."""
    x_sem, x_vis = batch
    if len(x_sem) == 0:
        raise ValueError("empty batch")
    beta1, eta, delta = weights.at(epoch)
    breakdown, _ = afg_loss_and_grads(nets, x_sem, x_vis, noise[0], noise[1], beta1, eta, delta,
                                      need_grads=False)
    return breakdown


def sfg_loss_and_grads(e3: MlpNet, d3: MlpNet, cond, z2, noise3, beta2: float, need_grads: bool = True):
    """Conditional VAE objective on aligned pairs; gradients w.r.t. E3 then D3 params.

    E3 consumes ``cond || z2``; D3 consumes ``z3 || cond``.
    """
    cond, z2, noise3 = _rows(cond), _rows(z2), _rows(noise3)
    n = z2.shape[0]
    latent = d3.in_dim - cond.shape[1]
    h3, c_e3 = e3.forward_cached(np.hstack([cond, z2]))
    g3, mask3 = gaussian_head(h3, latent)
    z3 = g3.mean + g3.std * noise3
    recon, c_d3 = d3.forward_cached(np.hstack([z3, cond]))
    rec_rows, s_rec = kernels.l1_rows(recon, z2)
    kl_rows, dmu_kl, dlv_kl = kernels.kl_rows(g3.mean, g3.log_var)
    rec, kl = float(rec_rows.mean()), float(kl_rows.mean())
    breakdown = LossBreakdown(rec + beta2 * kl, {"reconstruction": rec, "kl": kl},
                              {"reconstruction": 1.0, "kl": float(beta2)})
    if not need_grads:
        return breakdown, None
    inv = 1.0 / n
    g_d3, dx_d3 = d3.backward(c_d3, s_rec * inv)
    dmu, dlv = reparameterize_backward(g3, noise3, dx_d3[:, :latent])
    dmu = dmu + beta2 * dmu_kl * inv
    dlv = dlv + beta2 * dlv_kl * inv
    g_e3, _ = e3.backward(c_e3, np.hstack([dmu, dlv * mask3]))
    return breakdown, g_e3 + g_d3


__all__ = [
    "AfgLossWeights",
    "AfgNets",
    "ForwardCache",
    "LossBreakdown",
    "Schedule",
    "afg_loss",
    "afg_loss_and_grads",
    "ca_loss",
    "cvae_loss",
    "da_grad",
    "da_loss",
    "kl_grad",
    "kl_to_standard_normal",
    "l1_distance",
    "l1_grad",
    "sfg_loss_and_grads",
    "vae_loss",
]
