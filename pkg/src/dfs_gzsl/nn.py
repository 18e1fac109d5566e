"""Small numpy MLP engine: forward/backward, Adam, reparameterised sampling and
a central-difference gradient checker.

All computation is float64. Parameters are initialised to float32-representable
values so checkpoints (stored as float32) round-trip bitwise.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import NumericError, ShapeMismatchError, StateError

LOGVAR_MIN = -30.0
LOGVAR_MAX = 10.0


class RngStream:
    """Seeded random stream. ``child(*keys)`` derives an independent sub-stream
    whose state depends only on ``(seed, *keys)``."""

    def __init__(self, seed: int, keys: tuple = ()):
        self.seed = int(seed)
        self.keys = tuple(int(k) for k in keys)
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, *self.keys])))

    def child(self, *keys) -> "RngStream":
        return RngStream(self.seed, self.keys + tuple(_key_int(k) for k in keys))

    def normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniform(self, low, high, shape) -> np.ndarray:
        return self._gen.uniform(low, high, shape)

    def integers(self, high: int, size) -> np.ndarray:
        return self._gen.integers(0, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def _key_int(k) -> int:
    if isinstance(k, (int, np.integer)):
        return int(k)
    # stable across processes, unlike hash()
    return int.from_bytes(hashlib.sha256(str(k).encode()).digest()[:4], "little")


@dataclass
class GaussianParams:
    """Diagonal Gaussian given by mean and log-variance (row-batched or 1-D)."""

    mean: np.ndarray
    log_var: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.log_var = np.asarray(self.log_var, dtype=np.float64)
        if self.mean.shape != self.log_var.shape:
            raise ShapeMismatchError(
                f"mean shape {self.mean.shape} != log_var shape {self.log_var.shape}"
            )

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]

    @property
    def var(self) -> np.ndarray:
        return np.exp(self.log_var)

    @property
    def std(self) -> np.ndarray:
        return np.exp(0.5 * self.log_var)


def gaussian_head(out: np.ndarray, dim: int) -> tuple[GaussianParams, np.ndarray]:
    """Split an encoder output ``[mean | raw log-var]`` and clamp the log-var.

    Returns the params and the pass-through mask for the log-var gradient.
    """
    if out.shape[-1] != 2 * dim:
        raise ShapeMismatchError(f"encoder output width {out.shape[-1]} != 2*{dim}")
    raw = out[..., dim:]
    mask = (raw >= LOGVAR_MIN) & (raw <= LOGVAR_MAX)
    return GaussianParams(out[..., :dim], np.clip(raw, LOGVAR_MIN, LOGVAR_MAX)), mask


def reparameterize(g: GaussianParams, rng: RngStream | None = None, noise: np.ndarray | None = None) -> np.ndarray:
    """z = mean + exp(log_var / 2) * eps, eps ~ N(0, I) from ``rng`` unless given."""
    if noise is None:
        if rng is None:
            raise ValueError("need rng or noise")
        noise = rng.normal(g.mean.shape)
    return g.mean + g.std * noise


def reparameterize_backward(g: GaussianParams, noise: np.ndarray, dz: np.ndarray):
    """Gradients of a loss w.r.t. (mean, log_var) given its gradient w.r.t. z."""
    return dz, dz * noise * 0.5 * g.std


@dataclass
class ForwardCache:
    inputs: list
    pre_acts: list


class MlpNet:
    """Fully connected net, ReLU on hidden layers, identity output.

    Weights are stored ``(fan_in, fan_out)`` so a row batch ``X`` maps to
    ``X @ W + b``.
    """

    def __init__(self, layer_sizes: Sequence[int], rng: RngStream | None = None,
                 weights: Sequence[np.ndarray] | None = None,
                 biases: Sequence[np.ndarray] | None = None):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"invalid layer sizes {layer_sizes}")
        self.layer_sizes = sizes
        if weights is None:
            if rng is None:
                raise ValueError("need rng or explicit weights")
            weights, biases = [], []
            for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
                bound = 1.0 / np.sqrt(fan_in)
                weights.append(_f32(rng.uniform(-bound, bound, (fan_in, fan_out))))
                biases.append(_f32(rng.uniform(-bound, bound, fan_out)))
        elif biases is None:
            biases = [np.zeros(s) for s in sizes[1:]]
        self.weights = [np.array(w, dtype=np.float64, order="C") for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            if self.weights[i].shape != (fan_in, fan_out) or self.biases[i].shape != (fan_out,):
                raise ShapeMismatchError(f"layer {i}: expected W {(fan_in, fan_out)}, b {(fan_out,)}")

    @classmethod
    def zeros(cls, layer_sizes, output_bias=None) -> "MlpNet":
        sizes = list(layer_sizes)
        weights = [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
        biases = [np.zeros(b) for b in sizes[1:]]
        if output_bias is not None:
            biases[-1] = np.asarray(output_bias, dtype=np.float64).copy()
        return cls(sizes, weights=weights, biases=biases)

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MlpNet":
        return MlpNet(self.layer_sizes, weights=[w.copy() for w in self.weights],
                      biases=[b.copy() for b in self.biases])

    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.in_dim or x.ndim not in (1, 2):
            raise ShapeMismatchError(f"input shape {x.shape} does not match input size {self.in_dim}")
        return x

    def forward(self, x) -> np.ndarray:
        x = self._check_input(x)
        last = len(self.weights) - 1
        h = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
        return h

    def forward_cached(self, x) -> tuple[np.ndarray, ForwardCache]:
        x = self._check_input(x)
        squeeze = x.ndim == 1
        h = np.atleast_2d(x)
        cache = ForwardCache([], [])
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            cache.inputs.append(h)
            z = h @ w + b
            cache.pre_acts.append(z)
            h = np.maximum(z, 0.0) if i < last else z
        return (h[0] if squeeze else h), cache

    def backward(self, cache: ForwardCache | None, upstream) -> tuple[list[np.ndarray], np.ndarray]:
        """Returns (grads aligned with ``params()``, grad w.r.t. the input)."""
        if cache is None or not cache.inputs:
            raise StateError("backward called without a cached forward pass")
        g = np.asarray(upstream, dtype=np.float64)
        squeeze = g.ndim == 1
        g = np.atleast_2d(g)
        if g.shape != cache.pre_acts[-1].shape:
            raise ShapeMismatchError(f"upstream shape {g.shape} != output shape {cache.pre_acts[-1].shape}")
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                g = g * (cache.pre_acts[i] > 0.0)
            grads[2 * i] = cache.inputs[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return grads, (g[0] if squeeze else g)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(repr(self.layer_sizes).encode())
        for p in self.params():
            h.update(np.ascontiguousarray(p).tobytes())
        return h.hexdigest()


def mlp_forward(net: MlpNet, x) -> np.ndarray:
    return net.forward(x)


def mlp_backward(net: MlpNet, cache: ForwardCache | None, upstream):
    return net.backward(cache, upstream)


def _f32(a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=np.float32).astype(np.float64)


def snap_to_float32(nets: Sequence[MlpNet]) -> None:
    """Round parameters in place to float32-representable values."""
    for net in nets:
        for p in net.params():
            p[...] = _f32(p)


@dataclass
class OptimState:
    """Adam moments for one parameter list."""

    m: list
    v: list
    step: int = 0
    learning_rate: float = 1.5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, learning_rate=1.5e-4, beta1=0.9, beta2=0.999, eps=1e-8) -> "OptimState":
        if learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not (0 < beta1 < 1 and 0 < beta2 < 1):
            raise ValueError("moment decay rates must lie in (0, 1)")
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params],
                   0, learning_rate, beta1, beta2, eps)


def optim_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: OptimState) -> None:
    """One Adam update, in place on ``params`` and ``state``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatchError("params, grads and optimizer state differ in length")
    for i, g in enumerate(grads):
        if g.shape != params[i].shape:
            raise ShapeMismatchError(f"grad {i} shape {g.shape} != param shape {params[i].shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter {i} at step {state.step + 1}")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        kernels.adam_update(p.reshape(-1), np.ascontiguousarray(g, dtype=np.float64).reshape(-1),
                            m.reshape(-1), v.reshape(-1), state.learning_rate,
                            state.beta1, state.beta2, state.eps, bc1, bc2)


@dataclass
class GradCheckReport:
    max_rel_error: float
    passed: bool
    tolerance: float
    n_checked: int
    n_skipped: int = 0
    per_param: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def grad_check(loss_fn: Callable, params: Sequence[np.ndarray], tolerance: float = 1e-4,
               h: float = 1e-5, skip: Callable | None = None, floor: float = 1e-6) -> GradCheckReport:
    """Compare analytic gradients to central differences.

    ``loss_fn(params) -> (loss, grads)`` must be deterministic. ``skip(i, idx)``
    may exclude coordinates (e.g. non-differentiable points); relative error is
    ``|a - n| / max(|a|, |n|, floor)``.
    """
    _, analytic = loss_fn(params)
    analytic = [np.array(g, dtype=np.float64) for g in analytic]
    worst = 0.0
    checked = skipped = 0
    per_param = []
    for i, p in enumerate(params):
        pw = 0.0
        for idx in np.ndindex(p.shape):
            if skip is not None and skip(i, idx):
                skipped += 1
                continue
            orig = p[idx]
            p[idx] = orig + h
            fp, _ = loss_fn(params)
            p[idx] = orig - h
            fm, _ = loss_fn(params)
            p[idx] = orig
            num = (fp - fm) / (2.0 * h)
            a = analytic[i][idx]
            err = float(abs(a - num) / max(abs(a), abs(num), floor))
            pw = max(pw, err)
            checked += 1
        per_param.append(pw)
        worst = max(worst, pw)
    notes = []
    if skipped:
        notes.append(f"{skipped} coordinate(s) skipped at non-differentiable points; "
                     "subgradient convention sign(0) = 0 applies there")
    return GradCheckReport(worst, worst <= tolerance, tolerance, checked, skipped, per_param, notes)
