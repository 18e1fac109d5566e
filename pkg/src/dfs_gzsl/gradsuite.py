"""Finite-difference checks for every training objective at small sizes.

Each case builds a random instance, wraps the analytic gradient routine as
``loss_fn(params) -> (loss, grads)`` and hands it to :func:`nn.grad_check`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .losses import (
    AfgNets,
    afg_loss_and_grads,
    da_grad,
    da_loss,
    kl_grad,
    kl_to_standard_normal,
    l1_distance,
    l1_grad,
    sfg_loss_and_grads,
)
from .nn import GaussianParams, GradCheckReport, MlpNet, RngStream, grad_check

# Dyadic step: on dyadic inputs the L1 difference quotient is exact.
L1_STEP = 2.0 ** -12


@dataclass
class CaseResult:
    name: str
    report: GradCheckReport
    instance: int

    @property
    def passed(self) -> bool:
        return self.report.passed


def _flip(fn: Callable, on: bool) -> Callable:
    if not on:
        return fn

    def flipped(params):
        loss, grads = fn(params)
        return loss, [-g for g in grads]
    return flipped


def _afg_nets(rng: RngStream, sem: int, vis: int, d: int, hidden: int) -> AfgNets:
    return AfgNets(
        MlpNet([sem, hidden, 2 * d], rng.child("e1")),
        MlpNet([d, hidden, sem], rng.child("d1")),
        MlpNet([vis, hidden, 2 * d], rng.child("e2")),
        MlpNet([d, hidden, vis], rng.child("d2")),
    )


def _afg_case(rng: RngStream, beta1, eta, delta, minus=None):
    """Stage-1 objective over all network parameters; ``minus`` subtracts a
    second weighting so a single term can be isolated by linearity."""
    n, sem, vis, d = 6, 5, 8, 3
    nets = _afg_nets(rng, sem, vis, d, 7)
    xs, xv = rng.normal((n, sem)), rng.normal((n, vis))
    es, ev = rng.normal((n, d)), rng.normal((n, d))
    params = nets.params()

    def fn(_):
        bd, g = afg_loss_and_grads(nets, xs, xv, es, ev, beta1, eta, delta)
        if minus is None:
            return bd.total, g
        bd0, g0 = afg_loss_and_grads(nets, xs, xv, es, ev, *minus)
        return bd.total - bd0.total, [a - b for a, b in zip(g, g0)]
    return fn, params


def case_vae(rng):
    return _afg_case(rng, 0.5, 0.0, 0.0)


def case_da_net(rng):
    return _afg_case(rng, 0.5, 5.0, 0.0, minus=(0.5, 0.0, 0.0))


def case_ca(rng):
    return _afg_case(rng, 0.5, 0.0, 2.0, minus=(0.5, 0.0, 0.0))


def case_afg_total(rng):
    return _afg_case(rng, 0.5, 5.0, 2.0)


def case_da(rng):
    n, d = 4, 6
    params = [rng.normal((n, d)), 0.5 * rng.normal((n, d)), rng.normal((n, d)), 0.5 * rng.normal((n, d))]

    def fn(p):
        g1, g2 = GaussianParams(p[0], p[1]), GaussianParams(p[2], p[3])
        return da_loss(g1, g2), list(da_grad(g1, g2))
    return fn, params


def case_kl(rng):
    n, d = 4, 8
    params = [rng.normal((n, d)), rng.normal((n, d))]

    def fn(p):
        g = GaussianParams(p[0], p[1])
        return kl_to_standard_normal(g), list(kl_grad(g))
    return fn, params


def case_l1(rng, ties: bool = False):
    """Dyadic inputs (multiples of 1/64). With ``ties`` a third of the
    coordinates of ``a`` equal ``b`` exactly."""
    n, d = 4, 8
    b = rng.integers(256, (n, d)).astype(np.float64) / 64.0 - 2.0
    a = rng.integers(256, (n, d)).astype(np.float64) / 64.0 - 2.0
    if ties:
        a[:, ::3] = b[:, ::3]

    def fn(p):
        return l1_distance(p[0], b), [l1_grad(p[0], b)]
    return fn, [a], b


def case_cvae(rng):
    n, d, cond, latent = 6, 4, 5, 3
    e3 = MlpNet([cond + d, 7, 2 * latent], rng.child("e3"))
    d3 = MlpNet([latent + cond, 7, d], rng.child("d3"))
    c, z2, eps = rng.normal((n, cond)), rng.normal((n, d)), rng.normal((n, latent))
    params = e3.params() + d3.params()

    def fn(_):
        bd, g = sfg_loss_and_grads(e3, d3, c, z2, eps, 0.6)
        return bd.total, g
    return fn, params


def case_xent(rng):
    n, d, k = 8, 6, 5
    x = rng.normal((n, d))
    y = rng.integers(k, n)
    params = [rng.normal((d, k)), rng.normal(k)]

    def fn(p):
        vals, dl = kernels.softmax_xent_rows(x @ p[0] + p[1], y)
        dl = dl / n
        return float(vals.mean()), [x.T @ dl, dl.sum(axis=0)]
    return fn, params


CASES: dict[str, Callable] = {
    "kl": case_kl,
    "l1": case_l1,
    "vae": case_vae,
    "da": case_da,
    "da_net": case_da_net,
    "ca": case_ca,
    "afg_total": case_afg_total,
    "cvae": case_cvae,
    "xent": case_xent,
}


def run_case(name: str, instance: int = 0, seed: int = 0, tolerance: float = 1e-4,
             sign_flip: bool = False, l1_ties: bool = False) -> CaseResult:
    rng = RngStream(seed).child("gradcheck", name, instance)
    if name == "l1":
        fn, params, b = case_l1(rng, ties=l1_ties)
        skip = (lambda i, idx: params[0][idx] == b[idx])
        report = grad_check(_flip(fn, sign_flip), params, tolerance, h=L1_STEP, skip=skip)
    else:
        fn, params = CASES[name](rng)
        report = grad_check(_flip(fn, sign_flip), params, tolerance, floor=1e-4)
    return CaseResult(name, report, instance)


def run_suite(names=None, instances: int = 10, seed: int = 0, tolerance: float = 1e-4,
              sign_flip: tuple = (), l1_ties: bool = False) -> list[CaseResult]:
    names = list(CASES) if names is None else list(names)
    unknown = set(names) - set(CASES)
    if unknown:
        raise ValueError(f"unknown gradient cases: {sorted(unknown)}")
    return [run_case(n, i, seed, tolerance, n in sign_flip, l1_ties)
            for n in names for i in range(instances)]
