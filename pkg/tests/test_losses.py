import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dfs_gzsl.errors import ShapeMismatchError
from dfs_gzsl.gradsuite import CASES, run_case
from dfs_gzsl.losses import (
    AfgLossWeights,
    AfgNets,
    LossBreakdown,
    Schedule,
    afg_loss,
    afg_loss_and_grads,
    ca_loss,
    cvae_loss,
    da_loss,
    kl_to_standard_normal,
    l1_distance,
    sfg_loss_and_grads,
    vae_loss,
)
from dfs_gzsl.nn import GaussianParams, MlpNet, RngStream

G = GaussianParams


def _nets(seed=0, sem=4, vis=5, d=3):
    r = RngStream(seed)
    return AfgNets(MlpNet([sem, 6, 2 * d], r.child(1)), MlpNet([d, 6, sem], r.child(2)),
                   MlpNet([vis, 6, 2 * d], r.child(3)), MlpNet([d, 6, vis], r.child(4)))


# ---- KL

def test_kl_prior_is_zero():
    assert kl_to_standard_normal(G(np.zeros(3), np.zeros(3))) == 0.0


def test_kl_unit_mean_shift():
    assert kl_to_standard_normal(G(np.array([1.0, 0.0]), np.zeros(2))) == pytest.approx(0.5, abs=1e-12)


def test_kl_monte_carlo_oracle():
    mu, lv = np.array([0.7, -1.2, 0.1]), np.array([0.5, -0.8, 1.1])
    n = 400_000
    z = mu + np.exp(0.5 * lv) * np.random.default_rng(0).standard_normal((n, 3))
    log_q = -0.5 * (((z - mu) ** 2) / np.exp(lv) + lv).sum(axis=1)
    log_p = -0.5 * (z ** 2).sum(axis=1)
    mc = float(np.mean(log_q - log_p))
    se = float(np.std(log_q - log_p) / np.sqrt(n))
    assert kl_to_standard_normal(G(mu, lv)) == pytest.approx(mc, abs=4 * se)


def test_kl_batch_mean():
    mu = np.array([[1.0, 0.0], [0.0, 0.0]])
    assert kl_to_standard_normal(G(mu, np.zeros((2, 2)))) == pytest.approx(0.25)


# ---- L1

def test_l1_examples():
    assert l1_distance([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert l1_distance([1.0, 2.0], [0.0, 0.0]) == 3.0


def test_l1_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        l1_distance(np.zeros(2), np.zeros(3))


# ---- VAE

def test_vae_zero_when_perfect():
    bd = vae_loss(np.ones(2), np.ones(2), G(np.zeros(2), np.zeros(2)), 0.5)
    assert bd.total == 0.0


def test_vae_beta_zero_is_reconstruction():
    bd = vae_loss(np.array([1.0, -1.0]), np.zeros(2), G(np.array([3.0, 1.0]), np.ones(2)), 0.0)
    assert bd.total == 2.0


def test_vae_worked_example():
    bd = vae_loss(np.array([1.0, 1.0]), np.zeros(2), G(np.array([1.0, 0.0]), np.zeros(2)), 0.5)
    assert bd.total == pytest.approx(2.25, abs=1e-12)
    assert bd.recomposed() == pytest.approx(bd.total, rel=1e-12)


# ---- distribution alignment

def test_da_identical_is_zero():
    g = G(np.array([0.3, -1.0]), np.array([0.2, 0.0]))
    assert da_loss(g, g) == 0.0


def test_da_mean_shift_three_four_five():
    assert da_loss(G(np.zeros(2), np.zeros(2)), G(np.array([3.0, 4.0]), np.zeros(2))) == pytest.approx(5.0)


def test_da_std_difference_hand_value():
    # std 1 vs std 2 on both coordinates, same means: sqrt(1 + 1)
    g1, g2 = G(np.zeros(2), np.zeros(2)), G(np.zeros(2), np.full(2, np.log(4.0)))
    assert da_loss(g1, g2) == pytest.approx(np.sqrt(2.0), abs=1e-12)


def test_da_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        da_loss(G(np.zeros(2), np.zeros(2)), G(np.zeros(3), np.zeros(3)))


vec = arrays(np.float64, 4, elements=st.floats(-3, 3))


@settings(max_examples=100, deadline=None)
@given(vec, vec, vec, vec, vec, vec)
def test_da_metric_axioms(m1, l1, m2, l2, m3, l3):
    a, b, c = G(m1, l1), G(m2, l2), G(m3, l3)
    ab, ba = da_loss(a, b), da_loss(b, a)
    assert ab >= 0.0
    assert abs(ab - ba) <= 1e-9
    assert da_loss(a, a) <= 1e-9
    if max(np.abs(m1 - m2).max(), np.abs(l1 - l2).max()) > 1e-6:
        assert ab > 1e-9
    assert ab <= da_loss(a, c) + da_loss(c, b) + 1e-9


# ---- cross reconstruction

def test_ca_constant_decoders():
    x1, x2 = np.array([1.0, 2.0]), np.array([-1.0, 0.5, 3.0])
    d1 = MlpNet.zeros([2, 2], output_bias=x1)
    d2 = MlpNet.zeros([2, 3], output_bias=x2)
    z = np.random.default_rng(0).normal(size=2)
    assert ca_loss(x1, x2, z, z, d1, d2) == 0.0


def test_ca_hand_evaluated():
    d1 = MlpNet([2, 2], weights=[np.eye(2)], biases=[np.zeros(2)])
    d2 = MlpNet([2, 2], weights=[2 * np.eye(2)], biases=[np.ones(2)])
    x1, x2 = np.array([1.0, 1.0]), np.array([0.0, 0.0])
    z1, z2 = np.array([1.0, -1.0]), np.array([0.5, 2.0])
    # D1(z2) = (0.5, 2) vs x1 -> 0.5 + 1 ; D2(z1) = (3, -1) vs x2 -> 3 + 1
    assert ca_loss(x1, x2, z1, z2, d1, d2) == pytest.approx(5.5)


# ---- full stage-1 objective

def _batch(n=3, seed=1):
    r = np.random.default_rng(seed)
    return r.normal(size=(n, 4)), r.normal(size=(n, 5)), r.normal(size=(n, 3)), r.normal(size=(n, 3))


def test_afg_without_alignment_is_two_vaes():
    nets = _nets()
    xs, xv, es, ev = _batch()
    bd, _ = afg_loss_and_grads(nets, xs, xv, es, ev, 0.5, 0.0, 0.0, need_grads=False)
    from dfs_gzsl.nn import gaussian_head
    g1, _ = gaussian_head(nets.e_sem.forward(xs), 3)
    g2, _ = gaussian_head(nets.e_vis.forward(xv), 3)
    v1 = vae_loss(nets.d_sem.forward(g1.mean + g1.std * es), xs, g1, 0.5)
    v2 = vae_loss(nets.d_vis.forward(g2.mean + g2.std * ev), xv, g2, 0.5)
    assert bd.total == pytest.approx(v1.total + v2.total, abs=1e-9)


def test_afg_zero_weights_perfect_reconstruction():
    xs, xv = np.array([[1.0, 2.0, 3.0, 4.0]]), np.array([[0.0, 1.0, 0.0, 1.0, 0.0]])
    nets = AfgNets(MlpNet.zeros([4, 6]), MlpNet.zeros([3, 4], output_bias=xs[0]),
                   MlpNet.zeros([5, 6]), MlpNet.zeros([3, 5], output_bias=xv[0]))
    bd = afg_loss((xs, xv), nets, AfgLossWeights(0.0, 0.0, 0.0), 0, (np.ones((1, 3)), np.ones((1, 3))))
    assert bd.total == 0.0


def test_afg_batch_is_mean_of_per_sample_totals():
    nets = _nets(2)
    xs, xv, es, ev = _batch(2, seed=5)
    w = AfgLossWeights()
    whole = afg_loss((xs, xv), nets, w, 0, (es, ev)).total
    single = [afg_loss((xs[i:i + 1], xv[i:i + 1]), nets, w, 0, (es[i:i + 1], ev[i:i + 1])).total for i in range(2)]
    assert whole == pytest.approx(np.mean(single), rel=1e-12)


def test_afg_empty_batch():
    with pytest.raises(ValueError):
        afg_loss((np.zeros((0, 4)), np.zeros((0, 5))), _nets(), AfgLossWeights(), 0,
                 (np.zeros((0, 3)), np.zeros((0, 3))))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), b1=st.floats(0, 2), eta=st.floats(0, 10), delta=st.floats(0, 5))
def test_breakdown_recomposes_and_is_nonnegative(seed, b1, eta, delta):
    nets = _nets(seed % 7)
    xs, xv, es, ev = _batch(4, seed)
    bd, _ = afg_loss_and_grads(nets, xs, xv, es, ev, b1, eta, delta, need_grads=False)
    assert np.isfinite(bd.total) and bd.total >= 0.0
    assert all(v >= 0 for v in bd.components.values())
    assert bd.recomposed() == pytest.approx(bd.total, rel=1e-6, abs=1e-12)
    assert bd.components["reconstruction"] == pytest.approx(
        bd.parts["reconstruction_sem"] + bd.parts["reconstruction_vis"])


def test_breakdown_mean_is_count_weighted():
    a = LossBreakdown(1.0, {"r": 1.0}, {"r": 1.0})
    b = LossBreakdown(4.0, {"r": 4.0}, {"r": 1.0})
    assert LossBreakdown.mean([a, b], [1, 3]).total == pytest.approx(3.25)


# ---- conditional VAE

def test_cvae_examples():
    z = np.array([1.0, -1.0])
    prior = G(np.zeros(2), np.zeros(2))
    assert cvae_loss(z, z, prior).total == 0.0
    off = G(np.array([2.0, 0.0]), np.zeros(2))
    assert cvae_loss(z, z + 0.5, off, beta2=0.0).total == pytest.approx(1.0)
    bd = cvae_loss(z, z + 0.5, off)
    assert bd.total == pytest.approx(1.0 + 0.6 * 2.0)
    assert bd.recomposed() == pytest.approx(bd.total)


def test_sfg_loss_matches_cvae_loss():
    r = RngStream(3)
    e3, d3 = MlpNet([7, 5, 4], r.child(1)), MlpNet([2 + 4, 5, 3], r.child(2))
    cond, z2, eps = r.normal((5, 4)), r.normal((5, 3)), r.normal((5, 2))
    bd, _ = sfg_loss_and_grads(e3, d3, cond, z2, eps, 0.6, need_grads=False)
    from dfs_gzsl.nn import gaussian_head
    g3, _ = gaussian_head(e3.forward(np.hstack([cond, z2])), 2)
    recon = d3.forward(np.hstack([g3.mean + g3.std * eps, cond]))
    assert bd.total == pytest.approx(cvae_loss(z2, recon, g3).total, rel=1e-12)


# ---- weights

def test_schedule_warmup():
    s = Schedule(4.0, start=2, end=6)
    assert [s.at(e) for e in (0, 2, 4, 6, 9)] == [0.0, 0.0, 2.0, 4.0, 4.0]
    w = AfgLossWeights(eta_warmup=Schedule(5.0, 0, 10))
    assert w.at(5) == (0.5, 2.5, 2.0)


@pytest.mark.parametrize("bad", [dict(beta1=-1.0), dict(eta=-0.1)])
def test_negative_weights_rejected(bad):
    with pytest.raises(ValueError):
        AfgLossWeights(**bad)


def test_schedule_end_before_start():
    with pytest.raises(ValueError):
        Schedule(1.0, start=5, end=2)


# ---- gradients (full 10-instance suite runs in the acceptance module)

@pytest.mark.parametrize("name", list(CASES))
def test_gradient_case(name):
    for i in range(2):
        r = run_case(name, i, seed=11)
        assert r.passed, (name, i, r.report.max_rel_error)


def test_sign_flip_detected():
    assert not run_case("afg_total", 0, sign_flip=True).passed
