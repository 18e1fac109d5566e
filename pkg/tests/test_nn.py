import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfs_gzsl.errors import NumericError, ShapeMismatchError, StateError
from dfs_gzsl.nn import (
    LOGVAR_MIN,
    GaussianParams,
    MlpNet,
    OptimState,
    RngStream,
    gaussian_head,
    grad_check,
    mlp_backward,
    mlp_forward,
    optim_step,
    reparameterize,
    snap_to_float32,
)


def test_zero_weights_output_is_bias():
    net = MlpNet.zeros([5, 7, 3], output_bias=[1.0, -2.0, 0.5])
    x = np.random.default_rng(0).normal(size=(4, 5))
    assert np.array_equal(net.forward(x), np.tile([1.0, -2.0, 0.5], (4, 1)))


def test_identity_layer_passes_nonnegative_input():
    net = MlpNet([3, 3], weights=[np.eye(3)], biases=[np.zeros(3)])
    x = np.array([0.0, 1.5, 2.0])
    assert np.array_equal(net.forward(x), x)


def test_two_three_one_hand_evaluation():
    w1 = np.array([[0.1, -0.2, 0.3], [0.4, 0.5, -0.6]])
    b1 = np.array([0.05, 0.0, -0.1])
    w2 = np.array([[1.0], [-1.0], [2.0]])
    b2 = np.array([0.25])
    net = MlpNet([2, 3, 1], weights=[w1, w2], biases=[b1, b2])
    x = np.array([1.0, 2.0])
    # pre-activations: 0.1+0.8+0.05=0.95, -0.2+1.0=0.8, 0.3-1.2-0.1=-1.0 -> relu (0.95, 0.8, 0)
    expected = 0.95 - 0.8 + 0.0 + 0.25
    assert net.forward(x)[0] == pytest.approx(expected, abs=1e-12)


def test_forward_rejects_wrong_width():
    net = MlpNet([3, 2], RngStream(0))
    with pytest.raises(ShapeMismatchError):
        net.forward(np.ones(4))


def test_backward_without_forward_is_state_error():
    net = MlpNet([3, 2], RngStream(0))
    with pytest.raises(StateError):
        net.backward(None, np.ones(2))
    with pytest.raises(StateError):
        mlp_backward(net, None, np.ones(2))


def test_zero_upstream_gives_zero_grads():
    net = MlpNet([4, 6, 2], RngStream(1))
    out, cache = net.forward_cached(np.ones((3, 4)))
    grads, dx = net.backward(cache, np.zeros_like(out))
    assert all(not g.any() for g in grads) and not dx.any()


def test_backward_matches_finite_differences():
    rng = RngStream(2)
    net = MlpNet([4, 5, 3], rng.child("net"))
    x = rng.normal((6, 4))
    c = rng.normal((6, 3))

    def loss(params):
        out, cache = net.forward_cached(x)
        grads, _ = net.backward(cache, c)
        return float((out * c).sum()), grads

    assert grad_check(loss, net.params()).passed


def test_wrappers_delegate():
    net = MlpNet([2, 2], RngStream(0))
    x = np.array([[0.3, -0.4]])
    assert np.array_equal(mlp_forward(net, x), net.forward(x))


def test_init_is_seeded_bounded_and_float32():
    a = MlpNet([9, 4], RngStream(5))
    b = MlpNet([9, 4], RngStream(5))
    assert a.fingerprint() == b.fingerprint()
    assert np.all(np.abs(a.weights[0]) <= 1 / 3)
    assert np.array_equal(a.weights[0], a.weights[0].astype(np.float32).astype(np.float64))


def test_snap_to_float32():
    net = MlpNet([2, 2], weights=[np.full((2, 2), 0.1)], biases=[np.zeros(2)])
    snap_to_float32([net])
    assert net.weights[0][0, 0] == float(np.float32(0.1))


# ---- Gaussian sampling

def test_very_negative_log_var_gives_mean():
    g = GaussianParams(np.array([1.0, -2.0]), np.array([-20.0, -20.0]))
    z = reparameterize(g, RngStream(0))
    assert np.allclose(z, g.mean, atol=1e-4)


def test_gaussian_head_clamps_and_masks():
    out = np.array([[0.0, 0.0, -100.0, 3.0]])
    g, mask = gaussian_head(out, 2)
    assert g.log_var[0, 0] == LOGVAR_MIN and g.log_var[0, 1] == 3.0
    assert mask.tolist() == [[False, True]]


def test_reparameterize_deterministic_under_seed():
    g = GaussianParams(np.zeros(3), np.zeros(3))
    assert np.array_equal(reparameterize(g, RngStream(9)), reparameterize(g, RngStream(9)))


def test_reparameterize_statistics():
    n = 100_000
    g = GaussianParams(np.zeros((n, 3)), np.zeros((n, 3)))
    z = reparameterize(g, RngStream(4))
    assert np.all(np.abs(z.mean(axis=0)) < 0.02)
    assert np.all(np.abs(z.var(axis=0) - 1.0) < 0.05)


@settings(max_examples=25, deadline=None)
@given(mu=st.floats(-5, 5), lv=st.floats(-4, 4), seed=st.integers(0, 2**16))
def test_reparameterize_moments_property(mu, lv, seed):
    n = 4000
    g = GaussianParams(np.full((n, 1), mu), np.full((n, 1), lv))
    z = reparameterize(g, RngStream(seed))[:, 0]
    sd = np.exp(0.5 * lv)
    tol = 5.0 / np.sqrt(n)
    assert abs(z.mean() - mu) < tol * sd
    assert abs(z.var() / sd**2 - 1.0) < tol * 2


def test_rng_children_independent_of_draw_order():
    a = RngStream(1)
    a.normal(10)
    assert np.array_equal(a.child("x", 3).normal(4), RngStream(1).child("x", 3).normal(4))


# ---- optimizer

def test_zero_gradient_leaves_params():
    p = [np.array([1.0, -2.0])]
    state = OptimState.for_params(p)
    for _ in range(5):
        optim_step(p, [np.zeros(2)], state)
    assert p[0].tolist() == [1.0, -2.0]


def test_constant_gradient_moves_opposite_sign():
    p = [np.array([0.0])]
    state = OptimState.for_params(p, learning_rate=0.01)
    trace = []
    for _ in range(20):
        optim_step(p, [np.array([3.0])], state)
        trace.append(p[0][0])
    assert all(b < a for a, b in zip([0.0] + trace, trace))


def test_quadratic_bowl():
    w = [np.array([1.0])]
    state = OptimState.for_params(w, learning_rate=0.01)
    for _ in range(500):
        optim_step(w, [2.0 * w[0]], state)
    assert abs(w[0][0]) < 0.1


def test_non_finite_gradient_aborts():
    p = [np.zeros(2)]
    state = OptimState.for_params(p)
    with pytest.raises(NumericError):
        optim_step(p, [np.array([np.nan, 0.0])], state)
    assert p[0].tolist() == [0.0, 0.0]


def test_optimizer_state_validation():
    with pytest.raises(ValueError):
        OptimState.for_params([np.zeros(1)], learning_rate=0.0)


# ---- gradient checker

def test_grad_check_linear_exact():
    c = np.array([1.5, -2.0, 0.25])
    report = grad_check(lambda p: (float(c @ p[0]), [c.copy()]), [np.ones(3)])
    assert report.max_rel_error <= 1e-10 and report.passed


def test_grad_check_constant():
    report = grad_check(lambda p: (7.0, [np.zeros(2)]), [np.ones(2)])
    assert report.max_rel_error == 0.0


def test_grad_check_catches_wrong_gradient():
    report = grad_check(lambda p: (float((p[0] ** 2).sum()), [-2 * p[0]]), [np.array([0.5, 1.0])])
    assert not report.passed


def test_grad_check_skip_notes():
    report = grad_check(lambda p: (float(np.abs(p[0]).sum()), [np.sign(p[0])]), [np.array([0.0, 1.0])],
                        skip=lambda i, idx: idx == (0,))
    assert report.n_skipped == 1 and report.notes
