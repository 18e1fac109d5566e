"""Pure numpy implementations of the fused kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature.
Row functions take ``(n, d)`` float64 arrays and return per-row values plus
un-normalised per-row gradients.
"""

import numpy as np


def l1_rows(a, b):
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return np.abs(diff).sum(axis=1), np.sign(diff)


def kl_rows(mu, log_var):
    mu = np.asarray(mu, dtype=np.float64)
    log_var = np.asarray(log_var, dtype=np.float64)
    var = np.exp(log_var)
    vals = 0.5 * (mu * mu + var - log_var - 1.0).sum(axis=1)
    return vals, mu.copy(), 0.5 * (var - 1.0)


def w2_rows(mu1, lv1, mu2, lv2):
    s1 = np.exp(0.5 * np.asarray(lv1, dtype=np.float64))
    s2 = np.exp(0.5 * np.asarray(lv2, dtype=np.float64))
    dm = np.asarray(mu1, dtype=np.float64) - np.asarray(mu2, dtype=np.float64)
    ds = s1 - s2
    vals = np.sqrt((dm * dm).sum(axis=1) + (ds * ds).sum(axis=1))
    # subgradient 0 where both distributions coincide
    inv = np.divide(1.0, vals, out=np.zeros_like(vals), where=vals > 0.0)[:, None]
    gm = dm * inv
    gs = ds * inv
    return vals, gm, 0.5 * gs * s1, -gm, -0.5 * gs * s2


def softmax_xent_rows(logits, labels):
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    rows = np.arange(logits.shape[0])
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    tot = e.sum(axis=1)
    vals = np.log(tot) - shifted[rows, labels]
    grad = e / tot[:, None]
    grad[rows, labels] -= 1.0
    return vals, grad


def adam_update(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2):
    """In-place update of flat float64 arrays ``p``, ``m``, ``v``."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
