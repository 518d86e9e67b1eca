"""Finite-difference verification of analytic gradients."""
from __future__ import annotations

import numpy as np


def grad_check(loss_fn, params: dict, grads: dict, step: float = 1e-5) -> float:
    """Compare every entry of `grads` against a central finite difference of
    `loss_fn` and return the worst relative error.

    `loss_fn()` must recompute the scalar loss from the current parameter
    values; `grads` holds the analytic partials at the unperturbed point.
    Relative error is |a - n| / (|a| + |n| + 1e-4); the additive floor keeps
    near-zero partials from amplifying finite-difference roundoff.
    """
    worst = 0.0
    for name, p in params.items():
        g = grads[name]
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + step
            f_plus = loss_fn()
            flat_p[i] = orig - step
            f_minus = loss_fn()
            flat_p[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * step)
            analytic = flat_g[i]
            rel = abs(analytic - numeric) / (abs(analytic) + abs(numeric) + 1e-4)
            if rel > worst:
                worst = rel
    return float(worst)


def model_grad_check(trainable, dataset, config, noise_seed: int = 42,
                     step: float = 1e-5) -> float:
    """Gradient check for a trainable model: the training loss is recomputed
    with an identically re-seeded noise generator on every call, so the
    objective is deterministic even when robustness noise is enabled."""
    trainable.zero_grads()
    trainable.training_loss(dataset, np.random.default_rng(noise_seed), config)
    analytic = {k: v.copy() for k, v in trainable.grads().items()}

    def loss_fn():
        trainable.zero_grads()
        return trainable.training_loss(dataset, np.random.default_rng(noise_seed), config)

    try:
        return grad_check(loss_fn, trainable.params(), analytic, step=step)
    finally:
        trainable.zero_grads()


def numeric_gradient(loss_fn, params: dict, step: float = 1e-5) -> dict:
    """Full central-difference gradient, useful for debugging failures."""
    out = {}
    for name, p in params.items():
        flat = p.reshape(-1)
        g = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = loss_fn()
            flat[i] = orig - step
            f_minus = loss_fn()
            flat[i] = orig
            g[i] = (f_plus - f_minus) / (2.0 * step)
        out[name] = g.reshape(p.shape)
    return out
