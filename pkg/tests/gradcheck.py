"""Independent finite-difference gradient oracle for the MLP tests.

Everything here is written from scratch against the loss definition — it
never calls the production forward/backward code — so it can serve as a
true second route for gradient checking.

ReLU makes the loss piecewise smooth: if a +/-eps perturbation flips any
hidden unit's activation sign, the central-difference quotient at that
coordinate estimates the derivative of *no* branch and must not be compared
against the analytic gradient. Such kink crossings are detected via the
activation pattern and skipped; callers cap how many skips they tolerate.
"""

import numpy as np


def reference_loss(weights, biases, X, y, lam):
    """Loss computed with an explicit per-example loop: MSE + L2 over weights."""
    total = 0.0
    for i in range(len(X)):
        a = X[i]
        for layer in range(len(weights)):
            z = weights[layer] @ a + biases[layer]
            a = z if layer == len(weights) - 1 else np.where(z > 0.0, z, 0.0)
        total += (a[0] - y[i]) ** 2
    penalty = sum(float(np.sum(w * w)) for w in weights)
    return total / len(X) + lam * penalty


def activation_pattern(weights, biases, X):
    """Boolean pattern of every hidden unit over the batch."""
    pattern = []
    a = X
    for layer in range(len(weights) - 1):
        z = a @ weights[layer].T + biases[layer]
        pattern.append(z > 0.0)
        a = np.maximum(z, 0.0)
    return pattern


def _patterns_equal(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def fd_check(params, X, y, analytic_w, analytic_b, lam, eps=1e-4, sample=None, rng=None):
    """Compare analytic gradients against central differences.

    Returns (max relative error over valid coordinates, checked, skipped);
    coordinates whose perturbation crosses a ReLU kink are skipped because
    the quotient is not a derivative estimate there.
    """
    weights = [w.copy() for w in params.weights]
    biases = [b.copy() for b in params.biases]
    worst, checked, skipped = 0.0, 0, 0
    for grads, arrays in ((analytic_w, weights), (analytic_b, biases)):
        for layer, grad in enumerate(grads):
            indices = range(grad.size)
            if sample is not None and grad.size > sample:
                indices = rng.choice(grad.size, size=sample, replace=False)
            for flat in indices:
                idx = np.unravel_index(flat, grad.shape)
                original = arrays[layer][idx]
                arrays[layer][idx] = original + eps
                up = reference_loss(weights, biases, X, y, lam)
                pattern_up = activation_pattern(weights, biases, X)
                arrays[layer][idx] = original - eps
                down = reference_loss(weights, biases, X, y, lam)
                pattern_down = activation_pattern(weights, biases, X)
                arrays[layer][idx] = original
                if not _patterns_equal(pattern_up, pattern_down):
                    skipped += 1
                    continue
                numeric = (up - down) / (2 * eps)
                analytic = grad[idx]
                err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
                worst = max(worst, err)
                checked += 1
    return worst, checked, skipped
