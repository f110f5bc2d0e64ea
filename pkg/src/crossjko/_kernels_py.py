"""Pure NumPy/Python implementations of the hot kernels.

These are the reference versions.  ``_ckernels`` (Cython) must agree with
them to rounding; ``crossjko.kernels`` picks one at import time.
"""

from __future__ import annotations

import numpy as np


def pav(y, w):
    """Weighted least-squares nondecreasing fit (pool adjacent violators).

    Minimizes ``sum(w * (y - g)**2)`` over nondecreasing ``g``.  Weights
    must be strictly positive.
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    n = y.shape[0]
    if n == 0:
        return y.copy()
    # block means, weights and lengths kept as python lists: this loop is
    # the slow path the compiled kernel replaces
    means = []
    weights = []
    lengths = []
    for yi, wi in zip(y.tolist(), w.tolist()):
        means.append(yi)
        weights.append(wi)
        lengths.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2 = means.pop()
            w2 = weights.pop()
            l2 = lengths.pop()
            wt = weights[-1] + w2
            means[-1] = (weights[-1] * means[-1] + w2 * m2) / wt
            weights[-1] = wt
            lengths[-1] += l2
    return np.repeat(np.array(means), lengths)


def cdf_at(nodes, levels, x):
    """Evaluate the right-continuous piecewise-linear CDF through ``(nodes, levels)``.

    Returns ``(values, idx)`` where ``idx[i]`` is the interval ``k`` with
    ``nodes[k] <= x[i] < nodes[k+1]`` (-1 left of the first node, ``n`` at or
    right of the last one).
    """
    nodes = np.asarray(nodes, dtype=float)
    levels = np.asarray(levels, dtype=float)
    x = np.asarray(x, dtype=float)
    n = nodes.shape[0] - 1
    idx = np.searchsorted(nodes, x, side="right") - 1
    out = np.empty_like(x)
    left = idx < 0
    right = idx >= n
    inner = ~(left | right)
    out[left] = levels[0]
    out[right] = levels[-1]
    k = idx[inner]
    y0 = nodes[k]
    y1 = nodes[k + 1]
    s0 = levels[k]
    s1 = levels[k + 1]
    out[inner] = s0 + (s1 - s0) * (x[inner] - y0) / (y1 - y0)
    return out, idx.astype(np.int64)


def cdf_adjoint(nodes, levels, x, idx, wbar):
    """Gradient of ``sum(wbar * cdf_at(nodes, levels, x))`` with respect to ``nodes``."""
    nodes = np.asarray(nodes, dtype=float)
    levels = np.asarray(levels, dtype=float)
    n = nodes.shape[0] - 1
    grad = np.zeros(n + 1)
    inner = (idx >= 0) & (idx < n)
    k = idx[inner]
    xs = np.asarray(x, dtype=float)[inner]
    wb = np.asarray(wbar, dtype=float)[inner]
    y0 = nodes[k]
    y1 = nodes[k + 1]
    dm = levels[k + 1] - levels[k]
    inv = 1.0 / (y1 - y0)
    common = wb * dm * inv * inv
    grad += np.bincount(k, weights=-common * (y1 - xs), minlength=n + 1)
    grad += np.bincount(k + 1, weights=-common * (xs - y0), minlength=n + 1)
    return grad


def interval_cost(nodes, ref, masses):
    """Quadratic transport cost of the piecewise-linear map ``ref -> nodes``.

    Each interval ``[ref[j], ref[j+1]]`` carries ``masses[j]`` uniformly and
    is mapped affinely onto ``[nodes[j], nodes[j+1]]``.  Returns the cost
    and its gradient with respect to ``nodes``.
    """
    d = np.asarray(nodes, dtype=float) - np.asarray(ref, dtype=float)
    m = np.asarray(masses, dtype=float)
    a = d[:-1]
    b = d[1:]
    cost = float(np.sum(m * (a * a + a * b + b * b))) / 3.0
    grad = np.zeros_like(d)
    grad[:-1] += m * (2.0 * a + b) / 3.0
    grad[1:] += m * (a + 2.0 * b) / 3.0
    return cost, grad


def upwind_flux(rho, vel):
    """Upwind mass flux ``rho_up * vel`` at the interior faces (``len(rho) - 1`` values)."""
    rho = np.asarray(rho, dtype=float)
    vel = np.asarray(vel, dtype=float)
    return np.where(vel > 0.0, rho[:-1], rho[1:]) * vel


def toeplitz_conv(kvals, rho):
    """Direct double sum ``out[j] = sum_k kvals[j - k + n - 1] * rho[k]``."""
    rho = np.asarray(rho, dtype=float)
    n = rho.shape[0]
    return np.convolve(rho, np.asarray(kvals, dtype=float))[n - 1 : 2 * n - 1]
