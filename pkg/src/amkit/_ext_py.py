"""Numpy implementations of the hot kernels.

This is the reference behaviour: the compiled module ``amkit._ext`` exposes
the same functions with the same signatures, and the test-suite checks that
the two agree. Separation codes: 0 = power ``z**(n-1)``, 1 = exponential.
Both kernels only need the separation derivative up to a positive factor,
because they use it inside a sign.
"""
from __future__ import annotations

import numpy as np

POWER = 0
EXP = 1


def _sep_rows(a: np.ndarray, code: int, n: int) -> np.ndarray:
    """Separation derivative on each row of ``a``, up to a positive per-row factor."""
    if code == POWER:
        return a ** (n - 1)
    # shift by the row maximum so exp never overflows; the sign is unchanged
    return np.exp(a - a.max(axis=-1, keepdims=True))


def async_sweep(xi: np.ndarray, sigma: np.ndarray, order: np.ndarray, code: int, n: int) -> np.ndarray:
    """One asynchronous sweep in ``order``; ``sigma`` is updated in place and returned.

    Each visited spin is set to the sign (ties to +1) of
    ``sum_mu xi[i, mu] * f(sum_{j != i} xi[j, mu] * sigma[j])``.
    """
    m = xi.T @ sigma
    for i in order:
        row = xi[i]
        h = row @ _sep_rows(m - row * sigma[i], code, n)
        new = 1.0 if h >= 0.0 else -1.0
        if new != sigma[i]:
            m += row * (new - sigma[i])
            sigma[i] = new
    return sigma


def unstable_spins(xi: np.ndarray, code: int, n: int) -> int:
    """Spins of memory 0 that one synchronous update (no self term) would flip."""
    target = xi[:, 0]
    m = xi.T @ target
    a = m[None, :] - xi * target[:, None]
    h = np.sum(xi * _sep_rows(a, code, n), axis=1)
    new = np.where(h >= 0.0, 1.0, -1.0)
    return int(np.count_nonzero(new != target))


def gauss_descent(V: np.ndarray, X: np.ndarray, a: float, scale: float, eta: float,
                  steps: int, stop_tol: float, mask: np.ndarray):
    """Batched fixed-step descent on ``-scale * log sum_mu exp(-a |v - x_mu|^2)``.

    Args:
        V: ``m x D`` start points (copied).
        X: ``K x D`` centres, one per row.
        mask: length-``D`` 0/1 array; zero entries are never modified.

    Returns:
        ``(final, converged, steps_taken)``. A point is converged when the
        infinity norm of its masked gradient drops below ``stop_tol``.
    """
    V = np.array(V, dtype=np.float64, copy=True)
    m = V.shape[0]
    converged = np.zeros(m, dtype=bool)
    taken = np.zeros(m, dtype=np.int64)
    active = np.arange(m)
    coef = 2.0 * a * scale
    for t in range(steps + 1):
        if active.size == 0:
            break
        v = V[active]
        diff = v[:, None, :] - X[None, :, :]
        logits = -a * np.einsum("mkd,mkd->mk", diff, diff)
        logits -= logits.max(axis=1, keepdims=True)
        w = np.exp(logits)
        w /= w.sum(axis=1, keepdims=True)
        g = coef * np.einsum("mk,mkd->md", w, diff) * mask
        done = np.max(np.abs(g), axis=1) < stop_tol
        converged[active[done]] = True
        keep = ~done
        if t == steps:
            break
        active = active[keep]
        V[active] = v[keep] - eta * g[keep]
        taken[active] += 1
    return V, converged, taken
