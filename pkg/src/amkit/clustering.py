"""Clustering with an associative memory whose stored patterns are the centres.

Data ``X`` is ``m x d`` (one point per row); centres are ``d x k`` (one per
column). The memory energy over centres is

    E(v) = -(1/beta) log sum_j exp(-beta |v - c_j|^2),   grad E = 2 (v - sum_j p_j c_j)

and the forward map ``f(x)`` runs ``T`` gradient steps from ``x``. Training
minimises ``sum_i |x_i - f(x_i)|^2`` over the centres, with gradients
obtained by reverse accumulation through the unrolled steps.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import make_rng
from .errors import DimensionError, StepSizeError, ValidationError


def _data(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("data must be a non-empty m x d matrix")
    return X


def _centres(centers, d: int) -> np.ndarray:
    C = np.asarray(centers, dtype=np.float64)
    if C.ndim == 1:
        C = C[:, None]
    if C.shape[0] != d:
        raise DimensionError(f"centres have {C.shape[0]} rows, data have d={d}")
    return C


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - C.T[None, :, :]
    return np.einsum("mkd,mkd->mk", diff, diff)


def kmeans_objective(X, centers) -> float:
    """``sum_i min_j |x_i - c_j|^2``."""
    X = _data(X)
    return float(np.sum(np.min(_sq_dists(X, _centres(centers, X.shape[1])), axis=1)))


def _softmin_weights(d2: np.ndarray, gamma: float) -> np.ndarray:
    z = -gamma * d2
    z = z - z.max(axis=1, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=1, keepdims=True)


def soft_kmeans_objective(X, centers, gamma: float) -> float:
    """``sum_i sum_j softmin_j(gamma |x_i - c_j|^2) |x_i - c_j|^2``."""
    if not gamma > 0:
        raise ValidationError("gamma must be positive")
    X = _data(X)
    d2 = _sq_dists(X, _centres(centers, X.shape[1]))
    return float(np.sum(_softmin_weights(d2, gamma) * d2))


def gaussian_blobs(means, per_blob: int, spread: float, seed: int) -> np.ndarray:
    """``per_blob`` isotropic Gaussian points around each mean, blob by blob."""
    means = np.atleast_2d(np.asarray(means, dtype=np.float64))
    if per_blob < 1 or not spread >= 0:
        raise ValidationError("need per_blob >= 1 and spread >= 0")
    rng = make_rng(seed)
    return np.concatenate([mu + spread * rng.standard_normal((per_blob, means.shape[1])) for mu in means])


# Lloyd ----------------------------------------------------------------------

class LloydResult(NamedTuple):
    centers: np.ndarray
    objective: float
    history: list


def kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    m = X.shape[0]
    idx = [int(rng.integers(m))]
    d2 = np.sum((X - X[idx[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        nxt = int(rng.integers(m)) if total <= 0 else int(rng.choice(m, p=d2 / total))
        idx.append(nxt)
        d2 = np.minimum(d2, np.sum((X - X[nxt]) ** 2, axis=1))
    return X[idx].T.copy()


def _lloyd_once(X: np.ndarray, C: np.ndarray, max_iter: int):
    history = []
    for _ in range(max_iter):
        d2 = _sq_dists(X, C)
        assign = np.argmin(d2, axis=1)
        history.append(float(np.sum(d2[np.arange(len(X)), assign])))
        newC = C.copy()
        for j in range(C.shape[1]):
            members = assign == j
            if np.any(members):
                newC[:, j] = X[members].mean(axis=0)
            else:
                # empty cluster: move it to the point worst served by the others
                far = int(np.argmax(d2[np.arange(len(X)), assign]))
                newC[:, j] = X[far]
                assign[far] = j
        if np.array_equal(newC, C):
            break
        C = newC
    final = kmeans_objective(X, C)
    if not history or final != history[-1]:
        history.append(final)
    return C, final, history


def lloyd(X, k: int, seed: int, restarts: int = 10, max_iter: int = 300) -> LloydResult:
    """Best of ``restarts`` Lloyd runs from k-means++ starts."""
    X = _data(X)
    if not 1 <= k <= X.shape[0]:
        raise ValidationError(f"need 1 <= k <= m, got k={k}, m={X.shape[0]}")
    best = None
    for r in range(max(1, restarts)):
        C0 = kmeanspp_init(X, k, make_rng(seed, r))
        res = LloydResult(*_lloyd_once(X, C0, max_iter))
        if best is None or res.objective < best.objective:
            best = res
    return best


# memory forward map and its reverse pass ---------------------------------------------

def _weights(V: np.ndarray, C: np.ndarray, beta: float):
    diff = V[:, None, :] - C.T[None, :, :]
    sq = np.einsum("mkd,mkd->mk", diff, diff)
    logits = -beta * sq
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return p, diff


def _unroll(X: np.ndarray, C: np.ndarray, beta: float, eta: float, T: int, free: np.ndarray | None):
    V = X.copy()
    states = [V]
    for _ in range(T):
        p, diff = _weights(V, C, beta)
        g = 2.0 * np.einsum("mk,mkd->md", p, diff)
        if free is None:
            V = V - eta * g
        else:
            V = np.where(free, V - eta * g, V)
        states.append(V)
    return states


def clam_forward(x, centers, beta: float, eta: float, T: int, keep=None) -> np.ndarray:
    """Relocate points by ``T`` descent steps on the memory energy.

    ``keep`` (same shape as ``x``, 0/1) clamps observed coordinates: they
    stay at their input values and only the others move.
    """
    single = np.ndim(x) == 1
    X = _data(x)
    C = _centres(centers, X.shape[1])
    free = None
    if keep is not None:
        keep = np.broadcast_to(np.asarray(keep, dtype=np.float64), X.shape)
        free = keep == 0.0
        X = np.where(free, 0.0, X)
    out = _unroll(X, C, beta, eta, T, free)[-1]
    return out[0] if single else out


class LossGrad(NamedTuple):
    loss: float
    grad: np.ndarray


def clam_loss_grad(X, centers, beta: float, eta: float, T: int, keep=None) -> LossGrad:
    """Reconstruction loss and its gradient with respect to the centres (``d x k``).

    Plain mode: ``sum_i |x_i - f(x_i)|^2``. With a keep-mask the input is
    ``keep * x``, the kept coordinates are clamped, and the loss is measured
    on the coordinates that had to be filled in.
    """
    X = _data(X)
    C = _centres(centers, X.shape[1])
    if keep is None:
        free = None
        start = X
        weight = np.ones_like(X)
    else:
        keep = np.broadcast_to(np.asarray(keep, dtype=np.float64), X.shape)
        free = keep == 0.0
        start = np.where(free, 0.0, X)
        weight = free.astype(np.float64)
    states = _unroll(start, C, beta, eta, T, free)
    resid = weight * (X - states[-1])
    loss = float(np.sum(resid * resid))
    upd = np.ones_like(X) if free is None else free.astype(np.float64)

    lam = -2.0 * resid
    gC = np.zeros((C.shape[1], C.shape[0]))
    Ct = C.T
    for t in range(T - 1, -1, -1):
        p, diff = _weights(states[t], C, beta)
        r = upd * lam
        cbar = p @ Ct
        dev = Ct[None, :, :] - cbar[:, None, :]
        proj = np.einsum("mkd,md->mk", dev, r)
        pp = p * proj
        gC += eta * (2.0 * p.T @ r + 4.0 * beta * np.einsum("mk,mkd->kd", pp, diff))
        lam = lam - eta * (2.0 * r - 4.0 * beta * np.einsum("mk,mkd->md", pp, dev))
    return LossGrad(loss, gC.T)


def sample_keep_masks(m: int, d: int, keep_prob: float, seed: int) -> np.ndarray:
    """Independent per-coordinate keep-masks (1 = observed)."""
    if not 0.0 < keep_prob <= 1.0:
        raise ValidationError("keep_prob must lie in (0, 1]")
    return (make_rng(seed).random((m, d)) < keep_prob).astype(np.float64)


# training -------------------------------------------------------------------

@dataclass
class ClusterProblem:
    X: np.ndarray
    k: int
    beta: float = 1.0
    eta: float = 0.25
    T: int = 10
    seed: int = 0
    lr: float = 0.5
    epochs: int = 200
    decay: float = 0.99
    masked: bool = False
    keep_prob: float = 0.8

    def __post_init__(self):
        self.X = _data(self.X)
        if not 1 <= self.k <= self.X.shape[0]:
            raise ValidationError("need 1 <= k <= m")
        if not (self.beta > 0 and self.eta > 0 and self.lr > 0):
            raise ValidationError("beta, eta and lr must be positive")
        if self.T < 1:
            raise ValidationError("T must be >= 1")


@dataclass
class ClamModel:
    centers: np.ndarray
    history: list = field(default_factory=list)


def farthest_point_init(X: np.ndarray, k: int, seed: int) -> np.ndarray:
    """First centre is a seeded random point; each next one is the point farthest from those chosen."""
    X = _data(X)
    idx = [int(make_rng(seed).integers(X.shape[0]))]
    d2 = np.sum((X - X[idx[0]]) ** 2, axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(d2))
        idx.append(nxt)
        d2 = np.minimum(d2, np.sum((X - X[nxt]) ** 2, axis=1))
    return X[idx].T.copy()


def clam_train(problem: ClusterProblem) -> ClamModel:
    """Gradient descent on the mean reconstruction loss with per-epoch step decay.

    The history holds the loss (mean over points) before each update and
    after the last one.
    """
    pb = problem
    X = pb.X
    m = X.shape[0]
    C = farthest_point_init(X, pb.k, pb.seed)
    lr = pb.lr
    history: list[float] = []
    initial = None
    for epoch in range(pb.epochs + 1):
        keep = sample_keep_masks(m, X.shape[1], pb.keep_prob, int(make_rng(pb.seed, epoch + 1).integers(2**63))) \
            if pb.masked else None
        loss, grad = clam_loss_grad(X, C, pb.beta, pb.eta, pb.T, keep)
        loss /= m
        if initial is None:
            initial = max(loss, np.finfo(float).tiny)
        if not np.isfinite(loss) or loss > 1e6 * initial:
            raise StepSizeError(f"loss diverged at epoch {epoch} ({loss:.3g}); lower the learning rate")
        history.append(loss)
        if epoch == pb.epochs:
            break
        C = C - lr * grad / m
        lr *= pb.decay
    return ClamModel(C, history)
