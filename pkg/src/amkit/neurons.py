"""Neuron layers defined by convex Lagrangians.

A layer holds an internal state ``x``; its activation is the gradient of the
Lagrangian, ``xhat = grad L(x)``, and its energy is the Legendre dual
``<x, xhat> - L(x)``, whose gradient with respect to ``xhat`` is ``x``.

Every Lagrangian accepts a 1-D state or a 2-D array of row states (tokens);
for 2-D input the Lagrangian is summed over rows and the activation is
applied row by row.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

_LOG2 = float(np.log(2.0))


def _finite(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValidationError("non-finite neuron state")
    return x


class Lagrangian:
    """Interface: ``value``, ``activation`` and (1-D) ``hessian``."""

    def value(self, x) -> float:
        raise NotImplementedError

    def activation(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x) -> np.ndarray:
        raise NotImplementedError

    def jvp(self, x, u) -> np.ndarray:
        """Product of the activation Jacobian with ``u`` (row-wise for 2-D input)."""
        x = np.asarray(x, dtype=np.float64)
        u = np.asarray(u, dtype=np.float64)
        if x.ndim == 1:
            return self.hessian(x) @ u
        return np.stack([self.hessian(r) @ ur for r, ur in zip(x, u)])


@dataclass(frozen=True)
class Quadratic(Lagrangian):
    """``L = |x|^2 / 2``; identity activation."""

    def value(self, x) -> float:
        x = _finite(x)
        return 0.5 * float(np.sum(x * x))

    def activation(self, x) -> np.ndarray:
        return _finite(x).copy()

    def hessian(self, x) -> np.ndarray:
        return np.eye(np.asarray(x).shape[-1])

    def jvp(self, x, u) -> np.ndarray:
        return np.array(u, dtype=np.float64, copy=True)


@dataclass(frozen=True)
class LogCosh(Lagrangian):
    """``L = (1/beta) sum log cosh(beta x)``; activation ``tanh(beta x)``."""

    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValidationError("log-cosh beta must be positive")

    def value(self, x) -> float:
        z = np.abs(self.beta * _finite(x))
        # log cosh z = z + log1p(exp(-2z)) - log 2, stable for large z
        return float(np.sum(z + np.log1p(np.exp(-2.0 * z)) - _LOG2)) / self.beta

    def activation(self, x) -> np.ndarray:
        return np.tanh(self.beta * _finite(x))

    def hessian(self, x) -> np.ndarray:
        t = np.tanh(self.beta * _finite(x))
        return np.diag(self.beta * (1.0 - t * t))

    def jvp(self, x, u) -> np.ndarray:
        t = np.tanh(self.beta * _finite(x))
        return self.beta * (1.0 - t * t) * np.asarray(u, dtype=np.float64)


@dataclass(frozen=True)
class LogSumExp(Lagrangian):
    """``L = (1/beta) log sum exp(beta x)``; softmax activation."""

    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValidationError("log-sum-exp beta must be positive")

    def value(self, x) -> float:
        z = self.beta * _finite(x)
        top = z.max(axis=-1, keepdims=True)
        lse = np.log(np.sum(np.exp(z - top), axis=-1)) + top[..., 0]
        return float(np.sum(lse)) / self.beta

    def activation(self, x) -> np.ndarray:
        z = self.beta * _finite(x)
        z = z - z.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True)

    def hessian(self, x) -> np.ndarray:
        p = self.activation(x)
        return self.beta * (np.diag(p) - np.outer(p, p))


@dataclass(frozen=True)
class LayerNorm(Lagrangian):
    """``L = D gamma sqrt(var(x) + eps) + <delta, x>`` per token.

    The activation is the layer-normalised token
    ``gamma (x - mean) / sqrt(var + eps) + delta``. ``delta`` may be a scalar
    or a length-D array.
    """

    gamma: float = 1.0
    delta: float | np.ndarray = 0.0
    eps: float = 1e-5

    def __post_init__(self):
        if not self.eps > 0:
            raise ValidationError("layernorm eps must be positive")
        if not np.isfinite(self.gamma) or not np.all(np.isfinite(self.delta)):
            raise ValidationError("layernorm gamma and delta must be finite")

    def _stats(self, x):
        x = _finite(x)
        centred = x - x.mean(axis=-1, keepdims=True)
        s = np.sqrt(np.mean(centred * centred, axis=-1, keepdims=True) + self.eps)
        return x, centred, s

    def value(self, x) -> float:
        x, _, s = self._stats(x)
        D = x.shape[-1]
        delta = np.broadcast_to(np.asarray(self.delta, dtype=np.float64), x.shape)
        return float(D * self.gamma * np.sum(s) + np.sum(delta * x))

    def activation(self, x) -> np.ndarray:
        _, centred, s = self._stats(x)
        return self.gamma * centred / s + np.asarray(self.delta, dtype=np.float64)

    def hessian(self, x) -> np.ndarray:
        x, centred, s = self._stats(x)
        if x.ndim != 1:
            raise ValidationError("hessian is defined per token; pass a 1-D state")
        D = x.shape[0]
        s = float(s[0])
        proj = np.eye(D) - 1.0 / D
        return (self.gamma / s) * (proj - np.outer(centred, centred) / (D * s * s))

    def dual(self, x) -> float:
        # <x, xhat> - L reduces to -gamma D eps / s per token; the direct difference cancels badly
        x, _, s = self._stats(x)
        return float(-self.gamma * x.shape[-1] * self.eps * np.sum(1.0 / s))

    def jvp(self, x, u) -> np.ndarray:
        x, centred, s = self._stats(x)
        u = np.asarray(u, dtype=np.float64)
        D = x.shape[-1]
        u_c = u - u.mean(axis=-1, keepdims=True)
        proj = np.sum(centred * u, axis=-1, keepdims=True) / (D * s * s)
        return (self.gamma / s) * (u_c - centred * proj)


def lagrangian(kind: Lagrangian, x) -> float:
    return kind.value(x)


def activation(kind: Lagrangian, x) -> np.ndarray:
    return kind.activation(x)


def dual_energy(kind: Lagrangian, x) -> float:
    """Legendre-dual layer energy ``<x, grad L(x)> - L(x)``."""
    x = _finite(x)
    if hasattr(kind, "dual"):
        return kind.dual(x)
    return float(np.sum(x * kind.activation(x))) - kind.value(x)


@dataclass
class NeuronLayer:
    """A layer: Lagrangian, internal state and time constant."""

    kind: Lagrangian
    state: np.ndarray
    tau: float = 1.0
    name: str = field(default="")

    def __post_init__(self):
        self.state = _finite(self.state).copy()
        if not self.tau > 0:
            raise ValidationError("time constant must be positive")

    @property
    def activation(self) -> np.ndarray:
        return self.kind.activation(self.state)

    @property
    def energy(self) -> float:
        return dual_energy(self.kind, self.state)

    def copy_with(self, state) -> "NeuronLayer":
        return NeuronLayer(self.kind, state, self.tau, self.name)
