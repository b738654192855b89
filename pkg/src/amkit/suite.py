"""Finite-difference gradient suite over every differentiable energy in the package.

Each family draws a random problem and an interior evaluation point from a
generator and returns ``(f, grad, x)``: a scalar function of an array, the
analytic gradient at ``x``, and ``x`` itself.
"""
from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .clustering import clam_loss_grad
from .core import make_rng
from .energies import chn_spec, general_energy_grad, lse_energy_grad, lsr_energy_grad
from .gradcheck import check_gradient
from .hamux import (ETWeights, HalfSquareReLU, SoftmaxG, attention_energy_grad, et_energy_grad,
                    exercise_energy_grad, hn_energy_grad)
from .kernels import FeatureMap, approx_lse_energy_grad, build_distributed
from .memgen import dm_energy_grad


def _exercise(rng):
    D, K = 6, 4
    P = rng.choice([-1.0, 1.0], size=(D, K))
    beta = rng.uniform(0.5, 2.0)
    x = rng.normal(0.0, 1.0, D)
    return (lambda z: exercise_energy_grad(P, z, beta).energy,
            exercise_energy_grad(P, x, beta).gradient, x)


def _lse(rng):
    D, K = 5, 6
    P = rng.normal(0.0, 1.0, (D, K))
    beta = rng.uniform(0.2, 3.0)
    x = rng.normal(0.0, 1.0, D)
    return lambda z: lse_energy_grad(P, z, beta).energy, lse_energy_grad(P, x, beta).gradient, x


def _lsr(rng):
    D, K = 4, 5
    P = rng.normal(0.0, 0.5, (D, K))
    beta = 0.5
    while True:
        x = rng.normal(0.0, 0.5, D)
        terms = 1.0 - 0.5 * beta * np.sum((x[:, None] - P) ** 2, axis=0)
        # stay clear of the support boundaries, where the energy has kinks
        if np.any(terms > 0) and np.min(np.abs(terms)) > 1e-3:
            break
    return lambda z: lsr_energy_grad(P, z, beta).energy, lsr_energy_grad(P, x, beta).gradient, x


def _chn(rng):
    D, K = 6, 3
    spec = chn_spec(rng.choice([-1.0, 1.0], size=(D, K)))
    x = rng.normal(0.0, 1.0, D)
    return lambda z: general_energy_grad(spec, z).energy, general_energy_grad(spec, x).gradient, x


def _attention(rng):
    N, D, Y, H = 5, 4, 3, 2
    WK, WQ = rng.normal(0.0, 0.5, (Y, H, D)), rng.normal(0.0, 0.5, (Y, H, D))
    beta = rng.uniform(0.5, 2.0)
    g = rng.normal(0.0, 1.0, (N, D))
    return lambda z: attention_energy_grad(z, WK, WQ, beta)[0], attention_energy_grad(g, WK, WQ, beta)[1], g


def _hopfield(rng):
    N, D, M = 4, 5, 6
    xi = rng.normal(0.0, 1.0, (M, D))
    G = SoftmaxG(rng.uniform(0.5, 2.0)) if rng.random() < 0.5 else HalfSquareReLU()
    g = rng.normal(0.0, 1.0, (N, D))
    return lambda z: hn_energy_grad(z, xi, G)[0], hn_energy_grad(g, xi, G)[1], g


def _energy_transformer(rng):
    N, D = 4, 6
    w = ETWeights.random(D, 3, 2, 5, int(rng.integers(2**31)), scale=0.5)
    x = rng.normal(0.0, 1.0, (N, D))
    return lambda z: et_energy_grad(z, w)[0], et_energy_grad(x, w)[2], x


def _diffusion(rng):
    D, K = 2, 8
    P = rng.normal(0.0, 1.0, (D, K))
    s, t = rng.uniform(0.5, 1.5), rng.uniform(0.1, 1.0)
    x = rng.normal(0.0, 1.0, D)
    return lambda z: dm_energy_grad(P, z, s, t).energy, dm_energy_grad(P, x, s, t).gradient, x


def _distributed(rng):
    D, K, Y = 4, 3, 512
    P = rng.normal(0.0, 1.0, (D, K))
    fm = FeatureMap.create(D, Y, int(rng.integers(2**31)), "cos-sin" if rng.random() < 0.5 else "cos-phase")
    dm = build_distributed(P, 1.0, fm)
    # near a pattern the feature inner product is safely positive
    x = P[:, int(rng.integers(K))] + rng.normal(0.0, 0.1, D)
    return lambda z: approx_lse_energy_grad(z, dm, fm).energy, approx_lse_energy_grad(x, dm, fm).gradient, x


def _clam(rng):
    m, d, k = 12, 2, 3
    X = rng.normal(0.0, 1.0, (m, d))
    C = rng.normal(0.0, 1.0, (d, k))
    beta, eta, T = rng.uniform(0.5, 2.0), 0.2, 4
    keep = (rng.random((m, d)) < 0.7).astype(float) if rng.random() < 0.5 else None
    return (lambda c: clam_loss_grad(X, c, beta, eta, T, keep).loss,
            clam_loss_grad(X, C, beta, eta, T, keep).grad, C)


FAMILIES: dict[str, Callable] = {
    "exercise": _exercise,
    "lse": _lse,
    "lsr": _lsr,
    "chn": _chn,
    "attention": _attention,
    "hopfield": _hopfield,
    "energy-transformer": _energy_transformer,
    "diffusion": _diffusion,
    "distributed": _distributed,
    "clam": _clam,
}


class GradcheckRow(NamedTuple):
    family: str
    trial: int
    relative_error: float


def run_family(name: str, trials: int, seed: int) -> list[GradcheckRow]:
    """Relative analytic-vs-FD error at ``trials`` random points for one family."""
    make = FAMILIES[name]
    index = sorted(FAMILIES).index(name)
    rows = []
    for t in range(trials):
        f, grad, x = make(make_rng(seed, index, t))
        rows.append(GradcheckRow(name, t, check_gradient(f, grad, x)))
    return rows
