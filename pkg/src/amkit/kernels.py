"""Random-feature distributed memory and kernel density estimation statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from .core import as_pattern_array, make_rng
from .energies import GradientReport
from .errors import ApproximationBreakdownError, DimensionError, ValidationError

VARIANTS = ("cos-phase", "cos-sin")


@dataclass(frozen=True)
class FeatureMap:
    """Random trigonometric features for the unit Gaussian kernel.

    ``omega`` is ``Y x D`` with standard normal entries. The ``cos-phase``
    variant maps ``x`` to ``cos(omega x + b) / sqrt(Y)`` with ``b ~ U(0, 1)``;
    ``cos-sin`` maps it to ``[cos(omega x), sin(omega x)] / sqrt(Y)`` (length
    ``2Y``), whose inner products average to ``exp(-|x - x'|^2 / 2)``.
    """

    variant: str
    omega: np.ndarray
    phase: np.ndarray | None
    seed: int

    @classmethod
    def create(cls, D: int, Y: int, seed: int, variant: str = "cos-sin") -> "FeatureMap":
        if variant not in VARIANTS:
            raise ValidationError(f"variant must be one of {VARIANTS}")
        if D < 1 or Y < 1:
            raise ValidationError("need D >= 1 and Y >= 1")
        rng = make_rng(seed)
        omega = rng.standard_normal((Y, D))
        phase = rng.uniform(0.0, 1.0, size=Y) if variant == "cos-phase" else None
        return cls(variant, omega, phase, seed)

    @property
    def Y(self) -> int:
        return self.omega.shape[0]

    @property
    def D(self) -> int:
        return self.omega.shape[1]

    @property
    def width(self) -> int:
        return 2 * self.Y if self.variant == "cos-sin" else self.Y


def rff_map(x, fm: FeatureMap) -> np.ndarray:
    """Feature vector(s) for a point (length D) or rows of an ``m x D`` array."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != fm.D:
        raise DimensionError(f"input dimension {x.shape[-1]} != feature map dimension {fm.D}")
    proj = x @ fm.omega.T
    norm = 1.0 / math.sqrt(fm.Y)
    if fm.variant == "cos-phase":
        return norm * np.cos(proj + fm.phase)
    return norm * np.concatenate([np.cos(proj), np.sin(proj)], axis=-1)


@dataclass(frozen=True)
class DistributedMemory:
    sketch: np.ndarray
    beta: float
    count: int

    def merge(self, other: "DistributedMemory") -> "DistributedMemory":
        if other.beta != self.beta or other.sketch.shape != self.sketch.shape:
            raise ValidationError("sketches must share beta and width")
        return DistributedMemory(self.sketch + other.sketch, self.beta, self.count + other.count)


def build_distributed(patterns, beta: float, fm: FeatureMap) -> DistributedMemory:
    """Sum of ``rff_map(sqrt(beta) xi_mu)`` over the columns of a ``D x K`` pattern matrix."""
    if not beta > 0:
        raise ValidationError("beta must be positive")
    P = as_pattern_array(patterns)
    feats = rff_map(math.sqrt(beta) * P.T, fm)
    return DistributedMemory(feats.sum(axis=0), float(beta), P.shape[1])


def approx_lse_energy_grad(v, dm: DistributedMemory, fm: FeatureMap) -> GradientReport:
    """``-log <phi(sqrt(beta) v), T>`` and its gradient in ``v``.

    Raises :class:`ApproximationBreakdownError` when the inner product is not
    positive, which happens far from every stored pattern.
    """
    v = np.asarray(v, dtype=np.float64)
    rb = math.sqrt(dm.beta)
    proj = fm.omega @ (rb * v)
    norm = 1.0 / math.sqrt(fm.Y)
    Y = fm.Y
    if fm.variant == "cos-phase":
        arg = proj + fm.phase
        s = norm * float(np.cos(arg) @ dm.sketch)
        dproj = -norm * np.sin(arg) * dm.sketch
    else:
        c, sn = np.cos(proj), np.sin(proj)
        s = norm * float(c @ dm.sketch[:Y] + sn @ dm.sketch[Y:])
        dproj = norm * (-sn * dm.sketch[:Y] + c * dm.sketch[Y:])
    if not s > 0.0:
        raise ApproximationBreakdownError(f"feature inner product is {s:.3g}; the query is too far from every pattern")
    grad = -(rb * (fm.omega.T @ dproj)) / s
    return GradientReport(-math.log(s), grad, dm.count)


class DistributedEnergy:
    """Adapter so descent routines can run on the approximate energy."""

    def __init__(self, dm: DistributedMemory, fm: FeatureMap):
        self.dm = dm
        self.fm = fm

    @property
    def D(self) -> int:
        return self.fm.D

    def energy_grad(self, v) -> GradientReport:
        return approx_lse_energy_grad(v, self.dm, self.fm)


# kernel density estimation -------------------------------------------------------------

@dataclass(frozen=True)
class KernelShape:
    """Symmetric univariate kernel on ``[-support, support]`` (``inf`` allowed)."""

    name: str
    pdf: Callable[[float], float]
    support: float = 1.0

    def __call__(self, z):
        return self.pdf(z)


def _on_unit(f):
    return lambda z: f(z) if abs(z) <= 1.0 else 0.0


KERNELS: dict[str, KernelShape] = {
    "epanechnikov": KernelShape("epanechnikov", _on_unit(lambda z: 0.75 * (1.0 - z * z))),
    "gaussian": KernelShape("gaussian", lambda z: math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi), math.inf),
    "uniform": KernelShape("uniform", _on_unit(lambda z: 0.5)),
    "triangle": KernelShape("triangle", _on_unit(lambda z: 1.0 - abs(z))),
    "biweight": KernelShape("biweight", _on_unit(lambda z: 15.0 / 16.0 * (1.0 - z * z) ** 2)),
    "triweight": KernelShape("triweight", _on_unit(lambda z: 35.0 / 32.0 * (1.0 - z * z) ** 3)),
    "tricube": KernelShape("tricube", _on_unit(lambda z: 70.0 / 81.0 * (1.0 - abs(z) ** 3) ** 3)),
    "cosine": KernelShape("cosine", _on_unit(lambda z: math.pi / 4.0 * math.cos(math.pi * z / 2.0))),
}

# curvature functional of the standard normal density: int (phi'')^2
GAUSSIAN_CURVATURE = 3.0 / (8.0 * math.sqrt(math.pi))

# sqrt(scale) * regularity for the Epanechnikov kernel (scale 1/5, regularity 3/5)
_EPAN_CONST = math.sqrt(0.2) * 0.6


def _integrate(f, support: float, tol: float) -> float:
    # split at 0 so kinks of |z| kernels sit on an endpoint
    if math.isinf(support):
        return integrate.quad(f, -np.inf, 0.0, epsabs=tol, epsrel=tol, limit=200)[0] + \
            integrate.quad(f, 0.0, np.inf, epsabs=tol, epsrel=tol, limit=200)[0]
    return integrate.quad(f, -support, 0.0, epsabs=tol, epsrel=tol, limit=200)[0] + \
        integrate.quad(f, 0.0, support, epsabs=tol, epsrel=tol, limit=200)[0]


def mise(h: float, scale: float, regularity: float, curvature: float, K: int) -> float:
    """Asymptotic mean integrated squared error ``(scale^2/4) h^4 R + regularity / (K h)``."""
    return 0.25 * scale ** 2 * h ** 4 * curvature + regularity / (K * h)


def optimal_bandwidth(scale: float, regularity: float, curvature: float, K: int) -> float:
    """Stationary point of :func:`mise`: ``(regularity / (K scale^2 R))**(1/5)``."""
    return (regularity / (K * scale ** 2 * curvature)) ** 0.2


class KernelStats(NamedTuple):
    name: str
    mass: float
    scale: float
    regularity: float
    efficiency: float
    optimal_bandwidth: float
    mise_at_optimum: float


def kernel_stats(shape: KernelShape | str, curvature: float = GAUSSIAN_CURVATURE, K: int = 1000,
                 tol: float = 1e-10) -> KernelStats:
    """Second moment, roughness, relative efficiency, optimal bandwidth and its MISE.

    Efficiency compares ``sqrt(scale) * regularity`` against the Epanechnikov
    kernel, so Epanechnikov scores 1 and every other kernel scores at most 1.
    """
    if isinstance(shape, str):
        if shape not in KERNELS:
            raise ValidationError(f"unknown kernel {shape!r}; choose from {sorted(KERNELS)}")
        shape = KERNELS[shape]
    mass = _integrate(shape.pdf, shape.support, tol)
    if not abs(mass - 1.0) < 1e-6:
        raise ValidationError(f"kernel {shape.name!r} integrates to {mass:.9g}, not 1")
    scale = _integrate(lambda z: z * z * shape.pdf(z), shape.support, tol)
    regularity = _integrate(lambda z: shape.pdf(z) ** 2, shape.support, tol)
    eff = _EPAN_CONST / (math.sqrt(scale) * regularity)
    h = optimal_bandwidth(scale, regularity, curvature, K)
    return KernelStats(shape.name, mass, scale, regularity, eff, h, mise(h, scale, regularity, curvature, K))


def kernel_table(K: int = 1000, curvature: float = GAUSSIAN_CURVATURE) -> list[KernelStats]:
    return [kernel_stats(KERNELS[name], curvature, K) for name in KERNELS]
