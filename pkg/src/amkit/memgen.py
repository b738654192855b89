"""Memorization versus generalization in a 2-D toy model.

Training data sit on the unit circle. The empirical energy

    E(v) = -(1/beta) log sum_mu exp(-beta |v - xi_mu|^2)

is the fixed-point energy of an ideal denoiser at noise level ``t`` when
``beta = 1/(2 sigma^2 t)``. In the infinite-data limit it becomes

    E(R) = R^2 + 1 - (1/beta) log I0(2 beta R)

which only depends on the radius ``R = |v|``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import as_pattern_array, as_state, make_rng
from .dynamics import DescentConfig, descend_batch, grid_2d
from .energies import EnergySpec, GradientReport, scaled_gaussian_spec
from .errors import ValidationError


def circle_dataset(K: int, seed: int, evenly_spaced: bool = False) -> np.ndarray:
    """``K x 2`` points on the unit circle (random angles unless ``evenly_spaced``)."""
    if K < 1:
        raise ValidationError("K must be >= 1")
    if evenly_spaced:
        theta = 2.0 * np.pi * np.arange(K) / K
    else:
        theta = make_rng(seed).uniform(0.0, 2.0 * np.pi, size=K)
    return np.column_stack([np.cos(theta), np.sin(theta)])


def dm_energy_grad(data, v, sigma_noise: float, t: float) -> GradientReport:
    """``-2 s^2 t log sum_mu exp(-|v - xi_mu|^2 / (2 s^2 t))`` and its gradient.

    ``data`` is a ``D x K`` pattern matrix (one datum per column).
    """
    if not t > 0:
        raise ValidationError("diffusion time t must be positive")
    if not sigma_noise > 0:
        raise ValidationError("noise scale must be positive")
    P = as_pattern_array(data)
    v = as_state(v, P.shape[0])
    c = 2.0 * sigma_noise ** 2 * t
    diff = v[None, :] - P.T
    logits = -np.sum(diff * diff, axis=1) / c
    top = logits.max()
    w = np.exp(logits - top)
    total = w.sum()
    energy = -c * (math.log(total) + top)
    grad = 2.0 * (w / total) @ diff
    return GradientReport(float(energy), grad, P.shape[1])


def denseam_spec(data, beta: float) -> EnergySpec:
    """``-(1/beta) log sum_mu exp(-beta |v - xi_mu|^2)`` as an energy spec."""
    return scaled_gaussian_spec(data, beta)


# modified Bessel function I0 in log form ---------------------------------------

def log_i0(z: float) -> float:
    """``log I0(z)`` for ``z >= 0``: power series below 20, asymptotic expansion above."""
    z = abs(float(z))
    if z < 20.0:
        q = 0.25 * z * z
        term = 1.0
        total = 1.0
        k = 0
        while True:
            k += 1
            term *= q / (k * k)
            total += term
            if term < 1e-17 * total:
                break
        return math.log(total)
    # I0(z) ~ e^z / sqrt(2 pi z) * sum_k ((2k-1)!!)^2 / (k! (8z)^k)
    corr = 1.0
    term = 1.0
    for k in range(1, 30):
        nxt = term * (2 * k - 1) ** 2 / (k * 8.0 * z)
        if nxt > term:
            break
        term = nxt
        corr += term
        if term < 1e-17:
            break
    return z - 0.5 * math.log(2.0 * math.pi * z) + math.log(corr)


def circle_energy_exact(R: float, beta: float) -> float:
    """Infinite-data energy at radius ``R``."""
    if R < 0 or not beta > 0:
        raise ValidationError("need R >= 0 and beta > 0")
    return R * R + 1.0 - log_i0(2.0 * beta * R) / beta


def empirical_circle_energy(points, v, beta: float) -> float:
    """Empirical energy normalised by ``K`` so it is comparable to the exact curve."""
    pts = np.asarray(points, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    logits = -beta * np.sum((pts - v[None, :]) ** 2, axis=1)
    top = logits.max()
    return -(math.log(np.mean(np.exp(logits - top))) + top) / beta


def midpoint_curvature(beta: float, a: float = 1.0) -> float:
    """Second derivative along the pattern axis at the midpoint of two patterns ``(+-a, 0)``."""
    return 2.0 - 4.0 * beta * a * a


def critical_beta(a: float = 1.0) -> float:
    """Inverse temperature where the midpoint of ``(+-a, 0)`` turns from minimum to saddle."""
    return 1.0 / (2.0 * a * a)


# minima and phases -----------------------------------------------------------------

@dataclass
class PhaseThresholds:
    """Thresholds for phase classification (all configurable).

    A minimum counts as a memory when it lies within ``eps_mem`` of a datum
    and within ``mem_spacing_frac`` of that datum's nearest-neighbour gap.
    Minima on the unit circle (within ``eps_gen``) form a near-continuous arc
    when the energy along the ring through them varies by at most
    ``arc_flatness`` times the radial well depth.
    """

    eps_mem: float = 0.05
    eps_gen: float = 0.05
    cluster_radius: float = 1e-3
    mem_spacing_frac: float = 0.25
    arc_flatness: float = 0.05
    ring_samples: int = 2048
    curvature_tol: float = 1e-6
    warn_nonconverged: float = 0.10


@dataclass
class PhaseReport:
    minima: list
    phase: str
    distances: list
    radii: list
    nonconverged_fraction: float
    ring_variation: float | None = None
    radial_depth: float | None = None
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def cluster_points(points: np.ndarray, radius: float) -> np.ndarray:
    """Greedy clustering in input order; returns cluster means."""
    reps: list[np.ndarray] = []
    members: list[list[np.ndarray]] = []
    for p in points:
        for i, r in enumerate(reps):
            if np.linalg.norm(p - r) <= radius:
                members[i].append(p)
                break
        else:
            reps.append(p)
            members.append([p])
    return np.array([np.mean(m, axis=0) for m in members]) if members else np.zeros((0, points.shape[1]))


def _hessian(spec: EnergySpec, v: np.ndarray, h: float = 1e-5) -> np.ndarray:
    D = v.shape[0]
    H = np.empty((D, D))
    for i in range(D):
        e = np.zeros(D)
        e[i] = h
        H[:, i] = (spec.energy_grad(v + e).gradient - spec.energy_grad(v - e).gradient) / (2 * h)
    return 0.5 * (H + H.T)


def find_minima(spec: EnergySpec, region, grid_n: int, cfg: DescentConfig, data=None,
                thresholds: PhaseThresholds | None = None, backend: str | None = None) -> PhaseReport:
    """Descend from an ``grid_n x grid_n`` grid, cluster the endpoints and classify the phase.

    ``region`` is ``((xmin, ymin), (xmax, ymax))``. ``data`` defaults to the
    spec's patterns. Endpoints with a negative curvature direction (saddles)
    are discarded.
    """
    th = PhaseThresholds() if thresholds is None else thresholds
    if spec.D != 2:
        raise ValidationError("find_minima works in 2-D")
    data = spec.rows if data is None else np.asarray(data, dtype=np.float64)
    grid = grid_2d(region[0], region[1], grid_n)
    res = descend_batch(spec, grid, cfg, backend)
    frac_bad = float(1.0 - np.mean(res.converged))
    notes = []
    if frac_bad > th.warn_nonconverged:
        msg = f"{100 * frac_bad:.1f}% of grid descents did not converge; raise steps or the step size"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    clusters = cluster_points(res.states[res.converged], th.cluster_radius)
    minima = [c for c in clusters if np.linalg.eigvalsh(_hessian(spec, c)).min() >= -th.curvature_tol]
    minima = np.array(minima).reshape(-1, 2)

    d_all = np.linalg.norm(minima[:, None, :] - data[None, :, :], axis=2) if len(minima) else np.zeros((0, len(data)))
    nearest = d_all.argmin(axis=1) if len(minima) else np.zeros(0, dtype=int)
    dist = d_all.min(axis=1) if len(minima) else np.zeros(0)
    radii = np.linalg.norm(minima, axis=1)

    if len(data) > 1:
        dd = np.linalg.norm(data[:, None, :] - data[None, :, :], axis=2)
        np.fill_diagonal(dd, np.inf)
        spacing = dd.min(axis=1)
    else:
        spacing = np.array([np.inf])

    ring_var = depth = None
    phase = "spurious"
    if len(minima) == 0:
        phase = "spurious"
    elif np.all(dist <= np.minimum(th.eps_mem, th.mem_spacing_frac * spacing[nearest])):
        phase = "memorization"
    elif np.all(np.abs(radii - 1.0) < th.eps_gen):
        r0 = float(np.mean(radii))
        phi = 2.0 * np.pi * np.arange(th.ring_samples) / th.ring_samples
        ring = np.column_stack([r0 * np.cos(phi), r0 * np.sin(phi)])
        E_ring, _ = spec.energy_grad_batch(ring)
        E_min = min(spec.energy(m) for m in minima)
        ring_var = float(E_ring.max() - E_ring.min())
        depth = float(spec.energy(np.zeros(2)) - E_min)
        if len(minima) > 1.5 * len(data) or (depth > 0 and ring_var <= th.arc_flatness * depth):
            phase = "generalization"
    return PhaseReport([m.tolist() for m in minima], phase, dist.tolist(), radii.tolist(), frac_bad,
                       ring_var, depth, notes)


def landscape(spec: EnergySpec, region, n: int) -> np.ndarray:
    """``(x, y, energy)`` rows over an ``n x n`` grid, row-major with x fastest."""
    grid = grid_2d(region[0], region[1], n)
    E, _ = spec.energy_grad_batch(grid)
    return np.column_stack([grid, E])


def count_minima(spec: EnergySpec, region, grid_n: int, cfg: DescentConfig, **kw) -> int:
    return len(find_minima(spec, region, grid_n, cfg, **kw).minima)
