"""Discrete asynchronous updates and continuous masked gradient descent."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import _backend
from .core import as_mask, as_pattern_array, as_state, is_spin, make_rng
from .energies import EnergySpec, Exp, GradientReport, Power
from .errors import DimensionError, InfiniteEnergyError, ValidationError
from .io import write_csv

NOT_CONVERGED = -1


# discrete dynamics ----------------------------------------------------------

def sweep_order(D: int, seed: int) -> np.ndarray:
    """Visiting order used by :func:`async_update` for a given seed."""
    return make_rng(seed).permutation(D)


def _kernel_code(f):
    if isinstance(f, Power):
        return _backend.POWER, f.n
    if isinstance(f, Exp):
        return _backend.EXP, 0
    return None


def async_update(patterns, sigma, f, order_seed: int, backend: str | None = None) -> np.ndarray:
    """One asynchronous sweep over every spin in a seeded random order.

    Spin ``i`` becomes ``sign(sum_mu xi[i, mu] * f(sum_{j != i} xi[j, mu] sigma_j))``
    with ties going to +1. ``f`` is a separation object (its derivative is
    used) or a plain callable taken to be the derivative itself.
    """
    P = as_pattern_array(patterns)
    sigma = as_state(sigma)
    if sigma.shape[0] != P.shape[0]:
        raise DimensionError(f"state length {sigma.shape[0]} != D={P.shape[0]}")
    if not is_spin(sigma):
        raise ValidationError("async_update expects a +-1 spin state")
    order = sweep_order(P.shape[0], order_seed)
    code = _kernel_code(f)
    if code is not None:
        return _backend.async_sweep(P, sigma, order, code[0], code[1], backend)
    deriv: Callable = getattr(f, "deriv", f)
    out = sigma.copy()
    m = P.T @ out
    for i in order:
        row = P[i]
        h = float(row @ deriv(m - row * out[i]))
        new = 1.0 if h >= 0.0 else -1.0
        if new != out[i]:
            m += row * (new - out[i])
            out[i] = new
    return out


class RetrievalResult(NamedTuple):
    state: np.ndarray
    sweeps: int
    converged: bool


def retrieve(patterns, sigma0, f, seed: int, max_sweeps: int = 50,
             backend: str | None = None) -> RetrievalResult:
    """Repeat asynchronous sweeps until a sweep changes nothing."""
    state = as_state(sigma0).copy()
    for sweep in range(max_sweeps):
        new = async_update(patterns, state, f, int(make_rng(seed, sweep).integers(2**63)), backend)
        if np.array_equal(new, state):
            return RetrievalResult(new, sweep + 1, True)
        state = new
    return RetrievalResult(state, max_sweeps, False)


# continuous dynamics --------------------------------------------------------

@dataclass
class DescentConfig:
    """Step size, step budget, clamp mask and stopping rule for descent.

    ``mask`` marks free coordinates with 1; ``None`` means all free.
    """

    step: float = 0.1
    steps: int = 100
    mask: np.ndarray | None = None
    stop_tol: float = 1e-8
    backtracking: bool = False
    max_halvings: int = 40

    def __post_init__(self):
        if not self.step > 0:
            raise ValidationError("step must be positive")
        if self.steps < 0:
            raise ValidationError("steps must be non-negative")
        if self.stop_tol < 0:
            raise ValidationError("stop_tol must be non-negative")


@dataclass
class Trajectory:
    states: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    converged: bool = False
    steps_taken: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def rows(self):
        for t, (s, e) in enumerate(zip(self.states, self.energies)):
            yield [t, e, *s.tolist()]

    def to_csv(self, path) -> None:
        D = len(self.states[0]) if self.states else 0
        write_csv(path, ["step", "energy"] + [f"s{i}" for i in range(D)], self.rows())


def _evaluate(energy, v) -> tuple[float, np.ndarray | None]:
    try:
        if hasattr(energy, "energy_grad"):
            rep = energy.energy_grad(v)
        else:
            rep = energy(v)
    except InfiniteEnergyError:
        return float("inf"), None
    if isinstance(rep, GradientReport):
        return rep.energy, np.asarray(rep.gradient, dtype=np.float64)
    e, g = rep
    return float(e), np.asarray(g, dtype=np.float64)


def descend(energy, v0, cfg: DescentConfig) -> Trajectory:
    """Masked gradient descent ``v <- v - step * mask * grad E(v)``.

    ``energy`` is an :class:`EnergySpec`, any object with ``energy_grad``, or a
    callable returning a GradientReport or ``(energy, gradient)``. With
    backtracking, a step that raises the energy is halved up to
    ``max_halvings`` times; if it still fails the state is kept and the run
    stops unconverged.
    """
    v = as_state(v0).copy()
    free = as_mask(cfg.mask, v.shape[0]) == 1.0
    E, g = _evaluate(energy, v)
    if g is None or not np.isfinite(E):
        raise InfiniteEnergyError("infeasible start: energy is infinite at v0")
    traj = Trajectory([v.copy()], [E], False, 0)
    for _ in range(cfg.steps):
        if not np.any(free) or np.max(np.abs(g[free])) < cfg.stop_tol:
            traj.converged = True
            return traj
        eta = cfg.step
        cand = v.copy()
        cand[free] = v[free] - eta * g[free]
        E_new, g_new = _evaluate(energy, cand)
        if cfg.backtracking:
            halvings = 0
            while not (E_new <= E) and halvings < cfg.max_halvings:
                eta *= 0.5
                halvings += 1
                cand = v.copy()
                cand[free] = v[free] - eta * g[free]
                E_new, g_new = _evaluate(energy, cand)
            if not (E_new <= E):
                return traj
        elif g_new is None or not np.isfinite(E_new):
            raise InfiniteEnergyError("descent left the finite-energy region; enable backtracking or reduce the step")
        v, E, g = cand, E_new, g_new
        traj.states.append(v.copy())
        traj.energies.append(E)
        traj.steps_taken += 1
    traj.converged = (not np.any(free)) or bool(np.max(np.abs(g[free])) < cfg.stop_tol)
    return traj


class BatchResult(NamedTuple):
    states: np.ndarray
    converged: np.ndarray
    steps_taken: np.ndarray


def descend_batch(spec: EnergySpec, V0, cfg: DescentConfig, backend: str | None = None) -> BatchResult:
    """Run :func:`descend` from every row of ``V0``; each row is independent.

    Gaussian-family energies without backtracking use the compiled kernel.
    """
    V0 = np.atleast_2d(np.asarray(V0, dtype=np.float64))
    m, D = V0.shape
    mask = as_mask(cfg.mask, D)
    if spec.is_gaussian() and not cfg.backtracking:
        return BatchResult(*_backend.gauss_descent(V0, spec.rows, spec.gaussian_rate(), spec.scale,
                                                   cfg.step, cfg.steps, cfg.stop_tol, mask, backend))
    if cfg.backtracking:
        out = np.empty_like(V0)
        conv = np.zeros(m, dtype=bool)
        taken = np.zeros(m, dtype=np.int64)
        for p in range(m):
            tr = descend(spec, V0[p], cfg)
            out[p], conv[p], taken[p] = tr.final, tr.converged, tr.steps_taken
        return BatchResult(out, conv, taken)
    V = V0.copy()
    conv = np.zeros(m, dtype=bool)
    taken = np.zeros(m, dtype=np.int64)
    active = np.arange(m)
    for t in range(cfg.steps + 1):
        if active.size == 0:
            break
        _, G = spec.energy_grad_batch(V[active])
        G = G * mask
        if not np.all(np.isfinite(G)):
            raise InfiniteEnergyError("batch descent reached a state with infinite energy")
        done = np.max(np.abs(G), axis=1) < cfg.stop_tol
        conv[active[done]] = True
        if t == cfg.steps:
            break
        keep = ~done
        active, G = active[keep], G[keep]
        V[active] = V[active] - cfg.step * G
        taken[active] += 1
    return BatchResult(V, conv, taken)


def default_label(k: int, task: str = "classification") -> np.ndarray:
    """Initial label block: uniform ``1/k`` for classification, zeros for regression."""
    if task == "classification":
        return np.full(k, 1.0 / k)
    if task == "regression":
        return np.zeros(k)
    raise ValidationError(f"unknown task {task!r}")


def predict_clamped(spec, x, y0, cfg: DescentConfig) -> np.ndarray:
    """Descend from ``(x, y0)`` with the feature block clamped; return the label block."""
    x = as_state(x)
    y0 = as_state(y0)
    d, k = x.shape[0], y0.shape[0]
    D = getattr(spec, "D", d + k)
    if D != d + k:
        raise DimensionError(f"spec dimension {D} != features {d} + labels {k}")
    mask = np.concatenate([np.zeros(d), np.ones(k)])
    run = DescentConfig(cfg.step, cfg.steps, mask, cfg.stop_tol, cfg.backtracking, cfg.max_halvings)
    traj = descend(spec, np.concatenate([x, y0]), run)
    return traj.final[d:].copy()


class BasinLabels(NamedTuple):
    labels: np.ndarray
    converged: np.ndarray
    endpoints: np.ndarray


def basin_labels(spec: EnergySpec, grid, cfg: DescentConfig, centers,
                 backend: str | None = None) -> BasinLabels:
    """Descend from each grid point and label it by the nearest centre to its endpoint.

    Points whose descent does not converge within ``cfg.steps`` get the
    label ``NOT_CONVERGED``.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=np.float64))
    C = as_pattern_array(centers).T
    res = descend_batch(spec, grid, cfg, backend)
    d2 = np.sum((res.states[:, None, :] - C[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1).astype(np.int64)
    labels[~res.converged] = NOT_CONVERGED
    return BasinLabels(labels, res.converged, res.states)


def voronoi_labels(grid, centers) -> np.ndarray:
    grid = np.atleast_2d(np.asarray(grid, dtype=np.float64))
    C = as_pattern_array(centers).T
    return np.argmin(np.sum((grid[:, None, :] - C[None, :, :]) ** 2, axis=2), axis=1)


def grid_2d(lo, hi, n: int) -> np.ndarray:
    """``n x n`` grid over a box, row-major with x varying fastest."""
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])
