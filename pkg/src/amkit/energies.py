"""Dense associative memory energies with closed-form gradients.

The general continuous energy is

    E(v) = -scale * Q( sum_mu F(beta * S(v, xi_mu)) )

with ``Q`` in {identity, log}, a separation function ``F`` and a similarity
``S``. ``scale`` defaults to 1; setting it to ``1/beta`` gives the
temperature-scaled variant used for clustering and the diffusion toy model.
Log-sum-exp and log-sum-ReLU are the ``(log, exp, neghalfsq)`` and
``(log, shifted-relu, neghalfsq)`` members of the family.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .core import PatternMatrix, as_pattern_array, as_state
from .errors import DimensionError, InfiniteEnergyError, ValidationError


class GradientReport(NamedTuple):
    energy: float
    gradient: np.ndarray
    active_terms: int | None = None


# separation functions -------------------------------------------------------

@dataclass(frozen=True)
class Power:
    """``F(z) = z**n / n`` (or ``z**n`` with ``scaled=False``)."""

    n: int = 2
    scaled: bool = True

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValidationError(f"power exponent must be an integer >= 2, got {self.n}")

    def __call__(self, z):
        z = np.asarray(z, dtype=np.float64)
        return z ** self.n / self.n if self.scaled else z ** self.n

    def deriv(self, z):
        z = np.asarray(z, dtype=np.float64)
        return z ** (self.n - 1) if self.scaled else self.n * z ** (self.n - 1)

    @property
    def token(self) -> str:
        return f"power:{self.n}" if self.scaled else f"power:{self.n}:raw"


@dataclass(frozen=True)
class Exp:
    """``F(z) = exp(z)``."""

    def __call__(self, z):
        return np.exp(np.asarray(z, dtype=np.float64))

    def deriv(self, z):
        return np.exp(np.asarray(z, dtype=np.float64))

    @property
    def token(self) -> str:
        return "exp"


@dataclass(frozen=True)
class ShiftedReLU:
    """``F(z) = max(0, 1 + z)``; a zero argument counts as inactive."""

    def __call__(self, z):
        return np.maximum(0.0, 1.0 + np.asarray(z, dtype=np.float64))

    def deriv(self, z):
        return np.where(1.0 + np.asarray(z, dtype=np.float64) > 0.0, 1.0, 0.0)

    @property
    def token(self) -> str:
        return "shifted-relu"


def parse_separation(token: str):
    parts = token.strip().lower().split(":")
    if parts[0] == "exp" and len(parts) == 1:
        return Exp()
    if parts[0] in ("shifted-relu", "relu") and len(parts) == 1:
        return ShiftedReLU()
    if parts[0] == "power" and len(parts) in (2, 3):
        try:
            n = int(parts[1])
        except ValueError:
            raise ValidationError(f"bad power exponent in {token!r}") from None
        if len(parts) == 3 and parts[2] != "raw":
            raise ValidationError(f"bad separation token {token!r}")
        return Power(n, scaled=len(parts) == 2)
    raise ValidationError(f"unknown separation function {token!r}")


# similarity functions -------------------------------------------------------

SIMILARITIES = ("dot", "neghalfsq", "negsq")
_S_ALIASES = {
    "dot": "dot",
    "neghalfsq": "neghalfsq", "neg-half-sq-euclid": "neghalfsq",
    "negsq": "negsq", "neg-sq-euclid": "negsq",
}


def _similarity(s: str, P: np.ndarray, v: np.ndarray):
    """Similarity of ``v`` to each pattern row of ``P`` (``K x D``) and its gradient in ``v``."""
    if s == "dot":
        return P @ v, P
    diff = v[None, :] - P
    sq = np.sum(diff * diff, axis=1)
    if s == "neghalfsq":
        return -0.5 * sq, -diff
    return -sq, -2.0 * diff


def _lse_reduce(z: np.ndarray, dz: np.ndarray, scale: float) -> GradientReport:
    # stabilised log-sum-exp; dz holds d z_mu / dv row by row
    top = np.max(z)
    w = np.exp(z - top)
    total = np.sum(w)
    energy = -scale * (np.log(total) + top)
    grad = -scale * ((w / total) @ dz)
    return GradientReport(float(energy), grad, int(z.shape[0]))


# energy specification -------------------------------------------------------

@dataclass(frozen=True)
class EnergySpec:
    """Selector bundle ``(patterns, Q, F, S, beta, scale)``."""

    patterns: PatternMatrix
    q: str = "log"
    f: object = field(default_factory=Exp)
    s: str = "neghalfsq"
    beta: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if not isinstance(self.patterns, PatternMatrix):
            object.__setattr__(self, "patterns", PatternMatrix(as_pattern_array(self.patterns)))
        if isinstance(self.f, str):
            object.__setattr__(self, "f", parse_separation(self.f))
        if self.q not in ("identity", "log"):
            raise ValidationError(f"Q must be 'identity' or 'log', got {self.q!r}")
        if self.s not in _S_ALIASES:
            raise ValidationError(f"unknown similarity {self.s!r}")
        object.__setattr__(self, "s", _S_ALIASES[self.s])
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValidationError("beta must be positive")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValidationError("scale must be positive")

    @property
    def D(self) -> int:
        return self.patterns.D

    @property
    def rows(self) -> np.ndarray:
        """Patterns as a ``K x D`` array."""
        return self.patterns.data.T

    def energy_grad(self, v) -> GradientReport:
        return general_energy_grad(self, v)

    def energy(self, v) -> float:
        try:
            return general_energy_grad(self, v).energy
        except InfiniteEnergyError:
            return float("inf")

    def is_gaussian(self) -> bool:
        """True for ``-scale log sum exp(-a |v - xi|^2)`` energies."""
        return self.q == "log" and isinstance(self.f, Exp) and self.s in ("neghalfsq", "negsq")

    def gaussian_rate(self) -> float:
        """The ``a`` in ``exp(-a |v - xi|^2)`` for Gaussian energies."""
        return 0.5 * self.beta if self.s == "neghalfsq" else self.beta

    def energy_grad_batch(self, V) -> tuple[np.ndarray, np.ndarray]:
        """Energies and gradients for each row of ``V``; infinite energies give nan gradients."""
        V = np.asarray(V, dtype=np.float64)
        P = self.rows
        if self.s == "dot":
            S = V @ P.T
            dS = np.broadcast_to(P[None], (V.shape[0],) + P.shape)
        else:
            diff = V[:, None, :] - P[None, :, :]
            sq = np.einsum("mkd,mkd->mk", diff, diff)
            S = -0.5 * sq if self.s == "neghalfsq" else -sq
            dS = -diff if self.s == "neghalfsq" else -2.0 * diff
        z = self.beta * S
        if self.q == "log" and isinstance(self.f, Exp):
            top = z.max(axis=1, keepdims=True)
            w = np.exp(z - top)
            total = w.sum(axis=1, keepdims=True)
            E = -self.scale * (np.log(total[:, 0]) + top[:, 0])
            G = -self.scale * self.beta * np.einsum("mk,mkd->md", w / total, dS)
            return E, G
        Fz = self.f(z)
        dF = self.f.deriv(z)
        if self.q == "identity":
            E = -self.scale * Fz.sum(axis=1)
            G = -self.scale * self.beta * np.einsum("mk,mkd->md", dF, dS)
            return E, G
        Z = Fz.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            E = np.where(Z > 0, -self.scale * np.log(np.where(Z > 0, Z, 1.0)), np.inf)
            G = -self.scale * self.beta * np.einsum("mk,mkd->md", dF, dS) / Z[:, None]
        G[~(Z > 0)] = np.nan
        return E, G

    # text serialisation ----------------------------------------------------

    def to_text(self, patterns_path: str) -> str:
        lines = [
            f"q={self.q}",
            f"f={self.f.token}",
            f"s={self.s}",
            f"beta={format(float(self.beta), '.17g')}",
        ]
        if self.scale != 1.0:
            lines.append(f"scale={format(float(self.scale), '.17g')}")
        lines.append(f"patterns={patterns_path}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, base_dir: str | Path | None = None) -> "EnergySpec":
        from .io import load_patterns

        kv = parse_key_values(text)
        allowed = {"q", "f", "s", "beta", "scale", "patterns"}
        unknown = set(kv) - allowed
        if unknown:
            raise ValidationError(f"unknown energy spec keys: {sorted(unknown)}")
        if "patterns" not in kv:
            raise ValidationError("energy spec needs a patterns= entry")
        path = Path(kv["patterns"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        try:
            beta = float(kv.get("beta", "1"))
            scale = float(kv.get("scale", "1"))
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
        return cls(load_patterns(path), kv.get("q", "log"), parse_separation(kv.get("f", "exp")),
                   kv.get("s", "neghalfsq"), beta, scale)


def parse_key_values(text: str) -> dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in out:
            raise ValidationError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


# energies ------------------------------------------------------------------

def discrete_energy(patterns, sigma, F) -> float:
    """``-sum_mu F(<xi_mu, sigma>)`` for a spin (or any) state."""
    P = as_pattern_array(patterns)
    sigma = as_state(sigma, P.shape[0])
    return -float(np.sum(F(P.T @ sigma)))


def general_energy_grad(spec: EnergySpec, v) -> GradientReport:
    """Energy and gradient of ``-scale * Q(sum_mu F(beta * S(v, xi_mu)))``."""
    v = as_state(v, spec.D)
    S, dS = _similarity(spec.s, spec.rows, v)
    z = spec.beta * S
    if spec.q == "log" and isinstance(spec.f, Exp):
        return _lse_reduce(z, spec.beta * dS, spec.scale)
    Fz = spec.f(z)
    dF = spec.f.deriv(z)
    active = int(np.count_nonzero(dF)) if isinstance(spec.f, ShiftedReLU) else int(z.shape[0])
    if spec.q == "identity":
        energy = -spec.scale * float(np.sum(Fz))
        grad = -spec.scale * spec.beta * (dF @ dS)
        return GradientReport(energy, grad, active)
    total = float(np.sum(Fz))
    if not total > 0.0:
        raise InfiniteEnergyError("log of a non-positive sum: the state lies outside every kernel support")
    energy = -spec.scale * np.log(total)
    grad = -spec.scale * spec.beta * (dF @ dS) / total
    return GradientReport(float(energy), grad, active)


def _check(P: np.ndarray, v) -> np.ndarray:
    v = as_state(v)
    if v.shape[0] != P.shape[0]:
        raise DimensionError(f"state has length {v.shape[0]}, patterns have D={P.shape[0]}")
    return v


def lse_energy_grad(patterns, v, beta: float) -> GradientReport:
    """``-log sum_mu exp(-(beta/2)|v - xi_mu|^2)`` and ``beta * sum_mu p_mu (v - xi_mu)``."""
    P = as_pattern_array(patterns)
    v = _check(P, v)
    S, dS = _similarity("neghalfsq", P.T, v)
    return _lse_reduce(beta * S, beta * dS, 1.0)


def lsr_energy_grad(patterns, v, beta: float) -> GradientReport:
    """``-log sum_mu max(0, 1 - (beta/2)|v - xi_mu|^2)``; raises outside every support."""
    P = as_pattern_array(patterns)
    v = _check(P, v)
    diff = v[None, :] - P.T
    terms = 1.0 - 0.5 * beta * np.sum(diff * diff, axis=1)
    active = terms > 0.0
    n_active = int(np.count_nonzero(active))
    if n_active == 0:
        raise InfiniteEnergyError(
            f"no active term: |v - xi| exceeds the support radius {np.sqrt(2.0 / beta):.6g} for every pattern")
    total = float(np.sum(terms[active]))
    grad = beta * np.sum(diff[active], axis=0) / total
    return GradientReport(-float(np.log(total)), grad, n_active)


def lsr_spec(patterns, beta: float) -> EnergySpec:
    return EnergySpec(patterns, "log", ShiftedReLU(), "neghalfsq", beta)


def lse_spec(patterns, beta: float) -> EnergySpec:
    return EnergySpec(patterns, "log", Exp(), "neghalfsq", beta)


def chn_spec(patterns) -> EnergySpec:
    """Classic Hopfield energy ``-sum_mu <v, xi_mu>^2``."""
    return EnergySpec(patterns, "identity", Power(2, scaled=False), "dot", 1.0)


def scaled_gaussian_spec(patterns, beta: float) -> EnergySpec:
    """``-(1/beta) log sum_mu exp(-beta |v - xi_mu|^2)``; gradient ``2 sum_mu p_mu (v - xi_mu)``."""
    return EnergySpec(patterns, "log", Exp(), "negsq", beta, 1.0 / beta)
