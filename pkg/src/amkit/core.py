"""Shared types, seeded randomness and pattern utilities.

Conventions used across the package:

* a pattern matrix is ``D x K`` (rows are neurons, columns are memories);
* states are 1-D float arrays of length ``D``; spin states hold only +-1;
* clamp masks are 0/1 arrays of length ``D`` where 1 marks a free coordinate.

Randomness always goes through :func:`make_rng`, which wraps numpy's PCG64
generator. PCG64 is a fixed, documented algorithm, so a given seed produces
the same stream on every platform.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DimensionError, ValidationError

PatternKind = Literal["binary", "real"]

_MASK64 = (1 << 64) - 1


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """PCG64 generator seeded from a 64-bit seed plus optional stream keys.

    ``make_rng(s, i)`` and ``make_rng(s, j)`` give independent streams, which
    is how per-trial seeds are derived from a master seed.
    """
    words = [int(seed) & _MASK64] + [int(k) & _MASK64 for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))


@dataclass(frozen=True)
class PatternMatrix:
    """Stored memories as a ``D x K`` matrix.

    Attributes:
        data: float64 array, one memory per column.
        kind: ``"binary"`` when every entry is +-1, else ``"real"``.
    """

    data: np.ndarray
    kind: PatternKind = "real"

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"pattern matrix must be D x K with D, K >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("pattern matrix has non-finite entries")
        if self.kind not in ("binary", "real"):
            raise ValidationError(f"unknown pattern kind {self.kind!r}")
        if self.kind == "binary" and not np.all(np.abs(arr) == 1.0):
            raise ValidationError("binary pattern matrix must contain only -1 and +1")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def D(self) -> int:
        return self.data.shape[0]

    @property
    def K(self) -> int:
        return self.data.shape[1]

    def column(self, mu: int) -> np.ndarray:
        return self.data[:, mu]

    def subset(self, columns) -> "PatternMatrix":
        return PatternMatrix(self.data[:, columns], self.kind)

    @classmethod
    def from_rows(cls, rows, kind: PatternKind = "real") -> "PatternMatrix":
        """Build from a ``K x D`` array (one memory per row)."""
        return cls(np.asarray(rows, dtype=np.float64).T, kind)


def as_pattern_array(patterns) -> np.ndarray:
    """Return the ``D x K`` float array behind a PatternMatrix or array-like."""
    if isinstance(patterns, PatternMatrix):
        return patterns.data
    arr = np.asarray(patterns, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionError(f"patterns must be 2-D, got shape {arr.shape}")
    return arr


def as_state(v, D: int | None = None) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"state must be 1-D, got shape {arr.shape}")
    if D is not None and arr.shape[0] != D:
        raise DimensionError(f"state has length {arr.shape[0]}, expected {D}")
    return arr


def is_spin(s) -> bool:
    return bool(np.all(np.abs(np.asarray(s)) == 1.0))


def sample_binary_patterns(D: int, K: int, seed: int) -> PatternMatrix:
    """Draw a ``D x K`` matrix of independent fair +-1 entries."""
    if D < 1 or K < 1:
        raise DimensionError(f"need D >= 1 and K >= 1, got D={D}, K={K}")
    rng = make_rng(seed)
    bits = rng.integers(0, 2, size=(D, K), dtype=np.int8)
    return PatternMatrix(2.0 * bits - 1.0, "binary")


def corrupt_state(s, flip_count: int, seed: int) -> np.ndarray:
    """Negate exactly ``flip_count`` distinct coordinates of a spin state."""
    s = as_state(s)
    if not is_spin(s):
        raise ValidationError("corrupt_state expects a +-1 spin state")
    D = s.shape[0]
    if flip_count < 0 or flip_count > D:
        raise ValidationError(f"flip_count must lie in [0, {D}], got {flip_count}")
    out = s.copy()
    idx = flip_positions(D, flip_count, seed)
    out[idx] = -out[idx]
    return out


def flip_positions(D: int, flip_count: int, seed: int) -> np.ndarray:
    """Indices negated by :func:`corrupt_state` for the same arguments."""
    rng = make_rng(seed)
    return np.sort(rng.choice(D, size=flip_count, replace=False))


def overlap(p, s) -> float:
    """Dot product between one pattern and a state."""
    p = np.asarray(p, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if p.shape != s.shape or p.ndim != 1:
        raise DimensionError(f"overlap needs equal-length vectors, got {p.shape} and {s.shape}")
    return float(p @ s)


def sign(x) -> np.ndarray:
    """Elementwise sign with ties resolved to +1."""
    return np.where(np.asarray(x) >= 0, 1.0, -1.0)


def full_mask(D: int) -> np.ndarray:
    return np.ones(D, dtype=np.float64)


def as_mask(mask, D: int) -> np.ndarray:
    if mask is None:
        return full_mask(D)
    m = np.asarray(mask, dtype=np.float64)
    if m.shape != (D,):
        raise DimensionError(f"mask has shape {m.shape}, expected ({D},)")
    if not np.all((m == 0.0) | (m == 1.0)):
        raise ValidationError("mask entries must be 0 or 1")
    return m


def parallel_map(fn, items, threads: int = 1) -> list:
    """``[fn(i) for i in items]``, optionally on a thread pool; output order is input order."""
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
