"""Modular energy graphs (neuron layers + hypersynapses) and the Energy Transformer.

Total graph energy is the sum of the layers' Legendre-dual energies and the
synapse interaction energies. Each synapse reports the gradient of its
energy with respect to the activations of every layer it touches; a layer's
input current is minus the sum of those gradients, and its state follows

    tau dx/dt = current - x.

Token layers carry an ``N x D`` state; attention and Hopfield synapses act
on layer-normalised tokens.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import as_pattern_array, make_rng
from .energies import GradientReport, Power
from .errors import DimensionError, ValidationError
from .io import load_bundle
from .neurons import LayerNorm, LogCosh, NeuronLayer, dual_energy


# synapses --------------------------------------------------------------------

class Hypersynapse:
    """Interaction energy over the activations of one or more layers."""

    arity = 1

    def energy(self, acts: Sequence[np.ndarray]) -> float:
        raise NotImplementedError

    def grads(self, acts: Sequence[np.ndarray]) -> list[np.ndarray]:
        raise NotImplementedError

    def check(self, shapes: Sequence[tuple]) -> None:
        pass


@dataclass(frozen=True)
class Bilinear(Hypersynapse):
    """``E = -a^T W b`` between two layers."""

    W: np.ndarray
    arity = 2

    def energy(self, acts):
        a, b = acts
        return -float(a @ self.W @ b)

    def grads(self, acts):
        a, b = acts
        return [-(self.W @ b), -(self.W.T @ a)]

    def check(self, shapes):
        if shapes[0] != (self.W.shape[0],) or shapes[1] != (self.W.shape[1],):
            raise DimensionError(f"bilinear W {self.W.shape} does not match layers {shapes}")


@dataclass(frozen=True)
class DenseAM(Hypersynapse):
    """``E = -sum_mu F(<xi_mu, a>)`` with memories as columns of a ``D x K`` matrix."""

    patterns: np.ndarray
    F: object = field(default_factory=lambda: Power(2))

    def energy(self, acts):
        (a,) = acts
        return -float(np.sum(self.F(as_pattern_array(self.patterns).T @ a)))

    def grads(self, acts):
        (a,) = acts
        P = as_pattern_array(self.patterns)
        return [-(P @ self.F.deriv(P.T @ a))]

    def check(self, shapes):
        D = as_pattern_array(self.patterns).shape[0]
        if shapes[0] != (D,):
            raise DimensionError(f"denseam patterns have D={D}, layer shape {shapes[0]}")


# Energy Transformer pieces -------------------------------------------------------

def attention_energy_grad(g: np.ndarray, WK: np.ndarray, WQ: np.ndarray, beta: float,
                          attendable: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Multi-head energy attention on normalised tokens ``g`` (``N x D``).

    ``E = -(1/beta) sum_h sum_C log sum_{B != C} exp(beta A[h, B, C])`` with
    ``A[h, B, C] = sum_y K[y, h, B] Q[y, h, C]``, ``K = WK g``, ``Q = WQ g`` and
    weights of shape ``Y x H x D``. ``attendable`` (length N, bool) removes
    tokens from the inner sum. Returns the energy and its gradient in ``g``.
    """
    g = np.asarray(g, dtype=np.float64)
    N = g.shape[0]
    if N < 2:
        raise ValidationError("attention energy needs at least 2 tokens")
    if WK.shape != WQ.shape or WK.ndim != 3 or WK.shape[2] != g.shape[1]:
        raise DimensionError(f"weights {WK.shape}/{WQ.shape} do not match tokens {g.shape}")
    K = np.einsum("yhd,nd->yhn", WK, g)
    Q = np.einsum("yhd,nd->yhn", WQ, g)
    logits = beta * np.einsum("yhb,yhc->hbc", K, Q)
    allowed = ~np.eye(N, dtype=bool)
    if attendable is not None:
        allowed &= np.asarray(attendable, dtype=bool)[:, None]
    if not np.all(allowed.any(axis=0)):
        raise ValidationError("some token has nothing to attend to")
    logits = np.where(allowed[None], logits, -np.inf)
    top = logits.max(axis=1, keepdims=True)
    w = np.exp(logits - top)
    total = w.sum(axis=1, keepdims=True)
    energy = -float(np.sum(np.log(total[:, 0, :]) + top[:, 0, :])) / beta
    w /= total
    dK = -np.einsum("hbc,yhc->yhb", w, Q)
    dQ = -np.einsum("hbc,yhb->yhc", w, K)
    grad = np.einsum("yhd,yhb->bd", WK, dK) + np.einsum("yhd,yhc->cd", WQ, dQ)
    return energy, grad


@dataclass(frozen=True)
class HalfSquareReLU:
    """``G(z) = relu(z)**2 / 2``; derivative ``relu``."""

    def energy(self, z):
        r = np.maximum(z, 0.0)
        return 0.5 * float(np.sum(r * r))

    def grad(self, z):
        return np.maximum(z, 0.0)


@dataclass(frozen=True)
class PowerG:
    """``G(z) = z**n / n``."""

    n: int = 2

    def energy(self, z):
        return float(np.sum(np.asarray(z) ** self.n)) / self.n

    def grad(self, z):
        return np.asarray(z) ** (self.n - 1)


@dataclass(frozen=True)
class SoftmaxG:
    """Per-token ``(1/beta) log sum_mu exp(beta z_mu)``; gradient is the softmax."""

    beta: float = 1.0

    def energy(self, z):
        s = self.beta * np.atleast_2d(z)
        top = s.max(axis=1, keepdims=True)
        return float(np.sum(np.log(np.sum(np.exp(s - top), axis=1)) + top[:, 0])) / self.beta

    def grad(self, z):
        s = self.beta * np.atleast_2d(z)
        e = np.exp(s - s.max(axis=1, keepdims=True))
        return (e / e.sum(axis=1, keepdims=True)).reshape(np.shape(z))


def hn_energy_grad(g: np.ndarray, xi: np.ndarray, G) -> tuple[float, np.ndarray]:
    """Hopfield block ``E = -sum_B G(xi g_B)`` with memories ``xi`` as a ``K x D`` matrix."""
    g = np.asarray(g, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    if xi.ndim != 2 or xi.shape[1] != g.shape[-1]:
        raise DimensionError(f"memories {xi.shape} do not match token width {g.shape[-1]}")
    z = g @ xi.T
    return -G.energy(z), -(G.grad(z) @ xi)


@dataclass(frozen=True)
class Attention(Hypersynapse):
    WK: np.ndarray
    WQ: np.ndarray
    beta: float = 1.0
    attendable: np.ndarray | None = None

    def energy(self, acts):
        return attention_energy_grad(acts[0], self.WK, self.WQ, self.beta, self.attendable)[0]

    def grads(self, acts):
        return [attention_energy_grad(acts[0], self.WK, self.WQ, self.beta, self.attendable)[1]]

    def check(self, shapes):
        if len(shapes[0]) != 2 or shapes[0][1] != self.WK.shape[2]:
            raise DimensionError(f"attention weights {self.WK.shape} do not match tokens {shapes[0]}")


@dataclass(frozen=True)
class Hopfield(Hypersynapse):
    xi: np.ndarray
    G: object = field(default_factory=HalfSquareReLU)

    def energy(self, acts):
        return hn_energy_grad(acts[0], self.xi, self.G)[0]

    def grads(self, acts):
        return [hn_energy_grad(acts[0], self.xi, self.G)[1]]

    def check(self, shapes):
        if shapes[0][-1] != np.shape(self.xi)[1]:
            raise DimensionError(f"hopfield memories {np.shape(self.xi)} do not match layer {shapes[0]}")


# graph ----------------------------------------------------------------------------

@dataclass
class EnergyGraph:
    layers: list
    synapses: list = field(default_factory=list)
    adjacency: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.synapses) != len(self.adjacency):
            raise ValidationError("need one adjacency entry per synapse")
        for syn, idx in zip(self.synapses, self.adjacency):
            if len(idx) != syn.arity:
                raise ValidationError(f"{type(syn).__name__} connects {syn.arity} layers, got {len(idx)}")
            if any(i < 0 or i >= len(self.layers) for i in idx):
                raise ValidationError(f"synapse references missing layer in {idx}")
            syn.check([self.layers[i].state.shape for i in idx])

    def activations(self) -> list[np.ndarray]:
        return [layer.activation for layer in self.layers]

    def with_states(self, states) -> "EnergyGraph":
        layers = [layer.copy_with(s) for layer, s in zip(self.layers, states)]
        return EnergyGraph(layers, self.synapses, self.adjacency)


def synapse_energy(g: EnergyGraph, acts=None) -> float:
    acts = g.activations() if acts is None else acts
    return float(sum(s.energy([acts[i] for i in idx]) for s, idx in zip(g.synapses, g.adjacency)))


def total_energy(g: EnergyGraph) -> float:
    """Sum of layer dual energies and synapse energies."""
    acts = g.activations()
    return float(sum(layer.energy for layer in g.layers)) + synapse_energy(g, acts)


def activation_gradients(g: EnergyGraph, acts=None) -> list[np.ndarray]:
    """``dE_synapses / d act`` for each layer (zero for unconnected layers)."""
    acts = g.activations() if acts is None else acts
    out = [np.zeros_like(a) for a in acts]
    for syn, idx in zip(g.synapses, g.adjacency):
        for i, gi in zip(idx, syn.grads([acts[i] for i in idx])):
            out[i] = out[i] + gi
    return out


def input_currents(g: EnergyGraph) -> list[np.ndarray]:
    return [-grad for grad in activation_gradients(g)]


def local_step(g: EnergyGraph, dt: float, backtracking: bool = False, max_halvings: int = 40) -> EnergyGraph:
    """Explicit Euler step of ``tau dx/dt = current - x`` on every layer.

    With ``dt == tau`` the new state equals the input current exactly. With
    backtracking, ``dt`` is halved until the total energy does not increase.
    """
    if not dt > 0:
        raise ValidationError("dt must be positive")
    currents = input_currents(g)

    def advance(h):
        states = []
        for layer, cur in zip(g.layers, currents):
            r = h / layer.tau
            states.append(layer.state * (1.0 - r) + r * cur)
        return g.with_states(states)

    new = advance(dt)
    if backtracking:
        E0 = total_energy(g)
        h = dt
        for _ in range(max_halvings):
            if total_energy(new) <= E0:
                return new
            h *= 0.5
            new = advance(h)
        if total_energy(new) > E0:
            return g
    return new


# exercise energy: log-cosh layer + dense associative synapse ---------------------------

def exercise_graph(patterns, x, beta: float = 1.0, F=None, tau: float = 1.0) -> EnergyGraph:
    """One tanh layer (log-cosh Lagrangian) with a dense associative synapse."""
    F = Power(2) if F is None else F
    return EnergyGraph([NeuronLayer(LogCosh(beta), x, tau)], [DenseAM(as_pattern_array(patterns), F)], [(0,)])


def exercise_energy_grad(patterns, x, beta: float = 1.0, F=None) -> GradientReport:
    """Total energy of :func:`exercise_graph` and its gradient in the state ``x``."""
    F = Power(2) if F is None else F
    P = as_pattern_array(patterns)
    x = np.asarray(x, dtype=np.float64)
    kind = LogCosh(beta)
    xh = kind.activation(x)
    overlaps = P.T @ xh
    energy = dual_energy(kind, x) - float(np.sum(F(overlaps)))
    d_act = x - P @ F.deriv(overlaps)
    return GradientReport(energy, kind.jvp(x, d_act), P.shape[1])


# Energy Transformer block -------------------------------------------------------------

@dataclass
class TokenGrid:
    """``N x D`` token states with a per-token masked flag."""

    tokens: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.tokens = np.array(self.tokens, dtype=np.float64, copy=True)
        if self.tokens.ndim != 2:
            raise DimensionError("tokens must be an N x D matrix")
        if self.mask is None:
            self.mask = np.zeros(self.tokens.shape[0], dtype=bool)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != (self.tokens.shape[0],):
            raise DimensionError("mask needs one flag per token")

    @property
    def N(self) -> int:
        return self.tokens.shape[0]

    def with_masked_init(self, position) -> "TokenGrid":
        """Masked tokens become zero plus their position encoding."""
        pos = np.asarray(position, dtype=np.float64)
        if pos.shape != self.tokens.shape:
            raise DimensionError("position encoding must match the token grid")
        t = self.tokens.copy()
        t[self.mask] = pos[self.mask]
        return TokenGrid(t, self.mask)


@dataclass(frozen=True)
class ETWeights:
    """Parameters of one Energy Transformer block.

    ``WK``/``WQ`` have shape ``Y x H x D``; ``xi`` is ``M x D`` (Hopfield memories).
    """

    WK: np.ndarray
    WQ: np.ndarray
    xi: np.ndarray
    beta: float = 1.0
    G: object = field(default_factory=HalfSquareReLU)
    norm: LayerNorm = field(default_factory=LayerNorm)
    tau: float = 1.0

    @classmethod
    def random(cls, D: int, Y: int, H: int, M: int, seed: int, scale: float = 0.1, **kw) -> "ETWeights":
        rng = make_rng(seed)
        return cls(scale * rng.standard_normal((Y, H, D)), scale * rng.standard_normal((Y, H, D)),
                   scale * rng.standard_normal((M, D)), **kw)

    @classmethod
    def from_bundle(cls, path, **kw) -> "ETWeights":
        t = load_bundle(path)
        missing = {"WK", "WQ", "xi"} - set(t)
        if missing:
            raise ValidationError(f"weight bundle is missing {sorted(missing)}")
        extra = {}
        if "beta" in t:
            extra["beta"] = float(np.ravel(t["beta"])[0])
        extra.update(kw)
        return cls(t["WK"], t["WQ"], t["xi"], **extra)

    def bundle(self) -> dict[str, np.ndarray]:
        return {"WK": self.WK, "WQ": self.WQ, "xi": self.xi, "beta": np.array(self.beta)}


def attention_energy(tg: TokenGrid, WK, WQ, beta: float, norm: LayerNorm | None = None,
                     attendable=None) -> float:
    """Attention energy of the layer-normalised tokens of ``tg``."""
    norm = LayerNorm() if norm is None else norm
    return attention_energy_grad(norm.activation(tg.tokens), np.asarray(WK), np.asarray(WQ), beta, attendable)[0]


def hn_energy(tg: TokenGrid, xi, G, norm: LayerNorm | None = None) -> float:
    norm = LayerNorm() if norm is None else norm
    return hn_energy_grad(norm.activation(tg.tokens), xi, G)[0]


def et_energy_grad(tokens: np.ndarray, w: ETWeights) -> tuple[float, np.ndarray, np.ndarray]:
    """Block energy, its gradient in the activations, and its gradient in the tokens."""
    g = w.norm.activation(tokens)
    ea, ga = attention_energy_grad(g, w.WK, w.WQ, w.beta)
    eh, gh = hn_energy_grad(g, w.xi, w.G)
    d_act = ga + gh
    return ea + eh, d_act, w.norm.jvp(tokens, d_act)


def et_step(tg: TokenGrid, weights: ETWeights, dt: float, steps: int, backtracking: bool = True,
            position=None, max_halvings: int = 40) -> tuple[TokenGrid, list[float]]:
    """Token dynamics ``tau dx/dt = -dE/d(normalised x)`` for ``steps`` Euler steps.

    If ``position`` is given, masked tokens start at zero plus their
    position encoding. Returns the final grid and the energy after each step
    (first entry is the start energy).
    """
    if tg.N < 2:
        raise ValidationError("energy transformer needs at least 2 tokens")
    if position is not None:
        tg = tg.with_masked_init(position)
    x = tg.tokens.copy()
    E, d_act, _ = et_energy_grad(x, weights)
    trace = [E]
    for _ in range(steps):
        h = dt
        cand = x - (h / weights.tau) * d_act
        E_new, d_new, _ = et_energy_grad(cand, weights)
        if backtracking:
            halvings = 0
            while E_new > E and halvings < max_halvings:
                h *= 0.5
                halvings += 1
                cand = x - (h / weights.tau) * d_act
                E_new, d_new, _ = et_energy_grad(cand, weights)
            if E_new > E:
                cand, E_new, d_new = x, E, d_act
        x, E, d_act = cand, E_new, d_new
        trace.append(E)
    return TokenGrid(x, tg.mask), trace


def token_graph(tg: TokenGrid, weights: ETWeights) -> EnergyGraph:
    """The ET block expressed as a graph: one token layer, attention + Hopfield synapses."""
    layer = NeuronLayer(weights.norm, tg.tokens, weights.tau)
    return EnergyGraph([layer], [Attention(weights.WK, weights.WQ, weights.beta), Hopfield(weights.xi, weights.G)],
                       [(0,), (0,)])
