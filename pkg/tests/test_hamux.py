import math

import numpy as np
import pytest

from amkit.core import make_rng, sample_binary_patterns
from amkit.energies import Power, discrete_energy
from amkit.errors import DimensionError, ValidationError
from amkit.gradcheck import central_difference
from amkit.hamux import (Attention, Bilinear, DenseAM, EnergyGraph, ETWeights, HalfSquareReLU, Hopfield, PowerG,
                         SoftmaxG, TokenGrid, activation_gradients, attention_energy_grad, et_energy_grad, et_step,
                         exercise_energy_grad, exercise_graph, hn_energy_grad, input_currents, local_step,
                         synapse_energy, token_graph, total_energy)
from amkit.neurons import LayerNorm, LogCosh, NeuronLayer, Quadratic


def test_single_quadratic_layer_energy():
    x = np.array([1.0, -2.0, 0.5])
    assert total_energy(EnergyGraph([NeuronLayer(Quadratic(), x)])) == pytest.approx(0.5 * x @ x, abs=1e-15)


def test_bilinear_hand_computation():
    W = np.array([[1.0, 2.0], [0.0, -1.0]])
    g = EnergyGraph([NeuronLayer(Quadratic(), [1.0, 2.0]), NeuronLayer(Quadratic(), [3.0, -1.0])],
                    [Bilinear(W)], [(0, 1)])
    # a=(1,2), b=(3,-1): W b = (1, 1) so a.Wb = 3; W^T a = (1, 0)
    assert synapse_energy(g) == -3.0
    assert total_energy(g) == pytest.approx(0.5 * 5 + 0.5 * 10 - 3.0)
    grads = activation_gradients(g)
    assert np.array_equal(grads[0], [-1.0, -1.0])
    assert np.array_equal(grads[1], [-1.0, 0.0])


def test_graph_validation():
    with pytest.raises(DimensionError):
        EnergyGraph([NeuronLayer(Quadratic(), np.zeros(3)), NeuronLayer(Quadratic(), np.zeros(2))],
                    [Bilinear(np.zeros((2, 2)))], [(0, 1)])
    with pytest.raises(ValidationError):
        EnergyGraph([NeuronLayer(Quadratic(), np.zeros(2))], [Bilinear(np.zeros((2, 2)))], [(0,)])
    with pytest.raises(ValidationError):
        EnergyGraph([NeuronLayer(Quadratic(), np.zeros(2))], [DenseAM(np.ones((2, 1)))], [(3,)])


def test_tanh_layer_approaches_discrete_energy():
    P = sample_binary_patterns(10, 3, 0).data
    x = make_rng(1).standard_normal(10)
    target = discrete_energy(P, np.where(x >= 0, 1.0, -1.0), Power(2))
    gaps = [abs(total_energy(exercise_graph(P, x, beta)) - target) for beta in (10.0, 100.0, 1000.0)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.05


def test_pure_decay():
    x = np.array([1.0, -3.0])
    g = EnergyGraph([NeuronLayer(Quadratic(), x, tau=2.0)])
    assert np.allclose(local_step(g, 0.5).layers[0].state, x * (1 - 0.25), atol=0, rtol=1e-15)


def test_currents_match_synapse_energy_derivatives():
    r = make_rng(2)
    W = r.standard_normal((3, 4))
    layers = [NeuronLayer(LogCosh(1.0), r.standard_normal(3)), NeuronLayer(Quadratic(), r.standard_normal(4))]
    g = EnergyGraph(layers, [Bilinear(W), DenseAM(r.standard_normal((4, 2)), Power(3))], [(0, 1), (1,)])
    acts = g.activations()
    cur = input_currents(g)
    for i in range(2):
        def f(a, i=i):
            trial = list(acts)
            trial[i] = a
            return synapse_energy(g, trial)
        assert np.allclose(cur[i], -central_difference(f, acts[i]), atol=1e-8)


def test_exercise_step_with_dt_equal_tau_returns_current():
    P = sample_binary_patterns(6, 2, 3).data
    x = make_rng(3).standard_normal(6)
    g = exercise_graph(P, x, beta=2.0)
    nxt = local_step(g, 1.0)
    assert np.array_equal(nxt.layers[0].state, input_currents(g)[0])


def test_exercise_gradient_matches_graph_energy():
    P = sample_binary_patterns(6, 3, 4).data
    x = make_rng(4).standard_normal(6)
    rep = exercise_energy_grad(P, x, 1.5)
    assert rep.energy == pytest.approx(total_energy(exercise_graph(P, x, 1.5)), abs=1e-12)
    fd = central_difference(lambda z: exercise_energy_grad(P, z, 1.5).energy, x)
    assert np.allclose(rep.gradient, fd, atol=1e-8)


def test_backtracked_local_steps_never_increase_energy():
    r = make_rng(5)
    for _ in range(20):
        g = exercise_graph(r.standard_normal((5, 3)), r.standard_normal(5), beta=float(r.uniform(0.5, 3.0)))
        E = [total_energy(g)]
        for _ in range(25):
            g = local_step(g, 0.8, backtracking=True)
            E.append(total_energy(g))
        assert np.all(np.diff(E) <= 1e-12)


def test_zero_weight_attention_closed_form():
    N, D, Y, H, beta = 5, 3, 2, 4, 0.7
    g = make_rng(6).standard_normal((N, D))
    E, grad = attention_energy_grad(g, np.zeros((Y, H, D)), np.zeros((Y, H, D)), beta)
    assert E == pytest.approx(-(H * N / beta) * math.log(N - 1), rel=1e-14)
    assert np.array_equal(grad, np.zeros_like(g))


def test_attention_scalar_hand_case():
    a, b, k, q = 0.7, -1.3, 2.0, 0.5
    g = np.array([[a], [b]])
    E, grad = attention_energy_grad(g, np.array([[[k]]]), np.array([[[q]]]), beta=3.0)
    # each token attends only to the other: E = -(K_1 Q_0 + K_0 Q_1) = -2 k q a b
    assert E == pytest.approx(-2 * k * q * a * b, rel=1e-14)
    assert np.allclose(grad, [[-2 * k * q * b], [-2 * k * q * a]], rtol=1e-14)


def test_attention_needs_two_tokens():
    with pytest.raises(ValidationError):
        attention_energy_grad(np.ones((1, 2)), np.ones((1, 1, 2)), np.ones((1, 1, 2)), 1.0)


def test_hopfield_block_cases():
    g = make_rng(7).standard_normal((3, 4))
    E, grad = hn_energy_grad(g, np.zeros((5, 4)), HalfSquareReLU())
    assert E == 0.0 and np.array_equal(grad, np.zeros_like(g))
    E1, g1 = hn_energy_grad(np.array([[2.0]]), np.array([[1.5]]), HalfSquareReLU())
    assert E1 == -0.5 * 3.0 ** 2 and g1[0, 0] == -3.0 * 1.5
    E2, _ = hn_energy_grad(np.array([[2.0]]), np.array([[-1.5]]), HalfSquareReLU())
    assert E2 == 0.0
    assert hn_energy_grad(np.array([[1.0, 2.0]]), np.array([[1.0, 1.0]]), PowerG(2))[0] == -4.5
    with pytest.raises(DimensionError):
        hn_energy_grad(g, np.zeros((5, 3)), HalfSquareReLU())


@pytest.mark.parametrize("G", [HalfSquareReLU(), SoftmaxG(2.0), PowerG(3)], ids=["relu2", "softmax", "power3"])
def test_hopfield_gradient_fd(G):
    r = make_rng(8)
    g, xi = r.standard_normal((3, 4)), r.standard_normal((5, 4))
    fd = central_difference(lambda z: hn_energy_grad(z, xi, G)[0], g)
    assert np.allclose(hn_energy_grad(g, xi, G)[1], fd, atol=1e-8)


def test_et_step_zero_steps_is_identity():
    w = ETWeights.random(4, 3, 2, 6, 0)
    tg = TokenGrid(make_rng(9).standard_normal((5, 4)))
    out, trace = et_step(tg, w, 0.1, 0)
    assert np.array_equal(out.tokens, tg.tokens) and len(trace) == 1


def test_et_energy_trace_is_monotone():
    r = make_rng(10)
    for seed in range(5):
        w = ETWeights.random(8, 4, 2, 16, seed, scale=0.5)
        _, trace = et_step(TokenGrid(r.standard_normal((8, 8))), w, 0.1, 50)
        assert np.all(np.diff(trace) <= 0.0)


def test_et_masked_initialisation():
    tg = TokenGrid(np.ones((3, 2)), np.array([False, True, False]))
    pos = np.full((3, 2), 0.25)
    init = tg.with_masked_init(pos)
    assert np.array_equal(init.tokens, [[1, 1], [0.25, 0.25], [1, 1]])
    with pytest.raises(DimensionError):
        TokenGrid(np.ones((3, 2)), np.array([True]))


def test_et_needs_two_tokens():
    with pytest.raises(ValidationError):
        et_step(TokenGrid(np.ones((1, 4))), ETWeights.random(4, 2, 1, 3, 0), 0.1, 1)


def test_token_graph_matches_block_energy():
    w = ETWeights.random(6, 3, 2, 5, 1, scale=0.5)
    x = make_rng(11).standard_normal((4, 6))
    E, d_act, d_tok = et_energy_grad(x, w)
    g = token_graph(TokenGrid(x), w)
    assert synapse_energy(g) == pytest.approx(E, abs=1e-12)
    assert np.allclose(activation_gradients(g)[0], d_act, atol=1e-14)
    assert np.allclose(central_difference(lambda z: et_energy_grad(z, w)[0], x), d_tok, atol=1e-8)


def test_layernorm_jacobian_psd_on_random_tokens():
    r = make_rng(12)
    norm = LayerNorm(gamma=1.3, delta=0.2)
    for _ in range(20):
        H = norm.hessian(r.standard_normal(8))
        assert np.allclose(H, H.T, atol=1e-14)
        assert np.linalg.eigvalsh(H).min() >= -1e-12


def test_weight_bundle_round_trip(tmp_path):
    from amkit.io import save_bundle
    w = ETWeights.random(4, 2, 2, 3, 5, beta=0.5)
    save_bundle(tmp_path / "w.amk", w.bundle())
    back = ETWeights.from_bundle(tmp_path / "w.amk")
    assert back.beta == 0.5 and np.array_equal(back.WK, w.WK) and np.array_equal(back.xi, w.xi)
    save_bundle(tmp_path / "bad.amk", {"WK": w.WK})
    with pytest.raises(ValidationError):
        ETWeights.from_bundle(tmp_path / "bad.amk")
