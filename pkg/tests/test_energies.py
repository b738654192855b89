import math

import numpy as np
import pytest

from amkit.core import PatternMatrix, make_rng, sample_binary_patterns
from amkit.energies import (EnergySpec, Exp, Power, ShiftedReLU, chn_spec, discrete_energy, general_energy_grad,
                            lse_energy_grad, lse_spec, lsr_energy_grad, lsr_spec, parse_key_values,
                            parse_separation, scaled_gaussian_spec)
from amkit.errors import InfiniteEnergyError, ValidationError
from amkit.gradcheck import check_gradient, cosine
from amkit.io import save_patterns


def test_discrete_energy_closed_forms():
    D = 7
    xi = sample_binary_patterns(D, 1, 0)
    s = xi.column(0)
    assert discrete_energy(xi, s, Power(2)) == -D ** 2 / 2
    assert discrete_energy(xi, s, Power(3)) == pytest.approx(-D ** 3 / 3, rel=1e-15)
    assert discrete_energy(xi, s, Exp()) == pytest.approx(-math.exp(D), rel=1e-15)


def test_lse_single_term_and_symmetry():
    r = make_rng(0)
    xi = r.standard_normal((4, 1))
    v = r.standard_normal(4)
    rep = lse_energy_grad(xi, v, 2.5)
    assert rep.energy == pytest.approx(1.25 * np.sum((v - xi[:, 0]) ** 2), rel=1e-13)
    assert np.allclose(rep.gradient, 2.5 * (v - xi[:, 0]), atol=1e-13)
    P = np.array([[1.0, -1.0], [0.0, 0.0]])
    v = np.array([0.0, 0.7])
    assert np.allclose(lse_energy_grad(P, v, 3.0).gradient, 3.0 * (v - P.mean(axis=1)), atol=1e-14)


def test_lse_fd_and_large_beta_stability():
    r = make_rng(1)
    P = r.standard_normal((6, 4))
    v = r.standard_normal(6)
    rep = lse_energy_grad(P, v, 2.0)
    assert check_gradient(lambda z: lse_energy_grad(P, z, 2.0).energy, rep.gradient, v) < 1e-6
    far = lse_energy_grad(P, 30.0 * np.ones(6), 100.0)
    assert np.isfinite(far.energy) and np.all(np.isfinite(far.gradient))


def test_lse_lower_bound():
    r = make_rng(2)
    for _ in range(50):
        P = r.standard_normal((3, 5))
        v = r.standard_normal(3)
        beta = r.uniform(0.1, 5.0)
        d2 = np.sum((v[:, None] - P) ** 2, axis=0)
        assert lse_energy_grad(P, v, beta).energy >= np.min(0.5 * beta * d2) - math.log(5) - 1e-12


def test_lsr_single_active_term_collinear():
    P = np.array([[0.0, 10.0], [0.0, 10.0]])
    v = np.array([0.3, -0.2])
    rep = lsr_energy_grad(P, v, 1.0)
    assert rep.active_terms == 1
    assert cosine(rep.gradient, v - P[:, 0]) == pytest.approx(1.0, abs=1e-12)


def test_lsr_outside_support_raises():
    P = np.zeros((2, 1))
    beta = 2.0
    radius = math.sqrt(2.0 / beta)
    with pytest.raises(InfiniteEnergyError):
        lsr_energy_grad(P, np.array([radius * 1.01, 0.0]), beta)
    with pytest.raises(InfiniteEnergyError):
        # exactly on the boundary the term is inactive
        lsr_energy_grad(P, np.array([radius, 0.0]), beta)
    assert lsr_spec(P, beta).energy(np.array([2.0, 0.0])) == math.inf


def test_lsr_two_active_terms_fd_1d():
    P = np.array([[0.0, 0.8]])
    for x in (0.2, 0.45, 0.6):
        v = np.array([x])
        rep = lsr_energy_grad(P, v, 1.0)
        assert rep.active_terms == 2
        assert check_gradient(lambda z: lsr_energy_grad(P, z, 1.0).energy, rep.gradient, v) < 1e-6


def test_lsr_energy_bounds():
    r = make_rng(3)
    P = r.standard_normal((2, 4))
    for _ in range(100):
        v = r.standard_normal(2)
        try:
            assert lsr_energy_grad(P, v, 0.5).energy >= -math.log(4) - 1e-12
        except InfiniteEnergyError:
            pass
    one = np.zeros((2, 1))
    assert lsr_energy_grad(one, np.array([0.1, 0.2]), 1.0).energy >= 0.0


def test_chn_matches_double_loop():
    P = sample_binary_patterns(9, 4, 5)
    s = sample_binary_patterns(9, 1, 6).column(0)
    direct = -sum(sum(P.data[i, m] * s[i] for i in range(9)) ** 2 for m in range(4))
    assert general_energy_grad(chn_spec(P), s).energy == direct


def test_general_reduces_to_lse_bitwise():
    r = make_rng(4)
    P = r.standard_normal((5, 3))
    for _ in range(10):
        v = r.standard_normal(5)
        a = general_energy_grad(lse_spec(P, 1.7), v)
        b = lse_energy_grad(P, v, 1.7)
        assert a.energy == b.energy and np.array_equal(a.gradient, b.gradient)


@pytest.mark.parametrize("q,f,s", [("identity", Power(2), "dot"), ("identity", Power(3), "dot"),
                                   ("log", Exp(), "neghalfsq"), ("log", Exp(), "negsq"),
                                   ("identity", Exp(), "negsq"), ("log", Power(2), "dot")])
def test_general_fd(q, f, s):
    r = make_rng(5)
    P = r.standard_normal((4, 3))
    spec = EnergySpec(P, q, f, s, 0.7)
    for _ in range(20):
        v = r.standard_normal(4)
        rep = spec.energy_grad(v)
        if math.isfinite(rep.energy):
            assert check_gradient(spec.energy, rep.gradient, v) < 1e-6


def test_log_of_nonpositive_sum_raises():
    spec = EnergySpec(np.array([[1.0]]), "log", ShiftedReLU(), "dot", 1.0)
    with pytest.raises(InfiniteEnergyError):
        spec.energy_grad(np.array([-3.0]))


def test_translation_equivariance():
    r = make_rng(6)
    P = r.standard_normal((3, 4))
    shift = r.standard_normal(3)
    for s in ("neghalfsq", "negsq"):
        spec = EnergySpec(P, "log", Exp(), s, 1.3)
        moved = EnergySpec(P + shift[:, None], "log", Exp(), s, 1.3)
        v = r.standard_normal(3)
        assert moved.energy(v + shift) == pytest.approx(spec.energy(v), abs=1e-12)


def test_scaled_gaussian_gradient_form():
    r = make_rng(7)
    P = r.standard_normal((2, 5))
    v = r.standard_normal(2)
    beta = 3.0
    rep = scaled_gaussian_spec(P, beta).energy_grad(v)
    d2 = np.sum((v[:, None] - P) ** 2, axis=0)
    p = np.exp(-beta * (d2 - d2.min()))
    p /= p.sum()
    assert np.allclose(rep.gradient, 2.0 * (p * (v[:, None] - P)).sum(axis=1), atol=1e-13)


def test_batch_matches_pointwise():
    r = make_rng(8)
    P = r.standard_normal((2, 3))
    V = r.standard_normal((10, 2))
    for spec in (lse_spec(P, 2.0), chn_spec(P), scaled_gaussian_spec(P, 5.0), lsr_spec(P, 0.3)):
        E, G = spec.energy_grad_batch(V)
        for v, e, g in zip(V, E, G):
            if math.isfinite(e):
                rep = spec.energy_grad(v)
                assert e == pytest.approx(rep.energy, rel=1e-12, abs=1e-12)
                assert np.allclose(g, rep.gradient, atol=1e-12)
            else:
                assert spec.energy(v) == math.inf and np.all(np.isnan(g))


def test_spec_text_roundtrip(tmp_path):
    P = PatternMatrix(make_rng(9).standard_normal((3, 2)))
    save_patterns(tmp_path / "p.amk", P)
    spec = EnergySpec(P, "log", Exp(), "neg-half-sq-euclid", 2.0)
    text = spec.to_text("p.amk")
    assert "q=log" in text and "s=neghalfsq" in text and "beta=2" in text
    back = EnergySpec.from_text(text, tmp_path)
    assert back.q == spec.q and back.s == spec.s and back.beta == spec.beta
    assert np.array_equal(back.patterns.data, P.data)
    with pytest.raises(ValidationError):
        EnergySpec.from_text("q=log\nbogus=1\npatterns=p.amk\n", tmp_path)


def test_spec_validation():
    with pytest.raises(ValidationError):
        EnergySpec(np.ones((2, 1)), beta=0.0)
    with pytest.raises(ValidationError):
        EnergySpec(np.ones((2, 1)), q="sqrt")
    with pytest.raises(ValidationError):
        EnergySpec(np.ones((2, 1)), s="cosine")
    with pytest.raises(ValidationError):
        Power(1)
    with pytest.raises(ValidationError):
        parse_separation("power:x")
    assert parse_separation("power:3:raw") == Power(3, scaled=False)
    with pytest.raises(ValidationError):
        parse_key_values("a=1\na=2\n")
