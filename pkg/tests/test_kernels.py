import math

import numpy as np
import pytest

from amkit.core import make_rng
from amkit.dynamics import DescentConfig, descend
from amkit.energies import lse_energy_grad, lse_spec
from amkit.errors import ApproximationBreakdownError, DimensionError, ValidationError
from amkit.gradcheck import central_difference, check_gradient
from amkit.kernels import (GAUSSIAN_CURVATURE, KERNELS, DistributedEnergy, FeatureMap, KernelShape,
                           approx_lse_energy_grad, build_distributed, kernel_stats, kernel_table, mise,
                           optimal_bandwidth, rff_map)


def test_cos_sin_self_inner_product_is_one():
    fm = FeatureMap.create(5, 300, 0)
    x = make_rng(1).standard_normal((10, 5)) * 3
    phi = rff_map(x, fm)
    assert phi.shape == (10, 600)
    assert np.allclose(np.sum(phi * phi, axis=1), 1.0, atol=1e-13)


@pytest.mark.parametrize("variant", ["cos-sin", "cos-phase"])
def test_feature_map_shapes_and_validation(variant):
    fm = FeatureMap.create(3, 64, 2, variant)
    assert rff_map(np.zeros(3), fm).shape == (fm.width,)
    with pytest.raises(DimensionError):
        rff_map(np.zeros(4), fm)
    with pytest.raises(ValidationError):
        FeatureMap.create(3, 64, 2, "sin-only")


def test_kernel_approximation_accuracy():
    r = make_rng(3)
    A, B = r.standard_normal((100, 2)), r.standard_normal((100, 2))
    exact = np.exp(-0.5 * np.sum((A - B) ** 2, axis=1))
    fm = FeatureMap.create(2, 4096, 4)
    approx = np.sum(rff_map(A, fm) * rff_map(B, fm), axis=1)
    assert np.max(np.abs(approx - exact)) < 0.05


def test_kernel_error_shrinks_with_features():
    r = make_rng(5)
    A, B = r.standard_normal((100, 4)), r.standard_normal((100, 4))
    exact = np.exp(-0.5 * np.sum((A - B) ** 2, axis=1))

    def max_err(Y):
        fm = FeatureMap.create(4, Y, 6)
        return np.max(np.abs(np.sum(rff_map(A, fm) * rff_map(B, fm), axis=1) - exact))
    assert max_err(1024) <= 0.7 * max_err(256)


def test_sketch_contracts():
    r = make_rng(7)
    fm = FeatureMap.create(4, 128, 8)
    P = r.standard_normal((4, 10))
    one = build_distributed(P[:, :1], 2.0, fm)
    assert np.array_equal(one.sketch, rff_map(math.sqrt(2.0) * P[:, 0], fm))
    merged = build_distributed(P[:, :4], 2.0, fm).merge(build_distributed(P[:, 4:], 2.0, fm))
    assert merged.count == 10
    assert np.allclose(merged.sketch, build_distributed(P, 2.0, fm).sketch, rtol=0, atol=1e-12)
    for K in (1, 10, 1000):
        assert build_distributed(r.standard_normal((4, K)), 1.0, fm).sketch.shape == (256,)
    with pytest.raises(ValidationError):
        one.merge(build_distributed(P, 1.0, fm))
    with pytest.raises(ValidationError):
        build_distributed(P, 0.0, fm)


def _median_gap(Y, D=8, K=5, beta=1.0, seeds=3):
    gaps = []
    for s in range(seeds):
        r = make_rng(9, s)
        P = r.standard_normal((D, K))
        fm = FeatureMap.create(D, Y, 100 + s)
        dm = build_distributed(P, beta, fm)
        pts = P[:, r.integers(K, size=20)].T + 0.1 * r.standard_normal((20, D))
        gaps.append(np.mean([abs(approx_lse_energy_grad(v, dm, fm).energy - lse_energy_grad(P, v, beta).energy)
                             for v in pts]))
    return float(np.median(gaps))


def test_energy_gap_shrinks_along_feature_ladder():
    gaps = [_median_gap(Y) for Y in (256, 1024, 4096)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_descent_endpoints_approach_exact_along_ladder():
    D, K, beta = 6, 4, 4.0
    cfg = DescentConfig(step=0.5 / beta, steps=300)
    medians = []
    for Y in (256, 1024, 4096):
        d = []
        for s in range(3):
            r = make_rng(11, s)
            P = r.standard_normal((D, K))
            q = P[:, 0] + 0.05 * r.standard_normal(D)
            fm = FeatureMap.create(D, Y, 200 + s)
            end = descend(DistributedEnergy(build_distributed(P, beta, fm), fm), q, cfg).final
            d.append(np.linalg.norm(end - descend(lse_spec(P, beta), q, cfg).final))
        medians.append(float(np.median(d)))
    assert medians[0] > medians[1] > medians[2]


@pytest.mark.parametrize("variant", ["cos-sin", "cos-phase"])
def test_approx_gradient_fd(variant):
    r = make_rng(13)
    P = r.standard_normal((4, 3))
    fm = FeatureMap.create(4, 512, 14, variant)
    dm = build_distributed(P, 1.0, fm)
    for _ in range(10):
        x = P[:, 0] + 0.1 * r.standard_normal(4)
        err = check_gradient(lambda z: approx_lse_energy_grad(z, dm, fm).energy,
                             approx_lse_energy_grad(x, dm, fm).gradient, x)
        assert err < 1e-6


def test_breakdown_far_from_patterns():
    fm = FeatureMap.create(4, 512, 15)
    dm = build_distributed(make_rng(16).standard_normal((4, 3)), 4.0, fm)
    hits = 0
    for v in make_rng(17).standard_normal((50, 4)) * 20:
        try:
            approx_lse_energy_grad(v, dm, fm)
        except ApproximationBreakdownError:
            hits += 1
    assert hits > 0


def test_epanechnikov_moments_and_efficiencies():
    ep = kernel_stats("epanechnikov")
    assert abs(ep.scale - 0.2) < 1e-8 and abs(ep.regularity - 0.6) < 1e-8
    assert ep.efficiency == pytest.approx(1.0, abs=1e-12)
    assert abs(kernel_stats("gaussian").efficiency - 0.951) <= 0.003
    assert abs(kernel_stats("uniform").efficiency - 0.929) <= 0.003
    assert all(s.efficiency <= 1.0 + 1e-12 for s in kernel_table())


def test_kernels_normalised():
    for s in kernel_table():
        assert abs(s.mass - 1.0) < 1e-8, s.name


def test_gaussian_closed_forms():
    g = kernel_stats("gaussian")
    assert g.scale == pytest.approx(1.0, abs=1e-9)
    assert g.regularity == pytest.approx(1 / (2 * math.sqrt(math.pi)), abs=1e-9)


def test_optimal_bandwidth_is_stationary():
    for s in kernel_table(K=500):
        f = lambda h: mise(h[0], s.scale, s.regularity, GAUSSIAN_CURVATURE, 500)
        slope = central_difference(f, np.array([s.optimal_bandwidth]), h=1e-5)[0]
        assert abs(slope) < 1e-8, s.name
        assert s.mise_at_optimum < f([0.9 * s.optimal_bandwidth]) and s.mise_at_optimum < f([1.1 * s.optimal_bandwidth])


def test_bandwidth_shrinks_with_more_data():
    a = optimal_bandwidth(0.2, 0.6, GAUSSIAN_CURVATURE, 100)
    b = optimal_bandwidth(0.2, 0.6, GAUSSIAN_CURVATURE, 3200)
    assert b == pytest.approx(a / 2, rel=1e-12)


def test_unnormalised_kernel_rejected():
    with pytest.raises(ValidationError):
        kernel_stats(KernelShape("double", lambda z: 1.0 if abs(z) <= 1 else 0.0))
    with pytest.raises(ValidationError):
        kernel_stats("boxcar")
    assert set(KERNELS) >= {"epanechnikov", "gaussian", "uniform"}
