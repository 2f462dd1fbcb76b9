import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucsys.builtins import builtin, identity_tensor
from ucsys.partition import (annulus_bound_check, base_cutoff, c3_stability, eta_family,
                             frozen_error_probe, induced_k, smooth_step)


def test_base_cutoff_values():
    t = np.array([0.0, 2.0, 1.25, -1.25, 1.0, 1.5])
    assert np.allclose(base_cutoff(t), [1, 0, 0.5, 0.5, 1, 0])


@pytest.mark.parametrize("order", [1, 2])
def test_smooth_step_derivatives_match_differences(order):
    s = np.linspace(0.05, 0.95, 50)
    h = 1e-5
    fd = (smooth_step(s + h, order - 1) - smooth_step(s - h, order - 1)) / (2 * h)
    assert np.allclose(smooth_step(s, order), fd, rtol=1e-5, atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3))
def test_smooth_step_symmetry(s):
    assert smooth_step(s) + smooth_step(1 - s) == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=12, deadline=None)
@given(st.floats(1.0, 16.0), st.integers(0, 3))
def test_partition_sums_to_one(mu, shift):
    # the resolution check needs at least 8 grid points per 1/mu
    points = int(np.ceil(16 * mu)) + 1 + shift
    fam = eta_family(mu, n=2, points=points)
    assert fam.sum_error <= 1e-12
    assert fam.theta_bar_min >= 1.0
    assert fam.support_leak == 0.0


def test_resolution_guard():
    with pytest.raises(ValueError):
        eta_family(16.0, points=64)
    with pytest.raises(ValueError):
        eta_family(0.5)


def test_member_and_reconstruction():
    fam = eta_family(4.0, points=128)
    m = fam.member((0, 1))
    assert m.shape == (128, 128) and m.min() >= 0 and m.max() <= 1
    v = np.random.default_rng(0).normal(size=(128, 128))
    assert np.allclose(fam.reconstruct(v), v, atol=1e-12)


def test_constants_are_scale_free():
    rep = c3_stability()
    assert rep["ratio"] <= 1.5
    assert rep["sum_error"] <= 1e-12


def test_neighbour_count_is_mu_independent():
    counts = {eta_family(mu, points=256).neighbor_count for mu in (2, 4, 8, 16)}
    assert len(counts) == 1


def test_annulus_bound():
    fam = eta_family(4.0, points=256)
    assert annulus_bound_check(fam) <= 1.0 + 1e-12


def test_induced_k():
    assert induced_k(4.0, 2.0) == 64.0


def test_frozen_probe_constant_coefficients_vanish():
    P = 64
    x = np.linspace(-0.5, 0.5, P)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    v = np.stack([np.exp(-40 * (X1**2 + X2**2))] * 2)
    rep = frozen_error_probe(identity_tensor(), v, 4.0, points=P)
    assert rep.max_ratio <= 1e-12 and rep.active > 0


def test_frozen_probe_decreases_with_mu():
    P = 128
    x = np.linspace(-0.5, 0.5, P)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    v = np.stack([np.exp(-30 * (X1**2 + X2**2)), np.exp(-30 * ((X1 - 0.1) ** 2 + X2**2))])
    r = [frozen_error_probe(builtin("perturbed"), v, mu, points=P).max_ratio for mu in (4, 8, 16)]
    assert r[0] > r[1] > r[2]
