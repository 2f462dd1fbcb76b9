import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from ucsys.builtins import builtin, identity_tensor
from ucsys.frozen import FrozenSymbol
from ucsys.parametrix import (AGREE_TOL, GammaData, _eta_scalar, cutoff_eta, cutoff_tail_integral,
                              cutoff_transform, error_probe, gamma_bound, gk_adaptive,
                              kernel_bound_check, kernel_csv, kernel_Sk, kernel_sweep, phase,
                              scalar_n, sweep_xi)


def test_cutoff_shape():
    s = np.array([0.0, 0.25, -0.25, 0.5, -0.7, 0.375])
    e = cutoff_eta(s)
    assert np.allclose(e[:5], [1, 1, 1, 0, 0])
    assert e[5] == pytest.approx(0.5)
    for v in np.linspace(-1, 1, 41):
        assert _eta_scalar(v) == pytest.approx(float(cutoff_eta(v)), abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 2))
def test_cutoff_even_and_bounded(s):
    assert 0.0 <= cutoff_eta(s) <= 1.0
    assert cutoff_eta(s) == cutoff_eta(-s)


def test_cutoff_tail_integral():
    assert cutoff_tail_integral() == pytest.approx(math.log(2) / math.pi, abs=1e-12)


def test_gamma_isotropic():
    gd = gamma_bound(identity_tensor(), 10.0, 0.1)
    assert gd.lam_bar == pytest.approx(1.0)
    assert gd.m == pytest.approx(0.0, abs=1e-12)
    assert gd.gamma == pytest.approx(1e-3)
    assert gd.L == pytest.approx(2 * gd.gamma * 10.0 * 0.1)


def test_gamma_example1_positive():
    gd = gamma_bound(builtin("example1"), 10.0, 0.1)
    assert gd.gamma > 0 and gd.lam_bar >= 1


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 0.05), st.floats(0, 0.05), st.floats(-50, 50), st.floats(1, 1e4))
def test_phase_identity(x1, y1, xi1, k):
    B = np.array([[1.0 + 2j, 0.3], [0.3, -0.5 + 1j]])
    assert phase(x1, y1, xi1, B, k, 0.1).identity_residual < 1e-12


def test_phase_requires_interior():
    with pytest.raises(ValueError):
        phase(0.0, 0.1, 1.0, np.eye(1), 1.0, 0.1)


def test_gk_adaptive_polynomial_and_peak():
    val, err, _ = gk_adaptive(lambda x: (x**5)[:, None], 0.0, 1.0)
    assert val[0] == pytest.approx(1 / 6, abs=1e-14)
    f = lambda x: (1.0 / (x**2 + 1e-4))[:, None]
    val, _, _ = gk_adaptive(f, -1.0, 1.0, breaks=[0.0])
    assert val[0] == pytest.approx(2 * math.atan(100) * 100, rel=1e-10)


@pytest.mark.parametrize("c", [3.0 + 0.5j, -20.0 + 30j, 100.0 - 2j, 1.0 - 0.3j])
def test_scalar_n_against_dense_quadrature(c):
    # plain adaptive quadrature on the raw integrand as the oracle
    sigma, L = 0.3, 40.0
    f = lambda x: _eta_scalar(x / L) * np.exp(1j * sigma * x) / (x - c)
    re = integrate.quad(lambda x: f(x).real, -L / 2, L / 2, points=[c.real], limit=2000,
                        epsabs=1e-12, epsrel=1e-12)[0]
    im = integrate.quad(lambda x: f(x).imag, -L / 2, L / 2, points=[c.real], limit=2000,
                        epsabs=1e-12, epsrel=1e-12)[0]
    ref = (re + 1j * im) / (2 * math.pi)
    assert abs(scalar_n(sigma, c, L) - ref) <= 1e-9 * max(1.0, abs(ref))


def test_scalar_n_rejects_real_pole():
    with pytest.raises(ValueError):
        scalar_n(0.1, 1.0 + 0j, 10.0)


def test_cutoff_transform_even_and_total_mass():
    L = 30.0
    s = np.linspace(-1, 1, 11)
    E = cutoff_transform(s, L)
    assert np.allclose(E, E[::-1], atol=1e-12)
    # int E(s) ds = eta(0) = 1
    grid = np.linspace(-20, 20, 40001)
    assert np.trapezoid(cutoff_transform(grid, L).real, grid) == pytest.approx(1.0, abs=1e-6)


def _gd():
    return GammaData(lam_bar=1.0, m=0.5, gamma=1.0, k=100.0, T=0.1, z_min=1.0, z_max=1.0)


def test_kernel_routes_agree_isotropic():
    sym = FrozenSymbol(identity_tensor())
    for xi in (2.0, -7.0, 15.0):
        s = kernel_Sk(0.03, 0.01, [xi], 100.0, 0.1, _gd(), sym)
        assert s.agreement <= AGREE_TOL
        assert np.all(np.isfinite(s.value))


def test_kernel_example1_routes_agree():
    sym = FrozenSymbol(builtin("example1"))
    gd = gamma_bound(sym, 100.0, 0.1)
    s = kernel_Sk(0.04, 0.01, [5.0], 100.0, 0.1, gd, sym)
    assert s.agreement <= AGREE_TOL


def test_kernel_rejects_outside_strip():
    with pytest.raises(ValueError):
        kernel_Sk(0.08, 0.0, [1.0], 10.0, 0.1, _gd(), FrozenSymbol(identity_tensor()))


@settings(max_examples=10, deadline=None)
@given(st.floats(0.5, 20.0), st.floats(0, 0.05), st.floats(0, 0.05))
def test_kernel_even_in_xi_for_isotropic(r, x1, y1):
    sym = FrozenSymbol(identity_tensor())
    a = kernel_Sk(x1, y1, [r], 100.0, 0.1, _gd(), sym)
    b = kernel_Sk(x1, y1, [-r], 100.0, 0.1, _gd(), sym)
    assert np.allclose(a.value, b.value, atol=1e-12 * max(1.0, a.norm))


def test_sweep_xi_band():
    xs = sweep_xi(1, 8, 100.0, 0.1, 2.0)
    r = np.abs(xs[:, 0])
    assert np.all(r >= 10.0 / 4) and np.all(r <= 10.0 * 4)
    assert (xs[:, 0] > 0).sum() == 4


def test_small_kernel_sweep_report():
    samples = kernel_sweep(identity_tensor(), [1e2, 1e3], 0.1, n_xy=4, n_xi=4)
    rep = kernel_bound_check(samples)
    assert rep.samples == 2 * 4 * 16
    assert rep.max_agreement <= AGREE_TOL
    assert set(rep.C_hat) == {1, 2}
    text = kernel_csv(samples)
    assert text.count("\n") == rep.samples + 1
    assert text == kernel_csv(kernel_sweep(identity_tensor(), [1e2, 1e3], 0.1, n_xy=4, n_xi=4))


def test_error_probe_warns_below_regime():
    with pytest.warns(RuntimeWarning):
        error_probe(identity_tensor(), [1.0, 2.0], 0.4, seeds=(0,), n1=32, n2=16)
