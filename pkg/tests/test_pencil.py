import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucsys.builtins import identity_tensor, isotropic_elasticity
from ucsys.pencil import (ContourError, build_B, choose_contours, cluster_values, factorize,
                          pencil_roots, riesz_S1, split_YZ)
from ucsys.system import QuadraticPencil, pencil_at


def random_upper_factor(rng, N, cond_max=1e3):
    """S = V diag(lam) V^{-1} with Im lam > 0 and cond(V) <= cond_max."""
    while True:
        V = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
        if np.linalg.cond(V) <= cond_max:
            break
    lam = rng.normal(size=N) * 2 + 1j * rng.uniform(0.2, 3.0, size=N)
    return V @ np.diag(lam) @ np.linalg.inv(V)


def pencil_from(S):
    Sh = S.conj().T
    return QuadraticPencil(H1=-(S + Sh), H2=Sh @ S)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_riesz_recovers_upper_factor(N, seed):
    S = random_upper_factor(np.random.default_rng(seed), N)
    p = pencil_from(S)
    S1 = riesz_S1(p, choose_contours(pencil_roots(p), "upper", N=N))
    assert np.linalg.norm(S1 - S) <= 1e-8 * np.linalg.norm(S)


def test_roots_split_evenly():
    S = random_upper_factor(np.random.default_rng(3), 4)
    r = pencil_roots(pencil_from(S))
    assert (r.imag > 0).sum() == 4 and (r.imag < 0).sum() == 4


def test_real_root_has_no_contour():
    p = QuadraticPencil(H1=np.zeros((1, 1)), H2=-np.ones((1, 1)))
    with pytest.raises(ContourError):
        choose_contours(pencil_roots(p), "upper", N=1)


def test_cluster_values_groups_close_roots():
    groups = cluster_values(np.array([1.0, 1.0 + 1e-9, 2.0]))
    assert sorted(len(g) for g in groups) == [1, 2]


def test_isotropic_factor_is_i_abs_xi():
    for xi in (0.5, -2.0):
        fac = factorize(pencil_at(identity_tensor(), [0.0, 0.0], [xi]))
        assert np.allclose(fac.S1, 1j * abs(xi) * np.eye(2), atol=1e-12)
        assert np.allclose(fac.B, fac.S1, atol=1e-12)


def test_factorisation_residuals_elasticity():
    fac = factorize(pencil_at(isotropic_elasticity(n=3), np.zeros(3), [0.6, 0.8]))
    r = fac.residuals
    assert r["H1_residual"] < 1e-10 and r["H2_residual"] < 1e-10
    assert r["calH_residual"] < 1e-10
    assert r["halfplane_margin"] > 0
    # the double root is defective, so eigenvalues are only sqrt(eps) accurate
    assert r["similarity_gap"] < 1e-6


def test_split_is_elementwise():
    S = np.array([[1 + 2j, 3 - 1j], [0.5j, 2 + 1j]])
    yz = split_YZ(S)
    assert np.array_equal(yz.Y, S.real) and np.array_equal(yz.Z, S.imag)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_B_similar_to_factor(seed):
    # for symmetric Y and Z > 0, B = Z^{1/2} S1 Z^{-1/2} exactly
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(3, 3))
    Y = A + A.T
    C = rng.normal(size=(3, 3))
    Z = C @ C.T + 0.5 * np.eye(3)
    bd = build_B(Y, Z)
    S1 = Y + 1j * Z
    assert np.allclose(bd.Z_sqrt @ S1 @ bd.Z_inv_sqrt, bd.B, atol=1e-10)
    assert np.allclose(np.sort_complex(np.linalg.eigvals(bd.B)),
                       np.sort_complex(np.linalg.eigvals(S1)), atol=1e-8)


def test_factor_homogeneity():
    s = isotropic_elasticity(n=2)
    f1 = factorize(pencil_at(s, [0.0, 0.0], [1.0]))
    f3 = factorize(pencil_at(s, [0.0, 0.0], [3.0]))
    assert np.allclose(f3.S1, 3 * f1.S1, atol=1e-10)
