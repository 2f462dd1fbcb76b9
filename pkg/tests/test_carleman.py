import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucsys.builtins import builtin, identity_tensor
from ucsys.carleman import (FrozenPencilOperator, apriori_check, build_grid, carleman_ratio,
                            carleman_weight, conjugation_residual, conjugation_weight,
                            default_k_range, k_sweep, make_test_function, operator_for)

T = 0.25


@pytest.fixture(scope="module")
def grid():
    return build_grid(T, 0.25, (64, 64))


def test_weight_is_square_of_conjugation_weight(grid):
    k = 40.0
    assert np.allclose(conjugation_weight(grid, k) ** 2, carleman_weight(grid, k), rtol=1e-14)


def test_overflow_guard(grid):
    with pytest.raises(OverflowError):
        carleman_weight(grid, 1e5)
    lw = carleman_weight(grid, 1e5, log=True)
    assert np.isfinite(lw).all()


def test_default_k_range():
    assert default_k_range(T) == [64.0, 128.0, 256.0, 512.0, 1024.0]


@pytest.mark.parametrize("kind", ["bump", "modulated-bump", "random"])
def test_support_certificate(grid, kind):
    v = make_test_function(grid, kind, N=2, seed=4, xi_star=[3.0, 5.0])
    assert v.support_certificate <= 1e-12
    assert v.values.shape == (2,) + grid.shape


def test_grid_validation():
    with pytest.raises(ValueError):
        build_grid(T, 0.25, (8, 64))
    with pytest.raises(ValueError):
        build_grid(T, 0.25, (64, 64), R=0.3)


@pytest.mark.parametrize("name", ["isotropic", "example1"])
def test_conjugation_identity(name):
    # spectral t derivatives make the discrete identity exact up to roundoff
    g = build_grid(T, 0.25, (1024, 32), t_method="spectral")
    v = make_test_function(g, "random", N=2, seed=1)
    assert conjugation_residual(builtin(name), v, g, 64.0) <= 1e-6


def test_conjugation_identity_fd_is_consistent():
    g = build_grid(T, 0.25, (128, 32))
    v = make_test_function(g, "random", N=2, seed=1)
    assert conjugation_residual(builtin("example1"), v, g, 64.0) < 0.1


@settings(max_examples=15, deadline=None)
@given(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3), st.sampled_from([64.0, 256.0]))
def test_ratio_scale_invariance(c, k):
    g = build_grid(T, 0.25, (32, 32))
    v = make_test_function(g, "random", N=2, seed=0)
    op = operator_for(identity_tensor(), g)
    r1 = carleman_ratio(op, v, k, T, grid=g).ratio
    r2 = carleman_ratio(op, v.values * c, k, T, grid=g).ratio
    assert r2 == pytest.approx(r1, rel=1e-10)


def test_lhs_term_weights(grid):
    # lhs0 carries k^3 T^2 = (kT)^3 / T and lhs1 carries k = (kT) / T
    v = make_test_function(grid, "bump", N=2)
    op = operator_for(identity_tensor(), grid)
    a = carleman_ratio(op, v, 64.0, T, grid=grid)
    b = carleman_ratio(op, v, 128.0, T, grid=grid)
    w = np.exp(64.0 * (grid.t - T) ** 2)
    w2 = np.exp(128.0 * (grid.t - T) ** 2)
    n0 = lambda wt: float(np.sum(wt[:, None] * np.abs(v.values) ** 2) * grid.cell)
    assert a.lhs0 == pytest.approx(64.0**3 * T**2 * n0(w), rel=1e-10)
    assert b.lhs0 == pytest.approx(128.0**3 * T**2 * n0(w2), rel=1e-10)


def test_variable_mode_has_no_second_order_term(grid):
    v = make_test_function(grid, "bump", N=2)
    p = carleman_ratio(identity_tensor(), v, 64.0, T, mode="variable", grid=grid)
    assert p.lhs2 == 0.0 and p.lhs1 > 0


def test_sweep_cardinality_and_report(grid):
    battery = [make_test_function(grid, "random", N=2, seed=s) for s in range(5)]
    rep = k_sweep(identity_tensor(), battery, T, default_k_range(T), grid=grid)
    assert len(rep.points) == 25
    csv_text = rep.to_csv()
    assert csv_text.splitlines()[1] == "mode,k,T,seed,lhs0,lhs1,lhs2,rhs,ratio"
    assert len(csv_text.splitlines()) == 27
    assert rep.summary()["verdict"] in ("stable", "unstable")


def test_sweep_requires_five_k(grid):
    v = make_test_function(grid, "bump", N=2)
    with pytest.raises(ValueError):
        k_sweep(identity_tensor(), [v], T, [64.0, 128.0], grid=grid)


def test_frozen_pencil_operator_matches_tensor(grid):
    # the pencil route and the tensor route share the symbol of the identity tensor
    v = make_test_function(grid, "random", N=2, seed=2)
    a = operator_for(identity_tensor(), grid)(v.values)
    b = FrozenPencilOperator(identity_tensor(), grid)(v.values)
    assert np.linalg.norm(a - b) <= 1e-12 * np.linalg.norm(a)


@settings(max_examples=10, deadline=None)
@given(st.floats(1e-2, 1e2), st.sampled_from(["bad", "good"]))
def test_apriori_scale_invariance(c, which):
    g = build_grid(T, 0.25, (32, 32))
    v = make_test_function(g, "random", N=2, seed=0)
    op = FrozenPencilOperator(identity_tensor(), g)
    assert apriori_check(op, v.values * c, 128.0, T, which=which) == pytest.approx(
        apriori_check(op, v, 128.0, T, which=which), rel=1e-10)
