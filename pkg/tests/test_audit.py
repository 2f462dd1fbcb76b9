import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucsys.audit import (audit_further_assumptions, commutativity_path, commutativity_verdict,
                         eigen_structure, eigenvector_transport, kernel_dimension_sum,
                         kernel_dimension_sum_pencil, riesz_projection)
from ucsys.builtins import builtin, identity_tensor
from ucsys.pencil import ContourError, ContourSpec, factorize
from ucsys.system import QuadraticPencil, matrix_spec, pencil_at


def test_projection_of_scalar_matrix():
    P = riesz_projection(1j * np.eye(2), ContourSpec(1j, 0.5))
    assert np.allclose(P, np.eye(2), atol=1e-12)


def test_contour_through_eigenvalue_is_rejected():
    with pytest.raises(ContourError):
        riesz_projection(np.diag([1.0, 2.0]).astype(complex), ContourSpec(0.0, 1.0, node_count=64))


def test_example4_rank_one_projector():
    B = factorize(pencil_at(builtin("example4"), [0.0, 1.0, 1.0], [1.0, 0.0])).B
    P = riesz_projection(B, ContourSpec(1j, 0.5))
    e = np.array([0.0, 1.0, 0.0])
    assert np.allclose(P, np.outer(e, e), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**31 - 1))
def test_projections_match_eigendecomposition(N, seed):
    rng = np.random.default_rng(seed)
    V = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
    lam = np.arange(N) + 1j * rng.uniform(0.5, 1.5, N)
    B = V @ np.diag(lam) @ np.linalg.inv(V)
    rep = eigen_structure(B)
    W = np.linalg.inv(V)
    for l, P in zip(rep.eigenvalues, rep.projections):
        h = int(np.argmin(np.abs(lam - l)))
        ref = np.outer(V[:, h], W[h])
        assert np.linalg.norm(P - ref) <= 1e-8 * max(1.0, np.linalg.norm(ref))
    assert rep.algebra_ok()
    assert rep.diagonalizable


def test_jordan_block_is_not_diagonalizable():
    rep = eigen_structure(np.array([[1j, 1.0], [0.0, 1j]]))
    assert rep.multiplicities == [2]
    assert rep.reconstruction_residual == pytest.approx(1.0, abs=1e-8)
    assert not rep.diagonalizable


def test_example1_two_simple_clusters():
    B = factorize(pencil_at(builtin("example1"), [0.0, 0.0], [1.0])).B
    rep = eigen_structure(B)
    assert rep.multiplicities == [1, 1]
    assert np.isfinite(rep.max_projection_norm) and rep.diagonalizable


def test_audit_isotropic():
    rep = audit_further_assumptions(identity_tensor(), [0.0, 0.0])
    assert rep.sup_projection_norm == pytest.approx(1.0, abs=1e-10)
    assert rep.all_diagonalizable and rep.algebra_ok


def test_audit_example4_generic_point():
    rep = audit_further_assumptions(builtin("example4"), [0.0, 1.0, 1.0], sphere_samples=64)
    assert rep.all_diagonalizable
    assert np.isfinite(rep.sup_projection_norm)


def test_audit_example4_coalesced_point_reports_mask():
    rep = audit_further_assumptions(builtin("example4"), [0.0, 0.0, 0.0], sphere_samples=16)
    d = rep.to_dict()
    assert d["n_degenerate"] == d["n_samples"] == 16
    assert rep.all_diagonalizable


def test_audit_flags_jordan_yz_spec():
    # Y nilpotent and Z = I give B = [[i, 1], [0, i]] up to scaling in xi2
    s = matrix_spec("YZ", [["0", "xi2"], ["0", "0"]], [["abs(xi2)", "0"], ["0", "abs(xi2)"]], n=2)
    rep = audit_further_assumptions(s, [0.0, 0.0], sphere_samples=8)
    assert not rep.all_diagonalizable


def test_audit_is_deterministic():
    a = audit_further_assumptions(builtin("example1"), [0.0, 0.0], seed=3).to_dict()
    b = audit_further_assumptions(builtin("example1"), [0.0, 0.0], seed=3).to_dict()
    assert a == b


def test_kernel_dimension_sums():
    assert kernel_dimension_sum(identity_tensor(), [0.0, 0.0], [0.0, 1.0])[0] == 4
    assert kernel_dimension_sum(builtin("example1"), [0.0, 0.0], [0.0, 1.0])[0] == 4
    # (lam - J)(lam - J) with a Jordan J: a single root of multiplicity 4 and a 1-d kernel
    J = np.array([[1j, 1.0], [0.0, 1j]])
    p = QuadraticPencil(H1=-2 * J, H2=J @ J)
    total, _, _ = kernel_dimension_sum_pencil(p)
    assert total < 4


def test_commutativity():
    assert not commutativity_verdict(builtin("example1"), [0.0, 0.0])["commutative"]
    assert commutativity_verdict(identity_tensor(), [0.0, 0.0])["commutative"]
    fac, _ = commutativity_path(pencil_at(builtin("example4"), [0.0, 1.0, 1.0], [1.0, 0.0]))
    assert fac is not None
    assert np.allclose(np.sort_complex(np.linalg.eigvals(fac.B)),
                       np.sort_complex([-1 + 1j, 1j, 1 + 1j]), atol=1e-10)


def test_eigenvector_transport_is_continuous_on_example4():
    out = eigenvector_transport(builtin("example4"), lambda s: np.array([0.0, 1.0, 0.5 + s]),
                                [1.0, 0.0], 1j, steps=16)
    assert out["max_step_jump"] < 0.5
