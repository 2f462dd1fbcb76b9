import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucsys.builtins import builtin, identity_tensor, isotropic_elasticity
from ucsys.system import (AssumptionError, SpecError, assemble_symbol, check_basic_assumptions,
                          dump_system, load_system, pencil_at, pencil_batch, spec_to_dict,
                          tensor_spec)


def _tensor_doc(expr="1"):
    return {"n": 2, "N": 1, "kind": "tensor",
            "tensor": {"C": [{"alpha": 1, "beta": 1, "j": 1, "l": 1, "expr": expr},
                             {"alpha": 1, "beta": 1, "j": 2, "l": 2, "expr": "1"}]}}


def test_load_from_dict_text_and_file(tmp_path):
    doc = _tensor_doc("1 + x2^2")
    p = tmp_path / "sys.json"
    p.write_text(json.dumps(doc))
    for src in (doc, json.dumps(doc), str(p)):
        s = load_system(src)
        assert s.kind == "tensor" and s.n == 2 and s.N == 1


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d.pop("kind"), "$: missing key 'kind'"),
    (lambda d: d["tensor"]["C"][0].update(alpha=3), "$.tensor.C[0].alpha"),
    (lambda d: d["tensor"]["C"][1].update(expr="1 +"), "$.tensor.C[1].expr"),
    (lambda d: d["tensor"]["C"][0].update(expr="xi2"), "$.tensor.C[0].expr"),
    (lambda d: d["tensor"]["C"].append(dict(d["tensor"]["C"][0])), "$.tensor.C[2]"),
])
def test_error_paths(mutate, path):
    doc = _tensor_doc()
    mutate(doc)
    with pytest.raises(SpecError) as info:
        load_system(doc)
    assert path in str(info.value)


def test_missing_file_and_bad_json(tmp_path):
    with pytest.raises(SpecError):
        load_system(str(tmp_path / "nope.json"))
    with pytest.raises(SpecError):
        load_system("{not json")


@pytest.mark.parametrize("name", ["example1", "example3", "example5", "isoelastic", "perturbed"])
def test_round_trip(name):
    s = builtin(name)
    back = load_system(dump_system(s))
    assert spec_to_dict(back) == spec_to_dict(s)


def test_basic_assumptions_isotropic():
    rep = check_basic_assumptions(identity_tensor())
    assert rep.symmetry_ok
    assert rep.ellipticity_delta == pytest.approx(1.0, abs=1e-10)


def test_basic_assumptions_elasticity_minimum_is_mu():
    # Legendre-Hadamard constant of isotropic elasticity is mu
    rep = check_basic_assumptions(isotropic_elasticity(lam=2.0, mu=0.5))
    assert rep.ellipticity_delta == pytest.approx(0.5, abs=1e-9)


def test_basic_assumptions_detect_asymmetry():
    C = np.zeros((1, 1, 2, 2))
    C[0, 0] = [[1.0, 0.3], [0.0, 1.0]]
    rep = check_basic_assumptions(tensor_spec(C, 2, 1))
    assert not rep.symmetry_ok


def test_basic_assumptions_reject_matrix_kinds():
    with pytest.raises(SpecError):
        check_basic_assumptions(builtin("example1"))


def test_parallel_frame_rejected():
    with pytest.raises(AssumptionError):
        pencil_at(identity_tensor(), [0.0, 0.0], [0.0])


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(-1, 1))
def test_pencil_is_conjugated_symbol(lam, xi2):
    # det H(lam) vanishes exactly where det M(x, lam e1 + xi) does, since
    # H = T^{-1/2} M T^{-1/2} with T the e1 block
    s = builtin("perturbed")
    x = np.array([0.1, -0.2])
    if abs(xi2) < 1e-3:
        xi2 = 0.5
    p = pencil_at(s, x, [xi2])
    M = assemble_symbol(s, x, np.array([lam, xi2]))
    T = assemble_symbol(s, x, np.array([1.0, 0.0]))
    w, V = np.linalg.eigh(T)
    Ti = (V / np.sqrt(w)) @ V.T
    assert np.allclose(p(lam), Ti @ M @ Ti, atol=1e-12)


def test_batch_matches_pointwise():
    s = builtin("perturbed")
    xis = np.array([[0.5], [-1.0], [2.0]])
    H1, H2 = pencil_batch(s, [0.0, 0.1], xis)
    for i, xi in enumerate(xis):
        p = pencil_at(s, [0.0, 0.1], xi)
        assert np.allclose(H1[i], p.H1) and np.allclose(H2[i], p.H2)


def test_yz_kind_pencil_coefficients():
    s = builtin("example1")
    p = pencil_at(s, [0.0, 0.0], [1.0])
    assert np.allclose(p.H1, np.diag([-4.0, -10.0]))
    assert np.allclose(p.H2, [[10.0, 6.0], [6.0, 28.0]])
