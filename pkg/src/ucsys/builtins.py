"""Built-in golden systems.

Examples 1-4 are stored as (Y, Z) data, Example 5 as a pencil. The
``isotropic``, ``isoelastic`` and ``perturbed`` systems are tensor kind.
"""

from __future__ import annotations

import numpy as np

from .expr import Expr, absolute, sqrt
from .system import SystemSpec, matrix_spec, tensor_spec

x2, x3 = Expr.x(2), Expr.x(3)
xi2, xi3 = Expr.xi(2), Expr.xi(3)


def _scale(M, s):
    return [[s * v for v in row] for row in M]


def _add(P, Q):
    return [[a + b for a, b in zip(r, s)] for r, s in zip(P, Q)]


def _matmul(P, Q):
    n = len(P)
    return [[sum((P[i][k] * Q[k][j] for k in range(n)), Expr.const(0.0)) for j in range(n)]
            for i in range(n)]


def _transpose(P):
    return [list(r) for r in zip(*P)]


def example1() -> SystemSpec:
    a = absolute(xi2)
    Y = _scale([[2, -1], [1, 5]], xi2)
    Z = _scale([[2, 1], [1, 1]], a)
    return matrix_spec("YZ", Y, Z, n=2, name="example1")


def example2(q: float = 1.0, eps1: float = 0.1, eps2: float = 0.05) -> SystemSpec:
    a = absolute(xi2)
    Y = _scale([[2, -1], [1, 5]], xi2)
    Z = _scale([[2 + q * eps1, 1], [1, 1 + q * eps2]], a)
    return matrix_spec("YZ", Y, Z, n=2, name="example2")


def example3() -> SystemSpec:
    r = sqrt(3 * xi2**2 + 2 * xi2 * xi3 + xi3**2)
    Y = _add(_scale([[1, 0, 0], [0, 3, 1], [0, -1, 0]], xi2),
             _scale([[1, 0, 0], [0, -1, 1], [0, -1, -4]], xi3))
    Z = _scale([[1, 0, 0], [0, 2, 1], [0, 1, 1]], r)
    return matrix_spec("YZ", Y, Z, n=3, name="example3")


def example4() -> SystemSpec:
    p, q = x2 * xi2, x3 * xi3
    zero = Expr.const(0.0)
    BR = [[zero, zero, p], [zero, zero, q], [p, q, zero]]
    r = sqrt(xi2**2 + xi3**2)
    BI = [[r if i == j else zero for j in range(3)] for i in range(3)]
    return matrix_spec("YZ", BR, BI, n=3, lo=[-1.5] * 3, hi=[1.5] * 3, name="example4")


def example5_parts():
    """(Y, A, r) trees with Y = A^{-1/2} E A^{1/2}; the (1,1) entry of E is 0."""
    s = (x2 * x3) ** 2
    a = [Expr.const(1.0), 1 + s, 1 - s]
    zero = Expr.const(0.0)
    E = [[zero, zero, zero],
         [zero, x2 * xi2, x3 * xi3],
         [zero, x3 * xi3, -(x2 * xi2)]]
    Y = [[E[i][j] * sqrt(a[j] / a[i]) if not E[i][j].is_const(0.0) else zero
          for j in range(3)] for i in range(3)]
    A = [[a[i] if i == j else zero for j in range(3)] for i in range(3)]
    r = sqrt(xi2**2 + xi3**2)
    return Y, A, r


def example5() -> SystemSpec:
    Y, A, r = example5_parts()
    Yt = _transpose(Y)
    H1 = [[-(Y[i][j] + Yt[i][j]) for j in range(3)] for i in range(3)]
    A2 = _matmul(A, A)
    H2 = _add(_matmul(Yt, Y), _scale(A2, r**2))
    return matrix_spec("pencil", H1, H2, n=3, lo=[-0.3] * 3, hi=[0.3] * 3, name="example5")


def identity_tensor(n: int = 2, N: int = 2) -> SystemSpec:
    C = np.zeros((N, N, n, n))
    for a in range(N):
        for j in range(n):
            C[a, a, j, j] = 1.0
    return tensor_spec(C, n, N, name="isotropic")


def isotropic_elasticity(lam: float = 1.0, mu: float = 1.0, n: int = 2) -> SystemSpec:
    d = np.eye(n)
    C = (lam * np.einsum("aj,bl->abjl", d, d)
         + mu * (np.einsum("ab,jl->abjl", d, d) + np.einsum("al,bj->abjl", d, d)))
    return tensor_spec(C, n, n, name="isoelastic")


def perturbed_identity(eps: float = 0.2) -> SystemSpec:
    """Identity plus a symmetric perturbation linear in x (n = N = 2)."""
    x1, xx2 = Expr.x(1), Expr.x(2)
    C = [[[[Expr.const(0.0) for _ in range(2)] for _ in range(2)] for _ in range(2)] for _ in range(2)]
    for a in range(2):
        for b in range(2):
            for j in range(2):
                for l in range(2):
                    e = Expr.const(float(a == b and j == l))
                    if a == b and j != l:
                        e = e + eps * xx2
                    if j == l and a != b:
                        e = e + eps * x1
                    C[a][b][j][l] = e
    return tensor_spec(C, 2, 2, name="perturbed")


BUILTINS = {
    "example1": example1,
    "example2": example2,
    "example3": example3,
    "example4": example4,
    "example5": example5,
    "isotropic": identity_tensor,
    "isoelastic": isotropic_elasticity,
    "perturbed": perturbed_identity,
}


def builtin(name: str) -> SystemSpec:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise KeyError(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}") from None
