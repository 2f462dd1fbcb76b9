"""Coefficient transport under the map t = x1 + kappa |x'|^2."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import Expr
from .system import SpecError, SystemSpec


@dataclass(frozen=True)
class HolmgrenParams:
    kappa: float = 1.0
    # shrink the transverse box so that 2 kappa max|x'| <= shrink_bound
    shrink: bool = False
    shrink_bound: float = 0.2

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")


def jacobian_rows(n: int, kappa: float) -> list[list[Expr]]:
    """D[p][j] = d xt_p / d x_j as trees in x (x'_j = xt'_j)."""
    D = [[Expr.const(float(p == j)) for j in range(n)] for p in range(n)]
    for j in range(1, n):
        D[0][j] = Expr.const(2 * kappa) * Expr.x(j + 1)
    return D


def jacobian_numeric(x, kappa: float) -> np.ndarray:
    x = np.asarray(x, float)
    D = np.eye(len(x))
    D[0, 1:] = 2 * kappa * x[1:]
    return D


def forward_map(x, kappa: float) -> np.ndarray:
    x = np.array(x, float)
    x[0] = x[0] + kappa * np.sum(x[1:] ** 2)
    return x


def inverse_map(xt, kappa: float) -> np.ndarray:
    return forward_map(xt, -kappa)


def holmgren_pushforward(spec: SystemSpec, params: HolmgrenParams | float = 1.0) -> SystemSpec:
    """Transformed tensor C~^{pq} = sum_jl D_pj C^{jl}(x(xt)) D_ql with J = 1."""
    if spec.kind != "tensor":
        raise SpecError("Holmgren transform requires tensor kind")
    # a bare float may be negative, which realises the inverse map
    if isinstance(params, HolmgrenParams):
        kap, shrink, bound = params.kappa, params.shrink, params.shrink_bound
    else:
        kap, shrink, bound = float(params), False, 0.2
    n, N = spec.n, spec.N
    back = Expr.x(1)
    for j in range(2, n + 1):
        back = back - Expr.const(kap) * Expr.x(j) ** 2
    sub = {("x", 1): back}
    C = [[[[spec.C[a][b][j][l].substitute(sub) for l in range(n)] for j in range(n)]
          for b in range(N)] for a in range(N)]
    D = jacobian_rows(n, kap)
    zero = Expr.const(0.0)
    out = [[[[zero] * n for _ in range(n)] for _ in range(N)] for _ in range(N)]
    for a in range(N):
        for b in range(N):
            for p in range(n):
                for q in range(n):
                    acc = zero
                    for j in range(n):
                        if D[p][j].is_const(0.0):
                            continue
                        for l in range(n):
                            if D[q][l].is_const(0.0) or C[a][b][j][l].is_const(0.0):
                                continue
                            acc = acc + D[p][j] * C[a][b][j][l] * D[q][l]
                    out[a][b][p][q] = acc
    lo, hi = spec.lo.copy(), spec.hi.copy()
    if shrink and kap > 0:
        half = bound / (2 * kap * np.sqrt(n - 1))
        lo[1:] = np.maximum(lo[1:], -half)
        hi[1:] = np.minimum(hi[1:], half)
    rmax = np.sum(np.maximum(lo[1:] ** 2, hi[1:] ** 2))
    if kap >= 0:
        hi[0] = hi[0] + kap * rmax
    else:
        lo[0] = lo[0] + kap * rmax
    return SystemSpec(n=n, N=N, kind="tensor", C=out, lo=lo, hi=hi,
                      name=(spec.name + "+holmgren") if spec.name else "holmgren")


def symbol_transport_residual(spec: SystemSpec, transformed: SystemSpec, kappa: float,
                              samples: int = 20, seed: int = 0) -> float:
    """max relative gap between M~(xt, z) and M(x, D^T z) on random samples."""
    from .system import assemble_symbol

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        xt = transformed.lo + rng.random(spec.n) * (transformed.hi - transformed.lo)
        x = inverse_map(xt, kappa)
        z = rng.normal(size=spec.n)
        lhs = assemble_symbol(transformed, xt, z)
        rhs = assemble_symbol(spec, x, jacobian_numeric(x, kappa).T @ z)
        worst = max(worst, float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1e-300)))
    return worst
