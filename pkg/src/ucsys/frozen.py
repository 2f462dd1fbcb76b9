"""Frozen-coefficient symbols evaluated on batches of transverse frequencies."""

from __future__ import annotations

import numpy as np

from .pencil import PencilFactorization, factorize
from .system import SystemSpec, matrices_at, pencil_at, pencil_batch


class FrozenSymbol:
    """Y, Z, B, H1, H2 of a spec frozen at x0, as functions of xi'.

    All quantities are positively homogeneous of degree 1 (Y, Z, B, H1) or 2
    (H2) in xi', so factorisations are computed once per unit direction and
    rescaled. At xi' = 0 everything vanishes.
    """

    def __init__(self, spec: SystemSpec, x0=None, decimals: int = 12):
        self.spec = spec
        self.x0 = spec.center if x0 is None else np.asarray(x0, float)
        self.N = spec.N
        self.dim = spec.n - 1
        self._cache: dict[tuple, PencilFactorization] = {}
        self._decimals = decimals

    def factor(self, direction) -> PencilFactorization:
        d = np.asarray(direction, float)
        d = d / np.linalg.norm(d)
        key = tuple(np.round(d, self._decimals))
        fac = self._cache.get(key)
        if fac is None:
            fac = factorize(pencil_at(self.spec, self.x0, d))
            self._cache[key] = fac
        return fac

    def _scaled(self, xis, attr: str):
        xis = np.atleast_2d(np.asarray(xis, float))
        out = np.zeros((len(xis), self.N, self.N), complex)
        rho = np.linalg.norm(xis, axis=1)
        for i in np.flatnonzero(rho > 0):
            out[i] = rho[i] * getattr(self.factor(xis[i]), attr)
        return out

    def yz(self, xis):
        """Real Y and Z at each row of ``xis``."""
        xis = np.atleast_2d(np.asarray(xis, float))
        if self.spec.kind == "YZ":
            Y, Z = matrices_at(self.spec, self.x0, xis)
            return Y.astype(float), Z.astype(float)
        return self._scaled(xis, "Y").real, self._scaled(xis, "Z").real

    def B(self, xis):
        xis = np.atleast_2d(np.asarray(xis, float))
        if self.spec.kind == "YZ":
            Y, Z = self.yz(xis)
            out = np.zeros((len(xis), self.N, self.N), complex)
            rho = np.linalg.norm(xis, axis=1)
            for i in np.flatnonzero(rho > 0):
                w, V = np.linalg.eigh(0.5 * (Z[i] + Z[i].T))
                Zs = (V * np.sqrt(w)) @ V.T
                Zis = (V / np.sqrt(w)) @ V.T
                out[i] = np.real(Zs @ (Y[i] + 1j * Z[i]) @ Zis) + 1j * Z[i]
            return out
        return self._scaled(xis, "B")

    def h(self, xis):
        """(H1, H2) of the monic pencil at each row of ``xis``."""
        xis = np.atleast_2d(np.asarray(xis, float))
        return pencil_batch(self.spec, self.x0, xis)
