"""Desk-scale verification of weighted Carleman inequalities on a slab.

Fields live on (0, T) x [-R, R)^{n-1} with the transverse directions treated
as periodic; test functions are supported in (0, T/2) x {|x'| < r} with
R >= 2r, so the periodic representation is exact up to round-off.
Arrays are laid out as (N, n_t, n_x, ..., n_x).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .frozen import FrozenSymbol
from .system import SystemSpec, coefficient_tensor

LOG_GUARD = 600.0
INSTABILITY = 4.0


@dataclass(frozen=True)
class Grid:
    T: float
    r: float
    n_t: int
    n_x: int
    n: int = 2
    R: float | None = None
    t_method: str = "fd4"

    def __post_init__(self):
        if self.T <= 0 or self.r <= 0:
            raise ValueError("T and r must be positive")
        if self.n_t < 16 or self.n_x < 16:
            raise ValueError("grid needs at least 16 points per axis")
        if self.n < 2:
            raise ValueError("need n >= 2")
        if self.R is None:
            object.__setattr__(self, "R", 2 * self.r)
        if self.R < 2 * self.r:
            raise ValueError("transverse half width R must be at least 2r")
        if self.t_method not in ("fd4", "spectral"):
            raise ValueError("t_method must be 'fd4' or 'spectral'")

    @property
    def dt(self) -> float:
        return self.T / self.n_t

    @property
    def dx(self) -> float:
        return 2 * self.R / self.n_x

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.n_t)

    @property
    def x(self) -> np.ndarray:
        return -self.R + self.dx * np.arange(self.n_x)

    @property
    def freqs(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.n_x, d=self.dx)

    @property
    def shape(self) -> tuple:
        return (self.n_t,) + (self.n_x,) * (self.n - 1)

    @property
    def cell(self) -> float:
        return self.dt * self.dx ** (self.n - 1)

    def mesh(self) -> list[np.ndarray]:
        """Coordinate arrays (t, x2, ..., xn), each of shape ``self.shape``."""
        return np.meshgrid(self.t, *([self.x] * (self.n - 1)), indexing="ij")

    def freq_mesh(self) -> np.ndarray:
        """Transverse frequencies as rows, shape (n_x^{n-1}, n-1), C order."""
        ks = np.meshgrid(*([self.freqs] * (self.n - 1)), indexing="ij")
        return np.stack([k.ravel() for k in ks], axis=1)


def build_grid(T: float, r: float, shape=(64, 64), n: int = 2, R: float | None = None,
               t_method: str = "fd4") -> Grid:
    return Grid(T=T, r=r, n_t=int(shape[0]), n_x=int(shape[1]), n=n, R=R, t_method=t_method)


# -- derivatives -------------------------------------------------------------------

def _fd4_first(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    f = np.moveaxis(f, axis, 0)
    g = np.empty_like(f)
    g[2:-2] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * h)
    g[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    g[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    g[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    g[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return np.moveaxis(g, 0, axis)


def _fd4_second(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    f = np.moveaxis(f, axis, 0)
    g = np.empty_like(f)
    h2 = 12 * h * h
    g[2:-2] = (-f[4:] + 16 * f[3:-1] - 30 * f[2:-2] + 16 * f[1:-3] - f[:-4]) / h2
    g[0] = (45 * f[0] - 154 * f[1] + 214 * f[2] - 156 * f[3] + 61 * f[4] - 10 * f[5]) / h2
    g[1] = (10 * f[0] - 15 * f[1] - 4 * f[2] + 14 * f[3] - 6 * f[4] + f[5]) / h2
    g[-1] = (45 * f[-1] - 154 * f[-2] + 214 * f[-3] - 156 * f[-4] + 61 * f[-5] - 10 * f[-6]) / h2
    g[-2] = (10 * f[-1] - 15 * f[-2] - 4 * f[-3] + 14 * f[-4] - 6 * f[-5] + f[-6]) / h2
    return np.moveaxis(g, 0, axis)


def _spectral(f: np.ndarray, period: float, axis: int, order: int) -> np.ndarray:
    m = f.shape[axis]
    k = 2 * np.pi * np.fft.fftfreq(m, d=period / m)
    shape = [1] * f.ndim
    shape[axis] = m
    mult = ((1j * k) ** order).reshape(shape)
    if order % 2 == 1 and m % 2 == 0:
        # drop the unpaired Nyquist mode for odd derivatives
        mult = mult.copy()
        idx = [0] * f.ndim
        idx[axis] = m // 2
        mult[tuple(idx)] = 0.0
    out = np.fft.ifft(mult * np.fft.fft(f, axis=axis), axis=axis)
    return out.real if np.isrealobj(f) else out


def d_t(f: np.ndarray, grid: Grid, order: int = 1) -> np.ndarray:
    """t-derivative along axis 1 of an (N, n_t, ...) field."""
    if grid.t_method == "spectral":
        return _spectral(f, grid.T, 1, order)
    return _fd4_first(f, grid.dt, 1) if order == 1 else _fd4_second(f, grid.dt, 1)


def d_x(f: np.ndarray, grid: Grid, j: int, order: int = 1) -> np.ndarray:
    """Derivative in transverse direction j >= 1, i.e. in x_{j+1} (array axis 1 + j)."""
    return _spectral(f, 2 * grid.R, 1 + j, order)


def partial(f: np.ndarray, grid: Grid, p: int) -> np.ndarray:
    """d/dx_p with p = 0 for t and p >= 1 transverse (0-based)."""
    return d_t(f, grid) if p == 0 else d_x(f, grid, p)


def second_partials(f: np.ndarray, grid: Grid) -> dict:
    """All d_p d_q f (p <= q), 0-based indices."""
    n = grid.n
    first = [partial(f, grid, p) for p in range(n)]
    out = {(0, 0): d_t(f, grid, 2)}
    for q in range(1, n):
        out[(q, q)] = d_x(f, grid, q, 2)
        out[(0, q)] = d_x(first[0], grid, q)
        for p in range(1, q):
            out[(p, q)] = d_x(first[p], grid, q)
    return out


# -- test functions ------------------------------------------------------------------

def bump(s):
    """exp(-1/(1-s^2)) on |s| < 1, zero elsewhere."""
    s = np.asarray(s, float)
    out = np.zeros_like(s)
    m = np.abs(s) < 1
    out[m] = np.exp(-1.0 / (1.0 - s[m] ** 2))
    return out


@dataclass
class TestField:
    values: np.ndarray
    kind: str
    support_certificate: float
    seed: int | None = None

    @property
    def N(self) -> int:
        return self.values.shape[0]


def support_mask(grid: Grid) -> np.ndarray:
    mesh = grid.mesh()
    rad = np.sqrt(sum(m**2 for m in mesh[1:]))
    return (mesh[0] > 0) & (mesh[0] < grid.T / 2) & (rad < grid.r)


def make_test_function(grid: Grid, kind: str = "bump", N: int = 1, seed: int = 0,
                       xi_star=None) -> TestField:
    """Smooth field supported in (0, T/2) x {|x'| < r}.

    kinds: "bump" (real, positive), "modulated-bump" (bump times
    exp(i xi*'.x') with xi* = (xi1, xi')), "random" (bump times a seeded
    smooth complex profile).
    """
    if grid.T / 2 / grid.dt < 8 or 2 * grid.r / grid.dx < 8:
        raise ValueError("grid does not resolve the support region with 8 points")
    mesh = grid.mesh()
    t = mesh[0]
    rad = np.sqrt(sum(m**2 for m in mesh[1:]))
    base = bump((t - grid.T / 4) / (grid.T / 4)) * bump(rad / grid.r)
    if kind == "bump":
        vals = np.stack([base] * N).astype(float)
    elif kind == "modulated-bump":
        xs = np.zeros(grid.n) if xi_star is None else np.asarray(xi_star, float)
        phase = xs[0] * t + sum(xs[j] * mesh[j] for j in range(1, grid.n))
        vals = np.stack([base * np.exp(1j * phase)] * N)
    elif kind == "random":
        rng = np.random.default_rng(seed)
        vals = np.empty((N,) + grid.shape, complex)
        for a in range(N):
            prof = np.ones(grid.shape, complex)
            for i in range(3):
                for j in range(3):
                    c = complex(rng.normal(), rng.normal()) / 6
                    ph = rng.uniform(0, 2 * np.pi, size=grid.n)
                    term = np.cos(i * np.pi * t / grid.T + ph[0])
                    for d in range(1, grid.n):
                        term = term * np.cos(j * np.pi * mesh[d] / grid.r + ph[d])
                    prof += c * term
            vals[a] = base * prof
    else:
        raise ValueError(f"unknown test function kind {kind!r}")
    outside = ~support_mask(grid)
    peak = float(np.max(np.abs(vals)))
    cert = float(np.max(np.abs(vals[:, outside]))) / peak if outside.any() else 0.0
    if cert > 1e-12:
        raise ValueError(f"support certificate {cert:.2e} exceeds 1e-12")
    return TestField(values=vals, kind=kind, support_certificate=cert,
                     seed=seed if kind == "random" else None)


# -- weights -----------------------------------------------------------------------

def carleman_weight(grid: Grid, k: float, T: float | None = None, log: bool = False):
    """e^{k(t-T)^2} on the t grid (its logarithm when ``log``).

    Without ``log`` the exact weight is returned while k T^2 <= 600; beyond
    that an OverflowError asks for the log form.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    T = grid.T if T is None else T
    lw = k * (grid.t - T) ** 2
    if log:
        return lw
    if k * T * T > LOG_GUARD:
        raise OverflowError("k T^2 > 600: use log=True")
    return np.exp(lw)


def conjugation_weight(grid: Grid, k: float, T: float | None = None) -> np.ndarray:
    """w_k(t) = exp(k (t - T)^2 / 2)."""
    T = grid.T if T is None else T
    return np.exp(0.5 * k * (grid.t - T) ** 2)


# -- operators ---------------------------------------------------------------------

def _t_profile(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Broadcast a length-n_t array against (N, n_t, n_x, ...)."""
    return values.reshape((1, grid.n_t) + (1,) * (grid.n - 1))


def _fourier(f: np.ndarray, grid: Grid) -> np.ndarray:
    axes = tuple(range(2, 2 + grid.n - 1))
    return np.fft.fftn(f, axes=axes)


def _ifourier(f: np.ndarray, grid: Grid) -> np.ndarray:
    axes = tuple(range(2, 2 + grid.n - 1))
    return np.fft.ifftn(f, axes=axes)


def _apply_multiplier(symbol: np.ndarray, fhat: np.ndarray, grid: Grid) -> np.ndarray:
    """(symbol(xi') fhat)(t, xi'); symbol has shape (m, N, N) in freq_mesh order."""
    N = fhat.shape[0]
    flat = fhat.reshape(N, grid.n_t, -1)
    out = np.einsum("mab,btm->atm", symbol, flat)
    return out.reshape(fhat.shape)


def _apply_t_multiplier(symbol: np.ndarray, fhat: np.ndarray, grid: Grid) -> np.ndarray:
    """Same with a t-dependent symbol of shape (n_t, m, N, N)."""
    N = fhat.shape[0]
    flat = fhat.reshape(N, grid.n_t, -1)
    out = np.einsum("tmab,btm->atm", symbol, flat)
    return out.reshape(fhat.shape)


def apply_tensor(C: np.ndarray, v: np.ndarray, grid: Grid) -> np.ndarray:
    """(Lv)_a = sum C^{pq}_{ab} d_p d_q v_b; C is (N,N,n,n) or (*grid.shape,N,N,n,n)."""
    d2 = second_partials(v, grid)
    n = grid.n
    out = np.zeros(v.shape, dtype=np.result_type(v, float))
    const = C.ndim == 4
    for p in range(n):
        for q in range(n):
            D = d2[(min(p, q), max(p, q))]
            c = C[..., p, q]
            if const:
                if np.any(c):
                    out += np.einsum("ab,b...->a...", c, D)
            else:
                if np.any(c):
                    out += np.einsum("...ab,b...->a...", c, D)
    return out


class FrozenPencilOperator:
    """-H(D_t, D') for a frozen spec, applied through transverse multipliers."""

    def __init__(self, spec: SystemSpec, grid: Grid, x0=None):
        self.grid = grid
        self.sym = FrozenSymbol(spec, x0)
        self.xis = grid.freq_mesh()
        H1, H2 = self.sym.h(self.xis)
        self.H1, self.H2 = H1, H2
        self._yz = None

    @property
    def yz(self):
        if self._yz is None:
            self._yz = self.sym.yz(self.xis)
        return self._yz

    def H(self, v: np.ndarray) -> np.ndarray:
        g = self.grid
        Dt = -1j * d_t(v, g)
        Dtt = -d_t(v, g, 2)
        out = Dtt + _ifourier(_apply_multiplier(self.H1, _fourier(Dt, g), g)
                              + _apply_multiplier(self.H2, _fourier(v, g), g), g)
        return out

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return -self.H(v)


def operator_for(spec: SystemSpec, grid: Grid, mode: str = "frozen", x0=None):
    """Callable v -> Lv in the requested mode."""
    if mode == "variable":
        if spec.kind != "tensor":
            raise ValueError("variable mode needs tensor kind")
        C = coefficient_tensor(spec, grid.mesh())
        return lambda v: apply_tensor(C, v, grid)
    if mode != "frozen":
        raise ValueError("mode must be 'frozen' or 'variable'")
    if spec.kind == "tensor":
        x0 = np.zeros(spec.n) if x0 is None else np.asarray(x0, float)
        C0 = coefficient_tensor(spec, x0)
        return lambda v: apply_tensor(C0, v, grid)
    return FrozenPencilOperator(spec, grid, x0)


def apply_operator(spec: SystemSpec, v, grid: Grid, mode: str = "frozen", x0=None) -> np.ndarray:
    vals = v.values if isinstance(v, TestField) else v
    return operator_for(spec, grid, mode, x0)(vals)


# -- conjugated symbols ------------------------------------------------------------

@dataclass
class ConjugatedParts:
    """Symbols of the weight-conjugated frozen operator at a fixed t."""

    sym: FrozenSymbol
    k: float
    T: float
    t: float

    def G(self, xis):
        Y, Z = self.sym.yz(xis)
        return Y + 1j * (Z - self.k * (self.t - self.T) * np.eye(self.sym.N))

    def Gstar(self, xis):
        Y, Z = self.sym.yz(xis)
        return np.swapaxes(Y, 1, 2) - 1j * (Z + self.k * (self.t - self.T) * np.eye(self.sym.N))

    def H_k(self, lam, xis):
        """H(lam + i k (t - T), xi') via the monic pencil."""
        H1, H2 = self.sym.h(xis)
        mu = lam + 1j * self.k * (self.t - self.T)
        return mu**2 * np.eye(self.sym.N) + mu * H1 + H2

    def product(self, lam, xis):
        I = np.eye(self.sym.N)
        return (lam * I - self.Gstar(xis)) @ (lam * I - self.G(xis))


def conjugated_parts(spec_or_symbol, k: float, T: float, t: float, x0=None) -> ConjugatedParts:
    sym = spec_or_symbol if isinstance(spec_or_symbol, FrozenSymbol) else FrozenSymbol(spec_or_symbol, x0)
    return ConjugatedParts(sym=sym, k=k, T=T, t=t)


def apply_A_k(op: FrozenPencilOperator, u: np.ndarray, k: float) -> np.ndarray:
    """A_k u = D_t^2 u - (G + G*) D_t u + k u + G* G u with t-dependent G."""
    g = op.grid
    Y, Z = op.yz
    N = Y.shape[1]
    I = np.eye(N)
    s = (g.t - g.T)[:, None, None, None]
    G = Y[None] + 1j * (Z[None] - k * s * I)
    Gs = np.swapaxes(Y, 1, 2)[None] - 1j * (Z[None] + k * s * I)
    Dt = -1j * d_t(u, g)
    Dtt = -d_t(u, g, 2)
    out = Dtt + k * u
    out = out + _ifourier(-_apply_t_multiplier(G + Gs, _fourier(Dt, g), g)
                          + _apply_t_multiplier(Gs @ G, _fourier(u, g), g), g)
    return out


def conjugation_residual(spec: SystemSpec, v: TestField, grid: Grid, k: float, x0=None) -> float:
    """||w H v - A_k (w v)|| / ||w H v|| for the frozen pencil operator."""
    op = FrozenPencilOperator(spec, grid, x0)
    w = _t_profile(grid, conjugation_weight(grid, k) * np.exp(-0.5 * k * grid.T**2))
    lhs = w * op.H(v.values)
    rhs = apply_A_k(op, w * v.values, k)
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs))


# -- ratios ------------------------------------------------------------------------

@dataclass
class BenchPoint:
    k: float
    T: float
    lhs0: float
    lhs1: float
    lhs2: float
    rhs: float
    ratio: float
    seed: int | None = None
    scaled: bool = False


def _weighted_norms(grid: Grid, lw: np.ndarray, fields: list[np.ndarray]) -> float:
    w = _t_profile(grid, np.exp(lw))
    return float(sum(np.sum(w * np.abs(f) ** 2) for f in fields) * grid.cell)


def carleman_ratio(spec_or_op, v: TestField, k: float, T: float, mode: str = "frozen",
                   grid: Grid | None = None, spec: SystemSpec | None = None) -> BenchPoint:
    """Weighted lhs and rhs of the Carleman inequality for one field and k.

    ``spec_or_op`` is a SystemSpec (operator built on ``grid``) or a callable
    already bound to ``grid``. Weights are normalised by e^{-k T^2}; the
    reported values are exact while k T^2 <= 600 and scaled beyond.
    """
    if grid is None:
        raise ValueError("grid is required")
    op = operator_for(spec_or_op, grid, mode) if isinstance(spec_or_op, SystemSpec) else spec_or_op
    vals = v.values if isinstance(v, TestField) else v
    seed = v.seed if isinstance(v, TestField) else None
    if not np.any(vals):
        return BenchPoint(k, T, 0.0, 0.0, 0.0, 0.0, 0.0, seed)
    lw = k * (grid.t - T) ** 2 - k * T * T
    scaled = k * T * T > LOG_GUARD
    first = [partial(vals, grid, p) for p in range(grid.n)]
    lhs0 = k**3 * T**2 * _weighted_norms(grid, lw, [vals])
    lhs1 = k * _weighted_norms(grid, lw, first)
    lhs2 = 0.0
    if mode == "frozen":
        d2 = second_partials(vals, grid)
        sq = [d2[(p, q)] for p in range(grid.n) for q in range(grid.n) if p <= q]
        mult = [1.0 if p == q else 2.0 for p in range(grid.n) for q in range(grid.n) if p <= q]
        w = _t_profile(grid, np.exp(lw))
        lhs2 = float(sum(m * np.sum(w * np.abs(f) ** 2) for m, f in zip(mult, sq)) * grid.cell)
        lhs2 /= k * T * T
    rhs = _weighted_norms(grid, lw, [op(vals)])
    if rhs == 0:
        raise ArithmeticError("rhs vanishes for a nonzero field: operator is degenerate")
    if not scaled:
        f = np.exp(k * T * T)
        lhs0, lhs1, lhs2, rhs = lhs0 * f, lhs1 * f, lhs2 * f, rhs * f
    total = lhs0 + lhs1 + lhs2
    return BenchPoint(k=k, T=T, lhs0=lhs0, lhs1=lhs1, lhs2=lhs2, rhs=rhs,
                      ratio=total / rhs, seed=seed, scaled=scaled)


@dataclass
class CarlemanReport:
    mode: str
    T: float
    ks: list
    points: list
    grid_shape: tuple
    seeds: list
    fitted_c: float = 0.0
    stability: float = 0.0
    unstable: bool = False
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# grid={'x'.join(map(str, self.grid_shape))} seeds={self.seeds} "
                  f"weights_scaled_by_exp(-kT^2)_when_kT^2>{LOG_GUARD:g}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mode", "k", "T", "seed", "lhs0", "lhs1", "lhs2", "rhs", "ratio"])
        for p in self.points:
            w.writerow([self.mode, repr(float(p.k)), repr(float(p.T)), p.seed,
                        f"{p.lhs0:.12e}", f"{p.lhs1:.12e}", f"{p.lhs2:.12e}",
                        f"{p.rhs:.12e}", f"{p.ratio:.12e}"])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"mode": self.mode, "T": self.T, "k": self.ks, "n_points": len(self.points),
                "fitted_c": self.fitted_c, "stability": self.stability,
                "verdict": "unstable" if self.unstable else "stable", **self.meta}


def default_k_range(T: float) -> list[float]:
    ks = [m / T**2 for m in (4, 8, 16, 32, 64)]
    return [k for k in ks if k * T * T <= LOG_GUARD]


def k_sweep(spec: SystemSpec, battery, T: float, ks, mode: str = "frozen",
            grid: Grid | None = None, threshold: float = INSTABILITY) -> CarlemanReport:
    """Ratios over battery x k-range; fitted c and max/median stability statistic."""
    ks = [float(k) for k in ks]
    if len(ks) < 5:
        raise ValueError("k-range needs at least 5 points")
    if min(ks) < 1 / T:
        raise ValueError("all k must satisfy k >= 1/T")
    op = operator_for(spec, grid, mode)
    pts = [carleman_ratio(op, v, k, T, mode, grid=grid) for v in battery for k in ks]
    ratios = np.array([p.ratio for p in pts])
    stat = float(ratios.max() / np.median(ratios))
    return CarlemanReport(mode=mode, T=T, ks=ks, points=pts, grid_shape=grid.shape,
                          seeds=[v.seed for v in battery], fitted_c=float(ratios.max()),
                          stability=stat, unstable=stat > threshold)


# -- a priori estimates for the first order factors -----------------------------------

def _plain_norm(grid: Grid, f: np.ndarray, mask: np.ndarray | None = None) -> float:
    g = f if mask is None else f * mask
    return float(np.sqrt(np.sum(np.abs(g) ** 2) * grid.cell))


def apply_factor(op: FrozenPencilOperator, v: np.ndarray, k: float, which: str = "bad") -> np.ndarray:
    """P_{k,b} v = D_t v - G*_k v or P_{k,g} v = D_t v - G_k v."""
    g = op.grid
    Y, Z = op.yz
    I = np.eye(Y.shape[1])
    s = (g.t - g.T)[:, None, None, None]
    if which == "bad":
        sym = np.swapaxes(Y, 1, 2)[None] - 1j * (Z[None] + k * s * I)
    elif which == "good":
        sym = Y[None] + 1j * (Z[None] - k * s * I)
    else:
        raise ValueError("which must be 'bad' or 'good'")
    return -1j * d_t(v, g) - _ifourier(_apply_t_multiplier(sym, _fourier(v, g), g), g)


def apriori_check(spec_or_op, v: TestField, k: float, T: float, grid: Grid | None = None,
                  which: str = "bad") -> float:
    """lhs/rhs of the first order a priori estimate for P_{k,b} (or P_{k,g}).

    bad:  sum_{|b|<=1} T^{-1/2} (kT)^{1/2-|b|} ||d^b v||  over  ||P_{k,b} v||
    good: sum_{|a|<=1} (kT)^{1-|a|} ||d^a v||            over  ||P_{k,g} v||
    """
    op = spec_or_op if isinstance(spec_or_op, FrozenPencilOperator) else FrozenPencilOperator(spec_or_op, grid)
    g = op.grid
    vals = v.values if isinstance(v, TestField) else v
    if not np.any(vals):
        return 0.0
    n0 = _plain_norm(g, vals)
    n1 = sum(_plain_norm(g, partial(vals, g, p)) for p in range(g.n))
    rhs = _plain_norm(g, apply_factor(op, vals, k, which))
    if rhs == 0:
        raise ArithmeticError("first order factor annihilates a nonzero field")
    if which == "bad":
        lhs = T**-0.5 * ((k * T) ** 0.5 * n0 + (k * T) ** -0.5 * n1)
    else:
        lhs = (k * T) * n0 + n1
    return lhs / rhs
