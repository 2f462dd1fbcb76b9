"""Explicit parametrix kernel for the non-elliptic first order factor.

For a frozen symbol with B = B(xi') the kernel reads

    S(x1, y1; xi') = int eta(xi1 / 2 gamma k T) exp(i Phi) M^{-1}(y1, xi') dxi1 / 2 pi,
    Phi = (x1 - y1) xi1 + d (-xi1 + B),  d = (x1 - y1)^2 / (2 (T - y1)),
    M^{-1} = (T - y1) (xi1 - B + i k (T - y1))^{-1}.

The operator it inverts is P*(x1) = (T - x1)^{-1} (D_{x1} - B) + i k, and the
phase is chosen so that P*[exp(i Phi) M^{-1}] = exp(i Phi) identically. The
kernel of P* S is therefore E(s - d) exp(i d B) with s = x1 - y1 and E the
inverse transform of the cutoff; this closed form is the oracle for the
finite-difference remainder probe.
"""

from __future__ import annotations

import csv
import cmath
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg

from .audit import eigen_structure
from .carleman import _fd4_first, apply_factor, apriori_check, bump  # noqa: F401
from .frozen import FrozenSymbol
from .pencil import ContourError, PencilFactorization, QuadratureError
from .partition import smooth_step
from .sampling import refine_around, sphere_points
from .system import AssumptionError, SystemSpec

ETA_FLAT = 0.25
ETA_ZERO = 0.5
M_MIN = 1e-3
AGREE_TOL = 1e-6
DISAGREE_FLAG = 1e-4
# route agreement is relative to max(|S|, AGREE_FLOOR * T): kernels far below the
# bound scale carry only roundoff and would otherwise report spurious gaps
AGREE_FLOOR = 1e-9
GK_TOL = 1e-11
GK_MAX_PANELS = 20000
# a panel is converged once its error estimate reaches roundoff in its own |f| mass
GK_ROUNDOFF = 50 * np.finfo(float).eps

# 15-point Kronrod nodes on [0, 1] with embedded 7-point Gauss weights
_XK = np.array([0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                0.207784955007898467600689403773245, 0.0])
_WK = np.array([0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
GK_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
GK_WK = np.concatenate([_WK[:-1], _WK[::-1]])
GK_WG = np.zeros(15)
GK_WG[1:15:2] = np.concatenate([_WG[:-1], _WG[::-1]])


def cutoff_eta(s):
    """eta(s): 1 on |s| <= 1/4, 0 on |s| >= 1/2, smooth and even."""
    s = np.abs(np.asarray(s, float))
    return 1.0 - smooth_step((s - ETA_FLAT) / (ETA_ZERO - ETA_FLAT))


def _eta_scalar(s: float) -> float:
    u = (abs(s) - ETA_FLAT) / (ETA_ZERO - ETA_FLAT)
    if u <= 0:
        return 1.0
    if u >= 1:
        return 0.0
    f, g = math.exp(-1.0 / u), math.exp(-1.0 / (1.0 - u))
    return g / (f + g)


# -- gamma ---------------------------------------------------------------------------

@dataclass
class GammaData:
    lam_bar: float
    m: float
    gamma: float
    k: float
    T: float
    z_min: float
    z_max: float
    m_min: float = M_MIN
    excluded: int = 0
    samples: int = 0

    def eta(self, s):
        return cutoff_eta(s)

    @property
    def L(self) -> float:
        """Width scale 2 gamma k T of the xi1 cutoff."""
        return 2.0 * self.gamma * self.k * self.T

    @property
    def xi_band(self) -> tuple[float, float]:
        return self.k * self.T / self.lam_bar, self.k * self.T * self.lam_bar

    def scaled(self, k: float | None = None, T: float | None = None) -> "GammaData":
        return GammaData(self.lam_bar, self.m, self.gamma, self.k if k is None else k,
                         self.T if T is None else T, self.z_min, self.z_max, self.m_min,
                         self.excluded, self.samples)


def _unit_blocks(symbol: FrozenSymbol, dirs: np.ndarray):
    """(z_min, z_max, b_min, b_max) per direction; NaN where the factor fails."""
    out = np.full((len(dirs), 4), np.nan)
    for i, d in enumerate(dirs):
        try:
            B = symbol.B(d[None])[0]
        except (AssumptionError, ContourError, QuadratureError, np.linalg.LinAlgError):
            continue
        z = np.linalg.eigvalsh(0.5 * (B.imag + B.imag.T))
        b = np.linalg.eigvalsh(0.5 * (B.real + B.real.T))
        if z[0] <= 0:
            continue
        out[i] = z[0], z[-1], b[0], b[-1]
    return out


def gamma_bound(source, k: float, T: float, samples: int = 512, seed: int = 0,
                m_min: float = M_MIN, refine: int = 4) -> GammaData:
    """lambda_bar, m and gamma = lambda_bar * max(m, m_min) from a unit-sphere sweep.

    ``source`` is a FrozenSymbol, a SystemSpec (frozen at its centre) or a
    single PencilFactorization, in which case only that direction and its
    negative are used.
    """
    if isinstance(source, PencilFactorization):
        rows = []
        for B in (source.B, -np.conj(source.B)):
            z = np.linalg.eigvalsh(0.5 * (B.imag + B.imag.T))
            b = np.linalg.eigvalsh(0.5 * (B.real + B.real.T))
            rows.append((z[0], z[-1], b[0], b[-1]))
        vals = np.array(rows)
        count = 2
    else:
        symbol = source if isinstance(source, FrozenSymbol) else FrozenSymbol(source)
        dirs = sphere_points(symbol.dim, samples, seed)
        vals = _unit_blocks(symbol, dirs)
        ok = ~np.isnan(vals[:, 0])
        if not ok.any():
            raise AssumptionError("Z is degenerate in every sampled direction")
        extreme = [int(np.nanargmin(vals[:, 0])), int(np.nanargmax(vals[:, 1])),
                   int(np.nanargmin(vals[:, 2])), int(np.nanargmax(vals[:, 3]))]
        extra = refine_around(dirs, dirs[np.unique(extreme)], factor=refine)
        if len(extra):
            vals = np.concatenate([vals, _unit_blocks(symbol, extra)])
        count = len(vals)
    ok = ~np.isnan(vals[:, 0])
    zmin, zmax = float(vals[ok, 0].min()), float(vals[ok, 1].max())
    lam_bar = max(zmax, 1.0 / zmin)
    m = max(abs(float(vals[ok, 2].min())), abs(float(vals[ok, 3].max())))
    return GammaData(lam_bar=lam_bar, m=m, gamma=lam_bar * max(m, m_min), k=k, T=T,
                     z_min=zmin, z_max=zmax, m_min=m_min, excluded=int((~ok).sum()),
                     samples=count)


# -- phase --------------------------------------------------------------------------

@dataclass
class PhaseResult:
    Phi1: np.ndarray
    scalar: float
    d: float
    identity_residual: float


def phase(x1: float, y1: float, xi1: float, B: np.ndarray, k: float, T: float) -> PhaseResult:
    """Phi1 = d (-xi1 + B) and the residual of the transport identity.

    The identity [ (Phi1_x + xi1 - B) / (T - x1) + i k ] M^{-1}(y1) = I holds
    for every x1 < T with this choice of Phi1, not only on the diagonal.
    """
    if y1 >= T or x1 >= T:
        raise ValueError("phase requires x1, y1 < T")
    B = np.asarray(B, complex)
    I = np.eye(B.shape[0])
    d = (x1 - y1) ** 2 / (2 * (T - y1))
    Phi1 = d * (-xi1 * I + B)
    dPhi1 = (x1 - y1) / (T - y1) * (-xi1 * I + B)
    Minv = (T - y1) * np.linalg.inv(xi1 * I - B + 1j * k * (T - y1) * I)
    lhs = ((dPhi1 + xi1 * I - B) / (T - x1) + 1j * k * I) @ Minv
    res = float(np.linalg.norm(lhs - I)) / np.sqrt(B.shape[0])
    return PhaseResult(Phi1=Phi1, scalar=(x1 - y1) * xi1, d=d, identity_residual=res)


# -- adaptive Gauss-Kronrod on matrix integrands ------------------------------------------

def gk_adaptive(f, a: float, b: float, breaks=(), panels: int = 8, tol: float = GK_TOL,
                abs_floor: float = 1e-300, max_panels: int = GK_MAX_PANELS):
    """Vectorised adaptive G7/K15 for an array-valued integrand.

    ``f`` maps an array of nodes (m,) to values (m, ...). Panels whose
    Kronrod-Gauss gap exceeds their share of ``tol * |integral|`` are bisected,
    unless the gap is already at roundoff level for that panel.
    Returns (integral, error estimate, panel count).
    """
    edges = np.linspace(a, b, panels + 1)
    brk = [p for p in breaks if a < p < b]
    if brk:
        edges = np.unique(np.concatenate([edges, brk]))
    lo, hi = edges[:-1], edges[1:]
    total = None
    done_val, done_err = 0.0, 0.0
    scale = None
    used = 0
    while len(lo):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        nodes = (mid[:, None] + half[:, None] * GK_NODES[None, :]).ravel()
        vals = f(nodes)
        vals = vals.reshape((len(lo), 15) + vals.shape[1:])
        wk = (half[:, None] * GK_WK[None, :])
        wg = (half[:, None] * GK_WG[None, :])
        ext = (slice(None), slice(None)) + (None,) * (vals.ndim - 2)
        K = np.sum(wk[ext] * vals, axis=1)
        G = np.sum(wg[ext] * vals, axis=1)
        err = np.abs(K - G).reshape(len(lo), -1).max(axis=1)
        mass = np.sum(np.abs(wk[ext] * vals), axis=1).reshape(len(lo), -1).max(axis=1)
        used += len(lo)
        if scale is None:
            total = K.sum(axis=0)
            scale = max(float(np.abs(total).max()), abs_floor)
        budget = tol * scale * (hi - lo) / (b - a)
        good = (err <= np.maximum(budget, GK_ROUNDOFF * mass)) | (hi - lo < 1e-13 * (b - a))
        done_val = done_val + K[good].sum(axis=0)
        done_err = done_err + float(err[good].sum())
        if used > max_panels:
            done_val = done_val + K[~good].sum(axis=0)
            done_err = done_err + float(err[~good].sum())
            break
        bad_lo, bad_hi = lo[~good], hi[~good]
        m = 0.5 * (bad_lo + bad_hi)
        lo = np.concatenate([bad_lo, m])
        hi = np.concatenate([m, bad_hi])
    return done_val, done_err, used


# -- scalar cutoff integrals ---------------------------------------------------------

def scalar_n(sigma: float, c: complex, L: float, epsabs: float = 1e-14,
             epsrel: float = 1e-12) -> complex:
    """(2 pi)^{-1} int eta(xi / L) e^{i sigma xi} / (xi - c) dxi by scipy quad.

    The pole is subtracted at nu = Re c (clipped to the support), leaving a
    bounded integrand plus an exact logarithm.
    """
    if L <= 0:
        return 0.0j
    a, b = -ETA_ZERO * L, ETA_ZERO * L
    if abs(c.imag) <= 1e-12 * L and a <= c.real <= b:
        raise ValueError("pole on the integration path")
    nu = min(max(c.real, a), b)
    fnu = _eta_scalar(nu / L) * cmath.exp(1j * sigma * nu)

    def g(x):
        return (_eta_scalar(x / L) * cmath.exp(1j * sigma * x) - fnu) / (x - c)

    pts = [nu] if a < nu < b else None
    kw = dict(points=pts, limit=400, epsabs=epsabs, epsrel=epsrel)
    with warnings.catch_warnings():
        # a vanishing real or imaginary part triggers spurious roundoff notices
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        re = integrate.quad(lambda x: g(x).real, a, b, **kw)[0]
        im = integrate.quad(lambda x: g(x).imag, a, b, **kw)[0]
    val = re + 1j * im + fnu * (cmath.log(b - c) - cmath.log(a - c))
    return val / (2 * np.pi)


def cutoff_tail_integral(width: float = 1.0) -> float:
    """(2 pi)^{-1} int over width <= |xi| <= 2 width of dxi / |xi|; equals log 2 / pi."""
    one = integrate.quad(lambda x: 1.0 / x, width, 2 * width, epsabs=0, epsrel=1e-13)[0]
    return 2.0 * one / (2 * np.pi)


def cutoff_transform(s, L: float, panels: int = 16) -> np.ndarray:
    """E(s) = (2 pi)^{-1} int eta(xi / L) e^{i s xi} dxi by composite Gauss-Legendre."""
    s = np.asarray(s, float)
    xg, wg = np.polynomial.legendre.leggauss(24)
    edges = np.linspace(-ETA_ZERO, ETA_ZERO, panels + 1)
    u = ((edges[1:] - edges[:-1])[:, None] / 2 * xg + (edges[1:] + edges[:-1])[:, None] / 2).ravel()
    w = ((edges[1:] - edges[:-1])[:, None] / 2 * wg).ravel()
    vals = cutoff_eta(u) * w
    return (L / (2 * np.pi)) * (np.exp(1j * L * np.multiply.outer(s, u)) @ vals)


# -- kernel --------------------------------------------------------------------------

@dataclass
class KernelSample:
    x1: float
    y1: float
    xi: np.ndarray
    k: float
    T: float
    value: np.ndarray
    value_b: np.ndarray
    agreement: float
    panels: int = 0

    def bound_rhs(self, m_hat: int = 1) -> float:
        return (1.0 + self.k * (self.x1 - self.y1) ** 2) ** (-m_hat) * self.T

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.value, 2))

    @property
    def norm_b(self) -> float:
        return float(np.linalg.norm(self.value_b, 2))


def _kernel_direct(x1, y1, B, k, T, L, tol=GK_TOL):
    N = B.shape[0]
    I = np.eye(N)
    s = x1 - y1
    d = s * s / (2 * (T - y1))
    pref = (T - y1) / (2 * np.pi) * linalg.expm(1j * d * B)
    shift = B - 1j * k * (T - y1) * I

    def f(xi):
        res = np.linalg.inv(xi[:, None, None] * I - shift[None])
        w = cutoff_eta(xi / L) * np.exp(1j * (s - d) * xi)
        return w[:, None, None] * (pref[None] @ res)

    a, b = -ETA_ZERO * L, ETA_ZERO * L
    osc = abs(s - d) * L / np.pi
    panels = int(min(max(8, np.ceil(osc)), 2000))
    poles = np.linalg.eigvals(shift).real
    val, err, used = gk_adaptive(f, a, b, breaks=list(poles), panels=panels, tol=tol,
                                 abs_floor=AGREE_FLOOR * T)
    return val, used


def _kernel_spectral(x1, y1, B, k, T, L, spectral=None):
    s = x1 - y1
    d = s * s / (2 * (T - y1))
    sp = eigen_structure(B) if spectral is None else spectral
    if not sp.diagonalizable:
        raise AssumptionError("B is not diagonalisable; the spectral kernel form is unavailable")
    out = np.zeros(B.shape, complex)
    for lam, P in zip(sp.eigenvalues, sp.projections):
        c = lam - 1j * k * (T - y1)
        out += np.exp(1j * d * lam) * scalar_n(s - d, complex(c), L) * P
    return (T - y1) * out


def kernel_Sk(x1: float, y1: float, xi, k: float, T: float, gd: GammaData,
              source, spectral=None) -> KernelSample:
    """S_k'(x1, y1; xi') by adaptive quadrature (a) and the spectral form (b).

    ``source`` is a FrozenSymbol, a PencilFactorization or the matrix B
    itself. Raises if the two routes disagree beyond DISAGREE_FLAG.
    """
    if not (0 <= x1 <= T / 2 and 0 <= y1 <= T / 2):
        raise ValueError("x1 and y1 must lie in [0, T/2]")
    xi = np.atleast_1d(np.asarray(xi, float))
    if isinstance(source, FrozenSymbol):
        B = source.B(xi[None])[0]
    elif isinstance(source, PencilFactorization):
        B = source.B
    else:
        B = np.asarray(source, complex)
    L = 2.0 * gd.gamma * k * T
    N = B.shape[0]
    if L <= 0:
        z = np.zeros((N, N), complex)
        return KernelSample(x1, y1, xi, k, T, z, z.copy(), 0.0)
    va, used = _kernel_direct(x1, y1, B, k, T, L)
    vb = _kernel_spectral(x1, y1, B, k, T, L, spectral)
    scale = max(float(np.linalg.norm(vb)), AGREE_FLOOR * T)
    agree = float(np.linalg.norm(va - vb)) / scale
    if agree > DISAGREE_FLAG:
        raise QuadratureError(f"kernel routes disagree ({agree:.2e}); oscillation under-resolved")
    return KernelSample(x1, y1, xi, k, T, va, vb, agree, used)


def sweep_xi(dim: int, count: int, k: float, T: float, lam_bar: float) -> np.ndarray:
    """xi' samples: unit directions times radii kT u, u log-spaced over [1/2lam, 2lam].

    In one transverse dimension the unit sphere is {+1, -1}, so the count is
    spent on radii with alternating sign.
    """
    dirs = sphere_points(dim, max(count, 2))
    u = np.exp(np.linspace(np.log(0.5 / lam_bar), np.log(2 * lam_bar), count + 1)[:-1]
               + 0.5 * np.log(4 * lam_bar**2) / count)
    rows = [dirs[i % len(dirs)] * k * T * u[i] for i in range(count)]
    return np.array(rows)


def kernel_sweep(source, ks, T: float, n_xy: int = 16, n_xi: int = 32,
                 gd: GammaData | None = None, seed: int = 0) -> list[KernelSample]:
    symbol = source if isinstance(source, FrozenSymbol) else FrozenSymbol(source)
    if gd is None:
        gd = gamma_bound(symbol, ks[0], T, seed=seed)
    grid = np.linspace(0.0, T / 2, n_xy)
    out = []
    for k in ks:
        g = gd.scaled(k=k, T=T)
        for xi in sweep_xi(symbol.dim, n_xi, k, T, gd.lam_bar):
            B = symbol.B(xi[None])[0]
            sp = eigen_structure(B)
            for x1 in grid:
                for y1 in grid:
                    out.append(kernel_Sk(x1, y1, xi, k, T, g, B, spectral=sp))
    return out


@dataclass
class KernelBoundReport:
    ks: list
    C_hat: dict
    C_hat_per_k: dict
    variation: dict
    grows: dict
    max_agreement: float
    samples: int


def kernel_bound_check(samples: list[KernelSample], m_hats=(1, 2)) -> KernelBoundReport:
    """C_hat = max |S| / ((1 + k (x1 - y1)^2)^{-m} T) per decay order and per k."""
    ks = sorted({s.k for s in samples})
    C, Ck, var, grows = {}, {}, {}, {}
    for m in m_hats:
        per = []
        for k in ks:
            per.append(max(s.norm / s.bound_rhs(m) for s in samples if s.k == k))
        Ck[m] = per
        C[m] = max(per)
        var[m] = max(per) / max(min(per), 1e-300)
        grows[m] = bool(all(b > a for a, b in zip(per, per[1:])) and var[m] > 2)
    return KernelBoundReport(ks=ks, C_hat=C, C_hat_per_k=Ck, variation=var, grows=grows,
                             max_agreement=max(s.agreement for s in samples),
                             samples=len(samples))


def kernel_csv(samples: list[KernelSample], m_hat: int = 1) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "T", "x1", "y1", "|xi'|", "method_a_norm", "method_b_norm",
                "bound_rhs", "ratio"])
    for s in samples:
        rhs = s.bound_rhs(m_hat)
        w.writerow([f"{v:.12e}" for v in (s.k, s.T, s.x1, s.y1, float(np.linalg.norm(s.xi)),
                                           s.norm, s.norm_b, rhs, s.norm / rhs)])
    return buf.getvalue()


# -- remainder probe -----------------------------------------------------------------

def _n_table(sigma: np.ndarray, c: np.ndarray, L: float, panels: int = 64) -> np.ndarray:
    """Vectorised scalar_n over arrays (fixed composite Gauss, pole subtracted)."""
    xg, wg = np.polynomial.legendre.leggauss(16)
    edges = np.linspace(-ETA_ZERO * L, ETA_ZERO * L, panels + 1)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + h[:, None] / 2 * (xg + 1)).ravel()
    w = (h[:, None] / 2 * wg).ravel()
    eta = cutoff_eta(nodes / L)
    a, b = edges[0], edges[-1]
    nu = np.clip(c.real, a, b)
    fnu = cutoff_eta(nu / L) * np.exp(1j * sigma * nu)
    out = np.empty(sigma.shape, complex)
    flat_s, flat_c, flat_f = sigma.ravel(), c.ravel(), fnu.ravel()
    res = out.ravel()
    step = max(1, 2**22 // len(nodes))
    for i in range(0, len(flat_s), step):
        ss, cc, ff = flat_s[i:i + step, None], flat_c[i:i + step, None], flat_f[i:i + step, None]
        integrand = (eta * np.exp(1j * ss * nodes) - ff) / (nodes - cc)
        res[i:i + step] = integrand @ w + ff[:, 0] * (np.log(b - cc[:, 0]) - np.log(a - cc[:, 0]))
    return res.reshape(sigma.shape) / (2 * np.pi)


@dataclass
class ProbeReport:
    T: float
    ks: list
    gamma: float
    rho: dict
    rho_oracle: dict
    fd_gap: float
    alpha: dict
    decreasing: dict
    regime_ok: bool
    grid: tuple
    meta: dict = field(default_factory=dict)

    @property
    def alpha_mean(self) -> float:
        return float(np.mean(list(self.alpha.values())))

    @property
    def all_decreasing(self) -> bool:
        return all(self.decreasing.values())


def probe_battery(T: float, r: float, n1: int, n2: int, R: float, N: int, seeds) -> list:
    """Random smooth fields supported in (0, T/2) x (-r, r), shape (N, n1, n2)."""
    x1 = np.linspace(0, T / 2, n1)
    x2 = -R + 2 * R * np.arange(n2) / n2
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    base = bump((X1 - T / 4) / (T / 4)) * bump(X2 / r)
    out = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        g = np.empty((N, n1, n2), complex)
        for a in range(N):
            prof = np.ones_like(X1, complex)
            for i in range(3):
                for j in range(3):
                    c = complex(rng.normal(), rng.normal()) / 6
                    p1, p2 = rng.uniform(0, 2 * np.pi, 2)
                    prof += c * np.cos(i * np.pi * X1 / T + p1) * np.cos(j * np.pi * X2 / r + p2)
            g[a] = base * prof
        out.append(g)
    return out


def error_probe(source, ks, T: float, battery=None, seeds=(0, 1, 2), n1: int = 96,
                n2: int = 32, r: float | None = None, R: float | None = None,
                gamma_floor: float = 1.0) -> ProbeReport:
    """rho(k) = ||(P* S - I) g|| / ||g|| with P* applied by fourth order differences.

    Works per transverse Fourier mode (n = 2). The cutoff width uses
    gamma = max(gamma_bound, gamma_floor). The same quantity computed from the
    closed-form kernel E(s - d) exp(i d B) is reported as ``rho_oracle``;
    ``fd_gap`` is the largest relative gap between the two applied fields.
    """
    symbol = source if isinstance(source, FrozenSymbol) else FrozenSymbol(source)
    if symbol.dim != 1:
        raise ValueError("error_probe is realised for one transverse dimension")
    ks = [float(k) for k in ks]
    regime_ok = min(ks) >= T**-3 * (1 - 1e-12)
    if not regime_ok:
        warnings.warn("k < T^-3: outside the regime of the remainder estimate", RuntimeWarning)
    r = T / 4 if r is None else r
    R = 2 * r if R is None else R
    N = symbol.N
    if battery is None:
        battery = probe_battery(T, r, n1, n2, R, N, seeds)
        labels = list(seeds)
    else:
        labels = list(range(len(battery)))
    gd = gamma_bound(symbol, ks[0], T)
    gamma = max(gd.gamma, gamma_floor)
    x = np.linspace(0, T / 2, n1)
    h = x[1] - x[0]
    wy = np.full(n1, h)
    wy[0] = wy[-1] = h / 2
    X, Yq = np.meshgrid(x, x, indexing="ij")
    S = X - Yq
    D = S**2 / (2 * (T - Yq))
    freqs = 2 * np.pi * np.fft.fftfreq(n2, d=2 * R / n2)
    ghat = [np.fft.fft(g, axis=2) for g in battery]
    rho = {lab: [] for lab in labels}
    rho_or = {lab: [] for lab in labels}
    gap = 0.0
    for k in ks:
        L = 2 * gamma * k * T
        Ekern = cutoff_transform(S - D, L)
        num = {lab: 0.0 for lab in labels}
        num_or = {lab: 0.0 for lab in labels}
        den = {lab: 0.0 for lab in labels}
        cache: dict = {}
        for j, f in enumerate(freqs):
            B = symbol.B(np.array([[f]]))[0] if f != 0 else np.zeros((N, N), complex)
            lam, V = np.linalg.eig(B)
            W = np.linalg.inv(V)
            Kmat = np.zeros((n1, n1, N, N), complex)
            Omat = np.zeros((n1, n1, N, N), complex)
            for hh, lh in enumerate(lam):
                P = np.outer(V[:, hh], W[hh])
                key = (round(lh.real, 12), round(lh.imag, 12))
                nt = cache.get(key)
                if nt is None:
                    c = lh - 1j * k * (T - Yq)
                    nt = _n_table(S - D, c, L)
                    cache[key] = nt
                ed = np.exp(1j * D * lh)
                Kmat += ((T - Yq) * ed * nt)[..., None, None] * P
                Omat += (ed * Ekern)[..., None, None] * P
            for lab, gh in zip(labels, ghat):
                gv = gh[:, :, j].T  # (n1, N)
                u = np.einsum("xyab,y,yb->xa", Kmat, wy, gv)
                du = _fd4_first(u, h, axis=0)
                Pu = (-1j * du - u @ B.T) / (T - x)[:, None] + 1j * k * u
                uo = np.einsum("xyab,y,yb->xa", Omat, wy, gv)
                num[lab] += float(np.sum(wy[:, None] * np.abs(Pu - gv) ** 2))
                num_or[lab] += float(np.sum(wy[:, None] * np.abs(uo - gv) ** 2))
                den[lab] += float(np.sum(wy[:, None] * np.abs(gv) ** 2))
                scale = max(float(np.abs(uo).max()), 1e-300)
                gap = max(gap, float(np.abs(Pu - uo).max()) / scale)
        for lab in labels:
            rho[lab].append(np.sqrt(num[lab] / den[lab]) if den[lab] > 0 else 0.0)
            rho_or[lab].append(np.sqrt(num_or[lab] / den[lab]) if den[lab] > 0 else 0.0)
    alpha, dec = {}, {}
    for lab in labels:
        vals = np.array(rho[lab])
        dec[lab] = bool(np.all(np.diff(vals) < 0))
        if np.all(vals > 0):
            alpha[lab] = float(-np.polyfit(np.log(ks), np.log(vals), 1)[0])
        else:
            alpha[lab] = float("nan")
    return ProbeReport(T=T, ks=ks, gamma=gamma, rho=rho, rho_oracle=rho_or, fd_gap=gap,
                       alpha=alpha, decreasing=dec, regime_ok=regime_ok, grid=(n1, n2),
                       meta={"gamma_bound": gd.gamma, "gamma_floor": gamma_floor, "r": r, "R": R})
