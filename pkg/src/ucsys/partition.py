"""Dyadic cube partition of unity and the frozen-coefficient error probe.

Everything is tensorised: theta(x) = prod_i theta0(x_i), so the family
eta_g = theta_g / sum_g' theta_g' factorises into one-dimensional tables and
derivatives follow from the quotient rule applied per axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .system import SystemSpec, coefficient_tensor

PLATEAU = 1.0
OUTER = 1.5
MIN_POINTS = 8


def smooth_step(s, order: int = 0):
    """S(s) = b(s) / (b(s) + b(1-s)) with b(s) = exp(-1/s), and its derivatives.

    Exactly 0 for s <= 0 and 1 for s >= 1. ``order`` selects S, S' or S''.
    """
    s = np.asarray(s, float)
    inner = (s > 0) & (s < 1)
    out = np.zeros_like(s)
    if order == 0:
        out[s >= 1] = 1.0
    u = s[inner]
    f, g = np.exp(-1.0 / u), np.exp(-1.0 / (1 - u))
    if order == 0:
        out[inner] = f / (f + g)
        return out
    f1, g1 = f / u**2, -g / (1 - u) ** 2
    den = f + g
    num = f1 * g - f * g1
    if order == 1:
        out[inner] = num / den**2
        return out
    if order == 2:
        f2 = f * (1 / u**4 - 2 / u**3)
        g2 = g * (1 / (1 - u) ** 4 - 2 / (1 - u) ** 3)
        dnum = f2 * g - f * g2
        out[inner] = dnum / den**2 - 2 * num * (f1 + g1) / den**3
        return out
    raise ValueError("order must be 0, 1 or 2")


def base_cutoff(t, order: int = 0):
    """theta0: 1 on |t| <= 1, 0 on |t| >= 3/2, even; ``order`` gives derivatives."""
    t = np.asarray(t, float)
    w = OUTER - PLATEAU
    s = (np.abs(t) - PLATEAU) / w
    if order == 0:
        return 1.0 - smooth_step(s)
    if order == 1:
        return -np.sign(t) * smooth_step(s, 1) / w
    if order == 2:
        return -smooth_step(s, 2) / w**2
    raise ValueError("order must be 0, 1 or 2")


@dataclass
class PartitionFamily:
    mu: float
    n: int
    axes: list
    indices: np.ndarray
    # tables[k][i]: array (len(indices), len(axes[i])) of d^k/dx^k of the 1-d factor
    tables: list
    theta_bar_min: float
    sum_error: float
    c1: float
    c2: float
    c3: list
    c3_max: float
    neighbor_count: int
    neighbor_count_closed: int
    support_leak: float
    meta: dict = field(default_factory=dict)

    def member(self, g) -> np.ndarray:
        """eta_g on the full tensor grid."""
        out = np.ones(())
        for i, gi in enumerate(g):
            row = int(np.searchsorted(self.indices, gi))
            out = np.multiply.outer(out, self.tables[0][i][row])
        return out

    def reconstruct(self, v: np.ndarray) -> np.ndarray:
        """sum_g eta_g v on the grid (n = 2)."""
        acc = np.zeros_like(v)
        e0, e1 = self.tables[0]
        for a in range(len(self.indices)):
            for b in range(len(self.indices)):
                acc = acc + np.multiply.outer(e0[a], e1[b]) * v
        return acc


def _axis_tables(x: np.ndarray, mu: float, idx: np.ndarray):
    arg = mu * x[None, :] - idx[:, None]
    th = [base_cutoff(arg, k) * mu**k for k in range(3)]
    sb = [t.sum(axis=0) for t in th]
    e0 = th[0] / sb[0]
    e1 = th[1] / sb[0] - th[0] * sb[1] / sb[0] ** 2
    e2 = (th[2] / sb[0] - 2 * th[1] * sb[1] / sb[0] ** 2
          - th[0] * sb[2] / sb[0] ** 2 + 2 * th[0] * sb[1] ** 2 / sb[0] ** 3)
    return [e0, e1, e2], th, sb


def _product_bound(sup, n: int, mu: float, per_order: bool = False):
    """max over |alpha| = k of prod_i sup|d^{alpha_i}|, scaled by mu^-k."""
    out = []
    for k in range(3):
        best = 0.0
        for alpha in np.ndindex(*(k + 1,) * n):
            if sum(alpha) == k:
                best = max(best, float(np.prod([sup[a][i] for i, a in enumerate(alpha)])))
        out.append(best / mu**k)
    return out if per_order else max(out)


def eta_family(mu: float, n: int = 2, points: int = 256, lo: float = -1.0,
               hi: float = 1.0) -> PartitionFamily:
    """Partition eta_{g,mu} = theta(mu x - g) / theta_bar on [lo, hi]^n."""
    if mu < 1:
        raise ValueError("mu must be >= 1")
    x = np.linspace(lo, hi, points)
    h = x[1] - x[0]
    # grid points inside a closed interval of length 1/mu
    if int(np.floor(1.0 / mu / h + 1e-9)) + 1 < MIN_POINTS:
        raise ValueError(f"grid spacing {h:.3g} does not resolve 1/mu with {MIN_POINTS} points")
    gmin = int(np.floor(mu * lo - OUTER)) + 1
    gmax = int(np.ceil(mu * hi + OUTER)) - 1
    idx = np.arange(gmin, gmax + 1)
    axes, tables, thetas, sbars = [], [[], [], []], [], []
    for _ in range(n):
        e, th, sb = _axis_tables(x, mu, idx)
        axes.append(x)
        for k in range(3):
            tables[k].append(e[k])
        thetas.append(th)
        sbars.append(sb)
    # explicit sum over all members on the tensor grid
    total = np.zeros((points,) * n)
    for g in np.ndindex(*(len(idx),) * n):
        m = np.ones(())
        for i, gi in enumerate(g):
            m = np.multiply.outer(m, tables[0][i][gi])
        total += m
    sum_error = float(np.abs(total - 1).max())
    theta_bar_min = float(np.prod([sb[0].min() for sb in sbars]))
    c2 = _product_bound([[float(np.abs(sbars[i][k]).max()) for i in range(n)] for k in range(3)],
                        n, mu)
    # per-axis sup norms; tensor derivatives are products of them
    c3 = _product_bound([[float(np.abs(tables[k][i]).max()) for i in range(n)] for k in range(3)],
                        n, mu, per_order=True)
    th1 = thetas[0]
    c1 = max(float(np.abs(th1[k]).max()) / mu**k for k in range(3))
    # neighbours: overlap of positive sets (open supports) and of closed supports
    pos = tables[0][0] > 0
    ov = (pos.astype(int) @ pos.T.astype(int)) > 0
    mid = len(idx) // 2
    count1 = int(ov[mid].sum())
    closed = np.abs(idx[:, None] - idx[None, :]) <= 2 * OUTER
    count1_closed = int(closed[mid].sum())
    # support check: eta_g must vanish outside the cube of half-width 3/(2 mu)
    leak = 0.0
    for a, gi in enumerate(idx):
        outside = np.abs(x - gi / mu) >= OUTER / mu
        if outside.any():
            leak = max(leak, float(np.abs(tables[0][0][a][outside]).max()))
    return PartitionFamily(mu=mu, n=n, axes=axes, indices=idx, tables=tables,
                           theta_bar_min=theta_bar_min, sum_error=sum_error, c1=c1, c2=c2,
                           c3=c3, c3_max=max(c3), neighbor_count=count1**n,
                           neighbor_count_closed=count1_closed**n, support_leak=leak,
                           meta={"points": points, "lo": lo, "hi": hi})


def c3_stability(mus=(2, 4, 8, 16), points: int = 256, n: int = 2) -> dict:
    fams = [eta_family(m, n=n, points=points) for m in mus]
    c3 = [f.c3_max for f in fams]
    return {"mus": list(mus), "c3": c3, "ratio": max(c3) / min(c3),
            "sum_error": max(f.sum_error for f in fams),
            "neighbor_count": max(f.neighbor_count for f in fams),
            "neighbor_count_closed": max(f.neighbor_count_closed for f in fams),
            "theta_bar_min": min(f.theta_bar_min for f in fams)}


def annulus_bound_check(fam: PartitionFamily) -> float:
    """max |d^k theta_g| / (c1 mu^k) on the annulus Q_{3/2mu} minus Q_{1/mu}, one axis.

    Inside Q_{1/mu} the derivatives of theta_g vanish identically, so the
    inequality is only informative on the annulus.
    """
    x = fam.axes[0]
    worst = 0.0
    for gi in fam.indices:
        r = np.abs(fam.mu * x - gi)
        ann = (r > PLATEAU) & (r < OUTER)
        if not ann.any():
            continue
        for k in (1, 2):
            d = np.abs(base_cutoff(fam.mu * x[ann] - gi, k)) * fam.mu**k
            worst = max(worst, float(d.max()) / (fam.c1 * fam.mu**k))
    return worst


# -- frozen versus variable coefficients ------------------------------------------------

def _d1(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    return np.gradient(f, h, axis=axis, edge_order=2)


def _apply_L(C: np.ndarray, u: np.ndarray, h: float) -> np.ndarray:
    """sum C^{pq}_{ab} d_p d_q u_b with C of shape (N, N, n, n) or (N, N, n, n, *grid)."""
    n = C.shape[2]
    out = np.zeros_like(u)
    for p in range(n):
        dp = _d1(u, h, 1 + p)
        for q in range(n):
            dpq = _d1(dp, h, 1 + q)
            if C.ndim == 4:
                out += np.einsum("ab,b...->a...", C[:, :, p, q], dpq)
            else:
                out += np.einsum("ab...,b...->a...", C[:, :, p, q], dpq)
    return out


@dataclass
class FrozenProbeReport:
    mu: float
    induced_k: float
    c2: float
    active: int
    max_ratio: float
    max_frozen_ratio: float
    per_cube: list


def induced_k(mu: float, c2: float) -> float:
    """k from the coupling c2 mu^2 = k / 2."""
    return 2.0 * c2 * mu**2


def frozen_error_probe(spec: SystemSpec, v: np.ndarray, mu: float, points: int = 128,
                       lo: float = -0.5, hi: float = 0.5, c2: float | None = None,
                       fam: PartitionFamily | None = None) -> FrozenProbeReport:
    """Compare L(eta_g v) with its frozen version L_g(eta_g v) on each active cube.

    ``v`` has shape (N, points, points) on [lo, hi]^2. The majorant on the
    cube Q_{2/mu}(x_g) is mu^{-1}|D^2 v| + mu|Dv| + mu^2|v| (L2 norms).
    The frozen-difference ratio omits the cutoff part by applying both
    operators to the same localised field.
    """
    if spec.kind != "tensor" or spec.n != 2:
        raise ValueError("frozen_error_probe needs a tensor spec with n = 2")
    if fam is None:
        fam = eta_family(mu, n=2, points=points, lo=lo, hi=hi)
    x = fam.axes[0]
    h = x[1] - x[0]
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    Cx = coefficient_tensor(spec, np.stack([X1, X2]))
    Cx = np.moveaxis(Cx, (0, 1), (-2, -1))  # (N, N, n, n, P, P)
    if c2 is None:
        c2 = fam.c2
    cell = h * h
    e0 = fam.tables[0]
    per_cube = []
    Dv = [_d1(v, h, 1 + p) for p in range(2)]
    D2v = [_d1(Dv[p], h, 1 + q) for p in range(2) for q in range(2)]
    Lv = _apply_L(Cx, v, h)
    for a, ga in enumerate(fam.indices):
        for b, gb in enumerate(fam.indices):
            eta = np.multiply.outer(e0[0][a], e0[1][b])
            u = eta * v
            if not np.any(u):
                continue
            xg = np.array([ga, gb]) / mu
            Cg = coefficient_tensor(spec, xg)
            Lu = _apply_L(Cx, u, h)
            Lgu = _apply_L(Cg, u, h)
            e_g = float(np.sqrt(np.sum(np.abs(Lu - Lgu) ** 2) * cell))
            cube = (np.abs(X1 - xg[0]) <= 2 / mu) & (np.abs(X2 - xg[1]) <= 2 / mu)
            nrm = lambda f: float(np.sqrt(np.sum(np.abs(f[..., cube]) ** 2) * cell))
            maj = (sum(nrm(d) for d in D2v) / mu + mu * sum(nrm(d) for d in Dv)
                   + mu**2 * nrm(v))
            # cutoff-commutator free part: eta L v versus eta L_g v
            fro = float(np.sqrt(np.sum(np.abs(eta * (Lv - _apply_L(Cg, v, h))) ** 2) * cell))
            if maj > 0:
                per_cube.append({"g": [int(ga), int(gb)], "e": e_g, "majorant": maj,
                                 "ratio": e_g / maj, "frozen_ratio": fro / maj})
    if not per_cube:
        raise ValueError("no active cubes: the field vanishes on the grid")
    return FrozenProbeReport(mu=mu, induced_k=induced_k(mu, c2), c2=c2, active=len(per_cube),
                             max_ratio=max(p["ratio"] for p in per_cube),
                             max_frozen_ratio=max(p["frozen_ratio"] for p in per_cube),
                             per_cube=per_cube)
