"""Upper half plane spectral factorisation of monic quadratic pencils.

For H(lam) = lam^2 + H1 lam + H2 with no real roots the factor S1 with
spectrum in the upper half plane satisfies H(lam) = (lam - S1*)(lam - S1).
It is computed from two resolvent moments on a contour around the upper
roots, ``S1 = I1 I0^{-1}``, each moment evaluated by the trapezoid rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .system import PD_TOL, AssumptionError, QuadraticPencil, spd_sqrt

ROOT_TOL = 1e-8
CLUSTER_TOL = 1e-6
QUAD_TOL = 1e-11
NODES_MIN = 64
NODES_CAP = 4096
# accept a single enclosing circle only if its trapezoid rule converges at
# least this fast (error ~ factor**nodes)
SINGLE_CIRCLE_FACTOR = 0.9


class ContourError(RuntimeError):
    """No admissible contour, or a contour too close to the spectrum."""


class QuadratureError(RuntimeError):
    """Trapezoid rule failed to stabilise within the node cap."""


@dataclass(frozen=True)
class ContourSpec:
    center: complex
    radius: float
    node_count: int = NODES_MIN
    margin: float = 0.0

    def nodes(self, count: int | None = None, offset: float = 0.0):
        """Quadrature nodes and weights for (2 pi i)^{-1} times the contour integral."""
        m = self.node_count if count is None else count
        th = 2 * np.pi * (np.arange(m) + offset) / m
        e = np.exp(1j * th)
        return self.center + self.radius * e, self.radius * e / m


def pencil_roots(pencil: QuadraticPencil) -> np.ndarray:
    """Eigenvalues of the companion matrix [[0, I], [-H2, -H1]]."""
    N = pencil.N
    comp = np.zeros((2 * N, 2 * N), dtype=complex)
    comp[:N, N:] = np.eye(N)
    comp[N:, :N] = -pencil.H2
    comp[N:, N:] = -pencil.H1
    try:
        roots = np.linalg.eigvals(comp)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"companion eigensolver failed: {exc}") from exc
    return roots[np.lexsort((roots.real, -roots.imag))]


def cluster_values(values, tol: float = CLUSTER_TOL) -> list[np.ndarray]:
    """Single-linkage clusters at relative gap ``tol`` (scale max(1, max|v|))."""
    v = np.asarray(values, complex)
    scale = max(1.0, float(np.max(np.abs(v)))) if v.size else 1.0
    labels = np.arange(len(v))
    for i in range(len(v)):
        for j in range(i + 1, len(v)):
            if abs(v[i] - v[j]) <= tol * scale and labels[i] != labels[j]:
                labels[labels == labels[j]] = labels[i]
    return [np.flatnonzero(labels == lab) for lab in dict.fromkeys(labels)]


def _split_upper(roots: np.ndarray, N: int):
    order = np.argsort(-roots.imag)
    up, down = roots[order[:N]], roots[order[N:]]
    scale = max(1.0, float(np.max(np.abs(roots))))
    if up.imag.min() <= ROOT_TOL * scale:
        raise ContourError(f"upper roots touch the real axis (min Im {up.imag.min():.3e})")
    return up, down


def _single_circle(targets, excluded, include_axis: bool):
    c = complex(np.mean(targets))
    r_in = float(np.max(np.abs(targets - c)))
    bounds = [np.abs(excluded - c).min()] if len(excluded) else []
    if include_axis:
        bounds.append(c.imag)
    r_out = float(min(bounds)) if bounds else max(2 * r_in, 1.0)
    if r_out <= r_in:
        return None
    radius = r_in + 0.5 * (r_out - r_in) if r_in > 0 else 0.5 * r_out
    return ContourSpec(c, radius, margin=min(radius - r_in, r_out - radius)), \
        max(r_in / radius, radius / r_out)


def margin_tol(targets, excluded) -> float:
    d = [t.imag for t in targets]
    if len(excluded):
        d.extend(np.abs(excluded[:, None] - targets[None, :]).min(axis=0))
    return 0.25 * float(min(d))


def choose_contour(roots, which="upper", N: int | None = None) -> ContourSpec:
    """Single circle around the target roots excluding all others.

    ``which`` is "upper" (the N roots of largest imaginary part) or a complex
    number naming a cluster center. Raises ContourError if no single circle
    separates the targets with the required margin.
    """
    circles = choose_contours(roots, which, N=N, allow_split=False)
    return circles[0]


def choose_contours(roots, which="upper", N: int | None = None,
                    allow_split: bool = True) -> list[ContourSpec]:
    roots = np.asarray(roots, complex)
    if isinstance(which, str) and which == "upper":
        N = len(roots) // 2 if N is None else N
        targets, excluded = _split_upper(roots, N)
    else:
        groups = cluster_values(roots)
        pick = min(groups, key=lambda g: abs(np.mean(roots[g]) - complex(which)))
        mask = np.zeros(len(roots), bool)
        mask[pick] = True
        targets, excluded = roots[mask], roots[~mask]
        if targets.imag.min() <= 0:
            raise ContourError("cluster touches the real axis")
    tol = margin_tol(targets, excluded)
    best = None
    for include_axis in (True, False):
        got = _single_circle(targets, excluded, include_axis)
        if got is not None and got[0].margin >= tol:
            best = got
            break
    if best is not None and (best[1] <= SINGLE_CIRCLE_FACTOR or not allow_split):
        return [best[0]]
    if not allow_split:
        raise ContourError("target roots are not separable by one circle at margin_tol")
    # one circle per cluster, each at half the distance to the nearest outside root
    out = []
    for g in cluster_values(targets):
        c = complex(np.mean(targets[g]))
        spread = float(np.max(np.abs(targets[g] - c)))
        others = np.concatenate([np.delete(targets, g), excluded])
        gap = float(np.abs(others - c).min())
        if gap <= 2 * spread:
            raise ContourError("cluster inseparable at margin_tol")
        radius = spread + 0.5 * (gap - spread)
        out.append(ContourSpec(c, radius, margin=min(radius - spread, gap - radius)))
    return out


def _moments(H1, H2, circles, count, offset=0.0):
    N = H1.shape[-1]
    I0 = np.zeros((N, N), complex)
    I1 = np.zeros((N, N), complex)
    eye = np.eye(N)
    for c in circles:
        z, w = c.nodes(count, offset)
        Hz = z[:, None, None] ** 2 * eye + z[:, None, None] * H1 + H2
        Rz = np.linalg.inv(Hz)
        I0 += np.einsum("m,mab->ab", w, Rz)
        I1 += np.einsum("m,mab->ab", w * z, Rz)
    return I0, I1


def riesz_S1(pencil: QuadraticPencil, contour, tol: float = QUAD_TOL,
             cap: int = NODES_CAP, info: dict | None = None) -> np.ndarray:
    """S1 = I1 I0^{-1} with node doubling until the change is below ``tol``."""
    circles = [contour] if isinstance(contour, ContourSpec) else list(contour)
    count = max(NODES_MIN, max(c.node_count for c in circles))
    I0, I1 = _moments(pencil.H1, pencil.H2, circles, count)
    S_old = None
    change = np.inf
    while True:
        cond = np.linalg.cond(I0)
        if not np.isfinite(cond) or cond > 1e14:
            raise ContourError(f"zeroth moment is singular (cond {cond:.2e})")
        S = I1 @ np.linalg.inv(I0)
        if S_old is not None:
            change = np.linalg.norm(S - S_old) / max(np.linalg.norm(S), 1.0)
            if change <= tol:
                break
        if 2 * count > cap:
            if change > 1e3 * tol:
                raise QuadratureError(f"node cap {cap} reached with change {change:.2e}")
            break
        # the doubled rule reuses the current nodes: add the midpoints
        J0, J1 = _moments(pencil.H1, pencil.H2, circles, count, offset=0.5)
        I0, I1 = 0.5 * (I0 + J0), 0.5 * (I1 + J1)
        count *= 2
        S_old = S
    if info is not None:
        info.update(node_count=count, quad_change=float(change))
    return S


@dataclass
class YZSplit:
    Y: np.ndarray
    Z: np.ndarray
    z_min_eig: float
    z_sym_defect: float
    z_positive: bool


def split_YZ(S1: np.ndarray, pd_tol: float = PD_TOL) -> YZSplit:
    """Elementwise real and imaginary parts; positivity of Z is a soft flag."""
    Y = S1.real.copy()
    Z = S1.imag.copy()
    Zs = 0.5 * (Z + Z.T)
    zmin = float(np.linalg.eigvalsh(Zs).min())
    scale = max(1.0, float(np.linalg.norm(Z)))
    return YZSplit(Y=Y, Z=Z, z_min_eig=zmin,
                   z_sym_defect=float(np.linalg.norm(Z - Z.T)) / scale,
                   z_positive=zmin > pd_tol * scale)


@dataclass
class BData:
    B: np.ndarray
    B_R: np.ndarray
    B_I: np.ndarray
    Z_sqrt: np.ndarray
    Z_inv_sqrt: np.ndarray
    sym_defect: float


def build_B(Y: np.ndarray, Z: np.ndarray) -> BData:
    """B_R = Re(Z^{1/2} (Y + iZ) Z^{-1/2}), B_I = Z."""
    Zs, Zis = spd_sqrt(0.5 * (Z + Z.T))
    S1 = Y + 1j * Z
    B_R = np.real(Zs @ S1 @ Zis)
    B = B_R + 1j * Z
    scale = max(1.0, float(np.linalg.norm(B)))
    return BData(B=B, B_R=B_R, B_I=Z.copy(), Z_sqrt=Zs, Z_inv_sqrt=Zis,
                 sym_defect=float(np.linalg.norm(B - B.T)) / scale)


@dataclass
class PencilFactorization:
    S1: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    Z_sqrt: np.ndarray
    Z_inv_sqrt: np.ndarray
    B: np.ndarray
    B_R: np.ndarray
    B_I: np.ndarray
    roots: np.ndarray
    residuals: dict = field(default_factory=dict)
    pencil: QuadraticPencil | None = None

    def eigB(self) -> np.ndarray:
        return np.linalg.eigvals(self.B)


def _match_multisets(a, b) -> float:
    """Max distance under the best greedy pairing of two equal-size multisets."""
    b = list(b)
    worst = 0.0
    for v in a:
        d = [abs(v - w) for w in b]
        i = int(np.argmin(d))
        worst = max(worst, d[i])
        b.pop(i)
    return worst


def verify_factorizations(pencil: QuadraticPencil, fac: PencilFactorization,
                          seed: int = 0) -> dict:
    S1, B, Z = fac.S1, fac.B, fac.Z
    S1h = np.conj(S1.T)
    scale1 = max(1.0, float(np.linalg.norm(pencil.H1)))
    scale2 = max(1.0, float(np.linalg.norm(pencil.H2)))
    res = {
        "H1_residual": float(np.linalg.norm(pencil.H1 + S1 + S1h)) / scale1,
        "H2_residual": float(np.linalg.norm(pencil.H2 - S1h @ S1)) / scale2,
    }
    rng = np.random.default_rng(seed)
    lams = rng.normal(size=5) + 1j * rng.normal(size=5)
    lams *= max(1.0, float(np.max(np.abs(fac.roots))))
    Zi = np.linalg.inv(0.5 * (Z + Z.T))
    worst = 0.0
    eye = np.eye(pencil.N)
    for lam in lams:
        lhs = fac.Z_inv_sqrt @ pencil(lam) @ fac.Z_inv_sqrt
        rhs = (lam * eye - np.conj(B.T)) @ Zi @ (lam * eye - B)
        worst = max(worst, float(np.linalg.norm(lhs - rhs)) / max(1.0, float(np.linalg.norm(lhs))))
    res["calH_residual"] = worst
    eS = np.linalg.eigvals(S1)
    eB = np.linalg.eigvals(B)
    res["halfplane_margin"] = float(min(eS.imag.min(), eB.imag.min()))
    res["z_min_eig"] = float(np.linalg.eigvalsh(0.5 * (Z + Z.T)).min())
    res["similarity_gap"] = _match_multisets(eS, eB)
    up = fac.roots[np.argsort(-fac.roots.imag)[: pencil.N]]
    res["root_gap"] = _match_multisets(eS, up)
    res["B_sym_defect"] = float(np.linalg.norm(B - B.T)) / max(1.0, float(np.linalg.norm(B)))
    res["B_R_sym_defect"] = float(np.linalg.norm(fac.B_R - fac.B_R.T)) / max(1.0, float(np.linalg.norm(B)))
    return res


def factorize(pencil: QuadraticPencil, seed: int = 0) -> PencilFactorization:
    """Full pipeline: roots, contour, S1, (Y, Z), B and residual certificates."""
    roots = pencil_roots(pencil)
    scale = max(np.linalg.norm(pencil.H1), np.linalg.norm(pencil.H2))
    if scale == 0:
        raise AssumptionError("zero pencil (xi' = 0 is excluded)")
    circles = choose_contours(roots, "upper", N=pencil.N)
    info: dict = {}
    S1 = riesz_S1(pencil, circles, info=info)
    yz = split_YZ(S1)
    if not yz.z_positive:
        raise AssumptionError(f"Im S1 is not positive definite (min eig {yz.z_min_eig:.3e})")
    bd = build_B(yz.Y, yz.Z)
    fac = PencilFactorization(S1=S1, Y=yz.Y, Z=yz.Z, Z_sqrt=bd.Z_sqrt, Z_inv_sqrt=bd.Z_inv_sqrt,
                              B=bd.B, B_R=bd.B_R, B_I=bd.B_I, roots=roots, pencil=pencil)
    fac.residuals = verify_factorizations(pencil, fac, seed=seed)
    fac.residuals.update(info, n_circles=len(circles), z_sym_defect=yz.z_sym_defect)
    return fac
