"""Riesz projections of B, the two further assumptions and related diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pencil import (CLUSTER_TOL, NODES_CAP, NODES_MIN, QUAD_TOL, ContourError, ContourSpec,
                     QuadratureError, cluster_values, factorize, pencil_roots)
from .sampling import refine_around, sphere_points
from .system import QuadraticPencil, SystemSpec, build_frame_blocks, pencil_at, reduce_to_pencil

PROJ_TOL = 1e-8
DIAG_TOL = 1e-7
RANK_TOL = 1e-8
COMM_TOL = 1e-10
RESOLVENT_CAP = 1e10


def riesz_projection(B: np.ndarray, contour: ContourSpec, tol: float = QUAD_TOL,
                     cap: int = NODES_CAP) -> np.ndarray:
    """(2 pi i)^{-1} times the contour integral of (zeta - B)^{-1}, trapezoid rule."""
    N = B.shape[0]
    eye = np.eye(N)

    def partial(count, offset):
        z, w = contour.nodes(count, offset)
        try:
            R = np.linalg.inv(z[:, None, None] * eye - B)
        except np.linalg.LinAlgError:
            raise ContourError("a contour node coincides with an eigenvalue") from None
        peak = float(np.max(np.linalg.norm(R, axis=(1, 2)))) * contour.radius
        if not np.isfinite(peak) or peak > RESOLVENT_CAP:
            raise ContourError(f"contour passes too close to the spectrum (resolvent {peak:.2e})")
        return np.einsum("m,mab->ab", w, R)

    count = max(NODES_MIN, contour.node_count)
    P = partial(count, 0.0)
    while True:
        Q = 0.5 * (P + partial(count, 0.5))
        count *= 2
        change = np.linalg.norm(Q - P) / max(1.0, float(np.linalg.norm(Q)))
        P = Q
        if change <= tol:
            return P
        if 2 * count > cap:
            if change > 1e3 * tol:
                raise QuadratureError(f"projection did not converge (change {change:.2e})")
            return P


def cluster_contours(eigs: np.ndarray, cluster_tol: float = CLUSTER_TOL):
    """One circle per eigenvalue cluster, radius half the gap to the rest."""
    groups = cluster_values(eigs, cluster_tol)
    scale = max(1.0, float(np.max(np.abs(eigs))))
    out = []
    for g in groups:
        c = complex(np.mean(eigs[g]))
        spread = float(np.max(np.abs(eigs[g] - c)))
        others = np.delete(eigs, g)
        if len(others):
            gap = float(np.abs(others - c).min())
            radius = spread + 0.5 * (gap - spread)
            margin = radius - spread
        else:
            radius = max(4 * spread, 0.25 * scale)
            margin = radius - spread
        out.append((g, ContourSpec(c, radius, margin=margin)))
    return out


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    multiplicities: list
    projections: list
    max_projection_norm: float
    diagonalizable: bool
    reconstruction_residual: float
    identity_residual: float
    idempotency_residual: float
    orthogonality_residual: float
    commutation_residual: float
    trace_defect: float
    min_gap: float

    def algebra_ok(self, tol: float = PROJ_TOL) -> bool:
        return max(self.idempotency_residual, self.identity_residual,
                   self.orthogonality_residual, self.commutation_residual) <= tol \
            and self.trace_defect <= 1e-6


def eigen_structure(B: np.ndarray, cluster_tol: float = CLUSTER_TOL,
                    diag_tol: float = DIAG_TOL) -> SpectralReport:
    B = np.asarray(B, complex)
    N = B.shape[0]
    eigs = np.linalg.eigvals(B)
    circles = cluster_contours(eigs, cluster_tol)
    lams, mults, projs = [], [], []
    for g, c in circles:
        P = riesz_projection(B, c)
        lams.append(c.center)
        mults.append(len(g))
        projs.append(P)
    nB = max(1.0, float(np.linalg.norm(B)))
    recon = sum(l * P for l, P in zip(lams, projs))
    pn = [float(np.linalg.norm(P, 2)) for P in projs]
    idem = max(float(np.linalg.norm(P @ P - P)) / max(1.0, p * p) for P, p in zip(projs, pn))
    orth = 0.0
    for i in range(len(projs)):
        for j in range(len(projs)):
            if i != j:
                orth = max(orth, float(np.linalg.norm(projs[i] @ projs[j])) / max(1.0, pn[i] * pn[j]))
    comm = max(float(np.linalg.norm(B @ P - P @ B)) / (nB * max(1.0, p)) for P, p in zip(projs, pn))
    tr = [np.trace(P) for P in projs]
    trace_defect = max(abs(t - round(t.real)) for t in tr)
    trace_defect = max(trace_defect, max(abs(round(t.real) - m) for t, m in zip(tr, mults)))
    gaps = [abs(a - b) for i, a in enumerate(lams) for b in lams[i + 1:]]
    rres = float(np.linalg.norm(recon - B))
    return SpectralReport(
        eigenvalues=np.array(lams), multiplicities=mults, projections=projs,
        max_projection_norm=max(pn),
        diagonalizable=rres <= diag_tol * nB,
        reconstruction_residual=rres,
        identity_residual=float(np.linalg.norm(sum(projs) - np.eye(N))) / max(1.0, max(pn)),
        idempotency_residual=idem, orthogonality_residual=orth,
        commutation_residual=comm, trace_defect=float(trace_defect),
        min_gap=float(min(gaps)) / nB if gaps else np.inf)


@dataclass
class AuditReport:
    x: list
    samples: np.ndarray
    sup_projection_norm: float
    sup_location: list
    diagonalizable: list
    all_diagonalizable: bool
    kernel_sums: list
    min_gap: float
    excluded: list = field(default_factory=list)
    refinement: list = field(default_factory=list)
    algebra_worst: float = 0.0
    trace_worst: float = 0.0
    algebra_ok: bool = True
    # per-sample flag: some eigenvalue of B has multiplicity > 1
    degenerate: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "x": self.x, "n_samples": int(len(self.samples)),
            "sup_projection_norm": self.sup_projection_norm,
            "sup_location": self.sup_location,
            "all_diagonalizable": self.all_diagonalizable,
            "n_not_diagonalizable": int(sum(not d for d in self.diagonalizable)),
            "kernel_sums": sorted(set(self.kernel_sums)),
            "min_gap": self.min_gap, "excluded": self.excluded,
            "refinement": self.refinement,
            "projector_algebra_worst": self.algebra_worst,
            "trace_defect_worst": self.trace_worst,
            "projector_algebra_ok": self.algebra_ok,
            "n_degenerate": int(sum(self.degenerate)),
            "degeneracy_mask": [bool(d) for d in self.degenerate],
        }


def audit_further_assumptions(spec: SystemSpec, x, sphere_samples: int = 64,
                              cluster_tol: float = CLUSTER_TOL, seed: int = 0) -> AuditReport:
    """Sweep the unit xi'-sphere and check assumptions (i) and (ii) at x."""
    x = np.asarray(x, float)
    pts = sphere_points(spec.n - 1, sphere_samples, seed=seed)

    def run(points):
        rows = []
        for xp in points:
            try:
                fac = factorize(pencil_at(spec, x, xp))
                rep = eigen_structure(fac.B, cluster_tol)
                ks, _, _ = kernel_dimension_sum_pencil(fac.pencil)
                rows.append((xp, rep, ks, None))
            except (ContourError, QuadratureError, RuntimeError, ValueError) as exc:
                rows.append((xp, None, None, str(exc)))
        return rows

    rows = run(pts)
    small = [r[0] for r in rows if r[1] is not None and r[1].min_gap < 10 * cluster_tol]
    trace = []
    if small:
        extra = refine_around(pts, np.array(small), factor=4)
        trace.append({"centers": len(small), "added": int(len(extra))})
        rows += run(extra)
    good = [r for r in rows if r[1] is not None]
    if not good:
        raise RuntimeError("factorisation failed at every sample")
    sup_row = max(good, key=lambda r: r[1].max_projection_norm)
    algebra = [max(r[1].idempotency_residual, r[1].identity_residual,
                   r[1].orthogonality_residual, r[1].commutation_residual) for r in good]
    return AuditReport(
        x=x.tolist(), samples=np.array([r[0] for r in rows]),
        sup_projection_norm=sup_row[1].max_projection_norm,
        sup_location=np.asarray(sup_row[0]).tolist(),
        diagonalizable=[r[1].diagonalizable for r in good],
        all_diagonalizable=all(r[1].diagonalizable for r in good),
        kernel_sums=[r[2] for r in good],
        min_gap=min(r[1].min_gap for r in good),
        excluded=[{"xi_prime": np.asarray(r[0]).tolist(), "reason": r[3]} for r in rows if r[1] is None],
        refinement=trace,
        algebra_worst=max(algebra),
        trace_worst=max(r[1].trace_defect for r in good),
        algebra_ok=all(r[1].algebra_ok() for r in good),
        degenerate=[max(r[1].multiplicities) > 1 for r in good])


def kernel_dimension_sum_pencil(pencil: QuadraticPencil, rank_tol: float = RANK_TOL):
    """(sum of kernel dimensions, ambiguous flag, per-root detail)."""
    roots = pencil_roots(pencil)
    total = 0
    ambiguous = False
    detail = []
    for g in cluster_values(roots):
        lam = complex(np.mean(roots[g]))
        H = pencil(np.array(lam))
        s = np.linalg.svd(H, compute_uv=False)
        scale = max(1.0, float(np.linalg.norm(pencil.H1, 2)) * abs(lam),
                    float(np.linalg.norm(pencil.H2, 2)), abs(lam) ** 2)
        thr = rank_tol * scale
        dim = int(np.sum(s <= thr))
        if np.any((s > thr / 10) & (s < thr * 10)):
            ambiguous = True
        total += dim
        detail.append({"root": [lam.real, lam.imag], "multiplicity": len(g), "kernel_dim": dim})
    return total, ambiguous, detail


def kernel_dimension_sum(spec: SystemSpec, x, xi, rank_tol: float = RANK_TOL):
    """Sum over the roots lam of det M(x, lam e1 + xi) of dim Ker."""
    xi = np.asarray(xi, float)
    if spec.kind == "tensor":
        eta = np.zeros(spec.n)
        eta[0] = 1.0
        pencil = reduce_to_pencil(build_frame_blocks(spec, x, eta, xi))
    else:
        # the xi1 component only shifts lam and leaves kernel dimensions unchanged
        pencil = pencil_at(spec, x, xi[1:])
    return kernel_dimension_sum_pencil(pencil, rank_tol)


@dataclass
class CommutativeFactor:
    G: np.ndarray
    Sigma1: np.ndarray
    Sigma2: np.ndarray
    B: np.ndarray
    commutator_norm: float
    diagonalization_residual: float
    discriminant_max: float


def commutativity_path(pencil: QuadraticPencil, comm_tol: float = COMM_TOL):
    """Commutative factorisation of a Hermitian pencil, or (None, commutator)."""
    H1, H2 = pencil.H1, pencil.H2
    C = H1 @ H2 - H2 @ H1
    cn = float(np.linalg.norm(C))
    n1, n2 = float(np.linalg.norm(H1)), float(np.linalg.norm(H2))
    if cn > comm_tol * max(n1 * n2, 1e-300):
        return None, cn
    # a generic combination has the common eigenbasis as its own
    c = 0.5772156649 * n2 / n1 if n1 > 0 else 0.0
    Hc = H2 + c * H1
    _, G = np.linalg.eigh(0.5 * (Hc + np.conj(Hc.T)))
    Gh = np.conj(G.T)
    D1, D2 = Gh @ H1 @ G, Gh @ H2 @ G
    s1, s2 = np.real(np.diag(D1)), np.real(np.diag(D2))
    resid = (np.linalg.norm(D1 - np.diag(s1)) + np.linalg.norm(D2 - np.diag(s2))) / max(1.0, n1 + n2)
    if resid > 1e-8:
        raise RuntimeError(f"simultaneous diagonalisation failed (residual {resid:.2e})")
    disc = s1**2 - 4 * s2
    if np.any(disc >= 0):
        raise RuntimeError("Sigma1^2 - 4 Sigma2 is not negative definite")
    D = -s1 / 2 + 1j * np.sqrt(-disc) / 2
    B = (G * D) @ G.T if np.isrealobj(G) or np.allclose(G.imag, 0) else (G * D) @ Gh
    return CommutativeFactor(G=G, Sigma1=s1, Sigma2=s2, B=B, commutator_norm=cn,
                             diagonalization_residual=float(resid),
                             discriminant_max=float(disc.max())), cn


def eigenvector_transport(spec: SystemSpec, path, xi_prime, target: complex, steps: int = 64):
    """Follow the eigenvector of B nearest ``target`` along x = path(s), s in [0, 1].

    Returns the projectors at both ends, the largest projector jump between
    consecutive steps and the overlap <v(0), v(1)> of the phase-continued
    normalised eigenvector (-1 signals a reversed orientation).
    """
    prev = None
    first = None
    P0 = P1 = None
    jump = 0.0
    Pprev = None
    for s in np.linspace(0.0, 1.0, steps + 1):
        B = factorize(pencil_at(spec, path(s), xi_prime)).B
        w, V = np.linalg.eig(B)
        i = int(np.argmin(np.abs(w - target)))
        v = V[:, i] / np.linalg.norm(V[:, i])
        if prev is not None:
            ph = np.vdot(prev, v)
            v = v * np.conj(ph) / abs(ph)
        else:
            big = np.argmax(np.abs(v))
            v = v * np.conj(v[big]) / abs(v[big])
            first = v
        rep = eigen_structure(B)
        k = int(np.argmin(np.abs(rep.eigenvalues - target)))
        P = rep.projections[k]
        if Pprev is not None:
            jump = max(jump, float(np.linalg.norm(P - Pprev)))
        Pprev = P
        P0 = P if P0 is None else P0
        P1 = P
        prev = v
    return {"P_start": P0, "P_end": P1, "max_step_jump": jump,
            "overlap": complex(np.vdot(first, prev))}


def commutativity_verdict(spec: SystemSpec, x, sphere_samples: int = 16, seed: int = 0) -> dict:
    """Whether H1 and H2 commute (with a valid commutative factor) on sampled xi'."""
    pts = sphere_points(spec.n - 1, sphere_samples, seed=seed)
    worst = 0.0
    ok = True
    for xp in pts:
        pencil = pencil_at(spec, x, xp)
        try:
            fac, cn = commutativity_path(pencil)
        except RuntimeError:
            fac, cn = None, np.inf
        scale = max(float(np.linalg.norm(pencil.H1) * np.linalg.norm(pencil.H2)), 1e-300)
        worst = max(worst, cn / scale)
        ok = ok and fac is not None
    return {"commutative": bool(ok), "max_relative_commutator": float(worst),
            "n_samples": int(len(pts))}
