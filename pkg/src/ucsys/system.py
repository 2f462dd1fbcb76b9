"""System specifications, basic assumption checks and frozen symbol blocks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.optimize import minimize

from .expr import Expr, ExprError, evaluate_matrix, parse_entry_expression, to_source
from .sampling import sphere_points

SYM_TOL = 1e-12
PD_TOL = 1e-10
INDEP_TOL = 1e-6
BLOCKS_TOL = 1e-10

KINDS = ("tensor", "pencil", "YZ")


class SpecError(ValueError):
    """Schema or consistency violation in a system document."""


class AssumptionError(RuntimeError):
    """A structural assumption (ellipticity, positivity, independence) failed."""


@dataclass
class SystemSpec:
    """Coefficients of an N x N second order system in n space dimensions.

    Tensor kind stores ``C[a][b][j][l]`` (0-based) as trees over x. Pencil
    kind stores ``H1``, ``H2`` and YZ kind stores ``Y``, ``Z``, all as trees
    over (x, xi') with xi' = (xi2, ..., xin).
    """

    n: int
    N: int
    kind: str
    C: list | None = None
    H1: list | None = None
    H2: list | None = None
    Y: list | None = None
    Z: list | None = None
    lo: np.ndarray = None
    hi: np.ndarray = None
    name: str = ""

    def __post_init__(self):
        if self.n < 2 or self.N < 1:
            raise SpecError(f"need n >= 2 and N >= 1, got n={self.n}, N={self.N}")
        if self.kind not in KINDS:
            raise SpecError(f"unknown kind {self.kind!r}")
        self.lo = np.full(self.n, -0.5) if self.lo is None else np.asarray(self.lo, float)
        self.hi = np.full(self.n, 0.5) if self.hi is None else np.asarray(self.hi, float)
        if self.lo.shape != (self.n,) or self.hi.shape != (self.n,):
            raise SpecError("domain bounds must have length n")
        if np.any(self.hi <= self.lo):
            raise SpecError("domain must satisfy lo < hi")

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def matrices(self) -> dict[str, list]:
        if self.kind == "tensor":
            return {}
        if self.kind == "pencil":
            return {"H1": self.H1, "H2": self.H2}
        return {"Y": self.Y, "Z": self.Z}


# -- construction -------------------------------------------------------------------

def _lift(e) -> Expr:
    if isinstance(e, Expr):
        return e
    if isinstance(e, str):
        return parse_entry_expression(e)
    return Expr.const(float(e))


def tensor_spec(C, n: int, N: int, lo=None, hi=None, name: str = "") -> SystemSpec:
    """Tensor spec from a nested array-like ``C[a][b][j][l]`` of trees or numbers."""
    entries = [[[[_lift(C[a][b][j][l]) for l in range(n)] for j in range(n)]
                for b in range(N)] for a in range(N)]
    return SystemSpec(n=n, N=N, kind="tensor", C=entries, lo=lo, hi=hi, name=name)


def matrix_spec(kind: str, first, second, n: int, lo=None, hi=None, name: str = "") -> SystemSpec:
    m1 = [[_lift(e) for e in row] for row in first]
    m2 = [[_lift(e) for e in row] for row in second]
    N = len(m1)
    if any(len(r) != N for r in m1) or len(m2) != N or any(len(r) != N for r in m2):
        raise SpecError("matrix entries must be square with matching size")
    if kind == "pencil":
        return SystemSpec(n=n, N=N, kind=kind, H1=m1, H2=m2, lo=lo, hi=hi, name=name)
    if kind == "YZ":
        return SystemSpec(n=n, N=N, kind=kind, Y=m1, Z=m2, lo=lo, hi=hi, name=name)
    raise SpecError(f"matrix kind must be 'pencil' or 'YZ', got {kind!r}")


def _require(doc: dict, key: str, typ, path: str):
    if key not in doc:
        raise SpecError(f"{path}: missing key {key!r}")
    val = doc[key]
    if not isinstance(val, typ) or isinstance(val, bool):
        raise SpecError(f"{path}.{key}: expected {typ.__name__}")
    return val


def _parse_matrix(rows, N: int, n: int, path: str, allow_x: bool = True):
    if not isinstance(rows, list) or len(rows) != N:
        raise SpecError(f"{path}: expected {N} rows")
    out = []
    for a, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != N:
            raise SpecError(f"{path}[{a}]: expected {N} entries")
        parsed = []
        for b, src in enumerate(row):
            if not isinstance(src, (str, int, float)) or isinstance(src, bool):
                raise SpecError(f"{path}[{a}][{b}]: entry must be a string or number")
            try:
                parsed.append(parse_entry_expression(str(src), dim=n))
            except ExprError as exc:
                raise SpecError(f"{path}[{a}][{b}]: {exc}") from exc
        out.append(parsed)
    return out


def spec_from_dict(doc: dict[str, Any]) -> SystemSpec:
    """Build a spec from the input document schema (1-based tensor indices)."""
    if not isinstance(doc, dict):
        raise SpecError("$: document must be an object")
    n = _require(doc, "n", int, "$")
    N = _require(doc, "N", int, "$")
    kind = _require(doc, "kind", str, "$")
    if kind not in KINDS:
        raise SpecError(f"$.kind: must be one of {KINDS}")
    if n < 2 or N < 1:
        raise SpecError("$: need n >= 2 and N >= 1")
    lo = hi = None
    if "domain" in doc:
        dom = doc["domain"]
        if not isinstance(dom, dict):
            raise SpecError("$.domain: expected object")
        lo = _require(dom, "lo", list, "$.domain")
        hi = _require(dom, "hi", list, "$.domain")
        if len(lo) != n or len(hi) != n:
            raise SpecError("$.domain: lo/hi must have length n")
    name = str(doc.get("name", ""))
    if kind == "tensor":
        block = _require(doc, "tensor", dict, "$")
        items = _require(block, "C", list, "$.tensor")
        zero = Expr.const(0.0)
        C = [[[[zero] * n for _ in range(n)] for _ in range(N)] for _ in range(N)]
        seen = set()
        for i, item in enumerate(items):
            path = f"$.tensor.C[{i}]"
            if not isinstance(item, dict):
                raise SpecError(f"{path}: expected object")
            idx = []
            for key, bound in (("alpha", N), ("beta", N), ("j", n), ("l", n)):
                v = _require(item, key, int, path)
                if not 1 <= v <= bound:
                    raise SpecError(f"{path}.{key}: index {v} outside 1..{bound}")
                idx.append(v - 1)
            if tuple(idx) in seen:
                raise SpecError(f"{path}: duplicate entry")
            seen.add(tuple(idx))
            src = item.get("expr")
            if not isinstance(src, (str, int, float)) or isinstance(src, bool):
                raise SpecError(f"{path}.expr: expected string")
            try:
                e = parse_entry_expression(str(src), dim=n)
            except ExprError as exc:
                raise SpecError(f"{path}.expr: {exc}") from exc
            if any(v[0] == "xi" for v in e.variables()):
                raise SpecError(f"{path}.expr: tensor entries may depend on x only")
            a, b, j, l = idx
            C[a][b][j][l] = e
        return SystemSpec(n=n, N=N, kind=kind, C=C, lo=lo, hi=hi, name=name)
    block = _require(doc, kind, dict, "$")
    keys = ("H1", "H2") if kind == "pencil" else ("Y", "Z")
    m1 = _parse_matrix(_require(block, keys[0], list, f"$.{kind}"), N, n, f"$.{kind}.{keys[0]}")
    m2 = _parse_matrix(_require(block, keys[1], list, f"$.{kind}"), N, n, f"$.{kind}.{keys[1]}")
    return matrix_spec(kind, m1, m2, n, lo=lo, hi=hi, name=name)


def load_system(path_or_doc) -> SystemSpec:
    """Load a spec from a JSON path, JSON text or an already-decoded dict."""
    if isinstance(path_or_doc, dict):
        return spec_from_dict(path_or_doc)
    text = str(path_or_doc)
    if not text.lstrip().startswith("{"):
        try:
            text = Path(text).read_text(encoding="utf-8")
        except OSError as exc:
            raise SpecError(f"cannot read {path_or_doc}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON: {exc}") from exc
    return spec_from_dict(doc)


def spec_to_dict(spec: SystemSpec) -> dict[str, Any]:
    """Inverse of :func:`spec_from_dict`; zero tensor entries are omitted."""
    doc: dict[str, Any] = {"n": spec.n, "N": spec.N, "kind": spec.kind}
    if spec.name:
        doc["name"] = spec.name
    if spec.kind == "tensor":
        items = []
        for a in range(spec.N):
            for b in range(spec.N):
                for j in range(spec.n):
                    for l in range(spec.n):
                        e = spec.C[a][b][j][l]
                        if not e.is_const(0.0):
                            items.append({"alpha": a + 1, "beta": b + 1, "j": j + 1,
                                          "l": l + 1, "expr": to_source(e)})
        doc["tensor"] = {"C": items}
    else:
        doc[spec.kind] = {k: [[to_source(e) for e in row] for row in m]
                          for k, m in spec.matrices().items()}
    doc["domain"] = {"lo": spec.lo.tolist(), "hi": spec.hi.tolist()}
    return doc


def dump_system(spec: SystemSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2)


# -- numeric evaluation ------------------------------------------------------------

def coefficient_tensor(spec: SystemSpec, x) -> np.ndarray:
    """Numeric C at x; x has shape (n, ...) and the result (..., N, N, n, n)."""
    if spec.kind != "tensor":
        raise SpecError("coefficient tensor requires tensor kind")
    x = [np.asarray(v, float) for v in x]
    flat = [spec.C[a][b][j][l] for a in range(spec.N) for b in range(spec.N)
            for j in range(spec.n) for l in range(spec.n)]
    vals = [np.asarray(e.evaluate(x, None), float) for e in flat]
    shape = np.broadcast_shapes(*(v.shape for v in vals))
    out = np.empty(shape + (spec.N * spec.N * spec.n * spec.n,))
    for i, v in enumerate(vals):
        out[..., i] = v
    return out.reshape(shape + (spec.N, spec.N, spec.n, spec.n))


def assemble_symbol(spec: SystemSpec, x, zeta) -> np.ndarray:
    """M_ab = sum_jl C^{jl}_ab(x) zeta_j zeta_l (zeta may be complex or batched)."""
    C = coefficient_tensor(spec, x)
    zeta = np.asarray(zeta)
    return np.einsum("...abjl,...j,...l->...ab", C, zeta, zeta)


@dataclass
class SymbolBlocks:
    T: np.ndarray
    A: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    frame_residual: float = 0.0


def build_frame_blocks(spec: SystemSpec, x, eta, xi, seed: int = 0) -> SymbolBlocks:
    eta = np.asarray(eta, float)
    xi = np.asarray(xi, float)
    ne, nx = np.linalg.norm(eta), np.linalg.norm(xi)
    if ne == 0 or nx == 0:
        raise AssumptionError("eta and xi must be nonzero")
    cross = np.sqrt(max(0.0, 1.0 - (eta @ xi / (ne * nx)) ** 2))
    if cross < INDEP_TOL:
        raise AssumptionError(f"xi is parallel to eta (sin angle {cross:.2e})")
    C = coefficient_tensor(spec, x)
    T = np.einsum("abjl,j,l->ab", C, eta, eta)
    R = np.einsum("abjl,j,l->ab", C, eta, xi)
    Q = np.einsum("abjl,j,l->ab", C, xi, xi)
    A = R + R.T
    rng = np.random.default_rng(seed)
    worst = 0.0
    for lam in rng.normal(size=5):
        M = np.einsum("abjl,j,l->ab", C, lam * eta + xi, lam * eta + xi)
        P = T * lam**2 + A * lam + Q
        worst = max(worst, np.linalg.norm(M - P) / max(np.linalg.norm(M), 1e-300))
    if worst > BLOCKS_TOL:
        raise AssumptionError(f"frame identity residual {worst:.2e} exceeds tolerance")
    return SymbolBlocks(T=T, A=A, R=R, Q=Q, eta=eta, xi=xi, frame_residual=worst)


def spd_sqrt(T: np.ndarray, tol: float = PD_TOL) -> tuple[np.ndarray, np.ndarray]:
    """(T^{1/2}, T^{-1/2}) of a Hermitian positive definite matrix (batched)."""
    Th = 0.5 * (T + np.conj(np.swapaxes(T, -1, -2)))
    w, V = np.linalg.eigh(Th)
    if np.any(w <= tol):
        raise AssumptionError(f"matrix not positive definite (min eigenvalue {w.min():.3e})")
    Vh = np.conj(np.swapaxes(V, -1, -2))
    root = (V * np.sqrt(w)[..., None, :]) @ Vh
    iroot = (V / np.sqrt(w)[..., None, :]) @ Vh
    return root, iroot


@dataclass
class QuadraticPencil:
    """Monic pencil H(lam) = lam^2 I + H1 lam + H2."""

    H1: np.ndarray
    H2: np.ndarray
    provenance: dict = field(default_factory=dict)
    hermitian: bool = False

    @property
    def N(self) -> int:
        return self.H1.shape[-1]

    def __call__(self, lam):
        lam = np.asarray(lam)
        eye = np.eye(self.N)
        return lam[..., None, None] ** 2 * eye + lam[..., None, None] * self.H1 + self.H2


def reduce_to_pencil(blocks: SymbolBlocks) -> QuadraticPencil:
    _, iroot = spd_sqrt(blocks.T)
    H1 = iroot @ blocks.A @ iroot
    H2 = iroot @ blocks.Q @ iroot
    return QuadraticPencil(H1=0.5 * (H1 + H1.T), H2=0.5 * (H2 + H2.T),
                           provenance={"eta": blocks.eta.tolist(), "xi": blocks.xi.tolist()},
                           hermitian=True)


def _xi_vars(spec: SystemSpec, xi_prime):
    """Bind xi1 = 0 and xi2..xin to the components of xi_prime (batched on axis -1)."""
    xp = np.asarray(xi_prime, float)
    if xp.shape[-1] != spec.n - 1:
        raise SpecError(f"xi' must have {spec.n - 1} components")
    return [np.zeros(xp.shape[:-1])] + [xp[..., j] for j in range(spec.n - 1)]


def matrices_at(spec: SystemSpec, x, xi_prime) -> tuple[np.ndarray, np.ndarray]:
    """Numeric (H1, H2) or (Y, Z) for matrix kinds; batched over xi_prime."""
    xv = [np.asarray(v, float) for v in np.asarray(x, float)]
    xiv = _xi_vars(spec, xi_prime)
    first, second = spec.matrices().values()
    return evaluate_matrix(first, xv, xiv), evaluate_matrix(second, xv, xiv)


def pencil_at(spec: SystemSpec, x, xi_prime) -> QuadraticPencil:
    """Frozen monic pencil at x with eta = e1 and xi = (0, xi')."""
    x = np.asarray(x, float)
    xi_prime = np.asarray(xi_prime, float)
    prov = {"x": x.tolist(), "xi_prime": xi_prime.tolist(), "kind": spec.kind}
    if spec.kind == "tensor":
        eta = np.zeros(spec.n)
        eta[0] = 1.0
        blocks = build_frame_blocks(spec, x, eta, np.concatenate([[0.0], xi_prime]))
        p = reduce_to_pencil(blocks)
        p.provenance.update(prov)
        return p
    first, second = matrices_at(spec, x, xi_prime)
    if spec.kind == "pencil":
        return QuadraticPencil(H1=first.astype(complex), H2=second.astype(complex), provenance=prov)
    S1 = first + 1j * second
    S1h = np.conj(S1.T)
    return QuadraticPencil(H1=-(S1 + S1h), H2=S1h @ S1, provenance=prov)


def pencil_batch(spec: SystemSpec, x, xis) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised (H1, H2) over a batch of xi' rows, shapes (m, N, N)."""
    x = np.asarray(x, float)
    xis = np.atleast_2d(np.asarray(xis, float))
    if spec.kind == "tensor":
        C = coefficient_tensor(spec, x)
        T = C[:, :, 0, 0]
        _, iroot = spd_sqrt(T)
        Rp = C[:, :, 0, 1:]
        R = np.einsum("abj,mj->mab", Rp, xis)
        A = R + np.swapaxes(R, 1, 2)
        Q = np.einsum("abjl,mj,ml->mab", C[:, :, 1:, 1:], xis, xis)
        return (iroot @ A @ iroot).astype(complex), (iroot @ Q @ iroot).astype(complex)
    first, second = matrices_at(spec, x, xis)
    if spec.kind == "pencil":
        return first.astype(complex), second.astype(complex)
    S1 = first + 1j * second
    S1h = np.conj(np.swapaxes(S1, 1, 2))
    return -(S1 + S1h), S1h @ S1


# -- basic assumptions -------------------------------------------------------------

@dataclass
class BasicReport:
    symmetry_ok: bool
    symmetry_defect: float
    ellipticity_delta: float
    worst_x: list
    worst_a: list
    worst_b: list
    n_x: int
    n_b: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def domain_samples(spec: SystemSpec, count: int = 9, seed: int = 0) -> np.ndarray:
    """Center, box corners and seeded interior points of the domain, shape (m, n)."""
    rng = np.random.default_rng(seed)
    pts = [spec.center]
    corners = np.array(np.meshgrid(*[[0.0, 1.0]] * spec.n, indexing="ij")).reshape(spec.n, -1).T
    pts.extend(spec.lo + c * (spec.hi - spec.lo) for c in corners[: max(0, count - 1)])
    extra = count - len(pts)
    if extra > 0:
        pts.extend(spec.lo + rng.random((extra, spec.n)) * (spec.hi - spec.lo))
    return np.array(pts[:max(count, 1)])


def _min_form(C: np.ndarray, b: np.ndarray):
    """min over unit a of a^T K(b) a with K(b) = sum C^{jl} b_j b_l, per row of b."""
    K = np.einsum("abjl,mj,ml->mab", C, b, b)
    K = 0.5 * (K + np.swapaxes(K, 1, 2))
    w, V = np.linalg.eigh(K)
    return w[:, 0], V[:, :, 0]


def check_basic_assumptions(spec: SystemSpec, x_samples=None, ab_samples: int = 512,
                            refine: int = 4, seed: int = 0) -> BasicReport:
    """Symmetry and strong ellipticity on samples.

    The minimum over the unit vector ``a`` is computed exactly as the smallest
    eigenvalue of K(b); ``b`` is sampled on the unit sphere and the best few
    samples are refined by a local minimisation.
    """
    if spec.kind != "tensor":
        raise SpecError("basic assumptions are defined for tensor kind")
    xs = domain_samples(spec, seed=seed) if x_samples is None else np.atleast_2d(x_samples)
    if len(xs) == 0:
        raise SpecError("empty x sample set")
    bs = sphere_points(spec.n, ab_samples, seed=seed)
    sym = 0.0
    best = (np.inf, None, None, None)
    for x in xs:
        C = coefficient_tensor(spec, x)
        if not np.all(np.isfinite(C)):
            raise ExprError(f"non-finite coefficient at x={x.tolist()}")
        sym = max(sym, float(np.max(np.abs(C - np.transpose(C, (1, 0, 3, 2))))))
        vals, vecs = _min_form(C, bs)
        order = np.argsort(vals)[:refine]
        for i in order:
            def f(b):
                b = b / np.linalg.norm(b)
                return _min_form(C, b[None])[0][0]
            res = minimize(f, bs[i], method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 400})
            b = res.x / np.linalg.norm(res.x)
            v, a = _min_form(C, b[None])
            cand = (v[0], b, a[0]) if v[0] < vals[i] else (vals[i], bs[i], vecs[i])
            if cand[0] < best[0]:
                best = (float(cand[0]), x, cand[2], cand[1])
    return BasicReport(symmetry_ok=sym <= SYM_TOL, symmetry_defect=sym,
                       ellipticity_delta=best[0], worst_x=best[1].tolist(),
                       worst_a=best[2].tolist(), worst_b=best[3].tolist(),
                       n_x=len(xs), n_b=len(bs))
