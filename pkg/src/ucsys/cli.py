"""Command line front end: audit | factor | bench | examples.

Exit codes: 0 pass, 1 input error, 2 assumption or golden failure,
3 bench instability.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .audit import audit_further_assumptions, commutativity_verdict
from .builtins import BUILTINS, builtin
from .carleman import (INSTABILITY, FrozenPencilOperator, apriori_check, build_grid,
                       default_k_range, k_sweep, make_test_function)
from .expr import ExprError
from .goldens import GOLDEN_TOL, check_case, default_cases, match_case
from .holmgren import HolmgrenParams, forward_map, holmgren_pushforward, symbol_transport_residual
from .parametrix import kernel_bound_check, kernel_csv, kernel_sweep
from .partition import c3_stability, eta_family
from .pencil import CLUSTER_TOL, ContourError, QuadratureError, factorize
from .system import AssumptionError, SpecError, check_basic_assumptions, load_system, pencil_at

EXIT_OK, EXIT_INPUT, EXIT_ASSUMPTION, EXIT_UNSTABLE = 0, 1, 2, 3

BENCH_KINDS = ("carleman-frozen", "carleman-variable", "kernel", "apriori", "partition")

# tolerance names accepted by --tol, with defaults
TOLERANCES = {
    "cluster": CLUSTER_TOL,
    "instability": INSTABILITY,
    "golden": GOLDEN_TOL,
    "kernel_variation": 2.0,
    "partition_sum": 1e-12,
    "c3_ratio": 1.5,
}

BENCH_DEFAULTS = {
    "carleman-frozen": {"T": 0.25, "r": 0.25, "grid": (128, 128)},
    "carleman-variable": {"T": 0.25, "r": 0.25, "grid": (128, 128)},
    "apriori": {"T": 0.25, "r": 0.25, "grid": (128, 128)},
    "kernel": {"T": 0.1, "r": None, "grid": (16, 32), "k_list": [1e2, 1e3, 1e4]},
    "partition": {"T": None, "r": None, "grid": (256, 256), "mu": [2, 4, 8, 16]},
}


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything a run depends on; echoed into the report verbatim."""
    command: str
    input: str | None = None
    builtin: str | None = None
    out: str | None = None
    csv: str | None = None
    seed: int = 0
    tol: dict = field(default_factory=dict)
    holmgren: float | None = None
    T: float | None = None
    r: float | None = None
    k_list: list | None = None
    mu: list | None = None
    grid: list | None = None
    at: dict = field(default_factory=dict)
    xi: list | None = None
    bench: str | None = None
    battery: int = 5
    samples: int = 64


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": _jsonable(obj.real.tolist()), "im": _jsonable(obj.imag.tolist())}
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def _tolerances(cfg: RunConfig) -> dict:
    tol = dict(TOLERANCES)
    for k, v in cfg.tol.items():
        if k not in tol:
            raise InputError(f"unknown tolerance {k!r}; choose from {sorted(tol)}")
        tol[k] = float(v)
    return tol


def _load(cfg: RunConfig):
    if (cfg.input is None) == (cfg.builtin is None):
        raise InputError("give exactly one of --input PATH or --builtin NAME")
    if cfg.builtin is not None:
        if cfg.builtin not in BUILTINS:
            raise InputError(f"unknown builtin {cfg.builtin!r}; choose from {sorted(BUILTINS)}")
        return builtin(cfg.builtin)
    return load_system(cfg.input)


def _point(spec, at: dict) -> np.ndarray:
    x = spec.center.copy()
    for key, val in at.items():
        if not (key.startswith("x") and key[1:].isdigit()):
            raise InputError(f"--at expects assignments like x2=0, got {key!r}")
        j = int(key[1:])
        if not 1 <= j <= spec.n:
            raise InputError(f"--at {key}: index outside 1..{spec.n}")
        x[j - 1] = val
    return x


def _header(cfg: RunConfig, tol: dict) -> dict:
    return {"tool": "ucsys", "version": __version__, "config": asdict(cfg), "tolerances": tol}


# -- commands ----------------------------------------------------------------------

def cmd_audit(cfg: RunConfig):
    tol = _tolerances(cfg)
    spec = _load(cfg)
    x = _point(spec, cfg.at)
    rep = _header(cfg, tol)
    ok = True

    def audit_one(s, point):
        nonlocal ok
        out = {}
        if s.kind == "tensor":
            basic = check_basic_assumptions(s, seed=cfg.seed)
            out["basic"] = basic.to_dict()
            out["basic_ok"] = bool(basic.symmetry_ok and basic.ellipticity_delta > 0)
            ok = ok and out["basic_ok"]
        else:
            out["basic"] = "not applicable to matrix kinds"
        a = audit_further_assumptions(s, point, sphere_samples=cfg.samples,
                                      cluster_tol=tol["cluster"], seed=cfg.seed)
        out["further"] = a.to_dict()
        comm = commutativity_verdict(s, point, seed=cfg.seed)
        out["commutativity"] = comm["commutative"]
        out["commutativity_detail"] = comm
        ok = ok and a.all_diagonalizable and a.algebra_ok
        return out

    rep["audit"] = audit_one(spec, x)
    if cfg.holmgren is not None:
        if spec.kind != "tensor":
            raise InputError("--holmgren requires a tensor-kind system")
        kappa = cfg.holmgren
        t = holmgren_pushforward(spec, HolmgrenParams(kappa=kappa))
        sub = audit_one(t, forward_map(x, kappa))
        sub["kappa"] = kappa
        sub["transport_residual"] = symbol_transport_residual(spec, t, kappa, seed=cfg.seed)
        rep["holmgren"] = sub
    rep["verdict"] = "pass" if ok else "assumption failure"
    return rep, None, EXIT_OK if ok else EXIT_ASSUMPTION


def _xi_from(cfg: RunConfig, spec) -> np.ndarray:
    if cfg.xi is None:
        xi = np.zeros(spec.n - 1)
        xi[0] = 1.0
        return xi
    xi = np.asarray(cfg.xi, float)
    if len(xi) != spec.n - 1:
        raise InputError(f"xi' needs {spec.n - 1} components, got {len(xi)}")
    return xi


def cmd_factor(cfg: RunConfig):
    tol = _tolerances(cfg)
    spec = _load(cfg)
    x = _point(spec, cfg.at)
    xi = _xi_from(cfg, spec)
    fac = factorize(pencil_at(spec, x, xi), seed=cfg.seed)
    rep = _header(cfg, tol)
    rep["point"] = {"x": x, "xi_prime": xi}
    rep["factorization"] = {"S1": fac.S1, "Y": fac.Y, "Z": fac.Z, "B": fac.B, "B_R": fac.B_R,
                            "eigB": np.sort_complex(fac.eigB()), "H1": fac.pencil.H1,
                            "H2": fac.pencil.H2, "residuals": fac.residuals}
    code = EXIT_OK
    if cfg.builtin is not None:
        case = match_case(cfg.builtin, x, xi)
        if case is not None:
            g = check_case(case, fac)
            gated = [g.get(k, 0.0) for k in ("eigenvalue_error", "H1_error", "H2_error")]
            g["passed"] = bool(g["passed"] and max(gated) <= tol["golden"])
            rep["golden"] = g
            if not g["passed"]:
                code = EXIT_ASSUMPTION
    return rep, None, code


def _battery(grid, N: int, seed: int, count: int):
    return [make_test_function(grid, "random", N=N, seed=seed + i) for i in range(count)]


def cmd_bench(cfg: RunConfig):
    tol = _tolerances(cfg)
    kind = cfg.bench
    if kind not in BENCH_KINDS:
        raise InputError(f"bench kind must be one of {BENCH_KINDS}")
    d = BENCH_DEFAULTS[kind]
    T = cfg.T if cfg.T is not None else d["T"]
    r = cfg.r if cfg.r is not None else d["r"]
    shape = tuple(cfg.grid) if cfg.grid is not None else d["grid"]
    rep = _header(cfg, tol)
    rep["bench"] = kind
    if kind == "partition":
        mus = cfg.mu if cfg.mu is not None else d["mu"]
        rows = ["mu,points,sum_error,theta_bar_min,c1,c2,c3_0,c3_1,c3_2,neighbors_open,neighbors_closed"]
        fams = []
        for mu in mus:
            f = eta_family(float(mu), n=2, points=shape[0])
            fams.append(f)
            rows.append(",".join([repr(float(mu)), str(shape[0])] + [f"{v:.12e}" for v in (
                f.sum_error, f.theta_bar_min, f.c1, f.c2, *f.c3)]
                + [str(f.neighbor_count), str(f.neighbor_count_closed)]))
        c3 = [f.c3_max for f in fams]
        ratio = max(c3) / min(c3)
        sum_err = max(f.sum_error for f in fams)
        unstable = sum_err > tol["partition_sum"] or ratio > tol["c3_ratio"]
        rep["summary"] = {"mu": mus, "partition_identity_max_error": sum_err,
                          "c3": c3, "c3_ratio": ratio,
                          "neighbor_count": max(f.neighbor_count for f in fams),
                          "neighbor_count_closed": max(f.neighbor_count_closed for f in fams),
                          "verdict": "unstable" if unstable else "stable"}
        return rep, "\n".join(rows) + "\n", EXIT_UNSTABLE if unstable else EXIT_OK
    spec = _load(cfg)
    if cfg.holmgren is not None:
        spec = holmgren_pushforward(spec, HolmgrenParams(kappa=cfg.holmgren))
    if kind == "kernel":
        ks = cfg.k_list if cfg.k_list is not None else d["k_list"]
        samples = kernel_sweep(spec, ks, T, n_xy=shape[0], n_xi=shape[1], seed=cfg.seed)
        kb = kernel_bound_check(samples)
        unstable = kb.variation[1] > tol["kernel_variation"]
        rep["summary"] = {"k": kb.ks, "C_hat": kb.C_hat, "C_hat_per_k": kb.C_hat_per_k,
                          "variation": kb.variation, "grows": kb.grows,
                          "max_dual_method_gap": kb.max_agreement, "samples": kb.samples,
                          "verdict": "unstable" if unstable else "stable"}
        return rep, kernel_csv(samples), EXIT_UNSTABLE if unstable else EXIT_OK
    grid = build_grid(T, r, shape, n=spec.n)
    ks = cfg.k_list if cfg.k_list is not None else default_k_range(T)
    battery = _battery(grid, spec.N, cfg.seed, cfg.battery)
    if kind in ("carleman-frozen", "carleman-variable"):
        mode = "frozen" if kind == "carleman-frozen" else "variable"
        cr = k_sweep(spec, battery, T, ks, mode=mode, grid=grid, threshold=tol["instability"])
        rep["summary"] = cr.summary()
        return rep, cr.to_csv(), EXIT_UNSTABLE if cr.unstable else EXIT_OK
    # apriori: first order factor estimates for the bad and good parts
    op = FrozenPencilOperator(spec, grid)
    rows = ["which,k,T,seed,ratio"]
    stats = {}
    for which in ("bad", "good"):
        vals = []
        for v in battery:
            for k in ks:
                q = apriori_check(op, v, k, T, which=which)
                vals.append(q)
                rows.append(f"{which},{float(k)!r},{float(T)!r},{v.seed},{q:.12e}")
        vals = np.array(vals)
        stats[which] = {"max": float(vals.max()), "stability": float(vals.max() / np.median(vals))}
    unstable = any(s["stability"] > tol["instability"] for s in stats.values())
    rep["summary"] = {"k": ks, **stats, "verdict": "unstable" if unstable else "stable"}
    return rep, "\n".join(rows) + "\n", EXIT_UNSTABLE if unstable else EXIT_OK


def cmd_examples(cfg: RunConfig):
    tol = _tolerances(cfg)
    rep = _header(cfg, tol)
    rep["builtins"] = {name: (f().kind, f().n, f().N) for name, f in BUILTINS.items()}
    results = []
    for case in default_cases():
        g = check_case(case)
        results.append(g)
    rep["golden"] = results
    ok = all(g["passed"] for g in results)
    rep["verdict"] = "pass" if ok else "golden mismatch"
    rows = ["name,xi,eigenvalue_error,eigenvector_error,passed"]
    for g in results:
        rows.append(f"{g['name']},{' '.join(map(repr, g['xi']))},{g['eigenvalue_error']:.3e},"
                    f"{g['eigenvector_error']:.3e},{g['passed']}")
    return rep, "\n".join(rows) + "\n", EXIT_OK if ok else EXIT_ASSUMPTION


COMMANDS = {"audit": cmd_audit, "factor": cmd_factor, "bench": cmd_bench, "examples": cmd_examples}


# -- argument parsing ----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _grid(text: str) -> list[int]:
    try:
        a, b = text.lower().split("x")
        return [int(a), int(b)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 128x128, got {text!r}") from None


def _assign(text: str) -> tuple[str, float]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k.strip(), float(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value of {k!r} is not a number") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ucsys", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ucsys {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--input", metavar="PATH", help="system JSON file")
        src.add_argument("--builtin", choices=sorted(BUILTINS), help="built-in system")
        sp.add_argument("--out", metavar="PATH", help="report path (default: stdout)")
        sp.add_argument("--csv", metavar="PATH",
                        help="CSV side file (default: report path with .csv suffix)")
        sp.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
        sp.add_argument("--tol", type=_assign, action="append", default=[], metavar="NAME=VAL",
                        help=f"tolerance override; names: {', '.join(sorted(TOLERANCES))}")
        sp.add_argument("--holmgren", type=float, metavar="KAPPA",
                        help="apply the Holmgren transform with this kappa")

    a = sub.add_parser("audit", help="basic and further assumptions")
    common(a)
    a.add_argument("--at", type=_assign, nargs="+", default=[], metavar="xJ=V",
                   help="frozen point overrides, e.g. --at x2=0 x3=0 (default: domain centre)")
    a.add_argument("--samples", type=int, default=64, help="xi' sphere samples (default 64)")

    f = sub.add_parser("factor", help="spectral factorisation at one frozen point")
    common(f)
    f.add_argument("--at", type=_assign, nargs="+", default=[], metavar="xJ=V")
    f.add_argument("--xi", type=float, nargs="+", help="xi' components (default e_2)")
    for j in range(2, 6):
        f.add_argument(f"--xi{j}", type=float, help=f"component xi_{j} (others default to 0)")

    b = sub.add_parser("bench", help="numerical benches")
    b.add_argument("kind", choices=BENCH_KINDS)
    common(b)
    b.add_argument("--T", type=float, help="height T (default per bench)")
    b.add_argument("--r", type=float, help="transverse support radius (default per bench)")
    b.add_argument("--k-list", type=_floats, help="k values, comma separated")
    b.add_argument("--mu", type=_floats, help="partition scales, comma separated")
    b.add_argument("--grid", type=_grid, metavar="NTxNX",
                   help="grid; kernel bench reads it as (x1,y1 points)x(xi' samples)")
    b.add_argument("--battery", type=int, default=5, help="random test fields (default 5)")

    e = sub.add_parser("examples", help="list built-ins and run the golden suite")
    e.add_argument("--out", metavar="PATH")
    e.add_argument("--csv", metavar="PATH")
    e.add_argument("--tol", type=_assign, action="append", default=[], metavar="NAME=VAL")
    e.add_argument("--seed", type=int, default=0)
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=ns.command, out=getattr(ns, "out", None), csv=getattr(ns, "csv", None),
                    seed=getattr(ns, "seed", 0), tol=dict(getattr(ns, "tol", [])))
    for key in ("input", "builtin", "holmgren", "T", "r", "k_list", "mu", "grid", "battery",
                "samples"):
        if getattr(ns, key, None) is not None:
            setattr(cfg, key, getattr(ns, key))
    if ns.command == "bench":
        cfg.bench = ns.kind
    cfg.at = dict(getattr(ns, "at", []) or [])
    if ns.command == "factor":
        comps = {j: getattr(ns, f"xi{j}") for j in range(2, 6) if getattr(ns, f"xi{j}") is not None}
        if ns.xi is not None and comps:
            raise InputError("use either --xi or --xiJ flags, not both")
        if ns.xi is not None:
            cfg.xi = list(ns.xi)
        elif comps:
            top = max(comps)
            cfg.xi = [comps.get(j, 0.0) for j in range(2, top + 1)]
    return cfg


def _write(cfg: RunConfig, rep: dict, body: str | None):
    text = json.dumps(_jsonable(rep), indent=2, sort_keys=True) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if body is not None:
        target = cfg.csv or (str(Path(cfg.out).with_suffix(".csv")) if cfg.out else None)
        if target:
            Path(target).write_text(body, encoding="utf-8")


def run(cfg: RunConfig) -> int:
    try:
        rep, body, code = COMMANDS[cfg.command](cfg)
    except (InputError, SpecError, ExprError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (AssumptionError, ContourError, QuadratureError) as exc:
        print(f"assumption failure in {cfg.command}: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    _write(cfg, rep, body)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
