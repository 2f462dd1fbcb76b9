"""Acceptance criteria 1-12, one PASS/FAIL line each.

Run under pytest (lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""

import math
import subprocess
import sys
import time

import numpy as np

from ucsys.audit import audit_further_assumptions, commutativity_path, eigen_structure
from ucsys.builtins import builtin, identity_tensor
from ucsys.carleman import build_grid, default_k_range, k_sweep, make_test_function
from ucsys.holmgren import holmgren_pushforward
from ucsys.parametrix import (AGREE_TOL, cutoff_tail_integral, error_probe, kernel_bound_check,
                              kernel_sweep)
from ucsys.partition import eta_family
from ucsys.pencil import choose_contours, factorize, pencil_roots, riesz_S1
from ucsys.system import QuadraticPencil, pencil_at

RESULTS: dict = {}


def record(num, ok, detail):
    line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[num] = line
    print(line)
    assert ok, line


def _eig_err(got, want):
    got = list(got)
    err = 0.0
    for w in want:
        i = int(np.argmin([abs(g - w) for g in got]))
        err = max(err, abs(got.pop(i) - w))
    return err


def test_criterion_01_example1_golden():
    t0 = time.perf_counter()
    fac = factorize(pencil_at(builtin("example1"), [0.0, 0.0], [1.0]))
    r3 = math.sqrt(3)
    want = [(7 - r3) / 2 + 1j * (3 + r3) / 2, (7 + r3) / 2 + 1j * (3 - r3) / 2]
    e = _eig_err(fac.eigB(), want)
    h1 = np.abs(fac.pencil.H1 - np.diag([-4.0, -10.0])).max()
    h2 = np.abs(fac.pencil.H2 - np.array([[10.0, 6.0], [6.0, 28.0]])).max()
    dt = time.perf_counter() - t0
    record(1, max(e, h1, h2) <= 1e-10 and dt < 1,
           f"eig err {e:.1e}, H1 err {h1:.1e}, H2 err {h2:.1e}, {dt:.2f}s")


def test_criterion_02_example4_golden():
    t0 = time.perf_counter()
    p = pencil_at(builtin("example4"), [0.0, 1.0, 1.0], [1.0, 0.0])
    fac = factorize(p)
    e = _eig_err(fac.eigB(), [1 + 1j, -1 + 1j, 1j])
    v = np.array([0.0, -1.0, 0.0])
    ev = np.linalg.norm(fac.B @ v - 1j * v)
    cf = commutativity_path(p)
    dt = time.perf_counter() - t0
    record(2, max(e, ev) <= 1e-10 and cf is not None and dt < 1,
           f"eig err {e:.1e}, eigvec err {ev:.1e}, commutative path {cf is not None}, {dt:.2f}s")


def test_criterion_03_example3_golden():
    fac = factorize(pencil_at(builtin("example3"), [0.0, 0.0, 0.0], [1.0, 0.0]))
    e = float(np.min(np.abs(fac.eigB() - (1 + 1j * math.sqrt(3)))))
    record(3, e <= 1e-10, f"lambda_1 err {e:.1e}")


def _random_factor(rng, N):
    while True:
        V = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
        if np.linalg.cond(V) <= 1e3:
            break
    lam = rng.normal(size=N) * 2 + 1j * rng.uniform(0.2, 3.0, size=N)
    return V @ np.diag(lam) @ np.linalg.inv(V)


def test_criterion_04_factorization_recovery():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_s = worst_h = 0.0
    for i in range(100):
        N = 1 + i % 6
        S = _random_factor(rng, N)
        Sh = S.conj().T
        p = QuadraticPencil(H1=-(S + Sh), H2=Sh @ S)
        S1 = riesz_S1(p, choose_contours(pencil_roots(p), "upper", N=N))
        worst_s = max(worst_s, np.linalg.norm(S1 - S) / np.linalg.norm(S))
        S1h = S1.conj().T
        sc = max(1.0, np.linalg.norm(p.H2))
        worst_h = max(worst_h, np.abs(p.H1 + S1 + S1h).max() / sc, np.abs(p.H2 - S1h @ S1).max() / sc)
    dt = time.perf_counter() - t0
    record(4, worst_s <= 1e-8 and worst_h <= 1e-10 and dt < 30,
           f"max rel S err {worst_s:.1e}, coefficient identity err {worst_h:.1e}, {dt:.1f}s")


def test_criterion_05_projector_algebra():
    cases = [("example1", [0.0, 0.0]), ("example2", [0.0, 0.0]), ("example3", [0.0, 0.0, 0.0]),
             ("example4", [0.0, 1.0, 1.0]), ("example4", [0.0, 0.0, 0.0]),
             ("example5", [0.0, 0.2, 0.25]), ("isotropic", [0.0, 0.0]), ("perturbed", [0.1, -0.2])]
    algebra = trace = 0.0
    ok = True
    for name, x in cases:
        rep = audit_further_assumptions(builtin(name), x, sphere_samples=32)
        algebra = max(algebra, rep.algebra_worst)
        trace = max(trace, rep.trace_worst)
        ok &= rep.algebra_ok
    record(5, ok and algebra <= 1e-8 and trace <= 1e-6,
           f"{len(cases)} audits, worst projector residual {algebra:.1e}, trace defect {trace:.1e}")


def _carleman(spec, mode):
    T = 0.25
    grid = build_grid(T, 0.25, (128, 128))
    battery = [make_test_function(grid, "random", N=spec.N, seed=s) for s in range(5)]
    return k_sweep(spec, battery, T, default_k_range(T), mode=mode, grid=grid)


def test_criterion_06_carleman_frozen():
    t0 = time.perf_counter()
    reps = {name: _carleman(builtin(name), "frozen") for name in ("isotropic", "example1")}
    dt = time.perf_counter() - t0
    ok = all(r.stability <= 4 for r in reps.values()) and dt < 120
    detail = ", ".join(f"{n} stat {r.stability:.3f} c {r.fitted_c:.3g}" for n, r in reps.items())
    record(6, ok, f"{detail}, {dt:.1f}s")


def test_criterion_07_carleman_variable():
    t0 = time.perf_counter()
    spec = holmgren_pushforward(builtin("perturbed"), 1.0)
    rep = _carleman(spec, "variable")
    dt = time.perf_counter() - t0
    record(7, rep.stability <= 4 and dt < 180,
           f"stat {rep.stability:.3f} c {rep.fitted_c:.3g}, {dt:.1f}s")


def test_criterion_08_kernel_bound():
    t0 = time.perf_counter()
    samples = kernel_sweep(identity_tensor(), [1e2, 1e3, 1e4], 0.1, n_xy=16, n_xi=32)
    rep = kernel_bound_check(samples)
    dt = time.perf_counter() - t0
    record(8, rep.variation[1] <= 2 and rep.max_agreement <= AGREE_TOL and dt < 120,
           f"C_hat(1) variation {rep.variation[1]:.3f}, max route gap {rep.max_agreement:.1e}, "
           f"{rep.samples} samples, {dt:.1f}s")


def test_criterion_09_error_probe():
    T = 0.4
    rep = error_probe(identity_tensor(), [T**-3, 2 * T**-3, 4 * T**-3], T, seeds=(0, 1, 2))
    rho = "; ".join(" ".join(f"{v:.3g}" for v in r) for r in rep.rho.values())
    record(9, rep.all_decreasing and rep.alpha_mean > 0,
           f"rho per seed [{rho}], alpha {rep.alpha_mean:.3f}")


def test_criterion_10_partition():
    fams = [eta_family(mu, points=256) for mu in (2, 4, 8, 16)]
    err = max(f.sum_error for f in fams)
    c3 = [f.c3_max for f in fams]
    ratio = max(c3) / min(c3)
    nb = max(f.neighbor_count for f in fams)
    record(10, err <= 1e-12 and ratio <= 1.5 and nb <= 9,
           f"sum err {err:.1e}, c3 ratio {ratio:.3f}, neighbours {nb} (bound 9)")


def test_criterion_11_tail_integral():
    v = cutoff_tail_integral()
    e = abs(v - math.log(2) / math.pi)
    record(11, e <= 1e-8, f"value {v:.15f}, err {e:.1e}")


def test_criterion_12_determinism(tmp_path):
    bodies = []
    for i in range(2):
        csv = tmp_path / f"run{i}.csv"
        subprocess.run([sys.executable, "-m", "ucsys", "bench", "carleman-frozen", "--builtin",
                        "example1", "--grid", "64x64", "--seed", "7", "--out",
                        str(tmp_path / f"run{i}.json"), "--csv", str(csv)], check=True)
        text = csv.read_text().splitlines()
        bodies.append("\n".join(line for line in text if not line.startswith("#")))
    record(12, bodies[0] == bodies[1] and len(bodies[0]) > 0, f"{len(bodies[0])} CSV body bytes identical")


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                pass
