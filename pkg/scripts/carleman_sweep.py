"""Carleman ratio sweep over the default k-range for a few built-in systems."""

import argparse
from dataclasses import dataclass, field

from ucsys.builtins import builtin
from ucsys.carleman import build_grid, default_k_range, k_sweep, make_test_function
from ucsys.holmgren import holmgren_pushforward


@dataclass
class SweepConfig:
    systems: list = field(default_factory=lambda: ["isotropic", "example1"])
    T: float = 0.25
    r: float = 0.25
    shape: tuple = (128, 128)
    seeds: int = 5
    kappa: float = 1.0


def run(cfg: SweepConfig):
    grid = build_grid(cfg.T, cfg.r, cfg.shape)
    ks = default_k_range(cfg.T)
    jobs = [(name, builtin(name), "frozen") for name in cfg.systems]
    jobs.append(("perturbed+holmgren", holmgren_pushforward(builtin("perturbed"), cfg.kappa), "variable"))
    for label, spec, mode in jobs:
        battery = [make_test_function(grid, "random", N=spec.N, seed=s) for s in range(cfg.seeds)]
        rep = k_sweep(spec, battery, cfg.T, ks, mode=mode, grid=grid)
        print(f"{label:20s} {mode:8s} stability {rep.stability:6.3f} fitted c {rep.fitted_c:.4g}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, default=128)
    a = ap.parse_args()
    run(SweepConfig(shape=(a.grid, a.grid)))
