"""Fitted kernel constants C_hat(m) per k for the isotropic and Example 1 symbols."""

import argparse
import time
from dataclasses import dataclass, field

from ucsys.builtins import builtin
from ucsys.parametrix import kernel_bound_check, kernel_sweep


@dataclass
class KernelConfig:
    systems: list = field(default_factory=lambda: ["isotropic", "example1"])
    ks: tuple = (1e2, 1e3, 1e4)
    T: float = 0.1
    n_xy: int = 16
    n_xi: int = 32


def run(cfg: KernelConfig):
    for name in cfg.systems:
        t0 = time.perf_counter()
        rep = kernel_bound_check(kernel_sweep(builtin(name), list(cfg.ks), cfg.T, cfg.n_xy, cfg.n_xi))
        print(f"{name}: {rep.samples} samples in {time.perf_counter() - t0:.1f}s, "
              f"max route gap {rep.max_agreement:.2e}")
        for m, per_k in rep.C_hat_per_k.items():
            vals = " ".join(f"{v:.4f}" for v in per_k)
            print(f"  m={m}: C_hat per k [{vals}] variation {rep.variation[m]:.3f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-xy", type=int, default=16)
    ap.add_argument("--n-xi", type=int, default=32)
    a = ap.parse_args()
    run(KernelConfig(n_xy=a.n_xy, n_xi=a.n_xi))
