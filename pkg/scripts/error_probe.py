"""Remainder norm rho(k) of the parametrix for k in multiples of T^-3."""

from dataclasses import dataclass

from ucsys.builtins import builtin, identity_tensor
from ucsys.parametrix import error_probe


@dataclass
class ProbeConfig:
    T: float = 0.4
    multiples: tuple = (1, 2, 4)
    seeds: tuple = (0, 1, 2)


def run(cfg: ProbeConfig):
    ks = [m * cfg.T**-3 for m in cfg.multiples]
    for label, spec in (("isotropic", identity_tensor()), ("example1", builtin("example1"))):
        rep = error_probe(spec, ks, cfg.T, seeds=cfg.seeds)
        print(f"{label}: alpha {rep.alpha_mean:.3f} decreasing {rep.all_decreasing} "
              f"fd/closed-form gap {rep.fd_gap:.2e}")
        for seed, rho in rep.rho.items():
            print(f"  seed {seed}: " + " ".join(f"{v:.4f}" for v in rho))


if __name__ == "__main__":
    run(ProbeConfig())
