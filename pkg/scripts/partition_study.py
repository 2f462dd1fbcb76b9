"""Partition-of-unity constants and neighbour counts across mu."""

from dataclasses import dataclass

from ucsys.partition import annulus_bound_check, eta_family


@dataclass
class PartitionConfig:
    mus: tuple = (2, 4, 8, 16)
    points: int = 256


def run(cfg: PartitionConfig):
    print("mu  sum_err   c1      c2      c3_max  nbr_open nbr_closed annulus")
    for mu in cfg.mus:
        f = eta_family(mu, points=cfg.points)
        print(f"{mu:<3g} {f.sum_error:.1e} {f.c1:7.3f} {f.c2:7.3f} {f.c3_max:7.3f} "
              f"{f.neighbor_count:8d} {f.neighbor_count_closed:10d} {annulus_bound_check(f):.3f}")


if __name__ == "__main__":
    run(PartitionConfig())
