"""Deterministic point sets on unit spheres."""

from __future__ import annotations

import numpy as np


def sphere_points(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """Points on the unit sphere of R^dim, shape (m, dim).

    dim 1 gives the two points +-1, dim 2 an angular grid, dim 3 a Fibonacci
    lattice; higher dimensions use seeded normalised Gaussians.
    """
    if dim < 1:
        raise ValueError("dimension must be positive")
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    count = max(int(count), 2)
    if dim == 2:
        th = 2 * np.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if dim == 3:
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        r = np.sqrt(1 - z**2)
        phi = np.pi * (3 - np.sqrt(5)) * i
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    g = np.random.default_rng(seed).normal(size=(count, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def refine_around(points: np.ndarray, centers: np.ndarray, factor: int = 4,
                  spacing: float | None = None) -> np.ndarray:
    """Extra unit vectors near ``centers`` at ``factor`` times the base density."""
    dim = points.shape[1]
    if len(centers) == 0 or dim == 1:
        return np.empty((0, dim))
    if spacing is None:
        spacing = (4 * np.pi / len(points)) ** (1 / max(dim - 1, 1)) if dim > 2 else \
            2 * np.pi / len(points)
    h = spacing / factor
    out = []
    for c in centers:
        if dim == 2:
            th0 = np.arctan2(c[1], c[0])
            th = th0 + h * np.arange(-factor, factor + 1)
            out.append(np.stack([np.cos(th), np.sin(th)], axis=1))
        else:
            # two tangent directions spanned from the center
            q, _ = np.linalg.qr(np.column_stack([c, np.eye(dim)[:, : dim - 1]]))
            tang = q[:, 1:3].T
            offs = h * np.arange(-factor, factor + 1)
            grid = c + offs[:, None, None] * tang[0] + offs[None, :, None] * tang[1]
            grid = grid.reshape(-1, dim)
            out.append(grid / np.linalg.norm(grid, axis=1, keepdims=True))
    return np.concatenate(out)
