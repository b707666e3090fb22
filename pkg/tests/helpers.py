"""Shared builders for the test suite."""

import numpy as np

from pmufdi.grid import Branch, Bus, Channel, GridCase, JacobianSet


def random_grid(rng: np.random.Generator, pmax: int = 8, zib_prob: float = 0.35, pmu_prob: float = 0.5) -> GridCase:
    """Connected grid with physical admittances 1/(R + jX), R, X > 0."""
    p = int(rng.integers(2, pmax + 1))
    edges = {(int(rng.integers(1, b)), b) for b in range(2, p + 1)}
    for _ in range(int(rng.integers(0, p))):
        i, j = sorted(int(v) for v in rng.choice(np.arange(1, p + 1), 2, replace=False))
        edges.add((i, j))
    deg = {b: 0 for b in range(1, p + 1)}
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    zibs = {b for b in deg if deg[b] >= 2 and rng.random() < zib_prob}
    pmus = {b for b in deg if rng.random() < pmu_prob} or {int(rng.integers(1, p + 1))}
    branches = [
        Branch(i, j, 1 / complex(rng.uniform(0.005, 0.05), rng.uniform(0.02, 0.2)))
        for i, j in sorted(edges)
    ]
    return GridCase([Bus(b, b in zibs, b in pmus) for b in range(1, p + 1)], branches)


def matrix_model(H: np.ndarray) -> JacobianSet:
    """A JacobianSet around an arbitrary dense H (no ZIBs), for solver tests."""
    H = np.asarray(H, dtype=complex)
    H_bar = H / np.linalg.norm(H, axis=1, keepdims=True)
    p = H.shape[1]
    return JacobianSet(
        H=H,
        H_bar=H_bar,
        A=np.zeros((0, p), dtype=complex),
        index=tuple(Channel(r + 1) for r in range(H.shape[0])),
        bus_ids=tuple(range(1, p + 1)),
    )


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
