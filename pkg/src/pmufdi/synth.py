"""Synthetic low-rank PMU trajectories that respect ZIB KCL exactly.

States are ``x_t = x_base + B m_t`` with ``B`` an orthonormal basis of ``r``
random directions inside ``null(A)``.  Each direction is the voltage
response ``Y^+ i`` to a random balanced current injection ``i`` that is
zero at every ZIB, so disturbances spread over the network the way load
changes do and KCL at the ZIBs holds by construction.  The modal amplitudes ``m_t`` switch
on at ``disturbance_onset`` and their variance decays geometrically, so the
measurement matrix has rank at most ``r + 1``.

Randomness comes from :class:`PortableRng`, a Philox4x64-10 stream with a
fully specified uniform/normal transform so seeds reproduce anywhere.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .grid import GridCase, JacobianSet, admittance_matrix, zib_matrix

# per-unit conversion of the MW-scale disturbance variance
VARIANCE_UNIT_SCALE = 1e-4

STREAM_TRAJECTORY = 0
STREAM_NOISE = 1
STREAM_ATTACK = 2


class PortableRng:
    """Philox4x64-10 (Random123) keyed by ``(seed, stream)``.

    The block counter starts at 1 and the four 64-bit words of each block
    are emitted in order.  A word ``w`` maps to the uniform
    ``((w >> 11) + 0.5) * 2**-53`` in (0, 1).  Standard normals come in
    pairs from two consecutive uniforms by Box-Muller:
    ``sqrt(-2 ln u1) * (cos(2 pi u2), sin(2 pi u2))``.  A complex normal
    with total variance ``v`` takes the pair as (real, imag), each scaled
    by ``sqrt(v / 2)``.  Arrays are filled in C (row-major) order.
    """

    def __init__(self, seed: int, stream: int = 0):
        if seed < 0 or stream < 0:
            raise ValueError("seed and stream must be nonnegative")
        self.seed, self.stream = int(seed), int(stream)
        self._bits = np.random.Philox(key=[self.seed, self.stream])

    def raw(self, count: int) -> np.ndarray:
        return self._bits.random_raw(count)

    def uniform(self, size) -> np.ndarray:
        count = int(np.prod(size))
        w = self.raw(count)
        return (((w >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53).reshape(size)

    def _normal_pairs(self, pairs: int) -> tuple[np.ndarray, np.ndarray]:
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log(u[:, 0]))
        angle = 2.0 * np.pi * u[:, 1]
        return radius * np.cos(angle), radius * np.sin(angle)

    def normal(self, size) -> np.ndarray:
        count = int(np.prod(size))
        a, b = self._normal_pairs((count + 1) // 2)
        return np.column_stack([a, b]).ravel()[:count].reshape(size)

    def complex_normal(self, size, variance: float = 1.0) -> np.ndarray:
        count = int(np.prod(size))
        a, b = self._normal_pairs(count)
        return (np.sqrt(variance / 2.0) * (a + 1j * b)).reshape(size)


@dataclass(frozen=True)
class TrajectoryConfig:
    N: int = 150
    sample_rate: float = 30.0
    disturbance_onset: int = 31
    variance_scale: float = 60.0
    decay_base: float = 1.1
    num_modes: int = 3
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if not 1 <= self.disturbance_onset <= self.N:
            raise ValueError("disturbance_onset must lie in 1..N")
        if self.num_modes < 1:
            raise ValueError("num_modes must be at least 1")
        if not self.decay_base > 1:
            raise ValueError("decay_base must exceed 1")
        if self.variance_scale < 0 or self.noise_sigma < 0:
            raise ValueError("variance_scale and noise_sigma must be nonnegative")

    @property
    def scaled_variance(self) -> float:
        return self.variance_scale * VARIANCE_UNIT_SCALE

    def mode_variance(self, t: int) -> float:
        """Variance of each modal amplitude at 1-based instant ``t``."""
        if t < self.disturbance_onset:
            return 0.0
        return self.scaled_variance / self.decay_base ** (t - self.disturbance_onset)


def _bfs_order(case: GridCase) -> list[int]:
    order, seen, queue = [], {1}, deque([1])
    while queue:
        b = queue.popleft()
        order.append(b)
        for nb in case.neighbors(b):
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return order


def project_null(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Nearest point to ``x`` (column-wise) in ``null(A)``."""
    if A.shape[0] == 0:
        return x
    return x - np.linalg.pinv(A) @ (A @ x)


def generate_base_state(case: GridCase) -> np.ndarray:
    """Flat start (|V| = 1, angles 0 .. -0.3 rad in BFS order) projected onto ``null(A)``."""
    p = case.p
    angles = np.zeros(p)
    order = _bfs_order(case)
    step = -0.3 / (p - 1) if p > 1 else 0.0
    for rank, bus in enumerate(order):
        angles[bus - 1] = rank * step
    return project_null(zib_matrix(case), np.exp(1j * angles))


def mode_basis(case: GridCase, r: int, rng: PortableRng) -> np.ndarray:
    """``p x r`` basis of injection-driven directions inside ``null(A)``.

    Columns are orthonormal up to the number of independent directions the
    grid supports; any remaining columns are zero.
    """
    p = case.p
    zib = np.array([b.is_zib for b in case.buses])
    inj = rng.complex_normal((p, r))
    inj[zib] = 0.0
    # a balanced injection needs two non-ZIB buses; with fewer there is nothing to excite
    inj[~zib] -= inj[~zib].mean(axis=0) if (~zib).sum() > 1 else inj[~zib]
    raw = np.linalg.pinv(admittance_matrix(case)) @ inj
    # the Laplacian solve already satisfies A x = 0; the projection removes round-off
    moved = project_null(zib_matrix(case), raw)
    U, s, _ = np.linalg.svd(moved, full_matrices=False)
    Q = U[:, s > 1e-10 * max(float(np.linalg.norm(raw)), 1e-300)]
    # small grids reach fewer than r directions; the missing modes stay silent
    B = np.zeros((p, r), dtype=complex)
    B[:, : Q.shape[1]] = Q[:, :r]
    return B


@dataclass
class Trajectory:
    X: np.ndarray
    x_base: np.ndarray
    B: np.ndarray
    modes: np.ndarray


def simulate_trajectory(case: GridCase, config: TrajectoryConfig) -> Trajectory:
    rng = PortableRng(config.seed, STREAM_TRAJECTORY)
    x_base = generate_base_state(case)
    B = mode_basis(case, config.num_modes, rng)
    std = np.sqrt([config.mode_variance(t) for t in range(1, config.N + 1)])
    modes = rng.complex_normal((config.N, config.num_modes)) * std[:, None]
    X = x_base[None, :] + modes @ B.T
    return Trajectory(X, x_base, B, modes)


def generate_state_trajectory(case: GridCase, jac: JacobianSet, config: TrajectoryConfig) -> np.ndarray:
    """``N x p`` state matrix; every row satisfies ``A x_t = 0``."""
    del jac  # the ZIB matrix is rebuilt from the case; kept for call symmetry
    return simulate_trajectory(case, config).X


def measure(X: np.ndarray, jac: JacobianSet, noise_sigma: float = 0.0, seed: int = 0) -> np.ndarray:
    """``W = X H^T + E`` with i.i.d. circular complex Gaussian ``E`` of total variance ``noise_sigma**2``."""
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    W = X @ jac.H.T
    if noise_sigma > 0:
        W = W + PortableRng(seed, STREAM_NOISE).complex_normal(W.shape, noise_sigma**2)
    return W


def singular_value_profile(W) -> np.ndarray:
    return scipy.linalg.svdvals(np.atleast_2d(np.asarray(W, dtype=complex)))
