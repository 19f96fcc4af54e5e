"""Orthogonal pilot book, reuse-pattern pilot allocation, and power control."""

from dataclasses import dataclass

import numpy as np

from .errors import PilotReuseError, PowerControlError
from .geometry import CellLayout, UserDrop

SUPPORTED_REUSE_FACTORS = (1, 3, 4, 7)


@dataclass(frozen=True)
class PilotBook:
    """B orthogonal pilot sequences of length B, as columns of ``sequences``.

    Columns have unit-modulus entries, so each sequence has squared norm B
    and distinct sequences are exactly orthogonal.
    """

    sequences: np.ndarray  # (B, B) complex; column b is sequence b

    @property
    def B(self) -> int:
        return self.sequences.shape[1]


def dft_pilot_book(B: int) -> PilotBook:
    """Pilot book from the B-point DFT basis, scaled to unit-modulus entries."""
    if B < 1:
        raise ValueError(f"pilot book size must be >= 1, got {B}")
    m = np.arange(B)
    sequences = np.exp(-2j * np.pi * np.outer(m, m) / B)
    return PilotBook(sequences=sequences)


@dataclass(frozen=True)
class PilotAllocation:
    """Assignment of one pilot index to every user in the network.

    Attributes:
        beta: pilot reuse factor; B = beta * K sequences exist network-wide.
        indices: (n_cells, K) pilot index of each user, in [0, B).
        reuse_group: (n_cells,) reuse-pattern group of each cell; cells in a
            group use the identical block of K pilots.
    """

    beta: int
    indices: np.ndarray
    reuse_group: np.ndarray

    @property
    def K(self) -> int:
        return self.indices.shape[1]

    @property
    def B(self) -> int:
        return self.beta * self.K


def _reuse_coloring(axial: np.ndarray, beta: int) -> np.ndarray:
    """Standard hexagonal reuse coloring of lattice cells for beta groups.

    Colors are constant on the cosets of the reuse sublattice, so planar
    neighbors never share a color for beta >= 3.
    """
    q, r = axial[:, 0], axial[:, 1]
    if beta == 1:
        return np.zeros(len(axial), dtype=np.int64)
    if beta == 3:
        return (q - r) % 3
    if beta == 4:
        return (q % 2) + 2 * (r % 2)
    if beta == 7:
        return (q + 5 * r) % 7
    raise PilotReuseError(
        f"unsupported pilot reuse factor {beta}; supported: {SUPPORTED_REUSE_FACTORS}"
    )


def allocate_pilots(layout: CellLayout, beta: int, K: int) -> PilotAllocation:
    """Give each cell a contiguous pilot block according to its reuse group.

    Cell with reuse group g uses pilots [g*K, (g+1)*K); user k in the cell
    gets the k-th pilot of the block.
    """
    if beta not in SUPPORTED_REUSE_FACTORS:
        raise PilotReuseError(
            f"unsupported pilot reuse factor {beta}; supported: {SUPPORTED_REUSE_FACTORS}"
        )
    if K < 1:
        raise ValueError(f"need at least one user per cell, got K={K}")
    groups = _reuse_coloring(layout.axial_coords, beta)
    indices = groups[:, None] * K + np.arange(K)[None, :]
    return PilotAllocation(beta=beta, indices=indices, reuse_group=groups)


@dataclass(frozen=True)
class PowerAllocation:
    """Per-user transmit powers for the pilot and payload phases."""

    pilot_power: np.ndarray  # (n_cells, K)
    payload_power: np.ndarray  # (n_cells, K)


def channel_inversion_power(drop: UserDrop, rho_target: float) -> PowerAllocation:
    """Statistical channel inversion: p = tau = rho_target / serving fading.

    Every user then reaches its serving BS with the same average effective
    channel gain, and the per-antenna receive SNR is rho_target / sigma^2.
    """
    if rho_target < 0:
        raise ValueError(f"power target must be nonnegative, got {rho_target}")
    serving = drop.serving_fading()
    if np.any(serving <= 0.0):
        raise PowerControlError("serving-link fading must be strictly positive")
    p = rho_target / serving
    return PowerAllocation(pilot_power=p, payload_power=p.copy())
