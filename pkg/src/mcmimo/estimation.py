"""Channel realizations and Bayesian (MMSE) channel estimation.

Every BS correlates its pilot observation with each of the B pilot sequences
and rescales, which yields the B estimated channel directions available at
that BS.  Users sharing a pilot produce collinear estimates whose amplitudes
differ by known large-scale factors; all estimate/error covariances are
scaled identities, so they are stored as scalars.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EstimationConsistencyError
from .geometry import UserDrop
from .pilots import PilotAllocation, PilotBook, PowerAllocation

# Tolerance below which a computed error variance is considered a bug rather
# than rounding noise.
NEGATIVE_VARIANCE_TOL = 1e-12


@dataclass(frozen=True)
class ChannelTensor:
    """Small-scale channel realizations h[j, l, k] in C^M for one block."""

    entries: np.ndarray  # (n_cells, n_cells, K, M) complex

    @property
    def M(self) -> int:
        return self.entries.shape[-1]


def complex_gaussian(rng: np.random.Generator, shape, variance=1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian array with given total variance."""
    if np.isscalar(shape):
        shape = (shape,)
    z = rng.standard_normal(tuple(shape) + (2,)).view(np.complex128)[..., 0]
    return z * np.sqrt(np.asarray(variance) / 2.0)


def sample_channels(drop: UserDrop, M: int, rng: np.random.Generator) -> ChannelTensor:
    """Draw independent channels with per-entry variance given by the fading map."""
    if M < 1:
        raise ValueError(f"antenna count must be >= 1, got M={M}")
    raw = complex_gaussian(rng, drop.fading.shape + (M,))
    entries = raw * np.sqrt(drop.fading)[..., None]
    return ChannelTensor(entries=entries)


def pilot_observation(
    channels: ChannelTensor,
    alloc: PilotAllocation,
    book: PilotBook,
    powers: PowerAllocation,
    sigma2: float,
    j: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Received pilot-phase signal at BS j: sum of scaled rank-1 terms plus noise.

    Returns an (M, B) matrix: each user (l, k) contributes
    sqrt(p_lk) * h[j, l, k] * v_{i_lk}^T, and the noise has i.i.d. complex
    Gaussian entries of variance sigma2.
    """
    H_j = channels.entries[j]  # (n_cells, K, M)
    L, K, M = H_j.shape
    if alloc.indices.shape != (L, K):
        raise ValueError("pilot allocation does not match channel tensor shape")
    if book.B != alloc.B:
        raise ValueError(f"pilot book size {book.B} != allocation B={alloc.B}")
    amp = np.sqrt(powers.pilot_power).reshape(L * K, 1)
    rows = book.sequences.T[alloc.indices.reshape(-1)]  # (U, B), row u = v_{i_u}^T
    Y = (H_j.reshape(L * K, M) * amp).T @ rows
    Y += complex_gaussian(rng, (M, book.B), sigma2)
    return Y


@dataclass(frozen=True)
class EstimatorState:
    """Per-BS, per-pilot rescaling coefficients of the Bayesian estimator.

    alpha[j, b] = 1 / (B * sum of p*d over users on pilot b at BS j + sigma2).
    """

    alpha: np.ndarray  # (n_cells, B)
    noise_power: float


def per_pilot_sum(indices: np.ndarray, weights: np.ndarray, B: int) -> np.ndarray:
    """Sum ``weights`` over users sharing each pilot.

    ``indices`` is (L, K); ``weights`` is (..., L, K).  Returns (..., B).
    """
    flat_idx = indices.reshape(-1)
    w = weights.reshape(weights.shape[:-2] + (-1,))
    lead = w.shape[:-1]
    out = np.zeros(lead + (B,), dtype=weights.dtype)
    for pos in np.ndindex(lead):
        out[pos] = np.bincount(flat_idx, weights=w[pos], minlength=B)
    return out


def estimator_coefficients(
    alloc: PilotAllocation,
    powers: PowerAllocation,
    drop: UserDrop,
    sigma2: float,
) -> EstimatorState:
    """Closed-form estimator coefficients for every (BS, pilot) pair.

    Pilot orthogonality collapses the observation covariance so that each
    pilot direction decouples: only users sharing pilot b load alpha[j, b].
    """
    if sigma2 <= 0:
        raise ValueError(f"noise power must be positive, got {sigma2}")
    B = alloc.B
    load = per_pilot_sum(alloc.indices, powers.pilot_power * drop.fading, B)
    alpha = 1.0 / (B * load + sigma2)
    return EstimatorState(alpha=alpha, noise_power=float(sigma2))


def estimate_directions(
    Y_j: np.ndarray, state: EstimatorState, book: PilotBook, j: int
) -> np.ndarray:
    """All B estimated channel directions at BS j from its pilot observation.

    Column b is alpha[j, b] * Y_j @ conj(v_b); by the decoupling identity this
    equals the full Bayesian estimate computed through the explicit inverse of
    the observation covariance.
    """
    M, B = Y_j.shape
    if book.B != B or state.alpha.shape[1] != B:
        raise ValueError(
            f"dimension mismatch: Y has B={B}, book B={book.B}, "
            f"state B={state.alpha.shape[1]}"
        )
    return (Y_j @ book.sequences.conj()) * state.alpha[j][None, :]


@dataclass(frozen=True)
class EstimateSet:
    """All channel estimates and covariance scalars for one realization.

    Attributes:
        directions: (n_cells, M, B); directions[j, :, b] is the estimated
            direction of pilot b at BS j.
        per_user: (n_cells, n_cells, K, M); per_user[j, l, k] is the channel
            estimate of user (l, k) at BS j, a scaled pilot direction.
        err_cov_scalar: c[j, l, k] with error covariance c * I_M.
        est_cov_scalar: phi[j, l, k] with estimate covariance phi * I_M;
            phi + c equals the channel variance d[j, l, k] exactly.
        dir_cov_scalar: (n_cells, B) variance scalar of each direction column.
        pilot_indices: (n_cells, K) pilot index of each user.
    """

    directions: np.ndarray
    per_user: np.ndarray
    err_cov_scalar: np.ndarray
    est_cov_scalar: np.ndarray
    dir_cov_scalar: np.ndarray
    pilot_indices: np.ndarray

    @property
    def M(self) -> int:
        return self.directions.shape[1]

    def estimate(self, j: int, l: int, k: int) -> np.ndarray:
        return self.per_user[j, l, k]


def estimate_amplitudes(
    alloc: PilotAllocation, powers: PowerAllocation, drop: UserDrop
) -> np.ndarray:
    """Scaling amp[j, l, k] = sqrt(p_lk) * d_j(z_lk) from direction to estimate."""
    return np.sqrt(powers.pilot_power)[None, :, :] * drop.fading


def covariance_scalars(
    alloc: PilotAllocation,
    powers: PowerAllocation,
    drop: UserDrop,
    state: EstimatorState,
):
    """Estimate and error covariance scalars (phi, c) for all (j, l, k)."""
    d = drop.fading
    p = powers.pilot_power[None, :, :]
    alpha_u = state.alpha[:, alloc.indices.reshape(-1)].reshape(d.shape)
    phi = p * d**2 * alpha_u * alloc.B
    c = d - phi
    return phi, c


def build_estimate_set(
    directions: np.ndarray,
    alloc: PilotAllocation,
    powers: PowerAllocation,
    drop: UserDrop,
    state: EstimatorState,
) -> EstimateSet:
    """Assemble per-user estimates and covariance scalars from directions.

    Raises EstimationConsistencyError if any implied error variance is
    negative beyond rounding tolerance, which indicates inconsistent inputs.
    """
    L, K = alloc.indices.shape
    M = directions.shape[1]
    phi, c = covariance_scalars(alloc, powers, drop, state)
    if np.any(c < -NEGATIVE_VARIANCE_TOL):
        raise EstimationConsistencyError(
            f"negative error variance (min {c.min():.3e}); inputs inconsistent"
        )
    amp = estimate_amplitudes(alloc, powers, drop)
    idx = alloc.indices.reshape(-1)
    per_user = np.empty((L, L, K, M), dtype=directions.dtype)
    for j in range(L):
        cols = directions[j][:, idx].T.reshape(L, K, M)
        per_user[j] = cols * amp[j][..., None]
    return EstimateSet(
        directions=directions,
        per_user=per_user,
        err_cov_scalar=c,
        est_cov_scalar=phi,
        dir_cov_scalar=state.alpha * alloc.B,
        pilot_indices=alloc.indices.copy(),
    )
