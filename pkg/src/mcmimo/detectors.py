"""Uplink combining vectors: multi-cell MMSE and the baseline schemes.

The multi-cell MMSE detector regularizes the Gram matrix of all B estimated
pilot directions and therefore suppresses intra-cell interference, the
estimable part of inter-cell interference, and noise.  The single-cell MMSE
baseline only uses the serving cell's K estimates, multi-cell ZF
orthogonalizes all B directions, and MF is the matched filter.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DetectorRankError
from .estimation import EstimateSet, EstimatorState, per_pilot_sum
from .geometry import UserDrop
from .pilots import PilotAllocation, PowerAllocation

SCHEMES = ("M-MMSE", "S-MMSE", "M-ZF", "MF")

# Gram matrices with condition estimates above this are treated as singular.
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class DetectorState:
    """Large-scale quantities entering the compact multi-cell MMSE form.

    lambda_diag[j, b] sums tau * p * d_j^2 over users on pilot b; phi[j] sums
    tau-weighted estimation-error variances over all users in the network.
    """

    lambda_diag: np.ndarray  # (n_cells, B)
    phi_scalar: np.ndarray  # (n_cells,)


def detector_state(
    alloc: PilotAllocation,
    powers: PowerAllocation,
    drop: UserDrop,
    est_state: EstimatorState,
) -> DetectorState:
    d = drop.fading
    p = powers.pilot_power[None, :, :]
    tau = powers.payload_power[None, :, :]
    lam = per_pilot_sum(alloc.indices, tau * p * d**2, alloc.B)
    alpha_u = est_state.alpha[:, alloc.indices.reshape(-1)].reshape(d.shape)
    c = d * (1.0 - p * d * alpha_u * alloc.B)
    phi = (tau * c).sum(axis=(1, 2))
    return DetectorState(lambda_diag=lam, phi_scalar=phi)


def _solve_hpd(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve A x = rhs for Hermitian positive definite A via Cholesky."""
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise DetectorRankError(f"system matrix not positive definite: {exc}") from exc
    return scipy.linalg.cho_solve(factor, rhs, check_finite=False)


def m_mmse(
    est: EstimateSet, state: DetectorState, sigma2: float, j: int, k: int
) -> np.ndarray:
    """Multi-cell MMSE combining vector for user k of cell j."""
    if sigma2 + state.phi_scalar[j] <= 0:
        raise DetectorRankError("regularizer sigma2 + phi_j must be positive")
    bank = m_mmse_bank(
        est.directions[j],
        state.lambda_diag[j],
        state.phi_scalar[j],
        sigma2,
        est.per_user[j, j, k][:, None],
    )
    return bank[:, 0]


def m_mmse_bank(
    directions_j: np.ndarray,
    lambda_j: np.ndarray,
    phi_j: float,
    sigma2: float,
    own_estimates: np.ndarray,
) -> np.ndarray:
    """All combining vectors at one BS from a single factorization.

    ``own_estimates`` holds the serving-cell estimates as columns (M, K).
    """
    M = directions_j.shape[0]
    A = (directions_j * lambda_j[None, :]) @ directions_j.conj().T
    A[np.diag_indices(M)] += sigma2 + phi_j
    return _solve_hpd(A, own_estimates)


def s_mmse_noise_scalar(
    powers: PowerAllocation,
    drop: UserDrop,
    est: EstimateSet,
    j: int,
    tau_subscript_mode: str = "interferer",
) -> float:
    """Scalar z_j of the statistical inter-cell term Z_j = z_j * I_M.

    The estimation-error part uses the serving cell's own users; the
    inter-cell part averages true channel covariances d_j * I_M.  In
    "interferer" mode each out-of-cell channel is weighted by its own payload
    power; "serving" mode weights it by the serving cell's same-index user, a
    literal reading kept for sensitivity checks.
    """
    tau = powers.payload_power
    err_part = float(np.dot(tau[j], est.err_cov_scalar[j, j]))
    other = np.ones(drop.cell_count, dtype=bool)
    other[j] = False
    if tau_subscript_mode == "interferer":
        cross = float((tau[other] * drop.fading[j, other]).sum())
    elif tau_subscript_mode == "serving":
        cross = float((tau[j][None, :] * drop.fading[j, other]).sum())
    else:
        raise ValueError(f"unknown tau_subscript_mode {tau_subscript_mode!r}")
    return err_part + cross


def s_mmse(
    est: EstimateSet,
    powers: PowerAllocation,
    drop: UserDrop,
    sigma2: float,
    z_mode: str,
    j: int,
    k: int,
    tau_subscript_mode: str = "interferer",
) -> np.ndarray:
    """Single-cell MMSE combining vector for user k of cell j.

    z_mode "zero" ignores inter-cell interference; "statistical" adds the
    scalar covariance of estimation errors and out-of-cell channels.
    """
    if z_mode == "zero":
        z = 0.0
    elif z_mode == "statistical":
        z = s_mmse_noise_scalar(powers, drop, est, j, tau_subscript_mode)
    else:
        raise ValueError(f"unknown z_mode {z_mode!r}")
    own = est.per_user[j, j].transpose(1, 0)  # (M, K)
    bank = s_mmse_bank(own, powers.payload_power[j], z, sigma2)
    return bank[:, k]


def s_mmse_bank(
    own_estimates: np.ndarray, tau_j: np.ndarray, z: float, sigma2: float
) -> np.ndarray:
    M = own_estimates.shape[0]
    A = (own_estimates * tau_j[None, :]) @ own_estimates.conj().T
    A[np.diag_indices(M)] += sigma2 + z
    return _solve_hpd(A, own_estimates)


def m_zf(est: EstimateSet, j: int, k: int) -> np.ndarray:
    """Multi-cell zero-forcing vector: pseudo-inverse column of the direction
    matrix, so it nulls every other estimated pilot direction."""
    directions_j = est.directions[j]
    M, B = directions_j.shape
    if M <= B:
        raise DetectorRankError(
            f"multi-cell ZF needs M > B for full column rank (M={M}, B={B})"
        )
    gram = directions_j.conj().T @ directions_j
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise DetectorRankError(f"direction Gram matrix is singular (cond={cond:.2e})")
    rhs = np.zeros(B, dtype=complex)
    rhs[est.pilot_indices[j, k]] = 1.0
    return directions_j @ np.linalg.solve(gram, rhs)


def m_zf_bank(directions_j: np.ndarray, pilot_idx_j: np.ndarray) -> np.ndarray:
    M, B = directions_j.shape
    if M <= B:
        raise DetectorRankError(
            f"multi-cell ZF needs M > B for full column rank (M={M}, B={B})"
        )
    gram = directions_j.conj().T @ directions_j
    rhs = np.zeros((B, len(pilot_idx_j)), dtype=complex)
    rhs[pilot_idx_j, np.arange(len(pilot_idx_j))] = 1.0
    return directions_j @ _solve_hpd(gram, rhs)


def mf(est: EstimateSet, j: int, k: int) -> np.ndarray:
    """Matched filter: the channel estimate itself."""
    return est.per_user[j, j, k].copy()


@dataclass(frozen=True)
class DetectorBank:
    """Combining vectors of one scheme for every (serving BS, user) pair."""

    scheme: str
    vectors: np.ndarray  # (n_cells, K, M)


def build_detector_bank(
    scheme: str,
    est: EstimateSet,
    state: DetectorState,
    powers: PowerAllocation,
    drop: UserDrop,
    sigma2: float,
    z_mode: str = "statistical",
    tau_subscript_mode: str = "interferer",
) -> DetectorBank:
    """Build all combining vectors of one scheme, one factorization per BS."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; supported: {SCHEMES}")
    L, K = est.pilot_indices.shape
    M = est.M
    vectors = np.empty((L, K, M), dtype=complex)
    for j in range(L):
        own = est.per_user[j, j].transpose(1, 0)
        if scheme == "M-MMSE":
            bank = m_mmse_bank(
                est.directions[j], state.lambda_diag[j], state.phi_scalar[j],
                sigma2, own,
            )
        elif scheme == "S-MMSE":
            z = 0.0
            if z_mode == "statistical":
                z = s_mmse_noise_scalar(powers, drop, est, j, tau_subscript_mode)
            elif z_mode != "zero":
                raise ValueError(f"unknown z_mode {z_mode!r}")
            bank = s_mmse_bank(own, powers.payload_power[j], z, sigma2)
        elif scheme == "M-ZF":
            bank = m_zf_bank(est.directions[j], est.pilot_indices[j])
        else:  # MF
            bank = own
        vectors[j] = bank.T
    return DetectorBank(scheme=scheme, vectors=vectors)
