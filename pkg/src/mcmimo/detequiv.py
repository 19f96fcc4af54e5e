"""Large-system deterministic-equivalent SINR for the multi-cell MMSE detector.

The conditional SINR concentrates, as the array grows, around a value that
depends only on large-scale fading, pilot allocation and power control.
Per BS the Gram matrix of weighted direction estimates maps onto the
random-column model of :mod:`mcmimo.rmt` with isotropic per-pilot
covariances; one resolvent fixed point and a handful of second-order solves
(one per distinct pilot used in the cell, plus one with identity center)
yield every ingredient of the closed form.

No channel realization is ever drawn here; the Monte-Carlo engine in
:mod:`mcmimo.performance` provides the empirical counterpart.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .detectors import DetectorState
from .errors import FixedPointDivergenceError
from .estimation import EstimatorState, per_pilot_sum
from .geometry import UserDrop
from .pilots import PilotAllocation, PowerAllocation
from .rmt import ResolventModel, solve_resolvent, solve_second_order

# Coefficient of the quadratic-norm denominator term.  The interference
# weights mu already account for the estimation error of every user on a
# different pilot, so "same_pilot" adds to the noise power only the
# tau-weighted error variances of the users sharing the served user's pilot;
# "regularizer" adds all of them (the full detector regularizer) and
# "noise_only" none.  The default is fixed empirically against Monte Carlo
# across degenerate and loaded networks; see tests.
NOISE_COEFFICIENT_MODES = ("same_pilot", "regularizer", "noise_only")


@dataclass
class DetEquivReport:
    """Deterministic-equivalent SINR/SE with all fixed-point intermediates.

    Index conventions: j is the observing BS, (l, m) an interfering user,
    k the served user; b a pilot index.
    """

    per_user_sinr: np.ndarray  # (L, K)
    signal_coeff: np.ndarray  # (L, K) quadratic-form coefficient of user (j,k)
    cross_trace: np.ndarray  # (L, L, K) first-order trace per interferer
    cross_trace_prime: np.ndarray  # (L, L, K, K) second-order trace
    noise_trace: np.ndarray  # (L, K) second-order trace with identity center
    mu: np.ndarray  # (L, L, K, K) non-contaminating interference weights
    gamma: np.ndarray  # (L, B) per-pilot Gram weights
    dir_cov: np.ndarray  # (L, B) direction-estimate variance scalars
    shift: np.ndarray  # (L,) resolvent shift per BS
    resolvent_scalar: np.ndarray  # (L,) scalar of the first-order resolvent
    noise_resolvent_scalar: np.ndarray  # (L,) scalar of the identity-center solve
    delta: np.ndarray  # (L, B) converged per-pilot fixed point
    sigma2: float
    M: int
    B: int
    noise_coefficient: str
    per_user_se: Optional[np.ndarray] = None  # filled by det_equiv_se
    prelog: Optional[float] = None

    def sum_se_per_cell(self) -> float:
        if self.per_user_se is None:
            raise ValueError("call det_equiv_se first to fill per-user SE")
        return float(self.per_user_se.sum() / self.per_user_se.shape[0])


def det_equiv_sinr(
    drop: UserDrop,
    alloc: PilotAllocation,
    powers: PowerAllocation,
    est_state: EstimatorState,
    det_state: DetectorState,
    sigma2: float,
    M: int,
    noise_coefficient: str = "same_pilot",
    tol: float = 1e-12,
    max_iter: int = 10_000,
) -> DetEquivReport:
    """Deterministic-equivalent SINR of every user under multi-cell MMSE.

    For each BS the procedure is: set the resolvent shift to the normalized
    detector regularizer, run the first-order fixed point over the B pilot
    covariances, then one second-order solve per distinct pilot used in the
    cell (center = that pilot's direction covariance) plus one with identity
    center for the noise term, and assemble the closed-form ratio.
    """
    if noise_coefficient not in NOISE_COEFFICIENT_MODES:
        raise ValueError(
            f"noise_coefficient must be one of {NOISE_COEFFICIENT_MODES}, "
            f"got {noise_coefficient!r}"
        )
    L, K = alloc.indices.shape
    B = alloc.B
    d = drop.fading
    p = powers.pilot_power
    tau = powers.payload_power
    idx = alloc.indices
    dir_cov = est_state.alpha * B  # (L, B)
    gamma = det_state.lambda_diag  # (L, B)

    per_user_sinr = np.empty((L, K))
    signal_coeff = np.empty((L, K))
    cross_trace = np.empty((L, L, K))
    cross_trace_prime = np.empty((L, L, K, K))
    noise_trace = np.empty((L, K))
    mu = np.empty((L, L, K, K))
    shift = (sigma2 + det_state.phi_scalar) / M
    t_scalar = np.empty(L)
    t_noise = np.empty(L)
    delta_all = np.empty((L, B))

    for j in range(L):
        r = gamma[j] * dir_cov[j]
        model = ResolventModel(M=M, covariances=r, rho=shift[j])
        try:
            first = solve_resolvent(model, tol=tol, max_iter=max_iter)
        except FixedPointDivergenceError as exc:
            raise FixedPointDivergenceError(
                f"BS {j}: {exc}", residual=exc.residual, iterations=exc.iterations
            ) from exc
        t = float(first.T)
        delta_all[j] = first.delta

        def second(theta_scalar, pilot):
            m2 = ResolventModel(
                M=M, covariances=r, rho=shift[j], theta=float(theta_scalar)
            )
            try:
                return solve_second_order(m2, first=first, tol=tol, max_iter=max_iter)
            except FixedPointDivergenceError as exc:
                raise FixedPointDivergenceError(
                    f"BS {j}, pilot {pilot}: {exc}",
                    residual=exc.residual,
                    iterations=exc.iterations,
                ) from exc

        eye_sol = second(1.0, "identity")
        t2 = float(eye_sol.T_prime)
        t_scalar[j] = t
        t_noise[j] = t2

        own_pilots = np.unique(idx[j])
        tprime_by_pilot = {
            int(b0): float(second(dir_cov[j, b0], int(b0)).T_prime)
            for b0 in own_pilots
        }

        # Per-pilot interference factors shared by all users of cell j.
        theta_b = dir_cov[j] * t
        gt = gamma[j] * theta_b
        q = gamma[j] * dir_cov[j] ** 2 * t * (2.0 + gt) / (1.0 + gt) ** 2
        sum_tau_d = per_pilot_sum(idx, tau * d[j], B)  # (B,)
        sum_tau_d_tot = float(sum_tau_d.sum())
        sum_q = gamma[j] * q  # per-pilot sum of tau*p*d^2*q
        sum_q_tot = float(sum_q.sum())

        cross_trace[j] = theta_b[idx]
        pdq = 1.0 - p * d[j] * q[idx]  # (L, K) mu factor per interferer
        tp_users = np.array([tprime_by_pilot[int(b0)] for b0 in idx[j]])  # (K,)
        mu[j] = pdq[:, :, None] * tp_users[None, None, :]
        cross_trace_prime[j] = dir_cov[j][idx][:, :, None] * tp_users[None, None, :]

        own_d = d[j, j]  # (K,)
        own_tp = tau[j] * p[j] * own_d**2
        if noise_coefficient == "regularizer":
            coef_b = np.full(B, sigma2 + det_state.phi_scalar[j])
        elif noise_coefficient == "same_pilot":
            alpha_u = (est_state.alpha[j])[idx]
            c_users = d[j] * (1.0 - p * d[j] * alpha_u * B)
            coef_b = sigma2 + per_pilot_sum(idx, tau * c_users, B)
        else:
            coef_b = np.full(B, sigma2)
        for k in range(K):
            b0 = int(idx[j, k])
            delta_jk = dir_cov[j, b0] * t
            signal_coeff[j, k] = delta_jk
            noise_trace[j, k] = dir_cov[j, b0] * t2
            contam = gamma[j, b0] - own_tp[k]
            tp = tprime_by_pilot[b0]
            other = (
                sum_tau_d_tot - sum_tau_d[b0] - (sum_q_tot - sum_q[b0])
            ) * tp / M
            den = delta_jk**2 * contam + other + coef_b[b0] / M * noise_trace[j, k]
            per_user_sinr[j, k] = own_tp[k] * delta_jk**2 / den

    return DetEquivReport(
        per_user_sinr=per_user_sinr,
        signal_coeff=signal_coeff,
        cross_trace=cross_trace,
        cross_trace_prime=cross_trace_prime,
        noise_trace=noise_trace,
        mu=mu,
        gamma=gamma,
        dir_cov=dir_cov,
        shift=shift,
        resolvent_scalar=t_scalar,
        noise_resolvent_scalar=t_noise,
        delta=delta_all,
        sigma2=float(sigma2),
        M=int(M),
        B=B,
        noise_coefficient=noise_coefficient,
    )


def det_equiv_se(report: DetEquivReport, S: int) -> np.ndarray:
    """Per-user SE from the deterministic-equivalent SINR: prelog * log2(1 + sinr).

    Fills ``report.per_user_se`` and ``report.prelog`` and returns the array.
    """
    if S < report.B:
        raise ValueError(f"coherence block S={S} shorter than B={report.B} pilots")
    prelog = 1.0 - report.B / S
    se = prelog * np.log2(1.0 + report.per_user_sinr)
    report.per_user_se = se
    report.prelog = prelog
    return se
