"""Stochastic SINR evaluation and Monte-Carlo ergodic spectral efficiency.

The conditional SINR given the estimates is a generalized Rayleigh quotient.
Because every covariance in the model is a scaled identity and every estimate
is a scaled pilot direction, both numerator and denominator reduce to B inner
products per detector; no M x M interference matrix is ever assembled.  The
dense-matrix evaluation is kept in the test suite as an oracle.
"""

import concurrent.futures
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .config import NetworkConfig
from .detectors import DetectorBank, detector_state, m_mmse_bank, m_zf_bank, s_mmse_bank
from .errors import DetectorRankError
from .estimation import EstimateSet, estimator_coefficients
from .geometry import UserDrop, build_layout
from .pilots import (
    PilotAllocation,
    PilotBook,
    PowerAllocation,
    allocate_pilots,
    channel_inversion_power,
    dft_pilot_book,
)


@dataclass(frozen=True)
class SinrSample:
    """Per-user conditional SINR of one channel realization and one scheme."""

    scheme: str
    per_user: np.ndarray  # (n_cells, K)


@dataclass(frozen=True)
class SeReport:
    """Monte-Carlo ergodic spectral efficiency of one scheme.

    sum_se_per_cell averages the network-wide user sum over the cells;
    stderr fields are standard errors of the Monte-Carlo means.
    """

    scheme: str
    per_user_se: np.ndarray  # (n_cells, K), bits/s/Hz
    per_user_se_stderr: np.ndarray
    sum_se_per_cell: float
    sum_se_stderr: float
    trials: int
    prelog: float


def instantaneous_sinr(
    g: np.ndarray,
    est: EstimateSet,
    powers: PowerAllocation,
    drop: UserDrop,
    sigma2: float,
    j: int,
    k: int,
) -> float:
    """Conditional SINR of detector ``g`` for user k of cell j.

    Evaluates the closed-form quotient through the scalar-covariance
    shortcut: interference from every user collapses onto its pilot
    direction, and all error covariances contribute through the squared
    detector norm.
    """
    g = np.asarray(g)
    gnorm2 = float(np.vdot(g, g).real)
    if gnorm2 == 0.0:
        raise ValueError("detector vector must be nonzero")
    tau = powers.payload_power
    d_j = drop.fading[j]
    idx = est.pilot_indices
    a = est.directions[j].conj().T @ g  # a[b] = dir_b^H g
    abs_a2 = np.abs(a) ** 2
    amp2 = powers.pilot_power * d_j**2  # |estimate amplitude|^2 per user
    quad = tau * amp2 * abs_a2[idx]  # tau_lm |g^H hhat_jlm|^2
    own = float(quad[j, k])
    cross = float(quad.sum()) - own
    err_sum = float((tau * est.err_cov_scalar[j]).sum())  # includes (j,k)'s own
    den = cross + gnorm2 * (err_sum + sigma2)
    return own / den


def sinr_sample(
    bank: DetectorBank,
    est: EstimateSet,
    powers: PowerAllocation,
    drop: UserDrop,
    sigma2: float,
) -> SinrSample:
    """Conditional SINR of every user under one detector bank."""
    L, K = est.pilot_indices.shape
    values = np.empty((L, K))
    for j in range(L):
        for k in range(K):
            values[j, k] = instantaneous_sinr(
                bank.vectors[j, k], est, powers, drop, sigma2, j, k
            )
    return SinrSample(scheme=bank.scheme, per_user=values)


@dataclass(frozen=True)
class ScenarioArrays:
    """Frozen large-scale quantities of one drop, ready for the trial loop."""

    d: np.ndarray  # (L, L, K) fading
    idx: np.ndarray  # (L, K) pilot indices
    sqrt_p: np.ndarray  # (U,) pilot amplitude per user
    tau: np.ndarray  # (L, K) payload power
    vrows: np.ndarray  # (U, B) pilot sequence row per user
    vconj: np.ndarray  # (B, B) conjugate pilot book
    alpha: np.ndarray  # (L, B) estimator coefficients
    lam: np.ndarray  # (L, B) per-pilot detector weights
    phi: np.ndarray  # (L,) error-power scalars
    own_amp: np.ndarray  # (L, K) estimate amplitude of own users
    z_stat: np.ndarray  # (L,) S-MMSE statistical inter-cell scalar
    sigma2: float
    M: int
    B: int

    @property
    def shape(self):
        return self.idx.shape


def prepare_scenario(
    drop: UserDrop,
    alloc: PilotAllocation,
    powers: PowerAllocation,
    book: PilotBook,
    sigma2: float,
    M: int,
    z_mode: str = "statistical",
    tau_subscript_mode: str = "interferer",
) -> ScenarioArrays:
    L, K = alloc.indices.shape
    B = alloc.B
    est_state = estimator_coefficients(alloc, powers, drop, sigma2)
    det_state = detector_state(alloc, powers, drop, est_state)
    d = drop.fading
    alpha_u = est_state.alpha[:, alloc.indices.reshape(-1)].reshape(d.shape)
    c = d * (1.0 - powers.pilot_power[None] * d * alpha_u * B)
    tau = powers.payload_power
    z_stat = np.zeros(L)
    if z_mode == "statistical":
        for j in range(L):
            other = np.ones(L, dtype=bool)
            other[j] = False
            err_part = float(np.dot(tau[j], c[j, j]))
            if tau_subscript_mode == "interferer":
                cross = float((tau[other] * d[j, other]).sum())
            else:
                cross = float((tau[j][None, :] * d[j, other]).sum())
            z_stat[j] = err_part + cross
    elif z_mode != "zero":
        raise ValueError(f"unknown z_mode {z_mode!r}")
    idx = np.arange(L)
    own_amp = np.sqrt(powers.pilot_power) * d[idx, idx, :]
    return ScenarioArrays(
        d=d,
        idx=alloc.indices,
        sqrt_p=np.sqrt(powers.pilot_power).reshape(-1),
        tau=tau,
        vrows=book.sequences.T[alloc.indices.reshape(-1)],
        vconj=book.sequences.conj(),
        alpha=est_state.alpha,
        lam=det_state.lambda_diag,
        phi=det_state.phi_scalar,
        own_amp=own_amp,
        z_stat=z_stat,
        sigma2=float(sigma2),
        M=int(M),
        B=B,
    )


def _trial_log_rates(scn: ScenarioArrays, schemes, rng: np.random.Generator):
    """log2(1 + SINR) for every (scheme, cell, user) of one realization."""
    L, K = scn.shape
    M, B = scn.M, scn.B
    U = L * K
    kk = np.arange(K)
    out = np.empty((len(schemes), L, K))
    sigma2 = scn.sigma2
    for j in range(L):
        dj = scn.d[j].reshape(U)
        H = rng.standard_normal((U, 2 * M)).view(np.complex128)
        H *= np.sqrt(dj / 2.0)[:, None]
        noise = rng.standard_normal((M, 2 * B)).view(np.complex128)
        Y = (H * scn.sqrt_p[:, None]).T @ scn.vrows
        Y += np.sqrt(sigma2 / 2.0) * noise
        HV = (Y @ scn.vconj) * scn.alpha[j][None, :]
        own = HV[:, scn.idx[j]] * scn.own_amp[j][None, :]  # (M, K)
        for s, scheme in enumerate(schemes):
            if scheme == "M-MMSE":
                G = m_mmse_bank(HV, scn.lam[j], scn.phi[j], sigma2, own)
            elif scheme == "S-MMSE":
                G = s_mmse_bank(own, scn.tau[j], scn.z_stat[j], sigma2)
            elif scheme == "M-ZF":
                G = m_zf_bank(HV, scn.idx[j])
            elif scheme == "MF":
                G = own
            else:
                raise ValueError(f"unknown scheme {scheme!r}")
            A = HV.conj().T @ G  # (B, K)
            abs_a2 = np.abs(A) ** 2
            total = scn.lam[j] @ abs_a2
            own_q = scn.tau[j] * scn.own_amp[j] ** 2 * abs_a2[scn.idx[j], kk]
            gnorm2 = np.einsum("mk,mk->k", G.conj(), G).real
            den = total - own_q + gnorm2 * (scn.phi[j] + sigma2)
            out[s, j] = np.log2(1.0 + own_q / den)
    return out


def _run_chunk(scn: ScenarioArrays, schemes, seed_seqs):
    # Trial matrices are small; threaded BLAS only adds contention here, and
    # parallelism is provided across trials instead.
    rates = np.empty((len(seed_seqs), len(schemes)) + scn.shape)
    with threadpool_limits(limits=1):
        for t, ss in enumerate(seed_seqs):
            rates[t] = _trial_log_rates(scn, schemes, np.random.default_rng(ss))
    return rates


def simulate_schemes(
    scn: ScenarioArrays,
    schemes,
    trials: int,
    rng: np.random.Generator,
    prelog: float,
    workers: int = 1,
) -> dict:
    """Monte-Carlo SE of several schemes over shared channel realizations.

    Per-trial random substreams are spawned up front, so results do not
    depend on the worker count or on execution order.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    schemes = tuple(schemes)
    seed_seqs = rng.bit_generator.seed_seq.spawn(trials)
    if workers <= 1 or trials == 1:
        rates = _run_chunk(scn, schemes, seed_seqs)
    else:
        bounds = np.linspace(0, trials, num=min(workers, trials) + 1, dtype=int)
        chunks = [seed_seqs[a:b] for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [scn] * len(chunks),
                                  [schemes] * len(chunks), chunks))
        rates = np.concatenate(parts, axis=0)
    L = scn.shape[0]
    reports = {}
    for s, scheme in enumerate(schemes):
        vals = rates[:, s]  # (T, L, K)
        per_user = prelog * vals.mean(axis=0)
        if trials > 1:
            per_user_err = prelog * vals.std(axis=0, ddof=1) / np.sqrt(trials)
            cell_sums = prelog * vals.sum(axis=(1, 2)) / L
            sum_err = float(cell_sums.std(ddof=1) / np.sqrt(trials))
        else:
            per_user_err = np.zeros_like(per_user)
            sum_err = 0.0
        reports[scheme] = SeReport(
            scheme=scheme,
            per_user_se=per_user,
            per_user_se_stderr=per_user_err,
            sum_se_per_cell=float(per_user.sum() / L),
            sum_se_stderr=sum_err,
            trials=trials,
            prelog=prelog,
        )
    return reports


def monte_carlo_se(
    config: NetworkConfig,
    drop: UserDrop,
    scheme: str,
    trials: int = None,
    rng: np.random.Generator = None,
    workers: int = 1,
) -> SeReport:
    """Monte-Carlo ergodic SE of one scheme for one drop of the configured network.

    ``config`` must be restricted to a single (M, beta) sweep cell.  Detector
    failures (e.g. multi-cell ZF with M <= B) propagate as exceptions.
    """
    if len(config.M) != 1 or len(config.beta) != 1:
        raise ValueError("config must be restricted to one (M, beta) cell; "
                         "use config.single(M, beta)")
    M, beta = config.M[0], config.beta[0]
    if M <= beta * config.K and scheme == "M-ZF":
        raise DetectorRankError(
            f"multi-cell ZF infeasible at M={M} <= B={beta * config.K}"
        )
    layout = build_layout(config.radius_m)
    alloc = allocate_pilots(layout, beta, config.K)
    powers = channel_inversion_power(drop, config.rho)
    book = dft_pilot_book(alloc.B)
    scn = prepare_scenario(
        drop, alloc, powers, book, config.sigma2, M,
        z_mode=config.z_mode, tau_subscript_mode=config.tau_subscript_mode,
    )
    if trials is None:
        trials = config.trials
    if rng is None:
        rng = np.random.default_rng(config.seed)
    reports = simulate_schemes(
        scn, (scheme,), trials, rng, config.prelog(beta), workers=workers
    )
    return reports[scheme]
