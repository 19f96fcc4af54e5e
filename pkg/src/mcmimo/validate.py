"""Built-in oracle and property checks, runnable via ``mcmimo validate``.

Each check recomputes a structural identity through an independent route
(explicit covariance inversion, dense interference matrices, closed-form
fixed points) and compares against the production path.  These are quick
desk checks; the full statistical cross-validation lives in the test suite.
"""

import numpy as np

from .detectors import detector_state, m_mmse, m_zf, mf, s_mmse
from .detequiv import det_equiv_se, det_equiv_sinr
from .estimation import (
    build_estimate_set,
    estimate_directions,
    estimator_coefficients,
    pilot_observation,
    sample_channels,
)
from .geometry import build_layout, wrap_distance
from .performance import instantaneous_sinr, prepare_scenario, simulate_schemes
from .pilots import PilotAllocation, channel_inversion_power, dft_pilot_book
from .rmt import ResolventModel, solve_resolvent, solve_second_order


def synthetic_scenario(L, K, beta, rng, rho=1.0, sigma2=1.0, spread=(0.05, 0.3)):
    """Random multi-cell scenario with channel-inversion power control.

    Serving links draw stronger fading than cross links; pilot blocks cycle
    over the cells modulo the reuse factor.
    """
    from .geometry import UserDrop

    d = rng.uniform(*spread, size=(L, L, K))
    for l in range(L):
        d[l, l, :] = rng.uniform(0.5, 2.0, size=K)
    drop = UserDrop(positions=np.zeros((L, K, 2)), fading=d, shadow_seed=0)
    groups = np.arange(L) % beta
    indices = groups[:, None] * K + np.arange(K)[None, :]
    alloc = PilotAllocation(beta=beta, indices=indices, reuse_group=groups)
    powers = channel_inversion_power(drop, rho)
    book = dft_pilot_book(alloc.B)
    return drop, alloc, powers, book, sigma2


def realize_estimates(drop, alloc, powers, book, sigma2, M, rng):
    """One end-to-end estimation pass: channels -> observations -> estimates."""
    state = estimator_coefficients(alloc, powers, drop, sigma2)
    channels = sample_channels(drop, M, rng)
    L = drop.cell_count
    directions = np.stack([
        estimate_directions(
            pilot_observation(channels, alloc, book, powers, sigma2, j, rng),
            state, book, j,
        )
        for j in range(L)
    ])
    est = build_estimate_set(directions, alloc, powers, drop, state)
    return channels, state, est


def explicit_psi(drop, alloc, powers, book, sigma2, j):
    """Observation covariance at BS j, assembled term by term."""
    B = alloc.B
    psi = sigma2 * np.eye(B, dtype=complex)
    V = book.sequences
    for l in range(drop.cell_count):
        for k in range(alloc.K):
            v = V[:, alloc.indices[l, k]]
            psi += (
                powers.pilot_power[l, k]
                * drop.fading[j, l, k]
                * np.outer(v, v.conj())
            )
    return psi


def dense_interference_matrix(est, powers, drop, sigma2, j, k):
    """Denominator matrix of the SINR quotient, assembled densely."""
    M = est.M
    tau = powers.payload_power
    D = tau[j, k] * est.err_cov_scalar[j, j, k] * np.eye(M, dtype=complex)
    D += sigma2 * np.eye(M)
    for l in range(drop.cell_count):
        for m in range(tau.shape[1]):
            if (l, m) == (j, k):
                continue
            h = est.per_user[j, l, m]
            D += tau[l, m] * (
                np.outer(h, h.conj()) + est.err_cov_scalar[j, l, m] * np.eye(M)
            )
    return D


def _check_pilot_book():
    book = dft_pilot_book(40)
    gram = book.sequences.conj().T @ book.sequences
    return float(np.abs(gram - 40 * np.eye(40)).max()) < 1e-10


def _check_layout():
    layout = build_layout(500.0)
    pos = layout.bs_positions
    dists = np.linalg.norm(pos[None] - pos[:, None], axis=-1)
    nn = np.sort(dists, axis=1)[:, 1]
    if not np.allclose(nn, np.sqrt(3) * 500.0, atol=1e-6):
        return False
    torus = np.array([
        sorted(wrap_distance(layout, pos[l], j) for l in range(19) if l != j)
        for j in range(19)
    ])
    return float(np.abs(torus - torus[0]).max()) < 1e-6


def _check_estimation_two_path(rng):
    drop, alloc, powers, book, sigma2 = synthetic_scenario(4, 3, 3, rng)
    state = estimator_coefficients(alloc, powers, drop, sigma2)
    channels = sample_channels(drop, 8, rng)
    worst = 0.0
    for j in range(4):
        Y = pilot_observation(channels, alloc, book, powers, sigma2, j, rng)
        fast = estimate_directions(Y, state, book, j)
        psi = explicit_psi(drop, alloc, powers, book, sigma2, j)
        explicit = Y @ np.linalg.inv(psi.conj()) @ book.sequences.conj()
        worst = max(worst, np.abs(fast - explicit).max() / np.abs(explicit).max())
    return worst < 1e-8


def _check_detector_two_form(rng):
    drop, alloc, powers, book, sigma2 = synthetic_scenario(3, 2, 3, rng)
    _, state, est = realize_estimates(drop, alloc, powers, book, sigma2, 10, rng)
    det_st = detector_state(alloc, powers, drop, state)
    worst = 0.0
    for j in range(3):
        for k in range(2):
            g = m_mmse(est, det_st, sigma2, j, k)
            A = sigma2 * np.eye(10, dtype=complex)
            for l in range(3):
                for m in range(2):
                    h = est.per_user[j, l, m]
                    A += powers.payload_power[l, m] * (
                        np.outer(h, h.conj())
                        + est.err_cov_scalar[j, l, m] * np.eye(10)
                    )
            direct = np.linalg.solve(A, est.per_user[j, j, k])
            worst = max(worst, np.abs(g - direct).max() / np.abs(direct).max())
    return worst < 1e-8


def _check_rayleigh_optimality(rng):
    drop, alloc, powers, book, sigma2 = synthetic_scenario(3, 3, 3, rng)
    _, state, est = realize_estimates(drop, alloc, powers, book, sigma2, 16, rng)
    det_st = detector_state(alloc, powers, drop, state)
    j, k = 1, 2
    g_opt = m_mmse(est, det_st, sigma2, j, k)
    eta_opt = instantaneous_sinr(g_opt, est, powers, drop, sigma2, j, k)
    D = dense_interference_matrix(est, powers, drop, sigma2, j, k)
    h = est.per_user[j, j, k]
    eta_max = float(
        (powers.payload_power[j, k] * (h.conj() @ np.linalg.solve(D, h))).real
    )
    if abs(eta_opt - eta_max) / eta_max > 1e-9:
        return False
    rivals = [
        s_mmse(est, powers, drop, sigma2, "statistical", j, k),
        s_mmse(est, powers, drop, sigma2, "zero", j, k),
        m_zf(est, j, k),
        mf(est, j, k),
    ]
    rivals += [
        rng.standard_normal(32).view(np.complex128) for _ in range(20)
    ]
    for g in rivals:
        if instantaneous_sinr(g, est, powers, drop, sigma2, j, k) > eta_opt * (
            1 + 1e-9
        ):
            return False
    return True


def _check_sinr_oracle(rng):
    drop, alloc, powers, book, sigma2 = synthetic_scenario(3, 2, 4, rng)
    _, state, est = realize_estimates(drop, alloc, powers, book, sigma2, 12, rng)
    det_st = detector_state(alloc, powers, drop, state)
    for j, k in [(0, 0), (2, 1)]:
        g = m_mmse(est, det_st, sigma2, j, k)
        eta = instantaneous_sinr(g, est, powers, drop, sigma2, j, k)
        D = dense_interference_matrix(est, powers, drop, sigma2, j, k)
        h = est.per_user[j, j, k]
        dense = float(
            (powers.payload_power[j, k] * abs(np.vdot(g, h)) ** 2
             / (g.conj() @ D @ g)).real
        )
        if abs(eta - dense) / dense > 1e-10:
            return False
        scaled = instantaneous_sinr(7.3 * g, est, powers, drop, sigma2, j, k)
        if abs(scaled - eta) / eta > 1e-12:
            return False
    return True


def _check_fixed_point():
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    iso = solve_resolvent(ResolventModel(M=64, covariances=np.ones(64), rho=1.0))
    if np.abs(iso.delta - golden).max() > 1e-10:
        return False
    gen = solve_resolvent(ResolventModel(
        M=16, covariances=np.broadcast_to(np.eye(16), (16, 16, 16)).copy(), rho=1.0
    ))
    return np.abs(gen.delta - golden).max() < 1e-10


def _check_second_order_paths(rng):
    M, B = 24, 6
    r = rng.uniform(0.1, 2.0, size=B)
    iso = solve_second_order(
        ResolventModel(M=M, covariances=r, rho=0.7, theta=1.0)
    )
    mats = np.stack([rb * np.eye(M) for rb in r])
    gen = solve_second_order(
        ResolventModel(M=M, covariances=mats, rho=0.7, theta=np.eye(M))
    )
    if np.abs(iso.delta_prime - gen.delta_prime).max() > 1e-10:
        return False
    return abs(iso.T_prime - gen.T_prime[0, 0].real) < 1e-10


def _check_detequiv_mc(rng):
    drop, alloc, powers, book, sigma2 = synthetic_scenario(2, 3, 1, rng)
    est_state = estimator_coefficients(alloc, powers, drop, sigma2)
    det_st = detector_state(alloc, powers, drop, est_state)
    M = 64
    report = det_equiv_sinr(drop, alloc, powers, est_state, det_st, sigma2, M)
    det_equiv_se(report, S=10**6)
    scn = prepare_scenario(drop, alloc, powers, book, sigma2, M)
    mc = simulate_schemes(scn, ("M-MMSE",), 400, rng, prelog=1.0 - alloc.B / 10**6)
    gap = abs(mc["M-MMSE"].sum_se_per_cell - report.sum_se_per_cell())
    return gap / report.sum_se_per_cell() < 0.05


CHECKS = (
    ("pilot-book-orthogonality", lambda rng: _check_pilot_book()),
    ("wrap-around-layout", lambda rng: _check_layout()),
    ("estimation-two-path", _check_estimation_two_path),
    ("detector-two-form", _check_detector_two_form),
    ("rayleigh-quotient-optimality", _check_rayleigh_optimality),
    ("sinr-dense-oracle", _check_sinr_oracle),
    ("fixed-point-closed-form", lambda rng: _check_fixed_point()),
    ("second-order-two-path", _check_second_order_paths),
    ("detequiv-vs-monte-carlo", _check_detequiv_mc),
)


def run_validation(seed: int = 0, verbose: bool = True) -> bool:
    """Run every check; returns True when all pass."""
    all_ok = True
    for check_id, (name, fn) in enumerate(CHECKS):
        rng = np.random.default_rng(np.random.SeedSequence((seed, check_id)))
        try:
            ok = bool(fn(rng))
        except Exception as exc:  # surfaced as a failure, not a crash
            ok = False
            if verbose:
                print(f"[FAIL] {name}: raised {type(exc).__name__}: {exc}")
            all_ok = False
            continue
        if verbose:
            print(f"[{'ok' if ok else 'FAIL'}] {name}")
        all_ok = all_ok and ok
    return all_ok
