"""Acceptance suite: one test per criterion, each printing a pass/fail line.

The heavy Monte-Carlo experiments run at desk scale (500 trials) through the
same harness the CLI uses.  Criteria 2 and 3 take several minutes each; run
``pytest -m "not slow"`` to skip them during development.
"""

import numpy as np
import pytest

from mcmimo import (
    NetworkConfig,
    ResolventModel,
    detector_state,
    estimator_coefficients,
    instantaneous_sinr,
    m_mmse,
    m_zf,
    mf,
    resolvent_trace_mc,
    run_experiment,
    s_mmse,
    solve_resolvent,
    solve_second_order,
)
from mcmimo.detectors import build_detector_bank
from mcmimo.estimation import build_estimate_set, estimate_directions
from mcmimo.pilots import dft_pilot_book

from conftest import (
    dense_interference_matrix,
    explicit_psi,
    realize_estimates,
    synthetic_scenario,
)

SEED = 20250808
WORKERS = 2


def _report(criterion, ok, detail):
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


def criterion1_config():
    return NetworkConfig(
        M=(50, 100, 200), K=10, beta=(4,), S=300, trials=500, drops=1,
        seed=SEED, schemes=("M-MMSE",),
    )


@pytest.fixture(scope="session")
def criterion1_table():
    return run_experiment(criterion1_config(), workers=1)


@pytest.mark.slow
def test_criterion_1_deterministic_equivalent_accuracy(criterion1_table):
    """MC sum SE tracks the deterministic equivalent within 8/5/3 percent."""
    limits = {50: 0.08, 100: 0.05, 200: 0.03}
    gaps = {}
    for row in criterion1_table.rows:
        gaps[row.M] = abs(row.sum_se - row.detequiv_sum_se) / row.detequiv_sum_se
    ok = all(gaps[M] <= limits[M] for M in limits)
    detail = ", ".join(
        f"M={M}: gap {gaps[M]*100:.2f}% <= {limits[M]*100:.0f}%" for M in sorted(gaps)
    )
    assert _report(1, ok, detail)


@pytest.mark.slow
def test_criterion_2_beta_monotonicity():
    """Sum SE strictly increases with the reuse factor at M=200, K=10.

    The harness reuses the same five drops for every reuse factor (paired
    design), so the uncertainty of each drop-averaged sum is the reported
    Monte-Carlo standard error propagated through the average; gaps must
    exceed twice the two factors' combined standard errors.
    """
    config = NetworkConfig(
        M=(200,), K=10, beta=(1, 3, 4, 7), S=300, trials=500, drops=5,
        seed=SEED + 1, schemes=("M-MMSE",),
    )
    table = run_experiment(config, workers=WORKERS)
    means, errs = {}, {}
    for beta in (1, 3, 4, 7):
        vals = np.array([r.sum_se for r in table.rows if r.beta == beta])
        ses = np.array([r.sum_se_stderr for r in table.rows if r.beta == beta])
        means[beta] = vals.mean()
        errs[beta] = np.sqrt((ses**2).sum()) / len(ses)
    ok = True
    details = []
    for lo, hi in [(1, 3), (3, 4), (4, 7)]:
        gap = means[hi] - means[lo]
        bound = 2.0 * np.hypot(errs[lo], errs[hi])
        details.append(f"SE({hi})-SE({lo}) = {gap:.3f} > {bound:.3f}")
        ok = ok and gap > bound
    assert _report(2, ok, "; ".join(
        [f"means {' < '.join(f'{means[b]:.1f}' for b in (1, 3, 4, 7))}"] + details
    ))


@pytest.mark.slow
@pytest.mark.parametrize("K,band", [(10, (1.15, 1.45)), (30, (1.35, 1.80))])
def test_criterion_3_scheme_ordering_and_gains(K, band):
    """M-MMSE gains over S-MMSE in band; MF lowest; M-MMSE >= M-ZF."""
    config = NetworkConfig(
        M=(200,), K=K, beta=(4,), S=300, trials=500, drops=10,
        seed=SEED + 2, schemes=("M-MMSE", "S-MMSE", "M-ZF", "MF"),
    )
    table = run_experiment(config, workers=WORKERS)
    means = {}
    for scheme in config.schemes:
        vals = [r.sum_se for r in table.rows if r.scheme == scheme]
        means[scheme] = float(np.mean(vals))
    ratio = means["M-MMSE"] / means["S-MMSE"]
    ok = band[0] <= ratio <= band[1]
    mf_lowest = all(means["MF"] < means[s] for s in ("M-MMSE", "S-MMSE", "M-ZF"))
    mmse_beats_zf = means["M-MMSE"] >= means["M-ZF"]
    ok = ok and mf_lowest and mmse_beats_zf
    assert _report(
        3, ok,
        f"K={K}: M-MMSE/S-MMSE = {ratio:.3f} in [{band[0]}, {band[1]}], "
        f"MF lowest: {mf_lowest}, M-MMSE >= M-ZF: {mmse_beats_zf} "
        f"(sums: " + ", ".join(f"{s}={means[s]:.1f}" for s in config.schemes) + ")",
    )


def test_criterion_4_rayleigh_quotient_optimality():
    """M-MMSE attains the quotient maximum on 100 random scenarios (M=32)."""
    rng = np.random.default_rng(SEED + 3)
    worst_rel = 0.0
    violations = 0
    for _ in range(100):
        drop, alloc, powers, book, sigma2 = synthetic_scenario(4, 4, 3, rng)
        _, state, est = realize_estimates(drop, alloc, powers, book, sigma2, 32, rng)
        det_st = detector_state(alloc, powers, drop, state)
        j = int(rng.integers(4))
        k = int(rng.integers(4))
        g_opt = m_mmse(est, det_st, sigma2, j, k)
        eta_opt = instantaneous_sinr(g_opt, est, powers, drop, sigma2, j, k)
        D = dense_interference_matrix(est, powers, drop, sigma2, j, k)
        h = est.per_user[j, j, k]
        eta_max = float(
            (powers.payload_power[j, k] * (h.conj() @ np.linalg.solve(D, h))).real
        )
        worst_rel = max(worst_rel, abs(eta_opt - eta_max) / eta_max)
        rivals = [
            s_mmse(est, powers, drop, sigma2, "statistical", j, k),
            s_mmse(est, powers, drop, sigma2, "zero", j, k),
            m_zf(est, j, k),
            mf(est, j, k),
        ] + [rng.standard_normal(64).view(np.complex128) for _ in range(100)]
        for g in rivals:
            if instantaneous_sinr(g, est, powers, drop, sigma2, j, k) > eta_opt * (
                1 + 1e-9
            ):
                violations += 1
    ok = worst_rel < 1e-9 and violations == 0
    assert _report(
        4, ok,
        f"max |eta - closed form|/eta = {worst_rel:.2e} < 1e-9, "
        f"optimality violations: {violations}",
    )


def test_criterion_5_fixed_point_closed_form_and_oracle():
    """B=M=64 identity case hits the quadratic root; MC trace concurs."""
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    model = ResolventModel(M=64, covariances=np.ones(64), rho=1.0)
    sol = solve_resolvent(model)
    delta_err = float(np.abs(sol.delta - golden).max())
    mean, stderr = resolvent_trace_mc(
        model, 500, np.random.default_rng(SEED + 4)
    )
    det = sol.trace_with(1.0)
    gap = abs(mean - det)
    ok = delta_err < 1e-10 and gap <= 3 * stderr
    assert _report(
        5, ok,
        f"|delta - (sqrt(5)-1)/2| = {delta_err:.2e} < 1e-10; "
        f"|oracle - trace| = {gap:.2e} <= 3*stderr = {3*stderr:.2e}",
    )


def test_criterion_6_second_order_oracle():
    """M=256, B=64 second-order trace matches its deterministic equivalent."""
    rng = np.random.default_rng(SEED + 5)
    r = rng.uniform(0.1, 2.0, size=64)
    model = ResolventModel(M=256, covariances=r, rho=1.0, theta=1.0)
    sol = solve_second_order(model)
    det = sol.trace_with(1.0, second_order=True)
    mean, stderr = resolvent_trace_mc(model, 500, rng, second_order=True)
    gap = abs(mean - det)
    bound = max(3 * stderr, 0.02 * abs(det))
    ok = gap <= bound
    assert _report(
        6, ok, f"|oracle - trace| = {gap:.3e} <= {bound:.3e} (det = {det:.5f})"
    )


def test_criterion_7_structural_identities():
    """Exact identities hold across 1000 random instances."""
    rng = np.random.default_rng(SEED + 6)
    worst = {"split": 0.0, "collinear": 0.0, "two_form": 0.0,
             "two_path": 0.0, "scale": 0.0}
    for _ in range(1000):
        L = int(rng.integers(2, 4))
        K = int(rng.integers(1, 3))
        beta = int(rng.integers(1, 3))
        M = int(rng.integers(4, 9))
        drop, alloc, powers, book, sigma2 = synthetic_scenario(L, K, beta, rng)
        state = estimator_coefficients(alloc, powers, drop, sigma2)
        from mcmimo import pilot_observation, sample_channels

        ch = sample_channels(drop, M, rng)
        j = int(rng.integers(L))
        Y = pilot_observation(ch, alloc, book, powers, sigma2, j, rng)
        fast = estimate_directions(Y, state, book, j)
        psi = explicit_psi(drop, alloc, powers, book, sigma2, j)
        explicit = Y @ np.linalg.inv(psi.conj()) @ book.sequences.conj()
        worst["two_path"] = max(
            worst["two_path"], np.abs(fast - explicit).max() / np.abs(explicit).max()
        )
        directions = np.stack([fast] * L)  # only BS j inspected below
        est = build_estimate_set(directions, alloc, powers, drop, state)
        split_dev = np.abs(
            (est.est_cov_scalar + est.err_cov_scalar - drop.fading) / drop.fading
        ).max()
        worst["split"] = max(worst["split"], float(split_dev))
        amp = np.sqrt(powers.pilot_power)[None] * drop.fading
        for l in range(L):
            for k in range(K):
                b = alloc.indices[l, k]
                dev = np.abs(
                    est.per_user[j, l, k] - est.directions[j][:, b] * amp[j, l, k]
                ).max()
                worst["collinear"] = max(worst["collinear"], float(dev))
        det_st = detector_state(alloc, powers, drop, state)
        k = int(rng.integers(K))
        g = m_mmse(est, det_st, sigma2, j, k)
        A = sigma2 * np.eye(M, dtype=complex)
        for l in range(L):
            for m in range(K):
                h = est.per_user[j, l, m]
                A += powers.payload_power[l, m] * (
                    np.outer(h, h.conj()) + est.err_cov_scalar[j, l, m] * np.eye(M)
                )
        direct = np.linalg.solve(A, est.per_user[j, j, k])
        worst["two_form"] = max(
            worst["two_form"], np.abs(g - direct).max() / np.abs(direct).max()
        )
        eta = instantaneous_sinr(g, est, powers, drop, sigma2, j, k)
        scaled = instantaneous_sinr(-3.7j * g, est, powers, drop, sigma2, j, k)
        worst["scale"] = max(worst["scale"], abs(scaled - eta) / eta)
    eps = np.finfo(float).eps
    ok = (
        worst["split"] <= 4 * eps
        and worst["collinear"] == 0.0
        and worst["two_form"] < 1e-8
        and worst["two_path"] < 1e-8
        and worst["scale"] < 1e-12
    )
    assert _report(
        7, ok,
        f"variance split rel dev {worst['split']:.1e} (machine exact), "
        f"collinearity {worst['collinear']:.1e} (bitwise), "
        f"detector forms {worst['two_form']:.1e} < 1e-8, "
        f"estimator paths {worst['two_path']:.1e} < 1e-8, "
        f"SINR scaling {worst['scale']:.1e} < 1e-12",
    )


@pytest.mark.slow
def test_criterion_8_thread_count_reproducibility(criterion1_table):
    """The criterion-1 experiment reproduces across worker counts to 1e-9."""
    again = run_experiment(criterion1_config(), workers=2)
    worst = 0.0
    for a, b in zip(criterion1_table.rows, again.rows):
        for attr in ("sum_se", "sum_se_stderr", "detequiv_sum_se"):
            x, y = getattr(a, attr), getattr(b, attr)
            if x is None or x == 0.0:
                continue
            worst = max(worst, abs(x - y) / abs(x))
    ok = worst <= 1e-9
    assert _report(8, ok, f"max relative deviation across workers = {worst:.2e}")
