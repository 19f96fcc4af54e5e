"""Deterministic equivalents of resolvent traces for random Gram matrices.

For H with independent columns h_b ~ CN(0, R_b / M), the normalized traces
(1/M) tr(D (H H^H + rho I)^-1)            (first order)
(1/M) tr(D (.)^-1 Theta (.)^-1)           (second order)
concentrate around deterministic values computable from the covariances
alone.  The first-order value follows from a B-dimensional fixed point; the
second-order one additionally solves a B x B linear system.  Both a general
Hermitian-covariance path and a fast isotropic path (every matrix a scaled
identity) are implemented; the Monte-Carlo trace sampler serves as the
empirical anchor for either.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import FixedPointDivergenceError, SingularSystemError

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000

MatrixOrScalar = Union[np.ndarray, float]


@dataclass(frozen=True)
class ResolventModel:
    """Column-covariance model of the random Gram matrix.

    Attributes:
        M: matrix dimension.
        covariances: per-column covariance scale.  Shape (B,) gives the
            isotropic model R_b = covariances[b] * I_M; shape (B, M, M) gives
            general Hermitian nonnegative R_b.
        D: trace weight matrix; a scalar x means x * I_M.
        theta: center matrix of the second-order form; scalar likewise.
        rho: resolvent shift, must be positive.
    """

    M: int
    covariances: np.ndarray
    rho: float
    D: MatrixOrScalar = 1.0
    theta: Optional[MatrixOrScalar] = None

    def __post_init__(self):
        object.__setattr__(self, "covariances", np.asarray(self.covariances))
        if self.rho <= 0:
            raise ValueError(f"resolvent shift must be positive, got {self.rho}")
        if self.M < 1:
            raise ValueError(f"dimension must be >= 1, got {self.M}")
        if self.covariances.ndim not in (1, 3):
            raise ValueError("covariances must have shape (B,) or (B, M, M)")

    @property
    def B(self) -> int:
        return self.covariances.shape[0]

    @property
    def isotropic(self) -> bool:
        return self.covariances.ndim == 1


@dataclass(frozen=True)
class FixedPointSolution:
    """Converged fixed-point quantities; matrices are scalars on the isotropic path.

    T is the deterministic-equivalent resolvent; delta its per-column traces.
    T_prime / delta_prime are filled by the second-order solver only.
    """

    M: int
    isotropic: bool
    delta: np.ndarray
    T: MatrixOrScalar
    iterations: int
    residual: float
    delta_prime: Optional[np.ndarray] = None
    T_prime: Optional[MatrixOrScalar] = None

    def trace_with(self, D: MatrixOrScalar, second_order: bool = False) -> float:
        """Normalized trace (1/M) tr(D T), or with T' when second_order."""
        T = self.T_prime if second_order else self.T
        if T is None:
            raise ValueError("second-order solution not available")
        return normalized_trace(D, T, self.M)


def normalized_trace(D: MatrixOrScalar, T: MatrixOrScalar, M: int) -> float:
    """(1/M) tr(D T) where scalar arguments stand for multiples of I_M."""
    d_scalar = np.isscalar(D) or np.ndim(D) == 0
    t_scalar = np.isscalar(T) or np.ndim(T) == 0
    if d_scalar and t_scalar:
        return float(D) * float(T)
    if d_scalar:
        return float(D) * float(np.trace(T).real) / M
    if t_scalar:
        return float(T) * float(np.trace(D).real) / M
    return float(np.trace(np.asarray(D) @ np.asarray(T)).real) / M


def _iterate_isotropic(r, rho, M, tol, max_iter):
    delta = np.full(r.shape[0], 1.0 / rho)
    residual = 0.0
    for iteration in range(1, max_iter + 1):
        t = 1.0 / (np.sum(r / (1.0 + delta)) / M + rho)
        new = r * t
        residual = float(np.max(np.abs(new - delta))) if delta.size else 0.0
        delta = new
        if residual <= tol:
            return delta, iteration, residual
    raise FixedPointDivergenceError(
        f"fixed point not converged after {max_iter} iterations "
        f"(residual {residual:.3e})",
        residual=residual,
        iterations=max_iter,
    )


def _iterate_general(R, rho, M, tol, max_iter):
    B = R.shape[0]
    delta = np.full(B, 1.0 / rho)
    eye = np.eye(M)
    residual = 0.0
    for iteration in range(1, max_iter + 1):
        Tinv = np.tensordot(1.0 / (1.0 + delta), R, axes=1) / M + rho * eye
        T = np.linalg.inv(Tinv)
        new = np.einsum("bij,ji->b", R, T).real / M
        residual = float(np.max(np.abs(new - delta))) if B else 0.0
        delta = new
        if residual <= tol:
            return delta, T, iteration, residual
    raise FixedPointDivergenceError(
        f"fixed point not converged after {max_iter} iterations "
        f"(residual {residual:.3e})",
        residual=residual,
        iterations=max_iter,
    )


def solve_resolvent(
    model: ResolventModel,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FixedPointSolution:
    """First-order deterministic equivalent: converged delta and T(rho).

    Iterates the per-column trace recursion from delta = 1/rho until the
    sup-norm step falls below ``tol``.
    """
    M, rho = model.M, model.rho
    if model.B == 0:
        T = 1.0 / rho if model.isotropic else np.eye(M) / rho
        return FixedPointSolution(
            M=M, isotropic=model.isotropic, delta=np.zeros(0), T=T,
            iterations=0, residual=0.0,
        )
    if model.isotropic:
        delta, iters, res = _iterate_isotropic(
            model.covariances.astype(float), rho, M, tol, max_iter
        )
        t = 1.0 / (np.sum(model.covariances / (1.0 + delta)) / M + rho)
        return FixedPointSolution(
            M=M, isotropic=True, delta=delta, T=float(t),
            iterations=iters, residual=res,
        )
    delta, T, iters, res = _iterate_general(
        np.asarray(model.covariances), rho, M, tol, max_iter
    )
    return FixedPointSolution(
        M=M, isotropic=False, delta=delta, T=T, iterations=iters, residual=res
    )


def solve_second_order(
    model: ResolventModel,
    first: Optional[FixedPointSolution] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> FixedPointSolution:
    """Second-order deterministic equivalent for the configured theta.

    Solves the companion B x B linear system for delta' and assembles T'.
    Requires ``model.theta``; reuses a first-order solution when given.
    """
    if model.theta is None:
        raise ValueError("second-order solve requires model.theta")
    if first is None:
        first = solve_resolvent(model, tol=tol, max_iter=max_iter)
    M = model.M
    delta = first.delta
    if model.B == 0:
        if first.isotropic:
            T_prime = float(first.T) ** 2 * float(model.theta)
        else:
            theta_mat = (
                float(model.theta) * np.eye(M)
                if np.ndim(model.theta) == 0
                else np.asarray(model.theta)
            )
            T_prime = first.T @ theta_mat @ first.T
        return FixedPointSolution(
            M=M, isotropic=first.isotropic, delta=delta, T=first.T,
            iterations=first.iterations, residual=first.residual,
            delta_prime=np.zeros(0), T_prime=T_prime,
        )
    dampen = (1.0 + delta) ** 2
    if first.isotropic:
        r = model.covariances.astype(float)
        theta = model.theta
        if np.ndim(theta) != 0:
            raise ValueError("isotropic model requires scalar theta")
        t = float(first.T)
        J = np.outer(r, r) * (t * t) / (M * dampen[None, :])
        v = r * float(theta) * t * t
    else:
        R = np.asarray(model.covariances)
        T = first.T
        theta = model.theta
        theta_mat = (
            float(theta) * np.eye(M) if np.ndim(theta) == 0 else np.asarray(theta)
        )
        RT = np.einsum("bij,jk->bik", R, T)
        J = np.einsum("bij,cji->bc", RT, RT).real / (M * M * dampen[None, :])
        TThT = T @ theta_mat @ T
        v = np.einsum("bij,ji->b", R, TThT).real / M
    system = np.eye(model.B) - J
    cond = np.linalg.cond(system)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularSystemError(
            f"companion system singular (cond={cond:.3e})", condition_estimate=cond
        )
    delta_prime = np.linalg.solve(system, v)
    if first.isotropic:
        t = float(first.T)
        correction = np.sum(r * delta_prime / dampen) / M
        T_prime = t * float(theta) * t + t * correction * t
    else:
        weights = delta_prime / dampen
        mid = np.tensordot(weights, R, axes=1) / M
        T_prime = T @ theta_mat @ T + T @ mid @ T
    return FixedPointSolution(
        M=M, isotropic=first.isotropic, delta=delta, T=first.T,
        iterations=first.iterations, residual=first.residual,
        delta_prime=delta_prime, T_prime=T_prime,
    )


def _column_factors(model: ResolventModel):
    """Per-column factors F_b with R_b = F_b F_b^H, for sampling h_b."""
    if model.isotropic:
        return np.sqrt(np.maximum(model.covariances.astype(float), 0.0))
    factors = []
    for R_b in model.covariances:
        vals, vecs = np.linalg.eigh(R_b)
        vals = np.clip(vals, 0.0, None)
        factors.append(vecs * np.sqrt(vals)[None, :])
    return factors


def resolvent_trace_mc(
    model: ResolventModel,
    samples: int,
    rng: np.random.Generator,
    second_order: bool = False,
):
    """Monte-Carlo estimate of the normalized resolvent trace.

    Draws H with independent columns h_b ~ CN(0, R_b / M) and evaluates the
    first- or second-order trace per sample.  Returns (mean, stderr).
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    if second_order and model.theta is None:
        raise ValueError("second-order oracle requires model.theta")
    M, B = model.M, model.B
    factors = _column_factors(model)
    eye = np.eye(M)
    vals = np.empty(samples)
    with threadpool_limits(limits=1):
        for s in range(samples):
            z = rng.standard_normal((M, 2 * B)).view(np.complex128)
            z /= np.sqrt(2.0 * M)
            if model.isotropic:
                H = z * factors[None, :]
            else:
                H = np.empty((M, B), dtype=complex)
                for b in range(B):
                    H[:, b] = factors[b] @ z[:, b]
            W = H @ H.conj().T + model.rho * eye
            Winv = np.linalg.inv(W)
            if second_order:
                theta = model.theta
                inner = (
                    float(theta) * (Winv @ Winv)
                    if np.ndim(theta) == 0
                    else Winv @ np.asarray(theta) @ Winv
                )
                vals[s] = normalized_trace(model.D, inner, M)
            else:
                vals[s] = normalized_trace(model.D, Winv, M)
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0
    return mean, stderr
