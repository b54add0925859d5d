"""Dense control-theoretic kernels: Lyapunov/Riccati solvers, system norms,
ZOH discretization and Hankel balanced truncation.

All routines are pure functions of their inputs and safe to call from
concurrent workers.  Sizes are desk scale (n <= a few hundred); everything is
dense.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .statespace import StateSpaceModel, ReductionReport

__all__ = [
    "NotHurwitzError",
    "IllConditionedError",
    "NotStabilizableError",
    "NoStabilizingSolutionError",
    "UnstableError",
    "NonzeroFeedthroughError",
    "SingularAtFrequencyError",
    "OrderOutOfRangeError",
    "spectral_abscissa",
    "solve_lyapunov",
    "solve_care",
    "h2_norm",
    "hinf_norm",
    "freq_response",
    "balanced_truncation",
    "discretize_zoh",
]

DEFAULT_TOL = 1e-6


class NotHurwitzError(ValueError):
    """A matrix required to be Hurwitz has an eigenvalue with Re >= 0."""


class IllConditionedError(RuntimeError):
    """A linear solve finished but its residual exceeds the contract tolerance."""


class NotStabilizableError(ValueError):
    """(A, B) fails the PBH stabilizability test."""


class NoStabilizingSolutionError(RuntimeError):
    """Riccati iteration failed to converge to a stabilizing solution."""


class UnstableError(ValueError):
    """System norm requested for an unstable system."""


class NonzeroFeedthroughError(ValueError):
    """H-2 norm requested with a nonzero disturbance feedthrough."""


class SingularAtFrequencyError(ValueError):
    """j*omega coincides with an eigenvalue of A."""


class OrderOutOfRangeError(ValueError):
    """Requested reduced order is not in 1..n."""


def _sym(M):
    return 0.5 * (M + M.T)


def spectral_abscissa(A) -> float:
    """max Re eig(A); negative iff A is Hurwitz."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if A.size == 0:
        return -np.inf
    return float(np.max(np.linalg.eigvals(A).real))


def _require_hurwitz(A, what="A"):
    if spectral_abscissa(A) >= 0:
        raise NotHurwitzError(f"{what} is not Hurwitz (spectral abscissa "
                              f"{spectral_abscissa(A):.3e})")


def solve_lyapunov(A, Q, tol: float = 1e-9) -> np.ndarray:
    """Solve A P + P A^T + Q = 0 for symmetric P (A Hurwitz, Q symmetric).

    Backed by the Bartels-Stewart solver; the residual is re-checked against
    ``tol * (1 + ||Q||_F)`` and IllConditionedError raised on failure.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if not np.allclose(Q, Q.T, atol=1e-10 * (1 + np.abs(Q).max(initial=0.0))):
        raise ValueError("Q must be symmetric")
    _require_hurwitz(A)
    P = _sym(sla.solve_continuous_lyapunov(A, -_sym(Q)))
    resid = np.linalg.norm(A @ P + P @ A.T + Q, "fro")
    if resid > tol * (1.0 + np.linalg.norm(Q, "fro")):
        raise IllConditionedError(f"Lyapunov residual {resid:.3e} exceeds tolerance")
    return P


def _pbh_stabilizable(A, B, tol=1e-8) -> bool:
    n = A.shape[0]
    scale = max(1.0, np.linalg.norm(A, 2))
    for lam in np.linalg.eigvals(A):
        if lam.real >= -tol * scale:
            M = np.hstack([A - lam * np.eye(n), B])
            if np.linalg.matrix_rank(M, tol=1e-10 * scale) < n:
                return False
    return True


def _stabilizing_gain(A, B):
    """Gain F with A + B F Hurwitz, via the shifted-Lyapunov (Bass) formula."""
    n = A.shape[0]
    if spectral_abscissa(A) < 0:
        return np.zeros((B.shape[1], n))
    beta = 1.0 + np.linalg.norm(A, "fro")
    # (A + beta I) Z + Z (A + beta I)^T = 2 B B^T; F = -B^T pinv(Z) gives
    # (A + BF) Z + Z (A + BF)^T = -2 beta Z on range(Z).
    Z = _sym(sla.solve_continuous_lyapunov(A + beta * np.eye(n), 2.0 * B @ B.T))
    F = -B.T @ np.linalg.pinv(Z, rcond=1e-12)
    return F


def solve_care(A, B, Q, R, tol: float = 1e-8, max_iter: int = 60) -> np.ndarray:
    """Stabilizing solution of S A + A^T S - S B R^-1 B^T S + Q = 0.

    Newton-Kleinman iteration seeded by a shifted-Lyapunov stabilizing gain;
    each step is one Lyapunov solve for the current closed loop.  The
    returned S satisfies the residual bound tol*(1+||S||^2) and renders
    A - B R^-1 B^T S Hurwitz.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = _sym(np.atleast_2d(np.asarray(Q, dtype=float)))
    R = _sym(np.atleast_2d(np.asarray(R, dtype=float)))
    n = A.shape[0]
    if np.min(np.linalg.eigvalsh(R)) <= 0:
        raise ValueError("R must be symmetric positive definite")
    if np.min(np.linalg.eigvalsh(Q)) < -1e-10 * (1 + np.abs(Q).max(initial=0.0)):
        raise ValueError("Q must be symmetric positive semidefinite")
    if not _pbh_stabilizable(A, B):
        raise NotStabilizableError("(A, B) is not stabilizable")

    Rinv = np.linalg.inv(R)
    F = _stabilizing_gain(A, B)  # A + B F Hurwitz
    if spectral_abscissa(A + B @ F) >= 0:
        raise NoStabilizingSolutionError("failed to construct a stabilizing initial gain")

    S = np.zeros((n, n))
    for _ in range(max_iter):
        Acl = A + B @ F
        rhs = Q + F.T @ R @ F
        try:
            S = _sym(sla.solve_continuous_lyapunov(Acl.T, -rhs))
        except Exception as exc:  # Lyapunov operator singular
            raise NoStabilizingSolutionError(f"Lyapunov step failed: {exc}") from exc
        resid = np.linalg.norm(S @ A + A.T @ S - S @ B @ Rinv @ B.T @ S + Q, "fro")
        if resid <= tol * (1.0 + np.linalg.norm(S, "fro") ** 2):
            Acl_final = A - B @ Rinv @ B.T @ S
            if spectral_abscissa(Acl_final) >= 0:
                raise NoStabilizingSolutionError("converged solution is not stabilizing")
            return S
        F = -Rinv @ B.T @ S
    raise NoStabilizingSolutionError(f"Newton-Kleinman did not converge in {max_iter} steps")


def h2_norm(sys: StateSpaceModel) -> float:
    """H-2 norm of the disturbance-to-output channel (A, B_d, C).

    Requires A Hurwitz and D_d = 0, otherwise the norm is infinite.
    """
    if spectral_abscissa(sys.A) >= 0:
        raise UnstableError("H-2 norm requires a Hurwitz A")
    if np.any(sys.D_d != 0):
        raise NonzeroFeedthroughError("H-2 norm is infinite with nonzero disturbance feedthrough")
    if sys.n == 0:
        return 0.0
    P = solve_lyapunov(sys.A, sys.B_d @ sys.B_d.T)
    val = float(np.trace(sys.C @ P @ sys.C.T))
    return float(np.sqrt(max(val, 0.0)))


def _sigma_max(M) -> float:
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[0])


def _hamiltonian_has_imaginary_eig(A, B, C, D, gamma) -> bool:
    p = B.shape[1]
    R = gamma**2 * np.eye(p) - D.T @ D
    Rinv = np.linalg.inv(R)
    A1 = A + B @ Rinv @ D.T @ C
    H = np.block([
        [A1, B @ Rinv @ B.T],
        [-C.T @ (np.eye(C.shape[0]) + D @ Rinv @ D.T) @ C, -A1.T],
    ])
    eigs = np.linalg.eigvals(H)
    scale = 1.0 + np.abs(eigs)
    return bool(np.any(np.abs(eigs.real) <= 1e-8 * scale))


def hinf_norm(sys: StateSpaceModel, tol: float = DEFAULT_TOL) -> float:
    """H-infinity norm of the disturbance channel via Hamiltonian bisection.

    Returns sup over frequency of the largest singular value of
    C (jwI - A)^-1 B_d + D_d within relative tolerance ``tol``.
    """
    A, B, C, D = sys.A, sys.B_d, sys.C, sys.D_d
    if sys.n == 0 or B.size == 0 or C.size == 0:
        return _sigma_max(D)
    if spectral_abscissa(A) >= 0:
        raise UnstableError("H-infinity norm requires a Hurwitz A")

    # Seed the lower bound with the feedthrough, DC, and modal frequencies.
    freqs = [0.0] + [abs(lam.imag) for lam in np.linalg.eigvals(A) if abs(lam.imag) > 1e-12]
    lo = _sigma_max(D)
    for w in freqs:
        lo = max(lo, _sigma_max(freq_response(sys, w)))
    if lo == 0.0:
        return 0.0
    hi = 2.0 * lo
    while _hamiltonian_has_imaginary_eig(A, B, C, D, hi):
        hi *= 2.0
        if hi > 1e12 * lo:
            raise IllConditionedError("H-infinity bisection failed to bracket the norm")
    while hi - lo > tol * lo:
        mid = 0.5 * (lo + hi)
        if _hamiltonian_has_imaginary_eig(A, B, C, D, mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def freq_response(sys: StateSpaceModel, omega: float, channel: str = "disturbance") -> np.ndarray:
    """Transfer matrix at s = j*omega for the selected input channel.

    channel "disturbance" gives C (jwI - A)^-1 B_d + D_d, channel "control"
    the same with (B, D).
    """
    if channel == "disturbance":
        B, D = sys.B_d, sys.D_d
    elif channel == "control":
        B, D = sys.B, sys.D
    else:
        raise ValueError(f"unknown channel {channel!r}")
    if sys.n == 0:
        return D.astype(complex)
    M = 1j * omega * np.eye(sys.n) - sys.A
    try:
        X = np.linalg.solve(M, B)
    except np.linalg.LinAlgError as exc:
        raise SingularAtFrequencyError(f"j*{omega} is an eigenvalue of A") from exc
    if not np.all(np.isfinite(X)):
        raise SingularAtFrequencyError(f"j*{omega} is (numerically) an eigenvalue of A")
    return sys.C @ X + D


def _gramian_factor(A, B):
    """Upper-triangular-free factor R with R R^T = controllability Gramian."""
    P = _sym(sla.solve_continuous_lyapunov(A, -B @ B.T))
    w, V = np.linalg.eigh(P)
    w = np.clip(w, 0.0, None)
    return V * np.sqrt(w)


def balanced_truncation(
    sys: StateSpaceModel,
    kept_order: int | None = None,
    energy_fraction: float | None = None,
    energy_power: int = 1,
    verify: bool = True,
) -> tuple[StateSpaceModel, ReductionReport]:
    """Square-root balanced truncation of a stable model.

    Exactly one of ``kept_order`` / ``energy_fraction`` selects the reduced
    order; with ``energy_fraction`` the smallest order whose cumulative HSV
    share (HSVs raised to ``energy_power``) reaches the target is kept.
    Gramians use the stacked input [B, B_d] and the full output C so the
    2*sum(discarded) bound covers both channels; the bound is re-verified
    against the true error-system H-infinity norm unless ``verify=False``.
    """
    if (kept_order is None) == (energy_fraction is None):
        raise ValueError("specify exactly one of kept_order / energy_fraction")
    if spectral_abscissa(sys.A) >= 0:
        raise UnstableError("balanced truncation requires a Hurwitz A")
    if energy_power not in (1, 2):
        raise ValueError("energy_power must be 1 or 2")

    n = sys.n
    B_all = np.hstack([sys.B, sys.B_d]) if sys.m + sys.p > 0 else np.zeros((n, 0))
    Rc = _gramian_factor(sys.A, B_all)
    Ro = _gramian_factor(sys.A.T, sys.C.T)
    U, hsv, Vt = np.linalg.svd(Ro.T @ Rc)
    hsv = np.asarray(hsv)

    weights = hsv**energy_power
    total = float(np.sum(weights))
    if kept_order is None:
        if not 0 < energy_fraction <= 1:
            raise ValueError("energy_fraction must lie in (0, 1]")
        if total == 0.0:
            kept_order = 1
        else:
            cum = np.cumsum(weights) / total
            kept_order = int(np.searchsorted(cum, energy_fraction - 1e-12) + 1)
            kept_order = min(kept_order, n)
    if not 1 <= kept_order <= n:
        raise OrderOutOfRangeError(f"kept_order {kept_order} not in 1..{n}")

    r = kept_order
    kept_frac = 1.0 if total == 0.0 else float(np.sum(weights[:r]) / total)
    bound = 2.0 * float(np.sum(hsv[r:]))
    report = ReductionReport(hsv=tuple(hsv), kept_order=r,
                             energy_fraction=kept_frac, error_bound=bound)

    if r == n:
        return sys, report

    # Square-root projection; tiny HSVs in the kept block are floored to keep
    # the transform finite.
    s_kept = np.maximum(hsv[:r], 1e-300)
    Sl = 1.0 / np.sqrt(s_kept)
    T = Rc @ Vt[:r].T * Sl
    Ti = (U[:, :r] * Sl).T @ Ro.T

    reduced = StateSpaceModel(
        A=Ti @ sys.A @ T,
        B=Ti @ sys.B,
        B_d=Ti @ sys.B_d,
        C=sys.C @ T,
        D=sys.D,
        D_d=sys.D_d,
        input_labels=sys.input_labels,
        output_labels=sys.output_labels,
        disturbance_labels=sys.disturbance_labels,
        u_base_mw=sys.u_base_mw,
    )

    if verify and bound > 0:
        err = StateSpaceModel(
            A=sla.block_diag(sys.A, reduced.A),
            B=np.vstack([sys.B, reduced.B]),
            B_d=np.vstack([B_all, np.hstack([reduced.B, reduced.B_d])]),
            C=np.hstack([sys.C, -reduced.C]),
            D=np.zeros((sys.q, sys.m)),
            D_d=np.zeros((sys.q, sys.m + sys.p)),
        )
        achieved = hinf_norm(err)
        if achieved > bound * (1 + 1e-6) + 1e-12:
            raise IllConditionedError(
                f"truncation error {achieved:.3e} exceeds the 2*sum(hsv) bound {bound:.3e}")
    return reduced, report


def discretize_zoh(sys: StateSpaceModel, dt: float):
    """Exact zero-order-hold discretization: returns (A_dt, B_dt, B_d_dt).

    Uses the augmented-matrix exponential, so the result is exact for
    piecewise-constant inputs.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n, m, p = sys.n, sys.m, sys.p
    M = np.zeros((n + m + p, n + m + p))
    M[:n, :n] = sys.A
    M[:n, n:n + m] = sys.B
    M[:n, n + m:] = sys.B_d
    E = sla.expm(M * dt)
    return E[:n, :n], E[:n, n:n + m], E[:n, n + m:]
