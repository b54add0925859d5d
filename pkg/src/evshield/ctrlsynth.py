"""Feedback-gain synthesis for the EV defense controller family.

The synthesis programs are assembled as LMI problems and solved with the
in-package SDP engine:

* energy-minimizing design: minimize gamma^2 with the trace/Schur pair and
  the disturbance Lyapunov block,
* peak-gain design: minimize rho with the bounded-real block,
* robustified variants: the Lyapunov / bounded-real blocks are augmented
  with the norm-bounded input-matrix uncertainty (scalar alpha multiplier),
* mixed design: one program carrying every block with objective
  a1*gamma^2 + a2*rho and a gain-limiting floor X > M I.

A decay-rate block shifts every closed-loop pole left of -lambda1.  Gains
are recovered as K = W X^-1 and every design is re-verified post hoc
(closed-loop spectral abscissa and independent norm computations); the
verification, not the solver objective, is the source of truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.linalg as sla

from . import lmisolve as lmi
from . import numkernel as nk
from .statespace import StateSpaceModel

__all__ = [
    "InfeasibleError",
    "CertificateFailureError",
    "NotDetectableError",
    "UncertaintySpec",
    "SynthesisOptions",
    "ControllerDesign",
    "design_observer",
    "h2_synthesize",
    "hinf_synthesize",
    "robustify",
    "mixed_synthesize",
    "attack_gain_synthesize",
    "design_to_text",
    "design_from_text",
]

CERT_TOL = 0.01  # post-hoc norm may exceed the attained objective by 1%


class InfeasibleError(RuntimeError):
    pass


class CertificateFailureError(RuntimeError):
    pass


class NotDetectableError(ValueError):
    pass


@dataclass(frozen=True)
class UncertaintySpec:
    """Norm-bounded input-matrix uncertainty dB = H F E2 with F F^T <= I.

    H defaults to the identity; E2 defaults to eps_u * I on the control
    channels.  eps_u = 0.05 mirrors +-5% feedback-channel uncertainty.
    """

    eps_u: float = 0.05
    H: np.ndarray | None = None
    E2: np.ndarray | None = None

    def matrices(self, n: int, m: int):
        H = np.eye(n) if self.H is None else np.atleast_2d(np.asarray(self.H, dtype=float))
        E2 = self.eps_u * np.eye(m) if self.E2 is None \
            else np.atleast_2d(np.asarray(self.E2, dtype=float))
        if H.shape[0] != n:
            raise lmi.DimensionMismatchError(f"H has {H.shape[0]} rows, expected {n}")
        if E2.shape[1] != m:
            raise lmi.DimensionMismatchError(f"E2 has {E2.shape[1]} columns, expected {m}")
        return H, E2


@dataclass(frozen=True)
class SynthesisOptions:
    controller: str = "mixed"            # h2 | hinf | mixed
    robust: UncertaintySpec | None = None
    lambda1: float = 0.3                 # minimum closed-loop decay rate, 1/s
    a1: float = 1.0                      # weight on gamma^2 (mixed)
    a2: float = 1.0                      # weight on rho (mixed)
    bound_m: float = 1.0                 # X > M I floor (mixed)
    scale_states: bool = True            # diagonal balancing before synthesis
    solver: lmi.SolverOptions = field(default_factory=lmi.SolverOptions)

    def __post_init__(self):
        if self.controller not in ("h2", "hinf", "mixed"):
            raise ValueError(f"unknown controller kind {self.controller!r}")
        if self.lambda1 < 0:
            raise ValueError("lambda1 must be nonnegative")
        if self.a1 < 0 or self.a2 < 0 or self.a1 + self.a2 == 0:
            raise ValueError("mixed weights must be nonnegative with a1 + a2 > 0")
        if self.bound_m <= 0:
            raise ValueError("bound_m must be positive")


@dataclass
class ControllerDesign:
    K_def: np.ndarray
    L: np.ndarray | None
    gamma: float | None
    rho: float | None
    alpha: float | None
    options: SynthesisOptions
    certificates: dict = field(default_factory=dict)
    flags: tuple = ()
    model: StateSpaceModel | None = None   # synthesis model (observer internal)
    plant_hash: str = ""


def design_observer(A_cl: np.ndarray, C_cl: np.ndarray, Q=None, R=None) -> np.ndarray:
    """Estimator gain from the dual Riccati equation.

    Solves S for the pair (A_cl^T, C_cl^T) and maps back so that
    A_cl - L C_cl is Hurwitz.  Q defaults to I, R to I.
    """
    A_cl = np.atleast_2d(np.asarray(A_cl, dtype=float))
    C_cl = np.atleast_2d(np.asarray(C_cl, dtype=float))
    n, q = A_cl.shape[0], C_cl.shape[0]
    Q = np.eye(n) if Q is None else np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.eye(q) if R is None else np.atleast_2d(np.asarray(R, dtype=float))
    try:
        S = nk.solve_care(A_cl.T, C_cl.T, Q, R)
    except nk.NotStabilizableError as exc:
        raise NotDetectableError("(A_cl, C_cl) is not detectable") from exc
    L = S @ C_cl.T @ np.linalg.inv(R)
    if nk.spectral_abscissa(A_cl - L @ C_cl) >= 0:
        raise NotDetectableError("observer gain failed to stabilize the error dynamics")
    return L


def _embed(d: int, offset: int, k: int) -> np.ndarray:
    E = np.zeros((d, k))
    E[offset:offset + k, :] = np.eye(k)
    return E


def _lyap_terms(A, B, U=None):
    """Terms for (A X + B W) + (A X + B W)^T, optionally embedded by U."""
    n = A.shape[0]
    U = np.eye(n) if U is None else U
    return [
        lmi.Term(U @ A, "X", U.T),
        lmi.Term(U, "X", A.T @ U.T),
        lmi.Term(U @ B, "W", U.T),
        lmi.Term(U, "W", B.T @ U.T, transpose=True),
    ]


def _trace_lt_g2_block(q: int):
    terms = [lmi.Term(np.eye(q)[a:a + 1], "Z", np.eye(q)[:, a:a + 1]) for a in range(q)]
    terms.append(lmi.Term([[-1.0]], "g2", [[1.0]]))
    return lmi.AffineBlock("trace_z", [[0.0]], terms, lmi.NEGATIVE_DEFINITE)


def _h2_schur_block(C, D):
    q, n = C.shape
    d = q + n
    U1, U2 = _embed(d, 0, q), _embed(d, q, n)
    terms = [
        lmi.Term(-U1, "Z", U1.T),
        lmi.Term(U1 @ C, "X", U2.T),
        lmi.Term(U2, "X", C.T @ U1.T),
        lmi.Term(-U2, "X", U2.T),
    ]
    if np.any(D):
        terms += [lmi.Term(U1 @ D, "W", U2.T),
                  lmi.Term(U2, "W", D.T @ U1.T, transpose=True)]
    return lmi.AffineBlock("h2_schur", np.zeros((d, d)), terms, lmi.NEGATIVE_DEFINITE)


def _h2_lyap_block(A, B, B_d):
    return lmi.AffineBlock("h2_lyap", B_d @ B_d.T, _lyap_terms(A, B),
                           lmi.NEGATIVE_DEFINITE)


def _pole_block(A, B, lambda1: float):
    n = A.shape[0]
    terms = _lyap_terms(A, B)
    terms.append(lmi.Term(2 * lambda1 * np.eye(n), "X", np.eye(n)))
    return lmi.AffineBlock("pole_shift", np.zeros((n, n)), terms, lmi.NEGATIVE_DEFINITE)


def _x_floor_block(n: int, floor: float, name="x_pos"):
    return lmi.AffineBlock(name, -floor * np.eye(n),
                           [lmi.Term(np.eye(n), "X", np.eye(n))],
                           lmi.POSITIVE_DEFINITE)


def _brl_block(A, B, B_d, C, D, D_d):
    n, p, q = A.shape[0], B_d.shape[1], C.shape[0]
    d = n + p + q
    U1, U2, U3 = _embed(d, 0, n), _embed(d, n, p), _embed(d, n + p, q)
    const = U1 @ B_d @ U2.T + U2 @ B_d.T @ U1.T \
        + U3 @ D_d @ U2.T + U2 @ D_d.T @ U3.T
    terms = _lyap_terms(A, B, U1)
    terms += [
        lmi.Term(U1, "X", C.T @ U3.T),
        lmi.Term(U3 @ C, "X", U1.T),
        lmi.Term(-U2, "rho", U2.T),
        lmi.Term(-U3, "rho", U3.T),
    ]
    if np.any(D):
        terms += [lmi.Term(U1, "W", D.T @ U3.T, transpose=True),
                  lmi.Term(U3 @ D, "W", U1.T)]
    return lmi.AffineBlock("hinf_brl", const, terms, lmi.NEGATIVE_DEFINITE)


def robustify(blocks: list, A, B, B_d, C, D, D_d, uncertainty: UncertaintySpec) -> list:
    """Swap the nominal Lyapunov / bounded-real blocks for their
    uncertainty-augmented forms and require the scalar multiplier alpha > 0.

    Any block named "h2_lyap" becomes the 2x2 augmented block; any block
    named "hinf_brl" grows an extra E2 W row/column; other blocks pass
    through unchanged.
    """
    n, m = A.shape[0], B.shape[1]
    H, E2 = uncertainty.matrices(n, m)
    mH, mE = H.shape[1], E2.shape[0]
    out = []
    for block in blocks:
        if block.name == "h2_lyap":
            d = n + mE
            U1, U2 = _embed(d, 0, n), _embed(d, n, mE)
            terms = _lyap_terms(A, B, U1)
            terms.append(lmi.Term(U1 @ H, "alpha", H.T @ U1.T))
            terms += [lmi.Term(U1, "W", E2.T @ U2.T, transpose=True),
                      lmi.Term(U2 @ E2, "W", U1.T),
                      lmi.Term(-U2, "alpha", U2.T)]
            const = U1 @ (B_d @ B_d.T) @ U1.T
            out.append(lmi.AffineBlock("h2_lyap_robust", const, terms,
                                       lmi.NEGATIVE_DEFINITE))
        elif block.name == "hinf_brl":
            p, q = B_d.shape[1], C.shape[0]
            d = n + p + q + mE
            U1, U2 = _embed(d, 0, n), _embed(d, n, p)
            U3, U4 = _embed(d, n + p, q), _embed(d, n + p + q, mE)
            const = U1 @ B_d @ U2.T + U2 @ B_d.T @ U1.T \
                + U3 @ D_d @ U2.T + U2 @ D_d.T @ U3.T
            terms = _lyap_terms(A, B, U1)
            terms.append(lmi.Term(U1 @ H, "alpha", H.T @ U1.T))
            terms += [
                lmi.Term(U1, "X", C.T @ U3.T),
                lmi.Term(U3 @ C, "X", U1.T),
                lmi.Term(-U2, "rho", U2.T),
                lmi.Term(-U3, "rho", U3.T),
                lmi.Term(U1, "W", E2.T @ U4.T, transpose=True),
                lmi.Term(U4 @ E2, "W", U1.T),
                lmi.Term(-U4, "alpha", U4.T),
            ]
            if np.any(D):
                terms += [lmi.Term(U1, "W", D.T @ U3.T, transpose=True),
                          lmi.Term(U3 @ D, "W", U1.T)]
            out.append(lmi.AffineBlock("hinf_brl_robust", const, terms,
                                       lmi.NEGATIVE_DEFINITE))
        else:
            out.append(block)
    return out


def _balanced(sys: StateSpaceModel, enable: bool):
    """Diagonal state scaling x = T z for better LMI conditioning."""
    if not enable:
        return sys, np.eye(sys.n)
    _, T = sla.matrix_balance(sys.A, permute=False)
    return sys.transformed(T), T


def _check_stabilizable(A, B):
    if not nk._pbh_stabilizable(A, B):
        raise nk.NotStabilizableError("(A, B) is not stabilizable")


def _recover_gain(sol, T):
    X = sol.assignment["X"]
    W = sol.assignment["W"]
    K_scaled = W @ np.linalg.inv(X)
    reproduce = float(np.linalg.norm(K_scaled @ X - W) / (1 + np.linalg.norm(W)))
    return K_scaled @ np.linalg.inv(T), reproduce


def _certify(sys, K, lambda1, gamma=None, rho=None):
    cl = sys.closed_loop(K)
    abscissa = nk.spectral_abscissa(cl.A)
    certs = {"spectral_abscissa": abscissa}
    if abscissa >= -lambda1 + 1e-8:
        raise CertificateFailureError(
            f"closed-loop abscissa {abscissa:.4f} not below -lambda1 = {-lambda1}")
    if gamma is not None:
        h2 = nk.h2_norm(cl)
        certs["h2_norm"] = h2
        if h2 > gamma * (1 + CERT_TOL) + 1e-9:
            raise CertificateFailureError(
                f"verified H-2 norm {h2:.6g} exceeds attained {gamma:.6g} by >1%")
    if rho is not None:
        hinf = nk.hinf_norm(cl)
        certs["hinf_norm"] = hinf
        if hinf > rho * (1 + CERT_TOL) + 1e-9:
            raise CertificateFailureError(
                f"verified H-inf norm {hinf:.6g} exceeds attained {rho:.6g} by >1%")
    return certs


def _solve_or_raise(problem):
    sol = lmi.solve(problem)
    if sol.status == "Infeasible":
        raise InfeasibleError("synthesis LMIs are infeasible")
    if sol.status not in ("Optimal", "Feasible"):
        raise InfeasibleError(f"solver failed: {sol.status} ({sol.info.get('detail', '')})")
    return sol


def h2_synthesize(sys: StateSpaceModel, options: SynthesisOptions | None = None) -> ControllerDesign:
    """Minimize the disturbance-to-output energy bound gamma."""
    options = options or SynthesisOptions(controller="h2")
    _check_stabilizable(sys.A, sys.B)
    work, T = _balanced(sys, options.scale_states)
    n, m, q = work.n, work.m, work.q

    variables = [lmi.symmetric_var("X", n), lmi.rect_var("W", m, n),
                 lmi.symmetric_var("Z", q), lmi.scalar_var("g2")]
    blocks = [_trace_lt_g2_block(q),
              _h2_schur_block(work.C, work.D),
              _h2_lyap_block(work.A, work.B, work.B_d),
              _x_floor_block(n, 0.0)]
    if options.lambda1 > 0:
        blocks.append(_pole_block(work.A, work.B, options.lambda1))
    alpha = None
    if options.robust is not None:
        blocks = robustify(blocks, work.A, work.B, work.B_d, work.C, work.D,
                           work.D_d, options.robust)
        variables.append(lmi.scalar_var("alpha"))

    problem = lmi.build_problem(variables, blocks, {"g2": 1.0}, options.solver)
    sol = _solve_or_raise(problem)
    K, reproduce = _recover_gain(sol, T)
    gamma = float(np.sqrt(max(sol.assignment["g2"], 0.0)))
    if options.robust is not None:
        alpha = float(sol.assignment["alpha"])
    certs = _certify(sys, K, options.lambda1, gamma=gamma)
    certs["gain_reproduction"] = reproduce
    flags = ("gamma_above_one",) if gamma >= 1.0 else ()
    return ControllerDesign(K_def=K, L=None, gamma=gamma, rho=None, alpha=alpha,
                            options=options, certificates=certs, flags=flags, model=sys)


def hinf_synthesize(sys: StateSpaceModel, options: SynthesisOptions | None = None) -> ControllerDesign:
    """Minimize the worst-case disturbance amplification rho."""
    options = options or SynthesisOptions(controller="hinf")
    _check_stabilizable(sys.A, sys.B)
    work, T = _balanced(sys, options.scale_states)
    n, m = work.n, work.m

    variables = [lmi.symmetric_var("X", n), lmi.rect_var("W", m, n),
                 lmi.scalar_var("rho")]
    blocks = [_x_floor_block(n, 0.0),
              _brl_block(work.A, work.B, work.B_d, work.C, work.D, work.D_d)]
    if options.lambda1 > 0:
        blocks.append(_pole_block(work.A, work.B, options.lambda1))
    alpha = None
    if options.robust is not None:
        blocks = robustify(blocks, work.A, work.B, work.B_d, work.C, work.D,
                           work.D_d, options.robust)
        variables.append(lmi.scalar_var("alpha"))

    problem = lmi.build_problem(variables, blocks, {"rho": 1.0}, options.solver)
    sol = _solve_or_raise(problem)
    K, reproduce = _recover_gain(sol, T)
    rho = float(sol.assignment["rho"])
    if options.robust is not None:
        alpha = float(sol.assignment["alpha"])
    certs = _certify(sys, K, options.lambda1, rho=rho)
    certs["gain_reproduction"] = reproduce
    flags = ("rho_above_one",) if rho >= 1.0 else ()
    return ControllerDesign(K_def=K, L=None, gamma=None, rho=rho, alpha=alpha,
                            options=options, certificates=certs, flags=flags, model=sys)


def mixed_synthesize(sys: StateSpaceModel, options: SynthesisOptions | None = None) -> ControllerDesign:
    """Single program minimizing a1*gamma^2 + a2*rho over all blocks."""
    options = options or SynthesisOptions(controller="mixed")
    _check_stabilizable(sys.A, sys.B)
    work, T = _balanced(sys, options.scale_states)
    n, m, q = work.n, work.m, work.q

    # X > M I is stated in the original coordinates where X_orig = T X T^T;
    # X >= M max(1/t_i^2) I is sufficient under the diagonal transform.
    t_min = float(np.min(np.abs(np.diag(T)))) if options.scale_states else 1.0
    floor = options.bound_m / t_min**2

    variables = [lmi.symmetric_var("X", n), lmi.rect_var("W", m, n),
                 lmi.symmetric_var("Z", q), lmi.scalar_var("g2"),
                 lmi.scalar_var("rho")]
    blocks = [_pole_block(work.A, work.B, options.lambda1) if options.lambda1 > 0
              else _x_floor_block(n, 0.0, name="x_pos_aux"),
              _x_floor_block(n, floor, name="x_floor"),
              _trace_lt_g2_block(q),
              _h2_schur_block(work.C, work.D),
              _h2_lyap_block(work.A, work.B, work.B_d),
              _brl_block(work.A, work.B, work.B_d, work.C, work.D, work.D_d)]
    if options.robust is not None:
        blocks = robustify(blocks, work.A, work.B, work.B_d, work.C, work.D,
                           work.D_d, options.robust)
        variables.append(lmi.scalar_var("alpha"))

    problem = lmi.build_problem(variables, blocks,
                                {"g2": options.a1, "rho": options.a2}, options.solver)
    sol = _solve_or_raise(problem)
    K, reproduce = _recover_gain(sol, T)
    gamma = float(np.sqrt(max(sol.assignment["g2"], 0.0)))
    rho = float(sol.assignment["rho"])
    alpha = float(sol.assignment["alpha"]) if options.robust is not None else None
    certs = _certify(sys, K, options.lambda1,
                     gamma=gamma if options.a1 > 0 else None,
                     rho=rho if options.a2 > 0 else None)
    certs["gain_reproduction"] = reproduce
    X_orig = T @ sol.assignment["X"] @ T.T
    certs["x_min_singular_value"] = float(np.linalg.svd(X_orig, compute_uv=False)[-1])
    if certs["x_min_singular_value"] < options.bound_m * (1 - 1e-6):
        raise CertificateFailureError(
            f"smallest singular value of X {certs['x_min_singular_value']:.4g} "
            f"below the floor M = {options.bound_m}")
    flags = ("gamma_above_one",) if gamma >= 1.0 else ()
    return ControllerDesign(K_def=K, L=None, gamma=gamma, rho=rho, alpha=alpha,
                            options=options, certificates=certs, flags=flags, model=sys)


def synthesize(sys: StateSpaceModel, options: SynthesisOptions) -> ControllerDesign:
    fn = {"h2": h2_synthesize, "hinf": hinf_synthesize, "mixed": mixed_synthesize}
    return fn[options.controller](sys, options)


def _mode_residues(A, B_cols, C):
    """Oscillatory modes ranked by controllability-observability residue."""
    lam, V = np.linalg.eig(A)
    Wl = np.linalg.inv(V)  # rows are left eigenvectors
    modes = []
    for i, li in enumerate(lam):
        if li.imag <= 1e-9:  # one of each conjugate pair
            continue
        res = np.linalg.norm(Wl[i] @ B_cols) * np.linalg.norm(C @ V[:, i])
        modes.append((float(res), i))
    modes.sort(key=lambda t: (-t[0], t[1]))
    return lam, V, Wl, [i for _, i in modes]


def _destab_lmi(A, Bc, delta_r, solver):
    n, mb = A.shape[0], Bc.shape[1]
    variables = [lmi.symmetric_var("X", n), lmi.rect_var("W", mb, n)]
    terms = _lyap_terms(A, Bc)
    terms.append(lmi.Term(-2 * delta_r * np.eye(n), "X", np.eye(n)))
    grow = lmi.AffineBlock("grow", np.zeros((n, n)), terms, lmi.POSITIVE_DEFINITE)
    pos = _x_floor_block(n, 0.0)
    problem = lmi.build_problem(variables, [grow, pos], options=solver)
    sol = lmi.solve(problem)
    if sol.status not in ("Optimal", "Feasible"):
        return None
    return sol.assignment["W"] @ np.linalg.inv(sol.assignment["X"])


def attack_gain_synthesize(sys: StateSpaceModel, attack_buses, delta_r: float = 0.25,
                           solver: lmi.SolverOptions | None = None) -> np.ndarray:
    """Adversary gain pushing closed-loop eigenvalues right of +delta_r.

    Tries the full-state region placement first; if that is infeasible the
    problem is restricted to the best-controllable oscillatory modal plane
    and the planar gain is lifted back through the modal projector.  The
    returned gain maps plant state to per-unit load per attacked bus and is
    certified by max Re eig(A + B_d K) >= delta_r.
    """
    solver = solver or lmi.SolverOptions()
    cols = [sys.disturbance_labels.index(b) for b in attack_buses]
    Bc = sys.B_d[:, cols]
    if not np.any(Bc):
        raise InfeasibleError("attack buses have no influence on the dynamics")

    K = _destab_lmi(sys.A, Bc, delta_r, solver)
    if K is not None and nk.spectral_abscissa(sys.A + Bc @ K) >= delta_r - 1e-9:
        return K

    lam, V, Wl, order = _mode_residues(sys.A, Bc, sys.C)
    for i in order:
        Vr = np.column_stack([V[:, i].real, V[:, i].imag])
        Wr = np.vstack([Wl[i].real, Wl[i].imag])
        P = np.linalg.solve(Wr @ Vr, Wr)         # oblique modal projector
        A_sub = P @ sys.A @ Vr                   # 2x2 rotation block
        B_sub = P @ Bc
        K_sub = _destab_lmi(A_sub, B_sub, delta_r, solver)
        if K_sub is None:
            continue
        K = K_sub @ P
        if nk.spectral_abscissa(sys.A + Bc @ K) >= delta_r - 1e-9:
            return K
    raise InfeasibleError(
        f"no attack gain shifts an eigenvalue right of {delta_r} from the given buses")


def design_to_text(design: ControllerDesign) -> str:
    """Serialize a design (gains row-major, attained scalars, options echo)."""
    opts = design.options
    payload = {
        "k_def": design.K_def.tolist(),
        "l": design.L.tolist() if design.L is not None else None,
        "gamma": design.gamma,
        "rho": design.rho,
        "alpha": design.alpha,
        "certificates": design.certificates,
        "flags": list(design.flags),
        "plant_hash": design.plant_hash,
        "options": {
            "controller": opts.controller,
            "lambda1": opts.lambda1,
            "a1": opts.a1,
            "a2": opts.a2,
            "bound_m": opts.bound_m,
            "scale_states": opts.scale_states,
            "robust_eps": opts.robust.eps_u if opts.robust else None,
        },
        "model": None if design.model is None else {
            "A": design.model.A.tolist(),
            "B": design.model.B.tolist(),
            "B_d": design.model.B_d.tolist(),
            "C": design.model.C.tolist(),
            "D": design.model.D.tolist(),
            "D_d": design.model.D_d.tolist(),
            "input_labels": [list(t) for t in design.model.input_labels],
            "output_labels": list(design.model.output_labels),
            "disturbance_labels": list(design.model.disturbance_labels),
            "u_base_mw": design.model.u_base_mw,
        },
    }
    return json.dumps(payload, sort_keys=True, indent=1)


def design_from_text(text: str) -> ControllerDesign:
    d = json.loads(text)
    o = d["options"]
    robust = UncertaintySpec(eps_u=o["robust_eps"]) if o.get("robust_eps") is not None else None
    options = SynthesisOptions(controller=o["controller"], robust=robust,
                               lambda1=o["lambda1"], a1=o["a1"], a2=o["a2"],
                               bound_m=o["bound_m"], scale_states=o["scale_states"])
    model = None
    if d.get("model") is not None:
        md = d["model"]
        model = StateSpaceModel(
            A=md["A"], B=md["B"], B_d=md["B_d"], C=md["C"], D=md["D"], D_d=md["D_d"],
            input_labels=tuple((int(b), str(c)) for b, c in md["input_labels"]),
            output_labels=tuple(md["output_labels"]),
            disturbance_labels=tuple(md["disturbance_labels"]),
            u_base_mw=md["u_base_mw"])
    return ControllerDesign(
        K_def=np.asarray(d["k_def"], dtype=float),
        L=None if d["l"] is None else np.asarray(d["l"], dtype=float),
        gamma=d["gamma"], rho=d["rho"], alpha=d["alpha"],
        options=options, certificates=d["certificates"],
        flags=tuple(d["flags"]), model=model, plant_hash=d.get("plant_hash", ""))
