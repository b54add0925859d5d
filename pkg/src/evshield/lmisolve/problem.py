"""LMI problem modeling: matrix decision variables, affine symmetric blocks
with a definiteness sense, and a linear objective.

A block stores the affine map

    M(v) = sym( constant + sum_t  L_t * V_t(^T) * R_t )

where each term references a declared variable (scalar variables act as
v * I between their left/right coefficients).  Strict inequalities are
converted to non-strict ones by an absolute shift eps:  M < 0  is stored as
M <= -eps*I  and  M > 0  as  M >= eps*I.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DimensionMismatchError",
    "UnknownVariableError",
    "DecisionVar",
    "Term",
    "AffineBlock",
    "LmiProblem",
    "LmiSolution",
    "build_problem",
    "check_assignment",
    "dump_problem",
    "solve",
]

NEGATIVE_DEFINITE = "negative_definite"
POSITIVE_DEFINITE = "positive_definite"


class DimensionMismatchError(ValueError):
    pass


class UnknownVariableError(KeyError):
    pass


@dataclass(frozen=True)
class DecisionVar:
    """A named scalar, rectangular or symmetric matrix decision variable."""

    name: str
    kind: str  # "scalar" | "rectangular" | "symmetric"
    rows: int = 1
    cols: int = 1

    def __post_init__(self):
        if self.kind not in ("scalar", "rectangular", "symmetric"):
            raise ValueError(f"unknown variable kind {self.kind!r}")
        if self.kind == "scalar":
            object.__setattr__(self, "rows", 1)
            object.__setattr__(self, "cols", 1)
        if self.kind == "symmetric" and self.rows != self.cols:
            raise DimensionMismatchError("symmetric variable must be square")
        if self.rows < 1 or self.cols < 1:
            raise DimensionMismatchError("variable dimensions must be >= 1")

    @property
    def num_components(self) -> int:
        if self.kind == "symmetric":
            return self.rows * (self.rows + 1) // 2
        return self.rows * self.cols

    def component_index_pairs(self):
        if self.kind == "symmetric":
            return [(i, j) for i in range(self.rows) for j in range(i, self.rows)]
        return [(i, j) for i in range(self.rows) for j in range(self.cols)]

    def pack(self, value) -> np.ndarray:
        value = np.atleast_2d(np.asarray(value, dtype=float))
        if value.shape != (self.rows, self.cols):
            raise DimensionMismatchError(
                f"value for {self.name} has shape {value.shape}, expected {(self.rows, self.cols)}")
        return np.array([value[i, j] for i, j in self.component_index_pairs()])

    def unpack(self, comps: np.ndarray) -> np.ndarray:
        V = np.zeros((self.rows, self.cols))
        for k, (i, j) in enumerate(self.component_index_pairs()):
            V[i, j] = comps[k]
            if self.kind == "symmetric":
                V[j, i] = comps[k]
        if self.kind == "scalar":
            return V  # 1x1; callers may take [0, 0]
        return V


def scalar_var(name: str) -> DecisionVar:
    return DecisionVar(name, "scalar")


def symmetric_var(name: str, n: int) -> DecisionVar:
    return DecisionVar(name, "symmetric", n, n)


def rect_var(name: str, rows: int, cols: int) -> DecisionVar:
    return DecisionVar(name, "rectangular", rows, cols)


@dataclass(frozen=True)
class Term:
    """One affine contribution  left @ V(^T) @ right  to a block."""

    left: np.ndarray
    var: str
    right: np.ndarray
    transpose: bool = False

    def __post_init__(self):
        object.__setattr__(self, "left", np.atleast_2d(np.asarray(self.left, dtype=float)))
        object.__setattr__(self, "right", np.atleast_2d(np.asarray(self.right, dtype=float)))


@dataclass
class AffineBlock:
    """A symmetric affine matrix constrained definite in the given sense."""

    name: str
    constant: np.ndarray
    terms: list
    sense: str = NEGATIVE_DEFINITE
    strict: bool = True
    eps: float | None = None  # filled from problem default when strict

    def __post_init__(self):
        self.constant = np.atleast_2d(np.asarray(self.constant, dtype=float))
        if self.constant.shape[0] != self.constant.shape[1]:
            raise DimensionMismatchError(f"block {self.name}: constant must be square")
        if self.sense not in (NEGATIVE_DEFINITE, POSITIVE_DEFINITE):
            raise ValueError(f"block {self.name}: unknown sense {self.sense!r}")

    @property
    def dim(self) -> int:
        return self.constant.shape[0]


@dataclass
class SolverOptions:
    max_iter: int = 100
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    infeas_cert_tol: float = 1e-6
    eps_base: float = 1e-6  # strictness shift scale


@dataclass
class LmiProblem:
    variables: list
    blocks: list
    objective: dict  # var name -> weight (scalar value / trace for matrices)
    options: SolverOptions = field(default_factory=SolverOptions)
    default_eps: float = 0.0

    def var(self, name: str) -> DecisionVar:
        for v in self.variables:
            if v.name == name:
                return v
        raise UnknownVariableError(name)

    @property
    def num_components(self) -> int:
        return sum(v.num_components for v in self.variables)

    def component_slices(self):
        slices, at = {}, 0
        for v in self.variables:
            slices[v.name] = slice(at, at + v.num_components)
            at += v.num_components
        return slices

    def pack(self, assignment: dict) -> np.ndarray:
        out = np.zeros(self.num_components)
        for v, sl in zip(self.variables, self.component_slices().values()):
            if v.name not in assignment:
                raise UnknownVariableError(f"assignment missing variable {v.name}")
            out[sl] = v.pack(assignment[v.name])
        return out

    def unpack(self, comps: np.ndarray) -> dict:
        out = {}
        for v, sl in zip(self.variables, self.component_slices().values()):
            val = v.unpack(comps[sl])
            out[v.name] = float(val[0, 0]) if v.kind == "scalar" else val
        return out

    def objective_value(self, assignment: dict) -> float | None:
        if not self.objective:
            return None
        total = 0.0
        for name, w in self.objective.items():
            v = self.var(name)
            val = assignment[name]
            total += w * (float(np.trace(np.atleast_2d(val))) if v.kind != "scalar"
                          else float(np.asarray(val).reshape(())))
        return total


@dataclass
class LmiSolution:
    status: str  # Optimal | Feasible | Infeasible | NumericalFailure
    assignment: dict | None
    objective: float | None
    worst_violation: float | None
    info: dict = field(default_factory=dict)


def _term_value(block: AffineBlock, term: Term, var: DecisionVar, value) -> np.ndarray:
    L, R = term.left, term.right
    if var.kind == "scalar":
        v = float(np.asarray(value).reshape(()))
        if L.shape[1] != R.shape[0]:
            raise DimensionMismatchError(f"block {block.name}: scalar term L/R not conformal")
        return v * (L @ R)
    V = np.atleast_2d(np.asarray(value, dtype=float))
    V = V.T if term.transpose else V
    if L.shape[1] != V.shape[0] or V.shape[1] != R.shape[0]:
        raise DimensionMismatchError(f"block {block.name}: term on {var.name} not conformal")
    return L @ V @ R


def evaluate_block(problem: LmiProblem, block: AffineBlock, assignment: dict) -> np.ndarray:
    """The symmetrized block value M(v) (no strictness shift applied)."""
    M = block.constant.copy()
    for term in block.terms:
        var = problem.var(term.var)
        M = M + _term_value(block, term, var, assignment[term.var])
    return 0.5 * (M + M.T)


def _validate(problem: LmiProblem):
    names = [v.name for v in problem.variables]
    if len(set(names)) != len(names):
        raise ValueError("variable names must be unique")
    if not problem.blocks:
        raise ValueError("problem needs at least one block")
    for name in problem.objective:
        problem.var(name)  # raises UnknownVariableError
    for block in problem.blocks:
        d = block.dim
        for term in block.terms:
            var = problem.var(term.var)  # raises UnknownVariableError
            L, R = term.left, term.right
            if L.shape[0] != d or R.shape[1] != d:
                raise DimensionMismatchError(
                    f"block {block.name}: term on {var.name} does not span the block")
            if var.kind == "scalar":
                if L.shape[1] != R.shape[0]:
                    raise DimensionMismatchError(
                        f"block {block.name}: scalar term L/R not conformal")
            else:
                r, c = (var.cols, var.rows) if term.transpose else (var.rows, var.cols)
                if L.shape[1] != r or R.shape[0] != c:
                    raise DimensionMismatchError(
                        f"block {block.name}: term on {var.name} not conformal")


def build_problem(variables, blocks, objective=None, options: SolverOptions | None = None) -> LmiProblem:
    """Validate and finalize an LMI problem.

    Strict blocks without an explicit eps get the shift
    eps = eps_base * (1 + ||constant||_F of that block), so identical blocks
    are shifted identically across problems.
    """
    problem = LmiProblem(list(variables), list(blocks), dict(objective or {}),
                         options or SolverOptions())
    _validate(problem)
    max_const = max(np.linalg.norm(b.constant, "fro") for b in problem.blocks)
    problem.default_eps = problem.options.eps_base * (1.0 + max_const)
    for block in problem.blocks:
        if block.strict and block.eps is None:
            block.eps = problem.options.eps_base * (
                1.0 + np.linalg.norm(block.constant, "fro"))
        elif not block.strict and block.eps is None:
            block.eps = 0.0
    return problem


def check_assignment(problem: LmiProblem, assignment: dict) -> dict:
    """Exact eigenvalue violations per block for a full assignment.

    For a negative_definite block the violation is the most positive
    eigenvalue of M(v); for positive_definite it is -lambda_min(M(v)).
    Negative violations mean the constraint holds strictly.
    """
    problem.pack(assignment)  # raises on missing vars / wrong shapes
    out = {}
    for block in problem.blocks:
        M = evaluate_block(problem, block, assignment)
        eigs = np.linalg.eigvalsh(M)
        if block.sense == NEGATIVE_DEFINITE:
            out[block.name] = float(eigs[-1])
        else:
            out[block.name] = float(-eigs[0])
    return out


def _component_coefficients(block: AffineBlock, var: DecisionVar, term: Term):
    """Yield (component_offset, dM) pairs for one term, unsymmetrized."""
    L, R = term.left, term.right
    if var.kind == "scalar":
        yield 0, L @ R
        return
    pairs = var.component_index_pairs()
    for k, (a, b) in enumerate(pairs):
        if var.kind == "symmetric":
            dM = np.outer(L[:, a], R[b, :])
            if a != b:
                dM = dM + np.outer(L[:, b], R[a, :])
        elif term.transpose:
            dM = np.outer(L[:, b], R[a, :])
        else:
            dM = np.outer(L[:, a], R[b, :])
        yield k, dM


def compile_standard_form(problem: LmiProblem):
    """Compile to  minimize c^T v  s.t.  G_k + sum_i v_i F_ki >= 0  per block.

    Returns (c, blocks) with blocks a list of (G, F) where F has shape
    (num_components, dim, dim); sense and strictness shifts are folded in.
    """
    ncomp = problem.num_components
    slices = problem.component_slices()

    c = np.zeros(ncomp)
    for name, w in problem.objective.items():
        var = problem.var(name)
        sl = slices[name]
        if var.kind == "scalar":
            c[sl.start] += w
        else:
            for k, (i, j) in enumerate(var.component_index_pairs()):
                if i == j:
                    c[sl.start + k] += w

    compiled = []
    for block in problem.blocks:
        d = block.dim
        sign = -1.0 if block.sense == NEGATIVE_DEFINITE else 1.0
        G = sign * block.constant - block.eps * np.eye(d)
        G = 0.5 * (G + G.T)
        F = np.zeros((ncomp, d, d))
        for term in block.terms:
            var = problem.var(term.var)
            base = slices[term.var].start
            for k, dM in _component_coefficients(block, var, term):
                F[base + k] += sign * dM
        F = 0.5 * (F + np.transpose(F, (0, 2, 1)))
        compiled.append((G, F))
    return c, compiled


def dump_problem(problem: LmiProblem) -> str:
    """Plain-text dump for offline inspection (see docs/formats.md)."""
    lines = [f"lmi-problem components={problem.num_components} blocks={len(problem.blocks)}"]
    for v in problem.variables:
        lines.append(f"var {v.name} {v.kind} {v.rows} {v.cols}")
    if problem.objective:
        parts = " ".join(f"{k}:{w:.17g}" for k, w in problem.objective.items())
        lines.append(f"objective minimize {parts}")
    for block in problem.blocks:
        lines.append(f"block {block.name} dim={block.dim} sense={block.sense} "
                     f"strict={int(block.strict)} eps={block.eps:.17g}")
        lines.append("constant")
        for row in block.constant:
            lines.append(" ".join(f"{x:.17g}" for x in row))
        for t in block.terms:
            lines.append(f"term var={t.var} transpose={int(t.transpose)} "
                         f"left={t.left.shape[0]}x{t.left.shape[1]} "
                         f"right={t.right.shape[0]}x{t.right.shape[1]}")
            for row in t.left:
                lines.append(" ".join(f"{x:.17g}" for x in row))
            for row in t.right:
                lines.append(" ".join(f"{x:.17g}" for x in row))
    return "\n".join(lines) + "\n"


def solve(problem: LmiProblem) -> LmiSolution:
    """Solve the LMI problem with the dense interior-point engine.

    Deterministic given identical inputs.  On Optimal/Feasible exits, the
    returned assignment re-verifies through check_assignment at <= eps/2.
    """
    from . import ipm

    c, compiled = compile_standard_form(problem)
    ncomp = problem.num_components

    # Column equilibration: v_i' = s_i v_i with F' = F / s_i keeps the
    # problem equivalent while balancing badly scaled synthesis variables.
    colnorm = np.zeros(ncomp)
    for G, F in compiled:
        colnorm = np.maximum(colnorm, np.linalg.norm(F.reshape(ncomp, -1), axis=1))
    s = np.where(colnorm > 0, colnorm, 1.0)
    # Per-block row scaling preserves feasibility and the variable values.
    blocks_scaled = []
    for G, F in compiled:
        Fs = F / s[:, None, None]
        r = max(np.linalg.norm(G, "fro"), np.linalg.norm(Fs.reshape(ncomp, -1), axis=1).max(initial=0.0))
        r = r if r > 0 else 1.0
        blocks_scaled.append((G / r, Fs / r))
    c_scaled = c / s
    cnorm = np.linalg.norm(c_scaled)
    obj_scale = cnorm if cnorm > 0 else 1.0

    res = ipm.solve_sdp(
        A_blocks=[-F for _, F in blocks_scaled],
        b=-c_scaled / obj_scale,
        C_blocks=[G for G, _ in blocks_scaled],
        max_iter=problem.options.max_iter,
        gap_tol=problem.options.gap_tol,
        feas_tol=problem.options.feas_tol,
        cert_tol=problem.options.infeas_cert_tol,
    )

    info = {"iterations": res.iterations, "residuals": res.residuals,
            "detail": res.detail}
    if res.status == "optimal":
        v = res.y / s
        assignment = problem.unpack(v)
        worst = max(check_assignment(problem, assignment).values())
        status = "Optimal" if problem.objective else "Feasible"
        tol_ok = worst <= max(problem.default_eps, 1e-12) / 2
        if not tol_ok:
            status = "NumericalFailure"
            info["detail"] = f"solution violates blocks by {worst:.3e}"
        info["dual_bound"] = -res.pobj * obj_scale
        return LmiSolution(status=status, assignment=assignment,
                           objective=problem.objective_value(assignment),
                           worst_violation=worst, info=info)
    if res.status == "dual_infeasible":
        return LmiSolution(status="Infeasible", assignment=None, objective=None,
                           worst_violation=None, info=info)
    if res.status == "primal_infeasible":
        info["detail"] = "objective unbounded below over the feasible set"
        return LmiSolution(status="NumericalFailure", assignment=None, objective=None,
                           worst_violation=None, info=info)
    return LmiSolution(status="NumericalFailure", assignment=None, objective=None,
                       worst_violation=None, info=info)
