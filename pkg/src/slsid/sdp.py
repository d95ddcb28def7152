"""Finite-dimensional conic programs: peak-gain blocks and achievability equalities.

The H-infinity bound on an FIR transfer matrix F is encoded by the bordered
block ``H(Q, F, t) = [[Q, vec(F)], [vec(F)^T, t I]]`` being PSD together with
the trace-slice equalities ``sum_j Q_[j+k, j] = delta_{k0} t I`` for
k = 0..T-1. At any feasible point the realized F has peak gain at most t;
minimizing t recovers the norm.

Solving is delegated to interior-point (CLARABEL) or operator-splitting
(SCS) backends behind a single adapter, with a-posteriori verification of
equality residuals and PSD eigenvalue bounds before a solution is reported
as Optimal.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .fir import FirMimo

# residual bars a solution must meet to be reported Optimal
EQ_RESIDUAL_BAR = 1e-7
PSD_EIG_BAR = -1e-7

# CLARABEL's default static regularization (1e-8) makes it fail with zero
# step size on synthesis programs with horizon >= 32; 1e-7 is reliable
CLARABEL_OPTS = {"static_regularization_constant": 1e-7}

# largest bordered-block order we hand to the interior-point backend;
# beyond this its per-iteration factorization cost dominates and the
# operator-splitting backend wins by an order of magnitude
IPM_MAX_BLOCK_ORDER = 80


class SolverFailure(RuntimeError):
    """The backend broke down (as opposed to proving infeasibility)."""


class SolverStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    NUMERICAL_ERROR = "numerical-error"


@dataclass
class SolverReport:
    """Outcome of one conic solve.

    ``status`` is Optimal only if the realized solution passed the residual
    bars; ``converged`` records whether the backend itself claimed success,
    so loosely-converged large solves can be told apart from breakdowns.
    """

    status: SolverStatus
    objective: float | None
    solve_time: float
    eq_residual: float
    min_psd_eig: float
    solver_name: str
    raw_status: str
    converged: bool


@dataclass
class HinfBlock:
    """Bookkeeping for one bordered PSD block H(Q, F, t)."""

    Q: cp.Variable
    F_blocks: list
    t: cp.Expression
    horizon: int
    p: int
    q: int


class ConicProblem:
    """Declarative container: variables, equalities, PSD memberships, objective."""

    def __init__(self):
        self.equalities: list[cp.constraints.constraint.Constraint] = []
        self.psd_constraints: list = []
        self.other_constraints: list = []
        self.hinf_blocks: list[HinfBlock] = []
        self.objective: cp.expressions.expression.Expression | None = None
        self._problem: cp.Problem | None = None

    def add_equality(self, lhs, rhs) -> int:
        """Impose lhs == rhs; returns the number of scalar equalities."""
        con = lhs == rhs
        self.equalities.append(con)
        self._problem = None
        return int(np.prod(con.shape)) if con.shape else 1

    def add_psd(self, expr) -> None:
        self.psd_constraints.append(expr >> 0)
        self._problem = None

    def add_inequality(self, con) -> None:
        self.other_constraints.append(con)
        self._problem = None

    def minimize(self, expr) -> None:
        self.objective = expr
        self._problem = None

    @property
    def constraints(self) -> list:
        return self.equalities + self.psd_constraints + self.other_constraints

    def compiled(self) -> cp.Problem:
        if self._problem is None:
            objective = self.objective if self.objective is not None else 0.0
            self._problem = cp.Problem(cp.Minimize(objective), self.constraints)
        return self._problem

    def max_psd_order(self) -> int:
        orders = [c.args[0].shape[0] for c in self.psd_constraints]
        return max(orders, default=0)


def _as_expr_blocks(F, T: int):
    """Normalize an FIR expression into a length-T list of 2-D blocks."""
    if isinstance(F, FirMimo):
        if F.horizon != T:
            raise ValueError(f"horizon mismatch: FIR has {F.horizon}, block wants {T}")
        return [np.atleast_2d(b) for b in F.blocks]
    if len(F) != T:
        raise ValueError(f"horizon mismatch: got {len(F)} blocks, expected {T}")
    return list(F)


def add_hinf_epigraph(problem: ConicProblem, F_expr, t_var, T: int) -> HinfBlock:
    """Constrain the peak gain of the FIR expression F to be at most t.

    Adds the bordered PSD block and its trace-slice equalities. When t is
    minimized the bound is tight to solver tolerance.
    """
    blocks = _as_expr_blocks(F_expr, T)
    shape0 = blocks[0].shape
    p, q = int(shape0[0]), int(shape0[1])
    Q = cp.Variable((T * q, T * q), symmetric=True)
    vec = cp.vstack([b.T for b in blocks])
    t_corner = t_var * np.eye(p) if p > 1 else cp.reshape(t_var, (1, 1), order="F")
    H = cp.bmat([[Q, vec], [vec.T, t_corner]])
    problem.add_psd(H)
    for k in range(T):
        acc = sum(Q[(j + k) * q : (j + k + 1) * q, j * q : (j + 1) * q] for j in range(T - k))
        if k == 0:
            rhs = t_var * np.eye(q) if q > 1 else cp.reshape(t_var, (1, 1), order="F")
            problem.add_equality(acc, rhs)
        else:
            problem.add_equality(acc, np.zeros((q, q)))
    block = HinfBlock(Q=Q, F_blocks=blocks, t=t_var, horizon=T, p=p, q=q)
    problem.hinf_blocks.append(block)
    return block


@dataclass
class ResponseVars:
    """FIR decision blocks for the closed-loop response quadruple.

    R (n x n), M (1 x n), N (n x 1) are strictly proper, so their lag-0
    blocks are constant zeros rather than variables; L (1 x 1) is proper.
    """

    R: list
    M: list
    N: list
    L: list
    horizon: int
    n: int

    def value(self) -> dict[str, FirMimo]:
        def blk(seq):
            return FirMimo(
                np.array([b if isinstance(b, np.ndarray) else b.value for b in seq])
            )

        return {"R": blk(self.R), "M": blk(self.M), "N": blk(self.N), "L": blk(self.L)}


def make_response_vars(n: int, T: int) -> ResponseVars:
    R = [np.zeros((n, n))] + [cp.Variable((n, n)) for _ in range(T - 1)]
    M = [np.zeros((1, n))] + [cp.Variable((1, n)) for _ in range(T - 1)]
    N = [np.zeros((n, 1))] + [cp.Variable((n, 1)) for _ in range(T - 1)]
    L = [cp.Variable((1, 1)) for _ in range(T)]
    return ResponseVars(R=R, M=M, N=N, L=L, horizon=T, n=n)


def add_sls_equalities(problem: ConicProblem, plant, theta: ResponseVars, T: int) -> int:
    """Coefficient-wise achievability equalities under FIR truncation.

    Imposes both block equations of the affine response parameterization,
    padded so the truncated tail closes exactly (the lag-T coefficients of
    each recursion are pinned to zero). Returns the number of scalar
    equalities added, which is exactly 2 (n^2 + n) T.
    """
    n, A, B2, C2 = plant.state_dim, plant.A, plant.B2, plant.C2
    if theta.n != n or theta.horizon != T:
        raise ValueError("response variables do not match plant/horizon")
    count = 0
    zero_nn, zero_n1, zero_1n = np.zeros((n, n)), np.zeros((n, 1)), np.zeros((1, n))
    for k in range(T):
        Rn = theta.R[k + 1] if k + 1 < T else zero_nn
        Nn = theta.N[k + 1] if k + 1 < T else zero_n1
        Mn = theta.M[k + 1] if k + 1 < T else zero_1n
        eye = np.eye(n) if k == 0 else zero_nn
        count += problem.add_equality(Rn, A @ theta.R[k] + B2 @ theta.M[k] + eye)
        count += problem.add_equality(Nn, A @ theta.N[k] + B2 @ theta.L[k])
        count += problem.add_equality(Rn, theta.R[k] @ A + theta.N[k] @ C2 + eye)
        count += problem.add_equality(Mn, theta.M[k] @ A + theta.L[k] @ C2)
    return count


def _verify(problem: ConicProblem) -> tuple[float, float]:
    eq_res = 0.0
    for con in problem.equalities:
        if con.expr.value is not None:
            eq_res = max(eq_res, float(np.max(np.abs(con.expr.value))))
    min_eig = 0.0
    for con in problem.psd_constraints:
        H = con.args[0].value
        if H is not None:
            H = 0.5 * (H + H.T)
            min_eig = min(min_eig, float(np.linalg.eigvalsh(H)[0]))
    return eq_res, min_eig


def solve(
    problem: ConicProblem,
    backend: str | None = None,
    loose: bool = False,
    scs_eps: float = 1e-6,
) -> SolverReport:
    """Solve and verify; Optimal is only reported after the residual check.

    ``backend`` forces CLARABEL or SCS; by default the interior-point solver
    handles problems whose largest PSD block order is moderate and the
    operator-splitting solver takes the rest. ``loose`` keeps the large-solve
    accuracy at ``scs_eps`` instead of certification grade.
    """
    prob = problem.compiled()
    if backend is None:
        backend = "CLARABEL" if problem.max_psd_order() <= IPM_MAX_BLOCK_ORDER else "SCS"
    order = [backend, "SCS" if backend == "CLARABEL" else "CLARABEL"]
    t0 = time.time()
    raw_status = "unattempted"
    for name in order:
        try:
            if name == "CLARABEL":
                prob.solve(solver=cp.CLARABEL, **CLARABEL_OPTS)
            else:
                eps = scs_eps if loose else 1e-8
                prob.solve(solver=cp.SCS, eps=eps, max_iters=100_000)
        except Exception as exc:  # backend blew up entirely
            raw_status = f"{name}:exception:{type(exc).__name__}"
            continue
        raw_status = f"{name}:{prob.status}"
        if prob.status in (cp.OPTIMAL, cp.INFEASIBLE, cp.OPTIMAL_INACCURATE):
            break
    elapsed = time.time() - t0

    if prob.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return SolverReport(
            status=SolverStatus.INFEASIBLE,
            objective=None,
            solve_time=elapsed,
            eq_residual=float("nan"),
            min_psd_eig=float("nan"),
            solver_name=raw_status.split(":")[0],
            raw_status=raw_status,
            converged=True,
        )
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or prob.value is None:
        return SolverReport(
            status=SolverStatus.NUMERICAL_ERROR,
            objective=None,
            solve_time=elapsed,
            eq_residual=float("nan"),
            min_psd_eig=float("nan"),
            solver_name=raw_status.split(":")[0],
            raw_status=raw_status,
            converged=False,
        )
    eq_res, min_eig = _verify(problem)
    certified = eq_res <= EQ_RESIDUAL_BAR and min_eig >= PSD_EIG_BAR
    return SolverReport(
        status=SolverStatus.OPTIMAL if certified else SolverStatus.NUMERICAL_ERROR,
        objective=float(prob.value),
        solve_time=elapsed,
        eq_residual=eq_res,
        min_psd_eig=min_eig,
        solver_name=raw_status.split(":")[0],
        raw_status=raw_status,
        converged=True,
    )


def hinf_norm_via_sdp(f: FirMimo, tol: float = 1e-8) -> float:
    """Minimal certified peak-gain bound for a fixed FIR."""
    problem = ConicProblem()
    t = cp.Variable(nonneg=True)
    add_hinf_epigraph(problem, f, t, f.horizon)
    problem.minimize(t)
    report = solve(problem)
    if report.status is SolverStatus.OPTIMAL:
        return float(report.objective)
    if report.converged and report.objective is not None:
        # loosely converged: still a valid value within solver accuracy
        return float(report.objective)
    raise SolverFailure(f"peak-gain program failed: {report.raw_status}")


def dump_problem(problem: ConicProblem, path: str) -> None:
    """Write the compiled conic data in a plain-text sparse triplet format.

    Layout: a header with the variable count and cone sizes, then the
    objective vector ``c`` as ``index value`` lines, then the constraint
    matrix ``A`` as ``row col value`` triplets, then the offset vector ``b``.
    Cones follow the SCS convention (zero cone rows first, then nonnegative,
    then vectorized PSD triangles).
    """
    data, _, _ = problem.compiled().get_problem_data(cp.SCS)
    A, b, c = data["A"], data["b"], data["c"]
    cones = data["dims"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("conic-problem v1\n")
        fh.write(f"vars {c.size}\n")
        psd = ",".join(str(s) for s in cones.psd) if cones.psd else ""
        fh.write(f"cones zero={cones.zero} nonneg={cones.nonneg} psd=[{psd}]\n")
        fh.write(f"c {c.size}\n")
        for i, v in enumerate(c):
            if v != 0.0:
                fh.write(f"{i} {v:.17g}\n")
        coo = A.tocoo()
        fh.write(f"A {coo.nnz}\n")
        for r_, c_, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r_} {c_} {v:.17g}\n")
        fh.write(f"b {b.size}\n")
        for i, v in enumerate(b):
            if v != 0.0:
                fh.write(f"{i} {v:.17g}\n")
