"""Closed-loop response synthesis: nominal and radius-robust programs.

The decision object is the FIR response quadruple Theta = {R, M, N, L}. The
nominal program minimizes the peak gain of the regulated closed loop; the
robust program additionally charges the radius-weighted perturbation term
and is solved for a scalar weight alpha by golden-section search, since the
joint problem is convex only for fixed alpha.

Responses returned to callers are rebuilt exactly from their free scalar
parameters (the L taps regenerate R, M, N through the achievability
recursions), so the affine constraints hold to machine precision regardless
of the conic solver's tolerance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from . import sdp
from .fir import FirMimo, FrequencyGrid, default_grid, hinf_norm_grid_cert
from .plant import GeneralizedPlant, PlantKind, build_plant, objective_maps
from .sdp import ConicProblem, SolverReport, SolverStatus, add_hinf_epigraph, add_sls_equalities, make_response_vars


class ConditioningError(RuntimeError):
    """A frequency response is too ill-conditioned to invert."""


class BracketExhaustedError(RuntimeError):
    """No feasible robustness weight was found on the search bracket."""


@dataclass(frozen=True)
class SystemResponse:
    """Achievable closed-loop response {R, M, N, L} of a fixed horizon.

    R, M, N are strictly proper (lag-0 block zero) and L is proper.
    """

    R: FirMimo
    M: FirMimo
    N: FirMimo
    L: FirMimo

    def __post_init__(self):
        horizons = {self.R.horizon, self.M.horizon, self.N.horizon, self.L.horizon}
        if len(horizons) != 1:
            raise ValueError("all response blocks must share one horizon")
        for name in ("R", "M", "N"):
            if np.any(getattr(self, name).blocks[0] != 0.0):
                raise ValueError(f"{name} must be strictly proper")

    @property
    def horizon(self) -> int:
        return self.R.horizon

    @property
    def n(self) -> int:
        return self.R.p

    def stacked_blocks(self) -> np.ndarray:
        """Block coefficients of [[R, N], [M, L]], shape (T, n+1, n+1)."""
        T, n = self.horizon, self.n
        out = np.zeros((T, n + 1, n + 1))
        out[:, :n, :n] = self.R.blocks
        out[:, :n, n:] = self.N.blocks
        out[:, n:, :n] = self.M.blocks
        out[:, n:, n:] = self.L.blocks
        return out

    def freq(self, grid: FrequencyGrid) -> np.ndarray:
        """Samples of the stacked response, shape (n_pts, n+1, n+1)."""
        grid.check_density(self.horizon)
        return np.fft.fft(self.stacked_blocks(), n=grid.n_points, axis=0)

    def sls_residual(self, plant: GeneralizedPlant) -> float:
        """Worst coefficient-wise violation of the achievability equalities."""
        A, B2, C2 = plant.A, plant.B2, plant.C2
        n, T = plant.state_dim, self.horizon
        R, M, N, L = self.R.blocks, self.M.blocks, self.N.blocks, self.L.blocks
        worst = 0.0
        for k in range(T):
            Rn = R[k + 1] if k + 1 < T else np.zeros((n, n))
            Nn = N[k + 1] if k + 1 < T else np.zeros((n, 1))
            Mn = M[k + 1] if k + 1 < T else np.zeros((1, n))
            eye = np.eye(n) if k == 0 else 0.0
            worst = max(
                worst,
                np.max(np.abs(Rn - (A @ R[k] + B2 @ M[k] + eye))),
                np.max(np.abs(Nn - (A @ N[k] + B2 @ L[k]))),
                np.max(np.abs(Rn - (R[k] @ A + N[k] @ C2 + eye))),
                np.max(np.abs(Mn - (M[k] @ A + L[k] @ C2))),
            )
        return float(worst)


@dataclass(frozen=True)
class SearchParams:
    """Golden-section settings for the robustness-weight search."""

    bracket: tuple[float, float] | None = None
    tol: float = 1e-3
    max_iter: int = 60


@dataclass(frozen=True)
class RobustSynthesisResult:
    """Optimal robust response with the certificates the bounds consume.

    ``objective_Q = nominal_J + eps * alpha * norm_RB_ND`` exactly, and
    ``eps * alpha * norm_N + norm_stack <= alpha`` up to float rounding, so
    the guaranteed-cost inequality applies to every true plant within the
    radius.
    """

    theta: SystemResponse
    alpha: float
    objective_Q: float
    nominal_J: float
    norm_N: float
    norm_stack: float
    norm_RB_ND: float
    eps: float


def default_horizon(plant_order: int) -> int:
    """Synthesis horizon default: four times the plant order."""
    return 4 * plant_order


def closed_loop_fir(theta: SystemResponse, plant: GeneralizedPlant) -> FirMimo:
    """Regulated closed-loop map ``[C1 D12] Theta [B1; D21] + D11`` as an FIR."""
    left, right, D11 = objective_maps(plant)
    blocks = np.einsum("ab,tbc,cd->tad", left, theta.stacked_blocks(), right)
    blocks[0] += D11
    return FirMimo(blocks)


def response_norms(theta: SystemResponse, plant: GeneralizedPlant) -> dict[str, float]:
    """Certified upper bounds on the norms the robust machinery uses."""
    g = plant.g
    stack_blocks = np.concatenate(
        [
            np.einsum("j,tjk->tk", g, theta.N.blocks)[:, None, :],
            theta.L.blocks[:, 0, :][:, None, :],
        ],
        axis=1,
    )
    stack_blocks[0, 0, 0] += 1.0
    rbnd_blocks = np.einsum("tij,jk->tik", theta.R.blocks, plant.B1) + np.einsum(
        "tij,jk->tik", theta.N.blocks, plant.D21
    )
    out = {}
    for name, fir in (
        ("norm_N", theta.N),
        ("norm_stack", FirMimo(stack_blocks)),
        ("norm_RB_ND", FirMimo(rbnd_blocks)),
        ("nominal_J", closed_loop_fir(theta, plant)),
    ):
        value, cert = hinf_norm_grid_cert(fir)
        out[name] = value + cert
    return out


class _LParameterization:
    """Affine map from the free L taps to exactly-feasible (R, M, N).

    Generated by running the achievability recursions once per basis
    direction; projecting L onto the terminal-truncation constraints and
    regenerating the blocks yields machine-exact equality residuals.
    """

    def __init__(self, plant: GeneralizedPlant, T: int):
        n = plant.state_dim
        if T < n + 1:
            raise ValueError(f"horizon {T} too short for state dimension {n}")
        A, B2, C2 = plant.A, plant.B2, plant.C2
        self.n, self.T = n, T
        # affine part (L = 0): M = N = 0, R_k = A^{k-1} seeded by R_1 = I
        R0 = np.zeros((T, n, n))
        if T > 1:
            R0[1] = np.eye(n)
            for k in range(1, T - 1):
                R0[k + 1] = A @ R0[k]
        self.R_aff = R0
        terminal_R_aff = A @ R0[T - 1]
        assert np.allclose(terminal_R_aff, 0.0), "horizon shorter than nilpotency"
        # basis responses for each unit L tap
        Rb = np.zeros((T, T, n, n))
        Mb = np.zeros((T, T, 1, n))
        Nb = np.zeros((T, T, n, 1))
        termC = np.zeros((n * n + 2 * n, T))
        for j in range(T):
            M = np.zeros((T + 1, 1, n))
            N = np.zeros((T + 1, n, 1))
            R = np.zeros((T + 1, n, n))
            for k in range(T):
                lk = 1.0 if k == j else 0.0
                M[k + 1] = M[k] @ A + lk * C2
                N[k + 1] = A @ N[k] + B2 * lk
            for k in range(1, T):
                R[k + 1] = A @ R[k] + B2 @ M[k]
            Rb[j], Mb[j], Nb[j] = R[:T], M[:T], N[:T]
            termC[:, j] = np.concatenate(
                [R[T].ravel(), N[T].ravel(), M[T].ravel()]
            )
        self.R_basis, self.M_basis, self.N_basis = Rb, Mb, Nb
        self.term_pinv = np.linalg.pinv(termC, rcond=1e-12)
        self.termC = termC

    def project(self, L_taps: np.ndarray) -> np.ndarray:
        """Nearest L satisfying the terminal-truncation constraints."""
        return L_taps - self.term_pinv @ (self.termC @ L_taps)

    def response(self, L_taps: np.ndarray) -> SystemResponse:
        R = self.R_aff + np.einsum("j,jtpq->tpq", L_taps, self.R_basis)
        M = np.einsum("j,jtpq->tpq", L_taps, self.M_basis)
        N = np.einsum("j,jtpq->tpq", L_taps, self.N_basis)
        return SystemResponse(
            R=FirMimo(R),
            M=FirMimo(M),
            N=FirMimo(N),
            L=FirMimo(L_taps.reshape(-1, 1, 1)),
        )

    def polish(self, L_taps: np.ndarray) -> SystemResponse:
        return self.response(self.project(np.asarray(L_taps, dtype=float)))


def _theta_f_blocks(plant: GeneralizedPlant, theta) -> dict[str, list]:
    """Affine block expressions for the four norm-bounded maps."""
    left, right, D11 = objective_maps(plant)
    g = plant.g
    n, T = plant.state_dim, theta.horizon
    F1, F2, F4 = [], [], []
    for k in range(T):
        stacked = cp.bmat([[theta.R[k], theta.N[k]], [theta.M[k], theta.L[k]]])
        F1.append(left @ stacked @ right + (D11 if k == 0 else np.zeros((2, 2))))
        F2.append(theta.R[k] @ plant.B1 + theta.N[k] @ plant.D21)
        one = np.array([[1.0]]) if k == 0 else np.zeros((1, 1))
        F4.append(cp.vstack([one + plant.C2 @ theta.N[k], theta.L[k]]))
    return {"F1": F1, "F2": F2, "F3": list(theta.N), "F4": F4}


def _extract_L(theta_vars) -> np.ndarray:
    return np.array([float(np.asarray(b.value).item()) for b in theta_vars.L])


class _NominalProgram:
    """Peak-gain-minimal response for a fixed plant and horizon."""

    def __init__(self, plant: GeneralizedPlant, T: int):
        self.plant = plant.control_rescaled()
        self.T = T
        self.params = _LParameterization(self.plant, T)
        prob = ConicProblem()
        theta = make_response_vars(self.plant.state_dim, T)
        add_sls_equalities(prob, self.plant, theta, T)
        maps = _theta_f_blocks(self.plant, theta)
        t1 = cp.Variable(nonneg=True)
        add_hinf_epigraph(prob, maps["F1"], t1, T)
        prob.minimize(t1)
        self.problem, self.theta, self.t1 = prob, theta, t1

    def solve(self) -> tuple[SystemResponse, float, SolverReport]:
        report = sdp.solve(self.problem, loose=self.T > 40)
        usable = report.status is SolverStatus.OPTIMAL or (
            report.converged and report.objective is not None
        )
        if report.status is SolverStatus.INFEASIBLE:
            raise sdp.SolverFailure(
                "achievability constraints reported infeasible for a stable "
                "FIR plant; this indicates an assembly bug or a horizon "
                "shorter than the state dimension"
            )
        if not usable:
            raise sdp.SolverFailure(f"nominal synthesis failed: {report.raw_status}")
        theta = self.params.polish(_extract_L(self.theta))
        J = response_norms(theta, self.plant)["nominal_J"]
        return theta, J, report


def nominal_synthesis(
    plant: GeneralizedPlant, T: int | None = None
) -> tuple[SystemResponse, float]:
    """Minimize the regulated closed-loop peak gain over horizon-T responses.

    Returns the response and the achieved (certified, grid-evaluated) peak
    gain. The optimal value is non-increasing in T because a horizon-T
    response padded with a zero block is feasible at horizon T+1.
    """
    if T is None:
        T = default_horizon(plant.state_dim + 1)
    theta, J, _ = _NominalProgram(plant, T).solve()
    return theta, J


class _RobustProgram:
    """Guaranteed-cost program for a fixed radius, parameterized by alpha.

    Compiled once; re-solved per alpha through a solver parameter, which is
    what makes the scalar search affordable. The alpha-dependent quantities
    enter through radius-free epigraph variables: the objective is
    ``t1 + eps*alpha*s2`` and feasibility is ``eps*alpha*s3 + t4 <= alpha``.
    """

    def __init__(self, g_hat, kind: PlantKind, rho: float, eps: float, T: int):
        if eps < 0:
            raise ValueError("radius eps must be nonnegative")
        self.plant = build_plant(g_hat, kind, rho).control_rescaled()
        self.eps, self.T = float(eps), T
        self.params = _LParameterization(self.plant, T)
        prob = ConicProblem()
        theta = make_response_vars(self.plant.state_dim, T)
        add_sls_equalities(prob, self.plant, theta, T)
        maps = _theta_f_blocks(self.plant, theta)
        t1 = cp.Variable(nonneg=True)
        s2 = cp.Variable(nonneg=True)
        s3 = cp.Variable(nonneg=True)
        t4 = cp.Variable(nonneg=True)
        for F, t in (("F1", t1), ("F2", s2), ("F3", s3), ("F4", t4)):
            add_hinf_epigraph(prob, maps[F], t, T)
        self.alpha = cp.Parameter(nonneg=True)
        prob.add_inequality(
            self.eps * cp.multiply(self.alpha, s3) + t4 <= self.alpha
        )
        prob.minimize(t1 + self.eps * cp.multiply(self.alpha, s2))
        self.problem, self.theta = prob, theta
        self.t_vars = {"t1": t1, "s2": s2, "s3": s3, "t4": t4}
        self.cache: dict[float, tuple[float, SolverReport, np.ndarray | None]] = {}

    def solve_at(self, alpha: float) -> tuple[float, SolverReport, np.ndarray | None]:
        """Objective value at one alpha (+inf if infeasible), with L taps."""
        alpha = float(alpha)
        if alpha in self.cache:
            return self.cache[alpha]
        self.alpha.value = alpha
        report = sdp.solve(self.problem)
        usable = report.status is SolverStatus.OPTIMAL or (
            report.converged and report.objective is not None
        )
        if usable:
            entry = (float(report.objective), report, _extract_L(self.theta))
        else:
            entry = (math.inf, report, None)
        self.cache[alpha] = entry
        return entry

    def package(self, alpha: float, L_taps: np.ndarray) -> RobustSynthesisResult:
        """Polish the response and restore exact radius feasibility.

        alpha is re-floored to stack/(1 - eps*||N||) of the polished
        response, so the guaranteed-cost inequality holds for the returned
        certificate values, not just the solver's internal ones.
        """
        theta = self.params.polish(L_taps)
        norms = response_norms(theta, self.plant)
        margin = 1.0 - self.eps * norms["norm_N"]
        if margin <= 0:
            raise BracketExhaustedError(
                "polished response violates the small-gain margin "
                f"(eps*||N|| = {self.eps * norms['norm_N']:.6f} >= 1)"
            )
        alpha_eff = max(float(alpha), norms["norm_stack"] / margin)
        return RobustSynthesisResult(
            theta=theta,
            alpha=alpha_eff,
            objective_Q=norms["nominal_J"] + self.eps * alpha_eff * norms["norm_RB_ND"],
            nominal_J=norms["nominal_J"],
            norm_N=norms["norm_N"],
            norm_stack=norms["norm_stack"],
            norm_RB_ND=norms["norm_RB_ND"],
            eps=self.eps,
        )


def robust_fixed_alpha(
    g_hat,
    kind: PlantKind,
    rho: float,
    eps: float,
    alpha: float,
    T: int,
) -> tuple[SolverReport, RobustSynthesisResult | None]:
    """Solve the guaranteed-cost program at one robustness weight.

    Infeasible below ``alpha < stack/(1 - eps ||N||)`` for every achievable
    response; the report then carries the Infeasible status and no result.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    program = _RobustProgram(g_hat, kind, rho, eps, T)
    value, report, L_taps = program.solve_at(alpha)
    if not math.isfinite(value) or L_taps is None:
        return report, None
    return report, program.package(alpha, L_taps)


def _golden_section(evaluate, lo: float, hi: float, tol: float, max_iter: int):
    """Minimize a cached scalar function; +inf marks infeasible points."""
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    width0 = hi - lo
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = evaluate(c), evaluate(d)
    for _ in range(max_iter):
        if (b - a) <= tol * width0:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = evaluate(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = evaluate(d)
    return a, b


def robust_synthesis(
    g_hat,
    kind: PlantKind = PlantKind.DISTURBANCE_REJECTION,
    rho: float = 1.0,
    eps: float = 0.0,
    T: int | None = None,
    search: SearchParams = SearchParams(),
) -> RobustSynthesisResult:
    """Minimize the guaranteed cost over responses and the weight alpha.

    The inner (fixed-alpha) problem is convex; the scalar weight is searched
    by golden section on a bracket anchored at the nominal solution's stack
    norm, expanded upward until the objective stops improving. Eight
    log-spaced probe values guard against the search settling on a poor
    local minimum; the returned weight is the best value seen anywhere.
    """
    g_hat = np.atleast_1d(np.asarray(g_hat, dtype=float))
    if T is None:
        T = default_horizon(g_hat.size + 1)
    nominal = _NominalProgram(build_plant(g_hat, kind, rho), T)
    theta_nom, J_nom, _ = nominal.solve()
    nom_norms = response_norms(theta_nom, nominal.plant)

    if eps == 0.0:
        return RobustSynthesisResult(
            theta=theta_nom,
            alpha=nom_norms["norm_stack"],
            objective_Q=J_nom,
            nominal_J=J_nom,
            norm_N=nom_norms["norm_N"],
            norm_stack=nom_norms["norm_stack"],
            norm_RB_ND=nom_norms["norm_RB_ND"],
            eps=0.0,
        )

    program = _RobustProgram(g_hat, kind, rho, eps, T)
    evaluate = lambda a: program.solve_at(a)[0]

    if search.bracket is not None:
        alpha_lo, alpha_hi = search.bracket
    else:
        # feasibility needs alpha >= stack/(1 - eps||N||) >= the nominal stack
        alpha_lo = nom_norms["norm_stack"]
        alpha_hi = 10.0 * alpha_lo
        cap = 2.0**10 * alpha_lo
        while alpha_hi < cap and evaluate(2.0 * alpha_hi) < evaluate(alpha_hi):
            alpha_hi *= 2.0

    probes = np.geomspace(alpha_lo, alpha_hi, 8)
    probe_vals = [evaluate(a) for a in probes]
    if not any(math.isfinite(v) for v in probe_vals):
        reports = [program.solve_at(a)[1].raw_status for a in probes[-2:]]
        raise BracketExhaustedError(
            f"no feasible alpha in [{alpha_lo:.6g}, {alpha_hi:.6g}] "
            f"(radius eps={eps:.6g}; last solver statuses: {reports})"
        )
    best_idx = int(np.argmin(probe_vals))
    sub_lo = probes[max(best_idx - 1, 0)]
    sub_hi = probes[min(best_idx + 1, len(probes) - 1)]
    _golden_section(evaluate, sub_lo, sub_hi, search.tol, search.max_iter)

    finite = {a: v for a, (v, _, _) in program.cache.items() if math.isfinite(v)}
    if not finite:
        raise BracketExhaustedError("search found no feasible weight")
    alpha_star = min(finite, key=finite.get)
    if finite[alpha_star] > 1.01 * min(probe_vals):
        warnings.warn(
            "golden-section result exceeds the best probe value by more "
            "than 1%; the objective may not be unimodal in alpha",
            RuntimeWarning,
        )
    _, _, L_taps = program.solve_at(alpha_star)
    return program.package(alpha_star, L_taps)


def controller_frequency_response(
    theta: SystemResponse, grid: FrequencyGrid
) -> np.ndarray:
    """Controller samples ``K = L - M R^{-1} N`` on the grid.

    For responses synthesized against the control-rescaled plant this is the
    scaled-channel controller; divide by rho for the physical one.
    """
    Rf = theta.R.freq(grid)
    Mf = theta.M.freq(grid)
    Nf = theta.N.freq(grid)
    Lf = theta.L.freq(grid)
    out = np.empty(grid.n_points, dtype=complex)
    for i in range(grid.n_points):
        cond = np.linalg.cond(Rf[i])
        if not np.isfinite(cond) or cond > 1e12:
            raise ConditioningError(
                f"response block R is near-singular at omega={grid.omegas[i]:.6f} "
                f"(condition number {cond:.3g})"
            )
        out[i] = (Lf[i] - Mf[i] @ np.linalg.solve(Rf[i], Nf[i]))[0, 0]
    return out
