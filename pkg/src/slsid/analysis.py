"""Achieved-response transforms, stability certificates, and cost bounds.

A response designed for an estimated plant achieves a different closed loop
on the true one. For coefficient errors delta the change is a rank-one
perturbation, so the achieved response has the Sherman-Morrison closed form
with scalar factor 1/(1 - delta^T N(e^{jw})); it is IIR and therefore kept
as frequency samples rather than re-fit to taps.

The bound chain: the guaranteed-cost certificate dominates the achieved
cost whenever ||delta|| <= eps, and the a-priori suboptimality bounds
(deterministic in eps, or composed with the identification radius) dominate
the realized gap in the regime eps < 1/(2 ||N0||).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .fir import (
    FirMimo,
    FirSiso,
    FrequencyGrid,
    GridRefinementError,
    default_grid,
    hinf_norm_grid_cert,
    winding_stability,
)
from .plant import GeneralizedPlant, PlantKind, build_plant, objective_maps
from .synthesis import SystemResponse, response_norms


class SmallGainViolation(RuntimeError):
    """The rank-one perturbation is too large for the closed form."""


class OutOfRegimeError(ValueError):
    """A bound was requested outside its hypothesis region."""


class SingularPerturbationError(RuntimeError):
    """I + Delta1 is numerically singular at some frequency."""


class StabilityVerdict(enum.Enum):
    CERTIFIED_STABLE = "certified-stable"
    CERTIFIED_UNSTABLE = "certified-unstable"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class RobustPerturbation:
    """Perturbation pair (Delta1: n x n, Delta2: 1 x n) as FIR systems.

    For coefficient errors delta both are rank one. Evaluating a response
    designed on the estimate against the true plant (taps estimate + delta)
    uses Delta1 = -N delta^T, Delta2 = -L delta^T; the reversed direction
    (true-plant response evaluated on the estimate) flips the signs.
    """

    delta1: FirMimo
    delta2: FirMimo

    @classmethod
    def rank_one(cls, theta: SystemResponse, delta: np.ndarray) -> "RobustPerturbation":
        """Perturbation carrying theta (designed on g_hat) onto g_hat + delta."""
        delta = np.atleast_1d(np.asarray(delta, dtype=float))
        d1 = -np.einsum("tik,j->tij", theta.N.blocks, delta)
        d2 = -np.einsum("tik,j->tij", theta.L.blocks, delta)
        return cls(delta1=FirMimo(d1), delta2=FirMimo(d2))


@dataclass(frozen=True)
class SampledResponse:
    """Frequency-sampled response quadruple with a derivative certificate.

    ``deriv_bound`` is a certified upper bound on the spectral norm of the
    stacked response's frequency derivative (None when no certificate is
    available); it converts grid maxima into certified peak bounds.
    """

    R: np.ndarray
    M: np.ndarray
    N: np.ndarray
    L: np.ndarray
    grid: FrequencyGrid
    deriv_bound: float | None = None

    def stacked(self) -> np.ndarray:
        n = self.R.shape[1]
        n_pts = self.grid.n_points
        out = np.empty((n_pts, n + 1, n + 1), dtype=complex)
        out[:, :n, :n] = self.R
        out[:, :n, n:] = self.N
        out[:, n:, :n] = self.M
        out[:, n:, n:] = self.L
        return out

    @classmethod
    def from_fir(cls, theta: SystemResponse, grid: FrequencyGrid) -> "SampledResponse":
        stacked = theta.freq(grid)
        n = theta.n
        lip = FirMimo(theta.stacked_blocks()).lipschitz_bound()
        return cls(
            R=stacked[:, :n, :n],
            M=stacked[:, n:, :n],
            N=stacked[:, :n, n:],
            L=stacked[:, n:, n:],
            grid=grid,
            deriv_bound=lip,
        )


def _transform_deriv_bound(
    theta: SystemResponse, pert: RobustPerturbation
) -> float | None:
    """Certified derivative bound for the transformed response.

    Uses the small-gain margin of Delta1; returns None when there is no
    margin to certify with.
    """
    nd1, cd1 = hinf_norm_grid_cert(pert.delta1)
    if nd1 + cd1 >= 1.0:
        return None
    mu = 1.0 / (1.0 - (nd1 + cd1))
    nd2, cd2 = hinf_norm_grid_cert(pert.delta2)
    nd2 += cd2
    theta_fir = FirMimo(theta.stacked_blocks())
    ntheta, ctheta = hinf_norm_grid_cert(theta_fir)
    ntheta += ctheta
    l_d1 = pert.delta1.lipschitz_bound()
    l_d2 = pert.delta2.lipschitz_bound()
    l_theta = theta_fir.lipschitz_bound()
    v_norm = mu * (1.0 + nd2) + 1.0
    v_deriv = mu**2 * l_d1 * (1.0 + nd2) + mu * l_d2
    return v_deriv * ntheta + v_norm * l_theta


def general_robust_transform(
    theta: SystemResponse, pert: RobustPerturbation, grid: FrequencyGrid
) -> SampledResponse:
    """Achieved response under a general perturbation, sampled pointwise.

    R_hat = (I+D1)^{-1} R, M_hat = M - D2 (I+D1)^{-1} R,
    N_hat = (I+D1)^{-1} N, L_hat = L - D2 (I+D1)^{-1} N.
    """
    n = theta.n
    d1 = pert.delta1.freq(grid)
    d2 = pert.delta2.freq(grid)
    Rf, Mf = theta.R.freq(grid), theta.M.freq(grid)
    Nf, Lf = theta.N.freq(grid), theta.L.freq(grid)
    eye = np.eye(n)
    Rh = np.empty_like(Rf)
    Mh = np.empty_like(Mf)
    Nh = np.empty_like(Nf)
    Lh = np.empty_like(Lf)
    for i in range(grid.n_points):
        A = eye + d1[i]
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > 1e14:
            raise SingularPerturbationError(
                f"I + Delta1 numerically singular at omega={grid.omegas[i]:.6f}; "
                "the perturbed loop is not certifiably well posed"
            )
        MinvR = np.linalg.solve(A, Rf[i])
        MinvN = np.linalg.solve(A, Nf[i])
        Rh[i] = MinvR
        Nh[i] = MinvN
        Mh[i] = Mf[i] - d2[i] @ MinvR
        Lh[i] = Lf[i] - d2[i] @ MinvN
    return SampledResponse(
        R=Rh, M=Mh, N=Nh, L=Lh, grid=grid,
        deriv_bound=_transform_deriv_bound(theta, pert),
    )


def sherman_morrison_response(
    theta: SystemResponse, delta: np.ndarray, grid: FrequencyGrid
) -> SampledResponse:
    """Rank-one achieved response via the scalar Sherman-Morrison factor.

    Theta_hat = Theta + (1 - delta^T N)^{-1} [N delta^T; L delta^T] [R  N].
    Requires the small-gain margin ||N|| ||delta||_2 < 1, which also keeps
    the scalar denominator away from zero on the circle.
    """
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    norm_N, cert = hinf_norm_grid_cert(theta.N)
    gain = (norm_N + cert) * float(np.linalg.norm(delta))
    if gain >= 1.0:
        raise SmallGainViolation(
            f"||N|| * ||delta||_2 = {gain:.6f} >= 1; the rank-one closed "
            "form is not certified"
        )
    Rf, Mf = theta.R.freq(grid), theta.M.freq(grid)
    Nf, Lf = theta.N.freq(grid), theta.L.freq(grid)
    dN = np.einsum("j,tjk->tk", delta, Nf)[:, 0]  # delta^T N(e^{jw})
    factor = 1.0 / (1.0 - dN)
    col = np.concatenate([Nf, Lf], axis=1) * delta[None, None, :]  # (n_pts, n+1, n)
    row = np.concatenate([Rf, Nf], axis=2)  # (n_pts, n, n+1)
    update = factor[:, None, None] * (col @ row)
    n = theta.n
    pert = RobustPerturbation.rank_one(theta, delta)
    return SampledResponse(
        R=Rf + update[:, :n, :n],
        M=Mf + update[:, n:, :n],
        N=Nf + update[:, :n, n:],
        L=Lf + update[:, n:, n:],
        grid=grid,
        deriv_bound=_transform_deriv_bound(theta, pert),
    )


def _true_objective_maps(g: np.ndarray, kind: PlantKind):
    """Cost maps of the true plant in the control-rescaled convention."""
    plant = build_plant(g, kind, 1.0)
    return objective_maps(plant)


def closed_loop_cost_cert(
    g: np.ndarray,
    theta_hat: SampledResponse | SystemResponse,
    kind: PlantKind = PlantKind.DISTURBANCE_REJECTION,
    rho: float = 1.0,
    grid: FrequencyGrid | None = None,
) -> tuple[float, float]:
    """Achieved peak gain on the true plant, with refinement certificate.

    In the control-rescaled convention the cost map's constants do not
    depend on rho, so the same expression serves every control weight.
    """
    g = np.atleast_1d(np.asarray(g, dtype=float))
    left, right, D11 = _true_objective_maps(g, kind)
    if isinstance(theta_hat, SystemResponse):
        theta_hat = SampledResponse.from_fir(theta_hat, grid or default_grid(theta_hat.horizon))
    samples = theta_hat.stacked()
    W = np.einsum("ab,tbc,cd->tad", left, samples, right)
    W[:, :, :] += D11
    J = float(np.linalg.svd(W, compute_uv=False)[:, 0].max())
    if theta_hat.deriv_bound is None:
        cert = math.nan
    else:
        slope = np.linalg.norm(left, 2) * theta_hat.deriv_bound * np.linalg.norm(right, 2)
        cert = 0.5 * slope * theta_hat.grid.spacing
    return J, cert


def closed_loop_cost(
    g: np.ndarray,
    theta_hat: SampledResponse | SystemResponse,
    kind: PlantKind = PlantKind.DISTURBANCE_REJECTION,
    rho: float = 1.0,
    grid: FrequencyGrid | None = None,
) -> float:
    return closed_loop_cost_cert(g, theta_hat, kind, rho, grid)[0]


def lft_closed_loop_cost(
    g: np.ndarray,
    K: np.ndarray,
    kind: PlantKind,
    rho: float,
    grid: FrequencyGrid,
) -> float:
    """Peak gain by direct LFT substitution of controller samples K.

    The independent evaluation route: closes the loop through the transfer
    blocks ``P11 + P12 K (1 - P22 K)^{-1} P21`` of the true plant (in the
    control-rescaled convention, so K is the scaled-channel controller).
    """
    g = np.atleast_1d(np.asarray(g, dtype=float))
    Gf = np.fft.fft(np.concatenate([[0.0], g]), n=grid.n_points)
    sign = 1.0 if kind is PlantKind.DISTURBANCE_REJECTION else -1.0
    # rescaled convention: P12 = [G/rho; 1], P22 = G/rho, K is the scaled K
    closed = 1.0 / (1.0 - (Gf / rho) * K)
    Q = K * closed
    peak = 0.0
    for i in range(grid.n_points):
        P11 = np.array([[Gf[i], 0.0 if sign > 0 else -1.0], [0.0, 0.0]])
        P12 = np.array([[Gf[i] / rho], [1.0]])
        P21 = np.array([[Gf[i], sign]])
        W = P11 + P12 * Q[i] @ P21
        peak = max(peak, float(np.linalg.svd(W, compute_uv=False)[0]))
    return peak


def perturbation_fir(theta: SystemResponse, delta: np.ndarray) -> FirSiso:
    """Scalar FIR ``1 - delta^T N`` whose zeros decide loop stability."""
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    taps = -np.einsum("j,tjk->t", delta, theta.N.blocks)
    taps[0] += 1.0
    return FirSiso(taps)


def certify_stabilization(
    theta: SystemResponse,
    delta: np.ndarray,
    grid: FrequencyGrid | None = None,
) -> StabilityVerdict:
    """Three-valued stability certificate for the perturbed loop.

    Small gain (||N|| ||delta|| < 1) certifies stability outright; otherwise
    the exact argument-principle test on ``1 - delta^T N`` decides, and only
    an unresolvable grid refinement yields Inconclusive.
    """
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    if grid is None:
        grid = default_grid(theta.horizon)
    norm_N, cert = hinf_norm_grid_cert(theta.N)
    if (norm_N + cert) * float(np.linalg.norm(delta)) < 1.0:
        return StabilityVerdict.CERTIFIED_STABLE
    f = perturbation_fir(theta, delta)
    try:
        stable = winding_stability(f, grid)
    except GridRefinementError:
        return StabilityVerdict.INCONCLUSIVE
    return (
        StabilityVerdict.CERTIFIED_STABLE
        if stable
        else StabilityVerdict.CERTIFIED_UNSTABLE
    )


def _bound_norms(theta0: SystemResponse, plant: GeneralizedPlant) -> dict[str, float]:
    return response_norms(theta0, plant.control_rescaled())


def proposition_bound(
    eps: float,
    theta0: SystemResponse,
    plant: GeneralizedPlant,
) -> float:
    """Deterministic suboptimality bound in the radius eps.

    ``2 eps / (1 - 2 eps ||N0||) * ||[1 + g^T N0; L0]|| * ||R0 B1 + N0 D21||``,
    valid for eps < 1/(2 ||N0||). All norms are certified grid upper bounds,
    which keeps the computed value a valid bound.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    norms = _bound_norms(theta0, plant)
    if eps >= 0.5 / norms["norm_N"]:
        raise OutOfRegimeError(
            f"eps={eps:.6g} outside the regime eps < 1/(2||N0||) = "
            f"{0.5 / norms['norm_N']:.6g}"
        )
    return (
        2.0 * eps / (1.0 - 2.0 * eps * norms["norm_N"])
        * norms["norm_stack"]
        * norms["norm_RB_ND"]
    )


def _sample_complexity_factor(sigma: float, r: int, m: int, p: float, eta: float) -> float:
    if not (0.0 < eta < 1.0):
        raise ValueError("eta must lie in (0, 1)")
    return (
        8.0
        * math.sqrt(math.log(2.0) * sigma**2 * r ** (2.0 / max(p, 2.0)) / m)
        * (1.0 + math.sqrt(2.0 * math.log(1.0 / eta)))
    )


def theorem_bound(
    sigma: float,
    r: int,
    m: int,
    p: float,
    eta: float,
    theta0: SystemResponse,
    plant: GeneralizedPlant,
) -> float:
    """End-to-end suboptimality bound at confidence 1 - eta.

    Composes the analytic identification radius with the deterministic
    bound's regime algebra: for m large enough that eps < 1/(4||N0||), the
    factor 2 eps/(1 - 2 eps ||N0||) is at most the explicit sample-complexity
    factor. The sample-size regime is checked with constant one and produces
    a warning, not an error, when violated.
    """
    norms = _bound_norms(theta0, plant)
    if m < sigma**2 * r * norms["norm_N"] ** 2 * math.sqrt(math.log(1.0 / eta)):
        warnings.warn(
            "sample size m is below the stated regime threshold (universal "
            "constant taken as 1); the bound may not dominate",
            RuntimeWarning,
        )
    return (
        _sample_complexity_factor(sigma, r, m, p, eta)
        * norms["norm_stack"]
        * norms["norm_RB_ND"]
    )


def undermodeled_bound(
    sigma: float,
    r: int,
    r_tilde: int,
    m: int,
    p: float,
    eta: float,
    g_tail_norm: float,
    theta0: SystemResponse,
    plant: GeneralizedPlant,
) -> float:
    """Suboptimality bound when only r_tilde < r taps are estimated.

    The unmodeled tail enters additively and does not vanish as m grows:
    the m -> infinity limit is ``4 ||g_tail|| * ||R0 B1 + N0 D21||``.
    """
    if not r_tilde < r:
        raise ValueError("r_tilde must be smaller than r")
    norms = _bound_norms(theta0, plant)
    if g_tail_norm >= 0.25 / norms["norm_N"]:
        raise OutOfRegimeError(
            f"tail norm {g_tail_norm:.6g} outside the regime "
            f"< 1/(4||N0||) = {0.25 / norms['norm_N']:.6g}"
        )
    return (
        _sample_complexity_factor(sigma, r, m, p, eta) * norms["norm_stack"]
        + 4.0 * g_tail_norm
    ) * norms["norm_RB_ND"]


def feasibility_certificate(
    theta0: SystemResponse,
    plant: GeneralizedPlant,
    g_hat: np.ndarray,
    eps: float,
    grid: FrequencyGrid | None = None,
) -> tuple[SampledResponse, float]:
    """Feasible point for the robust program built from the true optimum.

    With the roles of truth and estimate reversed, the true-plant optimal
    response transforms onto the estimate (Delta1 = N0 delta^T with
    delta = g - g_hat) and the weight
    ``alpha0 = ||[1 + g^T N0; L0]|| / (1 - 2 eps ||N0||)`` certifies
    feasibility. Verifies the two norm-contraction chains before returning.
    """
    if grid is None:
        grid = default_grid(theta0.horizon)
    g = plant.g
    g_hat = np.atleast_1d(np.asarray(g_hat, dtype=float))
    delta = g - g_hat
    if np.linalg.norm(delta) > eps * (1.0 + 1e-9) + 1e-15:
        raise ValueError("||g - g_hat||_2 exceeds the declared radius eps")
    norms = _bound_norms(theta0, plant)
    if eps >= 0.5 / norms["norm_N"]:
        raise OutOfRegimeError(
            f"eps={eps:.6g} outside the regime eps < 1/(2||N0||)"
        )
    alpha0 = norms["norm_stack"] / (1.0 - 2.0 * eps * norms["norm_N"])
    pert = RobustPerturbation(
        delta1=FirMimo(np.einsum("tik,j->tij", theta0.N.blocks, delta)),
        delta2=FirMimo(np.einsum("tik,j->tij", theta0.L.blocks, delta)),
    )
    hat0 = general_robust_transform(theta0, pert, grid)
    # the two contraction chains of the certificate
    contraction = 1.0 / (1.0 - eps * norms["norm_N"])
    eN = eps * float(np.abs(np.linalg.svd(hat0.N, compute_uv=False)[:, 0]).max())
    if eN > eps * norms["norm_N"] * contraction + 1e-8:
        raise RuntimeError("contraction chain violated for ||eps N_hat||")
    stack = np.concatenate(
        [1.0 + np.einsum("j,tjk->tk", g_hat, hat0.N), hat0.L[:, 0, :]], axis=1
    )
    stack_norm = float(np.linalg.norm(stack, axis=1).max())
    if stack_norm > norms["norm_stack"] * contraction + 1e-8:
        raise RuntimeError("contraction chain violated for the stack norm")
    return hat0, alpha0


def sampled_sls_residual(
    sampled: SampledResponse, plant: GeneralizedPlant
) -> float:
    """Worst frequency-domain violation of both achievability equations."""
    n = plant.state_dim
    A, B2, C2 = plant.A, plant.B2, plant.C2
    z = np.exp(1j * sampled.grid.omegas)
    worst = 0.0
    eye = np.eye(n)
    for i, zi in enumerate(z):
        zIA = zi * eye - A
        r1 = zIA @ sampled.R[i] - B2 @ sampled.M[i] - eye
        r2 = zIA @ sampled.N[i] - B2 @ sampled.L[i]
        r3 = sampled.R[i] @ zIA - sampled.N[i] @ C2 - eye
        r4 = sampled.M[i] @ zIA - sampled.L[i] @ C2
        worst = max(
            worst,
            np.abs(r1).max(),
            np.abs(r2).max(),
            np.abs(r3).max(),
            np.abs(r4).max(),
        )
    return float(worst)


def simulate_closed_loop(
    g: np.ndarray,
    theta: SystemResponse,
    kind: PlantKind = PlantKind.DISTURBANCE_REJECTION,
    rho: float = 1.0,
    n_steps: int | None = None,
    channel: int = 0,
) -> np.ndarray:
    """Exact time-domain impulse response of the closed loop.

    Implements the controller K = L - M R^{-1} N by its difference
    equations (the internal signal w solves R w = N y using R's unit
    leading block), drives the true FIR plant with an impulse on the chosen
    disturbance channel, and returns the regulated output trajectory z
    (shape (n_steps, 2)). Unstable loops show up as geometric growth.
    """
    g = np.atleast_1d(np.asarray(g, dtype=float))
    T = theta.horizon
    n = theta.n
    if n_steps is None:
        n_steps = 10 * T
    R, M = theta.R.blocks, theta.M.blocks
    N, L = theta.N.blocks, theta.L.blocks
    taps = np.concatenate([[0.0], g])
    w_hist = np.zeros((n_steps, n))
    y_hist = np.zeros(n_steps)
    a_hist = np.zeros(n_steps)  # plant input u + d
    z = np.zeros((n_steps, 2))
    sign = 1.0 if kind is PlantKind.DISTURBANCE_REJECTION else -1.0
    for t in range(n_steps):
        d = 1.0 if (t == 0 and channel == 0) else 0.0
        n_or_r = 1.0 if (t == 0 and channel == 1) else 0.0
        v = sum(
            taps[k] * a_hist[t - k] for k in range(1, min(len(taps), t + 1))
        )
        # u_s[t] uses y up to t and w up to t-1; compute y first
        u_s = 0.0
        for k in range(1, min(T, t + 1)):
            u_s -= (M[k] @ w_hist[t - k]).item()
        y_partial = v + sign * n_or_r
        u_s += L[0].item() * y_partial
        for k in range(1, min(T, t + 1)):
            u_s += L[k].item() * y_hist[t - k]
        y_hist[t] = y_partial
        # advance the internal signal: w[t] from w[t-1...] and y[t...]
        wt = np.zeros(n)
        for j in range(1, min(T - 1, t + 1)):
            wt -= (R[j + 1] @ w_hist[t - j]).ravel()
        for j in range(0, min(T - 1, t + 1)):
            wt += (N[j + 1][:, 0]) * y_hist[t - j]
        w_hist[t] = wt
        u_phys = u_s / rho
        a_hist[t] = u_phys + d
        z[t, 0] = v if kind is PlantKind.DISTURBANCE_REJECTION else y_partial
        z[t, 1] = u_s  # rho * u_phys
    return z


@dataclass(frozen=True)
class BoundReport:
    """All the certified quantities of one bound-verification trial."""

    eps: float
    norm_N0: float
    norm_stack0: float
    norm_RB_ND0: float
    prop_bound: float
    thm_bound: float
    actual_gap: float
    small_gain_margin: float


def make_bound_report(
    theta0: SystemResponse,
    plant: GeneralizedPlant,
    eps: float,
    delta: np.ndarray,
    J_hat: float,
    J_opt: float,
    sigma: float,
    r: int,
    m: int,
    p: float,
    eta: float,
    theta_star: SystemResponse | None = None,
) -> BoundReport:
    norms = _bound_norms(theta0, plant)
    try:
        prop = proposition_bound(eps, theta0, plant)
    except OutOfRegimeError:
        prop = math.nan
    try:
        thm = theorem_bound(sigma, r, m, p, eta, theta0, plant)
    except OutOfRegimeError:
        thm = math.nan
    if theta_star is not None:
        norm_N_star, cert = hinf_norm_grid_cert(theta_star.N)
        margin = 1.0 - (norm_N_star + cert) * float(np.linalg.norm(delta))
    else:
        margin = math.nan
    return BoundReport(
        eps=eps,
        norm_N0=norms["norm_N"],
        norm_stack0=norms["norm_stack"],
        norm_RB_ND0=norms["norm_RB_ND"],
        prop_bound=prop,
        thm_bound=thm,
        actual_gap=J_hat - J_opt,
        small_gain_margin=margin,
    )
