"""Generalized plants for SISO FIR control problems.

Both supported layouts (disturbance rejection and reference tracking) share
the channel structure n_w = 2, n_z = 2, n_y = n_u = 1: the regulated output
stacks the performance variable with the rho-weighted control effort.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .fir import DimensionError, FirMimo, _freeze


class PlantKind(enum.Enum):
    DISTURBANCE_REJECTION = "disturbance-rejection"
    REFERENCE_TRACKING = "reference-tracking"


@dataclass(frozen=True)
class GeneralizedPlant:
    """Standard-form realization (A, B1, B2, C1, C2, D11, D12, D21).

    ``P_ij = C_i (zI - A)^{-1} B_j + D_ij`` with D22 = 0, so the measured
    channel P22 is strictly proper.
    """

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    D11: np.ndarray
    D12: np.ndarray
    D21: np.ndarray

    def __post_init__(self):
        for name in ("A", "B1", "B2", "C1", "C2", "D11", "D12", "D21"):
            object.__setattr__(self, name, _freeze(np.atleast_2d(getattr(self, name))))
        n = self.A.shape[0]
        checks = [
            self.A.shape == (n, n),
            self.B1.shape[0] == n,
            self.B2.shape[0] == n,
            self.C1.shape[1] == n,
            self.C2.shape[1] == n,
            self.D11.shape == (self.C1.shape[0], self.B1.shape[1]),
            self.D12.shape == (self.C1.shape[0], self.B2.shape[1]),
            self.D21.shape == (self.C2.shape[0], self.B1.shape[1]),
        ]
        if not all(checks):
            raise DimensionError("inconsistent state-space block dimensions")

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def g(self) -> np.ndarray:
        """Impulse-response coefficient vector housed in the C2 row."""
        return self.C2[0]

    def control_rescaled(self) -> "GeneralizedPlant":
        """Normalize the control channel so D12 = [0, 1]^T.

        The control weight rho is moved from D12 into B2 (u -> rho*u), which
        leaves every closed-loop map from w to z unchanged. Controllers
        synthesized against the rescaled plant act on the scaled input; the
        physical controller is K/rho. Idempotent.
        """
        rho = float(self.D12[-1, 0])
        if rho == 1.0:
            return self
        return replace(
            self,
            B2=self.B2 / rho,
            D12=self.D12 / rho,
        )

    def transfer_blocks(self, grid) -> dict[str, np.ndarray]:
        """Frequency samples of P11, P12, P21, P22 from the realization."""
        n = self.state_dim
        z = np.exp(1j * grid.omegas)
        out = {"P11": [], "P12": [], "P21": [], "P22": []}
        for zk in z:
            resolvent = np.linalg.solve(zk * np.eye(n) - self.A, np.eye(n))
            out["P11"].append(self.C1 @ resolvent @ self.B1 + self.D11)
            out["P12"].append(self.C1 @ resolvent @ self.B2 + self.D12)
            out["P21"].append(self.C2 @ resolvent @ self.B1 + self.D21)
            out["P22"].append(self.C2 @ resolvent @ self.B2)
        return {k: np.array(v) for k, v in out.items()}


def fir_realization(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """State-space triple (Z, e1, g^T) of the strictly proper FIR plant.

    ``g`` holds the impulse-response coefficients at lags 1..r-1; the
    realization's impulse response is (0, g[0], ..., g[-1], 0, ...).
    """
    g = np.atleast_1d(np.asarray(g, dtype=float))
    if g.size < 1:
        raise DimensionError("g must be nonempty")
    if not np.all(np.isfinite(g)):
        raise ValueError("g must be finite")
    n = g.size
    A = np.diag(np.ones(n - 1), -1) if n > 1 else np.zeros((1, 1))
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = g.reshape(1, n)
    return A, B, C


def _build(g: np.ndarray, rho: float, kind: PlantKind) -> GeneralizedPlant:
    if not rho > 0:
        raise ValueError("control weight rho must be positive")
    A, B, C = fir_realization(g)
    n = A.shape[0]
    B1 = np.hstack([B, np.zeros((n, 1))])
    C1 = np.vstack([C, np.zeros((1, n))])
    D12 = np.array([[0.0], [rho]])
    if kind is PlantKind.DISTURBANCE_REJECTION:
        D11 = np.zeros((2, 2))
        D21 = np.array([[0.0, 1.0]])
    else:
        D11 = np.array([[0.0, -1.0], [0.0, 0.0]])
        D21 = np.array([[0.0, -1.0]])
    return GeneralizedPlant(A=A, B1=B1, B2=B, C1=C1, C2=C, D11=D11, D12=D12, D21=D21)


def build_disturbance_rejection(g: np.ndarray, rho: float = 1.0) -> GeneralizedPlant:
    """Plant rejecting an input disturbance under measurement noise.

    w = [d; n], z = [v; rho*u], y = v + n with v = G(u + d). The transfer
    blocks are P11 = [[G, 0], [0, 0]], P12 = [G; rho], P21 = [G, 1],
    P22 = G.
    """
    return _build(g, rho, PlantKind.DISTURBANCE_REJECTION)


def build_reference_tracking(g: np.ndarray, rho: float = 1.0) -> GeneralizedPlant:
    """Plant tracking a reference under an input disturbance.

    w = [d; r], z = [e; rho*u], y = e with e = G(u + d) - r. Identical to
    disturbance rejection except P11 = [[G, -1], [0, 0]] and P21 = [G, -1].
    """
    return _build(g, rho, PlantKind.REFERENCE_TRACKING)


def build_plant(g: np.ndarray, kind: PlantKind, rho: float = 1.0) -> GeneralizedPlant:
    if kind is PlantKind.DISTURBANCE_REJECTION:
        return build_disturbance_rejection(g, rho)
    return build_reference_tracking(g, rho)


def closed_form_blocks(g: np.ndarray, kind: PlantKind, rho: float, grid) -> dict[str, np.ndarray]:
    """The P_ij blocks straight from their transfer-function formulas."""
    gf = np.fft.fft(np.concatenate([[0.0], np.atleast_1d(g)]), n=grid.n_points)
    n_pts = grid.n_points
    one = np.ones(n_pts)
    zero = np.zeros(n_pts)
    if kind is PlantKind.DISTURBANCE_REJECTION:
        p11 = np.stack([np.stack([gf, zero], -1), np.stack([zero, zero], -1)], 1)
        p21 = np.stack([gf, one], -1)[:, None, :]
    else:
        p11 = np.stack([np.stack([gf, -one], -1), np.stack([zero, zero], -1)], 1)
        p21 = np.stack([gf, -one], -1)[:, None, :]
    p12 = np.stack([gf, rho * one], -1)[:, :, None]
    return {"P11": p11, "P12": p12, "P21": p21, "P22": gf[:, None, None]}


def objective_maps(plant: GeneralizedPlant) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Constant matrices ([C1 D12], [B1; D21], D11) defining the cost map.

    The closed-loop performance of a response Theta is the peak gain of
    ``[C1 D12] Theta [B1; D21] + D11``.
    """
    left = np.hstack([plant.C1, plant.D12])
    right = np.vstack([plant.B1, plant.D21])
    return left, right, plant.D11


def impulse_response(A: np.ndarray, B: np.ndarray, C: np.ndarray, n_steps: int) -> np.ndarray:
    """Markov parameters CB, CAB, ... preceded by the zero feedthrough."""
    n = A.shape[0]
    out = np.zeros(n_steps)
    x = B[:, 0].copy()
    for k in range(1, n_steps):
        out[k] = float(C[0] @ x)
        x = A @ x
    return out
