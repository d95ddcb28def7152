"""FIR transfer-function algebra, frequency grids, and H-infinity norms.

Everything downstream (plants, synthesis, bounds) is built on two value
types: a scalar FIR ``FirSiso`` with taps ``h_0 .. h_{L-1}`` representing
``H(z) = sum_k h_k z^{-k}``, and a matrix FIR ``FirMimo`` holding a sequence
of p x q coefficient blocks. Both are immutable and safe to share across
threads.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize


class DimensionError(ValueError):
    """Operand dimensions are inconsistent."""


class GridRefinementError(RuntimeError):
    """A frequency grid could not be refined enough to certify the result."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FirSiso:
    """Scalar FIR ``H(z) = sum_{k=0}^{L-1} taps[k] z^{-k}``.

    Strictly proper systems carry an explicit leading zero tap, so the same
    type stores both plants (tap 0 forced to zero) and arbitrary scalar
    responses.
    """

    taps: np.ndarray

    def __post_init__(self):
        taps = np.atleast_1d(np.asarray(self.taps, dtype=float))
        if taps.ndim != 1 or taps.size < 1:
            raise DimensionError("taps must be a nonempty 1-D vector")
        if not np.all(np.isfinite(taps)):
            raise ValueError("taps must be finite")
        object.__setattr__(self, "taps", _freeze(taps))

    @property
    def horizon(self) -> int:
        return self.taps.size

    def strictly_proper(self) -> bool:
        return self.taps[0] == 0.0

    def freq(self, grid: "FrequencyGrid") -> np.ndarray:
        """Response ``H(e^{j w_k})`` on the grid (complex vector)."""
        grid.check_density(self.horizon)
        return np.fft.fft(self.taps, n=grid.n_points)

    def eval_at(self, z: complex) -> complex:
        """Evaluate ``H(z)`` at a single complex point (z != 0)."""
        return complex(sum(h * z ** (-k) for k, h in enumerate(self.taps)))

    def to_mimo(self) -> "FirMimo":
        return FirMimo(self.taps.reshape(-1, 1, 1))


@dataclass(frozen=True)
class FirMimo:
    """Matrix FIR ``F(z) = sum_{k=0}^{T-1} blocks[k] z^{-k}`` with p x q blocks.

    ``vec(F)`` stacks the transposed blocks vertically and ``rvec(F)`` stacks
    the blocks horizontally; the semidefinite H-infinity characterization is
    written against exactly this stacking.
    """

    blocks: np.ndarray

    def __post_init__(self):
        blocks = np.asarray(self.blocks, dtype=float)
        if blocks.ndim != 3 or blocks.shape[0] < 1:
            raise DimensionError("blocks must have shape (T, p, q) with T >= 1")
        if not np.all(np.isfinite(blocks)):
            raise ValueError("blocks must be finite")
        object.__setattr__(self, "blocks", _freeze(blocks))

    @classmethod
    def static(cls, matrix) -> "FirMimo":
        """A constant (horizon-1) transfer matrix."""
        return cls(np.asarray(matrix, dtype=float)[None, :, :])

    @classmethod
    def zero(cls, p: int, q: int, horizon: int = 1) -> "FirMimo":
        return cls(np.zeros((horizon, p, q)))

    @classmethod
    def identity(cls, p: int) -> "FirMimo":
        return cls.static(np.eye(p))

    @property
    def horizon(self) -> int:
        return self.blocks.shape[0]

    @property
    def p(self) -> int:
        return self.blocks.shape[1]

    @property
    def q(self) -> int:
        return self.blocks.shape[2]

    def vec(self) -> np.ndarray:
        """Vertical stack of transposed blocks, shape (T*q, p)."""
        return np.concatenate([b.T for b in self.blocks], axis=0)

    def rvec(self) -> np.ndarray:
        """Horizontal stack of blocks, shape (p, T*q)."""
        return np.concatenate(list(self.blocks), axis=1)

    def freq(self, grid: "FrequencyGrid") -> np.ndarray:
        """Response samples, shape (n_points, p, q) complex."""
        grid.check_density(self.horizon)
        return np.fft.fft(self.blocks, n=grid.n_points, axis=0)

    def eval_at(self, z: complex) -> np.ndarray:
        return sum(b * z ** (-k) for k, b in enumerate(self.blocks))

    def transpose(self) -> "FirMimo":
        return FirMimo(np.transpose(self.blocks, (0, 2, 1)))

    def lipschitz_bound(self) -> float:
        """Certified bound on ``||dF/dw||_2`` over the unit circle."""
        return float(
            sum(k * np.linalg.norm(b, 2) for k, b in enumerate(self.blocks))
        )

    def __add__(self, other: "FirMimo") -> "FirMimo":
        if (self.p, self.q) != (other.p, other.q):
            raise DimensionError("block shapes differ")
        T = max(self.horizon, other.horizon)
        out = np.zeros((T, self.p, self.q))
        out[: self.horizon] += self.blocks
        out[: other.horizon] += other.blocks
        return FirMimo(out)

    def __sub__(self, other: "FirMimo") -> "FirMimo":
        return self + (other * -1.0)

    def __mul__(self, scalar: float) -> "FirMimo":
        return FirMimo(self.blocks * float(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other: "FirMimo") -> "FirMimo":
        return fir_multiply(self, other)


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid ``w_k = 2 pi k / n_points`` on the unit circle."""

    n_points: int

    def __post_init__(self):
        if self.n_points < 4:
            raise ValueError("n_points must be at least 4")

    @property
    def omegas(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_points) / self.n_points

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.n_points

    def check_density(self, horizon: int) -> None:
        if self.n_points < 4 * horizon:
            raise ValueError(
                f"grid with {self.n_points} points too coarse for horizon "
                f"{horizon} (need >= {4 * horizon})"
            )

    def refined(self, factor: int = 2) -> "FrequencyGrid":
        return FrequencyGrid(self.n_points * factor)


def default_grid(horizon: int) -> FrequencyGrid:
    """Grid density rule: at least 512 points and 8x the FIR horizon."""
    return FrequencyGrid(max(512, 8 * int(horizon)))


def toeplitz(u: np.ndarray) -> np.ndarray:
    """Lower-triangular Toeplitz matrix whose first column is ``u``.

    Column j is ``u`` shifted down by j with zeros above the diagonal, so
    ``toeplitz(u) @ h`` is the convolution of ``u`` and ``h`` truncated to
    the first ``len(u)`` samples.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.ndim != 1 or u.size < 1:
        raise DimensionError("u must be a nonempty 1-D vector")
    row = np.zeros_like(u)
    row[0] = u[0]
    return scipy.linalg.toeplitz(u, row)


def fir_multiply(a: FirMimo, b: FirMimo) -> FirMimo:
    """Series connection: block convolution, horizon ``Ta + Tb - 1``."""
    if a.q != b.p:
        raise DimensionError(
            f"inner dimensions differ: ({a.p}x{a.q}) @ ({b.p}x{b.q})"
        )
    T = a.horizon + b.horizon - 1
    out = np.zeros((T, a.p, b.q))
    for i, ai in enumerate(a.blocks):
        out[i : i + b.horizon] += np.einsum("pq,tqr->tpr", ai, b.blocks)
    return FirMimo(out)


def _sigma_max_samples(f: FirMimo, grid: FrequencyGrid) -> np.ndarray:
    resp = f.freq(grid)
    if f.p == 1 and f.q == 1:
        return np.abs(resp[:, 0, 0])
    return np.linalg.svd(resp, compute_uv=False)[:, 0]


def _sigma_max_at(f: FirMimo, omega: float) -> float:
    z = np.exp(-1j * omega * np.arange(f.horizon))
    resp = np.tensordot(z, f.blocks, axes=(0, 0))
    if f.p == 1 and f.q == 1:
        return abs(resp[0, 0])
    return float(np.linalg.svd(resp, compute_uv=False)[0])


def hinf_norm_grid_cert(f: FirMimo, grid: FrequencyGrid | None = None) -> tuple[float, float]:
    """Grid H-infinity norm with a residual certificate.

    Samples the largest singular value on the grid, then polishes every cell
    that could still contain the global peak (first-order Lipschitz
    localization). The returned value is an evaluation of sigma_max at actual
    frequencies, hence a lower bound on the true norm; the second return is
    the certified residual left after refinement.
    """
    if grid is None:
        grid = default_grid(f.horizon)
    vals = _sigma_max_samples(f, grid)
    gmax = float(vals.max())
    lip = f.lipschitz_bound()
    if lip == 0.0:
        return gmax, 0.0
    delta = grid.spacing
    # any unexplored point within a cell is <= sample + lip*delta; only cells
    # whose samples reach within lip*delta of the max can hide the peak
    cand = np.flatnonzero(vals >= gmax - lip * delta)
    omegas = grid.omegas
    best = gmax
    for i in cand:
        res = scipy.optimize.minimize_scalar(
            lambda w: -_sigma_max_at(f, w),
            bounds=(omegas[i] - delta, omegas[i] + delta),
            method="bounded",
            options={"xatol": 1e-11},
        )
        best = max(best, -float(res.fun))
    cert = lip * 1e-10 + 1e-12 * (1.0 + best)
    return best, cert


def hinf_norm_grid(f: FirMimo, grid: FrequencyGrid | None = None) -> float:
    """Peak gain ``max_w sigma_max(F(e^{jw}))`` evaluated on a refined grid."""
    return hinf_norm_grid_cert(f, grid)[0]


def hinf_norm_sdp(f: FirMimo, tol: float = 1e-8) -> float:
    """H-infinity norm as the optimal value of the semidefinite program.

    Minimizes ``t`` subject to the bordered PSD block with trace-slice
    equalities being feasible; agrees with :func:`hinf_norm_grid` to within
    solver accuracy.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    from . import sdp  # deferred: sdp depends on this module's types

    return sdp.hinf_norm_via_sdp(f, tol=tol)


def winding_stability(f: FirSiso, grid: FrequencyGrid | None = None) -> bool:
    """Certify that ``1/f`` is stable via the argument principle.

    True iff ``f(e^{jw})`` stays away from zero on the circle and winds zero
    times around the origin. Phase increments are accumulated on the grid and
    the grid is doubled whenever any single increment exceeds pi/2, which
    would otherwise alias the winding count.
    """
    if grid is None:
        grid = default_grid(f.horizon)
    n = max(grid.n_points, 4 * f.horizon)
    scale = float(np.abs(f.taps).sum()) or 1.0
    for _ in range(10):
        vals = np.fft.fft(f.taps, n=n)
        closed = np.append(vals, vals[0])
        if np.min(np.abs(closed)) <= 1e-12 * scale:
            n *= 2
            continue
        ratios = closed[1:] / closed[:-1]
        increments = np.angle(ratios)
        if np.max(np.abs(increments)) > np.pi / 2:
            n *= 2
            continue
        winding = int(round(increments.sum() / (2.0 * np.pi)))
        return winding == 0
    raise GridRefinementError(
        "phase variation not resolvable: response vanishes on or near the "
        "unit circle (refinement exhausted)"
    )
