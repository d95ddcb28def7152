import numpy as np
import pytest
from hypothesis import given, strategies as st

from slsid.fir import (
    DimensionError,
    FirMimo,
    FirSiso,
    FrequencyGrid,
    default_grid,
    fir_multiply,
    hinf_norm_grid,
    hinf_norm_grid_cert,
    hinf_norm_sdp,
    toeplitz,
    winding_stability,
)


def scalar_fir(taps):
    return FirMimo(np.asarray(taps, dtype=float).reshape(-1, 1, 1))


class TestToeplitz:
    def test_definition(self):
        assert np.array_equal(
            toeplitz([1.0, 2.0, 3.0]), [[1, 0, 0], [2, 1, 0], [3, 2, 1]]
        )

    def test_impulse_gives_identity(self):
        assert np.array_equal(toeplitz([1.0, 0.0, 0.0]), np.eye(3))

    def test_zero_input(self):
        assert np.array_equal(toeplitz(np.zeros(3)), np.zeros((3, 3)))

    def test_empty_rejected(self):
        with pytest.raises(DimensionError):
            toeplitz(np.array([]))


class TestFirMultiply:
    def test_identity_preserves(self, rng):
        b = FirMimo(rng.standard_normal((3, 2, 2)))
        out = fir_multiply(FirMimo.identity(2), b)
        assert np.allclose(out.blocks[:3], b.blocks)
        assert np.allclose(out.blocks[3:], 0.0)

    def test_scalar_product(self):
        out = fir_multiply(scalar_fir([1, 1]), scalar_fir([1, -1]))
        assert np.allclose(out.blocks.ravel(), [1.0, 0.0, -1.0])

    def test_matches_frequency_domain_product(self, rng):
        a = FirMimo(rng.standard_normal((4, 2, 3)))
        b = FirMimo(rng.standard_normal((4, 3, 1)))
        grid = FrequencyGrid(64)
        prod = fir_multiply(a, b)
        direct = np.einsum("tij,tjk->tik", a.freq(grid), b.freq(grid))
        assert np.abs(prod.freq(grid) - direct).max() <= 1e-10

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            fir_multiply(
                FirMimo(rng.standard_normal((2, 2, 3))),
                FirMimo(rng.standard_normal((2, 2, 3))),
            )

    def test_associative(self, rng):
        a = FirMimo(rng.standard_normal((3, 2, 2)))
        b = FirMimo(rng.standard_normal((2, 2, 3)))
        c = FirMimo(rng.standard_normal((4, 3, 1)))
        left = fir_multiply(fir_multiply(a, b), c)
        right = fir_multiply(a, fir_multiply(b, c))
        assert np.abs(left.blocks - right.blocks).max() <= 1e-12


class TestHinfGrid:
    def test_static_gain(self):
        assert hinf_norm_grid(scalar_fir([1.0])) == pytest.approx(1.0, abs=1e-12)

    def test_pure_delay_allpass(self):
        assert hinf_norm_grid(scalar_fir([0.0, 1.0])) == pytest.approx(1.0, abs=1e-12)

    def test_averaging_filter_dc(self):
        assert hinf_norm_grid(scalar_fir([0.5, 0.5])) == pytest.approx(1.0, abs=1e-12)

    def test_peak_refinement_beats_raw_sampling(self, rng):
        # a random degree-11 response peaks between raw grid points
        f = scalar_fir(rng.uniform(-1, 1, 12))
        raw = np.abs(np.fft.fft(f.blocks[:, 0, 0], 1024)).max()
        dense = np.abs(np.fft.fft(f.blocks[:, 0, 0], 1 << 18)).max()
        val, cert = hinf_norm_grid_cert(f, FrequencyGrid(1024))
        assert val >= raw  # refinement only sharpens the sampled max
        assert abs(val - dense) <= 1e-8 + cert

    def test_grid_density_enforced(self):
        f = scalar_fir(np.ones(16))
        with pytest.raises(ValueError):
            f.freq(FrequencyGrid(32))


class TestHinfSdp:
    def test_static_gain(self):
        assert hinf_norm_sdp(scalar_fir([2.0])) == pytest.approx(2.0, abs=1e-6)

    def test_delay(self):
        assert hinf_norm_sdp(scalar_fir([0.0, 1.0, 0.0])) == pytest.approx(1.0, abs=1e-6)

    def test_matches_grid_oracle(self, rng):
        f = scalar_fir(rng.uniform(-1, 1, 8))
        sdp_val = hinf_norm_sdp(f)
        grid_val = hinf_norm_grid(f, FrequencyGrid(1024))
        assert abs(sdp_val - grid_val) <= 1e-6

    def test_mimo_matches_grid(self, rng):
        f = FirMimo(rng.uniform(-1, 1, (5, 2, 2)))
        assert abs(hinf_norm_sdp(f) - hinf_norm_grid(f)) <= 1e-6

    def test_grid_below_sdp(self, rng):
        # the grid max is an evaluation, the program certifies from above
        for _ in range(5):
            f = scalar_fir(rng.uniform(-1, 1, 6))
            assert hinf_norm_grid(f) <= hinf_norm_sdp(f) + 1e-6

    def test_bad_tol(self):
        with pytest.raises(ValueError):
            hinf_norm_sdp(scalar_fir([1.0]), tol=0.0)


class TestWinding:
    def test_constant_nonzero(self):
        assert winding_stability(FirSiso([1.0])) is True

    def test_root_outside_disk(self):
        # 1 - 2 z^{-1} vanishes at z = 2, so its inverse is unstable
        assert winding_stability(FirSiso([1.0, -2.0])) is False

    def test_root_inside_disk(self):
        assert winding_stability(FirSiso([1.0, -0.5])) is True

    def test_matches_polynomial_roots(self, rng):
        for _ in range(20):
            taps = np.concatenate([[1.0], 0.6 * rng.standard_normal(5)])
            f = FirSiso(taps)
            roots = np.roots(taps)  # zeros of z^d f(z)
            expected = bool(np.all(np.abs(roots) < 1.0 - 1e-9)) if roots.size else True
            if np.any(np.abs(np.abs(roots) - 1.0) < 1e-6):
                continue  # near-circle zeros are refinement territory
            assert winding_stability(f) is expected


class TestNormInequalities:
    @given(st.integers(min_value=1, max_value=4), st.integers(min_value=1, max_value=6),
           st.integers(min_value=0, max_value=2**31 - 1))
    def test_constant_row_bound(self, n, T, seed):
        # peak gain of x^T y is at most ||x||_2 * peak gain of y
        r = np.random.default_rng(seed)
        x = r.standard_normal(n)
        y = FirMimo(r.standard_normal((T, n, 1)))
        xy = FirMimo(np.einsum("j,tjk->tk", x, y.blocks)[:, None, :])
        assert hinf_norm_grid(xy) <= np.linalg.norm(x) * hinf_norm_grid(y) + 1e-9

    @given(st.integers(min_value=0, max_value=2**31 - 1))
    def test_inverse_small_gain_bound(self, seed):
        # max_w sigma_max((I + A)^{-1}) <= 1/(1 - ||A||) when ||A|| < 1
        r = np.random.default_rng(seed)
        A = FirMimo(r.standard_normal((3, 2, 2)) * 0.1)
        norm_A = hinf_norm_grid(A)
        if norm_A >= 0.95:
            return
        grid = default_grid(A.horizon)
        resp = A.freq(grid)
        worst = max(
            np.linalg.svd(np.linalg.inv(np.eye(2) + resp[i]), compute_uv=False)[0]
            for i in range(grid.n_points)
        )
        assert worst <= 1.0 / (1.0 - norm_A) + 1e-9


def test_vec_rvec_layout(rng):
    f = FirMimo(rng.standard_normal((3, 2, 4)))
    vec = f.vec()
    rvec = f.rvec()
    assert vec.shape == (12, 2) and rvec.shape == (2, 12)
    assert np.array_equal(vec[4:8], f.blocks[1].T)
    assert np.array_equal(rvec[:, 8:12], f.blocks[2])


def test_immutability(rng):
    f = FirMimo(rng.standard_normal((2, 2, 2)))
    with pytest.raises(ValueError):
        f.blocks[0, 0, 0] = 5.0
