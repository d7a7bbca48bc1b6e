import numpy as np
import pytest
from hypothesis import given, strategies as st

from chsim.characteristics import (
    FourierInterpolator,
    advance,
    default_seeds,
    interpolate,
    new_bundle,
    pullback_residual,
    sign_census,
)
from chsim.dynamics import make_state, reconstruct
from chsim.integrator import IntegratorConfig, run
from chsim.spectral_core import Grid1D

from conftest import band_limited, gaussian_pair


def run_with_bundle(s0, t_end=1.0, cfl=0.3, n_seeds=64):
    seeds = default_seeds(s0.grid, s0.m, s0.n, n_seeds)
    return run(s0, IntegratorConfig(t_end=t_end, cfl=cfl), bundle=new_bundle(s0, seeds))


class TestInterpolation:
    @given(st.integers(0, 2**32 - 1))
    def test_exact_on_band_limited(self, seed):
        g = Grid1D(128, 5.0)
        r = np.random.default_rng(seed)
        x = g.x + g.half_length
        k = np.pi / g.half_length
        j = np.arange(1, 20)
        a, b = r.normal(size=19), r.normal(size=19)
        pts = r.uniform(-5, 5, size=7)
        f = np.cos(np.outer(x, j * k)) @ a + np.sin(np.outer(x, j * k)) @ b
        xp = pts + g.half_length
        exact = np.cos(np.outer(xp, j * k)) @ a + np.sin(np.outer(xp, j * k)) @ b
        assert np.max(np.abs(interpolate(g, f, pts) - exact)) < 1e-11

    def test_reproduces_nodes(self, rng):
        g = Grid1D(64, 3.0)
        f = band_limited(g, rng, 20)
        np.testing.assert_allclose(FourierInterpolator(g, g.x)(f), f, atol=1e-12)


class TestBundle:
    def test_seeds_cover_support(self):
        s = gaussian_pair("A")
        seeds = default_seeds(s.grid, s.m, s.n, 64, extra=[0.123])
        assert seeds.size == 65 and 0.123 in seeds
        assert np.all(np.diff(seeds) > 0)

    def test_seed_outside_box_rejected(self):
        s = gaussian_pair("A", n=256)
        with pytest.raises(ValueError):
            new_bundle(s, [25.0])

    def test_zero_fields_stay_put(self):
        g = Grid1D(64, 5.0)
        s = make_state("B", g, g.zeros(), g.zeros())
        r = run(s, IntegratorConfig(t_end=1.0), bundle=new_bundle(s, np.linspace(-2, 2, 5)))
        b = r.bundles[-1]
        np.testing.assert_array_equal(b.q, b.seeds)
        np.testing.assert_array_equal(b.qx, 1.0)
        np.testing.assert_array_equal(b.phase, 0.0)
        for res in pullback_residual(b, r.final):
            assert np.all(res == 0)

    def test_constant_velocity_translation(self):
        # m = n = c gives Q = c^2 / 2 everywhere and Q_x = 0
        g = Grid1D(64, 5.0)
        c = 0.8
        s = make_state("A", g, np.full(64, c), np.full(64, c))
        d = reconstruct(s)
        b = new_bundle(s, [-1.0, 0.0, 1.5])
        for _ in range(10):
            b = advance(b, d, dt=0.1)
        np.testing.assert_allclose(b.q, b.seeds + 0.5 * c * c * 1.0, atol=1e-13)
        np.testing.assert_allclose(b.qx, 1.0, atol=1e-13)

    def test_kind_mismatch(self):
        s = gaussian_pair("A", n=256)
        with pytest.raises(ValueError):
            advance(new_bundle(s, [0.0]), reconstruct(s), kind="B", dt=0.1)

    def test_residual_zero_at_t0(self):
        for kind in ("A", "B"):
            s = gaussian_pair(kind, n=256)
            b = new_bundle(s, default_seeds(s.grid, s.m, s.n, 16))
            for res in pullback_residual(b, s):
                assert np.all(res == 0)


@pytest.mark.parametrize("kind", ["A", "B"])
class TestGaussianRuns:
    def test_monotone_positive_jacobian(self, kind):
        r = run_with_bundle(gaussian_pair(kind))
        for b in r.bundles:
            assert np.all(b.qx > 0) and np.all(np.diff(b.q) > 0)

    def test_jacobian_matches_finite_differences(self, kind):
        r = run_with_bundle(gaussian_pair(kind), n_seeds=256)
        b = r.bundles[-1]
        fd = (b.q[2:] - b.q[:-2]) / (b.seeds[2:] - b.seeds[:-2])
        assert np.max(np.abs(fd / b.qx[1:-1] - 1)) < 1e-3

    def test_log_and_linear_jacobian_agree(self, kind):
        r = run_with_bundle(gaussian_pair(kind))
        for b in r.bundles:
            assert np.max(np.abs(b.qx_linear / b.qx - 1)) < 1e-6

    def test_pullback_budget(self, kind):
        s0 = gaussian_pair(kind)
        r = run_with_bundle(s0, cfl=0.15)
        sup_m0 = np.max(np.abs(s0.m))
        worst = max(max(np.max(np.abs(x)) for x in pullback_residual(b, s))
                    for b, s in zip(r.bundles, r.samples))
        assert worst / sup_m0 < 1e-4


class TestSignCensus:
    def test_zero(self):
        g = Grid1D(16, 1.0)
        assert sign_census(make_state("A", g, g.zeros())) == (0.0, 0.0, 0.0, 0.0)

    def test_sign_definite_preserved(self):
        s0 = gaussian_pair("A")
        r = run(s0, IntegratorConfig(t_end=1.0))
        sup = np.max(np.abs(s0.m))
        assert sign_census(s0)[0] >= 0
        for s in r.samples:
            mn, nn, _, _ = sign_census(s)
            assert mn >= -1e-6 * sup and nn >= -1e-6 * sup
