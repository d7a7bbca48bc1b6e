import math

import numpy as np
import pytest

from chsim import integrator
from chsim.dynamics import flip_swap, make_state
from chsim.integrator import (
    IntegratorConfig,
    ObserverError,
    Status,
    choose_dt,
    run,
    step_rk4,
)
from chsim.spectral_core import Grid1D

from conftest import gaussian_pair


class TestConfig:
    @pytest.mark.parametrize("kw", [{"cfl": 0.0}, {"cfl": 1.5}, {"dt_min": 0.0},
                                    {"field_cap": 1.0}, {"t_end": -1.0}, {"sample_interval": 0.0}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            IntegratorConfig(**kw)

    def test_defaults(self):
        c = IntegratorConfig()
        assert (c.cfl, c.dt_min, c.field_cap) == (0.3, 1e-9, 1e6)


class TestStep:
    def test_zero_state(self):
        g = Grid1D(64, 5.0)
        s = step_rk4(make_state("A", g, g.zeros(), g.zeros()), 0.37)
        assert np.all(s.m == 0) and np.all(s.n == 0) and s.t == 0.37

    def test_fourth_order_on_exponential(self, monkeypatch):
        # swap the PDE tendency for y' = y so the RK4 combinator itself is measured
        monkeypatch.setattr(integrator, "rhs", lambda s, d=None: (s.m, s.n))
        monkeypatch.setattr(integrator, "reconstruct", lambda s: None)
        g = Grid1D(16, 1.0)

        def error(dt):
            s = make_state("A", g, np.ones(16), np.ones(16))
            for _ in range(round(1 / dt)):
                s = step_rk4(s, dt, d0=0)
            return abs(s.m[0] - math.e)

        e1, e2 = error(0.1), error(0.05)
        assert math.log2(e1 / e2) >= 3.9

    def test_step_commutes_with_flip_symmetry(self):
        s = gaussian_pair("A", n=512)
        dt = choose_dt(s, IntegratorConfig())
        a = flip_swap(step_rk4(s, dt), sign=-1.0)
        b = step_rk4(flip_swap(s, sign=-1.0), dt)
        assert np.max(np.abs(a.m - b.m)) < 1e-9 and np.max(np.abs(a.n - b.n)) < 1e-9


class TestChooseDt:
    def test_zero_state_capped_by_sample_interval(self):
        g = Grid1D(64, 5.0)
        cfg = IntegratorConfig(sample_interval=0.25)
        assert choose_dt(make_state("A", g, g.zeros()), cfg) == 0.25

    def test_arithmetic_example(self):
        # constant m = n = 2 gives u = v = 2 and Q = (u - u_x)(v + v_x)/2 = 2 with Q_x = 0
        g = Grid1D(1024, 20.48)
        assert g.dx == pytest.approx(0.04)
        s = make_state("A", g, np.full(1024, 2.0), np.full(1024, 2.0))
        assert choose_dt(s, IntegratorConfig(cfl=0.3)) == pytest.approx(0.006, rel=1e-12)

    @pytest.mark.parametrize("lam", [2.0, 4.0, 8.0])
    def test_shrinks_like_inverse_square(self, lam):
        s = gaussian_pair("A", n=512)
        cfg = IntegratorConfig()
        big = s.with_fields(lam * s.m, lam * s.n)
        assert choose_dt(big, cfg) <= choose_dt(s, cfg) / lam**2 * (1 + 1e-12)

    def test_reaction_limit_for_b(self):
        s = gaussian_pair("B", n=512)
        d = integrator.reconstruct(s)
        cfg = IntegratorConfig(cfl=0.5)
        assert choose_dt(s, cfg, d) <= cfg.cfl / np.max(np.abs(d.S))


class TestRun:
    def test_t_end_zero(self):
        s = gaussian_pair("A", n=256)
        r = run(s, IntegratorConfig(t_end=0.0))
        assert r.status.status is Status.COMPLETED and len(r.samples) == 1 and r.n_steps == 0

    def test_zero_state(self):
        g = Grid1D(64, 5.0)
        r = run(make_state("B", g, g.zeros(), g.zeros()), IntegratorConfig(t_end=1.0))
        assert r.status.status is Status.COMPLETED
        assert len(r.samples) == 11
        assert all(np.all(x.m == 0) and np.all(x.n == 0) for x in r.samples)

    def test_sample_times_are_exact_multiples(self):
        r = run(gaussian_pair("A", n=256), IntegratorConfig(t_end=0.5, sample_interval=0.05))
        ts = [x.t for x in r.samples]
        assert ts == [min(k * 0.05, 0.5) for k in range(11)]

    def test_observers_see_every_sample(self):
        seen = []
        run(gaussian_pair("A", n=256), IntegratorConfig(t_end=0.3),
            observers=[lambda s, d, b: seen.append(s.t)])
        assert seen == [0.0, 0.1, 0.2, pytest.approx(0.3, abs=0)]

    def test_observer_failure_aborts_with_context(self):
        def bad(s, d, b):
            if s.t > 0:
                raise RuntimeError("boom")
        bad.name = "bad"
        with pytest.raises(ObserverError, match="bad failed at t=0.1: boom"):
            run(gaussian_pair("A", n=256), IntegratorConfig(t_end=1.0), observers=[bad])

    def test_dt_underflow(self):
        r = run(gaussian_pair("A", n=256), IntegratorConfig(t_end=1.0, dt_min=0.5))
        assert r.status.status is Status.DT_UNDERFLOW and r.status.t_stop == 0.0

    def test_field_cap_declares_blowup(self, monkeypatch):
        # exponential growth y' = y crosses a cap of 2 just after t = ln 2
        monkeypatch.setattr(integrator, "rhs", lambda s, d=None: (s.m, s.n))
        r = run(gaussian_pair("A", n=256), IntegratorConfig(t_end=2.0, field_cap=2.0))
        assert r.status.status is Status.BLOWUP and "field_cap" in r.status.reason
        assert math.log(2) < r.status.t_stop < 0.8
        assert r.samples[-1].t == r.status.t_stop

    def test_never_returns_nonfinite_state(self, monkeypatch):
        real = integrator.rhs

        def poisoned(s, d=None):
            dm, dn = real(s, d)
            if s.t > 0.15:
                dm = dm.copy()
                dm[7] = np.nan
            return dm, dn

        monkeypatch.setattr(integrator, "rhs", poisoned)
        r = run(gaussian_pair("A", n=256), IntegratorConfig(t_end=1.0))
        assert r.status.status is Status.BLOWUP and "not finite" in r.status.reason
        assert r.final.is_finite() and all(x.is_finite() for x in r.samples)

    def test_temporal_convergence(self):
        s0 = gaussian_pair("A", n=256)

        def final(cfl):
            return run(s0, IntegratorConfig(t_end=1.0, cfl=cfl, sample_interval=1.0)).final

        ref = final(0.3 / 16)
        errs = [np.max(np.abs(final(c).m - ref.m)) for c in (0.3, 0.15)]
        assert errs[0] / errs[1] >= 12
