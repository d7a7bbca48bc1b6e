"""Classical RK4 with CFL-limited steps and sup-norm blow-up detection."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import characteristics as ch
from .dynamics import DerivedFields, State, SystemKind, reconstruct, rhs
from .spectral_core import NonFiniteFieldError

__all__ = [
    "IntegratorConfig",
    "RunStatus",
    "Status",
    "RunResult",
    "ObserverError",
    "choose_dt",
    "step_rk4",
    "step_coupled",
    "run",
]

_EPS = 1e-12


@dataclass(frozen=True)
class IntegratorConfig:
    t_end: float = 1.0
    cfl: float = 0.3
    dt_min: float = 1e-9
    field_cap: float = 1e6
    sample_interval: float = 0.1

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.dt_min > 0:
            raise ValueError(f"dt_min must be positive, got {self.dt_min}")
        if not self.field_cap > 1:
            raise ValueError(f"field_cap must exceed 1, got {self.field_cap}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be non-negative, got {self.t_end}")
        if not self.sample_interval > 0:
            raise ValueError(f"sample_interval must be positive, got {self.sample_interval}")


class Status(str, enum.Enum):
    COMPLETED = "completed"
    BLOWUP = "blowup_detected"
    DT_UNDERFLOW = "dt_underflow"


@dataclass(frozen=True)
class RunStatus:
    status: Status
    t_stop: float
    reason: str = ""

    def to_dict(self) -> dict:
        return {"status": self.status.value, "t_stop": self.t_stop, "reason": self.reason}


class ObserverError(RuntimeError):
    """An observer raised; the run was aborted."""

    def __init__(self, observer, t: float, cause: BaseException):
        name = getattr(observer, "name", None) or getattr(observer, "__name__", repr(observer))
        super().__init__(f"observer {name} failed at t={t:.6g}: {cause}")
        self.observer_name = name
        self.t = t
        self.cause = cause


@dataclass
class RunResult:
    samples: list[State]
    status: RunStatus
    final: State
    bundles: list = field(default_factory=list)
    n_steps: int = 0


def rates(d: DerivedFields, s: State) -> dict[str, float]:
    """Sup-norms that limit the step: transport speed, reaction and compression rates."""
    return {
        "velocity": float(np.max(np.abs(d.Q))),
        "reaction": float(np.max(np.abs(d.S))),
        "compression": float(np.max(np.abs(d.Qx))),
    }


def choose_dt(s: State, cfg: IntegratorConfig, d: DerivedFields | None = None) -> float:
    """CFL step ``cfl * dx / |Q|`` further limited by ``cfl / |S|`` and ``cfl / |Q_x|``.

    ``S`` is the system-B reaction coefficient and ``Q_x`` the rate at which
    characteristics compress; the result never exceeds ``sample_interval``.
    """
    d = reconstruct(s) if d is None else d
    r = rates(d, s)
    dt = cfg.cfl * s.grid.dx / max(r["velocity"], _EPS)
    dt = min(dt, cfg.cfl / max(r["reaction"], _EPS), cfg.cfl / max(r["compression"], _EPS))
    return min(dt, cfg.sample_interval)


def _axpy(s: State, h: float, k) -> State:
    return s.with_fields(s.m + h * k[0], s.n + h * k[1], t=s.t + h)


def _stages(s: State, dt: float, d0: DerivedFields | None = None):
    d1 = reconstruct(s) if d0 is None else d0
    k1 = rhs(s, d1)
    s2 = _axpy(s, 0.5 * dt, k1)
    d2 = reconstruct(s2)
    k2 = rhs(s2, d2)
    s3 = _axpy(s, 0.5 * dt, k2)
    d3 = reconstruct(s3)
    k3 = rhs(s3, d3)
    s4 = _axpy(s, dt, k3)
    d4 = reconstruct(s4)
    k4 = rhs(s4, d4)
    m = s.m + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    n = s.n + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    if s.kind is SystemKind.CUBIC:
        n = s.n
    return s.with_fields(m, n, t=s.t + dt), (d1, d2, d3, d4)


def step_rk4(s: State, dt: float, d0: DerivedFields | None = None) -> State:
    """One classical RK4 step of ``(m, n)``. ``dt`` may be negative (backward step)."""
    if dt == 0:
        return s
    return _stages(s, dt, d0)[0]


def step_coupled(s: State, bundle, dt: float, d0: DerivedFields | None = None):
    """RK4 step of the fields and the characteristic bundle with shared stages."""
    new, stages = _stages(s, dt, d0)
    return new, ch.advance(bundle, stages, dt=dt)


def _sup(s: State) -> float:
    return max(float(np.max(np.abs(s.m))), float(np.max(np.abs(s.n))))


def _nonfinite_reason(s: State) -> str | None:
    for name, f in (("m", s.m), ("n", s.n)):
        bad = ~np.isfinite(f)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            return f"non-finite {name} at x={s.grid.x[i]:.6g}"
    return None


Observer = Callable[[State, DerivedFields, object], None]


def _notify(observers: Sequence[Observer], s: State, d: DerivedFields, bundle) -> None:
    for obs in observers:
        try:
            obs(s, d, bundle)
        except Exception as exc:  # noqa: BLE001 -- re-raised with context
            raise ObserverError(obs, s.t, exc) from exc


def run(s0: State, cfg: IntegratorConfig, observers: Sequence[Observer] = (),
        bundle=None, max_steps: int | None = None) -> RunResult:
    """Integrate from ``s0`` to ``cfg.t_end``.

    Observers are called as ``obs(state, derived, bundle)`` at ``t = 0``, at
    every multiple of ``sample_interval`` and at an early stop. The run ends
    with blow-up when ``max(|m|, |n|)`` exceeds ``field_cap`` times its
    initial value or a field stops being finite, and with dt underflow when
    the CFL step drops below ``dt_min``.
    """
    s = s0
    d = reconstruct(s)
    samples = [s]
    bundles = [bundle] if bundle is not None else []
    _notify(observers, s, d, bundle)
    sup0 = _sup(s)
    cap = cfg.field_cap * sup0 if sup0 > 0 else math.inf
    k_next = 1
    n_steps = 0
    t_end = cfg.t_end
    tiny = 1e-12 * max(1.0, t_end)

    def stop(status: Status, reason: str, state: State, derived, bund) -> RunResult:
        if state.t != samples[-1].t:
            samples.append(state)
            if bund is not None:
                bundles.append(bund)
            _notify(observers, state, derived, bund)
        return RunResult(samples, RunStatus(status, state.t, reason), state, bundles, n_steps)

    while s.t < t_end - tiny:
        dt_cfl = choose_dt(s, cfg, d)
        if dt_cfl < cfg.dt_min:
            return stop(Status.DT_UNDERFLOW,
                        f"dt={dt_cfl:.3g} below dt_min={cfg.dt_min:.3g}", s, d, bundle)
        t_sample = min(k_next * cfg.sample_interval, t_end)
        dt = dt_cfl
        hit = s.t + dt >= t_sample - tiny
        if hit:
            dt = t_sample - s.t
        try:
            if bundle is not None:
                new, new_bundle = step_coupled(s, bundle, dt, d)
            else:
                new, new_bundle = step_rk4(s, dt, d), None
        except NonFiniteFieldError as exc:
            return stop(Status.BLOWUP, f"non-finite RK stage: {exc}", s, d, bundle)
        n_steps += 1
        if hit:
            new = new.with_fields(new.m, new.n, t=t_sample)
            if new_bundle is not None:
                new_bundle = replace(new_bundle, t=t_sample)
        reason = _nonfinite_reason(new)
        if reason is not None:
            return stop(Status.BLOWUP, reason, s, d, bundle)
        try:
            d_new = reconstruct(new)
        except NonFiniteFieldError as exc:  # pragma: no cover -- caught above
            return stop(Status.BLOWUP, str(exc), s, d, bundle)
        derived_ok = all(np.all(np.isfinite(a)) for a in (d_new.u, d_new.v, d_new.Q, d_new.Qx))
        if not derived_ok:
            return stop(Status.BLOWUP, "non-finite velocity fields", s, d, bundle)
        s, d, bundle = new, d_new, new_bundle
        sup = _sup(s)
        if sup > cap:
            which = "m" if np.max(np.abs(s.m)) >= np.max(np.abs(s.n)) else "n"
            return stop(Status.BLOWUP,
                        f"sup-norm of {which} reached {sup:.4g} > field_cap x initial = {cap:.4g}",
                        s, d, bundle)
        if hit:
            samples.append(s)
            if bundle is not None:
                bundles.append(bundle)
            _notify(observers, s, d, bundle)
            k_next += 1
        if max_steps is not None and n_steps >= max_steps:
            raise RuntimeError(f"max_steps={max_steps} exhausted at t={s.t:.6g}")
    return RunResult(samples, RunStatus(Status.COMPLETED, s.t, ""), s, bundles, n_steps)
