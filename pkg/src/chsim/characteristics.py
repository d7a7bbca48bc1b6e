"""Characteristic curves, their Jacobians and the pullback identities.

Along ``q_t = Q(t, q)`` the Jacobian obeys ``d/dt log q_x = Q_x(t, q)``.
System A transports momenta exactly: ``m(t, q) q_x = m0``. System B adds a
phase ``phi = int_0^t S(tau, q) dtau`` with ``S = (u v_x - v u_x)/2``:
``m(t, q) q_x = m0 exp(phi)`` and ``n(t, q) q_x = n0 exp(-phi)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .dynamics import DerivedFields, State, SystemKind
from .spectral_core import Grid1D

log = logging.getLogger(__name__)

__all__ = [
    "CharacteristicBundle",
    "FourierInterpolator",
    "advance",
    "default_seeds",
    "new_bundle",
    "pullback_residual",
    "sign_census",
    "characteristic_rates",
]


class FourierInterpolator:
    """Evaluate the trigonometric interpolant of grid fields at arbitrary points."""

    def __init__(self, grid: Grid1D, points):
        self.grid = grid
        n = grid.n_points
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        phase = np.outer(pts + grid.half_length, grid.k)
        w = np.full(n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        self._basis = np.exp(1j * phase) * (w / n)

    def __call__(self, *fields: np.ndarray) -> np.ndarray:
        coeffs = np.fft.rfft(np.stack(fields), axis=-1)
        vals = (coeffs @ self._basis.T).real
        return vals if len(fields) > 1 else vals[0]


def interpolate(grid: Grid1D, f: np.ndarray, points) -> np.ndarray:
    return FourierInterpolator(grid, points)(f)


@dataclass(frozen=True)
class CharacteristicBundle:
    """Seeds and their characteristic data at time ``t``.

    ``log_qx`` is the accumulated exponent; ``qx_linear`` is the same Jacobian
    evolved through the linear ODE, kept only as a consistency check.
    """

    grid: Grid1D
    kind: SystemKind
    t: float
    seeds: np.ndarray
    q: np.ndarray
    log_qx: np.ndarray
    qx_linear: np.ndarray
    phase: np.ndarray
    m0_at_seeds: np.ndarray
    n0_at_seeds: np.ndarray
    wraps: int = 0

    @property
    def qx(self) -> np.ndarray:
        return np.exp(self.log_qx)


def default_seeds(grid: Grid1D, m0, n0, n_seeds: int = 64, extra: Sequence[float] = (),
                  rel_threshold: float = 1e-10) -> np.ndarray:
    """Uniform seeds over the numerical support of ``|m0| + |n0|`` plus ``extra``."""
    w = np.abs(m0) + np.abs(n0)
    seeds = list(extra)
    if n_seeds > 0 and np.max(w) > 0:
        idx = np.flatnonzero(w > rel_threshold * np.max(w))
        lo, hi = grid.x[idx[0]], grid.x[idx[-1]]
        seeds.extend(np.linspace(lo, hi, n_seeds) if n_seeds > 1 else [0.5 * (lo + hi)])
    elif n_seeds > 0:
        seeds.extend(np.linspace(-0.5, 0.5, n_seeds) * grid.half_length)
    return np.unique(np.asarray(seeds, dtype=float))


def new_bundle(s: State, seeds) -> CharacteristicBundle:
    seeds = np.sort(np.asarray(seeds, dtype=float))
    g = s.grid
    if np.any(seeds < -g.half_length) or np.any(seeds >= g.half_length):
        raise ValueError("seeds must lie in the box [-L, L)")
    n_field = 2.0 * s.m if s.kind is SystemKind.CUBIC else s.n
    m0, n0 = FourierInterpolator(g, seeds)(s.m, n_field)
    z = np.zeros_like(seeds)
    return CharacteristicBundle(g, s.kind, s.t, seeds, seeds.copy(), z.copy(),
                                np.ones_like(seeds), z.copy(), m0, n0)


def characteristic_rates(d: DerivedFields, grid: Grid1D, q: np.ndarray):
    """Return ``(dq/dt, d log q_x/dt, dphase/dt)`` at positions ``q``."""
    u, ux, v, vx, m, n = FourierInterpolator(grid, q)(d.u, d.u_x, d.v, d.v_x, d.m, d.n)
    if d.kind is SystemKind.A:
        P, R = u - ux, v + vx
        return 0.5 * P * R, 0.5 * (m * R - n * P), np.zeros_like(q)
    if d.kind is SystemKind.B:
        return (0.5 * (u * v - ux * vx), 0.5 * (m * vx + n * ux),
                0.5 * (u * vx - v * ux))
    return u * u - ux * ux, 2.0 * m * ux, np.zeros_like(q)


def _wrap(bundle_grid: Grid1D, q: np.ndarray):
    L = bundle_grid.half_length
    out = (q < -L) | (q >= L)
    if np.any(out):
        log.warning("%d characteristic(s) left the box and were wrapped; the line "
                    "is only approximated by the periodic box", int(out.sum()))
        return bundle_grid.wrap(q), int(out.sum())
    return q, 0


def advance(bundle: CharacteristicBundle, derived, kind: SystemKind | None = None,
            dt: float = 0.0) -> CharacteristicBundle:
    """RK4 step of the characteristic data.

    ``derived`` is either one :class:`DerivedFields` (held fixed through the
    step) or the four RK4 stage fields ``[t, t+dt/2, t+dt/2, t+dt]`` of the
    field integrator sharing this ``dt``.
    """
    if kind is not None and SystemKind.parse(kind) is not bundle.kind:
        raise ValueError("kind does not match the bundle")
    stages = [derived] * 4 if isinstance(derived, DerivedFields) else list(derived)
    if len(stages) != 4:
        raise ValueError("expected one DerivedFields or four RK4 stage fields")
    g = bundle.grid
    q0, l0, p0, j0 = bundle.q, bundle.log_qx, bundle.phase, bundle.qx_linear
    ks = []
    q, lq = q0, l0
    jac = j0
    for i, d in enumerate(stages):
        vq, vl, vp = characteristic_rates(d, g, q)
        ks.append((vq, vl, vp, vl * jac))
        if i < 3:
            h = dt if i == 2 else 0.5 * dt
            q = q0 + h * vq
            jac = j0 + h * vl * jac
    comb = lambda j: (ks[0][j] + 2 * ks[1][j] + 2 * ks[2][j] + ks[3][j]) / 6.0  # noqa: E731
    q_new, wraps = _wrap(g, q0 + dt * comb(0))
    return replace(
        bundle,
        t=bundle.t + dt,
        q=q_new,
        log_qx=l0 + dt * comb(1),
        phase=p0 + dt * comb(2),
        qx_linear=j0 + dt * comb(3),
        wraps=bundle.wraps + wraps,
    )


def pullback_residual(bundle: CharacteristicBundle, s: State):
    """Per-seed residuals ``(res_m, res_n)`` of the pullback identities."""
    g = s.grid
    n_field = 2.0 * s.m if s.kind is SystemKind.CUBIC else s.n
    m_q, n_q = FourierInterpolator(g, bundle.q)(s.m, n_field)
    qx = bundle.qx
    if s.kind is SystemKind.B:
        em = np.exp(bundle.phase)
        return m_q * qx - bundle.m0_at_seeds * em, n_q * qx - bundle.n0_at_seeds / em
    return m_q * qx - bundle.m0_at_seeds, n_q * qx - bundle.n0_at_seeds


def sign_census(s: State):
    """``(min m, min n, max m, max n)`` over the grid nodes."""
    return float(s.m.min()), float(s.n.min()), float(s.m.max()), float(s.n.max())
