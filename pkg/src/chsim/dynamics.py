"""System definitions and right-hand sides.

System A  m_t + 1/2((u-u_x)(v+v_x) m)_x = 0, same for n.
System B  m_t + 1/2((uv-u_x v_x) m)_x - 1/2(u v_x - v u_x) m = 0,
          n_t + 1/2((uv-u_x v_x) n)_x + 1/2(u v_x - v u_x) n = 0.
Cubic CH  m_t + (m (u^2 - u_x^2))_x = 0, the common reduction at v = 2u.

Fluxes are always differentiated in conservative form so that ``int m dx``
is preserved to round-off for systems A and cubic CH.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .spectral_core import (
    Grid1D,
    NonFiniteFieldError,
    check_field,
    dealiased_product,
    helmholtz_solve,
    spectral_derivative,
)


class SystemKind(str, enum.Enum):
    A = "A"
    B = "B"
    CUBIC = "cubic"

    @classmethod
    def parse(cls, value) -> "SystemKind":
        if isinstance(value, cls):
            return value
        aliases = {"a": cls.A, "system_a": cls.A, "systema": cls.A,
                   "b": cls.B, "system_b": cls.B, "systemb": cls.B,
                   "cubic": cls.CUBIC, "cubicch": cls.CUBIC, "cubic_ch": cls.CUBIC}
        try:
            return aliases[str(value).strip().lower()]
        except KeyError:
            raise ValueError(f"unknown system kind {value!r}") from None


@dataclass(frozen=True)
class State:
    """Momenta ``(m, n)`` at time ``t``. For cubic CH ``n`` is carried but unused."""

    kind: SystemKind
    grid: Grid1D
    t: float
    m: np.ndarray
    n: np.ndarray

    def with_fields(self, m, n, t=None) -> "State":
        return replace(self, m=m, n=n, t=self.t if t is None else t)

    @property
    def stacked(self) -> np.ndarray:
        return np.stack([self.m, self.n])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.m)) and np.all(np.isfinite(self.n)))


def make_state(kind, grid: Grid1D, m, n=None, t: float = 0.0) -> State:
    kind = SystemKind.parse(kind)
    m = check_field(grid, m, "m")
    if kind is SystemKind.CUBIC:
        n = grid.zeros() if n is None else check_field(grid, n, "n")
    else:
        n = check_field(grid, grid.zeros() if n is None else n, "n")
    if t < 0:
        raise ValueError("t must be non-negative")
    return State(kind, grid, float(t), m, n)


@dataclass(frozen=True)
class DerivedFields:
    """Velocities recovered from momenta plus the composites each system uses.

    ``P = u - u_x`` and ``R = v + v_x``. ``Q`` is the transport velocity and
    ``Qx`` its exact x-derivative written through the momenta:
    A: ``Q = PR/2``, ``Qx = (mR - nP)/2``; B: ``Q = (uv - u_x v_x)/2``,
    ``Qx = (m v_x + n u_x)/2``; cubic: ``Q = u^2 - u_x^2``. ``S`` is the
    system-B reaction coefficient ``(u v_x - v u_x)/2`` (zero otherwise).
    """

    kind: SystemKind
    m: np.ndarray
    n: np.ndarray
    u: np.ndarray
    u_x: np.ndarray
    v: np.ndarray
    v_x: np.ndarray
    P: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    Qx: np.ndarray
    S: np.ndarray = field(repr=False)


def reconstruct(s: State) -> DerivedFields:
    """Recover ``u, u_x, v, v_x`` and the per-kind composites from ``s``."""
    g = s.grid
    for name, f in (("m", s.m), ("n", s.n)):
        if not np.all(np.isfinite(f)):
            bad = int(np.flatnonzero(~np.isfinite(f))[0])
            raise NonFiniteFieldError(
                f"state at t={s.t:.6g}: {name} not finite at node {bad} (x={g.x[bad]:.6g})"
            )
    u = helmholtz_solve(g, s.m)
    u_x = spectral_derivative(g, u)
    if s.kind is SystemKind.CUBIC:
        v, v_x, n = 2.0 * u, 2.0 * u_x, 2.0 * s.m
    else:
        v = helmholtz_solve(g, s.n)
        v_x = spectral_derivative(g, v)
        n = s.n
    P, R = u - u_x, v + v_x
    zero = np.zeros_like(u)
    if s.kind is SystemKind.A:
        Q = 0.5 * P * R
        Qx = 0.5 * (s.m * R - n * P)
        S = zero
    elif s.kind is SystemKind.B:
        Q = 0.5 * (u * v - u_x * v_x)
        Qx = 0.5 * (s.m * v_x + n * u_x)
        S = 0.5 * (u * v_x - v * u_x)
    else:
        Q = u * u - u_x * u_x
        Qx = 2.0 * s.m * u_x
        S = zero
    return DerivedFields(s.kind, s.m, n, u, u_x, v, v_x, P, R, Q, Qx, S)


def rhs_fields(kind: SystemKind, grid: Grid1D, m, n, d: DerivedFields | None = None):
    """Tendencies ``(dm/dt, dn/dt)`` for the given momenta."""
    if d is None:
        d = reconstruct(State(kind, grid, 0.0, m, n))
    prod = lambda *fs: dealiased_product(grid, *fs)  # noqa: E731
    dx = lambda f: spectral_derivative(grid, f)  # noqa: E731
    if kind is SystemKind.A:
        dm = -0.5 * dx(prod(d.P, d.R, m))
        dn = -0.5 * dx(prod(d.P, d.R, n))
    elif kind is SystemKind.B:
        flux_m = prod(d.u, d.v, m) - prod(d.u_x, d.v_x, m)
        flux_n = prod(d.u, d.v, n) - prod(d.u_x, d.v_x, n)
        react_m = prod(d.u, d.v_x, m) - prod(d.v, d.u_x, m)
        react_n = prod(d.u, d.v_x, n) - prod(d.v, d.u_x, n)
        dm = -0.5 * dx(flux_m) + 0.5 * react_m
        dn = -0.5 * dx(flux_n) - 0.5 * react_n
    else:
        dm = -dx(prod(m, d.u, d.u) - prod(m, d.u_x, d.u_x))
        dn = np.zeros_like(dm)
    return dm, dn


def rhs(s: State, d: DerivedFields | None = None):
    """Conservative-form tendency of ``s``; returns ``(dm/dt, dn/dt)``."""
    return rhs_fields(s.kind, s.grid, s.m, s.n, d)


def cubic_ch_rhs(grid: Grid1D, m: np.ndarray) -> np.ndarray:
    """Stand-alone cubic CH tendency, written without the two-component machinery."""
    u = helmholtz_solve(grid, m)
    ux = spectral_derivative(grid, u)
    flux = dealiased_product(grid, m, u, u) - dealiased_product(grid, m, ux, ux)
    return -spectral_derivative(grid, flux)


def flip_swap(s: State, sign: float = 1.0) -> State:
    """``(m, n)(x) -> (n(-x), sign * m(-x))``.

    With ``sign = -1`` this is an exact symmetry of system A. With
    ``sign = +1`` it maps the system A flow to its time reversal.
    """
    g = s.grid
    return s.with_fields(g.reflect(s.n), sign * g.reflect(s.m))


# -- initial data -------------------------------------------------------------

_FAMILIES = ("gaussian", "bump", "mollified_peakon", "zero")


@dataclass(frozen=True)
class InitTerm:
    """One profile of an initial momentum.

    ``gaussian``: ``amplitude * exp(-((x - center)/width)^2)``.
    ``bump``: ``amplitude * exp(1 - 1/(1 - s^2))`` for ``|s| < 1``,
    ``s = (x - center)/width`` (``width`` is the radius).
    ``mollified_peakon``: momentum of ``amplitude * exp(-|x - center|)``
    mollified at scale ``width``, i.e. ``2 * amplitude`` times a unit-mass
    Gaussian of width ``width``.
    """

    family: str
    amplitude: float = 0.0
    center: float = 0.0
    width: float = 1.0
    sign: int = 1

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown init family {self.family!r}; expected one of {_FAMILIES}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.family != "zero" and not self.width > 0:
            raise ValueError("width must be positive")


@dataclass(frozen=True)
class InitSpec:
    """Sum of :class:`InitTerm` profiles."""

    terms: tuple[InitTerm, ...] = ()

    @classmethod
    def single(cls, family, amplitude=0.0, center=0.0, width=1.0, sign=1) -> "InitSpec":
        return cls((InitTerm(family, amplitude, center, width, sign),))

    def extent(self) -> tuple[float, float] | None:
        """Interval outside of which every term is negligible (below ~1e-12 relative)."""
        lo, hi = math.inf, -math.inf
        for t in self.terms:
            if t.family == "zero" or t.amplitude == 0:
                continue
            r = t.width if t.family == "bump" else 5.3 * t.width
            lo, hi = min(lo, t.center - r), max(hi, t.center + r)
        return None if lo > hi else (lo, hi)


def profile(grid: Grid1D, term: InitTerm) -> np.ndarray:
    x = grid.x
    a = term.sign * term.amplitude
    if term.family == "zero" or a == 0:
        return grid.zeros()
    if term.family == "gaussian":
        return a * np.exp(-(((x - term.center) / term.width) ** 2))
    if term.family == "bump":
        s = (x - term.center) / term.width
        out = np.zeros_like(x)
        inside = np.abs(s) < 1.0
        out[inside] = a * np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
        return out
    eps = term.width
    return 2.0 * a * np.exp(-(((x - term.center) / eps) ** 2)) / (eps * math.sqrt(math.pi))


def build_momentum(grid: Grid1D, spec: InitSpec) -> np.ndarray:
    ext = spec.extent()
    if ext is not None:
        L = grid.half_length
        if ext[0] < -L or ext[1] > L:
            raise ValueError(
                f"initial data support [{ext[0]:.4g}, {ext[1]:.4g}] exceeds the box [-{L:g}, {L:g})"
            )
    for t in spec.terms:
        if t.family in ("gaussian", "bump", "mollified_peakon") and t.width < 4 * grid.dx:
            raise ValueError(
                f"{t.family} width {t.width:g} is below 4 dx = {4 * grid.dx:.4g}"
            )
    out = grid.zeros()
    for t in spec.terms:
        out += profile(grid, t)
    return out


def initial_data(kind, grid: Grid1D, m0: InitSpec, n0: InitSpec | None = None) -> State:
    """Build the ``t = 0`` state from profile specifications."""
    kind = SystemKind.parse(kind)
    m = build_momentum(grid, m0)
    n = grid.zeros() if n0 is None or kind is SystemKind.CUBIC else build_momentum(grid, n0)
    return make_state(kind, grid, m, n)


def is_sign_definite(f: np.ndarray, rtol: float = 0.0) -> bool:
    """True if ``f`` does not change sign (values within ``rtol * max|f|`` of zero are ignored)."""
    f = np.asarray(f)
    scale = np.max(np.abs(f)) if f.size else 0.0
    tol = rtol * scale
    return bool(np.all(f >= -tol) or np.all(f <= tol))


def stack_states(states: Sequence[State]) -> np.ndarray:
    return np.stack([s.stacked for s in states])
