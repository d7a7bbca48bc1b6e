"""Certified constants, blow-up thresholds and time bounds.

Conventions: ``Q_x = (m R - n P)/2`` for system A with ``P = u - u_x``,
``R = v + v_x``; ``Q_x = (m v_x + n u_x)/2`` for system B. Both come from
:func:`chsim.dynamics.reconstruct`. ``N = |m| + |n|``.

Along a characteristic ``q`` the slope obeys the Riccati equation
``Q_xt + Q Q_xx + Q_x^2 = W``. The right-hand side ``W`` is written here
through ``G = (1 - d^2)^{-1}`` and the one-sided inverses of ``1 -/+ d``:

A: ``W = 1/2 [ -m (1-d)^{-1}(Q_x R) + n (1+d)^{-1}(Q_x P) ]``
B: ``W = 1/2 [ -n G(d(Q_x u) + Q_x u_x) + n dG(S m)
              - m G(d(Q_x v) + Q_x v_x) - m dG(S n) + S (m v_x - n u_x) ]``

with ``S = (u v_x - v u_x)/2``. Each family bounds ``|W| <= c(t) N``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import quad

from .characteristics import FourierInterpolator
from .dynamics import DerivedFields, State, SystemKind, is_sign_definite, reconstruct
from .spectral_core import helmholtz_solve, integrate, spectral_derivative

__all__ = [
    "ThresholdFamily",
    "HypothesisViolation",
    "CertifiedConstant",
    "BlowupInputs",
    "BlowupPrediction",
    "certified_constant",
    "f_function",
    "g_function",
    "G_function",
    "root_a0",
    "predict",
    "blowup_inputs",
    "riccati_rhs",
    "riccati_lhs",
    "riccati_residual",
    "riccati_identity_residual",
]


class ThresholdFamily(str, enum.Enum):
    A_L1 = "A_L1"
    A_SIGN = "A_sign"
    B_SIGN = "B_sign"

    @classmethod
    def parse(cls, value) -> "ThresholdFamily":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"a_l1": cls.A_L1, "familya_l1data": cls.A_L1, "a_l1data": cls.A_L1,
                   "a_sign": cls.A_SIGN, "familya_signdata": cls.A_SIGN, "a_signdata": cls.A_SIGN,
                   "b_sign": cls.B_SIGN, "familyb_signdata": cls.B_SIGN, "b_signdata": cls.B_SIGN}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown threshold family {value!r}; use A_L1, A_sign or B_sign") from None

    @property
    def kind(self) -> SystemKind:
        return SystemKind.B if self is ThresholdFamily.B_SIGN else SystemKind.A

    @property
    def has_root(self) -> bool:
        return self is not ThresholdFamily.A_L1


class HypothesisViolation(ValueError):
    """Initial data do not satisfy the hypotheses of the requested family."""


# -- certified constants ------------------------------------------------------


@dataclass(frozen=True)
class CertifiedConstant:
    """A valid constant ``C`` together with the bound chain that produced it."""

    family: ThresholdFamily
    C: float
    derivation: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {"family": self.family.value, "C": self.C,
                "derivation": [dict(r) for r in self.derivation]}


def _record(term: str, bound: str, value: float) -> dict:
    return {"term": term, "bound": bound, "value": float(value)}


def _h1_sq(grid, f, fx) -> float:
    return integrate(grid, f * f + fx * fx)


def certified_constant(s0: State, family, rtol: float = 1e-12) -> CertifiedConstant:
    """Concrete ``C`` for ``s0`` built from elementary kernel bounds.

    Kernel facts used throughout: ``|(1 -/+ d)^{-1} f| <= |f|_1``,
    ``|u - u_x|, |u + u_x| <= |m|_1``, ``|dG f| <= |G|f||`` and, for
    sign-definite ``m``, ``|u_x| <= |u|`` and ``|u|_inf^2 <= |u|_{H1}^2 / 2``.
    """
    family = ThresholdFamily.parse(family)
    if s0.kind is not family.kind:
        raise HypothesisViolation(f"family {family.value} needs system {family.kind.value}, "
                                  f"got {s0.kind.value}")
    g = s0.grid
    d = reconstruct(s0)
    m, n = d.m, d.n
    if family is not ThresholdFamily.A_L1:
        for name, f in (("m0", m), ("n0", n)):
            if not is_sign_definite(f, rtol):
                raise HypothesisViolation(f"{name} changes sign; {family.value} needs sign-definite data")
    rec = []
    if family is ThresholdFamily.A_L1:
        a, b = integrate(g, np.abs(m)), integrate(g, np.abs(n))
        rec += [
            _record("|m|_1", "conserved along the flow", a),
            _record("|n|_1", "conserved along the flow", b),
            _record("|P|_inf", "<= |m|_1", a),
            _record("|R|_inf", "<= |n|_1", b),
            _record("|Q_x|_1", "<= (|m|_1 |R|_inf + |n|_1 |P|_inf)/2 = ab", a * b),
            _record("m-coefficient", "|(1-d)^{-1}(Q_x R)|/2 <= |Q_x|_1 |R|_inf / 2 = ab^2/2",
                    0.5 * a * b * b),
            _record("n-coefficient", "|(1+d)^{-1}(Q_x P)|/2 <= |Q_x|_1 |P|_inf / 2 = a^2 b/2",
                    0.5 * a * a * b),
        ]
        C = 0.5 * a * b * max(a, b)
        rec.append(_record("C", "max of the coefficients = ab max(a, b)/2", C))
        return CertifiedConstant(family, float(C), tuple(rec))

    e0 = _h1_sq(g, d.u, d.u_x) + _h1_sq(g, d.v, d.v_x)
    h0 = math.sqrt(0.5 * e0)
    rec.append(_record("E0", "|u0|_{H1}^2 + |v0|_{H1}^2", e0))
    rec.append(_record("h0", "sqrt(E0/2) bounds |u|_inf, |v|_inf at t = 0", h0))
    if family is ThresholdFamily.A_SIGN:
        kappa = 0.5 * (integrate(g, np.abs(d.R * m)) + integrate(g, np.abs(d.P * n)))
        rec += [
            _record("kappa", "(|R0 m0|_1 + |P0 n0|_1)/2, conserved", kappa),
            _record("E(t)", "<= E0 exp(kappa t) from one-sided bounds on P u_x, R v_x", e0),
            _record("h(t)", "<= h0 exp(kappa t / 2)", h0),
            _record("|Q_x|_1", "<= kappa", kappa),
            _record("|R|_inf, |P|_inf", "<= 2 h(t)", 2 * h0),
            _record("m-, n-coefficient", "<= kappa h(t) = kappa h0 exp(kappa t/2)", kappa * h0),
        ]
        C = max(kappa * h0, 0.5 * kappa)
        rec.append(_record("C", "max(kappa h0, kappa/2)", C))
        return CertifiedConstant(family, float(C), tuple(rec))

    beta = abs(integrate(g, m * d.v))
    rec += [
        _record("beta", "|int m0 v0| = |int n0 u0|, conserved", beta),
        _record("|m v_x|_1, |n u_x|_1", "<= beta (|v_x| <= |v|, sign-definite m v)", beta),
        _record("E(t)", "<= E0 exp(beta t / 2)", e0),
        _record("h(t)", "<= h0 exp(beta t / 4)", h0),
        _record("|S|_inf", "<= |u|_inf |v|_inf <= h(t)^2", h0 * h0),
        _record("|Q_x|_1", "<= (|m v_x|_1 + |n u_x|_1)/2 <= beta", beta),
        _record("G-terms", "|G(d(Q_x v)) + G(Q_x v_x)| <= |Q_x|_1 |v|_inf", beta * h0),
        _record("S-terms", "|dG(S n)| + |S v_x| <= 2 |S|_inf |v|_inf", 2 * h0**3),
        _record("m-, n-coefficient", "<= beta h/2 + h^3 <= (beta h0/2 + h0^3) exp(3 beta t/4)",
                0.5 * beta * h0 + h0**3),
    ]
    C = max(0.5 * beta * h0 + h0**3, h0 * h0, 0.75 * beta)
    rec.append(_record("C", "max(beta h0/2 + h0^3, h0^2, 3 beta/4); h0^2 also bounds |S|", C))
    return CertifiedConstant(family, float(C), tuple(rec))


# -- threshold functions ------------------------------------------------------


def f_function(family, C: float):
    family = ThresholdFamily.parse(family)
    if family is ThresholdFamily.A_SIGN:
        return lambda x: math.expm1(C * x)
    if family is ThresholdFamily.B_SIGN:
        return lambda x: math.expm1(math.expm1(C * x))
    raise ValueError("A_L1 has no (f, g) pair")


def g_function(family, C: float):
    """Inverse of ``f``: ``f(g(y)) = y`` for ``y >= 0``."""
    family = ThresholdFamily.parse(family)
    if family is ThresholdFamily.A_SIGN:
        return lambda y: math.log1p(y) / C
    if family is ThresholdFamily.B_SIGN:
        return lambda y: math.log1p(math.log1p(y)) / C
    raise ValueError("A_L1 has no (f, g) pair")


def _f_integral(family: ThresholdFamily, C: float, T: float) -> float:
    if family is ThresholdFamily.A_SIGN:
        return math.expm1(C * T) / C - T
    f = f_function(family, C)
    val, _ = quad(f, 0.0, T, epsabs=1e-13, epsrel=1e-13, limit=200)
    return val


def G_function(a: float, C: float, N0: float, family) -> float:
    """``G(a) = 1 + a g(-a/N0) + N0 int_0^{g(-a/N0)} f``."""
    family = ThresholdFamily.parse(family)
    T = g_function(family, C)(-a / N0)
    return 1.0 + a * T + N0 * _f_integral(family, C, T)


def root_a0(C: float, N0: float, family, tol: float = 1e-12) -> float:
    """Unique negative root of ``G`` by bracketing and bisection."""
    family = ThresholdFamily.parse(family)
    if not family.has_root:
        raise ValueError("A_L1 has no threshold root")
    if not (C > 0 and N0 > 0):
        raise ValueError(f"root_a0 needs C > 0 and N0 > 0, got C={C}, N0={N0}")
    G = lambda a: G_function(a, C, N0, family)  # noqa: E731
    lo = -max(1.0, N0)
    while G(lo) >= 0:
        lo *= 2.0
    hi = 0.0
    while True:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        gm = G(mid)
        if gm >= 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < tol * (1.0 + abs(mid)) and abs(gm) < tol:
            break
    return hi if abs(G(hi)) <= abs(G(lo)) else lo


# -- predictions --------------------------------------------------------------


@dataclass(frozen=True)
class BlowupInputs:
    family: ThresholdFamily
    C: float
    N0: float
    Qx0: float
    x0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", ThresholdFamily.parse(self.family))


@dataclass(frozen=True)
class BlowupPrediction:
    family: ThresholdFamily
    C: float
    N0: float
    Qx0: float
    x0: float
    a0: float | None
    threshold: float
    triggered: bool
    T0_upper: float | None
    derivation: tuple = ()

    def to_dict(self) -> dict:
        out = asdict(self)
        out["family"] = self.family.value
        out["derivation"] = [dict(r) for r in self.derivation]
        return out


def predict(inputs: BlowupInputs, derivation: tuple = ()) -> BlowupPrediction:
    fam, C, N0, Qx0 = inputs.family, inputs.C, inputs.N0, inputs.Qx0
    if not N0 > 0:
        raise ValueError(f"N0 must be positive, got {N0}")
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    if fam is ThresholdFamily.A_L1:
        a0 = None
        threshold = -math.sqrt(2.0 * C * N0)
        triggered = Qx0 <= threshold
        T0 = -Qx0 / (C * N0) if triggered else None
    else:
        a0 = root_a0(C, N0, fam)
        threshold = a0
        triggered = Qx0 <= a0
        T0 = g_function(fam, C)(-Qx0 / N0) if triggered else None
    return BlowupPrediction(fam, C, N0, Qx0, inputs.x0, a0, threshold, bool(triggered), T0,
                            tuple(derivation))


def blowup_inputs(s0: State, family, x0: float | None = None):
    """``(BlowupInputs, CertifiedConstant)`` at ``x0`` (default: argmax of ``|m0| + |n0|``)."""
    cert = certified_constant(s0, family)
    d = reconstruct(s0)
    N = np.abs(d.m) + np.abs(d.n)
    if x0 is None:
        i = int(np.argmax(N))
        x0, N0, Qx0 = float(s0.grid.x[i]), float(N[i]), float(d.Qx[i])
    else:
        m, n, qx = FourierInterpolator(s0.grid, [x0])(d.m, d.n, d.Qx)
        N0, Qx0 = float(abs(m[0]) + abs(n[0])), float(qx[0])
    if not N0 > 0:
        raise ValueError(f"N0 = |m0| + |n0| vanishes at x0 = {x0}")
    return BlowupInputs(cert.family, cert.C, N0, Qx0, float(x0)), cert


# -- Riccati residuals --------------------------------------------------------


def _inv_one_sided(grid, f, sign: float) -> np.ndarray:
    # (1 - sign*d)^{-1}
    fh = np.fft.rfft(f)
    fh /= 1.0 - sign * 1j * grid.k
    return np.fft.irfft(fh, grid.n_points)


def riccati_rhs(grid, d: DerivedFields) -> np.ndarray:
    """The right-hand side ``W`` of the slope equation (see the module docstring)."""
    if d.kind is SystemKind.A:
        return 0.5 * (-d.m * _inv_one_sided(grid, d.Qx * d.R, 1.0)
                      + d.n * _inv_one_sided(grid, d.Qx * d.P, -1.0))
    if d.kind is SystemKind.B:
        G = lambda f: helmholtz_solve(grid, f)  # noqa: E731
        D = lambda f: spectral_derivative(grid, f)  # noqa: E731
        qx, S = d.Qx, d.S
        return 0.5 * (-d.n * G(D(qx * d.u) + qx * d.u_x) + d.n * D(G(S * d.m))
                      - d.m * G(D(qx * d.v) + qx * d.v_x) - d.m * D(G(S * d.n))
                      + S * (d.m * d.v_x - d.n * d.u_x))
    raise ValueError("Riccati identity is implemented for systems A and B")


def riccati_lhs(s1: State, s2: State):
    """``Q_xt + Q Q_xx + Q_x^2`` at the midpoint of two nearby states.

    Returns ``(lhs, d1, d2)``; the time derivative is the centred difference
    and spatial terms are averaged, so the error is ``O((t2 - t1)^2)``.
    """
    if s2.t <= s1.t:
        raise ValueError("states must be ordered in time")
    d1, d2 = reconstruct(s1), reconstruct(s2)
    g = s1.grid
    dt = s2.t - s1.t
    spatial = lambda d: d.Q * spectral_derivative(g, d.Qx) + d.Qx**2  # noqa: E731
    lhs = (d2.Qx - d1.Qx) / dt + 0.5 * (spatial(d1) + spatial(d2))
    return lhs, d1, d2


def riccati_identity_residual(s1: State, s2: State) -> np.ndarray:
    """``LHS - W`` at the midpoint; zero up to time-differencing error."""
    lhs, d1, d2 = riccati_lhs(s1, s2)
    g = s1.grid
    return lhs - 0.5 * (riccati_rhs(g, d1) + riccati_rhs(g, d2))


def riccati_residual(s1: State, s2: State, C: float, family, t0: float = 0.0) -> np.ndarray:
    """``LHS - bound`` at the midpoint; the inequality demands ``<= 0`` up to slack.

    ``bound = C N`` for ``A_L1`` and ``C exp(C (t - t0)) N`` for the sign families.
    """
    family = ThresholdFamily.parse(family)
    lhs, d1, d2 = riccati_lhs(s1, s2)
    N = 0.5 * (np.abs(d1.m) + np.abs(d1.n) + np.abs(d2.m) + np.abs(d2.n))
    tm = 0.5 * (s1.t + s2.t) - t0
    factor = C if family is ThresholdFamily.A_L1 else C * math.exp(C * tm)
    return lhs - factor * N
