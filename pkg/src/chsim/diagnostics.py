"""Per-sample conserved quantities, norms and blow-up indicators."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .characteristics import CharacteristicBundle
from .dynamics import DerivedFields, State, SystemKind, reconstruct
from .spectral_core import integrate

__all__ = [
    "DiagnosticsRecord",
    "InvariantViolation",
    "Recorder",
    "sample",
    "h1_envelope_rate",
    "h1_envelope_check",
    "support_separation_check",
    "support_edges",
    "indicator_to_qx",
    "COLUMNS",
]

SUPPORT_THRESHOLD = 1e-10
CONTINUATION_EXPONENT = 2


class InvariantViolation(AssertionError):
    """A proved inequality failed beyond its numerical tolerance."""


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    l1_m: float
    l1_n: float
    consA_mv: float
    consA_nu: float
    consB_mvx: float
    consB_nux: float
    consB_mv: float
    consB_nu: float
    sup_m: float
    sup_n: float
    h1_u: float
    h1_v: float
    indicatorA: float
    indicatorB_inf: float
    indicatorB_cross: float
    continuation_q: float
    slope_check_u: float
    support_left_m: float
    support_right_n: float

    def as_row(self) -> list[float]:
        return [getattr(self, c) for c in COLUMNS]

    def to_dict(self) -> dict:
        return asdict(self)

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.as_row())


COLUMNS = tuple(f.name for f in fields(DiagnosticsRecord))


def support_edges(x: np.ndarray, f: np.ndarray, rel: float = SUPPORT_THRESHOLD):
    """Leftmost and rightmost nodes where ``|f|`` exceeds ``rel * max|f|`` (0, 0 if f == 0)."""
    a = np.abs(f)
    top = a.max()
    if top == 0:
        return 0.0, 0.0
    if not math.isfinite(top):
        return math.nan, math.nan
    idx = np.flatnonzero(a > rel * top)
    return float(x[idx[0]]), float(x[idx[-1]])


def sample(s: State, d: DerivedFields | None = None,
           previous: DiagnosticsRecord | None = None) -> DiagnosticsRecord:
    """Diagnostics of ``s``; ``previous`` carries the running continuation integral."""
    d = reconstruct(s) if d is None else d
    g = s.grid
    m, n = d.m, d.n
    I = lambda f: integrate(g, f)  # noqa: E731
    sup_m, sup_n = float(np.max(np.abs(m))), float(np.max(np.abs(n)))
    cont = 0.0
    if previous is not None:
        a = max(previous.sup_m, previous.sup_n) ** CONTINUATION_EXPONENT
        b = max(sup_m, sup_n) ** CONTINUATION_EXPONENT
        cont = previous.continuation_q + 0.5 * (a + b) * (s.t - previous.t)
    return DiagnosticsRecord(
        t=float(s.t),
        l1_m=I(np.abs(m)),
        l1_n=I(np.abs(n)),
        consA_mv=I(m * d.R),
        consA_nu=I(n * d.P),
        consB_mvx=I(m * d.v_x),
        consB_nux=I(n * d.u_x),
        consB_mv=I(m * d.v),
        consB_nu=I(n * d.u),
        sup_m=sup_m,
        sup_n=sup_n,
        h1_u=math.sqrt(I(d.u**2 + d.u_x**2)),
        h1_v=math.sqrt(I(d.v**2 + d.v_x**2)),
        indicatorA=float(np.min(m * d.R - n * d.P)),
        indicatorB_inf=float(np.min(m * d.v_x + n * d.u_x)),
        indicatorB_cross=float(np.max(np.abs(d.u * d.v_x - d.v * d.u_x))),
        continuation_q=cont,
        slope_check_u=float(np.max(np.abs(d.u_x) - np.abs(d.u))),
        support_left_m=support_edges(g.x, m)[0],
        support_right_n=support_edges(g.x, n)[1],
    )


def indicator_to_qx(indicator: float) -> float:
    """The recorded indicators are ``2 Q_x``; this is the single conversion point."""
    return 0.5 * indicator


def h1_envelope_rate(initial: DiagnosticsRecord, kind) -> float:
    """Exponential rate of the H^1 envelope for sign-definite data.

    A (and cubic CH): ``1/2 (||R0 m0||_1 + ||P0 n0||_1)``, where sign
    definiteness makes the L^1 norms equal to the conserved integrals.
    B: ``1/2 |int m0 v0|``, from ``dE/dt <= (|u|^2 + |v|^2)_inf |int m v|``.
    """
    kind = SystemKind.parse(kind)
    if kind is SystemKind.B:
        return 0.5 * abs(initial.consB_mv)
    return 0.5 * (abs(initial.consA_mv) + abs(initial.consA_nu))


def h1_envelope_check(record: DiagnosticsRecord, initial: DiagnosticsRecord, kind,
                      rtol: float = 1e-6, strict: bool = True) -> float:
    """Return ``envelope(t) - (|u|_{H1}^2 + |v|_{H1}^2)``.

    ``envelope(t) = (|u0|_{H1}^2 + |v0|_{H1}^2) exp(kappa t)``. Raises
    :class:`InvariantViolation` when the margin is below ``-rtol * envelope``
    and ``strict`` is set.
    """
    kappa = h1_envelope_rate(initial, kind)
    e0 = initial.h1_u**2 + initial.h1_v**2
    env = e0 * math.exp(kappa * (record.t - initial.t))
    actual = record.h1_u**2 + record.h1_v**2
    margin = env - actual
    if strict and margin < -rtol * env:
        raise InvariantViolation(
            f"H1 envelope violated at t={record.t:.6g}: actual {actual:.10g} > envelope {env:.10g}"
        )
    return margin


def support_separation_check(s: State, bundle: CharacteristicBundle, a: float, b: float,
                             d: DerivedFields | None = None) -> float:
    """Residual of the separated-support picture.

    ``max |m|`` left of ``q(t, b)`` + ``max |n|`` right of ``q(t, a)`` +
    ``max |m R - n P|``; ``a`` and ``b`` must be seeds of ``bundle``.
    """
    d = reconstruct(s) if d is None else d
    x = s.grid.x

    def track(seed):
        i = np.flatnonzero(np.isclose(bundle.seeds, seed, rtol=0, atol=1e-12))
        if i.size == 0:
            raise ValueError(f"{seed} is not a seed of the bundle")
        return float(bundle.q[i[0]])

    qa, qb = track(a), track(b)
    left = np.abs(d.m[x < qb])
    right = np.abs(d.n[x > qa])
    r = (left.max() if left.size else 0.0) + (right.max() if right.size else 0.0)
    return float(r + np.max(np.abs(d.m * d.R - d.n * d.P)))


class Recorder:
    """Observer that appends one :class:`DiagnosticsRecord` per sample."""

    name = "diagnostics"

    def __init__(self, check_finite: bool = True):
        self.records: list[DiagnosticsRecord] = []
        self.check_finite = check_finite

    def __call__(self, s: State, d: DerivedFields, bundle=None) -> None:
        rec = sample(s, d, self.records[-1] if self.records else None)
        if self.check_finite and not rec.is_finite():
            bad = [c for c, v in zip(COLUMNS, rec.as_row()) if not math.isfinite(v)]
            raise InvariantViolation(f"non-finite diagnostics {bad} at t={s.t:.6g}")
        self.records.append(rec)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])
