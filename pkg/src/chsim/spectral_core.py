"""Periodic grid, Fourier differentiation, Helmholtz inversion and products.

Fields are plain real ``numpy`` arrays of length ``grid.n_points``. The box
``[-L, L)`` stands in for the real line; data are expected to decay well
inside it so that periodic images are negligible.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

__all__ = [
    "Grid1D",
    "BoundaryMassWarning",
    "NonFiniteFieldError",
    "spectral_derivative",
    "helmholtz_solve",
    "kernel_convolve",
    "one_sided_integrals",
    "dealiased_product",
    "integrate",
    "check_field",
]


class NonFiniteFieldError(FloatingPointError):
    """A field contains NaN or Inf."""


class BoundaryMassWarning(RuntimeWarning):
    """Field mass near the box edge makes the line/box identification unsafe."""


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on ``[-L, L)``.

    Parameters
    ----------
    n_points : int
        Number of nodes; a power of two, at least 16.
    half_length : float
        Half the box length ``L``.
    """

    n_points: int
    half_length: float
    x: np.ndarray = field(init=False, repr=False, compare=False)
    k: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n < 16 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 16, got {n!r}")
        if not (self.half_length > 0 and math.isfinite(self.half_length)):
            raise ValueError(f"half_length must be positive, got {self.half_length!r}")
        L = float(self.half_length)
        object.__setattr__(self, "n_points", int(n))
        object.__setattr__(self, "half_length", L)
        x = -L + np.arange(n) * self.dx
        x.flags.writeable = False
        k = np.pi * np.arange(n // 2 + 1) / L
        k.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "k", k)

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.n_points

    @property
    def length(self) -> float:
        return 2.0 * self.half_length

    @property
    def nyquist(self) -> float:
        return self.k[-1]

    def zeros(self) -> np.ndarray:
        return np.zeros(self.n_points)

    def reflect(self, f: np.ndarray) -> np.ndarray:
        """Return ``f(-x)`` sampled on the grid (node ``i`` maps to ``N - i``)."""
        return np.roll(f[::-1], 1)

    def wrap(self, x):
        """Map positions periodically into ``[-L, L)``."""
        L = self.half_length
        return (np.asarray(x) + L) % (2 * L) - L


def check_field(grid: Grid1D, f, name: str = "field") -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n_points,):
        raise ValueError(
            f"{name} has shape {f.shape}, expected ({grid.n_points},) for this grid"
        )
    if not np.all(np.isfinite(f)):
        bad = int(np.flatnonzero(~np.isfinite(f))[0])
        raise NonFiniteFieldError(
            f"{name} is not finite at node {bad} (x={grid.x[bad]:.6g})"
        )
    return f


def spectral_derivative(grid: Grid1D, f: np.ndarray, order: int = 1) -> np.ndarray:
    """``d^order f / dx^order`` by multiplication with ``(ik)^order``.

    The Nyquist coefficient is dropped for odd orders so the result stays real.
    """
    fh = np.fft.rfft(f)
    fh *= (1j * grid.k) ** order
    if order % 2:
        fh[-1] = 0.0
    return np.fft.irfft(fh, grid.n_points)


def helmholtz_solve(grid: Grid1D, m: np.ndarray) -> np.ndarray:
    """Solve ``(1 - d^2/dx^2) u = m`` on the periodic box."""
    mh = np.fft.rfft(m)
    mh /= 1.0 + grid.k**2
    return np.fft.irfft(mh, grid.n_points)


def integrate(grid: Grid1D, f: np.ndarray) -> float:
    """Periodic trapezoid rule ``dx * sum(f)``."""
    return float(grid.dx * np.sum(f))


# -- direct kernel quadrature -------------------------------------------------

_EDGE_FRACTION = 1.0 / 16.0


def _boundary_mass_check(grid: Grid1D, m: np.ndarray, tol: float = 1e-10) -> None:
    total = np.sum(np.abs(m))
    if total == 0.0:
        return
    edge = np.abs(grid.x) >= grid.half_length * (1.0 - _EDGE_FRACTION)
    frac = np.sum(np.abs(m[edge])) / total
    if frac > tol:
        warnings.warn(
            f"{frac:.3g} of |m| lies within {_EDGE_FRACTION:.3g}L of the box edge; "
            "line kernel and periodic box disagree",
            BoundaryMassWarning,
            stacklevel=3,
        )


def _fd_derivatives(grid: Grid1D, m: np.ndarray):
    # fourth-order central differences; the data are compactly supported
    h = grid.dx
    mp1, mm1 = np.roll(m, -1), np.roll(m, 1)
    mp2, mm2 = np.roll(m, -2), np.roll(m, 2)
    d1 = (8.0 * (mp1 - mm1) - (mp2 - mm2)) / (12.0 * h)
    d2 = (16.0 * (mp1 + mm1) - (mp2 + mm2) - 30.0 * m) / (12.0 * h * h)
    d3 = ((mp2 - mm2) - 2.0 * (mp1 - mm1)) / (2.0 * h**3)
    return d1, d2, d3


def _cumulative_left(m: np.ndarray, h: float) -> np.ndarray:
    # F_i = sum_trap over [x_0, x_i] of exp(y - x_i) m(y)
    a = math.exp(-h)
    b = np.empty_like(m)
    b[0] = 0.0
    b[1:] = 0.5 * h * (a * m[:-1] + m[1:])
    return lfilter([1.0], [1.0, -a], b)


def one_sided_integrals(grid: Grid1D, m: np.ndarray, warn: bool = True):
    """Return ``(e^{-x} int_{-inf}^x e^y m dy, e^{x} int_x^inf e^{-y} m dy)``.

    These equal ``u - u_x`` and ``u + u_x`` for ``u = (1-d^2)^{-1} m`` on the
    line. The box edges play the role of infinity. Cumulative trapezoid
    sums carry Euler-Maclaurin end corrections through ``h^4`` so the
    result is ``O(h^6)`` accurate for smooth ``m``.
    """
    m = np.asarray(m, dtype=float)
    if warn:
        _boundary_mass_check(grid, m)
    h = grid.dx
    left = _cumulative_left(m, h)
    right = _cumulative_left(m[::-1], h)[::-1]
    d1, d2, d3 = _fd_derivatives(grid, m)
    # T - I = h^2/12 [g']_a^b - h^4/720 [g''']_a^b, evaluated at the moving end
    left -= h**2 / 12.0 * (m + d1) - h**4 / 720.0 * (m + 3 * d1 + 3 * d2 + d3)
    right -= h**2 / 12.0 * (m - d1) - h**4 / 720.0 * (m - 3 * d1 + 3 * d2 - d3)
    return left, right


def kernel_convolve(grid: Grid1D, m: np.ndarray, warn: bool = True) -> np.ndarray:
    """Quadrature of ``1/2 int exp(-|x-y|) m(y) dy`` treating ``m`` as living on the line."""
    left, right = one_sided_integrals(grid, m, warn=warn)
    return 0.5 * (left + right)


# -- de-aliased products --------------------------------------------------------


def _padded_size(n: int, n_factors: int) -> int:
    # alias-free for a p-fold product when M >= (p + 1) N / 2
    need = max(2 * n, -(-(n_factors + 1) * n // 2))
    return need + (need % 2)


def _pad(fh: np.ndarray, n: int, big: int) -> np.ndarray:
    out = np.zeros(big // 2 + 1, dtype=complex)
    out[: n // 2 + 1] = fh
    out[n // 2] *= 0.5  # split the Nyquist coefficient between +/- k
    return out


def dealiased_product(grid: Grid1D, *fields: np.ndarray) -> np.ndarray:
    """Pointwise product of 1 to 4 fields, alias-free via zero padding.

    The product is formed on a grid of at least twice the resolution and
    projected back onto the modes representable on ``grid``.
    """
    p = len(fields)
    if not 1 <= p <= 4:
        raise ValueError(f"dealiased_product takes 1 to 4 fields, got {p}")
    n = grid.n_points
    if p == 1:
        return np.array(fields[0], dtype=float)
    big = _padded_size(n, p)
    scale = big / n
    prod = None
    for f in fields:
        fp = np.fft.irfft(_pad(np.fft.rfft(f), n, big), big) * scale
        prod = fp if prod is None else prod * fp
    ph = np.fft.rfft(prod)[: n // 2 + 1] / scale
    ph[-1] = 2.0 * ph[-1].real
    return np.fft.irfft(ph, n)
