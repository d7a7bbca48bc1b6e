"""Littlewood-Paley blocks and Besov norms of grid fields.

The low-frequency profile ``chi`` equals 1 on ``|xi| <= 3/4`` and vanishes
for ``|xi| >= 4/3``, with the smooth ``exp(-1/t)`` transition in between.
Annulus profiles are the telescoping differences
``phi(2^{-j} xi) = chi(2^{-j-1} xi) - chi(2^{-j} xi)``, so ``phi`` lives on
``3/4 <= |xi| <= 8/3`` and the partition sums to one by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral_core import Grid1D, dealiased_product

__all__ = [
    "BesovParams",
    "DyadicPartition",
    "build_partition",
    "transition",
    "chi_profile",
    "phi_profile",
    "dyadic_block",
    "besov_norm",
    "block_norms",
    "sobolev_norm",
    "product_estimate_probe",
]

_INNER = 0.75
_OUTER = 4.0 / 3.0
_SUPPORTED = (1.0, 2.0, math.inf)


def _h(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def transition(t) -> np.ndarray:
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``."""
    t = np.asarray(t, dtype=float)
    a, b = _h(t), _h(1.0 - t)
    return a / (a + b)


def chi_profile(xi) -> np.ndarray:
    r = np.abs(np.asarray(xi, dtype=float))
    return 1.0 - transition((r - _INNER) / (_OUTER - _INNER))


def phi_profile(xi) -> np.ndarray:
    return chi_profile(np.asarray(xi, dtype=float) / 2.0) - chi_profile(xi)


def _parse_index(v) -> float:
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "infinity", "oo"):
            return math.inf
        v = float(s)
    v = float(v)
    if v not in _SUPPORTED:
        raise ValueError(f"Besov index {v} not supported; use 1, 2 or inf")
    return v


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float = 2.0
    r: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "p", _parse_index(self.p))
        object.__setattr__(self, "r", _parse_index(self.r))


@dataclass(frozen=True)
class DyadicPartition:
    """Profiles on the grid's rfft wavenumbers; ``phi[j]`` is block ``j = 0..j_max``."""

    grid: Grid1D
    chi: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    j_max: int

    def profile(self, j: int) -> np.ndarray:
        if not -1 <= j <= self.j_max:
            raise ValueError(f"block index {j} outside [-1, {self.j_max}]")
        return self.chi if j == -1 else self.phi[j]

    @property
    def indices(self) -> range:
        return range(-1, self.j_max + 1)

    def identity_residual(self) -> float:
        return float(np.max(np.abs(self.chi + self.phi.sum(axis=0) - 1.0)))


def build_partition(grid: Grid1D) -> DyadicPartition:
    """Partition of unity on ``grid.k``; ``j_max`` is the largest j with ``3/4 * 2^j < k_Nyquist``."""
    k = grid.k
    j_max = -1
    while _INNER * 2.0 ** (j_max + 1) < grid.nyquist:
        j_max += 1
    chi = chi_profile(k)
    phi = np.stack([phi_profile(k / 2.0**j) for j in range(j_max + 1)]) if j_max >= 0 \
        else np.zeros((0, k.size))
    return DyadicPartition(grid, chi, phi, j_max)


def dyadic_block(u: np.ndarray, j: int, part: DyadicPartition) -> np.ndarray:
    """``Delta_j u`` by multiplying the transform with the j-th profile."""
    mult = part.profile(j)
    return np.fft.irfft(np.fft.rfft(u) * mult, part.grid.n_points)


def _scaled_pnorm(values: np.ndarray, p: float, weight: float = 1.0) -> float:
    # factor out the max so that p-th powers neither underflow nor overflow
    a = np.abs(values)
    top = float(np.max(a)) if a.size else 0.0
    if p == math.inf or top == 0.0:
        return top
    return top * float((weight * np.sum((a / top) ** p)) ** (1.0 / p))


def _lp(grid: Grid1D, f: np.ndarray, p: float) -> float:
    return _scaled_pnorm(f, p, grid.dx)


def _lr(values: np.ndarray, r: float) -> float:
    return _scaled_pnorm(values, r)


def block_norms(u: np.ndarray, params: BesovParams, part: DyadicPartition) -> np.ndarray:
    """Weighted block norms ``2^{js} |Delta_j u|_{L^p}`` for ``j = -1..j_max``."""
    uh = np.fft.rfft(u)
    n = part.grid.n_points
    out = []
    for j in part.indices:
        blk = np.fft.irfft(uh * part.profile(j), n)
        out.append(2.0 ** (j * params.s) * _lp(part.grid, blk, params.p))
    return np.array(out)


def besov_norm(u: np.ndarray, params: BesovParams, part: DyadicPartition) -> float:
    """Discrete ``B^s_{p,r}`` norm of the band-limited field ``u``."""
    return _lr(block_norms(u, params, part), params.r)


def sobolev_norm(grid: Grid1D, u: np.ndarray, s: float) -> float:
    """``(int (1 + k^2)^s |u_hat|^2 dk)^{1/2}`` normalised so that ``s = 0`` gives the L^2 norm."""
    n = grid.n_points
    uh = np.fft.rfft(u)
    w = np.full(uh.size, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    return _scaled_pnorm((1.0 + grid.k**2) ** (s / 2) * np.abs(uh) * np.sqrt(w), 2.0, grid.dx / n)


def product_estimate_probe(u: np.ndarray, v: np.ndarray, params: BesovParams,
                           part: DyadicPartition) -> float:
    """``|uv|_B / (|u|_inf |v|_B + |v|_inf |u|_B)``, with 0 when the denominator vanishes."""
    if params.s <= 0:
        raise ValueError("the product estimate needs s > 0")
    nu, nv = besov_norm(u, params, part), besov_norm(v, params, part)
    den = float(np.max(np.abs(u))) * nv + float(np.max(np.abs(v))) * nu
    if den == 0.0:
        return 0.0
    return besov_norm(dealiased_product(part.grid, u, v), params, part) / den
