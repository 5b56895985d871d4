"""Periodic uniform grids, real grid functions and Fourier-multiplier operators.

All operators act through a real-to-complex FFT over every axis.  Symbols are
stored in the half-spectrum layout returned by :func:`numpy.fft.rfftn`, so
the last axis of every symbol array has ``n[-1] // 2 + 1`` entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, GridMismatchError


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the box ``[lo, hi)`` per axis."""

    n: tuple[int, ...]
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(n) not in (2, 3):
            raise ConfigurationError(f"grid dimension must be 2 or 3, got {len(n)}")
        if not (len(lo) == len(hi) == len(n)):
            raise ConfigurationError("extents and mode counts disagree in length")
        for m in n:
            if m < 4 or m % 2:
                raise ConfigurationError(f"modes per axis must be even and >= 4, got {m}")
        for a, b in zip(lo, hi):
            if not (math.isfinite(a) and math.isfinite(b)) or b <= a:
                raise ConfigurationError(f"invalid extent [{a}, {b})")

    @classmethod
    def uniform(cls, n: int, lo: float, hi: float, dim: int = 2) -> "Grid":
        return cls((n,) * dim, (lo,) * dim, (hi,) * dim)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @cached_property
    def length(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    @cached_property
    def h(self) -> tuple[float, ...]:
        return tuple(L / m for L, m in zip(self.length, self.n))

    @cached_property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @cached_property
    def volume(self) -> float:
        return float(np.prod(self.length))

    @cached_property
    def size(self) -> int:
        return int(np.prod(self.n))

    def axes(self) -> list[np.ndarray]:
        return [a + hh * np.arange(m) for a, hh, m in zip(self.lo, self.h, self.n)]

    def coords(self) -> list[np.ndarray]:
        """Coordinate arrays, one per axis, each of shape ``self.shape``."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def wavenumbers(self) -> list[np.ndarray]:
        """Angular wavenumbers per axis, last axis in half-spectrum layout."""
        ks = []
        for i, (L, m) in enumerate(zip(self.length, self.n)):
            if i == self.dim - 1:
                freq = np.fft.rfftfreq(m, d=1.0 / m)
            else:
                freq = np.fft.fftfreq(m, d=1.0 / m)
            ks.append(2.0 * np.pi * freq / L)
        return ks


@dataclass(frozen=True, eq=False)
class RealField:
    """A real grid function; ``values`` has shape ``grid.shape``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            if v.size != self.grid.size:
                raise GridMismatchError(
                    f"field with {v.size} entries does not fit grid {self.grid.shape}"
                )
            v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def _trusted(cls, grid: Grid, values: np.ndarray) -> "RealField":
        # skips validation; callers guarantee shape, dtype and finiteness
        f = object.__new__(cls)
        object.__setattr__(f, "grid", grid)
        object.__setattr__(f, "values", values)
        return f

    @classmethod
    def zeros(cls, grid: Grid) -> "RealField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "RealField":
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "RealField":
        return cls(grid, np.broadcast_to(fn(*grid.coords()), grid.shape).copy())

    def __add__(self, other: "RealField") -> "RealField":
        _check_same(self, other)
        return RealField(self.grid, self.values + other.values)

    def __sub__(self, other: "RealField") -> "RealField":
        _check_same(self, other)
        return RealField(self.grid, self.values - other.values)

    def __mul__(self, s: float) -> "RealField":
        return RealField(self.grid, self.values * float(s))

    __rmul__ = __mul__


def _check_same(f: RealField, g: RealField) -> None:
    if f.grid != g.grid:
        raise GridMismatchError(f"grids differ: {f.grid} vs {g.grid}")


@dataclass(frozen=True, eq=False)
class SpectralOperators:
    """Per-mode symbols of ``-Delta``, ``G = (-Delta)^nu`` and ``L = -eps^2 Delta + gamma``."""

    grid: Grid
    nu: float
    eps: float
    gamma: float
    sym_minus_laplace: np.ndarray
    sym_G: np.ndarray
    sym_L: np.ndarray
    # rfft half-spectrum multiplicities used for Parseval sums
    weights: np.ndarray = field(repr=False)

    @cached_property
    def sym_GL(self) -> np.ndarray:
        return self.sym_G * self.sym_L

    def _parseval_weights(self, symbol: np.ndarray) -> np.ndarray:
        # weights acting on the interleaved (re, im) view of a half spectrum
        w = self.weights * symbol * (self.grid.cell_volume / self.grid.size)
        return np.repeat(w.ravel(), 2)

    @cached_property
    def _pw_L(self) -> np.ndarray:
        return self._parseval_weights(self.sym_L)

    @cached_property
    def _pw_G(self) -> np.ndarray:
        return self._parseval_weights(self.sym_G)


def make_operators(grid: Grid, nu: float, eps: float, gamma: float) -> SpectralOperators:
    if not (0.0 <= nu <= 1.0):
        raise ConfigurationError(f"nu must lie in [0, 1], got {nu}")
    if not eps > 0.0:
        raise ConfigurationError(f"eps must be positive, got {eps}")
    if not gamma >= 0.0:
        raise ConfigurationError(f"gamma must be non-negative, got {gamma}")

    ks = np.meshgrid(*grid.wavenumbers(), indexing="ij")
    ksq = sum(k * k for k in ks)
    if nu == 0.0:
        sym_G = np.ones_like(ksq)
    else:
        sym_G = ksq**nu
        sym_G[(0,) * grid.dim] = 0.0
    sym_L = eps * eps * ksq + gamma

    m = grid.n[-1]
    w = np.full(m // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    weights = np.broadcast_to(w, ksq.shape)

    for arr in (ksq, sym_G, sym_L):
        arr.setflags(write=False)
    return SpectralOperators(grid, float(nu), float(eps), float(gamma), ksq, sym_G, sym_L, weights)


def forward(f: RealField) -> np.ndarray:
    return sfft.rfftn(f.values)


def inverse(grid: Grid, coeffs: np.ndarray) -> RealField:
    return RealField(grid, _irfft(grid, coeffs))


def _irfft(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    return sfft.irfftn(coeffs, s=grid.shape)


def _check_op(ops: SpectralOperators, f: RealField) -> None:
    if f.grid != ops.grid:
        raise GridMismatchError(f"field grid {f.grid} does not match operator grid {ops.grid}")


def apply_multiplier(ops: SpectralOperators, symbol: np.ndarray, f: RealField) -> RealField:
    _check_op(ops, f)
    return RealField(ops.grid, _irfft(ops.grid, symbol * sfft.rfftn(f.values)))


def apply_L(ops: SpectralOperators, f: RealField) -> RealField:
    return apply_multiplier(ops, ops.sym_L, f)


def apply_G(ops: SpectralOperators, f: RealField) -> RealField:
    return apply_multiplier(ops, ops.sym_G, f)


def _check_tau(tau: float) -> None:
    if not tau > 0.0:
        raise ConfigurationError(f"time step must be positive, got {tau}")


def solve_be_propagator(ops: SpectralOperators, tau: float, rhs: RealField) -> RealField:
    """Solve ``(I + tau G L) x = rhs``."""
    _check_tau(tau)
    return apply_multiplier(ops, 1.0 / (1.0 + tau * ops.sym_GL), rhs)


def solve_cn_propagator(ops: SpectralOperators, tau: float, rhs: RealField) -> RealField:
    """Solve ``(I + tau/2 G L) x = rhs``."""
    _check_tau(tau)
    return apply_multiplier(ops, 1.0 / (1.0 + 0.5 * tau * ops.sym_GL), rhs)


def apply_cn_explicit(ops: SpectralOperators, tau: float, f: RealField) -> RealField:
    """Apply ``I - tau/2 G L``."""
    _check_tau(tau)
    return apply_multiplier(ops, 1.0 - 0.5 * tau * ops.sym_GL, f)


def integrate(f: RealField) -> float:
    # periodic trapezoid rule reduces to the scaled sum
    return f.grid.cell_volume * float(np.sum(f.values))


def inner_product(f: RealField, g: RealField) -> float:
    _check_same(f, g)
    return f.grid.cell_volume * float(np.vdot(f.values, g.values))


def norm_l2(f: RealField) -> float:
    return math.sqrt(inner_product(f, f))


def norm_linf(f: RealField) -> float:
    return float(np.max(np.abs(f.values)))


def spectral_inner_product(ops: SpectralOperators, fhat: np.ndarray, ghat: np.ndarray) -> float:
    """``(f, g)`` evaluated from half-spectrum coefficients (Parseval)."""
    grid = ops.grid
    s = np.sum(ops.weights * (fhat.real * ghat.real + fhat.imag * ghat.imag))
    return grid.cell_volume * float(s) / grid.size


def quadratic_form(ops: SpectralOperators, symbol: np.ndarray, fhat: np.ndarray) -> float:
    """``(f, S f)`` for a real, even multiplier ``S`` given ``fhat = rfftn(f)``."""
    if symbol is ops.sym_L:
        w = ops._pw_L
    elif symbol is ops.sym_G:
        w = ops._pw_G
    else:
        w = ops._parseval_weights(symbol)
    z = np.ascontiguousarray(fhat).view(np.float64).ravel()
    return float(np.dot(w, z * z))
