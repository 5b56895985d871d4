"""Ginzburg-Landau energy split with a C^2-truncated double-well potential.

The bulk density ``F(phi) = (phi^2 - 1 - gamma)^2 / 4`` is used on
``[-delta, delta]`` and glued to exponential tails ``(a phi + b) e^{-phi} + c``
outside, mirrored evenly for negative ``phi``.  The gradient part together
with the stabilizer ``gamma`` forms the quadratic energy ``(phi, L phi) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .grid import RealField, SpectralOperators, forward, integrate, quadratic_form


def truncation_coefficients(gamma: float, delta: float) -> tuple[float, float, float]:
    """Tail coefficients ``(a, b, c)`` matching ``F`` to second order at ``delta``."""
    if not delta > 0:
        raise ConfigurationError(f"delta must be positive, got {delta}")
    g1 = 1.0 + gamma
    d = delta
    ed = math.exp(d)
    a = -(d**3 + 3 * d**2 - g1 * d - g1) * ed
    b = (d**4 + d**3 - (4 + gamma) * d**2 + g1 * d + g1) * ed
    c = 0.25 * d**4 + 2 * d**3 + 0.5 * (5 - gamma) * d**2 - 2 * g1 * d + g1 * (gamma - 3) / 4
    return a, b, c


@dataclass(frozen=True)
class PotentialParams:
    gamma: float = 0.0
    delta: float = 5.0
    C: float = 1.0
    # tail coefficients, derived from (gamma, delta)
    a: float = field(init=False, repr=False)
    b: float = field(init=False, repr=False)
    c: float = field(init=False, repr=False)

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ConfigurationError(f"gamma must be non-negative, got {self.gamma}")
        if not self.delta > 0:
            raise ConfigurationError(f"delta must be positive, got {self.delta}")
        if not math.isfinite(self.C):
            raise ConfigurationError("C must be finite")
        a, b, c = truncation_coefficients(self.gamma, self.delta)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)


def _tails(x, p: PotentialParams):
    """``(|x|, |x| > delta)``, or ``(None, None)`` when no entry reaches a tail."""
    if x.size == 0 or (x.max() <= p.delta and x.min() >= -p.delta):
        return None, None
    ax = np.abs(x)
    return ax, ax > p.delta


def F_delta(phi, p: PotentialParams):
    """Truncated potential, pointwise.  Accepts scalars or arrays."""
    x = np.asarray(phi, dtype=np.float64)
    s = x * x
    s -= 1.0 + p.gamma
    out = s * s
    out *= 0.25
    ax, tail = _tails(x, p)
    if tail is not None:
        out = np.where(tail, (p.a * ax + p.b) * np.exp(-ax) + p.c, out)
    return out if x.ndim else float(out)


def dF_delta(phi, p: PotentialParams):
    """Exact derivative of :func:`F_delta`."""
    x = np.asarray(phi, dtype=np.float64)
    out = x * x
    out -= 1.0 + p.gamma
    out *= x
    ax, tail = _tails(x, p)
    if tail is not None:
        out = np.where(tail, np.sign(x) * (p.a - p.a * ax - p.b) * np.exp(-ax), out)
    return out if x.ndim else float(out)


def d2F_delta(phi, p: PotentialParams):
    x = np.asarray(phi, dtype=np.float64)
    out = 3.0 * x * x - 1.0 - p.gamma
    ax, tail = _tails(x, p)
    if tail is not None:
        out = np.where(tail, (p.a * ax - 2.0 * p.a + p.b) * np.exp(-ax), out)
    return out if x.ndim else float(out)


def nonlinear_energy(f: RealField, p: PotentialParams) -> float:
    return integrate(RealField(f.grid, F_delta(f.values, p)))


def H_field(f: RealField, p: PotentialParams) -> RealField:
    return RealField(f.grid, dF_delta(f.values, p))


@dataclass(frozen=True)
class EnergySplit:
    quadratic: float
    nonlinear: float
    total: float
    modified: float


def modified_energy(quadratic: float, nonlinear: float, r: float, lam: float, C: float) -> float:
    return quadratic + lam * (r * r - C) + (1.0 - lam) * nonlinear


def quadratic_energy(f: RealField, ops: SpectralOperators) -> float:
    return 0.5 * quadratic_form(ops, ops.sym_L, forward(f))


def energy_split(
    f: RealField, r: float, lam: float, ops: SpectralOperators, p: PotentialParams
) -> EnergySplit:
    if not 0.0 <= lam <= 1.0:
        raise ConfigurationError(f"lambda must lie in [0, 1], got {lam}")
    quad = quadratic_energy(f, ops)
    nl = nonlinear_energy(f, p)
    return EnergySplit(quad, nl, quad + nl, modified_energy(quad, nl, r, lam, p.C))
