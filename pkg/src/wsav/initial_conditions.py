"""Initial phase fields: a smooth sinusoid and tanh interface profiles.

Interface profiles use ``phi = tanh(d / (sqrt(2) eps))`` where ``d`` is the
signed distance to a closed curve (2D) or the torus surface (3D), negative
inside, so the enclosed phase sits near -1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError
from .grid import Grid, RealField

SINUSOIDAL = "Sinusoidal"
CROSS = "Cross"
PARAMETRIC = "ParametricCurve"
TORUS = "Torus"

CURVE_IDS = ("II", "III", "IV")


@dataclass(frozen=True)
class SignedDistanceSpec:
    kind: str
    curve_id: str = ""
    amplitude: float = 0.05
    sample_count: int = 4096
    R: float = 0.6
    r_minor: float = 0.3

    def __post_init__(self):
        if self.kind not in (SINUSOIDAL, CROSS, PARAMETRIC, TORUS):
            raise ConfigurationError(f"unknown initial-condition kind {self.kind!r}")
        if self.kind == PARAMETRIC and self.curve_id not in CURVE_IDS:
            raise ConfigurationError(f"parametric curve must be one of {CURVE_IDS}, got {self.curve_id!r}")
        if self.sample_count < 256:
            raise ConfigurationError("sample_count must be at least 256")
        if self.kind == TORUS and not (0 < self.r_minor < self.R):
            raise ConfigurationError("torus radii must satisfy 0 < r_minor < R")

    @classmethod
    def sinusoidal(cls, amplitude: float = 0.05):
        return cls(SINUSOIDAL, amplitude=amplitude)

    @classmethod
    def cross(cls):
        return cls(CROSS)

    @classmethod
    def curve(cls, curve_id: str, sample_count: int = 4096):
        return cls(PARAMETRIC, curve_id=curve_id, sample_count=sample_count)

    @classmethod
    def torus(cls, R: float = 0.6, r_minor: float = 0.3):
        return cls(TORUS, R=R, r_minor=r_minor)

    @property
    def dim(self) -> int:
        return 3 if self.kind == TORUS else 2


# --- curve definitions: position, first and second derivative in theta ----


def _curve2(t):
    s, c = np.sin(t), np.cos(t)
    pos = (c, 2 * s - 1.9 * s**3)
    d1 = (-s, 2 * c - 5.7 * s**2 * c)
    d2 = (-c, -2 * s - 11.4 * s * c**2 + 5.7 * s**3)
    return pos, d1, d2


def _curve3(t):
    # 0.25 (3 cos t + cos 3t) = cos^3 t, 0.25 (3 sin t - sin 3t) = sin^3 t
    s, c = np.sin(t), np.cos(t)
    pos = (c**3, s**3)
    d1 = (-3 * c**2 * s, 3 * s**2 * c)
    d2 = (6 * c * s**2 - 3 * c**3, 6 * s * c**2 - 3 * s**3)
    return pos, d1, d2


def _curve4(t):
    s, c = np.sin(t), np.cos(t)
    s3, c3 = np.sin(3 * t), np.cos(3 * t)
    sc, cc = np.sin(c), np.cos(c)
    # y = 0.25 s + 0.5 sin(c) + 0.1 s + 0.5 s^2 s3^2
    y = 0.35 * s + 0.5 * sc + 0.5 * s**2 * s3**2
    dy = 0.35 * c - 0.5 * cc * s + s * c * s3**2 + 3.0 * s**2 * s3 * c3
    d2y = (
        -0.35 * s
        - 0.5 * (sc * s * s + cc * c)
        + (c * c - s * s) * s3**2
        + 6.0 * s * c * s3 * c3
        + 6.0 * s * c * s3 * c3
        + 9.0 * s**2 * (c3 * c3 - s3 * s3)
    )
    return (0.5 * c, y), (-0.5 * s, dy), (-0.5 * c, d2y)


_CURVES: dict[str, Callable] = {"II": _curve2, "III": _curve3, "IV": _curve4}

_CROSS_VERTICES = np.array(
    [
        (0.75, -0.25), (0.75, 0.25), (0.25, 0.25), (0.25, 0.75),
        (-0.25, 0.75), (-0.25, 0.25), (-0.75, 0.25), (-0.75, -0.25),
        (-0.25, -0.25), (-0.25, -0.75), (0.25, -0.75), (0.25, -0.25),
    ]
)


# --- geometry helpers ------------------------------------------------------


def _inside_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd rule with a ray towards +x; ``pts`` is (m, 2), ``poly`` (k, 2)."""
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    out = np.empty(len(pts), dtype=bool)
    # grid points share rows, so collect the edge crossings once per distinct y
    ys, inverse = np.unique(pts[:, 1], return_inverse=True)
    for j, py in enumerate(ys):
        sel = np.flatnonzero(inverse == j)
        straddle = (y0 > py) != (y1 > py)
        xa, ya, xb, yb = x0[straddle], y0[straddle], x1[straddle], y1[straddle]
        xc = np.sort(xa + (py - ya) * (xb - xa) / (yb - ya))
        crossings = len(xc) - np.searchsorted(xc, pts[sel, 0], side="right")
        out[sel] = crossings % 2 == 1
    return out


def _segment_distance(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    a = poly[None, :, :]
    b = np.roll(poly, -1, axis=0)[None, :, :]
    ab = b - a
    ap = pts[:, None, :] - a
    t = np.clip(np.sum(ap * ab, axis=2) / np.sum(ab * ab, axis=2), 0.0, 1.0)
    d = ap - t[..., None] * ab
    return np.sqrt(np.min(np.sum(d * d, axis=2), axis=1))


def _curve_samples(spec: SignedDistanceSpec):
    theta = np.linspace(0.0, 2 * np.pi, spec.sample_count, endpoint=False)
    pos, _, _ = _CURVES[spec.curve_id](theta)
    return theta, np.column_stack(pos)


def _curve_unsigned_distance(spec: SignedDistanceSpec, pts: np.ndarray, theta, samples) -> np.ndarray:
    dist, idx = cKDTree(samples).query(pts)
    fn = _CURVES[spec.curve_id]
    t0 = theta[idx]
    t = t0.copy()
    dtheta = 2 * np.pi / spec.sample_count
    best = dist
    # a few Newton steps on |c(t) - x|^2, confined to the neighbouring sample
    # intervals; only improvements over the sampled distance are kept
    for _ in range(3):
        (cx, cy), (dx, dy), (ex, ey) = fn(t)
        rx, ry = cx - pts[:, 0], cy - pts[:, 1]
        g = rx * dx + ry * dy
        hess = dx * dx + dy * dy + rx * ex + ry * ey
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(hess > 0, -g / hess, 0.0)
        t = np.clip(t + np.nan_to_num(step), t0 - 2 * dtheta, t0 + 2 * dtheta)
        (nx, ny), _, _ = fn(t)
        best = np.minimum(best, np.hypot(nx - pts[:, 0], ny - pts[:, 1]))
    return best


def _as_points(point) -> tuple[np.ndarray, bool]:
    arr = np.asarray(point, dtype=np.float64)
    single = arr.ndim == 1
    return np.atleast_2d(arr), single


def parametric_signed_distance(spec: SignedDistanceSpec, point):
    """Signed distance to curves I-IV (negative inside).

    ``point`` is a pair or an ``(m, 2)`` array; returns a float or an array.
    """
    pts, single = _as_points(point)
    if pts.shape[1] != 2:
        raise ConfigurationError("curve distances need 2D points")
    if spec.kind == CROSS:
        poly = _CROSS_VERTICES
        d = _segment_distance(pts, poly)
    elif spec.kind == PARAMETRIC:
        theta, poly = _curve_samples(spec)
        d = _curve_unsigned_distance(spec, pts, theta, poly)
    else:
        raise ConfigurationError(f"{spec.kind} is not a curve")
    d = np.where(_inside_polygon(pts, poly), -d, d)
    return float(d[0]) if single else d


def torus_signed_distance(spec: SignedDistanceSpec, point):
    pts, single = _as_points(point)
    rho = np.hypot(pts[:, 0], pts[:, 1])
    d = np.hypot(rho - spec.R, pts[:, 2]) - spec.r_minor
    return float(d[0]) if single else d


def sinusoidal_ic(grid: Grid, amplitude: float = 0.05) -> RealField:
    """``amplitude * sin(x) cos(y)``."""
    if grid.dim != 2:
        raise ConfigurationError(f"sinusoidal initial data is 2D only, grid is {grid.dim}D")
    return RealField.from_function(grid, lambda x, y: amplitude * np.sin(x) * np.cos(y))


def signed_distance_field(grid: Grid, spec: SignedDistanceSpec) -> np.ndarray:
    if spec.dim != grid.dim or spec.kind == SINUSOIDAL:
        raise ConfigurationError(f"{spec.kind} does not define a distance on a {grid.dim}D grid")
    pts = np.column_stack([c.ravel() for c in grid.coords()])
    if spec.kind == TORUS:
        d = torus_signed_distance(spec, pts)
    else:
        d = parametric_signed_distance(spec, pts)
    return np.asarray(d).reshape(grid.shape)


def tanh_profile(grid: Grid, spec: SignedDistanceSpec, eps: float) -> RealField:
    if not eps > 0:
        raise ConfigurationError(f"eps must be positive, got {eps}")
    if spec.kind == SINUSOIDAL:
        return sinusoidal_ic(grid, spec.amplitude)
    d = signed_distance_field(grid, spec)
    return RealField(grid, np.tanh(d / (math.sqrt(2.0) * eps)))
