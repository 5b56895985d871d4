"""Nonlinear scalar equations for the auxiliary variable and the weight search.

For a fixed weight ``lam`` every weighted SAV step reduces to one scalar
equation ``h(r, lam) = 0``.  Writing ``S = sqrt(E_N[phi^n] + C)``,
``A = (H, q) / S`` and ``B = (H, p - phi^n) / S``, the backward Euler form is

    h(r) = (2 lam - A) r^2 - (2 r^n lam + B) r + (1 - lam) (E_N[p + r q] - E_N[phi^n])

and the Crank-Nicolson form is

    h(r) = lam (r + r^n)(r - r^n) - (r + r^n)(A r + B) / 2
           + (1 - lam) (E_N[p + r q] - E_N[phi^n])

with ``S``, ``H``, ``p``, ``q`` taken from the half-step predictor.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import LambdaSearchError, StepFailure
from .grid import RealField, SpectralOperators, inner_product
from .potential import F_delta, PotentialParams, dF_delta, nonlinear_energy

BE = "BE"
CN = "CN"

SOLVED = "Solved"
UNSOLVABLE = "Unsolvable"

NEWTON = "Newton"
BRACKET = "Bracket"
CLOSED_FORM = "ClosedForm"
QUARTIC = "Quartic"

# cap on (samples x grid points) held in memory during a batched scan
_BATCH_BUDGET = 1 << 22


class LineEnergy:
    """``r -> E_N[p + r q]`` for fixed grid functions ``p`` and ``q``.

    With ``base`` (the previous field) the increment ``E_N[p + r q] - E_N[base]``
    is also available without cancellation: for small time steps it is far
    smaller than either energy, and it is what the scalar equation needs.
    While ``p + r q`` and ``base`` stay inside ``[-delta, delta]`` the increment
    is an exact quartic in ``r``, so its coefficients are computed once and
    every later evaluation is O(1).
    """

    def __init__(self, p: np.ndarray, q: np.ndarray, pparams: PotentialParams, cell_volume: float,
                 base: Optional[np.ndarray] = None):
        self.p = np.ascontiguousarray(p, dtype=np.float64).ravel()
        self.q = np.ascontiguousarray(q, dtype=np.float64).ravel()
        self.pparams = pparams
        self.cell_volume = float(cell_volume)
        self._moments = None
        self.base = None
        if base is not None:
            self.base = np.ascontiguousarray(base, dtype=np.float64).ravel()
            self._dpoly = None
            self._valid_radius = None

    def __call__(self, r: float) -> float:
        pp = self.pparams
        phi = self.p + r * self.q
        s = phi * phi
        s -= 1.0 + pp.gamma
        if s.max() > pp.delta**2 - 1.0 - pp.gamma:
            return self.cell_volume * float(np.sum(F_delta(phi, pp)))
        return 0.25 * self.cell_volume * float(np.dot(s, s))

    def slope(self, r: float) -> float:
        return self.value_and_slope(r)[1]

    def value_and_slope(self, r: float) -> tuple[float, float]:
        pp = self.pparams
        phi = self.p + r * self.q
        s = phi * phi
        s -= 1.0 + pp.gamma
        if s.max() > pp.delta**2 - 1.0 - pp.gamma:
            value = float(np.sum(F_delta(phi, pp)))
            slope = float(np.dot(dF_delta(phi, pp), self.q))
        else:
            value = 0.25 * float(np.dot(s, s))
            s *= phi
            slope = float(np.dot(s, self.q))
        return value * self.cell_volume, slope * self.cell_volume

    # --- increments relative to ``base`` ---------------------------------

    def _difference_moments(self, idx=None) -> np.ndarray:
        """Quartic coefficients of ``E_N[p + r q] - E_N[base]`` (untruncated).

        With ``X = a^2 - b^2 = (d + r q)(b + p + r q)``, ``d = p - b``, the
        pointwise increment is ``(2 (b^2 - beta) X + X^2) / 4``.
        """
        p, q, b = self.p, self.q, self.base
        if idx is not None:
            p, q, b = p[idx], q[idx], b[idx]
        beta = 1.0 + self.pparams.gamma
        d = p - b
        s = b + p
        c0 = d * s
        c1 = 2.0 * p * q
        c2 = q * q
        u2 = 2.0 * (b * b - beta)
        k = np.array(
            [
                np.dot(u2 + c0, c0),
                np.dot(u2 + 2.0 * c0, c1),
                np.dot(u2 + 2.0 * c0, c2) + np.dot(c1, c1),
                2.0 * np.dot(c1, c2),
                np.dot(c2, c2),
            ]
        )
        return 0.25 * self.cell_volume * k

    def difference_polynomial(self) -> np.ndarray:
        if self._dpoly is None:
            self._dpoly = self._difference_moments()
        return self._dpoly

    def valid_radius(self) -> float:
        """``R`` such that ``|p + r q| <= delta`` for all ``|r| <= R``; -1 if none.

        Uses the sup-norm bound ``max|p| + R max|q| <= delta``, which is
        conservative but costs two reductions.
        """
        if self._valid_radius is None:
            delta = self.pparams.delta
            pmax = float(np.max(np.abs(self.p)))
            qmax = float(np.max(np.abs(self.q)))
            if pmax > delta or float(np.max(np.abs(self.base))) > delta:
                self._valid_radius = -1.0
            elif qmax == 0.0:
                self._valid_radius = math.inf
            else:
                self._valid_radius = (delta - pmax) / qmax
        return self._valid_radius

    def difference_and_slope(self, r: float) -> tuple[float, float]:
        """``(E_N[p + r q] - E_N[base], d/dr E_N[p + r q])``; needs ``base``."""
        if abs(r) <= self.valid_radius():
            k = self.difference_polynomial()
            val = (((k[4] * r + k[3]) * r + k[2]) * r + k[1]) * r + k[0]
            der = ((4.0 * k[4] * r + 3.0 * k[3]) * r + 2.0 * k[2]) * r + k[1]
            return float(val), float(der)
        pp = self.pparams
        a = self.p + r * self.q
        diff = float(np.sum(F_delta(a, pp) - F_delta(self.base, pp)))
        slope = float(np.dot(dF_delta(a, pp), self.q))
        return diff * self.cell_volume, slope * self.cell_volume

    def batch_difference(self, rs: np.ndarray) -> np.ndarray:
        """``E_N[p + r q] - E_N[base]`` at many ``r``.

        Points that leave ``[-delta, delta]`` somewhere on the requested
        range are evaluated pointwise; all others go through the moments.
        """
        rs = np.asarray(rs, dtype=np.float64)
        k = self.difference_polynomial()
        out = (((k[4] * rs + k[3]) * rs + k[2]) * rs + k[1]) * rs + k[0]
        if rs.size == 0 or float(np.max(np.abs(rs))) <= self.valid_radius():
            return out
        radius = float(np.max(np.abs(rs)))
        delta = self.pparams.delta
        outside = (np.abs(self.p) + radius * np.abs(self.q) > delta) | (np.abs(self.base) > delta)
        idx = np.flatnonzero(outside)
        if idx.size == 0:
            # the sup-norm radius is conservative; pointwise every entry stays inside
            return out
        ko = self._difference_moments(idx)
        out = out - ((((ko[4] * rs + ko[3]) * rs + ko[2]) * rs + ko[1]) * rs + ko[0])
        pi, qi = self.p[idx], self.q[idx]
        fb = float(np.sum(F_delta(self.base[idx], self.pparams)))
        chunk = max(1, _BATCH_BUDGET // idx.size)
        flat = rs.ravel()
        extra = np.empty(flat.shape)
        for i in range(0, flat.size, chunk):
            r = flat[i : i + chunk, None]
            extra[i : i + chunk] = F_delta(pi[None, :] + r * qi[None, :], self.pparams).sum(axis=1) - fb
        return out + self.cell_volume * extra.reshape(rs.shape)

    # --- absolute energies -----------------------------------------------

    def batch(self, rs: np.ndarray) -> np.ndarray:
        """Line energy at many ``r`` (same splitting as :meth:`batch_difference`)."""
        rs = np.asarray(rs, dtype=np.float64)
        if rs.size == 0:
            return np.empty(rs.shape)
        radius = float(np.max(np.abs(rs)))
        outside = np.abs(self.p) + radius * np.abs(self.q) > self.pparams.delta
        idx = np.flatnonzero(outside)
        e = self.polynomial()
        if idx.size:
            e = e - self._moments_of(self.p[idx], self.q[idx])
        out = (((e[4] * rs + e[3]) * rs + e[2]) * rs + e[1]) * rs + e[0]
        if idx.size:
            pi, qi = self.p[idx], self.q[idx]
            chunk = max(1, _BATCH_BUDGET // idx.size)
            flat = rs.ravel()
            extra = np.empty(flat.shape)
            for i in range(0, flat.size, chunk):
                r = flat[i : i + chunk, None]
                extra[i : i + chunk] = F_delta(pi[None, :] + r * qi[None, :], self.pparams).sum(axis=1)
            out = out + self.cell_volume * extra.reshape(rs.shape)
        return out

    def _moments_of(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        beta = 1.0 + self.pparams.gamma
        u = p * p - beta
        v = 2.0 * p * q
        w = q * q
        return 0.25 * self.cell_volume * np.array(
            [
                np.dot(u, u),
                2.0 * np.dot(u, v),
                np.dot(v, v) + 2.0 * np.dot(u, w),
                2.0 * np.dot(v, w),
                np.dot(w, w),
            ]
        )

    def polynomial(self) -> np.ndarray:
        """Coefficients ``e0..e4`` of the untruncated quartic ``E_N[p + r q]``."""
        if self._moments is None:
            self._moments = self._moments_of(self.p, self.q)
        return self._moments

    def untruncated_on(self, radius: float) -> bool:
        """True if ``|p + r q| <= delta`` pointwise for all ``|r| <= radius``."""
        bound = np.max(np.abs(self.p)) + radius * np.max(np.abs(self.q))
        return bool(bound <= self.pparams.delta)


@dataclass(frozen=True, eq=False)
class ScalarEquation:
    scheme: str
    r_prev: float
    sqrtEC: float
    A: float
    B: float
    EN_prev: float
    line_energy: Callable[[float], float]

    def __post_init__(self):
        if self.scheme not in (BE, CN):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.sqrtEC > 0:
            raise ValueError("sqrt(E_N + C) must be positive")


@dataclass(frozen=True)
class RootOptions:
    newton_rtol: float = 1e-12
    newton_tol: Optional[float] = None
    max_newton_iters: int = 50
    bracket_samples: int = 256
    bracket_radius_factor: float = 4.0
    use_quartic: bool = False

    def __post_init__(self):
        if self.newton_rtol <= 0 or self.max_newton_iters <= 0:
            raise ValueError("root options must be positive")
        if self.bracket_samples < 2 or self.bracket_radius_factor <= 0:
            raise ValueError("root options must be positive")
        if self.newton_tol is not None and self.newton_tol <= 0:
            raise ValueError("root options must be positive")

    def tolerance(self, eq: ScalarEquation) -> float:
        if self.newton_tol is not None:
            return self.newton_tol
        return self.newton_rtol * max(1.0, abs(eq.EN_prev))

    def radius(self, eq: ScalarEquation) -> float:
        return self.bracket_radius_factor * max(abs(eq.r_prev), eq.sqrtEC)


@dataclass(frozen=True)
class RootResult:
    status: str
    r: float = math.nan
    iterations: int = 0
    method: str = NEWTON
    residual: float = math.nan
    probes: int = 1

    @property
    def solved(self) -> bool:
        return self.status == SOLVED


def build_equation_be(
    phi_n: RealField,
    r_n: float,
    p: RealField,
    q: RealField,
    ops: SpectralOperators,
    pparams: PotentialParams,
    *,
    H: Optional[RealField] = None,
    EN: Optional[float] = None,
) -> ScalarEquation:
    if H is None:
        H = RealField(phi_n.grid, dF_delta(phi_n.values, pparams))
    if EN is None:
        EN = nonlinear_energy(phi_n, pparams)
    sqrtEC = _radical(EN, pparams)
    A = inner_product(H, q) / sqrtEC
    B = inner_product(H, p - phi_n) / sqrtEC
    line = LineEnergy(p.values, q.values, pparams, phi_n.grid.cell_volume, base=phi_n.values)
    return ScalarEquation(BE, float(r_n), sqrtEC, A, B, float(EN), line)


def build_equation_cn(
    phi_n: RealField,
    r_n: float,
    phi_star: RealField,
    p_star: RealField,
    q_star: RealField,
    ops: SpectralOperators,
    pparams: PotentialParams,
    *,
    H_star: Optional[RealField] = None,
    EN_star: Optional[float] = None,
    EN_prev: Optional[float] = None,
) -> ScalarEquation:
    if H_star is None:
        H_star = RealField(phi_star.grid, dF_delta(phi_star.values, pparams))
    if EN_star is None:
        EN_star = nonlinear_energy(phi_star, pparams)
    if EN_prev is None:
        EN_prev = nonlinear_energy(phi_n, pparams)
    sqrtEC = _radical(EN_star, pparams)
    A = inner_product(H_star, q_star) / sqrtEC
    B = inner_product(H_star, p_star - phi_n) / sqrtEC
    line = LineEnergy(p_star.values, q_star.values, pparams, phi_n.grid.cell_volume, base=phi_n.values)
    return ScalarEquation(CN, float(r_n), sqrtEC, A, B, float(EN_prev), line)


def _radical(EN: float, pparams: PotentialParams) -> float:
    rad = EN + pparams.C
    if not rad > 0:
        raise StepFailure(f"E_N + C = {rad} is not positive; increase C")
    return math.sqrt(rad)


def _quadratic_part(eq: ScalarEquation, r, lam: float):
    if eq.scheme == BE:
        return (2.0 * lam - eq.A) * r * r - (2.0 * eq.r_prev * lam + eq.B) * r
    s = r + eq.r_prev
    return lam * s * (r - eq.r_prev) - 0.5 * s * (eq.A * r + eq.B)


def _quadratic_slope(eq: ScalarEquation, r: float, lam: float) -> float:
    if eq.scheme == BE:
        return 2.0 * (2.0 * lam - eq.A) * r - (2.0 * eq.r_prev * lam + eq.B)
    return 2.0 * lam * r - 0.5 * (eq.A * r + eq.B) - 0.5 * eq.A * (r + eq.r_prev)


def _increment(eq: ScalarEquation, r: float, with_slope: bool = False):
    """``E_N[p + r q] - E_N[phi^n]`` (and its slope in ``r``)."""
    le = eq.line_energy
    if getattr(le, "base", None) is not None:
        d, de = le.difference_and_slope(r)
    elif hasattr(le, "value_and_slope"):
        e, de = le.value_and_slope(r)
        d = e - eq.EN_prev
    else:
        d = le(r) - eq.EN_prev
        de = math.nan
        if with_slope:
            step = 1e-6 * max(1.0, abs(r))
            de = (le(r + step) - le(r - step)) / (2.0 * step)
    return d, de


def eval_h(eq: ScalarEquation, r: float, lam: float) -> float:
    val = _quadratic_part(eq, r, lam)
    if lam != 1.0:
        val += (1.0 - lam) * _increment(eq, r)[0]
    return float(val)


def eval_h_batch(eq: ScalarEquation, rs: np.ndarray, lam: float) -> np.ndarray:
    rs = np.asarray(rs, dtype=np.float64)
    val = _quadratic_part(eq, rs, lam)
    if lam != 1.0:
        le = eq.line_energy
        if getattr(le, "base", None) is not None:
            inc = le.batch_difference(rs)
        elif hasattr(le, "batch"):
            inc = le.batch(rs) - eq.EN_prev
        else:
            inc = np.array([le(float(r)) for r in rs]) - eq.EN_prev
        val = val + (1.0 - lam) * inc
    return val


def _h_and_slope(eq: ScalarEquation, r: float, lam: float) -> tuple[float, float]:
    h = _quadratic_part(eq, r, lam)
    dh = _quadratic_slope(eq, r, lam)
    if lam != 1.0:
        d, de = _increment(eq, r, with_slope=True)
        h += (1.0 - lam) * d
        dh += (1.0 - lam) * de
    return float(h), float(dh)


def closed_form_r(eq: ScalarEquation) -> float:
    """Nontrivial root of ``h(., 1)``; ``h`` is then exactly quadratic."""
    if eq.scheme == BE:
        return (2.0 * eq.r_prev + eq.B) / (2.0 - eq.A)
    return (eq.r_prev + 0.5 * eq.B) / (1.0 - 0.5 * eq.A)


def trivial_root(eq: ScalarEquation) -> float:
    return 0.0 if eq.scheme == BE else -eq.r_prev


def quartic_coefficients(eq: ScalarEquation, lam: float, radius: Optional[float] = None):
    """Polynomial coefficients ``c0..c4`` of ``h(., lam)``, or None.

    Only available when ``p + r q`` stays inside ``[-delta, delta]`` for all
    ``|r| <= radius`` (the untruncated zone), so that ``E_N`` along the line
    is an exact quartic.  ``radius`` defaults to the bracket radius.
    """
    le = eq.line_energy
    if not isinstance(le, LineEnergy):
        return None
    if radius is None:
        radius = RootOptions().radius(eq)
    if not le.untruncated_on(radius):
        return None
    e = le.polynomial()
    c = (1.0 - lam) * e
    c[0] -= (1.0 - lam) * eq.EN_prev
    rp = eq.r_prev
    if eq.scheme == BE:
        c[1] -= 2.0 * rp * lam + eq.B
        c[2] += 2.0 * lam - eq.A
    else:
        c[0] += -lam * rp * rp - 0.5 * eq.B * rp
        c[1] += -0.5 * (eq.A * rp + eq.B)
        c[2] += lam - 0.5 * eq.A
    return c


# relative Newton step below which the iterate is taken as converged
_NEWTON_XTOL = 1e-13
_MAX_POLISH = 4


def _newton(eq, lam, x0, tol, opts):
    """Newton from ``x0``; converged once ``|h| <= tol`` and the step is negligible.

    A small residual alone is not enough: ``h`` shrinks with the time step,
    so for small steps a loose residual test would freeze ``r`` at ``x0``.
    """
    r = x0
    scale = max(1.0, abs(x0), abs(eq.r_prev))
    polish = 0
    h = math.nan
    for it in range(1, opts.max_newton_iters + 1):
        h, dh = _h_and_slope(eq, r, lam)
        if not math.isfinite(h):
            return None, it, h
        if h == 0.0:
            return r, it, h
        small = abs(h) <= tol
        if not math.isfinite(dh) or abs(dh) <= 1e-300:
            return (r, it, h) if small else (None, it, h)
        delta = h / dh
        if small and (abs(delta) <= _NEWTON_XTOL * max(1.0, abs(r)) or polish >= _MAX_POLISH):
            return r, it, h
        if small:
            polish += 1
        r = r - delta
        if not math.isfinite(r) or abs(r) > 1e6 * scale:
            return None, it, h
    h = eval_h(eq, r, lam)
    if abs(h) <= tol:
        return r, opts.max_newton_iters, h
    return None, opts.max_newton_iters, h


def _brackets(rs, hs):
    out = []
    for i in range(len(rs) - 1):
        if hs[i] == 0.0:
            out.append((rs[i], rs[i]))
        elif hs[i] * hs[i + 1] < 0.0:
            out.append((rs[i], rs[i + 1]))
    if hs[-1] == 0.0:
        out.append((rs[-1], rs[-1]))
    return out


def _refine(eq, lam, lo, hi, tol):
    """Root in a scanned bracket, or None.

    The scan and the scalar evaluator may round differently near a root, so
    the bracket is re-checked; without a sign change the better endpoint is
    accepted only if it already meets the tolerance.
    """
    f = lambda x: eval_h(eq, x, lam)  # noqa: E731
    fa = f(lo)
    fb = fa if hi == lo else f(hi)
    if fa == 0.0 or fb == 0.0 or fa * fb > 0.0:
        x, fx = (lo, fa) if abs(fa) <= abs(fb) else (hi, fb)
        return (x, 0) if abs(fx) <= tol else (None, 0)
    root, info = brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, full_output=True, disp=False)
    return float(root), int(info.iterations)


def _scan(eq, lam, lo, hi, samples):
    """Sign-change scan on ``[lo, hi]``; roots sorted by distance to sqrtEC."""
    rs = np.linspace(lo, hi, samples)
    hs = eval_h_batch(eq, rs, lam)
    brackets = _brackets(rs, hs)
    x0 = eq.sqrtEC
    brackets.sort(key=lambda ab: min(abs(ab[0] - x0), abs(ab[1] - x0)))
    return brackets


def _is_trivial(eq, r):
    return abs(r - trivial_root(eq)) <= 1e-12 * max(1.0, eq.sqrtEC, abs(eq.r_prev))


def solve_r(eq: ScalarEquation, lam: float, opts: RootOptions = RootOptions()) -> RootResult:
    """Root of ``h(., lam)`` nearest to ``sqrt(E_N + C)``.

    Newton from ``sqrt(E_N + C)`` first; on failure, a sign-change scan on
    ``[-R, R]`` followed by bracketed refinement.  The trivial root (``0`` for
    BE, ``-r^n`` for CN) is only returned when no other root is found.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    tol = opts.tolerance(eq)
    x0 = eq.sqrtEC

    if lam == 1.0:
        # h(., 1) is an exact quadratic with a known nontrivial root
        r = closed_form_r(eq)
        if math.isfinite(r):
            return RootResult(SOLVED, r, 0, CLOSED_FORM, eval_h(eq, r, 1.0))

    if opts.use_quartic:
        res = _solve_quartic(eq, lam, opts, tol)
        if res is not None:
            return res

    r, its, h = _newton(eq, lam, x0, tol, opts)
    total = its
    if r is not None and not _is_trivial(eq, r):
        d = abs(r - x0)
        if d > 1e-3 * max(1.0, x0):
            # a root closer to the starting point than Newton's landing spot
            for lo, hi in _scan(eq, lam, x0 - d, x0 + d, 65):
                rc, k = _refine(eq, lam, lo, hi, tol)
                total += k
                if rc is None or _is_trivial(eq, rc):
                    continue
                if abs(rc - x0) < d:
                    return RootResult(SOLVED, rc, total, BRACKET, eval_h(eq, rc, lam))
                break
        return RootResult(SOLVED, r, total, NEWTON, h)

    trivial = r
    R = opts.radius(eq)
    for lo, hi in _scan(eq, lam, -R, R, opts.bracket_samples):
        rc, k = _refine(eq, lam, lo, hi, tol)
        total += k
        if rc is None:
            continue
        if _is_trivial(eq, rc):
            trivial = rc if trivial is None else trivial
            continue
        return RootResult(SOLVED, rc, total, BRACKET, eval_h(eq, rc, lam))
    if trivial is not None:
        return RootResult(SOLVED, trivial, total, NEWTON, eval_h(eq, trivial, lam))
    return RootResult(UNSOLVABLE, math.nan, total, BRACKET, h)


def _solve_quartic(eq, lam, opts, tol):
    c = quartic_coefficients(eq, lam, opts.radius(eq))
    if c is None:
        return None
    roots = np.roots(c[::-1]) if np.any(c[1:] != 0) else np.array([])
    real = [z.real for z in roots if abs(z.imag) <= 1e-9 * max(1.0, abs(z))]
    x0 = eq.sqrtEC
    real.sort(key=lambda z: abs(z - x0))
    nontrivial = [z for z in real if not _is_trivial(eq, z)]
    cands = nontrivial or real
    if not cands:
        return RootResult(UNSOLVABLE, math.nan, 0, QUARTIC, math.nan)
    # polish against the exact (truncated) residual
    r, its, h = _newton(eq, lam, cands[0], tol, opts)
    if r is None:
        r = cands[0]
        h = eval_h(eq, r, lam)
    return RootResult(SOLVED, float(r), its, QUARTIC, h)


def find_lambda_min(
    eq: ScalarEquation, tol_lambda: float = 1e-8, opts: RootOptions = RootOptions()
) -> tuple[float, RootResult]:
    """Smallest weight admitting a root, by bisection on ``[0, 1]``.

    Returns ``lam = 0`` whenever the Lagrange-multiplier equation is
    solvable; otherwise the final upper end of the bisection bracket.
    """
    if not tol_lambda > 0:
        raise ValueError("tol_lambda must be positive")
    root = solve_r(eq, 0.0, opts)
    probes = 1
    if root.solved:
        return 0.0, root
    a, b = 0.0, 1.0
    best = None
    while b - a >= tol_lambda:
        mid = 0.5 * (a + b)
        res = solve_r(eq, mid, opts)
        probes += 1
        if res.solved:
            b, best = mid, res
        else:
            a = mid
    if best is None:
        best = solve_r(eq, 1.0, opts)
        probes += 1
        if not best.solved:
            raise LambdaSearchError("no root even at lambda = 1", equation=eq, lam=1.0)
    return b, dataclasses.replace(best, probes=probes)
