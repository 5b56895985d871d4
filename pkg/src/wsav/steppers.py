"""Weighted SAV time steppers (backward Euler and Crank-Nicolson).

Each step splits ``phi^{n+1} = p + r^{n+1} q`` with ``p`` and ``q`` obtained
from one constant-coefficient elliptic solve each, then fixes ``r^{n+1}``
from the scalar equation in :mod:`wsav.scalar` for the weight chosen by the
step's lambda policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, StepFailure
from .grid import RealField, SpectralOperators, _irfft, quadratic_form
from .potential import (
    EnergySplit,
    F_delta,
    PotentialParams,
    dF_delta,
    modified_energy,
    nonlinear_energy,
)
from .scalar import (
    BE,
    CLOSED_FORM,
    CN,
    SOLVED,
    LineEnergy,
    RootOptions,
    RootResult,
    ScalarEquation,
    closed_form_r,
    eval_h,
    find_lambda_min,
    solve_r,
)

ADAPTIVE_MIN = "AdaptiveMin"
FIXED = "Fixed"
NONLINEAR_ENERGY = "NonlinearEnergy"
LAGRANGE_STRICT = "LagrangeStrict"


@dataclass(frozen=True)
class LambdaPolicy:
    kind: str = ADAPTIVE_MIN
    value: float = math.nan

    def __post_init__(self):
        if self.kind not in (ADAPTIVE_MIN, FIXED, NONLINEAR_ENERGY, LAGRANGE_STRICT):
            raise ConfigurationError(f"unknown lambda policy {self.kind!r}")
        if self.kind == FIXED and not 0.0 <= self.value <= 1.0:
            raise ConfigurationError(f"fixed lambda must lie in [0, 1], got {self.value}")

    @classmethod
    def adaptive_min(cls):
        return cls(ADAPTIVE_MIN)

    @classmethod
    def fixed(cls, lam: float):
        return cls(FIXED, float(lam))

    @classmethod
    def nonlinear_energy(cls):
        return cls(NONLINEAR_ENERGY, 1.0)

    @classmethod
    def lagrange_strict(cls):
        return cls(LAGRANGE_STRICT, 0.0)

    @classmethod
    def parse(cls, text: str) -> "LambdaPolicy":
        """``min`` | ``0`` | ``1`` | any other number in [0, 1]."""
        t = str(text).strip().lower()
        if t in ("min", "adaptive", "lambda_min"):
            return cls.adaptive_min()
        try:
            v = float(t)
        except ValueError:
            raise ConfigurationError(f"cannot parse lambda policy {text!r}") from None
        if v == 0.0:
            return cls.lagrange_strict()
        if v == 1.0:
            return cls.nonlinear_energy()
        return cls.fixed(v)

    def __str__(self):
        if self.kind == ADAPTIVE_MIN:
            return "min"
        return repr(float(self.value))


@dataclass(frozen=True, eq=False)
class StepParams:
    tau: float
    ops: SpectralOperators
    pparams: PotentialParams
    lambda_policy: LambdaPolicy = LambdaPolicy()
    root_opts: RootOptions = RootOptions()
    tol_lambda: float = 1e-8
    scheme: str = BE
    _sym: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigurationError(f"time step must be positive, got {self.tau}")
        if self.scheme not in (BE, CN):
            raise ConfigurationError(f"scheme must be BE or CN, got {self.scheme!r}")
        if not self.tol_lambda > 0:
            raise ConfigurationError("tol_lambda must be positive")
        gl = self.ops.sym_GL
        tau = self.tau
        self._sym.update(
            inv_be=1.0 / (1.0 + tau * gl),
            inv_cn=1.0 / (1.0 + 0.5 * tau * gl),
            expl_cn=1.0 - 0.5 * tau * gl,
        )
        self._sym.update(
            inv_be_G=self._sym["inv_be"] * self.ops.sym_G,
            inv_cn_G=self._sym["inv_cn"] * self.ops.sym_G,
            cn_p=self._sym["inv_cn"] * self._sym["expl_cn"],
        )


@dataclass(frozen=True, eq=False)
class SavState:
    phi: RealField
    r: float
    t: float = 0.0
    step: int = 0
    # quantities of phi already known from the step that produced it
    cache: dict = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class StepReport:
    step: int
    t: float
    lambda_used: float
    r_new: float
    newton_iters: int
    method: str
    probes: int
    residual: float
    energy: EnergySplit
    energy_prev: EnergySplit
    mass: float
    mu_dissipation: float
    dissipation_residual: float
    eta_equiv: float


def init_state(phi0: RealField, pparams: PotentialParams, ops: Optional[SpectralOperators] = None) -> SavState:
    EN = nonlinear_energy(phi0, pparams)
    rad = EN + pparams.C
    if not rad > 0:
        raise ConfigurationError(f"E_N + C = {rad} is not positive; increase C")
    return SavState(phi0, math.sqrt(rad), 0.0, 0, {"EN": EN})


def _nonlinear(phi: np.ndarray, cv: float, pparams: PotentialParams) -> float:
    return cv * float(np.sum(F_delta(phi, pparams)))


def _state_spectrum(state: SavState) -> np.ndarray:
    fhat = state.cache.get("phi_hat")
    if fhat is None:
        fhat = sfft.rfftn(state.phi.values)
    return fhat


def _state_energies(state: SavState, sp: StepParams):
    cv = state.phi.grid.cell_volume
    EN = state.cache.get("EN")
    if EN is None:
        EN = _nonlinear(state.phi.values, cv, sp.pparams)
    quad = state.cache.get("quad")
    if quad is None:
        quad = 0.5 * quadratic_form(sp.ops, sp.ops.sym_L, _state_spectrum(state))
    return EN, quad


def _choose_root(eq: ScalarEquation, sp: StepParams, state: SavState) -> tuple[float, RootResult]:
    pol = sp.lambda_policy
    if pol.kind == NONLINEAR_ENERGY:
        r = closed_form_r(eq)
        return 1.0, RootResult(SOLVED, r, 0, CLOSED_FORM, eval_h(eq, r, 1.0))
    if pol.kind == ADAPTIVE_MIN:
        try:
            return find_lambda_min(eq, sp.tol_lambda, sp.root_opts)
        except StepFailure as exc:
            exc.step, exc.t = state.step + 1, state.t + sp.tau
            raise
    lam = 0.0 if pol.kind == LAGRANGE_STRICT else pol.value
    res = solve_r(eq, lam, sp.root_opts)
    if not res.solved:
        raise StepFailure(
            f"scalar equation has no root at lambda = {lam}",
            equation=eq,
            lam=lam,
            step=state.step + 1,
            t=state.t + sp.tau,
        )
    return lam, res


def _finish(state, sp, eq, lam, root, p_hat, q_hat, p, q, mu_hat_fn, EN, quad):
    ops = sp.ops
    grid = state.phi.grid
    cv = grid.cell_volume
    r = root.r
    phi_new = p + r * q
    phi_hat_new = p_hat + r * q_hat
    EN_new = _new_nonlinear_energy(eq, r, EN)
    quad_new = 0.5 * quadratic_form(ops, ops.sym_L, phi_hat_new)
    if not (math.isfinite(EN_new) and math.isfinite(quad_new)):
        raise StepFailure("non-finite energy after the update", equation=eq, lam=lam,
                          step=state.step + 1, t=state.t + sp.tau)
    C = sp.pparams.C
    energy = EnergySplit(quad_new, EN_new, quad_new + EN_new, modified_energy(quad_new, EN_new, r, lam, C))
    energy_prev = EnergySplit(quad, EN, quad + EN, modified_energy(quad, EN, state.r, lam, C))
    mu_hat = mu_hat_fn(phi_hat_new, r)
    mu_diss = sp.tau * quadratic_form(ops, ops.sym_G, mu_hat)
    new_state = SavState(
        # finite energies imply a finite field, so revalidation is skipped
        RealField._trusted(grid, phi_new),
        r,
        state.t + sp.tau,
        state.step + 1,
        {"EN": EN_new, "quad": quad_new, "phi_hat": phi_hat_new},
    )
    report = StepReport(
        step=new_state.step,
        t=new_state.t,
        lambda_used=lam,
        r_new=r,
        newton_iters=root.iterations,
        method=root.method,
        probes=root.probes,
        residual=root.residual,
        energy=energy,
        energy_prev=energy_prev,
        # zero Fourier mode = sum of grid values
        mass=cv * float(phi_hat_new.flat[0].real),
        mu_dissipation=mu_diss,
        dissipation_residual=(energy.modified - energy_prev.modified) + mu_diss,
        eta_equiv=r / eq.sqrtEC,
    )
    return new_state, report


def _new_nonlinear_energy(eq: ScalarEquation, r: float, EN: float) -> float:
    le = eq.line_energy
    if abs(r) <= le.valid_radius():
        # E_N[phi^n] plus the exact, cancellation-free increment along the line
        return EN + le.difference_and_slope(r)[0]
    return le(r)


def be_step(state: SavState, sp: StepParams) -> tuple[SavState, StepReport]:
    """One weighted SAV backward Euler step."""
    if state.phi.grid != sp.ops.grid:
        raise ConfigurationError("state and operators live on different grids")
    ops, pp, tau = sp.ops, sp.pparams, sp.tau
    grid = state.phi.grid
    cv = grid.cell_volume
    phi = state.phi.values
    inv = sp._sym["inv_be"]

    EN, quad = _state_energies(state, sp)
    S = math.sqrt(EN + pp.C)
    H = dF_delta(phi, pp)
    H_hat = sfft.rfftn(H)
    p_hat = inv * _state_spectrum(state)
    q_hat = (-tau / S) * (sp._sym["inv_be_G"] * H_hat)
    p = _irfft(grid, p_hat)
    q = _irfft(grid, q_hat)

    A = cv * float(np.vdot(H, q)) / S
    B = cv * float(np.vdot(H, p - phi)) / S
    eq = ScalarEquation(BE, state.r, S, A, B, EN, LineEnergy(p, q, pp, cv, base=phi))
    lam, root = _choose_root(eq, sp, state)

    def mu_hat(phi_hat_new, r):
        return ops.sym_L * phi_hat_new + (r / S) * H_hat

    return _finish(state, sp, eq, lam, root, p_hat, q_hat, p.reshape(grid.shape), q.reshape(grid.shape), mu_hat, EN, quad)


def cn_predictor(state: SavState, sp: StepParams) -> RealField:
    """Half-step backward Euler predictor with the nonlinearity frozen at ``phi^n``."""
    grid = state.phi.grid
    H_hat = sfft.rfftn(dF_delta(state.phi.values, sp.pparams))
    return RealField(grid, _irfft(grid, _predictor_hat(state, sp, H_hat)))


def _predictor_hat(state, sp, H_hat):
    return sp._sym["inv_cn"] * (_state_spectrum(state) - (0.5 * sp.tau) * sp.ops.sym_G * H_hat)


def cn_step(state: SavState, sp: StepParams) -> tuple[SavState, StepReport]:
    """One weighted SAV Crank-Nicolson step."""
    if state.phi.grid != sp.ops.grid:
        raise ConfigurationError("state and operators live on different grids")
    ops, pp, tau = sp.ops, sp.pparams, sp.tau
    grid = state.phi.grid
    cv = grid.cell_volume
    phi = state.phi.values
    phi_hat = _state_spectrum(state)
    inv = sp._sym["inv_cn"]

    EN, quad = _state_energies(state, sp)
    H_n_hat = sfft.rfftn(dF_delta(phi, pp))
    phi_star = _irfft(grid, _predictor_hat(state, sp, H_n_hat))
    H_star = dF_delta(phi_star, pp)
    EN_star = _nonlinear(phi_star, cv, pp)
    rad = EN_star + pp.C
    if not rad > 0:
        raise StepFailure(f"E_N + C = {rad} is not positive at the predictor")
    S = math.sqrt(rad)
    Hs_hat = sfft.rfftn(H_star)
    forcing = (-0.5 * tau / S) * (sp._sym["inv_cn_G"] * Hs_hat)
    q_hat = forcing
    p_hat = sp._sym["cn_p"] * phi_hat + state.r * forcing
    p = _irfft(grid, p_hat)
    q = _irfft(grid, q_hat)

    A = cv * float(np.vdot(H_star, q)) / S
    B = cv * float(np.vdot(H_star, p - phi)) / S
    eq = ScalarEquation(CN, state.r, S, A, B, EN, LineEnergy(p, q, pp, cv, base=phi))
    lam, root = _choose_root(eq, sp, state)

    def mu_hat(phi_hat_new, r):
        return ops.sym_L * (0.5 * (phi_hat_new + phi_hat)) + ((r + state.r) / (2.0 * S)) * Hs_hat

    return _finish(state, sp, eq, lam, root, p_hat, q_hat, p, q, mu_hat, EN, quad)


def step(state: SavState, sp: StepParams) -> tuple[SavState, StepReport]:
    return be_step(state, sp) if sp.scheme == BE else cn_step(state, sp)


def run(
    state0: SavState,
    sp: StepParams,
    n_steps: int,
    recorder: Optional[Callable[[SavState, StepReport], None]] = None,
) -> SavState:
    """Advance ``n_steps`` steps, calling ``recorder(state, report)`` after each."""
    if n_steps < 0:
        raise ConfigurationError("n_steps must be non-negative")
    state = state0
    for _ in range(n_steps):
        try:
            state, report = step(state, sp)
        except StepFailure as exc:
            if exc.step is None:
                exc.step, exc.t = state.step + 1, state.t + sp.tau
            raise
        if recorder is not None:
            recorder(state, report)
    return state
