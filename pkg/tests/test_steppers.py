import math

import numpy as np
import pytest

from conftest import TWO_PI, smooth_field
from oracles import dense_symbol_matrix, lagrange_be, sav_be_lambda1, sav_cn_lambda1
from wsav.errors import ConfigurationError, StepFailure
from wsav.grid import Grid, RealField, apply_L, inner_product, integrate, make_operators
from wsav.potential import PotentialParams, energy_split, nonlinear_energy
from wsav.scalar import BE, CN, CLOSED_FORM
from wsav.steppers import (
    LambdaPolicy,
    SavState,
    StepParams,
    be_step,
    cn_predictor,
    cn_step,
    init_state,
    run,
    step,
)


def setup(n=8, nu=1.0, eps=0.3, gamma=1.0, tau=1e-2, policy=None, scheme=BE, amp=0.8, seed=0):
    rng = np.random.default_rng(seed)
    grid = Grid.uniform(n, 0.0, TWO_PI)
    ops = make_operators(grid, nu, eps, gamma)
    pp = PotentialParams(gamma=gamma)
    sp = StepParams(tau, ops, pp, policy or LambdaPolicy.adaptive_min(), scheme=scheme)
    phi = smooth_field(grid, rng, amplitude=amp)
    return sp, init_state(phi, pp)


# --- state initialisation ---------------------------------------------------


def test_init_state_examples(grid16, pp0):
    s = init_state(RealField.constant(grid16, 1.0), pp0)
    assert s.r == pytest.approx(1.0)
    s = init_state(RealField.zeros(grid16), pp0)
    assert s.r == pytest.approx(math.sqrt(math.pi**2 + 1))
    assert s.t == 0.0 and s.step == 0


def test_init_state_r_consistent(rng, grid16, pp0):
    phi = smooth_field(grid16, rng, amplitude=1.3)
    s = init_state(phi, pp0)
    assert s.r**2 - pp0.C == pytest.approx(nonlinear_energy(phi, pp0), rel=1e-14)


def test_init_state_rejects_nonpositive_radical(grid16):
    pp = PotentialParams(C=-100.0)
    with pytest.raises(ConfigurationError):
        init_state(RealField.constant(grid16, 1.0), pp)


# --- policies ---------------------------------------------------------------


def test_lambda_policy_parse():
    assert LambdaPolicy.parse("min") == LambdaPolicy.adaptive_min()
    assert LambdaPolicy.parse("0") == LambdaPolicy.lagrange_strict()
    assert LambdaPolicy.parse("1") == LambdaPolicy.nonlinear_energy()
    assert LambdaPolicy.parse("0.25") == LambdaPolicy.fixed(0.25)
    for bad in ("abc", "1.5", "-0.1"):
        with pytest.raises(ConfigurationError):
            LambdaPolicy.parse(bad)


def test_step_params_validation(sine_ops, pp0):
    with pytest.raises(ConfigurationError):
        StepParams(0.0, sine_ops, pp0)
    with pytest.raises(ConfigurationError):
        StepParams(1e-3, sine_ops, pp0, scheme="RK")
    with pytest.raises(ConfigurationError):
        StepParams(1e-3, sine_ops, pp0, tol_lambda=0.0)


# --- trivial cases ----------------------------------------------------------


@pytest.mark.parametrize("scheme", [BE, CN])
def test_stationary_state_is_fixed_point(grid16, pp0, scheme):
    ops = make_operators(grid16, 1.0, 0.1, 0.0)
    sp = StepParams(1e-2, ops, pp0, scheme=scheme)
    s0 = init_state(RealField.constant(grid16, 1.0), pp0)
    s1, rep = step(s0, sp)
    np.testing.assert_allclose(s1.phi.values, 1.0, atol=1e-14)
    assert s1.r == pytest.approx(s0.r, abs=1e-14)
    assert rep.lambda_used == 0.0
    assert s1.step == 1 and s1.t == pytest.approx(1e-2)


def test_cn_predictor_stationary_and_small_tau(grid16, pp0, rng):
    ops = make_operators(grid16, 1.0, 0.1, 0.0)
    s0 = init_state(RealField.constant(grid16, 1.0), pp0)
    sp = StepParams(0.1, ops, pp0, scheme=CN)
    np.testing.assert_allclose(cn_predictor(s0, sp).values, 1.0, atol=1e-14)
    s = init_state(smooth_field(grid16, rng), pp0)
    sp = StepParams(1e-14, ops, pp0, scheme=CN)
    np.testing.assert_allclose(cn_predictor(s, sp).values, s.phi.values, atol=1e-12)


def test_cn_predictor_matches_per_mode_formula():
    sp, s0 = setup(n=16, tau=0.05, scheme=CN)
    grid = s0.phi.grid
    phi = s0.phi.values
    H = (phi**2 - 2.0) * phi
    k = np.fft.fftfreq(16, d=1 / 16)
    ksq = k[:, None] ** 2 + k[None, :] ** 2
    gl = ksq * (0.09 * ksq + 1.0)
    pred = np.fft.ifft2((np.fft.fft2(phi) - 0.025 * ksq * np.fft.fft2(H)) / (1 + 0.025 * gl)).real
    np.testing.assert_allclose(cn_predictor(s0, sp).values, pred, atol=1e-13)
    assert grid.shape == pred.shape


def test_run_zero_steps_and_determinism():
    sp, s0 = setup(n=16)
    assert run(s0, sp, 0) is s0
    a = run(s0, sp, 5)
    b = run(s0, sp, 5)
    np.testing.assert_array_equal(a.phi.values, b.phi.values)
    assert a.r == b.r
    with pytest.raises(ConfigurationError):
        run(s0, sp, -1)


def test_run_invokes_recorder():
    sp, s0 = setup(n=16)
    seen = []
    run(s0, sp, 3, recorder=lambda s, r: seen.append((s.step, r.step)))
    assert seen == [(1, 1), (2, 2), (3, 3)]


def test_grid_mismatch_rejected(pp0):
    sp, _ = setup(n=16)
    other = init_state(RealField.zeros(Grid.uniform(8, 0.0, TWO_PI)), pp0)
    with pytest.raises(ConfigurationError):
        be_step(other, sp)
    with pytest.raises(ConfigurationError):
        cn_step(other, sp)


# --- oracle comparisons -------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_be_lambda_one_matches_dense_sav_oracle(seed):
    sp, s0 = setup(tau=0.05, policy=LambdaPolicy.nonlinear_energy(), seed=seed)
    G, L = dense_symbol_matrix(8, TWO_PI, 1.0, 0.3, 1.0)
    h2 = s0.phi.grid.cell_volume
    s1, rep = be_step(s0, sp)
    phi_ref, r_ref = sav_be_lambda1(s0.phi.values.ravel(), s0.r, 0.05, G, L, 1.0, 1.0, h2)
    np.testing.assert_allclose(s1.phi.values.ravel(), phi_ref, rtol=1e-10, atol=1e-12)
    assert s1.r == pytest.approx(r_ref, rel=1e-10)
    assert rep.method == CLOSED_FORM and rep.lambda_used == 1.0


def test_nonlinear_energy_policy_matches_fixed_one():
    sp1, s0 = setup(n=16, tau=0.02, policy=LambdaPolicy.nonlinear_energy())
    sp2, _ = setup(n=16, tau=0.02, policy=LambdaPolicy.fixed(1.0))
    a = run(s0, sp1, 5)
    b = run(s0, sp2, 5)
    np.testing.assert_allclose(a.phi.values, b.phi.values, rtol=1e-10, atol=1e-12)
    assert a.r == pytest.approx(b.r, rel=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_cn_lambda_one_matches_dense_sav_oracle(seed):
    sp, s0 = setup(tau=0.05, policy=LambdaPolicy.nonlinear_energy(), scheme=CN, seed=seed)
    G, L = dense_symbol_matrix(8, TWO_PI, 1.0, 0.3, 1.0)
    h2 = s0.phi.grid.cell_volume
    s1, _ = cn_step(s0, sp)
    phi_ref, r_ref, bar = sav_cn_lambda1(s0.phi.values.ravel(), s0.r, 0.05, G, L, 1.0, 1.0, h2)
    np.testing.assert_allclose(cn_predictor(s0, sp).values.ravel(), bar, atol=1e-12)
    np.testing.assert_allclose(s1.phi.values.ravel(), phi_ref, rtol=1e-10, atol=1e-12)
    assert s1.r == pytest.approx(r_ref, rel=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_be_lambda_zero_matches_lagrange_multiplier_oracle(seed):
    sp, s0 = setup(tau=1e-3, policy=LambdaPolicy.lagrange_strict(), seed=seed)
    G, L = dense_symbol_matrix(8, TWO_PI, 1.0, 0.3, 1.0)
    h2 = s0.phi.grid.cell_volume
    s1, rep = be_step(s0, sp)
    phi_ref, eta = lagrange_be(s0.phi.values.ravel(), 1e-3, G, L, 1.0, h2)
    assert eta is not None
    np.testing.assert_allclose(s1.phi.values.ravel(), phi_ref, rtol=1e-9, atol=1e-11)
    assert rep.eta_equiv == pytest.approx(eta, rel=1e-8)
    EN1 = nonlinear_energy(s1.phi, sp.pparams)
    assert rep.eta_equiv == pytest.approx(s1.r / math.sqrt(nonlinear_energy(s0.phi, sp.pparams) + 1.0), rel=1e-14)
    assert rep.energy.nonlinear == pytest.approx(EN1, rel=1e-12)


# --- invariants along short trajectories -----------------------------------------


@pytest.mark.parametrize("scheme", [BE, CN])
@pytest.mark.parametrize("policy", ["min", "0.5", "1"])
def test_modified_energy_dissipates_and_mass_is_conserved(scheme, policy):
    sp, s0 = setup(n=16, eps=0.2, tau=5e-3, policy=LambdaPolicy.parse(policy), scheme=scheme, amp=1.0)
    m0 = integrate(s0.phi)
    trail = [s0]
    reports = []

    def rec(s, r):
        trail.append(s)
        reports.append(r)

    run(s0, sp, 40, recorder=rec)
    for prev, new, rep in zip(trail[:-1], trail[1:], reports):
        scale = max(1.0, abs(rep.energy_prev.modified))
        assert rep.energy.modified <= rep.energy_prev.modified + 1e-9 * scale
        assert rep.mu_dissipation >= 0
        assert abs(rep.mass - m0) <= 1e-12 * max(1.0, abs(m0))
        if scheme == CN:
            # Crank-Nicolson dissipates exactly tau (mu, G mu)
            assert abs(rep.dissipation_residual) <= 1e-9 * scale
        else:
            # backward Euler adds the numerical terms of the increments
            d = new.phi - prev.phi
            extra = 0.5 * inner_product(d, apply_L(sp.ops, d)) + rep.lambda_used * (new.r - prev.r) ** 2
            assert rep.dissipation_residual == pytest.approx(-extra, rel=1e-6, abs=1e-10 * scale)


def test_report_energies_match_recomputation():
    sp, s0 = setup(n=16, tau=1e-2, policy=LambdaPolicy.fixed(0.3))
    s1, rep = be_step(s0, sp)
    e = energy_split(s1.phi, s1.r, 0.3, sp.ops, sp.pparams)
    assert rep.energy.quadratic == pytest.approx(e.quadratic, rel=1e-12)
    assert rep.energy.nonlinear == pytest.approx(e.nonlinear, rel=1e-12)
    assert rep.energy.modified == pytest.approx(e.modified, rel=1e-12)
    assert rep.mass == pytest.approx(integrate(s1.phi), abs=1e-13)


def test_lagrange_strict_failure_carries_step_index():
    from wsav.harness import build_problem, preset

    # the cross interface with gamma = 0 and tau = 1e-3 soon has no lambda = 0 root
    prob = build_problem(preset("cross", lambda_policy="0"))
    with pytest.raises(StepFailure) as info:
        run(prob.state0, prob.params, 1000)
    rec = info.value.record()
    assert rec["step"] >= 1 and rec["lambda"] == 0.0
    assert rec["status"] == "unsolvable" and {"A", "B", "r_prev", "sqrtEC"} <= rec.keys()


def test_adaptive_min_uses_zero_when_possible():
    sp, s0 = setup(n=16, tau=1e-4)
    reports = []
    run(s0, sp, 5, recorder=lambda s, r: reports.append(r))
    assert all(r.lambda_used == 0.0 for r in reports)
