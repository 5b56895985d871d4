import json
import math
import os

import numpy as np
import pytest

from wsav.errors import ConfigurationError, OutputError
from wsav.grid import Grid, RealField
from wsav.initial_conditions import SignedDistanceSpec
from wsav.harness import (
    COLUMNS,
    HEADER_BYTES,
    PRESET_NAMES,
    ConvergenceRow,
    ConvergenceTable,
    TimeSeriesRecord,
    build_problem,
    config_from_mapping,
    convergence_study,
    halving,
    lambda_energy_study,
    log2_rates,
    mass_deviation,
    parse_domain,
    parse_grid,
    preset,
    read_config_file,
    read_snapshot,
    read_timeseries,
    reference_error_series,
    run_experiment,
    timeseries_text,
    trapezoid_l2,
    write_snapshot,
    write_timeseries,
)


def tiny(name="sine", **kw):
    """A preset shrunk to a 16^2 (or 8^3) grid for quick runs."""
    cfg = preset(name)
    n = (8,) * 3 if cfg.ic.dim == 3 else (16, 16)
    kw.setdefault("n", n)
    return cfg.replace(**kw)


# --- configuration --------------------------------------------------------------


def test_presets_build():
    for name in PRESET_NAMES:
        cfg = preset(name)
        prob = build_problem(tiny(name))
        assert prob.grid.dim == cfg.ic.dim
        assert cfg.steps() >= 500


def test_preset_values():
    sine = preset("sine")
    assert (sine.eps, sine.gamma, sine.nu, sine.t_end, sine.scheme) == (0.1, 4.0, 1.0, 0.5, "BE")
    assert preset("sine", full_scale=True).n == (128, 128)
    assert preset("cross").gamma == 0.0 and preset("cross").tau == 1e-3
    assert preset("curve3").tau == 1e-4 and preset("curve3").scheme == "CN"
    torus = preset("torus")
    assert torus.ic.R == 0.6 and torus.ic.r_minor == 0.3 and len(torus.n) == 3
    assert preset("torus", full_scale=True).n == (128, 128, 128)


def test_preset_overrides_and_errors():
    cfg = preset("sine", tau=1e-4, n_steps=7)
    assert cfg.steps() == 7 and cfg.t_end is None
    with pytest.raises(ConfigurationError):
        preset("nope")
    with pytest.raises(ConfigurationError):
        preset("sine", tau=3e-4)  # 0.5 is not a multiple
    with pytest.raises(ConfigurationError):
        preset("sine", gamma=5.0)
    with pytest.raises(ConfigurationError):
        preset("sine", n=(16, 16, 16))
    with pytest.raises(ConfigurationError):
        preset("sine", lambda_policy="maybe")


def test_steps_and_t_end_consistency():
    cfg = preset("cross")
    assert cfg.replace(n_steps=None, t_end=None).steps() == 1000
    assert cfg.replace(n_steps=None, t_end=0.25).steps() == 250
    assert cfg.replace(n_steps=250, t_end=0.25).steps() == 250
    with pytest.raises(ConfigurationError):
        cfg.replace(n_steps=3, t_end=0.25)


def test_parse_helpers():
    assert parse_grid("32", 2) == (32, 32)
    assert parse_grid("16x32", 2) == (16, 32)
    assert parse_grid("8", 3) == (8, 8, 8)
    assert parse_domain("-1,1") == (-1.0, 1.0)
    for bad in ("abc", "8x8x8"):
        with pytest.raises(ConfigurationError):
            parse_grid(bad, 2)
    with pytest.raises(ConfigurationError):
        parse_domain("1")


def test_config_file_and_mapping(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\npreset = cross\ngrid = 32\ntau = 2e-3  # trailing\nsteps = 10\nlambda = min\n")
    values = read_config_file(str(path))
    cfg = config_from_mapping(values)
    assert cfg.preset == "cross" and cfg.n == (32, 32) and cfg.tau == 2e-3 and cfg.steps() == 10
    cfg2 = config_from_mapping({"t_end": "0.02"}, base=cfg)
    assert cfg2.steps() == 10 and cfg2.n_steps is None
    with pytest.raises(ConfigurationError):
        config_from_mapping({"colour": "blue"})
    (tmp_path / "bad.cfg").write_text("just words\n")
    with pytest.raises(ConfigurationError):
        read_config_file(str(tmp_path / "bad.cfg"))
    with pytest.raises(OutputError):
        read_config_file(str(tmp_path / "missing.cfg"))


def test_to_dict_is_json_serialisable():
    d = preset("torus").to_dict()
    assert json.loads(json.dumps(d))["ic"]["kind"] == "Torus"
    assert d["steps"] == 1000


# --- time series ------------------------------------------------------------------


def test_empty_record_is_header_only():
    assert timeseries_text(TimeSeriesRecord()) == ",".join(COLUMNS) + "\n"


def test_timeseries_round_trip(tmp_path):
    rec = TimeSeriesRecord(volume=4.0)
    rec.add(0.0, math.nan, 1.25, 3.0, 3.0, 0.1)
    rec.add(0.1, 0.3, 1.0 / 3.0, 2.9, 2.95, 0.1 + 1e-17, 4, 0.123456789012345678)
    path = tmp_path / "ts.csv"
    write_timeseries(rec, str(path))
    back = read_timeseries(str(path), volume=4.0)
    for name in COLUMNS:
        np.testing.assert_array_equal(back.column(name), rec.column(name) if name not in ("E_norm", "mass_dev") else np.asarray(getattr(rec, name)))
    assert back.r[1] == 1.0 / 3.0
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(COLUMNS) and len(lines) == 3


def test_normalised_energy_and_mass_deviation():
    rec = TimeSeriesRecord(volume=2.0)
    rec.add(0.0, math.nan, 1.0, 4.0, 4.0, 0.0)
    rec.add(0.1, 0.0, 1.0, 3.0, 3.0, 1e-14)
    assert rec.E_norm == [1.0, 0.75]
    assert rec.mass_dev == [0.0, 1e-14 / 2.0]
    assert mass_deviation(10.5, 10.0, 1.0) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        rec.add(0.1, 0.0, 1.0, 3.0, 3.0, 0.0)


def test_write_errors_mention_path(tmp_path):
    target = tmp_path / "no" / "such" / "dir" / "ts.csv"
    with pytest.raises(OutputError, match="ts.csv"):
        write_timeseries(TimeSeriesRecord(), str(target))


# --- snapshots -----------------------------------------------------------------------


def test_snapshot_round_trip_bitwise(tmp_path, rng):
    g = Grid((4, 4), (0.0, -1.0), (1.0, 2.0))
    f = RealField(g, rng.normal(size=(4, 4)))
    path = tmp_path / "s.wsav"
    write_snapshot(f, str(path), sidecar=True)
    raw = path.read_bytes()
    assert len(raw) == HEADER_BYTES + 16 * 8 and raw[:4] == b"WSAV"
    back = read_snapshot(str(path))
    assert back.grid == g
    assert back.values.tobytes() == f.values.tobytes()
    side = (tmp_path / "s.csv").read_text().splitlines()
    assert side[0] == "x,y,phi" and len(side) == 17


def test_snapshot_3d_and_corruption(tmp_path, rng):
    g = Grid.uniform(4, -1.0, 1.0, dim=3)
    f = RealField(g, rng.normal(size=g.shape))
    path = tmp_path / "t.wsav"
    write_snapshot(f, str(path))
    np.testing.assert_array_equal(read_snapshot(str(path)).values, f.values)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(OutputError):
        read_snapshot(str(path))
    (tmp_path / "junk").write_bytes(b"nope")
    with pytest.raises(OutputError):
        read_snapshot(str(tmp_path / "junk"))


# --- trajectories ------------------------------------------------------------------------


def test_run_experiment_outputs(tmp_path):
    out = tmp_path / "run"
    cfg = tiny("cross", n_steps=6, out=str(out), snapshot_every=3)
    res = run_experiment(cfg, keep_reports=True)
    assert res.ok and res.state.step == 6 and len(res.series) == 7 and len(res.reports) == 6
    assert sorted(os.listdir(out)) == [
        "metadata.json", "snapshot_0000000.wsav", "snapshot_0000003.wsav", "snapshot_0000006.wsav", "timeseries.csv"
    ]
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["status"] == "ok" and meta["steps_completed"] == 6
    ts = read_timeseries(str(out / "timeseries.csv"))
    assert math.isnan(ts.lam[0]) and ts.t[-1] == pytest.approx(6e-3)
    np.testing.assert_array_equal(read_snapshot(str(out / "snapshot_0000006.wsav")).values, res.state.phi.values)


def test_csv_is_byte_stable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        run_experiment(tiny("curve2", n_steps=4, out=str(d)))
    assert (a / "timeseries.csv").read_bytes() == (b / "timeseries.csv").read_bytes()


def test_failed_run_records_failure(tmp_path):
    out = tmp_path / "fail"
    res = run_experiment(preset("cross", lambda_policy="0", out=str(out)))
    assert not res.ok
    rec = json.loads((out / "failure.json").read_text())
    assert rec["status"] == "unsolvable" and rec["step"] == res.state.step + 1
    assert len(res.series) == res.state.step + 1


# --- studies -----------------------------------------------------------------------------------


def test_log2_rates():
    assert log2_rates([4.0, 2.0, 0.5]) == [None, 1.0, 2.0]
    assert log2_rates([1.0, None, 0.0, 1.0]) == [None, None, None, None]


def test_halving():
    assert halving(1.0, 4) == [1.0, 0.5, 0.25, 0.125]


def test_trapezoid_l2():
    t = np.linspace(0, 1, 1001)
    assert trapezoid_l2(t, np.ones_like(t)) == pytest.approx(1.0)
    assert trapezoid_l2(t, t) == pytest.approx(math.sqrt(1 / 3), rel=1e-6)
    assert trapezoid_l2(t[:1], t[:1]) == 0.0


def test_convergence_self_comparison_gives_zero_error():
    base = tiny("sine")
    res = run_experiment(base.replace(tau=1e-3, t_end=0.004, n_steps=None))
    table = convergence_study(base, [2e-3, 1e-3], 0.004, run=lambda c: res)
    assert all(r.e2 == 0.0 and r.rate2 is None for r in table.rows)
    assert table.to_csv().splitlines()[1].startswith("0.002,0,")


def test_convergence_study_small_first_order():
    base = tiny("sine", n=(16, 16))
    table = convergence_study(base, halving(4e-3, 3), 0.064)
    rates = [r.rate2 for r in table.rows[1:]]
    assert all(0.8 < r < 1.1 for r in rates), rates
    csv_rows = table.to_csv().splitlines()
    assert csv_rows[0] == "tau,e2,rate2,e_inf,rate_inf,failure" and len(csv_rows) == 4
    with pytest.raises(ConfigurationError):
        convergence_study(base, [1e-3, 4e-4], 0.004)


def test_convergence_rates_recompute_from_errors():
    t = ConvergenceTable([ConvergenceRow(1.0, 4.0, None, 2.0, None), ConvergenceRow(0.5, 1.0, 2.0, 1.0, 1.0)])
    for a, b in zip(t.rows[:-1], t.rows[1:]):
        assert b.rate2 == math.log2(a.e2 / b.e2)


def test_lambda_study_stationary_gives_zero():
    # the zero field is a critical point, so every weight gives the same trajectory
    cfg = tiny("sine", n=(8, 8), gamma=0.0)
    cfg = cfg.replace(ic=SignedDistanceSpec.sinusoidal(0.0))
    table = lambda_energy_study(cfg.replace(tau=1e-3), [1.0, 0.5], [0.005])
    for row in table.rows:
        assert row.errors[0.005] == pytest.approx(0.0, abs=1e-13)
    assert table.to_csv().splitlines()[0] == "lambda,error_T0.005,rate_T0.005,failure"


def test_lambda_study_records_failures():
    table = lambda_energy_study(preset("cross", n_steps=None), [1.0], [0.3])
    # the lambda = 1/2 partner run solves, so this pair must succeed; lambda = 0 is not requested
    assert table.rows[0].failure is None
    with pytest.raises(ConfigurationError):
        lambda_energy_study(preset("cross"), [1.0, 0.3], [0.1])


def test_reference_error_series_small():
    cfg = tiny("sine", n=(8, 8), tau=2e-4, t_end=None, n_steps=5)
    out = reference_error_series(cfg, ref_tau=1e-4)
    assert len(out["t"]) == len(out["error_l2"]) == 5
    assert out["failure"] is None and out["reference"]["lambda"] == 0.0
    # both trajectories start from the same data and stay close
    assert 0 < out["error_l2"][-1] < 1e-3
    with pytest.raises(ConfigurationError):
        reference_error_series(cfg, ref_tau=3e-5)
