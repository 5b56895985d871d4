"""Experiment presets, trajectory recording, error studies and file formats."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import struct
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, OutputError, StepFailure
from .grid import Grid, RealField, make_operators
from .initial_conditions import SignedDistanceSpec, tanh_profile
from .potential import PotentialParams, energy_split
from .scalar import BE, CN, RootOptions
from .steppers import LambdaPolicy, SavState, StepParams, StepReport, init_state, step

# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str
    ic: SignedDistanceSpec
    n: tuple[int, ...]
    domain: tuple[float, float]
    nu: float = 1.0
    eps: float = 0.1
    gamma: float = 0.0
    delta: float = 5.0
    C: float = 1.0
    tau: float = 1e-3
    n_steps: Optional[int] = None
    t_end: Optional[float] = None
    scheme: str = BE
    lambda_policy: str = "min"
    out: Optional[str] = None
    snapshot_every: int = 0
    tol_lambda: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))
        object.__setattr__(self, "scheme", str(self.scheme).upper())
        if self.scheme not in (BE, CN):
            raise ConfigurationError(f"scheme must be BE or CN, got {self.scheme!r}")
        if len(self.n) != self.ic.dim:
            raise ConfigurationError(f"preset {self.preset!r} needs a {self.ic.dim}D grid")
        if not self.tau > 0:
            raise ConfigurationError(f"tau must be positive, got {self.tau}")
        if self.n_steps is not None and self.n_steps < 0:
            raise ConfigurationError("steps must be non-negative")
        if self.t_end is not None and self.t_end < 0:
            raise ConfigurationError("t_end must be non-negative")
        if self.snapshot_every < 0:
            raise ConfigurationError("snapshot_every must be non-negative")
        if not 0 <= self.nu <= 1:
            raise ConfigurationError(f"nu must lie in [0, 1], got {self.nu}")
        if not 0 <= self.gamma <= 4:
            raise ConfigurationError(f"gamma must lie in [0, 4], got {self.gamma}")
        if not self.eps > 0:
            raise ConfigurationError(f"eps must be positive, got {self.eps}")
        if not self.tol_lambda > 0:
            raise ConfigurationError("tol_lambda must be positive")
        LambdaPolicy.parse(self.lambda_policy)
        self.steps()

    def steps(self) -> int:
        """Number of steps; ``t_end`` must be a whole multiple of ``tau``."""
        if self.t_end is None:
            return 1000 if self.n_steps is None else self.n_steps
        k = round(self.t_end / self.tau)
        if abs(k * self.tau - self.t_end) > 1e-9 * max(1.0, self.t_end):
            raise ConfigurationError(f"t_end = {self.t_end} is not a multiple of tau = {self.tau}")
        if self.n_steps is not None and self.n_steps != k:
            raise ConfigurationError(f"steps = {self.n_steps} disagrees with t_end / tau = {k}")
        return k

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["ic"] = dataclasses.asdict(self.ic)
        d["n"] = list(self.n)
        d["domain"] = list(self.domain)
        d["steps"] = self.steps()
        return d


_CURVE_DOMAIN = (-2.0, 2.0)


def _preset_table(full_scale: bool) -> dict[str, ExperimentConfig]:
    n2 = 256 if full_scale else 64
    return {
        "sine": ExperimentConfig(
            "sine", SignedDistanceSpec.sinusoidal(0.05), (128 if full_scale else 64,) * 2,
            (0.0, 2 * math.pi), nu=1.0, eps=0.1, gamma=4.0, tau=1e-3, t_end=0.5,
            scheme=BE, lambda_policy="0.5",
        ),
        "cross": ExperimentConfig(
            "cross", SignedDistanceSpec.cross(), (n2, n2), _CURVE_DOMAIN,
            eps=0.01, gamma=0.0, tau=1e-3, n_steps=1000, scheme=BE,
        ),
        "curve2": ExperimentConfig(
            "curve2", SignedDistanceSpec.curve("II"), (n2, n2), _CURVE_DOMAIN,
            eps=0.01, gamma=2.0, tau=1e-3, n_steps=1000, scheme=CN,
        ),
        "curve3": ExperimentConfig(
            "curve3", SignedDistanceSpec.curve("III"), (n2, n2), _CURVE_DOMAIN,
            eps=0.01, gamma=1.0, tau=1e-4, n_steps=1000, scheme=CN,
        ),
        "curve4": ExperimentConfig(
            "curve4", SignedDistanceSpec.curve("IV"), (n2, n2), _CURVE_DOMAIN,
            eps=0.01, gamma=4.0, tau=1e-3, n_steps=1000, scheme=CN,
        ),
        "torus": ExperimentConfig(
            "torus", SignedDistanceSpec.torus(0.6, 0.3), (128 if full_scale else 32,) * 3,
            (-1.0, 1.0), eps=0.02, gamma=4.0, tau=1e-4, n_steps=1000, scheme=CN,
        ),
    }


PRESET_NAMES = tuple(_preset_table(False))

PRESET_SUMMARIES = {
    "sine": "0.05 sin(x) cos(y) on [0,2pi)^2, Cahn-Hilliard, eps=0.1, gamma=4, T=0.5",
    "cross": "cross-shaped region (curve I), eps=0.01, gamma=0, tau=1e-3, BE",
    "curve2": "curve II, eps=0.01, gamma=2, tau=1e-3, CN",
    "curve3": "curve III (astroid), eps=0.01, gamma=1, tau=1e-4, CN",
    "curve4": "curve IV, eps=0.01, gamma=4, tau=1e-3, CN",
    "torus": "torus R=0.6, r=0.3 in [-1,1)^3, eps=0.02, gamma=4, tau=1e-4, CN",
}


def preset(name: str, full_scale: bool = False, **overrides) -> ExperimentConfig:
    """A named setup; desk-scale grids unless ``full_scale``."""
    table = _preset_table(full_scale)
    if name not in table:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    cfg = table[name]
    if "n_steps" in overrides or "t_end" in overrides:
        cfg = cfg.replace(n_steps=None, t_end=None)
    return cfg.replace(**overrides) if overrides else cfg


def parse_grid(text: str, dim: int) -> tuple[int, ...]:
    parts = [p for p in str(text).lower().replace("*", "x").split("x") if p]
    try:
        sizes = tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigurationError(f"cannot parse grid {text!r}") from None
    if len(sizes) == 1:
        sizes = sizes * dim
    if len(sizes) != dim:
        raise ConfigurationError(f"grid {text!r} does not have {dim} axes")
    return sizes


def parse_domain(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in str(text).split(","))
    except ValueError:
        raise ConfigurationError(f"domain must be 'lo,hi', got {text!r}") from None
    return lo, hi


def read_config_file(path: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise OutputError(f"cannot read config {path}: {exc.strerror}") from exc
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{no}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_").lower()] = value
    return out


_FLOAT_KEYS = {"nu", "eps", "gamma", "delta", "c", "tau", "tol_lambda"}


def config_from_mapping(values: dict, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Build a config from string-or-typed settings keyed like the CLI flags."""
    values = {k.replace("-", "_").lower(): v for k, v in values.items() if v is not None}
    full_scale = _truthy(values.pop("full_scale", False))
    if "preset" in values:
        base = preset(str(values.pop("preset")), full_scale)
    elif base is None:
        base = preset("sine", full_scale)
    kw = {}
    for key, raw in values.items():
        if key in _FLOAT_KEYS:
            kw["C" if key == "c" else key] = float(raw)
        elif key == "steps":
            kw["n_steps"] = int(raw)
        elif key == "t_end":
            kw["t_end"] = float(raw)
        elif key == "scheme":
            kw["scheme"] = str(raw).upper()
        elif key == "lambda":
            kw["lambda_policy"] = str(raw)
        elif key == "grid":
            kw["n"] = parse_grid(raw, base.ic.dim) if isinstance(raw, str) else tuple(raw)
        elif key == "domain":
            kw["domain"] = parse_domain(raw) if isinstance(raw, str) else tuple(raw)
        elif key == "out":
            kw["out"] = str(raw)
        elif key == "snapshot_every":
            kw["snapshot_every"] = int(raw)
        else:
            raise ConfigurationError(f"unknown setting {key!r}")
    if "n_steps" in kw and "t_end" not in kw:
        kw["t_end"] = None
    elif "t_end" in kw and "n_steps" not in kw:
        kw["n_steps"] = None
    return base.replace(**kw)


def _truthy(v) -> bool:
    if isinstance(v, str):
        return v.strip().lower() in ("1", "true", "yes", "on")
    return bool(v)


@dataclass(frozen=True, eq=False)
class Problem:
    grid: Grid
    params: StepParams
    state0: SavState


def build_problem(cfg: ExperimentConfig, root_opts: RootOptions = RootOptions()) -> Problem:
    lo, hi = cfg.domain
    grid = Grid(cfg.n, (lo,) * len(cfg.n), (hi,) * len(cfg.n))
    ops = make_operators(grid, cfg.nu, cfg.eps, cfg.gamma)
    pp = PotentialParams(cfg.gamma, cfg.delta, cfg.C)
    phi0 = tanh_profile(grid, cfg.ic, cfg.eps)
    sp = StepParams(
        cfg.tau, ops, pp, LambdaPolicy.parse(cfg.lambda_policy), root_opts, cfg.tol_lambda, cfg.scheme
    )
    return Problem(grid, sp, init_state(phi0, pp, ops))


# ---------------------------------------------------------------------------
# time series

COLUMNS = ("t", "lambda", "r", "E", "E_mod", "E_norm", "mass", "mass_dev", "newton_iters", "dissipation")


def mass_deviation(mass: float, mass0: float, volume: float) -> float:
    """``|M - M0| / max(|M0|, |Omega|)``.

    The floor ``|Omega|`` (the mass of a unit field) keeps the measure
    meaningful for zero-mean data such as the sinusoidal preset.
    """
    return abs(mass - mass0) / max(abs(mass0), volume)


@dataclass
class TimeSeriesRecord:
    """Per-step diagnostics; row 0 is the initial state (its lambda is NaN)."""

    volume: float = 1.0
    t: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    r: list = field(default_factory=list)
    E: list = field(default_factory=list)
    E_mod: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    newton_iters: list = field(default_factory=list)
    dissipation: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    def add(self, t, lam, r, E, E_mod, mass, newton_iters=0, dissipation=0.0):
        if self.t and not t > self.t[-1]:
            raise ValueError("time series rows must have increasing t")
        self.t.append(float(t))
        self.lam.append(float(lam))
        self.r.append(float(r))
        self.E.append(float(E))
        self.E_mod.append(float(E_mod))
        self.mass.append(float(mass))
        self.newton_iters.append(int(newton_iters))
        self.dissipation.append(float(dissipation))

    def add_initial(self, state: SavState, quadratic: float, nonlinear: float):
        E = quadratic + nonlinear
        m = state.phi.grid.cell_volume * float(np.sum(state.phi.values))
        # consistent initialization makes the modified energy equal to E
        self.add(state.t, math.nan, state.r, E, E, m)

    def add_report(self, report: StepReport):
        e = report.energy
        self.add(report.t, report.lambda_used, report.r_new, e.total, e.modified, report.mass,
                 report.newton_iters, report.mu_dissipation)

    @property
    def E_norm(self) -> list:
        if not self.E:
            return []
        e0 = self.E[0]
        return [e / e0 for e in self.E]

    @property
    def mass_dev(self) -> list:
        if not self.mass:
            return []
        m0 = self.mass[0]
        return [mass_deviation(m, m0, self.volume) for m in self.mass]

    def rows(self):
        cols = (self.t, self.lam, self.r, self.E, self.E_mod, self.E_norm, self.mass,
                self.mass_dev, self.newton_iters, self.dissipation)
        return zip(*cols)

    def column(self, name: str) -> np.ndarray:
        key = {"lambda": "lam"}.get(name, name)
        return np.asarray(getattr(self, key), dtype=np.float64)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def timeseries_text(record: TimeSeriesRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in record.rows():
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_timeseries(record: TimeSeriesRecord, path: str) -> None:
    _write_bytes(path, timeseries_text(record).encode("ascii"))


def read_timeseries(path: str, volume: float = 1.0) -> TimeSeriesRecord:
    try:
        with open(path, newline="", encoding="ascii") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror}") from exc
    if not rows or tuple(rows[0]) != COLUMNS:
        raise OutputError(f"{path}: unexpected header")
    rec = TimeSeriesRecord(volume)
    for row in rows[1:]:
        d = dict(zip(COLUMNS, row))
        rec.add(float(d["t"]), float(d["lambda"]), float(d["r"]), float(d["E"]), float(d["E_mod"]),
                float(d["mass"]), int(d["newton_iters"]), float(d["dissipation"]))
    return rec


def ensure_dir(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {path}: {exc.strerror}") from exc


def _write_bytes(path: str, data: bytes) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from exc


# ---------------------------------------------------------------------------
# binary snapshots

SNAPSHOT_MAGIC = b"WSAV"
SNAPSHOT_VERSION = 1
# magic, version, dim, three sizes, lo/hi for three axes; padded to 64 bytes
_HEADER = struct.Struct("<4sHH3H6d")
HEADER_BYTES = 64
SIDECAR_MAX_POINTS = 1 << 16


def write_snapshot(f: RealField, path: str, sidecar: bool = False) -> None:
    """Little-endian float64 values in C order behind a 64-byte header."""
    g = f.grid
    sizes = list(g.n) + [0] * (3 - g.dim)
    ext = []
    for i in range(3):
        ext += [g.lo[i], g.hi[i]] if i < g.dim else [0.0, 0.0]
    head = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, g.dim, *sizes, *ext)
    head += b"\0" * (HEADER_BYTES - len(head))
    body = np.ascontiguousarray(f.values, dtype="<f8").tobytes()
    _write_bytes(path, head + body)
    if sidecar:
        if g.size > SIDECAR_MAX_POINTS:
            raise ConfigurationError(f"sidecar CSV is limited to {SIDECAR_MAX_POINTS} points")
        names = ["x", "y", "z"][: g.dim] + ["phi"]
        cols = [c.ravel() for c in g.coords()] + [f.values.ravel()]
        lines = [",".join(names)]
        lines += [",".join("%.17g" % v for v in row) for row in zip(*cols)]
        _write_bytes(os.path.splitext(path)[0] + ".csv", ("\n".join(lines) + "\n").encode("ascii"))


def read_snapshot(path: str) -> RealField:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror}") from exc
    if len(data) < HEADER_BYTES or data[:4] != SNAPSHOT_MAGIC:
        raise OutputError(f"{path}: not a WSAV snapshot")
    magic, version, dim, *rest = _HEADER.unpack(data[: _HEADER.size])
    if version != SNAPSHOT_VERSION or dim not in (2, 3):
        raise OutputError(f"{path}: unsupported snapshot version {version} / dim {dim}")
    sizes = tuple(rest[:dim])
    ext = rest[3:]
    grid = Grid(sizes, tuple(ext[0 : 2 * dim : 2]), tuple(ext[1 : 2 * dim : 2]))
    values = np.frombuffer(data, dtype="<f8", offset=HEADER_BYTES)
    if values.size != grid.size:
        raise OutputError(f"{path}: payload has {values.size} values, header says {grid.size}")
    return RealField(grid, values.astype(np.float64).reshape(sizes))


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class RunResult:
    config: ExperimentConfig
    state: SavState
    series: TimeSeriesRecord
    failure: Optional[dict] = None
    elapsed: float = 0.0
    reports: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failure is None


def run_experiment(
    cfg: ExperimentConfig,
    *,
    keep_reports: bool = False,
    on_step: Optional[Callable[[SavState, StepReport], None]] = None,
    root_opts: RootOptions = RootOptions(),
) -> RunResult:
    """Run one trajectory, record diagnostics and write outputs if ``cfg.out``."""
    prob = build_problem(cfg, root_opts)
    sp = prob.params
    state = prob.state0
    series = TimeSeriesRecord(prob.grid.volume)
    e0 = energy_split(state.phi, state.r, 0.0, sp.ops, sp.pparams)
    series.add_initial(state, e0.quadratic, e0.nonlinear)
    result = RunResult(cfg, state, series)
    if cfg.out:
        ensure_dir(cfg.out)
    _maybe_snapshot(cfg, state, force=True)

    t0 = time.perf_counter()
    n = cfg.steps()
    try:
        for _ in range(n):
            try:
                state, report = step(state, sp)
            except StepFailure as exc:
                if exc.step is None:
                    exc.step, exc.t = state.step + 1, state.t + sp.tau
                raise
            series.add_report(report)
            if keep_reports:
                result.reports.append(report)
            if on_step is not None:
                on_step(state, report)
            _maybe_snapshot(cfg, state, force=state.step == n)
    except StepFailure as exc:
        result.failure = exc.record()
    result.state = state
    result.elapsed = time.perf_counter() - t0
    if cfg.out:
        write_timeseries(series, os.path.join(cfg.out, "timeseries.csv"))
        _write_json(os.path.join(cfg.out, "metadata.json"), run_metadata(result))
        if result.failure is not None:
            _write_json(os.path.join(cfg.out, "failure.json"), result.failure)
    return result


def _maybe_snapshot(cfg: ExperimentConfig, state: SavState, force: bool = False) -> None:
    if not cfg.out or cfg.snapshot_every <= 0:
        return
    if force or state.step % cfg.snapshot_every == 0:
        write_snapshot(state.phi, os.path.join(cfg.out, f"snapshot_{state.step:07d}.wsav"))


def run_metadata(result: RunResult, **extra) -> dict:
    from . import __version__

    meta = {
        "package_version": __version__,
        "config": result.config.to_dict(),
        "steps_completed": result.state.step,
        "t_final": result.state.t,
        "elapsed_seconds": result.elapsed,
        "mass_deviation": "|M(t) - M(0)| / max(|M(0)|, |Omega|)",
        "energy_normalization": "E(t) / E(0)",
        "status": "ok" if result.ok else "failed",
    }
    meta.update(extra)
    return meta


def _write_json(path: str, obj) -> None:
    _write_bytes(path, (json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n").encode("ascii"))


# ---------------------------------------------------------------------------
# studies


def log2_rates(errors: Sequence[Optional[float]]) -> list[Optional[float]]:
    """``log2(e[i-1] / e[i])``; None where either error is missing or zero."""
    out: list[Optional[float]] = [None]
    for a, b in zip(errors[:-1], errors[1:]):
        if a is None or b is None or not (a > 0 and b > 0):
            out.append(None)
        else:
            out.append(math.log2(a / b))
    return out


@dataclass
class ConvergenceRow:
    tau: float
    e2: Optional[float]
    rate2: Optional[float]
    e_inf: Optional[float]
    rate_inf: Optional[float]
    failure: Optional[str] = None


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow]
    elapsed: float = 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("tau", "e2", "rate2", "e_inf", "rate_inf", "failure"))
        for r in self.rows:
            w.writerow([_opt(r.tau), _opt(r.e2), _opt(r.rate2), _opt(r.e_inf), _opt(r.rate_inf), r.failure or ""])
        return buf.getvalue()


def _opt(v) -> str:
    return "" if v is None else "%.17g" % v


def halving(start: float, levels: int) -> list[float]:
    return [start * 0.5**k for k in range(levels)]


def convergence_study(
    base: ExperimentConfig,
    tau_list: Sequence[float],
    T_end: float,
    *,
    root_opts: RootOptions = RootOptions(),
    run: Optional[Callable[[ExperimentConfig], RunResult]] = None,
) -> ConvergenceTable:
    """Self-convergence ``e(tau) = ||phi_tau(T) - phi_{tau/2}(T)||`` in l2 and l-inf."""
    taus = [float(t) for t in tau_list]
    if not taus:
        raise ConfigurationError("empty tau list")
    for a, b in zip(taus[:-1], taus[1:]):
        if not math.isclose(b, 0.5 * a, rel_tol=1e-12):
            raise ConfigurationError("tau list must halve at every entry")
    run = run or (lambda c: run_experiment(c, root_opts=root_opts))
    t0 = time.perf_counter()
    finals: list[RunResult] = []
    for tau in taus + [0.5 * taus[-1]]:
        cfg = base.replace(tau=tau, t_end=T_end, n_steps=None, out=None, snapshot_every=0)
        finals.append(run(cfg))
    e2: list[Optional[float]] = []
    einf: list[Optional[float]] = []
    fails: list[Optional[str]] = []
    for a, b in zip(finals[:-1], finals[1:]):
        if not (a.ok and b.ok):
            bad = a if not a.ok else b
            e2.append(None)
            einf.append(None)
            fails.append(f"tau={bad.config.tau:g}: {bad.failure['message']} at step {bad.failure['step']}")
            continue
        diff = a.state.phi.values - b.state.phi.values
        cv = a.state.phi.grid.cell_volume
        e2.append(math.sqrt(cv * float(np.vdot(diff, diff))))
        einf.append(float(np.max(np.abs(diff))))
        fails.append(None)
    r2, rinf = log2_rates(e2), log2_rates(einf)
    rows = [ConvergenceRow(t, e2[i], r2[i], einf[i], rinf[i], fails[i]) for i, t in enumerate(taus)]
    return ConvergenceTable(rows, time.perf_counter() - t0)


def trapezoid_l2(t: np.ndarray, values: np.ndarray) -> float:
    """``sqrt(int values^2 dt)`` by the trapezoid rule over the samples."""
    t = np.asarray(t, dtype=np.float64)
    v2 = np.asarray(values, dtype=np.float64) ** 2
    if t.size < 2:
        return 0.0
    return math.sqrt(float(np.sum(0.5 * (v2[1:] + v2[:-1]) * np.diff(t))))


@dataclass
class LambdaStudyRow:
    lam: float
    errors: dict  # T -> error or None
    rates: dict  # T -> rate or None
    failure: Optional[str] = None


@dataclass
class LambdaStudyTable:
    T_list: list[float]
    rows: list[LambdaStudyRow]
    elapsed: float = 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["lambda"]
        for T in self.T_list:
            head += [f"error_T{T:g}", f"rate_T{T:g}"]
        w.writerow(head + ["failure"])
        for r in self.rows:
            line = [_opt(r.lam)]
            for T in self.T_list:
                line += [_opt(r.errors.get(T)), _opt(r.rates.get(T))]
            w.writerow(line + [r.failure or ""])
        return buf.getvalue()


def lambda_energy_study(
    base: ExperimentConfig,
    lambda_list: Sequence[float],
    T_list: Sequence[float],
    *,
    root_opts: RootOptions = RootOptions(),
) -> LambdaStudyTable:
    """``||E_mod[lam] - E_mod[lam/2]||`` over ``[0, T]`` for each halving pair.

    Every ``lam`` in the list is run with a fixed weight up to ``max(T_list)``;
    the row for ``lam`` compares it with the run at ``lam / 2``, which is
    therefore also executed for the last entry.
    """
    lams = [float(v) for v in lambda_list]
    if not lams:
        raise ConfigurationError("empty lambda list")
    for a, b in zip(lams[:-1], lams[1:]):
        if not math.isclose(b, 0.5 * a, rel_tol=1e-12):
            raise ConfigurationError("lambda list must halve at every entry")
    Ts = sorted(float(T) for T in T_list)
    t0 = time.perf_counter()
    runs = []
    for lam in lams + [0.5 * lams[-1]]:
        cfg = base.replace(lambda_policy=repr(lam), t_end=Ts[-1], n_steps=None, out=None, snapshot_every=0)
        runs.append(run_experiment(cfg, root_opts=root_opts))
    per_T: dict[float, list[Optional[float]]] = {T: [] for T in Ts}
    fails = []
    for a, b in zip(runs[:-1], runs[1:]):
        if not (a.ok and b.ok):
            bad = a if not a.ok else b
            fails.append(f"lambda={float(bad.config.lambda_policy):g}: {bad.failure['message']}")
            for T in Ts:
                per_T[T].append(None)
            continue
        fails.append(None)
        t = a.series.column("t")
        diff = a.series.column("E_mod") - b.series.column("E_mod")
        for T in Ts:
            k = int(np.searchsorted(t, T * (1 + 1e-12), side="right"))
            per_T[T].append(trapezoid_l2(t[:k], diff[:k]))
    rates = {T: log2_rates(per_T[T]) for T in Ts}
    rows = [
        LambdaStudyRow(lam, {T: per_T[T][i] for T in Ts}, {T: rates[T][i] for T in Ts}, fails[i])
        for i, lam in enumerate(lams)
    ]
    return LambdaStudyTable(Ts, rows, time.perf_counter() - t0)


def reference_error_series(
    cfg: ExperimentConfig, ref_tau: float = 1e-5, *, root_opts: RootOptions = RootOptions()
) -> dict:
    """l2 error of ``cfg``'s trajectory against a Lagrange-multiplier run at ``ref_tau``.

    Errors are compared at every time of the coarse run that is also a
    reference step.  Returns times, errors and the reference setup used.
    """
    ratio = cfg.tau / ref_tau
    k = round(ratio)
    if k < 1 or abs(k - ratio) > 1e-9 * ratio:
        raise ConfigurationError("tau must be a whole multiple of the reference step")
    coarse: list[np.ndarray] = []
    fine: list[np.ndarray] = []
    res = run_experiment(cfg, root_opts=root_opts, on_step=lambda s, r: coarse.append(s.phi.values))
    ref_cfg = cfg.replace(tau=ref_tau, lambda_policy="0", n_steps=len(coarse) * k, t_end=None,
                          out=None, snapshot_every=0)

    def keep(s, r):
        if s.step % k == 0:
            fine.append(s.phi.values)

    ref = run_experiment(ref_cfg, root_opts=root_opts, on_step=keep)
    m = min(len(coarse), len(fine))
    cv = res.state.phi.grid.cell_volume
    errs = [math.sqrt(cv * float(np.sum((coarse[i] - fine[i]) ** 2))) for i in range(m)]
    return {
        "t": [cfg.tau * (i + 1) for i in range(m)],
        "error_l2": errs,
        "reference": {"scheme": cfg.scheme, "lambda": 0.0, "tau": ref_tau},
        "failure": res.failure or ref.failure,
    }
