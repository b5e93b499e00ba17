"""Monte-Carlo sweeps, convergence traces and the flat config format.

A config file is plain ``key = value`` lines with ``#`` comments.  Every key
has a default, so an empty file gives the reference regime: M=2, N=32, K=4,
P_i = P_r = 30 dBm, a sweep of P_s over 0..30 dBm, sigma2 = -80 dBm and the
reference geometry.
"""

from dataclasses import dataclass, field, fields, replace
import csv
import io
import math
import time

import numpy as np

from . import benchmarks, hp_sdr_fp, wf_gpi_grr
from .model import ElementPartition, Geometry, SystemConfig, draw_channels, feasibility_report
from .numerics import NotPositiveDefiniteError
from .sdp import SdpError

CSV_HEADER = ("sweep_param", "value", "seed", "method", "rate_bps_hz", "iterations", "wall_ms", "status")
CONVERGENCE_HEADER = ("iteration", "method", "rate_bps_hz")
METHODS = benchmarks.SCHEMES
SWEEP_KEYS = {"ps": "P_s_dbm", "pi": "P_i_dbm", "k": "K"}


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _point(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError("expected x,y,z")
    return tuple(parts)


def _csv_list(conv):
    def parse(text):
        items = [conv(t.strip()) for t in text.split(",") if t.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(items)

    return parse


def _fmt(value):
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    # system
    M: int = 2
    N: int = 32
    K: int = 4
    P_s_dbm: float = 30.0
    P_r_dbm: float = 30.0
    P_i_dbm: float = 30.0
    sigma2_dbm: float = -80.0
    # geometry
    source: tuple = (0.0, 0.0, 0.0)
    destination: tuple = (0.0, 100.0, 0.0)
    irs: tuple = (-10.0, 50.0, 20.0)
    relay: tuple = (10.0, 50.0, 10.0)
    alpha_si: float = 2.0
    alpha_ir: float = 2.0
    alpha_id: float = 2.0
    alpha_sr: float = 3.0
    alpha_rd: float = 3.0
    # sweep
    sweep: str = "ps"
    values: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    trials: int = 100
    seed: int = 0
    methods: tuple = METHODS
    # optimizers
    max_iter: int = 30
    tol: float = 1e-3
    n_samples: int = 200
    gpi_tol: float = 1e-6
    gpi_max_iter: int = 100
    convergence_iters: int = 20

    def __post_init__(self):
        if self.sweep not in SWEEP_KEYS:
            raise ValueError(f"sweep must be one of {sorted(SWEEP_KEYS)}")
        if not self.values:
            raise ValueError("values must be non-empty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"methods: unknown {bad}; choose from {list(METHODS)}")
        if self.sweep == "k":
            object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        # validate every point up front
        for v in self.values:
            self.system_at(v)
        self.geometry

    @property
    def swept_param(self):
        return {"ps": "P_s", "pi": "P_i", "k": "K"}[self.sweep]

    def system_at(self, value):
        kw = dict(M=self.M, N=self.N, K=self.K, P_s_dbm=self.P_s_dbm, P_r_dbm=self.P_r_dbm,
                  P_i_dbm=self.P_i_dbm, sigma2_dbm=self.sigma2_dbm)
        kw[SWEEP_KEYS[self.sweep]] = int(value) if self.sweep == "k" else float(value)
        return SystemConfig.from_dbm(**kw)

    @property
    def geometry(self):
        return Geometry(
            source=self.source, destination=self.destination, irs=self.irs, relay=self.relay,
            alpha_si=self.alpha_si, alpha_ir=self.alpha_ir, alpha_id=self.alpha_id,
            alpha_sr=self.alpha_sr, alpha_rd=self.alpha_rd,
        )

    @property
    def hp_config(self):
        return dict(max_iter=self.max_iter, tol=self.tol, n_samples=self.n_samples)

    def replace(self, **changes):
        return replace(self, **changes)


_PARSERS = {
    "M": int, "N": int, "K": int,
    "P_s_dbm": float, "P_r_dbm": float, "P_i_dbm": float, "sigma2_dbm": float,
    "source": _point, "destination": _point, "irs": _point, "relay": _point,
    "alpha_si": float, "alpha_ir": float, "alpha_id": float, "alpha_sr": float, "alpha_rd": float,
    "sweep": lambda s: s.strip().lower(),
    "values": _csv_list(float),
    "trials": int, "seed": int,
    "methods": _csv_list(str),
    "max_iter": int, "tol": float, "n_samples": int,
    "gpi_tol": float, "gpi_max_iter": int, "convergence_iters": int,
}
assert set(_PARSERS) == {f.name for f in fields(ExperimentConfig)}


def parse_config(text):
    """Parse ``key = value`` text into an :class:`ExperimentConfig`.

    Errors carry the offending line number; cross-field checks (such as
    K <= N) cite the line that set the later of the two keys.
    """
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {raw.strip()!r}", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        try:
            values[key] = _PARSERS[key](val)
        except ValueError as exc:
            raise ConfigError(f"cannot parse {key} = {val!r}: {exc}", lineno) from None
        lines[key] = lineno
    try:
        return ExperimentConfig(**values)
    except (ValueError, TypeError) as exc:
        msg = str(exc)
        if msg.startswith("K must be <="):
            key_line = max(lines.get("K", 0), lines.get("N", 0)) or None
            raise ConfigError(f"{msg} (K <= N is required)", key_line) from None
        blame = [k for k in lines if msg.startswith(k) or f" {k}" in msg]
        raise ConfigError(msg, lines[blame[0]] if blame else None) from None


def serialize_config(cfg):
    """Canonical text form: every key, in declaration order."""
    return "".join(f"{f.name} = {_fmt(getattr(cfg, f.name))}\n" for f in fields(ExperimentConfig))


# ---------------------------------------------------------------------------
# running


@dataclass
class TrialResult:
    sweep_param: str
    value: float
    point: int
    trial: int
    seed: int
    method: str
    rate: float
    iterations: int
    wall_ms: float
    status: str
    channel_digest: str
    # largest relative budget excess (<= 0 when feasible)
    max_violation: float = float("nan")
    extra: dict = field(default_factory=dict)

    def csv_row(self, timing=False):
        value = int(self.value) if self.sweep_param == "K" else self.value
        return (
            self.sweep_param,
            _fmt(value),
            str(self.seed),
            self.method,
            "nan" if math.isnan(self.rate) else f"{self.rate:.10f}",
            str(self.iterations),
            f"{self.wall_ms:.3f}" if timing else "",
            self.status,
        )


def _trial_seed(base, point, trial):
    return np.random.SeedSequence([base, point, trial])


def trial_seed_int(base, point, trial):
    return int(_trial_seed(base, point, trial).generate_state(1, dtype=np.uint32)[0])


def _method_seed(base, point, trial, method):
    return np.random.SeedSequence([base, point, trial, 1 + METHODS.index(method)])


def draw_trial(exp, point, trial):
    """Channel draw and element partition for one trial (shared by all methods)."""
    cfg = exp.system_at(exp.values[point])
    ss = _trial_seed(exp.seed, point, trial)
    ch_seed, part_seed = ss.spawn(2)
    ch = draw_channels(np.random.default_rng(ch_seed), exp.geometry, cfg)
    part = ElementPartition.random(cfg.N, cfg.K, np.random.default_rng(part_seed))
    return cfg, ch, part


def run_method(method, ch, part, cfg, exp, seed):
    """Run one scheme; returns ``(state, rate, iterations, used_cfg, used_part, used_channels)``."""
    if method == "hp_sdr_fp":
        res = hp_sdr_fp.optimize(ch, part, cfg, hp_sdr_fp.OptimizerConfig(random_state=seed, **exp.hp_config))
        return res.state, res.rate, res.n_iter, cfg, part, ch
    if method == "wf_gpi_grr":
        opt = wf_gpi_grr.WfConfig(
            max_iter=exp.max_iter, tol=exp.tol, random_state=np.random.default_rng(seed),
            gpi=wf_gpi_grr.GpiConfig(exp.gpi_tol, exp.gpi_max_iter),
        )
        res = wf_gpi_grr.optimize(ch, part, cfg, opt)
        return res.state, res.rate, res.n_iter, cfg, part, ch
    cfg_R = benchmarks.matched_power(cfg)
    if method == "relay_only":
        res = benchmarks.relay_only(ch, cfg_R)
    elif method == "passive_unit":
        res = benchmarks.passive_unit(ch, cfg_R)
    elif method == "random_phase":
        res = benchmarks.random_phase(ch, cfg_R, np.random.default_rng(seed))
    elif method == "passive_opt":
        res = benchmarks.passive_opt(ch, cfg_R, hp_sdr_fp.OptimizerConfig(random_state=seed, **exp.hp_config))
    else:
        raise ValueError(f"unknown method {method!r}")
    return res.state, res.rate, res.n_iter, res.config, res.partition, res.channels


_FAILURES = (hp_sdr_fp.OptimizationError, SdpError, np.linalg.LinAlgError, NotPositiveDefiniteError,
             ValueError, ArithmeticError)


def run_trial(exp, point, trial, timing=False):
    cfg, ch, part = draw_trial(exp, point, trial)
    digest = ch.digest()
    seed_int = trial_seed_int(exp.seed, point, trial)
    rows = []
    for method in exp.methods:
        t0 = time.perf_counter()
        try:
            state, rate, iters, used_cfg, used_part, used_ch = run_method(
                method, ch, part, cfg, exp, _method_seed(exp.seed, point, trial, method)
            )
            rep = feasibility_report(state, used_ch, used_part, used_cfg)
            viol = max(rep.values())
            status = "ok"
        except _FAILURES as exc:
            rate, iters, viol = float("nan"), 0, float("nan")
            status = f"failed:{type(exc).__name__}"
        wall = (time.perf_counter() - t0) * 1e3 if timing else 0.0
        rows.append(TrialResult(exp.swept_param, exp.values[point], point, trial, seed_int, method, float(rate),
                                int(iters), wall, status, digest, viol))
    return rows


def run_sweep(exp, timing=False, progress=None):
    """Every point x trial x method, sorted by (point, trial, method order)."""
    rows = []
    for p in range(len(exp.values)):
        for t in range(exp.trials):
            rows.extend(run_trial(exp, p, t, timing))
            if progress is not None:
                progress(p, t)
    order = {m: i for i, m in enumerate(METHODS)}
    rows.sort(key=lambda r: (r.point, r.trial, order[r.method]))
    return rows


def write_csv(rows, fh, timing=False):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.csv_row(timing))


def csv_text(rows, timing=False):
    buf = io.StringIO()
    write_csv(rows, buf, timing)
    return buf.getvalue()


def aggregate(rows):
    """``{(value, method): (mean, standard error, count)}`` over successful rows."""
    groups = {}
    for r in rows:
        if r.status == "ok":
            groups.setdefault((r.value, r.method), []).append(r.rate)
    out = {}
    for key, rates in groups.items():
        a = np.asarray(rates)
        se = a.std(ddof=1) / np.sqrt(a.size) if a.size > 1 else float("nan")
        out[key] = (float(a.mean()), float(se), int(a.size))
    return out


# ---------------------------------------------------------------------------
# convergence


def plateau_iteration(trace, tol):
    """First index ``k`` such that every later increment of ``trace`` is <= tol."""
    trace = np.asarray(trace, dtype=float)
    inc = np.diff(trace)
    big = np.flatnonzero(inc > tol)
    return 0 if big.size == 0 else int(big[-1] + 1)


def run_convergence(exp, point=0, trial=0, iterations=None):
    """Best-so-far rate per outer iteration for both hybrid optimizers on one
    shared draw, run for a fixed number of iterations.

    Returns ``(rows, traces)`` with rows ``(iteration, method, rate)``.
    """
    iterations = iterations or exp.convergence_iters
    cfg, ch, part = draw_trial(exp, point, trial)
    hp = hp_sdr_fp.optimize(ch, part, cfg, hp_sdr_fp.OptimizerConfig(
        max_iter=iterations, tol=exp.tol, n_samples=exp.n_samples,
        random_state=_method_seed(exp.seed, point, trial, "hp_sdr_fp"), early_stop=False))
    wf = wf_gpi_grr.optimize(ch, part, cfg, wf_gpi_grr.WfConfig(
        max_iter=iterations, tol=exp.tol, early_stop=False,
        random_state=np.random.default_rng(_method_seed(exp.seed, point, trial, "wf_gpi_grr")),
        gpi=wf_gpi_grr.GpiConfig(exp.gpi_tol, exp.gpi_max_iter)))
    traces = {"hp_sdr_fp": hp.trace, "wf_gpi_grr": wf.trace}
    rows = [(k, m, float(r)) for m, tr in traces.items() for k, r in enumerate(tr)]
    return rows, traces


def write_convergence_csv(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CONVERGENCE_HEADER)
    for k, m, r in rows:
        w.writerow((k, m, f"{r:.10f}"))
