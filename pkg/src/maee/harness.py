"""Monte-Carlo experiments: configuration, paired seeding, sweeps and result files."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from threadpoolctl import threadpool_limits

from .baselines import (conv_ee_solve, fpa_solve, pso_position_solve, sm_solve, zf_solve)
from .channel import Scenario, dbm_to_watt, sample_channel
from .motor import MotorParams
from .mu import initial_precoding, mu_solve
from .problem import Problem
from .su import su_solve

SCHEMES = ("proposed", "pso", "fpa", "convee", "sm", "zf")
SWEEP_AXES = ("array_length_over_lambda", "num_paths", "coherence_time", "num_antennas",
              "P_max_dBm")
COLUMNS = ("sweep_value", "scheme", "ee_mean", "ee_std", "rate_mean", "e_motor_mean",
           "tau_mean", "failures")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    scenario: Scenario = field(default_factory=Scenario)
    motor: MotorParams = field(default_factory=MotorParams)
    schemes: tuple = ("proposed", "fpa")
    sweep: str = "array_length_over_lambda"
    values: tuple = (6.0,)
    realizations: int = 100
    seed: int = 2025
    eps: float = 1e-4
    threads: int = 1
    output: str | None = None
    format: str = "csv"

    def __post_init__(self):
        self.schemes = tuple(self.schemes)
        self.values = tuple(float(v) for v in self.values)
        errors = []
        if self.realizations < 1:
            errors.append("realizations: must be at least 1")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            errors.append(f"schemes: unknown {bad}, expected a subset of {list(SCHEMES)}")
        if not self.schemes:
            errors.append("schemes: empty")
        if self.sweep not in SWEEP_AXES:
            errors.append(f"sweep: unknown axis {self.sweep!r}, expected one of {list(SWEEP_AXES)}")
        if not self.values:
            errors.append("values: empty")
        elif list(self.values) != sorted(self.values):
            errors.append("values: must be sorted ascending")
        if not (0 <= self.seed < 2 ** 64):
            errors.append("seed: must fit in an unsigned 64-bit integer")
        if self.threads < 1:
            errors.append("threads: must be at least 1")
        if self.format not in ("csv", "json"):
            errors.append("format: must be csv or json")
        if errors:
            raise ConfigError("; ".join(errors))
        if self.sweep in SWEEP_AXES and self.values:
            for v in self.values:  # fail early on sweep points that break the scenario
                try:
                    scenario_at(self, v)
                except ValueError as exc:
                    raise ConfigError(f"values: {self.sweep}={v} is invalid ({exc})") from None

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class ResultRow:
    sweep_value: float
    scheme: str
    ee_mean: float
    ee_std: float
    rate_mean: float
    e_motor_mean: float
    tau_mean: float
    failures: int


@dataclass(frozen=True)
class Record:
    """One scheme on one realization."""
    sweep_value: float
    realization: int
    seed: int
    scheme: str
    ee: float
    sum_rate: float
    e_motor: float
    tau: float
    converged: bool
    dpv: tuple


def scenario_at(config: ExperimentConfig, value: float) -> Scenario:
    sc = config.scenario
    if config.sweep == "array_length_over_lambda":
        return sc.with_(array_length=value * sc.wavelength)
    if config.sweep == "num_paths":
        return sc.with_(num_paths=int(round(value)))
    if config.sweep == "coherence_time":
        return sc.with_(coherence_time=value)
    if config.sweep == "num_antennas":
        return sc.with_(num_antennas=int(round(value)))
    if config.sweep == "P_max_dBm":
        return sc.with_(p_max=dbm_to_watt(value))
    raise ConfigError(f"unknown sweep axis {config.sweep!r}")


def realization_seeds(master: int, axis: str, index: int):
    """Channel seed and PSO generator for one realization.

    The seed depends on the axis name but not on the sweep value, so every
    sweep point and every scheme sees the same draw for a given index.
    """
    ss = np.random.SeedSequence([master, zlib.crc32(axis.encode()), index])
    channel_seed = int(ss.generate_state(1, dtype=np.uint64)[0])
    return channel_seed, np.random.default_rng(ss.spawn(1)[0])


def _solve(scheme, scenario, motor, realization, rng, eps, initial):
    if scheme == "proposed":
        if scenario.num_users == 1:
            return su_solve(scenario, motor, realization, eps=eps)
        return mu_solve(scenario, motor, realization, eps=eps, initial=initial)
    if scheme == "fpa":
        return fpa_solve(scenario, motor, realization, initial=initial)
    if scheme == "convee":
        return conv_ee_solve(scenario, motor, realization, initial=initial)
    if scheme == "sm":
        return sm_solve(scenario, motor, realization, eps=eps)
    if scheme == "pso":
        return pso_position_solve(scenario, motor, realization, rng=rng, eps=eps, initial=initial)
    if scheme == "zf":
        return zf_solve(scenario, motor, realization, eps=eps)
    raise ConfigError(f"unknown scheme {scheme!r}")


def run_task(config: ExperimentConfig, value: float, index: int) -> list[Record]:
    """All schemes on one realization at one sweep point."""
    scenario = scenario_at(config, value)
    seed, rng = realization_seeds(config.seed, config.sweep, index)
    realization = sample_channel(scenario, seed)
    initial = None
    if scenario.num_users > 1 and {"proposed", "fpa", "convee", "pso"} & set(config.schemes):
        initial = initial_precoding(Problem.build(scenario, config.motor, realization))
    out = []
    for scheme in config.schemes:
        sol = _solve(scheme, scenario, config.motor, realization, rng, config.eps, initial)
        if sol.diagnostics.get("violations"):
            raise RuntimeError(f"{scheme} returned an infeasible solution: "
                               f"{sol.diagnostics['violations']}")
        b = sol.breakdown
        out.append(Record(sweep_value=value, realization=index, seed=seed, scheme=scheme,
                          ee=b.ee, sum_rate=b.sum_rate, e_motor=b.e_motor, tau=b.tau,
                          converged=bool(sol.diagnostics.get("converged", True)),
                          dpv=tuple(float(x) for x in sol.dpv)))
    return out


def _run_chunk(args):
    config, tasks = args
    # single-threaded BLAS keeps floating-point results independent of the worker count
    with threadpool_limits(limits=1):
        return [r for value, index in tasks for r in run_task(config, value, index)]


def run_records(config: ExperimentConfig) -> list[Record]:
    """Per-realization records in canonical order (sweep value, realization, scheme)."""
    tasks = [(v, i) for v in config.values for i in range(config.realizations)]
    if config.threads == 1 or len(tasks) == 1:
        records = _run_chunk((config, tasks))
    else:
        chunks = [(config, tasks[j::config.threads * 4]) for j in range(config.threads * 4)]
        chunks = [c for c in chunks if c[1]]
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            records = [r for part in pool.map(_run_chunk, chunks) for r in part]
    order = {s: j for j, s in enumerate(config.schemes)}
    records.sort(key=lambda r: (r.sweep_value, r.realization, order[r.scheme]))
    return records


def aggregate(config: ExperimentConfig, records: list[Record]) -> list[ResultRow]:
    rows = []
    for value in config.values:
        for scheme in config.schemes:
            sel = [r for r in records if r.sweep_value == value and r.scheme == scheme]
            if len(sel) != config.realizations:
                raise RuntimeError(f"expected {config.realizations} records for "
                                   f"{scheme} at {value}, got {len(sel)}")
            ee = np.array([r.ee for r in sel])
            rows.append(ResultRow(
                sweep_value=value, scheme=scheme, ee_mean=float(ee.mean()),
                ee_std=float(ee.std(ddof=1)) if ee.size > 1 else 0.0,
                rate_mean=float(np.mean([r.sum_rate for r in sel])),
                e_motor_mean=float(np.mean([r.e_motor for r in sel])),
                tau_mean=float(np.mean([r.tau for r in sel])),
                failures=sum(not r.converged for r in sel)))
    return rows


def run_experiment(config: ExperimentConfig) -> list[ResultRow]:
    return aggregate(config, run_records(config))


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.9g}"


def results_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in rows:
        w.writerow([_fmt(getattr(row, c)) for c in COLUMNS])
    return buf.getvalue()


def results_json(rows) -> str:
    return json.dumps([{c: getattr(row, c) for c in COLUMNS} for row in rows], indent=1) + "\n"


def emit_results(rows, format: str = "csv", path=None) -> str:
    """Write rows as CSV or JSON; returns the text.  ``path=None`` writes nothing."""
    if format not in ("csv", "json"):
        raise ValueError("format must be csv or json")
    text = results_csv(rows) if format == "csv" else results_json(rows)
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def load_results(path) -> list[ResultRow]:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        items = json.loads(text)
    else:
        items = list(csv.DictReader(io.StringIO(text)))
    return [ResultRow(sweep_value=float(d["sweep_value"]), scheme=str(d["scheme"]),
                      ee_mean=float(d["ee_mean"]), ee_std=float(d["ee_std"]),
                      rate_mean=float(d["rate_mean"]), e_motor_mean=float(d["e_motor_mean"]),
                      tau_mean=float(d["tau_mean"]), failures=int(d["failures"]))
            for d in items]


def records_json(records) -> str:
    return json.dumps([asdict(r) for r in records], indent=1) + "\n"


# ---------------------------------------------------------------------------
# configuration files
# ---------------------------------------------------------------------------

try:
    import tomllib as _toml
except ModuleNotFoundError:  # Python < 3.11
    import tomli as _toml

_DBM_KEYS = {"noise_power_dbm": "noise_power", "p_max_dbm": "p_max", "p_static_dbm": "p_static"}
_LAMBDA_KEYS = {"array_length_over_lambda": "array_length", "d_min_over_lambda": "d_min",
                "d_th_over_lambda": "d_th"}


def _scenario_kwargs(table: dict, wavelength: float) -> dict:
    """Translate a [scenario] table (dBm, dB and wavelength-relative keys allowed)."""
    table = dict(table)
    kwargs = {}
    lam = float(table.get("wavelength", wavelength))
    for key, target in _DBM_KEYS.items():
        if key in table:
            kwargs[target] = dbm_to_watt(float(table.pop(key)))
    if "ref_pathloss_db" in table:
        kwargs["ref_pathloss"] = 10 ** (float(table.pop("ref_pathloss_db")) / 10)
    for key, target in _LAMBDA_KEYS.items():
        if key in table:
            kwargs[target] = float(table.pop(key)) * lam
    if "user_distance_range" in table:
        kwargs["user_distance_range"] = tuple(float(x) for x in table.pop("user_distance_range"))
    unknown = set(table) - {f.name for f in fields(Scenario)}
    if unknown:
        raise ConfigError(f"scenario: unknown keys {sorted(unknown)}")
    kwargs.update(table)
    return kwargs


def _motor_from(table: dict) -> MotorParams:
    names = {f.name for f in fields(MotorParams)}
    unknown = set(table) - names
    if unknown:
        raise ConfigError(f"motor: unknown keys {sorted(unknown)}")
    try:
        return MotorParams(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"motor: {exc}") from None


def config_from_dict(data: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    base = base or ExperimentConfig()
    data = dict(data)
    changes = {}
    if "scenario" in data:
        merged = asdict(base.scenario)
        merged.update(_scenario_kwargs(data.pop("scenario"), base.scenario.wavelength))
        try:
            changes["scenario"] = Scenario(**merged)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"scenario: {exc}") from None
    if "motor" in data:
        merged = asdict(base.motor)
        merged.update(data.pop("motor"))
        changes["motor"] = _motor_from(merged)
    exp = dict(data.pop("experiment", {}))
    out = dict(data.pop("output", {}))
    if data:
        raise ConfigError(f"unknown sections {sorted(data)}")
    allowed = {"schemes", "sweep", "values", "realizations", "seed", "eps", "threads"}
    unknown = set(exp) - allowed
    if unknown:
        raise ConfigError(f"experiment: unknown keys {sorted(unknown)}")
    changes.update(exp)
    if "path" in out:
        changes["output"] = out.pop("path")
    if "format" in out:
        changes["format"] = out.pop("format")
    if out:
        raise ConfigError(f"output: unknown keys {sorted(out)}")
    try:
        return base.with_(**changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            data = _toml.load(fh)
        except _toml.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data, base)


# ---------------------------------------------------------------------------
# figure presets
# ---------------------------------------------------------------------------

SU_SCHEMES = ("proposed", "pso", "fpa", "convee", "sm")
MU_SCHEMES = SU_SCHEMES + ("zf",)

FIGURES = {
    # name: (users, sweep axis, values)
    "fig5": (1, "array_length_over_lambda", (3, 4, 5, 6, 7, 8)),
    "fig6": (1, "array_length_over_lambda", (6,)),
    "fig7": (1, "num_paths", (1, 2, 4, 6, 8, 10)),
    "fig8": (1, "coherence_time", (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)),
    "fig9": (1, "num_antennas", (2, 4, 6, 8, 10, 12)),
    "fig10": (2, "array_length_over_lambda", (3, 4, 5, 6, 7, 8)),
    "fig11": (2, "P_max_dBm", (10, 15, 20, 25, 30, 35, 40)),
    "fig12": (2, "coherence_time", (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)),
    "fig13": (2, "num_antennas", (2, 4, 6, 8, 10, 12)),
}
SCALES = {"desk": 100, "full": 1000}


def figure_config(name: str, scale: str = "desk", seed: int = 2025, threads: int = 1,
                  realizations: int | None = None) -> ExperimentConfig:
    if name not in FIGURES:
        raise ConfigError(f"unknown figure {name!r}, expected one of {list(FIGURES)}")
    if scale not in SCALES:
        raise ConfigError(f"unknown scale {scale!r}, expected desk or full")
    users, axis, values = FIGURES[name]
    n = 1 if name == "fig6" else SCALES[scale]
    return ExperimentConfig(scenario=Scenario(num_users=users),
                            schemes=SU_SCHEMES if users == 1 else MU_SCHEMES,
                            sweep=axis, values=values,
                            realizations=realizations or n, seed=seed, threads=threads)


def reproduce_figure(name: str, scale: str = "desk", seed: int = 2025, threads: int = 1,
                     realizations: int | None = None) -> list[ResultRow]:
    return run_experiment(figure_config(name, scale, seed, threads, realizations))


def default_threads() -> int:
    return max(1, os.cpu_count() or 1)


def paired_difference(records, scheme_a: str, scheme_b: str, value: float):
    """Mean and standard error of the per-realization EE difference a - b."""
    a = {r.realization: r.ee for r in records if r.scheme == scheme_a and r.sweep_value == value}
    b = {r.realization: r.ee for r in records if r.scheme == scheme_b and r.sweep_value == value}
    d = np.array([a[i] - b[i] for i in sorted(a)])
    se = float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0
    return float(d.mean()), se
