"""Monte Carlo experiment harness: seeded SNR sweeps, result tables, trace files."""

from __future__ import annotations

import configparser
import csv
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import hygamp, mmse_estimate, msgamp, oracle_mmse_estimate, plain_gamp
from .metrics import activity_error_rate, aggregate_nmse_db, bootstrap_ci, nmse_active_db, nmse_all_db
from .scenario import Scenario, SystemConfig, scenario_hash, synthesize
from .scheduling import Policy

OUT_DIR_ENV = "MSGAMP_OUT_DIR"

ESTIMATORS = {
    "mmse": lambda sc, cfg, h_true=None: mmse_estimate(sc, cfg),
    "oracle-mmse": lambda sc, cfg, h_true=None: oracle_mmse_estimate(sc, cfg),
    "gamp": plain_gamp,
    "hygamp": hygamp,
    "msgamp-rbp": lambda sc, cfg, h_true=None: msgamp(sc, cfg, Policy.RBP, h_true=h_true),
    "msgamp-grbp": lambda sc, cfg, h_true=None: msgamp(sc, cfg, Policy.GRBP, h_true=h_true),
    "msgamp-grbpp": lambda sc, cfg, h_true=None: msgamp(sc, cfg, Policy.GRBPP, h_true=h_true),
}

RAW_HEADER = [
    "estimator", "snr_db", "trial", "seed", "scenario_hash",
    "aer", "nmse_active_db", "nmse_all_db", "iterations", "msg_updates", "error",
]
AGG_HEADER = [
    "estimator", "snr_db", "n_trials", "n_valid_nmse",
    "aer_mean", "aer_ci_lo", "aer_ci_hi",
    "nmse_active_db_mean", "nmse_active_db_ci_lo", "nmse_active_db_ci_hi",
    "nmse_all_db_mean", "nmse_all_db_ci_lo", "nmse_all_db_ci_hi",
    "iterations_median", "msg_updates_mean",
]
CONV_HEADER = ["estimator", "snr_db", "iteration", "mean_nmse_all_db"]
STOP_HEADER = ["estimator", "snr_db", "median_stop_iteration", "mean_stop_iteration"]


class ConfigError(ValueError):
    """Invalid experiment configuration, with file/section context."""


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: an SNR x estimator sweep over paired Monte Carlo trials."""

    base: SystemConfig
    snr_grid_db: tuple[float, ...] = (5.0, 10.0, 15.0, 20.0)
    estimators: tuple[str, ...] = tuple(sorted(ESTIMATORS))
    trials: int = 100
    out_dir: Path | None = None
    emit_traces: bool = False
    nmse_domain: str = "linear"  # aggregation domain for NMSE means
    n_boot: int = 1000

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.snr_grid_db:
            raise ConfigError("snr_grid_db must be nonempty")
        if not self.estimators:
            raise ConfigError("estimators must be nonempty")
        unknown = [e for e in self.estimators if e not in ESTIMATORS]
        if unknown:
            raise ConfigError(f"unknown estimators {unknown}; valid: {sorted(ESTIMATORS)}")
        if self.nmse_domain not in ("linear", "db"):
            raise ConfigError("nmse_domain must be 'linear' or 'db'")


@dataclass
class ResultTable:
    """Raw per-trial rows plus per-(estimator, SNR) aggregates and traces."""

    raw: list = field(default_factory=list)         # dicts keyed by RAW_HEADER
    aggregates: list = field(default_factory=list)  # dicts keyed by AGG_HEADER
    convergence: list = field(default_factory=list) # dicts keyed by CONV_HEADER
    stopping: list = field(default_factory=list)    # dicts keyed by STOP_HEADER


def scenario_seed(root_seed: int, snr_index: int, trial: int) -> int:
    """Stable per-(SNR, trial) scenario seed derived from the root seed."""
    ss = np.random.SeedSequence((int(root_seed), int(snr_index), int(trial)))
    return int(ss.generate_state(1, np.uint64)[0])


def _pad_trace(nmse_trace, n_iters: int) -> np.ndarray:
    """Fixed-length per-iteration NMSE trace; converged runs repeat their final value."""
    out = np.full(n_iters, np.nan)
    last = np.nan
    for it, v in nmse_trace:
        out[it - 1] = v
        last = v
    for i in range(n_iters):
        if np.isnan(out[i]):
            out[i] = last
        else:
            last = out[i]
    return out


def run_experiment(spec: ExperimentSpec) -> ResultTable:
    """Run every estimator on the same scenario for each (SNR, trial) pair.

    Deterministic given the spec: scenario seeds derive from
    (root seed, snr index, trial) and execution is serial. A failing estimator
    is recorded in its row's error column, never dropped.
    """
    table = ResultTable()
    traces: dict = {}
    stop_iters: dict = {}
    n_iters = spec.base.max_iters
    for si, snr in enumerate(spec.snr_grid_db):
        for trial in range(spec.trials):
            seed = scenario_seed(spec.base.seed, si, trial)
            cfg = replace(spec.base, snr_db=float(snr), seed=seed)
            sc = synthesize(cfg)
            digest = scenario_hash(sc)
            for est in spec.estimators:
                row = {
                    "estimator": est, "snr_db": float(snr), "trial": trial,
                    "seed": seed, "scenario_hash": digest,
                    "aer": None, "nmse_active_db": None, "nmse_all_db": None,
                    "iterations": None, "msg_updates": None, "error": "",
                }
                try:
                    res = ESTIMATORS[est](sc, cfg, h_true=sc.H if spec.emit_traces else None)
                    row["aer"] = activity_error_rate(sc.xi, res.active_hat)
                    row["nmse_active_db"] = nmse_active_db(sc.H, res.h_hat, sc.xi)
                    row["nmse_all_db"] = nmse_all_db(sc.H, res.h_hat)
                    row["iterations"] = res.iterations
                    row["msg_updates"] = res.msg_updates
                    if spec.emit_traces and res.record is not None and res.record.nmse_trace:
                        traces.setdefault((est, float(snr)), []).append(
                            _pad_trace(res.record.nmse_trace, n_iters)
                        )
                        stop_iters.setdefault((est, float(snr)), []).append(res.iterations)
                except Exception as exc:  # record the failure, keep the sweep going
                    row["error"] = f"{type(exc).__name__}: {exc}"
                table.raw.append(row)
    table.aggregates = _aggregate(table.raw, spec)
    if spec.emit_traces:
        table.convergence, table.stopping = _trace_tables(traces, stop_iters, n_iters)
    return table


def _aggregate(raw_rows, spec: ExperimentSpec) -> list:
    out = []
    for ei, est in enumerate(spec.estimators):
        for si, snr in enumerate(spec.snr_grid_db):
            rows = [r for r in raw_rows
                    if r["estimator"] == est and r["snr_db"] == float(snr) and not r["error"]]
            aer = np.array([r["aer"] for r in rows], dtype=float)
            nm_act = np.array([r["nmse_active_db"] for r in rows], dtype=float)
            nm_all = np.array([r["nmse_all_db"] for r in rows], dtype=float)
            iters = np.array([r["iterations"] for r in rows], dtype=float)
            upd = np.array([r["msg_updates"] for r in rows], dtype=float)
            boot_seed = scenario_seed(spec.base.seed, si, 10_000 + ei)
            aer_lo, aer_hi = bootstrap_ci(aer, n_boot=spec.n_boot, seed=boot_seed)
            na_mean, na_lo, na_hi = aggregate_nmse_db(nm_act, spec.nmse_domain, spec.n_boot, boot_seed + 1)
            nl_mean, nl_lo, nl_hi = aggregate_nmse_db(nm_all, spec.nmse_domain, spec.n_boot, boot_seed + 2)
            out.append({
                "estimator": est, "snr_db": float(snr),
                "n_trials": len(rows), "n_valid_nmse": int(np.isfinite(nm_act).sum()),
                "aer_mean": float(aer.mean()) if aer.size else float("nan"),
                "aer_ci_lo": aer_lo, "aer_ci_hi": aer_hi,
                "nmse_active_db_mean": na_mean, "nmse_active_db_ci_lo": na_lo, "nmse_active_db_ci_hi": na_hi,
                "nmse_all_db_mean": nl_mean, "nmse_all_db_ci_lo": nl_lo, "nmse_all_db_ci_hi": nl_hi,
                "iterations_median": float(np.median(iters)) if iters.size else float("nan"),
                "msg_updates_mean": float(upd.mean()) if upd.size else float("nan"),
            })
    return out


def _trace_tables(traces: dict, stop_iters: dict, n_iters: int):
    convergence, stopping = [], []
    for (est, snr) in sorted(traces):
        mat = np.vstack(traces[(est, snr)])
        mean_trace = mat.mean(axis=0)
        for it in range(n_iters):
            convergence.append({
                "estimator": est, "snr_db": snr, "iteration": it + 1,
                "mean_nmse_all_db": float(mean_trace[it]),
            })
        stops = np.asarray(stop_iters[(est, snr)], dtype=float)
        stopping.append({
            "estimator": est, "snr_db": snr,
            "median_stop_iteration": float(np.median(stops)),
            "mean_stop_iteration": float(stops.mean()),
        })
    return convergence, stopping


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, float) and not np.isfinite(v):
        return ""
    return v


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_csv_value(r[k]) for k in header])


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, "results"))


def write_result_files(table: ResultTable, spec: ExperimentSpec) -> list[Path]:
    """Write raw/aggregate CSVs plus metadata (and trace files when enabled).

    Byte-deterministic for a given spec; no timestamps or machine state go in.
    """
    out = Path(spec.out_dir) if spec.out_dir is not None else default_out_dir()
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        raw_path = out / "results_raw.csv"
        _write_csv(raw_path, RAW_HEADER, table.raw)
        paths.append(raw_path)
        agg_path = out / "results_aggregate.csv"
        _write_csv(agg_path, AGG_HEADER, table.aggregates)
        paths.append(agg_path)
        meta_path = out / "metadata.json"
        meta = {
            "format": "msgamp-results",
            "version": 1,
            "package_version": __version__,
            "config": {
                "N": spec.base.N, "M": spec.base.M, "L": spec.base.L,
                "rho_range": list(spec.base.rho_range),
                "beta": np.asarray(spec.base.beta, dtype=float).tolist(),
                "activity_threshold": spec.base.activity_threshold,
                "max_iters": spec.base.max_iters,
                "tol_eps": spec.base.tol_eps,
                "seed": spec.base.seed,
            },
            "snr_grid_db": list(spec.snr_grid_db),
            "estimators": list(spec.estimators),
            "trials": spec.trials,
            "nmse_aggregation_domain": spec.nmse_domain,
            "nmse_db_floor": -120.0,
            "raw_columns": RAW_HEADER,
            "aggregate_columns": AGG_HEADER,
        }
        meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        paths.append(meta_path)
        if spec.emit_traces:
            conv_path = out / "convergence.csv"
            _write_csv(conv_path, CONV_HEADER, table.convergence)
            paths.append(conv_path)
            stop_path = out / "stopping_iterations.csv"
            _write_csv(stop_path, STOP_HEADER, table.stopping)
            paths.append(stop_path)
        return paths
    except OSError as exc:
        raise OSError(f"cannot write results under {out}: {exc}") from exc


def emit_convergence(spec: ExperimentSpec) -> list[Path]:
    """Run the experiment with traces on and write all result files."""
    if not spec.emit_traces:
        spec = replace(spec, emit_traces=True)
    table = run_experiment(spec)
    return write_result_files(table, spec)


def _parse_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def load_experiment_spec(path, overrides: dict | None = None) -> ExperimentSpec:
    """Read an INI experiment file ([system] and [experiment] sections) and
    apply CLI overrides. Raises ConfigError with file/key context."""
    cp = configparser.ConfigParser()
    try:
        read = cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not read:
        raise ConfigError(f"{path}: cannot read config file")

    def get(section, key, conv, default):
        if not cp.has_option(section, key):
            return default
        rawval = cp.get(section, key)
        try:
            return conv(rawval)
        except ValueError as exc:
            raise ConfigError(f"{path}: [{section}] {key} = {rawval!r}: {exc}") from exc

    def get_bool(section, key, default):
        if not cp.has_option(section, key):
            return default
        try:
            return cp.getboolean(section, key)
        except ValueError as exc:
            raise ConfigError(f"{path}: [{section}] {key}: {exc}") from exc

    try:
        base = SystemConfig(
            N=get("system", "devices", int, 128),
            M=get("system", "antennas", int, 32),
            L=get("system", "pilot_length", int, 64),
            snr_db=get("system", "snr_db", float, 10.0),
            rho_range=(get("system", "rho_lo", float, 0.01), get("system", "rho_hi", float, 0.05)),
            beta=get("system", "beta", float, 1.0),
            activity_threshold=get("system", "activity_threshold", float, 0.9),
            max_iters=get("system", "max_iters", int, 50),
            tol_eps=get("system", "tol_eps", float, 1e-4),
            seed=get("system", "seed", int, 0),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: [system]: {exc}") from exc

    snr_grid = tuple(float(s) for s in get("experiment", "snr_grid_db", _parse_list, ["5", "10", "15", "20"]))
    estimators = tuple(get("experiment", "estimators", _parse_list, sorted(ESTIMATORS)))
    trials = get("experiment", "trials", int, 100)
    out_dir = get("experiment", "out_dir", Path, None)
    emit_traces = get_bool("experiment", "emit_traces", False)
    nmse_domain = get("experiment", "nmse_domain", str, "linear")

    overrides = overrides or {}
    if overrides.get("seed") is not None:
        base = replace(base, seed=int(overrides["seed"]))
    if overrides.get("snr_grid_db") is not None:
        snr_grid = tuple(float(s) for s in overrides["snr_grid_db"])
    if overrides.get("estimators") is not None:
        estimators = tuple(overrides["estimators"])
    if overrides.get("trials") is not None:
        trials = int(overrides["trials"])
    if overrides.get("out_dir") is not None:
        out_dir = Path(overrides["out_dir"])
    if overrides.get("emit_traces") is not None:
        emit_traces = bool(overrides["emit_traces"])
    if overrides.get("nmse_domain") is not None:
        nmse_domain = str(overrides["nmse_domain"])

    try:
        return ExperimentSpec(
            base=base, snr_grid_db=snr_grid, estimators=estimators, trials=trials,
            out_dir=out_dir, emit_traces=emit_traces, nmse_domain=nmse_domain,
        )
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
