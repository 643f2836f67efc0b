"""Command-line front-end: experiments, single trials, oracle checks, scenario export."""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .harness import (
    ESTIMATORS,
    ConfigError,
    ExperimentSpec,
    load_experiment_spec,
    run_experiment,
    write_result_files,
)
from .metrics import activity_error_rate, nmse_active_db, nmse_all_db
from .quadrature import awgn_posterior_quadrature, bg_posterior_quadrature
from .scenario import SystemConfig, save_scenario, synthesize
from .denoisers import bg_moments, output_denoise

TRACE_HEADER = ["iteration", "tol", "schedule_size", "nmse_all_db", "detected"]


def _add_system_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--devices", type=int, default=128, help="number of devices N")
    p.add_argument("--antennas", type=int, default=32, help="number of BS antennas M")
    p.add_argument("--pilot-length", type=int, default=64, help="pilot sequence length L")
    p.add_argument("--rho-lo", type=float, default=0.01, help="lower activity probability")
    p.add_argument("--rho-hi", type=float, default=0.05, help="upper activity probability")
    p.add_argument("--threshold", type=float, default=0.9, help="activity detection threshold")
    p.add_argument("--max-iters", type=int, default=50, help="iteration cap I")
    p.add_argument("--tol-eps", type=float, default=1e-4, help="stopping tolerance")


def _system_config(args, seed: int, snr_db: float) -> SystemConfig:
    return SystemConfig(
        N=args.devices, M=args.antennas, L=args.pilot_length,
        snr_db=snr_db, rho_range=(args.rho_lo, args.rho_hi),
        activity_threshold=args.threshold, max_iters=args.max_iters,
        tol_eps=args.tol_eps, seed=seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msgamp",
        description="Scheduled-GAMP simulator for grant-free activity detection "
                    "and massive-MIMO channel estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a Monte Carlo experiment from a config file")
    p_run.add_argument("--config", required=True, help="INI experiment file")
    p_run.add_argument("--out-dir", default=None, help="output directory (overrides config)")
    p_run.add_argument("--trials", type=int, default=None, help="trials per (SNR, estimator)")
    p_run.add_argument("--seed", type=int, default=None, help="root seed override")
    p_run.add_argument("--snr-grid-db", default=None, help="comma-separated SNR grid, e.g. 5,10,15,20")
    p_run.add_argument("--estimators", default=None,
                       help=f"comma-separated estimator names from {sorted(ESTIMATORS)}")
    p_run.add_argument("--emit-traces", action=argparse.BooleanOptionalAction, default=None,
                       help="write per-iteration convergence trace files")
    p_run.add_argument("--nmse-domain", choices=["linear", "db"], default=None,
                       help="NMSE aggregation domain")
    p_run.set_defaults(func=_cmd_run)

    p_trial = sub.add_parser("trial", help="run one seeded trial and dump the iteration trace")
    p_trial.add_argument("--seed", type=int, default=0, help="scenario seed")
    p_trial.add_argument("--estimator", choices=sorted(ESTIMATORS), default="msgamp-grbpp")
    p_trial.add_argument("--snr-db", type=float, default=10.0)
    _add_system_flags(p_trial)
    p_trial.set_defaults(func=_cmd_trial)

    p_oracle = sub.add_parser("oracle-check", help="compare the denoisers against quadrature")
    p_oracle.add_argument("--points", type=int, default=2000, help="randomized grid size")
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--tol", type=float, default=1e-8, help="max absolute moment error")
    p_oracle.set_defaults(func=_cmd_oracle_check)

    p_export = sub.add_parser("export-scenario", help="synthesize one scenario and write it as JSON")
    p_export.add_argument("--seed", type=int, default=0)
    p_export.add_argument("--snr-db", type=float, default=10.0)
    p_export.add_argument("--out", required=True, help="output JSON path")
    _add_system_flags(p_export)
    p_export.set_defaults(func=_cmd_export)

    return parser


def _cmd_run(args) -> int:
    overrides = {
        "out_dir": args.out_dir,
        "trials": args.trials,
        "seed": args.seed,
        "snr_grid_db": args.snr_grid_db.split(",") if args.snr_grid_db else None,
        "estimators": args.estimators.split(",") if args.estimators else None,
        "emit_traces": args.emit_traces,
        "nmse_domain": args.nmse_domain,
    }
    spec = load_experiment_spec(args.config, overrides)
    table = run_experiment(spec)
    paths = write_result_files(table, spec)
    n_err = sum(1 for r in table.raw if r["error"])
    print(f"wrote {len(paths)} files:")
    for p in paths:
        print(f"  {p}")
    if n_err:
        print(f"warning: {n_err} of {len(table.raw)} trials recorded an error", file=sys.stderr)
    return 0


def _cmd_trial(args) -> int:
    cfg = _system_config(args, seed=args.seed, snr_db=args.snr_db)
    sc = synthesize(cfg)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    res = ESTIMATORS[args.estimator](sc, cfg, h_true=sc.H)
    if res.record is not None:
        nm = dict(res.record.nmse_trace)
        for (it, tol), size in zip(res.record.tol_trace, res.record.schedule_sizes):
            detected = int(res.record.active.sum()) if it == res.record.iterations else ""
            writer.writerow([it, repr(tol), size, repr(nm.get(it, float("nan"))), detected])
    print(f"# estimator={args.estimator} snr_db={args.snr_db} seed={args.seed}")
    print(f"# iterations={res.iterations} msg_updates={res.msg_updates}")
    print(f"# aer={activity_error_rate(sc.xi, res.active_hat)!r}")
    print(f"# nmse_active_db={nmse_active_db(sc.H, res.h_hat, sc.xi)!r}")
    print(f"# nmse_all_db={nmse_all_db(sc.H, res.h_hat)!r}")
    return 0


def _cmd_oracle_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    n = args.points
    q_r = 10.0 ** rng.uniform(-1.3, 0.6, n)
    beta = 10.0 ** rng.uniform(-0.7, 0.6, n)
    rho = rng.uniform(0.0, 1.0, n)
    scale = rng.uniform(0.0, 4.0, n) * np.sqrt(beta + q_r)
    phase = rng.uniform(-np.pi, np.pi, n)
    r_hat = scale * np.exp(1j * phase)

    mean_q, var_q, pi_q = bg_posterior_quadrature(r_hat, q_r, rho, beta)
    mean_c, var_c, pi_c = bg_moments(r_hat, q_r, rho, beta)
    err_in = max(np.abs(mean_c - mean_q).max(), np.abs(var_c - var_q).max(), np.abs(pi_c - pi_q).max())

    q_p = 10.0 ** rng.uniform(-1.3, 0.6, n)
    y = rng.normal(size=n) + 1j * rng.normal(size=n)
    p = rng.normal(size=n) + 1j * rng.normal(size=n)
    sigma_w2 = 0.5
    zt_q, qz_q, _ = awgn_posterior_quadrature(y, p, q_p, sigma_w2)
    zt_c, qz_c = output_denoise(y, p, q_p, sigma_w2)
    err_out = max(np.abs(zt_c - zt_q).max(), np.abs(qz_c - qz_q).max())

    ok = err_in <= args.tol and err_out <= args.tol
    print(f"input denoiser  max |closed-form - quadrature| = {err_in:.3e} over {n} points")
    print(f"output denoiser max |closed-form - quadrature| = {err_out:.3e} over {n} points")
    print(f"oracle-check: {'PASS' if ok else 'FAIL'} (tol {args.tol:g})")
    return 0 if ok else 1


def _cmd_export(args) -> int:
    cfg = _system_config(args, seed=args.seed, snr_db=args.snr_db)
    sc = synthesize(cfg)
    save_scenario(sc, args.out)
    print(f"wrote {args.out}")
    return 0


def cli_main(argv=None) -> int:
    """Entry point returning the process exit code (0 ok, 1 failure, 2 usage)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse has already printed its diagnostic
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
