"""Activity-error and channel-NMSE metrics plus Monte Carlo aggregation helpers."""

from __future__ import annotations

import numpy as np

# dB floor for exact recovery, so CSV files never carry -inf.
DB_FLOOR = -120.0


def activity_error_rate(xi_true, xi_hat) -> float:
    """Fraction of devices with a wrong activity decision (misses and false
    alarms counted equally)."""
    xt = np.asarray(xi_true).astype(bool)
    xh = np.asarray(xi_hat).astype(bool)
    if xt.shape != xh.shape:
        raise ValueError(f"shape mismatch: {xt.shape} vs {xh.shape}")
    return float(np.mean(xt != xh))


def _nmse_db(H_true, H_hat) -> float:
    err = float(np.sum(np.abs(H_hat - H_true) ** 2))
    ref = float(np.sum(np.abs(H_true) ** 2))
    if ref == 0.0:
        return float("nan")  # not applicable
    with np.errstate(divide="ignore"):
        return float(max(10.0 * np.log10(err / ref), DB_FLOOR))


def nmse_active_db(H_true, H_hat, xi_true) -> float:
    """NMSE in dB restricted to the truly active rows; NaN when none is active."""
    act = np.asarray(xi_true).astype(bool)
    if not act.any():
        return float("nan")
    return _nmse_db(np.asarray(H_true)[act], np.asarray(H_hat)[act])


def nmse_all_db(H_true, H_hat) -> float:
    """NMSE in dB over all rows; NaN for an all-zero truth."""
    return _nmse_db(np.asarray(H_true), np.asarray(H_hat))


def bootstrap_ci(values, n_boot: int = 1000, alpha: float = 0.05, seed=0):
    """Percentile bootstrap CI of the mean; NaN inputs are dropped."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return float("nan"), float("nan")
    if v.size == 1:
        return float(v[0]), float(v[0])
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, v.size, size=(n_boot, v.size))
    means = v[idx].mean(axis=1)
    lo, hi = np.quantile(means, [alpha / 2.0, 1.0 - alpha / 2.0])
    return float(lo), float(hi)


def db_to_linear(db) -> np.ndarray:
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x) -> float:
    if x <= 0.0:
        return DB_FLOOR
    return float(max(10.0 * np.log10(x), DB_FLOOR))


def aggregate_nmse_db(values_db, domain: str = "linear", n_boot: int = 1000, seed=0):
    """Mean and bootstrap CI of per-trial NMSE values given in dB.

    domain='linear' averages the error ratios and converts back to dB (the
    expectation of the error ratio); domain='db' averages the dB values.
    Returns (mean, lo, hi) in dB; all-NaN input yields NaNs.
    """
    v = np.asarray(values_db, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return float("nan"), float("nan"), float("nan")
    if domain == "linear":
        lin = db_to_linear(v)
        lo, hi = bootstrap_ci(lin, n_boot=n_boot, seed=seed)
        return linear_to_db(float(lin.mean())), linear_to_db(lo), linear_to_db(hi)
    if domain == "db":
        lo, hi = bootstrap_ci(v, n_boot=n_boot, seed=seed)
        return float(v.mean()), lo, hi
    raise ValueError(f"unknown NMSE aggregation domain {domain!r}")
