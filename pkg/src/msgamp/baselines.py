"""Reference estimators: linear MMSE, oracle MMSE, plain GAMP, flooding HyGAMP."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import logit

from . import engine
from .scenario import Scenario, SystemConfig
from .scheduling import Policy

RIDGE = 1e-12  # fallback regularization for a numerically singular system


@dataclass
class EstimatorResult:
    """Channel estimate plus activity decisions from one estimator."""

    h_hat: np.ndarray
    active_hat: np.ndarray
    iterations: int = 0
    msg_updates: int = 0
    regularized: bool = False
    record: Optional[engine.RunRecord] = None


def _chol_solve(A: np.ndarray, B: np.ndarray):
    """Solve A X = B for Hermitian positive-definite A; on failure retries with
    a small ridge and flags it."""
    try:
        return cho_solve(cho_factor(A), B), False
    except LinAlgError:
        A = A + RIDGE * np.eye(A.shape[0], dtype=A.dtype)
        return cho_solve(cho_factor(A), B), True


def mmse_estimate(scenario: Scenario, config: SystemConfig) -> EstimatorResult:
    """Linear MMSE under the prior's marginal second moments C = diag(rho_n beta_n).

    Activity decisions use the per-device row energy against a cutoff derived
    from the configured posterior threshold: the rows of the LMMSE output are
    modelled as zero-mean complex Gaussians whose variance depends on the
    device being active or not, which makes the row energy the sufficient
    statistic of the activity likelihood-ratio test.
    """
    phi, Y = scenario.phi, scenario.Y
    L, N = phi.shape
    M = Y.shape[1]
    beta = config.beta_vec()
    c_diag = scenario.rho * beta
    A = (phi * c_diag[None, :]) @ phi.conj().T + scenario.sigma_w2 * np.eye(L)
    F, regularized = _chol_solve(A, phi * c_diag[None, :])  # (L, N) = A^-1 Phi C
    G = F.conj().T                                          # (N, L) = C Phi^H A^-1
    h_hat = G @ Y

    # Gaussian marginal model of the filter output rows
    B = G @ phi                                             # (N, N) signal gains
    noise_var = scenario.sigma_w2 * np.sum(np.abs(G) ** 2, axis=1)
    gains2 = np.abs(B) ** 2
    own = np.diag(gains2) * beta
    cross = gains2 @ (scenario.rho * beta) - np.diag(gains2) * scenario.rho * beta
    v0 = np.maximum(cross + noise_var, RIDGE)
    v1 = v0 + own
    energy = np.sum(np.abs(h_hat) ** 2, axis=1)
    prec_gap = 1.0 / v0 - 1.0 / v1
    cutoff = np.where(
        prec_gap > 0,
        (logit(config.activity_threshold) - logit(scenario.rho) + M * np.log(v1 / v0)) / np.maximum(prec_gap, RIDGE),
        np.inf,
    )
    return EstimatorResult(h_hat=h_hat, active_hat=energy > cutoff, regularized=regularized)


def oracle_mmse_estimate(scenario: Scenario, config: SystemConfig) -> EstimatorResult:
    """Linear MMSE restricted to the true active set; the performance lower bound."""
    act = np.asarray(scenario.xi).astype(bool)
    N, M = scenario.N, scenario.M
    h_hat = np.zeros((N, M), dtype=complex)
    regularized = False
    if act.any():
        phi_a = scenario.phi[:, act]
        beta_a = config.beta_vec()[act]
        # |A| x |A| ridge form of beta Phi^H (Phi beta Phi^H + sigma^2 I)^-1 Y
        gram = phi_a.conj().T @ phi_a + scenario.sigma_w2 * np.diag(1.0 / beta_a)
        sol, regularized = _chol_solve(gram, phi_a.conj().T @ scenario.Y)
        h_hat[act] = sol
    return EstimatorResult(h_hat=h_hat, active_hat=act.copy(), regularized=regularized)


def plain_gamp(scenario: Scenario, config: SystemConfig, h_true=None) -> EstimatorResult:
    """Flooding GAMP with the sparsity-rate update disabled: the per-edge
    activity estimates stay pinned at rho_n, so the prior is never refined
    across antennas. Activity comes from the posterior slab weights."""
    rec = engine.run(scenario, config, Policy.FULL, pin_rho=True, h_true=h_true)
    return EstimatorResult(
        h_hat=rec.h_hat,
        active_hat=rec.active,
        iterations=rec.iterations,
        msg_updates=rec.msg_updates,
        record=rec,
    )


def hygamp(scenario: Scenario, config: SystemConfig, h_true=None) -> EstimatorResult:
    """Fully parallel message updates: the engine run with the full schedule."""
    return msgamp(scenario, config, Policy.FULL, h_true=h_true)


def msgamp(scenario: Scenario, config: SystemConfig, policy: Policy, h_true=None) -> EstimatorResult:
    """Scheduled-GAMP estimator under the given policy."""
    rec = engine.run(scenario, config, policy, h_true=h_true)
    return EstimatorResult(
        h_hat=rec.h_hat,
        active_hat=rec.active,
        iterations=rec.iterations,
        msg_updates=rec.msg_updates,
        record=rec,
    )
