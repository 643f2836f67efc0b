"""Scalar posterior computations: spike-and-slab input denoiser, AWGN output denoiser."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

# Variance floor before divisions; GAMP variances can collapse at high SNR.
VAR_FLOOR = 1e-12
# The logistic map saturates beyond this and exp() would overflow.
LLR_CLAMP = 30.0


@dataclass(frozen=True)
class PseudoPrior:
    """Inputs of the spike-and-slab posterior at one (device, antenna) edge."""

    r_hat: complex   # pseudo-observation
    q_r: float       # pseudo-observation variance
    rho_hat: float   # activity estimate in [0, 1]
    beta: float      # slab (channel) variance


@dataclass(frozen=True)
class PosteriorMoments:
    mean: complex
    var: float


def cn_pdf(x, mean, var) -> float:
    """Circularly-symmetric complex Gaussian density at x."""
    if not var > 0:
        raise ValueError(f"var must be positive, got {var}")
    return float(np.exp(-abs(x - mean) ** 2 / var) / (np.pi * var))


def log_cn_pdf(x, mean, var) -> float:
    if not var > 0:
        raise ValueError(f"var must be positive, got {var}")
    return float(-abs(x - mean) ** 2 / var - np.log(np.pi * var))


def bg_moments(r_hat, q_r, rho_hat, beta):
    """Posterior moments of the Bernoulli-Gaussian prior observed through a
    complex-Gaussian pseudo-channel CN(r_hat | h, q_r).

    Vectorized over broadcastable array inputs. The slab weight is formed in
    the log domain so large |r_hat|^2 / q_r never overflows.

    Returns (mean, var, pi) with pi the posterior slab probability.
    """
    r_hat = np.asarray(r_hat, dtype=complex)
    q_r = np.asarray(q_r, dtype=float)
    rho_hat = np.asarray(rho_hat, dtype=float)
    beta = np.asarray(beta, dtype=float)

    abs2 = r_hat.real ** 2 + r_hat.imag ** 2
    with np.errstate(divide="ignore"):
        prior_logodds = np.log(rho_hat) - np.log1p(-rho_hat)
    # log CN(r; 0, q_r + beta) - log CN(r; 0, q_r), the per-edge evidence
    evidence = abs2 * (1.0 / q_r - 1.0 / (q_r + beta)) + np.log(q_r / (q_r + beta))
    pi = expit(prior_logodds + evidence)

    m_slab = (beta / (beta + q_r)) * r_hat
    v_slab = beta * q_r / (beta + q_r)
    mean = pi * m_slab
    second = pi * (m_slab.real ** 2 + m_slab.imag ** 2 + v_slab)
    var = np.maximum(second - (mean.real ** 2 + mean.imag ** 2), 0.0)
    return mean, var, pi


def input_denoise(pp: PseudoPrior):
    """Spike-and-slab posterior moments plus the posterior slab weight pi."""
    r = complex(pp.r_hat)
    if not (np.isfinite(r.real) and np.isfinite(r.imag)):
        raise ValueError(f"r_hat must be finite, got {pp.r_hat}")
    if not pp.q_r > 0:
        raise ValueError(f"q_r must be positive, got {pp.q_r}")
    if not 0.0 <= pp.rho_hat <= 1.0:
        raise ValueError(f"rho_hat must lie in [0, 1], got {pp.rho_hat}")
    if not pp.beta > 0:
        raise ValueError(f"beta must be positive, got {pp.beta}")
    mean, var, pi = bg_moments(r, pp.q_r, pp.rho_hat, pp.beta)
    return PosteriorMoments(mean=complex(mean), var=float(var)), float(pi)


def output_denoise(y, p, q_p, sigma_w2):
    """AWGN posterior of the noiseless output z given y; conjugate-Gaussian update.

    Works elementwise on scalars or arrays. Returns (z_tilde, q_z) with
    q_z = sigma_w2 * q_p / (q_p + sigma_w2) < min(q_p, sigma_w2).
    """
    q_p = np.asarray(q_p, dtype=float)
    if np.any(~(q_p > 0)):
        raise ValueError("q_p must be positive")
    if not sigma_w2 > 0:
        raise ValueError(f"sigma_w2 must be positive, got {sigma_w2}")
    z_tilde = (y * q_p + sigma_w2 * p) / (q_p + sigma_w2)
    q_z = sigma_w2 * q_p / (q_p + sigma_w2)
    if np.isscalar(p) or np.ndim(p) == 0:
        return complex(z_tilde), float(q_z)
    return z_tilde, q_z


def scaled_residual(z_tilde, p, q_p, q_z):
    """GAMP scaled residual s_hat = (z_tilde - p)/q_p and its variance
    q_s = (1 - q_z/q_p)/q_p, elementwise."""
    q_p = np.asarray(q_p, dtype=float)
    if np.any(~(q_p > 0)):
        raise ValueError("q_p must be positive")
    s_hat = (z_tilde - p) / q_p
    q_s = (1.0 - q_z / q_p) / q_p
    if np.isscalar(p) or np.ndim(p) == 0:
        return complex(s_hat), float(q_s)
    return s_hat, q_s
