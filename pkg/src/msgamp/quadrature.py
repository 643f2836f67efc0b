"""Numerical-integration reference posteriors for the scalar denoisers.

These routines evaluate the denoiser posteriors by trapezoid quadrature on the
real and imaginary axes instead of the closed-form Gaussian algebra, so they
serve as an independent check of the denoiser implementations (CLI subcommand
``oracle-check`` and the test suite).

Valid while the spike/slab weights stay representable in float64, i.e.
|r_hat|^2 / (q_r + beta) below roughly 700; callers should keep parameters in
that range (the test grids do).
"""

from __future__ import annotations

import numpy as np


def _product_moments_1d(c1, w1, c2, w2, n_nodes=2049, span=9.0):
    """Zeroth/first/second moments of f(x) = exp(-(x-c1)^2/w1 - (x-c2)^2/w2).

    w1, w2 are full complex variances (each real axis carries w/2). The grid
    covers both centers plus `span` product-Gaussian standard deviations; the
    moments come from per-row trapezoid sums.
    """
    c1 = np.atleast_1d(np.asarray(c1, dtype=float))
    c2 = np.atleast_1d(np.asarray(c2, dtype=float))
    w1 = np.atleast_1d(np.asarray(w1, dtype=float))
    w2 = np.atleast_1d(np.asarray(w2, dtype=float))
    c1, c2, w1, w2 = np.broadcast_arrays(c1, c2, w1, w2)

    mu = (c1 * w2 + c2 * w1) / (w1 + w2)
    sd = np.sqrt(w1 * w2 / (2.0 * (w1 + w2)))
    lo = np.minimum(np.minimum(c1, c2), mu) - span * sd
    hi = np.maximum(np.maximum(c1, c2), mu) + span * sd

    t = np.linspace(0.0, 1.0, n_nodes)
    x = lo[:, None] + (hi - lo)[:, None] * t
    f = np.exp(-((x - c1[:, None]) ** 2) / w1[:, None] - ((x - c2[:, None]) ** 2) / w2[:, None])
    i0 = np.trapezoid(f, x, axis=1)
    i1 = np.trapezoid(f * x, x, axis=1)
    i2 = np.trapezoid(f * x * x, x, axis=1)
    return i0, i1, i2


def bg_posterior_quadrature(r_hat, q_r, rho_hat, beta, n_nodes=2049, span=9.0):
    """Spike-and-slab posterior moments by quadrature over the slab component.

    The spike contributes a point mass at h = 0 handled exactly; the slab
    integrals are numerical. Returns (mean, var, pi) arrays.
    """
    r_hat = np.atleast_1d(np.asarray(r_hat, dtype=complex))
    q_r = np.atleast_1d(np.asarray(q_r, dtype=float))
    rho_hat = np.atleast_1d(np.asarray(rho_hat, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    r_hat, q_r, rho_hat, beta = np.broadcast_arrays(r_hat, q_r, rho_hat, beta)

    zeros = np.zeros_like(q_r)
    i0x, i1x, i2x = _product_moments_1d(zeros, beta, r_hat.real, q_r, n_nodes, span)
    i0y, i1y, i2y = _product_moments_1d(zeros, beta, r_hat.imag, q_r, n_nodes, span)

    abs2 = r_hat.real ** 2 + r_hat.imag ** 2
    w_slab = rho_hat * i0x * i0y / (np.pi ** 2 * beta * q_r)
    w_spike = (1.0 - rho_hat) * np.exp(-abs2 / q_r) / (np.pi * q_r)
    z = w_slab + w_spike
    if np.any(z == 0.0):
        raise ValueError("quadrature weights underflowed; parameters out of supported range")
    pi = w_slab / z

    ex = i1x / i0x
    ey = i1y / i0y
    ex2 = i2x / i0x
    ey2 = i2y / i0y
    mean = pi * (ex + 1j * ey)
    second = pi * (ex2 + ey2)
    var = second - (mean.real ** 2 + mean.imag ** 2)
    return mean, var, pi


def awgn_posterior_quadrature(y, p, q_p, sigma_w2, n_nodes=2049, span=9.0):
    """Conjugate-Gaussian output posterior moments by quadrature.

    Returns (z_tilde, q_z, log_partition); log_partition is the log of
    integral CN(y; z, sigma_w2) CN(z; p, q_p) dz, used by the
    finite-difference check of the scaled residual.
    """
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    p = np.atleast_1d(np.asarray(p, dtype=complex))
    q_p = np.atleast_1d(np.asarray(q_p, dtype=float))
    sig = np.full_like(q_p, float(sigma_w2))
    y, p, q_p, sig = np.broadcast_arrays(y, p, q_p, sig)

    i0x, i1x, i2x = _product_moments_1d(y.real, sig, p.real, q_p, n_nodes, span)
    i0y, i1y, i2y = _product_moments_1d(y.imag, sig, p.imag, q_p, n_nodes, span)

    mean = i1x / i0x + 1j * (i1y / i0y)
    var = i2x / i0x + i2y / i0y - (mean.real ** 2 + mean.imag ** 2)
    log_partition = np.log(i0x) + np.log(i0y) - np.log(np.pi * sig) - np.log(np.pi * q_p)
    return mean, var, log_partition
