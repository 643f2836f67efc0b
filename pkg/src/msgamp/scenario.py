"""Problem-instance generation: pilots, sparse activity, channels, received signal."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class SystemConfig:
    """Scenario and algorithm constants for one simulation setup."""

    N: int = 128                # devices
    M: int = 32                 # BS antennas
    L: int = 64                 # pilot sequence length
    snr_db: float = 10.0        # average SNR; noise variance = 10**(-snr_db/10)
    rho_range: tuple[float, float] = (0.01, 0.05)  # activity-probability interval
    beta: float | np.ndarray = 1.0  # per-device channel variance, scalar or length-N
    activity_threshold: float = 0.9
    max_iters: int = 50
    tol_eps: float = 1e-4
    # Step size on the scaled-residual update; the undamped recursion (1.0)
    # oscillates at high SNR once the activity feedback saturates.
    damping: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if min(self.N, self.M, self.L) < 1:
            raise ValueError("N, M, L must all be positive")
        lo, hi = self.rho_range
        if not (0.0 < lo <= hi < 1.0):
            raise ValueError(f"rho_range must satisfy 0 < lo <= hi < 1, got {self.rho_range}")
        if not (0.0 < self.activity_threshold < 1.0):
            raise ValueError("activity_threshold must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.tol_eps <= 0.0:
            raise ValueError("tol_eps must be positive")
        if not (0.0 < self.damping <= 1.0):
            raise ValueError("damping must lie in (0, 1]")
        if np.any(np.asarray(self.beta, dtype=float) <= 0.0):
            raise ValueError("beta must be positive")

    @property
    def sigma_w2(self) -> float:
        return 10.0 ** (-self.snr_db / 10.0)

    def beta_vec(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.beta, dtype=float), (self.N,)).copy()


@dataclass
class Scenario:
    """One problem realization; arrays are treated as immutable after creation."""

    phi: np.ndarray      # (L, N) pilot matrix, unit-norm columns
    rho: np.ndarray      # (N,) per-device activity probabilities
    xi: np.ndarray       # (N,) 0/1 activity indicators
    H: np.ndarray        # (N, M) channels; row n is zero whenever xi[n] == 0
    Y: np.ndarray        # (L, M) received signal
    sigma_w2: float

    @property
    def L(self) -> int:
        return self.phi.shape[0]

    @property
    def N(self) -> int:
        return self.phi.shape[1]

    @property
    def M(self) -> int:
        return self.Y.shape[1]


def generate_pilots(L: int, N: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-modulus pilot matrix exp(j*pi*kappa)/sqrt(L), kappa ~ U[-1, 1] per entry."""
    kappa = rng.uniform(-1.0, 1.0, size=(L, N))
    return np.exp(1j * np.pi * kappa) / np.sqrt(L)


def sample_activity(rho, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli activity draws with P(xi_n = 1) = rho_n."""
    rho = np.asarray(rho, dtype=float)
    return (rng.random(rho.shape) < rho).astype(np.int64)


def sample_channels(xi, beta, M: int, rng: np.random.Generator) -> np.ndarray:
    """Rows of active devices drawn i.i.d. CN(0, beta_n); inactive rows exactly zero.

    The full (N, M) Gaussian block is drawn regardless of xi so that the stream
    consumption (and thus everything sampled after it) does not depend on the
    activity pattern.
    """
    xi = np.asarray(xi)
    N = xi.shape[0]
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (N,))
    g = rng.standard_normal((N, M)) + 1j * rng.standard_normal((N, M))
    return np.sqrt(beta / 2.0)[:, None] * g * (xi[:, None] != 0)


def synthesize(config: SystemConfig, seed=None) -> Scenario:
    """Build a full Scenario from config.

    Uses one root seed (config.seed unless overridden) with independent child
    streams for pilots, activity, channels and noise, so each component can be
    regenerated on its own.
    """
    entropy = config.seed if seed is None else seed
    root = entropy if isinstance(entropy, np.random.SeedSequence) else np.random.SeedSequence(entropy)
    ss_pilots, ss_activity, ss_channels, ss_noise = root.spawn(4)

    phi = generate_pilots(config.L, config.N, np.random.default_rng(ss_pilots))
    rng_act = np.random.default_rng(ss_activity)
    lo, hi = config.rho_range
    rho = rng_act.uniform(lo, hi, config.N)
    xi = sample_activity(rho, rng_act)
    H = sample_channels(xi, config.beta_vec(), config.M, np.random.default_rng(ss_channels))
    rng_noise = np.random.default_rng(ss_noise)
    w = rng_noise.standard_normal((config.L, config.M)) + 1j * rng_noise.standard_normal((config.L, config.M))
    Y = phi @ H + np.sqrt(config.sigma_w2 / 2.0) * w
    return Scenario(phi=phi, rho=rho, xi=xi, H=H, Y=Y, sigma_w2=config.sigma_w2)


def scenario_hash(scenario: Scenario) -> str:
    """Short digest over all realization arrays; equal scenarios hash equal."""
    h = hashlib.sha256()
    for a in (scenario.phi, scenario.rho, scenario.xi, scenario.H, scenario.Y):
        h.update(np.ascontiguousarray(a).tobytes())
    h.update(np.float64(scenario.sigma_w2).tobytes())
    return h.hexdigest()[:16]


def _complex_to_pairs(a: np.ndarray) -> list:
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _pairs_to_complex(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def save_scenario(scenario: Scenario, path) -> None:
    """Write a scenario as a self-describing JSON file (complex as [re, im])."""
    doc = {
        "format": "msgamp-scenario",
        "version": 1,
        "L": scenario.L,
        "N": scenario.N,
        "M": scenario.M,
        "sigma_w2": float(scenario.sigma_w2),
        "rho": scenario.rho.tolist(),
        "xi": scenario.xi.astype(int).tolist(),
        "phi": _complex_to_pairs(scenario.phi),
        "H": _complex_to_pairs(scenario.H),
        "Y": _complex_to_pairs(scenario.Y),
    }
    Path(path).write_text(json.dumps(doc))


def load_scenario(path) -> Scenario:
    """Read a scenario written by save_scenario; round-trips bit-exactly."""
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "msgamp-scenario":
        raise ValueError(f"{path}: not a scenario file")
    L, N, M = doc["L"], doc["N"], doc["M"]
    sc = Scenario(
        phi=_pairs_to_complex(doc["phi"]),
        rho=np.asarray(doc["rho"], dtype=float),
        xi=np.asarray(doc["xi"], dtype=np.int64),
        H=_pairs_to_complex(doc["H"]),
        Y=_pairs_to_complex(doc["Y"]),
        sigma_w2=float(doc["sigma_w2"]),
    )
    if sc.phi.shape != (L, N) or sc.H.shape != (N, M) or sc.Y.shape != (L, M):
        raise ValueError(f"{path}: inconsistent array shapes")
    return sc
