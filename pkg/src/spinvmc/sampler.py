"""Configuration sampling from pi_theta ∝ |psi_theta|^2.

Two regimes:

* direct: enumerate all 2^N configurations, normalize the probabilities with
  a max-shift in log space, and draw i.i.d. samples by inverse-CDF lookup.
  This is exact i.i.d. sampling and is the default for every
  theory-validation experiment (no Markov-chain non-stationarity).
* metropolis: single-spin-flip Metropolis chains, the physical default for
  larger systems.  Production runs advance one independent walker per sample
  slot; acceptance uses log-ratio arithmetic only.

Sampling from the shifted-Gaussian counterexample lives here too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hamiltonian import enumerate_configs
from .wavefunction import GaussianShiftAnsatz, RBMAnsatz, log_cosh

DIRECT_MAX_SITES = 20


@dataclass
class SamplerConfig:
    """How a run draws its batches.

    mode "direct" requires N <= 20; the metropolis defaults (burn_in 3000,
    steps_between 10) follow standard practice for lattice runs.
    """

    mode: str = "direct"
    n_samples: int = 1000
    burn_in: int = 3000
    steps_between: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if self.mode not in ("direct", "metropolis"):
            raise ValueError(f"unknown sampler mode {self.mode!r}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if self.burn_in < 0 or self.steps_between < 1:
            raise ValueError("burn_in must be >= 0 and steps_between >= 1")


def direct_sample(psi, n_sites: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. configurations from pi ∝ exp(2 log|psi|) by full enumeration.

    Probabilities are formed with a max-shift for stability; configurations
    with psi = 0 get probability exactly zero.  Deterministic given rng state.
    """
    if n_sites > DIRECT_MAX_SITES:
        raise ValueError(f"direct sampling limited to N <= {DIRECT_MAX_SITES}")
    configs = enumerate_configs(n_sites)
    la = np.asarray(psi.log_abs_batch(configs), dtype=np.float64)
    finite = np.isfinite(la)
    if not np.any(finite):
        raise ValueError("all amplitudes are zero; nothing to sample")
    shift = la[finite].max()
    with np.errstate(invalid="ignore"):
        p = np.where(finite, np.exp(2.0 * (la - shift)), 0.0)
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    return configs[idx]


def metropolis_sample(
    psi, current: np.ndarray, n_steps: int, rng: np.random.Generator
) -> np.ndarray:
    """Advance a single-spin-flip Metropolis chain n_steps updates.

    Each step proposes flipping one uniformly chosen site and accepts with
    probability min(1, exp(2 (log|psi(x')| - log|psi(x)|))); a proposal onto
    a node (psi = 0) is never accepted.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    x = np.array(current, dtype=np.float64)
    n_sites = len(x)
    la = psi.log_abs(x)
    sites = rng.integers(0, n_sites, size=n_steps)
    logu = np.log(rng.random(n_steps))
    for step in range(n_steps):
        j = sites[step]
        x[j] = -x[j]
        la_new = psi.log_abs(x)
        if la_new == -np.inf or logu[step] >= 2.0 * (la_new - la):
            x[j] = -x[j]  # reject
        else:
            la = la_new
    return x


def gaussian_sample(
    ansatz: GaussianShiftAnsatz, theta: np.ndarray, n: int, rng: np.random.Generator
) -> np.ndarray:
    """n i.i.d. draws from N(A theta, Sigma) via the precomputed Cholesky factor."""
    return ansatz.sample(theta, n, rng)


class MetropolisWalkers:
    """An ensemble of independent single-spin-flip walkers for an RBM.

    One walker per sample slot; all walkers advance in lockstep with the
    hidden-unit inputs t = b + W x maintained incrementally, so one sweep of
    proposals costs O(n_walkers * D) instead of a full wavefunction
    re-evaluation.  theta is treated as fixed between set_theta calls.
    """

    def __init__(
        self,
        ansatz: RBMAnsatz,
        theta: np.ndarray,
        n_walkers: int,
        rng: np.random.Generator,
    ):
        self.ansatz = ansatz
        self.rng = rng
        self.n_walkers = n_walkers
        n = ansatz.n_visible
        self.x = 1.0 - 2.0 * rng.integers(0, 2, size=(n_walkers, n)).astype(np.float64)
        self.set_theta(theta)

    def set_theta(self, theta: np.ndarray) -> None:
        self.theta = np.asarray(theta, dtype=np.float64)
        self.a, self.b, self.W = self.ansatz.unpack(self.theta)
        self.t = self.ansatz.hidden_inputs(self.theta, self.x)
        self._lc = log_cosh(self.t).sum(axis=1)

    def advance(self, n_steps: int) -> np.ndarray:
        """n_steps proposal rounds (one proposed flip per walker per round);
        returns the current configurations (a copy)."""
        nw, n = self.x.shape
        for _ in range(n_steps):
            sites = self.rng.integers(0, n, size=nw)
            xj = self.x[np.arange(nw), sites]
            dt = -2.0 * xj[:, None] * self.W.T[sites]  # (nw, D)
            t_new = self.t + dt
            lc_new = log_cosh(t_new).sum(axis=1)
            dlog = -2.0 * self.a[sites] * xj + lc_new - self._lc
            accept = np.log(self.rng.random(nw)) < 2.0 * dlog
            rows = np.nonzero(accept)[0]
            self.x[rows, sites[rows]] *= -1.0
            self.t[rows] = t_new[rows]
            self._lc[rows] = lc_new[rows]
        return self.x.copy()
