"""Adaptive momentum control from the sampled SR spectrum.

Per iteration the sample-space Gram matrix T = O^T O (which shares its
nonzero spectrum sigma_1^2 >= sigma_2^2 >= ... with the sampled SR matrix
O O^T) is eigendecomposed and summarized by two indicators:

* the effective spectral dimension
      alpha = (sum_i sigma_i^2)^2 / sum_i sigma_i^4  in [1, rank],
  which counts the dominant spectral directions (1 for a single dominant
  direction, rank for a flat spectrum);
* the principal right-subspace overlap
      beta = | V_alpha(k)^T V_alpha(k-1) |_F
           in [0, sqrt(min(ceil alpha_k, ceil alpha_{k-1}))],
  where V_alpha collects the leading ceil(alpha) eigenvectors.  A large
  overlap means consecutive batches resolve the same principal subspace, so
  the previous update direction is trustworthy.

The momentum weight is then

    mu = 1 - (1 - sqrt(beta / cap)) * (1 - (alpha / rank)^(1/4)),

increasing in both indicators and clamped to [0, 1] against floating-point
drift.  The update direction itself is the ordinary momentum step with
mu_eff = mu, so the adaptive method costs one extra N_s x N_s
eigendecomposition plus a ceil(alpha) x ceil(alpha_prev) product per
iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .estimator import SampleBatch
from .optimizer import OptimizerState, spring_direction


@dataclass
class SpectralSnapshot:
    """Eigen data of T = O^T O at one iteration.

    eigenvalues are sorted nonincreasing (length N_s); V holds the matching
    orthonormal eigenvectors as columns with a deterministic sign gauge
    (largest-magnitude entry of each column is positive); V_alpha is the
    leading ceil(alpha) block.
    """

    eigenvalues: np.ndarray
    V: np.ndarray
    alpha: float
    rank: int
    V_alpha: np.ndarray


def default_rank_tolerance(n_samples: int) -> float:
    """Relative spectrum cutoff N_s * eps, applied to sigma^2_max."""
    return n_samples * np.finfo(np.float64).eps


def spectral_snapshot(batch: SampleBatch, rank_tol: float | None = None) -> SpectralSnapshot:
    """Eigendecompose T = O^T O and extract (alpha, rank, V_alpha).

    Eigenvalues of T below rank_tol * sigma^2_max are treated as zero; alpha
    is computed over the retained eigenvalues only, so alpha <= rank holds
    (a final clamp removes <=1 ulp of rounding drift).  Raises on a
    degenerate batch whose spectrum is entirely below tolerance, which
    signals a constant wavefunction over the batch.
    """
    O = batch.O
    n_s = O.shape[1]
    if n_s < 2:
        raise ValueError("spectral snapshot needs N_s >= 2")
    if rank_tol is None:
        rank_tol = default_rank_tolerance(n_s)
    T = O.T @ O
    w, V = scipy.linalg.eigh(T, check_finite=False, driver="evd")
    order = np.argsort(w)[::-1]
    w = w[order]
    V = V[:, order]
    # deterministic sign gauge for reproducible logs
    flip = V[np.argmax(np.abs(V), axis=0), np.arange(n_s)] < 0
    V[:, flip] *= -1.0
    top = w[0]
    if top <= 0.0:
        raise ValueError("degenerate batch: sampled SR spectrum is zero")
    retained = w > rank_tol * top
    r = int(np.count_nonzero(retained))
    if r == 0:
        raise ValueError("degenerate batch: all eigenvalues below rank tolerance")
    s2 = w[:r]
    alpha = float(s2.sum() ** 2 / np.sum(s2 * s2))
    alpha = min(max(alpha, 1.0), float(r))
    width = math.ceil(alpha)
    return SpectralSnapshot(w, V, alpha, r, V[:, :width])


def subspace_overlap(V_cur: np.ndarray, V_prev: np.ndarray) -> float:
    """Frobenius norm of V_cur^T V_prev for two orthonormal column blocks."""
    if V_cur.shape[0] != V_prev.shape[0]:
        raise ValueError(
            f"subspace bases live in different sample spaces: "
            f"{V_cur.shape[0]} vs {V_prev.shape[0]}"
        )
    return float(np.linalg.norm(V_cur.T @ V_prev))


def adaptive_mu(alpha: float, alpha_prev: float, rank: int, beta: float) -> float:
    """Momentum rule mu = 1 - (1 - sqrt(beta/cap)) (1 - (alpha/rank)^{1/4}).

    cap = sqrt(min(ceil alpha, ceil alpha_prev)) is the attainable maximum of
    the overlap.  The result is clamped to [0, 1]; inputs are checked against
    their domains with a small numerical slack.
    """
    slack = 1e-9
    if not (1.0 - slack <= alpha <= rank + slack):
        raise ValueError(f"alpha={alpha} outside [1, rank={rank}]")
    if alpha_prev < 1.0 - slack:
        raise ValueError(f"alpha_prev={alpha_prev} below 1")
    cap = math.sqrt(min(math.ceil(alpha), math.ceil(alpha_prev)))
    if not (-slack <= beta <= cap + slack):
        raise ValueError(f"beta={beta} outside [0, cap={cap}]")
    beta = min(max(beta, 0.0), cap)
    mu = 1.0 - (1.0 - math.sqrt(beta / cap)) * (1.0 - (alpha / rank) ** 0.25)
    return min(max(mu, 0.0), 1.0)


@dataclass
class PrimeState:
    """OptimizerState plus the spectral history the adaptive rule consumes."""

    opt: OptimizerState
    rank_tol: float | None = None
    alpha_prev: float | None = None
    V_alpha_prev: np.ndarray | None = None
    beta0: float = 1.0


@dataclass
class PrimeStepResult:
    delta: np.ndarray
    mu: float
    alpha: float
    beta: float
    rank: int


def prime_step(batch: SampleBatch, state: PrimeState) -> PrimeStepResult:
    """One adaptive-momentum step.

    At k = 0 the overlap is initialized to beta = 1 (there is no previous
    subspace yet) and the momentum term vanishes anyway because the previous
    direction is zero.  The returned direction is exactly the momentum update
    with mu_eff = mu_k; the caller applies the norm-capped parameter update
    and advances the optimizer state.
    """
    snap = spectral_snapshot(batch, state.rank_tol)
    if state.V_alpha_prev is None:
        beta = state.beta0
        alpha_prev = snap.alpha
    else:
        beta = subspace_overlap(snap.V_alpha, state.V_alpha_prev)
        alpha_prev = state.alpha_prev
    mu = adaptive_mu(snap.alpha, alpha_prev, snap.rank, beta)
    delta = spring_direction(batch, state.opt, mu)
    state.alpha_prev = snap.alpha
    state.V_alpha_prev = snap.V_alpha
    return PrimeStepResult(delta, mu, snap.alpha, beta, snap.rank)
