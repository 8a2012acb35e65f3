"""Iteration maps of the SR optimizer family.

All directions descend the same regularized projected-increment objective

    argmin_d  |d - mu d_prev|^2 + (1/lambda) |O^T d + Ebar|^2
            = (lambda I + O O^T)^{-1} (lambda mu d_prev - O Ebar),

whose closed form lives in parameter space (N_p x N_p).  The
Sherman-Morrison-Woodbury rearrangement moves the solve into sample space,

    d = mu d_prev - O (lambda I + O^T O + (1/N_s) 1 1^T)^{-1} zeta,
    zeta = mu O^T d_prev + Ebar,

where the rank-one 1 1^T term exploits O 1 = 0 (centering) and therefore
changes nothing in exact arithmetic while guarding the factorization against
the centering null direction.  spring_direction solves whichever space is
smaller; the two paths agree to solver precision and both are tested.

Momentum mu = 0 with zero memory is MinSR (minimum-norm regularized SR);
feeding the exact full-batch S and g instead of the sampled ones gives the
noise-free iteration used in the descent/convergence experiments.  Updates
are applied through an inverse-time step schedule and a trust-region-style
norm cap |applied step| <= sqrt(C).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .estimator import FullBatchQuantities, SampleBatch, gradient_estimate


@dataclass
class OptimizerState:
    """Mutable per-run optimizer memory.

    delta_prev starts at zero (the first update is then a plain regularized
    SR step); eta follows eta0 / (1 + c k), nonincreasing in k.
    """

    n_params: int
    lambda_: float = 1e-3
    mu: float = 0.99
    eta0: float = 0.02
    c: float = 1e-4
    norm_constraint: float = np.inf
    k: int = 0
    delta_prev: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.lambda_ <= 0:
            raise ValueError("lambda must be positive")
        if not (0.0 <= self.mu <= 1.0):
            raise ValueError("mu must lie in [0, 1]")
        if self.norm_constraint <= 0:
            raise ValueError("norm_constraint must be positive")
        if self.delta_prev is None:
            self.delta_prev = np.zeros(self.n_params)

    def advance(self, delta: np.ndarray) -> None:
        self.delta_prev = delta
        self.k += 1


def step_size(state: OptimizerState) -> float:
    """Inverse-time schedule eta_k = eta0 / (1 + c k)."""
    return state.eta0 / (1.0 + state.c * state.k)


def _solve_spd(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Cholesky solve with a tiny diagonal jitter retry.

    The jitter (1e-12 * trace / n) only fires if the factorization fails,
    which a regularization lambda >= 1e-8 makes practically impossible.
    """
    try:
        cf = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        n = A.shape[0]
        jitter = 1e-12 * np.trace(A) / n
        cf = scipy.linalg.cho_factor(
            A + jitter * np.eye(n), lower=True, check_finite=False
        )
    return scipy.linalg.cho_solve(cf, rhs, check_finite=False)


def spring_direction_sample_space(
    O: np.ndarray,
    Ebar: np.ndarray,
    delta_prev: np.ndarray,
    lam: float,
    mu: float,
    stabilize: bool = True,
) -> np.ndarray:
    """SMW form: d = mu d_prev - O (lam I + O^T O [+ 1 1^T / N_s])^{-1} zeta."""
    n_s = O.shape[1]
    zeta = Ebar if mu == 0.0 else mu * (O.T @ delta_prev) + Ebar
    K = O.T @ O
    K[np.diag_indices_from(K)] += lam
    if stabilize:
        K += 1.0 / n_s
    y = _solve_spd(K, zeta)
    d = -(O @ y)
    if mu != 0.0:
        d += mu * delta_prev
    return d


def spring_direction_parameter_space(
    O: np.ndarray,
    Ebar: np.ndarray,
    delta_prev: np.ndarray,
    lam: float,
    mu: float,
) -> np.ndarray:
    """Direct closed form: d = (lam I + O O^T)^{-1} (lam mu d_prev - O Ebar)."""
    A = O @ O.T
    A[np.diag_indices_from(A)] += lam
    rhs = -(O @ Ebar)
    if mu != 0.0:
        rhs += lam * mu * delta_prev
    return _solve_spd(A, rhs)


def spring_direction(
    batch: SampleBatch, state: OptimizerState, mu_eff: float
) -> np.ndarray:
    """SPRING update direction for one batch with momentum weight mu_eff.

    mu_eff is a per-iteration input so the same path serves fixed-momentum
    runs and the adaptive rule.  Solves in whichever of sample space or
    parameter space is smaller; the results coincide in exact arithmetic.
    """
    n_p, n_s = batch.O.shape
    if n_s <= n_p:
        return spring_direction_sample_space(
            batch.O, batch.Ebar, state.delta_prev, state.lambda_, mu_eff
        )
    return spring_direction_parameter_space(
        batch.O, batch.Ebar, state.delta_prev, state.lambda_, mu_eff
    )


def minsr_direction(batch: SampleBatch, lam: float) -> np.ndarray:
    """Minimum-norm regularized SR step: -O (lam I + O^T O)^{-1} Ebar."""
    zero = np.zeros(batch.n_params)
    return spring_direction_sample_space(batch.O, batch.Ebar, zero, lam, 0.0)


def sr_direction(batch: SampleBatch, lam: float) -> np.ndarray:
    """Regularized SR solved in parameter space; identical to MinSR through
    the Woodbury identity, kept as an independent route."""
    zero = np.zeros(batch.n_params)
    return spring_direction_parameter_space(batch.O, batch.Ebar, zero, lam, 0.0)


def full_spring_direction(
    fbq: FullBatchQuantities, state: OptimizerState, mu: float
) -> np.ndarray:
    """Noise-free iteration: (lam I + S)^{-1} (lam mu d_prev - g / 2)."""
    A = fbq.sr_matrix.copy()
    A[np.diag_indices_from(A)] += state.lambda_
    rhs = -0.5 * fbq.gradient
    if mu != 0.0:
        rhs = rhs + state.lambda_ * mu * state.delta_prev
    return _solve_spd(A, rhs)


def sgd_direction(batch: SampleBatch) -> np.ndarray:
    """Plain stochastic gradient baseline, -g/2 = -O Ebar, matching the SR
    family's sign and scale convention."""
    return -0.5 * gradient_estimate(batch)


def apply_update(
    theta: np.ndarray, delta: np.ndarray, eta: float, norm_constraint: float = np.inf
) -> np.ndarray:
    """theta + delta * min(eta, sqrt(C) / |delta|).

    The applied change never exceeds sqrt(C) in 2-norm; a zero direction
    returns theta unchanged.
    """
    nrm = float(np.linalg.norm(delta))
    if nrm == 0.0:
        return np.array(theta, copy=True)
    mult = min(eta, np.sqrt(norm_constraint) / nrm) if np.isfinite(norm_constraint) else eta
    return theta + delta * mult
