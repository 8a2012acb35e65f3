"""Monte Carlo and full-batch estimators for energy, gradient and SR matrix.

Per batch of N_s samples the module builds the compact centered quantities

    Ebar_i = (E_loc(x_i) - mean E_loc) / sqrt(N_s - 1)
    O[:,i] = (grad log|psi(x_i)| - mean grad) / sqrt(N_s - 1)

so that g(theta; B) = 2 O Ebar is the standard gradient estimator and
O O^T is the sampled SR matrix.  Batches use sample centering (divide by
N_s - 1); the exact full-batch quantities use population centering over the
enumerated distribution pi_theta.  Keeping those two conventions distinct is
what makes both estimators unbiased under i.i.d. sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hamiltonian import LatticeModel, enumerate_configs, local_energies


@dataclass
class SampleBatch:
    """Centered, 1/sqrt(N_s - 1)-scaled batch quantities.

    local_energies holds the values actually used to build Ebar (after
    clipping, when enabled); energy_mean is their mean.  raw_energy_mean and
    raw_energy_variance always describe the unclipped local energies, since
    clipping is a gradient-stabilization device and not an estimator change.
    """

    configs: np.ndarray
    local_energies: np.ndarray
    energy_mean: float
    O: np.ndarray
    Ebar: np.ndarray
    raw_energy_mean: float
    raw_energy_variance: float

    @property
    def n_samples(self) -> int:
        return len(self.local_energies)

    @property
    def n_params(self) -> int:
        return self.O.shape[0]


@dataclass
class FullBatchQuantities:
    """Exact (population) energy, gradient and SR matrix at one theta."""

    energy: float
    gradient: np.ndarray
    sr_matrix: np.ndarray
    centered_factor: np.ndarray
    """Matrix M with S = M M^T and g = 2 M Ebar_w; columns are
    sqrt(pi_x)-weighted centered log-gradients.  Kept because range/kernel
    questions about S are answered much more accurately through its factor."""
    energy_variance: float = 0.0


def clip_local_energies(values: np.ndarray, n_std: float) -> np.ndarray:
    """Mean-centered clipping: v -> m + clamp(v - m, +-n_std * s).

    s is the sample standard deviation (1/(N_s - 1) normalization).  A zero
    spread or an infinite n_std leaves the input unchanged.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or len(values) < 2:
        raise ValueError("need a vector of at least 2 local energies")
    if not np.isfinite(n_std):
        return values.copy()
    m = values.mean()
    s = values.std(ddof=1)
    if s == 0.0:
        return values.copy()
    return m + np.clip(values - m, -n_std * s, n_std * s)


def build_batch(
    model: LatticeModel,
    psi,
    theta: np.ndarray | None,
    samples: np.ndarray,
    clip_std: float | None = None,
) -> SampleBatch:
    """Local energies, centered O matrix and Ebar vector for a sample batch.

    psi must expose log_abs_batch and grad_log_abs_batch; when psi is bound
    to an ansatz the theta argument is ignored (pass None).  clip_std, when
    set, clips the local energies before centering; it is disabled in all
    theory-validation paths.
    """
    samples = np.asarray(samples, dtype=np.float64)
    n = len(samples)
    if n < 2:
        raise ValueError("batch centering requires N_s >= 2")
    eloc = local_energies(model, psi, samples)
    raw_mean = float(eloc.mean())
    raw_var = float(eloc.var())
    used = clip_local_energies(eloc, clip_std) if clip_std is not None else eloc
    mean = float(used.mean())
    scale = 1.0 / np.sqrt(n - 1.0)
    ebar = (used - mean) * scale
    G = psi.grad_log_abs_batch(samples)  # (N_p, n)
    O = (G - G.mean(axis=1, keepdims=True)) * scale
    return SampleBatch(
        configs=samples,
        local_energies=used,
        energy_mean=mean,
        O=O,
        Ebar=ebar,
        raw_energy_mean=raw_mean,
        raw_energy_variance=raw_var,
    )


def batch_from_scores(scores: np.ndarray, eloc: np.ndarray) -> SampleBatch:
    """SampleBatch from raw per-sample score vectors (rows) plus local
    energies; used by the fixed-SR-matrix constructions where the score
    coefficients play the role of grad log|psi|."""
    scores = np.asarray(scores, dtype=np.float64)
    eloc = np.asarray(eloc, dtype=np.float64)
    n = len(eloc)
    if scores.shape[0] != n or n < 2:
        raise ValueError("need matching scores/energies with N_s >= 2")
    scale = 1.0 / np.sqrt(n - 1.0)
    mean = float(eloc.mean())
    O = (scores.T - scores.T.mean(axis=1, keepdims=True)) * scale
    return SampleBatch(
        configs=scores,
        local_energies=eloc,
        energy_mean=mean,
        O=O,
        Ebar=(eloc - mean) * scale,
        raw_energy_mean=mean,
        raw_energy_variance=float(eloc.var()),
    )


def gradient_estimate(batch: SampleBatch) -> np.ndarray:
    """g(theta; B) = 2 O Ebar."""
    return 2.0 * (batch.O @ batch.Ebar)


def _population_pieces(model: LatticeModel, psi):
    n = model.n_sites
    if n > 14:
        raise ValueError(f"full-batch quantities limited to N <= 14, got N={n}")
    configs = enumerate_configs(n)
    la = np.asarray(psi.log_abs_batch(configs), dtype=np.float64)
    finite = np.isfinite(la)
    if not np.any(finite):
        raise ValueError("wavefunction vanishes on all configurations")
    shift = la[finite].max()
    with np.errstate(invalid="ignore"):
        w = np.where(finite, np.exp(2.0 * (la - shift)), 0.0)
    pi = w / w.sum()
    support = pi > 0.0
    # local energies are only defined off nodes; nodes carry zero weight
    eloc = np.zeros(len(configs))
    eloc[support] = local_energies(model, psi, configs[support])
    energy = float(pi @ eloc)
    sqrtpi = np.sqrt(pi)
    ebar_w = (eloc - energy) * sqrtpi
    G = psi.grad_log_abs_batch(configs)  # (N_p, 2^N); columns at nodes get pi=0
    if G.shape[0]:
        G = np.where(support[None, :], G, 0.0)
        M = (G - (G @ pi)[:, None]) * sqrtpi[None, :]
    else:
        M = np.zeros((0, len(configs)))
    return energy, M, ebar_w


def full_batch_gradient(model: LatticeModel, psi) -> tuple[float, np.ndarray]:
    """Exact (L, g) without forming the N_p x N_p SR matrix; the cheap path
    for per-iteration full gradient monitoring."""
    energy, M, ebar_w = _population_pieces(model, psi)
    return energy, 2.0 * (M @ ebar_w)


def full_batch_quantities(model: LatticeModel, psi, theta=None) -> FullBatchQuantities:
    """Exact expectations over the enumerated pi_theta (population centering).

    Feasible for N <= 14: the cost is one wavefunction and gradient sweep
    over all 2^N configurations plus an N_p x N_p Gram product.
    """
    energy, M, ebar_w = _population_pieces(model, psi)
    gradient = 2.0 * (M @ ebar_w)
    S = M @ M.T
    return FullBatchQuantities(energy, gradient, S, M, float(ebar_w @ ebar_w))


def range_basis(factor: np.ndarray, rank_tol: float | None = None) -> np.ndarray:
    """Orthonormal basis of the numerical range of S = factor factor^T.

    Computed from the SVD of the factor itself (never from the squared
    matrix), with the relative tolerance max(factor.shape) * eps on singular
    values, so that kernel residuals near machine precision are measurable.
    """
    U, s, _ = np.linalg.svd(factor, full_matrices=False)
    if rank_tol is None:
        rank_tol = max(factor.shape) * np.finfo(np.float64).eps
    if s.size == 0 or s[0] == 0.0:
        return U[:, :0]
    return U[:, s > rank_tol * s[0]]


def kernel_residual(factor: np.ndarray, vec: np.ndarray) -> float:
    """|P_K vec| / |vec| where P_K projects onto the numerical kernel of
    factor factor^T.  Zero input returns 0."""
    nrm = np.linalg.norm(vec)
    if nrm == 0.0:
        return 0.0
    Ur = range_basis(factor)
    resid = vec - Ur @ (Ur.T @ vec)
    return float(np.linalg.norm(resid) / nrm)
