"""Kernel-drift dynamics of the momentum iteration under a fixed SR matrix.

Both analytic wavefunction families (shifted Gaussian, pure phase) have an
SR matrix S that does not depend on theta and whose kernel contains
kernel(A) for every sampled batch as well.  Projecting the momentum
iteration

    d_k = (lam I + S_k)^{-1} (lam mu d_{k-1} - g_k / 2),   g_k in range(S_k)

onto that common kernel wipes out both S_k and g_k and leaves the pure
recursion

    P_K d_k = mu P_K d_{k-1}  =>  P_K d_k = mu^k P_K d_0,
    P_K (theta_{k+1} - theta_1) = (sum_{m=1}^{k} eta_m mu^m) P_K d_0.

With mu < 1 the kernel component stays geometrically bounded; with mu = 1 it
grows like the partial sums of the step sizes, which diverge for the usual
eta_k ~ 1/k schedules.  The harness below reproduces this dichotomy exactly:
a controlled kernel excitation is injected into d_0 (rounding noise would
excite the same mechanism, but a reproducible experiment needs a
deterministic, seed-independent excitation), and the iteration runs in an
orthonormal basis aligned with the range/kernel split of A so the kernel
block stays exactly decoupled instead of leaking at machine precision per
step; the recursion can then be checked to full accuracy over thousands of
iterations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .wavefunction import GaussianShiftAnsatz, PhaseAnsatz


def _row_space_split(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases (V_r, V_k) of the row space and kernel of A,
    split at the relative singular-value tolerance max(shape) * eps."""
    A = np.asarray(A, dtype=np.float64)
    _, s, Vt = np.linalg.svd(A, full_matrices=True)
    tol = max(A.shape) * np.finfo(np.float64).eps
    r = int(np.count_nonzero(s > tol * s[0])) if s.size and s[0] > 0 else 0
    V = Vt.T
    return V[:, :r], V[:, r:]


def kernel_projector(A: np.ndarray) -> np.ndarray:
    """Orthogonal projector I - V_r V_r^T onto kernel(A)."""
    A = np.asarray(A, dtype=np.float64)
    if not np.any(A):
        raise ValueError("A must be nonzero")
    Vr, Vk = _row_space_split(A)
    if Vk.shape[1] == 0:
        return np.zeros((A.shape[1], A.shape[1]))
    return np.eye(A.shape[1]) - Vr @ Vr.T


@dataclass
class FixedKernelProblem:
    """A fixed-SR-matrix iteration problem.

    ansatz supplies the sampling law and score vectors; g_range_coeffs is the
    fixed vector w defining the full-batch gradient g = S w (guaranteed to
    lie in range(S)); delta0_kernel is the kernel component injected into the
    first update direction; n_samples is the batch size in sampled mode.
    """

    ansatz: GaussianShiftAnsatz | PhaseAnsatz
    lam: float
    delta0_kernel: np.ndarray
    g_range_coeffs: np.ndarray
    n_samples: int = 64

    def __post_init__(self):
        self.A = self.ansatz.A
        self.S_exact = self.ansatz.exact_sr_matrix()
        self.V_r, self.V_k = _row_space_split(self.A)
        if self.V_r.shape[1] == 0 or self.V_k.shape[1] == 0:
            raise ValueError("need 0 < rank(A) < N_p for a nontrivial kernel split")
        self.P_K = np.eye(self.A.shape[1]) - self.V_r @ self.V_r.T
        self.delta0_kernel = np.asarray(self.delta0_kernel, dtype=np.float64)
        leak = np.linalg.norm(self.A @ self.delta0_kernel)
        scale = np.linalg.norm(self.delta0_kernel)
        if scale > 0 and leak > 1e-10 * scale * np.linalg.norm(self.A, 2):
            raise ValueError("delta0_kernel must lie in kernel(A)")

    @property
    def n_params(self) -> int:
        return self.A.shape[1]

    def unit_kernel_vector(self) -> np.ndarray:
        """First kernel basis vector; a convenient unit excitation."""
        return self.V_k[:, 0].copy()


def gaussian_problem(
    n_params: int = 40,
    dim: int = 24,
    rank: int = 16,
    lam: float = 1e-3,
    n_samples: int = 64,
    seed: int = 0,
    kernel_excitation: float = 1.0,
) -> FixedKernelProblem:
    """Random shifted-Gaussian instance with prescribed rank deficiency."""
    rng = np.random.default_rng(seed)
    A = (rng.standard_normal((dim, rank)) @ rng.standard_normal((rank, n_params))) / np.sqrt(
        rank
    )
    B = rng.standard_normal((dim, dim)) / np.sqrt(dim)
    Sigma = B @ B.T + np.eye(dim)
    ansatz = GaussianShiftAnsatz(A, Sigma)
    prob = FixedKernelProblem(
        ansatz,
        lam,
        delta0_kernel=np.zeros(n_params),
        g_range_coeffs=rng.standard_normal(n_params),
        n_samples=n_samples,
    )
    prob.delta0_kernel = kernel_excitation * prob.unit_kernel_vector()
    return prob


def phase_problem(
    n_params: int = 40,
    n_sites: int = 12,
    rank: int = 8,
    lam: float = 1e-3,
    n_samples: int = 64,
    seed: int = 0,
    kernel_excitation: float = 1.0,
) -> FixedKernelProblem:
    """Random pure-phase instance with prescribed rank deficiency."""
    rng = np.random.default_rng(seed)
    A = (rng.standard_normal((n_sites, rank)) @ rng.standard_normal((rank, n_params))) / np.sqrt(
        rank
    )
    ansatz = PhaseAnsatz(A)
    prob = FixedKernelProblem(
        ansatz,
        lam,
        delta0_kernel=np.zeros(n_params),
        g_range_coeffs=rng.standard_normal(n_params),
        n_samples=n_samples,
    )
    prob.delta0_kernel = kernel_excitation * prob.unit_kernel_vector()
    return prob


@dataclass
class KernelTrajectory:
    """Iteration history in the range/kernel coordinates of A.

    Vectors are stored as coordinates in the orthonormal basis [V_r | V_k];
    norms and kernel-component comparisons are basis invariant.  theta is
    recorded relative to theta_0 = 0.
    """

    V_r: np.ndarray
    V_k: np.ndarray
    eta: np.ndarray               # (K,)
    kernel_delta: np.ndarray      # (K, n_kernel) coords of P_K d_k
    kernel_theta: np.ndarray      # (K+1, n_kernel) coords of P_K theta_k
    range_delta: np.ndarray       # (K, rank) coords of (I - P_K) d_k
    range_theta: np.ndarray       # (K+1, rank) coords of (I - P_K) theta_k

    @property
    def n_steps(self) -> int:
        return len(self.eta)

    def theta(self, k: int) -> np.ndarray:
        """theta_k reassembled in the original parameter coordinates."""
        return self.V_r @ self.range_theta[k] + self.V_k @ self.kernel_theta[k]

    def kernel_theta_change(self, k: int, base: int = 1) -> np.ndarray:
        """Kernel coordinates of theta_k - theta_base (default base theta_1)."""
        return self.kernel_theta[k] - self.kernel_theta[base]


def run_fixed_spring(
    problem: FixedKernelProblem,
    mu: float,
    schedule: Callable[[int], float] | float,
    n_steps: int,
    mode: str = "full_batch",
    rng: np.random.Generator | None = None,
) -> KernelTrajectory:
    """Iterate d_k = (lam I + S_k)^{-1}(lam mu d_{k-1} - g_k/2) with the
    kernel excitation injected into d_0.

    mode "full_batch" uses the exact constant S and the fixed g = S w;
    mode "sampled" rebuilds S_k from a fresh batch of the ansatz's own score
    vectors each iteration (kernel(A) is contained in every sampled kernel by
    construction) and pairs it with a synthetic centered residual so that
    g_k stays in range(S_k).

    The solve is performed blockwise in the [V_r | V_k] basis, where the
    kernel block of every S_k is exactly zero; this realizes the exact
    arithmetic of the recursion P_K d_k = mu^k P_K d_0 instead of letting
    rounding couple the blocks.
    """
    if n_steps < 2:
        raise ValueError("need at least 2 iterations")
    if mode not in ("full_batch", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "sampled" and rng is None:
        rng = np.random.default_rng(0)
    eta_of = schedule if callable(schedule) else (lambda k: float(schedule))

    Vr, Vk = problem.V_r, problem.V_k
    r = Vr.shape[1]
    lam = problem.lam
    ansatz = problem.ansatz
    gaussian = isinstance(ansatz, GaussianShiftAnsatz)

    # constant full-batch pieces in range coordinates
    S_rr = Vr.T @ (problem.S_exact @ Vr)
    g_full_r = Vr.T @ (problem.S_exact @ problem.g_range_coeffs)
    cho_full = scipy.linalg.cho_factor(S_rr + lam * np.eye(r), lower=True)

    u_r = np.zeros(r)                 # range coords of theta (theta_0 = 0)
    u_k = np.zeros(Vk.shape[1])       # kernel coords of theta
    d_r = np.zeros(r)
    d_k = np.zeros(Vk.shape[1])

    K = n_steps
    eta_arr = np.empty(K)
    kernel_delta = np.empty((K, Vk.shape[1]))
    kernel_theta = np.empty((K + 1, Vk.shape[1]))
    range_delta = np.empty((K, r))
    range_theta = np.empty((K + 1, r))
    kernel_theta[0] = u_k
    range_theta[0] = u_r

    for k in range(K):
        if mode == "full_batch":
            g_r = g_full_r
            rhs_r = lam * mu * d_r - 0.5 * g_r
            d_r = scipy.linalg.cho_solve(cho_full, rhs_r)
        else:
            if gaussian:
                theta = Vr @ u_r + Vk @ u_k
                x = ansatz.sample(theta, problem.n_samples, rng)
                scores = ansatz.score_batch(theta, x)
            else:
                x = ansatz.sample(problem.n_samples, rng)
                scores = ansatz.score_batch(None, x)
            scale = 1.0 / np.sqrt(problem.n_samples - 1.0)
            M = (scores - scores.mean(axis=0)).T * scale   # (N_p, N_s)
            M_r = Vr.T @ M                                  # kernel rows are O(eps); dropped
            ebar = rng.standard_normal(problem.n_samples) * scale
            g_r = 2.0 * (M_r @ ebar)
            S_rr_k = M_r @ M_r.T
            rhs_r = lam * mu * d_r - 0.5 * g_r
            d_r = _spd_solve(S_rr_k + lam * np.eye(r), rhs_r)
        # kernel block: S and g vanish identically, so the solve reduces to
        # division by lam; at k = 0 the prescribed excitation enters here.
        if k == 0:
            d_k = mu * d_k + Vk.T @ problem.delta0_kernel
        else:
            d_k = (lam * mu * d_k) / lam
        eta = eta_of(k)
        if not eta > 0.0:
            raise ValueError(f"schedule produced nonpositive step size at k={k}")
        u_r = u_r + eta * d_r
        u_k = u_k + eta * d_k
        eta_arr[k] = eta
        kernel_delta[k] = d_k
        kernel_theta[k + 1] = u_k
        range_delta[k] = d_r
        range_theta[k + 1] = u_r

    return KernelTrajectory(
        Vr, Vk, eta_arr, kernel_delta, kernel_theta, range_delta, range_theta
    )


def _spd_solve(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    cf = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    return scipy.linalg.cho_solve(cf, rhs, check_finite=False)


def divergence_report(traj: KernelTrajectory, csv_path=None) -> list[dict]:
    """Per-iteration kernel growth versus the step-size partial sums.

    Row k (for k = 1..K) reports eta_k, the partial sum sum_{m=1}^{k-1}
    eta_m, the kernel and range component norms of theta_k - theta_1, and
    the ratio kernel_norm / partial_sum, which equals the injected
    excitation norm when mu = 1 and decays to zero when mu < 1 under a
    nonsummable schedule.  Optionally written as CSV.
    """
    rows = []
    partial = 0.0  # sum_{m=1}^{k-1} eta_m
    for k in range(1, traj.n_steps + 1):
        kernel_norm = float(np.linalg.norm(traj.kernel_theta_change(k)))
        range_norm = float(np.linalg.norm(traj.range_theta[k] - traj.range_theta[1]))
        ratio = kernel_norm / partial if partial > 0 else float("nan")
        rows.append(
            {
                "k": k,
                "eta_k": float(traj.eta[k]) if k < traj.n_steps else float("nan"),
                "partial_sum": partial,
                "kernel_norm": kernel_norm,
                "range_norm": range_norm,
                "ratio": ratio,
            }
        )
        if k < traj.n_steps:
            partial += float(traj.eta[k])
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["k", "eta_k", "partial_sum", "kernel_norm", "range_norm", "ratio"]
            )
            writer.writeheader()
            writer.writerows(rows)
    return rows
