"""Trial wavefunctions: the RBM ansatz and two fixed-SR-matrix families.

The workhorse is the restricted Boltzmann machine amplitude

    psi_theta(x) = exp(sum_j a_j x_j) * prod_k cosh(b_k + sum_j w_kj x_j),

which is strictly positive for real parameters, so log|psi| = log psi and
the sign is identically +1.  Parameters are packed in the fixed order
(a, b, W row-major); this order is normative for checkpoints.

The two analytic families (GaussianShiftAnsatz, PhaseAnsatz) have an SR
matrix that is independent of theta and strictly rank-deficient.  They are
implemented through their real score vectors (the per-sample coefficient
vectors whose centered outer products build the sampled SR matrix), which is
all the kernel-drift experiments need.
"""

from __future__ import annotations

import struct

import numpy as np
import scipy.linalg

_LOG2 = np.log(2.0)
CHECKPOINT_MAGIC = b"SVMCRBM1"
CHECKPOINT_VERSION = 1


def log_cosh(t: np.ndarray) -> np.ndarray:
    """Overflow-safe log cosh(t) = |t| - log 2 + log(1 + exp(-2|t|)).

    Naive np.log(np.cosh(t)) overflows for |t| > ~710; hidden-unit inputs
    routinely exceed that scale late in an optimization.
    """
    a = np.abs(t)
    return a - _LOG2 + np.log1p(np.exp(-2.0 * a))


class RBMAnsatz:
    """Real-parameter RBM with N visible spins and D = density * N hidden units.

    The flat parameter vector theta has length N_p = N + D + D*N and unpacks
    to (a, b, W) with W stored row-major (hidden index first).
    """

    def __init__(self, n_visible: int, density: int = 5):
        if n_visible < 1 or density < 1:
            raise ValueError("n_visible and density must be positive")
        self.n_visible = int(n_visible)
        self.n_hidden = int(density * n_visible)
        self.density = int(density)

    @property
    def n_params(self) -> int:
        n, d = self.n_visible, self.n_hidden
        return n + d + d * n

    def unpack(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise ValueError(f"theta has shape {theta.shape}, expected ({self.n_params},)")
        n, d = self.n_visible, self.n_hidden
        a = theta[:n]
        b = theta[n : n + d]
        W = theta[n + d :].reshape(d, n)
        return a, b, W

    def pack(self, a: np.ndarray, b: np.ndarray, W: np.ndarray) -> np.ndarray:
        return np.concatenate([np.ravel(a), np.ravel(b), np.ravel(W)])

    def init_parameters(self, seed: int, scale: float = 0.01) -> np.ndarray:
        """i.i.d. normal initialization with standard deviation `scale`."""
        rng = np.random.default_rng(seed)
        return rng.normal(0.0, scale, size=self.n_params)

    def hidden_inputs(self, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        """t_k = b_k + sum_j w_kj x_j for each row of X; shape (n, D)."""
        _, b, W = self.unpack(theta)
        return np.asarray(X, dtype=np.float64) @ W.T + b

    def log_abs_psi(self, theta: np.ndarray, x: np.ndarray) -> float:
        """log|psi_theta(x)| = sum_j a_j x_j + sum_k log cosh(t_k)."""
        a, b, W = self.unpack(theta)
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_visible,):
            raise ValueError(f"x has shape {x.shape}, expected ({self.n_visible},)")
        t = b + W @ x
        return float(a @ x + log_cosh(t).sum())

    def log_abs_psi_batch(self, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        a, _, _ = self.unpack(theta)
        T = self.hidden_inputs(theta, X)
        return np.asarray(X, dtype=np.float64) @ a + log_cosh(T).sum(axis=1)

    def grad_log_abs_psi(self, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Closed-form gradient of log|psi| in canonical packing order.

        d/da_j = x_j, d/db_k = tanh(t_k), d/dw_kj = tanh(t_k) x_j.
        """
        _, b, W = self.unpack(theta)
        x = np.asarray(x, dtype=np.float64)
        th = np.tanh(b + W @ x)
        return np.concatenate([x, th, np.outer(th, x).ravel()])

    def grad_log_abs_psi_batch(self, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Gradients for all rows of X as columns of an (N_p, n) matrix."""
        X = np.asarray(X, dtype=np.float64)
        th = np.tanh(self.hidden_inputs(theta, X))  # (n, D)
        wblock = np.einsum("nk,nj->kjn", th, X).reshape(self.n_hidden * self.n_visible, -1)
        return np.concatenate([X.T, th.T, wblock], axis=0)

    def bind(self, theta: np.ndarray) -> "BoundRBM":
        return BoundRBM(self, theta)


class BoundRBM:
    """An (ansatz, theta) pair exposing the generic wavefunction interface."""

    def __init__(self, ansatz: RBMAnsatz, theta: np.ndarray):
        self.ansatz = ansatz
        self.theta = np.asarray(theta, dtype=np.float64)
        self.n_params = ansatz.n_params

    def log_abs(self, x):
        return self.ansatz.log_abs_psi(self.theta, x)

    def log_abs_batch(self, X):
        return self.ansatz.log_abs_psi_batch(self.theta, X)

    def sign(self, x):
        return 1.0

    def sign_batch(self, X):
        return np.ones(len(X))

    def grad_log_abs_batch(self, X):
        return self.ansatz.grad_log_abs_psi_batch(self.theta, X)


class GaussianShiftAnsatz:
    """Shifted-Gaussian wavefunction with sampling law N(A theta, Sigma).

    psi_theta(x) = exp(-(x - A theta)^T Sigma^{-1} (x - A theta) / 4) on R^d,
    with A of shape (d, N_p), 0 < rank(A) < N_p.  The score vector is
    grad_theta log psi = A^T Sigma^{-1} (x - A theta) / 2, so the exact SR
    matrix A^T Sigma^{-1} A / 4 does not depend on theta and inherits the
    kernel of A.
    """

    def __init__(self, A: np.ndarray, Sigma: np.ndarray):
        self.A = np.asarray(A, dtype=np.float64)
        self.Sigma = np.asarray(Sigma, dtype=np.float64)
        d, n_p = self.A.shape
        if self.Sigma.shape != (d, d):
            raise ValueError("Sigma must be d x d for A of shape (d, N_p)")
        if not np.allclose(self.Sigma, self.Sigma.T):
            raise ValueError("Sigma must be symmetric")
        try:
            self._chol = scipy.linalg.cholesky(self.Sigma, lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise ValueError("Sigma must be positive definite") from exc
        self.n_params = n_p
        self.dim = d
        self._siginv_A = scipy.linalg.cho_solve((self._chol, True), self.A)

    def sample(self, theta: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        """n i.i.d. draws A theta + L z with z standard normal."""
        z = rng.standard_normal((n, self.dim))
        return self.A @ np.asarray(theta) + z @ self._chol.T

    def score(self, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
        """A^T Sigma^{-1} (x - A theta) / 2."""
        r = np.asarray(x) - self.A @ np.asarray(theta)
        return 0.5 * self._siginv_A.T @ r

    def score_batch(self, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        R = np.asarray(X) - self.A @ np.asarray(theta)
        return 0.5 * (R @ self._siginv_A)

    def exact_sr_matrix(self, theta: np.ndarray | None = None) -> np.ndarray:
        """S = A^T Sigma^{-1} A / 4, independent of theta."""
        return 0.25 * self.A.T @ self._siginv_A


class PhaseAnsatz:
    """Pure-phase wavefunction psi_theta(x) = 2^{-N/2} exp(i x^T A theta).

    The sampling law is uniform on {-1,1}^N for every theta; the (complex)
    log-derivative is i A^T x, and the real-part SR matrix is A^T A.  Only
    the real coefficient vector A^T x matters downstream, so the class works
    entirely in real arithmetic.
    """

    def __init__(self, A: np.ndarray):
        self.A = np.asarray(A, dtype=np.float64)
        self.n_sites, self.n_params = self.A.shape

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return 1.0 - 2.0 * rng.integers(0, 2, size=(n, self.n_sites)).astype(np.float64)

    def score(self, theta: np.ndarray | None, x: np.ndarray) -> np.ndarray:
        """A^T x (theta plays no role)."""
        return self.A.T @ np.asarray(x)

    def score_batch(self, theta: np.ndarray | None, X: np.ndarray) -> np.ndarray:
        return np.asarray(X) @ self.A

    def exact_sr_matrix(self, theta: np.ndarray | None = None) -> np.ndarray:
        """S = A^T A (uniform law gives E[x x^T] = I)."""
        return self.A.T @ self.A


def counterexample_score(ansatz, theta, x) -> np.ndarray:
    """Real score-coefficient vector of a fixed-SR-matrix ansatz at sample x."""
    if isinstance(ansatz, (GaussianShiftAnsatz, PhaseAnsatz)):
        return ansatz.score(theta, x)
    raise TypeError(f"no score rule for ansatz of type {type(ansatz).__name__}")


def save_checkpoint(path, ansatz: RBMAnsatz, theta: np.ndarray) -> None:
    """Binary checkpoint: magic, version, N, D header then N_p float64 values
    in canonical (a, b, W row-major) packing order, little endian."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (ansatz.n_params,):
        raise ValueError("theta length does not match the ansatz")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<iii", CHECKPOINT_VERSION, ansatz.n_visible, ansatz.n_hidden))
        fh.write(theta.astype("<f8").tobytes())


def load_checkpoint(path) -> tuple[RBMAnsatz, np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a checkpoint file: bad magic {magic!r}")
        version, n, d = struct.unpack("<iii", fh.read(12))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        if d % n != 0:
            raise ValueError("hidden count is not a multiple of visible count")
        ansatz = RBMAnsatz(n, density=d // n)
        raw = fh.read(8 * ansatz.n_params)
        theta = np.frombuffer(raw, dtype="<f8").astype(np.float64)
        if theta.shape != (ansatz.n_params,):
            raise ValueError("checkpoint payload truncated")
    return ansatz, theta
