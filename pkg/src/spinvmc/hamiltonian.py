"""Lattice spin Hamiltonians with sparse connected-element structure.

Implements the transverse-field Ising (TFI) and antiferromagnetic Heisenberg
models on chains and square lattices, by default with periodic boundaries:

    TFI:        H = -sum_<ij> sz_i sz_j - h sum_j sx_j
    Heisenberg: H = sum_<ij> (sx_i sx_j + sy_i sy_j + sz_i sz_j)

Working in the sz product basis, a configuration is a vector x in {-1,+1}^N
and each Hamiltonian row ⟨x|H|.⟩ has only O(N) nonzero entries: the diagonal
plus one entry per single-spin flip (TFI, amplitude -h) or per anti-aligned
bond exchange (Heisenberg, amplitude +2, or -2 under the Marshall sign
rotation on a bipartite lattice).  That sparsity makes the local energy

    E_loc(x) = ⟨x|H|psi⟩ / psi(x) = sum_x' ⟨x|H|x'⟩ psi(x') / psi(x)

an O(N) quantity per sample.  For small systems the module also provides a
dense-matrix assembly and an exact-diagonalization oracle used as the ground
truth in every energy-error measurement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

MAX_DENSE_SITES = 16


class NodeHitError(ValueError):
    """Raised when a local-energy or acceptance ratio is requested at a node
    (psi(x) = 0), where the ratio is undefined."""


class RatioOverflowError(FloatingPointError):
    """Raised when a wavefunction ratio exp(dlog) overflows double precision."""


@dataclass
class LatticeModel:
    """A nearest-neighbour spin model on a chain or square lattice.

    Attributes
    ----------
    kind:
        "tfi" or "heisenberg".
    geometry:
        "chain" (extent = L) or "square" (extent = L, meaning an L x L grid).
    extent:
        Linear size L.
    periodic:
        Periodic boundary conditions.  A periodic chain of length 2 has a
        single bond (0, 1); bonds are unordered and never double counted.
    field_h:
        Transverse field strength h >= 0.  Ignored for Heisenberg.
    marshall_sign:
        Apply the Marshall sign basis rotation (exchange amplitude -2 instead
        of +2).  Only valid on bipartite lattices, where it is a unitary
        similarity and leaves the spectrum unchanged while making the ground
        state non-negative.  None (default) resolves to "on iff bipartite".
        Ignored for TFI.
    """

    kind: str
    geometry: str = "chain"
    extent: int = 4
    periodic: bool = True
    field_h: float = 1.0
    marshall_sign: bool | None = None

    def __post_init__(self):
        if self.kind not in ("tfi", "heisenberg"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.geometry not in ("chain", "square"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if int(self.extent) < 1 or int(self.extent) != self.extent:
            raise ValueError("extent must be a positive integer")
        self.extent = int(self.extent)
        if self.kind == "tfi" and self.field_h < 0:
            raise ValueError("field_h must be >= 0")
        if self.kind == "heisenberg":
            if self.marshall_sign is None:
                self.marshall_sign = self.is_bipartite
            if self.marshall_sign and not self.is_bipartite:
                raise ValueError(
                    "marshall_sign requires a bipartite lattice "
                    "(odd periodic extents are frustrated)"
                )
        else:
            self.marshall_sign = False

    @property
    def n_sites(self) -> int:
        return self.extent if self.geometry == "chain" else self.extent ** 2

    @property
    def is_bipartite(self) -> bool:
        # The even/odd sublattice colouring is consistent across the wrap-around
        # bond only for even extent.
        return (not self.periodic) or self.extent % 2 == 0

    @property
    def bonds(self) -> np.ndarray:
        """Unique unordered nearest-neighbour pairs, shape (n_bonds, 2)."""
        return _bonds(self.geometry, self.extent, self.periodic)

    def validate_configuration(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != (self.n_sites,):
            raise ValueError(
                f"configuration has shape {x.shape}, expected ({self.n_sites},)"
            )
        return x


@dataclass(frozen=True)
class ConnectedElement:
    """One nonzero Hamiltonian matrix element ⟨x|H|target⟩ in the row of x."""

    target: np.ndarray
    amplitude: float


@lru_cache(maxsize=None)
def _bonds(geometry: str, extent: int, periodic: bool) -> np.ndarray:
    pairs = set()
    if geometry == "chain":
        last = extent if periodic else extent - 1
        for i in range(last):
            j = (i + 1) % extent
            if i != j:
                pairs.add((min(i, j), max(i, j)))
    else:
        L = extent

        def idx(r, c):
            return (r % L) * L + (c % L)

        rmax = L if periodic else L - 1
        for r in range(L):
            for c in range(L):
                if c + 1 < L or periodic:
                    a, b = idx(r, c), idx(r, c + 1)
                    if a != b:
                        pairs.add((min(a, b), max(a, b)))
                if r + 1 < L or periodic:
                    a, b = idx(r, c), idx(r + 1, c)
                    if a != b:
                        pairs.add((min(a, b), max(a, b)))
    if not pairs:
        return np.empty((0, 2), dtype=np.int64)
    return np.array(sorted(pairs), dtype=np.int64)


def connected_elements(model: LatticeModel, x: np.ndarray) -> list[ConnectedElement]:
    """All nonzero elements ⟨x|H|x'⟩ of the Hamiltonian row at configuration x.

    Returns the diagonal element first (target = x), then one element per
    off-diagonal coupling:

    * TFI: each single-spin flip with amplitude -h; diagonal
      -sum_bonds x_i x_j.
    * Heisenberg: each anti-aligned bonded pair exchanged, with amplitude +2
      (or -2 with the Marshall sign rotation); diagonal +sum_bonds x_i x_j.
    """
    x = model.validate_configuration(x)
    bonds = model.bonds
    zz = float(np.sum(x[bonds[:, 0]] * x[bonds[:, 1]])) if len(bonds) else 0.0
    out: list[ConnectedElement] = []
    if model.kind == "tfi":
        out.append(ConnectedElement(x.copy(), -zz))
        h = model.field_h
        if h != 0.0:
            for j in range(model.n_sites):
                t = x.copy()
                t[j] = -t[j]
                out.append(ConnectedElement(t, -h))
    else:
        out.append(ConnectedElement(x.copy(), zz))
        amp = -2.0 if model.marshall_sign else 2.0
        for i, j in bonds:
            if x[i] != x[j]:
                t = x.copy()
                t[i], t[j] = t[j], t[i]
                out.append(ConnectedElement(t, amp))
    return out


def enumerate_configs(n_sites: int) -> np.ndarray:
    """All 2^N configurations as rows of a (2^N, N) array of +-1 values.

    Row index k encodes the configuration through its bits: site i carries
    spin +1 when bit i of k is 0, spin -1 when it is 1 (so index 0 is the
    all-up state).  This indexing is the canonical basis order used by the
    dense assembly, the exact-diagonalization oracle and table wavefunctions.
    """
    if n_sites > 24:
        raise ValueError(f"refusing to enumerate 2^{n_sites} configurations")
    k = np.arange(2 ** n_sites, dtype=np.int64)
    bits = (k[:, None] >> np.arange(n_sites)[None, :]) & 1
    return (1 - 2 * bits).astype(np.float64)


def config_index(x: np.ndarray) -> int:
    """Basis index of a single +-1 configuration (inverse of enumerate_configs)."""
    x = np.asarray(x)
    bits = ((1 - x.astype(np.int64)) // 2).astype(np.int64)
    return int(np.sum(bits << np.arange(len(bits))))


def config_indices(X: np.ndarray) -> np.ndarray:
    """Vectorized config_index over rows of X."""
    bits = ((1 - np.asarray(X).astype(np.int64)) // 2)
    return bits @ (1 << np.arange(X.shape[1], dtype=np.int64))


def dense_hamiltonian(model: LatticeModel) -> np.ndarray:
    """Dense 2^N x 2^N matrix assembled row by row from connected_elements."""
    n = model.n_sites
    if n > MAX_DENSE_SITES:
        raise ValueError(f"dense assembly limited to N <= {MAX_DENSE_SITES}, got N={n}")
    configs = enumerate_configs(n)
    dim = len(configs)
    H = np.zeros((dim, dim))
    for row in range(dim):
        for el in connected_elements(model, configs[row]):
            H[row, config_index(el.target)] += el.amplitude
    return H


def exact_ground_state(model: LatticeModel) -> tuple[float, np.ndarray]:
    """Ground-state energy and amplitude table by dense diagonalization.

    The returned vector is indexed by the canonical basis order of
    enumerate_configs, normalized to unit 2-norm, with a deterministic gauge:
    the first amplitude of magnitude > 1e-12 is made positive.

    Only valid for N <= 16 (dense feasibility bound); desk-scale use is
    N <= 12.
    """
    H = dense_hamiltonian(model)
    w, v = scipy.linalg.eigh(H, subset_by_index=[0, 0])
    energy = float(w[0])
    state = v[:, 0]
    nz = np.nonzero(np.abs(state) > 1e-12)[0]
    if len(nz) and state[nz[0]] < 0:
        state = -state
    return energy, state


class TableWavefunction:
    """A wavefunction stored as an explicit amplitude table over all 2^N
    configurations (canonical basis order).  Used to wrap exact ground
    states; has no variational parameters."""

    n_params = 0

    def __init__(self, amplitudes: np.ndarray, n_sites: int):
        amplitudes = np.asarray(amplitudes, dtype=np.float64)
        if amplitudes.shape != (2 ** n_sites,):
            raise ValueError("amplitude table must have length 2^N")
        self.amplitudes = amplitudes
        self.n_sites = n_sites
        with np.errstate(divide="ignore"):
            self._log_abs = np.log(np.abs(amplitudes))
        self._sign = np.sign(amplitudes)

    def log_abs(self, x: np.ndarray) -> float:
        return float(self._log_abs[config_index(x)])

    def log_abs_batch(self, X: np.ndarray) -> np.ndarray:
        return self._log_abs[config_indices(X)]

    def sign(self, x: np.ndarray) -> float:
        return float(self._sign[config_index(x)])

    def sign_batch(self, X: np.ndarray) -> np.ndarray:
        return self._sign[config_indices(X)]

    def grad_log_abs_batch(self, X: np.ndarray) -> np.ndarray:
        return np.zeros((0, len(X)))


class UniformWavefunction:
    """psi(x) = 1 for every configuration; handy in tests."""

    n_params = 0

    def log_abs(self, x):
        return 0.0

    def log_abs_batch(self, X):
        return np.zeros(len(X))

    def sign(self, x):
        return 1.0

    def sign_batch(self, X):
        return np.ones(len(X))


def local_energy(model: LatticeModel, psi, x: np.ndarray) -> float:
    """E_loc(x) = sum over connected elements of amplitude * psi(x')/psi(x).

    Ratios are evaluated through log-amplitude differences.  Raises
    NodeHitError when psi(x) = 0 and RatioOverflowError when a ratio
    overflows double precision.
    """
    x = model.validate_configuration(x)
    la_x = psi.log_abs(x)
    if not np.isfinite(la_x):
        raise NodeHitError("local energy requested at a node: psi(x) = 0")
    sign_x = psi.sign(x) if hasattr(psi, "sign") else 1.0
    total = 0.0
    for el in connected_elements(model, x):
        la_t = psi.log_abs(el.target)
        if la_t == -np.inf:
            continue
        d = la_t - la_x
        if d > 709.0:
            raise RatioOverflowError(f"wavefunction ratio overflow: dlog = {d:.1f}")
        sign_t = psi.sign(el.target) if hasattr(psi, "sign") else 1.0
        total += el.amplitude * (sign_t / sign_x) * np.exp(d)
    return total


def local_energies(model: LatticeModel, psi, X: np.ndarray) -> np.ndarray:
    """Vectorized local energies for a batch of configurations (rows of X).

    Equivalent to [local_energy(model, psi, x) for x in X] but evaluates all
    wavefunction ratios in batched calls, which is the per-iteration hot path
    of every sampling-based run.
    """
    X = np.asarray(X, dtype=np.float64)
    n, N = X.shape
    if N != model.n_sites:
        raise ValueError(f"configurations have {N} sites, model has {model.n_sites}")
    la_x = psi.log_abs_batch(X)
    if not np.all(np.isfinite(la_x)):
        raise NodeHitError("batch contains a node configuration (psi = 0)")
    sign_x = psi.sign_batch(X) if hasattr(psi, "sign_batch") else np.ones(n)
    bonds = model.bonds
    zz = (X[:, bonds[:, 0]] * X[:, bonds[:, 1]]).sum(axis=1) if len(bonds) else np.zeros(n)

    if model.kind == "tfi":
        e = -zz
        h = model.field_h
        if h != 0.0:
            # one target class per site: flip column j
            targets = np.repeat(X[None, :, :], N, axis=0)
            for j in range(N):
                targets[j, :, j] *= -1.0
            flat = targets.reshape(N * n, N)
            la_t = psi.log_abs_batch(flat).reshape(N, n)
            sign_t = (
                psi.sign_batch(flat).reshape(N, n)
                if hasattr(psi, "sign_batch")
                else np.ones((N, n))
            )
            d = la_t - la_x[None, :]
            if np.any(d > 709.0):
                raise RatioOverflowError("wavefunction ratio overflow in TFI flips")
            with np.errstate(invalid="ignore"):
                ratios = np.where(la_t == -np.inf, 0.0, (sign_t / sign_x) * np.exp(d))
            e = e + (-h) * ratios.sum(axis=0)
        return e

    amp = -2.0 if model.marshall_sign else 2.0
    e = zz.copy()
    nb = len(bonds)
    targets = np.repeat(X[None, :, :], nb, axis=0)
    active = np.empty((nb, n))
    for b, (i, j) in enumerate(bonds):
        anti = X[:, i] != X[:, j]
        active[b] = anti
        targets[b, anti, i] = X[anti, j]
        targets[b, anti, j] = X[anti, i]
    flat = targets.reshape(nb * n, N)
    la_t = psi.log_abs_batch(flat).reshape(nb, n)
    sign_t = (
        psi.sign_batch(flat).reshape(nb, n)
        if hasattr(psi, "sign_batch")
        else np.ones((nb, n))
    )
    d = la_t - la_x[None, :]
    if np.any(d[active > 0] > 709.0):
        raise RatioOverflowError("wavefunction ratio overflow in Heisenberg exchange")
    with np.errstate(invalid="ignore"):
        ratios = np.where(la_t == -np.inf, 0.0, (sign_t / sign_x) * np.exp(d))
    return e + amp * (active * ratios).sum(axis=0)
