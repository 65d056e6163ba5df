"""One-dimensional two-surface molecular model and its complex eigenbasis.

The field-free Hamiltonian lives on a uniform coordinate grid, one copy per
electronic surface. The kinetic block is built spectrally (multiplication by
``hbar^2 k^2 / 2m`` in momentum space), so plane waves resolved by the grid are
exact eigenfunctions. A radial complex absorbing potential (CAP) makes the
matrix complex symmetric; its eigenvectors are then biorthogonal under the
c-product (transpose, no conjugation).

Grid vectors are normalized as plain arrays (``sum |psi|^2 = 1``), i.e. the
``sqrt(dx)`` quadrature weight is absorbed into the components.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, DefectiveMatrixError
from .timegrid import HBAR, _is_power_of_two

# Proton-scale reduced mass, in electron masses.
DEFAULT_MASS = 918.0


def morse(depth=0.103, width=0.72, x0=2.0):
    """Morse well ``D[(1 - exp(-a(x - x0)))^2 - 1]``; dissociation limit at 0."""

    def potential(x):
        return depth * ((1.0 - np.exp(-width * (x - x0))) ** 2 - 1.0)

    return potential


def repulsive(amplitude=0.38, decay=0.9, shift=0.096):
    """Repulsive exponential ``A exp(-b x) + shift``."""

    def potential(x):
        return amplitude * np.exp(-decay * x) + shift

    return potential


def dipole_function(scale=0.5, cutoff=3.0):
    """Transition dipole ``mu0 * x * exp(-x / xc)``."""

    def mu(x):
        return scale * x * np.exp(-x / cutoff)

    return mu


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SpatialGrid:
    n_points: int
    x_min: float
    x_max: float

    def __post_init__(self):
        if not _is_power_of_two(int(self.n_points)):
            raise ConfigError(f"must be a power of two, got {self.n_points}", "n_points")
        if not self.x_max > self.x_min:
            raise ConfigError("x_max must exceed x_min", "x_max")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        """Angular wavenumbers on the FFT grid."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    @property
    def k_max(self) -> float:
        return np.pi / self.dx


@dataclass(frozen=True)
class SurfaceModel:
    """Two electronic surfaces coupled by a transition dipole.

    The CAP is ``-i eta (x - x_cap)^p`` beyond ``cap_onset`` and zero before.
    ``cap_onset=None`` places it at 75% of the grid length.
    """

    ground_potential: Callable = field(default_factory=morse)
    excited_potential: Callable = field(default_factory=repulsive)
    dipole: Callable = field(default_factory=dipole_function)
    mass: float = DEFAULT_MASS
    cap_strength: float = 0.001
    cap_onset: float | None = None
    cap_order: int = 2
    energy_cutoff: float = 0.5

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigError("must be > 0", "mass")
        if self.cap_strength < 0:
            raise ConfigError("must be >= 0", "cap_strength")
        if self.cap_order < 1:
            raise ConfigError("must be >= 1", "cap_order")

    @classmethod
    def free(cls, mass=1.0, **kw):
        """Both potentials and the dipole identically zero, no CAP."""
        return cls(_zero, _zero, _zero, mass=mass, cap_strength=0.0, **kw)

    def onset(self, grid: SpatialGrid) -> float:
        if self.cap_onset is None:
            return grid.x_min + 0.75 * (grid.x_max - grid.x_min)
        return self.cap_onset

    def cap(self, x, grid: SpatialGrid) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        depth = np.clip(x - self.onset(grid), 0.0, None)
        return -1j * self.cap_strength * depth**self.cap_order

    def validate(self, grid: SpatialGrid) -> None:
        onset = self.onset(grid)
        if self.cap_strength > 0 and not grid.x_min < onset < grid.x_max:
            raise ConfigError(f"CAP onset {onset} outside the grid", "cap_onset")
        resolved = HBAR**2 * grid.k_max**2 / (2.0 * self.mass)
        if resolved < self.energy_cutoff:
            raise ConfigError(
                f"grid too coarse: resolves kinetic energy {resolved:.4g} "
                f"< cutoff {self.energy_cutoff:.4g}; refine dx",
                "n_points",
            )


def kinetic_matrix(grid: SpatialGrid, mass: float) -> np.ndarray:
    """Dense spectral kinetic operator (real symmetric)."""
    n = grid.n_points
    t_k = HBAR**2 * grid.k**2 / (2.0 * mass)
    kin = np.fft.ifft(t_k[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0)
    return kin.real


def build_h0_grid(grid: SpatialGrid, model: SurfaceModel) -> np.ndarray:
    """Field-free two-surface Hamiltonian, ``2 n_points`` square.

    Ground surface occupies the first ``n_points`` rows, the excited one the
    rest; there is no inter-surface coupling.
    """
    model.validate(grid)
    n = grid.n_points
    x = grid.x
    kin = kinetic_matrix(grid, model.mass)
    cap = model.cap(x, grid)
    h0 = np.zeros((2 * n, 2 * n), dtype=complex)
    h0[:n, :n] = kin + np.diag(model.ground_potential(x) + cap)
    h0[n:, n:] = kin + np.diag(model.excited_potential(x) + cap)
    return h0


@dataclass
class ComplexEigenbasis:
    """Biorthonormal eigenpairs: ``left[:, i] @ right[:, j] == delta_ij``.

    Coefficients of a grid vector ``psi`` are ``left.T @ psi``.
    """

    energies: np.ndarray
    right: np.ndarray
    left: np.ndarray
    dipole: np.ndarray | None = None

    @property
    def n_states(self) -> int:
        return len(self.energies)

    def coefficients(self, psi) -> np.ndarray:
        return np.asarray(psi) @ self.left

    def to_grid(self, coefficients) -> np.ndarray:
        return np.asarray(coefficients) @ self.right.T

    def truncate(self, n_states: int) -> "ComplexEigenbasis":
        dip = None if self.dipole is None else self.dipole[:n_states, :n_states]
        return replace(
            self,
            energies=self.energies[:n_states],
            right=self.right[:, :n_states],
            left=self.left[:, :n_states],
            dipole=dip,
        )


def _cluster_fix(values, right, left, tol):
    """Re-biorthogonalize columns inside clusters of (near) equal eigenvalues."""
    order = np.argsort(values.real, kind="stable")
    i = 0
    while i < len(order):
        j = i + 1
        while j < len(order) and abs(values[order[j]] - values[order[i]]) < tol:
            j += 1
        if j - i > 1:
            idx = order[i:j]
            gram = left[:, idx].T @ right[:, idx]
            left[:, idx] = left[:, idx] @ np.linalg.inv(gram).T
        i = j


def _eig_block(h, scale):
    """Biorthonormal eigenpairs of one irreducible block."""
    symmetric = np.allclose(h, h.T, rtol=0, atol=1e-14 * scale)
    if symmetric and not np.any(np.imag(h)):
        values, right = scipy.linalg.eigh(h.real)
        right = right.astype(complex)
        return values.astype(complex), right, right.copy()
    if symmetric:
        values, right = scipy.linalg.eig(h)
        left = right = right.astype(complex)
        cnorm = np.einsum("ij,ij->j", right, right)
    else:
        values, vl, right = scipy.linalg.eig(h, left=True)
        left = vl.conj()
        cnorm = np.einsum("ij,ij->j", left, right)
    bad = np.flatnonzero(np.abs(cnorm) < 1e-8)
    if bad.size:
        raise DefectiveMatrixError(values[bad[0]], cnorm[bad[0]])
    if symmetric:
        right = right / np.sqrt(cnorm)
        left = right.copy()
    else:
        left = left / cnorm
    _cluster_fix(values, right, left, 1e-10 * scale)
    return values, right, left


def prediagonalize(h0, n_states=None, energy_cutoff=None) -> ComplexEigenbasis:
    """Full eigendecomposition of a (complex symmetric) matrix.

    Decoupled diagonal blocks (e.g. the two uncoupled surfaces) are
    diagonalized separately, so near-degenerate states from different blocks
    never mix. For a complex symmetric block the left vectors equal the
    right ones, c-normalized; otherwise scipy's left eigenvectors are used.
    Eigenpairs are sorted by ``Re(E)``; optional truncation keeps the lowest
    ``n_states`` and/or those with ``Re(E) <= energy_cutoff``.
    """
    h0 = np.asarray(h0)
    if h0.ndim != 2 or h0.shape[0] != h0.shape[1]:
        raise ValueError(f"square matrix required, got shape {h0.shape}")
    if not np.all(np.isfinite(h0)):
        raise ValueError("matrix has non-finite entries")
    dim = h0.shape[0]
    scale = max(np.abs(h0).max(), 1.0)
    n_blocks, labels = connected_components(h0 != 0, directed=False)

    values = np.empty(dim, dtype=complex)
    right = np.zeros((dim, dim), dtype=complex)
    left = np.zeros((dim, dim), dtype=complex)
    col = 0
    for b in range(n_blocks):
        idx = np.flatnonzero(labels == b)
        w, r, l = _eig_block(h0[np.ix_(idx, idx)], scale)
        cols = slice(col, col + len(idx))
        values[cols] = w
        right[idx, cols] = r
        left[idx, cols] = l
        col += len(idx)

    order = np.argsort(values.real, kind="stable")
    values, right, left = values[order], right[:, order], left[:, order]
    keep = dim
    if energy_cutoff is not None:
        keep = int(np.count_nonzero(values.real <= energy_cutoff))
    if n_states is not None:
        keep = min(keep, int(n_states))
    return ComplexEigenbasis(values[:keep], right[:, :keep], left[:, :keep])


def dipole_operator(grid: SpatialGrid, model: SurfaceModel) -> np.ndarray:
    """Grid dipole, non-zero only in the inter-surface blocks (diagonal in x)."""
    n = grid.n_points
    mu = np.asarray(model.dipole(grid.x), dtype=float) * np.ones(n)
    op = np.zeros((2 * n, 2 * n))
    op[:n, n:] = np.diag(mu)
    op[n:, :n] = np.diag(mu)
    return op


def project_dipole(grid: SpatialGrid, model: SurfaceModel, basis: ComplexEigenbasis) -> np.ndarray:
    """``mu_ij = left_i^T mu right_j``; also stored on ``basis.dipole``."""
    if basis.right.shape[0] != 2 * grid.n_points:
        raise ValueError(
            f"basis vectors have length {basis.right.shape[0]}, grid needs {2 * grid.n_points}"
        )
    n = grid.n_points
    mu = np.asarray(model.dipole(grid.x), dtype=float) * np.ones(n)
    # mu couples the ground half of one vector to the excited half of the other
    upper = basis.left[:n].T @ (mu[:, None] * basis.right[n:])
    lower = basis.left[n:].T @ (mu[:, None] * basis.right[:n])
    basis.dipole = upper + lower
    return basis.dipole


def excited_weight(basis: ComplexEigenbasis, n_points: int) -> np.ndarray:
    """Fraction ``sum |right|^2`` of each state living on the excited surface."""
    w = np.abs(basis.right) ** 2
    return w[n_points:].sum(axis=0) / w.sum(axis=0)


def bound_state_mask(energies, threshold=0.0, im_cutoff=1e-6) -> np.ndarray:
    """States below the ground dissociation limit with negligible width."""
    energies = np.asarray(energies)
    return (energies.real < threshold) & (np.abs(energies.imag) < im_cutoff)


def build_eigenbasis(grid: SpatialGrid, model: SurfaceModel, n_states=None, energy_cutoff=None,
                     min_bound_states: int = 0):
    """Convenience: assemble, diagonalize, truncate and project the dipole.

    ``min_bound_states`` rejects models whose ground well holds fewer bound
    states (``Re E < 0``, negligible width) than requested.
    """
    basis = prediagonalize(build_h0_grid(grid, model), n_states, energy_cutoff)
    bound = int(bound_state_mask(basis.energies).sum())
    if bound < min_bound_states:
        raise ConfigError(
            f"ground surface holds {bound} bound states, need {min_bound_states}", "ground"
        )
    project_dipole(grid, model, basis)
    return basis
