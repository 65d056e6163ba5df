"""Interaction representations with respect to the diagonal of H0.

Two frames are supported besides the direct (Schrodinger) one:

``full``
    phases ``exp(-i E_j t)`` are factored out completely; the transformed
    Hamiltonian keeps only the oscillating couplings. States with
    ``Im(E_j) < -im_threshold`` would produce exponentially large factors, so
    every coupling touching them is dropped (pairwise rule).
``real-part``
    only ``exp(-i Re(E_j) t)`` is factored out; the diagonal keeps the decay
    ``i Im(E_j)`` and all phase factors are unimodular.

The diagonal dipole term ``mu_jj E(t)`` commutes with the frame and is kept
as is; it vanishes for the inter-surface dipoles built by
:mod:`catm.spatial`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .timegrid import HBAR

MODES = ("direct", "full", "real-part")


@dataclass(frozen=True)
class RepresentationConfig:
    mode: str = "direct"
    im_threshold: float = 0.5

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}, expected one of {MODES}", "mode")
        if not self.im_threshold > 0:
            raise ConfigError("must be > 0", "im_threshold")


def frame_energies(energies, mode: str) -> np.ndarray:
    """Energies whose phases are factored out by the frame."""
    energies = np.asarray(energies, dtype=complex)
    if mode == "full":
        return energies
    if mode == "real-part":
        return energies.real.astype(complex)
    if mode == "direct":
        return np.zeros_like(energies)
    raise ConfigError(f"unknown mode {mode!r}", "mode")


def diagonal_energies(energies, mode: str) -> np.ndarray:
    """Time-independent diagonal left in the transformed Hamiltonian."""
    energies = np.asarray(energies, dtype=complex)
    return energies - frame_energies(energies, mode)


def coupling_mask(energies, im_threshold: float, mode: str = "full") -> np.ndarray:
    """Boolean ``(n, n)`` mask of couplings kept by the frame.

    Only the full frame filters: a pair is dropped when either state has
    ``Im(E) < -im_threshold``.
    """
    energies = np.asarray(energies)
    n = len(energies)
    if mode != "full":
        return np.ones((n, n), dtype=bool)
    ok = energies.imag >= -im_threshold
    return np.outer(ok, ok)


def filtered_pairs(dipole, energies, im_threshold: float) -> int:
    """Number of non-zero off-diagonal couplings the full frame drops."""
    keep = coupling_mask(energies, im_threshold, "full")
    off = ~np.eye(len(energies), dtype=bool)
    return int(np.count_nonzero((np.asarray(dipole) != 0) & ~keep & off))


def _transformed(dipole, energies, field_value, t, mode, im_threshold):
    dipole = np.asarray(dipole, dtype=complex)
    energies = np.asarray(energies, dtype=complex)
    frame = frame_energies(energies, mode)
    keep = coupling_mask(energies, im_threshold, mode)
    gap = frame[None, :] - frame[:, None]
    with np.errstate(over="ignore", invalid="ignore"):
        phase = np.where(keep, np.exp(-1j * gap * t / HBAR), 0.0)
    h = dipole * field_value * phase
    # diagonal: mu_jj E(t) plus whatever part of E_j the frame leaves behind
    np.fill_diagonal(h, np.diag(dipole) * field_value + diagonal_energies(energies, mode))
    return h


def transformed_coupling_full(dipole, energies, field_value, t, im_threshold=0.5):
    """``H~_ij(t) = mu_ij E(t) exp(-i (E_j - E_i) t)``; zero diagonal for mu_jj = 0."""
    return _transformed(dipole, energies, field_value, t, "full", im_threshold)


def transformed_coupling_real(dipole, energies, field_value, t):
    """Real-part frame: unimodular phases, diagonal ``i Im(E_j)``."""
    return _transformed(dipole, energies, field_value, t, "real-part", np.inf)


def back_transform(psi_tilde, times, energies, mode: str) -> np.ndarray:
    """Restore ``<j|Psi(t)> = <j|Psi~(t)> exp(-i E_j t)`` (``Re E_j`` in real-part mode).

    ``psi_tilde`` has shape ``(len(times), n)``.
    """
    if mode == "direct":
        raise ConfigError("back_transform needs an interaction frame", "mode")
    frame = frame_energies(energies, mode)
    times = np.asarray(times, dtype=float)
    return np.asarray(psi_tilde) * np.exp(-1j * np.outer(times, frame) / HBAR)
