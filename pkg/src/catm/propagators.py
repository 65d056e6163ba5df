"""Step-by-step reference propagators.

* :func:`sod_propagate` - three-point second-order differencing in the
  molecular eigenbasis.
* :func:`split_operator_propagate` - symmetric kinetic/potential splitting on
  the coordinate grid, with the inter-surface coupling split off again.
* :func:`dense_expm_oracle` - midpoint exponentials with Richardson
  extrapolation; slow but accurate to ~1e-12, used as ground truth.

All three sample ``H(t)`` at step midpoints and return ``(times, states)``
with ``states[k]`` the wavefunction at ``times[k]``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError
from .spatial import SpatialGrid, SurfaceModel
from .timegrid import HBAR

ORACLE_MAX_DIM = 64


class StabilityWarning(UserWarning):
    """A step-by-step scheme is run outside its safe regime."""


@dataclass(frozen=True)
class StepConfig:
    n_steps: int
    duration: float
    record_every: int | None = None

    def __post_init__(self):
        if self.n_steps < 1:
            raise ConfigError("must be >= 1", "n_steps")
        if not self.duration > 0:
            raise ConfigError("must be > 0", "duration")
        if self.record_every is not None and self.record_every < 1:
            raise ConfigError("must be >= 1", "record_every")

    @property
    def dt(self) -> float:
        return self.duration / self.n_steps

    @property
    def stride(self) -> int:
        return self.n_steps if self.record_every is None else self.record_every

    def record_steps(self) -> np.ndarray:
        steps = np.arange(0, self.n_steps + 1, self.stride)
        if steps[-1] != self.n_steps:
            steps = np.append(steps, self.n_steps)
        return steps


class MolecularHamiltonian:
    """``H(t) = diag(E) + E(t) mu`` in a molecular eigenbasis."""

    def __init__(self, energies, dipole, field):
        self.energies = np.asarray(energies, dtype=complex)
        self.dipole = np.asarray(dipole, dtype=complex)
        self.field = field

    @property
    def dim(self) -> int:
        return len(self.energies)

    def __call__(self, t) -> np.ndarray:
        return np.diag(self.energies) + float(self.field(t)) * self.dipole

    def batch(self, times) -> np.ndarray:
        f = np.asarray(self.field(np.asarray(times, float)), dtype=float)
        h = f[:, None, None] * self.dipole[None]
        idx = np.arange(self.dim)
        h[:, idx, idx] += self.energies
        return h

    def apply(self, t, psi):
        return self.energies * psi + float(self.field(t)) * (self.dipole @ psi)

    @property
    def hermitian(self) -> bool:
        return bool(np.allclose(self.energies.imag, 0, atol=1e-14)
                    and np.allclose(self.dipole, self.dipole.conj().T, atol=1e-14))


class _MatrixProvider:
    """Adapter for a plain ``t -> matrix`` callable."""

    def __init__(self, h):
        self.h = h
        self.dim = np.asarray(h(0.0)).shape[0]

    def __call__(self, t):
        return np.asarray(self.h(t), dtype=complex)

    def batch(self, times):
        return np.array([self(t) for t in times])

    def apply(self, t, psi):
        return self(t) @ psi

    @property
    def hermitian(self) -> bool:
        h = self(0.0)
        return bool(np.allclose(h, h.conj().T, atol=1e-14))


def _provider(h):
    return h if hasattr(h, "apply") else _MatrixProvider(h)


def sod_propagate(h_provider, psi0, cfg: StepConfig):
    """``psi(t + dt) = psi(t - dt) - 2 i dt H(t) psi(t)``.

    The first step is one exact exponential step. A :class:`StabilityWarning`
    is issued for non-Hermitian ``H`` or for ``dt * E_max >= 1`` (a heuristic
    bound; the scheme blows up beyond roughly that point).
    """
    h = _provider(h_provider)
    dt = cfg.dt
    if not h.hermitian:
        warnings.warn("SOD is only stable for Hermitian Hamiltonians", StabilityWarning,
                      stacklevel=2)
    e_max = float(np.max(np.abs(np.linalg.eigvals(h(0.0))))) if h.dim <= 512 else 0.0
    if dt * e_max / HBAR >= 1.0:
        warnings.warn(
            f"dt * E_max = {dt * e_max:.3g} >= 1: the SOD recursion will diverge",
            StabilityWarning,
            stacklevel=2,
        )
    psi_prev = np.asarray(psi0, dtype=complex).copy()
    psi = scipy.linalg.expm(-1j * dt / HBAR * h(0.5 * dt)) @ psi_prev
    record = set(cfg.record_steps().tolist())
    times, states = [0.0], [psi_prev.copy()]
    if 1 in record:
        times.append(dt)
        states.append(psi.copy())
    for step in range(1, cfg.n_steps):
        psi_next = psi_prev - 2j * dt / HBAR * h.apply(step * dt, psi)
        psi_prev, psi = psi, psi_next
        if step + 1 in record:
            times.append((step + 1) * dt)
            states.append(psi.copy())
    return np.array(times), np.array(states)


def split_operator_propagate(grid: SpatialGrid, model: SurfaceModel, field, psi0,
                             cfg: StepConfig, include_cap: bool = True):
    """Strang splitting ``K/2, V0/2, W, V0/2, K/2`` on the two-surface grid.

    ``psi0`` has shape ``(2, n_points)`` (ground, excited). ``W`` couples the
    surfaces through ``mu(x) E(t)`` sampled at the step midpoint; its
    exponential is ``cos(W dt) - i sin(W dt) sigma_x`` pointwise in ``x``.
    """
    psi = np.array(psi0, dtype=complex).reshape(2, grid.n_points)
    dt = cfg.dt
    x = grid.x
    kin = np.exp(-0.5j * dt * HBAR * grid.k**2 / (2.0 * model.mass))
    v0 = np.array([model.ground_potential(x), model.excited_potential(x)], dtype=complex)
    v0 = v0 * np.ones_like(x)
    if include_cap and model.cap_strength > 0:
        v0 = v0 + model.cap(x, grid)[None, :]
    half_v = np.exp(-0.5j * dt * v0 / HBAR)
    mu = np.asarray(model.dipole(x), dtype=float) * np.ones_like(x)
    record = set(cfg.record_steps().tolist())
    times, states = [0.0], [psi.copy()]

    def half_kinetic(p):
        return np.fft.ifft(kin * np.fft.fft(p, axis=1), axis=1)

    for step in range(cfg.n_steps):
        w = mu * float(field((step + 0.5) * dt)) * dt / HBAR
        c, s = np.cos(w), np.sin(w)
        psi = half_v * half_kinetic(psi)
        psi = np.array([c * psi[0] - 1j * s * psi[1], c * psi[1] - 1j * s * psi[0]])
        psi = half_kinetic(half_v * psi)
        if step + 1 in record:
            times.append((step + 1) * dt)
            states.append(psi.copy())
    return np.array(times), np.array(states)


def _midpoint_exponential(h, psi0, n_steps, duration, record_steps, n_records, chunk=4096):
    """Product of midpoint exponentials; states at ``record_steps * (n_steps / n_records)``."""
    scale = n_steps // n_records
    wanted = {int(r) * scale for r in record_steps}
    dt = duration / n_steps
    psi = np.asarray(psi0, dtype=complex).copy()
    out = {0: psi.copy()} if 0 in wanted else {}
    step = 0
    while step < n_steps:
        stop = min(step + chunk, n_steps)
        mids = (np.arange(step, stop) + 0.5) * dt
        props = scipy.linalg.expm(-1j * dt / HBAR * h.batch(mids))
        for u in props:
            psi = u @ psi
            step += 1
            if step in wanted:
                out[step] = psi.copy()
    return np.array([out[int(r) * scale] for r in record_steps])


def dense_expm_oracle(h_provider, psi0, cfg: StepConfig, tolerance: float = 1e-12,
                      max_levels: int = 8):
    """Reference solution accurate to about ``tolerance``.

    The symmetric midpoint-exponential product has an error expansion in even
    powers of the step, so successive step doublings are combined in a
    Richardson table until two diagonal entries agree (in probability) to
    ``tolerance``. ``cfg.n_steps`` is the coarsest step count and must be a
    multiple of the number of recording intervals.
    """
    h = _provider(h_provider)
    if h.dim > ORACLE_MAX_DIM:
        raise ConfigError(f"oracle limited to {ORACLE_MAX_DIM} states, got {h.dim}", "n_states")
    records = cfg.record_steps()
    n_records = cfg.n_steps
    table: list[np.ndarray] = []
    previous = None
    for level in range(max_levels):
        n = cfg.n_steps * 2**level
        row = [_midpoint_exponential(h, psi0, n, cfg.duration, records, n_records)]
        for k, earlier in enumerate(table):
            factor = 4.0 ** (k + 1)
            row.append((factor * row[k] - earlier) / (factor - 1))
        best = row[-1]
        if previous is not None:
            change = np.max(np.abs(np.abs(best) ** 2 - np.abs(previous) ** 2))
            if change < tolerance:
                return records * cfg.dt, best
        table = row
        previous = best
    warnings.warn(f"oracle did not reach {tolerance:.0e} after {max_levels} levels",
                  StabilityWarning, stacklevel=2)
    return records * cfg.dt, previous


def floquet_energy_span(max_energy: float, n_modes: int, total_duration: float) -> float:
    """``max(E) + N 2 pi hbar / T``: spectral width of the Floquet operator."""
    return max_energy + n_modes * 2.0 * np.pi * HBAR / total_duration


def chebyshev_iteration_bound(energy_span: float, total_time: float) -> int:
    """Minimum Chebyshev order ``ceil(dE T / (2 hbar))`` for a global propagation."""
    if not energy_span > 0 or not total_time > 0:
        raise ConfigError("energy span and time must be > 0")
    return int(math.ceil(energy_span * total_time / (2.0 * HBAR) - 1e-12))
