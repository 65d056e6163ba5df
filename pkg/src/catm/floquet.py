"""Pulses, time-dependent absorbers and the matrix-free Floquet operator.

Extended vectors are complex arrays of shape ``(N, n_states)``: row ``i`` is
the molecular block at time ``t_i`` (DVR) or Fourier slot ``i`` (FBR), so the
molecular index runs fastest in memory and the flattened index is
``i * n_states + j``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .errors import ConfigError
from .interaction import (
    coupling_mask,
    diagonal_energies,
    filtered_pairs,
    frame_energies,
    RepresentationConfig,
)
from .timegrid import (
    HBAR,
    TimeGrid,
    apply_time_derivative,
    dvr_to_fbr,
    fbr_to_dvr,
)

ENVELOPES = ("gaussian", "gaussian-plateau", "flat-top", "constant")
ABSORBER_SHAPES = ("sinc2", "cos4")
EDGE_TOLERANCE = 1e-12


class PulseEdgeWarning(UserWarning):
    """Pulse envelope not negligible at the ends of the physical interval."""


@dataclass(frozen=True)
class PulseSpec:
    """Linearly polarized pulse ``E(t) = E0 f(t) cos(w t + phase)`` on ``[0, T0]``.

    Envelopes ``f``:

    * ``gaussian``: ``exp(-((t - center)/width)^2)``
    * ``gaussian-plateau``: flat for ``|t - center| <= plateau/2``, gaussian
      flanks of the given width outside
    * ``flat-top``: ``(erf((t - t1)/width) - erf((t - t2)/width)) / 2`` with
      ``t1, t2 = center -/+ plateau/2``; infinitely smooth
    * ``constant``: 1 on the whole interval
    """

    amplitude: float
    frequency: float
    duration: float
    envelope: str = "gaussian"
    width: float = 1000.0
    center: float | None = None
    plateau: float = 0.0
    phase: float = 0.0
    warn_edges: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.envelope not in ENVELOPES:
            raise ConfigError(f"unknown envelope {self.envelope!r}", "envelope")
        if not self.duration > 0:
            raise ConfigError("must be > 0", "duration")
        if self.envelope != "constant" and not self.width > 0:
            raise ConfigError("must be > 0", "width")
        if self.plateau < 0:
            raise ConfigError("must be >= 0", "plateau")
        if self.warn_edges and self.amplitude != 0:
            edge = max(abs(self.envelope_value(0.0)), abs(self.envelope_value(self.duration)))
            if edge > EDGE_TOLERANCE:
                warnings.warn(
                    f"pulse envelope is {edge:.2e} of peak at the interval ends; "
                    "the periodic time basis sees a discontinuity",
                    PulseEdgeWarning,
                    stacklevel=3,
                )

    @property
    def t_center(self) -> float:
        return self.duration / 2 if self.center is None else self.center

    def envelope_value(self, t):
        t = np.asarray(t, dtype=float)
        c, w, half = self.t_center, self.width, self.plateau / 2
        if self.envelope == "gaussian":
            f = np.exp(-(((t - c) / w) ** 2))
        elif self.envelope == "gaussian-plateau":
            excess = np.clip(np.abs(t - c) - half, 0.0, None)
            f = np.exp(-((excess / w) ** 2))
        elif self.envelope == "flat-top":
            f = 0.5 * (erf((t - c + half) / w) - erf((t - c - half) / w))
        else:
            f = np.ones_like(t)
        return f

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0) & (t <= self.duration)
        value = self.amplitude * self.envelope_value(t) * np.cos(self.frequency * t + self.phase)
        return np.where(inside, value, 0.0)


@dataclass(frozen=True)
class PulseWindow:
    """The slice ``[offset, offset + duration]`` of a field, re-based to ``t = 0``."""

    source: object
    offset: float
    duration: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0) & (t <= self.duration)
        return np.where(inside, self.source(t + self.offset), 0.0)


def evaluate_pulse(pulse, t):
    """Field value(s) at ``t``; zero outside the physical interval."""
    return pulse(t)


@dataclass(frozen=True)
class AbsorberEnvelope:
    """Imaginary bell ``-i V0 g((t - t_c)/dT)`` on ``[start, start + dT]``.

    ``shape='sinc2'`` uses ``g(u) = sinc^2(u)`` with ``sinc(u) = sin(u)/u``,
    which does not vanish at the window edges. ``shape='cos4'`` uses
    ``cos^4(pi u)``, whose first three derivatives vanish at the edges, and
    keeps the Fourier time representation spectrally accurate.
    """

    amplitude: float
    start: float
    duration: float
    shape: str = "sinc2"

    def __post_init__(self):
        if self.amplitude < 0:
            raise ConfigError("must be >= 0", "amplitude")
        if not self.duration > 0:
            raise ConfigError("must be > 0", "duration")
        if self.shape not in ABSORBER_SHAPES:
            raise ConfigError(f"unknown absorber shape {self.shape!r}", "shape")

    @classmethod
    def for_grid(cls, amplitude, grid: TimeGrid, shape="sinc2"):
        return cls(amplitude, grid.physical_duration, grid.absorbing_duration, shape)

    @property
    def center(self) -> float:
        return self.start + self.duration / 2

    @property
    def area_factor(self) -> float:
        """``int g(u) du`` over the window, in units of ``dT``."""
        if self.shape == "cos4":
            return 3.0 / 8.0
        u = np.linspace(-0.5, 0.5, 2001)
        return float(np.trapezoid(np.sinc(u / np.pi) ** 2, u))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        u = (t - self.center) / self.duration
        if self.shape == "sinc2":
            g = np.sinc(u / np.pi) ** 2
        else:
            g = np.cos(np.pi * u) ** 4
        inside = (t >= self.start) & (t <= self.start + self.duration)
        return np.where(inside, -1j * self.amplitude * g, 0.0)


def evaluate_absorber(envelope: AbsorberEnvelope, t):
    return envelope(t)


class ConstrainedAbsorber:
    """Time-dependent absorbing operator that pins ``Psi(0)``.

    In each time block the matrix is ``V(t)`` on the diagonal except row
    ``l`` (the dominant component of ``Psi(0)``), which is entirely zero, and
    column ``l`` carries ``-(Psi0_j / Psi0_l) (V(t) + E_j - E_l)``. ``Psi(0)``
    is then an eigenvector of ``diag(E) + absorber`` with eigenvalue ``E_l``
    while every other direction is damped.
    """

    def __init__(self, envelope: AbsorberEnvelope, initial_state, energies):
        self.envelope = envelope
        self.initial_state = np.asarray(initial_state, dtype=complex)
        self.energies = np.asarray(energies, dtype=complex)
        if self.initial_state.shape != self.energies.shape:
            raise ValueError("initial state and energies differ in length")
        self.pivot = int(np.argmax(np.abs(self.initial_state)))
        lead = self.initial_state[self.pivot]
        if abs(lead) < 1e-14:
            raise ConfigError("initial state has no component above 1e-14", "initial_state")
        self.column_factors = -self.initial_state / lead
        self.column_factors[self.pivot] = 0.0
        self.is_pure = not np.any(self.column_factors)

    def values(self, times):
        return self.envelope(times)

    def apply(self, times, data, values=None):
        """Apply the absorber to every block of ``data`` (shape ``(len(times), n)``)."""
        v = self.values(times) if values is None else values
        l = self.pivot
        out = v[:, None] * data
        if not self.is_pure:
            active = v != 0
            gap = self.energies - self.energies[l]
            col = self.column_factors[None, :] * (v[:, None] + gap[None, :])
            out += np.where(active[:, None], col, 0.0) * data[:, l : l + 1]
        out[:, l] = 0.0
        return out

    def apply_block(self, t, block):
        block = np.asarray(block, dtype=complex)
        return self.apply(np.atleast_1d(t), block[None, :])[0]

    def matrix(self, t):
        """Dense ``(n, n)`` block at a single time."""
        v = complex(self.values(np.atleast_1d(t))[0])
        n = len(self.energies)
        m = np.diag(np.full(n, v))
        if v != 0 and not self.is_pure:
            m[:, self.pivot] += self.column_factors * (v + self.energies - self.energies[self.pivot])
        m[self.pivot, :] = 0.0
        return m


def molecular_hamiltonian(energies, dipole, field):
    """``h(t) = diag(E) + E(t) mu`` as a callable returning dense matrices."""
    energies = np.asarray(energies, dtype=complex)
    dipole = np.asarray(dipole, dtype=complex)
    base = np.diag(energies)

    def h(t):
        return base + float(field(t)) * dipole

    return h


class FloquetOperator:
    """Matrix-free ``H_F = H(t) + V_abs(t) - i hbar d/dt`` on the extended space.

    ``absorber`` may be an :class:`AbsorberEnvelope` (then ``initial_state``
    is required and the constrained absorber is built with this
    representation's diagonal energies), a ready :class:`ConstrainedAbsorber`,
    or ``None``.
    """

    def __init__(
        self,
        energies,
        dipole,
        field,
        grid: TimeGrid,
        absorber=None,
        initial_state=None,
        representation: str | RepresentationConfig = "direct",
        im_threshold: float = 0.5,
    ):
        if isinstance(representation, RepresentationConfig):
            im_threshold = representation.im_threshold
            representation = representation.mode
        RepresentationConfig(representation, im_threshold)
        self.energies = np.asarray(energies, dtype=complex)
        n = len(self.energies)
        self.dipole = np.asarray(dipole, dtype=complex)
        if self.dipole.shape != (n, n):
            raise ValueError(f"dipole shape {self.dipole.shape} != ({n}, {n})")
        self.field = field
        self.grid = grid
        self.representation = representation
        self.im_threshold = im_threshold
        self.times = grid.points
        self.field_values = np.asarray(field(self.times), dtype=float)

        self.diagonal = diagonal_energies(self.energies, representation)
        if representation == "direct":
            self.coupling = self.dipole
            self._phase = self._phase_inv = None
            self.n_filtered = 0
        else:
            keep = coupling_mask(self.energies, im_threshold, representation)
            self.n_filtered = filtered_pairs(self.dipole, self.energies, im_threshold) \
                if representation == "full" else 0
            self.coupling = np.where(keep, self.dipole, 0.0)
            np.fill_diagonal(self.coupling, np.diag(self.dipole))
            frame = frame_energies(self.energies, representation)
            kept = keep.any(axis=0) | (representation != "full")
            exponent = np.abs(np.outer(self.times, frame[kept].imag)).max(initial=0.0)
            if exponent > 600:
                raise ConfigError(
                    f"interaction phases reach exp({exponent:.0f}); lower im_threshold",
                    "representation.im_threshold",
                )
            frame = np.where(kept, frame, 0.0)
            self._phase = np.exp(-1j * np.outer(self.times, frame) / HBAR)
            self._phase_inv = np.exp(1j * np.outer(self.times, frame) / HBAR)

        if isinstance(absorber, AbsorberEnvelope):
            if initial_state is None:
                raise ConfigError("an absorber envelope needs the initial state", "initial_state")
            absorber = ConstrainedAbsorber(absorber, initial_state, self.diagonal)
        self.absorber = absorber
        self.absorber_values = (
            None if absorber is None else np.asarray(absorber.values(self.times))
        )

    @property
    def n_states(self) -> int:
        return len(self.energies)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.grid.n_modes, self.n_states)

    def _check(self, v):
        v = np.asarray(v, dtype=complex)
        if v.shape != self.shape:
            raise ValueError(f"extended vector shape {v.shape} != {self.shape}")
        return v

    def apply_blocks(self, data):
        """Time-local part ``H(t_i) + V_abs(t_i)`` on DVR data."""
        out = data * self.diagonal
        f = self.field_values[:, None]
        if self._phase is None:
            out += f * (data @ self.coupling.T)
        else:
            out += self._phase_inv * (f * ((data * self._phase) @ self.coupling.T))
        if self.absorber is not None:
            out += self.absorber.apply(self.times, data, self.absorber_values)
        return out

    def apply_dvr(self, v):
        v = self._check(v)
        return self.apply_blocks(v) + apply_time_derivative(v, self.grid)

    def apply_fbr(self, c):
        c = self._check(c)
        local = dvr_to_fbr(self.apply_blocks(fbr_to_dvr(c)))
        return local + self.grid.derivative_eigenvalues[:, None] * c

    def block_matrices(self) -> np.ndarray:
        """Dense ``(N, n, n)`` array of ``H(t_i) + V_abs(t_i)``."""
        blocks = self.field_values[:, None, None] * self.coupling[None]
        if self._phase is not None:
            blocks = self._phase_inv[:, :, None] * blocks * self._phase[:, None, :]
        idx = np.arange(self.n_states)
        blocks[:, idx, idx] += self.diagonal
        if self.absorber is not None:
            blocks += np.array([self.absorber.matrix(t) for t in self.times])
        return blocks

    def block_row(self, j) -> np.ndarray:
        """Row ``j`` of every time block, shape ``(N, n)``."""
        unit = np.zeros(self.n_states)
        unit[j] = 1.0
        # row j of M equals (M^T e_j); build it column-wise from the blocks' definition
        f = self.field_values[:, None]
        row = f * self.coupling[j][None, :]
        if self._phase is not None:
            row = self._phase_inv[:, j : j + 1] * row * self._phase
        row = row + unit[None, :] * self.diagonal[j]
        if self.absorber is not None:
            a = self.absorber
            v = self.absorber_values
            if j != a.pivot:
                row = row + v[:, None] * unit[None, :]
                if not a.is_pure:
                    gap = a.energies[j] - a.energies[a.pivot]
                    row[:, a.pivot] += np.where(v != 0, a.column_factors[j] * (v + gap), 0.0)
        return row

    def block_diagonal(self) -> np.ndarray:
        """Diagonal of every time block, shape ``(N, n)``."""
        diag = self.field_values[:, None] * np.diag(self.coupling)[None, :] + self.diagonal
        if self.absorber is not None:
            v = self.absorber_values[:, None] * np.ones(self.n_states)
            v[:, self.absorber.pivot] = 0.0
            diag = diag + v
        return diag

    def fbr_diagonal(self) -> np.ndarray:
        """Diagonal of H_F in the Fourier basis, shape ``(N, n)``."""
        mean = self.block_diagonal().mean(axis=0)
        return mean[None, :] + self.grid.derivative_eigenvalues[:, None]

    def fbr_row(self, alpha) -> np.ndarray:
        """Row ``alpha = (slot, j)`` of H_F in the Fourier basis, shape ``(N, n)``."""
        slot, j = alpha
        n_modes = self.grid.n_modes
        row = self.block_row(j)
        shift = np.exp(2j * np.pi * self.grid.mode_indices[slot] * np.arange(n_modes) / n_modes)
        out = np.fft.fft(row * shift[:, None], axis=0) / n_modes
        out[slot, j] += self.grid.derivative_eigenvalues[slot]
        return out


def apply_floquet(op: FloquetOperator, v):
    """``H_F v`` for a DVR extended vector."""
    return op.apply_dvr(v)


def time_derivative_matrix(grid: TimeGrid) -> np.ndarray:
    """Dense DVR matrix of ``-i hbar d/dt``."""
    u = fbr_to_dvr(np.eye(grid.n_modes))
    return (u * grid.derivative_eigenvalues) @ u.conj().T


def assemble_dense(op: FloquetOperator, basis: str = "dvr") -> np.ndarray:
    """Explicit ``(N n) x (N n)`` matrix of H_F (Kronecker assembly)."""
    n_modes, n = op.shape
    h = np.kron(time_derivative_matrix(op.grid), np.eye(n)).astype(complex)
    blocks = op.block_matrices()
    for i in range(n_modes):
        h[i * n : (i + 1) * n, i * n : (i + 1) * n] += blocks[i]
    if basis == "dvr":
        return h
    if basis == "fbr":
        u = np.kron(fbr_to_dvr(np.eye(n_modes)), np.eye(n))
        return u.conj().T @ h @ u
    raise ValueError(f"unknown basis {basis!r}")
