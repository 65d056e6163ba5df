"""Fourier time basis on the extended periodic interval [0, T].

The finite basis functions are ``<t|n> = exp(-2j*pi*n*t/T) / sqrt(T)`` and the
collocation (DVR) points are ``t_i = i*T/N``. Mode coefficients are stored in
numpy FFT order: slot ``k`` holds mode ``n = k`` for ``k < N/2`` and
``n = k - N`` otherwise (see :attr:`TimeGrid.mode_indices`).

Both transforms are unitary, so Euclidean norms agree between the two
representations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

HBAR = 1.0


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TimeGrid:
    """Periodic time grid ``[0, T0 + dT)`` with ``n_modes`` points."""

    n_modes: int
    physical_duration: float
    absorbing_duration: float

    def __post_init__(self):
        if not _is_power_of_two(int(self.n_modes)) or self.n_modes < 2:
            raise ConfigError(f"must be an even power of two, got {self.n_modes}", "n_modes")
        if not self.physical_duration > 0:
            raise ConfigError("must be > 0", "physical_duration")
        if not self.absorbing_duration > 0:
            raise ConfigError("absorbing tail must exist (> 0)", "absorbing_duration")

    @property
    def total_duration(self) -> float:
        return self.physical_duration + self.absorbing_duration

    @property
    def dt(self) -> float:
        return self.total_duration / self.n_modes

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.n_modes) * self.dt

    @property
    def mode_indices(self) -> np.ndarray:
        """Mode number ``n`` held in each FFT slot."""
        return np.fft.fftfreq(self.n_modes, d=1.0 / self.n_modes).astype(int)

    @property
    def derivative_eigenvalues(self) -> np.ndarray:
        """Eigenvalue of ``-i hbar d/dt`` on each mode: ``-2 pi hbar n / T``."""
        return -2.0 * np.pi * HBAR * self.mode_indices / self.total_duration

    @property
    def physical_mask(self) -> np.ndarray:
        """DVR points inside the physical interval ``[0, T0]``."""
        return self.points <= self.physical_duration * (1 + 1e-14)

    def with_modes(self, n_modes: int) -> "TimeGrid":
        return TimeGrid(n_modes, self.physical_duration, self.absorbing_duration)


def _check_length(samples: np.ndarray, n: int | None, axis: int) -> None:
    if n is not None and samples.shape[axis] != n:
        raise ValueError(f"expected length {n} along axis {axis}, got {samples.shape[axis]}")


def dvr_to_fbr(samples, grid: TimeGrid | None = None, axis: int = 0) -> np.ndarray:
    """Grid samples -> Fourier mode coefficients (unitary)."""
    samples = np.asarray(samples, dtype=complex)
    _check_length(samples, grid.n_modes if grid else None, axis)
    return np.fft.ifft(samples, axis=axis, norm="ortho")


def fbr_to_dvr(coefficients, grid: TimeGrid | None = None, axis: int = 0) -> np.ndarray:
    """Fourier mode coefficients -> grid samples (unitary)."""
    coefficients = np.asarray(coefficients, dtype=complex)
    _check_length(coefficients, grid.n_modes if grid else None, axis)
    return np.fft.fft(coefficients, axis=axis, norm="ortho")


def apply_time_derivative(samples, grid: TimeGrid, axis: int = 0) -> np.ndarray:
    """Apply ``-i hbar d/dt`` to DVR samples along ``axis``."""
    samples = np.asarray(samples, dtype=complex)
    _check_length(samples, grid.n_modes, axis)
    shape = [1] * samples.ndim
    shape[axis] = grid.n_modes
    modes = dvr_to_fbr(samples, axis=axis)
    modes *= grid.derivative_eigenvalues.reshape(shape)
    return fbr_to_dvr(modes, axis=axis)


def fourier_interpolate(coefficients, grid: TimeGrid, times, axis: int = 0) -> np.ndarray:
    """Evaluate the trigonometric interpolant at arbitrary ``times``.

    Consistent with the DVR samples: at ``t = t_i`` this reproduces
    :func:`fbr_to_dvr`. Result has the time axis first.
    """
    coefficients = np.moveaxis(np.asarray(coefficients, dtype=complex), axis, 0)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    phase = np.exp(
        -2j * np.pi * np.outer(times, grid.mode_indices) / grid.total_duration
    )
    flat = coefficients.reshape(grid.n_modes, -1)
    out = phase @ flat / np.sqrt(grid.n_modes)
    return out.reshape((len(times),) + coefficients.shape[1:])
