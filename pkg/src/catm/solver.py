"""Wave-operator solution of the constrained Floquet eigenproblem.

The solver works on Fourier (FBR) extended vectors of shape ``(N, n)``. It
needs from the operator only ``shape``, ``apply_fbr``, ``fbr_diagonal`` and
``fbr_row``, so any object with that interface (for instance
:class:`MatrixOperator`) can be solved.

One RDWA sweep with ``Omega = e_alpha + X``::

    w      = H_F Omega
    H_eff  = w[alpha]
    r      = w - H_eff Omega                  # also the residual
    H'_f   = (H_F)_ff - X_f (H_F)_alpha,f     # diagonal of (1 - X) H_F
    X_f   += r_f / (H_eff - H'_f)

The Krylov variant feeds each correction into an orthonormal subspace and
picks the Ritz vector whose ``t = 0`` block overlaps the initial state most.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DivergenceError, NearDegeneracyError, SelectionError
from .interaction import back_transform
from .timegrid import HBAR, TimeGrid, fbr_to_dvr, fourier_interpolate

log = logging.getLogger(__name__)

DEGENERACY_FLOOR = 1e-14
JUMP_FACTOR = 10.0


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = 1e-12
    max_iterations: int = 500
    use_krylov: bool = False
    k_max: int = 50
    freeze_diagonal: bool = False
    growth_limit: float = 1e6
    growth_window: int = 10
    stall_factor: float = 0.999
    stall_window: int = 20

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.k_max < 2:
            raise ValueError("k_max must be >= 2")


class MatrixOperator:
    """Dense matrix posing as an extended-space operator (FBR layout ``(N, n)``)."""

    def __init__(self, matrix, n_modes: int = 1):
        self.matrix = np.asarray(matrix, dtype=complex)
        size = self.matrix.shape[0]
        if self.matrix.shape != (size, size) or size % n_modes:
            raise ValueError("matrix must be square with size divisible by n_modes")
        self.shape = (n_modes, size // n_modes)

    def apply_fbr(self, c):
        return (self.matrix @ np.ravel(c)).reshape(self.shape)

    def fbr_diagonal(self):
        return np.diag(self.matrix).reshape(self.shape).copy()

    def fbr_row(self, alpha):
        index = alpha[0] * self.shape[1] + alpha[1]
        return self.matrix[index].reshape(self.shape).copy()


@dataclass(frozen=True)
class ActiveProjector:
    """The single extended basis vector ``|alpha> = |mode 0> x |j*>``."""

    slot: int
    state: int

    @property
    def alpha(self) -> tuple[int, int]:
        return (self.slot, self.state)

    @classmethod
    def from_trial(cls, trial):
        """Largest-modulus component of an FBR trial; ties go to the lowest state index."""
        trial = np.asarray(trial)
        flat = int(np.argmax(np.abs(trial)))
        slot, state = np.unravel_index(flat, trial.shape)
        return cls(int(slot), int(state))


def build_trial(initial_state, grid: TimeGrid | int) -> np.ndarray:
    """Initial state spread over every time point, returned in the FBR.

    A constant time profile lives entirely in the ``n = 0`` slot, with
    weight ``sqrt(N)``.
    """
    psi0 = np.asarray(initial_state, dtype=complex)
    norm = np.linalg.norm(psi0)
    if norm == 0:
        raise ValueError("initial state is zero")
    n_modes = grid if isinstance(grid, int) else grid.n_modes
    trial = np.zeros((n_modes, len(psi0)), dtype=complex)
    trial[0] = np.sqrt(n_modes) * psi0
    return trial


def t0_block(c) -> np.ndarray:
    """Molecular block at ``t = 0`` of an FBR vector."""
    c = np.asarray(c)
    return c.sum(axis=0) / np.sqrt(c.shape[0])


@dataclass
class RdwaState:
    omega: np.ndarray
    alpha: tuple[int, int]
    h_eff: complex = 0j
    residual: float = np.inf
    iteration: int = 0
    history: list = field(default_factory=list)

    @property
    def X(self) -> np.ndarray:
        x = self.omega.copy()
        x[self.alpha] = 0.0
        return x

    @classmethod
    def from_trial(cls, trial, projector: ActiveProjector):
        trial = np.asarray(trial, dtype=complex)
        return cls(omega=trial / trial[projector.alpha], alpha=projector.alpha)


def _rdwa_step(omega, w, alpha, diagonal, alpha_row, freeze):
    """Residual and RDWA correction for ``Omega`` given ``w = H_F Omega``."""
    h_eff = w[alpha]
    r = w - h_eff * omega
    r[alpha] = 0.0
    if freeze:
        distorted = diagonal
    else:
        distorted = diagonal - omega * alpha_row
    denom = h_eff - distorted
    denom[alpha] = 1.0
    small = np.abs(denom) < DEGENERACY_FLOOR
    small[alpha] = False
    if small.any():
        flat = int(np.flatnonzero(small.ravel())[0])
        index = tuple(int(i) for i in np.unravel_index(flat, denom.shape))
        raise NearDegeneracyError(index, denom.ravel()[flat])
    correction = r / denom
    correction[alpha] = 0.0
    return h_eff, r, correction


def rdwa_iterate(state: RdwaState, op, projector: ActiveProjector | None = None,
                 freeze_diagonal=False, diagonal=None, alpha_row=None) -> RdwaState:
    """One RDWA sweep (one operator application). Returns the updated state."""
    alpha = state.alpha if projector is None else projector.alpha
    if diagonal is None:
        diagonal = op.fbr_diagonal()
    if alpha_row is None:
        alpha_row = op.fbr_row(alpha)
    w = op.apply_fbr(state.omega)
    h_eff, r, correction = _rdwa_step(state.omega, w, alpha, diagonal, alpha_row, freeze_diagonal)
    residual = float(np.linalg.norm(r) / np.linalg.norm(state.omega))
    history = state.history + [(state.iteration + 1, residual, h_eff)]
    omega = state.omega + correction
    omega[alpha] = 1.0
    return RdwaState(omega, alpha, h_eff, residual, state.iteration + 1, history)


class KrylovBasis:
    """Orthonormal extended vectors with their images under ``H_F``."""

    def __init__(self, op, k_max: int = 50):
        self.op = op
        self.k_max = k_max
        self.vectors: list[np.ndarray] = []
        self.images: list[np.ndarray] = []
        self.starts: list[np.ndarray] = []
        self.reduced = np.zeros((0, 0), dtype=complex)

    def __len__(self):
        return len(self.vectors)

    @property
    def full(self) -> bool:
        return len(self.vectors) >= self.k_max

    def gram(self) -> np.ndarray:
        v = np.array([x.ravel() for x in self.vectors])
        return v.conj() @ v.T

    def extend(self, correction) -> bool:
        """Orthogonalize and append; ``False`` reports linear dependence."""
        v = np.array(correction, dtype=complex)
        scale = np.linalg.norm(v)
        if not np.isfinite(scale) or scale == 0:
            return False
        v = v / scale
        for _ in range(2):
            for e in self.vectors:
                v -= np.vdot(e, v) * e
        norm = np.linalg.norm(v)
        if norm <= 1e-12:
            return False
        v /= norm
        hv = self.op.apply_fbr(v)
        k = len(self.vectors)
        reduced = np.zeros((k + 1, k + 1), dtype=complex)
        reduced[:k, :k] = self.reduced
        for i, (e, he) in enumerate(zip(self.vectors, self.images)):
            reduced[i, k] = np.vdot(e, hv)
            reduced[k, i] = np.vdot(v, he)
        reduced[k, k] = np.vdot(v, hv)
        self.vectors.append(v)
        self.images.append(hv)
        self.starts.append(t0_block(v))
        self.reduced = reduced
        return True

    def combine(self, y) -> tuple[np.ndarray, np.ndarray]:
        """``(V y, H_F V y)`` without another operator application."""
        z = sum(c * e for c, e in zip(y, self.vectors))
        hz = sum(c * he for c, he in zip(y, self.images))
        return z, hz


def krylov_extend(basis: KrylovBasis, correction) -> tuple[KrylovBasis, bool]:
    appended = basis.extend(correction)
    return basis, appended


def _ritz_pairs(basis: KrylovBasis):
    energies, y = scipy.linalg.eig(basis.reduced)
    return energies, y / np.linalg.norm(y, axis=0)


def krylov_select(basis: KrylovBasis, initial_state, overlap_floor=1e-6):
    """Ritz vector whose ``t = 0`` block overlaps ``initial_state`` most.

    Returns ``(energy, vector, image)``; ties are broken by the smaller
    ``|Im E|``. The columns are orthonormal, so overlaps come from the cached
    ``t = 0`` blocks without forming every Ritz vector.
    """
    psi0 = np.asarray(initial_state, dtype=complex)
    psi0 = psi0 / np.linalg.norm(psi0)
    energies, y = _ritz_pairs(basis)
    overlaps = np.abs((np.array(basis.starts) @ psi0.conj()) @ y)
    keys = [(round(float(o), 12), -abs(e.imag)) for o, e in zip(overlaps, energies)]
    k = max(range(len(keys)), key=keys.__getitem__)
    if overlaps[k] < overlap_floor:
        raise SelectionError(f"largest t=0 overlap {overlaps[k]:.2e} below {overlap_floor:.0e}")
    z, hz = basis.combine(y[:, k])
    return energies[k], z, hz


def _closest_ritz(basis: KrylovBasis, previous):
    """Ritz vector with the largest overlap with the previous iterate."""
    energies, y = _ritz_pairs(basis)
    coords = np.array([np.vdot(e, previous) for e in basis.vectors])
    k = int(np.argmax(np.abs(coords.conj() @ y)))
    z, hz = basis.combine(y[:, k])
    return energies[k], z, hz


@dataclass
class FloquetSolution:
    """Converged (or last) eigenpair in the FBR with intermediate normalization."""

    energy: complex
    vector: np.ndarray
    alpha: tuple[int, int]
    converged: bool
    residual: float
    iterations: int
    history: list
    h_eff: complex = 0j
    pivot_value: complex = 1.0

    @property
    def time_samples(self) -> np.ndarray:
        return fbr_to_dvr(self.vector)


def _residual(op, energy, vector) -> float:
    return float(np.linalg.norm(op.apply_fbr(vector) - energy * vector) / np.linalg.norm(vector))


def _rayleigh(op, vector) -> complex:
    return complex(np.vdot(vector, op.apply_fbr(vector)) / np.vdot(vector, vector))


class _Watchdog:
    """Divergence and stagnation detection on the residual history."""

    def __init__(self, settings: SolverSettings):
        self.s = settings

    def check(self, history):
        res = [h[1] for h in history]
        if not np.isfinite(res[-1]):
            raise DivergenceError("residual is not finite", history)
        g = self.s.growth_window
        if len(res) > g and res[-1] > self.s.growth_limit * min(res[-g - 1 :]):
            raise DivergenceError(
                f"residual grew by more than {self.s.growth_limit:.0e} within {g} iterations",
                history,
            )
        w = self.s.stall_window
        if len(res) > w and min(res[-w:]) > self.s.stall_factor * min(res[: -w]):
            raise DivergenceError(
                f"residual did not decrease by {self.s.stall_factor} over {w} iterations", history
            )


def solve_constrained_floquet(op, initial_state, settings: SolverSettings | None = None,
                              callback=None, **overrides) -> FloquetSolution:
    """Eigenvector of ``H_F`` connected to ``initial_state``.

    ``callback(iteration, residual, h_eff)`` receives one record per
    iteration. Raises :class:`ConvergenceError` (with the residual history)
    when the tolerance is not reached.
    """
    settings = settings or SolverSettings()
    if overrides:
        settings = SolverSettings(**{**settings.__dict__, **overrides})
    n_modes, _ = op.shape
    trial = build_trial(initial_state, n_modes)
    projector = ActiveProjector.from_trial(trial)
    state = RdwaState.from_trial(trial, projector)
    diagonal = op.fbr_diagonal()
    alpha_row = op.fbr_row(projector.alpha)
    if settings.use_krylov:
        return _solve_krylov(op, initial_state, state, diagonal, alpha_row, settings, callback)

    watchdog = _Watchdog(settings)
    for _ in range(settings.max_iterations):
        previous = state.omega
        state = rdwa_iterate(state, op, projector, settings.freeze_diagonal, diagonal, alpha_row)
        if callback:
            callback(*state.history[-1])
        if state.residual < settings.tolerance:
            return _finish(op, previous, state.h_eff, projector.alpha, state.history, settings)
        watchdog.check(state.history)
    raise ConvergenceError(
        f"no convergence in {settings.max_iterations} iterations "
        f"(residual {state.residual:.3e})",
        state.history,
    )


def _finish(op, omega, h_eff, alpha, history, settings, residual=None):
    energy = _rayleigh(op, omega)
    res_q = _residual(op, energy, omega)
    res_h = _residual(op, h_eff, omega) if residual is None else residual
    if res_h < res_q:
        energy, res_q = h_eff, res_h
    return FloquetSolution(
        energy=energy,
        vector=omega,
        alpha=alpha,
        converged=res_q < settings.tolerance,
        residual=res_q,
        iterations=len(history),
        history=history,
        h_eff=h_eff,
    )


def _solve_krylov(op, initial_state, state, diagonal, alpha_row, settings, callback):
    alpha = state.alpha
    watchdog = _Watchdog(settings)
    basis = KrylovBasis(op, settings.k_max)
    basis.extend(state.omega)
    omega = state.omega
    w = basis.images[0] * (np.linalg.norm(omega))
    history = []
    for it in range(1, settings.max_iterations + 1):
        h_eff, r, correction = _rdwa_step(omega, w, alpha, diagonal, alpha_row,
                                          settings.freeze_diagonal)
        residual = float(np.linalg.norm(w - h_eff * omega) / np.linalg.norm(omega))
        history.append((it, residual, h_eff))
        if callback:
            callback(*history[-1])
        if residual < settings.tolerance:
            return _finish(op, omega, h_eff, alpha, history, settings, residual)
        watchdog.check(history)
        if basis.full:
            basis = KrylovBasis(op, settings.k_max)
            basis.extend(omega)
        if not basis.extend(correction):
            log.debug("krylov correction linearly dependent at iteration %d", it)
        energy, z, hz = krylov_select(basis, initial_state)
        jump = np.linalg.norm(hz - energy * z) / np.linalg.norm(z)
        if jump > JUMP_FACTOR * residual:
            # a spurious Ritz vector concentrated near t = 0 won the overlap test
            energy, z, hz = _closest_ritz(basis, omega)
        pivot = z[alpha]
        if abs(pivot) < DEGENERACY_FLOOR:
            raise SelectionError("selected Ritz vector has no pivot component", history)
        omega, w = z / pivot, hz / pivot
    raise ConvergenceError(
        f"no convergence in {settings.max_iterations} iterations "
        f"(residual {history[-1][1]:.3e})",
        history,
    )


def physical_times(grid: TimeGrid, include_end: bool = True) -> np.ndarray:
    """DVR points in ``[0, T0]``, plus ``T0`` itself if it is not a grid point."""
    t = grid.points[grid.physical_mask]
    if include_end and not np.isclose(t[-1], grid.physical_duration, rtol=1e-14, atol=0):
        t = np.append(t, grid.physical_duration)
    return t


def reconstruct_wavefunction(sol: FloquetSolution, grid: TimeGrid, initial_state=None,
                             times=None, representation: str = "direct", energies=None):
    """``Psi(t) = s exp(-i E t) lambda(t)`` on ``times`` (default: physical points).

    ``s`` matches the pivot component of ``Psi(0)`` to ``initial_state``
    (without it, the intermediate normalization is kept). In an interaction
    frame the molecular phases are restored afterwards, which needs the
    field-free ``energies``.
    """
    times = physical_times(grid) if times is None else np.atleast_1d(np.asarray(times, float))
    samples = fourier_interpolate(sol.vector, grid, times)
    psi = samples * np.exp(-1j * sol.energy * times / HBAR)[:, None]
    if initial_state is not None:
        l = sol.alpha[1]
        start = fourier_interpolate(sol.vector, grid, [0.0])[0]
        psi *= np.asarray(initial_state, dtype=complex)[l] / start[l]
    if representation != "direct":
        psi = back_transform(psi, times, energies, representation)
    return times, psi


def residue_epsilon(psi0, initial_index: int) -> float:
    """``max_{j != i} |c_j / c_i|^2`` with the ``i`` component normalized to 1."""
    psi0 = np.asarray(psi0, dtype=complex)
    lead = psi0[initial_index]
    others = np.delete(psi0, initial_index)
    if others.size == 0:
        return 0.0
    return float(np.max(np.abs(others / lead) ** 2))


@dataclass
class ProbabilitySeries:
    times: np.ndarray
    populations: np.ndarray
    dissociation: np.ndarray
    norm: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.populations[-1]

    @property
    def final_dissociation(self) -> float:
        return float(self.dissociation[-1])


def transition_probabilities(times, psi, bound_mask) -> ProbabilitySeries:
    """Populations ``|c_j(t)|^2`` and ``P_diss = 1 - sum_bound |c_j|^2``.

    ``psi`` holds eigenbasis coefficients, shape ``(len(times), n)``; the
    ``norm`` column is the total population ``sum_j |c_j|^2``.
    """
    pops = np.abs(np.asarray(psi)) ** 2
    bound = pops[:, np.asarray(bound_mask, dtype=bool)].sum(axis=1)
    return ProbabilitySeries(np.asarray(times, float), pops, 1.0 - bound, pops.sum(axis=1))
