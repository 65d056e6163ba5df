import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from catm.errors import ConfigError
from catm.floquet import (
    AbsorberEnvelope,
    ConstrainedAbsorber,
    FloquetOperator,
    PulseEdgeWarning,
    PulseSpec,
    PulseWindow,
    apply_floquet,
    assemble_dense,
    evaluate_absorber,
    evaluate_pulse,
)
from catm.timegrid import TimeGrid

from conftest import random_hermitian

SINC_HALF_SQ = (np.sin(0.5) / 0.5) ** 2  # 0.919395...


def test_gaussian_peak():
    omega = 2 * np.pi / 50.0
    pulse = PulseSpec(0.05, omega, 400.0, width=40.0, center=200.0)
    assert np.cos(omega * 200.0) == pytest.approx(1.0)
    assert evaluate_pulse(pulse, 200.0) == pytest.approx(0.05, rel=1e-12)


def test_field_zero_on_tail():
    pulse = PulseSpec(0.05, 0.3, 400.0, width=40.0)
    assert evaluate_pulse(pulse, 400.0 + 35.0) == 0.0
    assert evaluate_pulse(pulse, -1.0) == 0.0


def test_long_pulse_defaults_accepted():
    # exp(-25) ~ 1.4e-11 at the edges: accepted, with a warning only
    with pytest.warns(PulseEdgeWarning):
        pulse = PulseSpec(0.05, 0.2958678, 10000.0, width=1000.0)
    assert pulse.t_center == 5000.0
    assert pulse(5000.0) == pytest.approx(0.05 * np.cos(0.2958678 * 5000.0))


def test_truncated_pulse_warns():
    with pytest.warns(PulseEdgeWarning):
        PulseSpec(0.05, 0.3, 100.0, width=60.0)


@pytest.mark.parametrize("kw", [
    dict(envelope="square"), dict(duration=0.0), dict(width=-1.0), dict(plateau=-2.0),
])
def test_pulse_validation(kw):
    base = dict(amplitude=0.1, frequency=0.2, duration=50.0, width=5.0)
    with pytest.raises(ConfigError):
        PulseSpec(**{**base, **kw})


def test_envelope_shapes():
    plateau = PulseSpec(1.0, 0.0, 100.0, envelope="gaussian-plateau", width=5.0, plateau=40.0)
    assert plateau.envelope_value(np.array([35.0, 50.0, 65.0])) == pytest.approx(1.0)
    assert plateau.envelope_value(75.0) == pytest.approx(np.exp(-1.0))
    flat = PulseSpec(1.0, 0.0, 100.0, envelope="flat-top", width=2.0, plateau=40.0)
    assert flat.envelope_value(50.0) == pytest.approx(1.0, abs=1e-12)
    assert flat.envelope_value(30.0) == pytest.approx(0.5, abs=1e-12)
    const = PulseSpec(0.2, 0.0, 10.0, envelope="constant", warn_edges=False)
    assert np.allclose(const(np.array([0.0, 5.0, 10.0])), 0.2)


def test_pulse_window_rebases():
    pulse = PulseSpec(1.0, 0.1, 100.0, width=15.0)
    window = PulseWindow(pulse, 25.0, 50.0)
    t = np.array([0.0, 10.0, 50.0, 60.0])
    assert np.allclose(window(t), [pulse(25.0), pulse(35.0), pulse(75.0), 0.0])


def test_absorber_envelope_values():
    env = AbsorberEnvelope(0.4, 100.0, 60.0)
    assert env.center == 130.0
    assert evaluate_absorber(env, 130.0) == pytest.approx(-0.4j)
    assert evaluate_absorber(env, 100.0) == pytest.approx(-0.4j * SINC_HALF_SQ, rel=1e-12)
    assert evaluate_absorber(env, 160.0) == pytest.approx(-0.4j * SINC_HALF_SQ, rel=1e-12)
    assert evaluate_absorber(env, 50.0) == 0.0
    assert evaluate_absorber(env, 160.5) == 0.0


def test_cos4_envelope():
    env = AbsorberEnvelope(2.0, 10.0, 20.0, shape="cos4")
    assert env(20.0) == pytest.approx(-2.0j)
    assert abs(env(10.0)) < 1e-15 and abs(env(30.0)) < 1e-15
    u = np.linspace(10, 30, 20001)
    area = np.trapezoid(np.abs(env(u)), u) / (2.0 * 20.0)
    assert area == pytest.approx(env.area_factor, rel=1e-8)


def test_absorber_validation():
    with pytest.raises(ConfigError):
        AbsorberEnvelope(-1.0, 0.0, 1.0)
    with pytest.raises(ConfigError):
        AbsorberEnvelope(1.0, 0.0, 1.0, shape="box")


def constrained(initial, energies, v0=0.3):
    # cos4 window centred at t=1 so that V_abs(1) = -i v0 exactly
    return ConstrainedAbsorber(AbsorberEnvelope(v0, 0.5, 1.0, shape="cos4"), initial, energies)


def test_three_state_column_example():
    absorber = constrained([0.8, 0.6, 0.0], [0.0, 0.5, 1.0])
    assert absorber.pivot == 0
    out = absorber.apply_block(1.0, [1.0, 0.0, 0.0])
    expected = np.array([0.0, -0.75 * (-0.3j + 0.5), 0.0])
    assert np.allclose(out, expected, atol=1e-15)
    assert np.allclose(absorber.matrix(1.0) @ [1.0, 0, 0], expected, atol=1e-15)


def test_pure_state_absorber_is_diagonal():
    absorber = constrained([0, 1.0, 0, 0], [0.0, 0.2, 0.5, 0.7])
    assert absorber.is_pure
    assert np.all(absorber.column_factors == 0)
    block = np.array([1.0, 2.0, -1j, 0.5])
    out = absorber.apply_block(1.0, block)
    assert np.allclose(out, -0.3j * block * np.array([1, 0, 1, 1]))


def test_absorber_zero_before_window():
    absorber = constrained([0.8, 0.6, 0.0], [0.0, 0.5, 1.0])
    assert np.all(absorber.apply_block(0.25, [1.0, 2.0, 3.0]) == 0)


def test_initial_state_is_absorber_null_direction():
    rng = np.random.default_rng(5)
    psi0 = rng.normal(size=4) + 1j * rng.normal(size=4)
    energies = np.array([0.0, 0.3, 0.55, 0.9])
    absorber = constrained(psi0, energies)
    m = np.diag(energies) + absorber.matrix(1.0)
    lead = psi0[absorber.pivot]
    assert np.allclose(m @ psi0, energies[absorber.pivot] * psi0, atol=1e-13 * abs(lead))


def test_pivot_rejects_zero_state():
    with pytest.raises(ConfigError, match="initial_state"):
        constrained([0.0, 1e-16], [0.0, 1.0])


def small_operator(rng, n, n_modes, initial=None, v0=0.4, representation="direct"):
    grid = TimeGrid(n_modes, 12.0, 8.0)
    energies = np.sort(rng.uniform(-0.5, 0.5, n)) - 1j * rng.uniform(0, 0.02, n)
    dipole = random_hermitian(rng, n, 0.3)
    pulse = PulseSpec(0.2, 0.7, grid.physical_duration, width=3.0, warn_edges=False)
    if initial is None:
        initial = rng.normal(size=n) + 1j * rng.normal(size=n)
    env = AbsorberEnvelope.for_grid(v0, grid, "sinc2")
    return FloquetOperator(energies, dipole, pulse, grid, absorber=env, initial_state=initial,
                           representation=representation)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("n_modes", [2, 4, 8, 16])
def test_dense_equivalence(n, n_modes):
    rng = np.random.default_rng(100 * n + n_modes)
    op = small_operator(rng, n, n_modes)
    dense = assemble_dense(op)
    for _ in range(3):
        v = rng.normal(size=op.shape) + 1j * rng.normal(size=op.shape)
        assert np.max(np.abs(apply_floquet(op, v).ravel() - dense @ v.ravel())) < 1e-10


@pytest.mark.parametrize("mode", ["full", "real-part"])
def test_dense_equivalence_in_frames(mode):
    rng = np.random.default_rng(8)
    op = small_operator(rng, 3, 8, representation=mode)
    dense = assemble_dense(op)
    v = rng.normal(size=op.shape) + 1j * rng.normal(size=op.shape)
    assert np.max(np.abs(op.apply_dvr(v).ravel() - dense @ v.ravel())) < 1e-10


def test_fbr_pieces_match_dense():
    rng = np.random.default_rng(9)
    op = small_operator(rng, 3, 8)
    dense = assemble_dense(op, "fbr")
    n_modes, n = op.shape
    assert np.allclose(op.fbr_diagonal().ravel(), np.diag(dense), atol=1e-12)
    for alpha in [(0, 0), (3, 2), (7, 1)]:
        row = dense[alpha[0] * n + alpha[1]]
        assert np.allclose(op.fbr_row(alpha).ravel(), row, atol=1e-12)
    c = rng.normal(size=op.shape) + 1j * rng.normal(size=op.shape)
    assert np.allclose(op.apply_fbr(c).ravel(), dense @ c.ravel(), atol=1e-10)


def test_time_independent_eigenstate():
    grid = TimeGrid(16, 10.0, 5.0)
    energies = np.array([0.1, 0.4, 0.9])
    op = FloquetOperator(energies, np.zeros((3, 3)), lambda t: 0 * t, grid)
    v = np.zeros(op.shape, complex)
    v[:, 1] = 1.0
    assert np.allclose(op.apply_dvr(v), 0.4 * v, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.complex_numbers(max_magnitude=5, allow_nan=False),
       st.complex_numbers(max_magnitude=5, allow_nan=False))
def test_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    op = small_operator(rng, 3, 8)
    u, v = (rng.normal(size=(2,) + op.shape) + 1j * rng.normal(size=(2,) + op.shape))
    lhs = op.apply_dvr(a * u + b * v)
    rhs = a * op.apply_dvr(u) + b * op.apply_dvr(v)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, abs(a) + abs(b)) * 10


def test_pure_state_general_path_matches_diagonal_path():
    rng = np.random.default_rng(11)
    pure = np.array([0, 0, 1.0, 0])
    op = small_operator(rng, 4, 8, initial=pure)
    # same operator, absorber entered through the superposition code path with
    # a vanishing perturbation of the other components
    general = ConstrainedAbsorber(op.absorber.envelope, pure, op.diagonal)
    general.is_pure = False
    v = rng.normal(size=op.shape) + 1j * rng.normal(size=op.shape)
    a = op.absorber.apply(op.times, v)
    b = general.apply(op.times, v)
    assert np.max(np.abs(a - b)) < 1e-12


def test_physical_part_independent_of_v0():
    rng = np.random.default_rng(12)
    psi0 = np.array([0.9, 0.3, 0.1j])
    ops = [small_operator(np.random.default_rng(3), 3, 16, initial=psi0, v0=v0)
           for v0 in (0.1, 0.7)]
    v = rng.normal(size=ops[0].shape) + 1j * rng.normal(size=ops[0].shape)
    physical = ops[0].times < ops[0].grid.physical_duration
    # the time-derivative part is global, so compare only the time-local blocks
    a = ops[0].apply_blocks(v)[physical]
    b = ops[1].apply_blocks(v)[physical]
    assert np.max(np.abs(a - b)) == 0.0
    full = [op.apply_dvr(v) for op in ops]
    assert not np.allclose(full[0][~physical], full[1][~physical])


def test_shape_mismatch():
    rng = np.random.default_rng(1)
    op = small_operator(rng, 2, 4)
    with pytest.raises(ValueError):
        op.apply_dvr(np.zeros((4, 3)))
    with pytest.raises(ValueError):
        FloquetOperator(np.zeros(2), np.zeros((3, 3)), lambda t: 0 * t, TimeGrid(4, 1.0, 1.0))


def test_envelope_needs_initial_state():
    with pytest.raises(ConfigError, match="initial_state"):
        grid = TimeGrid(4, 1.0, 1.0)
        FloquetOperator(np.zeros(2), np.zeros((2, 2)), lambda t: 0 * t, grid,
                        absorber=AbsorberEnvelope.for_grid(0.1, grid))
