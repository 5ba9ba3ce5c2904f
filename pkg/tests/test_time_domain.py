import numpy as np
import pytest
from scipy.linalg import expm

from oqs_eom.dynamics.time_domain import (
    ContourSpec,
    TimeGrid,
    Trajectory,
    compare_trajectories,
    damped_tail_coefficients,
    exact_reduced_evolution,
    exact_total_evolution,
    inverse_laplace_evolve,
    refinement_study,
)
from oqs_eom.errors import DimensionError, NyquistError
from oqs_eom.models import build_initial_total, build_total_hamiltonian, eigendecompose
from oqs_eom.models.composite import reduced_initial
from tests.conftest import random_matrix


# ================================================================================
# VALUE TYPES
# ================================================================================

@pytest.mark.parametrize("times", [[], [-1.0, 0.0, 1.0], [0.0, 2.0, 1.0], [0.0, 1.0, 1.0]])
def test_time_grid_validation(times):
    with pytest.raises(DimensionError):
        TimeGrid(times)


def test_time_grid_linspace():
    grid = TimeGrid.linspace(10.0, 101)
    assert grid.count == 101
    assert grid.t_max == 10.0
    assert grid.times[1] == pytest.approx(0.1)


@pytest.mark.parametrize("kwargs", [
    {"epsilon": 0.0, "omega_max": 10.0, "n_points": 100},
    {"epsilon": 0.1, "omega_max": -1.0, "n_points": 100},
    {"epsilon": 0.1, "omega_max": 10.0, "n_points": 101},
    {"epsilon": 0.1, "omega_max": 10.0, "n_points": 100, "tail_order": -1},
    {"epsilon": 0.1, "omega_max": 10.0, "n_points": 100, "tail_damping": 0.0},
])
def test_contour_validation(kwargs):
    with pytest.raises(NyquistError):
        ContourSpec(**kwargs)


def test_contour_nyquist_bounds():
    contour = ContourSpec(epsilon=0.1, omega_max=10.0, n_points=100)
    contour.validate_for(spectral_radius=5.0, t_max=10.0)
    with pytest.raises(NyquistError):
        contour.validate_for(spectral_radius=12.0, t_max=10.0)
    with pytest.raises(NyquistError):
        contour.validate_for(spectral_radius=5.0, t_max=20.0)


def test_contour_quadrature():
    contour = ContourSpec(epsilon=0.1, omega_max=3.0, n_points=60)
    nodes = contour.nodes()
    assert nodes.size == 61
    assert nodes[0] == -3.0 and nodes[-1] == 3.0
    assert contour.weights().sum() == pytest.approx(6.0)
    assert contour.spacing == pytest.approx(0.1)


def test_contour_refinement():
    contour = ContourSpec(epsilon=0.2, omega_max=5.0, n_points=100)
    finer = contour.refined()
    assert finer.epsilon == pytest.approx(0.1)
    assert finer.omega_max == pytest.approx(10.0)
    assert finer.n_points == 800
    assert finer.tail_order == contour.tail_order


def test_default_contour_satisfies_nyquist(qb3):
    contour = ContourSpec.default_for(qb3, 10.0)
    assert contour.n_points % 2 == 0
    contour.validate_for(eigendecompose(qb3).spectral_range, 10.0)


# ================================================================================
# EXACT ORACLE
# ================================================================================

def test_exact_evolution_starts_at_initial_state(qb3_bell):
    traj = exact_reduced_evolution(qb3_bell, TimeGrid.linspace(5.0, 11))
    np.testing.assert_allclose(traj.states[0], reduced_initial(qb3_bell), atol=1e-12)


def test_exact_evolution_is_unitary(qb3):
    grid = TimeGrid(np.linspace(0.0, 20.0, 5))
    total = exact_total_evolution(qb3, grid)
    purity = np.einsum("tij,tji->t", total, total).real
    np.testing.assert_allclose(purity, purity[0], atol=1e-10)
    np.testing.assert_allclose(np.trace(total, axis1=1, axis2=2), 1.0, atol=1e-12)


def test_exact_evolution_matches_matrix_exponential(qb3_bell):
    grid = TimeGrid([0.0, 0.7, 3.1])
    h = build_total_hamiltonian(qb3_bell)
    rho = build_initial_total(qb3_bell)
    total = exact_total_evolution(qb3_bell, grid)
    for k, t in enumerate(grid.times):
        u = expm(-1j * h * t)
        np.testing.assert_allclose(total[k], u @ rho @ u.conj().T, atol=1e-11)


def test_exact_reduced_states_are_valid(generic):
    traj = exact_reduced_evolution(generic, TimeGrid.linspace(10.0, 21))
    np.testing.assert_allclose(traj.traces, 1.0, atol=1e-11)
    np.testing.assert_allclose(traj.states, np.conj(np.transpose(traj.states, (0, 2, 1))), atol=1e-11)
    assert traj.diagnostics["purity_drift"] < 1e-10


def test_free_qubit_oracle(free_qubit):
    grid = TimeGrid.linspace(6.0, 13)
    traj = exact_reduced_evolution(free_qubit, grid)
    np.testing.assert_allclose(traj.states[:, 0, 1], 0.5 * np.exp(-1j * grid.times), atol=1e-12)
    np.testing.assert_allclose(traj.states[:, 0, 0], 0.5, atol=1e-12)


# ================================================================================
# INVERSE LAPLACE
# ================================================================================

def test_damped_tail_without_damping_is_identity(rng):
    moments = np.stack([random_matrix(2, rng) for _ in range(4)])
    np.testing.assert_allclose(damped_tail_coefficients(moments, 0.0), moments)


def test_damped_tail_reexpansion(rng):
    # i sum_k c_k / z^(k+1) and i sum_n a_n / (z + i g)^(n+1) agree to O(z^-(K+2))
    moments = np.stack([random_matrix(2, rng) for _ in range(4)])
    gamma = 0.3
    a = damped_tail_coefficients(moments, gamma)
    z = 400.0 + 1.0j
    direct = sum(1j * moments[k] / z ** (k + 1) for k in range(4))
    damped = sum(1j * a[n] / (z + 1j * gamma) ** (n + 1) for n in range(4))
    assert np.max(np.abs(direct - damped)) < 1e-9


def test_inverse_laplace_free_qubit(free_qubit):
    grid = TimeGrid.linspace(10.0, 41)
    traj = inverse_laplace_evolve(free_qubit, ContourSpec.default_for(free_qubit, grid.t_max), grid)
    np.testing.assert_allclose(traj.states[:, 0, 1], 0.5 * np.exp(-1j * grid.times), atol=1e-4)
    np.testing.assert_allclose(traj.states[:, 0, 0], 0.5, atol=1e-4)


def test_inverse_laplace_qb3_bell_fine_contour(qb3_bell):
    grid = TimeGrid.linspace(10.0, 101)
    contour = ContourSpec(epsilon=0.05, omega_max=40.0, n_points=16384)
    traj = inverse_laplace_evolve(qb3_bell, contour, grid)
    oracle = exact_reduced_evolution(qb3_bell, grid)
    assert compare_trajectories(oracle, traj).max_deviation <= 1e-3
    assert traj.diagnostics["max_trace_defect"] <= 1e-3


def test_inverse_laplace_default_contour_and_refinement(qb3_bell):
    grid = TimeGrid.linspace(10.0, 51)
    study = refinement_study(qb3_bell, grid, steps=2)
    assert study.deviations[0] <= 1e-3
    assert study.monotone
    assert len(study.contours) == 3


def test_inverse_laplace_rejects_narrow_contour(qb3):
    grid = TimeGrid.linspace(10.0, 11)
    with pytest.raises(NyquistError):
        inverse_laplace_evolve(qb3, ContourSpec(epsilon=0.1, omega_max=0.5, n_points=1000), grid)


def test_inverse_laplace_output_is_hermitian(qb3_bell):
    grid = TimeGrid.linspace(4.0, 9)
    traj = inverse_laplace_evolve(qb3_bell, ContourSpec.default_for(qb3_bell, grid.t_max), grid)
    np.testing.assert_array_equal(traj.states, np.conj(np.transpose(traj.states, (0, 2, 1))))
    assert traj.method == "inverse-laplace"
    assert traj.diagnostics["hermiticity_defect"] >= 0.0


# ================================================================================
# COMPARISON
# ================================================================================

def _trajectory(states, times):
    return Trajectory(grid=TimeGrid(times), states=np.asarray(states, dtype=complex), model_id="test", method="test")


def test_compare_identical_trajectories(qb3):
    traj = exact_reduced_evolution(qb3, TimeGrid.linspace(2.0, 5))
    assert compare_trajectories(traj, traj).max_deviation == 0.0


def test_compare_constructed_deviation():
    times = [0.0, 1.0, 2.0]
    a = np.zeros((3, 2, 2))
    b = a.copy()
    b[1, 0, 1] = 1e-3
    report = compare_trajectories(_trajectory(a, times), _trajectory(b, times))
    assert report.max_deviation == pytest.approx(1e-3)
    np.testing.assert_allclose(report.per_time, [0.0, 1e-3, 0.0])
    assert compare_trajectories(_trajectory(b, times), _trajectory(a, times)).max_deviation == report.max_deviation


def test_compare_rejects_grid_mismatch():
    a = _trajectory(np.zeros((3, 2, 2)), [0.0, 1.0, 2.0])
    b = _trajectory(np.zeros((3, 2, 2)), [0.0, 1.0, 3.0])
    with pytest.raises(DimensionError):
        compare_trajectories(a, b)


def test_trajectory_rejects_state_count_mismatch():
    with pytest.raises(DimensionError):
        _trajectory(np.zeros((2, 2, 2)), [0.0, 1.0, 2.0])
