import numpy as np
import pytest

from oqs_eom.config import Config
from oqs_eom.dynamics.effective import effective_liouville
from oqs_eom.dynamics.longtime import (
    FINITE_SIZE_CAVEAT,
    SpectralData,
    extrapolate_to_zero,
    extrapolated_oracle,
    long_time_formula,
    long_time_limit_extrapolated,
    match_slow_modes,
    observed_relaxation_time,
    sector_oracle,
    spectrum_effective,
    time_average_oracle,
    timescale_diagnostics,
    zero_mode_projector,
)
from oqs_eom.dynamics.time_domain import TimeGrid, Trajectory
from oqs_eom.errors import EmptyZeroClusterError, InvalidFrequencyError
from oqs_eom.models import Product, catalog_model, maximally_mixed, pure_state, sector_weighted_initial
from oqs_eom.models.composite import reduced_initial
from oqs_eom.ops import vec
from oqs_eom.state import build_pipeline
from tests.conftest import random_density


def _spectrum(m, z):
    pipe = build_pipeline(m)
    ev = effective_liouville(pipe.bd, pipe.qb, z, rb=pipe.rb)
    return ev, spectrum_effective(ev)


# ================================================================================
# SPECTRAL DATA
# ================================================================================

def test_spectrum_is_biorthogonal_eigensystem(qb3_bell):
    ev, sd = _spectrum(qb3_bell, 0.01j)
    assert sd.biorthogonality_defect < 1e-8
    assert not sd.defective
    for k, lam in enumerate(sd.eigenvalues):
        np.testing.assert_allclose(ev.l_eff @ vec(sd.right[k]), lam * vec(sd.right[k]), atol=1e-10)
    gram = np.array([[np.vdot(vec(left), vec(right)) for right in sd.right] for left in sd.left])
    np.testing.assert_allclose(gram, np.eye(4), atol=1e-8)


def test_spectrum_ordering(generic):
    _, sd = _spectrum(generic, 0.3 + 0.05j)
    key = np.abs(sd.eigenvalues.imag)
    assert np.all(np.diff(key) >= 0)


def test_free_qubit_spectrum(free_qubit):
    _, sd = _spectrum(free_qubit, 0.05j)
    np.testing.assert_allclose(np.sort(sd.eigenvalues.real), [-1.0, 0.0, 0.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(sd.eigenvalues.imag, 0.0, atol=1e-12)


@pytest.mark.parametrize("z", [0.02j, 0.5 + 0.1j, -1.3 + 0.3j])
def test_zero_mode_exists_at_every_frequency(generic, z):
    ev, sd = _spectrum(generic, z)
    assert np.min(np.abs(sd.eigenvalues)) <= 1e-8 * sd.scale
    assert ev.left_zero_mode_defect < 1e-10


def test_empty_zero_cluster():
    sd = SpectralData(
        z=0.1j,
        eigenvalues=np.array([1.0, 2.0, 3.0, 4.0], dtype=complex),
        right=np.stack([np.eye(2)] * 4).astype(complex),
        left=np.stack([np.eye(2)] * 4).astype(complex),
        biorthogonality_defect=0.0,
        eigenvector_condition=1.0,
        defective=False,
    )
    with pytest.raises(EmptyZeroClusterError):
        zero_mode_projector(sd)


# ================================================================================
# ZERO MODE PROJECTOR
# ================================================================================

def test_non_degenerate_projector(qb3_bell):
    _, sd = _spectrum(qb3_bell, 0.02j)
    zero = zero_mode_projector(sd)
    assert zero.degeneracy == 1
    assert zero.idempotency_defect() < 1e-9
    assert np.trace(zero.rho_inf_candidate) == pytest.approx(1.0)
    # Pi0 maps every trace-one input to the same state
    np.testing.assert_allclose(zero.apply(pure_state([1, 0])), zero.rho_inf_candidate, atol=1e-12)


def test_free_qubit_projector_is_twofold(free_qubit):
    _, sd = _spectrum(free_qubit, 0.05j)
    zero = zero_mode_projector(sd)
    assert zero.degeneracy == 2
    assert zero.idempotency_defect() < 1e-8
    np.testing.assert_allclose(zero.apply(pure_state([1, 1])), np.eye(2) / 2, atol=1e-10)


@pytest.mark.parametrize("fixture", ["decoupled", "degenerate"])
def test_sector_models_have_twofold_zero_cluster(fixture, request):
    m = request.getfixturevalue(fixture)
    pipe = build_pipeline(m)
    _, sd = _spectrum(m, 0.01j * pipe.scale)
    zero = zero_mode_projector(sd)
    assert zero.degeneracy == 2
    assert zero.idempotency_defect() < 1e-8


def test_sector_projector_is_left_zero_mode(degenerate):
    ev, _ = _spectrum(degenerate, 0.03j)
    for proj in degenerate.sector_projectors:
        np.testing.assert_allclose(vec(proj) @ ev.l_eff, 0, atol=1e-10)


# ================================================================================
# ORACLES
# ================================================================================

def test_time_average_oracle_is_a_state(generic):
    rho = time_average_oracle(generic)
    assert np.trace(rho) == pytest.approx(1.0)
    np.testing.assert_allclose(rho, rho.conj().T, atol=0)
    assert np.min(np.linalg.eigvalsh(rho)) > -1e-12


def test_abel_oracle_at_large_rate_is_initial_state(qb3_bell):
    np.testing.assert_allclose(time_average_oracle(qb3_bell, averaging_rate=1e9), reduced_initial(qb3_bell), atol=1e-8)


def test_abel_oracle_rejects_non_positive_rate(qb3):
    with pytest.raises(InvalidFrequencyError):
        time_average_oracle(qb3, averaging_rate=0.0)


def test_free_qubit_oracle_drops_coherence(free_qubit):
    np.testing.assert_allclose(time_average_oracle(free_qubit), np.eye(2) / 2, atol=1e-12)


def test_sector_oracle_decoupled(decoupled):
    np.testing.assert_allclose(sector_oracle(decoupled, (0.3, 0.7)), np.diag([0.3, 0.7]), atol=1e-12)


# ================================================================================
# EXTRAPOLATION
# ================================================================================

def test_extrapolation_is_exact_for_quadratics():
    eps = np.array([0.4, 0.2, 0.1, 0.05])
    samples = (3.0 + 2.0 * eps - 5.0 * eps ** 2)[:, None, None] * np.ones((1, 2, 2))
    estimates = extrapolate_to_zero(eps, samples, order=2)
    np.testing.assert_allclose(estimates[-1], 3.0, atol=1e-12)
    np.testing.assert_allclose(estimates[0], samples[0])


@pytest.mark.parametrize("eps_seq", [[], [0.1, 0.2], [0.1, 0.1], [0.1, 0.0]])
def test_invalid_eps_sequence(qb3, eps_seq):
    with pytest.raises(InvalidFrequencyError):
        long_time_limit_extrapolated(qb3, eps_seq)


def test_extrapolation_matches_abel_oracle(qb3_bell):
    eps_seq = [0.2, 0.1, 0.05]
    result = long_time_limit_extrapolated(qb3_bell, eps_seq)
    np.testing.assert_allclose(result.rho_inf, extrapolated_oracle(qb3_bell, eps_seq), atol=1e-8)
    assert np.trace(result.rho_inf) == pytest.approx(1.0, abs=1e-8)
    assert result.caveat == FINITE_SIZE_CAVEAT
    assert len(result.differences) == 2


def test_samples_match_abel_oracle_at_each_rate(generic):
    eps_seq = [0.3, 0.15]
    result = long_time_limit_extrapolated(generic, eps_seq)
    for eps, sample in zip(eps_seq, result.samples):
        np.testing.assert_allclose(sample, time_average_oracle(generic, averaging_rate=eps), atol=1e-9)


def test_free_qubit_coherences_average_out(free_qubit):
    result = long_time_limit_extrapolated(free_qubit, [0.2, 0.1, 0.05])
    assert abs(result.rho_inf[0, 1]) <= 2e-3
    np.testing.assert_allclose(np.diag(result.rho_inf).real, [0.5, 0.5], atol=1e-9)


def test_extrapolation_runs_in_parallel(qb3_bell):
    serial = long_time_limit_extrapolated(qb3_bell, [0.2, 0.1, 0.05], threads=1)
    threaded = long_time_limit_extrapolated(qb3_bell, [0.2, 0.1, 0.05], threads=2)
    np.testing.assert_allclose(threaded.rho_inf, serial.rho_inf, atol=1e-14)


# ================================================================================
# LONG-TIME FORMULA
# ================================================================================

def test_stationary_state_is_independent_of_initial_state(qb3):
    formula = long_time_formula(qb3)
    assert not formula.degenerate
    assert formula.independence_defect < 1e-8
    assert formula.initial_state_spread is not None
    other = long_time_formula(qb3.with_initial(Product(maximally_mixed(2))))
    np.testing.assert_allclose(other.stationary_state, formula.stationary_state, atol=1e-10)
    assert np.trace(formula.rho_inf) == pytest.approx(1.0, abs=1e-8)


def test_generic_stationary_state_for_two_random_initial_states(generic, rng):
    first = long_time_formula(generic.with_initial(Product(random_density(2, rng))), eps_ref=1e-3)
    second = long_time_formula(generic.with_initial(Product(random_density(2, rng))), eps_ref=1e-3)
    assert first.degeneracy == second.degeneracy == 1
    assert first.independence_defect < 1e-6
    assert np.max(np.abs(first.stationary_state - second.stationary_state)) <= Config.LONGTIME_TOL
    assert first.caveat == FINITE_SIZE_CAVEAT


@pytest.mark.parametrize("env_dim", [3, 4])
def test_formula_matches_extrapolation_on_generic(env_dim):
    m = catalog_model("GENERIC", seed=7, env_dim=env_dim)
    formula = long_time_formula(m, eps_ref=1e-3)
    extrapolated = long_time_limit_extrapolated(m, [4e-3, 2e-3, 1e-3])
    assert np.max(np.abs(formula.rho_inf - extrapolated.rho_inf)) <= Config.LONGTIME_TOL
    assert np.trace(formula.rho_inf) == pytest.approx(1.0, abs=1e-8)


def test_slow_modes_are_matched_by_halving():
    # lambda -> lambda / 2 for the slow pair, fixed for the constant one
    def spectral(values):
        n = len(values)
        return SpectralData(
            z=0.1j,
            eigenvalues=np.array(values, dtype=complex),
            right=np.zeros((n, 2, 2), dtype=complex),
            left=np.zeros((n, 2, 2), dtype=complex),
            biorthogonality_defect=0.0,
            eigenvector_condition=1.0,
            defective=False,
        )

    at_eps = spectral([0.0, -0.8e-3j, -0.05j, 1.0])
    at_half = spectral([0.0, -0.05j, -0.41e-3j, 1.0])
    pairs = match_slow_modes(at_eps, at_half, 1e-3, exclude=[0], exclude_half=[0])
    assert pairs == [(1, 2)]
    assert match_slow_modes(at_eps, at_half, 1e-3, exclude=[0], exclude_half=[0], factor=0.5) == []

@pytest.mark.parametrize("w", [0.3, 0.7])
def test_decoupled_formula_matches_sector_oracle(decoupled, w):
    m = decoupled.with_initial(sector_weighted_initial(decoupled, (w, 1 - w)))
    formula = long_time_formula(m)
    assert formula.degeneracy == 2
    assert formula.independence_defect is None
    np.testing.assert_allclose(formula.rho_inf, sector_oracle(m, (w, 1 - w)), atol=1e-8)


def test_decoupled_weights_map_is_affine(decoupled):
    outputs = []
    for w in (0.2, 0.5, 0.8):
        m = decoupled.with_initial(sector_weighted_initial(decoupled, (w, 1 - w)))
        outputs.append(long_time_formula(m).rho_inf)
    np.testing.assert_allclose(outputs[1], (outputs[0] + outputs[2]) / 2, atol=1e-8)


def _trace_distance(a, b):
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def test_decoupled_sector_weights_are_remembered(decoupled):
    results = {}
    for w in (0.3, 0.7):
        m = decoupled.with_initial(sector_weighted_initial(decoupled, (w, 1 - w)))
        formula = long_time_formula(m)
        assert formula.degeneracy >= 2
        assert np.max(np.abs(formula.rho_inf - sector_oracle(m, (w, 1 - w)))) <= 1e-6
        results[w] = formula.rho_inf
    assert _trace_distance(results[0.3], results[0.7]) >= 0.1


def test_degenerate_formula_keeps_sector_population(degenerate):
    m = degenerate.with_initial(sector_weighted_initial(degenerate, (0.35, 0.65)))
    formula = long_time_formula(m)
    assert formula.degenerate
    assert formula.rho_inf[0, 0].real == pytest.approx(0.35, abs=1e-8)
    assert np.trace(formula.rho_inf).real == pytest.approx(1.0, abs=1e-8)


def test_formula_as_dict(qb3):
    report = long_time_formula(qb3, eps_ref=0.05).as_dict()
    assert report["eps_ref"] == 0.05
    assert report["degeneracy"] == 1
    assert report["caveat"] == FINITE_SIZE_CAVEAT


# ================================================================================
# TIMESCALES
# ================================================================================

def test_coupling_timescale_scales_inversely(qb3):
    base = build_pipeline(qb3)
    doubled = build_pipeline(qb3.with_coupling_scale(2.0))
    t1 = timescale_diagnostics(base.bd, base.qb, 0.05)
    t2 = timescale_diagnostics(doubled.bd, doubled.qb, 0.05)
    assert t1.coupled and t2.coupled
    assert t1.t_pq / t2.t_pq == pytest.approx(2.0, rel=1e-10)
    assert t1.verdict in {"negligible", "comparable", "important"}
    assert t1.as_dict()["heuristic"] is True


@pytest.mark.parametrize("s", [0.5, 2.0, 4.0])
def test_relaxation_time_scales_inverse_square(qb3_mixed_env, s):
    eps = 0.05
    base = build_pipeline(qb3_mixed_env)
    scaled = build_pipeline(qb3_mixed_env.with_coupling_scale(s))
    t1 = timescale_diagnostics(base.bd, base.qb, eps)
    t2 = timescale_diagnostics(scaled.bd, scaled.qb, eps)
    assert t1.tau / t2.tau == pytest.approx(s ** 2, rel=1e-8)


def test_relaxation_time_equals_bound_for_orthogonal_projector(qb3_mixed_env):
    pipe = build_pipeline(qb3_mixed_env)
    for eps in (0.2, 0.05, 0.01):
        scales = timescale_diagnostics(pipe.bd, pipe.qb, eps)
        assert scales.t_q == pytest.approx(1 / eps, rel=1e-8)
        assert scales.tau == pytest.approx(eps * scales.t_pq ** 2, rel=1e-8)


@pytest.mark.parametrize("eps", [0.1, 0.05, 0.01])
def test_relaxation_time_is_bounded_by_coupling_time(qb3, eps):
    pipe = build_pipeline(qb3)
    scales = timescale_diagnostics(pipe.bd, pipe.qb, eps)
    assert scales.t_q >= (1 / eps) * (1 - 1e-8)
    assert scales.tau <= eps * scales.t_pq ** 2 * (1 + 1e-8)


def test_uncoupled_model_has_infinite_relaxation_time(free_qubit):
    pipe = build_pipeline(free_qubit)
    scales = timescale_diagnostics(pipe.bd, pipe.qb, 0.05)
    assert not scales.coupled
    assert scales.verdict == "uncoupled"
    assert scales.tau == float("inf")


def test_timescales_reject_non_positive_eps(qb3):
    pipe = build_pipeline(qb3)
    with pytest.raises(InvalidFrequencyError):
        timescale_diagnostics(pipe.bd, pipe.qb, 0.0)


def test_observed_relaxation_time():
    grid = TimeGrid(0.15 * np.arange(40))
    rho_inf = np.eye(2) / 2
    decay = np.exp(-grid.times)
    states = np.stack([rho_inf + d * np.diag([0.5, -0.5]) for d in decay])
    traj = Trajectory(grid=grid, states=states.astype(complex), model_id="test", method="test")
    assert observed_relaxation_time(traj, rho_inf) == pytest.approx(1.05)
    frozen = Trajectory(grid=grid, states=np.stack([np.diag([1.0, 0.0])] * 40).astype(complex),
                        model_id="test", method="test")
    assert observed_relaxation_time(frozen, rho_inf) == float("inf")
