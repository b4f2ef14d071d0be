import asyncio
import numpy as np
import pytest
from scipy.linalg import expm
from src.config.enums import IntegrationMode, Method
from src.core.runner import EnsembleRunner
from src.models.domain import IntegratorConfig, ModelParams, ThermalConfig
from src.models.series import ObservableSeries
from src.services.boltzmann import propagate_level, run_boltzmann, run_ta, spin_and_rest_energy
from src.services.davydov import default_initial, propagate_d1, run_d1
from src.services.exact import propagate_fock_initial, population_difference_qm
from src.services.exceptions import EnsembleError, StepSizeUnderflowError
from src.services.observables import (beat_time, compare_series, envelope_decay, standard_error_scaling)
from src.services.pfunction import run_pfunction_ensemble, sample_pfunction
from src.services.stochastic import run_stochastic_ensemble

pytestmark = pytest.mark.integration

SIMPLIFIED = IntegratorConfig(mode=IntegrationMode.SIMPLIFIED)
FULL = IntegratorConfig(mode=IntegrationMode.FULL)


def grid(t_max, dt=0.1):
    return np.arange(int(round(t_max / dt)) + 1) * dt


def head(series: ObservableSeries, t_max: float) -> ObservableSeries:
    keep = series.times <= t_max + 1e-9
    return ObservableSeries.deterministic(series.method, series.times[keep], series.pz[keep], series.norm[keep],
                                          series.e_spin[keep], series.e_rest[keep], series.e_total[keep])


@pytest.fixture(scope="module")
def reference_t1():
    """Exact and Boltzmann-Simplified P_z at λ=0.2, T=1 over [0, 200]."""
    params, t = ModelParams(), grid(200.0)
    exact = population_difference_qm(1.0, params, ThermalConfig(beta=1.0), t)
    boltzmann = asyncio.run(run_boltzmann(7, 1.0, params, SIMPLIFIED, t))
    return exact, boltzmann


# ==================== Exact reference ==================== #

def test_exact_reference_basics(params):
    t = grid(20.0)
    s = population_difference_qm(1.0, params, ThermalConfig(beta=1.0), t)
    assert s.pz[0] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(s.norm, 1.0, atol=1e-10)
    np.testing.assert_allclose(s.e_total, s.e_total[0], atol=1e-9)
    assert s.components.shape == (8, t.size)
    assert s.diagnostics["boltzmann_tail"] == pytest.approx(np.exp(-8.0))
    assert s.method is Method.EXACT
    assert s.is_accepted


def test_exact_level_matches_dense_matrix_exponential(params, fock_oracle):
    t = np.array([0.0, 1.5, 7.0])
    j_max = 14
    expansion = propagate_fock_initial(2, params, ThermalConfig(), t)
    H = fock_oracle.hamiltonian(params, j_max)
    start = np.zeros(2 * j_max, dtype=complex)
    start[2] = 1.0
    for i, ti in enumerate(t):
        psi = expm(-1j * H * ti) @ start
        np.testing.assert_allclose(expansion.c_plus[i], psi[:j_max], atol=1e-10)
        np.testing.assert_allclose(expansion.c_minus[i], psi[j_max:], atol=1e-10)
    np.testing.assert_allclose(expansion.norm, 1.0, atol=1e-12)


def test_exact_rejects_level_outside_basis(params):
    with pytest.raises(ValueError):
        propagate_fock_initial(14, params, ThermalConfig(expand_trunc_jmax=14), grid(1.0))


def test_exact_flags_truncation_population():
    s = population_difference_qm(1.0, ModelParams(lam=0.5), ThermalConfig(boltzmann_trunc_NT=3, expand_trunc_jmax=4),
                                 grid(5.0))
    assert any("top Fock population" in w for w in s.warnings)


def test_exact_converges_in_basis_size(params):
    t = grid(50.0)
    small = population_difference_qm(1.0, params, ThermalConfig(beta=1.0, expand_trunc_jmax=14), t)
    large = population_difference_qm(1.0, params, ThermalConfig(beta=1.0, expand_trunc_jmax=28), t)
    assert compare_series(small, large).sup_norm < 1e-9
    assert small.diagnostics["eigen_residual"] < 1e-12
    assert large.diagnostics["eigen_residual"] < 1e-12


def test_exact_escalates_truncations(params):
    s = population_difference_qm(1.0, params, ThermalConfig(tail_tolerance=1e-4), grid(2.0))
    assert s.diagnostics["boltzmann_trunc_NT"] == 9
    assert s.components.shape[0] == 10


# ==================== Decoupled limit ==================== #

async def test_all_methods_reduce_to_rabi_flopping_without_coupling():
    params = ModelParams(lam=0.0)
    t = grid(50.0)
    tight = IntegratorConfig(mode=IntegrationMode.SIMPLIFIED, rel_tol=1e-10, abs_tol=1e-10)
    expected = np.cos(2.0 * params.V * t / params.hbar)
    thermal = ThermalConfig(beta=1.0)
    results = {
        Method.EXACT: population_difference_qm(1.0, params, thermal, t),
        Method.D1: run_d1(params, tight, t),
        Method.TA: run_ta(1.0, params, tight, t),
        Method.STOCHASTIC: await run_stochastic_ensemble(3, 5, 1.0, params, thermal, tight, t),
        Method.PFUNCTION: await run_pfunction_ensemble(3, 5, 1.0, params, tight, t),
        Method.BOLTZMANN: await run_boltzmann(3, 1.0, params, tight, t),
    }
    np.testing.assert_allclose(results.pop(Method.EXACT).pz, expected, atol=1e-10)
    for method, series in results.items():
        np.testing.assert_allclose(series.pz, expected, atol=1e-6, err_msg=method.value)


# ==================== Zero temperature ==================== #

async def test_boltzmann_at_low_temperature_is_level_zero(params):
    t = grid(30.0)
    d1 = run_d1(params, SIMPLIFIED, t)
    cold = await run_boltzmann(1, 50.0, params, SIMPLIFIED, t)
    np.testing.assert_allclose(cold.pz, d1.pz, atol=1e-9)


def test_d1_tracks_exact_ground_level(params):
    t = grid(100.0)
    exact = population_difference_qm(50.0, params, ThermalConfig(beta=50.0, boltzmann_trunc_NT=1), t)
    d1 = run_d1(params, SIMPLIFIED, t)
    assert compare_series(exact, d1).sup_norm < 0.05


# ==================== Full mode ==================== #

def test_full_mode_conserves_norm_and_energy(params):
    t = grid(25.0)
    trajectory = propagate_d1(default_initial(params, FULL), params, FULL, t)
    np.testing.assert_allclose(trajectory.norm, 1.0, atol=1e-6)
    _, _, energy = trajectory.energies(params)
    np.testing.assert_allclose(energy, energy[0], atol=1e-6)
    assert "min_abs_A" in trajectory.diagnostics


def test_full_and_simplified_agree_early(params):
    t = grid(20.0)
    assert compare_series(run_d1(params, FULL, t), run_d1(params, SIMPLIFIED, t)).sup_norm < 0.05


def test_perturbed_start_in_full_mode(params):
    config = IntegratorConfig(mode=IntegrationMode.FULL, initial_perturbation=1e-3)
    s = run_d1(params, config, grid(10.0))
    assert s.pz[0] == pytest.approx(1.0 - 2e-6)
    np.testing.assert_allclose(s.norm, 1.0, atol=1e-6)


# ==================== Boltzmann averaging ==================== #

def test_boltzmann_simplified_matches_exact(reference_t1):
    exact, boltzmann = reference_t1
    assert boltzmann.pz[0] == pytest.approx(1.0, abs=1e-12)
    assert compare_series(exact, boltzmann).sup_norm < 0.02
    assert boltzmann.diagnostics["max_norm_drift"] < 1e-6
    assert boltzmann.warnings == []
    assert boltzmann.components.shape == (8, exact.times.size)
    assert boltzmann.diagnostics["singular_terms"].shape == (8, exact.times.size)
    assert np.all(np.abs(boltzmann.pz) <= 1.0 + 1e-9)


def test_ta_keeps_nearly_constant_amplitude(reference_t1):
    exact, _ = reference_t1
    params, t = ModelParams(), grid(400.0)
    ta = run_ta(1.0, params, SIMPLIFIED, t)
    exact_decay = envelope_decay(exact, 40.0)
    assert exact_decay > 0.1
    assert envelope_decay(head(ta, 200.0), 40.0) < 0.2 * exact_decay
    exact_long = population_difference_qm(1.0, params, ThermalConfig(beta=1.0), t)
    assert compare_series(exact_long, ta).sup_norm > 0.2


def level_energies(n, params, t, g_phase=0.0):
    trajectory = propagate_level(n, params, SIMPLIFIED, t, g_phase)
    return np.array([spin_and_rest_energy(trajectory.state(i), n, params) for i in range(0, t.size, 10)])


@pytest.mark.parametrize("n", [1, 3, 7])
def test_rest_energy_constant_with_derived_initial_g(params, n):
    energies = level_energies(n, params, grid(200.0))
    np.testing.assert_allclose(energies[:, 1], energies[0, 1], rtol=1e-6)
    assert np.max(np.abs(energies[:, 0])) < 1e-2 * abs(energies[0, 1])


def test_ground_level_energies(params):
    # E_r vanishes for n = 0, so the spin energy is bounded absolutely
    energies = level_energies(0, params, grid(200.0))
    np.testing.assert_allclose(energies[:, 1], energies[0, 1], atol=1e-6)
    assert np.max(np.abs(energies[:, 0])) < 1e-2


@pytest.mark.parametrize("phase", [np.pi / 2, np.pi])
def test_rest_energy_constant_for_any_initial_g_phase(params, phase):
    energies = level_energies(3, params, grid(200.0), g_phase=phase)
    np.testing.assert_allclose(energies[:, 1], energies[0, 1], rtol=1e-6)


async def test_boltzmann_full_mode_records_singular_diagnostics(params):
    s = await run_boltzmann(2, 1.0, params, FULL, grid(10.0))
    assert len(s.diagnostics["min_abs_A"]) == 3
    assert np.all(s.diagnostics["singular_terms"] >= 0.0)


@pytest.mark.slow
async def test_strong_coupling_beat_time_reproduced(params_strong):
    t = grid(300.0)
    exact = population_difference_qm(1.0, params_strong, ThermalConfig(beta=1.0, expand_trunc_jmax=28), t)
    assert exact.warnings == []
    boltzmann = await run_boltzmann(7, 1.0, params_strong, SIMPLIFIED, t)
    exact_beat, boltzmann_beat = beat_time(exact, 20.0), beat_time(boltzmann, 20.0)
    assert exact_beat is not None and boltzmann_beat is not None
    assert boltzmann_beat == pytest.approx(exact_beat, rel=0.05)


# ==================== Sampling ensembles ==================== #

async def test_stochastic_ensemble_is_deterministic_across_pool_sizes(params, thermal):
    t = grid(5.0)
    async with EnsembleRunner(max_workers=1) as one:
        a = await run_stochastic_ensemble(4, 42, 1.0, params, thermal, SIMPLIFIED, t, runner=one)
    async with EnsembleRunner(max_workers=4) as four:
        b = await run_stochastic_ensemble(4, 42, 1.0, params, thermal, SIMPLIFIED, t, runner=four)
    np.testing.assert_array_equal(a.pz, b.pz)
    np.testing.assert_array_equal(a.pz_stderr, b.pz_stderr)
    assert a.components.shape == (4, t.size)
    assert a.diagnostics["phi_tail"] == pytest.approx(np.exp(-7.0))
    c = await run_stochastic_ensemble(4, 43, 1.0, params, thermal, SIMPLIFIED, t)
    assert not np.array_equal(a.components, c.components)


async def test_ensemble_refuses_failed_members(params, thermal, mocker):
    from src.services import stochastic

    real_propagate = stochastic.propagate_realization

    def flaky(real, *args):
        if real.index == 2:
            raise StepSizeUnderflowError(3.5, None)
        return real_propagate(real, *args)

    mocker.patch.object(stochastic, "propagate_realization", side_effect=flaky)
    with pytest.raises(EnsembleError) as err:
        await run_stochastic_ensemble(4, 1, 1.0, params, thermal, SIMPLIFIED, grid(2.0))
    assert list(err.value.failures) == [2]


def test_pfunction_samples_have_thermal_occupation(params):
    samples = sample_pfunction(1.0, params, 4000, seed=9)
    occupation = np.mean([abs(s.alpha) ** 2 for s in samples])
    assert occupation == pytest.approx(1.0 / (np.e - 1.0), rel=0.08)
    assert sample_pfunction(1.0, params, 3, seed=9)[2] == samples[2]


async def test_pfunction_standard_error_scaling(params):
    s = await run_pfunction_ensemble(400, 17, 1.0, params, SIMPLIFIED, grid(10.0))
    slope = standard_error_scaling(s.components, [25, 100, 400], t_index=-1)
    assert slope == pytest.approx(-0.5, abs=0.15)
    assert np.all(s.pz_stderr[1:] > 0)


async def test_stochastic_standard_error_scaling(params, thermal):
    s = await run_stochastic_ensemble(400, 17, 1.0, params, thermal, SIMPLIFIED, grid(10.0))
    slope = standard_error_scaling(s.components, [25, 100, 400], t_index=-1)
    assert slope == pytest.approx(-0.5, abs=0.15)


@pytest.mark.slow
async def test_ensemble_members_conserve_norm(params, thermal):
    t = grid(200.0)
    stochastic = await run_stochastic_ensemble(4, 5, 1.0, params, thermal, SIMPLIFIED, t)
    sampled = await run_pfunction_ensemble(4, 5, 1.0, params, SIMPLIFIED, t)
    assert stochastic.diagnostics["max_norm_drift"] < 1e-6
    assert sampled.diagnostics["max_norm_drift"] < 1e-6


@pytest.mark.slow
async def test_stochastic_ensemble_tracks_exact(reference_t1, params, thermal):
    exact, _ = reference_t1
    stochastic = await run_stochastic_ensemble(400, 12345, 1.0, params, thermal, SIMPLIFIED, grid(100.0))
    assert compare_series(head(exact, 100.0), stochastic).sup_norm < 0.05


@pytest.mark.slow
async def test_pfunction_ensemble_tracks_exact(reference_t1, params):
    exact, _ = reference_t1
    sampled = await run_pfunction_ensemble(100, 12345, 1.0, params, SIMPLIFIED, grid(100.0))
    assert compare_series(head(exact, 100.0), sampled).sup_norm < 0.05
