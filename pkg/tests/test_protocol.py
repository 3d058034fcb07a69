import math

import numpy as np
import pytest

from rei_qnd.cavity.params import CouplingRates
from rei_qnd.cavity.reflection import on_resonance_detuned
from rei_qnd.errors import InvalidInputError, NumericalIntegrityError, RegimeViolationError
from rei_qnd.measurement.protocol import (
    BranchAmplitudes,
    DephasingPolicy,
    JointConditionalState,
    ProtocolErrors,
    apply_conditional_reflection,
    branch_amplitudes,
    closed_form_losses,
    dephase,
    fidelity_closed_form,
    fidelity_exact,
    final_rotation,
    prepare_superposition,
    rotation_matrix,
    run_protocol,
    vacuum_branch_population,
)


def _ideal_rates():
    return CouplingRates(g=1.0, kappa=10.0, gamma=0.0, detuning=1e4)


def _scaled_case(scale):
    # Every first-order loss is 0.1 * scale; rotation errors are O(scale)
    rates = CouplingRates(g=1.0, kappa=10.0, gamma=0.02 * scale, detuning=10.0 / scale)
    t_p = 10.0 * math.sqrt(math.log(2.0)) / (2.0 * math.pi * 0.1 * scale)
    policy = DephasingPolicy(spin_dephasing_rate=0.4 * scale / t_p, superposition_time_multiplier=1.0)
    errors = ProtocolErrors(prep_angle_error=0.5 * scale, readout_angle_error=-0.3 * scale)
    return rates, policy, errors, t_p


def _assert_physical(rho):
    assert np.max(np.abs(rho - rho.conj().T)) <= 1e-12
    assert np.min(np.linalg.eigvalsh(rho)) >= -1e-10


class TestStates:
    def test_prepared_state_is_all_halves(self):
        np.testing.assert_allclose(prepare_superposition(ProtocolErrors()).rho, 0.5, atol=1e-15)

    def test_preparation_error(self):
        state = prepare_superposition(ProtocolErrors(prep_angle_error=0.1))
        assert state.population(0) == pytest.approx((1 + math.sin(0.1)) / 2, abs=1e-12)
        # first order, with the opposite sign convention for phi_P
        assert state.population(0) == pytest.approx(0.5 + 0.1 / 2, abs=0.1 ** 3)
        np.testing.assert_allclose(state.rho @ state.rho, state.rho, atol=1e-12)

    def test_rotations_compose(self):
        quarter = rotation_matrix(math.pi / 2)
        np.testing.assert_allclose(quarter @ quarter, rotation_matrix(math.pi), atol=1e-12)
        ground = np.array([[1.0, 0.0], [0.0, 0.0]])
        flipped = rotation_matrix(math.pi) @ ground @ rotation_matrix(math.pi).T
        np.testing.assert_allclose(flipped, [[0.0, 0.0], [0.0, 1.0]], atol=1e-12)

    def test_dephasing_damps_only_coherences(self):
        policy = DephasingPolicy(spin_dephasing_rate=100.0, superposition_time_multiplier=2.0)
        state = dephase(prepare_superposition(ProtocolErrors()), policy, 1e-3)
        assert state.coherence == pytest.approx(0.5 * math.exp(-0.2))
        assert state.population(0) == pytest.approx(0.5)
        assert state.trace == pytest.approx(1.0)

    def test_invalid_density_matrices(self):
        with pytest.raises(NumericalIntegrityError, match="Hermitian"):
            JointConditionalState(np.array([[0.5, 0.1], [0.2, 0.5]]))
        with pytest.raises(NumericalIntegrityError, match="trace"):
            JointConditionalState(np.eye(2))
        with pytest.raises(NumericalIntegrityError, match="negative eigenvalue"):
            JointConditionalState(np.array([[0.5, 0.5], [0.5, 0.0]]))

    def test_state_is_read_only(self):
        state = prepare_superposition(ProtocolErrors())
        with pytest.raises(ValueError):
            state.rho[0, 0] = 1.0

    def test_trace_is_non_increasing(self, demonstrated, policy_for):
        run = run_protocol(demonstrated.rates, policy_for(demonstrated), ProtocolErrors(0.05, -0.03), 0.98, 13e-6)
        assert run.prepared.trace == pytest.approx(1.0, abs=1e-12)
        assert run.dephased.trace == pytest.approx(run.prepared.trace, abs=1e-12)
        assert run.reflected.trace < run.dephased.trace
        assert run.final.trace == pytest.approx(run.reflected.trace, abs=1e-12)


class TestInputs:
    @pytest.mark.parametrize("field", ["prep_angle_error", "readout_angle_error"])
    def test_rotation_error_bound(self, field):
        with pytest.raises(InvalidInputError):
            ProtocolErrors(**{field: math.pi / 4})

    def test_multiplier_bound(self):
        with pytest.raises(InvalidInputError):
            DephasingPolicy(spin_dephasing_rate=1.0, superposition_time_multiplier=0.5)
        with pytest.raises(InvalidInputError):
            DephasingPolicy(spin_dephasing_rate=-1.0)

    def test_branch_passivity(self):
        with pytest.raises(NumericalIntegrityError):
            BranchAmplitudes(resonant=1.001, detuned=-1.0)

    def test_branch_amplitudes_need_a_detuned_state(self, normalized_rates):
        with pytest.raises(InvalidInputError):
            branch_amplitudes(normalized_rates.with_values(detuning=0.0), 1e4)

    def test_bad_cavity_regime_is_enforced(self):
        with pytest.raises(RegimeViolationError):
            branch_amplitudes(CouplingRates(g=1.0, kappa=2.0, gamma=0.001, detuning=100.0), 1e4)

    def test_eta_range(self):
        with pytest.raises(InvalidInputError):
            fidelity_exact(prepare_superposition(ProtocolErrors()), 0.0)

    def test_rounding_noise_in_the_empty_branch(self):
        state = JointConditionalState(np.array([[-5e-11, 0.0], [0.0, 0.5]]))
        assert fidelity_exact(state, 0.9) == 0.0

    def test_negative_population_beyond_rounding(self):
        state = object.__new__(JointConditionalState)
        object.__setattr__(state, "rho", np.array([[-0.1, 0.0], [0.0, 0.5]], dtype=complex))
        with pytest.raises(NumericalIntegrityError, match="rho00"):
            fidelity_exact(state, 0.9)


class TestBranchAmplitudes:
    def test_detuned_branch_against_first_order(self, demonstrated):
        rates = demonstrated.rates
        amplitudes = branch_amplitudes(rates, 13e-6)
        small = rates.g_tilde ** 2 / (rates.kappa * rates.detuning)
        first_order = on_resonance_detuned(rates.g_tilde, rates.kappa, rates.detuning)
        assert abs(amplitudes.detuned - first_order) < 10 * small ** 2 + 1e-6
        assert abs(amplitudes.detuned) <= 1.0

    def test_phase_flip_between_branches(self, demonstrated):
        rates = demonstrated.rates
        amplitudes = branch_amplitudes(rates, 13e-6)
        flip = abs(np.angle(amplitudes.detuned / amplitudes.resonant))
        small = rates.g_tilde ** 2 / (rates.kappa * rates.detuning)
        assert abs(flip - math.pi) <= 2 * small + 1e-6


class TestFidelity:
    def test_ideal_limit_gives_eta(self):
        policy = DephasingPolicy(spin_dephasing_rate=0.0)
        run = run_protocol(_ideal_rates(), policy, ProtocolErrors(), 0.97, 1e9)
        assert run.fidelity_exact == pytest.approx(0.97, abs=1e-6)
        assert run.fidelity_closed_form == pytest.approx(0.97, abs=1e-6)
        assert run.final.population(0) == pytest.approx(1.0, abs=1e-6)

    def test_losses_are_additive(self, demonstrated, policy_for):
        rates = demonstrated.rates
        errors = ProtocolErrors(prep_angle_error=0.02, readout_angle_error=0.03)
        losses = closed_form_losses(rates, policy_for(demonstrated), errors, 13e-6)
        assert losses.reflection == pytest.approx(1.0 / (2.0 * rates.cooperativity))
        assert losses.rotation == pytest.approx((0.02 ** 2 + 0.03 ** 2) / 8.0)
        assert losses.total == pytest.approx(
            losses.reflection + losses.bandwidth + losses.dephasing + losses.rotation, abs=1e-15
        )

    def test_demonstrated_loss_terms(self, demonstrated, policy_for):
        losses = closed_form_losses(demonstrated.rates, policy_for(demonstrated), ProtocolErrors(), 13e-6)
        assert losses.reflection == pytest.approx(0.0267, abs=5e-4)
        assert losses.bandwidth == pytest.approx(0.0147, abs=5e-4)
        assert losses.dephasing == pytest.approx(0.0139, abs=5e-4)

    def test_demonstrated_fidelity(self, demonstrated, policy_for):
        run = run_protocol(demonstrated.rates, policy_for(demonstrated), ProtocolErrors(), 0.98752, 13e-6)
        assert run.fidelity_closed_form == pytest.approx(0.933, abs=1e-3)
        assert run.fidelity_exact == pytest.approx(0.9347, abs=1e-3)
        assert abs(run.fidelity_exact - run.fidelity_closed_form) <= 0.003

    @pytest.mark.parametrize("preset", ["demonstrated", "subkelvin", "theoretical_q"])
    def test_exact_and_closed_form_agree_near_the_optimum(self, request, policy_for, preset):
        system = request.getfixturevalue(preset)
        rates = system.rates
        policy = policy_for(system)
        a = rates.kappa * math.sqrt(math.log(2.0)) / (2.0 * math.pi * rates.g ** 2)
        optimum = math.sqrt(4.0 * a / (policy.superposition_time_multiplier * policy.spin_dephasing_rate))
        for t_p in np.geomspace(optimum / 1.5, optimum * 1.5, 9):
            run = run_protocol(rates, policy, ProtocolErrors(), 1.0, float(t_p))
            assert abs(run.fidelity_exact - run.fidelity_closed_form) <= 0.003

    def test_closed_form_error_is_second_order(self):
        residuals = []
        for scale in (1e-1, 1e-2, 1e-3):
            rates, policy, errors, t_p = _scaled_case(scale)
            run = run_protocol(rates, policy, errors, 1.0, t_p)
            residuals.append(abs(run.fidelity_exact - run.fidelity_closed_form))
        assert residuals[0] < 1e-3
        for coarse, fine in zip(residuals, residuals[1:]):
            assert 50 < coarse / fine < 200

    def test_final_state_entries_against_first_order(self):
        worst = []
        for scale in (1e-1, 1e-2, 1e-3):
            rates, policy, errors, t_p = _scaled_case(scale)
            final = run_protocol(rates, policy, errors, 1.0, t_p).final.rho
            losses = closed_form_losses(rates, policy, errors, t_p)
            coupling_loss = losses.reflection + losses.bandwidth
            small = rates.g_tilde ** 2 / (rates.kappa * rates.detuning)
            coherence = -coupling_loss + 0.5 * (errors.prep_angle_error + errors.readout_angle_error) + 1j * small
            expected = np.array([
                [1.0 - 2.0 * (coupling_loss + losses.dephasing), coherence],
                [np.conj(coherence), 2.0 * losses.dephasing],
            ])
            residual = float(np.max(np.abs(final - expected)))
            assert residual < 2 * scale ** 2
            worst.append(residual)
        for coarse, fine in zip(worst, worst[1:]):
            assert 50 < coarse / fine < 200

    def test_states_are_hermitian(self, subkelvin, policy_for):
        run = run_protocol(subkelvin.rates, policy_for(subkelvin), ProtocolErrors(0.1, 0.1), 0.9, 20e-6)
        for state in (run.prepared, run.dephased, run.reflected, run.final):
            assert np.max(np.abs(state.rho - state.rho.conj().T)) <= 1e-12

    def test_small_parameter_warning(self, demonstrated, policy_for, caplog):
        fidelity_closed_form(demonstrated.rates, policy_for(demonstrated), ProtocolErrors(), 1.0, 1e-7)
        assert "bandwidth" in caplog.text

    def test_closed_form_needs_positive_duration(self, demonstrated, policy_for):
        with pytest.raises(InvalidInputError):
            closed_form_losses(demonstrated.rates, policy_for(demonstrated), ProtocolErrors(), 0.0)

    def test_report_keys(self, demonstrated, policy_for):
        report = run_protocol(demonstrated.rates, policy_for(demonstrated), ProtocolErrors(), 0.98, 13e-6).to_dict()
        assert report["t_p_us"] == pytest.approx(13.0)
        assert set(report["states"]) == {"prepared", "dephased", "reflected", "final"}
        assert set(report["closed_form_losses"]) == {"reflection", "bandwidth", "dephasing", "rotation", "total"}


class TestVacuumBranch:
    def test_perfect_rotations_return_to_the_detuned_state(self):
        assert vacuum_branch_population(ProtocolErrors()) == pytest.approx(0.0, abs=1e-15)

    def test_matched_errors_cancel(self):
        errors = ProtocolErrors(prep_angle_error=0.1, readout_angle_error=0.1)
        assert vacuum_branch_population(errors) == pytest.approx(0.0, abs=1e-15)

    def test_preparation_error_alone(self):
        errors = ProtocolErrors(prep_angle_error=0.1)
        assert vacuum_branch_population(errors) == pytest.approx(math.sin(0.05) ** 2, abs=1e-12)

    def test_dephasing_leaves_a_false_click_floor(self):
        policy = DephasingPolicy(spin_dephasing_rate=100.0, superposition_time_multiplier=2.0)
        population = vacuum_branch_population(ProtocolErrors(), policy, 1e-3)
        assert population == pytest.approx((1 - math.exp(-0.2)) / 2, abs=1e-12)

    def test_conditional_reflection_keeps_the_off_branch_population(self):
        state = prepare_superposition(ProtocolErrors())
        reflected = apply_conditional_reflection(state, BranchAmplitudes(resonant=0.5, detuned=-1.0))
        assert reflected.population(0) == pytest.approx(0.125)
        assert reflected.population(1) == pytest.approx(0.5)
        assert final_rotation(reflected, ProtocolErrors()).trace == pytest.approx(0.625)


class TestChannelProperties:
    def test_random_states_stay_physical(self, rng):
        for _ in range(200):
            a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            rho = a @ a.conj().T
            state = JointConditionalState(rho / np.trace(rho).real)
            errors = ProtocolErrors(*rng.uniform(-0.7, 0.7, size=2))
            policy = DephasingPolicy(
                spin_dephasing_rate=10 ** rng.uniform(-2, 4),
                superposition_time_multiplier=rng.uniform(1.0, 4.0),
            )
            amplitudes = BranchAmplitudes(
                resonant=rng.uniform(0.0, 1.0) * np.exp(1j * rng.uniform(-math.pi, math.pi)),
                detuned=rng.uniform(0.0, 1.0) * np.exp(1j * rng.uniform(-math.pi, math.pi)),
            )

            dephased = dephase(state, policy, 10 ** rng.uniform(-6, -2))
            reflected = apply_conditional_reflection(dephased, amplitudes)
            final = final_rotation(reflected, errors)

            previous = state
            for current in (dephased, reflected, final):
                _assert_physical(current.rho)
                assert current.trace <= previous.trace + 1e-9
                previous = current
