import math

import numpy as np
import pytest

from rei_qnd.cavity.reflection import (
    ReflectionAmplitude,
    bandwidth_exponent,
    detuned_partial_fractions,
    narrow_feature_bandwidth,
    on_resonance_detuned,
    on_resonance_resonant,
    pulse_averaged_numeric,
    pulse_averaged_resonant,
    reconstruct,
    reflection_coefficient,
    resonant_partial_fractions,
    spectrum_sweep,
)
from rei_qnd.errors import InvalidInputError, NumericalIntegrityError, RegimeViolationError


def _max_relative_error(features, deltas, exact):
    return float(np.max(np.abs(reconstruct(features, deltas) - exact) / np.abs(exact)))


class TestReflectionCoefficient:
    def test_resonant_center(self):
        # (g^2 - kappa gamma / 2) / (g^2 + kappa gamma / 2)
        r = reflection_coefficient(0.0, 0.0, 1.0, 10.0, 0.01)
        assert r == pytest.approx(0.95 / 1.05, abs=1e-12)

    def test_detuned_center(self):
        r = reflection_coefficient(0.0, 20.0, 1.0, 10.0, 0.01)
        assert r == pytest.approx(complex(-1.0, -0.01), abs=1e-4)

    def test_bare_cavity(self):
        for delta in (-30.0, -1.0, 0.0, 2.5, 17.0):
            r = reflection_coefficient(delta, 0.0, 0.0, 10.0, 0.0)
            assert abs(r) == pytest.approx(1.0, abs=1e-12)
            assert r == pytest.approx((1j * delta - 10.0) / (1j * delta + 10.0))

    def test_lossless_atom_is_unitary(self, rng):
        deltas = rng.uniform(-50.0, 50.0, size=200)
        values = reflection_coefficient(deltas, 20.0, 1.0, 10.0, 0.0)
        np.testing.assert_allclose(np.abs(values), 1.0, atol=1e-12)

    def test_passivity_over_random_parameters(self, rng):
        for draw in range(10_000):
            g, kappa, gamma = 10 ** rng.uniform(-3.0, 3.0, size=3)
            detuning, delta = rng.uniform(-1e3, 1e3, size=2)
            if draw % 10 == 0:
                gamma = 0.0
            if draw % 25 == 0:
                g = 0.0
            assert abs(reflection_coefficient(delta, detuning, g, kappa, gamma)) <= 1.0 + 1e-9

    @pytest.mark.parametrize("cooperativity", [10.0, 100.0, 1000.0, 10000.0])
    def test_resonant_power_loss_tracks_inverse_cooperativity(self, cooperativity):
        g, kappa = 1.0, 10.0
        gamma = g * g / (kappa * cooperativity)
        r = reflection_coefficient(0.0, 0.0, g, kappa, gamma)
        assert 1.0 - abs(r) ** 2 == pytest.approx(2.0 * kappa * gamma / (g * g), rel=1.0 / cooperativity)

    def test_array_shape(self):
        deltas = np.linspace(-5.0, 5.0, 11)
        assert reflection_coefficient(deltas, 0.0, 1.0, 10.0, 0.01).shape == (11,)

    def test_rejects_non_positive_kappa(self):
        with pytest.raises(InvalidInputError):
            reflection_coefficient(0.0, 0.0, 1.0, 0.0, 0.01)

    def test_amplitude_passivity_guard(self):
        with pytest.raises(NumericalIntegrityError):
            ReflectionAmplitude(value=1.01 + 0j, detuning=0.0)


class TestPartialFractions:
    def test_resonant_reconstruction(self, rng):
        g, kappa, gamma = 1.0, 100.0, 0.001
        deltas = rng.uniform(-2 * kappa, 2 * kappa, size=50)
        exact = reflection_coefficient(deltas, 0.0, g, kappa, gamma)
        assert _max_relative_error(resonant_partial_fractions(g, kappa, gamma), deltas, exact) < 1e-3

    def test_detuned_reconstruction(self, rng):
        g, kappa, gamma, detuning = 1.0, 30.0, 0.01, 60.0
        deltas = rng.uniform(-2 * detuning, 2 * detuning, size=50)
        exact = reflection_coefficient(deltas, detuning, g, kappa, gamma)
        features = detuned_partial_fractions(g, kappa, gamma, detuning)
        assert _max_relative_error(features, deltas, exact) < 1e-3

    def test_resonant_error_scales_as_g_over_kappa_squared(self):
        errors = {}
        for kappa in (30.0, 100.0):
            deltas = np.linspace(-2 * kappa, 2 * kappa, 4001)
            exact = reflection_coefficient(deltas, 0.0, 1.0, kappa, 0.001)
            errors[kappa] = _max_relative_error(resonant_partial_fractions(1.0, kappa, 0.001), deltas, exact)
        ratio = errors[30.0] / errors[100.0]
        assert (100.0 / 30.0) ** 2 / 2 < ratio < (100.0 / 30.0) ** 2 * 2

    def test_feature_widths(self):
        broad, narrow = resonant_partial_fractions(1.0, 10.0, 0.01)
        assert broad.hwhm == pytest.approx(9.9)
        assert narrow.hwhm == pytest.approx(0.105)
        assert {broad.label, narrow.label} == {"cavity_dip", "atomic_peak"}

    def test_fano_feature_position(self):
        _, fano = detuned_partial_fractions(1.0, 10.0, 0.01, 20.0)
        assert fano.label == "fano"
        assert fano.center == pytest.approx(-20.0 * (1 + 1 / 500), rel=1e-12)

    def test_hard_regime_violation(self):
        with pytest.raises(RegimeViolationError):
            resonant_partial_fractions(1.0, 2.0, 0.01)

    def test_soft_regime_is_flagged(self, caplog):
        broad, _ = resonant_partial_fractions(1.0, 5.0, 0.01)
        assert not broad.regime_ok
        assert "clean regime" in caplog.text

    def test_clean_regime_is_not_flagged(self):
        broad, narrow = resonant_partial_fractions(1.0, 100.0, 0.01)
        assert broad.regime_ok and narrow.regime_ok

    def test_detuned_needs_positive_detuning(self):
        with pytest.raises(InvalidInputError):
            detuned_partial_fractions(1.0, 10.0, 0.01, 0.0)

    def test_detuning_close_to_gamma_is_flagged(self):
        cavity_feature, _ = detuned_partial_fractions(1.0, 10.0, 5.0, 40.0)
        assert not cavity_feature.regime_ok


class TestOnResonance:
    def test_resonant_first_order(self):
        assert on_resonance_resonant(1.0, 10.0, 0.01) == pytest.approx(0.9)
        exact = reflection_coefficient(0.0, 0.0, 1.0, 10.0, 0.01)
        assert abs(on_resonance_resonant(1.0, 10.0, 0.01) - exact) < 0.01

    def test_resonant_needs_cooperativity_above_one(self):
        with pytest.raises(InvalidInputError):
            on_resonance_resonant(1.0, 10.0, 0.2)

    def test_resonant_without_coupling_is_the_bare_cavity(self):
        assert on_resonance_resonant(0.0, 10.0, 0.0) == -1
        assert on_resonance_resonant(0.0, 10.0, 0.0) == reflection_coefficient(0.0, 0.0, 0.0, 10.0, 0.0)
        with pytest.raises(InvalidInputError):
            on_resonance_resonant(0.0, 10.0, 0.01)

    def test_detuned_first_order(self):
        assert on_resonance_detuned(1.0, 10.0, 20.0) == pytest.approx(complex(-1.0, -0.01))

    def test_detuned_matches_exact_to_second_order(self):
        for kappa, detuning in ((10.0, 20.0), (30.0, 60.0), (100.0, 300.0)):
            small = 1.0 / (kappa * detuning)
            exact = reflection_coefficient(0.0, detuning, 1.0, kappa, 0.0)
            assert abs(on_resonance_detuned(1.0, kappa, detuning) - exact) < 10 * small ** 2 + 1e-12

    def test_detuned_rejects_zero_detuning(self):
        with pytest.raises(InvalidInputError):
            on_resonance_detuned(1.0, 10.0, 0.0)


class TestPulseAveraging:
    def test_bandwidth_exponent(self):
        assert bandwidth_exponent(1.0, 10.0, 100.0) == pytest.approx(10 * math.sqrt(math.log(2)) / (math.pi * 100))

    def test_long_pulse_limit(self):
        assert pulse_averaged_resonant(1.0, 10.0, 0.01, 1e9) == pytest.approx(0.9, abs=1e-8)

    def test_demonstrated_bandwidth_factor(self, demonstrated):
        rates = demonstrated.rates
        exponent = bandwidth_exponent(rates.g, rates.kappa, 13e-6)
        assert exponent == pytest.approx(0.02939, rel=1e-3)

    def test_short_pulse_warns(self, caplog):
        pulse_averaged_resonant(1.0, 10.0, 0.01, 5.0)
        assert "pulse bandwidth" in caplog.text

    def test_closed_form_loss_bounds_the_spectral_average(self, demonstrated):
        rates = demonstrated.rates
        for t_p_us in (5.0, 10.0, 20.0, 50.0):
            t_p = t_p_us * 1e-6
            closed_loss = bandwidth_exponent(rates.g, rates.kappa, t_p)
            averaged = pulse_averaged_numeric(rates.g, rates.kappa, 0.0, t_p)
            averaged_loss = 1.0 - abs(averaged)
            assert averaged_loss <= closed_loss
            assert closed_loss < 20.0 * averaged_loss

    def test_spectral_average_of_the_detuned_branch_is_flat(self):
        center = reflection_coefficient(0.0, 20.0, 1.0, 10.0, 0.01)
        averaged = pulse_averaged_numeric(1.0, 10.0, 0.01, 200.0, detuning=20.0)
        assert averaged == pytest.approx(center, abs=1e-4)

    def test_narrow_feature_bandwidth(self, demonstrated):
        rates = demonstrated.rates
        width = narrow_feature_bandwidth(rates.g, rates.kappa, rates.gamma)
        assert width / (2 * math.pi) == pytest.approx(113.3e3, rel=2e-3)


class TestSpectrumSweep:
    def test_sweep_is_ordered_and_passive(self, normalized_rates):
        amplitudes = spectrum_sweep(normalized_rates, 20.0, (-30.0, 30.0), 601)
        deltas = [amplitude.detuning for amplitude in amplitudes]
        assert deltas == sorted(deltas)
        assert len(amplitudes) == 601
        assert max(amplitude.magnitude for amplitude in amplitudes) <= 1.0 + 1e-9

    def test_fano_feature_shows_near_minus_delta(self, normalized_rates):
        detuned = spectrum_sweep(normalized_rates, 20.0, (-30.0, 30.0), 601)
        bare = spectrum_sweep(normalized_rates, 20.0, (-30.0, 30.0), 601, g_eff=0.0)
        by_delta = {round(a.detuning, 6): (a.value, b.value) for a, b in zip(detuned, bare)}
        near, near_bare = by_delta[-20.0]
        far, far_bare = by_delta[20.0]
        assert abs(near - near_bare) > 0.1
        assert abs(far - far_bare) < 0.05

    def test_empty_range(self, normalized_rates):
        with pytest.raises(InvalidInputError):
            spectrum_sweep(normalized_rates, 0.0, (1.0, 1.0), 10)
