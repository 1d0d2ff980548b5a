"""The closed-form coefficients are checked against a numerical-integration
oracle built only from the waveform definition, and the DFT extraction path is
checked against the closed forms; the two routes never share code."""

import cmath
import math

import numpy as np
import pytest

from rhevcal import (
    discrete_coefficient,
    AliasingError,
    ArrayUnderTest,
    ChannelResponse,
    ConfigError,
    IncidentSource,
    Modulated,
    ModulationSchedule,
    ModulationWaveform,
    SamplingConfig,
    Static,
    extract_harmonic,
    fourier_coefficient,
    harmonic_power_closed_form,
    preset_array,
    schedule_single_channel,
    schedule_two_channel,
    shifted_coefficient,
    synthesize_received,
    wrap_phase,
)

F_P = 10e6
SOURCE = IncidentSource(2e9)
ALPHA_IDEAL = -2j / math.pi


def numeric_coefficient(waveform, q, total_points=1_200_000):
    """Trapezoid integration of the defining integral, split at the jumps.

    The integrand is smooth between waveform transitions, so composite
    trapezoid on each piece converges quadratically; with >1e6 points the
    result is good far beyond 1e-9.
    """
    period = waveform.period
    jumps = {0.0, waveform.delay_fraction % 1.0, (waveform.delay_fraction + 0.5) % 1.0, 1.0}
    bounds = sorted(jumps)
    segments = [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    points = max(total_points // len(segments), 1000)
    total = 0j
    for a, b in segments:
        frac = np.linspace(a, b, points)
        t = frac * period
        value = waveform.value_at((a + b) / 2 * period)  # constant inside the segment
        integrand = value * np.exp(-2j * math.pi * q * frac)
        total += np.trapezoid(integrand, t)
    return total / period


class TestFourierCoefficient:
    def test_ideal_first_harmonic(self):
        wave = ModulationWaveform(period=1.0 / F_P)
        alpha = fourier_coefficient(wave, 1)
        assert abs(abs(alpha) - 2 / math.pi) < 1e-12
        assert abs(cmath.phase(alpha) + math.pi / 2) < 1e-12
        oracle = numeric_coefficient(wave, 1)
        assert abs(alpha - oracle) <= 1e-9 * abs(oracle)

    def test_ideal_dc_vanishes(self):
        wave = ModulationWaveform(period=1e-7)
        assert fourier_coefficient(wave, 0) == 0
        assert abs(numeric_coefficient(wave, 0)) < 1e-9

    def test_ideal_second_harmonic_vanishes(self):
        wave = ModulationWaveform(period=1e-7)
        assert fourier_coefficient(wave, 2) == 0
        assert abs(numeric_coefficient(wave, 2)) < 1e-9

    def test_closed_form_matches_oracle_with_errors_and_delay(self):
        rng = np.random.default_rng(8)
        for _ in range(25):
            wave = ModulationWaveform(
                period=1.0,
                delay_fraction=float(rng.uniform(0, 1)),
                state0_error=float(rng.uniform(-0.3, 0.3)),
                state1_error=float(rng.uniform(-0.3, 0.3)),
            )
            q = int(rng.integers(-5, 6))
            closed = fourier_coefficient(wave, q)
            oracle = numeric_coefficient(wave, q, total_points=300_000)
            assert abs(closed - oracle) <= 1e-7 * max(abs(oracle), 2 / math.pi)

    def test_error_coefficient_law(self):
        # with states (e0, pi+e1) the q=1 coefficient is (e^{je0}+e^{je1})/(j*pi):
        # magnitude (2/pi)*cos(delta/2), extra phase e0 + delta/2
        e0, e1 = 0.12, -0.31
        delta = e1 - e0
        wave = ModulationWaveform(1.0, 0.0, e0, e1)
        alpha = fourier_coefficient(wave, 1)
        assert abs(abs(alpha) - (2 / math.pi) * math.cos(delta / 2)) < 1e-12
        expected_phase = wrap_phase(e0 + delta / 2 - math.pi / 2)
        assert abs(wrap_phase(cmath.phase(alpha) - expected_phase)) < 1e-12

    def test_delay_factor(self):
        wave = ModulationWaveform(1.0, delay_fraction=0.25)
        base = ModulationWaveform(1.0)
        for q in (-3, -1, 1, 3):
            expected = fourier_coefficient(base, q) * cmath.exp(-2j * math.pi * q * 0.25)
            assert abs(fourier_coefficient(wave, q) - expected) < 1e-15


class TestShiftedCoefficient:
    def test_zero_delay_identity(self):
        assert shifted_coefficient(0.3 + 0.4j, 1, 0.0) == 0.3 + 0.4j

    def test_quarter_period_is_minus_90deg(self):
        alpha = 0.5 + 0.1j
        assert cmath.isclose(shifted_coefficient(alpha, 1, 0.25), alpha * cmath.exp(-1j * math.pi / 2))

    def test_second_harmonic_quarter_period(self):
        alpha = 1.0 + 0j
        assert cmath.isclose(shifted_coefficient(alpha, 2, 0.25), alpha * cmath.exp(-1j * math.pi))


class TestClosedFormPower:
    def test_fully_coherent(self):
        power = harmonic_power_closed_form(1.0, 0.0, 0.0, 1.0, ALPHA_IDEAL)
        assert abs(power - 16 / math.pi**2) < 1e-12

    def test_full_cancellation(self):
        power = harmonic_power_closed_form(1.0, 0.0, 0.5, 1.0, ALPHA_IDEAL)
        assert abs(power) < 1e-12

    def test_contrast_ratio_for_half_amplitude(self):
        etas = np.arange(64) / 64
        powers = [harmonic_power_closed_form(0.5, 0.3, e, 1.0, ALPHA_IDEAL) for e in etas]
        # on-grid peak/null require dphi on the grid; use the analytic extremes
        pmax = harmonic_power_closed_form(0.5, 0.0, 0.0, 1.0, ALPHA_IDEAL)
        pmin = harmonic_power_closed_form(0.5, 0.0, 0.5, 1.0, ALPHA_IDEAL)
        assert abs(pmax / pmin - 9.0) < 1e-12
        assert max(powers) <= pmax + 1e-15
        assert min(powers) >= pmin - 1e-15

    def test_negative_gamma_rejected(self):
        with pytest.raises(ConfigError):
            harmonic_power_closed_form(-0.1, 0, 0, 1, ALPHA_IDEAL)


def delayed_single_channel(aut, index, eta, f_p=F_P):
    """Schedule with only `index` modulated, at delay eta."""
    ch = aut.channels[index]
    period = 1.0 / f_p
    entries = [
        Modulated(ModulationWaveform(period, eta, ch.state0_error, ch.state1_error))
        if i == index else Static(0)
        for i in range(aut.element_count)
    ]
    return ModulationSchedule(tuple(entries), f_p)


class TestExtractHarmonic:
    def test_constant_stream_dc(self):
        aut = ArrayUnderTest(1, (ChannelResponse(),))
        sched = ModulationSchedule((Static(0),), F_P)
        stream = synthesize_received(aut, SOURCE, sched, SamplingConfig(64, 4))
        m = extract_harmonic(stream, 0)
        assert m.complex_value == 1 + 0j
        assert m.power == 1.0

    def test_single_channel_power_is_alpha_squared_times_amplitude_squared(self):
        amp = 0.7
        aut = ArrayUnderTest(3, (ChannelResponse(), ChannelResponse(amp, 0.4), ChannelResponse()))
        stream = synthesize_received(
            aut, SOURCE, schedule_single_channel(aut, F_P, 1), SamplingConfig(64, 8))
        power = extract_harmonic(stream, 1).power
        alpha = discrete_coefficient(ModulationWaveform(1.0 / F_P), 1, 64)
        assert abs(power - abs(alpha) ** 2 * amp**2) < 1e-12
        # the sampled coefficient sits (pi/S)/sin(pi/S) above the continuous 2/pi
        assert abs(power - (2 / math.pi) ** 2 * amp**2) < 1e-3 * power

    def test_single_channel_power_converges_to_continuous_value(self):
        # at 65536 samples per period the sampling correction drops below 1e-9
        amp = 0.7
        aut = ArrayUnderTest(2, (ChannelResponse(), ChannelResponse(amp, 0.4)))
        stream = synthesize_received(
            aut, SOURCE, schedule_single_channel(aut, F_P, 1), SamplingConfig(65536, 1))
        power = extract_harmonic(stream, 1).power
        expected = (2 / math.pi) ** 2 * amp**2
        assert abs(power - expected) <= 1e-9 * expected

    def test_two_channel_extraction_matches_closed_form(self):
        rng = np.random.default_rng(5)
        cfg = SamplingConfig(64, 4)
        alpha = discrete_coefficient(ModulationWaveform(1.0 / F_P), 1, 64)
        for _ in range(10):
            gamma = float(rng.uniform(0.2, 3.0))
            dphi = float(rng.uniform(-math.pi, math.pi))
            aut = ArrayUnderTest(2, (ChannelResponse(), ChannelResponse(gamma, dphi)))
            for k in (0, 7, 31, 63):
                eta = k / 64
                sched = schedule_two_channel(aut, F_P, 1, eta)
                stream = synthesize_received(aut, SOURCE, sched, cfg)
                measured = extract_harmonic(stream, 1).power
                expected = harmonic_power_closed_form(gamma, dphi, eta, 1.0, alpha)
                assert abs(measured - expected) <= 1e-9 * max(expected, 1e-3)

    def test_time_shift_rotates_phase(self):
        # delaying the modulated channel by eta rotates bin q by -2*pi*q*eta
        aut = ArrayUnderTest(2, (ChannelResponse(), ChannelResponse(0.8, 0.5)))
        cfg = SamplingConfig(256, 2)
        rng = np.random.default_rng(17)
        base = {}
        for q in (-3, -1, 1, 3):
            stream = synthesize_received(aut, SOURCE, delayed_single_channel(aut, 1, 0.0), cfg)
            base[q] = extract_harmonic(stream, q).complex_value
        for _ in range(40):
            eta = int(rng.integers(0, 256)) / 256
            stream = synthesize_received(aut, SOURCE, delayed_single_channel(aut, 1, eta), cfg)
            for q in (-3, -1, 1, 3):
                rotated = extract_harmonic(stream, q).complex_value
                shift = wrap_phase(cmath.phase(rotated) - cmath.phase(base[q]) + 2 * math.pi * q * eta)
                assert abs(shift) < 1e-9

    def test_state_error_law_end_to_end(self):
        # perturbing the states by (e0, e1) scales the extracted bin by exactly
        # cos(delta/2) * exp(j*(e0 + delta/2)) relative to the ideal waveform
        e0, e1 = 0.08, -0.21
        delta = e1 - e0
        cfg = SamplingConfig(64, 4)
        ideal = ArrayUnderTest(2, (ChannelResponse(), ChannelResponse(1.3, 0.9)))
        erred = ArrayUnderTest(
            2, (ChannelResponse(), ChannelResponse(1.3, 0.9, state0_error=e0, state1_error=e1)))
        base = extract_harmonic(
            synthesize_received(ideal, SOURCE, delayed_single_channel(ideal, 1, 0.0), cfg), 1)
        perturbed = extract_harmonic(
            synthesize_received(erred, SOURCE, delayed_single_channel(erred, 1, 0.0), cfg), 1)
        factor = math.cos(delta / 2) * cmath.exp(1j * (e0 + delta / 2))
        assert abs(perturbed.complex_value - base.complex_value * factor) < 1e-12
        # and the perturbed bin equals the perturbed discrete coefficient directly
        wave = ModulationWaveform(1.0 / F_P, 0.0, e0, e1)
        expected = discrete_coefficient(wave, 1, 64) * 1.3 * cmath.exp(1j * 0.9)
        assert abs(perturbed.complex_value - expected) < 1e-12

    def test_parseval_noiseless(self):
        aut = preset_array(4, 3.0, 120.0, seed=2)
        sched = schedule_two_channel(aut, F_P, 2, 0.25)
        stream = synthesize_received(aut, SOURCE, sched, SamplingConfig(64, 4))
        s = stream.samples_per_period
        bins = [extract_harmonic(stream, q).power for q in range(-s // 2 + 1, s // 2)]
        # the +/- Nyquist bin is excluded by the aliasing guard; it is empty here
        total = sum(bins)
        mean_power = np.mean(np.abs(stream.samples) ** 2)
        assert abs(total - mean_power) < 1e-9 * mean_power

    def test_even_harmonics_vanish(self):
        aut = ArrayUnderTest(2, (ChannelResponse(), ChannelResponse(0.9, 0.3)))
        sched = schedule_two_channel(aut, F_P, 1, 0.25)
        stream = synthesize_received(aut, SOURCE, sched, SamplingConfig(64, 4))
        dc = extract_harmonic(stream, 0).power  # statics park at DC
        for q in (2, 4, -2, -6):
            assert extract_harmonic(stream, q).power < 1e-12

    def test_aliasing_guard(self):
        aut = ArrayUnderTest(1, (ChannelResponse(),))
        stream = synthesize_received(
            aut, SOURCE, ModulationSchedule((Static(0),), F_P), SamplingConfig(8, 2))
        with pytest.raises(AliasingError):
            extract_harmonic(stream, 4)

    def test_partial_period_rejected(self):
        from rhevcal import ComplexSampleStream

        stream = ComplexSampleStream(np.ones(100, dtype=complex), 64 * F_P, F_P)
        with pytest.raises(ConfigError):
            extract_harmonic(stream, 1)
