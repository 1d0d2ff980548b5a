"""Baseband synthesis of the combined array output under a modulation schedule.

The carrier factor exp(j*2*pi*f_c*t) rotates every channel identically and
carries no calibration information, so streams are synthesized at baseband:
the harmonic at f_c + q*f_p maps to the baseband bin at q*f_p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .array_model import (
    ArrayUnderTest,
    IncidentSource,
    Modulated,
    ModulationSchedule,
    Static,
    geometric_phases,
)
from .errors import ConfigError


@dataclass(frozen=True)
class SamplingConfig:
    """Discrete sampling scheme: samples per modulation period and period count.

    ``samples_per_period`` must be a power of two so every dyadic delay grid
    it can resolve is sampled exactly.
    """

    samples_per_period: int = 64
    period_count: int = 16

    def __post_init__(self):
        s = self.samples_per_period
        if s < 2 or (s & (s - 1)) != 0:
            raise ConfigError(f"samples_per_period must be a power of two >= 2, got {s}")
        if self.period_count < 1:
            raise ConfigError("period_count must be >= 1")

    @property
    def total_samples(self) -> int:
        return self.samples_per_period * self.period_count

    def resolve_bits(self, n_be: int) -> "SamplingConfig":
        """Sampling config whose grid resolves an n_be-bit delay step exactly.

        Raises samples_per_period to 2**n_be when needed; otherwise returns
        self unchanged.  Without this, delays finer than the sample grid
        would silently snap to it.
        """
        needed = 1 << n_be
        if self.samples_per_period >= needed:
            return self
        return replace(self, samples_per_period=needed)


@dataclass(frozen=True, eq=False)
class ComplexSampleStream:
    """Baseband time-domain samples of the combined array output."""

    samples: np.ndarray
    sample_rate: float
    modulation_frequency: float

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=complex))

    @property
    def samples_per_period(self) -> int:
        ratio = self.sample_rate / self.modulation_frequency
        rounded = round(ratio)
        if abs(ratio - rounded) > 1e-9:
            raise ConfigError("sample rate is not an integer multiple of f_p")
        return int(rounded)

    def __len__(self) -> int:
        return len(self.samples)


def static_value(entry: Static, channel) -> complex:
    """Complex factor contributed by a parked shifter, including its state error."""
    if entry.state == 0:
        return complex(np.exp(1j * channel.state0_error))
    return complex(-np.exp(1j * channel.state1_error))


def channel_gains(aut: ArrayUnderTest, source: IncidentSource) -> np.ndarray:
    """Per-element complex gain A_n * exp(j*(phi_n + geometric phase))."""
    geo = geometric_phases(aut, source)
    return np.array([
        ch.amplitude * np.exp(1j * (ch.phase + g)) for ch, g in zip(aut.channels, geo)
    ])


def synthesize_received(
    aut: ArrayUnderTest,
    source: IncidentSource,
    schedule: ModulationSchedule,
    sampling: SamplingConfig,
) -> ComplexSampleStream:
    """Noiseless baseband samples of the combined array output.

    Sample i (at time i / (samples_per_period * f_p)) equals
    sqrt(power) * sum_n V_n(t_i) * A_n * exp(j*(phi_n + 2*pi*d*n*sin(theta))),
    where V_n is the waveform value for modulated channels and the parked
    state factor for static ones.  The stream is exactly periodic in
    ``samples_per_period`` samples.
    """
    if len(schedule.entries) != aut.element_count:
        raise ConfigError(
            f"schedule has {len(schedule.entries)} entries for {aut.element_count} elements"
        )
    s = sampling.samples_per_period
    gains = channel_gains(aut, source)

    period = np.zeros(s, dtype=complex)
    static_sum = 0j
    for entry, gain, ch in zip(schedule.entries, gains, aut.channels):
        if isinstance(entry, Modulated):
            period += gain * entry.waveform.sample_period(s)
        else:
            static_sum += gain * static_value(entry, ch)
    period += static_sum

    samples = np.tile(period, sampling.period_count)
    if source.power != 1.0:
        samples = samples * math.sqrt(source.power)
    return ComplexSampleStream(
        samples=samples,
        sample_rate=s * schedule.modulation_frequency,
        modulation_frequency=schedule.modulation_frequency,
    )


def add_noise(
    stream: ComplexSampleStream,
    snr_db: float,
    seed,
    reference_power: float = 1.0,
) -> ComplexSampleStream:
    """Add i.i.d. circular complex Gaussian noise to a sample stream.

    The per-sample noise variance is ``reference_power / 10**(snr_db/10)``:
    SNR is referenced to the reference channel's carrier power (1.0 for
    preset arrays), measured over the full sampling bandwidth.  With this
    convention the SNR figure is independent of the sampling configuration;
    coherent integration gain shows up only in the extracted bins.

    ``snr_db = math.inf`` is the noiseless flag and returns the stream
    unchanged.  ``seed`` may be anything numpy's ``default_rng`` accepts,
    including an existing ``Generator``.
    """
    if math.isinf(snr_db):
        return stream
    if len(stream.samples) == 0:
        raise ConfigError("cannot add noise to an empty stream")
    rng = np.random.default_rng(seed)
    sigma2 = reference_power * 10.0 ** (-snr_db / 10.0)
    n = len(stream.samples)
    parts = rng.standard_normal((2, n))
    noise = math.sqrt(sigma2 / 2.0) * (parts[0] + 1j * parts[1])
    return replace(stream, samples=stream.samples + noise)
