"""Domain model: the array under test, the calibration source, and modulation waveforms.

Conventions used throughout the package:

* phases are radians internally, wrapped to [-pi, pi); CLI and file formats
  use degrees
* amplitudes are linear voltage-scale factors; amplitude dB values use
  20*log10, power dB values use 10*log10
* element spacing is expressed in carrier wavelengths, so the geometric
  phase of element n is 2*pi*spacing*n*sin(theta)

All types are immutable value objects and safe to share between workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, InvalidArrayError

TWO_PI = 2.0 * math.pi


def wrap_phase(phi):
    """Wrap an angle (scalar or ndarray) to [-pi, pi)."""
    return (phi + math.pi) % TWO_PI - math.pi


def db_to_amplitude(db):
    """Convert an amplitude ratio in dB (20*log10 convention) to linear scale."""
    return 10.0 ** (np.asarray(db) / 20.0)


def amplitude_to_db(amp):
    """Convert a linear amplitude ratio to dB (20*log10 convention)."""
    return 20.0 * np.log10(np.asarray(amp))


@dataclass(frozen=True)
class ChannelResponse:
    """Complex response of one RF channel plus its 1-bit phase-shifter state errors.

    ``amplitude`` and ``phase`` are the quantities calibration estimates
    (relative to the reference channel).  ``state0_error`` / ``state1_error``
    are the deviations of the shifter's nominal 0 and 180 degree states, in
    radians.  Amplitude 0 is tolerated so schedules over channel subsets can
    be composed in tests; preset generation never produces it.
    """

    amplitude: float = 1.0
    phase: float = 0.0
    state0_error: float = 0.0
    state1_error: float = 0.0

    def __post_init__(self):
        if not self.amplitude >= 0.0:
            raise InvalidArrayError(f"channel amplitude must be >= 0, got {self.amplitude}")
        object.__setattr__(self, "phase", float(wrap_phase(self.phase)))


@dataclass(frozen=True)
class ArrayUnderTest:
    """Uniform linear array whose per-channel imbalances are being calibrated."""

    element_count: int
    channels: tuple[ChannelResponse, ...]
    spacing: float = 0.5  # element pitch in wavelengths
    reference_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if len(self.channels) != self.element_count:
            raise InvalidArrayError(
                f"expected {self.element_count} channels, got {len(self.channels)}"
            )
        if not 0 <= self.reference_index < self.element_count:
            raise InvalidArrayError(f"reference index {self.reference_index} out of range")
        if not self.spacing > 0:
            raise InvalidArrayError("element spacing must be positive")

    @property
    def reference(self) -> ChannelResponse:
        return self.channels[self.reference_index]

    def amplitude_ratios(self) -> np.ndarray:
        """True amplitude ratios A_n / A_ref for every element (reference gives 1)."""
        amps = np.array([c.amplitude for c in self.channels])
        return amps / self.reference.amplitude

    def phase_differences(self) -> np.ndarray:
        """True phase differences phi_n - phi_ref, wrapped, for every element."""
        phases = np.array([c.phase for c in self.channels])
        return wrap_phase(phases - self.reference.phase)


@dataclass(frozen=True)
class IncidentSource:
    """Far-field calibration source illuminating the array."""

    carrier_frequency: float
    incident_angle: float = 0.0  # radians
    power: float = 1.0  # linear, scales the synthesized signal by sqrt(power)

    def __post_init__(self):
        if not self.carrier_frequency > 0:
            raise ConfigError("carrier frequency must be positive")
        if not abs(self.incident_angle) < math.pi / 2:
            raise ConfigError("incident angle must satisfy |theta| < pi/2")
        if not self.power > 0:
            raise ConfigError("source power must be positive")


def geometric_phases(aut: ArrayUnderTest, source: IncidentSource) -> np.ndarray:
    """Per-element geometric phase 2*pi*d*n*sin(theta), n = 0..N-1, in radians."""
    return TWO_PI * aut.spacing * np.arange(aut.element_count) * math.sin(source.incident_angle)


@dataclass(frozen=True)
class ModulationWaveform:
    """Periodic 0/180-degree phase toggle with a programmable start delay.

    The waveform takes value exp(j*state0_error) for the first half-period and
    exp(j*(pi + state1_error)) for the second, the whole pattern circularly
    shifted by ``delay_fraction`` of a period.  With zero state errors the two
    values are exactly +1 and -1.
    """

    period: float
    delay_fraction: float = 0.0
    state0_error: float = 0.0
    state1_error: float = 0.0

    def __post_init__(self):
        if not self.period > 0:
            raise ConfigError("modulation period must be positive")
        if not 0.0 <= self.delay_fraction < 1.0:
            raise ConfigError("delay fraction must lie in [0, 1)")

    def value_at(self, t):
        """Waveform value at time t (seconds); scalar or ndarray."""
        local = (np.asarray(t) / self.period - self.delay_fraction) % 1.0
        v0 = np.exp(1j * self.state0_error)
        v1 = -np.exp(1j * self.state1_error)
        return np.where(local < 0.5, v0, v1)

    def sample_period(self, samples_per_period: int) -> np.ndarray:
        """One period of the waveform, point-sampled at ``samples_per_period``.

        A delay that is not a multiple of 1/samples_per_period lands between
        sample instants; the sampled sequence then equals that of the next
        on-grid delay.  Calibration code always picks sample rates that
        resolve its delay grid exactly.
        """
        i = np.arange(samples_per_period)
        local = (i / samples_per_period - self.delay_fraction) % 1.0
        v0 = np.exp(1j * self.state0_error)
        v1 = -np.exp(1j * self.state1_error)
        return np.where(local < 0.5, v0, v1)


@dataclass(frozen=True)
class Static:
    """Schedule entry: shifter parked in one state (0 -> nominal 0 deg, 1 -> 180 deg)."""

    state: int = 0

    def __post_init__(self):
        if self.state not in (0, 1):
            raise ConfigError("static state must be 0 or 1")


@dataclass(frozen=True)
class Modulated:
    """Schedule entry: shifter toggled periodically by ``waveform``."""

    waveform: ModulationWaveform


@dataclass(frozen=True)
class ModulationSchedule:
    """Per-channel modulation assignment for one measurement."""

    entries: tuple
    modulation_frequency: float

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.modulation_frequency > 0:
            raise ConfigError("modulation frequency must be positive")
        period = 1.0 / self.modulation_frequency
        for i, entry in enumerate(self.entries):
            if isinstance(entry, Modulated) and entry.waveform.period != period:
                raise ConfigError(f"entry {i} period differs from the shared 1/f_p")

    @property
    def modulated_indices(self) -> tuple[int, ...]:
        return tuple(i for i, e in enumerate(self.entries) if isinstance(e, Modulated))


def schedule_two_channel(
    aut: ArrayUnderTest,
    modulation_frequency: float,
    test_index: int,
    delay_fraction: float,
    reference_delay: float = 0.0,
) -> ModulationSchedule:
    """Reference and test channel modulated together, the rest parked in state 0.

    State errors are copied from each channel's response, so shifter
    imperfections propagate into the waveforms automatically.
    """
    if not 0 <= test_index < aut.element_count:
        raise ConfigError(f"test index {test_index} out of range")
    if test_index == aut.reference_index:
        raise ConfigError("test channel must differ from the reference channel")
    period = 1.0 / modulation_frequency
    entries = []
    for i, ch in enumerate(aut.channels):
        if i == aut.reference_index:
            entries.append(Modulated(ModulationWaveform(
                period, reference_delay, ch.state0_error, ch.state1_error)))
        elif i == test_index:
            entries.append(Modulated(ModulationWaveform(
                period, delay_fraction, ch.state0_error, ch.state1_error)))
        else:
            entries.append(Static(0))
    return ModulationSchedule(tuple(entries), modulation_frequency)


def schedule_single_channel(
    aut: ArrayUnderTest, modulation_frequency: float, index: int
) -> ModulationSchedule:
    """Only one channel modulated (zero delay); the rest parked in state 0."""
    if not 0 <= index < aut.element_count:
        raise ConfigError(f"channel index {index} out of range")
    period = 1.0 / modulation_frequency
    ch = aut.channels[index]
    entries = [
        Modulated(ModulationWaveform(period, 0.0, ch.state0_error, ch.state1_error))
        if i == index else Static(0)
        for i in range(aut.element_count)
    ]
    return ModulationSchedule(tuple(entries), modulation_frequency)


def preset_array(n: int, amp_spread_db: float, phase_spread_deg: float, seed) -> ArrayUnderTest:
    """Generate a random array with uniform amplitude/phase imbalances.

    The reference channel (index 0) is normalized to amplitude 1, phase 0.
    Every other channel draws its amplitude uniformly within
    +/- amp_spread_db/2 (dB, 20*log10) and its phase uniformly within
    +/- phase_spread_deg/2.  Deterministic for a fixed seed; amplitudes are
    drawn first, then phases.
    """
    if n < 2:
        raise InvalidArrayError(f"preset array needs at least 2 elements, got {n}")
    if amp_spread_db < 0 or phase_spread_deg < 0:
        raise InvalidArrayError("spreads must be non-negative")
    rng = np.random.default_rng(seed)
    amps = db_to_amplitude(rng.uniform(-amp_spread_db / 2, amp_spread_db / 2, n - 1))
    phases = np.deg2rad(rng.uniform(-phase_spread_deg / 2, phase_spread_deg / 2, n - 1))
    channels = [ChannelResponse(1.0, 0.0)]
    channels += [ChannelResponse(float(a), float(p)) for a, p in zip(amps, phases)]
    return ArrayUnderTest(n, tuple(channels))


def with_state_errors(aut: ArrayUnderTest, state0_error, state1_error) -> ArrayUnderTest:
    """Copy of ``aut`` with 1-bit shifter state errors applied (radians).

    Each error may be a scalar (applied to every channel) or a length-N
    sequence of per-channel values.
    """
    e0 = np.broadcast_to(np.asarray(state0_error, dtype=float), (aut.element_count,))
    e1 = np.broadcast_to(np.asarray(state1_error, dtype=float), (aut.element_count,))
    channels = tuple(
        replace(ch, state0_error=float(a), state1_error=float(b))
        for ch, a, b in zip(aut.channels, e0, e1)
    )
    return replace(aut, channels=channels)


def quantize_delay(eta: float, n_be: int) -> float:
    """Quantize a normalized delay to the grid of an n_be-bit equivalent shifter.

    Returns round(eta * 2**n_be) / 2**n_be modulo 1; values that round up to a
    full period wrap back to 0.  Half-way cases round up.
    """
    if not 0.0 <= eta < 1.0:
        raise ConfigError(f"normalized delay must lie in [0, 1), got {eta}")
    if n_be < 1:
        raise ConfigError(f"delay resolution needs at least 1 bit, got {n_be}")
    steps = 1 << n_be
    return (math.floor(eta * steps + 0.5) % steps) / steps
