"""Classical rotating-element baseline: one element's physical phase shifter is
stepped through 0..360 degrees while the rest of the array sits still, and the
combined fundamental power is fit to a cosine.

Unlike the delay-swept method, the rotation here is produced by the physical
shifter, so per-state phase errors feed straight into the measurement; the
baseline exists to quantify that sensitivity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .array_model import (
    ArrayUnderTest,
    IncidentSource,
    TWO_PI,
    Static,
    geometric_phases,
    wrap_phase,
)
from .errors import ConfigError, InvalidCurveError
from .signal_engine import SamplingConfig, channel_gains, static_value


@dataclass(frozen=True, eq=False)
class RevCurve:
    """Combined-output fundamental power versus commanded shifter state."""

    phase_states: np.ndarray  # commanded phases, radians, uniform over [0, 2*pi)
    realized_phases: np.ndarray  # commanded + per-state shifter error
    powers: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.phase_states, dtype=float)
        realized = np.asarray(self.realized_phases, dtype=float)
        powers = np.asarray(self.powers, dtype=float)
        object.__setattr__(self, "phase_states", states)
        object.__setattr__(self, "realized_phases", realized)
        object.__setattr__(self, "powers", powers)
        if not (states.shape == realized.shape == powers.shape) or states.ndim != 1:
            raise ConfigError("curve arrays must share one 1-D shape")
        if len(states) < 3:
            raise ConfigError("rotation needs at least 3 phase states")
        steps = np.diff(states)
        if states[0] != 0.0 or np.ptp(steps) > 1e-12 or abs(
            states[-1] + steps[0] - TWO_PI
        ) > 1e-9:
            raise ConfigError("commanded phases must uniformly cover [0, 2*pi)")
        if np.any(powers < 0):
            raise ConfigError("powers must be non-negative")


def rev_sweep(
    aut: ArrayUnderTest,
    source: IncidentSource,
    element: int,
    bits: int,
    state_errors,
    snr_db: float,
    sampling: SamplingConfig,
    seed,
) -> RevCurve:
    """Rotate one element through all 2**bits commanded states and measure DC power.

    Every other element is parked in state 0 (its own state error applies);
    no modulation runs, so the measurement is the fundamental (DC bin of the
    baseband stream) with the same coherent integration as the harmonic path.
    ``state_errors`` holds the per-state phase error of the rotated shifter,
    one radian value per commanded state.
    """
    if not 0 <= element < aut.element_count:
        raise ConfigError(f"element {element} out of range")
    steps = 1 << bits
    errors = np.asarray(state_errors, dtype=float)
    if errors.shape != (steps,):
        raise ConfigError(f"need {steps} per-state errors, got shape {errors.shape}")
    commanded = TWO_PI * np.arange(steps) / steps
    realized = commanded + errors

    gains = channel_gains(aut, source)
    rest = 0j
    for i, ch in enumerate(aut.channels):
        if i != element:
            rest += gains[i] * static_value(Static(0), ch)
    values = rest + gains[element] * np.exp(1j * realized)

    total = sampling.total_samples
    scale = math.sqrt(source.power)
    dc = values * scale
    if not math.isinf(snr_db):
        rng = np.random.default_rng(seed)
        ref_power = source.power * aut.reference.amplitude**2
        sigma = math.sqrt(ref_power * 10.0 ** (-snr_db / 10.0))
        noise = rng.standard_normal((steps, 2 * total)).view(np.complex128)
        dc = dc + (sigma / math.sqrt(2.0)) * noise.mean(axis=1)  # DC bin of each stream
    return RevCurve(commanded, realized, np.abs(dc) ** 2)


def rev_estimate(curve: RevCurve) -> tuple[float, tuple[float, float]]:
    """Relative phase and ambiguous amplitude of the rotated element.

    Least-squares fits p(theta) = c0 + c1*cos(theta) + c2*sin(theta) against
    the commanded (not realized) phases, since a real calibrator does not
    know the shifter errors.  Returns the rotated element's phase relative to
    the static remainder, and the two amplitude-ratio roots (k, 1/k) of
    |B + E*e^(j*theta)|^2 = B^2 + E^2 + 2*B*E*cos(theta + psi), both relative
    to the static remainder's magnitude.
    """
    design = np.column_stack([
        np.ones_like(curve.phase_states),
        np.cos(curve.phase_states),
        np.sin(curve.phase_states),
    ])
    coef, *_ = np.linalg.lstsq(design, curve.powers, rcond=None)
    c0, c1, c2 = (float(c) for c in coef)
    if c0 <= 0:
        raise InvalidCurveError("mean power is not positive")
    swing = math.hypot(c1, c2)
    if swing < 1e-15 * c0:
        raise InvalidCurveError("flat rotation curve: rotated element has no amplitude")
    psi = float(wrap_phase(math.atan2(-c2, c1)))
    r = min(swing / c0, 1.0)
    k_low = r / (1.0 + math.sqrt(1.0 - r * r))
    return psi, (k_low, 1.0 / k_low)


@dataclass(frozen=True)
class RevCalibration:
    """Per-channel estimates assembled from one rotation of every element."""

    element_count: int
    reference_index: int
    phase_differences_all: np.ndarray  # per element, vs reference (0 at reference)
    amplitude_ratios_all: np.ndarray

    def phase_differences(self) -> np.ndarray:
        """Non-reference channels, in element order (same layout as the harmonic path)."""
        mask = np.arange(self.element_count) != self.reference_index
        return self.phase_differences_all[mask]

    def amplitude_ratios(self) -> np.ndarray:
        mask = np.arange(self.element_count) != self.reference_index
        return self.amplitude_ratios_all[mask]


def calibrate_array(
    aut: ArrayUnderTest,
    source: IncidentSource,
    bits: int,
    state_errors,
    snr_db: float,
    sampling: SamplingConfig,
    seed,
) -> RevCalibration:
    """Rotate every element in turn and solve for per-channel imbalances.

    Each rotation yields the element's field relative to the static rest of
    the array, z_n = k_n * e^(j*psi_n); the element field follows exactly as
    E_n proportional to z_n / (1 + z_n), and ratios against the reference
    element give the calibration quantities.  The smaller amplitude root is
    taken (single element weaker than the array remainder), which holds for
    arrays of more than a few comparable elements.  Known geometric phases of
    the incident source are divided out.
    """
    errors = np.asarray(state_errors, dtype=float)
    steps = 1 << bits
    if errors.shape != (aut.element_count, steps):
        raise ConfigError(
            f"state_errors must have shape ({aut.element_count}, {steps}), got {errors.shape}"
        )
    rng = np.random.default_rng(seed)
    fields = np.empty(aut.element_count, dtype=complex)
    for n in range(aut.element_count):
        curve = rev_sweep(aut, source, n, bits, errors[n], snr_db, sampling, rng)
        psi, (k_low, _) = rev_estimate(curve)
        z = k_low * np.exp(1j * psi)
        fields[n] = z / (1.0 + z)
    fields = fields * np.exp(-1j * geometric_phases(aut, source))
    ref = fields[aut.reference_index]
    ratios = fields / ref
    return RevCalibration(
        element_count=aut.element_count,
        reference_index=aut.reference_index,
        phase_differences_all=wrap_phase(np.angle(ratios)),
        amplitude_ratios_all=np.abs(ratios),
    )


def curve_contrast(curve: RevCurve) -> float:
    """(max - min) / mean of the measured powers; shrinks like 1/N for rotation curves."""
    mean = float(curve.powers.mean())
    if mean <= 0:
        raise InvalidCurveError("mean power is not positive")
    return float(np.ptp(curve.powers)) / mean
