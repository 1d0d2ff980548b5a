"""Monte Carlo harness, RMSE metrics, parameter sweeps, and beam-pattern checks.

Seeding layout: every trial draws its preset array, its measurement noise and
its error-model realization from seeds derived as
``SeedSequence([base_seed, salt, trial_index])``.  The axis index of a sweep
deliberately does not enter the derivation, so sweeping an error magnitude or
an SNR re-runs the exact same arrays and noise shapes (common random numbers);
that is what makes the noiseless error-sweep comparisons exact.

Trials are embarrassingly parallel; set the ``RHEV_THREADS`` environment
variable to an integer >= 1 to cap the number of worker processes (default 1,
i.e. in-process).  Results are keyed by trial index, so the merge is
deterministic regardless of worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import rev as rev_mod
from .array_model import (
    ArrayUnderTest,
    IncidentSource,
    TWO_PI,
    preset_array,
    with_state_errors,
    wrap_phase,
)
from .errors import ConfigError, DeadChannelError, RhevcalError
from .rhev import CalibrationResult, calibrate_full
from .signal_engine import SamplingConfig

_SALT_PRESET = 1
_SALT_NOISE = 2
_SALT_ERRORS = 3
_SALT_REV_STATES = 4

AXES = ("snr", "array_size", "bits", "phase_error")


@dataclass(frozen=True)
class Scenario:
    """One Monte Carlo configuration, matching the baseline simulation setup."""

    element_count: int = 8
    amp_spread_db: float = 4.0
    phase_spread_deg: float = 180.0
    spacing: float = 0.5
    carrier_frequency: float = 2.0e9
    incident_angle_deg: float = 0.0
    modulation_frequency: float = 10.0e6
    n_be: int = 6
    snr_db: float = 20.0
    sampling: SamplingConfig = SamplingConfig()
    method: str = "rhev"  # rhev | rev
    trials: int = 200
    base_seed: int = 0
    error_mode: str = "none"  # none | common | per_channel (1-bit state errors)
    error_deg: float = 0.0
    rev_state_error_deg: float = 5.0
    phase_method: str = "argmax"
    amplitude_from: str = "sweep"
    ratio_method: str = "cosine_fit"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.method not in ("rhev", "rev"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.error_mode not in ("none", "common", "per_channel"):
            raise ConfigError(f"unknown error mode {self.error_mode!r}")

    def source(self) -> IncidentSource:
        return IncidentSource(self.carrier_frequency, math.radians(self.incident_angle_deg))


@dataclass(frozen=True)
class RmsePoint:
    """Monte Carlo RMSE estimates for one configuration."""

    axis_value: float
    rmse_amplitude_ratio: float
    rmse_phase_difference: float  # radians
    trials: int
    excluded: int


@dataclass(frozen=True)
class RmseReport:
    axis: str
    values: tuple
    points: tuple[RmsePoint, ...]
    base_seed: int


def _derived_seed(base_seed: int, salt: int, index: int) -> int:
    state = np.random.SeedSequence([int(base_seed), salt, int(index)]).generate_state(1, np.uint64)
    return int(state[0])


def _trial_array(scenario: Scenario, trial: int) -> ArrayUnderTest:
    aut = preset_array(
        scenario.element_count,
        scenario.amp_spread_db,
        scenario.phase_spread_deg,
        _derived_seed(scenario.base_seed, _SALT_PRESET, trial),
    )
    if scenario.spacing != aut.spacing:
        aut = replace(aut, spacing=scenario.spacing)
    if scenario.error_mode == "common":
        aut = with_state_errors(aut, 0.0, math.radians(scenario.error_deg))
    elif scenario.error_mode == "per_channel":
        rng = np.random.default_rng(_derived_seed(scenario.base_seed, _SALT_ERRORS, trial))
        mag = abs(math.radians(scenario.error_deg))
        aut = with_state_errors(aut, 0.0, rng.uniform(-mag, mag, scenario.element_count))
    return aut


def _rev_state_errors(scenario: Scenario) -> np.ndarray:
    """Per-channel, per-state shifter errors; fixed hardware shared by all trials."""
    rng = np.random.default_rng(_derived_seed(scenario.base_seed, _SALT_REV_STATES, 0))
    mag = math.radians(scenario.rev_state_error_deg)
    return rng.uniform(-mag, mag, (scenario.element_count, 1 << scenario.n_be))


def _wrapped_phase_errors(estimated: np.ndarray, true: np.ndarray) -> np.ndarray:
    """Estimation errors on the circle; invariant under adding 2*pi to any preset."""
    return wrap_phase(np.asarray(estimated) - np.asarray(true))


def _run_trial(scenario: Scenario, trial: int) -> tuple[np.ndarray, np.ndarray]:
    """One trial's per-channel (amplitude error, phase error) arrays."""
    aut = _trial_array(scenario, trial)
    source = scenario.source()
    noise_seed = _derived_seed(scenario.base_seed, _SALT_NOISE, trial)
    mask = np.arange(aut.element_count) != aut.reference_index
    true_gamma = aut.amplitude_ratios()[mask]
    true_dphi = aut.phase_differences()[mask]

    if scenario.method == "rhev":
        result = calibrate_full(
            aut, source, scenario.n_be, scenario.snr_db, scenario.sampling, noise_seed,
            phase_method=scenario.phase_method,
            amplitude_from=scenario.amplitude_from,
            ratio_method=scenario.ratio_method,
        )
        est_gamma = result.amplitude_ratios()
        est_dphi = result.phase_differences()
    else:
        result = rev_mod.calibrate_array(
            aut, source, scenario.n_be, _rev_state_errors(scenario),
            scenario.snr_db, scenario.sampling, noise_seed,
        )
        est_gamma = result.amplitude_ratios()
        est_dphi = result.phase_differences()

    return est_gamma - true_gamma, _wrapped_phase_errors(est_dphi, true_dphi)


def _worker_count() -> int:
    raw = os.environ.get("RHEV_THREADS", "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"RHEV_THREADS must be an integer >= 1, got {raw!r}") from exc
    if value < 1:
        raise ConfigError(f"RHEV_THREADS must be an integer >= 1, got {raw!r}")
    return value


def monte_carlo(scenario: Scenario, axis_value: float = math.nan) -> RmsePoint:
    """Run the scenario's trials and reduce them to RMSE figures.

    RMSE_ar = (1/N) * sum_n sqrt((1/M) * sum_m (gamma_hat - gamma)^2) over the
    non-reference channels (the reference contributes a zero term), and
    RMSE_pd likewise over wrapped phase-difference errors.  Failed trials
    (dead channel, degenerate curve) are excluded and counted.
    """
    workers = _worker_count()
    results: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    excluded = 0
    if workers == 1:
        for t in range(scenario.trials):
            try:
                results[t] = _run_trial(scenario, t)
            except RhevcalError:
                excluded += 1
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {t: pool.submit(_run_trial, scenario, t) for t in range(scenario.trials)}
            for t in sorted(futures):
                try:
                    results[t] = futures[t].result()
                except RhevcalError:
                    excluded += 1

    if not results:
        raise DeadChannelError("every trial failed; nothing to aggregate")
    amp_errors = np.stack([results[t][0] for t in sorted(results)])  # (M, N-1)
    phase_errors = np.stack([results[t][1] for t in sorted(results)])
    n = scenario.element_count
    rmse_ar = float(np.sqrt(np.mean(amp_errors**2, axis=0)).sum() / n)
    rmse_pd = float(np.sqrt(np.mean(phase_errors**2, axis=0)).sum() / n)
    return RmsePoint(
        axis_value=axis_value,
        rmse_amplitude_ratio=rmse_ar,
        rmse_phase_difference=rmse_pd,
        trials=len(results),
        excluded=excluded,
    )


def _apply_axis(base: Scenario, axis: str, value) -> Scenario:
    if axis == "snr":
        return replace(base, snr_db=float(value))
    if axis == "array_size":
        return replace(base, element_count=int(value))
    if axis == "bits":
        return replace(base, n_be=int(value))
    if axis == "phase_error":
        return replace(base, error_deg=float(value))
    raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {AXES}")


def sweep_scenario(base: Scenario, axis: str, values) -> RmseReport:
    """Run one Monte Carlo point per axis value, everything else held fixed.

    For the ``bits`` axis the sampling configuration is equalized up front to
    resolve the finest grid in the sweep, so every resolution is measured
    with identical integration (same samples per point); otherwise
    coarser-bit runs would see different noise floors and the comparison
    would be meaningless.
    """
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one axis value")
    if axis == "bits":
        finest = max(int(v) for v in values)
        base = replace(base, sampling=base.sampling.resolve_bits(finest))
    if axis == "phase_error" and base.error_mode == "none":
        base = replace(base, error_mode="common")
    points = tuple(
        monte_carlo(_apply_axis(base, axis, v), axis_value=float(v)) for v in values
    )
    return RmseReport(axis=axis, values=tuple(values), points=points, base_seed=base.base_seed)


# ---------------------------------------------------------------------------
# compensation and array patterns
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PatternReport:
    """Normalized power patterns before/after compensation plus headline metrics."""

    angles: np.ndarray  # radians
    before_db: np.ndarray
    after_db: np.ndarray
    ideal_db: np.ndarray
    peak_direction: float  # radians, of the compensated pattern
    gain_delta_db: float
    sidelobe_db: float | None  # peak SLL of the compensated pattern, None if no nulls


def compensation_weights(
    result: CalibrationResult, quantize_phase_bits: int | None = None
) -> np.ndarray:
    """Per-channel complex weights (1/gamma) * exp(-j*dphi) that undo the imbalances.

    The reference weight is 1.  With ``quantize_phase_bits`` the weight phase
    is rounded to the nearest of 2**bits states, mimicking compensation
    through a coarse physical shifter.
    """
    weights = np.ones(result.element_count, dtype=complex)
    for est in result.channels:
        if est.amplitude_ratio == 0:
            raise DeadChannelError(f"channel {est.channel} has zero amplitude estimate")
        phase = -est.phase_difference
        if quantize_phase_bits is not None:
            step = TWO_PI / (1 << quantize_phase_bits)
            phase = step * np.round(phase / step)
        weights[est.channel] = np.exp(1j * phase) / est.amplitude_ratio
    return weights


def steering_phases(element_count: int, spacing: float, angle: float) -> np.ndarray:
    """Progressive phases exp(-j*2*pi*d*n*sin(angle)) that steer the beam to ``angle``."""
    return np.exp(-1j * TWO_PI * spacing * np.arange(element_count) * math.sin(angle))


def _pattern(gains: np.ndarray, weights: np.ndarray, spacing: float, angles: np.ndarray):
    phase = np.exp(
        1j * TWO_PI * spacing * np.outer(np.sin(angles), np.arange(len(gains)))
    )
    return phase @ (weights * gains)


def _to_db_normalized(field: np.ndarray) -> np.ndarray:
    power = np.abs(field) ** 2
    return 10.0 * np.log10(np.maximum(power / power.max(), 1e-300))


def _coherent_gain(field_at_command: complex, weights: np.ndarray, gains: np.ndarray) -> float:
    total = float(np.sum(np.abs(weights * gains) ** 2))
    return abs(field_at_command) ** 2 / total


def _first_null_sidelobe(power_db: np.ndarray, peak_idx: int) -> float | None:
    """Peak level outside the first nulls flanking the main lobe, or None."""
    if np.ptp(power_db) < 1e-9:  # flat pattern: no lobes to speak of
        return None
    n = len(power_db)
    left = peak_idx
    while left > 0 and power_db[left - 1] < power_db[left]:
        left -= 1
    right = peak_idx
    while right < n - 1 and power_db[right + 1] < power_db[right]:
        right += 1
    outside = np.concatenate([power_db[:left], power_db[right + 1:]])
    if len(outside) == 0:
        return None
    return float(outside.max())


def array_factor(
    aut: ArrayUnderTest,
    weights: np.ndarray,
    angles: np.ndarray,
    command_angle: float = 0.0,
) -> PatternReport:
    """Evaluate AF(theta) = sum_n w_n * A_n * exp(j*(phi_n + 2*pi*d*n*sin(theta))).

    Reports three patterns, each normalized to a 0 dB peak: the uncompensated
    array (unit weights), the array under ``weights``, and the ideal
    error-free array.  The gain delta compares coherent gain
    |AF(command)|^2 / sum|w_n A_n|^2 after versus before, i.e. the recovered
    beamforming efficiency at the commanded direction.
    """
    angles = np.asarray(angles, dtype=float)
    if angles.size == 0:
        raise ConfigError("angle grid must not be empty")
    weights = np.asarray(weights, dtype=complex)
    if weights.shape != (aut.element_count,):
        raise ConfigError(
            f"need {aut.element_count} weights, got shape {weights.shape}"
        )
    gains = np.array([c.amplitude * np.exp(1j * c.phase) for c in aut.channels])
    ones = np.ones(aut.element_count, dtype=complex)

    after = _pattern(gains, weights, aut.spacing, angles)
    before = _pattern(gains, ones, aut.spacing, angles)
    ideal = _pattern(ones, ones, aut.spacing, angles)

    after_db = _to_db_normalized(after)
    peak_idx = int(np.argmax(after_db))

    cmd = np.array([command_angle])
    g_after = _coherent_gain(complex(_pattern(gains, weights, aut.spacing, cmd)[0]), weights, gains)
    g_before = _coherent_gain(complex(_pattern(gains, ones, aut.spacing, cmd)[0]), ones, gains)

    return PatternReport(
        angles=angles,
        before_db=_to_db_normalized(before),
        after_db=after_db,
        ideal_db=_to_db_normalized(ideal),
        peak_direction=float(angles[peak_idx]),
        gain_delta_db=10.0 * math.log10(g_after / g_before),
        sidelobe_db=_first_null_sidelobe(after_db, peak_idx),
    )


def default_angle_grid(points: int = 721) -> np.ndarray:
    """Uniform angle grid over [-90, +90] degrees, in radians."""
    if points < 2:
        raise ConfigError("angle grid needs at least 2 points")
    return np.deg2rad(np.linspace(-90.0, 90.0, points))
