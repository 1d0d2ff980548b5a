"""Delay-swept harmonic calibration: phase from the +1st-harmonic power peak,
amplitude from the curve contrast, ambiguity resolution by sequential modulation.

The workflow has two stages.  Stage 1 modulates the reference and one test
channel together and sweeps their relative modulation delay over the full
2**n_be grid; the peak location gives the phase difference and the curve
contrast gives two amplitude-ratio candidates (gamma and 1/gamma).  Stage 2
modulates every channel alone once; the resulting +1st-harmonic powers are
proportional to squared channel amplitudes, which picks the correct branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .array_model import (
    ArrayUnderTest,
    IncidentSource,
    TWO_PI,
    ModulationWaveform,
    Static,
    geometric_phases,
    wrap_phase,
)
from .errors import (
    ChannelCalibrationError,
    ConfigError,
    DeadChannelError,
    DegenerateCurveError,
)
from .signal_engine import SamplingConfig, channel_gains, static_value

# Relative floor used when the measured minimum approaches zero; below it the
# power ratio is treated as the full-cancellation limit (gamma = 1 exactly).
MIN_POWER_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class PowerCurve:
    """+1st-harmonic power versus normalized modulation delay."""

    delays: np.ndarray
    powers: np.ndarray

    def __post_init__(self):
        delays = np.asarray(self.delays, dtype=float)
        powers = np.asarray(self.powers, dtype=float)
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "powers", powers)
        if delays.ndim != 1 or delays.shape != powers.shape or len(delays) < 2:
            raise ConfigError("curve needs matching 1-D delay and power grids")
        steps = np.diff(delays)
        if delays[0] != 0.0 or np.any(steps <= 0) or abs(
            delays[-1] + steps[0] - 1.0
        ) > 1e-12 or np.ptp(steps) > 1e-12:
            raise ConfigError("delays must uniformly cover [0, 1) starting at 0")
        if np.any(powers < 0) or not np.all(np.isfinite(powers)):
            raise ConfigError("powers must be finite and non-negative")


class ResolvedAmplitude(NamedTuple):
    ratio: float
    gamma_seq: float
    branch: str  # "low" (<= 1) or "high" (> 1)


@dataclass(frozen=True)
class ChannelEstimate:
    """Calibration output for one non-reference channel."""

    channel: int
    phase_difference: float  # radians, wrapped to [-pi, pi)
    amplitude_ratio: float
    gamma_seq: float
    branch: str
    p_ratio: float
    sequential_power: float


@dataclass(frozen=True)
class CalibrationResult:
    """Complete calibration of an array: per-channel ratios and phase differences."""

    element_count: int
    reference_index: int
    n_be: int
    channels: tuple[ChannelEstimate, ...]
    reference_sequential_power: float
    measurement_count: int

    def phase_differences(self) -> np.ndarray:
        """Estimates in channel order (non-reference channels only)."""
        return np.array([c.phase_difference for c in self.channels])

    def amplitude_ratios(self) -> np.ndarray:
        return np.array([c.amplitude_ratio for c in self.channels])


def sweep_delay(measure: Callable[[float], float], n_be: int) -> PowerCurve:
    """Evaluate a power measurement at every delay of the n_be-bit grid."""
    if n_be < 1:
        raise ConfigError("delay sweep needs at least 1 bit")
    steps = 1 << n_be
    delays = np.arange(steps) / steps
    powers = np.array([measure(float(eta)) for eta in delays], dtype=float)
    return PowerCurve(delays, powers)


def _fit_cosine(curve: PowerCurve) -> tuple[float, float, float]:
    """Least-squares fit p(eta) = c0 + c1*cos(2*pi*eta) + c2*sin(2*pi*eta)."""
    angles = TWO_PI * curve.delays
    design = np.column_stack([np.ones_like(angles), np.cos(angles), np.sin(angles)])
    coef, *_ = np.linalg.lstsq(design, curve.powers, rcond=None)
    return float(coef[0]), float(coef[1]), float(coef[2])


def _check_not_flat(curve: PowerCurve):
    pmax = float(curve.powers.max())
    if pmax <= 0 or float(np.ptp(curve.powers)) < 1e-15 * pmax:
        raise DegenerateCurveError(
            "flat power curve: amplitude ratio indistinguishable from 0"
        )


def estimate_phase(curve: PowerCurve, method: str = "argmax") -> float:
    """Phase difference estimate from the delay-power curve, in [-pi, pi).

    ``argmax`` returns 2*pi*eta at the highest measured point (first index
    wins ties), reproducing the peak-picking procedure; its error is bounded
    by half a delay LSB.  ``cosine_fit`` least-squares fits the single-tone
    model and reads the phase of the fitted maximum, which is exact on
    noiseless curves and is the better estimator under noise.
    """
    _check_not_flat(curve)
    if method == "argmax":
        k = int(np.argmax(curve.powers))
        return float(wrap_phase(TWO_PI * curve.delays[k]))
    if method == "cosine_fit":
        _, c1, c2 = _fit_cosine(curve)
        return float(wrap_phase(math.atan2(c2, c1)))
    raise ConfigError(f"unknown phase method {method!r}")


def _ratio_and_candidates(
    curve: PowerCurve, method: str
) -> tuple[float, tuple[float, float]]:
    """Power ratio P_max/P_min of the curve and the candidate pair it implies."""
    if curve.powers.max() <= 0:
        raise DegenerateCurveError("curve has no positive power")
    if method == "cosine_fit":
        c0, c1, c2 = _fit_cosine(curve)
        swing = math.hypot(c1, c2)
        pmax = c0 + swing
        pmin = c0 - swing
    elif method == "extrema":
        pmax = float(curve.powers.max())
        pmin = float(curve.powers.min())
    else:
        raise ConfigError(f"unknown ratio method {method!r}")
    floor = MIN_POWER_FLOOR * pmax
    ratio = pmax / max(pmin, floor)
    if pmin <= floor:
        # full-cancellation limit: the two candidates coincide at 1
        return ratio, (1.0, 1.0)
    root = math.sqrt(ratio)
    gamma_low = (root - 1.0) / (root + 1.0)
    gamma_high = math.inf if gamma_low == 0.0 else 1.0 / gamma_low
    return ratio, (gamma_low, gamma_high)


def estimate_amplitude_ambiguous(
    curve: PowerCurve, method: str = "cosine_fit"
) -> tuple[float, float]:
    """Amplitude-ratio candidate pair (gamma_low <= 1, gamma_high >= 1).

    The power ratio P_r = P_max / P_min inverts to
    gamma_low = (sqrt(P_r) - 1) / (sqrt(P_r) + 1) and gamma_high = 1/gamma_low.
    With ``cosine_fit`` (default) the extremes are read from the fitted
    single-tone model, which recovers the continuum peak and null exactly on
    noiseless curves; ``extrema`` uses the raw grid max/min, which inherits a
    half-LSB quantization bias.  A vanishing minimum is the full-cancellation
    limit and returns (1, 1); P_min is floored at 1e-12 * P_max before
    dividing.
    """
    _, candidates = _ratio_and_candidates(curve, method)
    return candidates


def resolve_amplitude(
    p_seq_n: float, p_seq_ref: float, candidates: tuple[float, float]
) -> ResolvedAmplitude:
    """Pick the amplitude-ratio branch using sequential single-channel powers.

    gamma_seq = sqrt(p_seq_n / p_seq_ref) tells which side of 1 the true
    ratio lies on; the returned ratio is the sweep-derived candidate on that
    side (it fuses the whole curve, so it is kept as the estimate), with
    gamma_seq recorded alongside.
    """
    if not p_seq_ref > 0:
        raise ConfigError("reference sequential power must be positive")
    if p_seq_n == 0:
        raise DeadChannelError("sequential power is zero: channel produces no harmonic")
    gamma_seq = math.sqrt(p_seq_n / p_seq_ref)
    low, high = candidates
    if gamma_seq <= 1.0:
        return ResolvedAmplitude(ratio=low, gamma_seq=gamma_seq, branch="low")
    return ResolvedAmplitude(ratio=high, gamma_seq=gamma_seq, branch="high")


# ---------------------------------------------------------------------------
# measurement paths
# ---------------------------------------------------------------------------


def _noise_sigma(source: IncidentSource, aut: ArrayUnderTest, snr_db: float) -> float:
    """Per-sample noise std; SNR references the reference channel's carrier power."""
    ref_power = source.power * aut.reference.amplitude**2
    return math.sqrt(ref_power * 10.0 ** (-snr_db / 10.0))


def _period_matrix_sweep(
    aut: ArrayUnderTest,
    source: IncidentSource,
    test_index: int,
    offsets: np.ndarray,
    samples_per_period: int,
) -> np.ndarray:
    """One waveform period of the two-channel schedule for each delay offset.

    Row k holds the test channel delayed by offsets[k] samples; the reference
    toggles at zero delay and every other channel is parked in state 0.
    """
    s = samples_per_period
    gains = channel_gains(aut, source)
    ref = aut.reference_index
    period = 1.0  # per-period sampling only uses fractions, any positive period works

    static_sum = 0j
    for i, ch in enumerate(aut.channels):
        if i not in (ref, test_index):
            static_sum += gains[i] * static_value(Static(0), ch)

    ref_ch = aut.channels[ref]
    ref_wave = ModulationWaveform(period, 0.0, ref_ch.state0_error, ref_ch.state1_error)
    test_ch = aut.channels[test_index]
    test_wave = ModulationWaveform(period, 0.0, test_ch.state0_error, test_ch.state1_error)

    ref_row = gains[ref] * ref_wave.sample_period(s)
    base = test_wave.sample_period(s)
    idx = (np.arange(s)[None, :] - offsets[:, None]) % s
    mat = gains[test_index] * base[idx]
    mat += ref_row[None, :] + static_sum
    return mat


def _bin_powers(
    period_mat: np.ndarray,
    sampling: SamplingConfig,
    sigma: float,
    rng,
    scale: float,
    q: int = 1,
) -> np.ndarray:
    """Bin-q power of each row's periodic stream plus per-sample AWGN.

    The single-bin projection is linear, so the periodic signal part reduces
    to one period (coherent integration is a no-op on an exactly periodic
    stream) while the noise is still drawn per sample over the full stream
    and projected with the same twiddle.  Identical to building the noisy
    streams explicitly, without the tiling copies.
    """
    s = sampling.samples_per_period
    total = sampling.total_samples
    tw_period = np.exp((-2j * math.pi * q / s) * np.arange(s))
    bins = (period_mat @ tw_period) * (scale / s)
    if sigma > 0.0:
        noise = rng.standard_normal((period_mat.shape[0], 2 * total)).view(np.complex128)
        tw_full = np.exp((-2j * math.pi * q / s) * np.arange(total))
        bins = bins + (noise @ tw_full) * (sigma / math.sqrt(2.0) / total)
    return np.abs(bins) ** 2


def _sweep_powers(
    aut: ArrayUnderTest,
    source: IncidentSource,
    test_index: int,
    n_be: int,
    snr_db: float,
    sampling: SamplingConfig,
    rng,
) -> PowerCurve:
    """Measured +1st-harmonic power over the full delay grid for one channel pair."""
    steps = 1 << n_be
    s = sampling.samples_per_period
    if s % steps != 0:
        raise ConfigError(
            f"{s} samples per period cannot express a {n_be}-bit delay grid")
    offsets = np.arange(steps) * (s // steps)
    mat = _period_matrix_sweep(aut, source, test_index, offsets, s)
    sigma = 0.0 if math.isinf(snr_db) else _noise_sigma(source, aut, snr_db)
    powers = _bin_powers(mat, sampling, sigma, rng, math.sqrt(source.power))
    return PowerCurve(np.arange(steps) / steps, powers)


def _sequential_powers(
    aut: ArrayUnderTest,
    source: IncidentSource,
    snr_db: float,
    sampling: SamplingConfig,
    rng,
) -> np.ndarray:
    """+1st-harmonic power with each channel modulated alone, in element order."""
    s = sampling.samples_per_period
    gains = channel_gains(aut, source)
    statics = np.array([
        gains[i] * static_value(Static(0), ch) for i, ch in enumerate(aut.channels)
    ])
    total_static = statics.sum()
    rows = np.empty((aut.element_count, s), dtype=complex)
    for i, ch in enumerate(aut.channels):
        wave = ModulationWaveform(1.0, 0.0, ch.state0_error, ch.state1_error)
        rows[i] = (total_static - statics[i]) + gains[i] * wave.sample_period(s)
    sigma = 0.0 if math.isinf(snr_db) else _noise_sigma(source, aut, snr_db)
    return _bin_powers(rows, sampling, sigma, rng, math.sqrt(source.power))


def two_channel_power(
    aut: ArrayUnderTest,
    source: IncidentSource,
    test_index: int,
    eta: float,
    snr_db: float,
    sampling: SamplingConfig,
    rng,
    modulation_frequency: float = 1.0,
) -> float:
    """Single +1st-harmonic power measurement for one delay setting.

    This is the synthesize -> add_noise -> extract composition; pair it with
    :func:`sweep_delay` as
    ``sweep_delay(lambda eta: two_channel_power(..., eta, ...), n_be)``.
    The delay must be representable on the sampling grid.
    """
    from .array_model import schedule_two_channel
    from .harmonics import extract_harmonic
    from .signal_engine import add_noise, synthesize_received

    schedule = schedule_two_channel(aut, modulation_frequency, test_index, eta)
    stream = synthesize_received(aut, source, schedule, sampling)
    ref_power = source.power * aut.reference.amplitude**2
    stream = add_noise(stream, snr_db, rng, reference_power=ref_power)
    return extract_harmonic(stream, 1).power


def calibrate_full(
    aut: ArrayUnderTest,
    source: IncidentSource,
    n_be: int,
    snr_db: float,
    sampling: SamplingConfig,
    seed,
    phase_method: str = "argmax",
    amplitude_from: str = "sweep",
    ratio_method: str = "cosine_fit",
) -> CalibrationResult:
    """Run the complete two-stage calibration workflow.

    Stage 1 sweeps the modulation delay of each non-reference channel against
    the reference over the 2**n_be grid and estimates its phase difference
    and ambiguous amplitude candidates.  Stage 2 modulates each channel alone
    (reference included) and resolves every amplitude branch from the
    sequential power ratio.  Total measurements: (N-1) * 2**n_be + N.

    ``sampling`` is raised to at least 2**n_be samples per period so the
    delay grid is sampled exactly.  Estimates are corrected for the known
    geometric phase of the incident source, so they reflect channel
    imbalances only.  ``amplitude_from`` selects whether the reported ratio
    comes from the sweep contrast (default) or directly from the sequential
    measurement (gamma_seq).
    """
    if amplitude_from not in ("sweep", "sequential"):
        raise ConfigError(f"unknown amplitude_from {amplitude_from!r}")
    sampling = sampling.resolve_bits(n_be)
    rng = np.random.default_rng(seed)
    ref = aut.reference_index
    geo = geometric_phases(aut, source)

    stage1: dict[int, tuple[float, tuple[float, float], float]] = {}
    for n in range(aut.element_count):
        if n == ref:
            continue
        try:
            curve = _sweep_powers(aut, source, n, n_be, snr_db, sampling, rng)
            raw_phase = estimate_phase(curve, method=phase_method)
            p_ratio, candidates = _ratio_and_candidates(curve, ratio_method)
        except Exception as exc:
            raise ChannelCalibrationError(n, exc) from exc
        phase = float(wrap_phase(raw_phase - (geo[n] - geo[ref])))
        stage1[n] = (phase, candidates, p_ratio)

    seq = _sequential_powers(aut, source, snr_db, sampling, rng)
    p_ref = float(seq[ref])

    estimates = []
    for n in range(aut.element_count):
        if n == ref:
            continue
        phase, candidates, p_ratio = stage1[n]
        try:
            resolved = resolve_amplitude(float(seq[n]), p_ref, candidates)
        except Exception as exc:
            raise ChannelCalibrationError(n, exc) from exc
        ratio = resolved.ratio if amplitude_from == "sweep" else resolved.gamma_seq
        estimates.append(ChannelEstimate(
            channel=n,
            phase_difference=phase,
            amplitude_ratio=float(ratio),
            gamma_seq=resolved.gamma_seq,
            branch=resolved.branch,
            p_ratio=p_ratio,
            sequential_power=float(seq[n]),
        ))

    return CalibrationResult(
        element_count=aut.element_count,
        reference_index=ref,
        n_be=n_be,
        channels=tuple(estimates),
        reference_sequential_power=p_ref,
        measurement_count=(aut.element_count - 1) * (1 << n_be) + aut.element_count,
    )
