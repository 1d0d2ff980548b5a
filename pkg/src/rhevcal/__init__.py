"""rhevcal: desk-scale simulator and calibration engine for time-modulated
phased-array calibration, with a classical rotating-element baseline."""

from .array_model import (
    ArrayUnderTest,
    ChannelResponse,
    IncidentSource,
    Modulated,
    ModulationSchedule,
    ModulationWaveform,
    Static,
    geometric_phases,
    preset_array,
    quantize_delay,
    schedule_single_channel,
    schedule_two_channel,
    with_state_errors,
    wrap_phase,
)
from .errors import (
    AliasingError,
    ChannelCalibrationError,
    ConfigError,
    ConfigFileError,
    DeadChannelError,
    DegenerateCurveError,
    InvalidArrayError,
    InvalidCurveError,
    RhevcalError,
)
from .experiments import (
    PatternReport,
    RmsePoint,
    RmseReport,
    Scenario,
    array_factor,
    compensation_weights,
    default_angle_grid,
    monte_carlo,
    steering_phases,
    sweep_scenario,
)
from .harmonics import (
    HarmonicMeasurement,
    discrete_coefficient,
    extract_harmonic,
    fourier_coefficient,
    harmonic_power_closed_form,
    shifted_coefficient,
)
from .rev import RevCalibration, RevCurve, calibrate_array, curve_contrast, rev_estimate, rev_sweep
from .rhev import (
    CalibrationResult,
    ChannelEstimate,
    PowerCurve,
    calibrate_full,
    estimate_amplitude_ambiguous,
    estimate_phase,
    resolve_amplitude,
    sweep_delay,
    two_channel_power,
)
from .signal_engine import ComplexSampleStream, SamplingConfig, add_noise, synthesize_received

__version__ = "0.1.0"
