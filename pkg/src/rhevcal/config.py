"""Run configuration: INI-style files with one section per concern.

Unknown sections or keys are hard errors, not warnings: a typo in a
scientific run config must fail loudly instead of silently using a default.
The full grammar is documented in the README.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigFileError
from .signal_engine import SamplingConfig


def _parse_float(text: str) -> float:
    value = float(text)  # accepts "inf" for the noiseless flag
    return value


def _parse_int(text: str) -> int:
    return int(text)


def _parse_values(text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


def _parse_optional_int(text: str):
    text = text.strip()
    return int(text) if text else None


def _choice(*allowed):
    def parse(text: str) -> str:
        value = text.strip().lower()
        if value not in allowed:
            raise ValueError(f"expected one of {allowed}")
        return value
    return parse


# section -> key -> (parser, default)
_SCHEMA = {
    "array": {
        "elements": (_parse_int, 8),
        "spacing_wavelengths": (_parse_float, 0.5),
        "amp_spread_db": (_parse_float, 4.0),
        "phase_spread_deg": (_parse_float, 180.0),
    },
    "source": {
        "frequency_hz": (_parse_float, 2.0e9),
        "incident_angle_deg": (_parse_float, 0.0),
        "power": (_parse_float, 1.0),
    },
    "modulation": {
        "frequency_hz": (_parse_float, 10.0e6),
        "bits": (_parse_int, 6),
    },
    "sampling": {
        "samples_per_period": (_parse_int, 64),
        "periods": (_parse_int, 16),
    },
    "noise": {
        "snr_db": (_parse_float, 20.0),
    },
    "estimator": {
        "phase_method": (_choice("argmax", "cosine_fit"), "argmax"),
        "amplitude_from": (_choice("sweep", "sequential"), "sweep"),
        "ratio_method": (_choice("cosine_fit", "extrema"), "cosine_fit"),
    },
    "run": {
        "seed": (_parse_int, 1),
        "trials": (_parse_int, 200),
        "method": (_choice("rhev", "rev"), "rhev"),
        "error_mode": (_choice("none", "common", "per_channel"), "none"),
        "error_deg": (_parse_float, 0.0),
        "rev_state_error_deg": (_parse_float, 5.0),
    },
    "sweep": {
        "axis": (_choice("snr", "array_size", "bits", "phase_error"), "snr"),
        "values": (_parse_values, (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)),
    },
    "sweep_delay": {
        "channel": (_parse_int, 2),  # 1-based, as reported in CSVs
    },
    "pattern": {
        "angle_points": (_parse_int, 721),
        "steer_deg": (_parse_float, 0.0),
        "compensation_bits": (_parse_optional_int, None),
    },
    "spectrum": {
        "channel": (_parse_int, 2),
        "eta": (_parse_float, 0.0),
        "mode": (_choice("two_channel", "single"), "two_channel"),
    },
}


@dataclass
class RunConfig:
    """Typed view of a parsed config file; every key carries its default unless set."""

    values: dict = field(default_factory=dict)

    def get(self, section: str, key: str):
        return self.values[section][key]

    @property
    def sampling(self) -> SamplingConfig:
        return SamplingConfig(
            samples_per_period=self.get("sampling", "samples_per_period"),
            period_count=self.get("sampling", "periods"),
        )


def load_config(path) -> RunConfig:
    """Parse and validate a config file against the schema.

    Raises :class:`ConfigFileError` naming the offending section or key on
    any unknown entry, bad value, or unreadable file.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigFileError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (configparser.Error, OSError, UnicodeDecodeError) as exc:
        raise ConfigFileError(f"cannot parse {path}: {exc}") from exc

    values = {section: dict((k, d) for k, (_, d) in keys.items())
              for section, keys in _SCHEMA.items()}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigFileError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigFileError(f"unknown key '{key}' in section [{section}]")
            parse, _ = _SCHEMA[section][key]
            try:
                values[section][key] = parse(raw)
            except ValueError as exc:
                raise ConfigFileError(
                    f"bad value for '{key}' in section [{section}]: {exc}"
                ) from exc

    cfg = RunConfig(values=values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    checks = [
        (cfg.get("array", "elements") >= 2, "array elements", "must be >= 2"),
        (cfg.get("array", "spacing_wavelengths") > 0, "spacing_wavelengths", "must be > 0"),
        (cfg.get("array", "amp_spread_db") >= 0, "amp_spread_db", "must be >= 0"),
        (cfg.get("array", "phase_spread_deg") >= 0, "phase_spread_deg", "must be >= 0"),
        (cfg.get("source", "frequency_hz") > 0, "source frequency_hz", "must be > 0"),
        (abs(cfg.get("source", "incident_angle_deg")) < 90, "incident_angle_deg",
         "must satisfy |angle| < 90"),
        (cfg.get("source", "power") > 0, "source power", "must be > 0"),
        (cfg.get("modulation", "frequency_hz") > 0, "modulation frequency_hz", "must be > 0"),
        (cfg.get("modulation", "bits") >= 1, "modulation bits", "must be >= 1"),
        (cfg.get("run", "trials") >= 1, "trials", "must be >= 1"),
        (cfg.get("pattern", "angle_points") >= 2, "angle_points", "must be >= 2"),
    ]
    for ok, name, rule in checks:
        if not ok:
            raise ConfigFileError(f"invalid value for '{name}': {rule}")
    # snr_db deliberately has no range check: negative values and +inf are legal
    elements = cfg.get("array", "elements")
    sweep_channel = cfg.get("sweep_delay", "channel")
    if not 2 <= sweep_channel <= elements:
        raise ConfigFileError(
            f"invalid value for 'sweep_delay channel': must lie in [2, {elements}]")
    spectrum_channel = cfg.get("spectrum", "channel")
    low = 2 if cfg.get("spectrum", "mode") == "two_channel" else 1
    if not low <= spectrum_channel <= elements:
        raise ConfigFileError(
            f"invalid value for 'spectrum channel': must lie in [{low}, {elements}]")
    if not 0.0 <= cfg.get("spectrum", "eta") < 1.0:
        raise ConfigFileError("invalid value for 'spectrum eta': must lie in [0, 1)")
    try:
        cfg.sampling
    except Exception as exc:
        raise ConfigFileError(f"invalid [sampling] section: {exc}") from exc
