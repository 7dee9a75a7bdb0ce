"""Flat ``key = value`` run configuration.

Every key is optional; missing keys take the bench defaults (124 um slit,
632.82 nm light, 257 mm to a 2048 x 14 um line sensor, 1500 frames).
Values are SI units. ``#`` starts a comment. Unknown or repeated keys are
rejected with their line number.
"""

from dataclasses import dataclass, fields
import math
from typing import Optional

from .analytic import SlitGeometry
from .ccdsim import DEFAULT_MAX_VALUES, BeamModel, SensorModel
from .errors import ConfigError

_UNITS = {
    "slit_width": "m", "wavelength": "m", "screen_distance": "m",
    "slit_width_offset": "m", "screen_distance_offset": "m",
    "pixel_count": "pixels", "pixel_pitch": "m", "exposure": "s",
    "baseline_voltage": "V", "baseline_spread": "V", "prnu_spread": "V",
    "max_voltage": "V", "read_noise_sigma": "V",
    "shot_noise_fraction": "fraction of peak_scale at the peak",
    "center_pixel": "pixel index at x = 0, or auto for N/2",
    "peak_scale": "V above baseline at the central pixel",
    "frames": "count", "seed": "unsigned 64-bit", "guard_pixels": "pixels per edge",
    "max_values": "cap on frames x pixels", "frame_format": "binary or csv",
    "frame_file": "path", "output_dir": "path",
}


@dataclass(frozen=True)
class RunConfig:
    slit_width: float = 124e-6
    wavelength: float = 632.82e-9
    screen_distance: float = 0.257
    slit_width_offset: float = 0.0
    screen_distance_offset: float = 0.0
    pixel_count: int = 2048
    pixel_pitch: float = 14e-6
    exposure: float = 1.25e-3
    baseline_voltage: float = 1.4e-3
    baseline_spread: float = 0.4e-3
    prnu_spread: float = 0.4e-3
    max_voltage: float = 4.5
    read_noise_sigma: float = 0.2e-3
    shot_noise_fraction: float = 0.01
    center_pixel: Optional[float] = None
    peak_scale: float = 4.0
    frames: int = 1500
    seed: int = 42
    guard_pixels: int = 64
    max_values: int = DEFAULT_MAX_VALUES
    frame_format: str = "binary"
    frame_file: str = "frames.slitfrm"
    output_dir: str = "analysis"

    def geometry(self):
        return SlitGeometry(self.slit_width, self.wavelength, self.screen_distance)

    def sensor(self):
        return SensorModel(
            pixel_count=self.pixel_count, pixel_pitch=self.pixel_pitch, exposure=self.exposure,
            baseline_voltage=self.baseline_voltage, baseline_spread=self.baseline_spread,
            prnu_spread=self.prnu_spread, max_voltage=self.max_voltage,
            read_noise_sigma=self.read_noise_sigma,
            shot_noise_fraction=self.shot_noise_fraction, center_pixel=self.center_pixel)

    def beam(self):
        return BeamModel(peak_scale=self.peak_scale, geometry=self.geometry(),
                         slit_width_offset=self.slit_width_offset,
                         screen_distance_offset=self.screen_distance_offset)

    def validate(self):
        """Build the typed models once so their invariants are checked."""
        try:
            sensor, beam = self.sensor(), self.beam()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if beam.peak_scale > sensor.max_voltage:
            raise ConfigError("peak_scale exceeds max_voltage", key="peak_scale")
        if self.frames < 1:
            raise ConfigError("must be >= 1", key="frames")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("must be an unsigned 64-bit integer", key="seed")
        if self.max_values < 1:
            raise ConfigError("must be >= 1", key="max_values")
        if not 8 <= self.guard_pixels <= self.pixel_count // 8:
            raise ConfigError(f"must lie in [8, {self.pixel_count // 8}]", key="guard_pixels")
        if self.frame_format not in ("binary", "csv"):
            raise ConfigError("must be 'binary' or 'csv'", key="frame_format")
        return self


_FIELDS = {f.name: f for f in fields(RunConfig)}
_INT_KEYS = {"pixel_count", "frames", "seed", "guard_pixels", "max_values"}
_STR_KEYS = {"frame_format", "frame_file", "output_dir"}


def _convert(key, raw, line):
    if key in _STR_KEYS:
        if not raw:
            raise ConfigError("empty value", key=key, line=line)
        return raw
    if key == "center_pixel" and raw == "auto":
        return None
    if key in _INT_KEYS:
        try:
            return int(raw, 10)
        except ValueError:
            raise ConfigError(f"expected an integer, got {raw!r}", key=key, line=line) from None
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got {raw!r}", key=key, line=line) from None
    if not math.isfinite(value):
        raise ConfigError("value must be finite", key=key, line=line)
    return value


def parse_config(text):
    values = {}
    seen = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, raw = body.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError("expected 'key = value'", line=lineno)
        if key not in _FIELDS:
            raise ConfigError("unknown key", key=key, line=lineno)
        if key in seen:
            raise ConfigError(f"repeated key (first on line {seen[key]})", key=key, line=lineno)
        seen[key] = lineno
        values[key] = _convert(key, raw.strip(), lineno)
    try:
        cfg = RunConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        return cfg.validate()
    except ConfigError as exc:
        if exc.key in seen and exc.line is None:
            raise ConfigError(str(exc).rsplit(" (", 1)[0], key=exc.key,
                              line=seen[exc.key]) from None
        raise


def load_config(path):
    with open(path) as f:
        return parse_config(f.read())


def _format(value):
    if value is None:
        return "auto"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg):
    lines = ["# slitlab run configuration (SI units)"]
    for name in _FIELDS:
        lines.append(f"{name} = {_format(getattr(cfg, name))}  # {_UNITS[name]}")
    return "\n".join(lines) + "\n"
