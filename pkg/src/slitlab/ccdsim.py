"""Synthetic CCD line sensor for the single-slit diffraction bench.

Frames are rendered from the Fraunhofer intensity, box-averaged over each
pixel aperture, plus a fixed per-pixel response offset (PRNU), Gaussian shot
noise whose variance follows the signal, and Gaussian read noise. Voltages
are clipped to the sensor's output range.

Every random draw comes from a Philox counter-based generator keyed by the
seed. Frame ``f`` reads counter block ``f``; pixel ``i`` of that frame uses
raw words ``2i`` and ``2i + 1``. A voltage is therefore a pure function of
``(seed, frame_index, pixel_index)`` and frames can be produced in any order
or in parallel.
"""

from concurrent.futures import ThreadPoolExecutor
import dataclasses
from dataclasses import dataclass, field
import functools
import math
import os
from typing import Optional

import numpy as np

from .analytic import SlitGeometry, screen_intensity
from .errors import CapacityError, DomainError
from .quadrature import gauss_legendre

DEFAULT_MAX_VALUES = 2 ** 27
PIXEL_QUADRATURE_ORDER = 8

_NOISE_STREAM = 1
_PRNU_STREAM = 2
_U64 = 2 ** 64


@dataclass(frozen=True)
class SensorModel:
    """Line sensor geometry and electrical characteristics (SI units).

    ``center_pixel`` is the index sitting at x = 0; ``None`` means N/2.
    """

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

    def __post_init__(self):
        if int(self.pixel_count) != self.pixel_count or self.pixel_count < 2:
            raise DomainError("pixel_count must be an integer >= 2")
        for name in ("pixel_pitch", "exposure", "max_voltage"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive")
        for name in ("baseline_voltage", "baseline_spread", "prnu_spread",
                     "read_noise_sigma", "shot_noise_fraction"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise DomainError(f"{name} must be non-negative")
        if self.baseline_voltage + self.baseline_spread + self.prnu_spread >= self.max_voltage:
            raise DomainError("baseline plus spreads must stay below max_voltage")
        if self.center_pixel is not None and not math.isfinite(self.center_pixel):
            raise DomainError("center_pixel must be finite")

    @property
    def center(self):
        if self.center_pixel is None:
            return self.pixel_count / 2
        return float(self.center_pixel)

    def positions(self):
        """Screen coordinate of every pixel center, x_i = (i - center) * pitch."""
        return (np.arange(self.pixel_count) - self.center) * self.pixel_pitch

    def noiseless(self):
        """Copy of this sensor with every noise source switched off."""
        return dataclasses.replace(self, prnu_spread=0.0, read_noise_sigma=0.0, shot_noise_fraction=0.0)


@dataclass(frozen=True)
class BeamModel:
    """Illumination: diffraction geometry and the signal level at the central pixel.

    The two offsets perturb the geometry used for rendering (not the one
    recorded in metadata), for sensitivity studies against the quoted
    +-2 um slit and +-1 mm distance tolerances.
    """

    peak_scale: float = 4.0
    geometry: SlitGeometry = field(default_factory=SlitGeometry)
    slit_width_offset: float = 0.0
    screen_distance_offset: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.peak_scale) and self.peak_scale > 0):
            raise DomainError("peak_scale must be positive")
        self.rendered_geometry  # validates the perturbed geometry

    @property
    def rendered_geometry(self):
        if self.slit_width_offset == 0 and self.screen_distance_offset == 0:
            return self.geometry
        g = self.geometry
        return SlitGeometry(g.slit_width + self.slit_width_offset, g.wavelength,
                            g.screen_distance + self.screen_distance_offset)


def _check_pair(sensor, beam):
    if beam.peak_scale > sensor.max_voltage:
        raise DomainError(
            f"peak_scale {beam.peak_scale!r} V exceeds max_voltage {sensor.max_voltage!r} V")


def _box_means(x, pitch, geometry):
    nodes, weights = gauss_legendre(PIXEL_QUADRATURE_ORDER)
    pts = np.asarray(x, dtype=float)[..., None] + pitch * nodes
    return screen_intensity(pts, geometry) @ weights


@functools.lru_cache(maxsize=16)
def expected_voltages(sensor, beam):
    """Noise-free voltage of every pixel (read-only array of length N)."""
    _check_pair(sensor, beam)
    geometry = beam.rendered_geometry
    signal = _box_means(sensor.positions(), sensor.pixel_pitch, geometry)
    central = _box_means(0.0, sensor.pixel_pitch, geometry)
    out = sensor.baseline_voltage + beam.peak_scale * (signal / central)
    out.setflags(write=False)
    return out


def expected_pixel_voltage(pixel_index, sensor, beam):
    """Noise-free voltage of one pixel: baseline plus the pixel's box-averaged
    intensity, scaled so the pixel straddling x = 0 reads ``peak_scale``."""
    if int(pixel_index) != pixel_index or not 0 <= pixel_index < sensor.pixel_count:
        raise DomainError(f"pixel index {pixel_index!r} outside [0, {sensor.pixel_count})")
    return float(expected_voltages(sensor, beam)[int(pixel_index)])


def _key(seed, stream):
    if int(seed) != seed or not 0 <= seed < _U64:
        raise DomainError("seed must be an unsigned 64-bit integer")
    return np.array([int(seed), stream], dtype=np.uint64)


def _uniform53(raw):
    # (0, 1]: never zero, so the logarithm below is safe
    return ((raw >> np.uint64(11)).astype(float) + 1.0) * 2.0 ** -53


@functools.lru_cache(maxsize=16)
def prnu_pattern(sensor, seed):
    """Fixed per-pixel offsets, uniform on [-prnu_spread, +prnu_spread]."""
    gen = np.random.Philox(key=_key(seed, _PRNU_STREAM), counter=0)
    u = _uniform53(gen.random_raw(sensor.pixel_count))
    out = sensor.prnu_spread * (2.0 * u - 1.0)
    out.setflags(write=False)
    return out


def standard_normal_pairs(seed, frame_index, pixel_count):
    """Two independent N(0, 1) vectors for one frame (Box-Muller on Philox words)."""
    if frame_index < 0:
        raise DomainError("frame_index must be non-negative")
    counter = np.array([0, 0, int(frame_index), 0], dtype=np.uint64)
    gen = np.random.Philox(key=_key(seed, _NOISE_STREAM), counter=counter)
    raw = gen.random_raw(2 * pixel_count).reshape(pixel_count, 2)
    u1 = _uniform53(raw[:, 0])
    u2 = _uniform53(raw[:, 1])
    r = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * math.pi * u2
    return r * np.cos(angle), r * np.sin(angle)


def generate_frame(frame_index, sensor, beam, seed):
    """One snapshot of N voltages.

    ``voltage = clip(expected + prnu + shot + read, 0, max_voltage)`` with
    shot sigma equal to ``shot_noise_fraction * peak_scale`` at the peak and
    scaling as the square root of the signal elsewhere.
    """
    expected = expected_voltages(sensor, beam)
    out = expected.copy()
    if sensor.prnu_spread > 0:
        out += prnu_pattern(sensor, seed)
    if sensor.shot_noise_fraction > 0 or sensor.read_noise_sigma > 0:
        z_shot, z_read = standard_normal_pairs(seed, frame_index, sensor.pixel_count)
        signal = np.maximum(expected - sensor.baseline_voltage, 0.0)
        shot_sigma = sensor.shot_noise_fraction * np.sqrt(beam.peak_scale * signal)
        out += shot_sigma * z_shot + sensor.read_noise_sigma * z_read
    return np.clip(out, 0.0, sensor.max_voltage)


@dataclass(frozen=True, eq=False)
class FrameSet:
    """M snapshots of N pixel voltages plus the parameters that produced them."""

    sensor: SensorModel
    beam: BeamModel
    frame_count: int
    seed: int
    frames: np.ndarray

    def __post_init__(self):
        frames = np.array(self.frames, dtype=float)
        shape = (self.frame_count, self.sensor.pixel_count)
        if frames.shape != shape:
            raise DomainError(f"frames have shape {frames.shape}, expected {shape}")
        if frames.size and (frames.min() < 0 or frames.max() > self.sensor.max_voltage):
            raise DomainError("frame voltages must lie in [0, max_voltage]")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @property
    def geometry(self):
        return self.beam.geometry


def worker_count(workers=None):
    """Resolve the worker count; ``SLITLAB_THREADS`` applies when ``workers`` is None."""
    if workers is None:
        env = os.environ.get("SLITLAB_THREADS", "0").strip() or "0"
        try:
            workers = int(env)
        except ValueError:
            raise DomainError(f"SLITLAB_THREADS must be an integer, got {env!r}") from None
    if workers < 0:
        raise DomainError("worker count must be >= 0")
    if workers == 0:
        workers = os.cpu_count() or 1
    return workers


def generate_frameset(sensor, beam, frame_count, seed, workers=None,
                      max_values=DEFAULT_MAX_VALUES):
    """Render ``frame_count`` frames. Output does not depend on ``workers``."""
    if int(frame_count) != frame_count or frame_count < 1:
        raise DomainError("frame_count must be an integer >= 1")
    frame_count = int(frame_count)
    total = frame_count * sensor.pixel_count
    if total > max_values:
        raise CapacityError(f"{frame_count} x {sensor.pixel_count} = {total} values "
                            f"exceeds the cap of {max_values}")
    _key(seed, 0)
    expected_voltages(sensor, beam)
    frames = np.empty((frame_count, sensor.pixel_count))

    def fill(block):
        for f in block:
            frames[f] = generate_frame(f, sensor, beam, seed)

    n = min(worker_count(workers), frame_count)
    if n <= 1:
        fill(range(frame_count))
    else:
        blocks = [range(k, frame_count, n) for k in range(n)]
        with ThreadPoolExecutor(max_workers=n) as pool:
            list(pool.map(fill, blocks))
    return FrameSet(sensor, beam, frame_count, int(seed), frames)
