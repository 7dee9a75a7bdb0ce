"""From raw frames to an empirical capture-probability curve.

The pipeline is: average the frames, estimate the dark baseline from the
sensor edges, subtract it, normalize by the total voltage over all pixels
(never by the peak), and integrate the resulting density over symmetric
windows around the pattern center.

The density is treated as a histogram: constant over each pixel aperture,
zero outside the sensor. Partial areas at half-width ``k * pitch`` therefore
include half of the boundary pixels, which is the trapezoid rule on the
pixel centers.
"""

from dataclasses import asdict, dataclass, field
import json
import math
from pathlib import Path
from typing import Optional
import warnings

import numpy as np

from .analytic import (ProbabilityCurve, SlitGeometry, capture_probability,
                       forbidden_fraction, xi_from_screen)
from .ccdsim import FrameSet
from .errors import DataError, DomainError, EmptySignalError

DEFAULT_GUARD_PIXELS = 64
MONOTONE_TOLERANCE = 1e-9
NORMALIZATION_TOLERANCE = 1e-9
BANDS = ((0.0, 1.0), (1.0, 2.0), (2.0, 5.0), (5.0, math.inf))
_SMOOTHING_WIDTH = 5


class FlatSignalWarning(UserWarning):
    """Baseline estimation was given a signal with no structure."""


def _frames_array(frames):
    if isinstance(frames, FrameSet):
        return frames.frames
    arr = np.asarray(frames, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def average_frames(frames):
    """Per-pixel mean over all frames.

    Each pixel is shifted by its minimum and the residuals are summed
    exactly rounded (``math.fsum``). The result does not depend on frame
    order at all, and a pixel that reads the same in every frame averages
    to exactly that value.
    """
    arr = _frames_array(frames)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DomainError("need at least one frame with at least one pixel")
    m = arr.shape[0]
    if m == 1:
        return arr[0].copy()
    floor = arr.min(axis=0)
    residual = (arr - floor).T.tolist()
    return floor + np.array([math.fsum(col) / m for col in residual])


def estimate_baseline(averaged, guard_pixels=DEFAULT_GUARD_PIXELS):
    """In-situ dark level from the darkest pixels near both sensor edges.

    The outer quarter of the sensor on each side (far into the diffraction
    tails) is searched for the ``guard_pixels`` pixels whose 5-pixel running
    mean is lowest, i.e. the pixels around the diffraction minima. The
    estimate is the plain mean of the averaged voltages at those pixels.
    Selecting on the smoothed profile keeps the fixed per-pixel offsets from
    biasing the selection.

    A perfectly flat input returns its level and emits FlatSignalWarning.
    """
    a = np.asarray(averaged, dtype=float)
    n = a.size
    if not 8 <= guard_pixels <= n // 8:
        raise DomainError(f"guard_pixels must lie in [8, {n // 8}], got {guard_pixels!r}")
    if np.all(a == a[0]):
        warnings.warn("baseline estimated from a flat signal", FlatSignalWarning, stacklevel=2)
        return float(a[0])
    kernel = np.ones(_SMOOTHING_WIDTH) / _SMOOTHING_WIDTH
    padded = np.pad(a, _SMOOTHING_WIDTH // 2, mode="edge")
    smooth = np.convolve(padded, kernel, mode="valid")
    width = n // 4
    picked = []
    for lo, hi in ((0, width), (n - width, n)):
        order = np.argsort(smooth[lo:hi], kind="stable")[:guard_pixels]
        picked.extend(a[lo + order].tolist())
    return math.fsum(picked) / len(picked)


@dataclass(frozen=True, eq=False)
class EmpiricalDensity:
    """Baseline-subtracted intensity normalized to unit area over the sensor."""

    positions: np.ndarray
    density: np.ndarray
    baseline_used: float
    total_voltage: float
    geometry: SlitGeometry
    pitch: float
    clamp_count: int = 0

    def integral(self):
        """Area under the pixel histogram; 1 up to rounding."""
        return math.fsum((self.density * self.pitch).tolist())

    @property
    def edges(self):
        return np.append(self.positions - 0.5 * self.pitch, self.positions[-1] + 0.5 * self.pitch)


def normalize_density(averaged, baseline, geometry, pitch, positions=None):
    """Subtract ``baseline``, clamp negatives to zero, divide by total voltage.

    ``positions`` defaults to a centered grid, x_i = (i - N/2) * pitch.
    """
    a = np.asarray(averaged, dtype=float)
    if not baseline < a.max():
        raise DomainError(f"baseline {baseline!r} V is not below the maximum {a.max()!r} V")
    if positions is None:
        positions = (np.arange(a.size) - a.size / 2) * pitch
    signal = a - baseline
    negative = signal < 0
    signal[negative] = 0.0
    total = math.fsum(signal.tolist())
    if not total > 0:
        raise EmptySignalError("no signal left after baseline subtraction")
    density = signal / (total * pitch)
    return EmpiricalDensity(np.asarray(positions, dtype=float), density, float(baseline),
                            total, geometry, float(pitch), int(negative.sum()))


def peak_normalized(averaged, baseline):
    """Signal divided by its maximum: the peak-normalization shortcut.

    Kept to show why it is wrong: the result sums to total / peak voltage,
    not to one.
    """
    signal = np.maximum(np.asarray(averaged, dtype=float) - baseline, 0.0)
    return signal / signal.max()


def refine_center(density):
    """Centroid of the density over the central lobe (|x| below the first
    minimum of the nominal pattern), in meters."""
    inside = np.abs(density.positions) < density.geometry.first_minimum
    w = density.density[inside]
    x = density.positions[inside]
    mass = math.fsum(w.tolist())
    if not mass > 0:
        raise DataError("central lobe carries no signal")
    return math.fsum((w * x).tolist()) / mass


def empirical_probability(density, center=None):
    """Partial areas over ``|x - center| <= k * pitch`` mapped to xi.

    ``center`` defaults to :func:`refine_center`. Samples run over
    k = 0, 1, ... up to the farther sensor edge, where P = 1 exactly.
    Rounding-level dips (<= 1e-9) are removed by a running maximum; larger
    dips raise DataError.
    """
    if abs(density.integral() - 1.0) > NORMALIZATION_TOLERANCE:
        raise DomainError("density is not normalized")
    if center is None:
        center = refine_center(density)
    edges = density.edges
    cdf = np.concatenate(([0.0], np.cumsum(density.density * density.pitch)))
    cdf /= cdf[-1]
    extent = max(edges[-1] - center, center - edges[0])
    steps = int(math.floor(extent / density.pitch + 1e-9))
    half = np.arange(steps + 1) * density.pitch
    if extent - half[-1] > 1e-9 * density.pitch:
        half = np.append(half, extent)
    p = np.interp(center + half, edges, cdf) - np.interp(center - half, edges, cdf)
    dips = np.diff(p)
    if dips.size and dips.min() < -MONOTONE_TOLERANCE:
        raise DataError(f"empirical curve decreases by {-dips.min()!r}")
    p = np.clip(np.maximum.accumulate(p), 0.0, 1.0)
    p[-1] = 1.0
    xi = xi_from_screen(half, density.geometry)
    return ProbabilityCurve(xi, p, label="empirical", tolerance=MONOTONE_TOLERANCE)


def window_deficit(density, center=0.0):
    """Analytic probability mass falling outside the sensor window."""
    edges = density.edges
    g = density.geometry
    right = capture_probability(xi_from_screen(max(edges[-1] - center, 0.0), g))
    left = capture_probability(xi_from_screen(max(center - edges[0], 0.0), g))
    return 1.0 - 0.5 * (right + left)


@dataclass
class BandStats:
    count: int
    max_abs_deviation: float
    mean_abs_deviation: float
    mean_signed_deviation: float


@dataclass
class ComparisonReport:
    max_abs_deviation: float
    mean_abs_deviation: float
    deviation_by_band: dict
    empirical_forbidden_fraction: float
    analytic_forbidden_fraction: float
    clamp_count: int
    xi_coverage: float
    window_deficit: Optional[float] = None
    baseline_used: Optional[float] = None
    baseline_configured: Optional[float] = None
    forbidden_fraction_baseline_sensitivity: Optional[float] = None
    label: str = "empirical"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["deviation_by_band"] = {k: dict(v) for k, v in data["deviation_by_band"].items()}
        return cls(**data)


def band_name(lo, hi):
    return f"[{lo:g},{'inf' if math.isinf(hi) else format(hi, 'g')})"


def compare_curves(empirical, analytic=capture_probability, clamp_count=0, **extra):
    """Deviation statistics of ``empirical`` against an analytic sampler.

    ``analytic`` is a vectorized callable or a ProbabilityCurve; deviations
    are taken at the empirical sample points. Extra keyword arguments fill
    the optional report fields.
    """
    if isinstance(analytic, ProbabilityCurve):
        if analytic.xi[0] > empirical.xi[-1] or analytic.xi[-1] < empirical.xi[0]:
            raise DomainError("empirical and analytic curves do not overlap")
        if analytic.xi[0] > 0 or analytic.xi[-1] < empirical.xi[-1]:
            raise DomainError("analytic curve does not cover the empirical range")
    if empirical.xi[0] > 0:
        raise DomainError("empirical curve must start at xi = 0")
    reference = np.asarray(analytic(empirical.xi), dtype=float)
    signed = empirical.p - reference
    dev = np.abs(signed)
    bands = {}
    for lo, hi in BANDS:
        sel = (empirical.xi >= lo) & (empirical.xi < hi)
        if sel.any():
            stats = BandStats(int(sel.sum()), float(dev[sel].max()), float(dev[sel].mean()),
                              float(signed[sel].mean()))
        else:
            stats = BandStats(0, 0.0, 0.0, 0.0)
        bands[band_name(lo, hi)] = asdict(stats)
    return ComparisonReport(
        max_abs_deviation=float(dev.max()),
        mean_abs_deviation=float(dev.mean()),
        deviation_by_band=bands,
        empirical_forbidden_fraction=forbidden_fraction(empirical),
        analytic_forbidden_fraction=forbidden_fraction(analytic),
        clamp_count=int(clamp_count),
        xi_coverage=empirical.xi_max,
        label=empirical.label,
        **extra,
    )


@dataclass
class AnalysisResult:
    averaged: np.ndarray
    density: EmpiricalDensity
    center: float
    curve: ProbabilityCurve
    report: ComparisonReport = field(repr=False)


def analyze(frames, geometry, pitch, positions=None, guard_pixels=DEFAULT_GUARD_PIXELS,
            baseline=None, baseline_spread=0.4e-3, baseline_configured=None):
    """Run the whole evaluation on a FrameSet or an (M, N) voltage array.

    ``baseline`` overrides the in-situ estimate. The report's baseline
    sensitivity is the largest change in the empirical forbidden fraction
    when the baseline moves by +-``baseline_spread``.
    """
    averaged = average_frames(frames)
    if baseline is None:
        baseline = estimate_baseline(averaged, guard_pixels)
    density = normalize_density(averaged, baseline, geometry, pitch, positions)
    center = refine_center(density)
    curve = empirical_probability(density, center)

    # None when a shifted baseline leaves no usable signal
    ff = forbidden_fraction(curve)
    sensitivity = 0.0
    for shift in (-baseline_spread, baseline_spread):
        try:
            alt = normalize_density(averaged, baseline + shift, geometry, pitch, positions)
            alt_ff = forbidden_fraction(empirical_probability(alt, refine_center(alt)))
        except (DataError, DomainError):
            sensitivity = None
            break
        sensitivity = max(sensitivity, abs(alt_ff - ff))

    report = compare_curves(
        curve, clamp_count=density.clamp_count,
        window_deficit=window_deficit(density, center),
        baseline_used=float(baseline),
        baseline_configured=baseline_configured,
        forbidden_fraction_baseline_sensitivity=sensitivity,
    )
    return AnalysisResult(averaged, density, center, curve, report)


def _fmt(value):
    return repr(float(value))


def write_outputs(result, out_dir):
    """Write density.csv, pcurve.csv and report.json into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = result.density
    xi = xi_from_screen(np.abs(d.positions - result.center), d.geometry)
    with open(out / "density.csv", "w", newline="\n") as f:
        f.write("pixel_index,x_m,xi,density_per_m\n")
        for i, (x, k, v) in enumerate(zip(d.positions, xi, d.density)):
            f.write(f"{i},{_fmt(x)},{_fmt(k)},{_fmt(v)}\n")
    c = result.curve
    reference = capture_probability(c.xi)
    with open(out / "pcurve.csv", "w", newline="\n") as f:
        f.write("xi,p_empirical,p_analytic,deviation\n")
        for k, pe, pa in zip(c.xi, c.p, reference):
            f.write(f"{_fmt(k)},{_fmt(pe)},{_fmt(pa)},{_fmt(pe - pa)}\n")
    write_report(out / "report.json", result.report)


def write_report(path, report):
    with open(path, "w", newline="\n") as f:
        json.dump(report.to_dict(), f, indent=2, allow_nan=False)
        f.write("\n")


def read_report(path):
    with open(path) as f:
        data = json.load(f)
    try:
        return ComparisonReport.from_dict(data)
    except (TypeError, KeyError, AttributeError) as exc:
        raise DataError(f"{path}: not a comparison report ({exc})") from None
