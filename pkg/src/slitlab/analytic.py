"""Closed-form single-slit physics.

Coordinates follow one convention throughout: ``p`` is the transverse
momentum behind the slit, ``x`` the transverse position on the screen, and
``xi = dp * dx / h`` the dimensionless precision product. A momentum window
of width ``dp`` is always the symmetric interval ``|p| <= dp / 2``.
"""

from dataclasses import dataclass
import math
from typing import Callable, Union

import numpy as np
from scipy import optimize

from .errors import ConvergenceError, DomainError
from .quadrature import DEFAULT_ABS_TOL, adaptive_simpson, composite_simpson
from .special import sine_integral

PLANCK = 6.62607015e-34  # J s, exact SI value

FORBIDDEN_FRACTION_PANELS = 2 ** 14


@dataclass(frozen=True)
class SlitGeometry:
    """Slit width ``b`` (also the position uncertainty), wavelength and
    slit-to-screen distance, all in meters."""

    slit_width: float = 124e-6
    wavelength: float = 632.82e-9
    screen_distance: float = 0.257

    def __post_init__(self):
        for name in ("slit_width", "wavelength", "screen_distance"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive and finite, got {value!r}")

    @property
    def momentum(self):
        """Incident momentum p0 = h / wavelength."""
        return PLANCK / self.wavelength

    @property
    def fresnel_number(self):
        """b^2 / (wavelength * L); the far-field form holds when this is << 1."""
        return self.slit_width ** 2 / (self.wavelength * self.screen_distance)

    @property
    def first_minimum(self):
        """Screen position of the first interference minimum."""
        return self.wavelength * self.screen_distance / self.slit_width

    @property
    def xi_per_meter(self):
        return 2.0 * self.slit_width / (self.wavelength * self.screen_distance)


DEFAULT_GEOMETRY = SlitGeometry()


def _check_width(slit_width):
    if not (math.isfinite(slit_width) and slit_width > 0):
        raise DomainError(f"slit width must be positive and finite, got {slit_width!r}")


def sinc_pi(u):
    """sin(pi u) / (pi u), with the removable point u = 0 set to 1."""
    if isinstance(u, (float, int)):
        if u == 0:
            return 1.0
        a = math.pi * u
        return math.sin(a) / a
    u = np.asarray(u, dtype=float)
    a = math.pi * u
    safe = np.where(u == 0, 1.0, a)
    return np.where(u == 0, 1.0, np.sin(safe) / safe)


def momentum_density(p, slit_width):
    """Probability density of transverse momentum behind the slit (per kg m/s)."""
    _check_width(slit_width)
    scale = slit_width / PLANCK
    if isinstance(p, (float, int)):
        s = sinc_pi(scale * p)
        return scale * s * s
    return scale * sinc_pi(scale * np.asarray(p, dtype=float)) ** 2


def screen_intensity(x, geometry):
    """Normalized Fraunhofer intensity on the screen (per meter)."""
    scale = geometry.slit_width / (geometry.wavelength * geometry.screen_distance)
    if isinstance(x, (float, int)):
        s = sinc_pi(scale * x)
        return scale * s * s
    return scale * sinc_pi(scale * np.asarray(x, dtype=float)) ** 2


def xi_from_screen(x, geometry):
    """Map a half-width ``x`` on the screen to the precision product xi."""
    return x * geometry.xi_per_meter


def screen_from_xi(xi, geometry):
    """Inverse of :func:`xi_from_screen`."""
    return xi / geometry.xi_per_meter


def momentum_from_xi(xi, slit_width):
    """Full momentum window width dp corresponding to ``xi``."""
    return xi * PLANCK / slit_width


def _check_xi(xi):
    arr = np.asarray(xi, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("xi must be finite")
    if np.any(arr < 0):
        raise DomainError("xi must be non-negative")
    return arr


def capture_probability(xi):
    """Probability that the transverse momentum falls in the window of size xi.

    Closed form (2/pi) [Si(pi xi) - (2/pi) sin^2(pi xi / 2) / xi], with the
    limit 0 at xi = 0. Accepts scalars or arrays.
    """
    arr = _check_xi(xi)
    safe = np.where(arr == 0, 1.0, arr)
    half = np.sin(0.5 * math.pi * safe)
    p = (2.0 / math.pi) * (sine_integral(math.pi * safe)
                           - (2.0 / math.pi) * half * half / safe)
    p = np.where(arr == 0, 0.0, p)
    # Rounding can leave values a few ulps outside [0, 1]; anything larger is a bug.
    assert np.all(p > -1e-12) and np.all(p < 1.0 + 1e-12), "capture probability out of range"
    if p.ndim == 0:
        return float(p)
    return p


def capture_probability_slope(xi):
    """dP/dxi = (4/pi^2) sin^2(pi xi / 2) / xi^2; equals 1 at xi = 0."""
    arr = _check_xi(xi)
    s = sinc_pi(0.5 * arr)
    out = s * s
    if np.ndim(out) == 0:
        return float(out)
    return out


def capture_probability_quadrature(xi, rel_tol=1e-10, slit_width=DEFAULT_GEOMETRY.slit_width):
    """Capture probability by direct adaptive quadrature of the momentum density.

    Integrates :func:`momentum_density` over ``|p| <= dp / 2`` with
    ``dp = xi h / slit_width``. The variable is rescaled to ``u = p dx / h``
    so the integrand is O(1); the value is unchanged by the substitution.
    Serves as the independent check on :func:`capture_probability`.
    """
    xi = float(xi)
    if not (math.isfinite(xi) and xi >= 0):
        raise DomainError("xi must be finite and non-negative")
    if not (1e-14 < rel_tol < 1e-2):
        raise DomainError("rel_tol must lie in (1e-14, 1e-2)")
    _check_width(slit_width)
    if xi == 0:
        return 0.0
    unit = PLANCK / slit_width

    def integrand(u):
        return momentum_density(u * unit, slit_width) * unit

    half = 0.5 * xi
    lobes = np.arange(1.0, half)
    value = 2.0 * adaptive_simpson(integrand, 0.0, half, abs_tol=rel_tol * 1e-3,
                                   rel_tol=rel_tol * 0.25, breakpoints=lobes)
    return value


def heisenberg_step(xi):
    """Step law of the strict Heisenberg relation: 0 below xi = 1, 1 at and above.

    Right-continuous: xi = 1 itself is allowed by dp dx >= h.
    """
    arr = _check_xi(xi)
    out = np.where(arr >= 1.0, 1.0, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ProbabilityCurve:
    """Sampled map xi -> P(xi).

    ``xi`` must be strictly increasing; ``p`` must lie in [0, 1] and be
    nondecreasing up to ``tolerance``.
    """

    xi: np.ndarray
    p: np.ndarray
    label: str = "analytic"
    tolerance: float = 0.0

    def __post_init__(self):
        xi = np.array(self.xi, dtype=float)
        p = np.array(self.p, dtype=float)
        if xi.ndim != 1 or xi.shape != p.shape or xi.size < 2:
            raise DomainError("curve needs matching 1-D xi and p arrays with >= 2 samples")
        if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(p))):
            raise DomainError("curve samples must be finite")
        if np.any(np.diff(xi) <= 0):
            raise DomainError("curve xi values must be strictly increasing")
        tol = self.tolerance
        if np.any(p < -tol) or np.any(p > 1.0 + tol):
            raise DomainError("curve probabilities must lie in [0, 1]")
        if np.any(np.diff(p) < -tol):
            raise DomainError("curve probabilities must be nondecreasing")
        xi.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "p", p)

    @classmethod
    def analytic(cls, xi):
        xi = np.asarray(xi, dtype=float)
        return cls(xi, capture_probability(xi), label="analytic", tolerance=1e-12)

    @classmethod
    def step(cls, xi):
        xi = np.asarray(xi, dtype=float)
        return cls(xi, heisenberg_step(xi), label="heisenberg-step")

    def __call__(self, xi):
        return np.interp(xi, self.xi, self.p)

    @property
    def xi_max(self):
        return float(self.xi[-1])

    def __len__(self):
        return self.xi.size


CurveLike = Union[ProbabilityCurve, Callable, str, None]


def forbidden_fraction(curve: CurveLike = None, xi_max: float = 1.0,
                       panels: int = FORBIDDEN_FRACTION_PANELS):
    """Mean capture probability over ``[0, xi_max]`` (by default the
    Heisenberg-forbidden region xi < 1).

    ``curve`` may be ``None`` or ``"analytic"`` for the closed form, any
    vectorized callable (both integrated by composite Simpson on ``panels``
    uniform panels), or a sampled :class:`ProbabilityCurve` (trapezoid rule,
    with linear interpolation at ``xi_max``).
    """
    if not (math.isfinite(xi_max) and xi_max > 0):
        raise DomainError("xi_max must be positive and finite")
    if isinstance(curve, ProbabilityCurve):
        if curve.xi[0] > 0 or curve.xi[-1] < xi_max:
            raise DomainError(
                f"curve covers [{curve.xi[0]!r}, {curve.xi[-1]!r}], not [0, {xi_max!r}]")
        inside = curve.xi < xi_max
        xs = np.append(curve.xi[inside], xi_max)
        ps = np.append(curve.p[inside], curve(xi_max))
        return float(np.trapezoid(ps, xs) / xi_max)
    if curve is None or curve == "analytic":
        func = capture_probability
    elif callable(curve):
        func = curve
    else:
        raise DomainError(f"unsupported curve {curve!r}")
    grid = np.linspace(0.0, xi_max, panels + 1)
    return float(composite_simpson(func(grid), 0.0, xi_max) / xi_max)


def slit_wavefunction(x, slit_width):
    """Position amplitude just behind the slit: 1/sqrt(b) on |x| <= b/2, else 0.

    The support is the slit itself (width b), which makes the state
    unit-normalized and gives exactly :func:`momentum_density` as its
    momentum distribution.
    """
    _check_width(slit_width)
    amp = 1.0 / math.sqrt(slit_width)
    if isinstance(x, (float, int)):
        return amp if abs(x) <= 0.5 * slit_width else 0.0
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) <= 0.5 * slit_width, amp, 0.0)


def truncated_second_moment(cutoff, slit_width, rel_tol=1e-10):
    """Second moment of the momentum density restricted to ``|p| <= cutoff``.

    Grows linearly in the cutoff for large cutoffs, so the momentum standard
    deviation of the slit state is infinite.
    """
    cutoff = float(cutoff)
    if not (math.isfinite(cutoff) and cutoff > 0):
        raise DomainError("cutoff must be positive and finite")
    _check_width(slit_width)
    unit = PLANCK / slit_width

    def integrand(u):
        p = u * unit
        return p * p * momentum_density(p, slit_width) * unit

    top = cutoff / unit
    lobes = np.arange(1.0, top)
    # Integrand is O(unit^2); scale the absolute floor with it.
    return 2.0 * adaptive_simpson(integrand, 0.0, top, abs_tol=DEFAULT_ABS_TOL * unit * unit,
                                  rel_tol=rel_tol, breakpoints=lobes)


def cutoff_exceeding(bound, slit_width, rel_tol=1e-6):
    """Smallest momentum cutoff (to ``rel_tol``) whose truncated second
    moment exceeds ``bound``. Found by doubling, then bisection."""
    if not (math.isfinite(bound) and bound > 0):
        raise DomainError("bound must be positive and finite")
    lo = 0.0
    hi = PLANCK / slit_width
    for _ in range(2000):
        if truncated_second_moment(hi, slit_width) > bound:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ConvergenceError("no cutoff found within the doubling budget")
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if truncated_second_moment(mid, slit_width, rel_tol=1e-12) > bound:
            hi = mid
        else:
            lo = mid
    return hi


def fwhm_half_width(geometry, xtol=1e-15):
    """Screen half-width where the central peak falls to half its maximum,
    located by bisection."""
    peak = screen_intensity(0.0, geometry)
    return optimize.bisect(lambda x: screen_intensity(x, geometry) - 0.5 * peak,
                           0.0, geometry.first_minimum, xtol=xtol * geometry.first_minimum)


def first_side_lobe():
    """Position (in units of the first-minimum distance) and height of the
    first secondary maximum of sinc^2, by golden-section search.

    Returns ``(position, peak_to_lobe_ratio)``.
    """
    res = optimize.minimize_scalar(lambda v: -sinc_pi(v) ** 2, bracket=(1.1, 1.45, 1.9),
                                   method="golden", tol=1e-10)
    return float(res.x), 1.0 / float(-res.fun)
