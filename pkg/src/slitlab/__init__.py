"""Single-slit diffraction test of the position-momentum uncertainty relation:
closed-form capture probabilities, a synthetic CCD line sensor, and the
measurement-evaluation pipeline that turns frames into an empirical P(xi)."""

from .analytic import (
    DEFAULT_GEOMETRY,
    PLANCK,
    ProbabilityCurve,
    SlitGeometry,
    capture_probability,
    capture_probability_quadrature,
    forbidden_fraction,
    heisenberg_step,
    momentum_density,
    screen_from_xi,
    screen_intensity,
    slit_wavefunction,
    truncated_second_moment,
    xi_from_screen,
)
from .analysis import ComparisonReport, EmpiricalDensity, analyze
from .ccdsim import BeamModel, FrameSet, SensorModel, generate_frameset
from .errors import (
    CapacityError,
    ConfigError,
    ConvergenceError,
    DataError,
    DomainError,
    EmptySignalError,
    FormatError,
    SlitlabError,
)
from .special import sine_integral

__version__ = "0.1.0"
