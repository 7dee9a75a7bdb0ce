"""Quadrature routines used by the analytic core and its oracles.

Adaptive Simpson is written out here rather than borrowed, because it serves
as the independent check on every closed-form probability in the package.
"""

import math

import numpy as np

from .errors import ConvergenceError, DomainError

DEFAULT_ABS_TOL = 1e-10
DEFAULT_MAX_DEPTH = 40
DEFAULT_MAX_EVALS = 5_000_000


def _simpson(fa, fm, fb, width):
    return width * (fa + 4.0 * fm + fb) / 6.0


def adaptive_simpson(func, a, b, abs_tol=DEFAULT_ABS_TOL, rel_tol=0.0,
                     max_depth=DEFAULT_MAX_DEPTH, breakpoints=None,
                     max_evals=DEFAULT_MAX_EVALS):
    """Integrate a scalar function over [a, b] by adaptive Simpson's rule.

    Each interval is split until the Simpson estimates on it and on its two
    halves agree to within 15 times the local tolerance; the accepted value
    includes the Richardson correction. The tolerance budget is
    ``max(abs_tol, rel_tol * |I|)`` with ``I`` a coarse estimate of the whole
    integral, divided evenly over the initial panels.

    ``breakpoints`` are interior points that seed the initial panels, which
    helps with oscillatory integrands (one panel per lobe).

    Raises ConvergenceError when an interval needs more than ``max_depth``
    bisections or when more than ``max_evals`` evaluations are spent.
    """
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("integration limits must be finite")
    if abs_tol < 0 or rel_tol < 0 or (abs_tol == 0 and rel_tol == 0):
        raise DomainError("need a positive absolute or relative tolerance")
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0

    edges = [a]
    if breakpoints is not None:
        edges.extend(sorted(float(x) for x in breakpoints if a < x < b))
    edges.append(b)

    panels = []
    evals = 0
    coarse = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        flo, fmid, fhi = func(lo), func(mid), func(hi)
        evals += 3
        whole = _simpson(flo, fmid, fhi, hi - lo)
        coarse += whole
        panels.append((lo, flo, mid, fmid, hi, fhi, whole))

    budget = max(abs_tol, rel_tol * abs(coarse))
    eps0 = budget / len(panels)
    stack = [(p, eps0, 0) for p in panels]
    total = []
    while stack:
        (lo, flo, mid, fmid, hi, fhi, whole), eps, depth = stack.pop()
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm, frm = func(lm), func(rm)
        evals += 2
        left = _simpson(flo, flm, fmid, mid - lo)
        right = _simpson(fmid, frm, fhi, hi - mid)
        delta = left + right - whole
        if abs(delta) <= 15.0 * eps:
            total.append(left + right + delta / 15.0)
            continue
        if depth + 1 > max_depth:
            raise ConvergenceError(
                f"adaptive Simpson exceeded depth {max_depth} on [{lo!r}, {hi!r}]")
        if evals > max_evals:
            raise ConvergenceError(
                f"adaptive Simpson exceeded {max_evals} function evaluations")
        stack.append(((mid, fmid, rm, frm, hi, fhi, right), 0.5 * eps, depth + 1))
        stack.append(((lo, flo, lm, flm, mid, fmid, left), 0.5 * eps, depth + 1))
    return sign * math.fsum(total)


def composite_simpson(values, a, b):
    """Composite Simpson's rule on uniformly spaced samples.

    ``values`` holds f at an odd number of equally spaced points spanning
    [a, b] (an even number of panels).
    """
    y = np.asarray(values, dtype=float)
    n = y.size - 1
    if n < 2 or n % 2:
        raise DomainError("composite Simpson needs an even number of panels")
    h = (b - a) / n
    return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())


def gauss_legendre(order):
    """Nodes and weights of the Gauss-Legendre rule on [-1/2, 1/2].

    The weights sum to one, so ``weights @ f(nodes)`` is the mean of f over
    a unit cell.
    """
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return 0.5 * nodes, 0.5 * weights
