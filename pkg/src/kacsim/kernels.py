"""Angular collision kernels with finite total mass.

A kernel is a finite measure beta(d theta) on (0, pi] describing the law and
intensity of the deflection angle.  Every kernel here is normalized so that

    integral sin(theta)^2 beta(d theta) = 1,

which pins the overall time scale of the dynamics, while the total mass

    b0 = integral beta(d theta) < infinity

sets the event rate.  Three families are provided:

* ``dirac``     -- all mass at a single angle theta0,
* ``uniform``   -- constant density on [theta_min, pi],
* ``power_law`` -- density proportional to theta^(-nu-1) on [theta_min, pi].

Sampling uses a tabulated inverse CDF (4096 nodes, log-spaced toward
theta_min for the power law) with linear interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "KernelError",
    "NonIntegrable",
    "BadAngle",
    "AngularKernel",
    "make_kernel",
    "sample_theta",
    "total_rate",
    "adaptive_simpson",
]

TABLE_NODES = 4096
LEVY_QUAD_TOL = 1e-12
# Effective lower cut used only to grade the table when theta_min == 0.
ZERO_CUT = np.pi * 1e-7


class KernelError(ValueError):
    pass


class NonIntegrable(KernelError):
    """Total mass of the requested kernel diverges."""


class BadAngle(KernelError):
    """Angle parameter outside its legal range."""


def adaptive_simpson(f, a, b, tol=1e-10, max_depth=48):
    """Adaptive Simpson quadrature of ``f`` on [a, b].

    Subdivides until the local Richardson error estimate is below the
    tolerance (distributed proportionally to interval length).
    """
    if b <= a:
        return 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    stack = [(a, b, fa, fb, fm, whole, tol, 0)]
    total = 0.0
    while stack:
        a, b, fa, fb, fm, whole, eps, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        err = left + right - whole
        if depth >= max_depth or abs(err) <= 15.0 * eps:
            total += left + right + err / 15.0
        else:
            stack.append((a, m, fa, fm, flm, left, 0.5 * eps, depth + 1))
            stack.append((m, b, fm, fb, frm, right, 0.5 * eps, depth + 1))
    return total


@dataclass(frozen=True)
class AngularKernel:
    """Normalized angular measure plus its sampling table.

    ``levy_constant`` multiplies the family's base density so that the
    sin^2-weighted mass is one.  ``table_u``/``table_theta`` tabulate the
    inverse CDF of the probability law beta/b0.
    """

    family: str
    params: dict
    b0: float
    levy_constant: float
    table_u: np.ndarray = field(repr=False)
    table_theta: np.ndarray = field(repr=False)

    def density(self, theta):
        """Density of beta with respect to d theta (dirac has none)."""
        theta = np.asarray(theta, dtype=np.float64)
        c = self.levy_constant
        if self.family == "dirac":
            raise KernelError("dirac kernel has no density")
        if self.family == "uniform":
            lo = self.params["theta_min"]
            return np.where((theta >= lo) & (theta <= np.pi), c, 0.0)
        lo, nu = self.params["theta_min"], self.params["nu"]
        out = np.where((theta >= lo) & (theta <= np.pi) & (theta > 0),
                       c * np.power(np.maximum(theta, 1e-300), -nu - 1.0), 0.0)
        return out

    def sample(self, rng, size=None):
        """Draw deflection angles from the normalized law beta/b0."""
        if self.family == "dirac":
            theta0 = self.params["theta0"]
            if size is None:
                return theta0
            return np.full(size, theta0)
        u = rng.random(size)
        return np.interp(u, self.table_u, self.table_theta)


def _uniform_cdf_nodes(theta_min):
    theta = np.linspace(theta_min, np.pi, TABLE_NODES)
    u = (theta - theta_min) / (np.pi - theta_min)
    return u, theta


def _power_mass(theta, theta_min, nu):
    """integral_{theta_min}^{theta} t^(-nu-1) dt (elementary antiderivative)."""
    if nu == 0.0:
        return np.log(theta / theta_min)
    return (np.power(theta, -nu) - np.power(theta_min, -nu)) / (-nu)


def _power_cdf_nodes(theta_min, nu):
    lo = theta_min if theta_min > 0 else ZERO_CUT
    theta = np.geomspace(lo, np.pi, TABLE_NODES)
    if theta_min == 0.0:
        # prepend the exact origin; the mass below ZERO_CUT is negligible
        # and the inverse CDF is near-linear there (nu < 0 guaranteed here)
        theta = np.concatenate(([0.0], theta))
        h = np.power(theta, -nu) / (-nu)
        u = h / (np.power(np.pi, -nu) / (-nu))
    else:
        h = _power_mass(theta, theta_min, nu)
        u = h / _power_mass(np.pi, theta_min, nu)
    u[0] = 0.0
    u[-1] = 1.0
    return u, theta


def make_kernel(family, **params):
    """Construct a Levy-normalized angular kernel.

    dirac:     theta0 in (0, pi)
    uniform:   theta_min in [0, pi)
    power_law: nu < 2, theta_min in [0, pi); theta_min > 0 required when
               nu >= 0 (otherwise the total mass diverges)
    """
    if family == "dirac":
        theta0 = float(params["theta0"])
        s = np.sin(theta0)
        if not (0.0 < theta0 < np.pi) or s == 0.0:
            raise BadAngle(f"dirac angle {theta0} has sin(theta0)^2 = 0")
        c = 1.0 / (s * s)
        table_u = np.array([0.0, 1.0])
        table_theta = np.array([theta0, theta0])
        return AngularKernel("dirac", {"theta0": theta0}, b0=c, levy_constant=c,
                             table_u=table_u, table_theta=table_theta)

    if family == "uniform":
        theta_min = float(params["theta_min"])
        if not (0.0 <= theta_min < np.pi):
            raise BadAngle(f"theta_min {theta_min} outside [0, pi)")
        # integral of sin^2 from theta_min to pi in closed form
        levy_mass = (np.pi - theta_min) / 2.0 + np.sin(2.0 * theta_min) / 4.0
        c = 1.0 / levy_mass
        b0 = c * (np.pi - theta_min)
        u, theta = _uniform_cdf_nodes(theta_min)
        return AngularKernel("uniform", {"theta_min": theta_min}, b0=b0,
                             levy_constant=c, table_u=u, table_theta=theta)

    if family == "power_law":
        nu = float(params["nu"])
        theta_min = float(params["theta_min"])
        if not (0.0 <= theta_min < np.pi):
            raise BadAngle(f"theta_min {theta_min} outside [0, pi)")
        if nu >= 2.0:
            raise NonIntegrable(f"nu = {nu} >= 2: sin^2-weighted mass diverges")
        if nu >= 0.0 and theta_min == 0.0:
            raise NonIntegrable(f"nu = {nu} >= 0 with theta_min = 0: mass diverges")
        levy_mass = adaptive_simpson(
            lambda t: np.sin(t) ** 2 * t ** (-nu - 1.0) if t > 0 else 0.0,
            theta_min, np.pi, tol=LEVY_QUAD_TOL)
        c = 1.0 / levy_mass
        if theta_min > 0:
            mass = _power_mass(np.pi, theta_min, nu)
        else:
            mass = np.power(np.pi, -nu) / (-nu)
        b0 = c * mass
        u, theta = _power_cdf_nodes(theta_min, nu)
        return AngularKernel("power_law", {"nu": nu, "theta_min": theta_min},
                             b0=b0, levy_constant=c, table_u=u, table_theta=theta)

    raise KernelError(f"unknown kernel family {family!r}")


def sample_theta(kernel, rng, size=None):
    """Draw deflection angles from ``kernel``'s normalized law."""
    return kernel.sample(rng, size)


def total_rate(kernel):
    """Angular mass b0 = int_0^pi beta(theta) dtheta of the normalized kernel.

    This is the per-pair jump intensity; an n-particle system fires events at
    rate (n - 1) b0 / 2.
    """
    return kernel.b0
