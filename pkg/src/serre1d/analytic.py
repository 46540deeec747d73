"""Exact solutions, wave generators, and the bathymetry profile library.

Everything is vectorized over numpy arrays of positions.  Bathymetry is
floor-referenced (z >= 0 means raised bed); profiles defined in the source
experiments relative to the still-water surface store their datum offset
explicitly in ``datum_offset``.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# Reference rule fixing the bathymetry regularization constant: on a
# 1600-element mesh of the owning scenario the smoothing length equals 0.075.
SMOOTHING_REFERENCE_LENGTH = 0.075
SMOOTHING_REFERENCE_ELEMENTS = 1600


class SteadyStateParams(NamedTuple):
    h0: float
    a: float
    g: float = 9.81


class SolitaryParams(NamedTuple):
    h0: float
    alpha: float
    x0: float = 0.0


def steady_state_exact(x, p: SteadyStateParams):
    """Closed-form steady flow over a submerged sech^2 bump.

    Returns (h, q, z, r): nodal water height, the constant discharge, nodal
    bed elevation, and the bump inverse width.  The bed satisfies
    z = -(h - h0)/2 identically.
    """
    r = (1.0 / p.h0) * np.sqrt(3.0 * p.a / (1.0 + p.a))
    q = np.sqrt((1.0 + p.a) * p.g * p.h0 ** 3 / 2.0)
    bump = 1.0 / np.cosh(r * np.asarray(x)) ** 2
    h = p.h0 * (1.0 + p.a * bump)
    z = -0.5 * p.h0 * p.a * bump
    return h, q, z, r


def solitary_speed(p: SolitaryParams, g=9.81):
    return np.sqrt(g * (p.h0 + p.alpha))


def solitary_width(p: SolitaryParams):
    return np.sqrt(3.0 * p.alpha / (4.0 * p.h0 ** 2 * (p.h0 + p.alpha)))


def solitary_wave(x, t, p: SolitaryParams, g=9.81):
    """Traveling solitary profile (h, u) at time t."""
    c = solitary_speed(p, g)
    r = solitary_width(p)
    h = p.h0 + p.alpha / np.cosh(r * (np.asarray(x) - p.x0 - c * t)) ** 2
    u = c * (h - p.h0) / h
    return h, u


def lumped_gradient(x, values):
    """Lumped P1 nodal derivative: central in the interior, one-sided at ends."""
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (x[2:] - x[:-2])
    out[0] = (values[1] - values[0]) / (x[1] - x[0])
    out[-1] = (values[-1] - values[-2]) / (x[-1] - x[-2])
    return out


def solitary_initial_condition(x, z, dzdx, p: SolitaryParams, g=9.81):
    """Full 5-field nodal state for a solitary wave released over bathymetry.

    The auxiliary fields start on their equilibrium manifold: q1 = h^2,
    q3 = q dz/dx, and q2 = -h^2 dv/dx + 3/2 q3 with the same discrete
    derivative used by the assembly.
    """
    h_free, u_free = solitary_wave(x, 0.0, p, g)
    h = np.maximum(h_free - z, 0.0)
    q = u_free * h
    v = np.where(h > 0.0, u_free, 0.0)
    q1 = h * h
    q3 = q * dzdx
    q2 = -h * h * lumped_gradient(x, v) + 1.5 * q3
    q2 = np.where(h > 0.0, q2, 0.0)
    return h, q, q1, q2, q3


def steady_initial_condition(x, p: SteadyStateParams):
    """Nodal 5-field state sampling the exact steady solution."""
    h, q, z, r = steady_state_exact(x, p)
    _, dzdx = _soliton_bump(np.asarray(x, dtype=float), p.h0, p.a)
    qv = np.full_like(h, q)
    v = qv / h
    q1 = h * h
    q3 = qv * dzdx
    q2 = -h * h * lumped_gradient(x, v) + 1.5 * q3
    return h, qv, q1, q2, q3


def dispersion_wavenumber(sigma, h0, g=9.81):
    """Positive wavenumber solving k^2 = 3 sigma^2 / (3 g h0 - h0^2 sigma^2)."""
    denom = 3.0 * g * h0 - h0 ** 2 * sigma ** 2
    if denom <= 0.0:
        raise ValueError("frequency beyond Serre dispersion range")
    return np.sqrt(3.0 * sigma ** 2 / denom)


def periodic_wave_target(x, t, a, k, sigma, h0):
    """Generation-zone target (h, u), a linear sinusoid on depth h0."""
    phase = np.sin(k * np.asarray(x) - sigma * t)
    h = h0 + a * phase
    u = (a / h0) * (sigma / k) * phase
    return h, u


def periodic_wave_state(x, t, a, k, sigma, h0, dzdx=0.0):
    """Full 5-field generation target with analytic in-phase derivatives."""
    h, u = periodic_wave_target(x, t, a, k, sigma, h0)
    dudx = (a / h0) * sigma * np.cos(k * np.asarray(x) - sigma * t)
    q = h * u
    q1 = h * h
    q3 = q * dzdx
    q2 = -h * h * dudx + 1.5 * q3
    return h, q, q1, q2, q3


# ---------------------------------------------------------------------------
# Bathymetry library


@dataclass(frozen=True)
class BathymetryProfile:
    """Tagged analytic bed profile with its regularization length.

    tags: flat, soliton-bump, smoothed-triangle, smoothed-step, beach,
    trapezoid-bar.  ``smoothing`` is the mesh-dependent length d*sqrt(h0*dx)
    for the smoothed profiles and 0 for sharp ones.  ``datum_offset`` records
    the shift applied when converting a surface-referenced definition
    (beach: z = -h0 offshore) to the floor-referenced form used here.
    """
    tag: str
    h0: float = 1.0
    smoothing: float = 0.0
    bump_amplitude: float = 0.0
    datum_offset: float = 0.0


def smoothing_constant(h0, domain_length):
    """Regularization constant d frozen from the 1600-element reference rule."""
    dx_ref = domain_length / SMOOTHING_REFERENCE_ELEMENTS
    return SMOOTHING_REFERENCE_LENGTH / np.sqrt(h0 * dx_ref)


def smoothing_length(d, h0, dx):
    return d * np.sqrt(h0 * dx)


def _triangle(x, ell):
    ax = np.abs(x)
    z = np.maximum(0.1 - (10.0 / 7.05) * x * x / (ax + ell), 0.0)
    slope = -(10.0 / 7.05) * np.sign(x) * ax * (ax + 2.0 * ell) / (ax + ell) ** 2
    dzdx = np.where(z > 0.0, slope, 0.0)
    return z, dzdx


def _step(x, ell):
    z = 0.1 * (0.5 + np.arctan(x / ell) / np.pi)
    dzdx = 0.1 * ell / (np.pi * (ell * ell + x * x))
    return z, dzdx


BEACH_TOE = 2.5
BEACH_SLOPE = 1.0 / 30.0


def _beach(x):
    z = np.maximum(0.0, (x - BEACH_TOE) * BEACH_SLOPE)
    dzdx = np.where(x > BEACH_TOE, BEACH_SLOPE, 0.0)
    dzdx = np.where(x == BEACH_TOE, 0.5 * BEACH_SLOPE, dzdx)
    return z, dzdx


BAR_KNEES = (6.0, 12.0, 14.0, 17.0)
BAR_UP_SLOPE = 1.0 / 20.0
BAR_DOWN_SLOPE = 1.0 / 10.0


def _trapezoid_bar(x):
    x0, x1, x2, x3 = BAR_KNEES
    z = np.zeros_like(x)
    z = np.where((x >= x0) & (x <= x1), BAR_UP_SLOPE * (x - x0), z)
    z = np.where((x > x1) & (x < x2), 0.3, z)
    z = np.where((x >= x2) & (x <= x3), 0.3 - BAR_DOWN_SLOPE * (x - x2), z)
    dzdx = np.zeros_like(x)
    dzdx = np.where((x > x0) & (x < x1), BAR_UP_SLOPE, dzdx)
    dzdx = np.where((x > x2) & (x < x3), -BAR_DOWN_SLOPE, dzdx)
    # node-centered slope averaging at the four kinks
    dzdx = np.where(x == x0, 0.5 * BAR_UP_SLOPE, dzdx)
    dzdx = np.where(x == x1, 0.5 * BAR_UP_SLOPE, dzdx)
    dzdx = np.where(x == x2, -0.5 * BAR_DOWN_SLOPE, dzdx)
    dzdx = np.where(x == x3, -0.5 * BAR_DOWN_SLOPE, dzdx)
    return z, dzdx


def _soliton_bump(x, h0, a):
    r = (1.0 / h0) * np.sqrt(3.0 * a / (1.0 + a))
    sech2 = 1.0 / np.cosh(r * x) ** 2
    z = -0.5 * h0 * a * sech2
    dzdx = h0 * a * r * sech2 * np.tanh(r * x)
    return z, dzdx


def bathymetry_eval(profile: BathymetryProfile, x):
    """Evaluate (z, dz/dx) for a profile at positions x."""
    x = np.asarray(x, dtype=float)
    if profile.tag == "flat":
        return np.zeros_like(x), np.zeros_like(x)
    if profile.tag == "soliton-bump":
        return _soliton_bump(x, profile.h0, profile.bump_amplitude)
    if profile.tag == "smoothed-triangle":
        return _triangle(x, profile.smoothing)
    if profile.tag == "smoothed-step":
        return _step(x, profile.smoothing)
    if profile.tag == "beach":
        return _beach(x)
    if profile.tag == "trapezoid-bar":
        return _trapezoid_bar(x)
    raise ValueError(f"unknown bathymetry tag: {profile.tag}")
