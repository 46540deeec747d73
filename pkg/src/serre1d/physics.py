"""Pointwise closures of the relaxed first-order water wave model.

State vector u = (h, q, q1, q2, q3): water height, discharge, and the three
relaxed auxiliary fields approximating h^2, h*(dh/dt + 3/2 v dz/dx) and
q*dz/dx.  Everything here is a pure scalar function so the assembly kernels
can call these from compiled code; the NamedTuple containers are unboxed by
numba and cost nothing.
"""

import enum
from typing import NamedTuple

import numba as nb

# Fractions of h_ref below which a node counts as dry / velocity is
# desingularized.  Hard cutoffs: closures return 0 on dry states.
DRY_FRACTION = 1e-10
DESING_FRACTION = 1e-6


class State(NamedTuple):
    h: float
    q: float
    q1: float
    q2: float
    q3: float


class PhysParams(NamedTuple):
    g: float = 9.81
    lambda_bar: float = 1.0
    h_ref: float = 1.0
    eps: float = 1.0


class ModelVariant(enum.IntEnum):
    FULL = 0
    INCOMPLETE = 1


@nb.njit(cache=True)
def gamma(x):
    """Relaxation potential 3(x-1)^2; zero exactly at equilibrium x=1."""
    return 3.0 * (x - 1.0) ** 2


@nb.njit(cache=True)
def gamma_prime(x):
    return 6.0 * (x - 1.0)


@nb.njit(cache=True)
def dry_height(p):
    return DRY_FRACTION * p.h_ref


@nb.njit(cache=True)
def velocity(h, q, p):
    """Discharge-to-velocity with a bounded division near dry nodes."""
    h_dry = DRY_FRACTION * p.h_ref
    if h <= h_dry:
        return 0.0
    if h < DESING_FRACTION * p.h_ref:
        return h * q / (h * h + max(h, h_dry) * h_dry)
    return q / h


@nb.njit(cache=True)
def derived(s, p):
    """(v, eta, omega, beta) = (q, q1, q2, q3)/h, all zero when dry."""
    if s.h <= DRY_FRACTION * p.h_ref:
        return 0.0, 0.0, 0.0, 0.0
    v = velocity(s.h, s.q, p)
    return v, s.q1 / s.h, s.q2 / s.h, s.q3 / s.h


@nb.njit(cache=True)
def relaxed_pressure_tilde(s, p):
    """Non-hydrostatic pressure correction, -(1/3)(lam*g/eps)*h^2*(eta*G'-2h*G)."""
    if s.h <= DRY_FRACTION * p.h_ref:
        return 0.0
    eta = s.q1 / s.h
    # dividing q1 by h*h (not eta by h) makes the ratio exactly 1.0 when
    # q1 was stored as the rounded square of h, so equilibria stay exact
    ratio = s.q1 / (s.h * s.h)
    coeff = p.lambda_bar * p.g / p.eps
    return -(1.0 / 3.0) * coeff * s.h * s.h * (
        eta * gamma_prime(ratio) - 2.0 * s.h * gamma(ratio))


@nb.njit(cache=True)
def relaxed_pressure(s, p):
    """Total pressure: hydrostatic g h^2/2 plus the relaxed correction."""
    if s.h <= DRY_FRACTION * p.h_ref:
        return 0.0
    return 0.5 * p.g * s.h * s.h + relaxed_pressure_tilde(s, p)


@nb.njit(cache=True)
def source_s(s, p):
    """Stiff restoring source driving q1 toward h^2."""
    if s.h <= DRY_FRACTION * p.h_ref:
        return 0.0
    ratio = s.q1 / (s.h * s.h)
    return p.lambda_bar * p.g * (s.h * s.h / p.eps) * gamma_prime(ratio)


@nb.njit(cache=True)
def source_ts(s, dzdx, p):
    """Stiff restoring source driving beta = q3/h toward v dz/dx."""
    if s.h <= DRY_FRACTION * p.h_ref:
        return 0.0
    v = velocity(s.h, s.q, p)
    beta = s.q3 / s.h
    scale = (p.g * p.h_ref) ** 0.5
    return p.lambda_bar * scale * (s.h / p.eps) * (v * dzdx - beta)


@nb.njit(cache=True)
def source_r(s, dzdx, p):
    """Coefficient of the bed slope in the momentum source."""
    if s.h <= DRY_FRACTION * p.h_ref:
        return 0.0
    return p.g * s.h - 0.5 * source_s(s, p) + 0.25 * source_ts(s, dzdx, p)


@nb.njit(cache=True)
def flux(s, p):
    """Conservative flux (q, v q + p, v q1, v q2, v q3)."""
    if s.h <= DRY_FRACTION * p.h_ref:
        return 0.0, 0.0, 0.0, 0.0, 0.0
    v = velocity(s.h, s.q, p)
    pr = relaxed_pressure(s, p)
    return s.q, v * s.q + pr, v * s.q1, v * s.q2, v * s.q3


@nb.njit(cache=True)
def rhs_sources(s, dzdx, p, variant):
    """Right-hand side 5-vector; variant 0 is the full model, 1 the incomplete one."""
    if variant == 0:
        return (0.0,
                -source_r(s, dzdx, p) * dzdx,
                s.q2 - 1.5 * s.q * dzdx,
                -source_s(s, p),
                source_ts(s, dzdx, p))
    return (0.0,
            -p.g * s.h * dzdx,
            s.q2,
            -source_s(s, p),
            0.0)


@nb.njit(cache=True)
def energy_density(s, z, p):
    """Total energy density including the relaxation penalty term."""
    if s.h <= DRY_FRACTION * p.h_ref:
        return 0.5 * p.g * z * z
    v, eta, omega, beta = derived(s, p)
    surface = s.h + z
    penalty = (p.lambda_bar * p.g / (3.0 * p.eps)) * s.h ** 3 * gamma(
        s.q1 / (s.h * s.h))
    return (0.5 * p.g * surface * surface + 0.5 * s.h * v * v
            + s.h * omega * omega / 6.0 + 0.125 * s.h * beta * beta + penalty)


@nb.njit(cache=True)
def wave_speed(s, p):
    """|v| + sqrt(g h + relaxation stiffening), an upper celerity bound."""
    if s.h <= DRY_FRACTION * p.h_ref:
        return 0.0
    v = velocity(s.h, s.q, p)
    stiff = 2.0 * p.lambda_bar * p.g / p.eps * (3.0 * s.h * s.h - s.q1)
    if stiff < 0.0:
        stiff = 0.0
    return abs(v) + (p.g * s.h + stiff) ** 0.5


@nb.njit(cache=True)
def max_wave_speed(s_left, s_right, p):
    """Upper bound on signal speeds between two adjacent states."""
    a = wave_speed(s_left, p)
    b = wave_speed(s_right, p)
    return a if a > b else b
