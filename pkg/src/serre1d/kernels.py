"""Compiled assembly and time-stepping kernels.

State is a (5, N) array U with rows (h, q, q1, q2, q3).  All loops are
single-threaded with fixed iteration order so repeated runs are bit
identical.  The residual R is m-weighted: m_i du_i/dt = R_i.

Stabilization is a graph viscosity d_e = |c_e| * lam_visc per edge acting on
star-height variables (see star_values).  lam_visc is the full wave-speed
bound limited by a sensor plus a small floor proportional to the
shallow-water speed, so that smooth waves survive while fronts and near-dry
nodes get full first-order dissipation.  The sensor adds free-surface
curvature and relaxation disequilibrium |q1 - h^2|/h^2: off the q1 = h^2
manifold the stiff pressure waves are physically present and the full bound
is the correct viscosity scale, while smooth on-manifold transport rides on
the floor alone.
"""

import numba as nb
import numpy as np

from .physics import (DRY_FRACTION, PhysParams, State, energy_density,
                      relaxed_pressure_tilde, source_s, source_ts, velocity,
                      wave_speed)

# Graph-viscosity limiter constants, calibrated on the solitary-decay,
# energy-monotonicity and reflected-amplitude checks in the test suite.
# VISC_DISEQ_SCALE is the |q1 - h^2|/h^2 level that saturates the sensor;
# traveling waves ride near 3e-4 while unstable through-flow ringing
# carries 1e-2, so the threshold separates them by a wide margin.
# VISC_FOURTH scales a fourth-difference dissipation that damps grid-scale
# waves at the full wave-speed bound while falling off as (k dx)^4 for
# resolved scales; through-flow equilibria shed a band of 3 dx modes in
# (q, q2) that grow at ~9/s if nothing acts at that scale.
# VISC_SENSOR_GAIN trades front protection against smooth-flow accuracy;
# 0.5 keeps bores monotone while the through-flow convergence constant
# stays inside the validation band (2.0 inflates it ~1.8x).
# VISC_FLOOR sets the always-on fraction of shallow-water dissipation;
# 0.012 flattens the coarse-mesh refinement slopes into the expected
# first-order band at the cost of 1.1% solitary-amplitude decay over
# 40 depths of travel (the budget allows 3%).
VISC_SENSOR_GAIN = 0.5
VISC_FLOOR = 0.012
VISC_DISEQ_SCALE = 0.02
VISC_FOURTH = 0.03125
SENSOR_DEPTH_FLOOR = 0.01
# Below this depth fraction an edge is treated as a wetting front: the
# sensor is bypassed in favor of the full wave-speed viscosity (the
# positivity bound) and the fourth-difference term, which is not
# sign-stable, is switched off.  Every benchmark's permanently wet regions
# sit above 0.15 h_ref, so only genuine run-up tongues cross this line.
WETDRY_VISC_FRACTION = 0.05

# Per-stage abort codes returned by the stepping kernels.
ABORT_NONE = 0
ABORT_NEGATIVE_H = 1
ABORT_NAN = 2

# rows of the work array W; rows _D1.._D5 hold per-edge jumps of the
# star variables (column e = edge between nodes e and e+1)
(_V, _H, _OM, _BE, _DQ1, _F2, _F3, _F4, _F5, _SENS,
 _D1, _D2, _D3, _D4, _D5, _LE) = range(16)


@nb.njit(cache=True)
def assemble_residual(U, z, dzdx, m, eps, g, lam, h_ref, incomplete,
                      visc_gain, visc_floor, visc_diseq, W, R):
    n = U.shape[1]
    h_dry = DRY_FRACTION * h_ref
    h_front = WETDRY_VISC_FRACTION * h_ref

    # node pass: primitives, advective fluxes, nodal sources
    for i in range(n):
        s = State(U[0, i], U[1, i], U[2, i], U[3, i], U[4, i])
        p = PhysParams(g, lam, h_ref, eps[i])
        W[_H, i] = s.h + z[i]
        if s.h <= h_dry:
            W[_V, i] = 0.0
            W[_OM, i] = 0.0
            W[_BE, i] = 0.0
            W[_DQ1, i] = 0.0
            W[_F2, i] = 0.0
            W[_F3, i] = 0.0
            W[_F4, i] = 0.0
            W[_F5, i] = 0.0
            R[0, i] = 0.0
            R[1, i] = 0.0
            R[2, i] = 0.0
            R[3, i] = 0.0
            R[4, i] = 0.0
            continue
        v = velocity(s.h, s.q, p)
        W[_V, i] = v
        W[_OM, i] = s.q2 / s.h
        W[_BE, i] = s.q3 / s.h
        W[_DQ1, i] = s.q1 - s.h * s.h
        # momentum flux carries only the advective and non-hydrostatic parts;
        # the hydrostatic part is assembled pre-balanced below
        W[_F2, i] = v * s.q + relaxed_pressure_tilde(s, p)
        W[_F3, i] = v * s.q1
        W[_F4, i] = v * s.q2
        W[_F5, i] = v * s.q3
        s_val = source_s(s, p)
        R[0, i] = 0.0
        if incomplete:
            # the bed-slope part of the momentum source is pre-balanced away
            R[1, i] = 0.0
            R[2, i] = m[i] * s.q2
            R[4, i] = 0.0
        else:
            ts_val = source_ts(s, dzdx[i], p)
            R[1, i] = m[i] * (0.5 * s_val - 0.25 * ts_val) * dzdx[i]
            R[2, i] = m[i] * (s.q2 - 1.5 * s.q * dzdx[i])
            R[4, i] = m[i] * ts_val
        R[3, i] = -m[i] * s_val

    # free-surface curvature plus relaxation-disequilibrium sensor
    for i in range(1, n - 1):
        curv = abs(W[_H, i + 1] - 2.0 * W[_H, i] + W[_H, i - 1])
        scale = max(U[0, i], SENSOR_DEPTH_FLOOR * h_ref)
        nu = curv / scale + abs(W[_DQ1, i]) / (scale * scale * visc_diseq)
        W[_SENS, i] = nu if nu < 1.0 else 1.0
    W[_SENS, 0] = W[_SENS, 1]
    W[_SENS, n - 1] = W[_SENS, n - 2]

    # edge pre-pass: star-variable jumps and the wave-speed bound per edge
    for e in range(n - 1):
        i = e
        j = e + 1
        zmax = z[i] if z[i] > z[j] else z[j]
        hsi = max(0.0, W[_H, i] - zmax)
        hsj = max(0.0, W[_H, j] - zmax)
        W[_D1, e] = hsj - hsi
        W[_D2, e] = hsj * W[_V, j] - hsi * W[_V, i]
        W[_D3, e] = (hsj * hsj + W[_DQ1, j]) - (hsi * hsi + W[_DQ1, i])
        W[_D4, e] = hsj * W[_OM, j] - hsi * W[_OM, i]
        W[_D5, e] = hsj * W[_BE, j] - hsi * W[_BE, i]
        si = State(U[0, i], U[1, i], U[2, i], U[3, i], U[4, i])
        sj = State(U[0, j], U[1, j], U[2, j], U[3, j], U[4, j])
        li = wave_speed(si, PhysParams(g, lam, h_ref, eps[i]))
        lj = wave_speed(sj, PhysParams(g, lam, h_ref, eps[j]))
        W[_LE, e] = li if li > lj else lj

    # edge pass: central fluxes, pre-balanced hydrostatic term, viscosity
    for e in range(n - 1):
        i = e
        j = e + 1

        # stencil wetness picks the front treatment below: a wetting-front
        # edge takes the star-height mass flux and the full wave-speed
        # viscosity (together they bound the depth update away from
        # negative), and the fourth-difference term stays off across it
        em = e - 1 if e > 0 else 0
        ep = e + 1 if e < n - 2 else n - 2
        allwet = True
        for kk in range(em, ep + 2):
            if U[0, kk] <= h_front:
                allwet = False
                break

        if allwet:
            gm = 0.5 * (U[1, i] + U[1, j])
        else:
            # the plain average of q drains a thin node faster than the
            # star-height viscosity can refill it on a steep slope; pairing
            # the flux with the same star heights restores the bound
            zmax = z[i] if z[i] > z[j] else z[j]
            hsi = max(0.0, W[_H, i] - zmax)
            hsj = max(0.0, W[_H, j] - zmax)
            gm = 0.5 * (hsi * W[_V, i] + hsj * W[_V, j])
        g2 = 0.5 * (W[_F2, i] + W[_F2, j])
        g3 = 0.5 * (W[_F3, i] + W[_F3, j])
        g4 = 0.5 * (W[_F4, i] + W[_F4, j])
        g5 = 0.5 * (W[_F5, i] + W[_F5, j])
        R[0, i] -= gm
        R[0, j] += gm
        R[1, i] -= g2
        R[1, j] += g2
        R[2, i] -= g3
        R[2, j] += g3
        R[3, i] -= g4
        R[3, j] += g4
        R[4, i] -= g5
        R[4, j] += g5

        dstar = W[_D1, e]
        R[1, i] -= 0.5 * g * U[0, i] * dstar
        R[1, j] -= 0.5 * g * U[0, j] * dstar

        lam_edge = W[_LE, e]
        if allwet:
            swi = abs(W[_V, i]) + np.sqrt(g * max(U[0, i], 0.0))
            swj = abs(W[_V, j]) + np.sqrt(g * max(U[0, j], 0.0))
            lam_sw = swi if swi > swj else swj
            nu = W[_SENS, i] if W[_SENS, i] > W[_SENS, j] else W[_SENS, j]
            lam_visc = visc_gain * nu * lam_edge + visc_floor * lam_sw
            if lam_visc > lam_edge:
                lam_visc = lam_edge
        else:
            lam_visc = lam_edge
        d_e = 0.5 * lam_visc

        R[0, i] += d_e * W[_D1, e]
        R[0, j] -= d_e * W[_D1, e]
        R[1, i] += d_e * W[_D2, e]
        R[1, j] -= d_e * W[_D2, e]
        R[2, i] += d_e * W[_D3, e]
        R[2, j] -= d_e * W[_D3, e]
        R[3, i] += d_e * W[_D4, e]
        R[3, j] -= d_e * W[_D4, e]
        R[4, i] += d_e * W[_D5, e]
        R[4, j] -= d_e * W[_D5, e]

        # fourth-difference dissipation: effective diffusion
        # eps4 * lam * (2 - 2 cos k dx), full strength on grid-scale modes,
        # O((k dx)^4) on resolved ones; away from wetting fronts only
        if allwet:
            c4 = VISC_FOURTH * lam_edge
            f1 = c4 * (2.0 * W[_D1, e] - W[_D1, em] - W[_D1, ep])
            f2 = c4 * (2.0 * W[_D2, e] - W[_D2, em] - W[_D2, ep])
            f3 = c4 * (2.0 * W[_D3, e] - W[_D3, em] - W[_D3, ep])
            f4 = c4 * (2.0 * W[_D4, e] - W[_D4, em] - W[_D4, ep])
            f5 = c4 * (2.0 * W[_D5, e] - W[_D5, em] - W[_D5, ep])
            R[0, i] += f1
            R[0, j] -= f1
            R[1, i] += f2
            R[1, j] -= f2
            R[2, i] += f3
            R[2, j] -= f3
            R[3, i] += f4
            R[3, j] -= f4
            R[4, i] += f5
            R[4, j] -= f5

    # boundary closure of the one-sided stencils: own-flux terms
    R[0, 0] += U[1, 0]
    R[1, 0] += W[_F2, 0]
    R[2, 0] += W[_F3, 0]
    R[3, 0] += W[_F4, 0]
    R[4, 0] += W[_F5, 0]
    last = n - 1
    R[0, last] -= U[1, last]
    R[1, last] -= W[_F2, last]
    R[2, last] -= W[_F3, last]
    R[3, last] -= W[_F4, last]
    R[4, last] -= W[_F5, last]


@nb.njit(cache=True)
def max_speed(U, eps, g, lam, h_ref):
    n = U.shape[1]
    top = 0.0
    for i in range(n):
        s = State(U[0, i], U[1, i], U[2, i], U[3, i], U[4, i])
        c = wave_speed(s, PhysParams(g, lam, h_ref, eps[i]))
        if c > top:
            top = c
    return top


@nb.njit(cache=True)
def compute_dt_kernel(U, eps, m_min, cfl, g, lam, h_ref):
    top = max_speed(U, eps, g, lam, h_ref)
    if top <= 0.0:
        return cfl * m_min / np.sqrt(g * h_ref)
    return cfl * m_min / (2.0 * top)


@nb.njit(cache=True)
def combine_stage(a_coef, A, B, R, dt, m, h_ref, out):
    """out = a*A + (1-a)*(B + dt*R/m); returns (abort_code, node).

    Written in increment form, out = b + a*(A - b), so that a stationary
    state (A == b, zero residual) reproduces itself bit for bit.
    """
    n = A.shape[1]
    floor = -1e-14 * h_ref
    code = ABORT_NONE
    node = -1
    for i in range(n):
        for k in range(5):
            b = B[k, i] + dt * R[k, i] / m[i]
            out[k, i] = b + a_coef * (A[k, i] - b)
        h = out[0, i]
        if not (h == h):
            code = ABORT_NAN
            node = i
        elif h < floor and code == ABORT_NONE:
            code = ABORT_NEGATIVE_H
            node = i
    return code, node


@nb.njit(cache=True)
def apply_stage_postfix(U, t_stage, dt, x, z, h_ref,
                        bc_left_wall, bcl, bc_right_wall, bcr,
                        sigma_abs, ref_abs, tau_abs,
                        sigma_gen, gen_a, gen_k, gen_sigma, gen_h0, tau_gen):
    """Boundary conditions, sponge blending and the dry-state invariant.

    bcl/bcr are 5-vectors of Dirichlet values (h, q, q1, q2, q3); a NaN
    entry leaves that component free.  Inflow nodes must pin the relaxation
    fields too (their characteristics enter the domain there).

    Absorption blends all five fields toward ref_abs, the (5, n) ambient
    state of the scenario, at rate sigma/tau.  A flowing ambient works the
    same as still water: whatever deviates from it gets drained.
    """
    n = U.shape[1]
    if bc_left_wall:
        U[1, 0] = 0.0
    else:
        for k in range(5):
            if bcl[k] == bcl[k]:
                U[k, 0] = bcl[k]
    if bc_right_wall:
        U[1, n - 1] = 0.0
    else:
        for k in range(5):
            if bcr[k] == bcr[k]:
                U[k, n - 1] = bcr[k]

    if tau_abs > 0.0:
        for i in range(n):
            sg = sigma_abs[i]
            if sg <= 0.0:
                continue
            w = sg * dt / tau_abs
            for k in range(5):
                U[k, i] += w * (ref_abs[k, i] - U[k, i])

    if tau_gen > 0.0:
        for i in range(n):
            sg = sigma_gen[i]
            if sg <= 0.0:
                continue
            w = sg * dt / tau_gen
            phase = gen_k * x[i] - gen_sigma * t_stage
            sn = np.sin(phase)
            ht = gen_h0 + gen_a * sn
            ut = (gen_a / gen_h0) * (gen_sigma / gen_k) * sn
            qt = ht * ut
            dudx = (gen_a / gen_h0) * gen_sigma * np.cos(phase)
            q2t = -ht * ht * dudx
            U[0, i] += w * (ht - U[0, i])
            U[1, i] += w * (qt - U[1, i])
            U[2, i] += w * (ht * ht - U[2, i])
            U[3, i] += w * (q2t - U[3, i])
            U[4, i] += w * (0.0 - U[4, i])

    h_dry = DRY_FRACTION * h_ref
    for i in range(n):
        h = U[0, i]
        if h <= h_dry:
            if h < 0.0:
                U[0, i] = 0.0
            U[1, i] = 0.0
            U[2, i] = 0.0
            U[3, i] = 0.0
            U[4, i] = 0.0


@nb.njit(cache=True)
def ssprk33_step(U, U1, U2, R, W, dt, t, x, z, dzdx, m, eps,
                 g, lam, h_ref, incomplete, visc_gain, visc_floor, visc_diseq,
                 bc_left_wall, bcl, bc_right_wall, bcr,
                 sigma_abs, ref_abs, tau_abs,
                 sigma_gen, gen_a, gen_k, gen_sigma, gen_h0, tau_gen):
    """One SSP RK(3,3) step; returns (abort_code, node)."""
    assemble_residual(U, z, dzdx, m, eps, g, lam, h_ref, incomplete,
                      visc_gain, visc_floor, visc_diseq, W, R)
    code, node = combine_stage(0.0, U, U, R, dt, m, h_ref, U1)
    if code != ABORT_NONE:
        return code, node
    apply_stage_postfix(U1, t + dt, dt, x, z, h_ref,
                        bc_left_wall, bcl, bc_right_wall, bcr,
                        sigma_abs, ref_abs, tau_abs,
                        sigma_gen, gen_a, gen_k, gen_sigma, gen_h0, tau_gen)

    assemble_residual(U1, z, dzdx, m, eps, g, lam, h_ref, incomplete,
                      visc_gain, visc_floor, visc_diseq, W, R)
    code, node = combine_stage(0.75, U, U1, R, dt, m, h_ref, U2)
    if code != ABORT_NONE:
        return code, node
    apply_stage_postfix(U2, t + 0.5 * dt, dt, x, z, h_ref,
                        bc_left_wall, bcl, bc_right_wall, bcr,
                        sigma_abs, ref_abs, tau_abs,
                        sigma_gen, gen_a, gen_k, gen_sigma, gen_h0, tau_gen)

    assemble_residual(U2, z, dzdx, m, eps, g, lam, h_ref, incomplete,
                      visc_gain, visc_floor, visc_diseq, W, R)
    code, node = combine_stage(1.0 / 3.0, U, U2, R, dt, m, h_ref, U)
    if code != ABORT_NONE:
        return code, node
    apply_stage_postfix(U, t + dt, dt, x, z, h_ref,
                        bc_left_wall, bcl, bc_right_wall, bcr,
                        sigma_abs, ref_abs, tau_abs,
                        sigma_gen, gen_a, gen_k, gen_sigma, gen_h0, tau_gen)
    return ABORT_NONE, -1


@nb.njit(cache=True)
def diagnostics_reduction(U, z, dzdx, m, eps, g, lam, h_ref):
    """(mass, energy, E3, E4) with fixed left-to-right summation order."""
    n = U.shape[1]
    mass = 0.0
    energy = 0.0
    e3_num = 0.0
    e3_den = 0.0
    e4_num = 0.0
    e4_den = 0.0
    for i in range(n):
        s = State(U[0, i], U[1, i], U[2, i], U[3, i], U[4, i])
        p = PhysParams(g, lam, h_ref, eps[i])
        mass += m[i] * s.h
        energy += m[i] * energy_density(s, z[i], p)
        e3_num += m[i] * abs(s.h * s.h - s.q1)
        e3_den += m[i] * abs(s.q1)
        slope_flux = s.q * dzdx[i]
        e4_num += m[i] * abs(slope_flux - s.q3)
        e4_den += m[i] * abs(slope_flux)
    e3 = e3_num / e3_den if e3_den > 0.0 else np.nan
    e4 = e4_num / e4_den if e4_den > 0.0 else np.nan
    return mass, energy, e3, e4


@nb.njit(cache=True)
def advance_chunk(U, U1, U2, R, W, x, z, dzdx, m, eps, m_min,
                  g, lam, h_ref, incomplete, visc_gain, visc_floor, visc_diseq,
                  bc_left_wall, bcl, bc_right_wall, bcr,
                  sigma_abs, ref_abs, tau_abs,
                  sigma_gen, gen_a, gen_k, gen_sigma, gen_h0, tau_gen,
                  cfl, t, t_stop, t_final, max_steps, record_diag, diag):
    """Step until t >= t_stop, t reaches t_final, or max_steps is hit.

    dt is clipped only at t_final.  When record_diag every step appends
    (t_end, dt, mass, energy, E3, E4) to diag.  Returns
    (steps, t_new, abort_code, abort_node).
    """
    steps = 0
    code = ABORT_NONE
    node = -1
    while t < t_stop and steps < max_steps:
        dt = compute_dt_kernel(U, eps, m_min, cfl, g, lam, h_ref)
        if t + dt > t_final:
            dt = t_final - t
        if dt <= 0.0:
            break
        code, node = ssprk33_step(
            U, U1, U2, R, W, dt, t, x, z, dzdx, m, eps,
            g, lam, h_ref, incomplete, visc_gain, visc_floor, visc_diseq,
            bc_left_wall, bcl, bc_right_wall, bcr,
            sigma_abs, ref_abs, tau_abs,
            sigma_gen, gen_a, gen_k, gen_sigma, gen_h0, tau_gen)
        if code != ABORT_NONE:
            return steps, t, code, node
        t += dt
        if record_diag:
            mass, energy, e3, e4 = diagnostics_reduction(
                U, z, dzdx, m, eps, g, lam, h_ref)
            diag[steps, 0] = t
            diag[steps, 1] = dt
            diag[steps, 2] = mass
            diag[steps, 3] = energy
            diag[steps, 4] = e3
            diag[steps, 5] = e4
        steps += 1
    return steps, t, code, node


@nb.njit(cache=True)
def energy_field(U, z, eps, g, lam, h_ref, out):
    n = U.shape[1]
    for i in range(n):
        s = State(U[0, i], U[1, i], U[2, i], U[3, i], U[4, i])
        out[i] = energy_density(s, z[i], PhysParams(g, lam, h_ref, eps[i]))
