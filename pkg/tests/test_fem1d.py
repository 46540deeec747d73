"""Mesh, assembly wrappers, time stepping, boundaries, sponges, run loop."""

import math
from dataclasses import replace

import numpy as np
import pytest

from serre1d import analytic, fem1d, kernels
from serre1d.analytic import SolitaryParams, smoothing_constant
from serre1d.fem1d import (WALL, BoundarySide, BoundarySpec, LakeAtRest,
                           Mesh1D, ScenarioConfig, SimulationError,
                           SpongeZone, TimeControls, apply_boundaries,
                           apply_sponges, compute_dt, initial_state, run,
                           spatial_residual, sponge_ramp, step_ssprk33,
                           uniform_mesh)
from serre1d.physics import ModelVariant


def lake_config(n_elements, surface=0.15, t_final=1.0, cfl=0.4):
    return ScenarioConfig(
        name="lake",
        variant=ModelVariant.FULL,
        domain=(-20.0, 20.0),
        n_elements=n_elements,
        bathymetry="smoothed-triangle",
        bathymetry_params={"h0": 0.125, "d": smoothing_constant(0.125, 40.0)},
        initial=LakeAtRest(surface),
        boundary=BoundarySpec(WALL, WALL),
        time=TimeControls(cfl=cfl, t_final=t_final),
        h_ref=0.125,
        still_surface=surface,
    )


def solitary_config(n_elements, t_final, cfl=0.4, domain=(-10.0, 30.0),
                    x0=0.0, sponges=()):
    return ScenarioConfig(
        name="solitary",
        variant=ModelVariant.FULL,
        domain=domain,
        n_elements=n_elements,
        bathymetry="flat",
        bathymetry_params={},
        initial=SolitaryParams(h0=0.25, alpha=0.05, x0=x0),
        boundary=BoundarySpec(WALL, WALL),
        sponges=sponges,
        time=TimeControls(cfl=cfl, t_final=t_final),
        h_ref=0.25,
        still_surface=0.25,
    )


def assembled(config):
    mesh = uniform_mesh(config.domain[0], config.domain[1], config.n_elements)
    profile = fem1d.build_profile(config)
    z, dzdx = analytic.bathymetry_eval(profile, mesh.nodes)
    U = initial_state(config, mesh.nodes, z, dzdx)
    return mesh, z, dzdx, U


class TestMesh:
    def test_lumped_measures(self):
        mesh = uniform_mesh(0.0, 1.0, 10)
        assert mesh.nodes.shape == (11,)
        assert mesh.m[0] == pytest.approx(0.05)
        assert mesh.m[-1] == pytest.approx(0.05)
        assert np.all(mesh.m[1:-1] == pytest.approx(0.1))
        assert mesh.m.sum() == pytest.approx(1.0, rel=1e-14)

    def test_relaxation_length_tracks_measure(self):
        mesh = uniform_mesh(-3.0, 5.0, 64)
        assert np.array_equal(mesh.eps, fem1d.RELAX_EPS_FACTOR * mesh.m)


class TestSpatialResidual:
    def test_lake_at_rest_is_exactly_zero(self):
        config = lake_config(200)
        mesh, z, dzdx, U = assembled(config)
        R = spatial_residual(U, mesh, z, dzdx, config)
        assert np.all(R == 0.0)

    def test_uniform_flow_on_flat_bottom_is_zero(self):
        config = solitary_config(100, t_final=1.0)
        mesh, z, dzdx, _ = assembled(config)
        n = mesh.nodes.shape[0]
        U = np.empty((5, n))
        U[0] = 0.7
        U[1] = 0.3
        U[2] = 0.7 * 0.7
        U[3] = 0.0
        U[4] = 0.0
        R = spatial_residual(U, mesh, z, dzdx, config)
        assert np.abs(R).max() <= 1e-14

    def test_mass_rate_telescopes_to_zero(self):
        # motionless compact hump: the mass flux vanishes at both ends, so
        # the weighted rates must cancel pairwise up to roundoff
        config = solitary_config(200, t_final=1.0)
        mesh, z, dzdx, _ = assembled(config)
        x = mesh.nodes
        U = np.zeros((5, x.shape[0]))
        U[0] = 0.25 + 0.05 * np.exp(-x * x)
        U[2] = U[0] * U[0]
        R = spatial_residual(U, mesh, z, dzdx, config)
        total = float(np.dot(mesh.m, R[0]))
        scale = float(np.dot(mesh.m, np.abs(R[0]))) + 1e-30
        assert abs(total) <= 1e-13 * scale

    def test_nonfinite_state_is_fatal(self):
        config = solitary_config(50, t_final=1.0)
        mesh, z, dzdx, U = assembled(config)
        U[1, 7] = math.nan
        with pytest.raises(ValueError, match="non-finite state at node 7"):
            spatial_residual(U, mesh, z, dzdx, config)

    def test_negative_height_is_fatal(self):
        config = solitary_config(50, t_final=1.0)
        mesh, z, dzdx, U = assembled(config)
        U[0, 3] = -1e-6
        with pytest.raises(ValueError, match="negative water height at node 3"):
            spatial_residual(U, mesh, z, dzdx, config)


class TestTimeStepping:
    def test_zero_rate_is_bitwise_identity(self):
        rng = np.random.default_rng(5)
        U = rng.uniform(0.5, 2.0, size=(5, 40))
        out = step_ssprk33(U, 0.01, lambda V: np.zeros_like(V))
        assert np.array_equal(out, U)

    def test_lake_at_rest_step_is_bitwise_identity(self):
        config = lake_config(200)
        mesh, z, dzdx, U = assembled(config)
        rate = lambda V: spatial_residual(V, mesh, z, dzdx, config)
        out = step_ssprk33(U.copy(), compute_dt(U, mesh, 0.4), rate,
                           h_ref=config.h_ref)
        assert np.array_equal(out, U)

    def test_third_order_on_decay_ode(self):
        exact = math.exp(-2.0)
        errors = []
        for steps in (4, 8, 16, 32):
            dt = 1.0 / steps
            u = np.ones((5, 1))
            for _ in range(steps):
                u = step_ssprk33(u, dt, lambda V: -2.0 * V)
            errors.append(abs(u[0, 0] - exact))
        rates = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
        assert all(2.7 < r < 3.3 for r in rates)

    def test_negative_stage_height_aborts(self):
        U = np.ones((5, 8))
        U[0] = 1e-3
        with pytest.raises(SimulationError, match="CFL too large"):
            step_ssprk33(U, 1.0, lambda V: -np.ones_like(V))


class TestTimeStepSize:
    def make_mesh(self, m_value, eps_value, n=11):
        m = np.full(n, m_value)
        return Mesh1D(nodes=np.linspace(0, 1, n), n_elements=n - 1, m=m,
                      eps=np.full(n, eps_value))

    def rest_state(self, n=11):
        U = np.zeros((5, n))
        U[0] = 1.0
        U[2] = 1.0
        return U

    def test_rest_oracle(self):
        mesh = self.make_mesh(0.01, 1e30)
        dt = compute_dt(self.rest_state(), mesh, 0.1)
        assert dt == pytest.approx(0.1 * 0.01 / (2.0 * math.sqrt(9.81)),
                                   rel=1e-12)

    def test_scales_with_mesh(self):
        coarse = compute_dt(self.rest_state(), self.make_mesh(0.02, 1e30), 0.1)
        fine = compute_dt(self.rest_state(), self.make_mesh(0.01, 1e30), 0.1)
        assert coarse == pytest.approx(2.0 * fine, rel=1e-12)

    def test_shrinks_with_relaxation_length(self):
        soft = compute_dt(self.rest_state(), self.make_mesh(0.01, 1.0), 0.1)
        stiff = compute_dt(self.rest_state(), self.make_mesh(0.01, 1e-4), 0.1)
        assert stiff < soft


class TestBoundaries:
    def test_wall_zeroes_discharge_only(self):
        rng = np.random.default_rng(11)
        U = rng.uniform(0.5, 2.0, size=(5, 20))
        before = U.copy()
        apply_boundaries(U, BoundarySpec(WALL, WALL))
        assert U[1, 0] == 0.0 and U[1, -1] == 0.0
        interior = before[:, 1:-1]
        assert np.array_equal(U[:, 1:-1], interior)
        assert np.array_equal(U[[0, 2, 3, 4], :], before[[0, 2, 3, 4], :])

    def test_dirichlet_pins_only_requested_fields(self):
        rng = np.random.default_rng(12)
        U = rng.uniform(0.5, 2.0, size=(5, 10))
        before = U.copy()
        left = BoundarySide(kind="dirichlet", h=1.5, q=0.25)
        apply_boundaries(U, BoundarySpec(left, WALL))
        assert U[0, 0] == 1.5 and U[1, 0] == 0.25
        assert np.array_equal(U[2:, 0], before[2:, 0])

    def test_matching_dirichlet_is_identity(self):
        config = lake_config(50)
        _, _, _, U = assembled(config)
        side = BoundarySide(kind="dirichlet", h=U[0, 0], q=0.0,
                            q1=U[2, 0], q2=0.0, q3=0.0)
        before = U.copy()
        apply_boundaries(U, BoundarySpec(side, WALL))
        assert np.array_equal(U, before)

    def test_unknown_kind_raises(self):
        U = np.ones((5, 4))
        bad = BoundarySpec(BoundarySide(kind="open"), WALL)
        with pytest.raises(ValueError, match="unknown boundary kind"):
            apply_boundaries(U, bad)


class TestSponges:
    def test_ramp_profile_outer_right(self):
        zone = SpongeZone(15.0, 20.0, kind="absorption", outer="right")
        x = np.array([14.0, 15.0, 17.5, 20.0, 21.0])
        sigma = sponge_ramp(x, zone)
        assert sigma == pytest.approx([0.0, 0.0, 0.125, 1.0, 1.0])

    def test_ramp_profile_outer_left(self):
        zone = SpongeZone(-10.0, -5.0, kind="absorption", outer="left")
        x = np.array([-10.0, -7.5, -5.0, 0.0])
        sigma = sponge_ramp(x, zone)
        assert sigma == pytest.approx([1.0, 0.125, 0.0, 0.0])

    def test_still_water_is_fixed_point(self):
        config = lake_config(100)
        mesh, z, _, U = assembled(config)
        zones = (SpongeZone(10.0, 20.0, kind="absorption", outer="right"),)
        before = U.copy()
        apply_sponges(U, mesh.nodes, z, zones, 1e-2, 0.0, config, tau=1e-3)
        assert np.array_equal(U, before)

    def test_unknown_kind_raises(self):
        config = lake_config(10)
        mesh, z, _, U = assembled(config)
        zones = (SpongeZone(0.0, 20.0, kind="teleport", outer="right"),)
        with pytest.raises(ValueError, match="unknown sponge kind"):
            apply_sponges(U, mesh.nodes, z, zones, 1e-2, 0.0, config, tau=1.0)

    def test_absorption_zone_swallows_outgoing_wave(self):
        zone = SpongeZone(15.0, 20.0, kind="absorption", outer="right")
        config = solitary_config(400, t_final=14.0, domain=(0.0, 20.0),
                                 x0=5.0, sponges=(zone,))
        record = run(config)
        h = record.final_state[0]
        interior = record.x < 15.0
        residual = np.abs(h[interior] - 0.25).max()
        assert residual <= 0.01 * 0.05

    def test_generation_zone_reaches_target_amplitude(self):
        zone = SpongeZone(0.0, 4.0, kind="generation", outer="left",
                          amplitude=0.01, period=2.01975)
        config = ScenarioConfig(
            name="gen",
            variant=ModelVariant.FULL,
            domain=(0.0, 20.0),
            n_elements=400,
            bathymetry="flat",
            bathymetry_params={},
            initial=LakeAtRest(0.4),
            boundary=BoundarySpec(WALL, WALL),
            sponges=(zone,
                     SpongeZone(14.0, 20.0, kind="absorption", outer="right")),
            time=TimeControls(cfl=0.3, t_final=16.0, gauge_dt=0.02),
            gauges=(8.0,),
            h_ref=0.4,
            still_surface=0.4,
        )
        record = run(config)
        t, vals = record.gauge_series()
        late = vals[t > 10.0, 0] - 0.4
        assert late.max() == pytest.approx(0.01, rel=0.2)
        assert late.min() == pytest.approx(-0.01, rel=0.2)


class TestRunLoop:
    def test_zero_final_time_echoes_initial_state(self):
        config = solitary_config(64, t_final=0.0)
        record = run(config)
        mesh, _, _, U0 = assembled(config)
        assert record.steps == 0
        assert record.t_end == 0.0
        assert len(record.fields) == 1
        assert np.array_equal(record.final_state, U0)
        assert np.array_equal(record.x, mesh.nodes)

    def test_lake_stays_at_rest(self):
        config = lake_config(100)
        record = run(config)
        h, q = record.final_state[0], record.final_state[1]
        surface = h + record.z
        assert np.abs(surface - 0.15).max() <= 1e-13
        assert np.abs(q).max() <= 1e-13

    def test_wall_run_conserves_mass(self):
        config = solitary_config(200, t_final=2.0)
        record = run(config)
        diag = record.diagnostics_array()
        mass = diag[:, 2]
        assert np.abs(mass - mass[0]).max() <= 1e-12 * mass[0]

    def test_oversized_cfl_aborts(self):
        config = solitary_config(200, t_final=2.0, cfl=40.0)
        with pytest.raises(SimulationError, match="negative water height"):
            run(config)

    def test_unsupported_initial_condition(self):
        config = replace(solitary_config(16, t_final=0.0), initial=42)
        with pytest.raises(TypeError, match="unsupported initial condition"):
            run(config)

    def test_field_snapshot_cadence(self):
        config = replace(solitary_config(64, t_final=1.0),
                         time=TimeControls(cfl=0.4, t_final=1.0,
                                           fields_dt=0.25))
        record = run(config)
        times = np.asarray(record.field_times)
        assert times[0] == 0.0
        assert times[-1] == pytest.approx(record.t_end)
        for target in (0.25, 0.5, 0.75):
            assert np.abs(times - target).min() <= 0.25

    def test_gauge_sampling_grid_and_interpolation(self):
        config = replace(solitary_config(64, t_final=0.5),
                         gauges=(1.03, 4.0),
                         time=TimeControls(cfl=0.4, t_final=0.5,
                                           gauge_dt=0.1))
        record = run(config)
        t, vals = record.gauge_series()
        assert vals.shape[1] == 2
        assert t[0] == 0.0
        assert np.all(np.diff(t) > 0.0)
        assert np.abs(t - np.round(t / 0.1) * 0.1).max() <= 1e-12
        # the t=0 sample must be the linear interpolation of the nodal
        # initial surface between the bracketing mesh nodes
        p = SolitaryParams(h0=0.25, alpha=0.05, x0=0.0)
        h_nodes, _ = analytic.solitary_wave(record.x, 0.0, p)
        for col, xg in enumerate((1.03, 4.0)):
            i = int(np.searchsorted(record.x, xg))
            w = (xg - record.x[i - 1]) / (record.x[i] - record.x[i - 1])
            expected = (1.0 - w) * h_nodes[i - 1] + w * h_nodes[i]
            assert vals[0, col] == pytest.approx(expected, rel=1e-12)
