import io
import math
from dataclasses import replace

import numpy as np
import pytest

from hygrotherm import materials as mt
from hygrotherm import solver as sv
from hygrotherm.assembly import BoundaryConditions, Discretization, NodalState, assemble
from hygrotherm.mesh import BoundaryTag, build_structured_mesh
from hygrotherm.scenario import iso_fire_curve

FIRE, AMBIENT = BoundaryTag.FIRE, BoundaryTag.AMBIENT
MAT = mt.DEFAULT_MATERIAL
THETA0, P0 = 298.15, 2754.2


def ambient_bc(beta_c=0.019):
    return BoundaryConditions(lambda t: THETA0, lambda t: THETA0, lambda t: P0, beta_c=beta_c)


def fire_bc(curve=iso_fire_curve):
    return BoundaryConditions(curve, lambda t: THETA0, lambda t: P0)


def mesh(n, sides=(FIRE,) * 4, L=0.2):
    return build_structured_mesh(L, L, n, n, list(sides))


class TestConfig:
    def test_defaults(self):
        cfg = sv.SolverConfig()
        assert (cfg.dt, cfg.t_end, cfg.newton_tol, cfg.newton_max_iter) == (5.0, 3600.0, 1e-8, 15)
        assert cfg.n_steps == 720

    @pytest.mark.parametrize("kw", [{"dt": 0}, {"newton_tol": 0}, {"newton_max_iter": 0},
                                    {"relaxation": 0}, {"relaxation": 1.5}, {"t_end": -1},
                                    {"retry_halving": -1}])
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            sv.SolverConfig(**kw)


class TestInitialState:
    def test_uniform_on_isotherm(self):
        s = sv.initial_state(mesh(3), THETA0, P0)
        w = mt.sorption_isotherm(THETA0, P0)[0][0]
        np.testing.assert_array_equal(s.w, w)
        np.testing.assert_array_equal(s.theta, THETA0)
        np.testing.assert_array_equal(s.P, P0)

    def test_mesh_independent(self):
        a = sv.initial_state(mesh(2), THETA0, P0)
        b = sv.initial_state(mesh(5), THETA0, P0)
        assert a.w[0] == b.w[0] and a.theta[0] == b.theta[0]

    def test_rejects_non_positive_temperature(self):
        with pytest.raises(ValueError):
            sv.initial_state(mesh(1), 0.0, P0)


class TestStepResidual:
    @pytest.fixture()
    def ambient(self):
        m = mesh(4, (AMBIENT,) * 4)
        disc = Discretization(m)
        s = sv.initial_state(m, THETA0, P0)
        return s, assemble(disc, s, 5.0, 5.0, ambient_bc(), MAT)

    def test_fixed_point(self, ambient):
        s, sys = ambient
        assert np.abs(sv.step_residual(s, s, sys)).max() < 1e-10

    def test_affine_in_load(self, ambient):
        s, sys = ambient
        X = s.vector() * 1.01
        doubled = replace(sys, Fw=2 * sys.Fw, Ft=2 * sys.Ft)
        diff = sv.step_residual(X, s.vector(), doubled) - sv.step_residual(X, s.vector(), sys)
        np.testing.assert_allclose(diff, -sys.F, rtol=1e-12, atol=1e-12 * np.abs(sys.F).max())

    def test_non_finite_is_located(self, ambient):
        s, sys = ambient
        X = s.vector()
        X[s.n_nodes + 3] = np.nan
        with pytest.raises(sv.NonFiniteResidual, match="theta at node 3"):
            sv.step_residual(X, s.vector(), sys)

    def test_size_mismatch(self, ambient):
        s, sys = ambient
        with pytest.raises(ValueError):
            sv.step_residual(s.vector()[:-3], s.vector()[:-3], sys)


class TestNewton:
    def test_fixed_point_takes_one_iteration(self):
        m = mesh(3, (AMBIENT,) * 4)
        s = sv.initial_state(m, THETA0, P0)
        sys = assemble(Discretization(m), s, 5.0, 5.0, ambient_bc(), MAT)
        res = sv.newton_solve(s, sys, sv.SolverConfig())
        assert res.iterations == 1
        np.testing.assert_array_equal(res.state.vector(), s.vector())

    @pytest.fixture(scope="class")
    @classmethod
    def hot_step(cls):
        """A step of a heated column, started from a state where every law is active."""
        m = mesh(6)
        bc = fire_bc(lambda t: 1100.0)
        cfg = sv.SolverConfig(dt=5.0, t_end=300.0)
        traj = sv.run(m, MAT, bc, cfg, sv.initial_state(m, THETA0, P0))
        disc = Discretization(m)
        sys = assemble(disc, traj.states[-1], 305.0, 5.0, bc, MAT)
        return traj.states[-1], sys

    def test_converges_within_limit(self, hot_step):
        state, sys = hot_step
        res = sv.newton_solve(state, sys, sv.SolverConfig())
        assert res.residual <= 1e-8 and res.iterations <= 10

    def test_quadratic_convergence(self, hot_step):
        state, sys = hot_step
        root = sv.newton_solve(state, sys, sv.SolverConfig(newton_tol=1e-12, newton_max_iter=30)).state.vector()
        n = sys.n_nodes
        scale = np.concatenate([np.full(n, 100.0), np.full(n, 1000.0), np.maximum(np.abs(root[2 * n:]), 1e3)])
        rng = np.random.default_rng(4)
        X = root * (1 + 2e-3 * rng.standard_normal(root.size))
        Xn = state.vector()
        errors = []
        for _ in range(6):
            errors.append(np.abs((X - root) / scale).max())
            if errors[-1] < 1e-11:
                break
            X = X + sv.newton_update(sys, X, sv.step_residual(X, Xn, sys))
        e = np.array(errors)
        e = e[e > 1e-11]
        assert e.size >= 3
        slopes = np.diff(np.log(e[1:])) / np.diff(np.log(e[:-1]))
        assert slopes.max() >= 1.8

    def test_failure_carries_residual(self, hot_step):
        state, sys = hot_step
        with pytest.raises(sv.NewtonFailure) as info:
            sv.newton_solve(state, sys, sv.SolverConfig(newton_max_iter=1))
        assert info.value.residual > 1e-8 and math.isfinite(info.value.residual)

    def test_rejects_non_positive_temperature(self, hot_step):
        state, sys = hot_step
        bad = state.copy()
        bad.theta[0] = -1.0
        with pytest.raises(ValueError):
            sv.newton_solve(bad, sys, sv.SolverConfig())


class TestChop:
    def test_pressure_positivity(self):
        X_old = np.array([50.0, 400.0, 1e5])
        X_new = np.array([50.0, 400.0, -3e4])
        assert sv.chop_update(X_old, X_new)[2] == pytest.approx(1e4)

    def test_stops_past_breakpoint(self):
        theta = 400.0
        psat = mt.saturation_pressure(theta)[0]
        X_old = np.array([50.0, theta, 0.5 * psat])
        X_new = np.array([50.0, theta, 1.5 * psat])
        rh = sv.chop_update(X_old, X_new)[2] / psat
        assert rh == pytest.approx(mt.RH_DRY_LIMIT + 1e-6, abs=1e-12)

    def test_leaves_small_updates(self):
        theta = 400.0
        psat = mt.saturation_pressure(theta)[0]
        X_old = np.array([50.0, theta, 0.5 * psat])
        X_new = np.array([51.0, theta + 1.0, 0.6 * psat])
        np.testing.assert_array_equal(sv.chop_update(X_old, X_new), X_new)


class TestRun:
    def test_fixed_point_preserved(self):
        m = mesh(4, (AMBIENT,) * 4)
        s0 = sv.initial_state(m, THETA0, P0)
        traj = sv.run(m, MAT, ambient_bc(), sv.SolverConfig(dt=5.0, t_end=100.0), s0, snapshot_every=25.0)
        assert traj.times == [0.0, 25.0, 50.0, 75.0, 100.0]
        for s in traj.states:
            np.testing.assert_allclose(s.vector(), s0.vector(), rtol=1e-10)
        assert all(d.iterations == 1 for d in traj.diagnostics)

    def test_diagnostics_stream(self):
        m = mesh(2)
        out = io.StringIO()
        sv.run(m, MAT, fire_bc(), sv.SolverConfig(dt=5.0, t_end=20.0), sv.initial_state(m, THETA0, P0),
               diagnostics=out)
        lines = out.getvalue().splitlines()
        assert len(lines) == 4
        fields = lines[-1].split("\t")
        assert fields[0] == "4" and float(fields[1]) == 20.0 and int(fields[2]) >= 1
        assert float(fields[3]) <= 1e-8

    def test_partial_trajectory_on_failure(self):
        m = mesh(2)
        cfg = sv.SolverConfig(dt=5.0, t_end=50.0, newton_max_iter=1)
        with pytest.raises(sv.StepFailure) as info:
            sv.run(m, MAT, fire_bc(), cfg, sv.initial_state(m, THETA0, P0))
        assert info.value.step == 1 and info.value.time == 5.0
        assert info.value.trajectory.times == [0.0]
        assert isinstance(info.value.cause, sv.NewtonFailure)

    def test_retry_halving(self, monkeypatch):
        real = sv.newton_solve

        def picky(X_n, sys, cfg, guess=None):
            if sys.dt > 4.0:
                raise sv.NewtonFailure("refused", residual=1.0, iterations=1)
            return real(X_n, sys, cfg, guess)

        monkeypatch.setattr(sv, "newton_solve", picky)
        m = mesh(2)
        s0 = sv.initial_state(m, THETA0, P0)
        with pytest.raises(sv.StepFailure):
            sv.run(m, MAT, fire_bc(), sv.SolverConfig(dt=5.0, t_end=5.0), s0)
        traj = sv.run(m, MAT, fire_bc(), sv.SolverConfig(dt=5.0, t_end=5.0, retry_halving=1), s0)
        halves = sv.run(m, MAT, fire_bc(), sv.SolverConfig(dt=2.5, t_end=5.0), s0)
        np.testing.assert_array_equal(traj.states[-1].vector(), halves.states[-1].vector())
        assert traj.diagnostics[0].iterations == sum(d.iterations for d in halves.diagnostics)

    def test_monotone_surface_heating(self):
        m = mesh(8)
        traj = sv.run(m, MAT, fire_bc(), sv.SolverConfig(dt=5.0, t_end=3600.0),
                      sv.initial_state(m, THETA0, P0), snapshot_every=300.0)
        surface = np.isclose(m.nodes[:, 0], 0.0)
        temps = np.array([s.theta[surface] for s in traj.states])
        assert np.all(np.diff(temps, axis=0) > 0)


class TestTrajectory:
    def test_times_strictly_increase(self):
        tr = sv.Trajectory()
        s = NodalState(np.zeros(1), np.ones(1), np.zeros(1))
        tr.append(0.0, s)
        tr.append(5.0, s)
        with pytest.raises(ValueError):
            tr.append(5.0, s)
        assert len(tr) == 2 and tr.at(4.0) is tr.states[1]

    def test_snapshots_are_copies(self):
        tr = sv.Trajectory()
        s = NodalState(np.zeros(1), np.ones(1), np.zeros(1))
        tr.append(0.0, s)
        s.theta[0] = 7.0
        assert tr.states[0].theta[0] == 1.0
