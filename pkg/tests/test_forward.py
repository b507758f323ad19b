import numpy as np
import pytest

from pme_inverse import (
    ForwardConfig,
    ScalarField,
    advance_step,
    assemble_lumped_mass,
    assemble_stiffness,
    build_unit_square_mesh,
    initial_field,
    separation_solution,
    solve_forward,
    solve_profile,
)
from pme_inverse.forward import parse_u0_spec
from pme_inverse.io import write_field


class TestInitialField:
    def test_poly_bump_center(self):
        mesh = build_unit_square_mesh(10)
        u0 = initial_field(mesh, "poly_bump(10)")
        assert u0.values[mesh.node_index(5, 5)] == pytest.approx(0.625, rel=1e-15)
        assert np.all(u0.values[mesh.boundary_mask] == 0)
        assert np.all(u0.values >= 0)

    def test_scaled_profile_tau_one_is_profile(self, mesh10, profile2_n10):
        u0 = initial_field(mesh10, "scaled_profile(1)", gamma=2.0)
        np.testing.assert_array_equal(u0.values, profile2_n10.f.values)

    def test_scaled_profile_keywords(self, mesh10, profile2_n10):
        u0 = initial_field(mesh10, "scaled_profile(tau=4, gamma=2)")
        np.testing.assert_allclose(u0.values, profile2_n10.f.values / 4, rtol=1e-15)

    def test_from_file(self, tmp_path, mesh10):
        src = initial_field(mesh10, "poly_bump(3)")
        path = write_field(tmp_path / "u0.csv", src)
        loaded = initial_field(mesh10, f"file:{path}")
        np.testing.assert_array_equal(loaded.values, src.values)
        with pytest.raises(ValueError, match="nodes"):
            initial_field(build_unit_square_mesh(4), f"file:{path}")

    @pytest.mark.parametrize("spec", ["gaussian(1)", "poly_bump(1,2)", "poly_bump", "scaled_profile(foo=1)"])
    def test_bad_specs(self, spec, mesh10):
        with pytest.raises(ValueError):
            initial_field(mesh10, spec, gamma=2.0)

    def test_parse(self):
        assert parse_u0_spec("poly_bump(10)") == ("poly_bump", {"c": 10.0})
        assert parse_u0_spec(" scaled_profile( 2 , gamma=3.5)") == ("scaled_profile", {"tau": 2.0, "gamma": 3.5})


class TestConfig:
    def test_default_dt_is_h(self):
        assert ForwardConfig(gamma=2, n=10, T=1).dt == pytest.approx(0.1)

    @pytest.mark.parametrize("kw", [dict(gamma=1.0), dict(dt=0.3), dict(T=-1), dict(n=0)])
    def test_invalid(self, kw):
        base = dict(gamma=2.0, n=10, T=1.0, dt=0.1)
        base.update(kw)
        with pytest.raises(ValueError):
            ForwardConfig(**base)

    def test_step_count_rounding(self):
        assert ForwardConfig(gamma=2, n=10, T=1000, dt=0.1).step_count == 10000


class TestAdvanceStep:
    def test_zero_is_fixed_point(self):
        mesh = build_unit_square_mesh(6)
        K, M = assemble_stiffness(mesh), assemble_lumped_mass(mesh)
        u = advance_step(ScalarField(mesh, np.zeros(mesh.num_nodes)), 0.1, 2.5, K, M)
        assert np.all(u.values == 0)

    @pytest.mark.parametrize("dt", [0.01, 0.1, 1.0])
    def test_single_interior_node(self, dt):
        mesh = build_unit_square_mesh(2)
        K, M = assemble_stiffness(mesh), assemble_lumped_mass(mesh)
        u = np.zeros(9)
        u[4] = 1.0
        out = advance_step(ScalarField(mesh, u), dt, 2.0, K, M)
        expected = (1 / (4 * dt)) / (1 / (4 * dt) + 4)
        assert out.values[4] == pytest.approx(expected, rel=1e-13)

    def test_rejects_negative(self):
        mesh = build_unit_square_mesh(2)
        u = np.zeros(9)
        u[4] = -1
        with pytest.raises(ValueError):
            advance_step(ScalarField(mesh, u), 0.1, 2.0, assemble_stiffness(mesh), assemble_lumped_mass(mesh))

    def test_max_nonincreasing_first_100_steps(self):
        mesh = build_unit_square_mesh(10)
        K, M = assemble_stiffness(mesh), assemble_lumped_mass(mesh)
        u = initial_field(mesh, "poly_bump(10)")
        for _ in range(100):
            nxt = advance_step(u, 0.1, 3.5, K, M)
            assert nxt.values.max() <= u.values.max()
            u = nxt

    def test_separation_solution_one_step(self):
        for gamma in (2.0, 3.5):
            mesh = build_unit_square_mesh(16)
            prof = solve_profile(mesh, gamma)
            K, M = assemble_stiffness(mesh), assemble_lumped_mass(mesh)
            for tau, t, dt in [(1.0, 0.0, 0.1), (1.0, 5.0, 0.1), (2.0, 10.0, 0.5)]:
                out = advance_step(separation_solution(prof, tau, t), dt, gamma, K, M)
                exact = separation_solution(prof, tau, t + dt).values
                err = np.abs(out.values - exact).max() / exact.max()
                assert err <= 10 * dt / (tau + t)


class TestSolveForward:
    def test_zero_initial_data(self):
        res = solve_forward(ForwardConfig(gamma=4.0, n=6, T=2.0, dt=0.5, u0_spec="poly_bump(0)"))
        assert np.all(res.u_T.values == 0)
        assert res.step_count == 4

    @pytest.mark.parametrize("gamma", [1.1, 3.5, 6.8, 10.2])
    def test_bounds(self, gamma):
        res = solve_forward(ForwardConfig(gamma=gamma, n=10, T=20.0, dt=0.1))
        assert res.min_history.min() >= 0.0
        assert res.max_history.max() <= 0.625

    @pytest.mark.parametrize("gamma, dt", [(3.5, 0.1), (6.8, 0.02), (10.2, 0.02)])
    def test_max_history_monotone(self, gamma, dt):
        res = solve_forward(ForwardConfig(gamma=gamma, n=10, T=10.0, dt=dt))
        assert np.all(np.diff(res.max_history[1:]) <= 1e-10)

    def test_large_step_high_gamma_overshoot_is_bounded(self):
        # the lagged scheme is not monotone in max for large gamma*dt, but stays below max u0
        res = solve_forward(ForwardConfig(gamma=6.8, n=10, T=5.0, dt=0.1))
        assert np.any(np.diff(res.max_history[1:]) > 1e-10)
        assert res.max_history.max() <= 0.625

    def test_snapshots_match_separate_runs(self):
        long = solve_forward(ForwardConfig(gamma=3.5, n=8, T=3.0, dt=0.125, snapshot_times=(1.0, 2.0)))
        short = solve_forward(ForwardConfig(gamma=3.5, n=8, T=1.0, dt=0.125))
        np.testing.assert_array_equal(long.snapshots[1.0].values, short.u_T.values)

    @pytest.mark.parametrize("gamma, n, T", [(2.0, 16, 10.0), (3.5, 16, 10.0)])
    def test_separation_solution_accuracy(self, gamma, n, T):
        res = solve_forward(ForwardConfig(gamma=gamma, n=n, T=T, dt=1 / n, u0_spec="scaled_profile(1)"))
        prof = solve_profile(res.u_T.mesh, gamma)
        exact = separation_solution(prof, 1.0, T).values
        assert np.abs(res.u_T.values - exact).max() / exact.max() <= 0.05

    @pytest.mark.parametrize("gamma", [2.0, 3.5])
    def test_decay_order(self, gamma):
        T = 20.0
        res = solve_forward(ForwardConfig(gamma=gamma, n=10, T=T, dt=0.1, u0_spec="scaled_profile(1)"))
        sel = res.times >= T / 2
        slope = np.polyfit(np.log1p(res.times[sel]), np.log(res.max_history[sel]), 1)[0]
        target = -1 / (gamma - 1)
        assert abs(slope - target) <= 0.1 * abs(target)

    @pytest.mark.parametrize("gamma", [2.0, 3.5])
    def test_envelope_by_profile(self, gamma):
        T = 100.0
        times = tuple(float(t) for t in np.linspace(T / 2, T, 6))
        res = solve_forward(ForwardConfig(gamma=gamma, n=10, T=T, dt=0.1, snapshot_times=times))
        f = solve_profile(res.u_T.mesh, gamma).f.values
        inner = ~res.u_T.mesh.boundary_mask
        ratios = np.array([
            res.snapshots[t].values[inner] * (1 + t) ** (1 / (gamma - 1)) / f[inner] for t in times
        ])
        assert ratios.min() > 0.2
        assert ratios.max() < 5.0
        # the scaled solution settles: ratio spread over the window stays small
        assert np.ptp(ratios, axis=0).max() < 0.1 * ratios.mean()

    def test_nan_guard(self, monkeypatch):
        from pme_inverse import forward

        def bad_step(self, u, dt, gamma):
            return np.full_like(u, np.nan)

        monkeypatch.setattr(forward._Stepper, "step", bad_step)
        with pytest.raises(forward.ForwardError, match="step 1"):
            solve_forward(ForwardConfig(gamma=2.0, n=4, T=1.0, dt=0.5))

    def test_positive_at_large_time(self, run_gamma35):
        inner = ~run_gamma35.u_T.mesh.boundary_mask
        assert np.all(run_gamma35.u_T.values[inner] > 0)
        assert run_gamma35.u_T.values.max() < 1
