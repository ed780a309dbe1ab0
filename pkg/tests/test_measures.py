import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from core.dynamics import IntegratorConfig, integrate, kolmogorov_forcing, manufacture_forcing, rhs_F, shear_mode
from core.errors import CoverageError, LatticeError, NonFiniteObservableError
from core.lattice import FlowParameters, inner, l2_norm_sq, random_field, zeros
from core.measures import (
    BumpProfile,
    CylindricalTest,
    EmpiricalMeasure,
    MeasureFamily,
    PsiFunction,
    boundary_allowance,
    collapse_constant,
    energy_inequality_residual,
    energy_observable,
    ensemble_family,
    expect,
    liouville_battery,
    liouville_residual_stationary,
    liouville_residual_timedep,
    mode_direction,
    moment_report,
    random_test_battery,
    stationarity_diagnostic,
    standard_observables,
    time_average_measure,
    window_measure,
)
from core.trajectory import Ensemble, Trajectory


class TestEmpiricalMeasure:
    def test_weights_must_sum_to_one(self, lattice8):
        u = zeros(lattice8)
        with pytest.raises(ValueError):
            EmpiricalMeasure(np.array([0.5, 0.4]), (u, u))

    def test_negative_weights(self, lattice8):
        u = zeros(lattice8)
        with pytest.raises(ValueError):
            EmpiricalMeasure(np.array([1.5, -0.5]), (u, u))

    def test_expectation(self, lattice8):
        s = shear_mode(lattice8)
        m = EmpiricalMeasure(np.array([0.25, 0.75]), (s, s * 2.0))
        assert_allclose(expect(m, l2_norm_sq), (0.25 + 0.75 * 4.0) * l2_norm_sq(s))

    def test_non_finite_observable(self, lattice8):
        m = EmpiricalMeasure.dirac(zeros(lattice8))
        with pytest.raises(NonFiniteObservableError):
            expect(m, lambda u: float("nan"))

    def test_collapse_constant(self, lattice8, rng):
        s = shear_mode(lattice8)
        m = EmpiricalMeasure.uniform([s, s, s])
        assert len(collapse_constant(m)) == 1
        varied = EmpiricalMeasure.uniform([s, random_field(lattice8, rng)])
        assert collapse_constant(varied) is varied


class TestObservables:
    def test_mode_direction_is_unit_and_orthogonal(self, lattice8):
        v = mode_direction(lattice8, (1, 0, 0))
        w = mode_direction(lattice8, (0, 1, 0))
        assert_allclose(l2_norm_sq(v), 1.0)
        assert abs(inner(v, w)) <= 1e-14

    def test_zero_mode_has_no_direction(self, lattice8):
        with pytest.raises(LatticeError):
            mode_direction(lattice8, (0, 0, 0))

    def test_moment_report_keys(self, lattice8):
        report = moment_report(EmpiricalMeasure.dirac(shear_mode(lattice8)))
        assert set(report) == {"l2_sq", "enstrophy", "da_two_thirds", "linf"}
        assert_allclose(report["linf"], 1.0, rtol=1e-12)


class TestTestFunctions:
    def test_bump_support(self):
        profile = BumpProfile(center=np.zeros(2), radius=1.0)
        assert profile.value(np.array([2.0, 0.0])) == 0.0
        assert profile.value(np.zeros(2)) > 0

    @given(y=st.lists(st.floats(min_value=-0.9, max_value=0.9), min_size=2, max_size=2))
    @settings(max_examples=30, deadline=None)
    def test_bump_gradient_matches_finite_differences(self, y):
        profile = BumpProfile(center=np.zeros(2), radius=1.5, p0=1.0, slope=np.array([0.3, -0.2]))
        y = np.array(y)
        h = 1e-6
        numeric = np.array([(profile.value(y + h * e) - profile.value(y - h * e)) / (2 * h) for e in np.eye(2)])
        assert_allclose(profile.gradient(y), numeric, atol=1e-6)

    def test_psi_function(self):
        psi = PsiFunction(2.0)
        assert psi.value(0.0) == 0.0
        assert_allclose(psi.derivative(0.0), 1.0)
        assert psi.value(1e9) <= 2.0

    def test_cylindrical_test_dimension_check(self, lattice8):
        v = mode_direction(lattice8, (1, 0, 0))
        with pytest.raises(ValueError):
            CylindricalTest((v,), BumpProfile(center=np.zeros(2), radius=1.0))


class TestLiouville:
    def test_dirac_at_steady_states(self, lattice8):
        rng = np.random.default_rng(7)
        for _ in range(5):
            u_star = random_field(lattice8, rng, max_mode=2, l2_norm=float(rng.uniform(0.5, 2.0)))
            p = FlowParameters(0.1, manufacture_forcing(u_star, 0.1))
            m = EmpiricalMeasure.dirac(u_star)
            rows = liouville_battery(m, random_test_battery(m.states, p, count=20, seed=3), p)
            assert all(row["verdict"] == "PASS" for row in rows)
            for r in (0.1, 1.0, 10.0):
                assert energy_inequality_residual(m, PsiFunction(r * p.r0 ** 2), p) <= 1e-10

    def test_detects_non_stationary_dirac(self, manufactured_flow):
        u_star, p = manufactured_flow
        moving = u_star * 1.5
        drift = rhs_F(moving, p)
        # probing along the drift sees roughly e^-1 |F(u)|^2
        test = CylindricalTest((drift,), BumpProfile(center=np.zeros(1), radius=1e3, slope=np.ones(1)))
        m = EmpiricalMeasure.dirac(moving)
        assert liouville_residual_stationary(m, test, p) > 1e-3 * l2_norm_sq(drift)

    def test_time_dependent_residual_converges(self, lattice8, rng):
        p = FlowParameters(0.1, kolmogorov_forcing(lattice8, 1.0))
        starts = [random_field(lattice8, rng, max_mode=2, l2_norm=2.0) for _ in range(32)]
        directions = (mode_direction(lattice8, (0, 1, 0)), mode_direction(lattice8, (1, 1, 0)))
        coords = np.array([[inner(u, v) for v in directions] for u in starts])
        test = CylindricalTest(directions, BumpProfile.fit(coords, np.random.default_rng(0)))
        steps = np.array([0.02, 0.01, 0.005])
        residuals = []
        for dt in steps:
            # sampling every step refines dt and the quadrature together
            cfg = IntegratorConfig(dt=dt, stride=1, picard_max_iter=60, picard_tol=1e-14)
            family = ensemble_family(Ensemble.uniform([integrate(u, p, cfg, (0.0, 0.2)) for u in starts]))
            residuals.append(abs(liouville_residual_timedep(family, test, 0.0, 0.2, p)))
        slope = np.polyfit(np.log(steps), np.log(residuals), 1)[0]
        assert slope >= 1.8
        assert residuals[-1] <= 1e-3

    def test_time_dependent_energy_inequality(self, lattice8, rng):
        u0 = random_field(lattice8, rng, l2_norm=1.0)
        p = FlowParameters(0.1, zeros(lattice8))
        traj = integrate(u0, p, IntegratorConfig(dt=1e-3, stride=1), (0.0, 0.02))
        family = ensemble_family(Ensemble.uniform([traj]))
        defect = energy_inequality_residual(family, PsiFunction(1.0), p, 0.0, 0.02)
        assert defect <= 1e-6

    def test_family_needs_sampled_ends(self, lattice8):
        m = EmpiricalMeasure.dirac(zeros(lattice8))
        family = MeasureFamily(np.array([0.0, 1.0]), (m, m))
        with pytest.raises(CoverageError):
            family.window(0.0, 0.5)


class TestTimeAverages:
    def test_window_weights_follow_trapezoid_rule(self, lattice8):
        s = shear_mode(lattice8)
        traj = Trajectory(np.arange(5.0), tuple(s * a for a in (1.0, 2.0, 3.0, 4.0, 5.0)))
        m = window_measure(traj, 0.0, 4.0)
        assert_allclose(m.weights, [0.125, 0.25, 0.25, 0.25, 0.125])
        assert m.provenance["kind"] == "time_average"

    def test_window_outside_samples(self, lattice8):
        s = shear_mode(lattice8)
        traj = Trajectory(np.arange(3.0), (s, s, s))
        with pytest.raises(CoverageError):
            window_measure(traj, 0.0, 5.0)

    def test_steady_run_converges(self, shear_flow):
        u_star, p = shear_flow
        traj = Trajectory(np.linspace(0.0, 4.0, 41), (u_star,) * 41)
        measures, diagnostics = time_average_measure(traj, [1.0, 2.0, 4.0])
        assert diagnostics.converged
        assert len(collapse_constant(measures[-1])) == 1

    def test_transient_is_flagged(self, lattice8):
        s = shear_mode(lattice8)
        times = np.linspace(0.0, 4.0, 41)
        traj = Trajectory(times, tuple(s * (1.0 + 10.0 * t) for t in times))
        _, diagnostics = time_average_measure(traj, [1.0, 2.0, 4.0])
        assert not diagnostics.converged

    def test_periodic_run_is_stationary(self, lattice8):
        s = shear_mode(lattice8)
        times = np.linspace(0.0, 8.0, 801)
        traj = Trajectory(times, tuple(s * (2.0 + np.cos(np.pi * t)) for t in times))
        report = stationarity_diagnostic(traj, standard_observables(), shifts=[2.0], window=4.0)
        assert report.max_gap <= 1e-6
        assert report.stationary

    def test_boundary_allowance(self, lattice8):
        s = shear_mode(lattice8)
        traj = Trajectory(np.arange(3.0), (s, s * 2.0, s * 3.0))
        m = window_measure(traj, 0.0, 2.0)
        energy = energy_observable()
        assert_allclose(boundary_allowance(m, energy), (energy(s * 3.0) - energy(s)) / 2.0)
        assert boundary_allowance(EmpiricalMeasure.dirac(s), energy) == 0.0

    def test_stationarity_needs_span(self, lattice8):
        s = shear_mode(lattice8)
        traj = Trajectory(np.arange(3.0), (s, s, s))
        with pytest.raises(CoverageError):
            stationarity_diagnostic(traj, standard_observables(), shifts=[2.0], window=1.0)
