import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import cumulative_trapezoid

from core.dynamics import IntegratorConfig, integrate, kolmogorov_forcing, shear_mode
from core.errors import CoverageError, IntervalError, PastingMismatchError
from core.lattice import FlowParameters, inner, l2_norm_sq, random_field, zeros
from core.measures import mode_direction
from core.trajectory import (
    Ensemble,
    Trajectory,
    detect_period,
    energy_budget_audit,
    in_bounded_class,
    is_uniformly_bounded,
    observable_series,
    omega_limit_estimate,
    paste,
    restrict,
    sample_at,
    translate,
    weak_features,
)


@pytest.fixture
def scaled_shear(lattice8):
    """Samples a_i * s of one shear mode at t = 0, 1, 2, 3."""
    s = shear_mode(lattice8)
    amplitudes = [1.0, 2.0, 3.0, 4.0]
    return Trajectory(np.arange(4.0), tuple(s * a for a in amplitudes),
                      cum_dissipation=np.array([0.0, 1.0, 3.0, 6.0]), cum_work=np.zeros(4)), s


@pytest.fixture
def forced_run(lattice8, rng):
    """Kolmogorov-forced run sampled at every step of dt = 1e-3 on [0, 0.02]."""
    p = FlowParameters(0.1, kolmogorov_forcing(lattice8, 1.0))
    u0 = random_field(lattice8, rng, l2_norm=2.0)
    return integrate(u0, p, IntegratorConfig(dt=1e-3, stride=1), (0.0, 0.02)), p


class TestTrajectory:
    def test_rejects_unsorted_times(self, lattice8):
        u = zeros(lattice8)
        with pytest.raises(ValueError):
            Trajectory(np.array([0.0, 0.0]), (u, u))

    def test_rejects_samples_outside_interval(self, lattice8):
        u = zeros(lattice8)
        with pytest.raises(IntervalError):
            Trajectory(np.array([0.0, 2.0]), (u, u), interval=(0.0, 1.0))

    def test_norm_series(self, scaled_shear):
        traj, s = scaled_shear
        assert_allclose(traj.energies, np.array([1.0, 4.0, 9.0, 16.0]) * l2_norm_sq(s))
        assert_allclose(observable_series(traj, l2_norm_sq), traj.energies)
        assert traj.node_index(2.0) == 2
        assert traj.node_index(2.5) is None


class TestOperators:
    def test_translate(self, scaled_shear):
        traj, _ = scaled_shear
        shifted = translate(traj, 1.0)
        assert_allclose(shifted.times, [0.0, 1.0, 2.0])
        assert shifted.interval == (0.0, 2.0)
        assert shifted.states[0] is traj.states[1]
        assert_allclose(shifted.cum_dissipation, [0.0, 2.0, 5.0])

    def test_translate_by_zero_is_identity(self, scaled_shear):
        traj, _ = scaled_shear
        assert translate(traj, 0.0) is traj

    def test_translate_beyond_span(self, scaled_shear):
        traj, _ = scaled_shear
        with pytest.raises(IntervalError):
            translate(traj, 4.0)

    def test_restrict(self, scaled_shear):
        traj, _ = scaled_shear
        part = restrict(traj, (1.0, 2.0))
        assert_allclose(part.times, [1.0, 2.0])
        assert part.interval == (1.0, 2.0)
        assert_allclose(part.cum_dissipation, [0.0, 2.0])

    def test_restrict_outside(self, scaled_shear):
        traj, _ = scaled_shear
        with pytest.raises(IntervalError):
            restrict(traj, (2.0, 5.0))

    def test_sample_at(self, scaled_shear):
        traj, s = scaled_shear
        node, interpolated = sample_at(traj, 1.0)
        assert node is traj.states[1] and not interpolated
        mid, interpolated = sample_at(traj, 1.5)
        assert interpolated
        assert_allclose(mid.coeffs, (s * 2.5).coeffs)
        with pytest.raises(IntervalError):
            sample_at(traj, 3.5)

    def test_paste(self, scaled_shear):
        traj, _ = scaled_shear
        joined = paste(restrict(traj, (0.0, 1.0)), restrict(traj, (1.0, 3.0)))
        assert_allclose(joined.times, traj.times)
        assert joined.interval == (0.0, 3.0)
        assert_allclose(joined.cum_dissipation, traj.cum_dissipation)

    @pytest.mark.parametrize("s, t", [(0.002, 0.003), (0.005, 0.0), (0.004, 0.011)])
    def test_translations_compose(self, forced_run, s, t):
        traj, _ = forced_run
        twice = translate(translate(traj, t), s)
        once = translate(traj, s + t)
        assert_allclose(twice.times, once.times, atol=1e-15)
        assert_allclose(twice.interval, once.interval, atol=1e-15)
        assert all(a is b for a, b in zip(twice.states, once.states))
        assert_allclose(twice.cum_dissipation, once.cum_dissipation, atol=1e-14)

    @pytest.mark.parametrize("tau", [0.0, 0.004, 0.01])
    def test_projection_after_translation(self, forced_run, tau):
        traj, _ = forced_run
        shifted, _ = sample_at(translate(traj, tau), 0.0)
        direct, interpolated = sample_at(traj, tau)
        assert not interpolated
        assert shifted is direct

    def test_paste_mismatch(self, scaled_shear, lattice8):
        traj, s = scaled_shear
        other = Trajectory(np.array([1.0, 2.0]), (s * 7.0, s))
        with pytest.raises(PastingMismatchError) as info:
            paste(restrict(traj, (0.0, 1.0)), other)
        assert info.value.gap > 0

    def test_paste_needs_common_seam(self, scaled_shear):
        traj, _ = scaled_shear
        with pytest.raises(IntervalError):
            paste(restrict(traj, (0.0, 1.0)), restrict(traj, (2.0, 3.0)))


class TestEnergyBudget:
    def test_growth_without_forcing_fails(self, scaled_shear, unforced):
        traj, _ = scaled_shear
        plain = Trajectory(traj.times, traj.states)
        audit = energy_budget_audit(plain, unforced)
        assert audit.quadrature == "trapezoid"
        assert not audit.passed_inequality
        assert audit.failures()

    def test_csv_export(self, tmp_path, unforced, rng):
        u0 = random_field(unforced.lattice, rng, l2_norm=1.0)
        traj = integrate(u0, unforced, IntegratorConfig(dt=1e-3, stride=2), (0.0, 0.006))
        audit = energy_budget_audit(traj, unforced, mode="equality")
        path = tmp_path / "audit.csv"
        assert audit.to_csv(str(path))
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t_prime,t,D,verdict"
        assert len(lines) == 1 + 6
        assert all(line.endswith("PASS") for line in lines[1:])

    def test_audit_adds_across_a_paste(self, forced_run):
        whole, p = forced_run
        cfg = IntegratorConfig(dt=1e-3, stride=1)
        first = integrate(whole.states[0], p, cfg, (0.0, 0.01))
        second = integrate(first.states[-1], p, cfg, (0.01, 0.02))
        joined = paste(first, second)
        audit = energy_budget_audit(joined, p, mode="equality")
        assert audit.passed
        assert_allclose(joined.cum_dissipation, whole.cum_dissipation, rtol=1e-12)
        assert_allclose(audit.max_abs_residual, energy_budget_audit(whole, p).max_abs_residual, atol=1e-12)
        d = {(a, b): v for a, b, v, _ in audit.rows()}
        start, seam, end = joined.times[0], joined.times[len(first) - 1], joined.times[-1]
        assert_allclose(d[(start, end)], d[(start, seam)] + d[(seam, end)], atol=1e-14)

    def test_energy_corruption_is_flagged(self, forced_run):
        traj, p = forced_run
        k = len(traj) // 2
        states = list(traj.states)
        states[k] = states[k] * np.sqrt(1.1)
        corrupted = Trajectory(traj.times, tuple(states), cum_dissipation=traj.cum_dissipation,
                               cum_work=traj.cum_work)
        for mode in ("equality", "inequality"):
            audit = energy_budget_audit(corrupted, p, mode=mode)
            assert not audit.passed
            assert audit.failures()
            assert all(traj.times[k] in (a, b) for a, b, _ in audit.failures())

    def test_rows_match_every_pair(self, forced_run):
        traj, p = forced_run
        audit = energy_budget_audit(traj, p, quadrature="trapezoid")
        g = (0.5 * traj.energies
             + cumulative_trapezoid(p.nu * traj.enstrophies, traj.times, initial=0.0)
             - cumulative_trapezoid([inner(p.forcing, u) for u in traj.states], traj.times, initial=0.0))
        rows = list(audit.rows())
        n = len(traj)
        assert len(rows) == n * (n - 1) // 2
        expected = [g[j] - g[i] for i in range(n) for j in range(i + 1, n)]
        assert_allclose([r[2] for r in rows], expected, atol=1e-12)
        assert_allclose(audit.max_abs_residual, np.max(np.abs(expected)), atol=1e-12)

    def test_unknown_mode(self, scaled_shear, unforced):
        with pytest.raises(ValueError):
            energy_budget_audit(scaled_shear[0], unforced, mode="approximate")


class TestBoundedness:
    def test_bounded_classes(self, scaled_shear, shear_flow):
        traj, s = scaled_shear
        size = np.sqrt(l2_norm_sq(s))
        assert in_bounded_class(traj, 4.0 * size)
        assert not in_bounded_class(traj, 3.0 * size)
        _, p = shear_flow
        # R0 equals |s| and the run starts there, so growth leaves the ball
        assert not is_uniformly_bounded(traj, p)
        assert is_uniformly_bounded(Trajectory(np.arange(2.0), (s * 1.0, s * 0.5)), p)


class TestLongTime:
    def test_weak_features_measure_l2_distance(self, lattice8, rng):
        u, v = random_field(lattice8, rng), random_field(lattice8, rng)
        f = weak_features([u, v], cutoff=lattice8.n)
        assert_allclose(np.linalg.norm(f[0] - f[1]), np.sqrt(l2_norm_sq(u - v)), rtol=1e-12)

    def test_constant_tail_is_one_cluster(self, shear_flow):
        u_star, _ = shear_flow
        traj = Trajectory(np.arange(20.0), (u_star,) * 20)
        clusters = omega_limit_estimate(traj)
        assert len(clusters) == 1
        assert_allclose(clusters[0].frequency, 1.0)

    def test_periodic_orbit_has_one_cluster_per_phase(self, lattice8):
        a, b = mode_direction(lattice8, (1, 0, 0)), mode_direction(lattice8, (0, 1, 0))
        times = np.arange(81) * 0.25
        states = tuple(a * np.cos(2 * np.pi * t) + b * np.sin(2 * np.pi * t) for t in times)
        clusters = omega_limit_estimate(Trajectory(times, states))
        assert len(clusters) == 4
        assert_allclose(sum(c.frequency for c in clusters), 1.0)
        assert_allclose([c.frequency for c in clusters], 0.25, atol=0.02)
        phases = sorted(round(c.time % 1.0, 6) for c in clusters)
        assert phases == [0.0, 0.25, 0.5, 0.75]

    def test_decaying_run_clusters_at_rest(self, lattice8, rng):
        p = FlowParameters(0.5, zeros(lattice8))
        u0 = random_field(lattice8, rng, max_mode=2, l2_norm=1.0)
        traj = integrate(u0, p, IntegratorConfig(dt=0.1, stride=2), (0.0, 40.0))
        clusters = omega_limit_estimate(traj)
        assert len(clusters) == 1
        assert_allclose(clusters[0].frequency, 1.0)
        assert np.sqrt(l2_norm_sq(clusters[0].representative)) <= 1e-3

    def test_short_tail(self, shear_flow):
        u_star, _ = shear_flow
        with pytest.raises(CoverageError):
            omega_limit_estimate(Trajectory(np.arange(4.0), (u_star,) * 4))

    def test_detect_period(self):
        times = np.arange(0.0, 20.0, 0.01)
        period = detect_period(times, np.sin(2 * np.pi * times / 2.0))
        assert abs(period - 2.0) <= 0.01

    def test_constant_signal_has_no_period(self):
        times = np.arange(0.0, 1.0, 0.1)
        assert detect_period(times, np.ones_like(times)) is None


class TestEnsemble:
    def test_uniform(self, scaled_shear):
        traj, _ = scaled_shear
        ensemble = Ensemble.uniform([traj, traj])
        assert_allclose(ensemble.weights, [0.5, 0.5])

    def test_weights_must_sum_to_one(self, scaled_shear):
        traj, _ = scaled_shear
        with pytest.raises(ValueError):
            Ensemble(np.array([0.5, 0.6]), (traj, traj))
