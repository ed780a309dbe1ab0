import json
import os

import pytest

from core.dynamics import shear_mode
from core.lattice import WaveVectorLattice
from core.measures import EmpiricalMeasure
from main import run
from scripts.common import EXIT_FAIL, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE
from utils.snapshot_io import read_measure, read_trajectory, write_measure

TAYLOR_GREEN = """\
name=tg
t_end=0.2
flow.n=8
flow.nu=0.1
initial.kind=taylor_green
integrator.dt=0.01
integrator.stride=2
"""

SHEAR = """\
name=shear
flow.n=8
flow.nu=0.1
flow.forcing=shear
constants.c1=1.0
constants.c2=8.0
averaging.battery_size=6
averaging.psi_r=1.0
"""


def _write(path, text):
    path.write_text(text)
    return str(path)


def _load(path):
    with open(path) as f:
        return json.load(f)


@pytest.fixture
def runs(tmp_path):
    return tmp_path / "runs"


@pytest.fixture
def simulated(tmp_path, runs):
    assert run(["simulate", _write(tmp_path / "tg.env", TAYLOR_GREEN)]) == EXIT_OK
    return str(runs / "tg.sntx")


class TestSimulate:
    def test_outputs(self, simulated, runs):
        traj, nu = read_trajectory(simulated)
        assert nu == 0.1
        assert len(traj) == 11
        for suffix in ("_simulate.json", "_audit.csv", "_config.env"):
            assert (runs / f"tg{suffix}").exists()
        summary = _load(runs / "tg_simulate.json")
        assert summary["taylor_green_max_rel_error"] <= 1e-6
        assert summary["audit"]["mode"] == "equality"
        assert summary["audit"]["failures"] == 0
        assert summary["audit"]["verdict"] == "PASS"

    def test_failed_audit_is_reported(self, tmp_path, runs):
        text = ("name=tight\nt_end=0.05\nflow.n=8\nflow.forcing=kolmogorov\ninitial.kind=random\n"
                "integrator.dt=0.01\ntolerances.budget=1e-30\n")
        assert run(["simulate", _write(tmp_path / "tight.env", text)]) == EXIT_FAIL
        assert (runs / "tight.sntx").exists()
        audit = _load(runs / "tight_simulate.json")["audit"]
        assert audit["verdict"] == "FAIL"
        assert audit["failures"] > 0

    def test_saved_config_reproduces_the_run(self, simulated, runs, tmp_path):
        out = tmp_path / "again"
        assert run(["--output-dir", str(out), "simulate", str(runs / "tg_config.env")]) == EXIT_OK
        with open(simulated, "rb") as a, open(out / "tg.sntx", "rb") as b:
            assert a.read() == b.read()

    def test_bad_config(self, tmp_path):
        assert run(["simulate", _write(tmp_path / "bad.env", "flow.nu=-1\n")]) == EXIT_USAGE
        assert run(["simulate", str(tmp_path / "missing.env")]) == EXIT_USAGE

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_blow_up(self, tmp_path, runs):
        text = ("name=boom\nt_end=1e5\nflow.n=8\ninitial.l2_norm=1e3\n"
                "integrator.scheme=rk4\nintegrator.dt=100\n")
        assert run(["simulate", _write(tmp_path / "boom.env", text)]) == EXIT_NUMERICAL
        assert (runs / "boom_partial.sntx").exists()
        assert "blow_up_step" in _load(runs / "boom_simulate.json")

    def test_unknown_command(self):
        assert run(["integrate"]) == EXIT_USAGE


class TestAverage:
    def test_measures_per_window(self, simulated, runs):
        assert run(["average", simulated, "--windows", "0.05,0.1,0.2"]) == EXIT_OK
        report = _load(runs / "tg_average.json")
        assert len(report["measures"]) == 3
        assert os.path.basename(report["measures"][-1]) == "tg_T0.2.snsm"
        measure, nu = read_measure(report["measures"][-1])
        assert nu == 0.1
        assert len(measure) == 11
        assert measure.provenance["kind"] == "time_average"
        assert report["stationarity"] is not None

    def test_default_schedule_spans_the_run(self, simulated, runs):
        assert run(["average", simulated]) == EXIT_OK
        report = _load(runs / "tg_average.json")
        assert len(report["measures"]) == 4
        assert len(read_measure(report["measures"][-1])[0]) == 11

    def test_bad_windows(self, simulated):
        assert run(["average", simulated, "--windows", "0.2,0.1"]) == EXIT_USAGE

    def test_window_longer_than_run(self, simulated):
        assert run(["average", simulated, "--windows", "0.1,0.2,5"]) == EXIT_NUMERICAL


class TestVerify:
    @pytest.fixture
    def shear_config(self, tmp_path):
        return _write(tmp_path / "shear.env", SHEAR)

    def _measure(self, tmp_path, amplitude):
        path = str(tmp_path / f"dirac_{amplitude}.snsm")
        write_measure(path, EmpiricalMeasure.dirac(shear_mode(WaveVectorLattice(8), amplitude)), 0.1)
        return path

    def test_steady_dirac_passes(self, tmp_path, runs, shear_config):
        assert run(["verify", shear_config, "--measure", self._measure(tmp_path, 1.0)]) == EXIT_OK
        result = _load(runs / "shear_verify.json")
        assert result["verdicts"]["FAIL"] == 0
        assert result["liouville"]["verdict"] == "PASS"
        assert result["reports"]["regular_fraction"]["verdict"] == "INCONCLUSIVE"

    def test_injected_fault(self, tmp_path, runs, shear_config):
        assert run(["verify", shear_config, "--measure", self._measure(tmp_path, 2.0)]) == EXIT_FAIL
        result = _load(runs / "shear_verify.json")
        assert result["reports"]["attractor_ball.measure"]["verdict"] == "FAIL"
        assert run(["report", str(runs / "shear_verify.json")]) == EXIT_OK

    def test_accretion_on_steady_dirac(self, tmp_path, runs, shear_config):
        spec = {"observables": [{"kind": "energy"}], "lower": [0.0], "upper": [1e3]}
        set_path = _write(tmp_path / "E.json", json.dumps(spec))
        code = run(["verify", shear_config, "--measure", self._measure(tmp_path, 1.0), "--set", set_path])
        assert code == EXIT_OK
        accretion = _load(runs / "shear_verify.json")["accretion"]
        assert accretion["mass_E"] == 1.0
        assert accretion["verdict"] == "PASS"

    def test_measure_from_another_flow(self, tmp_path, shear_config):
        other_nu = _write(tmp_path / "shear_nu.env", SHEAR.replace("flow.nu=0.1", "flow.nu=0.2"))
        assert run(["verify", other_nu, "--measure", self._measure(tmp_path, 1.0)]) == EXIT_USAGE
        fine = str(tmp_path / "fine.snsm")
        write_measure(fine, EmpiricalMeasure.dirac(shear_mode(WaveVectorLattice(16))), 0.1)
        assert run(["verify", shear_config, "--measure", fine]) == EXIT_USAGE

    def test_trajectory_from_another_flow(self, simulated, tmp_path):
        config = _write(tmp_path / "tg_nu.env", TAYLOR_GREEN.replace("flow.nu=0.1", "flow.nu=0.2"))
        assert run(["verify", config, "--trajectory", simulated]) == EXIT_USAGE

    def test_needs_an_input(self, shear_config):
        assert run(["verify", shear_config]) == EXIT_USAGE

    def test_trajectory_mode(self, simulated, runs, tmp_path):
        config = _write(tmp_path / "tg_verify.env", TAYLOR_GREEN + "constants.c1=1.0\n")
        assert run(["verify", config, "--trajectory", simulated]) == EXIT_OK
        reports = _load(runs / "tg_verify.json")["reports"]
        assert reports["energy_estimate.trajectory"]["verdict"] == "PASS"
        # without forcing R0 = 0, so the run starts outside the absorbing ball
        assert reports["time_avg_enstrophy.trajectory"]["verdict"] == "INCONCLUSIVE"


class TestRecurrence:
    def test_disjoint_set(self, simulated, runs, tmp_path):
        spec = {"observables": [{"kind": "energy"}], "lower": [1e6], "upper": [2e6]}
        set_path = _write(tmp_path / "far.json", json.dumps(spec))
        assert run(["recurrence", simulated, set_path, "--horizon", "0.1"]) == EXIT_OK
        summary = _load(runs / "tg_recurrence.json")
        assert summary["empty"] is True
        assert summary["fraction"] is None
        assert (runs / "tg_recurrence.csv").exists()

    def test_no_period_without_horizon(self, simulated, tmp_path):
        spec = {"observables": [{"kind": "energy"}], "lower": [0.0], "upper": [1e6]}
        assert run(["recurrence", simulated, _write(tmp_path / "all.json", json.dumps(spec))]) == EXIT_USAGE


class TestConstants:
    def test_estimate(self, runs):
        assert run(["estimate-constants", "--n", "8", "--samples", "2", "--seed", "1"]) == EXIT_OK
        data = _load(runs / "run_constants.json")
        assert data["samples"] == 2 and data["n"] == 8
        assert data["provenance"] == "estimated"
        assert data["c2"] >= 1.0

    def test_bad_resolution(self):
        assert run(["estimate-constants", "--n", "7"]) == EXIT_USAGE

    def test_constants_file_feeds_verify(self, tmp_path, runs):
        assert run(["estimate-constants", "--n", "8", "--samples", "2"]) == EXIT_OK
        config = _write(tmp_path / "shear.env", SHEAR)
        measure = str(tmp_path / "m.snsm")
        write_measure(measure, EmpiricalMeasure.dirac(shear_mode(WaveVectorLattice(8))), 0.1)
        code = run(["verify", config, "--measure", measure, "--constants", str(runs / "run_constants.json")])
        assert code == EXIT_OK
        assert _load(runs / "shear_verify.json")["constants"]["provenance"] == "estimated"


class TestReport:
    def test_trajectory(self, simulated, capsys):
        assert run(["report", simulated]) == EXIT_OK
        assert "===== Trajectory =====" in capsys.readouterr().out

    def test_unknown_extension(self, tmp_path):
        assert run(["report", _write(tmp_path / "notes.txt", "hello")]) == EXIT_USAGE
