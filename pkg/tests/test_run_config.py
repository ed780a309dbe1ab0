import numpy as np
import pytest
from numpy.testing import assert_allclose

from config.run_config import (
    build_constants,
    build_flow,
    build_initial,
    load_run_config,
    parse_run_config,
    write_run_config,
)
from core.dynamics import rhs_F
from core.errors import ConfigError
from core.lattice import l2_norm_sq


class TestParsing:
    def test_dotted_keys(self):
        cfg = parse_run_config({
            "name": "kolmo",
            "flow.nu": "0.2",
            "flow.n": "8",
            "flow.forcing": "kolmogorov",
            "integrator.dt": "5e-3",
            "averaging.windows": "0.1, 0.2, 0.4",
            "flow.periods": "2pi",
        })
        assert cfg.name == "kolmo"
        assert cfg.flow.nu == 0.2
        assert cfg.integrator.dt == 5e-3
        assert cfg.averaging.windows == [0.1, 0.2, 0.4]
        assert_allclose(cfg.flow.periods, [2 * np.pi] * 3)

    def test_defaults(self):
        cfg = parse_run_config({})
        assert cfg.integrator.scheme == "imex_cn"
        assert cfg.flow.forcing == "none"

    def test_output_dir_follows_environment(self, tmp_path):
        assert parse_run_config({}).output_dir == str(tmp_path / "runs")

    @pytest.mark.parametrize("flat, field", [
        ({"flow.viscosity": "0.1"}, "flow.viscosity"),
        ({"flow.nu": "-1"}, "flow.nu"),
        ({"flow.n": "7"}, "flow.n"),
        ({"integrator.scheme": "euler"}, "integrator.scheme"),
        ({"averaging.windows": "1,0.5"}, "averaging.windows"),
    ])
    def test_errors_name_the_field(self, flat, field):
        with pytest.raises(ConfigError) as info:
            parse_run_config(flat)
        assert field in info.value.fields

    def test_span_must_be_ordered(self):
        with pytest.raises(ConfigError):
            parse_run_config({"t_start": "1.0", "t_end": "0.5"})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(str(tmp_path / "absent.env"))

    def test_write_then_load(self, tmp_path):
        cfg = parse_run_config({"name": "rt", "flow.n": "8", "flow.forcing": "shear",
                                "averaging.shifts": "0.5", "constants.c1": "1.5"})
        path = str(tmp_path / "rt.env")
        write_run_config(cfg, path)
        assert load_run_config(path) == cfg

    def test_write_is_atomic(self, tmp_path):
        cfg = parse_run_config({"name": "rt"})
        path = tmp_path / "nested" / "rt.env"
        write_run_config(cfg, str(path))
        write_run_config(cfg, str(path))
        assert [p.name for p in path.parent.iterdir()] == ["rt.env"]
        assert load_run_config(str(path)) == cfg


class TestBuilders:
    @pytest.mark.parametrize("forcing", ["shear", "kolmogorov", "manufactured"])
    def test_known_steady_states(self, forcing):
        cfg = parse_run_config({"flow.n": "8", "flow.forcing": forcing})
        p, steady = build_flow(cfg)
        assert steady is not None
        assert np.sqrt(l2_norm_sq(rhs_F(steady, p))) <= 1e-12 * max(1.0, p.forcing_norm)

    def test_steady_start_needs_a_steady_state(self):
        cfg = parse_run_config({"flow.n": "8", "flow.forcing": "random_low_mode", "initial.kind": "steady"})
        p, steady = build_flow(cfg)
        assert steady is None
        with pytest.raises(ConfigError) as info:
            build_initial(cfg, p, steady)
        assert info.value.fields == ("initial.kind",)

    def test_random_start_on_the_ball_boundary(self):
        cfg = parse_run_config({"flow.n": "8", "flow.forcing": "kolmogorov"})
        p, steady = build_flow(cfg)
        u0 = build_initial(cfg, p, steady)
        assert_allclose(np.sqrt(l2_norm_sq(u0)), p.r0, rtol=1e-12)

    def test_initial_l2_norm(self):
        cfg = parse_run_config({"flow.n": "8", "initial.kind": "taylor_green", "initial.l2_norm": "2.5"})
        p, steady = build_flow(cfg)
        assert_allclose(l2_norm_sq(build_initial(cfg, p, steady)), 6.25, rtol=1e-12)

    def test_constants(self):
        assert build_constants(parse_run_config({})) is None
        c = build_constants(parse_run_config({"constants.c1": "2.0", "constants.c2": "8"}))
        assert c.c1 == 2.0 and c.provenance == "user"
        assert_allclose(c.c3, 2.0 / 3.0 + 2.0)
