import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from utils.helpers import (
    format_value,
    geometric_windows,
    load_from_json,
    parse_float_list,
    save_to_json,
    to_jsonable,
    trapezoid_weights,
)
from utils.validators import (
    validate_positive,
    validate_resolution,
    validate_set_spec,
    validate_window_schedule,
)


class TestHelpers:
    def test_parse_float_list(self):
        assert parse_float_list("1, 2.5,4") == [1.0, 2.5, 4.0]
        assert_allclose(parse_float_list("2pi, pi"), [2 * math.pi, math.pi])
        with pytest.raises(ValueError):
            parse_float_list("one")

    def test_format_value(self):
        assert format_value(0.25, 8) == "0.25"
        assert format_value(float("inf")) == "inf"
        assert format_value(None) == "-"

    def test_json_round_trip(self, tmp_path):
        path = str(tmp_path / "out" / "r.json")
        data = {"a": np.float64(1.5), "b": np.arange(3), "c": (np.bool_(True), None)}
        assert save_to_json(data, path)
        assert load_from_json(path) == {"a": 1.5, "b": [0, 1, 2], "c": [True, None]}
        assert to_jsonable({1: np.int64(2)}) == {"1": 2}

    def test_missing_json(self, tmp_path):
        assert load_from_json(str(tmp_path / "absent.json")) is None

    @given(steps=st.lists(st.floats(min_value=1e-3, max_value=10.0), min_size=1, max_size=20))
    @settings(max_examples=30, deadline=None)
    def test_trapezoid_weights_integrate_linear_functions(self, steps):
        times = np.concatenate([[0.0], np.cumsum(steps)])
        w = trapezoid_weights(times)
        assert_allclose(w.sum(), times[-1], rtol=1e-12)
        assert_allclose(w.dot(times), 0.5 * times[-1] ** 2, rtol=1e-12)

    def test_geometric_windows(self):
        assert_allclose(geometric_windows(1.0, 100.0, 3), [1.0, 10.0, 100.0])
        assert geometric_windows(1.0, 5.0, 1) == [5.0]


class TestValidators:
    def test_positive(self):
        assert validate_positive("2.5")
        assert not validate_positive(0)
        assert not validate_positive(float("nan"))
        assert not validate_positive("abc")

    @pytest.mark.parametrize("n, ok", [(8, True), (4, True), (16.0, True), (7, False), (2, False), ("x", False)])
    def test_resolution(self, n, ok):
        assert validate_resolution(n) is ok

    def test_window_schedule(self):
        assert validate_window_schedule([1.0, 2.0]) == {}
        assert "windows" in validate_window_schedule([])
        assert "windows" in validate_window_schedule([2.0, 1.0])
        assert "windows" in validate_window_schedule([-1.0])

    def test_set_spec(self):
        good = {"observables": [{"kind": "projection", "mode": [1, 0, 0]}], "lower": [-1], "upper": [1]}
        assert validate_set_spec(good) == {}
        assert "observables[0].mode" in validate_set_spec(dict(good, observables=[{"kind": "projection"}]))
        assert "upper" in validate_set_spec({"observables": [{"kind": "energy"}], "lower": [0]})
        assert "bounds" in validate_set_spec({"observables": [{"kind": "energy"}], "lower": [1], "upper": [0]})
