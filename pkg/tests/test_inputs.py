import json

import numpy as np
import pytest

from errors import InvalidProfileError, MeanObstructionError, SchemaError, TruncationMismatchError, ValidationError
from inputs.config import RunConfig
from inputs.problem import ControlProblem, Method
from inputs.shapes import DEFAULT_SIGMA, ControlShape, ShapeKind
from inputs.state import FourierState, SampledControl
from outputs.json_export import complex_from_pair, load_json, require

T = 2.0 * np.pi + 1.0


class TestFourierState:
    def test_from_modes_places_coefficients(self):
        state = FourierState.from_modes(3, pos={1: 2.0, -3: 1j}, vel={0: 0.5})
        assert state.coefficient(1) == (2.0, 0.0)
        assert state.coefficient(-3) == (1j, 0.0)
        assert state.means == (0.0, 0.5)

    def test_mode_outside_truncation(self):
        with pytest.raises(TruncationMismatchError):
            FourierState.from_modes(2, pos={3: 1.0})

    def test_wrong_length(self):
        with pytest.raises(TruncationMismatchError):
            FourierState(K=2, pos=np.zeros(4), vel=np.zeros(5))

    def test_random_is_real_with_means(self, rng):
        state = FourierState.random(6, rng, kmin=3, kmax=6, means=(1.0, 0.5))
        assert state.is_real()
        assert state.means == (1.0, 0.5)
        assert np.all(state.pos[4:9][[0, 1, 3, 4]] == 0.0)

    def test_resized_pads_and_truncates(self):
        state = FourierState.from_modes(2, pos={2: 1.0, 1: 3.0})
        assert state.resized(4).coefficient(2) == (1.0, 0.0)
        assert state.resized(1).coefficient(1) == (3.0, 0.0)

    def test_random_request_in_json(self):
        a = FourierState.from_dict({"random": {"K": 5, "kmin": 3}}, rng=np.random.default_rng(1))
        b = FourierState.from_dict({"random": {"K": 5, "kmin": 3}}, rng=np.random.default_rng(1))
        assert np.array_equal(a.pos, b.pos)
        assert a.coefficient(1) == (0.0, 0.0)

    def test_missing_field_is_named(self):
        with pytest.raises(SchemaError, match="'vel'"):
            FourierState.from_dict({"K": 1, "pos": [[0, 0]] * 3})


class TestSampledControl:
    def test_grid_properties(self):
        h = SampledControl(0.0, 2.0, np.ones(5))
        assert h.dt == pytest.approx(0.5)
        assert h.times[-1] == 2.0
        assert h.l2_norm() == pytest.approx(np.sqrt(2.0))

    def test_ledger_shape(self):
        h = SampledControl(0.0, 1.0, np.zeros((5, 9)))
        assert h.is_ledger and h.modes == 2
        with pytest.raises(TruncationMismatchError):
            SampledControl(0.0, 1.0, np.zeros((4, 9)))

    def test_interval_must_be_positive(self):
        with pytest.raises(ValidationError):
            SampledControl(1.0, 1.0, np.zeros(5))


class TestControlShape:
    def test_library(self):
        assert set(ControlShape.available_shapes()) == {"dirac", "dipole", "indicator_difference", "bump"}
        shape = ControlShape.from_library("indicator_difference")
        assert shape.kind == ShapeKind.INDICATOR_DIFFERENCE
        assert shape.sigma == pytest.approx(np.sqrt(2.0) - 1.0)
        assert shape.support == pytest.approx((0.0, 2.0 * DEFAULT_SIGMA * np.pi))

    def test_bump_has_unit_mass(self):
        b = ControlShape.from_library("bump").profile_samples(4096)
        assert b.sum().real * 2.0 * np.pi / 4096 == pytest.approx(1.0)
        assert np.all(b.real >= 0.0)

    @pytest.mark.parametrize("sigma", [0.0, 1.0, 1.5])
    def test_sigma_range(self, sigma):
        with pytest.raises(InvalidProfileError):
            ControlShape.indicator_difference(sigma=sigma)

    def test_unknown_kind(self):
        with pytest.raises(SchemaError, match="unknown shape"):
            ControlShape.from_dict({"kind": "triangle"})


class TestControlProblem:
    def test_horizon_must_exceed_two_pi(self):
        with pytest.raises(ValidationError):
            ControlProblem(ControlShape.dirac(), FourierState.zeros(3), T=2.0 * np.pi, K=3)

    def test_dipole_needs_zero_means(self):
        state = FourierState.from_modes(3, pos={0: 1.0})
        with pytest.raises(MeanObstructionError):
            ControlProblem(ControlShape.dipole(), state, T=T, K=3)

    def test_modes_beyond_the_truncation_are_refused(self):
        state = FourierState.from_modes(5, pos={5: 1.0, -5: 1.0})
        with pytest.raises(TruncationMismatchError, match="K=3"):
            ControlProblem(ControlShape.dirac(), state, T=T, K=3)
        padded = ControlProblem(ControlShape.dirac(), FourierState.from_modes(2, pos={2: 1.0}), T=T, K=4)
        assert padded.initial.K == 4 and padded.initial.coefficient(2) == (1.0, 0.0)
        quiet = ControlProblem(ControlShape.dirac(), FourierState.from_modes(5, pos={1: 1.0}), T=T, K=3)
        assert quiet.initial.K == 3

    def test_pipeline_selection(self):
        zero = FourierState.zeros(3)
        assert ControlProblem(ControlShape.dipole(), zero, T=T, K=3).pipeline == "dipole"
        assert ControlProblem(ControlShape.dirac(), zero, T=T, K=3).pipeline == "dirac"
        assert ControlProblem(ControlShape.from_library("bump"), zero, T=T, K=3).pipeline == "smooth_profile"
        problem = ControlProblem(ControlShape.indicator_difference(), zero, T=T, K=3)
        assert problem.is_two_phase
        assert problem.presteer_time == pytest.approx(0.5)

    def test_serialization_keeps_fields(self):
        problem = ControlProblem(ControlShape.indicator_difference(sigma=0.3), FourierState.from_modes(3, pos={3: 1.0}),
                                 T=T, K=3, method=Method.BIORTHOGONAL, grid=1025)
        again = ControlProblem.from_dict(json.loads(json.dumps(problem.to_dict())))
        assert again.method == Method.BIORTHOGONAL
        assert again.shape.sigma == 0.3
        assert again.grid == 1025
        assert again.initial.coefficient(3) == (1.0, 0.0)

    def test_missing_horizon_is_named(self):
        data = ControlProblem(ControlShape.dirac(), FourierState.zeros(3), T=T, K=3).to_dict()
        del data["T"]
        with pytest.raises(SchemaError, match="'T'"):
            ControlProblem.from_dict(data)


class TestConfigAndJson:
    def test_config_hash_is_deterministic(self):
        a = RunConfig("spectrum", {"kmax": 30}, seed=1)
        b = RunConfig("spectrum", {"kmax": 30}, seed=1)
        c = RunConfig("spectrum", {"kmax": 30}, seed=2)
        assert a.config_hash() == b.config_hash() != c.config_hash()

    def test_invalid_log_level(self):
        with pytest.raises(ValueError):
            RunConfig("spectrum", log_level="loud")

    def test_syntax_error_has_position(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "T": 7.0,\n  "K": \n}\n')
        with pytest.raises(SchemaError, match=r"bad.json:4:1"):
            load_json(path)

    def test_require_and_pairs(self):
        with pytest.raises(SchemaError, match="'K'"):
            require({"T": 1.0}, "K", "problem")
        assert complex_from_pair([1.0, -2.0]) == 1.0 - 2.0j
        with pytest.raises(SchemaError):
            complex_from_pair("1+2j")
