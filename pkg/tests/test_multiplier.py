import numpy as np
import pytest

from analysis.multiplier import (
    DEFAULT_B, MultiplierParams, log_multiplier, multiplier_estimates, multiplier_eval, multiplier_nodes,
    multiplier_params_for, node,
)
from analysis.spectrum import Branch, eigenvalue
from errors import ValidationError

T = 4.0 * np.pi


@pytest.fixture(scope="module")
def params():
    return multiplier_params_for(T, window=50.0)


def test_nodes_invert_counting(params):
    assert np.allclose(params.counting(params.nodes), np.arange(params.truncation + 1), atol=1e-9)
    assert node(params.a_slope, params.b_coef, 0) == pytest.approx(params.B)
    assert np.all(np.diff(params.nodes) > 0)


def test_nodes_at_the_estimate_coefficient():
    params = multiplier_nodes(1.0, np.sqrt(2.0), 4)
    assert params.nodes[0] == pytest.approx(2.0, rel=1e-12)
    assert params.nodes[1] == pytest.approx(((np.sqrt(2.0) + np.sqrt(6.0)) / 2.0) ** 2, rel=1e-12)
    assert params.nodes[1] == pytest.approx(3.73205, abs=1e-5)


def test_parameters_from_horizon(params):
    assert params.a_slope == pytest.approx(1.0)
    assert params.b_coef == DEFAULT_B == 2.0
    assert params.B == pytest.approx(4.0)
    assert params.log_growth == pytest.approx(8.0)
    assert params.exact_radius > 50.0
    assert set(params.to_dict()) == {"a", "b", "B", "truncation", "log_growth"}


def test_horizon_must_exceed_two_pi():
    with pytest.raises(ValidationError):
        multiplier_params_for(2.0 * np.pi, window=50.0)
    with pytest.raises(ValidationError):
        MultiplierParams(a_slope=-0.1, b_coef=1.0, truncation=10)


def test_decay_rate_must_beat_the_products():
    with pytest.raises(ValidationError, match="sqrt"):
        multiplier_params_for(T, window=50.0, b_coef=1.0)


def test_normalized_at_i(params):
    values, error = multiplier_eval(1j, params)
    assert values[0] == pytest.approx(1.0, abs=1e-15)
    assert error[0] == 0.0


def test_even_about_i(params):
    v = np.array([3.0 + 1.0j, -7.5 + 2.0j, 12.0 - 4.0j])
    left = log_multiplier(1j + v, params)
    right = log_multiplier(1j - v, params)
    assert np.allclose(np.exp(left - right), 1.0, atol=1e-10)


def test_vanishes_at_shifted_nodes(params):
    tau = params.nodes[3]
    at_zero = abs(multiplier_eval(1j + tau, params)[0][0])
    nearby = abs(multiplier_eval(1j + tau + 0.5, params)[0][0])
    assert at_zero < 1e-10 * nearby


def test_tail_converges_with_truncation(params):
    finer = multiplier_nodes(params.a_slope, params.b_coef, 4 * params.truncation)
    x = np.linspace(-45.0, 45.0, 61)
    z = np.concatenate([x + 3.0j, x - 2.0j])
    assert np.max(np.abs(log_multiplier(z, params) - log_multiplier(z, finer))) <= 1e-4


def test_short_truncation_is_extended():
    short = multiplier_nodes(1.0, DEFAULT_B, 20)
    assert short.exact_radius < 30.0
    far = np.array([40.0, -75.0 + 0.5j, 120.0])
    reference = multiplier_params_for(T, window=200.0)
    assert short.covering(150.0).truncation >= reference.truncation // 2
    assert np.max(np.abs(log_multiplier(far, short) - log_multiplier(far, reference))) <= 1e-3
    values, error = multiplier_eval(far, short)
    assert np.all(np.isfinite(values)) and np.all(error < 1e-3)


def test_decays_on_real_line():
    far = multiplier_params_for(T, window=400.0)
    values, _ = multiplier_eval(np.array([10.0, 400.0]), far)
    assert abs(values[1]) < 1e-10 * abs(values[0])


def test_real_line_decay_rate():
    far = multiplier_params_for(T, window=400.0)
    x = np.linspace(150.0, 400.0, 26)
    # log|m(x)| = log x - b pi sqrt(x) + const + o(1)
    for side in (x, -x):
        fitted = log_multiplier(side, far).real + far.b_coef * np.pi * np.sqrt(x) - np.log(x)
        assert np.ptp(fitted) <= 1.5
        assert abs(np.mean(fitted) - far.log_growth) <= 8.0


def test_growth_along_the_minus_branch():
    far = multiplier_params_for(T, window=400.0)
    for k in (8, 10):
        ratio = log_multiplier(1j * eigenvalue(k, Branch.MINUS), far)[0].real / (np.pi * far.a_slope * k * k)
        assert 0.5 <= ratio <= 1.0


def test_estimate_constants():
    estimates = multiplier_estimates(T, kmax=6, xmax=200.0)
    for name in ("real_line", "plus_floor", "minus_floor"):
        assert np.isfinite(estimates[name]) and estimates[name] > 0.0
    # |m(0)| >= 1 on the real axis since every factor is 1 + 1/tau_k^2 there
    assert 1.0 <= estimates["real_line"] <= np.exp(multiplier_params_for(T, 200.0).log_growth + 8.0)
    wider = multiplier_estimates(T, kmax=10, xmax=400.0)
    assert wider["real_line"] <= 10.0 * estimates["real_line"]
    assert wider["minus_floor"] >= 1e-3 * estimates["minus_floor"]
