import numpy as np
import pytest
from scipy.integrate import solve_ivp

from analysis.moments import beta_coefficients
from analysis.solver import (
    FrameDirection, decompose, default_grid, evolve_forced, evolve_forced_with_error, evolve_free, frame_transform,
    mean_prediction, norm_W, propagators, required_samples, sobolev_norm,
)
from analysis.spectrum import Branch, build_table
from errors import RefinementRequiredError, TruncationMismatchError, ValidationError
from inputs.shapes import ControlShape
from inputs.state import FourierState, SampledControl


def _mode_ode(k, forcing=None):
    a = k * k - 2j * k
    b = 1j * k ** 3

    def rhs(t, y):
        f = forcing(t) if forcing else 0.0
        return [y[1], f - a * y[1] + b * y[0]]
    return rhs


def _integrate(k, c, d, t, forcing=None):
    sol = solve_ivp(_mode_ode(k, forcing), (0.0, t), [complex(c), complex(d)],
                    method="DOP853", rtol=1e-12, atol=1e-14)
    return sol.y[0, -1], sol.y[1, -1]


def test_free_evolution_matches_integrator(rng):
    state = FourierState.random(16, rng, kmin=1, means=(0.3, -0.2))
    t = 2.0 * np.pi
    exact = evolve_free(state, t)
    errors = []
    for k in range(-16, 17):
        c, d = state.coefficient(k)
        num = _integrate(k, c, d, t)
        errors.append(abs(num[0] - exact.coefficient(k)[0]) + abs(num[1] - exact.coefficient(k)[1]))
    assert max(errors) <= 1e-8 * sobolev_norm(state, 0.0)


def test_propagator_identity_at_zero():
    phi = propagators(4, 0.0)
    assert phi.shape == (9, 2, 2)
    assert np.allclose(phi, np.broadcast_to(np.eye(2), phi.shape), atol=1e-15)


def test_semigroup(rng):
    state = FourierState.random(8, rng)
    once = evolve_free(state, 3.0)
    twice = evolve_free(evolve_free(state, 1.0), 2.0)
    assert np.allclose(once.pos, twice.pos, atol=1e-12)
    assert np.allclose(once.vel, twice.vel, atol=1e-12)


def test_negative_time_rejected():
    with pytest.raises(ValidationError):
        evolve_free(FourierState.zeros(3), -1.0)


def test_double_mode_jordan_block():
    # k = 0: v'' = 0, so c0 + t d0
    state = FourierState.from_modes(3, pos={0: 1.0}, vel={0: 2.0})
    out = evolve_free(state, 1.5)
    assert out.means[0] == pytest.approx(4.0)
    assert out.means[1] == pytest.approx(2.0)
    # k = 2 against the integrator
    state = FourierState.from_modes(3, pos={2: 1.0 + 0.5j}, vel={2: -0.3})
    c, d = _integrate(2, 1.0 + 0.5j, -0.3, 1.7)
    out = evolve_free(state, 1.7)
    assert out.coefficient(2)[0] == pytest.approx(c, abs=1e-10)
    assert out.coefficient(2)[1] == pytest.approx(d, abs=1e-10)


def test_forced_dirac_mode_matches_integrator():
    K, T = 3, 2.0
    n = 4097
    h = SampledControl(0.0, T, np.sin(np.linspace(0.0, T, n)))
    betas = beta_coefficients(ControlShape.dirac(), K)
    final, err = evolve_forced_with_error(FourierState.zeros(K), betas, h)
    c, d = _integrate(3, 0.0, 0.0, T, forcing=lambda t: np.sin(t) / (2.0 * np.pi))
    assert final.coefficient(3)[0] == pytest.approx(c, abs=1e-9)
    assert final.coefficient(3)[1] == pytest.approx(d, abs=1e-9)
    assert err < 1e-8


def test_coarse_grid_requests_refinement():
    h = SampledControl(0.0, 2.0, np.ones(11))
    betas = beta_coefficients(ControlShape.dirac(), 6)
    with pytest.raises(RefinementRequiredError, match="refine"):
        evolve_forced(FourierState.zeros(6), betas, h)


def test_grid_helpers():
    n = default_grid(2.0, 6)
    assert n >= required_samples(2.0, 6)
    assert (n - 1) & (n - 2) == 0


def test_dipole_preserves_means(rng):
    K, T = 4, 2.0 * np.pi + 1.0
    n = default_grid(T, K)
    betas = beta_coefficients(ControlShape.dipole(), K)
    state = FourierState.random(K, rng, means=(0.7, -0.4))
    for _ in range(20):
        h = SampledControl(0.0, T, rng.standard_normal(n))
        out = evolve_forced(state, betas, h)
        assert out.means[1] == pytest.approx(-0.4, abs=1e-12)
        assert out.means[0] == pytest.approx(0.7 - 0.4 * T, abs=1e-12)


def test_dirac_mean_prediction():
    K, T = 2, 3.0
    n = 2049
    h = SampledControl(0.0, T, np.ones(n))
    state = FourierState.from_modes(K, pos={0: 0.5}, vel={0: 0.25})
    expected_pos = 0.5 + 0.25 * T + T * T / (4.0 * np.pi)
    expected_vel = 0.25 + T / (2.0 * np.pi)
    pos, vel = mean_prediction(state, 1.0, h)
    assert pos == pytest.approx(expected_pos, abs=1e-12)
    assert vel == pytest.approx(expected_vel, abs=1e-12)
    out = evolve_forced(state, beta_coefficients(ControlShape.dirac(), K), h)
    assert out.means[0] == pytest.approx(expected_pos, abs=1e-10)
    assert out.means[1] == pytest.approx(expected_vel, abs=1e-10)


def test_frame_round_trip(rng):
    state = FourierState.random(6, rng)
    back = frame_transform(frame_transform(state, FrameDirection.TO_MOVING, 1.3), FrameDirection.FROM_MOVING, 1.3)
    assert np.allclose(back.pos, state.pos, atol=1e-14)
    assert np.allclose(back.vel, state.vel, atol=1e-14)


def test_frame_velocity_shift():
    state = FourierState.from_modes(2, pos={1: 1.0})
    moving = frame_transform(state, FrameDirection.TO_MOVING, 0.0)
    assert moving.coefficient(1) == (1.0, 1j)


def test_norms():
    assert sobolev_norm(FourierState.from_modes(2, pos={1: 1.0}), 0.0) == pytest.approx(np.sqrt(2.0))
    assert sobolev_norm(FourierState.from_modes(2, vel={1: 1.0}), 1.0) == pytest.approx(np.sqrt(2.0))
    assert norm_W(FourierState.from_modes(2, pos={1: 1.0}, vel={2: 1.0})) == pytest.approx(129.0)


def test_modal_decomposition_reproduces_free_motion(rng):
    state = FourierState.random(6, rng, kmin=1, means=(0.4, 0.1))
    table = build_table(6)
    coeffs = decompose(state, table)
    t = 0.7
    later = evolve_free(state, t)
    for k in (1, -4, 5):
        lp, lm = table.value(k, Branch.PLUS), table.value(k, Branch.MINUS)
        pos = coeffs.a_plus[k] * np.exp(lp * t) + coeffs.a_minus[k] * np.exp(lm * t)
        assert pos == pytest.approx(later.coefficient(k)[0], rel=1e-10, abs=1e-12)
    for k in (0, 2, -2):
        lam = table.value(k, Branch.PLUS)
        pos = (coeffs.a[k] + coeffs.a_tilde[k] * t) * np.exp(lam * t)
        assert pos == pytest.approx(later.coefficient(k)[0], rel=1e-10, abs=1e-12)


def test_decomposition_needs_a_large_enough_table(rng):
    with pytest.raises(TruncationMismatchError):
        decompose(FourierState.random(6, rng), build_table(4))
