import json

import numpy as np
import pytest
from scipy.integrate import simpson

from analysis.biorthogonal import BiorthogonalFamily, family_keys
from analysis.moments import (GRAM_CONDITION_LIMIT, beta_coefficients, build_moment_system, constraint_moments,
                              gamma_coefficients)
from analysis.solver import FrameDirection, evolve_forced, frame_transform
from analysis.spectrum import Branch, eigenvalue
from analysis.synthesis import (
    AlphaLedger, ControlPhase, alpha_coefficients, alpha_from_system, assemble_control, closed_loop_report,
    phases_from_dict, presteer_mean, presteer_shape, run_pipeline, simulate, smooth_step, synthesize_control,
)
from errors import IndexCoverageError, RefinementRequiredError, SchemaError, ValidationError
from inputs.problem import ControlProblem, Method
from inputs.shapes import ControlShape, ShapeKind
from inputs.state import FourierState, SampledControl

T = 2.0 * np.pi + 1.0


def _fake_family(T_family=T, kmax=1):
    return BiorthogonalFamily(T=T_family, kmax=kmax, period=T_family + 4.0, truncation=512,
                              psi={("plus", 1): np.zeros(64, dtype=complex)})


class TestSmoothStep:
    def test_endpoints(self):
        w, w1, w2 = smooth_step(np.array([0.0, 2.0]), 2.0)
        assert w.tolist() == [1.0, 0.0]
        assert np.all(w1 == 0.0) and np.all(w2 == 0.0)

    def test_derivatives(self):
        t = np.linspace(0.0, 1.5, 20001)
        w, w1, w2 = smooth_step(t, 1.5)
        assert np.all(np.diff(w) <= 1e-15)
        assert np.max(np.abs(np.gradient(w, t) - w1)) <= 1e-3 * np.max(np.abs(w1))
        assert np.max(np.abs(np.gradient(w1, t) - w2)) <= 1e-3 * np.max(np.abs(w2))


class TestPresteer:
    def test_moments_of_the_presteer_control(self):
        _, h = presteer_mean(1.0, 0.0, 1.0)
        t = h.times
        assert abs(simpson(h.samples, dx=h.dt)) <= 1e-8
        assert simpson((1.0 - t) * h.samples, dx=h.dt) == pytest.approx(-1.0, abs=1e-8)

    def test_zero_means_need_no_control(self):
        _, h = presteer_mean(0.0, 0.0, 0.5, grid=257)
        assert np.all(h.samples == 0.0)

    def test_positive_duration(self):
        with pytest.raises(ValidationError):
            presteer_mean(1.0, 0.0, 0.0)

    def test_bump_sits_inside_the_indicator(self):
        shape = ControlShape.indicator_difference(offset=0.3)
        bump = presteer_shape(shape)
        assert bump.kind == ShapeKind.DISTRIBUTED
        low, high = bump.support
        start, end = shape.support
        assert start < low < high < end
        assert bump.bump_center == pytest.approx(0.3 + shape.sigma * np.pi)

    def test_means_reach_zero(self, rng):
        K = 4
        state = FourierState.random(K, rng, kmin=3, means=(1.0, 0.5))
        bump, h = presteer_mean(2.0 * np.pi * 1.0, 2.0 * np.pi * 0.5, 1.0, grid=8193)
        after = evolve_forced(state, beta_coefficients(bump, K), h)
        assert abs(after.means[0]) <= 1e-8
        assert abs(after.means[1]) <= 1e-8


class TestAlpha:
    def test_single_mode_dipole(self):
        initial = FourierState.from_modes(6, pos={4: 1.0, -4: 1.0})
        problem = ControlProblem(ControlShape.dipole(), initial, T=T, K=6)
        ledger = alpha_coefficients(problem)
        gammas = gamma_coefficients(frame_transform(initial, FrameDirection.TO_MOVING))
        for branch, alphas in ((Branch.PLUS, ledger.alpha_plus), (Branch.MINUS, ledger.alpha_minus)):
            lam = eigenvalue(4, branch)
            expected = -np.exp(lam * T / 2.0) * gammas[(4, branch)] / 4j
            assert alphas[4] == pytest.approx(expected, rel=1e-12)
            assert alphas[3] == 0.0
        assert 0.0 < ledger.summability < np.inf

    def test_tilde_weights(self):
        state = FourierState.from_modes(3, pos={2: 0.3}, vel={2: -0.1})
        system = build_moment_system(ControlShape.dirac(), state, T, 3)
        ledger = alpha_from_system(system)
        first = next(c for c in system.constraints if c.k == 2 and c.degree == 0)
        second = next(c for c in system.constraints if c.k == 2 and c.degree == 1)
        shift = np.exp(-first.exponent * T / 2.0)
        assert ledger.alpha[2] == pytest.approx(shift * first.rhs)
        assert ledger.alpha_tilde[2] == pytest.approx(shift * second.rhs - T / 2.0 * ledger.alpha[2])
        assert set(ledger.alpha_tilde) == {-2, 2}

    def test_zero_and_linear(self, band_state):
        zero = alpha_from_system(build_moment_system(ControlShape.dipole(), FourierState.zeros(6), T, 6))
        assert zero.is_zero()
        one = alpha_from_system(build_moment_system(ControlShape.dipole(), band_state, T, 6))
        two = alpha_from_system(build_moment_system(ControlShape.dipole(), band_state.scaled(2.0), T, 6))
        doubled = one.scaled(2.0).weights()
        for key, value in two.weights().items():
            assert value == pytest.approx(doubled[key], rel=1e-12, abs=1e-300)
        assert one.kmax == 6
        assert set(one.to_dict()) == {"T", "summability", "alpha_plus", "alpha_minus", "alpha", "alpha_tilde"}

    def test_mean_constraint_has_no_biorthogonal_function(self):
        state = FourierState.from_modes(3, pos={0: 1.0})
        system = build_moment_system(ControlShape.from_library("bump"), state, T, 3)
        with pytest.raises(IndexCoverageError, match="min-norm"):
            synthesize_control(system, Method.BIORTHOGONAL, family=_fake_family(kmax=3))

    def test_expansion_that_misses_its_moments_is_rejected(self):
        state = FourierState.from_modes(3, pos={3: 1.0, -3: 1.0})
        system = build_moment_system(ControlShape.dipole(), state, T, 3)
        silent = BiorthogonalFamily(T=T, kmax=3, period=T + 4.0, truncation=512,
                                    psi={key: np.zeros(64, dtype=complex) for key in family_keys(3)})
        with pytest.raises(RefinementRequiredError, match="increase the family grid"):
            synthesize_control(system, Method.BIORTHOGONAL, family=silent)

    def test_assembly_guards(self):
        ledger = AlphaLedger(T=T, alpha_plus={5: 1.0})
        with pytest.raises(ValidationError):
            assemble_control(ledger, _fake_family(T_family=T + 1.0))
        with pytest.raises(IndexCoverageError):
            assemble_control(ledger, _fake_family())
        h = assemble_control(AlphaLedger(T=T), _fake_family(), grid=65)
        assert np.all(h.samples == 0.0)
        assert h.meta["norm_bound"] == 0.0


class TestPipelines:
    def test_dipole(self, band_state):
        problem = ControlProblem(ControlShape.dipole(), band_state, T=T, K=6)
        result = run_pipeline(problem)
        report = result.report
        assert report["pipeline"] == "dipole"
        assert [p.name for p in result.phases] == ["null"]
        assert report["final_norm_ratio"] <= 1e-6
        assert report["moment_residual_relative"] <= 1e-7
        assert report["phases"][0]["max_imag"] == 0.0
        assert set(report["phase_timings"]) == {"null"}

    def test_dirac_keeps_a_free_position_mean(self, rng):
        initial = FourierState.random(6, rng, kmin=3, means=(0.7, 0.0))
        problem = ControlProblem(ControlShape.dirac(), initial, T=T, K=6)
        report = run_pipeline(problem).report
        assert report["pipeline"] == "dirac"
        assert report["final_norm_ratio"] <= 1e-6
        assert report["dirac_mean"]["residual"] <= 1e-10
        assert report["dirac_mean"]["velocity_mean"] <= 1e-7

    def test_indicator_difference_two_phases(self, rng):
        initial = FourierState.random(6, rng, kmin=3, means=(1.0, 0.5))
        problem = ControlProblem(ControlShape.indicator_difference(), initial, T=2.0 * np.pi + 2.0, K=6)
        result = run_pipeline(problem)
        report = result.report
        assert [p.name for p in result.phases] == ["presteer", "null"]
        assert result.phases[1].control.t0 == pytest.approx(1.0)
        assert report["presteer"]["eps"] == pytest.approx(1.0)
        assert report["presteer"]["position_mean"] <= 1e-8
        assert report["presteer"]["velocity_mean"] <= 1e-8
        assert report["final_norm_ratio"] <= 1e-5

    def test_smooth_profile_with_means(self, rng):
        initial = FourierState.random(4, rng, kmin=1, means=(0.7, -0.3))
        problem = ControlProblem(ControlShape.from_library("bump"), initial, T=T, K=4)
        result = run_pipeline(problem)
        report = result.report
        assert report["pipeline"] == "smooth_profile"
        assert [p.name for p in result.phases] == ["null"]
        assert 1.0 <= report["gram_condition"] < GRAM_CONDITION_LIMIT
        assert report["moment_residual_relative"] <= 1e-6
        assert report["final_norm_ratio"] <= 1e-5
        assert report["passed"] is True and report["failed_checks"] == []
        assert report["phases"][0]["max_imag"] == 0.0

    def test_zero_data(self):
        problem = ControlProblem(ControlShape.dipole(), FourierState.zeros(4), T=T, K=4)
        result = run_pipeline(problem)
        assert np.all(result.phases[0].control.samples == 0.0)
        assert result.final_state.is_zero()

    def test_stored_controls_reproduce_the_report(self, band_state):
        problem = ControlProblem(ControlShape.dipole(), band_state, T=T, K=6)
        result = run_pipeline(problem)
        phases = phases_from_dict(json.loads(json.dumps(result.controls_dict())))
        again = closed_loop_report(problem, phases)
        assert again["moment_residual_max"] == result.report["moment_residual_max"]
        assert again["final_norm_ratio"] == result.report["final_norm_ratio"]

    def test_phases_must_tile_the_horizon(self, band_state):
        problem = ControlProblem(ControlShape.dipole(), band_state, T=T, K=6)
        short = ControlPhase("null", ControlShape.dipole(), SampledControl(0.0, T - 1.0, np.zeros(65)))
        with pytest.raises(ValidationError):
            simulate(problem, [short])

    def test_phase_names(self):
        data = ControlPhase("null", ControlShape.dirac(), SampledControl(0.0, 1.0, np.zeros(5))).to_dict()
        data["name"] = "middle"
        with pytest.raises(SchemaError):
            ControlPhase.from_dict(data)


@pytest.mark.slow
def test_biorthogonal_route_matches_min_norm(rng):
    T_long = 4.0 * np.pi
    initial = FourierState.random(4, rng, kmin=3)
    common = dict(shape=ControlShape.dipole(), initial=initial, T=T_long, K=4, truncation=512, family_grid=8192)
    bio = run_pipeline(ControlProblem(method=Method.BIORTHOGONAL, **common))
    mn = run_pipeline(ControlProblem(method=Method.MIN_NORM, **common))
    system = build_moment_system(ControlShape.dipole(), frame_transform(initial, FrameDirection.TO_MOVING), T_long, 4)
    scale = 1.0 + np.max(np.abs(system.rhs))
    row = bio.report["phases"][0]
    # the expansion itself, before any min-norm correction, already meets the moments
    assert row["relative_before_polish"] <= 2e-2
    assert row["norm_bound"] >= row["control_norm"] * (1.0 - 1e-3)
    assert bio.report["moment_residual_relative"] <= 1e-7
    assert bio.report["final_norm_ratio"] <= 1e-6
    assert bio.report["passed"] is True
    # both controls solve the same system, so their difference is annihilated by it
    difference = SampledControl(0.0, T_long, bio.phases[0].control.samples - mn.phases[0].control.samples)
    assert np.max(np.abs(constraint_moments(difference, system))) <= 1e-6 * scale
    # the Gram solution has the least L2 norm among all solutions
    assert row["control_norm"] >= mn.report["phases"][0]["control_norm"] * (1.0 - 1e-6)
