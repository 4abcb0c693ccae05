import numpy as np
import pytest

from analysis.spectrum import (
    Branch, asymptotic_residuals, build_table, classify, eigenvalue, eigenvalues, mu_sequence,
    quadratic_residual,
)
from errors import InvalidTruncationError


def test_table_size():
    assert len(build_table(30)) == 122
    assert len(build_table(3)) == 14


def test_small_truncation_rejected():
    with pytest.raises(InvalidTruncationError):
        build_table(2)


def test_double_eigenvalues():
    assert eigenvalue(0, Branch.PLUS) == 0.0
    assert eigenvalue(0, Branch.MINUS) == 0.0
    for k, expected in ((2, -2.0 + 2.0j), (-2, -2.0 - 2.0j)):
        assert eigenvalue(k, Branch.PLUS) == pytest.approx(expected, abs=1e-14)
        assert eigenvalue(k, Branch.MINUS) == pytest.approx(expected, abs=1e-14)


def test_first_mode_closed_form():
    # (1 - 2i)^2 + 4i = -3
    assert eigenvalue(1, Branch.PLUS) == pytest.approx((-1.0 + 2.0j + 1j * np.sqrt(3.0)) / 2.0)
    assert eigenvalue(1, Branch.MINUS) == pytest.approx((-1.0 + 2.0j - 1j * np.sqrt(3.0)) / 2.0)


def test_characteristic_residuals():
    table = build_table(30)
    assert table.max_residual() <= 1e-10
    assert quadratic_residual(7, 1.0 + 1.0j) > 1e-3
    table.check_invariants()


def test_conjugation_symmetry():
    ks = np.arange(1, 31)
    for branch in Branch:
        assert np.allclose(eigenvalues(-ks, branch), np.conj(eigenvalues(ks, branch)), rtol=1e-15, atol=0.0)


def test_vectorized_matches_scalar():
    ks = np.arange(-12, 13)
    for branch in Branch:
        scalar = np.array([eigenvalue(int(k), branch) for k in ks])
        assert np.allclose(eigenvalues(ks, branch), scalar, rtol=1e-14, atol=1e-14)


def test_branch_asymptotics():
    residuals = asymptotic_residuals(30)
    assert len(residuals) == 28
    for _, r_plus, r_minus in residuals:
        assert r_plus <= 2.0
        assert r_minus <= 2.0


def test_hyperbolic_branch_stays_near_unit_damping():
    for k in range(3, 31):
        lam = eigenvalue(k, Branch.PLUS)
        assert lam.real == pytest.approx(-1.0, abs=0.2)
        assert lam.imag == pytest.approx(k, abs=0.2)


def test_branch_separation():
    assert build_table(30).branch_separation() >= 0.5


def test_classification():
    assert classify(0, Branch.MINUS) == "double"
    assert classify(-2, Branch.PLUS) == "double"
    assert classify(5, Branch.PLUS) == "hyperbolic"
    assert classify(-5, Branch.MINUS) == "parabolic"
    frame = build_table(3).as_frame()
    assert list(frame.columns) == ["k", "branch", "re", "im", "class"]
    assert (frame["class"] == "double").sum() == 6


def test_mu_sequence():
    seq = mu_sequence(30)
    assert seq.values[0] == 0.0
    assert seq.values[-5] == pytest.approx(-np.conj(seq.values[5]))
    assert seq.separation > 0.5
    assert seq.tail_constant < 1.0
