"""
Spectrum of the Moving-Frame Operator
=====================================

Closed-form eigenvalues of the free structurally damped wave operator
written in the moving frame (speed c = -1, damping coefficient 1):

    v_tt - 2 v_xt - v_txx + v_xxx = 0   on the torus.

Each Fourier mode e^{ikx} evolves by the characteristic equation

    lambda^2 + (k^2 - 2ik) lambda - i k^3 = 0,

with roots lambda_k^(+/-) = (-(k^2 - 2ik) +/- sqrt(k^4 - 4k^2)) / 2.

Conventions:
------------
- Roots are computed for k >= 0 with the principal square root and
  extended to k < 0 by conjugation, lambda_{-k} = conj(lambda_k); at k = 1
  the principal root alone would swap the branches under conjugation.
- k in {0, +/-2} are double roots (0 and -2 +/- 2i); both branches store
  the same value.
- The "plus" branch (hyperbolic, ~ -1 + ik) is evaluated without the
  cancellation in k^2 - sqrt(k^4 - 4k^2).

Example Usage:
--------------
```python
from analysis.spectrum import Branch, build_table, eigenvalue, mu_sequence

eigenvalue(5, Branch.PLUS)          # ~ -1.04356 + 5j
table = build_table(30)
table.as_frame().head()            # k, branch, re, im, class
mu_sequence(200).separation        # >= 0.4
```
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Tuple

import numpy as np
import pandas as pd

from errors import InvalidTruncationError, NumericalError

logger = logging.getLogger(__name__)

DOUBLE_MODES = (-2, 0, 2)
RESIDUAL_TOLERANCE = 1e-10


class Branch(str, Enum):
    PLUS = "plus"
    MINUS = "minus"


def _eigenvalue_nonnegative(k: int, branch: Branch) -> complex:
    k2 = float(k * k)
    if k >= 3:
        s = np.sqrt(k2 * k2 - 4.0 * k2)
        if branch == Branch.PLUS:
            return complex(-2.0 * k2 / (k2 + s), k)
        return complex(-(k2 + s) / 2.0, k)
    s = np.sqrt(complex(k2 * k2 - 4.0 * k2))
    sign = 1.0 if branch == Branch.PLUS else -1.0
    return complex((-(k2 - 2j * k) + sign * s) / 2.0)


def eigenvalue(k: int, branch: Branch) -> complex:
    """lambda_k^branch in closed form."""
    branch = Branch(branch)
    k = int(k)
    if k < 0:
        return np.conj(_eigenvalue_nonnegative(-k, branch))
    return _eigenvalue_nonnegative(k, branch)


def eigenvalues(ks: np.ndarray, branch: Branch) -> np.ndarray:
    """Vectorized ``eigenvalue`` over an integer array of modes."""
    branch = Branch(branch)
    ks = np.asarray(ks, dtype=np.int64)
    ak = np.abs(ks).astype(float)
    big = ak >= 3
    k2 = ak * ak
    s = np.sqrt(np.where(big, k2 * k2 - 4.0 * k2, 0.0))
    if branch == Branch.PLUS:
        out = -2.0 * k2 / np.where(big, k2 + s, 1.0) + 1j * ak
    else:
        out = -(k2 + s) / 2.0 + 1j * ak
    out = out.astype(complex)
    for idx in np.flatnonzero(~big):
        out[idx] = _eigenvalue_nonnegative(int(ak[idx]), branch)
    return np.where(ks < 0, np.conj(out), out)


def quadratic_residual(k: int, lam: complex) -> float:
    """Relative residual of the characteristic equation at lam."""
    res = lam * lam + (k * k - 2j * k) * lam - 1j * k ** 3
    return abs(res) / max(1.0, abs(lam) ** 2)


def classify(k: int, branch: Branch) -> str:
    if k in DOUBLE_MODES:
        return "double"
    return "hyperbolic" if Branch(branch) == Branch.PLUS else "parabolic"


@dataclass(frozen=True)
class Eigenvalue:
    k: int
    branch: Branch
    value: complex

    @property
    def classification(self) -> str:
        return classify(self.k, self.branch)

    @property
    def residual(self) -> float:
        return quadratic_residual(self.k, self.value)


@dataclass
class EigenvalueTable:
    """lambda_k^(+/-) for |k| <= K, keyed by (k, branch)."""
    K: int
    entries: Dict[Tuple[int, Branch], Eigenvalue] = field(default_factory=dict)

    @property
    def doubles(self) -> Dict[int, complex]:
        return {k: self.value(k, Branch.PLUS) for k in DOUBLE_MODES if abs(k) <= self.K}

    def value(self, k: int, branch: Branch) -> complex:
        try:
            return self.entries[(int(k), Branch(branch))].value
        except KeyError:
            raise InvalidTruncationError(f"mode {k} outside the table (K={self.K}).") from None

    def pair(self, k: int) -> Tuple[complex, complex]:
        return self.value(k, Branch.PLUS), self.value(k, Branch.MINUS)

    def __iter__(self) -> Iterator[Eigenvalue]:
        for key in sorted(self.entries, key=lambda kb: (kb[0], kb[1].value)):
            yield self.entries[key]

    def __len__(self) -> int:
        return len(self.entries)

    def max_residual(self) -> float:
        return max(e.residual for e in self.entries.values())

    def branch_separation(self) -> float:
        """min over 3 <= |k| <= K of |lambda_k^+ - lambda_k^-| / k^2."""
        gaps = [abs(self.value(k, Branch.PLUS) - self.value(k, Branch.MINUS)) / k ** 2
                for k in range(-self.K, self.K + 1) if abs(k) >= 3]
        return min(gaps) if gaps else float("inf")

    def check_invariants(self) -> None:
        """Raise if a structural property of the spectrum fails numerically."""
        failures: List[str] = []
        if self.max_residual() > RESIDUAL_TOLERANCE:
            failures.append(f"quadratic residual {self.max_residual():.2e}")
        if self.branch_separation() < 0.5:
            failures.append(f"branch separation {self.branch_separation():.3f} < 1/2")
        for e in self.entries.values():
            if e.k != 0 and (e.value.real >= 0.0 or (1j * e.value).imag > -0.5):
                failures.append(f"lambda_{e.k}^{e.branch.value} = {e.value} violates Re < 0 / Im(i lambda) <= -1/2")
            mirror = self.entries[(-e.k, e.branch)].value
            if abs(mirror - np.conj(e.value)) > 1e-14 * max(1.0, abs(e.value)):
                failures.append(f"conjugation fails at k={e.k}")
        if failures:
            raise NumericalError("spectrum invariants violated: " + "; ".join(failures))

    def as_frame(self) -> pd.DataFrame:
        return pd.DataFrame([
            {"k": e.k, "branch": e.branch.value, "re": e.value.real, "im": e.value.imag,
             "class": e.classification}
            for e in self
        ])


def build_table(K: int) -> EigenvalueTable:
    if K < 3:
        raise InvalidTruncationError(f"the spectrum table needs K >= 3, got {K}.")
    table = EigenvalueTable(K=K)
    for branch in Branch:
        ks = np.arange(-K, K + 1)
        for k, lam in zip(ks, eigenvalues(ks, branch)):
            table.entries[(int(k), branch)] = Eigenvalue(int(k), branch, complex(lam))
    logger.info("spectrum table K=%d: %d entries, max residual %.2e", K, len(table), table.max_residual())
    return table


def asymptotic_residuals(K: int) -> List[Tuple[int, float, float]]:
    """(k, k^2 |lambda^+ - (-1+ik)|, k^2 |lambda^- - (-k^2+1+ik)|) for 3 <= k <= K."""
    if K < 3:
        raise InvalidTruncationError(f"asymptotic residuals need K >= 3, got {K}.")
    ks = np.arange(3, K + 1)
    plus = eigenvalues(ks, Branch.PLUS)
    minus = eigenvalues(ks, Branch.MINUS)
    r_plus = np.abs(plus - (-1.0 + 1j * ks)) * ks ** 2
    r_minus = np.abs(minus - (-(ks ** 2) + 1.0 + 1j * ks)) * ks ** 2
    return [(int(k), float(rp), float(rm)) for k, rp, rm in zip(ks, r_plus, r_minus)]


def mu_values(ks: np.ndarray) -> np.ndarray:
    """mu_k = sgn(k) sqrt(-lambda_k^-), mu_0 = 0."""
    ks = np.asarray(ks, dtype=np.int64)
    return np.sign(ks) * np.sqrt(-eigenvalues(ks, Branch.MINUS))


def mu(k: int) -> complex:
    return complex(mu_values(np.array([k]))[0])


@dataclass
class MuSequence:
    K: int
    values: Dict[int, complex]

    def as_array(self) -> np.ndarray:
        return np.array([self.values[k] for k in range(-self.K, self.K + 1)])

    @property
    def separation(self) -> float:
        z = self.as_array()
        gaps = np.abs(z[:, None] - z[None, :])
        np.fill_diagonal(gaps, np.inf)
        return float(gaps.min())

    @property
    def tail_constant(self) -> float:
        """Fitted C in |mu_k - k + i/2| <= C / |k| over 3 <= |k| <= K."""
        return max(abs(self.values[k] - k + 0.5j) * abs(k)
                   for k in range(-self.K, self.K + 1) if abs(k) >= 3)


def mu_sequence(K: int) -> MuSequence:
    if K < 3:
        raise InvalidTruncationError(f"the mu sequence needs K >= 3, got {K}.")
    ks = np.arange(-K, K + 1)
    seq = MuSequence(K=K, values={int(k): complex(m) for k, m in zip(ks, mu_values(ks))})
    logger.debug("mu sequence K=%d: separation %.4f, tail constant %.4f", K, seq.separation, seq.tail_constant)
    return seq
