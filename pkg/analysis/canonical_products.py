"""
Canonical Products Vanishing on the Shifted Spectrum
====================================================

Entire functions built from the eigenvalue ledger:

    P1(z) = z prod_{k != 0} (1 + z / (i lambda_k^+))     zeros -i lambda_k^+ ~ k + i
    P4(z) = z prod_{k != 0} (1 - z / mu_k)               zeros mu_k ~ k - i/2
    P3(z) = -P4(z) P4(-z) = z^2 prod (1 + z^2 / lambda_k^-)
    P2(z) = i P3(e^{-i pi/4} sqrt z) = z prod (1 + z / (i lambda_k^-))
    P(z)  = P1(-z) P2(-z) / (z (1 - z/(i lambda_2)) (1 - z/(i lambda_-2)))

P vanishes exactly (simply) on {i lambda_k^+/-}, including the doubles.

Numerics:
---------
All evaluations accumulate logarithms (magnitudes such as |P(i lambda_k^-)|
~ e^{pi k^2} leave double range quickly). Factors with |k| <= F are exact;
the remaining factors are replaced by those of a sine-type model with zeros
k + i (for P1) or k - i/2 (for P4), whose infinite tail has a closed form
through log(sin(pi u) / (pi u)). The truncated functions are therefore
genuine entire functions of the same type, which keeps Paley-Wiener
inversion exact up to the frequency window.

Independent "direct" evaluators of P2 and P3 (exact factors plus a power
series tail) exist for the product identity checks.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np

from analysis.spectrum import DOUBLE_MODES, Branch, eigenvalue, eigenvalues, mu_values
from errors import EvaluationDomainError, InvalidTruncationError

logger = logging.getLogger(__name__)

DEFAULT_TRUNCATION = 2000
MIN_TRUNCATION = 64
_CHUNK_ELEMENTS = 2 ** 22
_SERIES_TERMS = 6
_SERIES_EXTENSION = 64


class CanonicalKind(str, Enum):
    P1 = "P1"
    P2 = "P2"
    P3 = "P3"
    P4 = "P4"
    P = "P"


def log_sin(w: np.ndarray) -> np.ndarray:
    """log sin(w) without overflow for large |Im w|."""
    w = np.asarray(w, dtype=complex)
    upper = w.imag >= 0
    out = np.empty_like(w)
    wu = w[upper]
    out[upper] = -1j * wu + np.log(0.5j) + np.log1p(-np.exp(2j * wu))
    wl = w[~upper]
    out[~upper] = 1j * wl + np.log(-0.5j) + np.log1p(-np.exp(-2j * wl))
    return out


def log_sinc(u: np.ndarray) -> np.ndarray:
    """log(sin(pi u) / (pi u)), equal to 0 at u = 0."""
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    out = np.zeros_like(u)
    small = np.abs(u) < 1e-8
    p = np.pi * u[~small]
    out[~small] = log_sin(p) - np.log(p)
    out[small] = -(np.pi * u[small]) ** 2 / 6.0
    return out


def _sum_log1m(u: np.ndarray, ratios_of: np.ndarray) -> np.ndarray:
    """sum_j log(1 - u * ratios_of[j]), chunked over the points."""
    u = np.asarray(u, dtype=complex).ravel()
    out = np.zeros(u.size, dtype=complex)
    if ratios_of.size == 0:
        return out
    step = max(1, _CHUNK_ELEMENTS // ratios_of.size)
    with np.errstate(divide="ignore", invalid="ignore"):
        for start in range(0, u.size, step):
            chunk = u[start:start + step]
            out[start:start + step] = np.log(1.0 - chunk[:, None] * ratios_of[None, :]).sum(axis=1)
    return out


class CanonicalProducts:
    """Log-space evaluators of P, P1..P4 with truncation F."""

    def __init__(self, truncation: int = DEFAULT_TRUNCATION):
        if truncation < MIN_TRUNCATION:
            raise InvalidTruncationError(f"canonical truncation must be >= {MIN_TRUNCATION}, got {truncation}.")
        F = int(truncation)
        self.truncation = F
        self.ks = np.concatenate([np.arange(-F, 0), np.arange(1, F + 1)])
        self.rho = -1j * eigenvalues(self.ks, Branch.PLUS)
        self.mu = mu_values(self.ks)
        j = np.arange(1, F + 1, dtype=float)
        self._inv_j2 = 1.0 / j ** 2
        self._tail1_const = complex(log_sinc(1j)[0] - np.sum(np.log1p(1.0 / j ** 2)))
        self._tail4_const = complex(log_sinc(0.5j)[0] - np.sum(np.log1p(0.25 / j ** 2)))
        self.lambda2 = eigenvalue(2, Branch.PLUS)
        self.lambda_m2 = eigenvalue(-2, Branch.PLUS)
        self._series: Dict[str, np.ndarray] = {}

    def _position(self, k: int) -> int:
        if k == 0 or abs(k) > self.truncation:
            raise InvalidTruncationError(f"mode {k} is not an exact factor (truncation {self.truncation}).")
        return k + self.truncation if k < 0 else k + self.truncation - 1

    def _without(self, values: np.ndarray, skip: Optional[int]) -> np.ndarray:
        if skip is None:
            return values
        return np.delete(values, self._position(skip))

    # ---------- model tails ----------
    def _model_tail(self, u: np.ndarray, const: complex) -> np.ndarray:
        """sum_{j > F} log(1 - u^2/j^2) minus the model's normalization constant."""
        u = np.asarray(u, dtype=complex).ravel()
        partial = _sum_log1m(u * u, self._inv_j2)
        return log_sinc(u) - partial - const

    def _tail1(self, u: np.ndarray) -> np.ndarray:
        return self._model_tail(np.asarray(u) - 1j, self._tail1_const)

    def _tail4(self, w: np.ndarray) -> np.ndarray:
        return self._model_tail(np.asarray(w) + 0.5j, self._tail4_const)

    # ---------- reduced products ----------
    def log_r1(self, u: np.ndarray, skip: Optional[int] = None) -> np.ndarray:
        """log prod_{k != 0} (1 - u / rho_k), rho_k = -i lambda_k^+."""
        u = np.asarray(u, dtype=complex).ravel()
        return _sum_log1m(u, 1.0 / self._without(self.rho, skip)) + self._tail1(u)

    def log_r4(self, w: np.ndarray, skip: Optional[int] = None) -> np.ndarray:
        w = np.asarray(w, dtype=complex).ravel()
        return _sum_log1m(w, 1.0 / self._without(self.mu, skip)) + self._tail4(w)

    def log_r3(self, w: np.ndarray, skip: Optional[int] = None) -> np.ndarray:
        """log prod_{k != 0} (1 - w^2 / mu_k^2) = log R4(w) + log R4(-w)."""
        w = np.asarray(w, dtype=complex).ravel()
        exact = _sum_log1m(w * w, 1.0 / self._without(self.mu, skip) ** 2)
        return exact + self._tail4(w) + self._tail4(-w)

    @staticmethod
    def rotate(u: np.ndarray) -> np.ndarray:
        """w = e^{-i pi/4} sqrt(u); R3 is even so the branch is irrelevant."""
        return np.exp(-0.25j * np.pi) * np.sqrt(np.asarray(u, dtype=complex))

    # ---------- products ----------
    def log_p1(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex).ravel()
        with np.errstate(divide="ignore"):
            return np.log(z) + self.log_r1(z)

    def log_p4(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex).ravel()
        with np.errstate(divide="ignore"):
            return np.log(z) + self.log_r4(z)

    def log_p3(self, z: np.ndarray) -> np.ndarray:
        """P3 through the identity P3(z) = -P4(z) P4(-z)."""
        z = np.asarray(z, dtype=complex).ravel()
        return np.log(-1.0 + 0j) + self.log_p4(z) + self.log_p4(-z)

    def log_p2(self, z: np.ndarray) -> np.ndarray:
        """P2 through the identity P2(z) = i P3(e^{-i pi/4} sqrt z) = z R3(e^{-i pi/4} sqrt z)."""
        z = np.asarray(z, dtype=complex).ravel()
        with np.errstate(divide="ignore"):
            return np.log(z) + self.log_r3(self.rotate(z))

    def log_q(self, z: np.ndarray) -> np.ndarray:
        """log of (1 - z/(i lambda_2)) (1 - z/(i lambda_-2))."""
        z = np.asarray(z, dtype=complex).ravel()
        with np.errstate(divide="ignore"):
            return np.log(1.0 - z / (1j * self.lambda2)) + np.log(1.0 - z / (1j * self.lambda_m2))

    def log_pq(self, z: np.ndarray) -> np.ndarray:
        """log of P(z) q(z) = z R1(-z) R3(w(-z)); no removable points."""
        z = np.asarray(z, dtype=complex).ravel()
        with np.errstate(divide="ignore"):
            return np.log(z) + self.log_r1(-z) + self.log_r3(self.rotate(-z))

    def log_p(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex).ravel()
        q = self.log_q(z)
        if np.any(~np.isfinite(q)):
            raise EvaluationDomainError("P evaluated exactly at i lambda_(+/-2); use the derivative ledger.")
        return self.log_pq(z) - q

    def log_eval(self, kind: CanonicalKind, z: np.ndarray) -> np.ndarray:
        kind = CanonicalKind(kind)
        return {
            CanonicalKind.P1: self.log_p1,
            CanonicalKind.P2: self.log_p2,
            CanonicalKind.P3: self.log_p3,
            CanonicalKind.P4: self.log_p4,
            CanonicalKind.P: self.log_p,
        }[kind](z)

    # ---------- derivative ledger ----------
    def zero(self, label: str, k: int) -> complex:
        """Zero i lambda of P for a ledger key."""
        if label == "minus":
            return 1j * eigenvalue(k, Branch.MINUS)
        return 1j * eigenvalue(k, Branch.PLUS)

    def log_derivative(self, label: str, k: int) -> complex:
        """log P'(i lambda) from the product with the vanishing factor removed."""
        if k == 0:
            return 0.0 + 0.0j
        zeta = np.array([self.zero(label, k)])
        w = self.rotate(-zeta)
        minus_one = np.log(-1.0 + 0j)
        if k in DOUBLE_MODES:
            other = self.lambda_m2 if k == 2 else self.lambda2
            lam = self.lambda2 if k == 2 else self.lambda_m2
            value = (minus_one + self.log_r1(-zeta, skip=k) + self.log_r3(w, skip=k)
                     - np.log(1.0 - lam / other))
        elif label == "plus":
            value = minus_one + self.log_r1(-zeta, skip=k) + self.log_r3(w) - self.log_q(zeta)
        else:
            value = minus_one + self.log_r1(-zeta) + self.log_r3(w, skip=k) - self.log_q(zeta)
        return complex(value[0])

    def derivative_discrepancy(self, label: str, k: int) -> float:
        """|central difference / ledger - 1| with step 1e-5 (1 + |lambda|)."""
        zeta = self.zero(label, k)
        step = 1e-5 * (1.0 + abs(zeta))
        ledger = self.log_derivative(label, k)
        pts = np.array([zeta + step, zeta - step])
        if k in (2, -2):
            logs = self.log_pq(pts) - self.log_q(pts)
        else:
            logs = self.log_p(pts)
        ratio = (np.exp(logs[0] - ledger) - np.exp(logs[1] - ledger)) / (2.0 * step)
        return float(abs(ratio - 1.0))

    # ---------- direct evaluators for the identity checks ----------
    def _tail_moments(self, name: str) -> np.ndarray:
        """S_n = sum_{|k| > F} r_k^n for r_k = 1/(i lambda_k^-) ("p2") or 1/lambda_k^- ("p3")."""
        if name not in self._series:
            F = self.truncation
            M = _SERIES_EXTENSION * F
            ks = np.concatenate([np.arange(-M, -F), np.arange(F + 1, M + 1)])
            lam = eigenvalues(ks, Branch.MINUS)
            r = 1.0 / (1j * lam) if name == "p2" else 1.0 / lam
            moments = np.array([np.sum(r ** n) for n in range(1, _SERIES_TERMS + 1)])
            # remainder beyond M: r_k ~ i/k^2 ("p2") or -1/k^2 ("p3"), both signs of k
            lead = 2j if name == "p2" else -2.0
            moments[0] += lead / (M + 0.5)
            self._series[name] = moments
        return self._series[name]

    def _series_tail(self, x: np.ndarray, name: str) -> np.ndarray:
        moments = self._tail_moments(name)
        total = np.zeros(x.shape, dtype=complex)
        for n in range(1, _SERIES_TERMS + 1):
            total += (-1) ** (n + 1) * x ** n * moments[n - 1] / n
        return total

    def log_p2_direct(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex).ravel()
        lam = eigenvalues(self.ks, Branch.MINUS)
        with np.errstate(divide="ignore"):
            return np.log(z) + _sum_log1m(z, -1.0 / (1j * lam)) + self._series_tail(z, "p2")

    def log_p3_direct(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex).ravel()
        lam = eigenvalues(self.ks, Branch.MINUS)
        with np.errstate(divide="ignore"):
            return np.log(z * z) + _sum_log1m(z * z, -1.0 / lam) + self._series_tail(z * z, "p3")

    def identity_residuals(self, z: np.ndarray) -> Tuple[float, float]:
        """Max relative errors of P2(z) = i P3(e^{-i pi/4} sqrt z) and P3(z) = -P4(z) P4(-z)."""
        z = np.asarray(z, dtype=complex).ravel()
        rotated = np.abs(np.expm1(self.log_p2_direct(z) - (np.log(1j) + self.log_p3(self.rotate(z)))))
        direct = np.abs(np.expm1(self.log_p3_direct(z) - self.log_p3(z)))
        return float(np.max(rotated)), float(np.max(direct))


@lru_cache(maxsize=4)
def products(truncation: int = DEFAULT_TRUNCATION) -> CanonicalProducts:
    return CanonicalProducts(truncation)


def canonical_eval(kind: CanonicalKind, z, truncation: int = DEFAULT_TRUNCATION) -> np.ndarray:
    """Values of P, P1..P4 at z (array or scalar)."""
    scalar = np.ndim(z) == 0
    values = np.exp(products(truncation).log_eval(kind, np.atleast_1d(z)))
    return complex(values[0]) if scalar else values


# ---------- sine-type conditions and growth estimates ----------
@dataclass
class SineTypeReport:
    kind: str
    separation: float
    strip_bounds: Dict[float, Tuple[float, float]]
    growth_ratio: Dict[float, float]
    real_line_max: Optional[float] = None

    def as_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "separation": self.separation,
            "strip_bounds": {str(h): {"A": a, "B": b} for h, (a, b) in self.strip_bounds.items()},
            "growth_ratio_over_pi": {str(y): r / np.pi for y, r in self.growth_ratio.items()},
            "real_line_max": self.real_line_max,
        }


def sine_type_conditions(kind: CanonicalKind, truncation: int = DEFAULT_TRUNCATION,
                         heights=(3.0, 5.0, 10.0), kmax: int = 200) -> SineTypeReport:
    """Zero separation, e^{pi|y|} strip bounds and the growth ratio log|f(iy)|/|y| for P1 or P4."""
    kind = CanonicalKind(kind)
    if kind not in (CanonicalKind.P1, CanonicalKind.P4):
        raise ValueError("sine-type conditions are checked for P1 and P4 only.")
    prods = products(truncation)
    ks = np.concatenate([np.arange(-kmax, 0), np.arange(1, kmax + 1)])
    zeros = -1j * eigenvalues(ks, Branch.PLUS) if kind == CanonicalKind.P1 else mu_values(ks)
    zeros = np.concatenate([[0.0], zeros])
    gaps = np.abs(zeros[:, None] - zeros[None, :])
    np.fill_diagonal(gaps, np.inf)

    x = np.linspace(-50.0, 50.0, 2001)
    strip = {}
    for h in heights:
        logs = np.concatenate([prods.log_eval(kind, x + 1j * h), prods.log_eval(kind, x - 1j * h)]).real
        ratio = np.exp(logs - np.pi * h)
        strip[h] = (float(ratio.min()), float(ratio.max()))
    growth = {}
    for y in (10.0, 50.0, 100.0, 200.0, -200.0):
        growth[y] = float(prods.log_eval(kind, np.array([1j * y]))[0].real / abs(y))
    real_max = None
    if kind == CanonicalKind.P1:
        xr = np.linspace(-300.0, 300.0, 6001)
        real_max = float(np.exp(prods.log_p1(xr).real).max())
    report = SineTypeReport(kind=kind.value, separation=float(gaps.min()), strip_bounds=strip,
                            growth_ratio=growth, real_line_max=real_max)
    logger.info("sine-type %s: separation %.3f, growth(200)/pi %.4f", kind.value, report.separation,
                growth[200.0] / np.pi)
    return report


def product_estimates(truncation: int = DEFAULT_TRUNCATION, kmax: int = 12, xmax: float = 400.0) -> Dict[str, float]:
    """Fitted constants for the size of P on R and of P' on the ledger.

    - real_line: max |P(x)| (1+|x|)^3 e^{-sqrt2 pi sqrt|x|}
    - plus_floor: min |P'(i lambda_k^+)| |k|^3 e^{-sqrt2 pi sqrt|k|}
    - minus_floor: min |P'(i lambda_k^-)| |k|^7 e^{-pi k^2}
    """
    prods = products(truncation)
    x = np.linspace(-xmax, xmax, 8001)
    x = x[np.abs(x) > 1e-9]
    ax = np.abs(x)
    real_line = np.max(np.exp(prods.log_p(x).real + 3.0 * np.log1p(ax) - np.sqrt(2.0) * np.pi * np.sqrt(ax)))
    plus, minus = [], []
    for k in range(-kmax, kmax + 1):
        if k in DOUBLE_MODES:
            continue
        ak = abs(k)
        plus.append(prods.log_derivative("plus", k).real + 3.0 * np.log(ak) - np.sqrt(2.0) * np.pi * np.sqrt(ak))
        minus.append(prods.log_derivative("minus", k).real + 7.0 * np.log(ak) - np.pi * ak ** 2)
    return {"real_line": float(real_line), "plus_floor": float(np.exp(min(plus))),
            "minus_floor": float(np.exp(min(minus)))}
