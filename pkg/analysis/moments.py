"""
Moment Problems for Moving Controls
===================================

Null controllability of a truncated state reduces, mode by mode, to
prescribed integrals of the scalar control h against exponentials:

    beta_k  int_0^T e^{lambda (T-t)} h(t) dt = -e^{lambda T} gamma_k^lambda

for each retained exponent lambda = lambda_k^(+/-), plus, at the double
roots, a second constraint against (T - t) e^{lambda (T-t)}. This module
builds those systems for each control shape, solves them for the minimum
L2(0, T) norm control through a closed-form Gram matrix, and checks any
sampled control against them by quadrature.

Ledgers (pairing <u, e^{ikx}> = 2 pi u_k):
------------------------------------------
- beta_k  = <b, e^{ikx}>: Dirac 1, dipole ik, indicator difference
  e^{-ika} (1 - e^{-ik sigma pi})^2 / (ik), distributed by trapezoid rule.
- gamma_k = <v_t(0), e^{ikx}> + (lambda - 2ik + k^2) <v(0), e^{ikx}>.

Example Usage:
--------------
```python
from analysis.moments import build_moment_system, solve_min_norm, verify_moments
from inputs.shapes import ControlShape

system = build_moment_system(ControlShape.dipole(), v0, T=2 * np.pi + 1, K=6)
h = solve_min_norm(system, grid=16385)
report = verify_moments(h, system)
report.max_abs                    # <= 1e-8
```
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import scipy.linalg
from scipy import fft
from scipy.integrate import simpson

from analysis.solver import default_grid
from analysis.spectrum import DOUBLE_MODES, Branch, EigenvalueTable, eigenvalues
from errors import (DegenerateSigmaError, IllConditionedError, InvalidProfileError, MeanObstructionError,
                    SchemaError, TruncationMismatchError, UncontrollableModeError, ValidationError)
from inputs.problem import MEAN_TOLERANCE
from inputs.shapes import ControlShape, ShapeKind
from inputs.state import TWO_PI_PAIRING, FourierState, SampledControl
from outputs.json_export import complex_from_pair, complex_pair, require

logger = logging.getLogger(__name__)

GRAM_CONDITION_LIMIT = 1e14
PROFILE_SAMPLES_PER_MODE = 8
BETA_ZERO_TOLERANCE = 1e-13


# ---------- ledgers ----------
def beta_coefficients(shape: ControlShape, K: int) -> np.ndarray:
    """beta_k = <b, e^{ikx}> for k = -K..K (index k + K)."""
    if K < 1:
        raise ValidationError(f"beta ledger needs K >= 1, got {K}.")
    ks = np.arange(-K, K + 1)
    if shape.kind == ShapeKind.DIRAC:
        return np.ones(ks.size, dtype=complex)
    if shape.kind == ShapeKind.DIPOLE:
        return 1j * ks.astype(complex)
    if shape.kind == ShapeKind.INDICATOR_DIFFERENCE:
        if not 0.0 < shape.sigma < 1.0:
            raise InvalidProfileError(f"indicator-difference sigma must lie in (0, 1), got {shape.sigma}.")
        betas = np.zeros(ks.size, dtype=complex)
        nz = ks != 0
        k = ks[nz].astype(float)
        betas[nz] = np.exp(-1j * k * shape.offset) * (1.0 - np.exp(-1j * k * shape.sigma * np.pi)) ** 2 / (1j * k)
        return betas
    # distributed: periodic trapezoid rule, spectrally accurate for smooth profiles
    n = shape.profile.size if shape.profile is not None else max(4096, 64 * K)
    if n < PROFILE_SAMPLES_PER_MODE * K:
        raise InvalidProfileError(
            f"profile has {n} samples; K={K} needs at least {PROFILE_SAMPLES_PER_MODE * K}."
        )
    b = shape.profile_samples(n)
    spectrum = fft.fft(b) * (2.0 * np.pi / n)
    return spectrum[np.mod(ks, n)]


def gamma_coefficients(v0: FourierState, table: Optional[EigenvalueTable] = None) -> Dict[Tuple[int, Branch], complex]:
    """gamma_k^(+/-) for all |k| <= K; both branches coincide at the doubles."""
    if table is not None and v0.K > table.K:
        raise TruncationMismatchError(f"state K={v0.K} exceeds the table's K={table.K}.")
    ks = v0.indices
    ledger = {}
    for branch in Branch:
        if table is not None:
            lam = np.array([table.value(k, branch) for k in ks])
        else:
            lam = eigenvalues(ks, branch)
        gamma = TWO_PI_PAIRING * (v0.vel + (lam - 2j * ks + ks ** 2) * v0.pos)
        for k, g in zip(ks, gamma):
            ledger[(int(k), branch)] = complex(g)
    return ledger


def summability(betas: np.ndarray, state: FourierState) -> float:
    """sum_{k != 0} |beta_k|^-1 (|k|^6 |c_k| + |k|^4 |d_k|) on the retained modes."""
    Kb = (betas.size - 1) // 2
    total = 0.0
    for k in state.indices:
        if k == 0:
            continue
        c, d = state.coefficient(int(k))
        if c == 0 and d == 0:
            continue
        beta = betas[Kb + k]
        if beta == 0:
            return float("inf")
        total += (abs(k) ** 6 * abs(c) + abs(k) ** 4 * abs(d)) / abs(beta)
    return float(total)


# ---------- systems ----------
@dataclass(frozen=True)
class MomentConstraint:
    """int_0^T (T-t)^degree e^{exponent (T-t)} h(t) dt = rhs."""
    k: int
    label: str  # "plus", "minus" or "double"
    exponent: complex
    degree: int
    rhs: complex

    def to_dict(self) -> Dict:
        return {"k": self.k, "label": self.label, "lambda": complex_pair(self.exponent),
                "degree": self.degree, "rhs": complex_pair(self.rhs)}

    @classmethod
    def from_dict(cls, data: Dict, context: str) -> "MomentConstraint":
        degree = int(require(data, "degree", context))
        if degree not in (0, 1):
            raise SchemaError(f"{context}.degree: must be 0 or 1, got {degree}.")
        return cls(
            k=int(data.get("k", 0)),
            label=str(data.get("label", "")),
            exponent=complex_from_pair(require(data, "lambda", context), f"{context}.lambda"),
            degree=degree,
            rhs=complex_from_pair(require(data, "rhs", context), f"{context}.rhs"),
        )


@dataclass
class MomentSystem:
    T: float
    K: int
    constraints: List[MomentConstraint] = field(default_factory=list)
    shape_kind: Optional[str] = None

    def __len__(self) -> int:
        return len(self.constraints)

    @property
    def exponents(self) -> np.ndarray:
        return np.array([c.exponent for c in self.constraints], dtype=complex)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([c.degree for c in self.constraints], dtype=int)

    @property
    def rhs(self) -> np.ndarray:
        return np.array([c.rhs for c in self.constraints], dtype=complex)

    def with_rhs(self, rhs: np.ndarray) -> "MomentSystem":
        constraints = [MomentConstraint(c.k, c.label, c.exponent, c.degree, complex(r))
                       for c, r in zip(self.constraints, rhs)]
        return MomentSystem(T=self.T, K=self.K, constraints=constraints, shape_kind=self.shape_kind)

    def is_conjugate_closed(self, tol: float = 1e-10) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.rhs), initial=0.0)))
        for c in self.constraints:
            if not any(d.degree == c.degree
                       and abs(d.exponent - np.conj(c.exponent)) <= tol * max(1.0, abs(c.exponent))
                       and abs(d.rhs - np.conj(c.rhs)) <= tol * scale
                       for d in self.constraints):
                return False
        return True

    def as_frame(self) -> pd.DataFrame:
        return pd.DataFrame([
            {"k": c.k, "label": c.label, "degree": c.degree, "lambda_re": c.exponent.real,
             "lambda_im": c.exponent.imag, "rhs_re": c.rhs.real, "rhs_im": c.rhs.imag}
            for c in self.constraints
        ])

    def to_dict(self) -> Dict:
        data = {"T": self.T, "K": self.K, "constraints": [c.to_dict() for c in self.constraints]}
        if self.shape_kind is not None:
            data["shape"] = self.shape_kind
        return data

    @classmethod
    def from_dict(cls, data: Dict, context: str = "system") -> "MomentSystem":
        raw = require(data, "constraints", context)
        if not isinstance(raw, list):
            raise SchemaError(f"{context}.constraints: expected a list.")
        constraints = [MomentConstraint.from_dict(c, f"{context}.constraints[{i}]") for i, c in enumerate(raw)]
        K = int(data.get("K", max((abs(c.k) for c in constraints), default=0)))
        return cls(T=float(require(data, "T", context)), K=K, constraints=constraints,
                   shape_kind=data.get("shape"))


def _negligible(c: complex, d: complex, scale: float) -> bool:
    return abs(c) <= MEAN_TOLERANCE * scale and abs(d) <= MEAN_TOLERANCE * scale


def build_moment_system(shape: ControlShape, v0: FourierState, T: float, K: Optional[int] = None,
                        table: Optional[EigenvalueTable] = None) -> MomentSystem:
    """Moment constraints nulling the moving-frame state v0 at time T through b(x) h(t).

    One degree-0 constraint per (k, branch) with beta_k != 0; at k = +/-2 a
    second, degree-1 constraint; at k = 0 (only when beta_0 != 0) the
    velocity-mean constraint and, for distributed profiles, the
    position-mean one.
    """
    if T <= 2.0 * np.pi:
        raise ValidationError(f"the moment problem needs T > 2*pi, got {T}.")
    K = v0.K if K is None else K
    if v0.has_modes_beyond(K):
        raise TruncationMismatchError(f"initial data has modes beyond K={K}.")
    v0 = v0.resized(K)
    betas = beta_coefficients(shape, K)
    gammas = gamma_coefficients(v0, table)
    scale = max(1.0, float(np.max(np.abs(v0.pos))), float(np.max(np.abs(v0.vel))))
    beta_scale = max(1.0, float(np.max(np.abs(betas))))

    constraints: List[MomentConstraint] = []
    for k in range(-K, K + 1):
        c, d = v0.coefficient(k)
        beta = betas[k + K]
        if k == 0 and shape.kind == ShapeKind.DIPOLE:
            if not _negligible(c, d, scale):
                raise MeanObstructionError(
                    "dipole control cannot move the means: <v(0), 1> and <v_t(0), 1> must vanish "
                    f"(got position mean {c:.3e}, velocity mean {d:.3e})."
                )
            continue
        if abs(beta) <= BETA_ZERO_TOLERANCE * beta_scale:
            if not _negligible(c, d, scale):
                raise UncontrollableModeError(
                    f"mode k={k} has beta_k = 0 but nonzero data; the profile must satisfy "
                    "beta_k != 0 for every mode carrying data."
                )
            continue
        if k in DOUBLE_MODES:
            lam = eigenvalues(np.array([k]), Branch.PLUS)[0] if table is None else table.value(k, Branch.PLUS)
            gamma = gammas[(k, Branch.PLUS)]
            growth = np.exp(lam * T)
            constraints.append(MomentConstraint(k, "double", complex(lam), 0, complex(-growth * gamma / beta)))
            if k != 0 or shape.kind == ShapeKind.DISTRIBUTED:
                rhs1 = (-T * growth * gamma - growth * TWO_PI_PAIRING * c) / beta
                constraints.append(MomentConstraint(k, "double", complex(lam), 1, complex(rhs1)))
            continue
        for branch in Branch:
            lam = eigenvalues(np.array([k]), branch)[0] if table is None else table.value(k, branch)
            rhs = -np.exp(lam * T) * gammas[(k, branch)] / beta
            constraints.append(MomentConstraint(k, branch.value, complex(lam), 0, complex(rhs)))

    system = MomentSystem(T=float(T), K=K, constraints=constraints, shape_kind=shape.kind.value)
    logger.info("moment system (%s, K=%d, T=%.4f): %d constraints", shape.kind.value, K, T, len(system))
    return system


# ---------- minimum-norm oracle ----------
def moment_integral(n: int, mu: complex, T: float) -> complex:
    """J(n, mu) = int_0^T s^n e^{mu s} ds for n in {0, 1, 2}, including mu = 0."""
    x = mu * T
    if abs(x) < 1.0:
        total = 0.0 + 0.0j
        term = 1.0 + 0.0j
        for m in range(40):
            if m > 0:
                term *= x / m
            total += term / (n + m + 1)
        return complex(total * T ** (n + 1))
    E = np.exp(x)
    if n == 0:
        return complex((E - 1.0) / mu)
    if n == 1:
        return complex((E * (x - 1.0) + 1.0) / mu ** 2)
    if n == 2:
        return complex((E * (x * x - 2.0 * x + 2.0) - 2.0) / mu ** 3)
    raise ValueError(f"moment_integral supports n in {{0, 1, 2}}, got {n}.")


def gram_matrix(system: MomentSystem) -> Tuple[np.ndarray, np.ndarray]:
    """Normalized Gram matrix of g_j(t) = (T-t)^d_j e^{conj(lambda_j)(T-t)} and the norms ||g_j||."""
    lam = system.exponents
    deg = system.degrees
    T = system.T
    norms = np.array([np.sqrt(moment_integral(2 * d, 2.0 * l.real, T).real) for l, d in zip(lam, deg)])
    n = len(system)
    G = np.empty((n, n), dtype=complex)
    for j in range(n):
        for i in range(n):
            G[j, i] = moment_integral(int(deg[i] + deg[j]), lam[j] + np.conj(lam[i]), T) / (norms[i] * norms[j])
    return G, norms


def _basis_samples(system: MomentSystem, t: np.ndarray, norms: np.ndarray) -> np.ndarray:
    s = system.T - t
    return np.array([s ** d * np.exp(np.conj(l) * s) / nrm
                     for l, d, nrm in zip(system.exponents, system.degrees, norms)])


def solve_min_norm(system: MomentSystem, grid: Optional[int] = None) -> SampledControl:
    """Minimum L2(0, T) norm control satisfying every constraint.

    The control lies in the span of the conjugate family; its coefficients
    solve the normalized Gram system. ``meta`` records the Gram condition
    number and the imaginary amplitude dropped for conjugation-closed systems.
    """
    grid = grid or default_grid(system.T, max(system.K, 1))
    t = np.linspace(0.0, system.T, grid)
    if len(system) == 0:
        return SampledControl(0.0, system.T, np.zeros(grid), meta={"gram_condition": 1.0, "max_imag": 0.0,
                                                                    "constraints": 0})
    G, norms = gram_matrix(system)
    cond = float(np.linalg.cond(G))
    logger.info("Gram matrix %dx%d, condition number %.3e", len(system), len(system), cond)
    if not np.isfinite(cond) or cond > GRAM_CONDITION_LIMIT:
        raise IllConditionedError(
            f"Gram condition number {cond:.3e} exceeds {GRAM_CONDITION_LIMIT:.0e}; "
            "use a smaller K or a larger T."
        )
    coeffs = scipy.linalg.solve(G, system.rhs / norms, assume_a="her")
    h = coeffs @ _basis_samples(system, t, norms)
    max_imag = float(np.max(np.abs(h.imag)))
    if system.is_conjugate_closed():
        amplitude = max(float(np.max(np.abs(h))), 1e-300)
        if max_imag > 1e-10 * amplitude:
            logger.warning("min-norm control has imaginary part %.2e (amplitude %.2e)", max_imag, amplitude)
        h = h.real.astype(complex)
    return SampledControl(0.0, system.T, h, meta={"gram_condition": cond, "max_imag": max_imag,
                                                  "constraints": len(system)})


# ---------- verification ----------
@dataclass
class MomentResidualReport:
    constraints: List[MomentConstraint]
    moments: np.ndarray
    residuals: np.ndarray

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.residuals), initial=0.0))

    @property
    def rhs_norm(self) -> float:
        return float(np.max(np.abs([c.rhs for c in self.constraints]), initial=0.0))

    @property
    def relative(self) -> float:
        return self.max_abs / (1.0 + self.rhs_norm)

    def as_frame(self) -> pd.DataFrame:
        return pd.DataFrame([
            {"k": c.k, "label": c.label, "degree": c.degree, "lambda_re": c.exponent.real,
             "lambda_im": c.exponent.imag, "residual_abs": abs(r)}
            for c, r in zip(self.constraints, self.residuals)
        ])

    def summary(self) -> Dict:
        return {"moment_residual_max": self.max_abs, "moment_residual_relative": self.relative,
                "constraints": len(self.constraints)}


def constraint_moments(h: SampledControl, system: MomentSystem) -> np.ndarray:
    """Simpson quadrature of int (T-t)^d e^{lambda (T-t)} h(t) dt for every constraint."""
    if h.is_ledger:
        raise ValidationError("moment constraints apply to scalar controls only.")
    if abs(h.duration - system.T) > 1e-9 * system.T:
        raise ValidationError(f"control spans {h.duration}, the system's horizon is {system.T}.")
    if len(system) == 0:
        return np.zeros(0, dtype=complex)
    stiffest = float(np.max(np.abs(system.exponents)))
    if stiffest * h.dt > 1.0 / 16.0:
        logger.warning("control grid dt=%.2e under-resolves the exponent |lambda|=%.1f", h.dt, stiffest)
    s = h.t1 - h.times
    weights = np.array([s ** d * np.exp(l * s) for l, d in zip(system.exponents, system.degrees)])
    return simpson(weights * h.samples[None, :], dx=h.dt, axis=1)


def verify_moments(h: SampledControl, system: MomentSystem) -> MomentResidualReport:
    moments = constraint_moments(h, system)
    residuals = moments - system.rhs if len(system) else np.zeros(0, dtype=complex)
    report = MomentResidualReport(constraints=list(system.constraints), moments=moments, residuals=residuals)
    logger.info("moment residual max %.3e (relative %.3e)", report.max_abs, report.relative)
    return report


# ---------- quadratic irrational interval ----------
def _nearest_fractions(sigma: float, Q: int) -> Tuple[np.ndarray, np.ndarray]:
    if not 0.0 < sigma < 1.0:
        raise InvalidProfileError(f"sigma must lie in (0, 1), got {sigma}.")
    if Q < 2:
        raise ValidationError(f"Q must be >= 2, got {Q}.")
    q = np.arange(1, Q + 1, dtype=float)
    p = np.round(sigma * q)
    gap = np.abs(q * sigma - p)
    degenerate = np.flatnonzero(gap < 1e-15 * q)
    if degenerate.size:
        qd = int(q[degenerate[0]])
        raise DegenerateSigmaError(f"sigma={sigma} is within 1e-15 of {int(p[degenerate[0]])}/{qd}.")
    return q, gap


def quadratic_irrational_constant(sigma: float, Q: int) -> float:
    """min over 1 <= q <= Q of q^2 |sigma - p/q| with p the nearest integer to q*sigma."""
    q, gap = _nearest_fractions(sigma, Q)
    return float(np.min(q * gap))


@dataclass
class IrrationalReport:
    sigma: float
    Q: int
    c0: float
    floor_constant: float
    min_scaled: float
    kmax: int

    @property
    def ratio(self) -> float:
        return self.min_scaled / self.floor_constant

    @property
    def holds(self) -> bool:
        return self.min_scaled > 0.0 and self.ratio >= 0.5

    def as_dict(self) -> Dict:
        return {"sigma": self.sigma, "Q": self.Q, "c0_estimate": self.c0, "floor_constant": self.floor_constant,
                "min_k3_beta": self.min_scaled, "kmax": self.kmax, "ratio": self.ratio, "holds": self.holds}


def indicator_beta_modulus(sigma: float, ks: np.ndarray) -> np.ndarray:
    """|beta~_k| = 4 sin^2(pi k sigma / 2) / |k| for k != 0."""
    ks = np.asarray(ks, dtype=float)
    return 4.0 * np.sin(np.pi * ks * sigma / 2.0) ** 2 / np.abs(ks)


def irrational_interval_report(sigma: float, Q: int, kmax: Optional[int] = None) -> IrrationalReport:
    """Lower bound |k|^3 |beta~_k| >= 4 C0^2 scanned over 1 <= |k| <= kmax (default 2Q)."""
    c0 = quadratic_irrational_constant(sigma, Q)
    kmax = 2 * Q if kmax is None else kmax
    ks = np.arange(1, kmax + 1)
    scaled = ks ** 3 * indicator_beta_modulus(sigma, ks)
    report = IrrationalReport(sigma=sigma, Q=Q, c0=c0, floor_constant=4.0 * c0 ** 2,
                              min_scaled=float(np.min(scaled)), kmax=kmax)
    logger.info("quadratic irrational sigma=%.6f: C0~%.4f, min |k|^3|beta|=%.4f", sigma, c0, report.min_scaled)
    return report
