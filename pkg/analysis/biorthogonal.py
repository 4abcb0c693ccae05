"""
Biorthogonal Family via Paley-Wiener Interpolation
==================================================

Builds the interpolating entire functions

    I_k^+/-(z) = P(z) q(z) m(z) / (P'(zeta) (z - zeta) q(zeta) m(zeta)),   zeta = i lambda_k^+/-
    I_0(z)     = R1(-z) R3(w(-z)) m(z) / m(0)
    I~_p(z)    = -i P(z) q(z) m(z) / ((1 - z/zeta_p) P'(zeta_p) (1 - lambda_p/lambda_-p) m(zeta_p))
    I_p(z)     = K_p(z) - i K_p'(zeta_p) I~_p(z),   K_p(z) = i I~_p(z) / (z - zeta_p)

for p in {+/-2}, where q(z) = (1 - z/(i lambda_2)) (1 - z/(i lambda_-2)), and
turns them into time functions psi supported in [-T/2, T/2] with

    int psi(t) e^{lambda t} dt = I(i lambda),   int t psi(t) e^{lambda t} dt = i I'(i lambda).

Sampling:
---------
I is sampled at x_n = 2 pi n / L (n = -N/2 .. N/2-1, window W = pi N / L) and
inverted with one FFT onto the periodic grid t_j = -L/2 + j L/N, L >= T + 2.
With b > sqrt(2) in the multiplier the interpolants decay like
e^{-(b - sqrt2) pi sqrt|x|} on the real line, so psi is smooth and vanishes
at +/-T/2. Gram entries are integrated in closed form over [-T/2, T/2]
against the Fourier coefficients. The constant e^{2 b^2 / a} of the
multiplier enters I_0 undivided; horizons where it exceeds e^{MAX_LOG_GROWTH}
are refused.

Family keys are ("plus", k), ("minus", k) for k not in {0, +/-2},
("double", k) for k in {0, +/-2} and ("tilde", p) for p = +/-2.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from analysis.canonical_products import DEFAULT_TRUNCATION, products
from analysis.multiplier import DEFAULT_B, log_multiplier, multiplier_params_for
from analysis.spectrum import DOUBLE_MODES, Branch, EigenvalueTable, eigenvalue
from errors import IllConditionedError, IndexCoverageError, SchemaError, ValidationError, WindowTooSmallError
from outputs.json_export import complex_array, complex_pairs, require

logger = logging.getLogger(__name__)

FamilyKey = Tuple[str, int]
FAMILY_LABELS = ("plus", "minus", "double", "tilde")

DEFAULT_GRID = 16384
DEFAULT_MARGIN = 4.0
MIN_MARGIN = 2.0
TAIL_LIMIT = 1e-4
LEAKAGE_LIMIT = 1e-3
GRAM_TOLERANCE = 1e-2
RESOLVABLE_WEIGHT = 1e7
MAX_LOG_GROWTH = 24.0
CONTOUR_POINTS = 64
CHECK_RADIUS = 0.1
DERIVATIVE_RADIUS = 0.25
REMOVABLE_RADIUS = 1e-6
REMOVABLE_STEP = 1e-4
_CHUNK_ELEMENTS = 2 ** 22


def key_name(key: FamilyKey) -> str:
    return f"{key[0]}:{key[1]}"


def parse_key(name: str) -> FamilyKey:
    try:
        label, k = name.split(":")
        key = (label, int(k))
    except ValueError:
        raise SchemaError(f"family: malformed function key '{name}'.") from None
    if label not in FAMILY_LABELS:
        raise SchemaError(f"family: unknown function label '{label}'.")
    return key


def family_keys(kmax: int) -> List[FamilyKey]:
    keys: List[FamilyKey] = []
    for k in range(-kmax, kmax + 1):
        if k in DOUBLE_MODES:
            keys.append(("double", k))
            if k != 0:
                keys.append(("tilde", k))
        else:
            keys += [("plus", k), ("minus", k)]
    return keys


def key_zero(key: FamilyKey) -> complex:
    label, k = key
    if label == "minus":
        return 1j * eigenvalue(k, Branch.MINUS)
    return 1j * eigenvalue(k, Branch.PLUS)


class InterpolantBuilder:
    """Evaluates every interpolant of the family for one control time T."""

    def __init__(self, T: float, truncation: int = DEFAULT_TRUNCATION, window: float = 512.0):
        if T <= 2.0 * np.pi:
            raise ValidationError(f"the biorthogonal family needs T > 2 pi, got T={T}.")
        self.T = float(T)
        self.truncation = int(truncation)
        self.window = float(window)
        self.multiplier = multiplier_params_for(self.T, self.window)
        if self.multiplier.log_growth > MAX_LOG_GROWTH:
            b2 = self.multiplier.b_coef ** 2
            shortest = 2.0 * np.pi * (1.0 + 2.0 * b2 / MAX_LOG_GROWTH)
            raise IllConditionedError(
                f"T={self.T:.4f} leaves the multiplier a real-line constant e^{self.multiplier.log_growth:.1f}; "
                f"the biorthogonal family needs T >= {shortest:.4f} (or use the min-norm method)."
            )
        self.products = products(self.truncation)
        self._ledger: Dict[FamilyKey, Tuple[complex, complex, complex]] = {}
        self._k_prime: Dict[int, complex] = {}
        self._grids: Dict[Tuple[int, float], Tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self._log_m0 = complex(log_multiplier(np.array([0.0]), self.multiplier)[0])

    # ---------- building blocks ----------
    def _base(self, z: np.ndarray) -> np.ndarray:
        """log R1(-z) + log R3(w(-z)); log P(z) q(z) = log z + base."""
        return self.products.log_r1(-z) + self.products.log_r3(self.products.rotate(-z))

    def _log_m(self, z: np.ndarray) -> np.ndarray:
        return log_multiplier(z, self.multiplier)

    def ledger(self, key: FamilyKey) -> Tuple[complex, complex, complex]:
        """(zeta, log P'(zeta), log m(zeta)) for the zero the key interpolates at."""
        label, k = key
        ledger_key = ("minus", k) if label == "minus" else ("plus", k)
        if ledger_key not in self._ledger:
            zeta = key_zero(key)
            log_dash = self.products.log_derivative(ledger_key[0], k)
            log_mz = complex(self._log_m(np.array([zeta]))[0])
            self._ledger[ledger_key] = (zeta, log_dash, log_mz)
        return self._ledger[ledger_key]

    def _log_values(self, key: FamilyKey, z: np.ndarray, base: np.ndarray, log_m: np.ndarray) -> np.ndarray:
        label, k = key
        if label == "double" and k == 0:
            return base + log_m - self._log_m0
        zeta, log_dash, log_mz = self.ledger(key)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_num = np.log(z) + base
            if label in ("plus", "minus"):
                log_qz = complex(self.products.log_q(np.array([zeta]))[0])
                return log_num - np.log(z - zeta) - log_dash - log_qz + log_m - log_mz
            other = eigenvalue(-k, Branch.PLUS)
            lam = eigenvalue(k, Branch.PLUS)
            return (np.log(-1j) + log_num - np.log(1.0 - z / zeta) - log_dash
                    - np.log(1.0 - lam / other) + log_m - log_mz)

    def _raw(self, key: FamilyKey, z: np.ndarray) -> np.ndarray:
        return np.exp(self._log_values(key, z, self._base(z), self._log_m(z)))

    @staticmethod
    def _removable(fn, z: np.ndarray, zeta: complex) -> np.ndarray:
        out = fn(z)
        near = np.abs(z - zeta) < REMOVABLE_RADIUS
        if np.any(near):
            zn = z[near]
            out[near] = 0.5 * (fn(zn + REMOVABLE_STEP) + fn(zn - REMOVABLE_STEP))
        return out

    def _kernel(self, p: int, z: np.ndarray) -> np.ndarray:
        zeta = key_zero(("double", p))
        return self._removable(lambda u: 1j * self.values(("tilde", p), u) / (u - zeta), z, zeta)

    def k_prime(self, p: int) -> complex:
        """K_p'(i lambda_p) from the first Fourier coefficient on a circle."""
        if p not in self._k_prime:
            zeta = key_zero(("double", p))
            theta = 2.0 * np.pi * np.arange(CONTOUR_POINTS) / CONTOUR_POINTS
            ring = zeta + DERIVATIVE_RADIUS * np.exp(1j * theta)
            self._k_prime[p] = complex(np.mean(self._kernel(p, ring) * np.exp(-1j * theta)) / DERIVATIVE_RADIUS)
        return self._k_prime[p]

    # ---------- public evaluation ----------
    def values(self, key: FamilyKey, z) -> np.ndarray:
        """I_key(z) for an array of complex points."""
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        label, k = key
        if label not in FAMILY_LABELS:
            raise ValidationError(f"unknown interpolant label '{label}'.")
        if label == "double" and k != 0:
            return self._kernel(k, z) - 1j * self.k_prime(k) * self.values(("tilde", k), z)
        if label == "double":
            return self._raw(key, z)
        return self._removable(lambda u: self._raw(key, u), z, key_zero(key))

    def _grid(self, n: int, period: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        cache_key = (n, period)
        if cache_key not in self._grids:
            x = 2.0 * np.pi * np.arange(-n // 2, n // 2) / period
            xc = x.astype(complex)
            logger.debug("interpolant grid n=%d, window %.1f", n, np.pi * n / period)
            self._grids[cache_key] = (x, self._base(xc), self._log_m(xc))
        return self._grids[cache_key]

    def values_on_grid(self, key: FamilyKey, n: int, period: float) -> Tuple[np.ndarray, np.ndarray]:
        """(x_n, I_key(x_n)) on the frequency grid of an n-point period-L transform."""
        x, base, log_m = self._grid(n, period)
        xc = x.astype(complex)
        label, k = key
        if label == "double" and k != 0:
            tilde = np.exp(self._log_values(("tilde", k), xc, base, log_m))
            kernel = 1j * tilde / (xc - key_zero(key))
            return x, kernel - 1j * self.k_prime(k) * tilde
        return x, np.exp(self._log_values(key, xc, base, log_m))

    def contour(self, key: FamilyKey, center: complex, radius: float = CHECK_RADIUS) -> Tuple[complex, complex, float]:
        """(I(center), I'(center), max |I| on the circle) by the trapezoidal rule."""
        theta = 2.0 * np.pi * np.arange(CONTOUR_POINTS) / CONTOUR_POINTS
        f = self.values(key, center + radius * np.exp(1j * theta))
        return complex(f.mean()), complex(np.mean(f * np.exp(-1j * theta)) / radius), float(np.abs(f).max())


def interpolant_eval(builder: InterpolantBuilder, key: FamilyKey, x) -> np.ndarray:
    return builder.values(key, x)


# ---------- identity report ----------
def _expected_value(key: FamilyKey, point: FamilyKey) -> complex:
    label, k = key
    if label == "tilde":
        return 0.0
    if label == "double":
        return 1.0 if point == ("double", k) else 0.0
    return 1.0 if point == key else 0.0


def _expected_derivative(key: FamilyKey, p: int) -> complex:
    label, k = key
    if label == "tilde" and k == p:
        return -1j
    return 0.0


def ledger_points(k_test: int) -> List[FamilyKey]:
    return [key for key in family_keys(k_test) if key[0] != "tilde"]


def interpolant_identities(builder: InterpolantBuilder, k_test: int) -> pd.DataFrame:
    """Interpolation conditions of every interpolant at every ledger point |l| <= k_test.

    Values are checked at all points; derivatives at i lambda_(+/-2). Deviations
    are relative to the largest modulus on the sampling circle.
    """
    rows = []
    points = ledger_points(k_test)
    for key in family_keys(k_test):
        for point in points:
            value, deriv, scale = builder.contour(key, key_zero(point))
            expected = _expected_value(key, point)
            rows.append({"function": key_name(key), "point": key_name(point), "quantity": "value",
                         "expected": expected, "computed": value,
                         "deviation": abs(value - expected) / max(1.0, scale)})
            if point[0] == "double" and point[1] != 0:
                expected = _expected_derivative(key, point[1])
                rows.append({"function": key_name(key), "point": key_name(point), "quantity": "derivative",
                             "expected": expected, "computed": deriv,
                             "deviation": abs(deriv - expected) / max(1.0, scale / CHECK_RADIUS)})
    frame = pd.DataFrame(rows)
    logger.info("interpolant identities k<=%d: max deviation %.2e", k_test, frame["deviation"].max())
    return frame


# ---------- psi construction ----------
def tail_fraction(x: np.ndarray, values: np.ndarray) -> float:
    """Energy of |I| beyond the window, extrapolated from the outer band as C/x^2, over the total."""
    scale = float(np.max(np.abs(values)))
    if scale == 0.0:
        return 0.0
    v = np.abs(values / scale) ** 2
    window = float(np.max(np.abs(x)))
    dx = float(x[1] - x[0])
    band = np.abs(x) >= 0.8 * window
    tail = 2.0 * float(np.mean(v[band] * x[band] ** 2)) / window
    return tail / (float(np.sum(v)) * dx + tail)


def psi_from_interpolant(builder: InterpolantBuilder, key: FamilyKey, grid: int, period: float,
                         tail_limit: float = TAIL_LIMIT) -> np.ndarray:
    """psi_key on t_j = -L/2 + j L/N by one inverse FFT of the sampled interpolant."""
    if grid < 64 or grid & (grid - 1):
        raise ValidationError(f"the family grid must be a power of two >= 64, got {grid}.")
    if period < builder.T + MIN_MARGIN:
        raise ValidationError(f"period {period} must exceed T + {MIN_MARGIN} = {builder.T + MIN_MARGIN}.")
    x, coeffs = builder.values_on_grid(key, grid, period)
    fraction = tail_fraction(x, coeffs)
    if fraction > tail_limit:
        raise WindowTooSmallError(
            f"{key_name(key)}: {fraction:.2e} of the interpolant energy lies beyond the window "
            f"W={np.pi * grid / period:.1f}; increase the grid."
        )
    signs = np.where(np.arange(-grid // 2, grid // 2) % 2 == 0, 1.0, -1.0)
    return (grid / period) * np.fft.ifft(np.fft.ifftshift(coeffs * signs))


@dataclass(eq=False)
class BiorthogonalFamily:
    """Sampled psi functions on one period grid, keyed by family key."""
    T: float
    kmax: int
    period: float
    truncation: int
    psi: Dict[FamilyKey, np.ndarray]
    meta: Dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(next(iter(self.psi.values())))

    @property
    def window(self) -> float:
        return np.pi * self.n / self.period

    @property
    def times(self) -> np.ndarray:
        return -0.5 * self.period + self.period * np.arange(self.n) / self.n

    @property
    def frequencies(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(-self.n // 2, self.n // 2) / self.period

    def keys(self) -> List[FamilyKey]:
        return [key for key in family_keys(self.kmax) if key in self.psi]

    def samples(self, key: FamilyKey) -> np.ndarray:
        try:
            return self.psi[key]
        except KeyError:
            raise IndexCoverageError(f"function {key_name(key)} is not in the family (kmax={self.kmax}).") from None

    def coefficients(self, key: FamilyKey) -> np.ndarray:
        """I(x_n) for n = -N/2 .. N/2-1, recovered from the samples."""
        signs = np.where(np.arange(-self.n // 2, self.n // 2) % 2 == 0, 1.0, -1.0)
        return (self.period / self.n) * np.fft.fftshift(np.fft.fft(self.samples(key))) * signs

    def combine(self, weights: Dict[FamilyKey, complex]) -> np.ndarray:
        """Fourier coefficients of sum_key w_key psi_key."""
        missing = [key_name(key) for key in weights if key not in self.psi]
        if missing:
            raise IndexCoverageError(f"family (kmax={self.kmax}) lacks {', '.join(missing)}.")
        total = np.zeros(self.n, dtype=complex)
        for key, weight in weights.items():
            if weight != 0:
                total += weight * self.coefficients(key)
        return total

    def evaluate(self, key: FamilyKey, t) -> np.ndarray:
        """Exact trigonometric interpolation of psi at arbitrary times."""
        return self.evaluate_coefficients(self.coefficients(key), t)

    def evaluate_coefficients(self, coeffs: np.ndarray, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
        x = self.frequencies
        out = np.empty(t.size, dtype=complex)
        step = max(1, _CHUNK_ELEMENTS // x.size)
        for start in range(0, t.size, step):
            chunk = t[start:start + step]
            out[start:start + step] = np.exp(1j * chunk[:, None] * x[None, :]) @ coeffs
        return out / self.period

    def norm(self, key: FamilyKey) -> float:
        """L2 norm over one period by Parseval."""
        return self.coefficient_norm(self.coefficients(key))

    def coefficient_norm(self, coeffs: np.ndarray) -> float:
        scale = float(np.max(np.abs(coeffs)))
        if scale == 0.0:
            return 0.0
        return scale * float(np.sqrt(np.sum(np.abs(coeffs / scale) ** 2) / self.period))

    def interpolant_norm(self, key: FamilyKey) -> float:
        return float(np.sqrt(2.0 * np.pi)) * self.norm(key)

    def leakage(self, key: FamilyKey) -> float:
        """Share of the sampled energy outside [-T/2, T/2]."""
        values = self.samples(key)
        scale = float(np.max(np.abs(values)))
        if scale == 0.0:
            return 0.0
        power = np.abs(values / scale) ** 2
        outside = np.abs(self.times) > 0.5 * self.T
        return float(power[outside].sum() / power.sum())

    def to_dict(self) -> Dict:
        return {
            "T": self.T,
            "kmax": self.kmax,
            "truncation": self.truncation,
            "grid": {"n": self.n, "period": self.period, "window": self.window, "t_start": -0.5 * self.period},
            "functions": {key_name(key): complex_pairs(self.psi[key]) for key in self.keys()},
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "BiorthogonalFamily":
        grid = require(data, "grid", "family")
        functions = require(data, "functions", "family")
        n = int(require(grid, "n", "family.grid"))
        psi = {}
        for name, pairs in functions.items():
            values = complex_array(pairs, f"family.functions.{name}")
            if values.size != n:
                raise SchemaError(f"family.functions.{name}: {values.size} samples, grid has {n}.")
            psi[parse_key(name)] = values
        if not psi:
            raise SchemaError("family: no functions stored.")
        return cls(T=float(require(data, "T", "family")), kmax=int(require(data, "kmax", "family")),
                   period=float(require(grid, "period", "family.grid")),
                   truncation=int(data.get("truncation", DEFAULT_TRUNCATION)), psi=psi,
                   meta=dict(data.get("meta", {})))


def build_family(T: float, kmax: int, grid: int = DEFAULT_GRID, period: Optional[float] = None,
                 truncation: int = DEFAULT_TRUNCATION, tail_limit: float = TAIL_LIMIT,
                 builder: Optional[InterpolantBuilder] = None) -> BiorthogonalFamily:
    if kmax < 1:
        raise ValidationError(f"kmax must be >= 1, got {kmax}.")
    period = float(period) if period is not None else float(T) + DEFAULT_MARGIN
    window = np.pi * grid / period
    builder = builder or InterpolantBuilder(T, truncation=truncation, window=window)
    psi = {key: psi_from_interpolant(builder, key, grid, period, tail_limit) for key in family_keys(kmax)}
    family = BiorthogonalFamily(T=float(T), kmax=int(kmax), period=period, truncation=builder.truncation, psi=psi,
                                meta={"window": window, "multiplier": builder.multiplier.to_dict(),
                                      "k_prime": {str(p): [builder.k_prime(p).real, builder.k_prime(p).imag]
                                                  for p in (-2, 2)}})
    worst = max(family.leakage(key) for key in psi)
    logger.info("family T=%.4f kmax=%d: %d functions on %d samples, worst leakage %.2e",
                T, kmax, len(psi), grid, worst)
    if worst > LEAKAGE_LIMIT:
        raise WindowTooSmallError(
            f"support leakage {worst:.2e} outside [-T/2, T/2] exceeds {LEAKAGE_LIMIT:.0e} "
            f"(window W={window:.1f}); increase the grid."
        )
    return family


# ---------- Gram verification ----------
def period_moments(mu: np.ndarray, half: float, degree: int) -> np.ndarray:
    """int_{-h}^{h} t^d e^{mu t} dt for d in {0, 1}."""
    mu = np.asarray(mu, dtype=complex)
    x = mu * half
    small = np.abs(x) < 1e-2
    out = np.empty_like(mu)
    xs, xl, ml = x[small], x[~small], mu[~small]
    if degree == 0:
        out[small] = 2.0 * half * (1.0 + xs ** 2 / 6.0 + xs ** 4 / 120.0)
        out[~small] = 2.0 * np.sinh(xl) / ml
    elif degree == 1:
        out[small] = (2.0 * half ** 3 / 3.0) * mu[small] * (1.0 + xs ** 2 / 10.0 + xs ** 4 / 280.0)
        out[~small] = (2.0 * half / ml) * (np.cosh(xl) - np.sinh(xl) / xl)
    else:
        raise ValueError(f"period_moments supports degree 0 or 1, got {degree}.")
    return out


def _columns(k_test: int, table: Optional[EigenvalueTable]) -> List[Tuple[str, int, int, complex]]:
    def lam(k, branch):
        return table.value(k, branch) if table is not None else eigenvalue(k, branch)

    cols = []
    for k in range(-k_test, k_test + 1):
        if k in DOUBLE_MODES:
            cols.append(("double", k, 0, lam(k, Branch.PLUS)))
            if k != 0:
                cols.append(("double", k, 1, lam(k, Branch.PLUS)))
        else:
            cols.append(("plus", k, 0, lam(k, Branch.PLUS)))
            cols.append(("minus", k, 0, lam(k, Branch.MINUS)))
    return cols


def _gram_expected(row: FamilyKey, col: Tuple[str, int, int, complex]) -> float:
    label, k = row
    c_label, c_k, degree, _ = col
    if label == "tilde":
        return 1.0 if (c_label, c_k, degree) == ("double", k, 1) else 0.0
    return 1.0 if (c_label, c_k, degree) == (label, k, 0) else 0.0


@dataclass
class GramReport:
    entries: pd.DataFrame
    norms: pd.DataFrame
    plus_constant: float
    minus_constant: float

    @property
    def max_quadrature_deviation(self) -> float:
        sel = self.entries[self.entries["method"] == "quadrature"]
        return float(sel["deviation"].max()) if len(sel) else 0.0

    @property
    def unverified_columns(self) -> List[str]:
        """Columns whose weight on [-T/2, T/2] is too large for double precision."""
        sel = self.entries[self.entries["method"] == "unverified"]
        return sorted(set(sel["column"]))

    @property
    def max_leakage(self) -> float:
        return float(self.norms["leakage"].max())

    def passed(self, tol: float = GRAM_TOLERANCE) -> bool:
        return self.max_quadrature_deviation <= tol

    def summary(self) -> Dict:
        return {
            "max_quadrature_deviation": self.max_quadrature_deviation,
            "unverified_columns": self.unverified_columns,
            "max_leakage": self.max_leakage,
            "plus_norm_constant": self.plus_constant,
            "minus_norm_constant": self.minus_constant,
            "passed": self.passed(),
        }


def verify_family(family: BiorthogonalFamily, table: Optional[EigenvalueTable] = None,
                  k_test: Optional[int] = None, resolvable_weight: float = RESOLVABLE_WEIGHT) -> GramReport:
    """Cross-Gram of the family against {t^d e^{lambda t}} and the norm-growth fits.

    Every entry is integrated over [-T/2, T/2] in closed form against the
    Fourier coefficients of psi. Columns whose weight e^{-Re(lambda) T/2}
    (T/2)^d exceeds ``resolvable_weight`` (parabolic modes with |k| >= 3)
    amplify the rounding of psi beyond any useful tolerance; they are listed
    as "unverified" and do not count towards ``passed``.
    """
    k_test = family.kmax if k_test is None else int(k_test)
    if k_test > family.kmax:
        raise IndexCoverageError(f"k_test={k_test} exceeds the family range kmax={family.kmax}.")
    if table is not None and table.K < k_test:
        raise IndexCoverageError(f"eigenvalue table K={table.K} does not cover k_test={k_test}.")
    rows = [key for key in family.keys() if abs(key[1]) <= k_test]
    cols = _columns(k_test, table)
    half = 0.5 * family.T
    x = family.frequencies
    coeffs = np.array([family.coefficients(key) for key in rows])

    records = []
    for col in cols:
        c_label, c_k, degree, lam = col
        weight = np.exp(-lam.real * half) * half ** degree
        method = "quadrature" if weight <= resolvable_weight else "unverified"
        with np.errstate(over="ignore", invalid="ignore"):
            values = coeffs @ period_moments(lam + 1j * x, half, degree) / family.period
        for row, value in zip(rows, values):
            expected = _gram_expected(row, col)
            records.append({"row": key_name(row), "column": f"{c_label}:{c_k}:{degree}", "method": method,
                            "weight": float(weight), "value_re": value.real, "value_im": value.imag,
                            "expected": expected, "deviation": abs(value - expected)})
    entries = pd.DataFrame(records)

    b_coef = float(family.meta.get("multiplier", {}).get("b", DEFAULT_B))
    norm_rows = []
    plus_fit, minus_fit = [], []
    for key in rows:
        nrm = family.norm(key)
        norm_rows.append({"function": key_name(key), "k": key[1], "label": key[0], "norm": nrm,
                          "interpolant_norm": float(np.sqrt(2.0 * np.pi)) * nrm, "leakage": family.leakage(key)})
        ak = abs(key[1])
        if ak >= 3 and nrm > 0.0:
            if key[0] == "plus":
                plus_fit.append(nrm / ak ** 4)
            elif key[0] == "minus":
                minus_fit.append(np.exp(np.log(nrm) - 2.0 * np.log(ak) + 0.5 * family.T * ak ** 2
                                        - 2.0 * b_coef * np.pi * ak))
    report = GramReport(entries=entries, norms=pd.DataFrame(norm_rows),
                        plus_constant=float(max(plus_fit, default=0.0)),
                        minus_constant=float(max(minus_fit, default=0.0)))
    logger.info("Gram check k<=%d: quadrature %.2e, %d unverified columns", k_test,
                report.max_quadrature_deviation, len(report.unverified_columns))
    return report
