# analysis/multiplier.py
"""
Multiplier m(z) from the atomized counting measure.

With s(t) = a t - b sqrt(t), a = T/(2 pi) - 1 and b >= sqrt(2), the nodes
tau_k = s^{-1}(k) carry unit atoms and

    m(z) = prod_{k >= 0} (1 - (z - i)^2 / tau_k^2),    m(i) = 1.

Exact factors run to k = K_m; the remaining atoms are integrated in closed
form against ds(t) starting at the midpoint s^{-1}(K_m + 1/2).

On the real line |m(x)| ~ |x| e^{2 b^2 / a} e^{-b pi sqrt|x|}. The
canonical products grow like e^{sqrt2 pi sqrt|x|}, so b > sqrt(2) leaves
the interpolants a root-exponential decay, while the constant e^{2 b^2 / a}
(`log_growth`) limits how short the horizon may be.
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

import numpy as np

from analysis.spectrum import DOUBLE_MODES, Branch, eigenvalue
from errors import InvalidTruncationError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_B = 2.0
MIN_B = float(np.sqrt(2.0))
WINDOW_FACTOR = 2.0
EXTRA_NODES = 64
NODE_PROXIMITY = 1e-9
_CHUNK_ELEMENTS = 2 ** 22


def node(a_slope: float, b_coef: float, k: float) -> float:
    """s^{-1}(k) for s(t) = a t - b sqrt(t)."""
    root = (b_coef + np.sqrt(b_coef * b_coef + 4.0 * a_slope * k)) / (2.0 * a_slope)
    return float(root * root)


def truncation_for(a_slope: float, b_coef: float, radius: float) -> int:
    """Smallest K_m (plus the safety nodes) whose exact range covers |z - i| <= radius."""
    reach = WINDOW_FACTOR * float(radius)
    K_m = int(np.ceil(a_slope * reach - b_coef * np.sqrt(reach))) + EXTRA_NODES
    return max(K_m, EXTRA_NODES)


@dataclass(frozen=True)
class MultiplierParams:
    a_slope: float
    b_coef: float
    truncation: int

    def __post_init__(self):
        if self.a_slope <= 0.0:
            raise ValidationError(f"multiplier slope a = T/(2 pi) - 1 must be positive, got {self.a_slope}.")
        if self.b_coef < 0.0:
            raise ValidationError(f"multiplier coefficient b must be non-negative, got {self.b_coef}.")
        if self.truncation < 1:
            raise InvalidTruncationError(f"multiplier truncation must be >= 1, got {self.truncation}.")

    @property
    def nodes(self) -> np.ndarray:
        ks = np.arange(self.truncation + 1, dtype=float)
        root = (self.b_coef + np.sqrt(self.b_coef ** 2 + 4.0 * self.a_slope * ks)) / (2.0 * self.a_slope)
        return root * root

    @property
    def B(self) -> float:
        """tau_0, the positive zero of s."""
        return (self.b_coef / self.a_slope) ** 2

    @property
    def tail_start(self) -> float:
        return node(self.a_slope, self.b_coef, self.truncation + 0.5)

    @property
    def exact_radius(self) -> float:
        """|z - i| up to which the exact factors dominate the tail integral."""
        return 0.5 * self.tail_start

    @property
    def log_growth(self) -> float:
        """2 b^2 / a, the log of the real-line constant of m."""
        return 2.0 * self.b_coef ** 2 / self.a_slope

    def counting(self, t):
        return self.a_slope * t - self.b_coef * np.sqrt(t)

    def covering(self, radius: float) -> "MultiplierParams":
        """The same multiplier with enough exact factors for |z - i| <= radius."""
        if radius <= self.exact_radius:
            return self
        return replace(self, truncation=max(self.truncation, truncation_for(self.a_slope, self.b_coef, radius)))

    def to_dict(self) -> Dict:
        return {"a": self.a_slope, "b": self.b_coef, "B": self.B, "truncation": self.truncation,
                "log_growth": self.log_growth}


def multiplier_nodes(a_slope: float, b_coef: float, truncation: int) -> MultiplierParams:
    return MultiplierParams(a_slope=float(a_slope), b_coef=float(b_coef), truncation=int(truncation))


def multiplier_params_for(T: float, window: float, b_coef: float = DEFAULT_B) -> MultiplierParams:
    """Exact nodes up to s(2 W) + 64 for evaluation on |Re z| <= W."""
    a_slope = T / (2.0 * np.pi) - 1.0
    if a_slope <= 0.0:
        raise ValidationError(f"the multiplier needs T > 2 pi, got T={T}.")
    if b_coef < MIN_B:
        raise ValidationError(f"the multiplier needs b >= sqrt(2) to tame the canonical products, got b={b_coef}.")
    truncation = truncation_for(a_slope, b_coef, max(float(window), 50.0))
    return MultiplierParams(a_slope=a_slope, b_coef=float(b_coef), truncation=truncation)


def _g(r0: float, c: np.ndarray) -> np.ndarray:
    sc = np.sqrt(c)
    return -r0 * np.log(1.0 - c / r0 ** 2) - sc * np.log((r0 + sc) / (r0 - sc))


def tail_integral(v: np.ndarray, params: MultiplierParams) -> np.ndarray:
    """Closed-form sum of log(1 - v^2/t^2) over the atoms beyond K_m."""
    t0 = params.tail_start
    r0 = np.sqrt(t0)
    part_a = -params.a_slope * (t0 * np.log(1.0 - v * v / t0 ** 2) + v * np.log((t0 + v) / (t0 - v)))
    part_b = -params.b_coef * (_g(r0, v) + _g(r0, -v))
    return part_a + part_b


def log_multiplier(z, params: MultiplierParams) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    v = z - 1j
    radius = float(np.max(np.abs(v))) if v.size else 0.0
    if radius > params.exact_radius:
        wider = params.covering(radius)
        logger.debug("multiplier extended from K_m=%d to K_m=%d for |z - i| = %.1f",
                     params.truncation, wider.truncation, radius)
        params = wider
    nodes = params.nodes
    inv = 1.0 / nodes ** 2
    out = np.zeros(v.size, dtype=complex)
    gap = np.inf
    step = max(1, _CHUNK_ELEMENTS // inv.size)
    with np.errstate(divide="ignore"):
        for start in range(0, v.size, step):
            chunk = v[start:start + step]
            factors = 1.0 - (chunk * chunk)[:, None] * inv[None, :]
            out[start:start + step] = np.log(factors).sum(axis=1)
            # |1 - v^2/tau^2| ~ 2 |v - tau| / tau near the zero v = tau
            gap = min(gap, float(np.min(np.abs(factors) * nodes[None, :] / 2.0)))
    if gap < NODE_PROXIMITY:
        logger.warning("multiplier evaluated within %.1e of a zero", gap)
    return out + tail_integral(v, params)


def multiplier_eval(z, params: MultiplierParams) -> Tuple[np.ndarray, np.ndarray]:
    """(m(z), estimated relative error of the tail approximation)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    if z.size:
        params = params.covering(float(np.max(np.abs(z - 1j))))
    values = np.exp(log_multiplier(z, params))
    error = np.abs(z - 1j) ** 2 * params.a_slope ** 2 / (12.0 * params.truncation ** 3)
    return values, error


def multiplier_estimates(T: float, kmax: int = 12, xmax: float = 400.0,
                         params: Optional[MultiplierParams] = None) -> Dict[str, float]:
    """Fitted constants for the decay of m on R and its size on the shifted spectrum.

    - real_line: max |m(x)| e^{b pi sqrt|x|} / (1 + |x|)
    - plus_floor: min |m(i lambda_k^+)| |k|^3 e^{b pi sqrt|k|}, 1 <= |k| <= kmax
    - minus_floor: min |m(i lambda_k^-)| e^{-a pi k^2 + 2 b pi |k|}, 3 <= |k| <= kmax
    """
    params = params or multiplier_params_for(T, window=xmax)
    x = np.linspace(-xmax, xmax, 8001)
    ax = np.abs(x)
    real_line = np.max(np.exp(log_multiplier(x, params).real + params.b_coef * np.pi * np.sqrt(ax) - np.log1p(ax)))
    plus, minus = [], []
    for k in range(-kmax, kmax + 1):
        if k == 0:
            continue
        ak = abs(k)
        zp = 1j * eigenvalue(k, Branch.PLUS)
        plus.append(log_multiplier(zp, params)[0].real + 3.0 * np.log(ak) + params.b_coef * np.pi * np.sqrt(ak))
        if ak >= 3 and k not in DOUBLE_MODES:
            zm = 1j * eigenvalue(k, Branch.MINUS)
            minus.append(log_multiplier(zm, params)[0].real - params.a_slope * np.pi * ak ** 2
                         + 2.0 * params.b_coef * np.pi * ak)
    estimates = {"real_line": float(real_line), "plus_floor": float(np.exp(min(plus))),
                 "minus_floor": float(np.exp(min(minus))), "truncation": params.truncation}
    logger.info("multiplier estimates T=%.4f: %s", T, estimates)
    return estimates
