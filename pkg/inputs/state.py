# inputs/state.py
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from errors import InvalidTruncationError, SchemaError, TruncationMismatchError, ValidationError
from outputs.json_export import complex_array, complex_pairs, require

# <u, e^{ikx}> = integral of u(x) e^{-ikx} over the torus = 2*pi * u_k
TWO_PI_PAIRING = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class FourierState:
    """Truncated Fourier coefficients of a (position, velocity) pair on the torus.

    Index ``j`` of ``pos`` / ``vel`` holds mode ``k = j - K``, so both arrays
    have length ``2K + 1``. In the moving frame ``pos`` holds the coefficients
    of v and ``vel`` those of v_t; in the original frame they hold y and y_t.
    """
    K: int
    pos: np.ndarray
    vel: np.ndarray

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 0:
            raise InvalidTruncationError(f"K must be a non-negative integer, got {self.K}.")
        object.__setattr__(self, "K", int(self.K))
        for name in ("pos", "vel"):
            arr = np.array(getattr(self, name), dtype=complex)
            if arr.shape != (2 * self.K + 1,):
                raise TruncationMismatchError(
                    f"{name} must have length 2K+1 = {2 * self.K + 1}, got shape {arr.shape}."
                )
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def index(self, k: int) -> int:
        if abs(k) > self.K:
            raise TruncationMismatchError(f"mode {k} outside the truncation |k| <= {self.K}.")
        return int(k) + self.K

    def coefficient(self, k: int) -> Tuple[complex, complex]:
        j = self.index(k)
        return complex(self.pos[j]), complex(self.vel[j])

    def pairing(self, k: int) -> Tuple[complex, complex]:
        """(<v, e^{ikx}>, <v_t, e^{ikx}>) under TWO_PI_PAIRING."""
        c, d = self.coefficient(k)
        return TWO_PI_PAIRING * c, TWO_PI_PAIRING * d

    @property
    def means(self) -> Tuple[complex, complex]:
        return self.coefficient(0)

    def is_real(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.pos), initial=0.0)),
                    float(np.max(np.abs(self.vel), initial=0.0)))
        return (np.max(np.abs(self.pos - np.conj(self.pos[::-1])), initial=0.0) <= tol * scale
                and np.max(np.abs(self.vel - np.conj(self.vel[::-1])), initial=0.0) <= tol * scale)

    def is_zero(self) -> bool:
        return not (np.any(self.pos) or np.any(self.vel))

    def has_modes_beyond(self, K: int) -> bool:
        outside = np.abs(self.indices) > K
        return bool(np.any(self.pos[outside]) or np.any(self.vel[outside]))

    def resized(self, K: int) -> "FourierState":
        """Truncate to, or zero-pad up to, a new K."""
        pos = np.zeros(2 * K + 1, dtype=complex)
        vel = np.zeros(2 * K + 1, dtype=complex)
        m = min(K, self.K)
        pos[K - m:K + m + 1] = self.pos[self.K - m:self.K + m + 1]
        vel[K - m:K + m + 1] = self.vel[self.K - m:self.K + m + 1]
        return FourierState(K=K, pos=pos, vel=vel)

    def scaled(self, factor: complex) -> "FourierState":
        return FourierState(K=self.K, pos=self.pos * factor, vel=self.vel * factor)

    def __add__(self, other: "FourierState") -> "FourierState":
        if other.K != self.K:
            raise TruncationMismatchError(f"cannot add states with K={self.K} and K={other.K}.")
        return FourierState(K=self.K, pos=self.pos + other.pos, vel=self.vel + other.vel)

    def __sub__(self, other: "FourierState") -> "FourierState":
        return self + other.scaled(-1.0)

    # ---------- constructors ----------
    @classmethod
    def zeros(cls, K: int) -> "FourierState":
        return cls(K=K, pos=np.zeros(2 * K + 1), vel=np.zeros(2 * K + 1))

    @classmethod
    def from_modes(cls, K: int, pos: Optional[Dict[int, complex]] = None,
                   vel: Optional[Dict[int, complex]] = None) -> "FourierState":
        """Build a state from sparse {k: coefficient} maps."""
        p = np.zeros(2 * K + 1, dtype=complex)
        v = np.zeros(2 * K + 1, dtype=complex)
        for target, modes in ((p, pos or {}), (v, vel or {})):
            for k, value in modes.items():
                if abs(k) > K:
                    raise TruncationMismatchError(f"mode {k} outside the truncation |k| <= {K}.")
                target[k + K] = value
        return cls(K=K, pos=p, vel=v)

    @classmethod
    def random(cls, K: int, rng: np.random.Generator, kmin: int = 1, kmax: Optional[int] = None,
               amplitude: float = 1.0, decay: float = 0.0,
               means: Tuple[float, float] = (0.0, 0.0)) -> "FourierState":
        """Random real-valued data supported on kmin <= |k| <= kmax, plus the given means.

        Coefficients are complex Gaussians of size ``amplitude / |k|**decay``;
        the negative modes are the conjugates so the fields are real.
        """
        kmax = K if kmax is None else kmax
        if not 1 <= kmin <= kmax <= K:
            raise ValidationError(f"need 1 <= kmin <= kmax <= K, got kmin={kmin}, kmax={kmax}, K={K}.")
        pos = np.zeros(2 * K + 1, dtype=complex)
        vel = np.zeros(2 * K + 1, dtype=complex)
        for k in range(kmin, kmax + 1):
            size = amplitude / k ** decay
            for target in (pos, vel):
                z = size * (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2.0)
                target[K + k] = z
                target[K - k] = np.conj(z)
        pos[K] = means[0]
        vel[K] = means[1]
        return cls(K=K, pos=pos, vel=vel)

    # ---------- serialization ----------
    def to_dict(self) -> Dict:
        return {"K": self.K, "pos": complex_pairs(self.pos), "vel": complex_pairs(self.vel)}

    @classmethod
    def from_dict(cls, data: Dict, rng: Optional[np.random.Generator] = None,
                  context: str = "state") -> "FourierState":
        """Read either explicit coefficients or a ``{"random": {...}}`` request."""
        if "random" in data:
            spec = data["random"]
            if rng is None:
                rng = np.random.default_rng(0)
            K = int(require(spec, "K", f"{context}.random"))
            means = spec.get("means", [0.0, 0.0])
            return cls.random(
                K, rng,
                kmin=int(spec.get("kmin", 1)),
                kmax=int(spec["kmax"]) if "kmax" in spec else None,
                amplitude=float(spec.get("amplitude", 1.0)),
                decay=float(spec.get("decay", 0.0)),
                means=(float(means[0]), float(means[1])),
            )
        K = require(data, "K", context)
        pos = complex_array(require(data, "pos", context), f"{context}.pos")
        vel = complex_array(require(data, "vel", context), f"{context}.vel")
        try:
            return cls(K=int(K), pos=pos, vel=vel)
        except TruncationMismatchError as e:
            raise SchemaError(f"{context}: {e}") from e


@dataclass(eq=False)
class SampledControl:
    """A control sampled on the uniform grid t0 = t_0 < ... < t_{n-1} = t1.

    ``samples`` is either a vector (scalar control h(t), combined with a
    profile's beta ledger) or a (2K+1, n) matrix holding, for each mode k,
    the pairing <F(., t), e^{ikx}> of a space-dependent forcing F.
    """
    t0: float
    t1: float
    samples: np.ndarray
    meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.t0 = float(self.t0)
        self.t1 = float(self.t1)
        if not self.t1 > self.t0:
            raise ValidationError(f"control interval must satisfy t1 > t0, got [{self.t0}, {self.t1}].")
        self.samples = np.array(self.samples, dtype=complex)
        if self.samples.ndim not in (1, 2):
            raise ValidationError("control samples must be a vector or a (modes, times) matrix.")
        if self.samples.shape[-1] < 3:
            raise ValidationError("a sampled control needs at least 3 samples.")
        if self.samples.ndim == 2 and self.samples.shape[0] % 2 != 1:
            raise TruncationMismatchError("a mode ledger must have 2K+1 rows.")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[-1]

    @property
    def duration(self) -> float:
        return self.t1 - self.t0

    @property
    def dt(self) -> float:
        return self.duration / (self.n_samples - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.n_samples)

    @property
    def is_ledger(self) -> bool:
        return self.samples.ndim == 2

    @property
    def modes(self) -> Optional[int]:
        return (self.samples.shape[0] - 1) // 2 if self.is_ledger else None

    def l2_norm(self) -> float:
        """L2 norm in time (summed over modes for a ledger, in pairing units)."""
        from scipy.integrate import simpson
        power = np.abs(self.samples) ** 2
        if self.is_ledger:
            power = power.sum(axis=0) / (2.0 * np.pi)
        return float(np.sqrt(simpson(power, dx=self.dt)))

    def max_imag(self) -> float:
        return float(np.max(np.abs(self.samples.imag), initial=0.0))

    @classmethod
    def zeros(cls, t0: float, t1: float, n: int) -> "SampledControl":
        return cls(t0=t0, t1=t1, samples=np.zeros(n))

    def to_dict(self) -> Dict:
        data = {"t0": self.t0, "t1": self.t1}
        if self.is_ledger:
            data["modes"] = self.modes
            data["samples"] = [complex_pairs(row) for row in self.samples]
        else:
            data["samples"] = complex_pairs(self.samples)
        if self.meta:
            data["meta"] = self.meta
        return data

    @classmethod
    def from_dict(cls, data: Dict, context: str = "control") -> "SampledControl":
        t0 = float(require(data, "t0", context))
        t1 = float(require(data, "t1", context))
        raw = require(data, "samples", context)
        if "modes" in data:
            samples = np.array([complex_array(row, f"{context}.samples") for row in raw])
        else:
            samples = complex_array(raw, f"{context}.samples")
        return cls(t0=t0, t1=t1, samples=samples, meta=dict(data.get("meta", {})))
