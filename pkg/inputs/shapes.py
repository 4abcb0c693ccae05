# inputs/shapes.py
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional

import numpy as np

from errors import InvalidProfileError, SchemaError
from outputs.json_export import complex_array, complex_pairs, require

DEFAULT_SIGMA = float(np.sqrt(2.0) - 1.0)


class ShapeKind(str, Enum):
    DISTRIBUTED = "distributed"
    DIRAC = "dirac"
    DIPOLE = "dipole"
    INDICATOR_DIFFERENCE = "indicator_difference"


_DEFAULT_SHAPE_LIBRARY: Dict[str, Dict] = {
    "dirac": {"kind": ShapeKind.DIRAC},
    "dipole": {"kind": ShapeKind.DIPOLE},
    # 1_[0, sigma*pi] - 1_[sigma*pi, 2*sigma*pi] with a quadratic irrational sigma
    "indicator_difference": {"kind": ShapeKind.INDICATOR_DIFFERENCE, "offset": 0.0, "sigma": DEFAULT_SIGMA},
    # smooth nonnegative bump with unit mass centred in the indicator interval
    "bump": {"kind": ShapeKind.DISTRIBUTED, "bump_center": DEFAULT_SIGMA * np.pi,
             "bump_half_width": 0.9 * DEFAULT_SIGMA * np.pi},
}


def smooth_bump(x: np.ndarray, center: float, half_width: float) -> np.ndarray:
    """exp(-1 / (1 - r^2)) on |r| < 1 with r the periodic distance to ``center`` over ``half_width``."""
    d = np.angle(np.exp(1j * (np.asarray(x, dtype=float) - center)))
    r2 = (d / half_width) ** 2
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


@dataclass(eq=False)
class ControlShape:
    """Spatial profile b of a moving control b(x - t) h(t).

    Units: x in radians on the torus [0, 2*pi). In the moving frame the
    profile is fixed and only its Fourier ledger beta_k enters the dynamics.

    Variants:
      - DIRAC: point control at the origin.
      - DIPOLE: derivative of the Dirac mass.
      - INDICATOR_DIFFERENCE: 1_[a, a+sigma*pi] - 1_[a+sigma*pi, a+2*sigma*pi].
      - DISTRIBUTED: either ``profile`` samples on x_j = 2*pi*j/n, or a
        unit-mass smooth bump given by ``bump_center`` / ``bump_half_width``.
    """
    kind: ShapeKind
    profile: Optional[np.ndarray] = None
    offset: float = 0.0
    sigma: float = DEFAULT_SIGMA
    bump_center: Optional[float] = None
    bump_half_width: Optional[float] = None

    def __post_init__(self):
        self.kind = ShapeKind(self.kind)
        if self.kind == ShapeKind.INDICATOR_DIFFERENCE and not 0.0 < self.sigma < 1.0:
            raise InvalidProfileError(f"indicator-difference sigma must lie in (0, 1), got {self.sigma}.")
        if self.kind == ShapeKind.DISTRIBUTED:
            if self.profile is None and self.bump_center is None:
                raise InvalidProfileError("a distributed shape needs profile samples or a bump definition.")
            if self.profile is not None:
                self.profile = np.array(self.profile, dtype=complex)
                if self.profile.ndim != 1 or self.profile.size < 8 or not np.all(np.isfinite(self.profile)):
                    raise InvalidProfileError("profile must be a finite vector with at least 8 samples.")
            if self.bump_center is not None and not (self.bump_half_width and 0.0 < self.bump_half_width < np.pi):
                raise InvalidProfileError("bump_half_width must lie in (0, pi).")

    @property
    def is_point(self) -> bool:
        return self.kind in (ShapeKind.DIRAC, ShapeKind.DIPOLE)

    @property
    def support(self) -> Optional[tuple]:
        """Interval (start, end) containing the profile, when known."""
        if self.kind == ShapeKind.INDICATOR_DIFFERENCE:
            return (self.offset, self.offset + 2.0 * self.sigma * np.pi)
        if self.bump_center is not None:
            return (self.bump_center - self.bump_half_width, self.bump_center + self.bump_half_width)
        return None

    def profile_samples(self, n: int) -> np.ndarray:
        """Samples of b on x_j = 2*pi*j/n (distributed shapes only)."""
        if self.kind != ShapeKind.DISTRIBUTED:
            raise InvalidProfileError(f"{self.kind.value} shapes have no sampled profile.")
        if self.profile is not None:
            return self.profile
        x = 2.0 * np.pi * np.arange(n) / n
        b = smooth_bump(x, self.bump_center, self.bump_half_width)
        return b / (b.sum() * 2.0 * np.pi / n)

    # ---------- constructors ----------
    @classmethod
    def dirac(cls) -> "ControlShape":
        return cls(kind=ShapeKind.DIRAC)

    @classmethod
    def dipole(cls) -> "ControlShape":
        return cls(kind=ShapeKind.DIPOLE)

    @classmethod
    def indicator_difference(cls, offset: float = 0.0, sigma: float = DEFAULT_SIGMA) -> "ControlShape":
        return cls(kind=ShapeKind.INDICATOR_DIFFERENCE, offset=offset, sigma=sigma)

    @classmethod
    def distributed(cls, profile: np.ndarray) -> "ControlShape":
        return cls(kind=ShapeKind.DISTRIBUTED, profile=profile)

    @classmethod
    def bump(cls, center: float, half_width: float) -> "ControlShape":
        return cls(kind=ShapeKind.DISTRIBUTED, bump_center=center, bump_half_width=half_width)

    @classmethod
    def from_library(cls, name: str, **overrides) -> "ControlShape":
        props = _DEFAULT_SHAPE_LIBRARY.get(name)
        if props is None:
            raise KeyError(f"Shape '{name}' not found; available: {cls.available_shapes()}.")
        return cls(**{**props, **overrides})

    @staticmethod
    def available_shapes():
        return list(_DEFAULT_SHAPE_LIBRARY.keys())

    # ---------- serialization ----------
    def to_dict(self) -> Dict:
        data = {"kind": self.kind.value}
        if self.kind == ShapeKind.INDICATOR_DIFFERENCE:
            data.update(offset=self.offset, sigma=self.sigma)
        if self.profile is not None:
            data["profile"] = complex_pairs(self.profile)
        if self.bump_center is not None:
            data["bump"] = {"center": self.bump_center, "half_width": self.bump_half_width}
        return data

    @classmethod
    def from_dict(cls, data: Dict, context: str = "shape") -> "ControlShape":
        kind = require(data, "kind", context)
        try:
            kind = ShapeKind(kind)
        except ValueError as e:
            raise SchemaError(f"{context}.kind: unknown shape '{kind}'.") from e
        kwargs = {"kind": kind}
        if kind == ShapeKind.INDICATOR_DIFFERENCE:
            kwargs["offset"] = float(data.get("offset", 0.0))
            kwargs["sigma"] = float(data.get("sigma", DEFAULT_SIGMA))
        if kind == ShapeKind.DISTRIBUTED:
            if "profile" in data:
                kwargs["profile"] = complex_array(data["profile"], f"{context}.profile")
            elif "bump" in data:
                bump = data["bump"]
                kwargs["bump_center"] = float(require(bump, "center", f"{context}.bump"))
                kwargs["bump_half_width"] = float(require(bump, "half_width", f"{context}.bump"))
            else:
                raise SchemaError(f"{context}: distributed shape needs 'profile' or 'bump'.")
        return cls(**kwargs)
