# inputs/problem.py
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional

import numpy as np

from errors import InvalidTruncationError, MeanObstructionError, SchemaError, TruncationMismatchError, ValidationError
from inputs.shapes import ControlShape, ShapeKind
from inputs.state import FourierState
from outputs.json_export import require

# data below this fraction of the state's size counts as zero
MEAN_TOLERANCE = 1e-8

PIPELINE_BY_SHAPE = {
    ShapeKind.DISTRIBUTED: "smooth_profile",
    ShapeKind.INDICATOR_DIFFERENCE: "two_phase",
    ShapeKind.DIRAC: "dirac",
    ShapeKind.DIPOLE: "dipole",
}


class Method(str, Enum):
    MIN_NORM = "min-norm"
    BIORTHOGONAL = "biorthogonal"


def means_vanish(state: FourierState, tol: float = MEAN_TOLERANCE) -> bool:
    scale = max(1.0, float(np.max(np.abs(state.pos))), float(np.max(np.abs(state.vel))))
    c0, d0 = state.means
    return abs(c0) <= tol * scale and abs(d0) <= tol * scale


@dataclass(eq=False)
class ControlProblem:
    """A null-control request.

    Attributes
    ----------
    shape : ControlShape
        Profile of the moving control; also selects the pipeline.
    initial : FourierState
        Initial data (y0, y_t(0)) in the ORIGINAL frame.
    T : float
        Control horizon, T > 2*pi.
    K : int
        Number of retained modes on each side.
    method : Method
        Synthesis route for the moment problem.
    grid : int, optional
        Control samples per phase; chosen from the stiffest mode when omitted.
    family_grid, truncation, window
        Biorthogonal route only: FFT size, canonical-product truncation and
        frequency window of the psi family.
    """
    shape: ControlShape
    initial: FourierState
    T: float
    K: int
    method: Method = Method.MIN_NORM
    grid: Optional[int] = None
    family_grid: int = 16384
    truncation: int = 512
    window: Optional[float] = None

    def __post_init__(self):
        self.method = Method(self.method)
        if self.T <= 2.0 * np.pi:
            raise ValidationError(f"T must exceed 2*pi = {2.0 * np.pi:.6f}, got {self.T}.")
        if self.K < 1:
            raise InvalidTruncationError(f"K must be >= 1, got {self.K}.")
        if self.initial.has_modes_beyond(self.K):
            raise TruncationMismatchError(
                f"initial data carries modes beyond K={self.K}; raise K to {self.initial.K} or drop those modes."
            )
        if self.initial.K != self.K:
            self.initial = self.initial.resized(self.K)
        if self.grid is not None and self.grid < 3:
            raise ValidationError("grid must contain at least 3 samples.")
        if self.shape.kind == ShapeKind.DIPOLE and not means_vanish(self.initial):
            raise MeanObstructionError(
                "dipole controls need zero means: the integrals of y0 and y_t(0) must vanish "
                "(the means of v and v_t are invariant under dipole forcing)."
            )

    @property
    def pipeline(self) -> str:
        return PIPELINE_BY_SHAPE[self.shape.kind]

    @property
    def is_two_phase(self) -> bool:
        return self.shape.kind == ShapeKind.INDICATOR_DIFFERENCE

    @property
    def presteer_time(self) -> float:
        """Length of the mean pre-steering phase, (T - 2*pi) / 2."""
        return (self.T - 2.0 * np.pi) / 2.0 if self.is_two_phase else 0.0

    def to_dict(self) -> Dict:
        data = {
            "shape": self.shape.to_dict(),
            "initial": self.initial.to_dict(),
            "T": self.T,
            "K": self.K,
            "method": self.method.value,
            "family_grid": self.family_grid,
            "truncation": self.truncation,
        }
        if self.grid is not None:
            data["grid"] = self.grid
        if self.window is not None:
            data["window"] = self.window
        return data

    @classmethod
    def from_dict(cls, data: Dict, rng: Optional[np.random.Generator] = None,
                  context: str = "problem") -> "ControlProblem":
        shape = ControlShape.from_dict(require(data, "shape", context), f"{context}.shape")
        initial = FourierState.from_dict(require(data, "initial", context), rng=rng,
                                         context=f"{context}.initial")
        try:
            T = float(require(data, "T", context))
            K = int(require(data, "K", context))
        except (TypeError, ValueError) as e:
            raise SchemaError(f"{context}: T and K must be numbers ({e}).") from e
        method = data.get("method", Method.MIN_NORM.value)
        try:
            method = Method(method)
        except ValueError as e:
            raise SchemaError(f"{context}.method: unknown method '{method}'.") from e
        return cls(
            shape=shape,
            initial=initial,
            T=T,
            K=K,
            method=method,
            grid=int(data["grid"]) if "grid" in data else None,
            family_grid=int(data.get("family_grid", 16384)),
            truncation=int(data.get("truncation", 512)),
            window=float(data["window"]) if "window" in data else None,
        )
