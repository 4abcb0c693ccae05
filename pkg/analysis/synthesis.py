"""
Null-Control Synthesis
======================

Assembles scalar controls h(t) that steer a truncated state to rest at
time T, for each control shape:

- distributed profile  -> one moment system, one phase
- indicator difference -> mean pre-steering on [0, eps] with a smooth bump
                          (eps = (T - 2 pi) / 2), then the indicator
                          difference on [eps, T]
- Dirac mass           -> one phase; the position mean is left free
- dipole               -> one phase; data must have zero means

Two routes solve each moment system: the minimum-norm Gram solve and the
explicit biorthogonal expansion

    psi(t) = sum alpha_k^+ psi_k^+ + sum alpha_k^- psi_k^- + sum (alpha_p psi_p + alpha~_p psi~_p),
    h(t)   = psi(T/2 - t),

followed by one minimum-norm correction of the remaining moment residual.
The correction only polishes rounding: an expansion whose own relative
residual exceeds BIORTHOGONAL_TOLERANCE is rejected, and the unpolished
residual is reported with every biorthogonal run.
Every run is checked by closed-loop simulation in the moving frame and
mapped back to the original frame at t = T.

Example Usage:
--------------
```python
from analysis.synthesis import run_pipeline
from inputs.problem import ControlProblem

problem = ControlProblem(shape=ControlShape.dipole(), initial=y0, T=2 * np.pi + 1, K=6)
result = run_pipeline(problem)
result.report["final_norm_ratio"]       # <= 1e-6
```
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from analysis.biorthogonal import DEFAULT_GRID as DEFAULT_FAMILY_GRID
from analysis.biorthogonal import BiorthogonalFamily, FamilyKey, build_family
from analysis.moments import (MomentSystem, beta_coefficients, build_moment_system, constraint_moments,
                              solve_min_norm, summability, verify_moments)
from analysis.solver import (FrameDirection, boundedness_constant, default_grid, evolve_forced, frame_transform,
                             mean_prediction, norm_W, sobolev_norm)
from errors import IndexCoverageError, RefinementRequiredError, SchemaError, ValidationError
from inputs.problem import ControlProblem, Method
from inputs.shapes import ControlShape, ShapeKind
from inputs.state import TWO_PI_PAIRING, FourierState, SampledControl
from outputs.json_export import complex_pair, require

logger = logging.getLogger(__name__)

BUMP_WIDTH_FRACTION = 0.9
PHASE_TOLERANCE = 1e-9
BOUNDEDNESS_TIMES = 9
BIORTHOGONAL_TOLERANCE = 2e-2
# acceptance thresholds of a closed-loop report
NULL_RATIO_LIMIT = 1e-5
MOMENT_RELATIVE_LIMIT = 1e-6
MEAN_LIMIT = 1e-8


# ---------- alpha ledger ----------
@dataclass
class AlphaLedger:
    """Expansion weights of psi on the biorthogonal family.

    alpha_plus / alpha_minus are indexed by k outside {0, +/-2}; alpha by
    k in {0, +/-2}; alpha_tilde by p in {+/-2} (and 0 for distributed
    profiles with a nonzero mean, which the family cannot represent).
    """
    T: float
    alpha_plus: Dict[int, complex] = field(default_factory=dict)
    alpha_minus: Dict[int, complex] = field(default_factory=dict)
    alpha: Dict[int, complex] = field(default_factory=dict)
    alpha_tilde: Dict[int, complex] = field(default_factory=dict)
    summability: float = float("nan")

    def weights(self) -> Dict[FamilyKey, complex]:
        out: Dict[FamilyKey, complex] = {}
        out.update({("plus", k): a for k, a in self.alpha_plus.items()})
        out.update({("minus", k): a for k, a in self.alpha_minus.items()})
        out.update({("double", k): a for k, a in self.alpha.items()})
        out.update({("tilde", k): a for k, a in self.alpha_tilde.items()})
        return out

    @property
    def kmax(self) -> int:
        return max((abs(k) for _, k in self.weights()), default=0)

    def is_zero(self) -> bool:
        return all(a == 0 for a in self.weights().values())

    def scaled(self, factor: complex) -> "AlphaLedger":
        def scale(d):
            return {k: factor * a for k, a in d.items()}

        return AlphaLedger(T=self.T, alpha_plus=scale(self.alpha_plus), alpha_minus=scale(self.alpha_minus),
                           alpha=scale(self.alpha), alpha_tilde=scale(self.alpha_tilde),
                           summability=self.summability)

    def to_dict(self) -> Dict:
        def pairs(d):
            return {str(k): complex_pair(a) for k, a in sorted(d.items())}

        return {"T": self.T, "summability": self.summability, "alpha_plus": pairs(self.alpha_plus),
                "alpha_minus": pairs(self.alpha_minus), "alpha": pairs(self.alpha),
                "alpha_tilde": pairs(self.alpha_tilde)}


def alpha_from_system(system: MomentSystem) -> AlphaLedger:
    """Weights reproducing every constraint of ``system`` through h(t) = psi(T/2 - t).

    With int psi e^{lambda s} = delta and int s psi~_p e^{lambda_p s} = 1:
    degree 0: alpha = e^{-lambda T/2} rhs_0; degree 1: alpha~ = e^{-lambda T/2} rhs_1 - (T/2) alpha.
    """
    ledger = AlphaLedger(T=system.T)
    half = 0.5 * system.T
    second = []
    for c in system.constraints:
        shift = np.exp(-c.exponent * half)
        if c.degree == 1:
            second.append((c, shift))
            continue
        value = complex(shift * c.rhs)
        if c.label == "plus":
            ledger.alpha_plus[c.k] = value
        elif c.label == "minus":
            ledger.alpha_minus[c.k] = value
        else:
            ledger.alpha[c.k] = value
    for c, shift in second:
        ledger.alpha_tilde[c.k] = complex(shift * c.rhs - half * ledger.alpha.get(c.k, 0.0))
    return ledger


def alpha_coefficients(problem: ControlProblem) -> AlphaLedger:
    """Single-phase ledger of ``problem`` (initial data taken to the moving frame)."""
    v0 = frame_transform(problem.initial, FrameDirection.TO_MOVING)
    system = build_moment_system(problem.shape, v0, problem.T, problem.K)
    ledger = alpha_from_system(system)
    ledger.summability = summability(beta_coefficients(problem.shape, problem.K), v0)
    logger.info("alpha ledger: %d weights, summability %.3e", len(ledger.weights()), ledger.summability)
    return ledger


def assemble_control(ledger: AlphaLedger, family: BiorthogonalFamily, grid: Optional[int] = None) -> SampledControl:
    """h(t) = psi(T/2 - t) on [0, T], with ``meta`` holding ||h|| and sum |alpha| ||psi||."""
    if abs(family.T - ledger.T) > PHASE_TOLERANCE * ledger.T:
        raise ValidationError(f"family built for T={family.T}, ledger needs T={ledger.T}.")
    if ledger.kmax > family.kmax:
        raise IndexCoverageError(f"ledger reaches |k|={ledger.kmax}, family only kmax={family.kmax}.")
    grid = grid or default_grid(ledger.T, max(ledger.kmax, 1))
    weights = ledger.weights()
    t = np.linspace(0.0, ledger.T, grid)
    if ledger.is_zero():
        samples = np.zeros(grid, dtype=complex)
        norm_bound = 0.0
    else:
        coeffs = family.combine(weights)
        samples = family.evaluate_coefficients(coeffs, 0.5 * ledger.T - t)
        norm_bound = float(sum(abs(a) * family.norm(key) for key, a in weights.items() if a != 0))
    h = SampledControl(0.0, ledger.T, samples)
    h.meta.update({"norm": h.l2_norm(), "norm_bound": norm_bound})
    logger.info("assembled control: ||h|| = %.3e, bound %.3e", h.meta["norm"], norm_bound)
    return h


# ---------- one phase ----------
def synthesize_control(system: MomentSystem, method: Method = Method.MIN_NORM, grid: Optional[int] = None,
                       family: Optional[BiorthogonalFamily] = None, family_grid: int = DEFAULT_FAMILY_GRID,
                       truncation: int = 512, window: Optional[float] = None) -> SampledControl:
    """Control on [0, system.T] satisfying every constraint of ``system``."""
    method = Method(method)
    grid = grid or default_grid(system.T, max(system.K, 1))
    if method == Method.MIN_NORM:
        h = solve_min_norm(system, grid=grid)
        h.meta["method"] = method.value
        return h

    if family is None:
        period = np.pi * family_grid / window if window else None
        family = build_family(system.T, max(system.K, 1), grid=family_grid, period=period, truncation=truncation)
    ledger = alpha_from_system(system)
    if 0 in ledger.alpha_tilde:
        raise IndexCoverageError(
            "the position-mean constraint at k = 0 has no biorthogonal function; use the min-norm method."
        )
    h = assemble_control(ledger, family, grid)
    residual = system.rhs - constraint_moments(h, system) if len(system) else np.zeros(0, dtype=complex)
    before = float(np.max(np.abs(residual), initial=0.0))
    scale = float(np.max(np.abs(system.rhs), initial=0.0))
    relative = before / scale if scale > 0.0 else before
    if relative > BIORTHOGONAL_TOLERANCE:
        raise RefinementRequiredError(
            f"the biorthogonal expansion misses its moments by {relative:.2e} (relative), above "
            f"{BIORTHOGONAL_TOLERANCE:.0e}; increase the family grid or the horizon T."
        )
    correction = solve_min_norm(system.with_rhs(residual), grid=grid)
    samples = h.samples + correction.samples
    max_imag = float(np.max(np.abs(samples.imag), initial=0.0))
    if system.is_conjugate_closed():
        samples = samples.real.astype(complex)
    logger.info("biorthogonal route: residual %.2e before the min-norm correction", before)
    return SampledControl(0.0, system.T, samples, meta={
        "method": method.value, "residual_before_polish": before, "relative_before_polish": relative,
        "norm": h.meta["norm"],
        "norm_bound": h.meta["norm_bound"], "gram_condition": correction.meta["gram_condition"],
        "max_imag": max_imag, "constraints": len(system),
    })


# ---------- mean pre-steering ----------
def _mollifier(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """e^{-1/u} and its first two derivatives, zero for u <= 0."""
    f = np.zeros_like(u)
    f1 = np.zeros_like(u)
    f2 = np.zeros_like(u)
    pos = u > 0.0
    up = u[pos]
    f[pos] = np.exp(-1.0 / up)
    f1[pos] = f[pos] / up ** 2
    f2[pos] = f[pos] * (1.0 / up ** 4 - 2.0 / up ** 3)
    return f, f1, f2


def smooth_step(t: np.ndarray, eps: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """varpi = 1 - S(t/eps) and its first two time derivatives.

    S(u) = f(u) / (f(u) + f(1 - u)) with f(u) = e^{-1/u}: varpi(0) = 1,
    varpi(eps) = 0, every derivative vanishes at both ends.
    """
    u = np.clip(np.asarray(t, dtype=float) / eps, 0.0, 1.0)
    f, f1, f2 = _mollifier(u)
    g, g1, g2 = _mollifier(1.0 - u)
    g1 = -g1
    s = f + g
    num1 = f1 * g - f * g1
    d1 = num1 / s ** 2
    d2 = ((f2 * g - f * g2) * s - 2.0 * num1 * (f1 + g1)) / s ** 3
    return 1.0 - f / s, -d1 / eps, -d2 / eps ** 2


def presteer_shape(shape: Optional[ControlShape] = None) -> ControlShape:
    """Unit-mass bump inside the first lobe pair of an indicator-difference support."""
    if shape is None or shape.kind != ShapeKind.INDICATOR_DIFFERENCE:
        return ControlShape.from_library("bump")
    return ControlShape.bump(center=shape.offset + shape.sigma * np.pi,
                             half_width=BUMP_WIDTH_FRACTION * shape.sigma * np.pi)


def presteer_mean(c0: complex, d0: complex, eps: float, grid: Optional[int] = None,
                  shape: Optional[ControlShape] = None) -> Tuple[ControlShape, SampledControl]:
    """Bump profile and h = d^2/dt^2 ((c0 + d0 t) varpi) on [0, eps].

    c0 and d0 are <v(0), 1> and <v_t(0), 1>; with a unit-mass profile both
    means reach zero at t = eps.
    """
    if eps <= 0.0:
        raise ValidationError(f"pre-steering time must be positive, got {eps}.")
    grid = grid or 4097
    t = np.linspace(0.0, eps, grid)
    w, w1, w2 = smooth_step(t, eps)
    h = (c0 + d0 * t) * w2 + 2.0 * d0 * w1
    control = SampledControl(0.0, eps, h.astype(complex), meta={"method": "presteer"})
    return presteer_shape(shape), control


# ---------- pipeline ----------
@dataclass(eq=False)
class ControlPhase:
    """Control b(x) h(t) applied on [control.t0, control.t1] (moving-frame profile)."""
    name: str  # "presteer" or "null"
    shape: ControlShape
    control: SampledControl
    seconds: float = 0.0

    def to_dict(self) -> Dict:
        return {"name": self.name, "shape": self.shape.to_dict(), "control": self.control.to_dict()}

    @classmethod
    def from_dict(cls, data: Dict, context: str = "phase") -> "ControlPhase":
        name = require(data, "name", context)
        if name not in ("presteer", "null"):
            raise SchemaError(f"{context}.name: expected 'presteer' or 'null', got '{name}'.")
        return cls(name=name, shape=ControlShape.from_dict(require(data, "shape", context), f"{context}.shape"),
                   control=SampledControl.from_dict(require(data, "control", context), f"{context}.control"))


@dataclass(eq=False)
class PipelineResult:
    problem: ControlProblem
    phases: List[ControlPhase]
    final_state: FourierState
    moving_state: FourierState
    report: Dict

    def controls_dict(self) -> Dict:
        return {"T": self.problem.T, "phases": [p.to_dict() for p in self.phases]}


def phases_from_dict(data: Dict, context: str = "controls") -> List[ControlPhase]:
    raw = require(data, "phases", context)
    if not isinstance(raw, list) or not raw:
        raise SchemaError(f"{context}.phases: expected a non-empty list.")
    return [ControlPhase.from_dict(p, f"{context}.phases[{i}]") for i, p in enumerate(raw)]


def simulate(problem: ControlProblem, phases: List[ControlPhase]) -> List[FourierState]:
    """Moving-frame states at 0 and at the end of every phase."""
    start = 0.0
    for phase in phases:
        if abs(phase.control.t0 - start) > PHASE_TOLERANCE * problem.T:
            raise ValidationError(f"phase '{phase.name}' starts at {phase.control.t0}, expected {start}.")
        start = phase.control.t1
    if abs(start - problem.T) > PHASE_TOLERANCE * problem.T:
        raise ValidationError(f"phases end at {start}, the horizon is {problem.T}.")
    states = [frame_transform(problem.initial, FrameDirection.TO_MOVING)]
    for phase in phases:
        betas = beta_coefficients(phase.shape, problem.K)
        states.append(evolve_forced(states[-1], betas, phase.control))
    return states


def _ratio(final: float, initial: float) -> float:
    return final / initial if initial > 0.0 else final


def closed_loop_report(problem: ControlProblem, phases: List[ControlPhase],
                       states: Optional[List[FourierState]] = None) -> Dict:
    """Residuals and nulling diagnostics recomputed from the stored controls."""
    states = states if states is not None else simulate(problem, phases)
    v0 = states[0]
    final = frame_transform(states[-1], FrameDirection.FROM_MOVING, problem.T)
    dirac = problem.shape.kind == ShapeKind.DIRAC

    target = final
    if dirac:
        # the position mean is not a control target for point masses
        pos = final.pos.copy()
        pos[final.K] = 0.0
        target = FourierState(K=final.K, pos=pos, vel=final.vel)
    initial_norm = sobolev_norm(problem.initial, 0.0)
    final_norm = sobolev_norm(target, 0.0)

    phase_rows = []
    residual_max = 0.0
    residual_relative = 0.0
    gram_condition = None
    for phase, start in zip(phases, states[:-1]):
        row = {"name": phase.name, "t0": phase.control.t0, "t1": phase.control.t1,
               "control_norm": phase.control.l2_norm(), "max_imag": phase.control.max_imag(),
               "grid": phase.control.n_samples}
        if phase.name == "null":
            system = build_moment_system(phase.shape, start, phase.control.duration, problem.K)
            moments = verify_moments(phase.control, system)
            row.update(moments.summary())
            residual_max = max(residual_max, moments.max_abs)
            residual_relative = max(residual_relative, moments.relative)
            gram_condition = phase.control.meta.get("gram_condition", gram_condition)
            for extra in ("residual_before_polish", "relative_before_polish", "norm_bound"):
                if extra in phase.control.meta:
                    row[extra] = phase.control.meta[extra]
        phase_rows.append(row)

    report = {
        "pipeline": problem.pipeline,
        "method": problem.method.value,
        "T": problem.T,
        "K": problem.K,
        "phases": phase_rows,
        "moment_residual_max": residual_max,
        "moment_residual_relative": residual_relative,
        "gram_condition": gram_condition,
        "initial_sobolev_norm": initial_norm,
        "final_sobolev_norm": final_norm,
        "final_norm_ratio": _ratio(final_norm, initial_norm),
        "summability": summability(beta_coefficients(phases[-1].shape, problem.K), states[-2]),
        "norm_W": norm_W(problem.initial),
        "boundedness_constant": boundedness_constant(v0, 0.0, np.linspace(0.0, problem.T, BOUNDEDNESS_TIMES)),
    }
    if problem.is_two_phase:
        gamma, eta = states[1].means
        report["presteer"] = {"eps": phases[0].control.t1,
                              "position_mean": abs(TWO_PI_PAIRING * gamma),
                              "velocity_mean": abs(TWO_PI_PAIRING * eta)}
    if dirac:
        beta0 = beta_coefficients(problem.shape, problem.K)[problem.K]
        predicted, _ = mean_prediction(v0, beta0, phases[0].control)
        simulated, velocity = states[-1].means
        report["dirac_mean"] = {"predicted": complex_pair(predicted), "simulated": complex_pair(simulated),
                                "residual": abs(predicted - simulated), "velocity_mean": abs(velocity)}
    report["failed_checks"] = failed_checks(report)
    report["passed"] = not report["failed_checks"]
    return report


def failed_checks(report: Dict) -> List[str]:
    """Names of the acceptance thresholds a closed-loop report misses."""
    failures = []
    if not report["final_norm_ratio"] <= NULL_RATIO_LIMIT:
        failures.append(f"final_norm_ratio {report['final_norm_ratio']:.2e} > {NULL_RATIO_LIMIT:.0e}")
    if not report["moment_residual_relative"] <= MOMENT_RELATIVE_LIMIT:
        failures.append(f"moment_residual_relative {report['moment_residual_relative']:.2e} "
                        f"> {MOMENT_RELATIVE_LIMIT:.0e}")
    for section, fields in (("presteer", ("position_mean", "velocity_mean")), ("dirac_mean", ("residual",))):
        for name in fields:
            value = report.get(section, {}).get(name, 0.0)
            if not value <= MEAN_LIMIT:
                failures.append(f"{section}.{name} {value:.2e} > {MEAN_LIMIT:.0e}")
    return failures


def run_pipeline(problem: ControlProblem) -> PipelineResult:
    """Synthesize, simulate and report one null-control problem."""
    K = problem.K
    v0 = frame_transform(problem.initial, FrameDirection.TO_MOVING)
    phases: List[ControlPhase] = []
    start_state = v0
    t0 = 0.0
    options = {"family_grid": problem.family_grid, "truncation": problem.truncation, "window": problem.window}

    if problem.is_two_phase:
        eps = problem.presteer_time
        clock = time.perf_counter()
        c0, d0 = v0.means
        bump, h_bar = presteer_mean(TWO_PI_PAIRING * c0, TWO_PI_PAIRING * d0, eps,
                                    grid=problem.grid or default_grid(eps, K), shape=problem.shape)
        start_state = evolve_forced(v0, beta_coefficients(bump, K), h_bar)
        phases.append(ControlPhase("presteer", bump, h_bar, time.perf_counter() - clock))
        logger.info("pre-steering on [0, %.4f]: means now (%.2e, %.2e)", eps, *map(abs, start_state.means))
        t0 = eps

    clock = time.perf_counter()
    duration = problem.T - t0
    system = build_moment_system(problem.shape, start_state, duration, K)
    h = synthesize_control(system, problem.method, grid=problem.grid, **options)
    control = SampledControl(t0, problem.T, h.samples, meta=h.meta)
    phases.append(ControlPhase("null", problem.shape, control, time.perf_counter() - clock))

    states = simulate(problem, phases)
    report = closed_loop_report(problem, phases, states)
    report["phase_timings"] = {p.name: p.seconds for p in phases}
    final = frame_transform(states[-1], FrameDirection.FROM_MOVING, problem.T)
    logger.info("%s (%s): final norm ratio %.2e, moment residual %.2e", problem.pipeline, problem.method.value,
                report["final_norm_ratio"], report["moment_residual_max"])
    return PipelineResult(problem=problem, phases=phases, final_state=final, moving_state=states[-1],
                          report=report)
