"""
Modal Cauchy Solver
===================

Exact per-mode evolution of the moving-frame equation

    v_tt - 2 v_xt - v_txx + v_xxx = F(x, t)

on truncated Fourier states. Each mode obeys

    v_k'' + (k^2 - 2ik) v_k' - i k^3 v_k = <F(t), e^{ikx}> / (2 pi),

whose homogeneous propagator is written in closed form from the two roots
(or the Jordan block t e^{lambda t} at k in {0, +/-2}). Forcing enters
through a Duhamel integral evaluated with Simpson's rule against that
exact propagator, so the stiffness of the parabolic branch (~ -k^2) never
reaches a time stepper.

Unit Conventions:
-----------------
- Time in the units of T; space on the torus [0, 2 pi).
- Scalar controls b(x) h(t) use the profile ledger beta_k = <b, e^{ikx}>;
  space-dependent forcings are passed as the per-mode pairing ledger.
- Norms are computed on coefficients (no 2 pi factor).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
from scipy.integrate import simpson

from analysis.spectrum import DOUBLE_MODES, Branch, EigenvalueTable, eigenvalues
from errors import RefinementRequiredError, TruncationMismatchError, ValidationError
from inputs.state import TWO_PI_PAIRING, FourierState, SampledControl

logger = logging.getLogger(__name__)

MIN_SAMPLES_PER_SCALE = 16
DEFAULT_SAMPLES_PER_SCALE = 64


class FrameDirection(str, Enum):
    TO_MOVING = "to_moving"
    FROM_MOVING = "from_moving"


def _roots(K: int, table: Optional[EigenvalueTable] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    ks = np.arange(-K, K + 1)
    if table is not None:
        if K > table.K:
            raise TruncationMismatchError(f"state truncation K={K} exceeds the table's K={table.K}.")
        lp = np.array([table.value(k, Branch.PLUS) for k in ks])
        lm = np.array([table.value(k, Branch.MINUS) for k in ks])
    else:
        lp = eigenvalues(ks, Branch.PLUS)
        lm = eigenvalues(ks, Branch.MINUS)
    return ks, lp, lm, np.isin(ks, DOUBLE_MODES)


def propagators(K: int, tau, table: Optional[EigenvalueTable] = None) -> np.ndarray:
    """Fundamental matrices Phi_k(tau), shape (2K+1, ..., 2, 2) for array tau.

    (pos, vel)(t + tau) = Phi_k(tau) @ (pos, vel)(t) for the free mode k.
    """
    ks, lp, lm, dbl = _roots(K, table)
    tau = np.asarray(tau, dtype=float)
    shape = (ks.size,) + (1,) * tau.ndim
    lp = lp.reshape(shape)
    lm = lm.reshape(shape)
    dbl = dbl.reshape(shape)
    ep = np.exp(lp * tau)
    em = np.exp(lm * tau)
    diff = np.where(dbl, 1.0, lp - lm)
    p11 = np.where(dbl, (1.0 - lp * tau) * ep, (lp * em - lm * ep) / diff)
    p12 = np.where(dbl, tau * ep, (ep - em) / diff)
    p21 = np.where(dbl, -(lp ** 2) * tau * ep, lp * lm * (em - ep) / diff)
    p22 = np.where(dbl, (1.0 + lp * tau) * ep, (lp * ep - lm * em) / diff)
    return np.stack([np.stack([p11, p12], axis=-1), np.stack([p21, p22], axis=-1)], axis=-2)


@dataclass
class ModalCoefficients:
    """Expansion of a state on the eigenvectors of the free operator.

    For k outside {0, +/-2}: (c_k, d_k) = a_k^+ (1, lambda_k^+) + a_k^- (1, lambda_k^-).
    For k in {0, +/-2}: (c_k, d_k) = a_k (1, lambda_k) + a~_k (0, 1), the second
    vector spanning the Jordan chain.
    """
    K: int
    a_plus: Dict[int, complex] = field(default_factory=dict)
    a_minus: Dict[int, complex] = field(default_factory=dict)
    a: Dict[int, complex] = field(default_factory=dict)
    a_tilde: Dict[int, complex] = field(default_factory=dict)


def decompose(state: FourierState, table: EigenvalueTable) -> ModalCoefficients:
    ks, lp, lm, dbl = _roots(state.K, table)
    coeffs = ModalCoefficients(K=state.K)
    for k, c, d, p, m, is_double in zip(ks, state.pos, state.vel, lp, lm, dbl):
        k = int(k)
        if is_double:
            coeffs.a[k] = complex(c)
            coeffs.a_tilde[k] = complex(d - p * c)
        else:
            coeffs.a_plus[k] = complex((d - m * c) / (p - m))
            coeffs.a_minus[k] = complex((p * c - d) / (p - m))
    return coeffs


def reconstruct(coeffs: ModalCoefficients, table: EigenvalueTable) -> FourierState:
    ks, lp, lm, dbl = _roots(coeffs.K, table)
    pos = np.zeros(ks.size, dtype=complex)
    vel = np.zeros(ks.size, dtype=complex)
    for j, (k, p, m, is_double) in enumerate(zip(ks, lp, lm, dbl)):
        k = int(k)
        if is_double:
            pos[j] = coeffs.a[k]
            vel[j] = coeffs.a_tilde[k] + p * coeffs.a[k]
        else:
            pos[j] = coeffs.a_plus[k] + coeffs.a_minus[k]
            vel[j] = p * coeffs.a_plus[k] + m * coeffs.a_minus[k]
    return FourierState(K=coeffs.K, pos=pos, vel=vel)


def evolve_free(state: FourierState, t: float, table: Optional[EigenvalueTable] = None) -> FourierState:
    if t < 0:
        raise ValidationError(f"free evolution needs t >= 0, got {t}.")
    phi = propagators(state.K, t, table)
    pos = phi[:, 0, 0] * state.pos + phi[:, 0, 1] * state.vel
    vel = phi[:, 1, 0] * state.pos + phi[:, 1, 1] * state.vel
    return FourierState(K=state.K, pos=pos, vel=vel)


# ---------- resolution ----------
def _fastest_rate(K: int) -> float:
    ks = np.arange(-K, K + 1)
    lam = np.concatenate([eigenvalues(ks, Branch.PLUS), eigenvalues(ks, Branch.MINUS)])
    return float(max(np.max(np.abs(lam.real)), np.max(np.abs(lam.imag)) / (2.0 * np.pi), 1.0))


def required_samples(duration: float, K: int) -> int:
    """Smallest grid with 16 samples per e-folding and per period of modes |k| <= K."""
    return int(np.ceil(MIN_SAMPLES_PER_SCALE * _fastest_rate(K) * duration)) + 1


def default_grid(duration: float, K: int) -> int:
    """64 samples per e-folding, rounded up to 2^p + 1 (odd, Simpson-friendly)."""
    n = DEFAULT_SAMPLES_PER_SCALE * _fastest_rate(K) * duration
    return int(2 ** int(np.ceil(np.log2(max(n, 16.0))))) + 1


def _forcing_ledger(K: int, betas: Optional[np.ndarray], h: SampledControl) -> np.ndarray:
    """Per-mode right-hand side f_k(t) = <F(t), e^{ikx}> / (2 pi), shape (2K+1, n)."""
    if h.is_ledger:
        Kh = h.modes
        if Kh < K:
            raise TruncationMismatchError(f"forcing ledger has K={Kh} < state K={K}.")
        return h.samples[Kh - K:Kh + K + 1] / TWO_PI_PAIRING
    if betas is None:
        raise ValidationError("a scalar control needs the profile's beta ledger.")
    betas = np.asarray(betas, dtype=complex)
    if betas.size < 2 * K + 1 or betas.size % 2 != 1:
        raise TruncationMismatchError(f"betas must have odd length >= 2K+1 = {2 * K + 1}, got {betas.size}.")
    Kb = (betas.size - 1) // 2
    return betas[Kb - K:Kb + K + 1, None] * h.samples[None, :] / TWO_PI_PAIRING


def evolve_forced_with_error(state: FourierState, betas: Optional[np.ndarray], h: SampledControl,
                             t: Optional[float] = None,
                             table: Optional[EigenvalueTable] = None) -> Tuple[FourierState, float]:
    """Forced evolution over ``t`` (default: the whole control interval).

    Returns the final state and a Richardson estimate of the Duhamel
    quadrature error (max over modes, absolute).
    """
    elapsed = h.duration if t is None else float(t)
    if elapsed < 0 or elapsed > h.duration * (1.0 + 1e-12):
        raise ValidationError(f"control covers [0, {h.duration}], cannot evolve for {elapsed}.")
    m = int(round(elapsed / h.dt)) + 1
    if abs((m - 1) * h.dt - elapsed) > 1e-9 * max(1.0, elapsed):
        raise ValidationError(f"t={elapsed} does not fall on the control grid (dt={h.dt}).")
    if m < required_samples(elapsed, state.K) and elapsed > 0:
        raise RefinementRequiredError(
            f"control grid too coarse: {m} samples over {elapsed:.4f} but modes |k| <= {state.K} "
            f"need at least {required_samples(elapsed, state.K)}; refine the grid."
        )
    free = evolve_free(state, elapsed, table)
    if m < 3:
        return free, 0.0
    f = _forcing_ledger(state.K, betas, h)[:, :m]
    s = np.linspace(0.0, elapsed, m)
    phi = propagators(state.K, elapsed - s, table)
    pos_int = phi[:, :, 0, 1] * f
    vel_int = phi[:, :, 1, 1] * f
    dpos = simpson(pos_int, dx=h.dt, axis=1)
    dvel = simpson(vel_int, dx=h.dt, axis=1)
    error = 0.0
    if m >= 5 and (m - 1) % 2 == 0:
        coarse_pos = simpson(pos_int[:, ::2], dx=2.0 * h.dt, axis=1)
        coarse_vel = simpson(vel_int[:, ::2], dx=2.0 * h.dt, axis=1)
        error = float(max(np.max(np.abs(dpos - coarse_pos)), np.max(np.abs(dvel - coarse_vel))) / 15.0)
    final = FourierState(K=state.K, pos=free.pos + dpos, vel=free.vel + dvel)
    return final, error


def evolve_forced(state: FourierState, betas: Optional[np.ndarray], h: SampledControl,
                  t: Optional[float] = None, table: Optional[EigenvalueTable] = None) -> FourierState:
    final, error = evolve_forced_with_error(state, betas, h, t, table)
    logger.debug("Duhamel quadrature error estimate %.2e (%d samples)", error, h.n_samples)
    return final


# ---------- frames and norms ----------
def frame_transform(state: FourierState, direction: FrameDirection, t: float = 0.0) -> FourierState:
    """Map between the original frame (y, y_t) and the moving frame v(x, t) = y(x + t, t)."""
    direction = FrameDirection(direction)
    ks = state.indices
    if direction == FrameDirection.TO_MOVING:
        phase = np.exp(1j * ks * t)
        pos = state.pos * phase
        vel = (state.vel + 1j * ks * state.pos) * phase
    else:
        phase = np.exp(-1j * ks * t)
        pos = state.pos * phase
        vel = (state.vel - 1j * ks * state.pos) * phase
    return FourierState(K=state.K, pos=pos, vel=vel)


def sobolev_norm(state: FourierState, s: float) -> float:
    """(sum (k^2+1)^s ((k^2+1)|c_k|^2 + |d_k|^2))^(1/2), the H^{s+1} x H^s equivalent norm."""
    w = state.indices.astype(float) ** 2 + 1.0
    return float(np.sqrt(np.sum(w ** s * (w * np.abs(state.pos) ** 2 + np.abs(state.vel) ** 2))))


def norm_W(state: FourierState) -> float:
    """|c_0| + |d_0| + sum_{k != 0} (|k|^9 |c_k| + |k|^7 |d_k|)."""
    ak = np.abs(state.indices).astype(float)
    nonzero = ak > 0
    head = abs(state.pos[state.K]) + abs(state.vel[state.K])
    tail = np.sum(ak[nonzero] ** 9 * np.abs(state.pos[nonzero]) + ak[nonzero] ** 7 * np.abs(state.vel[nonzero]))
    return float(head + tail)


def boundedness_constant(state: FourierState, s: float, times: Iterable[float],
                         table: Optional[EigenvalueTable] = None) -> float:
    """Fitted C of sup_t ||S(t) u||_s <= C ||u||_s over the given times."""
    base = sobolev_norm(state, s)
    if base == 0.0:
        return 0.0
    return max(sobolev_norm(evolve_free(state, t, table), s) / base for t in times)


def mean_prediction(state: FourierState, beta0: complex, h: Optional[SampledControl]) -> Tuple[complex, complex]:
    """Closed-form k = 0 block after the control interval: (position mean, velocity mean).

    v_0'' = beta_0 h / (2 pi), so the velocity mean moves by beta_0/(2 pi) * int h
    and the position mean by beta_0/(2 pi) * int (T - t) h, on top of c_0 + T d_0.
    """
    c0, d0 = state.means
    if h is None:
        return c0, d0
    T = h.duration
    s = h.times - h.t0
    # a ledger already holds <F(t), 1>; beta0 only scales scalar controls
    f = h.samples[h.modes] if h.is_ledger else beta0 * h.samples
    f = f / TWO_PI_PAIRING
    pos = c0 + T * d0 + simpson((T - s) * f, dx=h.dt)
    vel = d0 + simpson(f, dx=h.dt)
    return complex(pos), complex(vel)
