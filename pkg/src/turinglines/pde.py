"""Pseudo-spectral integration of the nonlocal magnetization equations.

The pair (u1, u2) on the torus evolves by

    d/dt u1 = -u1 + (1/2)[tanh(b1 c1 + b1 L) + tanh(b1 c1 - b1 L)]
                  + u2 (1/2)[tanh(b1 c1 + b1 L) - tanh(b1 c1 - b1 L)]
    d/dt u2 = -u2 + (1/2)[tanh(b2 c2 + b2 L) + tanh(b2 c2 - b2 L)]
                  - u1 (1/2)[tanh(b2 c2 + b2 L) - tanh(b2 c2 - b2 L)]

with c_i = u_i * phi_i, b_i = beta_i, L = lambda.  Note the opposite sign of
the cross term on the second line.  The state is carried as Fourier modes
k = -K..K; convolutions are diagonal in that basis, the tanh nonlinearity is
evaluated on a physical grid of M = 4K points to keep aliasing negligible at
the small amplitudes used for verification, and time stepping is classical
fixed-step RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List

import numpy as np

from .kernels import kernel_fourier
from .params import ModelParams
from .stability import mode_matrix

# Physical fields represent magnetizations in [-1, 1]; exceeding this margin
# signals breakdown of the discretization rather than model behavior.
BLOWUP_LIMIT = 1.5

CONJ_SYM_TOL = 1e-12


class IntegrationError(RuntimeError):
    """The integrator left its validity envelope; carries the failure time."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t={time}")
        self.time = time


@dataclass(frozen=True)
class SpectralState:
    """Truncated Fourier data (modes -K..K) of the magnetization pair.

    Arrays are indexed so entry j holds mode k = j - K.  grid_size is the
    physical grid used for nonlinear evaluation.
    """

    n_modes: int
    u1_hat: np.ndarray = field(repr=False)
    u2_hat: np.ndarray = field(repr=False)
    grid_size: int
    time: float = 0.0

    @classmethod
    def zero(cls, n_modes: int = 32, grid_size: int = None) -> "SpectralState":
        m = 4 * n_modes if grid_size is None else grid_size
        if m < 4 * n_modes:
            raise ValueError(f"grid_size must be >= 4 * n_modes, got {m} < {4 * n_modes}")
        width = 2 * n_modes + 1
        return cls(
            n_modes=n_modes,
            u1_hat=np.zeros(width, dtype=complex),
            u2_hat=np.zeros(width, dtype=complex),
            grid_size=m,
            time=0.0,
        )

    def mode(self, line: int, k: int) -> complex:
        if abs(k) > self.n_modes:
            raise ValueError(f"|k| = {abs(k)} exceeds truncation {self.n_modes}")
        arr = self.u1_hat if line == 1 else self.u2_hat
        return complex(arr[k + self.n_modes])

    def with_mode(self, line: int, k: int, value: complex) -> "SpectralState":
        """Set mode k of one line (and -k to the conjugate, keeping u real)."""
        if abs(k) > self.n_modes:
            raise ValueError(f"|k| = {abs(k)} exceeds truncation {self.n_modes}")
        u1, u2 = self.u1_hat.copy(), self.u2_hat.copy()
        arr = u1 if line == 1 else u2
        arr[k + self.n_modes] = value
        arr[-k + self.n_modes] = np.conjugate(value)
        return replace(self, u1_hat=u1, u2_hat=u2)

    def is_conjugate_symmetric(self, tol: float = CONJ_SYM_TOL) -> bool:
        for arr in (self.u1_hat, self.u2_hat):
            if np.abs(arr - np.conjugate(arr[::-1])).max() > tol:
                return False
        return True


def _to_physical(hat: np.ndarray, n_modes: int, grid_size: int) -> np.ndarray:
    """Evaluate sum_k hat(k) e^{2 pi i k j / M} on the M-point grid."""
    a = np.zeros(grid_size, dtype=complex)
    for j in range(2 * n_modes + 1):
        a[(j - n_modes) % grid_size] += hat[j]
    return np.fft.ifft(a) * grid_size


def _from_physical(values: np.ndarray, n_modes: int) -> np.ndarray:
    """Project a physical-grid function back onto modes -K..K."""
    m = values.shape[0]
    coeffs = np.fft.fft(values) / m
    out = np.empty(2 * n_modes + 1, dtype=complex)
    for j in range(2 * n_modes + 1):
        out[j] = coeffs[(j - n_modes) % m]
    return out


def rhs_nonlinear(
    state: SpectralState, params: ModelParams, linearize_tanh: bool = False
) -> SpectralState:
    """Full right-hand side; returns a state holding the mode derivatives.

    linearize_tanh substitutes the first-order expansion of every tanh about
    +-beta_i lambda.  It exists solely so tests can confirm the nonlinear
    code path degenerates to the linear one; it is not a user feature.
    """
    kk = np.arange(-state.n_modes, state.n_modes + 1)
    g1 = np.exp(-2.0 * math.pi**2 * params.tau1 * kk**2)
    g2 = np.exp(-2.0 * math.pi**2 * params.tau2 * kk**2)

    u1 = _to_physical(state.u1_hat, state.n_modes, state.grid_size)
    u2 = _to_physical(state.u2_hat, state.n_modes, state.grid_size)
    c1 = _to_physical(state.u1_hat * g1, state.n_modes, state.grid_size)
    c2 = _to_physical(state.u2_hat * g2, state.n_modes, state.grid_size)
    for name, f in (("u1", u1), ("u2", u2)):
        if not np.all(np.isfinite(f.real)):
            raise IntegrationError(f"non-finite {name}", state.time)

    b1l = params.beta1 * params.lam
    b2l = params.beta2 * params.lam
    if linearize_tanh:
        even1 = params.alpha1 * c1
        odd1 = math.tanh(b1l) * np.ones_like(c1)
        even2 = params.alpha2 * c2
        odd2 = math.tanh(b2l) * np.ones_like(c2)
    else:
        plus1 = np.tanh(params.beta1 * c1 + b1l)
        minus1 = np.tanh(params.beta1 * c1 - b1l)
        even1 = 0.5 * (plus1 + minus1)
        odd1 = 0.5 * (plus1 - minus1)
        plus2 = np.tanh(params.beta2 * c2 + b2l)
        minus2 = np.tanh(params.beta2 * c2 - b2l)
        even2 = 0.5 * (plus2 + minus2)
        odd2 = 0.5 * (plus2 - minus2)

    d1 = -u1 + even1 + u2 * odd1
    d2 = -u2 + even2 - u1 * odd2
    return replace(
        state,
        u1_hat=_from_physical(d1, state.n_modes),
        u2_hat=_from_physical(d2, state.n_modes),
    )


def rhs_linear(state: SpectralState, params: ModelParams) -> SpectralState:
    """Linearized right-hand side, applied mode by mode (no grid round trip)."""
    kk = np.arange(-state.n_modes, state.n_modes + 1)
    g1 = np.exp(-2.0 * math.pi**2 * params.tau1 * kk**2)
    g2 = np.exp(-2.0 * math.pi**2 * params.tau2 * kk**2)
    t1 = math.tanh(params.beta1 * params.lam)
    t2 = math.tanh(params.beta2 * params.lam)
    d1 = (-1.0 + params.alpha1 * g1) * state.u1_hat + t1 * state.u2_hat
    d2 = -t2 * state.u1_hat + (-1.0 + params.alpha2 * g2) * state.u2_hat
    return replace(state, u1_hat=d1, u2_hat=d2)


def integrate(
    state: SpectralState,
    params: ModelParams,
    t_end: float,
    dt: float = 1e-3,
    which: str = "nonlinear",
    sample_stride: int = 1,
    linearize_tanh: bool = False,
) -> List[SpectralState]:
    """Fixed-step RK4 from state.time to t_end; returns sampled states.

    Samples (including the initial and final states) are stored every
    sample_stride steps.  Conjugate symmetry and the physical blow-up bound
    are enforced at every stored sample.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_end < state.time:
        raise ValueError(f"t_end {t_end} precedes state time {state.time}")
    if which not in ("linear", "nonlinear"):
        raise ValueError(f"unknown dynamics {which!r}")
    if which == "linear":
        rhs = lambda s: rhs_linear(s, params)
    else:
        rhs = lambda s: rhs_nonlinear(s, params, linearize_tanh=linearize_tanh)

    n_steps = int(round((t_end - state.time) / dt))
    trajectory = [state]
    current = state
    for step in range(n_steps):
        k1 = rhs(current)
        k2 = rhs(_shift(current, k1, 0.5 * dt))
        k3 = rhs(_shift(current, k2, 0.5 * dt))
        k4 = rhs(_shift(current, k3, dt))
        u1 = current.u1_hat + (dt / 6.0) * (
            k1.u1_hat + 2.0 * k2.u1_hat + 2.0 * k3.u1_hat + k4.u1_hat
        )
        u2 = current.u2_hat + (dt / 6.0) * (
            k1.u2_hat + 2.0 * k2.u2_hat + 2.0 * k3.u2_hat + k4.u2_hat
        )
        current = replace(current, u1_hat=u1, u2_hat=u2, time=current.time + dt)
        if (step + 1) % sample_stride == 0 or step == n_steps - 1:
            _check_sample(current)
            trajectory.append(current)
    return trajectory


def _shift(state: SpectralState, deriv: SpectralState, h: float) -> SpectralState:
    return replace(
        state,
        u1_hat=state.u1_hat + h * deriv.u1_hat,
        u2_hat=state.u2_hat + h * deriv.u2_hat,
        time=state.time + h,
    )


def _check_sample(state: SpectralState) -> None:
    if not state.is_conjugate_symmetric():
        raise IntegrationError("conjugate symmetry lost", state.time)
    for hat in (state.u1_hat, state.u2_hat):
        phys = _to_physical(hat, state.n_modes, state.grid_size).real
        if not np.all(np.isfinite(phys)):
            raise IntegrationError("non-finite field", state.time)
        if np.abs(phys).max() > BLOWUP_LIMIT:
            raise IntegrationError(
                f"field magnitude {np.abs(phys).max():.3g} exceeds {BLOWUP_LIMIT}",
                state.time,
            )


class FitError(RuntimeError):
    """No trajectory samples fall inside the requested amplitude window."""


def fit_growth_exponent(
    trajectory: List[SpectralState],
    k: int,
    window: tuple = (1e-8, 1e-2),
) -> float:
    """Least-squares slope of log ||(u1_hat(k), u2_hat(k))|| against time.

    Only samples whose mode norm lies in the window (the linear regime) enter
    the fit; at least two are required.
    """
    times, lognorms = [], []
    for s in trajectory:
        norm = math.hypot(abs(s.mode(1, k)), abs(s.mode(2, k)))
        if window[0] <= norm <= window[1]:
            times.append(s.time)
            lognorms.append(math.log(norm))
    if len(times) < 2:
        raise FitError(
            f"only {len(times)} samples of mode {k} inside window {window}"
        )
    slope, _ = np.polyfit(np.asarray(times), np.asarray(lognorms), 1)
    return float(slope)
