"""Linear stability of the hydrodynamic equations, mode by mode.

Linearizing the magnetization PDE around the null solution and taking the
k-th Fourier mode gives the 2x2 system d/dt u_hat = A_k u_hat with

    A_k = [[-1 + alpha1 * g1(k),  tanh(beta1 * lam)],
           [-tanh(beta2 * lam),  -1 + alpha2 * g2(k)]],

where g_i(k) = exp(-2 pi^2 tau_i k^2) is the kernel Fourier coefficient.
A mode is stable when both eigenvalues have negative real part, which is
equivalent to trace < 0 together with determinant > 0.  Writing
tt_i = 2 pi^2 tau_i, the three scalar conditions are

    (C1)  alpha1 e^{-tt1 k^2} + alpha2 e^{-tt2 k^2} < 2            (trace < 0)
    (C2)  (alpha1 e^{-tt1 k^2} - 1)(1 - alpha2 e^{-tt2 k^2})
              < tanh(lam beta1) tanh(lam beta2)                    (det > 0)
    (C3)  the reversed inequality of (C2)                          (det < 0)

(C1) and (C2) at every k give stability; (C3) at some k (with (C1)) forces a
real positive eigenvalue there.  A Turing instability is stability at k = 0
plus instability at some k != 0; it is unimodular when the unstable set is
exactly {-1, +1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .kernels import kernel_fourier
from .params import ModelParams, ParameterError

# Boundary parameters are reported as marginal, never classified.
MARGINAL_TOL = 1e-12

TWO_PI_SQ = 2.0 * math.pi**2


class DomainError(ValueError):
    """Inputs violate the domain on which an operation is defined."""


def _bisect(f: Callable[[float], float], lo: float, hi: float, iters: int = 200) -> float:
    """Plain bisection; caller guarantees a sign change on [lo, hi]."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise DomainError(f"no sign change on bracket [{lo}, {hi}]")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if flo * fm < 0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ModeMatrix:
    k: int
    entries: np.ndarray

    @property
    def trace(self) -> float:
        return float(self.entries[0, 0] + self.entries[1, 1])

    @property
    def determinant(self) -> float:
        e = self.entries
        return float(e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0])

    @property
    def discriminant(self) -> float:
        return self.trace**2 - 4.0 * self.determinant


@dataclass(frozen=True)
class ModeSpectrum:
    k: int
    mu1: complex
    mu2: complex
    v1: Optional[np.ndarray]
    v2: Optional[np.ndarray]
    stability_class: str  # "Stable" | "Unstable" | "Marginal"

    @property
    def max_real(self) -> float:
        return max(self.mu1.real, self.mu2.real)


@dataclass(frozen=True)
class TuringReport:
    is_turing: bool
    is_unimodular: bool
    unstable_modes: tuple
    k_checked: tuple  # inclusive (k_min, k_max) of the scanned |k| range
    k_tail_bound: int
    witnesses: dict
    inconclusive: bool
    tail_verified: bool


def mode_matrix(params: ModelParams, k: int) -> ModeMatrix:
    """The 2x2 linearization matrix of the k-th Fourier mode."""
    a11 = -1.0 + params.alpha1 * kernel_fourier(k, params.tau1)
    a22 = -1.0 + params.alpha2 * kernel_fourier(k, params.tau2)
    t1 = math.tanh(params.beta1 * params.lam)
    t2 = math.tanh(params.beta2 * params.lam)
    entries = np.array([[a11, t1], [-t2, a22]])
    entries.setflags(write=False)
    return ModeMatrix(k=k, entries=entries)


def mode_spectrum(m: ModeMatrix) -> ModeSpectrum:
    """Closed-form eigen-decomposition, ordered by real part (mu1 first)."""
    tr, det, dis = m.trace, m.determinant, m.discriminant
    if dis >= 0:
        root = math.sqrt(dis)
        mu1 = complex(0.5 * (tr + root))
        mu2 = complex(0.5 * (tr - root))
    else:
        root = math.sqrt(-dis)
        mu1 = complex(0.5 * tr, 0.5 * root)
        mu2 = mu1.conjugate()
    if dis != 0.0:
        v1 = _eigenvector(m.entries, mu1)
        v2 = _eigenvector(m.entries, mu2)
    else:
        v1 = v2 = None
    mx = max(mu1.real, mu2.real)
    if abs(mx) <= MARGINAL_TOL:
        cls = "Marginal"
    elif mx < 0:
        cls = "Stable"
    else:
        cls = "Unstable"
    return ModeSpectrum(k=m.k, mu1=mu1, mu2=mu2, v1=v1, v2=v2, stability_class=cls)


def _eigenvector(a: np.ndarray, mu: complex) -> np.ndarray:
    """Eigenvector of a 2x2 matrix for eigenvalue mu, from the larger row."""
    r1 = np.array([a[0, 0] - mu, a[0, 1]])
    r2 = np.array([a[1, 0], a[1, 1] - mu])
    row = r1 if np.abs(r1).max() >= np.abs(r2).max() else r2
    v = np.array([-row[1], row[0]])
    return v / np.linalg.norm(v)


def _tilde_taus(params: ModelParams) -> tuple:
    return TWO_PI_SQ * params.tau1, TWO_PI_SQ * params.tau2


def tail_bound(params: ModelParams) -> int:
    """Wavenumber beyond which every mode is provably stable.

    For k with alpha_i e^{-tt_i k^2} <= 1 for both lines, the trace is < 0
    and (C3) cannot hold, so the mode is stable.
    """
    tt1, tt2 = _tilde_taus(params)
    worst = max(
        math.log(params.alpha1) / tt1 if params.alpha1 > 1 else 0.0,
        math.log(params.alpha2) / tt2 if params.alpha2 > 1 else 0.0,
        0.0,
    )
    return math.ceil(math.sqrt(worst)) + 1


def condition_witnesses(params: ModelParams, k: int) -> dict:
    """Booleans (C1), (C2), (C3) at wavenumber k, plus the raw quantities."""
    tt1, tt2 = _tilde_taus(params)
    lhs1 = params.alpha1 * math.exp(-tt1 * k * k)
    lhs2 = params.alpha2 * math.exp(-tt2 * k * k)
    prod = (lhs1 - 1.0) * (1.0 - lhs2)
    rhs = math.tanh(params.lam * params.beta1) * math.tanh(params.lam * params.beta2)
    return {
        "k": k,
        "cond1": lhs1 + lhs2 < 2.0,
        "cond2": prod < rhs,
        "cond3": prod > rhs,
        "trace_sum": lhs1 + lhs2,
        "det_lhs": prod,
        "det_rhs": rhs,
    }


def classify_turing(params: ModelParams, k_max: Optional[int] = None) -> TuringReport:
    """Scan all modes (finite work via the analytic tail bound) and classify."""
    kstar = tail_bound(params)
    scan_to = kstar if k_max is None else min(k_max, kstar)
    tail_verified = k_max is None or k_max >= kstar

    witnesses = {0: condition_witnesses(params, 0)}
    spec0 = mode_spectrum(mode_matrix(params, 0))
    inconclusive = spec0.stability_class == "Marginal"
    zero_stable = spec0.stability_class == "Stable"

    unstable = []
    for k in range(1, scan_to + 1):
        spec = mode_spectrum(mode_matrix(params, k))
        witnesses[k] = condition_witnesses(params, k)
        if spec.stability_class == "Marginal":
            inconclusive = True
        elif spec.stability_class == "Unstable":
            unstable.extend([-k, k])
    unstable.sort()

    is_turing = (not inconclusive) and zero_stable and bool(unstable)
    is_unimodular = is_turing and set(unstable) == {-1, 1}
    return TuringReport(
        is_turing=is_turing,
        is_unimodular=is_unimodular,
        unstable_modes=tuple(unstable),
        k_checked=(0, scan_to),
        k_tail_bound=kstar,
        witnesses=witnesses,
        inconclusive=inconclusive,
        tail_verified=tail_verified,
    )


def necessity_check(params: ModelParams) -> bool:
    """Necessary parameter pattern for a Turing instability.

    One line must be super-critical (alpha > 1) with the *shorter* kernel
    range, the other sub-critical with the longer one.
    """
    a1, a2 = params.alpha1, params.alpha2
    return (a2 < 1.0 < a1 and params.tau1 < params.tau2) or (
        a1 < 1.0 < a2 and params.tau2 < params.tau1
    )


def lambda_critical_alpha1(beta1: float) -> float:
    """The coupling lambda0 at which alpha1 drops to 1 (alpha1 decreasing)."""
    if beta1 <= 1.0:
        raise DomainError(f"beta1 must exceed 1, got {beta1}")
    hi = 1.0
    while beta1 / math.cosh(hi * beta1) ** 2 > 1.0:
        hi *= 2.0
    return _bisect(lambda lam: beta1 / math.cosh(lam * beta1) ** 2 - 1.0, 0.0, hi)


def lambda_star(beta1: float, beta2: float) -> float:
    """The coupling at which (alpha1 - 1)(1 - alpha2) meets tanh * tanh.

    Requires beta2 < 1 < beta1 so the left side starts positive at lambda = 0.
    The root is bracketed in (0, lambda0] with lambda0 the zero of alpha1 - 1;
    the bracket is verified, not assumed.
    """
    if not (beta2 < 1.0 < beta1):
        raise DomainError(f"need beta2 < 1 < beta1, got ({beta1}, {beta2})")

    def gap(lam: float) -> float:
        a1 = beta1 / math.cosh(lam * beta1) ** 2
        a2 = beta2 / math.cosh(lam * beta2) ** 2
        return (a1 - 1.0) * (1.0 - a2) - math.tanh(beta1 * lam) * math.tanh(beta2 * lam)

    lam0 = lambda_critical_alpha1(beta1)
    root = _bisect(gap, 0.0, lam0)
    if abs(gap(root)) > 1e-12:
        raise DomainError(
            f"lambda_star residual {gap(root):.3e} exceeds tolerance at ({beta1}, {beta2})"
        )
    return root


def construct_unimodular(
    beta1: float, beta2: float, lambda_margin: float = 0.02
) -> tuple:
    """Constructive parameter recipe targeting instability at k = +-1 only.

    Sets tt1 = log(alpha1*)/3, tt2 to the minimizer of the sub-critical
    side (the root of alpha2* = e^t (1 - t)), and lam slightly above the
    balance point lambda_star.  The resulting parameters are certified by a
    full mode scan; when the certification fails (the recipe only succeeds
    for beta2 near enough to 1) the failing report is returned, not raised.

    Returns (ModelParams, TuringReport).
    """
    if not (beta2 < 1.0 < beta1):
        raise DomainError(f"need beta2 < 1 < beta1, got ({beta1}, {beta2})")
    lam_star = lambda_star(beta1, beta2)
    a1_star = beta1 / math.cosh(lam_star * beta1) ** 2
    a2_star = beta2 / math.cosh(lam_star * beta2) ** 2
    tt1 = math.log(a1_star) / 3.0
    # e^t (1 - t) decreases from 1 on (0, 1); a2_star < 1 brackets the root.
    tt2 = _bisect(lambda t: math.exp(t) * (1.0 - t) - a2_star, 1e-15, 1.0 - 1e-12)
    params = ModelParams(
        beta1=beta1,
        beta2=beta2,
        tau1=tt1 / TWO_PI_SQ,
        tau2=tt2 / TWO_PI_SQ,
        lam=lam_star * (1.0 + lambda_margin),
    )
    return params, classify_turing(params)


def growth_rate(params: ModelParams) -> float:
    """The positive eigenvalue of the +-1 modes of a certified unimodular set."""
    report = classify_turing(params)
    if not report.is_unimodular:
        raise DomainError("growth_rate requires certified unimodular parameters")
    spec = mode_spectrum(mode_matrix(params, 1))
    if abs(spec.mu1.imag) > MARGINAL_TOL:
        raise DomainError(f"unstable eigenvalue is not real: {spec.mu1}")
    return spec.mu1.real


def matrix_exponential(m: ModeMatrix, t: float) -> np.ndarray:
    """exp(t A_k) in closed form for the 2x2 mode matrix.

    Uses exp(tA) = e^{t tr/2} [cosh(t s/2) I + sinh(t s/2)/(s/2) (A - tr/2 I)]
    with s = sqrt(Dis); the s -> 0 limit replaces sinh(x)/x by 1, which also
    covers the defective (triangularizable-only) case.
    """
    tr = m.trace
    dis = m.discriminant
    a = np.asarray(m.entries, dtype=complex)
    half_s = 0.5 * complex(dis) ** 0.5
    x = t * half_s
    if abs(x) < 1e-8:
        ch, sh_over = 1.0 + x * x / 2.0, t * (1.0 + x * x / 6.0)
    else:
        ch, sh_over = np.cosh(x), np.sinh(x) / half_s
    out = math.exp(0.5 * t * tr) * (
        ch * np.eye(2) + sh_over * (a - 0.5 * tr * np.eye(2))
    )
    return out.real if np.abs(out.imag).max() < 1e-12 * max(1.0, np.abs(out.real).max()) else out


def exp_bound_check(params: ModelParams, k: int, t_grid, c: float) -> bool:
    """Check the spectral envelope ||exp(t A_k)|| <= C e^{t rate} on a grid.

    The rate is the full growth rate mu for k = +-1 and half the leading
    real part for every other k.
    """
    m = mode_matrix(params, k)
    spec = mode_spectrum(m)
    if abs(k) == 1:
        rate = spec.mu1.real
    else:
        rate = 0.5 * spec.mu1.real
    for t in t_grid:
        if t < 0:
            raise DomainError("t_grid must be nonnegative")
        norm = np.linalg.norm(matrix_exponential(m, float(t)), 2)
        if norm > c * math.exp(rate * float(t)):
            return False
    return True
