"""Ensemble experiments tying the microscopic simulator to the Gaussian
fluctuation theory of the unstable modes.

For certified unimodular parameters with growth rate mu, the rescaled mode
gamma^{(theta-1)/2} X^{(1)}(t_theta) converges (as gamma -> 0, for theta in
(0,1)) to proj1(U + V): the oblique projection, onto the growing eigenspace
of the mode-1 matrix, of a pair of independent complex Gaussians.  U carries
the initial-condition randomness, V the noise accumulated along the growth.
All per-component variances are multiples of the base constant

    int_0^1 cos^2(2 pi r) dr = 1/2,

the variance produced by the spin CLT against one Fourier component.  The
module provides the closed-form predictions, the variance integrand h and
its exponentially weighted cumulative H (whose t -> infinity limit recovers
the V variances, an identity tested to high precision), seeded parallel
ensemble runners, and the statistical tests comparing the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from .microsim import SimContext, advance, all_rates, init_random, observe
from .params import LatticeSpec, ModelParams
from .stability import DomainError, growth_rate, mode_matrix, mode_spectrum

# Per-component variance of the spin CLT against cos(2 pi .) or sin(2 pi .):
# the integral of the squared test function over the unit torus.
BASE_COMPONENT_VARIANCE = 0.5

DEFAULT_K_SET = (0, 1, -1, 2, -2, 3, -3)


# ---------------------------------------------------------------------------
# time scalings


@dataclass(frozen=True)
class TimeSchedule:
    """The times t_theta = log(gamma^-theta)/(2 mu) and their relatives."""

    gamma: float
    mu: float
    t_theta: Dict[float, float]
    t_critical: float
    t_delta: Dict[float, float]


def schedule(
    params: ModelParams,
    gamma: float,
    thetas: Iterable[float] = (),
    deltas: Iterable[float] = (),
) -> TimeSchedule:
    if not 0 < gamma < 1:
        raise DomainError(f"gamma must be in (0, 1), got {gamma}")
    mu = growth_rate(params)
    t_theta = {}
    for theta in thetas:
        if not 0 <= theta <= 1:
            raise DomainError(f"theta must be in [0, 1], got {theta}")
        t_theta[float(theta)] = theta * math.log(1.0 / gamma) / (2.0 * mu)
    t_delta = {}
    for delta in deltas:
        if not 0 < delta < 1:
            raise DomainError(f"delta must be in (0, 1), got {delta}")
        t_delta[float(delta)] = math.log(1.0 / delta) / (2.0 * mu)
    return TimeSchedule(
        gamma=gamma,
        mu=mu,
        t_theta=t_theta,
        t_critical=math.log(1.0 / gamma) / (2.0 * mu),
        t_delta=t_delta,
    )


# ---------------------------------------------------------------------------
# closed-form predictions


@dataclass(frozen=True)
class FluctuationPrediction:
    """Limit law of the rescaled mode-1 pair, fully explicit."""

    mu: float
    var_u: float
    var_v1: float
    var_v2: float
    projection: np.ndarray = field(repr=False)
    predicted_covariance: np.ndarray = field(repr=False)

    def component_variances(self) -> np.ndarray:
        """Diagonal of the 4x4 covariance: (z1_re, z1_im, z2_re, z2_im)."""
        return np.diag(self.predicted_covariance)


def _tanh_pair(params: ModelParams) -> Tuple[float, float]:
    return (
        math.tanh(params.beta1 * params.lam),
        math.tanh(params.beta2 * params.lam),
    )


def prediction(params: ModelParams) -> FluctuationPrediction:
    """Variances, oblique projector, and 4x4 covariance of the limit law.

    The V variances are v/mu -+ tanh(b1 L)[tanh(b1 L) - tanh(b2 L)]
    v/(2 mu^2 + 2 mu) with v the base component variance; the eigenvectors
    of the mode-1 matrix are taken as (tanh(b1 L), mu_j - a11), whose first
    component never vanishes.
    """
    mu = growth_rate(params)
    m = mode_matrix(params, 1)
    spec = mode_spectrum(m)
    if spec.v1 is None:
        raise DomainError("mode-1 matrix is defective; projector undefined")
    t1, t2 = _tanh_pair(params)
    v = BASE_COMPONENT_VARIANCE
    correction = (t1 - t2) * v / (2.0 * mu * mu + 2.0 * mu)
    var_v1 = v / mu - t1 * correction
    var_v2 = v / mu + t2 * correction

    a11 = m.entries[0, 0]
    v1 = np.array([t1, spec.mu1.real - a11])
    v2 = np.array([t1, spec.mu2.real - a11])
    basis = np.column_stack([v1, v2])
    p1 = basis @ np.diag([1.0, 0.0]) @ np.linalg.inv(basis)

    # proj1(U + V): component i is sum_m P[i,m] (U_m + V_m) with all eight
    # real Gaussians independent, so real and imaginary parts decouple and
    # share one 2x2 covariance.
    cov2 = p1 @ np.diag([v + var_v1, v + var_v2]) @ p1.T
    cov4 = np.zeros((4, 4))
    cov4[0::2, 0::2] = cov2
    cov4[1::2, 1::2] = cov2
    for a in (p1, cov4):
        a.setflags(write=False)
    return FluctuationPrediction(
        mu=mu,
        var_u=v,
        var_v1=var_v1,
        var_v2=var_v2,
        projection=p1,
        predicted_covariance=cov4,
    )


def synthetic_pushforward(
    pred: FluctuationPrediction, n_draws: int, seed
) -> np.ndarray:
    """Monte Carlo covariance of proj1(U+V) from independent Gaussian draws.

    Cross-validates the closed-form predicted_covariance.
    """
    rng = np.random.default_rng(seed)
    scales = np.sqrt(
        [
            pred.var_u + pred.var_v1,
            pred.var_u + pred.var_v1,
            pred.var_u + pred.var_v2,
            pred.var_u + pred.var_v2,
        ]
    )
    draws = rng.normal(size=(n_draws, 4)) * scales  # (w1_re, w1_im, w2_re, w2_im)
    p = pred.projection
    z = np.empty_like(draws)
    z[:, 0::2] = draws[:, 0::2] @ p.T
    z[:, 1::2] = draws[:, 1::2] @ p.T
    return np.cov(z, rowvar=False, ddof=1)


def variance_integrand(
    params: ModelParams,
    t: float,
    a1re: float = 0.0,
    a1im: float = 0.0,
    a2re: float = 0.0,
    a2im: float = 0.0,
    mu: Optional[float] = None,
) -> Tuple[float, float]:
    """The martingale variance density h(t) and cumulative H(t).

        h(t) = q1 [2v - v T1 (T1 - T2)(1 - e^{-2t})]
             + q2 [2v + v T2 (T1 - T2)(1 - e^{-2t})],
        H(t) = int_0^t e^{-2 mu s} h(s) ds,

    with q_i the squared coefficient mass of line i, T_i = tanh(beta_i lam),
    v the base component variance.  H has the closed form

        H(t) = (A + B)(1 - e^{-2 mu t})/(2 mu) - B (1 - e^{-2(mu+1)t})/(2 mu + 2)

    with A = 2v(q1 + q2) and B = v(T1 - T2)(q2 T2 - q1 T1); its t -> infinity
    limit reproduces the V variances of the limit law exactly.
    """
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}")
    if mu is None:
        mu = growth_rate(params)
    t1, t2 = _tanh_pair(params)
    v = BASE_COMPONENT_VARIANCE
    q1 = a1re * a1re + a1im * a1im
    q2 = a2re * a2re + a2im * a2im
    a = 2.0 * v * (q1 + q2)
    b = v * (t1 - t2) * (q2 * t2 - q1 * t1)
    h = a + b * (1.0 - math.exp(-2.0 * t))
    big_h = (a + b) * (1.0 - math.exp(-2.0 * mu * t)) / (2.0 * mu) - b * (
        1.0 - math.exp(-2.0 * (mu + 1.0) * t)
    ) / (2.0 * (mu + 1.0))
    return h, big_h


def variance_limit(params: ModelParams, a1re=0.0, a1im=0.0, a2re=0.0, a2im=0.0, mu=None) -> float:
    """H(infinity) in closed form."""
    if mu is None:
        mu = growth_rate(params)
    t1, t2 = _tanh_pair(params)
    v = BASE_COMPONENT_VARIANCE
    q1 = a1re * a1re + a1im * a1im
    q2 = a2re * a2re + a2im * a2im
    a = 2.0 * v * (q1 + q2)
    b = v * (t1 - t2) * (q2 * t2 - q1 * t1)
    return (a + b) / (2.0 * mu) - b / (2.0 * (mu + 1.0))


# ---------------------------------------------------------------------------
# ensemble runners


@dataclass(frozen=True)
class EnsembleStats:
    """Aggregated mode samples of one fluctuation ensemble."""

    gamma: float
    theta: float
    t_theta: float
    rescale: float
    n_replicas: int
    master_seed: int
    k_set: Tuple[int, ...]
    samples: Dict[int, np.ndarray] = field(repr=False)  # k -> (M, 2) complex, rescaled
    projected: np.ndarray = field(repr=False)  # (M, 4) real components of proj1 z
    covariance: np.ndarray = field(repr=False)  # unbiased 4x4
    prediction: FluctuationPrediction
    variance_ratios: np.ndarray  # empirical / predicted diagonal
    ks_pvalues: np.ndarray  # per real component vs predicted normal
    offmode_median: Dict[int, float]  # k not +-1 -> median rescaled |X|


def _replica_modes(ctx: SimContext, t_end: float, k_set, seed) -> np.ndarray:
    state = init_random(ctx, seed)
    advance(state, ctx, t_end)
    obs = observe(state, ctx, [abs(k) for k in k_set])
    out = np.empty((len(k_set), 2), dtype=complex)
    for j, k in enumerate(k_set):
        x1 = obs.modes[abs(k)][0]
        x2 = obs.modes[abs(k)][1]
        if k < 0:
            x1, x2 = x1.conjugate(), x2.conjugate()
        out[j, 0], out[j, 1] = x1, x2
    return out


def spawn_seeds(master_seed: int, count: int):
    """Independent child seeds for replicas, reproducible from the master."""
    return np.random.SeedSequence(master_seed).spawn(count)


def run_fluctuation_ensemble(
    params: ModelParams,
    gamma: float,
    theta: float,
    n_replicas: int,
    master_seed: int,
    k_set: Tuple[int, ...] = DEFAULT_K_SET,
    n_jobs: int = -1,
) -> EnsembleStats:
    """M replicas to t_theta; rescaled modes against the predicted limit law.

    Samples are gamma^{(theta-1)/2} X^{(k)}(t_theta).  The k = 1 pair is
    pushed through the oblique projector and compared componentwise to the
    predicted covariance (variance ratios and KS tests); other wavenumbers
    are summarized by their median rescaled magnitude, which should be small.
    """
    if n_replicas < 2:
        raise DomainError(f"need at least 2 replicas, got {n_replicas}")
    if 1 not in k_set:
        raise DomainError("k_set must contain the unstable mode 1")
    pred = prediction(params)
    sched = schedule(params, gamma, thetas=[theta])
    t_end = sched.t_theta[theta]
    n = int(round(1.0 / gamma))
    ctx = SimContext.build(params, LatticeSpec(n), k_track=max(abs(k) for k in k_set))
    seeds = spawn_seeds(master_seed, n_replicas)
    raw = Parallel(n_jobs=n_jobs)(
        delayed(_replica_modes)(ctx, t_end, k_set, s) for s in seeds
    )
    rescale = gamma ** ((theta - 1.0) / 2.0)
    stacked = np.stack(raw) * rescale  # (M, |k_set|, 2)
    samples = {k: stacked[:, j, :].copy() for j, k in enumerate(k_set)}

    z = samples[1] @ pred.projection.T  # (M, 2) complex, projected
    projected = np.column_stack([z[:, 0].real, z[:, 0].imag, z[:, 1].real, z[:, 1].imag])
    covariance = np.cov(projected, rowvar=False, ddof=1)
    pred_diag = pred.component_variances()
    variance_ratios = np.diag(covariance) / pred_diag
    ks_pvalues = np.array(
        [
            stats.kstest(projected[:, j], "norm", args=(0.0, math.sqrt(pred_diag[j]))).pvalue
            for j in range(4)
        ]
    )
    offmode_median = {
        k: float(np.median(np.abs(samples[k]).max(axis=1)))
        for k in k_set
        if k not in (1, -1)
    }
    return EnsembleStats(
        gamma=gamma,
        theta=theta,
        t_theta=t_end,
        rescale=rescale,
        n_replicas=n_replicas,
        master_seed=master_seed,
        k_set=tuple(k_set),
        samples=samples,
        projected=projected,
        covariance=covariance,
        prediction=pred,
        variance_ratios=variance_ratios,
        ks_pvalues=ks_pvalues,
        offmode_median=offmode_median,
    )


@dataclass(frozen=True)
class EscapeEstimate:
    """Binomial estimate of the mode-escape probability near the critical time."""

    gamma: float
    delta: float
    t_evaluated: float
    n_replicas: int
    n_escaped: int
    p_hat: float
    ci_low: float
    ci_high: float
    master_seed: int


def _wilson_interval(successes: int, trials: int, z: float = 1.959963984540054):
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _replica_escape(ctx: SimContext, t_end: float, seed) -> float:
    state = init_random(ctx, seed)
    advance(state, ctx, t_end)
    obs = observe(state, ctx, [1])
    x1, x2 = obs.modes[1]
    return math.sqrt(abs(x1) ** 2 + abs(x2) ** 2)


def run_escape_ensemble(
    params: ModelParams,
    gamma: float,
    delta: float,
    n_replicas: int,
    master_seed: int,
    n_jobs: int = -1,
) -> EscapeEstimate:
    """Estimate P(||X^(1)(t_c - T_delta)|| > delta) with a 95% Wilson CI."""
    sched = schedule(params, gamma, deltas=[delta])
    t_end = sched.t_critical - sched.t_delta[delta]
    if t_end <= 0:
        raise DomainError(
            f"t_c - T_delta = {t_end:.4g} is not positive; gamma too large for delta={delta}"
        )
    n = int(round(1.0 / gamma))
    ctx = SimContext.build(params, LatticeSpec(n), k_track=3)
    seeds = spawn_seeds(master_seed, n_replicas)
    norms = Parallel(n_jobs=n_jobs)(
        delayed(_replica_escape)(ctx, t_end, s) for s in seeds
    )
    n_escaped = int(np.sum(np.asarray(norms) > delta))
    lo, hi = _wilson_interval(n_escaped, n_replicas)
    return EscapeEstimate(
        gamma=gamma,
        delta=delta,
        t_evaluated=t_end,
        n_replicas=n_replicas,
        n_escaped=n_escaped,
        p_hat=n_escaped / n_replicas,
        ci_low=lo,
        ci_high=hi,
        master_seed=master_seed,
    )


# ---------------------------------------------------------------------------
# statistical tests


class TestError(RuntimeError):
    """A statistical test cannot run on the supplied data."""


@dataclass(frozen=True)
class PatternTest:
    """Phase-uniformity and amplitude-law tests of complex mode samples."""

    n_samples: int
    phase_ks_stat: float
    phase_ks_pvalue: float
    amplitude_ks_stat: Optional[float]
    amplitude_ks_pvalue: Optional[float]


def pattern_test(samples: np.ndarray, component_variance: Optional[float] = None) -> PatternTest:
    """Test Phi = -atan2(Im, Re) against uniform[0, 2 pi) and, when the
    per-component variance is supplied, |z|^2 against the exponential law of
    an isotropic complex Gaussian.
    """
    samples = np.asarray(samples).ravel()
    if samples.size < 100:
        raise TestError(f"need at least 100 samples, got {samples.size}")
    phases = np.mod(-np.arctan2(samples.imag, samples.real), 2.0 * np.pi)
    phase_res = stats.kstest(phases, "uniform", args=(0.0, 2.0 * np.pi))
    amp_stat = amp_p = None
    if component_variance is not None:
        amp2 = np.abs(samples) ** 2
        amp_res = stats.kstest(amp2, "expon", args=(0.0, 2.0 * component_variance))
        amp_stat, amp_p = float(amp_res.statistic), float(amp_res.pvalue)
    return PatternTest(
        n_samples=int(samples.size),
        phase_ks_stat=float(phase_res.statistic),
        phase_ks_pvalue=float(phase_res.pvalue),
        amplitude_ks_stat=amp_stat,
        amplitude_ks_pvalue=amp_p,
    )


@dataclass(frozen=True)
class CltResult:
    n_sites: int
    n_samples: int
    empirical_variance: float
    target_variance: float
    ks_stat: float
    ks_pvalue: float
    samples: np.ndarray = field(repr=False, default=None)


_CLT_BUILTINS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "cos": lambda r: np.cos(2.0 * np.pi * r),
    "sin": lambda r: np.sin(2.0 * np.pi * r),
    "const": lambda r: np.ones_like(r),
}


def clt_oracle(
    f: Union[str, Callable[[np.ndarray], np.ndarray]],
    n_sites: int,
    n_samples: int,
    seed,
    chunk: int = 256,
) -> CltResult:
    """Sample Y = N^{-1/2} sum_x f(x/N) sigma_x over i.i.d. symmetric spins
    and compare against the limiting normal with variance int_0^1 f^2.
    """
    func = _CLT_BUILTINS[f] if isinstance(f, str) else f
    grid = np.arange(n_sites) / n_sites
    weights = np.asarray(func(grid), dtype=float)
    fine = np.linspace(0.0, 1.0, 200_001)
    target = float(np.trapezoid(np.asarray(func(fine), dtype=float) ** 2, fine))
    rng = np.random.default_rng(seed)
    ys = np.empty(n_samples)
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        spins = 2.0 * rng.integers(0, 2, size=(m, n_sites)) - 1.0
        ys[done : done + m] = spins @ weights / math.sqrt(n_sites)
        done += m
    variance = float(np.var(ys, ddof=1))
    if target > 0:
        res = stats.kstest(ys, "norm", args=(0.0, math.sqrt(target)))
        ks_stat, ks_p = float(res.statistic), float(res.pvalue)
    else:
        ks_stat, ks_p = 0.0, 1.0
    return CltResult(
        n_sites=n_sites,
        n_samples=n_samples,
        empirical_variance=variance,
        target_variance=target,
        ks_stat=ks_stat,
        ks_pvalue=ks_p,
        samples=ys,
    )


# ---------------------------------------------------------------------------
# compensator check


class _MartingaleObserver:
    """Accumulates I(t) = gamma^{-1/2} int_0^t e^{-mu s} d(martingale part)
    of the linear functional G(sigma) = <sigma_1, g_1> + <sigma_2, g_2>.

    Jumps contribute e^{-mu s} (G(sigma^x) - G(sigma)); between jumps the
    compensator drift -e^{-mu s} (L G)(sigma) is integrated in closed form.
    L G is a sum over all single-spin moves of rate times jump and only
    changes at accepted flips, so it is cached per visited state.
    """

    def __init__(self, ctx: SimContext, mu: float, a1re, a1im, a2re, a2im):
        self.ctx = ctx
        self.mu = mu
        n = ctx.lattice.n_sites
        r = np.arange(n) / n
        self.g1 = a1re * np.cos(2.0 * np.pi * r) + a1im * np.sin(2.0 * np.pi * r)
        self.g2 = a2re * np.cos(2.0 * np.pi * r) + a2im * np.sin(2.0 * np.pi * r)
        self.gamma = ctx.lattice.gamma
        self.jump_sum = 0.0
        self.drift_sum = 0.0
        self._lg = None

    def _generator_on_g(self, state) -> float:
        r1, r2 = all_rates(state, self.ctx)
        jump1 = -2.0 * self.gamma * state.line1 * self.g1
        jump2 = -2.0 * self.gamma * state.line2 * self.g2
        return float(r1 @ jump1 + r2 @ jump2)

    def on_interval(self, state, t0: float, t1: float) -> None:
        if self._lg is None:
            self._lg = self._generator_on_g(state)
        mu = self.mu
        self.drift_sum += self._lg * (math.exp(-mu * t0) - math.exp(-mu * t1)) / mu

    def on_flip(self, state, line_index: int, x: int, t: float) -> None:
        g = self.g1 if line_index == 1 else self.g2
        line = state.line1 if line_index == 1 else state.line2
        delta = -2.0 * self.gamma * line[x] * g[x]
        self.jump_sum += math.exp(-self.mu * t) * delta
        self._lg = None

    def value(self) -> float:
        return (self.jump_sum - self.drift_sum) / math.sqrt(self.gamma)


@dataclass(frozen=True)
class CompensatorResult:
    gamma: float
    t: float
    n_replicas: int
    empirical_variance: float
    empirical_mean: float
    h_target: float
    ratio: float
    master_seed: int
    values: np.ndarray = field(repr=False, default=None)


def _replica_compensator(ctx, mu, t, coeffs, seed) -> float:
    obs = _MartingaleObserver(ctx, mu, *coeffs)
    state = init_random(ctx, seed)
    advance(state, ctx, t, backend="reference", observer=obs)
    return obs.value()


def compensator_variance_check(
    params: ModelParams,
    gamma: float,
    t: float,
    a1re: float = 1.0,
    a1im: float = 0.0,
    a2re: float = 0.0,
    a2im: float = 0.0,
    n_replicas: int = 500,
    master_seed: int = 0,
    n_jobs: int = -1,
) -> CompensatorResult:
    """Empirical Var(I(t)) over M replicas against the closed form H(t)."""
    mu = growth_rate(params)
    n = int(round(1.0 / gamma))
    ctx = SimContext.build(params, LatticeSpec(n), k_track=3)
    coeffs = (a1re, a1im, a2re, a2im)
    seeds = spawn_seeds(master_seed, n_replicas)
    values = np.asarray(
        Parallel(n_jobs=n_jobs)(
            delayed(_replica_compensator)(ctx, mu, t, coeffs, s) for s in seeds
        )
    )
    _, h_target = variance_integrand(params, t, *coeffs, mu=mu)
    variance = float(np.var(values, ddof=1)) if t > 0 else 0.0
    return CompensatorResult(
        gamma=gamma,
        t=t,
        n_replicas=n_replicas,
        empirical_variance=variance,
        empirical_mean=float(np.mean(values)),
        h_target=h_target,
        ratio=variance / h_target if h_target > 0 else float("nan"),
        master_seed=master_seed,
        values=values,
    )
