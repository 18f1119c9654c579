"""Exact continuous-time simulation of the two-line spin system.

Dynamics: each site x of each line i flips at rate

    R_i(x, sigma) = exp(-sigma_i(x) u_i(x)) / (2 cosh u_i(x)),
    u_1(x) = beta1 ((sigma_1 * phi_1)(x) - gamma phi_1(0) sigma_1(x) + lam sigma_2(x)),
    u_2(x) = beta2 ((sigma_2 * phi_2)(x) - gamma phi_2(0) sigma_2(x) - lam sigma_1(x)).

The subtracted term removes the convolution's own-site contribution: a spin
does not interact with itself, which is what makes the complementarity
R(x, sigma) + R(x, sigma^x) = 1 an exact algebraic identity.

Every rate is strictly below 1, so uniformization is exact: a Poisson clock
of total rate 2N rings, a (line, site) candidate is drawn uniformly among the
2N single-spin moves, and the flip is accepted with probability equal to its
rate.  No time discretization is involved.

The convolution fields are never stored per site.  Instead the simulator
tracks the discrete Fourier modes X_i(k) = gamma sum_x sigma_i(x) e^{-2pi i
k x / N} for k = 0..K and reconstructs field values through the exact
discrete kernel coefficients c_k (the DFT of the sampled kernel row, aliasing
included), truncated where c_k is below 1e-14.  A spin flip then costs O(K)
instead of O(N), and the truncation error is bounded by the discarded
coefficient mass.  Modes are resynchronized from scratch on a fixed schedule
to arrest floating-point drift.

Two backends share one event loop and one stream of pre-drawn random blocks:
a numba-compiled kernel for throughput and a pure-Python step for
instrumentation.  Their per-event arithmetic is ordered identically, so the
two produce bit-identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from .kernels import KernelTable
from .params import LatticeSpec, ModelParams

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - environment without numba
    HAVE_NUMBA = False

# Discrete kernel coefficients below this magnitude are dropped from field
# reconstruction; the induced field error is bounded by the discarded mass.
COEFF_CUTOFF = 1e-14

# Accepted flips between from-scratch mode recomputations.
RESYNC_INTERVAL = 1_000_000

# Pre-drawn randomness per block: one exponential, one candidate index, one
# acceptance uniform per event.
BLOCK_SIZE = 1 << 16


@dataclass(frozen=True)
class SimContext:
    """Immutable per-run tables shared by every replica.

    wc1/wc2 are the kernel DFT coefficients multiplied by the mode
    multiplicity weight (1 for k = 0 and the Nyquist mode, 2 otherwise) and
    zeroed beyond their truncation index kcut1/kcut2.  cos_table/sin_table
    hold cos/sin(2 pi k x / N) for k = 0..k_track.
    """

    params: ModelParams
    lattice: LatticeSpec
    k_track: int
    kcut1: int
    kcut2: int
    wc1: np.ndarray = field(repr=False)
    wc2: np.ndarray = field(repr=False)
    cos_table: np.ndarray = field(repr=False)
    sin_table: np.ndarray = field(repr=False)
    # gamma * phi_i(0, 0): the kernel's own-site contribution, removed from
    # the local field entering the rates so that a spin does not interact
    # with itself and R(x, sigma) + R(x, sigma^x) = 1 holds exactly
    self1: float = 0.0
    self2: float = 0.0

    @classmethod
    def build(
        cls, params: ModelParams, lattice: LatticeSpec, k_track: int = None
    ) -> "SimContext":
        n = lattice.n_sites
        kt1 = KernelTable.build(lattice, params.tau1)
        kt2 = KernelTable.build(lattice, params.tau2)
        c1, c2 = kt1.dft(), kt2.dft()
        kcut1 = _truncation_index(c1, n)
        kcut2 = _truncation_index(c2, n)
        if k_track is None:
            k_track = max(kcut1, kcut2, 3)
        k_track = min(max(k_track, kcut1, kcut2), n // 2)
        kk = np.arange(k_track + 1)
        weights = np.where((kk == 0) | (2 * kk == n), 1.0, 2.0)
        wc1 = weights * c1[: k_track + 1]
        wc2 = weights * c2[: k_track + 1]
        wc1[kcut1 + 1 :] = 0.0
        wc2[kcut2 + 1 :] = 0.0
        theta = 2.0 * np.pi * np.outer(kk, np.arange(n)) / n
        cos_table, sin_table = np.cos(theta), np.sin(theta)
        for a in (wc1, wc2, cos_table, sin_table):
            a.setflags(write=False)
        return cls(
            params=params,
            lattice=lattice,
            k_track=k_track,
            kcut1=kcut1,
            kcut2=kcut2,
            wc1=wc1,
            wc2=wc2,
            cos_table=cos_table,
            sin_table=sin_table,
            self1=lattice.gamma * float(kt1.values[0]),
            self2=lattice.gamma * float(kt2.values[0]),
        )


def _truncation_index(coeffs: np.ndarray, n: int) -> int:
    """Largest k <= N/2 whose coefficient still matters for field values."""
    kmax = n // 2
    k = kmax
    while k > 0 and abs(coeffs[k]) < COEFF_CUTOFF:
        k -= 1
    return k


@dataclass
class SpinState:
    """Mutable simulation state of one replica.

    Mode arrays hold X_i(k) for k = 0..k_track, split into real and
    imaginary parts for the compiled kernel's benefit.
    """

    lattice: LatticeSpec
    line1: np.ndarray
    line2: np.ndarray
    x1re: np.ndarray
    x1im: np.ndarray
    x2re: np.ndarray
    x2im: np.ndarray
    time: float
    rng: np.random.Generator
    events: int = 0
    accepted: int = 0
    accepted_since_resync: int = 0

    def mode(self, line: int, k: int) -> complex:
        """Tracked mode X_i(k); negative k via conjugate symmetry."""
        re = self.x1re if line == 1 else self.x2re
        im = self.x1im if line == 1 else self.x2im
        if abs(k) >= len(re):
            raise ValueError(f"mode {k} not tracked (k_track={len(re) - 1})")
        value = complex(re[abs(k)], im[abs(k)])
        return value.conjugate() if k < 0 else value

    @property
    def acceptance_ratio(self) -> float:
        return self.accepted / self.events if self.events else float("nan")


@dataclass(frozen=True)
class Observation:
    """Immutable snapshot of modes and the sitewise correlation pairing."""

    time: float
    modes: Dict[int, Tuple[complex, complex]]
    correlation_pairing: float
    magnetizations: Tuple[float, float]


def _modes_from_scratch(line: np.ndarray, k_track: int, n: int) -> Tuple[np.ndarray, np.ndarray]:
    spectrum = np.fft.fft(line.astype(float))[: k_track + 1] / n
    return np.ascontiguousarray(spectrum.real), np.ascontiguousarray(spectrum.imag)


def _fresh_state(
    ctx: SimContext, line1: np.ndarray, line2: np.ndarray, rng: np.random.Generator
) -> SpinState:
    n = ctx.lattice.n_sites
    x1re, x1im = _modes_from_scratch(line1, ctx.k_track, n)
    x2re, x2im = _modes_from_scratch(line2, ctx.k_track, n)
    return SpinState(
        lattice=ctx.lattice,
        line1=line1,
        line2=line2,
        x1re=x1re,
        x1im=x1im,
        x2re=x2re,
        x2im=x2im,
        time=0.0,
        rng=rng,
    )


def init_random(ctx: SimContext, seed) -> SpinState:
    """Independent symmetric +-1 spins on both lines from the given seed."""
    rng = np.random.default_rng(seed)
    n = ctx.lattice.n_sites
    line1 = (2 * rng.integers(0, 2, size=n) - 1).astype(np.int8)
    line2 = (2 * rng.integers(0, 2, size=n) - 1).astype(np.int8)
    return _fresh_state(ctx, line1, line2, rng)


def load_spins(ctx: SimContext, line1, line2, seed) -> SpinState:
    """State from explicit spin arrays (deterministic initial configurations)."""
    n = ctx.lattice.n_sites
    line1 = np.asarray(line1, dtype=np.int8).copy()
    line2 = np.asarray(line2, dtype=np.int8).copy()
    for name, arr in (("line1", line1), ("line2", line2)):
        if arr.shape != (n,):
            raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
        if not np.all(np.abs(arr) == 1):
            raise ValueError(f"{name} entries must be +-1")
    return _fresh_state(ctx, line1, line2, np.random.default_rng(seed))


def field_at(state: SpinState, ctx: SimContext, line_index: int, x: int) -> float:
    """Convolution field (sigma_i * phi_i)(x) reconstructed from the modes.

    Explicitly ordered scalar loop; both simulation backends reproduce this
    arithmetic exactly.
    """
    if line_index == 1:
        wc, kcut, re, im = ctx.wc1, ctx.kcut1, state.x1re, state.x1im
    else:
        wc, kcut, re, im = ctx.wc2, ctx.kcut2, state.x2re, state.x2im
    f = 0.0
    for k in range(kcut + 1):
        f += wc[k] * (re[k] * ctx.cos_table[k, x] - im[k] * ctx.sin_table[k, x])
    return f


def fields_from_modes(state: SpinState, ctx: SimContext, line_index: int) -> np.ndarray:
    """The full field array, vectorized; used for checks and instrumentation."""
    if line_index == 1:
        wc, kcut, re, im = ctx.wc1, ctx.kcut1, state.x1re, state.x1im
    else:
        wc, kcut, re, im = ctx.wc2, ctx.kcut2, state.x2re, state.x2im
    s = slice(0, kcut + 1)
    return (wc[s, None] * (re[s, None] * ctx.cos_table[s] - im[s, None] * ctx.sin_table[s])).sum(axis=0)


def flip_rate(state: SpinState, ctx: SimContext, line_index: int, x: int) -> float:
    """Rate of flipping spin x on the given line in the current state.

    The local field excludes the spin's own kernel contribution, so the rate
    pair before and after a flip sums to exactly 1.
    """
    p = ctx.params
    if line_index == 1:
        sigma = state.line1[x]
        u = p.beta1 * (
            field_at(state, ctx, 1, x) - ctx.self1 * sigma + p.lam * state.line2[x]
        )
    else:
        sigma = state.line2[x]
        u = p.beta2 * (
            field_at(state, ctx, 2, x) - ctx.self2 * sigma - p.lam * state.line1[x]
        )
    return math.exp(-sigma * u) / (2.0 * math.cosh(u))


def all_rates(state: SpinState, ctx: SimContext) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized (rates line 1, rates line 2) over all sites."""
    p = ctx.params
    f1 = fields_from_modes(state, ctx, 1) - ctx.self1 * state.line1
    f2 = fields_from_modes(state, ctx, 2) - ctx.self2 * state.line2
    u1 = p.beta1 * (f1 + p.lam * state.line2)
    u2 = p.beta2 * (f2 - p.lam * state.line1)
    r1 = np.exp(-state.line1 * u1) / (2.0 * np.cosh(u1))
    r2 = np.exp(-state.line2 * u2) / (2.0 * np.cosh(u2))
    return r1, r2


def resync(state: SpinState, ctx: SimContext) -> None:
    """Recompute tracked modes from the spins, discarding accumulated drift."""
    n = ctx.lattice.n_sites
    state.x1re, state.x1im = _modes_from_scratch(state.line1, ctx.k_track, n)
    state.x2re, state.x2im = _modes_from_scratch(state.line2, ctx.k_track, n)
    state.accepted_since_resync = 0


def _python_block(state: SpinState, ctx: SimContext, t_target, exps, sites, accepts, observer):
    """Reference event loop over one random block; mirrors the compiled kernel."""
    p = ctx.params
    n = ctx.lattice.n_sites
    inv_total = 1.0 / (2.0 * n)
    two_gamma = 2.0 / n
    t = state.time
    accepted = 0
    for e in range(exps.shape[0]):
        t_next = t + exps[e] * inv_total
        if t_next > t_target:
            if observer is not None:
                observer.on_interval(state, t, t_target)
            state.time = t_target
            state.events += e
            state.accepted += accepted
            state.accepted_since_resync += accepted
            return True
        if observer is not None:
            observer.on_interval(state, t, t_next)
        cand = sites[e]
        line_index = 1 if cand < n else 2
        x = cand if cand < n else cand - n
        if line_index == 1:
            sigma = int(state.line1[x])
            u = p.beta1 * (
                field_at(state, ctx, 1, x) - ctx.self1 * sigma + p.lam * state.line2[x]
            )
        else:
            sigma = int(state.line2[x])
            u = p.beta2 * (
                field_at(state, ctx, 2, x) - ctx.self2 * sigma - p.lam * state.line1[x]
            )
        rate = math.exp(-sigma * u) / (2.0 * math.cosh(u))
        if accepts[e] < rate:
            if observer is not None:
                observer.on_flip(state, line_index, x, t_next)
            d = -two_gamma * sigma
            if line_index == 1:
                state.line1[x] = -sigma
                re, im = state.x1re, state.x1im
            else:
                state.line2[x] = -sigma
                re, im = state.x2re, state.x2im
            for k in range(ctx.k_track + 1):
                re[k] += d * ctx.cos_table[k, x]
                im[k] -= d * ctx.sin_table[k, x]
            accepted += 1
        t = t_next
    state.time = t
    state.events += exps.shape[0]
    state.accepted += accepted
    state.accepted_since_resync += accepted
    return False


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _numba_block(
        line1, line2, x1re, x1im, x2re, x2im,
        wc1, wc2, kcut1, kcut2, k_track, cos_table, sin_table,
        beta1, beta2, lam, self1, self2, t_start, t_target, exps, sites, accepts,
    ):  # pragma: no cover - exercised via advance()
        n = line1.shape[0]
        inv_total = 1.0 / (2.0 * n)
        two_gamma = 2.0 / n
        t = t_start
        accepted = 0
        for e in range(exps.shape[0]):
            t_next = t + exps[e] * inv_total
            if t_next > t_target:
                return t_target, accepted, e, True
            cand = sites[e]
            if cand < n:
                x = cand
                f = 0.0
                for k in range(kcut1 + 1):
                    f += wc1[k] * (x1re[k] * cos_table[k, x] - x1im[k] * sin_table[k, x])
                sigma = line1[x]
                u = beta1 * (f - self1 * sigma + lam * line2[x])
            else:
                x = cand - n
                f = 0.0
                for k in range(kcut2 + 1):
                    f += wc2[k] * (x2re[k] * cos_table[k, x] - x2im[k] * sin_table[k, x])
                sigma = line2[x]
                u = beta2 * (f - self2 * sigma - lam * line1[x])
            rate = math.exp(-sigma * u) / (2.0 * math.cosh(u))
            if accepts[e] < rate:
                d = -two_gamma * sigma
                if cand < n:
                    line1[x] = -sigma
                    for k in range(k_track + 1):
                        x1re[k] += d * cos_table[k, x]
                        x1im[k] -= d * sin_table[k, x]
                else:
                    line2[x] = -sigma
                    for k in range(k_track + 1):
                        x2re[k] += d * cos_table[k, x]
                        x2im[k] -= d * sin_table[k, x]
                accepted += 1
            t = t_next
        return t, accepted, exps.shape[0], False


def advance(
    state: SpinState,
    ctx: SimContext,
    t_target: float,
    backend: str = "fast",
    observer=None,
) -> SpinState:
    """Advance the state to t_target in place (and return it).

    backend "fast" uses the compiled kernel, "reference" the pure-Python
    loop.  Both consume the replica's random stream in fixed-size blocks
    with identical per-event arithmetic, so trajectories agree bit for bit.
    An observer (reference backend only) receives on_interval(state, t0, t1)
    for each inter-event interval, on which the state is constant, and
    on_flip(state, line, x, t) immediately before each accepted flip.
    """
    if t_target < state.time:
        raise ValueError(f"t_target {t_target} precedes state time {state.time}")
    if backend not in ("fast", "reference"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "fast" and observer is not None:
        raise ValueError("observers require the reference backend")
    if backend == "fast" and not HAVE_NUMBA:
        backend = "reference"
    n = ctx.lattice.n_sites
    while state.time < t_target:
        exps = state.rng.exponential(size=BLOCK_SIZE)
        sites = state.rng.integers(0, 2 * n, size=BLOCK_SIZE)
        accepts = state.rng.random(size=BLOCK_SIZE)
        if backend == "reference":
            done = _python_block(state, ctx, t_target, exps, sites, accepts, observer)
        else:
            t_new, accepted, used, done = _numba_block(
                state.line1, state.line2,
                state.x1re, state.x1im, state.x2re, state.x2im,
                ctx.wc1, ctx.wc2, ctx.kcut1, ctx.kcut2, ctx.k_track,
                ctx.cos_table, ctx.sin_table,
                ctx.params.beta1, ctx.params.beta2, ctx.params.lam,
                ctx.self1, ctx.self2,
                state.time, t_target, exps, sites, accepts,
            )
            state.time = t_new
            state.events += used
            state.accepted += accepted
            state.accepted_since_resync += accepted
        if state.accepted_since_resync >= RESYNC_INTERVAL:
            resync(state, ctx)
        if done:
            break
    return state


def observe(state: SpinState, ctx: SimContext, k_set: Iterable[int]) -> Observation:
    """Snapshot of the requested modes; never mutates the state."""
    modes = {int(k): (state.mode(1, int(k)), state.mode(2, int(k))) for k in k_set}
    eta = state.line1.astype(float) * state.line2
    return Observation(
        time=state.time,
        modes=modes,
        correlation_pairing=float(eta.mean()),
        magnetizations=(float(state.line1.mean()), float(state.line2.mean())),
    )
