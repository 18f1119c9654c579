"""Periodized Gaussian interaction kernels and discrete Fourier machinery.

The interaction kernel on the torus is the periodization of a Gaussian
density of variance tau,

    phi(r, rp) = sum_a (2 pi tau)^(-1/2) exp(-(r - rp + a)^2 / (2 tau)),

whose Fourier coefficients against F_k(r) = exp(2 pi i k r) are
exp(-2 pi^2 tau k^2).  On the lattice everything reduces to circular
convolutions, computed either directly or through the FFT depending on size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import LatticeSpec, ParameterError

# Relative Gaussian tail mass below which periodic images are dropped.
IMAGE_TAIL = 1e-12

# Direct summation below this lattice size, FFT-based circular convolution
# at or above it (measured crossover; both paths are tested against each other).
FFT_CROSSOVER = 256


def image_cutoff(tau: float) -> int:
    """Smallest number of periodic images so the omitted tail mass is < 1e-12.

    The tail of a centered Gaussian beyond distance A is below
    exp(-A^2 / (2 tau)); positions on the torus add at most 1 to the distance.
    """
    if tau <= 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    a = 1
    while math.exp(-((a - 1.0) ** 2) / (2.0 * tau)) >= IMAGE_TAIL:
        a += 1
    return a


def periodized_gaussian(r: float, rp: float, tau: float) -> float:
    """Periodized Gaussian density of variance tau evaluated at (r, rp).

    Symmetric in (r, rp) and a function of the circle distance only.
    """
    if tau <= 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    cutoff = image_cutoff(tau)
    d = r - rp
    images = d + np.arange(-cutoff, cutoff + 1)
    return float(np.exp(-images**2 / (2.0 * tau)).sum() / math.sqrt(2.0 * math.pi * tau))


def kernel_fourier(k: int, tau: float) -> float:
    """Fourier coefficient exp(-2 pi^2 tau k^2) of the periodized Gaussian."""
    if tau <= 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    return math.exp(-2.0 * math.pi**2 * tau * k * k)


@dataclass(frozen=True)
class KernelTable:
    """Sampled kernel row phi(0, j*gamma) for j = 0..N-1 on a given lattice.

    Translation invariance on the torus supplies all other pairs, so a
    single row of length N is enough for every convolution.
    """

    lattice: LatticeSpec
    tau: float
    image_cutoff: int
    values: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, lattice: LatticeSpec, tau: float) -> "KernelTable":
        if tau <= 0:
            raise ParameterError(f"tau must be positive, got {tau}")
        n = lattice.n_sites
        cutoff = image_cutoff(tau)
        pos = np.arange(n) * lattice.gamma
        images = pos[:, None] + np.arange(-cutoff, cutoff + 1)[None, :]
        values = np.exp(-images**2 / (2.0 * tau)).sum(axis=1)
        values /= math.sqrt(2.0 * math.pi * tau)
        values.setflags(write=False)
        return cls(lattice=lattice, tau=tau, image_cutoff=cutoff, values=values)

    def dft(self) -> np.ndarray:
        """Discrete coefficients c_k = gamma * sum_j values[j] e^{-2 pi i k j / N}.

        Real by symmetry of the row; these make the circular-convolution
        theorem exact on the lattice (aliasing included).
        """
        return np.fft.fft(self.values).real * self.lattice.gamma


def discrete_convolution(line: np.ndarray, kernel: KernelTable) -> np.ndarray:
    """Field (line * phi)(x) = gamma * sum_y line(y) phi(gamma x, gamma y)."""
    line = np.asarray(line, dtype=float)
    n = kernel.lattice.n_sites
    if line.shape != (n,):
        raise ValueError(f"line has shape {line.shape}, expected ({n},)")
    gamma = kernel.lattice.gamma
    if n >= FFT_CROSSOVER:
        out = np.fft.ifft(np.fft.fft(line) * np.fft.fft(kernel.values)).real * gamma
    else:
        # circulant matrix-vector product: row x is values rolled to start at x
        idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        out = gamma * (kernel.values[idx] @ line)
    return out


def discrete_convolution_direct(line: np.ndarray, kernel: KernelTable) -> np.ndarray:
    """Brute-force double loop reference for discrete_convolution."""
    n = kernel.lattice.n_sites
    gamma = kernel.lattice.gamma
    out = np.zeros(n)
    for x in range(n):
        for y in range(n):
            out[x] += line[y] * kernel.values[(y - x) % n]
    return gamma * out


def discrete_fourier_mode(line: np.ndarray, k: int, lattice: LatticeSpec) -> complex:
    """Mode <line, F_k>_gamma = gamma * sum_x line(x) e^{-2 pi i k gamma x}."""
    line = np.asarray(line, dtype=float)
    n = lattice.n_sites
    if line.shape != (n,):
        raise ValueError(f"line has shape {line.shape}, expected ({n},)")
    phase = np.exp(-2j * np.pi * k * np.arange(n) / n)
    return complex(lattice.gamma * (line * phase).sum())


def all_modes(line: np.ndarray, lattice: LatticeSpec) -> np.ndarray:
    """All N distinct modes k = 0..N-1 at once via the FFT."""
    return np.fft.fft(np.asarray(line, dtype=float)) * lattice.gamma
