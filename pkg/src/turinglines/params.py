"""Macroscopic model parameters and lattice geometry.

The model lives on the unit torus discretized into N = 1/gamma sites.  Each
of the two spin lines carries an inverse temperature beta_i and a Gaussian
interaction range tau_i; the lines are coupled through a field of intensity
lambda (line 1 pushes line 2 with -lambda, line 2 pushes line 1 with
+lambda).  The effective linear-response coefficient of line i is

    alpha_i = beta_i / cosh(lambda * beta_i)**2

and is always recomputed from the base fields, never cached.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction


class ParameterError(ValueError):
    """A model parameter is outside its admissible domain."""


@dataclass(frozen=True)
class ModelParams:
    """The macroscopic parameter tuple (beta1, beta2, tau1, tau2, lam)."""

    beta1: float
    beta2: float
    tau1: float
    tau2: float
    lam: float

    def __post_init__(self):
        for name in ("beta1", "beta2", "tau1", "tau2", "lam"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ParameterError(f"{name} must be a finite number, got {value!r}")
            if value <= 0:
                raise ParameterError(f"{name} must be strictly positive, got {value}")

    @property
    def alpha1(self) -> float:
        return self.beta1 / math.cosh(self.lam * self.beta1) ** 2

    @property
    def alpha2(self) -> float:
        return self.beta2 / math.cosh(self.lam * self.beta2) ** 2

    def swapped(self) -> "ModelParams":
        """Exchange the roles of the two lines (beta and tau together)."""
        return ModelParams(self.beta2, self.beta1, self.tau2, self.tau1, self.lam)

    def to_dict(self) -> dict:
        return {
            "beta1": self.beta1,
            "beta2": self.beta2,
            "tau1": self.tau1,
            "tau2": self.tau2,
            "lambda": self.lam,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        try:
            return cls(
                beta1=float(d["beta1"]),
                beta2=float(d["beta2"]),
                tau1=float(d["tau1"]),
                tau2=float(d["tau2"]),
                lam=float(d["lambda"]),
            )
        except KeyError as exc:
            raise ParameterError(f"missing parameter key {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class LatticeSpec:
    """A discretization of the unit torus with N sites at spacing gamma = 1/N."""

    n_sites: int

    def __post_init__(self):
        if not isinstance(self.n_sites, int) or self.n_sites < 2:
            raise ParameterError(f"n_sites must be an integer >= 2, got {self.n_sites!r}")

    @property
    def gamma(self) -> float:
        return 1.0 / self.n_sites

    @property
    def gamma_exact(self) -> Fraction:
        """gamma as an exact rational; gamma_exact * n_sites == 1 identically."""
        return Fraction(1, self.n_sites)
