from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError


class LawFamily(str, Enum):
    DIRAC = "dirac"
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class InitialLaw:
    """Law of the initial inventories. All families have exponential moments of every order."""

    family: LawFamily = LawFamily.DIRAC
    mean: float = 0.0
    sd: float = 1.0
    lo: float = -1.0
    hi: float = 1.0
    c: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", LawFamily(self.family))
        if self.family is LawFamily.GAUSSIAN and not self.sd > 0:
            raise ConfigError(f"law0.sd must be > 0, got {self.sd}")
        if self.family is LawFamily.UNIFORM and not self.lo < self.hi:
            raise ConfigError(f"law0 needs lo < hi, got lo={self.lo}, hi={self.hi}")

    @classmethod
    def dirac(cls, c: float = 0.0) -> InitialLaw:
        return cls(LawFamily.DIRAC, c=c)

    @classmethod
    def gaussian(cls, mean: float = 0.0, sd: float = 1.0) -> InitialLaw:
        return cls(LawFamily.GAUSSIAN, mean=mean, sd=sd)

    @classmethod
    def uniform(cls, lo: float, hi: float) -> InitialLaw:
        return cls(LawFamily.UNIFORM, lo=lo, hi=hi)

    @property
    def expected(self) -> float:
        if self.family is LawFamily.DIRAC:
            return self.c
        if self.family is LawFamily.GAUSSIAN:
            return self.mean
        return 0.5 * (self.lo + self.hi)

    def span(self, nsd: float = 6.0) -> tuple[float, float]:
        """Interval holding essentially all of the mass."""
        if self.family is LawFamily.DIRAC:
            return self.c, self.c
        if self.family is LawFamily.GAUSSIAN:
            return self.mean - nsd * self.sd, self.mean + nsd * self.sd
        return self.lo, self.hi

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.family is LawFamily.DIRAC:
            return np.full(size, float(self.c))
        if self.family is LawFamily.GAUSSIAN:
            return self.mean + self.sd * rng.standard_normal(size)
        return rng.uniform(self.lo, self.hi, size)

    def expectation(self, fn, order: int = 64) -> float:
        """``E[fn(X0)]`` by Gauss quadrature (exact for a Dirac)."""
        if self.family is LawFamily.DIRAC:
            return float(fn(np.array([self.c]))[0])
        if self.family is LawFamily.GAUSSIAN:
            nodes, weights = np.polynomial.hermite_e.hermegauss(order)
            x = self.mean + self.sd * nodes
            return float(np.dot(weights, fn(x)) / np.sqrt(2 * np.pi))
        nodes, weights = np.polynomial.legendre.leggauss(order)
        half = 0.5 * (self.hi - self.lo)
        x = self.lo + half * (nodes + 1)
        return float(0.5 * np.dot(weights, fn(x)))
