"""Sigmoidal nonlinearities.

The logistic S(z) = 1/(1 + exp(-(z - c))) with an optional shift c, the
shifted form S0 = S - S(0), closed-form derivatives up to fourth order and
a few analytic bounds used by the solution estimates.

Thresholds of the field models are applied by the models themselves, so
the default logistic is thresholdless (c = 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

MAX_ORDER = 4


def _derivative_from_values(s, q):
    """q-th derivative of the logistic written as a polynomial in s = S(z)."""
    if q == 0:
        return s
    d1 = s * (1.0 - s)
    if q == 1:
        return d1
    if q == 2:
        return d1 * (1.0 - 2.0 * s)
    if q == 3:
        return d1 * (1.0 - 6.0 * s + 6.0 * s * s)
    if q == 4:
        return d1 * (1.0 - 2.0 * s) * (1.0 - 12.0 * s + 12.0 * s * s)
    raise ValueError(f"derivative order {q} is not supported (1 <= q <= {MAX_ORDER})")


@dataclass(frozen=True)
class Logistic:
    """Logistic sigmoid, optionally shifted: S(z) = 1/(1 + exp(-(z - shift)))."""

    shift: float = 0.0

    def __call__(self, z):
        return expit(np.asarray(z, dtype=float) - self.shift)

    @property
    def s0(self) -> float:
        """S(0)."""
        return float(expit(-self.shift))

    def shifted(self, z):
        """S0(z) = S(z) - S(0)."""
        return self(z) - self.s0

    def deriv(self, z, q: int = 1):
        if not 1 <= q <= MAX_ORDER:
            raise ValueError(f"derivative order {q} is not supported (1 <= q <= {MAX_ORDER})")
        return _derivative_from_values(self(z), q)

    def derivs(self, z, orders=(1,)):
        """Several derivatives at once, sharing a single evaluation of S."""
        s = self(z)
        return [_derivative_from_values(s, q) for q in orders]

    def s(self, q: int) -> float:
        """Derivative S^(q)(0)."""
        return float(self.deriv(0.0, q))

    def primitive_shifted(self, z):
        """Antiderivative of S0 vanishing at 0, in an overflow-safe form."""
        z = np.asarray(z, dtype=float)
        c = self.shift
        return np.logaddexp(0.0, z - c) - np.logaddexp(0.0, -c) - self.s0 * z

    @property
    def sup_shifted(self) -> float:
        """sup |S0| over the real line."""
        return max(self.s0, 1.0 - self.s0)

    @property
    def lipschitz(self) -> float:
        """sup |S'| (attained at z = shift)."""
        return 0.25


@dataclass(frozen=True)
class Heaviside:
    """Step nonlinearity, the infinite-slope limit of the logistic.

    H(0) = 1/2 so that S0 stays odd. Derivatives vanish away from the jump
    and are undefined at it.
    """

    shift: float = 0.0

    def __call__(self, z):
        return np.heaviside(np.asarray(z, dtype=float) - self.shift, 0.5)

    @property
    def s0(self) -> float:
        return float(np.heaviside(-self.shift, 0.5))

    def shifted(self, z):
        return self(z) - self.s0

    def deriv(self, z, q: int = 1):
        if not 1 <= q <= MAX_ORDER:
            raise ValueError(f"derivative order {q} is not supported (1 <= q <= {MAX_ORDER})")
        z = np.asarray(z, dtype=float)
        return np.where(z == self.shift, np.nan, 0.0)

    def derivs(self, z, orders=(1,)):
        return [self.deriv(z, q) for q in orders]

    def s(self, q: int) -> float:
        return float(self.deriv(0.0, q))

    def primitive_shifted(self, z):
        z = np.asarray(z, dtype=float)
        return np.maximum(z - self.shift, 0.0) - np.maximum(-self.shift, 0.0) - self.s0 * z

    @property
    def sup_shifted(self) -> float:
        return max(self.s0, 1.0 - self.s0)

    @property
    def lipschitz(self) -> float:
        return np.inf


LOGISTIC = Logistic()


def logistic(z):
    """S(z) = 1/(1 + exp(-z))."""
    return LOGISTIC(z)


def shifted(z):
    """S0(z) = S(z) - 1/2."""
    return LOGISTIC.shifted(z)


def deriv(z, q: int = 1):
    """q-th derivative of the logistic, 1 <= q <= 4."""
    return LOGISTIC.deriv(z, q)


def square_bound_check(x, lam):
    """Truth of (S(lam x) - S(0))**2 <= S(lam**2 x**2) - S(0), elementwise."""
    lhs = shifted(np.multiply(lam, x)) ** 2
    rhs = shifted(np.multiply(lam, x) ** 2)
    return lhs <= rhs
