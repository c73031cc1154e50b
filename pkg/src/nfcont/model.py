"""Field models and the stationary equation in reduced coordinates.

The stationary problem, after rescaling by the decay, reads

    V = J.S0(lam V) + eps I + mu (theta + J.S(0)),

with the homotopy parameters lam (slope), mu and eps. Writing every field
as its component in span{X_k} plus an orthogonal remainder, the input and
the threshold split as I = X.c_I + I_perp and theta = X.c_theta + theta_perp.
The remainders are constants of the problem, so a stationary state is
fully described by the coordinates v of its parallel part:

    V(v) = sum_k v_k X_k + eps I_perp + mu theta_perp,
    r(v) = v - <Y, S0(lam V)> - mu (S(0) <Y, 1> + c_theta) - eps c_I.

``v`` plays the role of the reduced state everywhere in the package.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .pg_kernel import PGKernel
from .sigmoid import Logistic

logger = logging.getLogger(__name__)

PARAMETERS = ("lam", "mu", "eps")
ORTHOGONAL_WARN = 1e-10


@dataclass(frozen=True)
class Bounds:
    """A priori estimates on the stationary states.

    ``frobenius`` is the kernel norm with derivatives up to ``order``
    (the conservative choice), ``frobenius_l2`` the plain L2 norm. B1/B2 use
    the former, B1_l2/B2_l2 the latter; both are valid in the L2 state norm.
    """

    B1: float
    B2: float
    lam_star: float
    lam_L: float
    order: int
    frobenius: float
    frobenius_l2: float
    B1_l2: float
    B2_l2: float
    lam_star_l2: float


@dataclass(frozen=True, eq=False)
class FieldModel:
    """Kernel, nonlinearity, input, threshold, decay and homotopy parameters.

    Parameters
    ----------
    kernel : PGKernel
    sigmoid : Logistic or Heaviside
    lam, mu, eps : float
        Slope and homotopy parameters.
    input : array (p, n_nodes), optional
        External input I (scaled by ``eps``).
    theta : array (p,) or (p, n_nodes), optional
        Threshold offset (scaled by ``mu``).
    tau : float or array (p,)
        Time constants, used only by the dynamics.
    variant : "voltage" or "activity"
    """

    kernel: PGKernel
    sigmoid: object = field(default_factory=Logistic)
    lam: float = 0.0
    mu: float = 0.0
    eps: float = 0.0
    input: np.ndarray | None = None
    theta: np.ndarray | None = None
    tau: object = 1.0
    variant: str = "voltage"
    name: str = "pg"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"slope must be nonnegative, got {self.lam}")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"eps must lie in [0, 1], got {self.eps}")
        if self.variant not in ("voltage", "activity"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if np.any(np.asarray(self.tau, dtype=float) <= 0):
            raise ValueError("time constants must be positive")

    # parameters -------------------------------------------------------

    def with_params(self, **changes) -> "FieldModel":
        """Copy with some fields replaced; the cached projections are reused."""
        new = dataclasses.replace(self, **changes)
        if not {"kernel", "sigmoid", "input", "theta"} & changes.keys():
            for key in ("_input_split", "_theta_split", "_ones_proj", "_flat"):
                if key in self.__dict__:
                    new.__dict__[key] = self.__dict__[key]
        return new

    @property
    def params(self) -> np.ndarray:
        return np.array([self.lam, self.mu, self.eps])

    def param(self, name: str) -> float:
        return float(getattr(self, name))

    def at(self, **values) -> "FieldModel":
        """``with_params`` restricted to lam / mu / eps."""
        bad = set(values) - set(PARAMETERS)
        if bad:
            raise ValueError(f"unknown parameters {sorted(bad)}")
        return self.with_params(**{k: float(v) for k, v in values.items()})

    # geometry ---------------------------------------------------------

    @property
    def grid(self):
        return self.kernel.grid

    @property
    def rank(self) -> int:
        return self.kernel.rank

    @property
    def populations(self) -> int:
        return self.kernel.populations

    @property
    def shape(self):
        return (self.populations, self.grid.size)

    def _field(self, f):
        if f is None:
            return np.zeros(self.shape)
        f = np.asarray(f, dtype=float)
        if f.ndim == 1 and f.size == self.populations:
            f = np.repeat(f[:, None], self.grid.size, axis=1)
        elif f.ndim == 1 and self.populations == 1:
            f = f[None, :]
        if f.shape != self.shape:
            raise ValueError(f"field of shape {f.shape} does not match {self.shape}")
        return f

    def split(self, f):
        """Least-squares coordinates in span{X_k} and orthogonal remainder of a field."""
        f = self._field(f)
        sw = np.sqrt(np.tile(self.grid.weights, self.populations))
        A = self.kernel.X.reshape(self.rank, -1).T * sw[:, None]
        coef, *_ = np.linalg.lstsq(A, f.ravel() * sw, rcond=1e-12)
        perp = f - np.tensordot(coef, self.kernel.X, axes=1)
        return coef, perp

    @cached_property
    def _input_split(self):
        coef, perp = self.split(self.input)
        if self.kernel.norm(perp) > ORTHOGONAL_WARN:
            logger.warning(
                "input has a component of norm %.3g outside span{X_k}; it is kept as a "
                "constant offset",
                self.kernel.norm(perp),
            )
        return coef, perp

    @cached_property
    def _theta_split(self):
        return self.split(self.theta)

    @cached_property
    def _ones_proj(self):
        return self.kernel.project(np.ones(self.shape))

    @cached_property
    def _flat(self):
        """Flattened X, weighted Y and the orthogonal offsets."""
        X = self.kernel.X.reshape(self.rank, -1)
        Yw = self.kernel._wY
        return X, Yw, self._input_split[1].ravel(), self._theta_split[1].ravel()

    @property
    def input_coords(self):
        return self._input_split[0]

    @property
    def input_perp(self):
        return self._input_split[1]

    @property
    def theta_coords(self):
        return self._theta_split[0]

    @property
    def theta_perp(self):
        return self._theta_split[1]

    @property
    def c_mu(self):
        """Coefficient of mu in the reduced equation."""
        return self.sigmoid.s0 * self._ones_proj + self.theta_coords

    @property
    def c_eps(self):
        return self.input_coords

    def offset(self, params=None):
        """Flattened orthogonal part eps I_perp + mu theta_perp."""
        _, mu, eps = self._unpack(params)
        _, _, ip, tp = self._flat
        return eps * ip + mu * tp

    def constant(self, params=None):
        """Parameter-dependent constant of the reduced equation."""
        _, mu, eps = self._unpack(params)
        return mu * self.c_mu + eps * self.c_eps

    def _unpack(self, params):
        if params is None:
            return self.lam, self.mu, self.eps
        lam, mu, eps = params
        return float(lam), float(mu), float(eps)

    # states -----------------------------------------------------------

    def _check(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.rank:
            raise ValueError(f"state has {v.shape[-1]} coordinates, kernel rank is {self.rank}")
        if not np.all(np.isfinite(v)):
            raise ValueError("state has non-finite entries")
        return v

    def potential_flat(self, v, params=None):
        """V(v) on the nodes, flattened over populations: shape (..., p*n)."""
        X = self._flat[0]
        return self._check(v) @ X + self.offset(params)

    def potential(self, v, params=None):
        """V(v) on the nodes, shape (..., p, n)."""
        v = self._check(v)
        return self.potential_flat(v, params).reshape(v.shape[:-1] + self.shape)

    def base_state(self, params=None):
        """Coordinates of the lam = 0 solution V0 = eps I + mu (theta + J.S(0))."""
        return self.constant(params)

    def base_potential(self, params=None):
        return self.potential(self.base_state(params), params)

    # residual and derivatives -------------------------------------------
    # ``params`` = (lam, mu, eps) overrides the model's own values; the
    # continuation uses it to step slightly outside the nominal ranges.

    def residual(self, v, params=None):
        """Reduced residual r(v); zero exactly at stationary states."""
        v = self._check(v)
        lam = self._unpack(params)[0]
        _, Yw, _, _ = self._flat
        V = self.potential_flat(v, params)
        return v - self.sigmoid.shifted(lam * V) @ Yw.T - self.constant(params)

    def jacobian(self, v, params=None):
        """dr/dv = Id - lam <Y_j, S'(lam V) X_k>."""
        v = self._check(v)
        lam = self._unpack(params)[0]
        X, Yw, _, _ = self._flat
        V = self.potential_flat(v, params)
        d = self.sigmoid.deriv(lam * V, 1)
        return np.eye(self.rank) - lam * _weighted_gram(Yw, d, X)

    def param_derivative(self, v, name: str, params=None):
        """dr/dp for p in lam / mu / eps."""
        v = self._check(v)
        lam = self._unpack(params)[0]
        X, Yw, ip, tp = self._flat
        V = self.potential_flat(v, params)
        d = self.sigmoid.deriv(lam * V, 1)
        if name == "lam":
            return -(d * V) @ Yw.T
        if name == "mu":
            return -self.c_mu - lam * (d * tp) @ Yw.T
        if name == "eps":
            return -self.c_eps - lam * (d * ip) @ Yw.T
        raise ValueError(f"unknown parameter {name!r}")

    def jacobian_and_param(self, v, name: str, params=None):
        """(dr/dv, dr/dp) sharing one evaluation of the sigmoid."""
        v = self._check(v)
        lam = self._unpack(params)[0]
        X, Yw, ip, tp = self._flat
        V = self.potential_flat(v, params)
        d = self.sigmoid.deriv(lam * V, 1)
        Jv = np.eye(self.rank) - lam * _weighted_gram(Yw, d, X)
        if name == "lam":
            Jp = -(d * V) @ Yw.T
        elif name == "mu":
            Jp = -self.c_mu - lam * (d * tp) @ Yw.T
        elif name == "eps":
            Jp = -self.c_eps - lam * (d * ip) @ Yw.T
        else:
            raise ValueError(f"unknown parameter {name!r}")
        return Jv, Jp

    @property
    def tau_coords(self):
        """Time constant attached to each coordinate."""
        tau = np.atleast_1d(np.asarray(self.tau, dtype=float))
        if tau.size == 1:
            return np.full(self.rank, float(tau[0]))
        if tau.size != self.populations:
            raise ValueError("tau must be a scalar or have one entry per population")
        support = np.abs(self.kernel.X).max(axis=2) > 0
        if np.any(support.sum(axis=1) > 1) and np.ptp(tau) > 0:
            raise ValueError("distinct time constants need factors supported on a single population")
        return np.array([tau[np.argmax(row)] for row in support])

    def dynamics_jacobian(self, v, params=None):
        """Linearization of tau v' = -r(v)."""
        return -self.jacobian(v, params) / self.tau_coords[:, None]

    # bounds -------------------------------------------------------------

    def sobolev_order(self) -> int:
        return 1 if self.grid.dim == 1 else 2

    def bounds(self) -> Bounds:
        kernel = self.kernel
        order = self.sobolev_order()
        fro0 = kernel.sobolev_frobenius_norm(0)
        try:
            fro = kernel.sobolev_frobenius_norm(order)
        except ValueError:
            logger.warning("no analytic factors; using the L2 Frobenius norm for lam*")
            fro, order = fro0, 0
        measure = np.sqrt(self.populations * self.grid.weights.sum())
        sup = self.sigmoid.sup_shifted
        drive = kernel.norm(self.eps * self._field(self.input) + self.mu * self._field(self.theta))
        rho = kernel.symmetric_part_radius()
        inf = float("inf")
        return Bounds(
            B1=measure * fro + drive,
            B2=sup * measure * fro,
            lam_star=1.0 / fro if fro > 0 else inf,
            lam_L=1.0 / rho if rho > 0 else inf,
            order=order,
            frobenius=fro,
            frobenius_l2=fro0,
            B1_l2=measure * fro0 + drive,
            B2_l2=sup * measure * fro0,
            lam_star_l2=1.0 / fro0 if fro0 > 0 else inf,
        )

    def coordinate_box(self):
        """Center and half-widths of a box containing every stationary state.

        From r(v) = 0, |v_k - c_k| <= sup|S0| * sum_i int |Y_k^i|.
        """
        half = self.sigmoid.sup_shifted * np.abs(self.kernel.Y).reshape(self.rank, -1) @ np.tile(
            self.grid.weights, self.populations
        )
        return self.constant(), half

    def norm(self, V) -> float:
        return self.kernel.norm(V)


def _weighted_gram(Yw, d, X):
    """<Y_j, d X_k> for one or a batch of node weights d."""
    return (Yw * d[..., None, :]) @ X.T


def voltage_from_activity(model: FieldModel, a):
    """Map reduced activity coordinates a = <Y, S(lam V)> to voltage coordinates.

    Valid at mu = 1, where the activity and voltage formulations share their
    equilibria: v = a - S(0) <Y, 1> + mu S(0) <Y, 1> + eps c_I + mu c_theta.
    """
    a = np.asarray(a, dtype=float)
    s0 = model.sigmoid.s0 * model._ones_proj
    return a - s0 + model.constant()


def activity_from_voltage(model: FieldModel, v):
    """Reduced activity a = <Y, S(lam V(v))> of a voltage state."""
    _, Yw, _, _ = model._flat
    return model.sigmoid(model.lam * model.potential_flat(v)) @ Yw.T
