"""Time integration of the reduced dynamics and checks on trajectories.

Voltage form: tau dV/dt = -V + J.S0(lam V) + eps I + mu (theta + J.S(0)).
With V = X.v + V_perp, the component V_perp obeys a linear equation and
relaxes to eps I_perp + mu theta_perp in closed form, while

    tau dv/dt = -v + <Y, S0(lam V(t))> + mu c_mu + eps c_I.

Activity form: tau dA/dt = -A + S(lam (J.A + eps I + mu theta)). Only
a = <Y, A> enters the right-hand side, so the system closes on a.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.spatial import cKDTree

from .model import FieldModel
from .stationary import StabilityRecord, classify

logger = logging.getLogger(__name__)

__all__ = [
    "IntegrationError",
    "StabilityRecord",
    "Trajectory",
    "absorbing_radius",
    "classify",
    "energy",
    "entry_time",
    "gradient_check",
    "hopfield_energy",
    "integrate",
    "monotone_violation",
    "nearest_equilibrium",
    "recurrence",
    "vector_field",
]

RTOL = 1e-7
ATOL = 1e-9


class IntegrationError(RuntimeError):
    """The integrator gave up; ``partial`` holds the trajectory so far."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class Trajectory:
    """Samples of an integrated trajectory.

    ``states`` are the reduced coordinates (v for the voltage form, a for the
    activity form). ``perp0`` is the initial deviation of V_perp from its
    equilibrium; it decays like exp(-t / tau).
    """

    model: FieldModel
    times: np.ndarray
    states: np.ndarray
    variant: str = "voltage"
    perp0: np.ndarray | None = None
    nfev: int = 0
    status: str = "ok"
    events: list = field(default_factory=list)

    def __len__(self):
        return len(self.times)

    @property
    def final(self):
        return self.states[-1]

    def perp_deviation(self, t):
        """V_perp(t) minus its equilibrium, on the nodes (flattened)."""
        if self.perp0 is None:
            return 0.0
        return _perp_decay(self.model, self.perp0, t)

    def field(self, i: int):
        """V at sample i, shape (p, n)."""
        m = self.model
        if self.variant == "activity":
            flat = _activity_drive(m, self.states[i])
        else:
            flat = m.potential_flat(self.states[i]) + self.perp_deviation(self.times[i])
        return np.reshape(flat, m.shape)

    def norms(self):
        return np.array([self.model.norm(self.field(i)) for i in range(len(self))])

    def speeds(self):
        rhs = vector_field(self.model, variant=self.variant, perp0=self.perp0)
        return np.array([np.linalg.norm(rhs(t, y)) for t, y in zip(self.times, self.states)])


def _tau_flat(model):
    tau = np.atleast_1d(np.asarray(model.tau, dtype=float))
    if tau.size == 1:
        return float(tau[0])
    return np.repeat(tau, model.grid.size)


def _perp_decay(model, perp0, t):
    return perp0 * np.exp(-t / _tau_flat(model))


def _activity_drive(model, a):
    """V = J.A + eps I + mu theta in terms of a = <Y, A>."""
    X = model._flat[0]
    drive = (model.eps * model._field(model.input) + model.mu * model._field(model.theta)).ravel()
    return np.asarray(a) @ X + drive


def vector_field(model: FieldModel, variant: str | None = None, perp0=None):
    """Right-hand side f(t, y) of the reduced ODE."""
    variant = variant or model.variant
    _, Yw, _, _ = model._flat
    tau = model.tau_coords
    lam = model.lam
    const = model.constant()

    if variant == "activity":

        def f(t, a):
            V = _activity_drive(model, a)
            return (-a + model.sigmoid(lam * V) @ Yw.T) / tau

        return f

    if perp0 is None:

        def f(t, v):
            return -model.residual(v) / tau

        return f

    def f(t, v):
        V = model.potential_flat(v) + _perp_decay(model, perp0, t)
        return (-v + model.sigmoid.shifted(lam * V) @ Yw.T + const) / tau

    return f


def integrate(
    model: FieldModel,
    y0,
    t_end: float,
    rtol: float = RTOL,
    atol: float = ATOL,
    perp0=None,
    n_samples: int = 201,
    t_eval=None,
    events=None,
    method: str = "RK45",
) -> Trajectory:
    """Integrate the reduced ODE from ``y0`` up to ``t_end``.

    ``perp0`` (nodes, flattened over populations) is an initial deviation of
    V_perp from its equilibrium; it must be orthogonal to span{X_k}.
    Raises IntegrationError (with the partial trajectory) when the
    integrator fails.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (model.rank,):
        raise ValueError(f"initial state must have {model.rank} coordinates")
    variant = model.variant
    if perp0 is not None:
        if variant == "activity":
            raise ValueError("perp0 applies to the voltage form only")
        perp0 = np.asarray(perp0, dtype=float).ravel()
        coef, _ = model.split(perp0.reshape(model.shape))
        if np.linalg.norm(coef) > 1e-8 * max(1.0, np.linalg.norm(perp0)):
            raise ValueError("perp0 has a component inside span{X_k}")
    if t_eval is None:
        t_eval = np.linspace(0.0, t_end, n_samples)
    f = vector_field(model, variant, perp0)
    sol = solve_ivp(f, (0.0, t_end), y0, method=method, rtol=rtol, atol=atol, t_eval=t_eval, events=events)
    traj = Trajectory(
        model=model,
        times=sol.t,
        states=sol.y.T,
        variant=variant,
        perp0=perp0,
        nfev=sol.nfev,
        status="ok" if sol.status >= 0 else "failed",
        events=[np.asarray(e) for e in sol.t_events] if sol.t_events is not None else [],
    )
    if sol.status < 0:
        raise IntegrationError(sol.message, partial=traj)
    if sol.status == 1:
        traj.status = "event"
    return traj


def nearest_equilibrium(traj: Trajectory, solutions, tol: float = 1e-4):
    """Index of the equilibrium closest to the end point (None when farther than ``tol``)."""
    if len(solutions) == 0:
        return None
    d = np.max(np.abs(np.asarray(solutions) - traj.final), axis=1)
    i = int(np.argmin(d))
    return i if d[i] < tol else None


# absorbing ball ------------------------------------------------------------


def absorbing_radius(model: FieldModel):
    """(R, delta) of the absorbing ball for the voltage form.

    With |dV/dt + V/tau| <= C/tau_min, C = |J|*sup|S0 + mu S(0)| sqrt(p|Omega|)
    + |eps I + mu theta|, the radius is R = 2 tau_max C/tau_min and
    d|V|^2/dt <= -2 delta on its boundary with delta = 2 tau_max (C/tau_min)^2.
    """
    tau = np.atleast_1d(np.asarray(model.tau, dtype=float))
    tmax, tmin = tau.max(), tau.min()
    s0 = model.sigmoid.s0
    shift = (1.0 - model.mu) * s0
    sup = max(abs(1.0 - shift), abs(shift))
    measure = math.sqrt(model.populations * model.grid.weights.sum())
    J = model.kernel.operator_norm() * sup * measure
    I = model.norm(model.eps * model._field(model.input) + model.mu * model._field(model.theta))
    C = (J + I) / tmin
    return 2.0 * tmax * C, 2.0 * tmax * C**2


def entry_time(model: FieldModel, v0, perp0=None, margin: float = 2.0, rtol: float = RTOL, atol: float = ATOL):
    """First time |V(t)| reaches R, with the bound (|V0|^2 - R^2) / (2 delta).

    Returns (t_entry, bound); t_entry is 0 when V0 already lies in the ball
    and inf when no crossing occurred before ``margin * bound``.
    """
    R, delta = absorbing_radius(model)
    perp = None if perp0 is None else np.asarray(perp0, dtype=float).ravel()

    def norm_at(t, v):
        V = model.potential_flat(v) + (0.0 if perp is None else _perp_decay(model, perp, t))
        return model.norm(V.reshape(model.shape))

    n0 = norm_at(0.0, np.asarray(v0, dtype=float))
    bound = (n0**2 - R**2) / (2.0 * delta)
    if n0 <= R:
        return 0.0, bound

    def event(t, v):
        return norm_at(t, v) - R

    event.terminal = True
    traj = integrate(model, v0, margin * bound, rtol=rtol, atol=atol, perp0=perp, n_samples=2, events=event)
    hits = traj.events[0] if traj.events else []
    return (float(hits[0]) if len(hits) else math.inf), bound


# energies -----------------------------------------------------------------


def _symmetric_signs(model: FieldModel, tol: float = 1e-12):
    """Signs e_k with Y_k = e_k X_k, or None when the kernel lacks that structure."""
    X = model.kernel.X.reshape(model.rank, -1)
    Y = model.kernel.Y.reshape(model.rank, -1)
    signs = []
    for x, y in zip(X, Y):
        scale = max(np.abs(x).max(), 1e-300)
        if np.abs(y - x).max() <= tol * scale:
            signs.append(1.0)
        elif np.abs(y + x).max() <= tol * scale:
            signs.append(-1.0)
        else:
            return None
    return np.array(signs)


def _require_symmetric(model):
    signs = _symmetric_signs(model)
    if signs is None:
        raise ValueError("the energy needs a kernel of the form sum_k e_k X_k (x) X_k")
    if model.variant != "voltage":
        raise ValueError("the energy is defined for the voltage form")
    return signs


def energy(model: FieldModel, v) -> float:
    """E(v) = -|v|^2/(2 tau) + (1/(tau lam)) int Sbar0(lam W) + <c, v>/tau.

    W = sum_k e_k v_k X_k (plus the constant orthogonal offset), Sbar0 is
    the primitive of S0 vanishing at 0 and c the constant of the reduced
    equation. Its gradient is the vector field only when every sign e_k is
    +1; otherwise the two differ in the components with e_k = -1. At
    lam = 0 the integral term takes its limit 0.
    """
    signs = _require_symmetric(model)
    if np.ptp(model.tau_coords) > 0:
        raise ValueError("the energy needs a single time constant")
    tau = float(model.tau_coords[0])
    v = np.asarray(v, dtype=float)
    lam = model.lam
    quad = -0.5 * v @ v / tau + model.constant() @ v / tau
    if lam == 0:
        return float(quad)
    W = model.potential_flat(signs * v)
    w = np.tile(model.grid.weights, model.populations)
    return float(quad + w @ model.sigmoid.primitive_shifted(lam * W) / (tau * lam))


def hopfield_energy(model: FieldModel, v) -> float:
    """Lyapunov function of the voltage flow for kernels sum_k e_k X_k (x) X_k.

    With u = S0(lam V) and D the constant drive,
    H = -<u, J u>/2 - <D, u> + <V, u> - (1/lam) int Sbar0(lam V),
    and dH/dt = -tau lam int S0'(lam V) |dV/dt|^2 <= 0.
    """
    signs = _require_symmetric(model)
    lam = model.lam
    if lam <= 0:
        raise ValueError("the Hopfield energy needs lam > 0")
    v = np.asarray(v, dtype=float)
    X = model._flat[0]
    w = np.tile(model.grid.weights, model.populations)
    V = model.potential_flat(v)
    u = model.sigmoid.shifted(lam * V)
    proj = X @ (w * u)
    D = model.constant() @ X + model.offset()
    return float(
        -0.5 * signs @ proj**2 - w @ (D * u) + w @ (V * u) - w @ model.sigmoid.primitive_shifted(lam * V) / lam
    )


def _fd_gradient(fun, v, h):
    g = np.empty_like(v)
    for k in range(v.size):
        e = np.zeros_like(v)
        e[k] = h
        g[k] = (fun(v + e) - fun(v - e)) / (2 * h)
    return g


def gradient_check(model: FieldModel, v, h: float = 1e-6) -> float:
    """max_k |f_k(v) - dE/dv_k| with the gradient taken by central differences."""
    v = np.asarray(v, dtype=float)
    rhs = vector_field(model, "voltage")(0.0, v)
    grad = _fd_gradient(lambda x: energy(model, x), v, h)
    return float(np.max(np.abs(rhs - grad)))


def monotone_violation(values, increasing: bool = True) -> float:
    """Largest step against the expected direction (0 when monotone)."""
    d = np.diff(np.asarray(values, dtype=float))
    if not increasing:
        d = -d
    return float(max(0.0, -d.min())) if d.size else 0.0


def energy_along(traj: Trajectory, kind: str = "hopfield"):
    fn = hopfield_energy if kind == "hopfield" else energy
    return np.array([fn(traj.model, y) for y in traj.states])


def recurrence(traj: Trajectory, tol: float = 1e-6, speed_tol: float = 1e-5, min_arc: float | None = None):
    """Pairs of samples (i, j), j > i, where the trajectory comes back within ``tol``.

    Only returns with speed above ``speed_tol`` at both samples and an arc
    length of at least ``min_arc`` (default 10 tol) in between count, so a
    trajectory settling on an equilibrium is not a recurrence.
    """
    y = np.asarray(traj.states)
    if min_arc is None:
        min_arc = 10.0 * tol
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(y, axis=0), axis=1))])
    speed = traj.speeds()
    pairs = cKDTree(y).query_pairs(tol, p=np.inf, output_type="ndarray")
    out = []
    for i, j in pairs:
        i, j = min(i, j), max(i, j)
        if arc[j] - arc[i] >= min_arc and speed[i] > speed_tol and speed[j] > speed_tol:
            out.append((int(i), int(j)))
    return sorted(out)
