"""Ready-made models: the orientation ring and the two-population plane model.

Ring
    One population on (-pi/2, pi/2) with measure dx/pi and kernel
    J0 + J1 cos(alpha (x - y)) = eps0 1 x 1 + eps1 |J1| (cos_a x cos_a + sin_a x sin_a),
    where cos_a(x) = cos(alpha x), J0 = eps0 = +-1 and eps1 = sign(J1). The
    input is 1 - beta + beta cos(alpha (x - x0)).

Two populations
    Excitatory/inhibitory pair on [-1, 1]^2 with Gaussian-like connectivity
    approximated by bell-shaped separable factors
    J_ij(r, r') = C_ij + (1 - |r|^2)^a_ij (1 - |r'|^2)^a'_ij P_ij(<r, r'>),
    P_ij a Taylor polynomial of s_ij exp(<r, r'>/sigma_ij) in each axis.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import sympy

from . import quadrature
from .model import FieldModel
from .pg_kernel import PGKernel
from .sigmoid import Logistic

logger = logging.getLogger(__name__)

X_SYM, Y_SYM = sympy.symbols("x y")


# ---------------------------------------------------------------------------
# ring model


@dataclass(frozen=True)
class RingParams:
    J0: float = -1.0
    J1: float = 1.5
    alpha: float = 2.2
    beta: float = 0.1
    x0: float = 0.0
    theta: float = 0.1
    tau: float = 1.0
    lam: float = 0.0
    mu: float = 0.0
    eps: float = 0.0
    n: int = 64

    def __post_init__(self):
        if abs(abs(self.J0) - 1.0) > 1e-12:
            raise ValueError(f"J0 must be +1 or -1, got {self.J0}")
        if abs(self.alpha - 2.0) < 1e-12:
            raise ValueError(
                "alpha = 2 makes the kernel equivariant under rotations; the bifurcations "
                "are then of equivariant type and are not handled here"
            )
        if self.J1 == 0:
            raise ValueError("J1 must be nonzero")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")


def ring_integrals(alpha: float):
    """Closed forms of <1, cos_a>, <1, cos_a^2>, <1, sin_a^2> for the measure dx/pi."""
    c1 = 2.0 * math.sin(alpha * math.pi / 2) / (alpha * math.pi)
    h = math.sin(alpha * math.pi) / (2.0 * alpha * math.pi)
    return c1, 0.5 + h, 0.5 - h


def ring_K(params: RingParams) -> np.ndarray:
    """Coordinate matrix K[j, k] = <Y_j, X_k> of the ring kernel, closed form."""
    e0 = float(np.sign(params.J0))
    e1 = float(np.sign(params.J1))
    a1 = abs(params.J1)
    c1, cc, ss = ring_integrals(params.alpha)
    r = math.sqrt(a1)
    return np.array(
        [
            [e0, e0 * r * c1, 0.0],
            [e1 * r * c1, e1 * a1 * cc, 0.0],
            [0.0, 0.0, e1 * a1 * ss],
        ]
    )


def ring_input_coords(params: RingParams) -> np.ndarray:
    """Coordinates of 1 - beta + beta cos(alpha (x - x0)) on (1, sqrt|J1| cos_a, sqrt|J1| sin_a)."""
    r = math.sqrt(abs(params.J1))
    a, b, x0 = params.alpha, params.beta, params.x0
    return np.array([1.0 - b, b * math.cos(a * x0) / r, b * math.sin(a * x0) / r])


def build_ring(params: RingParams | None = None, **overrides) -> FieldModel:
    """Ring model as a rank-3 PG kernel with its input and threshold."""
    if params is None:
        params = RingParams(**overrides)
    elif overrides:
        params = RingParams(**{**params.__dict__, **overrides})
    grid = quadrature.build(1, params.n, (-math.pi / 2, math.pi / 2), 1.0 / math.pi)
    x = X_SYM
    e0 = int(np.sign(params.J0))
    e1 = int(np.sign(params.J1))
    r = sympy.sqrt(sympy.nsimplify(abs(params.J1)))
    a = sympy.nsimplify(params.alpha)
    X = [sympy.Integer(1), r * sympy.cos(a * x), r * sympy.sin(a * x)]
    Y = [e0 * X[0], e1 * X[1], e1 * X[2]]
    kernel = PGKernel.from_expressions(X, Y, grid, variables=(x,))

    nodes = grid.nodes[:, 0]
    I = 1.0 - params.beta + params.beta * np.cos(params.alpha * (nodes - params.x0))
    return FieldModel(
        kernel=kernel,
        sigmoid=Logistic(),
        lam=params.lam,
        mu=params.mu,
        eps=params.eps,
        input=I[None, :],
        theta=np.array([params.theta]),
        tau=params.tau,
        name="ring",
    )


def ring_rhs(params: RingParams, v, n: int | None = None):
    """Hand-written reduced vector field of the ring (times tau), for cross-checks.

    Returns -v + eps0 <S0(lam V), 1> + eps I1 + mu (theta + eps0/2) and the
    matching cos and sin components, with V = v1 + v2 sqrt|J1| cos_a + v3 sqrt|J1| sin_a.
    """
    n = n or params.n
    t, w = np.polynomial.legendre.leggauss(n)
    x = t * math.pi / 2
    w = w / 2.0
    a, r = params.alpha, math.sqrt(abs(params.J1))
    e0, e1 = np.sign(params.J0), np.sign(params.J1)
    v = np.asarray(v, dtype=float)
    V = v[0] + v[1] * r * np.cos(a * x) + v[2] * r * np.sin(a * x)
    S0 = 1.0 / (1.0 + np.exp(-params.lam * V)) - 0.5
    c1 = 2.0 * math.sin(a * math.pi / 2) / (a * math.pi)
    I = ring_input_coords(params)
    mu, eps, th = params.mu, params.eps, params.theta
    return np.array(
        [
            -v[0] + e0 * np.sum(w * S0) + eps * I[0] + mu * (th + e0 / 2),
            -v[1] + e1 * r * np.sum(w * S0 * np.cos(a * x)) + eps * I[1] + mu * e1 * r * c1 / 2,
            -v[2] + e1 * r * np.sum(w * S0 * np.sin(a * x)) + eps * I[2],
        ]
    )


def pitchfork_count_table(J1: float = 1.5, alpha: float = 2.2):
    """Number of admissible (positive) trivial-branch candidates per (eps0, eps1)."""
    table = {}
    for e0 in (-1, 1):
        for e1 in (-1, 1):
            K = ring_K(RingParams(J0=e0, J1=e1 * abs(J1), alpha=alpha))
            sig = np.linalg.eigvals(K)
            table[(e0, e1)] = int(np.sum((np.abs(sig.imag) < 1e-12) & (sig.real > 1e-12)))
    return table


# ---------------------------------------------------------------------------
# two-population model


@dataclass(frozen=True)
class TwoPopParams:
    a: float = 10.0
    b: float = 15.0
    c: float = 12.75
    exponents: tuple = ((3.0, 2.0), (2.0, 4.0))
    exponents_prime: tuple | None = None
    sigmas: tuple | None = None
    order: int = 4
    decay: tuple = (0.5, 0.5)
    threshold: float = 1.3
    C: tuple = ((0.0, 0.0), (0.0, 0.0))
    lam: float = 0.0
    mu: float = 0.0
    eps: float = 0.0
    n: int = 32

    def __post_init__(self):
        for row in self.exponents + (self.exponents_prime or ()):
            for e in row:
                if e <= 0.5:
                    raise ValueError(
                        f"exponent {e} <= 1/2: the kernel derivatives are not square integrable"
                    )
        if self.order < 0:
            raise ValueError("Taylor order must be nonnegative")
        if min(self.a, self.b, self.c) <= 0:
            raise ValueError("connection strengths must be positive")
        if min(self.decay) <= 0:
            raise ValueError("decay rates must be positive")

    @property
    def widths(self):
        """sigma_ij, by default 1/a_ij."""
        if self.sigmas is not None:
            return self.sigmas
        return tuple(tuple(1.0 / e for e in row) for row in self.exponents)

    @property
    def signed_strengths(self):
        """s_ij: excitatory columns positive, inhibitory negative."""
        return ((self.a, -self.b), (self.b, -self.c))


def twopop_factors(params: TwoPopParams):
    """Symbolic (X, Y) factor tables of the two-population kernel.

    For every block (i, j) and 0 <= p, q <= order the factor pair is
    X = e_i (1 - |r|^2)^a_ij x^p y^q and
    Y = e_j s_ij / (d_i p! q! sigma^(p+q)) (1 - |r'|^2)^a'_ij x'^p y'^q,
    which reproduces s_ij bell(r) bell(r') T(x x'/sigma) T(y y'/sigma) with T the
    Taylor polynomial of exp, after the rescaling of row i by 1/d_i.
    Constant blocks C_ij add one more pair each when nonzero.
    """
    x, y = X_SYM, Y_SYM
    expo = params.exponents
    expo_p = params.exponents_prime or expo
    bell = 1 - x**2 - y**2
    X, Y = [], []
    S = params.signed_strengths
    for i in range(2):
        for j in range(2):
            sig = sympy.nsimplify(params.widths[i][j])
            scale = sympy.nsimplify(S[i][j]) / sympy.nsimplify(params.decay[i])
            ai = sympy.nsimplify(expo[i][j])
            aj = sympy.nsimplify(expo_p[i][j])
            for p in range(params.order + 1):
                for q in range(params.order + 1):
                    mono = x**p * y**q
                    xf = [0, 0]
                    yf = [0, 0]
                    xf[i] = bell**ai * mono
                    coef = scale / (sympy.factorial(p) * sympy.factorial(q) * sig ** (p + q))
                    yf[j] = coef * bell**aj * mono
                    X.append(xf)
                    Y.append(yf)
            if params.C[i][j] != 0:
                xf, yf = [0, 0], [0, 0]
                xf[i] = sympy.Integer(1)
                yf[j] = sympy.nsimplify(params.C[i][j]) / sympy.nsimplify(params.decay[i])
                X.append(xf)
                Y.append(yf)
    return X, Y


def build_twopop(params: TwoPopParams | None = None, **overrides) -> FieldModel:
    """Two-population model on [-1, 1]^2 (rank 4 (order+1)^2 at C = 0)."""
    if params is None:
        params = TwoPopParams(**overrides)
    elif overrides:
        params = TwoPopParams(**{**params.__dict__, **overrides})
    grid = quadrature.build(2, params.n, (-1.0, 1.0), 1.0)
    X, Y = twopop_factors(params)
    kernel = PGKernel.from_expressions(X, Y, grid, variables=(X_SYM, Y_SYM))
    return FieldModel(
        kernel=kernel,
        sigmoid=Logistic(shift=params.threshold),
        lam=params.lam,
        mu=params.mu,
        eps=params.eps,
        input=None,
        theta=None,
        tau=tuple(1.0 / d for d in params.decay),
        name="twopop",
    )


def twopop_kernel_value(params: TwoPopParams, r, rp):
    """Direct evaluation of the truncated kernel at point pairs, shape (n, 2, 2)."""
    r = np.atleast_2d(r)
    rp = np.atleast_2d(rp)
    expo = params.exponents
    expo_p = params.exponents_prime or expo
    S = params.signed_strengths
    out = np.zeros((r.shape[0], 2, 2))
    b1 = 1 - np.sum(r**2, axis=1)
    b2 = 1 - np.sum(rp**2, axis=1)
    for i in range(2):
        for j in range(2):
            sig = params.widths[i][j]
            tx = sum((r[:, 0] * rp[:, 0] / sig) ** k / math.factorial(k) for k in range(params.order + 1))
            ty = sum((r[:, 1] * rp[:, 1] / sig) ** k / math.factorial(k) for k in range(params.order + 1))
            out[:, i, j] = (
                params.C[i][j] + S[i][j] * b1 ** expo[i][j] * b2 ** expo_p[i][j] * tx * ty
            ) / params.decay[i]
    return out


def twopop_fourier_predictions(params: TwoPopParams | None = None, max_mode: int = 3, n: int = 64):
    """Eigenvalues of the 2 x 2 mode matrices of the ideal Gaussian convolution kernel.

    For the kernel s_ij exp(-|r - r'|^2 / (2 sigma_ij)) the cosines
    cos(pi (n1 x + n2 y)) are approximate eigenfunctions; each mode n gives
    the matrix [[a G1(n), -b G2(n)], [b G2(n), -c G3(n)]] / d with G the
    cosine transform of the Gaussian on [-2, 2]^2 (the range of r - r').
    Returns a list of (mode, eigenvalues, hopf_relevant).
    """
    params = params or TwoPopParams()
    grid = quadrature.build(2, n, (-2.0, 2.0), 1.0)
    u, v = grid.coords
    out = []
    sig = params.widths
    d = np.asarray(params.decay)
    for n1 in range(max_mode + 1):
        for n2 in range(max_mode + 1):
            c = np.cos(np.pi * (n1 * u + n2 * v))

            def G(s):
                return float(np.sum(grid.weights * np.exp(-(u**2 + v**2) / (2 * s)) * c))

            m = np.array(
                [
                    [params.a * G(sig[0][0]), -params.b * G(sig[0][1])],
                    [params.b * G(sig[1][0]), -params.c * G(sig[1][1])],
                ]
            ) / d[:, None]
            ev = np.linalg.eigvals(m)
            out.append(((n1, n2), ev, bool(np.any(np.abs(ev.imag) > 1e-12))))
    return out
