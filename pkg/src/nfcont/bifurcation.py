"""Local bifurcation theory at the trivial state.

At mu = eps = 0 the zero state solves the stationary equation for every
slope, and its linearization -Id + lam s1 J loses stability at
lam_n = 1 / (s1 sigma_n) for each real eigenvalue sigma_n > 0 of J
(4 / sigma_n for the logistic). The Lyapunov-Schmidt coefficient

    chi_q = lam_n^(q-1) s_q / (q! s1) <e_n^q, e*_n>

with the smallest q >= 2 for which it is nonzero fixes the type
(q = 2 transcritical, q = 3 pitchfork) and, through its sign, the side on
which the bifurcated branch lives.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import quadrature
from .model import FieldModel
from .pg_kernel import SpectrumReport
from .sigmoid import LOGISTIC

logger = logging.getLogger(__name__)

CHI_TOL = 1e-10
ZERO_TOL = 1e-10


@dataclass
class Candidate:
    """One eigenvalue of J and what it predicts at the trivial state."""

    index: int
    sigma: complex
    simple: bool
    kind: str
    lam: float = math.nan
    q: int | None = None
    chi: float = math.nan
    orientation: str = ""
    label: str = ""
    lam_hopf_linear: float = math.nan
    lam_hopf_formula: float = math.nan
    inner: dict = field(default_factory=dict)


@dataclass
class BifurcationReport:
    model_name: str
    s: tuple
    candidates: list

    def admissible(self):
        """Simple real candidates with lam_n > 0, sorted by lam_n."""
        out = [c for c in self.candidates if c.kind in ("pitchfork", "transcritical", "degenerate")]
        return sorted(out, key=lambda c: c.lam)

    def hopf(self):
        return sorted((c for c in self.candidates if c.kind == "hopf-candidate"), key=lambda c: c.lam_hopf_linear)

    def stationary_lams(self):
        return [c.lam for c in self.admissible()]


def _parity_label(grid, e) -> str:
    """Reflection parity of an eigenfunction on a grid symmetric about the origin."""
    if not all(abs(a + b) < 1e-12 for a, b in grid.bounds):
        return ""
    n = grid.n
    f = np.asarray(e).reshape((e.shape[0],) + (n,) * grid.dim)
    scale = np.abs(f).max()
    parts = []
    for axis, name in zip(range(1, grid.dim + 1), "xy"):
        g = np.flip(f, axis=axis)
        if np.abs(g - f).max() < 1e-8 * scale:
            parts.append(f"{name}:even")
        elif np.abs(g + f).max() < 1e-8 * scale:
            parts.append(f"{name}:odd")
        else:
            parts.append(f"{name}:mixed")
    return " ".join(parts)


def _derivatives(model: FieldModel):
    return tuple(model.sigmoid.s(q) for q in (1, 2, 3))


def chi(model: FieldModel, n: int, q: int, spectrum: SpectrumReport | None = None) -> float:
    """chi_q for the n-th eigenvalue (in the spectrum's order)."""
    sp = spectrum or model.kernel.spectrum()
    if not sp.simple[n]:
        raise ValueError(f"eigenvalue {n} is not simple; chi is undefined")
    sigma = sp.eigenvalues[n]
    if abs(np.imag(sigma)) > 1e-12 or np.real(sigma) <= 0:
        raise ValueError(f"eigenvalue {sigma} is not real and positive")
    s1 = model.sigmoid.s(1)
    sq = model.sigmoid.s(q)
    if sq == 0:
        raise ValueError(f"s_{q} = 0 for this sigmoid; try a higher order q")
    lam_n = 1.0 / (s1 * float(np.real(sigma)))
    return lam_n ** (q - 1) * sq / (math.factorial(q) * s1) * _inner_power(model, sp, n, q)


def _inner_power(model, sp, n, q):
    e = np.real(sp.eigenfunction(n))
    es = np.real(sp.adjoint_eigenfunction(n))
    return float(quadrature.inner(e**q, es, model.grid))


def candidates(model: FieldModel, spectrum: SpectrumReport | None = None, max_q: int = 3) -> BifurcationReport:
    """Candidate bifurcation points of the trivial branch, with type and orientation."""
    sp = spectrum or model.kernel.spectrum()
    s1, s2, s3 = _derivatives(model)
    if s1 <= 0:
        raise ValueError("the sigmoid must be increasing at the origin")
    out = []
    eigenvalues = np.asarray(sp.eigenvalues, dtype=complex)
    zero = ZERO_TOL * (np.abs(eigenvalues).max() if eigenvalues.size else 0.0)
    for n, sigma in enumerate(eigenvalues):
        simple = bool(sp.simple[n])
        if abs(sigma) <= zero:
            out.append(Candidate(index=n, sigma=complex(sigma), simple=simple, kind="zero"))
            continue
        real = abs(sigma.imag) <= 1e-12 * max(1.0, abs(sigma))
        label = _parity_label(model.grid, np.real(sp.eigenfunction(n))) if real else ""
        if not real:
            if sigma.imag < 0 or sigma.real <= 0:
                continue
            out.append(
                Candidate(
                    index=n,
                    sigma=complex(sigma),
                    simple=simple,
                    kind="hopf-candidate",
                    lam_hopf_linear=1.0 / (s1 * sigma.real),
                    lam_hopf_formula=1.0 / (2.0 * s1 * sigma.real),
                )
            )
            continue
        if sigma.real <= 0:
            out.append(Candidate(index=n, sigma=complex(sigma), simple=simple, kind="inadmissible", label=label))
            continue
        lam_n = 1.0 / (s1 * sigma.real)
        if not simple:
            out.append(
                Candidate(index=n, sigma=complex(sigma), simple=False, kind="non-simple", lam=lam_n, label=label)
            )
            continue
        cand = Candidate(index=n, sigma=complex(sigma), simple=True, kind="degenerate", lam=lam_n, label=label)
        for q in range(2, max_q + 1):
            ip = _inner_power(model, sp, n, q)
            cand.inner[q] = ip
            if model.sigmoid.s(q) == 0 or abs(ip) < CHI_TOL:
                continue
            cand.q = q
            cand.chi = chi(model, n, q, sp)
            cand.kind = "transcritical" if q == 2 else "pitchfork"
            if q % 2 == 0:
                cand.orientation = "both sides"
            else:
                cand.orientation = "lam > lam_n" if cand.chi < 0 else "lam < lam_n"
            break
        out.append(cand)
    return BifurcationReport(model_name=model.name, s=(s1, s2, s3), candidates=out)


def reduced_roots(lam: float, sigma: float, chi_q: float, q: int, Ibar: float = 0.0, s1: float = 0.25):
    """Real roots x of (-1 + lam s1 sigma) x + chi x^q + Ibar = 0, with multiplicity.

    ``s1`` defaults to the logistic value 1/4, which gives -1 + lam sigma / 4.
    """
    if q not in (2, 3):
        raise ValueError("only q = 2 and q = 3 are supported")
    if chi_q == 0:
        raise ValueError("chi = 0: the truncated equation is degenerate")
    a = -1.0 + lam * s1 * sigma
    coeffs = [chi_q, 0.0, a, Ibar] if q == 3 else [chi_q, a, Ibar]
    roots = np.roots(coeffs)
    scale = max(1.0, float(np.max(np.abs(roots))))
    real = np.sort(roots[np.abs(roots.imag) <= 1e-7 * scale].real)
    return [float(r) for r in real]


def hopf_lambda(g1: float, s1: float = 0.25) -> float:
    """lam_H = 1 / (2 s1 g1) as stated for the excitatory-inhibitory pair."""
    if g1 <= 0:
        raise ValueError("g1 must be positive")
    return 1.0 / (2.0 * s1 * g1)


def hopf_l1(g1: float, g2: float, lam_H: float, sigmoid=LOGISTIC, z0: float = 0.0) -> float:
    """First Lyapunov coefficient of the excitatory-inhibitory Hopf point.

    l1 = -(lam_H^3 s2^2) / (4 omega^2 s1) (1 - sqrt(g1^2 + g2^2) s3 s1 / s2^2)
    with omega = sqrt(g1^2 + g2^2) / (2 g1) and s_k the sigmoid derivatives
    at ``z0``. With s2 = 0 the expression is degenerate: a warning is
    logged and 0 (the vanishing prefactor) is returned.
    """
    if g1 <= 0:
        raise ValueError("g1 must be positive (omega is undefined otherwise)")
    s1, s2, s3 = (float(sigmoid.deriv(z0, q)) for q in (1, 2, 3))
    r = math.hypot(g1, g2)
    omega = r / (2.0 * g1)
    if s2 == 0:
        logger.warning("s2 = 0: the Lyapunov coefficient formula is degenerate")
        return 0.0
    return -(lam_H**3 * s2**2) / (4.0 * omega**2 * s1) * (1.0 - r * s3 * s1 / s2**2)


def pitchfork_persistence(model: FieldModel, mu: float, ds: float = 0.02, tol: float = 1e-11, max_steps: int = 20000):
    """Pitchfork of the sin mode of the ring, followed in mu inside the plane v3 = 0.

    Solves H(v1, v2, lam; mu) = 0: the first two residual components at
    v3 = 0 and the entry dr3/dv3. The curve flattens in mu close to the
    Heaviside limit, so it is followed in arclength over (v1, v2, lam, mu)
    and finished with a Newton solve at the requested mu. Returns (v1, v2, lam).
    """
    if model.rank != 3:
        raise ValueError("pitchfork persistence is defined for the rank-3 ring model")
    if abs(model.eps * model.input_coords[2]) > 1e-14 or abs(model.theta_coords[2]) > 1e-14:
        raise ValueError("the sin component of the drive must vanish (v3 -> -v3 symmetry)")
    if mu < 0:
        raise ValueError("mu must be non-negative")
    s1 = model.sigmoid.s(1)
    K = model.kernel.coordinate_matrix
    eps = model.eps

    def H(z):
        p = (z[2], z[3], eps)
        v = np.array([z[0], z[1], 0.0])
        r = model.residual(v, p)
        return np.array([r[0], r[1], model.jacobian(v, p)[2, 2]])

    def DH(z):
        cols = []
        for j in range(4):
            dz = np.zeros(4)
            dz[j] = 1e-7 * max(1.0, abs(z[j]))
            cols.append((H(z + dz) - H(z - dz)) / (2 * dz[j]))
        return np.column_stack(cols)

    def polish(z, row, rhs):
        for _ in range(30):
            b = np.r_[H(z), row @ z - rhs]
            if np.linalg.norm(b) < tol:
                return z
            z = z - np.linalg.solve(np.vstack([DH(z), row]), b)
        raise RuntimeError(f"pitchfork persistence lost near mu = {z[3]:.4g}")

    z = np.array([0.0, 0.0, 1.0 / (s1 * K[2, 2]), 0.0])
    t = np.array([0.0, 0.0, 0.0, 1.0])
    e_mu = np.array([0.0, 0.0, 0.0, 1.0])
    for _ in range(max_steps):
        if z[3] >= mu:
            break
        step = min(ds, (mu - z[3]) / max(t[3], 1e-12)) if t[3] > 0 else ds
        zn = polish(z + step * t, t, t @ z + step)
        tn = np.linalg.solve(np.vstack([DH(zn), t]), e_mu)
        z, t = zn, tn / np.linalg.norm(tn)
    else:
        raise RuntimeError("pitchfork persistence did not reach the requested mu")
    z = polish(z, e_mu, mu)
    return float(z[0]), float(z[1]), float(z[2])


def turning_gap(branches, lam_L: float):
    """Smallest lam_T - lam_L over the turning points of ``branches`` (nan when none)."""
    lams = [sp.value for br in branches for sp in br.turning_points() if sp.active == "lam"]
    return min(lams) - lam_L if lams else math.nan
