"""Stationary states: Newton's method, multistart enumeration and the degree audit."""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .model import FieldModel

logger = logging.getLogger(__name__)

DEDUPE_TOL = 1e-6
SINGULAR_TOL = 1e-9
MARGINAL_TOL = 1e-8


class NewtonFailure(RuntimeError):
    """Newton's method did not reach the requested tolerance."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


def newton(model: FieldModel, v0, tol: float = 1e-10, max_iter: int = 50, full_output: bool = False):
    """Damped Newton iteration on the reduced residual.

    Returns the converged state (and the iteration count when
    ``full_output``). Raises NewtonFailure on non-convergence, non-finite
    iterates or a singular Jacobian without damping progress.
    """
    v = np.array(v0, dtype=float)
    r = model.residual(v)
    nr = np.linalg.norm(r)
    for it in range(max_iter + 1):
        if nr < tol:
            return (v, it) if full_output else v
        if it == max_iter:
            break
        try:
            dv = np.linalg.solve(model.jacobian(v), r)
        except np.linalg.LinAlgError:
            dv, *_ = np.linalg.lstsq(model.jacobian(v), r, rcond=None)
        step = 1.0
        while True:
            trial = v - step * dv
            if np.all(np.isfinite(trial)):
                rt = model.residual(trial)
                nt = np.linalg.norm(rt)
                if nt < (1 - 1e-4 * step) * nr:
                    break
            step *= 0.5
            if step < 1e-6:
                raise NewtonFailure(f"no damping progress at |r| = {nr:.3g}", last=v)
        v, r, nr = trial, rt, nt
    raise NewtonFailure(f"no convergence after {max_iter} iterations (|r| = {nr:.3g})", last=v)


def newton_batch(model: FieldModel, V0, tol: float = 1e-10, max_iter: int = 60):
    """Vectorized damped Newton from many starts at once.

    Returns (states, converged mask, residual norms).
    """
    v = np.array(V0, dtype=float)
    r = model.residual(v)
    nr = np.linalg.norm(r, axis=1)
    active = nr >= tol
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        va, ra, na = v[idx], r[idx], nr[idx]
        Jm = model.jacobian(va)
        try:
            dv = np.linalg.solve(Jm, ra[..., None])[..., 0]
        except np.linalg.LinAlgError:
            dv = np.stack([np.linalg.lstsq(J, b, rcond=None)[0] for J, b in zip(Jm, ra)])
        step = np.ones(idx.size)
        accepted = np.zeros(idx.size, dtype=bool)
        new_v, new_r, new_n = va.copy(), ra.copy(), na.copy()
        for _ in range(20):
            todo = ~accepted
            if not todo.any():
                break
            trial = va[todo] - step[todo, None] * dv[todo]
            finite = np.all(np.isfinite(trial), axis=1)
            trial[~finite] = va[todo][~finite]
            rt = model.residual(trial)
            nt = np.linalg.norm(rt, axis=1)
            ok = finite & (nt < (1 - 1e-4 * step[todo]) * na[todo])
            where = np.flatnonzero(todo)[ok]
            new_v[where], new_r[where], new_n[where] = trial[ok], rt[ok], nt[ok]
            accepted[where] = True
            step[todo & ~accepted] *= 0.5
        v[idx], r[idx], nr[idx] = new_v, new_r, new_n
        stalled = idx[~accepted]
        active[stalled] = False
        active &= nr >= tol
    return v, nr < tol, nr


def polish(model: FieldModel, states, steps: int = 6):
    """A few undamped Newton steps per state, keeping the smallest residual.

    Near-singular Jacobians make a converged state uncertain by about
    tol / sigma_min; driving the residual to rounding level first keeps
    deduplication from splitting one root into several.
    """
    best = np.array(states, dtype=float)
    if best.size == 0:
        return best
    best_n = np.linalg.norm(model.residual(best), axis=1)
    v = best.copy()
    for _ in range(steps):
        try:
            v = v - np.linalg.solve(model.jacobian(v), model.residual(v)[..., None])[..., 0]
        except np.linalg.LinAlgError:
            break
        ok = np.all(np.isfinite(v), axis=1)
        v[~ok] = best[~ok]
        n = np.linalg.norm(model.residual(v), axis=1)
        better = n < best_n
        best[better], best_n[better] = v[better], n[better]
    return best


def picard(model: FieldModel, v0, n_iter: int = 30):
    """Fixed-point iterates v <- <Y, S0(lam V(v))> + const and their contraction ratios.

    Ratios are |V_{k+1} - V_k| / |V_k - V_{k-1}| in the L2 norm of the field.
    """
    _, Yw, _, _ = model._flat
    X = model._flat[0]
    const = model.constant()
    v = np.array(v0, dtype=float)
    iterates = [v]
    for _ in range(n_iter):
        v = model.sigmoid.shifted(model.lam * model.potential_flat(v)) @ Yw.T + const
        iterates.append(v)
    iterates = np.array(iterates)
    steps = np.diff(iterates, axis=0) @ X
    w = np.tile(model.grid.weights, model.populations)
    norms = np.sqrt(np.sum(steps**2 * w, axis=1))
    ok = norms[:-1] > 1e-13
    ratios = norms[1:][ok] / norms[:-1][ok]
    return iterates, ratios


def dedupe(states, tol: float = DEDUPE_TOL):
    """Sort lexicographically and keep states farther than ``tol`` (max norm) apart."""
    states = np.asarray(states, dtype=float)
    if states.size == 0:
        return states.reshape(0, states.shape[-1] if states.ndim == 2 else 0)
    order = np.lexsort(states.T[::-1])
    kept = []
    for s in states[order]:
        if all(np.max(np.abs(s - k)) >= tol for k in kept):
            kept.append(s)
    kept = np.array(kept)
    return kept[np.lexsort(kept.T[::-1])]


@dataclass
class StabilityRecord:
    eigenvalues: np.ndarray
    n_unstable: int
    label: str
    marginal: bool


def classify(model: FieldModel, v, tol: float = MARGINAL_TOL) -> StabilityRecord:
    """Eigenvalues of the dynamics linearization and a node/saddle/focus label."""
    ev = np.linalg.eigvals(model.dynamics_jacobian(v))
    ev = ev[np.lexsort((-ev.imag, -ev.real))]
    marginal = bool(np.any(np.abs(ev.real) <= tol))
    n_unstable = int(np.sum(ev.real > tol))
    complex_part = bool(np.any(np.abs(ev.imag) > tol))
    if marginal:
        label = "inconclusive"
    elif n_unstable == 0:
        label = "stable focus" if complex_part else "stable node"
    elif n_unstable == ev.size:
        label = "unstable focus" if complex_part else "unstable node"
    else:
        label = "saddle-focus" if complex_part else "saddle"
    return StabilityRecord(eigenvalues=ev, n_unstable=n_unstable, label=label, marginal=marginal)


def degree_sign(model: FieldModel, v, tol: float = SINGULAR_TOL) -> int:
    """sign det of the residual Jacobian; 0 when it is numerically singular."""
    Jm = model.jacobian(v)
    smin = np.linalg.svd(Jm, compute_uv=False)[-1]
    if smin < tol:
        return 0
    return int(np.sign(np.linalg.det(Jm)))


@dataclass
class SolutionSet:
    """Distinct stationary states found at one parameter point."""

    params: tuple
    solutions: np.ndarray
    n_unstable: np.ndarray
    det_signs: np.ndarray
    residuals: np.ndarray
    dedupe_tol: float = DEDUPE_TOL
    n_starts: int = 0
    n_failed: int = 0
    labels: list = field(default_factory=list)

    def __len__(self):
        return len(self.solutions)

    @property
    def regular(self) -> bool:
        return bool(np.all(self.det_signs != 0))

    @property
    def degree(self) -> int:
        return int(np.sum(self.det_signs))

    @property
    def odd(self) -> bool:
        return len(self) % 2 == 1


def solution_set(model: FieldModel, states, dedupe_tol=DEDUPE_TOL, n_starts=0, n_failed=0):
    states = dedupe(states, dedupe_tol)
    records = [classify(model, s) for s in states]
    return SolutionSet(
        params=(model.lam, model.mu, model.eps),
        solutions=states,
        n_unstable=np.array([r.n_unstable for r in records], dtype=int),
        det_signs=np.array([degree_sign(model, s) for s in states], dtype=int),
        residuals=np.array([np.linalg.norm(model.residual(s)) for s in states]),
        dedupe_tol=dedupe_tol,
        n_starts=n_starts,
        n_failed=n_failed,
        labels=[r.label for r in records],
    )


def sobol_starts(model: FieldModel, n_starts: int, seed: int = 0):
    """Scrambled Sobol points filling the box that contains every stationary state."""
    center, half = model.coordinate_box()
    m = max(0, math.ceil(math.log2(max(n_starts, 1))))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        u = qmc.Sobol(d=model.rank, scramble=True, seed=seed).random_base2(m)[:n_starts]
    return center + (2.0 * u - 1.0) * half


def enumerate_solutions(
    model: FieldModel,
    n_starts: int | None = None,
    seed: int = 0,
    tol: float = 1e-10,
    dedupe_tol: float = DEDUPE_TOL,
    threads: int = 1,
    extra_starts=None,
) -> SolutionSet:
    """Multistart Newton over the a priori box, polished and deduplicated, with stability and degree signs."""
    if n_starts is None:
        n_starts = 512 * model.rank
    if n_starts < 1:
        raise ValueError("n_starts must be positive")
    starts = sobol_starts(model, n_starts, seed)
    if extra_starts is not None:
        starts = np.vstack([starts, np.atleast_2d(extra_starts)])
    chunk = max(1, int(4e6 // (model.rank * model.populations * model.grid.size + model.rank**2)))
    pieces = [starts[i : i + chunk] for i in range(0, len(starts), chunk)]

    def run(piece):
        return newton_batch(model, piece, tol=tol)

    if threads > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, pieces))
    else:
        results = [run(p) for p in pieces]
    states = np.vstack([r[0][r[1]] for r in results]) if results else np.zeros((0, model.rank))
    states = polish(model, states)
    n_failed = int(sum((~r[1]).sum() for r in results))
    logger.debug("enumeration: %d/%d starts converged", len(states), len(starts))
    return solution_set(model, states, dedupe_tol, n_starts=len(starts), n_failed=n_failed)


@dataclass(frozen=True)
class ParityReport:
    signs: tuple
    total: int
    count: int
    conclusive: bool

    @property
    def odd(self) -> bool:
        return self.count % 2 == 1

    @property
    def ok(self) -> bool:
        """Degree one: the signs sum to +1 (only meaningful when conclusive)."""
        return self.conclusive and self.total == 1


def parity_audit(solutions: SolutionSet, model: FieldModel | None = None) -> ParityReport:
    """Check that sign det(Jacobian) sums to +1 over the solution set.

    A different sum on a regular set means at least one solution was missed.
    Solutions with a numerically singular Jacobian make the audit inconclusive.
    """
    if model is not None:
        signs = np.array([degree_sign(model, s) for s in solutions.solutions], dtype=int)
    else:
        signs = np.asarray(solutions.det_signs, dtype=int)
    conclusive = bool(np.all(signs != 0))
    report = ParityReport(
        signs=tuple(int(s) for s in signs),
        total=int(signs.sum()),
        count=len(signs),
        conclusive=conclusive,
    )
    if conclusive and report.total != 1:
        logger.warning("parity audit failed: signs sum to %d over %d solutions", report.total, report.count)
    return report
