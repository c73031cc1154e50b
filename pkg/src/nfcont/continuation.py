"""Pseudo-arclength continuation of stationary states.

A branch is a curve u = (v, p) in R^(N+1) solving r(v; p) = 0 with one
active parameter p among lam, mu and eps. The predictor follows the unit
tangent, the corrector is Newton on the bordered system

    [ r(v; p)            ]       [ J_v  J_p ]
    [ t.(u - u_pred)     ],      [   t^T    ],

and the tangent orientation is carried from step to step, so the sign of
the bordered determinant changes exactly at simple branch points while
the parameter component of the tangent changes sign at turning points.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .model import PARAMETERS, FieldModel
from .stationary import DEDUPE_TOL, NewtonFailure, dedupe

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContinuationConfig:
    ds: float = 0.02
    ds_min: float = 1e-5
    ds_max: float = 0.1
    max_steps: int = 20000
    tol: float = 1e-10
    max_corrector: int = 10
    slow_corrector: int = 5
    fast_corrector: int = 2
    shrink: float = 0.5
    grow: float = 1.3
    min_cos: float = 0.9
    locate_tol: float = 1e-10
    detect: bool = True
    stability: bool = True

    def __post_init__(self):
        if not 0 < self.ds_min <= self.ds <= self.ds_max:
            raise ValueError("need 0 < ds_min <= ds <= ds_max")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")


@dataclass
class SpecialPoint:
    """A turning point, a branch point or a Hopf candidate on a branch."""

    kind: str
    params: np.ndarray
    state: np.ndarray
    tangent: np.ndarray
    index: int
    bracket: tuple
    active: str = "lam"

    @property
    def value(self) -> float:
        return float(self.params[PARAMETERS.index(self.active)])


@dataclass
class Branch:
    """Samples (params, state, tangent, signs, stability) along one solution curve."""

    model: FieldModel
    active: str
    params: np.ndarray
    states: np.ndarray
    tangents: np.ndarray
    det_signs: np.ndarray
    bordered_signs: np.ndarray
    n_unstable: np.ndarray
    hopf_test: np.ndarray
    residuals: np.ndarray
    provenance: str = "user"
    status: str = ""
    special: list = field(default_factory=list)
    disconnected: bool = False
    branch_id: int = -1

    def __len__(self):
        return len(self.states)

    @property
    def k(self) -> int:
        return PARAMETERS.index(self.active)

    @property
    def values(self) -> np.ndarray:
        return self.params[:, self.k]

    @property
    def u(self) -> np.ndarray:
        return np.column_stack([self.states, self.values])

    @property
    def max_gap(self) -> float:
        if len(self) < 2:
            return 0.0
        return float(np.max(np.linalg.norm(np.diff(self.u, axis=0), axis=1)))

    def norms(self) -> np.ndarray:
        """L2 norm of V along the branch."""
        return np.array(
            [self.model.norm(self.model.potential(v, p)) for v, p in zip(self.states, self.params)]
        )

    def reversed(self) -> "Branch":
        return replace(
            self,
            params=self.params[::-1],
            states=self.states[::-1],
            tangents=-self.tangents[::-1],
            det_signs=self.det_signs[::-1],
            bordered_signs=-self.bordered_signs[::-1],
            n_unstable=self.n_unstable[::-1],
            hopf_test=self.hopf_test[::-1],
            residuals=self.residuals[::-1],
            special=[],
        )

    def turning_points(self):
        return [s for s in self.special if s.kind == "turning"]

    def branch_points(self):
        return [s for s in self.special if s.kind == "branch"]


class ContinuationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# building blocks


def _with(base, k, value):
    p = np.array(base, dtype=float)
    p[k] = value
    return p


def _bordered(Jv, Jp, t):
    return np.vstack([np.column_stack([Jv, Jp]), t[None, :]])


def _tangent(Jv, Jp, t_ref):
    """Unit tangent oriented so that t . t_ref > 0."""
    A = _bordered(Jv, Jp, t_ref)
    rhs = np.zeros(A.shape[0])
    rhs[-1] = 1.0
    try:
        t = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        t = np.linalg.lstsq(A, rhs, rcond=None)[0]
    return t / np.linalg.norm(t)


def _null_tangent(Jv, Jp):
    _, _, vt = np.linalg.svd(np.column_stack([Jv, Jp]))
    return vt[-1]


def _bordered_sign(Jv, Jp, t):
    sign, _ = np.linalg.slogdet(_bordered(Jv, Jp, t))
    return int(sign)


def _hopf_value(ev, tol=1e-8):
    """Largest real part among genuinely complex eigenvalues (nan if none)."""
    cplx = ev[np.abs(ev.imag) > tol]
    return float(cplx.real.max()) if cplx.size else np.nan


def newton_fixed(model: FieldModel, v, params, tol=1e-10, max_iter=30):
    """Newton at fixed (lam, mu, eps), which may lie outside the nominal ranges."""
    v = np.array(v, dtype=float)
    for _ in range(max_iter + 1):
        r = model.residual(v, params)
        if np.linalg.norm(r) < tol:
            return v
        J = model.jacobian(v, params)
        try:
            dv = np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            dv = np.linalg.lstsq(J, r, rcond=None)[0]
        v = v - dv
        if not np.all(np.isfinite(v)):
            break
    raise NewtonFailure(f"fixed-parameter Newton failed (|r| = {np.linalg.norm(r):.3g})", last=v)


def _correct(model, guess, base, k, t, u_ref, s, cfg):
    """Newton on r = 0, t.(u - u_ref) = s. Returns (u, iterations)."""
    name = PARAMETERS[k]
    u = np.array(guess, dtype=float)
    for it in range(cfg.max_corrector + 1):
        p = _with(base, k, u[-1])
        r = model.residual(u[:-1], p)
        g = np.append(r, t @ (u - u_ref) - s)
        if np.linalg.norm(g) < cfg.tol and it > 0:
            return u, it
        if it == cfg.max_corrector:
            break
        Jv, Jp = model.jacobian_and_param(u[:-1], name, p)
        try:
            du = np.linalg.solve(_bordered(Jv, Jp, t), g)
        except np.linalg.LinAlgError:
            du = np.linalg.lstsq(_bordered(Jv, Jp, t), g, rcond=None)[0]
        u = u - du
        if not np.all(np.isfinite(u)):
            break
    raise NewtonFailure("corrector did not converge", last=u)


class _Sampler:
    """Evaluates and stores per-sample diagnostics while tracing."""

    def __init__(self, model, base, k, cfg):
        self.model, self.base, self.k, self.cfg = model, base, k, cfg
        self.rows = []

    def add(self, u, t):
        model, cfg = self.model, self.cfg
        p = _with(self.base, self.k, u[-1])
        Jv, Jp = model.jacobian_and_param(u[:-1], PARAMETERS[self.k], p)
        if cfg.stability:
            ev = np.linalg.eigvals(-Jv / model.tau_coords[:, None])
            n_unstable = int(np.sum(ev.real > 1e-8))
            hopf = _hopf_value(ev)
        else:
            n_unstable, hopf = -1, np.nan
        self.rows.append(
            (
                p,
                u[:-1].copy(),
                t.copy(),
                int(np.sign(np.linalg.det(Jv))),
                _bordered_sign(Jv, Jp, t),
                n_unstable,
                hopf,
                float(np.linalg.norm(model.residual(u[:-1], p))),
            )
        )

    def branch(self, provenance, status):
        cols = list(zip(*self.rows))
        return Branch(
            model=self.model,
            active=PARAMETERS[self.k],
            params=np.array(cols[0]),
            states=np.array(cols[1]),
            tangents=np.array(cols[2]),
            det_signs=np.array(cols[3], dtype=int),
            bordered_signs=np.array(cols[4], dtype=int),
            n_unstable=np.array(cols[5], dtype=int),
            hopf_test=np.array(cols[6], dtype=float),
            residuals=np.array(cols[7]),
            provenance=provenance,
            status=status,
        )


# ---------------------------------------------------------------------------
# tracing


def trace(
    model: FieldModel,
    seed,
    active: str = "lam",
    range_=(0.0, 10.0),
    config: ContinuationConfig | None = None,
    direction: int = 1,
    tangent=None,
    provenance: str = "user",
) -> Branch:
    """Follow the solution curve through ``seed`` in the ``active`` parameter.

    ``seed`` is a state v (at the model's parameters) or a pair (params, v).
    The curve is followed in the sense of increasing parameter when
    ``direction`` is +1, or along ``tangent`` when given, until it leaves
    ``range_`` (the exit point is solved exactly on the boundary), closes on
    itself, stalls or exhausts ``max_steps``.
    """
    cfg = config or ContinuationConfig()
    if active not in PARAMETERS:
        raise ValueError(f"unknown parameter {active!r}")
    k = PARAMETERS.index(active)
    lo, hi = float(min(range_)), float(max(range_))
    if isinstance(seed, tuple) and len(seed) == 2:
        base, v0 = np.array(seed[0], dtype=float), np.asarray(seed[1], dtype=float)
    else:
        base, v0 = model.params, np.asarray(seed, dtype=float)
    if not lo - 1e-12 <= base[k] <= hi + 1e-12:
        raise ValueError(f"seed {active} = {base[k]} lies outside {range_}")
    try:
        v0 = newton_fixed(model, v0, base, tol=cfg.tol)
    except NewtonFailure as exc:
        raise ContinuationError(f"seed is not a stationary state: {exc}") from exc

    name = active
    u = np.append(v0, base[k])
    Jv, Jp = model.jacobian_and_param(v0, name, base)
    if tangent is not None:
        t = np.asarray(tangent, dtype=float)
        t = _tangent(Jv, Jp, t / np.linalg.norm(t))
    else:
        t = _null_tangent(Jv, Jp)
        if t[-1] * direction < 0 or (t[-1] == 0 and direction < 0):
            t = -t
    sampler = _Sampler(model, base, k, cfg)
    sampler.add(u, t)
    u_start, t_start = u.copy(), t.copy()
    ds = cfg.ds
    status = "max_steps"

    for step in range(cfg.max_steps):
        try:
            pred = u + ds * t
            u_new, its = _correct(model, pred, base, k, t, pred, 0.0, cfg)
            if np.linalg.norm(u_new - u) > 2 * cfg.ds_max:
                raise NewtonFailure("corrector jumped")
            Jv, Jp = model.jacobian_and_param(u_new[:-1], name, _with(base, k, u_new[-1]))
            t_new = _tangent(Jv, Jp, t)
            if t_new @ t < cfg.min_cos and ds > cfg.ds_min * 1.0001:
                raise NewtonFailure("tangent turned too fast")
        except NewtonFailure:
            if ds <= cfg.ds_min * 1.0001:
                status = "stalled"
                logger.info("%s-branch stalled at %s = %.6g", name, name, u[-1])
                break
            ds = max(cfg.ds_min, ds * cfg.shrink)
            continue

        if not lo <= u_new[-1] <= hi:
            bound = hi if u_new[-1] > hi else lo
            frac = (bound - u[-1]) / (u_new[-1] - u[-1])
            guess = u[:-1] + frac * (u_new[:-1] - u[:-1])
            try:
                v_b = newton_fixed(model, guess, _with(base, k, bound), tol=cfg.tol)
            except NewtonFailure:
                if ds <= cfg.ds_min * 1.0001:
                    status = "stalled"
                    break
                ds = max(cfg.ds_min, ds * cfg.shrink)
                continue
            u_b = np.append(v_b, bound)
            Jv, Jp = model.jacobian_and_param(v_b, name, _with(base, k, bound))
            sampler.add(u_b, _tangent(Jv, Jp, t))
            status = "range"
            break

        u, t = u_new, t_new
        sampler.add(u, t)
        if step > 10 and np.linalg.norm(u - u_start) < 0.5 * ds and t @ t_start > 0:
            status = "closed"
            break
        if its > cfg.slow_corrector:
            ds = max(cfg.ds_min, ds * cfg.shrink)
        elif its <= cfg.fast_corrector:
            ds = min(cfg.ds_max, ds * cfg.grow)

    branch = sampler.branch(provenance, status)
    if cfg.detect:
        branch.special = detect_special(branch, cfg)
    logger.debug(
        "%s-branch (%s): %d samples, status %s, %d special points",
        name,
        provenance,
        len(branch),
        status,
        len(branch.special),
    )
    return branch


# ---------------------------------------------------------------------------
# special points


def _point_at(branch: Branch, i: int, s: float, cfg):
    """Corrected point at arclength-like offset s from sample i (towards i + 1)."""
    u = branch.u
    t_i = branch.tangents[i]
    h = t_i @ (u[i + 1] - u[i])
    guess = u[i] + (s / h) * (u[i + 1] - u[i])
    point, _ = _correct(branch.model, guess, branch.params[i], branch.k, t_i, u[i], s, cfg)
    return point


def _tests(branch: Branch, i: int, point):
    model = branch.model
    p = _with(branch.params[i], branch.k, point[-1])
    Jv, Jp = model.jacobian_and_param(point[:-1], branch.active, p)
    t = _tangent(Jv, Jp, branch.tangents[i])
    ev = np.linalg.eigvals(-Jv / model.tau_coords[:, None])
    return {"turning": t[-1], "branch": _bordered_sign(Jv, Jp, t), "hopf": _hopf_value(ev)}, t


def _locate(branch: Branch, i: int, kind: str, cfg):
    u = branch.u
    h = branch.tangents[i] @ (u[i + 1] - u[i])
    a, b = 0.0, float(h)
    fa = _tests(branch, i, u[i])[0][kind]
    point, t = u[i + 1], branch.tangents[i + 1]
    for _ in range(200):
        if abs(b - a) < cfg.locate_tol:
            break
        m = 0.5 * (a + b)
        try:
            pm = _point_at(branch, i, m, cfg)
        except NewtonFailure:
            break
        fm, tm = _tests(branch, i, pm)
        point, t = pm, tm
        if np.sign(fm[kind]) == np.sign(fa):
            a = m
        else:
            b = m
    p = _with(branch.params[i], branch.k, point[-1])
    if kind == "branch":
        # the bordered system is singular here; use the bracketing tangents
        t = branch.tangents[i] + branch.tangents[i + 1]
        t = t / np.linalg.norm(t)
    return SpecialPoint(
        kind=kind if kind != "hopf" else "hopf-candidate",
        params=p,
        state=point[:-1],
        tangent=t,
        index=i,
        bracket=(a, b),
        active=branch.active,
    )


def detect_special(branch: Branch, config: ContinuationConfig | None = None):
    """Turning points, branch points and Hopf candidates, each localized by bisection."""
    cfg = config or ContinuationConfig()
    found = []
    if len(branch) < 2:
        return found
    tk = branch.tangents[:, -1]
    bs = branch.bordered_signs
    hv = branch.hopf_test
    for i in range(len(branch) - 1):
        turning = tk[i] * tk[i + 1] < 0
        if turning:
            found.append(_locate(branch, i, "turning", cfg))
        elif bs[i] * bs[i + 1] < 0:
            found.append(_locate(branch, i, "branch", cfg))
        if np.isfinite(hv[i]) and np.isfinite(hv[i + 1]) and hv[i] * hv[i + 1] < 0:
            found.append(_locate(branch, i, "hopf", cfg))
    return found


def switch_branch(model: FieldModel, point: SpecialPoint, delta: float = 1e-3, tol: float = 1e-10, null_tol: float = 1e-5):
    """Seeds on the branch crossing at a simple branch point.

    The kernel of [J_v J_p] is two dimensional there; the direction in it
    orthogonal to the incoming tangent is the new branch. Returns a list of
    (params, state, tangent) seeds, one per side.
    """
    if point.kind != "branch":
        raise ValueError(f"cannot switch at a {point.kind} point")
    k = PARAMETERS.index(point.active)
    u0 = np.append(point.state, point.params[k])
    Jv, Jp = model.jacobian_and_param(point.state, point.active, point.params)
    _, sv, vt = np.linalg.svd(np.column_stack([Jv, Jp]))
    scale = max(1.0, sv[0])
    if sv[-1] > null_tol * scale:
        raise ContinuationError(f"not a branch point: smallest singular value {sv[-1]:.3g}")
    if len(sv) > 1 and sv[-2] < null_tol * scale:
        raise ContinuationError("kernel of dimension > 2: non-simple branch point refused")
    null = np.vstack([vt[-1], vt[-2]])
    told = point.tangent / np.linalg.norm(point.tangent)
    d = _orth_direction(null, told)
    cfg = ContinuationConfig(tol=tol, max_corrector=30)
    seeds = []
    for sgn in (1.0, -1.0):
        dd = sgn * d
        try:
            u, _ = _correct(model, u0 + delta * dd, point.params, k, dd, u0, delta, cfg)
        except NewtonFailure:
            logger.info("branch switch: corrector failed on side %+d", int(sgn))
            continue
        seeds.append((_with(point.params, k, u[-1]), u[:-1], dd))
    return seeds


def _orth_direction(null, told):
    """Unit vector of span(null rows) orthogonal to the old tangent."""
    c = null @ told
    d = null.T @ np.array([-c[1], c[0]]) if np.linalg.norm(c) > 1e-12 else null[0]
    d = d - (d @ told) * told
    return d / np.linalg.norm(d)


def solutions_at(branch: Branch, value: float, tol: float = 1e-10):
    """States on the branch where the active parameter equals ``value``."""
    vals = branch.values
    out = []
    for i in range(len(branch) - 1):
        a, b = vals[i] - value, vals[i + 1] - value
        if a * b > 0 or vals[i] == vals[i + 1]:
            continue
        frac = a / (a - b)
        guess = branch.states[i] + frac * (branch.states[i + 1] - branch.states[i])
        p = _with(branch.params[i], branch.k, value)
        try:
            out.append(newton_fixed(branch.model, guess, p, tol=tol))
        except NewtonFailure:
            logger.debug("solutions_at: refinement failed near sample %d", i)
    if not out:
        return np.zeros((0, branch.states.shape[1]))
    return dedupe(np.array(out), DEDUPE_TOL)


# ---------------------------------------------------------------------------
# families and sweeps


def _same_fixed(branch: Branch, params) -> bool:
    other = [j for j in range(3) if j != branch.k]
    return bool(np.all(np.abs(branch.params[0, other] - np.asarray(params)[other]) < 1e-12))


def covered(branches, params, v, tol: float = DEDUPE_TOL) -> bool:
    """Whether the stationary state (params, v) lies on one of ``branches``."""
    for br in branches:
        if br.active != "lam" or not _same_fixed(br, params):
            continue
        sols = solutions_at(br, float(params[0]))
        if len(sols) and np.min(np.max(np.abs(sols - v), axis=1)) < tol:
            return True
    return False


def trace_family(
    model: FieldModel,
    params,
    lam_range,
    config: ContinuationConfig | None = None,
    depth: int = 2,
    max_branches: int = 40,
    seed=None,
    provenance: str = "trivial",
):
    """lam-branch through a seed plus every branch reached by switching.

    Without ``seed`` the family starts from the unique state at the lower end
    of ``lam_range`` (obtained by continuation from the lam = 0 solution).
    """
    cfg = config or ContinuationConfig()
    lo, hi = lam_range
    params = _with(params, 0, lo)
    if seed is None:
        v = model.base_state(_with(params, 0, 0.0))
        if lo > 0:
            ramp = trace(model, (_with(params, 0, 0.0), v), "lam", (0.0, lo), replace(cfg, detect=False))
            v = ramp.states[-1]
        seed = v
    first = trace(model, (params, seed), "lam", lam_range, cfg, provenance=provenance)
    branches = [first]
    queue = [(first, 0)]
    while queue:
        br, level = queue.pop(0)
        if level >= depth:
            continue
        for sp in br.branch_points():
            try:
                seeds = switch_branch(model, sp)
            except ContinuationError as exc:
                logger.info("no switch at %s = %.6g: %s", sp.active, sp.value, exc)
                continue
            for p, v, d in seeds:
                if covered(branches, p, v):
                    continue
                if len(branches) >= max_branches:
                    logger.warning("branch limit %d reached", max_branches)
                    return branches
                prov = f"{br.provenance}>bp@{sp.value:.6g}"
                new = trace(model, (p, v), "lam", lam_range, cfg, tangent=d, provenance=prov)
                branches.append(new)
                queue.append((new, level + 1))
    for i, br in enumerate(branches):
        br.branch_id = i
    return branches


@dataclass
class SweepSchedule:
    """lam-family at the start parameters, then legs in mu / eps at fixed lam.

    ``legs`` is a sequence of (parameter, target) pairs walked in order from
    every sample of a lam-grid with spacing ``lam_step``.
    """

    lam_range: tuple = (0.0, 10.0)
    legs: tuple = (("mu", 1.0), ("eps", 1.0))
    lam_step: float = 0.5
    depth: int = 2
    max_branches: int = 40
    config: ContinuationConfig = field(default_factory=ContinuationConfig)
    threads: int = 1

    def __post_init__(self):
        for name, target in self.legs:
            if name not in ("mu", "eps"):
                raise ValueError(f"legs move mu or eps, got {name!r}")
            if not 0.0 <= target <= 1.0:
                raise ValueError(f"leg target {target} outside [0, 1]")
        if self.lam_step <= 0:
            raise ValueError("lam_step must be positive")


@dataclass
class SweepResult:
    start: list
    legs: list
    final: list
    disconnected: list
    final_params: np.ndarray
    failures: list = field(default_factory=list)
    stages: list = field(default_factory=list)

    @property
    def branches(self):
        return self.start + self.legs + self.stages + self.final + self.disconnected

    @property
    def connected(self):
        return self.final


def _grid_points(branches, grid):
    points = []
    for br in branches:
        for lam in grid:
            for v in solutions_at(br, lam):
                points.append((_with(br.params[0], 0, lam), v))
    return _dedupe_points(points)


def _dedupe_points(points):
    out = []
    for p, v in sorted(points, key=lambda pv: (tuple(pv[0]), tuple(pv[1]))):
        if any(np.allclose(p, q, atol=1e-12) and np.max(np.abs(v - w)) < DEDUPE_TOL for q, w in out):
            continue
        out.append((p, v))
    return out


def branch_through(model: FieldModel, params, v, lam_range, config=None, provenance="user") -> Branch:
    """Whole lam-branch through a state, traced in both directions and joined."""
    cfg = config or ContinuationConfig()
    fwd = trace(model, (params, v), "lam", lam_range, cfg, direction=1, provenance=provenance)
    bwd = trace(model, (params, v), "lam", lam_range, cfg, direction=-1, provenance=provenance)
    return _join(bwd, fwd, cfg)


def multiparameter_sweep(model: FieldModel, schedule: SweepSchedule | None = None) -> SweepResult:
    """Trivial family, then mu / eps legs, each followed by lam-branches through the arrivals.

    Every leg starts from the lam-grid samples of the branches of the
    previous stage. Branches of the last stage that do not meet the
    trivial-seeded family at the final parameters are flagged disconnected.
    """
    sch = schedule or SweepSchedule()
    cfg = sch.config
    lo, hi = sch.lam_range
    grid = np.arange(lo, hi + 1e-12, sch.lam_step)
    params = model.params.copy()
    start = trace_family(model, params, sch.lam_range, cfg, sch.depth, sch.max_branches)
    stage = start
    legs, failures, stages = [], [], []

    def run_leg(args):
        (p, v), name, target = args
        k = PARAMETERS.index(name)
        direction = 1 if target > p[k] else -1
        try:
            br = trace(
                model,
                (p, v),
                name,
                (p[k], target),
                replace(cfg, detect=False, stability=False),
                direction=direction,
                provenance=f"{name}-leg@lam={p[0]:.6g}",
            )
        except (ContinuationError, NewtonFailure) as exc:
            return f"{name}-leg at lam = {p[0]:.6g}: {exc}", None
        end = br.params[-1]
        if br.status != "range" or abs(end[k] - target) > 1e-12:
            return br, None
        return br, (end, br.states[-1])

    for name, target in sch.legs:
        k = PARAMETERS.index(name)
        if abs(params[k] - target) < 1e-14:
            continue
        jobs = [(pt, name, target) for pt in _grid_points(stage, grid)]
        if sch.threads > 1:
            with ThreadPoolExecutor(max_workers=sch.threads) as pool:
                results = list(pool.map(run_leg, jobs))
        else:
            results = [run_leg(j) for j in jobs]
        arrivals = []
        for br, end in results:
            if isinstance(br, str):
                failures.append(br)
                continue
            legs.append(br)
            if end is not None:
                arrivals.append(end)
        params[k] = target
        stage = []
        for p, v in _dedupe_points(arrivals):
            if covered(stage, p, v):
                continue
            if len(stage) >= sch.max_branches:
                logger.warning("branch limit %d reached after the %s-leg", sch.max_branches, name)
                break
            try:
                stage.append(branch_through(model, p, v, sch.lam_range, cfg, provenance=f"after {name}->{target:g}"))
            except (ContinuationError, NewtonFailure) as exc:
                failures.append(f"lam-branch after {name}-leg at lam = {p[0]:.6g}: {exc}")
        stages.extend(stage)

    if stage is start:
        final = start
        disconnected = []
    else:
        final = trace_family(
            model, params, sch.lam_range, cfg, sch.depth, sch.max_branches, provenance="trivial-final"
        )
        disconnected = []
        for br in stage:
            anchor = (br.params[len(br) // 2], br.states[len(br) // 2])
            if covered(final, *anchor) or covered(disconnected, *anchor):
                continue
            br.disconnected = True
            br.provenance = "disconnected " + br.provenance
            disconnected.append(br)
            logger.info("disconnected branch through lam = %.6g", anchor[0][0])
    all_branches = start + legs + [b for b in stages if not b.disconnected] + final + disconnected
    for i, br in enumerate(all_branches):
        br.branch_id = i
    return SweepResult(
        start=start,
        legs=legs,
        final=final,
        disconnected=disconnected,
        final_params=params,
        failures=failures,
        stages=[b for b in stages if not b.disconnected],
    )


def _join(bwd: Branch, fwd: Branch, cfg) -> Branch:
    """Concatenate a backward and a forward trace from the same seed."""
    rb = bwd.reversed()
    cat = lambda a, b: np.concatenate([a, b[1:]])  # noqa: E731
    br = replace(
        fwd,
        params=cat(rb.params, fwd.params),
        states=cat(rb.states, fwd.states),
        tangents=cat(rb.tangents, fwd.tangents),
        det_signs=cat(rb.det_signs, fwd.det_signs),
        bordered_signs=cat(rb.bordered_signs, fwd.bordered_signs),
        n_unstable=cat(rb.n_unstable, fwd.n_unstable),
        hopf_test=cat(rb.hopf_test, fwd.hopf_test),
        residuals=cat(rb.residuals, fwd.residuals),
        status=f"{bwd.status}/{fwd.status}",
    )
    if cfg.detect:
        br.special = detect_special(br, cfg)
    return br
