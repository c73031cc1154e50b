"""Command-line driver: ``nfcont <command> --config FILE [--out DIR] [--seed N] [--threads N]``.

The config is a JSON tree. Unknown keys, out-of-range values and malformed
factor expressions are rejected before any computation or output (exit 2).
Solver failures exit with 3 and broken invariants (parity, bounds) with 4;
in the latter case the artifacts are still written for inspection.
"""

from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import logging
import os
import platform
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np
import scipy
import sympy

from . import __version__, bifurcation, continuation, dynamics, quadrature, stationary
from .model import FieldModel
from .model_zoo import RingParams, TwoPopParams, build_ring, build_twopop
from .pg_kernel import PGKernel
from .sigmoid import Logistic

logger = logging.getLogger("nfcont")

COMMANDS = ("solve", "continue", "sweep", "bifurcate", "simulate", "audit")
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_INVARIANT = 0, 2, 3, 4

_CONT_FIELDS = {f.name for f in fields(continuation.ContinuationConfig)}
SCHEMA = {
    "model": {
        "type", "params", "dim", "nodes", "bounds", "normalization", "X", "Y",
        "input", "theta", "sigmoid_shift", "tau", "variant",
    },
    "params": {"lam", "mu", "eps"},
    "solver": {"n_starts", "tol", "dedupe_tol"},
    "continuation": {"mode", "active", "range", "depth", "max_branches", "seed"} | _CONT_FIELDS,
    "sweep": {"lam_range", "legs", "lam_step", "depth", "max_branches"},
    "bifurcate": {"max_q"},
    "simulate": {"t_end", "n_trajectories", "rtol", "atol", "n_samples"},
    "audit": {"lams"},
    "output": {"diagram"},
}
TOP_LEVEL = set(SCHEMA) | {"seed", "threads"}


class ConfigError(ValueError):
    pass


# factor expressions ----------------------------------------------------------

_FUNCS = {"cos": sympy.cos, "sin": sympy.sin}
_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
}


def parse_expression(text: str, variables=("x",)):
    """Parse a factor such as ``"0.5 + 2*x**2 - 1.5*cos(3*x)"`` into sympy.

    Accepted: numbers, ``pi``, the spatial variables, + - * /, powers with a
    nonnegative integer exponent, and cos / sin of a sub-expression.
    """
    symbols = {name: sympy.Symbol(name) for name in variables}
    try:
        tree = ast.parse(str(text), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse factor {text!r}: {exc.msg}") from None

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return sympy.nsimplify(node.value) if isinstance(node.value, int) else sympy.Float(node.value)
        if isinstance(node, ast.Name):
            if node.id in symbols:
                return symbols[node.id]
            if node.id == "pi":
                return sympy.pi
            raise ConfigError(f"unknown name {node.id!r} in factor {text!r}")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
            val = walk(node.operand)
            return -val if isinstance(node.op, ast.USub) else val
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Pow):
            exp = node.right
            if not (isinstance(exp, ast.Constant) and isinstance(exp.value, int) and exp.value >= 0):
                raise ConfigError(f"only nonnegative integer powers are allowed in {text!r}")
            return walk(node.left) ** exp.value
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
            if len(node.args) != 1 or node.keywords:
                raise ConfigError(f"{node.func.id} takes one argument in {text!r}")
            return _FUNCS[node.func.id](walk(node.args[0]))
        raise ConfigError(f"unsupported construct {type(node).__name__} in factor {text!r}")

    return walk(tree)


# config ----------------------------------------------------------------------


def _check_keys(section, allowed, where):
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def validate(config: dict) -> dict:
    """Key and type validation; returns the config untouched."""
    _check_keys(config, TOP_LEVEL, "config")
    if "model" not in config:
        raise ConfigError("config needs a 'model' section")
    for name, allowed in SCHEMA.items():
        if name in config:
            _check_keys(config[name], allowed, name)
    kind = config["model"].get("type", "ring")
    if kind not in ("ring", "twopop", "custom"):
        raise ConfigError(f"unknown model type {kind!r}")
    if kind != "custom":
        extra = set(config["model"]) - {"type", "params", "variant"}
        if extra:
            raise ConfigError(f"keys {sorted(extra)} only apply to custom models")
    else:
        missing = {"X", "Y", "bounds"} - set(config["model"])
        if missing:
            raise ConfigError(f"custom model needs {sorted(missing)}")
        if "params" in config["model"]:
            raise ConfigError("custom models take their parameters from the 'params' section")
    return config


def _custom_model(msec: dict) -> FieldModel:
    bounds = np.asarray(msec["bounds"], dtype=float)
    dim = int(msec.get("dim", 1 if bounds.ndim == 1 else bounds.shape[0]))
    grid = quadrature.build(dim, int(msec.get("nodes", 32)), bounds, float(msec.get("normalization", 1.0)))
    names = ("x", "y")[:dim]

    def table(rows):
        if not isinstance(rows, list) or not rows:
            raise ConfigError("factor tables must be nonempty lists")
        out = []
        for row in rows:
            if isinstance(row, list):
                out.append([parse_expression(e, names) for e in row])
            else:
                out.append(parse_expression(row, names))
        return out

    variables = tuple(sympy.Symbol(n) for n in names)
    kernel = PGKernel.from_expressions(table(msec["X"]), table(msec["Y"]), grid, variables=variables)
    inp = None
    if "input" in msec:
        exprs = msec["input"] if isinstance(msec["input"], list) else [msec["input"]]
        fn = sympy.lambdify(variables, [parse_expression(e, names) for e in exprs], modules="numpy")
        vals = fn(*grid.coords)
        inp = np.array([np.broadcast_to(np.asarray(v, dtype=float), (grid.size,)) for v in vals])
    theta = msec.get("theta")
    return FieldModel(
        kernel=kernel,
        sigmoid=Logistic(shift=float(msec.get("sigmoid_shift", 0.0))),
        input=inp,
        theta=None if theta is None else np.atleast_1d(np.asarray(theta, dtype=float)),
        tau=msec.get("tau", 1.0),
        variant=msec.get("variant", "voltage"),
        name="custom",
    )


def build_model(config: dict) -> FieldModel:
    msec = config["model"]
    kind = msec.get("type", "ring")
    try:
        if kind == "ring":
            model = build_ring(RingParams(**msec.get("params", {})))
        elif kind == "twopop":
            raw = dict(msec.get("params", {}))
            for key in ("exponents", "exponents_prime", "sigmas", "C"):
                if raw.get(key) is not None:
                    raw[key] = tuple(tuple(row) for row in raw[key])
            for key in ("decay",):
                if key in raw:
                    raw[key] = tuple(raw[key])
            model = build_twopop(TwoPopParams(**raw))
        else:
            model = _custom_model(msec)
        if "variant" in msec and kind != "custom":
            model = model.with_params(variant=msec["variant"])
        if "params" in config:
            model = model.at(**config["params"])
    except ConfigError:
        raise
    except (TypeError, ValueError, sympy.SympifyError) as exc:
        raise ConfigError(f"invalid model: {exc}") from None
    return model


def _cont_config(section: dict):
    kwargs = {k: v for k, v in section.items() if k in _CONT_FIELDS}
    try:
        return continuation.ContinuationConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid continuation settings: {exc}") from None


# output ----------------------------------------------------------------------


def _num(x) -> str:
    """Shortest round-trip representation."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([c if isinstance(c, str) else _num(c) for c in row])
    return buf.getvalue()


def _coord_names(n):
    return [f"v{k + 1}" for k in range(n)]


def solutions_csv(rank, sets) -> str:
    rows = []
    for s in sets:
        for v, nu, ds in zip(s.solutions, s.n_unstable, s.det_signs):
            rows.append([*s.params, *v, nu, ds])
    return _csv(["lam", "mu", "eps", *_coord_names(rank), "n_unstable", "det_sign"], rows)


def branches_csv(rank, branches) -> str:
    rows = []
    for br in branches:
        norms = br.norms()
        for i in range(len(br)):
            rows.append(
                [br.branch_id, br.provenance, br.active, i, *br.params[i], norms[i], *br.states[i],
                 br.n_unstable[i], br.det_signs[i], br.disconnected]
            )
    header = ["branch_id", "provenance", "active", "index", "lam", "mu", "eps", "norm",
              *_coord_names(rank), "n_unstable", "det_sign", "disconnected"]
    return _csv(header, rows)


def special_csv(rank, branches) -> str:
    rows = []
    for br in branches:
        for sp in br.special:
            V = br.model.potential(sp.state, sp.params)
            rows.append([br.branch_id, sp.kind, sp.active, *sp.params, br.model.norm(V), *sp.state])
    return _csv(["branch_id", "kind", "active", "lam", "mu", "eps", "norm", *_coord_names(rank)], rows)


def bifurcation_csv(report) -> str:
    rows = []
    for c in report.candidates:
        rows.append(
            [c.index, c.label, c.sigma.real, c.sigma.imag, c.simple, c.kind, c.lam,
             "" if c.q is None else str(c.q), c.chi, c.orientation, c.lam_hopf_linear, c.lam_hopf_formula]
        )
    header = ["index", "label", "sigma_re", "sigma_im", "simple", "type", "lam_n", "q", "chi",
              "orientation", "lam_hopf_linear", "lam_hopf_formula"]
    return _csv(header, rows)


def diagram_svg(branches, xlabel="lam") -> str:
    """Norm against the continuation parameter, stable parts solid."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "nfcont"
    fig, ax = plt.subplots(figsize=(7, 4.5))
    markers = {"turning": ("o", "tab:red"), "branch": ("s", "tab:blue"), "hopf": ("^", "tab:green")}
    for br in branches:
        x = br.values
        y = br.norms()
        stable = np.asarray(br.n_unstable) == 0
        color = "tab:purple" if br.disconnected else "k"
        ax.plot(x, np.where(stable, y, np.nan), "-", color=color, lw=1.2)
        ax.plot(x, np.where(stable, np.nan, y), "--", color=color, lw=0.9)
        for sp in br.special:
            m, c = markers.get(sp.kind, ("x", "tab:gray"))
            ax.plot(sp.value, br.model.norm(br.model.potential(sp.state, sp.params)), m, color=c, ms=5)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("|V|")
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def _versions():
    return {
        "nfcont": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "sympy": sympy.__version__,
    }


# commands --------------------------------------------------------------------


def _solver_opts(config, model):
    s = config.get("solver", {})
    return dict(
        n_starts=s.get("n_starts"),
        tol=float(s.get("tol", 1e-10)),
        dedupe_tol=float(s.get("dedupe_tol", stationary.DEDUPE_TOL)),
    )


def cmd_solve(model, config, seed, threads):
    sols = stationary.enumerate_solutions(model, seed=seed, threads=threads, **_solver_opts(config, model))
    audit = stationary.parity_audit(sols)
    files = {"solutions.csv": solutions_csv(model.rank, [sols])}
    summary = {"n_solutions": len(sols), "degree": audit.total, "parity_conclusive": audit.conclusive}
    bad = audit.conclusive and audit.total != 1
    return files, summary, bad


def _continuation_branches(model, config):
    sec = config.get("continuation", {})
    cfg = _cont_config(sec)
    mode = sec.get("mode", "family")
    active = sec.get("active", "lam")
    rng = tuple(sec.get("range", (0.0, 10.0)))
    if mode == "family":
        if active != "lam":
            raise ConfigError("family mode continues in lam only")
        return continuation.trace_family(
            model, model.params, rng, cfg, int(sec.get("depth", 2)), int(sec.get("max_branches", 40))
        ), active
    if mode != "single":
        raise ConfigError(f"unknown continuation mode {mode!r}")
    seed = sec.get("seed")
    v = np.asarray(seed, dtype=float) if seed is not None else stationary.newton(model, model.base_state())
    br = continuation.trace(model, v, active, rng, cfg)
    br.branch_id = 0
    return [br], active


def cmd_continue(model, config, seed, threads):
    branches, active = _continuation_branches(model, config)
    files = {
        "branches.csv": branches_csv(model.rank, branches),
        "special_points.csv": special_csv(model.rank, branches),
    }
    if config.get("output", {}).get("diagram", True):
        files["diagram.svg"] = diagram_svg(branches, active)
    summary = {
        "n_branches": len(branches),
        "special_points": [[sp.kind, sp.value] for br in branches for sp in br.special],
    }
    return files, summary, False


def cmd_sweep(model, config, seed, threads):
    sec = config.get("sweep", {})
    cfg = _cont_config(config.get("continuation", {}))
    try:
        schedule = continuation.SweepSchedule(
            lam_range=tuple(sec.get("lam_range", (0.0, 10.0))),
            legs=tuple((str(n), float(t)) for n, t in sec.get("legs", (("mu", 1.0), ("eps", 1.0)))),
            lam_step=float(sec.get("lam_step", 0.5)),
            depth=int(sec.get("depth", 2)),
            max_branches=int(sec.get("max_branches", 40)),
            config=cfg,
            threads=threads,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid sweep: {exc}") from None
    result = continuation.multiparameter_sweep(model, schedule)
    shown = result.start + result.final + result.disconnected
    files = {
        "branches.csv": branches_csv(model.rank, result.branches),
        "special_points.csv": special_csv(model.rank, result.branches),
    }
    if config.get("output", {}).get("diagram", True):
        files["diagram.svg"] = diagram_svg(shown)
    summary = {
        "n_branches": len(result.branches),
        "n_disconnected": len(result.disconnected),
        "final_params": [float(p) for p in result.final_params],
        "failures": result.failures,
    }
    return files, summary, False


def cmd_bifurcate(model, config, seed, threads):
    max_q = int(config.get("bifurcate", {}).get("max_q", 3))
    report = bifurcation.candidates(model.at(mu=0.0, eps=0.0), max_q=max_q)
    files = {"bifurcation_report.csv": bifurcation_csv(report)}
    summary = {
        "admissible": [[c.kind, c.lam] for c in report.admissible()],
        "hopf": [[c.lam_hopf_linear, c.lam_hopf_formula] for c in report.hopf()],
        "non_simple": [c.lam for c in report.candidates if c.kind == "non-simple"],
    }
    return files, summary, False


def cmd_simulate(model, config, seed, threads):
    sec = config.get("simulate", {})
    n = int(sec.get("n_trajectories", 10))
    t_end = float(sec.get("t_end", 50.0))
    if n < 1 or t_end <= 0:
        raise ConfigError("simulate needs n_trajectories >= 1 and t_end > 0")
    center, half = model.coordinate_box()
    rng = np.random.default_rng(seed)
    rows, ends = [], []
    for j in range(n):
        y0 = center + (2.0 * rng.random(model.rank) - 1.0) * half
        traj = dynamics.integrate(
            model, y0, t_end,
            rtol=float(sec.get("rtol", dynamics.RTOL)),
            atol=float(sec.get("atol", dynamics.ATOL)),
            n_samples=int(sec.get("n_samples", 101)),
        )
        for t, y in zip(traj.times, traj.states):
            rows.append([j, t, *y])
        ends.append([float(x) for x in traj.final])
    files = {"trajectories.csv": _csv(["trajectory", "t", *_coord_names(model.rank)], rows)}
    return files, {"n_trajectories": n, "endpoints": ends}, False


def cmd_audit(model, config, seed, threads):
    lams = config.get("audit", {}).get("lams", [model.lam])
    bounds = model.bounds()
    sets, checks, bad = [], [], False
    for lam in lams:
        m = model.at(lam=float(lam))
        sols = stationary.enumerate_solutions(m, seed=seed, threads=threads, **_solver_opts(config, m))
        audit = stationary.parity_audit(sols)
        V0 = m.base_potential()
        norms = [m.norm(m.potential(v)) for v in sols.solutions]
        dists = [m.norm(m.potential(v) - V0) for v in sols.solutions]
        ok_b1 = all(x <= bounds.B1_l2 * (1 + 1e-12) for x in norms)
        ok_b2 = all(x <= bounds.B2_l2 * (1 + 1e-12) for x in dists)
        ok = ok_b1 and ok_b2 and (not audit.conclusive or audit.total == 1)
        bad |= not ok
        sets.append(sols)
        checks.append(
            {"lam": float(lam), "n_solutions": len(sols), "degree": audit.total,
             "conclusive": audit.conclusive, "B1": ok_b1, "B2": ok_b2}
        )
    files = {"solutions.csv": solutions_csv(model.rank, sets)}
    return files, {"audits": checks, "lam_star": bounds.lam_star, "lam_L": bounds.lam_L}, bad


HANDLERS = {
    "solve": cmd_solve,
    "continue": cmd_continue,
    "sweep": cmd_sweep,
    "bifurcate": cmd_bifurcate,
    "simulate": cmd_simulate,
    "audit": cmd_audit,
}


# entry point -----------------------------------------------------------------


def _configure_logging():
    level = os.environ.get("NFCONT_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _parser():
    p = argparse.ArgumentParser(prog="nfcont", description="Stationary states and their branches for PG neural fields.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default="nfcont_out", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="random seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, default=None, help="worker threads")
    return p


def run(command: str, config: dict, out: Path, seed: int = 0, threads: int = 1) -> int:
    """Validate, compute, then write every artifact at once. Returns the exit status."""
    try:
        validate(config)
        model = build_model(config)
        files, summary, bad = HANDLERS[command](model, config, seed, threads)
    except ValueError as exc:
        # ConfigError, or a value rejected by the library (e.g. a seed outside the range)
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except (stationary.NewtonFailure, continuation.ContinuationError, dynamics.IntegrationError,
            np.linalg.LinAlgError, RuntimeError) as exc:
        logger.error("solver failure: %s", exc)
        return EXIT_SOLVER
    status = EXIT_INVARIANT if bad else EXIT_OK
    meta = {
        "command": command,
        "config": config,
        "seed": seed,
        "threads": threads,
        "versions": _versions(),
        "summary": summary,
        "exit_status": status,
    }
    files["run.json"] = json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n"
    out.mkdir(parents=True, exist_ok=True)
    for name in sorted(files):
        (out / name).write_text(files[name])
    if bad:
        logger.error("invariant violation; see %s", out / "run.json")
    return status


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def main(argv=None) -> int:
    _configure_logging()
    args = _parser().parse_args(argv)
    try:
        config = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        logger.error("cannot read config: %s", exc)
        return EXIT_CONFIG
    if not isinstance(config, dict):
        logger.error("config must be a JSON object")
        return EXIT_CONFIG
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    threads = args.threads if args.threads is not None else config.get("threads", 1)
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        logger.error("seed must be an unsigned 64-bit integer")
        return EXIT_CONFIG
    if not isinstance(threads, int) or threads < 1:
        logger.error("threads must be a positive integer")
        return EXIT_CONFIG
    return run(args.command, config, Path(args.out), seed, threads)


if __name__ == "__main__":
    sys.exit(main())
