import numpy as np
import pytest
import sympy
from hypothesis import HealthCheck, settings

from nfcont import quadrature
from nfcont.model import FieldModel
from nfcont.pg_kernel import PGKernel
from nfcont.sigmoid import Logistic

settings.register_profile(
    "nfcont", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("nfcont")

X_SYM = sympy.Symbol("x")
BASIS = [
    sympy.Integer(1),
    X_SYM,
    X_SYM**2,
    sympy.cos(sympy.pi * X_SYM),
    sympy.sin(sympy.pi * X_SYM),
    sympy.cos(2 * sympy.pi * X_SYM),
]


def random_pg_model(seed, rank=None, symmetric=False, nodes=24, lam=None, shift=None):
    """A random rank <= 6 kernel on [-1, 1] with smooth factors, input and threshold."""
    rng = np.random.default_rng(seed)
    rank = rank or int(rng.integers(1, 7))

    def factor():
        c = rng.normal(size=len(BASIS)) / np.sqrt(len(BASIS))
        return sum(sympy.Float(round(a, 6)) * b for a, b in zip(c, BASIS))

    X = [factor() for _ in range(rank)]
    if symmetric:
        signs = rng.choice([-1, 1], size=rank)
        Y = [int(s) * x for s, x in zip(signs, X)]
    else:
        Y = [factor() for _ in range(rank)]
    grid = quadrature.build(1, nodes, (-1.0, 1.0), 0.5)
    kernel = PGKernel.from_expressions(X, Y, grid, variables=(X_SYM,))
    inp = 0.3 * rng.normal(size=rank) @ kernel.X[:, 0, :]
    sigmoid = Logistic(shift=float(rng.uniform(-1, 1)) if shift is None else shift)
    if lam is None:
        # up to five times the first threshold 1 / (s1 max|sigma|)
        top = np.abs(np.linalg.eigvals(kernel.coordinate_matrix)).max()
        lam = float(rng.uniform(0.2, 5.0) / (sigmoid.s(1) * top))
    return FieldModel(
        kernel=kernel,
        sigmoid=sigmoid,
        lam=lam,
        mu=float(rng.uniform(0, 1)),
        eps=float(rng.uniform(0, 1)),
        input=inp[None, :],
        theta=np.array([rng.normal() * 0.3]),
        name=f"random-{seed}",
    )


def rotation_model():
    """Rank 2 with K = [[1, -2], [2, 0.5]]: complex pair 0.75 +- i sqrt(15.75)/2."""
    grid = quadrature.build(1, 8, (-1.0, 1.0), 0.5)
    X = [sympy.Integer(1), sympy.sqrt(3) * X_SYM]
    K = [[1, -2], [2, sympy.Rational(1, 2)]]
    Y = [sum(K[j][k] * X[k] for k in range(2)) for j in range(2)]
    return FieldModel(kernel=PGKernel.from_expressions(X, Y, grid, variables=(X_SYM,)))


@pytest.fixture(scope="session")
def ring():
    from nfcont import build_ring

    return build_ring()


@pytest.fixture(scope="session")
def twopop():
    from nfcont import build_twopop

    return build_twopop()


# acceptance summary ----------------------------------------------------------

ACCEPTANCE = {}


def record(criterion, part, ok, detail=""):
    """Store one checked part of an acceptance criterion and echo it."""
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(ok), detail))
    print(f"criterion {criterion} [{part}]: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[c]
        ok = all(p[1] for p in parts)
        failed = "; ".join(f"{name}: {detail}" for name, good, detail in parts if not good)
        passed = ", ".join(name for name, good, _ in parts if good)
        line = f"criterion {c:>2}: {'PASS' if ok else 'FAIL'}"
        line += f"  (ok: {passed})" if passed else ""
        line += f"  (failed: {failed})" if failed else ""
        terminalreporter.write_line(line)
