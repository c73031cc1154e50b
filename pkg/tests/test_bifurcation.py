import numpy as np
import pytest
import sympy
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from nfcont import quadrature
from nfcont.bifurcation import (
    candidates,
    chi,
    hopf_l1,
    hopf_lambda,
    pitchfork_persistence,
    reduced_roots,
    turning_gap,
)
from nfcont.continuation import branch_through, trace_family
from nfcont.model import FieldModel
from nfcont.model_zoo import build_ring
from nfcont.pg_kernel import PGKernel
from nfcont.sigmoid import Logistic

x = sympy.Symbol("x")
GRID = quadrature.build(1, 8, (-1.0, 1.0), 0.5)


def kernel_from_matrix(K):
    """Kernel with orthonormal X = (1, sqrt(3) x, ...) and coordinate matrix K."""
    X = [sympy.Integer(1), sympy.sqrt(3) * x][: len(K)]
    Y = [sum(sympy.nsimplify(K[j][k]) * X[k] for k in range(len(K))) for j in range(len(K))]
    return PGKernel.from_expressions(X, Y, GRID, variables=(x,))


def kuznetsov_l1(g1, g2, sigmoid):
    """First Lyapunov coefficient of v' = -v + J S0(lam v) with J = [[g1, -g2], [g2, g1]]
    from the generic projection formula (critical eigenvectors p, q with <p, q> = 1)."""
    s1, s2, s3 = (sigmoid.s(q) for q in (1, 2, 3))
    lam = 1 / (s1 * g1)
    J = np.array([[g1, -g2], [g2, g1]])
    A = -np.eye(2) + lam * s1 * J
    w, V = np.linalg.eig(A)
    i = np.argmax(w.imag)
    omega, q = w[i].imag, V[:, i]
    wl, U = np.linalg.eig(A.T)
    p = U[:, np.argmin(wl.imag)]
    p = p / np.conj(np.conj(p) @ q)

    def B(a, b):
        return J @ (lam**2 * s2 * a * b)

    def C(a, b, c):
        return J @ (lam**3 * s3 * a * b * c)

    val = (
        np.conj(p) @ C(q, q, q.conj())
        - 2 * np.conj(p) @ B(q, np.linalg.solve(A, B(q, q.conj())))
        + np.conj(p) @ B(q.conj(), np.linalg.solve(2j * omega * np.eye(2) - A, B(q, q)))
    )
    return val.real / (2 * omega)


@pytest.mark.parametrize("shift", [0.5, 1.0, 1.3, -1.0])
@pytest.mark.parametrize("g", [(1.0, 1.0), (1.0, 2.0), (2.0, 0.5)])
def test_l1_sign_agrees_with_projection_formula(shift, g):
    S = Logistic(shift=shift)
    ref = kuznetsov_l1(*g, S)
    assert ref < 0
    assert np.sign(hopf_l1(*g, hopf_lambda(g[0], S.s(1)), S)) == np.sign(ref)


def test_l1_closed_form_disagrees_for_large_shift():
    # documented limitation: for s2^2 small relative to |s3| s1 the closed form changes sign
    S = Logistic(shift=2.0)
    assert kuznetsov_l1(1.0, 2.0, S) < 0
    assert hopf_l1(1.0, 2.0, hopf_lambda(1.0, S.s(1)), S) > 0


def test_supercritical_hopf_decays_at_threshold():
    S = Logistic(shift=1.3)
    g1, g2 = 1.0, 1.0
    J = np.array([[g1, -g2], [g2, g1]])
    lam = 1 / (S.s(1) * g1)
    sol = solve_ivp(lambda t, v: -v + J @ S.shifted(lam * v), (0, 400), [0.05, 0.0],
                    rtol=1e-10, atol=1e-12, dense_output=True)
    early = np.linalg.norm(sol.sol(np.linspace(0, 20, 400)), axis=0).max()
    late = np.linalg.norm(sol.sol(np.linspace(380, 400, 400)), axis=0).max()
    assert late < 0.7 * early


def test_hopf_helpers_errors(caplog):
    assert hopf_lambda(2.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        hopf_lambda(0.0)
    with pytest.raises(ValueError):
        hopf_l1(-1.0, 1.0, 1.0)
    with caplog.at_level("WARNING"):
        assert hopf_l1(1.0, 1.0, 2.0, Logistic()) == 0.0
    assert "degenerate" in caplog.text


def scalar_model(kappa=2.0, shift=0.0):
    k = PGKernel.from_expressions([sympy.Integer(1)], [sympy.Float(kappa)], GRID, variables=(x,))
    return FieldModel(kernel=k, sigmoid=Logistic(shift=shift))


def test_chi_scalar_closed_form():
    # v = tanh(lam v / 2) for kappa = 2: lam = 2 atanh(v) / v = 2 + 2 v^2 / 3 + ...
    model = scalar_model()
    c3 = chi(model, 0, 3)
    assert c3 == pytest.approx(-1.0 / 3.0, rel=1e-12)
    with pytest.raises(ValueError, match="higher order"):
        chi(model, 0, 2)
    lam = 2.02
    roots = reduced_roots(lam, 2.0, c3, 3)
    assert len(roots) == 3
    v_exact = brentq(lambda v: 2 * np.arctanh(v) / v - lam, 1e-6, 0.9)
    assert roots[-1] == pytest.approx(v_exact, rel=0.02)
    assert roots[0] == pytest.approx(-roots[-1])


def test_reduced_roots_algebra():
    assert reduced_roots(1.0, 2.0, -0.5, 3) == [0.0]
    r = reduced_roots(3.0, 2.0, -0.5, 3)
    np.testing.assert_allclose(r, [-1.0, 0.0, 1.0], atol=1e-12)
    r2 = reduced_roots(3.0, 2.0, 0.5, 2)
    np.testing.assert_allclose(r2, [-1.0, 0.0], atol=1e-12)
    # an imperfection removes the symmetric pair on one side
    assert len(reduced_roots(2.2, 2.0, -1.0, 3, Ibar=0.5)) == 1
    with pytest.raises(ValueError):
        reduced_roots(1.0, 1.0, 0.0, 3)
    with pytest.raises(ValueError):
        reduced_roots(1.0, 1.0, 1.0, 4)


def test_shifted_sigmoid_gives_transcritical():
    report = candidates(scalar_model(shift=1.3))
    (c,) = report.admissible()
    assert c.kind == "transcritical" and c.q == 2
    assert c.orientation == "both sides"
    assert c.lam == pytest.approx(1 / (Logistic(shift=1.3).s(1) * 2.0))


def test_ring_candidates(ring):
    report = candidates(ring)
    adm = report.admissible()
    assert [c.kind for c in adm] == ["pitchfork", "pitchfork"]
    assert [c.label for c in adm] == ["x:even", "x:odd"]
    assert all(c.orientation == "lam > lam_n" and c.chi < 0 for c in adm)
    sig = np.sort(np.linalg.eigvals(ring.kernel.coordinate_matrix).real)
    np.testing.assert_allclose([c.lam for c in adm], 4 / sig[::-1][:2], rtol=1e-12)
    assert sum(c.kind == "inadmissible" for c in report.candidates) == 1


def test_hopf_and_zero_candidates():
    report = candidates(FieldModel(kernel=kernel_from_matrix([[1, -2], [2, 0.5]])))
    (h,) = report.hopf()
    assert h.lam_hopf_linear == pytest.approx(16 / 3)
    assert h.lam_hopf_formula == pytest.approx(8 / 3)
    zero = candidates(FieldModel(kernel=kernel_from_matrix([[1, 0], [0, 0]])))
    kinds = sorted(c.kind for c in zero.candidates)
    assert kinds == ["pitchfork", "zero"]


def test_chi_refuses_bad_eigenvalues():
    model = FieldModel(kernel=kernel_from_matrix([[1, -2], [2, 0.5]]))
    with pytest.raises(ValueError):
        chi(model, 0, 3)
    double = FieldModel(kernel=kernel_from_matrix([[1, 0], [0, 1]]))
    with pytest.raises(ValueError, match="not simple"):
        chi(double, 0, 3)


def test_pitchfork_persistence(ring):
    v1, v2, lam0 = pitchfork_persistence(ring, 0.0)
    assert (v1, v2) == (0.0, 0.0)
    assert lam0 == pytest.approx(4 / ring.kernel.coordinate_matrix[2, 2], rel=1e-12)
    v1, v2, lam = pitchfork_persistence(ring, 0.3)
    m = ring.at(lam=lam, mu=0.3)
    v = np.array([v1, v2, 0.0])
    assert np.linalg.norm(m.residual(v)) < 1e-9
    assert abs(m.jacobian(v)[2, 2]) < 1e-9
    _, _, lam_near = pitchfork_persistence(ring, 0.29)
    assert abs(lam_near - lam) < 0.2


def test_pitchfork_persistence_refusals(ring):
    with pytest.raises(ValueError):
        pitchfork_persistence(ring.at(eps=0.5).with_params(input=build_ring(x0=0.2).input), 0.1)
    with pytest.raises(ValueError):
        pitchfork_persistence(ring, -0.1)
    with pytest.raises(ValueError):
        pitchfork_persistence(scalar_model(), 0.1)


def test_turning_gap():
    model = FieldModel(kernel=scalar_model().kernel, input=np.full((1, GRID.size), 0.3), eps=1.0)
    fam = trace_family(model, model.params, (0.0, 8.0))
    assert np.isnan(turning_gap(fam, 1.0))
    # the broken pitchfork folds on the branch not seeded from lam = 0
    lower = branch_through(model, np.array([8.0, 0.0, 1.0]), np.array([-0.7]), (0.0, 8.0))
    (tp,) = lower.turning_points()
    assert turning_gap([lower], 1.0) == pytest.approx(tp.value - 1.0)
