import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_pg_model
from nfcont.stationary import (
    NewtonFailure,
    classify,
    dedupe,
    degree_sign,
    enumerate_solutions,
    newton,
    newton_batch,
    parity_audit,
    picard,
    polish,
    sobol_starts,
)


def test_newton_converges_quadratically(ring):
    model = ring.at(lam=3.0, mu=1.0, eps=0.5)
    v, its = newton(model, np.zeros(3), full_output=True)
    assert np.linalg.norm(model.residual(v)) < 1e-10
    assert its <= 8


def test_newton_failure_reports_last_iterate(ring):
    with pytest.raises(NewtonFailure) as exc:
        newton(ring.at(lam=30.0), np.array([5.0, -5.0, 5.0]), max_iter=1)
    assert exc.value.last is not None


def test_batch_agrees_with_scalar(ring):
    model = ring.at(lam=8.0)
    starts = sobol_starts(model, 16, seed=3)
    states, ok, _ = newton_batch(model, starts)
    for s, good, v0 in zip(states, ok, starts):
        if good:
            assert np.linalg.norm(model.residual(s)) < 1e-10


def test_sobol_starts_fill_box(ring):
    model = ring.at(lam=5.0, mu=1.0)
    pts = sobol_starts(model, 100, seed=1)
    center, half = model.coordinate_box()
    assert pts.shape == (100, 3)
    assert np.all(np.abs(pts - center) <= half + 1e-12)
    np.testing.assert_array_equal(pts, sobol_starts(model, 100, seed=1))


def test_box_contains_every_solution(ring):
    model = ring.at(lam=8.0)
    sols = enumerate_solutions(model, n_starts=256)
    center, half = model.coordinate_box()
    assert np.all(np.abs(sols.solutions - center) <= half + 1e-12)


def test_dedupe_is_order_independent():
    rng = np.random.default_rng(0)
    base = rng.normal(size=(4, 3))
    noisy = np.vstack([base, base + 1e-9, base[::-1] - 1e-9])
    a = dedupe(noisy)
    b = dedupe(noisy[rng.permutation(len(noisy))])
    assert len(a) == 4
    np.testing.assert_allclose(a, b, atol=1e-8)
    assert dedupe(np.zeros((0, 3))).shape == (0, 3)


def test_classification_of_trivial_state(ring):
    below = classify(ring.at(lam=2.0), np.zeros(3))
    assert below.label == "stable node" and below.n_unstable == 0
    above = classify(ring.at(lam=6.0), np.zeros(3))
    assert above.n_unstable == 2
    assert above.label == "saddle"
    assert classify(ring.at(lam=4 / ring_sigma_sin(ring)), np.zeros(3)).marginal


def ring_sigma_sin(ring):
    return ring.kernel.coordinate_matrix[2, 2]


def test_degree_sign_zero_at_singular_point(ring):
    lam = 4 / ring_sigma_sin(ring)
    assert degree_sign(ring.at(lam=lam), np.zeros(3)) == 0
    assert degree_sign(ring.at(lam=1.0), np.zeros(3)) == 1


@given(seed=st.integers(0, 10_000))
def test_random_models_have_degree_one(seed):
    model = random_pg_model(seed)
    sols = enumerate_solutions(model, n_starts=128 * model.rank, seed=seed)
    report = parity_audit(sols, model)
    assert report.conclusive
    assert report.odd
    assert report.total == 1
    assert np.all(sols.residuals < 1e-9)


def test_missing_solution_breaks_parity(ring, caplog):
    model = ring.at(lam=6.0)
    sols = enumerate_solutions(model, n_starts=512)
    assert len(sols) == 5 and parity_audit(sols).ok
    sols.det_signs = sols.det_signs[1:]
    sols.solutions = sols.solutions[1:]
    with caplog.at_level("WARNING"):
        assert not parity_audit(sols).ok
    assert "parity audit failed" in caplog.text


def test_enumeration_is_deterministic_and_thread_safe(ring):
    model = ring.at(lam=6.0, mu=0.5, eps=0.2)
    a = enumerate_solutions(model, n_starts=300, seed=7)
    b = enumerate_solutions(model, n_starts=300, seed=7, threads=3)
    np.testing.assert_array_equal(a.solutions, b.solutions)
    with pytest.raises(ValueError):
        enumerate_solutions(model, n_starts=0)


def test_picard_contracts_below_threshold():
    model = random_pg_model(12)
    model = model.at(lam=0.9 * model.bounds().lam_star_l2)
    iterates, ratios = picard(model, np.zeros(model.rank), n_iter=40)
    assert np.all(ratios <= model.lam * model.bounds().frobenius_l2 + 1e-3)
    assert np.linalg.norm(model.residual(iterates[-1])) < 1e-6


def test_polishing_merges_roots_on_flat_directions(ring):
    # near the Heaviside limit the Jacobian has a singular value ~1e-5, so a
    # 1e-10 residual leaves ~1e-5 uncertainty in position
    model = ring.at(lam=29.0, mu=1.0)
    sols = enumerate_solutions(model)
    assert len(sols) == 23
    assert parity_audit(sols).ok
    assert np.all(sols.residuals < 1e-14)
    rough = np.array([s + np.array([0.0, 0.0, 3e-6]) for s in sols.solutions])
    np.testing.assert_allclose(polish(model, rough), sols.solutions, atol=1e-10)
