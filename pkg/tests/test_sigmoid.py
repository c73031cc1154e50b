import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from nfcont.sigmoid import LOGISTIC, Heaviside, Logistic, deriv, shifted, square_bound_check

z_sym = sympy.Symbol("z")


def sympy_derivative(q, shift):
    S = 1 / (1 + sympy.exp(-(z_sym - shift)))
    return sympy.lambdify(z_sym, sympy.diff(S, z_sym, q), "numpy")


@pytest.mark.parametrize("q", [1, 2, 3, 4])
@given(z=st.floats(-30, 30), shift=st.floats(-2, 2))
def test_derivatives_match_symbolic(q, z, shift):
    expected = sympy_derivative(q, shift)(z)
    assert Logistic(shift=shift).deriv(z, q) == pytest.approx(expected, rel=1e-9, abs=1e-14)


def test_derivatives_at_origin():
    # s1 = 1/4, s2 = 0, s3 = -1/8 for the unshifted logistic
    assert LOGISTIC.s(1) == pytest.approx(0.25)
    assert LOGISTIC.s(2) == pytest.approx(0.0, abs=1e-16)
    assert LOGISTIC.s(3) == pytest.approx(-0.125)


def test_odd_orders_only_nonzero_when_symmetric():
    assert LOGISTIC.s(4) == pytest.approx(0.0, abs=1e-16)
    shifted_sigmoid = Logistic(shift=1.3)
    assert abs(shifted_sigmoid.s(2)) > 1e-3


def test_shifted_vanishes_at_origin_and_is_odd():
    z = np.linspace(-8, 8, 41)
    assert shifted(0.0) == 0.0
    np.testing.assert_allclose(shifted(-z), -shifted(z), atol=1e-15)


@given(z=st.floats(-40, 40), shift=st.floats(-3, 3))
def test_primitive_differentiates_to_shifted(z, shift):
    S = Logistic(shift=shift)
    h = 1e-5
    fd = (S.primitive_shifted(z + h) - S.primitive_shifted(z - h)) / (2 * h)
    assert fd == pytest.approx(S.shifted(z), abs=1e-8)
    assert S.primitive_shifted(0.0) == pytest.approx(0.0, abs=1e-15)


def test_no_overflow_for_large_arguments():
    z = np.array([-1e4, 1e4])
    assert np.all(np.isfinite(deriv(z, 3)))
    assert np.all(np.isfinite(LOGISTIC.primitive_shifted(z)))


def test_square_bound_random_sweep():
    rng = np.random.default_rng(1)
    x = rng.uniform(-20, 20, 10_000)
    lam = rng.uniform(0, 20, 10_000)
    assert square_bound_check(x, lam).all()


def test_sup_and_lipschitz():
    S = Logistic(shift=1.3)
    z = np.linspace(-50, 50, 100_001)
    assert np.abs(S.shifted(z)).max() <= S.sup_shifted + 1e-15
    assert np.abs(S.deriv(z)).max() <= S.lipschitz + 1e-15


def test_order_out_of_range():
    with pytest.raises(ValueError):
        LOGISTIC.deriv(0.0, 5)
    with pytest.raises(ValueError):
        LOGISTIC.deriv(0.0, 0)


def test_heaviside_limit():
    H = Heaviside()
    assert H.s0 == 0.5
    z = np.array([-1.0, 1.0])
    np.testing.assert_allclose(H.shifted(z), [-0.5, 0.5])
    np.testing.assert_allclose(Logistic()(200 * z), H(z), atol=1e-12)
    assert np.isnan(H.deriv(0.0))
