import numpy as np
import pytest
from numpy.testing import assert_allclose

from infinifree.cumulants import MomentTableOracle
from infinifree.dual import (
    Dual, DualMatrix, DualScalar, TildeExpectation, dual_eval, dual_inv, dual_mul, tilde_expectation,
)
from infinifree.errors import DimensionError, SingularError
from infinifree.ncpoly import NCPoly


def _random_dual_matrix(rng, d=3):
    def sample():
        return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return DualMatrix(sample(), sample())


@pytest.mark.parametrize('x, y, expected', [
    ((1, 2), (3, 4), (3, 10)),
    ((2j, 0), (5, 0), (10j, 0)),
    ((1 + 1j, 1), (1 - 1j, -1), (2, -2j)),
])
def test_scalar_product(x, y, expected):
    result = dual_mul(DualScalar(*x), DualScalar(*y))
    assert result.std == pytest.approx(expected[0])
    assert result.inf == pytest.approx(expected[1])


@pytest.mark.parametrize('x, expected', [
    ((2, 0), (0.5, 0)),
    ((1, 3), (1, -3)),
    ((2j, 1), (-0.5j, 0.25)),
])
def test_scalar_inverse(x, expected):
    result = dual_inv(DualScalar(*x))
    assert result.std == pytest.approx(expected[0])
    assert result.inf == pytest.approx(expected[1])


def test_scalar_inverse_singular():
    with pytest.raises(SingularError):
        DualScalar(0, 1).inv()


def test_matrix_inverse_residual(rng):
    x = _random_dual_matrix(rng)
    product = x @ x.inv()
    assert_allclose(product.std, np.eye(3), atol=1e-12)
    assert_allclose(product.inf, 0, atol=1e-12)


def test_matrix_inverse_singular():
    with pytest.raises(SingularError):
        DualMatrix(np.zeros((2, 2)), np.eye(2)).inv()


def test_matches_block_arithmetic(rng):
    x, y, z = (_random_dual_matrix(rng) for _ in range(3))
    assert_allclose((x @ y).to_block(), x.to_block() @ y.to_block(), atol=1e-12)
    assert_allclose((x + y).to_block(), x.to_block() + y.to_block(), atol=1e-12)
    assert_allclose(x.inv().to_block(), np.linalg.inv(x.to_block()), atol=1e-10)
    assert_allclose((x @ (y @ z)).to_block(), ((x @ y) @ z).to_block(), atol=1e-12)


def test_mixed_operands(rng):
    x = _random_dual_matrix(rng, 2)
    b = rng.standard_normal((2, 2))
    assert_allclose((b @ x).std, b @ x.std)
    assert_allclose((x @ b).inf, x.inf @ b)
    assert_allclose((2 * x).inf, 2 * x.inf)
    assert_allclose((x - b).std, x.std - b)


@pytest.mark.parametrize('other', [1, 2.5, 0.5 - 2j])
def test_scalar_mixed_operands(other):
    x = DualScalar(2j, 3)
    for result, std, inf in [
        (x + other, 2j + other, 3),
        (other + x, 2j + other, 3),
        (x - other, 2j - other, 3),
        (other - x, other - 2j, -3),
        (x * other, 2j * other, 3 * other),
        (x / other, 2j / other, 3 / other),
        (other / x, other / 2j, -other * 3 / (2j) ** 2),
    ]:
        assert isinstance(result, DualScalar)
        assert result.std == pytest.approx(std)
        assert result.inf == pytest.approx(inf)
    assert Dual.lift(other).inf == 0


def test_dimension_checks():
    with pytest.raises(DimensionError):
        DualMatrix(np.eye(2), np.eye(3))
    with pytest.raises(DimensionError):
        DualMatrix(np.ones((2, 3)))
    with pytest.raises(DimensionError):
        dual_mul(DualMatrix.identity(2), DualMatrix.identity(3))
    with pytest.raises(DimensionError):
        dual_mul(DualScalar(1), DualMatrix.identity(2))


@pytest.mark.parametrize('fn, derivative, x', [
    (lambda z: z * z * z, lambda z: 3 * z ** 2, 2.0),
    (lambda z: 1 / (z - 1), lambda z: -1 / (z - 1) ** 2, 0.5 + 1j),
    (lambda z: (z * z + 1) / (z + 3j), lambda z: (2 * z * (z + 3j) - (z * z + 1)) / (z + 3j) ** 2, 1 - 2j),
    (lambda z: z.sqrt() if isinstance(z, DualScalar) else z ** 0.5, lambda z: 0.5 / z ** 0.5, 4.0),
])
def test_forward_derivative(fn, derivative, x):
    result = dual_eval(fn, x)
    assert result.std == pytest.approx(complex(fn(DualScalar(x)).std))
    assert result.inf == pytest.approx(derivative(x), rel=1e-12)

    h = 1e-6
    difference = (fn(DualScalar(x + h)).std - fn(DualScalar(x - h)).std) / (2 * h)
    assert result.inf == pytest.approx(difference, rel=1e-8, abs=1e-9)


def test_dual_over_polynomials():
    x = NCPoly.letter('x')
    product = Dual(x, NCPoly.constant(2)) * Dual(x, x)
    assert isinstance(product, Dual) and not isinstance(product, DualMatrix)
    assert product.std.degree == 2
    assert product.inf.degree == 2


def test_tilde_expectation():
    oracle = MomentTableOracle('x', [1, 0.5, 2.0, 1.0], [0, 0.3, -0.4, 0.2])
    te = TildeExpectation.from_oracle(oracle)
    x = NCPoly.letter('x')

    one = tilde_expectation(te, Dual(NCPoly.constant(1), NCPoly.constant(0)))
    assert_allclose(one.std, [[1]])
    assert_allclose(one.inf, [[0]])

    square = te(Dual(x @ x, NCPoly.constant(0)))
    assert_allclose(square.std, [[2.0]])
    assert_allclose(square.inf, [[-0.4]])

    # (a, −𝔼′(a)) has vanishing t-part
    centered = te(Dual(x, NCPoly.constant(-0.3)))
    assert_allclose(centered.std, [[0.5]])
    assert_allclose(centered.inf, [[0]], atol=1e-15)
