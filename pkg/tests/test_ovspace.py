import numpy as np
import pytest
from numpy.testing import assert_allclose

from infinifree.cumulants import ScalarCumulants, free_cumulant, freeness_check, joint_from_free_cumulants
from infinifree.dual import DualMatrix
from infinifree.errors import SeriesRegimeError, SingularError, SizeCapError, ValidationError
from infinifree.measures import InfLaw
from infinifree.ovspace import (
    AtomicOVLaw, LiftedOracle, LinearMapOnB, SemicircularOVLaw, SeriesOVLaw, frechet_derivative,
    lift_law, lift_scalar_matrix, matrix_units, ov_cauchy_G, ov_inf_cauchy_g,
)


B = np.array([[4j, 0.5], [0.3, 1 + 3j]])


def test_matrix_units_order():
    units = list(matrix_units(2))
    assert len(units) == 4
    assert units[1][0, 1] == 1 and units[1].sum() == 1
    assert units[2][1, 0] == 1


def test_linear_maps(rng):
    a = rng.standard_normal((2, 2))
    left = LinearMapOnB.from_function(lambda c: a @ c, 2)
    right = LinearMapOnB.from_function(lambda c: c @ a, 2)
    c = rng.standard_normal((2, 2))
    assert_allclose((left @ right)(c), a @ c @ a)
    assert_allclose(left.inverse()(left(c)), c, atol=1e-12)
    assert_allclose(LinearMapOnB.identity(2)(c), c)
    with pytest.raises(SingularError):
        LinearMapOnB.from_function(lambda c: np.diag(np.diag(c)), 2).inverse()


@pytest.mark.parametrize('law', [
    AtomicOVLaw([(0.0, 1.0, 0.0)], 2),
    SemicircularOVLaw(lambda c: 0 * c, 2),
])
def test_zero_law(law):
    assert_allclose(ov_cauchy_G(law, B).std, np.linalg.inv(B), atol=1e-12)
    assert_allclose(ov_inf_cauchy_g(law, B).std, 0, atol=1e-12)


def test_frechet_derivative_of_zero_law(rng):
    law = AtomicOVLaw([(0.0, 1.0, 0.0)], 2)
    derivative = frechet_derivative(law, B)
    inverse = np.linalg.inv(B)
    c = rng.standard_normal((2, 2))
    assert_allclose(derivative(c), -inverse @ c @ inverse, atol=1e-12)


@pytest.mark.parametrize('z', [2j, 1 + 0.5j, -0.3 + 1j])
def test_lifted_semicircle_at_scalar_point(z):
    law = lift_law(InfLaw.semicircle(0.0, 1.0), 3)
    assert_allclose(law.cauchy(z * np.eye(3)).std, InfLaw.semicircle().cauchy(z).std * np.eye(3), atol=1e-10)


def test_semicircular_dyson_equation(rng):
    eta = lambda c: np.diag(np.diag(c)) + 0.5 * np.trace(c) * np.eye(2)
    law = SemicircularOVLaw(eta, 2, mean=np.diag([0.5, -0.5]))
    G = law.cauchy(B).std
    assert_allclose(G @ (B - law.mean - eta(G)), np.eye(2), atol=1e-10)
    assert (np.linalg.eigvalsh((G - G.conj().T) / 2j) < 0).all()


def test_semicircular_inf_cauchy_is_variance_derivative():
    z = np.array([[0.5 + 1j]])
    rate = 0.5
    law = SemicircularOVLaw(lambda c: c, 1, eta_inf=lambda c: rate * c)
    step = 1e-6
    plus = InfLaw.semicircle(0.0, 1 + step).cauchy(z[0, 0]).std
    minus = InfLaw.semicircle(0.0, 1 - step).cauchy(z[0, 0]).std
    assert law.inf_cauchy(z).std[0, 0] == pytest.approx(rate * (plus - minus) / (2 * step), rel=1e-6)
    tilde = law.cauchy(z, infinitesimal=True)
    assert tilde.inf[0, 0] == pytest.approx(law.inf_cauchy(z).std[0, 0], rel=1e-9)


def test_series_law_matches_atomic():
    atoms = [(-1.0, 0.25, 0.5), (0.5, 0.5, -0.25), (1.0, 0.25, -0.25)]
    law = InfLaw.atomic(atoms, 40)
    table = lift_law(InfLaw.from_moments(law.std_moments, law.inf_moments, 1.0), 2)
    exact = lift_law(law, 2)
    assert isinstance(table, SeriesOVLaw) and isinstance(exact, AtomicOVLaw)
    assert_allclose(table.cauchy(B).std, exact.cauchy(B).std, atol=1e-11)
    assert_allclose(table.inf_cauchy(B).std, exact.inf_cauchy(B).std, atol=1e-11)
    G, bound = table.cauchy_with_bound(B)
    assert bound <= 1e-12


def test_series_law_refuses_outside_regime():
    law = InfLaw.from_moments(InfLaw.semicircle(0, 1, 40).std_moments, support_bound=2.0)
    series = lift_law(law, 2)
    with pytest.raises(SeriesRegimeError):
        series.cauchy(1j * np.eye(2))
    with pytest.raises(SeriesRegimeError):
        SeriesOVLaw(law.oracle('x', 2), 'x', 2.0, K=3).cauchy(3j * np.eye(2))


def test_bimodule_covariance():
    law = AtomicOVLaw([(-1.0, 0.5, 1.0), (2.0, 0.5, -1.0)], 3)
    u = np.eye(3)[[2, 0, 1]]
    b = np.array([[1 + 2j, 0.2, 0], [0.1, 3j, 0.4], [0, 0.3, -1 + 1j]])
    assert_allclose(law.cauchy(u @ b @ u.T).std, u @ law.cauchy(b).std @ u.T, atol=1e-12)
    assert_allclose(law.inf_cauchy(u @ b @ u.T).std, u @ law.inf_cauchy(b).std @ u.T, atol=1e-12)


def test_dual_direction_gives_derivative(rng):
    law = lift_law(InfLaw.semicircle(0.0, 1.0), 2)
    c = rng.standard_normal((2, 2))
    step = 1e-6
    difference = (law.cauchy(B + step * c).std - law.cauchy(B - step * c).std) / (2 * step)
    assert_allclose(law.cauchy(DualMatrix(B, c)).inf, difference, atol=1e-7)


@pytest.fixture
def scalar_pair():
    return joint_from_free_cumulants([
        ScalarCumulants.single('s', [0, 1] + [0] * 8),
        ScalarCumulants.single('p', [0] * 10, [2.0 ** n for n in range(1, 11)]),
    ])


def test_lifted_moments(scalar_pair):
    oracle = LiftedOracle(scalar_pair, {'A': [['s', 'p'], ['p', 's']]}, 2)
    identity = [np.eye(2)] * 3
    # (A²)₁₁ = s² + p², (A²)₁₂ = sp + ps
    assert_allclose(oracle.expect(('A', 'A'), identity), np.eye(2), atol=1e-12)
    assert_allclose(oracle.inf_expect(('A', 'A'), identity), 4 * np.eye(2), atol=1e-12)


def test_lifted_diagonal_is_tensor(scalar_pair):
    oracle = LiftedOracle(scalar_pair, {'A': [['s', None], [None, 's']]}, 2)
    for n, expected in [(2, 1), (3, 0), (4, 2)]:
        coeffs = [np.eye(2)] * (n + 1)
        assert_allclose(oracle.expect(('A',) * n, coeffs), expected * np.eye(2), atol=1e-12)


@pytest.mark.parametrize('N', [2, 3])
@pytest.mark.parametrize('n', [1, 2, 3, 4])
def test_lifted_cumulants_sum_entry_cumulants(scalar_pair, N, n):
    entries = [['s' if (i + j) % 2 == 0 else 'p' for j in range(N)] for i in range(N)]
    oracle = LiftedOracle(scalar_pair, {'A': entries}, N)
    k, dk = free_cumulant(oracle, ['A'] * n)
    for i in range(N):
        for j in range(N):
            expected_k = expected_dk = 0
            for path in np.ndindex(*(N,) * (n - 1)):
                index = (i,) + path + (j,)
                std, inf = free_cumulant(scalar_pair, [entries[index[m]][index[m + 1]] for m in range(n)])
                expected_k += std[0, 0]
                expected_dk += inf[0, 0]
            assert k[i, j] == pytest.approx(expected_k, abs=1e-9)
            assert dk[i, j] == pytest.approx(expected_dk, abs=1e-9)


def test_lifted_matrices_are_free_over_matrices(scalar_pair):
    # entries from free families in separate matrices
    oracle = LiftedOracle(scalar_pair, {'S': [['s', None], [None, 's']], 'P': [['p', None], [None, None]]}, 2)
    report = freeness_check(oracle, {'S': 0, 'P': 1}, 3, mixed_order=3)
    assert report.max_violation < 1e-9


def test_lift_scalar_matrix_needs_bound(scalar_pair):
    law = lift_scalar_matrix(scalar_pair, {'A': [['s', None], [None, 's']]}, 2)
    with pytest.raises(SeriesRegimeError):
        law.cauchy(10j * np.eye(2))
    bounded = lift_scalar_matrix(scalar_pair, {'A': [['s', None], [None, 's']]}, 2, M=2.0, K=10)
    G, bound = bounded.cauchy_with_bound(30j * np.eye(2))
    assert_allclose(G.std, InfLaw.semicircle().cauchy(30j).std * np.eye(2), atol=bound + 1e-12)


def test_size_caps(scalar_pair):
    with pytest.raises(SizeCapError):
        SemicircularOVLaw(lambda c: c, 7)
    with pytest.raises(SizeCapError):
        LiftedOracle(scalar_pair, {'A': [['s'] * 9] * 9}, 9)
    with pytest.raises(SizeCapError):
        lift_law(InfLaw.semicircle(), 7)


def test_oracle_is_bounded_bimodule_map(rng):
    law = lift_law(InfLaw.from_moments(InfLaw.semicircle(0, 1, 12).std_moments, support_bound=2.0), 2)
    oracle = law.oracle

    def random_matrix():
        return rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))

    for n in range(1, 5):
        coeffs = [random_matrix() for _ in range(n + 1)]
        value = oracle.expect(('x',) * n, coeffs)
        bound = law.M ** n * np.prod([np.linalg.norm(c, 2) for c in coeffs])
        assert np.linalg.norm(value, 2) <= bound * (1 + 1e-12)

        left, right = random_matrix(), random_matrix()
        outer = [left @ coeffs[0]] + coeffs[1:-1] + [coeffs[-1] @ right]
        assert_allclose(oracle.expect(('x',) * n, outer), left @ value @ right, atol=1e-10)


def test_atomic_law_rejects_negative_weight():
    with pytest.raises(ValidationError, match='non-negative'):
        AtomicOVLaw([(0.0, 1.0001, -1.0), (2.0, -0.0001, 1.0)], 1)
