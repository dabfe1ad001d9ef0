import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad

from infinifree.dual import DualScalar
from infinifree.errors import MissingReferenceError, SeriesRegimeError, ValidationError
from infinifree.measures import (
    InfLaw, cauchy_G, F_h_transforms, inf_cauchy_g, laurent_coefficients, law_from_samples,
)


def _semicircle_quadrature(z, variance=1.0):
    r = 2 * np.sqrt(variance)

    def density(x):
        return np.sqrt(r * r - x * x) / (2 * np.pi * variance)

    re = quad(lambda x: (density(x) / (z - x)).real, -r, r, epsabs=1e-13)[0]
    im = quad(lambda x: (density(x) / (z - x)).imag, -r, r, epsabs=1e-13)[0]
    return re + 1j * im


@pytest.mark.parametrize('z', [2j, 1 + 1j, -0.5 + 0.3j, 3 + 0.1j])
def test_semicircle_against_quadrature(z):
    law = InfLaw.semicircle(0.0, 1.0)
    assert cauchy_G(law, z).std == pytest.approx(_semicircle_quadrature(z), abs=1e-9)


def test_semicircle_variance_and_mean():
    law = InfLaw.semicircle(1.0, 0.25)
    z = 0.5 + 0.5j
    assert law.cauchy(z).std == pytest.approx(_semicircle_quadrature(z - 1.0, 0.25), abs=1e-9)
    assert law.std_moments[:3] == pytest.approx((1, 1, 1.25))


@pytest.mark.parametrize('law', [
    InfLaw.semicircle(0.0, 1.0),
    InfLaw.semicircle(0.5, 2.0),
    InfLaw.atomic([(-1.0, 0.25, 0.5), (2.0, 0.75, -0.5)]),
    InfLaw.from_moments(InfLaw.semicircle(0.0, 1.0, 16).std_moments),
])
def test_branch_at_infinity(law):
    y = 1e6
    G = law.cauchy(1j * y).std
    assert G * 1j * y == pytest.approx(1, abs=1e-6)
    assert G.imag < 0


def test_point_mass():
    law = InfLaw.atomic([(0.0, 1.0)])
    assert law.cauchy(2j).std == pytest.approx(-0.5j)
    assert inf_cauchy_g(law, 2j).std == 0


@pytest.mark.parametrize('z', [1 + 1j, 0.2 + 0.5j, -2 + 0.05j, 3j])
def test_continued_fraction_matches_closed_form(z):
    closed = InfLaw.semicircle(0.0, 1.0, 16)
    table = InfLaw.from_moments(closed.std_moments)
    assert table.kind == 'moment_table'
    assert table.cauchy(z).std == pytest.approx(closed.cauchy(z).std, abs=1e-8)


def test_continued_fraction_on_atoms():
    atomic = InfLaw.atomic([(-1.0, 0.25), (0.5, 0.5), (2.0, 0.25)], 12)
    table = InfLaw.from_moments(atomic.std_moments, support_bound=2.0)
    for z in [0.3 + 0.2j, 5j, -3 + 1j]:
        assert table.cauchy(z).std == pytest.approx(atomic.cauchy(z).std, abs=1e-10)


@pytest.mark.parametrize('law', [
    InfLaw.semicircle(0.0, 1.0),
    InfLaw.semicircle(-1.0, 2.0),
    InfLaw.atomic([(0.0, 0.3), (1.0, 0.7)]),
    InfLaw.from_moments(InfLaw.semicircle(0.5, 1.0, 16).std_moments),
])
def test_herglotz(law):
    for z in [0.1j, 1 + 0.01j, -3 + 2j, 10j]:
        G = law.cauchy(z).std
        assert G.imag < 0
        F, h = F_h_transforms(law, z)
        assert F.std.imag >= z.imag - 1e-12
        assert h.std == pytest.approx(F.std - z)


def test_semicircle_h_is_minus_G():
    law = InfLaw.semicircle(0.0, 1.0)
    for z in [1j, 0.5 + 0.2j]:
        _, h = law.F_h(z)
        assert h.std + law.cauchy(z).std == pytest.approx(0, abs=1e-12)


def test_derivatives_ride_along(spike):
    z = 0.7 + 0.4j
    point = spike.transform_point(z)
    step = 1e-6
    assert point.dG == pytest.approx((spike.cauchy(z + step).std - spike.cauchy(z - step).std) / (2 * step), rel=1e-7)
    assert point.g == pytest.approx(1 / (z - 2) - 1 / z)
    assert point.dg == pytest.approx(-1 / (z - 2) ** 2 + 1 / z ** 2)


def test_infinitesimal_flag_adds_g(spike):
    z = 1 + 1j
    tilde = spike.cauchy(z, infinitesimal=True)
    assert tilde.std == pytest.approx(1 / z)
    assert tilde.inf == pytest.approx(1 / (z - 2) - 1 / z)


def test_inf_cauchy_from_table(spike):
    table = InfLaw.from_moments(spike.std_moments, spike.inf_moments, support_bound=2.0)
    z = 8 + 1j
    assert table.inf_cauchy(z).std == pytest.approx(spike.inf_cauchy(z).std, abs=1e-9)
    with pytest.raises(SeriesRegimeError):
        table.inf_cauchy(1 + 1j)


@pytest.mark.parametrize('z', [2.05j, 4 + 1j])
def test_inf_cauchy_refuses_loose_tail(spike, z):
    # m′ₖ = 2ᵏ with 16 moments: the tail bound near |z| = 2 is far above tolerance
    table = InfLaw.from_moments(spike.std_moments, spike.inf_moments, support_bound=2.0)
    with pytest.raises(SeriesRegimeError, match='tail bound'):
        table.inf_cauchy(z)


def test_semicircle_has_no_inf_part():
    assert InfLaw.semicircle().inf_cauchy(1j).std == 0


@pytest.mark.parametrize('kwargs', [
    {'atoms': [(0, 0.5)]},
    {'atoms': [(0, 1.0, 0.5)]},
    {'atoms': []},
])
def test_atomic_validation(kwargs):
    with pytest.raises(ValidationError):
        InfLaw.atomic(**kwargs)


def test_moment_table_validation():
    with pytest.raises(ValidationError):
        InfLaw.from_moments([2, 0, 1])
    with pytest.raises(ValidationError):
        InfLaw.from_moments([1, 0, 1], [0.1, 0, 0])
    with pytest.raises(ValidationError):
        InfLaw.from_moments([1, 0, 1], [0, 0])


def test_real_point_inside_support():
    with pytest.raises(ValidationError):
        InfLaw.semicircle().cauchy(1.0)
    assert InfLaw.semicircle().cauchy(3.0).std == pytest.approx((3 - np.sqrt(5)) / 2)


def test_with_order(semicircle):
    assert semicircle.with_order(4).K == 4
    assert semicircle.with_order(4).std_moments == semicircle.std_moments[:5]
    table = InfLaw.from_moments(semicircle.std_moments)
    with pytest.raises(ValidationError):
        table.with_order(40)


def test_law_from_samples(semicircle):
    samples = np.array([[-1.0, 1.0], [0.0, 2.0]])
    law = law_from_samples(samples, K=4)
    assert law.std_moments[1] == pytest.approx(0.5)
    assert law.std_moments[2] == pytest.approx(1.5)
    with pytest.raises(MissingReferenceError):
        law_from_samples(samples, inf_scale=2, K=4)
    scaled = law_from_samples(samples, inf_scale=2, reference=semicircle, K=4)
    assert scaled.inf_moments[2] == pytest.approx(2 * (1.5 - 1))


def test_laurent_coefficients():
    a = 0.7
    coefficients = laurent_coefficients(lambda z: 1 / (z - a), 3.0, 8, points=128)
    assert_allclose(coefficients, [a ** k for k in range(9)], atol=1e-12)


def test_to_json_round_trip_fields(spike):
    data = spike.to_json()
    assert data['kind'] == 'atomic'
    assert data['atoms'] == [[0.0, 1.0, -1.0], [2.0, 0.0, 1.0]]
    assert len(data['std_moments']) == spike.K + 1


def test_dual_point_accepted(semicircle):
    result = semicircle.cauchy(DualScalar(1j, 1))
    G = semicircle.cauchy(1j).std
    # G′ = −G²/(1 − G²) for the standard semicircle, from G² − zG + 1 = 0
    assert result.inf == pytest.approx(G * G / (G * G - 1))
