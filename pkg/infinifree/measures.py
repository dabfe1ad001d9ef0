"""
Scalar infinitesimal laws (μ, μ′) and their transforms G, g, F and h.

Every transform takes a `DualScalar` point and returns a `DualScalar`. Seeding
z with a unit t-part therefore returns the z-derivative alongside the value.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .cumulants import MomentTableOracle
from .dual import DualScalar
from .errors import (
    MissingReferenceError, PoleError, SeriesRegimeError, SingularError, ValidationError,
)
from .ncpart import catalan


__all__ = [
    'DEFAULT_ORDER', 'InfLaw', 'TransformPoint', 'cauchy_G', 'inf_cauchy_g',
    'F_h_transforms', 'law_from_samples', 'laurent_coefficients', 'semicircle_cauchy',
]

log = logging.getLogger(__name__)

DEFAULT_ORDER = 16
MOMENT_TOL = 1e-9
# recurrence coefficients below this (relative to β₀) end the continued fraction
BETA_FLOOR = 1e-13
# largest accepted truncation bound of the Laurent series for g
LAURENT_TOL = 1e-8

Point = Union[complex, DualScalar]


def _point(z: Point) -> DualScalar:
    return z if isinstance(z, DualScalar) else DualScalar(z)


def semicircle_cauchy(w: DualScalar, variance: float) -> DualScalar:
    """
    G of the centered semicircle of @variance at w. The square root is split as
    √(w−2σ)·√(w+2σ) so that the principal branches give G(w) ~ 1/w off the
    cut in both half planes.
    """
    if variance == 0:
        return 1 / w
    sigma = math.sqrt(variance)
    root = (w - 2 * sigma).sqrt() * (w + 2 * sigma).sqrt()
    # (w − root)/(2σ²) rationalized; w + root does not cancel on this branch
    return 2 / (w + root)


def _semicircle_moments(mean: float, variance: float, K: int) -> list[float]:
    # moments of mean + √variance·s with s standard semicircular
    centered = [catalan(k // 2) * variance ** (k // 2) if k % 2 == 0 else 0.0 for k in range(K + 1)]
    return [
        float(sum(math.comb(k, j) * mean ** (k - j) * centered[j] for j in range(k + 1)))
        for k in range(K + 1)
    ]


def _atomic_moments(atoms, K: int, column: int) -> list[float]:
    return [float(sum(a[column] * a[0] ** k for a in atoms)) for k in range(K + 1)]


def _jacobi_coefficients(moments: Sequence[float]) -> tuple[list[float], list[float]]:
    """
    Recurrence coefficients (αₖ, βₖ) of the monic orthogonal polynomials of a
    moment sequence, by the Chebyshev algorithm. β₀ is the total mass.
    Stops early when βₖ vanishes, i.e. the measure has finitely many atoms.
    """
    n = len(moments) // 2
    if n == 0:
        raise ValidationError('at least two moments are needed for a continued fraction')
    alpha = [moments[1] / moments[0]]
    beta = [moments[0]]
    previous = [0.0] * len(moments)
    current = list(moments)
    for k in range(1, n):
        following = [0.0] * len(moments)
        for l in range(k, 2 * n - k):
            following[l] = current[l + 1] - alpha[k - 1] * current[l] - beta[k - 1] * previous[l]
        if abs(following[k]) <= BETA_FLOOR * abs(beta[0]) * max(1.0, abs(current[k - 1])):
            break
        alpha.append(following[k + 1] / following[k] - current[k] / current[k - 1])
        beta.append(following[k] / current[k - 1])
        previous, current = current, following
    return alpha, beta


@dataclasses.dataclass(frozen=True)
class TransformPoint:
    z: complex
    G: complex
    g: complex
    dG: Optional[complex] = None
    dg: Optional[complex] = None


@dataclasses.dataclass(frozen=True)
class InfLaw:
    """
    The law of x in (𝒜, φ, φ′): the moments mₖ = φ(xᵏ) and m′ₖ = φ′(xᵏ) up to
    order K, and a bound M with |mₖ| ≤ Mᵏ.

    Build one with `semicircle`, `atomic` or `from_moments`. Atoms are
    (location, weight, infinitesimal weight) triples. The weights sum to 1 and
    the infinitesimal weights sum to 0.
    """
    kind: str
    std_moments: tuple[float, ...]
    inf_moments: tuple[float, ...]
    support_bound: float
    mean: float = 0.0
    variance: float = 0.0
    atoms: tuple[tuple[float, float, float], ...] = ()

    KINDS = ('semicircle', 'atomic', 'moment_table')

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValidationError(f'unknown law kind {self.kind!r}')
        if len(self.std_moments) != len(self.inf_moments):
            raise ValidationError(
                f'std and inf moment tables differ in order ({len(self.std_moments) - 1} vs {len(self.inf_moments) - 1})'
            )
        if not self.std_moments:
            raise ValidationError('moment table is empty')
        if abs(self.std_moments[0] - 1) > MOMENT_TOL:
            raise ValidationError(f'm₀ must be 1 ({self.std_moments[0]})')
        if abs(self.inf_moments[0]) > MOMENT_TOL:
            raise ValidationError(f"m′₀ must be 0 ({self.inf_moments[0]})")
        if self.support_bound < 0:
            raise ValidationError(f'support bound must be non-negative ({self.support_bound})')
        if self.kind == 'semicircle' and self.variance < 0:
            raise ValidationError(f'variance must be non-negative ({self.variance})')

    @classmethod
    def semicircle(cls, mean: float = 0.0, variance: float = 1.0, K: int = DEFAULT_ORDER) -> InfLaw:
        moments = tuple(_semicircle_moments(mean, variance, K))
        return cls('semicircle', moments, (0.0,) * (K + 1), abs(mean) + 2 * math.sqrt(variance),
                   mean=mean, variance=variance)

    @classmethod
    def atomic(cls, atoms: Iterable[Sequence[float]], K: int = DEFAULT_ORDER) -> InfLaw:
        atoms = tuple((float(a[0]), float(a[1]), float(a[2]) if len(a) > 2 else 0.0) for a in atoms)
        if not atoms:
            raise ValidationError('atomic law needs at least one atom')
        total = sum(a[1] for a in atoms)
        if abs(total - 1) > MOMENT_TOL:
            raise ValidationError(f'atom weights must sum to 1 ({total})')
        inf_total = sum(a[2] for a in atoms)
        if abs(inf_total) > MOMENT_TOL:
            raise ValidationError(f'infinitesimal atom weights must sum to 0 ({inf_total})')
        return cls('atomic', tuple(_atomic_moments(atoms, K, 1)), tuple(_atomic_moments(atoms, K, 2)),
                   max(abs(a[0]) for a in atoms), atoms=atoms)

    @classmethod
    def from_moments(cls, std_moments: Sequence[float], inf_moments: Sequence[float] = None,
                     support_bound: float = None) -> InfLaw:
        std_moments = tuple(float(m) for m in std_moments)
        inf_moments = (0.0,) * len(std_moments) if inf_moments is None else tuple(float(m) for m in inf_moments)
        if support_bound is None:
            even = [abs(std_moments[k]) ** (1 / k) for k in range(2, len(std_moments), 2)]
            support_bound = max(even, default=abs(std_moments[1]) if len(std_moments) > 1 else 0.0)
        return cls('moment_table', std_moments, inf_moments, float(support_bound))

    @property
    def K(self) -> int:
        return len(self.std_moments) - 1

    def with_order(self, K: int) -> InfLaw:
        """The same law with moment tables of order @K."""
        if self.kind == 'semicircle':
            return InfLaw.semicircle(self.mean, self.variance, K)
        if self.kind == 'atomic':
            return InfLaw.atomic(self.atoms, K)
        if K > self.K:
            raise ValidationError(f'moment table holds order {self.K}, {K} requested')
        return InfLaw.from_moments(self.std_moments[:K + 1], self.inf_moments[:K + 1], self.support_bound)

    def oracle(self, label: str = 'x', d: int = 1) -> MomentTableOracle:
        """(𝔼, 𝔼′) of x⊗I_d, for the cumulant engines."""
        return MomentTableOracle(label, self.std_moments, self.inf_moments, d)

    @cached_property
    def jacobi(self) -> tuple[list[float], list[float]]:
        return _jacobi_coefficients(self.std_moments)

    def _check_point(self, z: DualScalar):
        if z.std.imag <= 0 and abs(z.std) <= self.support_bound:
            raise ValidationError(f'z = {z.std} is neither in the upper half plane nor outside the support bound')

    def cauchy(self, z: Point, infinitesimal: bool = False) -> DualScalar:
        """
        G(z) = φ((z − x)⁻¹). With @infinitesimal the t-part also picks up
        g(z), i.e. the result is G̃ of the upper-triangular law at z.
        """
        z = _point(z)
        self._check_point(z)
        if self.kind == 'semicircle':
            G = semicircle_cauchy(z - self.mean, self.variance)
        elif self.kind == 'atomic':
            G = self._atomic_sum(z, 1)
        else:
            G = self._continued_fraction(z)
        if infinitesimal:
            G = G + DualScalar(0, self.inf_cauchy(z.std).std)
        return G

    def inf_cauchy(self, z: Point) -> DualScalar:
        """g(z) = φ′((z − x)⁻¹)."""
        z = _point(z)
        self._check_point(z)
        if self.kind == 'semicircle':
            return DualScalar(0)
        if self.kind == 'atomic':
            return self._atomic_sum(z, 2)
        return self._laurent_sum(z, self.inf_moments)

    def _atomic_sum(self, z: DualScalar, column: int) -> DualScalar:
        total = DualScalar(0)
        for atom in self.atoms:
            weight = atom[column]
            if weight == 0:
                continue
            if abs(z.std - atom[0]) < 1e-300:
                raise PoleError(f'evaluation at the atom {atom[0]}')
            total = total + weight / (z - atom[0])
        return total

    def _continued_fraction(self, z: DualScalar) -> DualScalar:
        alpha, beta = self.jacobi
        n = len(alpha)
        if n == len(self.std_moments) // 2:
            # the last level continues as a semicircle with the final coefficients
            tail = semicircle_cauchy(z - alpha[-1], beta[-1]) if n > 1 else 1 / (z - alpha[-1])
        else:
            tail = 1 / (z - alpha[-1])
        for k in range(n - 2, -1, -1):
            denominator = z - alpha[k] - beta[k + 1] * tail
            if abs(denominator.std) < 1e-300:
                raise PoleError(f'continued fraction denominator vanishes at z = {z.std}')
            tail = 1 / denominator
        return beta[0] * tail

    def _laurent_sum(self, z: DualScalar, moments: Sequence[float]) -> DualScalar:
        M = self.support_bound
        if abs(z.std) <= M:
            raise SeriesRegimeError(f'|z| = {abs(z.std):.6g} inside the support bound {M:.6g}; Laurent series diverges')
        inverse = 1 / z
        power = inverse
        total = DualScalar(0)
        for m in moments:
            total = total + m * power
            power = power * inverse
        if M > 0:
            scale = max(abs(m) / M ** k for k, m in enumerate(moments) if k > 0) if len(moments) > 1 else 0.0
            bound = scale * (M / abs(z.std)) ** (self.K + 1) / (abs(z.std) - M)
            log.debug('Laurent tail bound at z = %s: %.3g', z.std, bound)
            if bound > LAURENT_TOL:
                raise SeriesRegimeError(
                    f'Laurent tail bound {bound:.3g} above {LAURENT_TOL:.3g} at |z| = {abs(z.std):.6g} with {self.K} moments'
                )
        return total

    def F_h(self, z: Point) -> tuple[DualScalar, DualScalar]:
        z = _point(z)
        G = self.cauchy(z)
        if G.std == 0:
            raise SingularError(f'G vanishes at z = {z.std}')
        F = 1 / G
        return F, F - z

    def transform_point(self, z: complex) -> TransformPoint:
        G = self.cauchy(DualScalar(z, 1))
        g = self.inf_cauchy(DualScalar(z, 1))
        return TransformPoint(z, G.std, g.std, G.inf, g.inf)

    def to_json(self) -> dict:
        data = {
            'kind': self.kind,
            'std_moments': list(self.std_moments),
            'inf_moments': list(self.inf_moments),
            'support_bound': self.support_bound,
        }
        if self.kind == 'semicircle':
            data['mean'] = self.mean
            data['variance'] = self.variance
        if self.kind == 'atomic':
            data['atoms'] = [list(a) for a in self.atoms]
        return data


def cauchy_G(law: InfLaw, z: Point) -> DualScalar:
    return law.cauchy(z)


def inf_cauchy_g(law: InfLaw, z: Point) -> DualScalar:
    return law.inf_cauchy(z)


def F_h_transforms(law: InfLaw, z: Point) -> tuple[DualScalar, DualScalar]:
    """F = 1/G and h = F − z."""
    return law.F_h(z)


def law_from_samples(samples, inf_scale: float = None, reference: InfLaw = None, K: int = DEFAULT_ORDER) -> InfLaw:
    """
    Empirical moment table from eigenvalue samples (one row per trial). With
    @inf_scale = N the infinitesimal moments are N·(empirical − reference).
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise ValidationError('no samples given')
    moments = [float(np.mean(samples ** k)) for k in range(K + 1)]
    inf_moments = None
    if inf_scale is not None:
        if reference is None:
            raise MissingReferenceError('infinitesimal moments need a reference law')
        if reference.K < K:
            reference = reference.with_order(K)
        inf_moments = [inf_scale * (m - r) for m, r in zip(moments, reference.std_moments)]
    return InfLaw.from_moments(moments, inf_moments, float(np.abs(samples).max()))


def laurent_coefficients(fn, radius: float, order: int, points: int = 256) -> np.ndarray:
    """
    cₖ in fn(z) = ∑ₖ cₖ z^{−k−1}, for k ≤ @order, from samples on the circle
    |z| = @radius. Only upper half plane points are evaluated; the lower half
    follows from fn(z̄) = conj(fn(z)).
    """
    half = points // 2
    theta = np.pi * (np.arange(half) + 0.5) / half
    z = radius * np.exp(1j * theta)
    values = np.array([complex(fn(p)) for p in z])
    z = np.concatenate([z, z.conj()])
    values = np.concatenate([values, values.conj()])
    return np.array([np.mean(values * z ** (k + 1)) for k in range(order + 1)])
