"""
Free additive convolution by subordination, and its infinitesimal companions.

ω₁(b) is the attracting fixed point of f_b(s) = h_y(h_x(s) + b) + b, where
h(s) = F(s) − s and F = G⁻¹. The solver runs on `DualScalar` points for
scalar laws (`InfLaw`) and on `DualMatrix` points for operator-valued laws
(`OVLaw`). A t-part on b rides through every step, so ω′(b) along that
direction comes out of the same iteration.

There are three routes to g_{x+y}:

* `scalar_inf_convolve` / `ov_inf_convolve` transport g_x(ω₁), g_y(ω₂)
  through ω′ⱼ and G′_{x+y};
* `embedded_inf_convolve` solves once in the upper-triangular algebra, where
  g_{x+y} is the t-part of G̃_{x+y};
* `path_derivative_convolution` differentiates G_{μ(t)⊞ν(t)} along paths of
  laws.
"""

from __future__ import annotations

import abc
import dataclasses
import logging
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .cumulants import MomentTableOracle
from .dual import Dual, DualMatrix, DualScalar
from .errors import ConvergenceError, ValidationError
from .measures import InfLaw
from .ovspace import (
    AtomicOVLaw, LinearMapOnB, OVLaw, SemicircularOVLaw, SeriesOVLaw, matrix_units,
)


__all__ = [
    'DEFAULT_TOL', 'MATRIX_TOL', 'DEFAULT_MAX_ITER', 'SubordResult', 'ConvolutionPoint',
    'solve_subordination', 'free_convolve_G', 'scalar_inf_convolve', 'ov_inf_convolve',
    'embedded_inf_convolve', 'path_derivative_convolution', 'LawPath', 'AtomicPath',
    'SemicircularPath', 'MomentPath', 'path_from_inf_law', 'series_height',
]

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
MATRIX_TOL = 1e-10
DEFAULT_MAX_ITER = 10000

Law = Union[InfLaw, OVLaw]


def _point(b) -> Dual:
    if isinstance(b, Dual):
        return b
    if np.ndim(b) == 2:
        return DualMatrix(b)
    return DualScalar(b)


def _size(x) -> float:
    return float(np.max(np.abs(x)))


def _dual_size(x: Dual) -> float:
    return _size(x.std) + _size(x.inf)


def _imag(x) -> Union[float, np.ndarray]:
    if np.ndim(x) == 2:
        return (x - x.conj().T) / 2j
    return complex(x).imag


def _lowest(imag) -> float:
    if np.ndim(imag) == 2:
        return float(np.linalg.eigvalsh(imag).min())
    return float(imag)


def _F(law: Law, s: Dual, infinitesimal: bool) -> Dual:
    return law.cauchy(s, infinitesimal).inv()


def _h(law: Law, s: Dual, infinitesimal: bool) -> Dual:
    return _F(law, s, infinitesimal) - s


def series_height(x: Law, y: Law) -> float:
    """Im b above which the whole orbit stays inside both laws' series regime."""
    bounds = [getattr(law, 'M', getattr(law, 'support_bound', 0.0)) for law in (x, y)]
    return 2 * sum(bounds)


@dataclasses.dataclass
class SubordResult:
    omega1: Dual
    omega2: Dual
    residual_F: float
    residual_G: float
    iterations: int
    G: Dual = None


def _summarize(x: Law, y: Law, b: Dual, omega1: Dual, iterations: int, infinitesimal: bool) -> SubordResult:
    Fx = _F(x, omega1, infinitesimal)
    omega2 = Fx + b - omega1
    Fy = _F(y, omega2, infinitesimal)
    total = (omega1 + omega2 - b).std
    Gx = x.cauchy(omega1, infinitesimal)
    Gy = y.cauchy(omega2, infinitesimal)
    return SubordResult(
        omega1, omega2,
        residual_F=max(_size(Fx.std - total), _size(Fy.std - total)),
        residual_G=_size(Gx.std - Gy.std),
        iterations=iterations,
        G=Gx,
    )


def _check_clauses(result: SubordResult, b: Dual, tol: float):
    floor = _imag(b.std)
    for name, omega in (('ω₁', result.omega1), ('ω₂', result.omega2)):
        gap = _lowest(_imag(omega.std) - floor)
        if gap < -tol * max(1.0, _size(b.std)):
            raise ConvergenceError(f'Im {name} falls below Im b by {-gap:.3g}')


def solve_subordination(x: Law, y: Law, b, tol: float = None, max_iter: int = DEFAULT_MAX_ITER,
                        infinitesimal: bool = False) -> SubordResult:
    """
    Iterate f_b from s₀ = b. @b may carry a t-part. With @infinitesimal the
    laws are evaluated as their upper-triangular versions, so the t-parts of
    ω₁, ω₂ are the infinitesimal subordination data instead of derivatives.
    """
    b = _point(b)
    matrix = isinstance(b, DualMatrix)
    if tol is None:
        tol = MATRIX_TOL if matrix else DEFAULT_TOL
    floor = _lowest(_imag(b.std))
    if floor <= 0:
        raise ValidationError(f'b must lie in the upper half plane (lowest Im = {floor:.3g})')
    slack = tol * max(1.0, _size(b.std))

    s = b
    delta = float('inf')
    for iteration in range(1, max_iter + 1):
        following = _h(y, _h(x, s, infinitesimal) + b, infinitesimal) + b
        height = _lowest(_imag(following.std))
        if height < floor - slack:
            raise ConvergenceError(f'iterate left the half plane Im s ≥ Im b at step {iteration} (Im = {height:.3g})')
        delta = _dual_size(following - s)
        s = following
        if delta <= tol:
            result = _summarize(x, y, b, s, iteration, infinitesimal)
            if result.residual_F <= tol and result.residual_G <= tol:
                log.debug('subordination converged in %d steps (residuals %.3g, %.3g)',
                          iteration, result.residual_F, result.residual_G)
                _check_clauses(result, b, tol)
                return result

    result = _summarize(x, y, b, s, max_iter, infinitesimal)
    raise ConvergenceError(
        f'subordination did not converge in {max_iter} steps (last step {delta:.3g}, '
        f'residuals {result.residual_F:.3g}, {result.residual_G:.3g} against tolerance {tol:.3g})'
    )


@dataclasses.dataclass
class ConvolutionPoint:
    z: Union[complex, np.ndarray]
    G: Union[complex, np.ndarray]
    G_x: Union[complex, np.ndarray]
    G_y: Union[complex, np.ndarray]
    discrepancy: float
    result: SubordResult
    g: Optional[Union[complex, np.ndarray]] = None


def free_convolve_G(x: Law, y: Law, z, tol: float = None, max_iter: int = DEFAULT_MAX_ITER,
                    infinitesimal: bool = False) -> ConvolutionPoint:
    """
    G_{x+y}(z) = G_x(ω₁(z)), with both subordinate evaluations. For scalar
    laws z is seeded with a unit t-part, so ω′ⱼ(z) are in the result. With
    @infinitesimal, g_{x+y}(z) = g_x(ω₁)ω₁′ + g_y(ω₂)ω₂′ is filled in.
    """
    point = _point(z)
    if isinstance(point, DualScalar) and point.inf == 0:
        point = DualScalar(point.std, 1)
    result = solve_subordination(x, y, point, tol, max_iter)
    G_x = x.cauchy(result.omega1).std
    G_y = y.cauchy(result.omega2).std
    g = None
    if infinitesimal:
        if isinstance(point, DualMatrix):
            g = ov_inf_convolve(x, y, point.std, tol, max_iter)
        else:
            g = (x.inf_cauchy(result.omega1.std).std * result.omega1.inf
                 + y.inf_cauchy(result.omega2.std).std * result.omega2.inf)
    return ConvolutionPoint(point.std, G_x, G_x, G_y, _size(G_x - G_y), result, g)


def scalar_inf_convolve(x: InfLaw, y: InfLaw, z: complex, tol: float = None,
                        max_iter: int = DEFAULT_MAX_ITER) -> complex:
    """g_{x+y}(z) = g_x(ω₁(z))ω₁′(z) + g_y(ω₂(z))ω₂′(z)."""
    return free_convolve_G(x, y, complex(z), tol, max_iter, infinitesimal=True).g


def _directional(x: OVLaw, y: OVLaw, b: np.ndarray, tol, max_iter):
    """ω′₁, ω′₂ and G′_{x+y} at b as linear maps, with the solve at b."""
    results = [solve_subordination(x, y, DualMatrix(b, unit), tol, max_iter) for unit in matrix_units(x.d)]
    omega1 = LinearMapOnB.from_columns([r.omega1.inf for r in results])
    omega2 = LinearMapOnB.from_columns([r.omega2.inf for r in results])
    G = LinearMapOnB.from_columns([r.G.inf for r in results])
    return results[0], omega1, omega2, G


def _transport(G: LinearMapOnB, omega1: LinearMapOnB, omega2: LinearMapOnB,
               dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    G_inverse = G.inverse()
    return (G @ omega1 @ G_inverse)(dx) + (G @ omega2 @ G_inverse)(dy)


def _check_pair(x: OVLaw, y: OVLaw, b: np.ndarray):
    if x.d != y.d or b.shape != (x.d, x.d):
        raise ValidationError(f'laws over M_{x.d} and M_{y.d} evaluated at a {b.shape} point')


def ov_inf_convolve(x: OVLaw, y: OVLaw, b, tol: float = None, max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """
    g_{x+y}(b) = [G′∘ω′₁∘G′⁻¹](g_x(ω₁(b))) + [G′∘ω′₂∘G′⁻¹](g_y(ω₂(b))),
    with G′ = G′_{x+y}(b) and every map assembled on matrix units.
    """
    b = np.asarray(_point(b).std)
    _check_pair(x, y, b)
    base, omega1, omega2, G = _directional(x, y, b, tol, max_iter)
    gx = x.inf_cauchy(base.omega1.std).std
    gy = y.inf_cauchy(base.omega2.std).std
    return _transport(G, omega1, omega2, gx, gy)


def embedded_inf_convolve(x: Law, y: Law, b, tol: float = None, max_iter: int = DEFAULT_MAX_ITER):
    """g_{x+y}(b) as the t-part of G̃_{x+y}((b, 0)) in the upper-triangular algebra."""
    b = _point(b)
    b = type(b)(b.std)
    result = solve_subordination(x, y, b, tol, max_iter, infinitesimal=True)
    return result.G.inf


class LawPath(abc.ABC):
    """A differentiable path t ↦ μ(t) of laws over M_d(ℂ)."""
    d: int

    @abc.abstractmethod
    def law(self, t: float) -> OVLaw:
        """μ(t), carrying ∂_t𝔼_{μ(t)} as its infinitesimal functional."""

    def cauchy(self, t: float, b) -> np.ndarray:
        return self.law(t).cauchy(b).std

    def derivative(self, t: float, b) -> np.ndarray:
        """∂_t G_{μ(t)}(b)."""
        return self.law(t).inf_cauchy(b).std


class AtomicPath(LawPath):
    """Atoms at fixed locations with weights w + t·w′."""

    def __init__(self, atoms: Sequence[Sequence[float]], d: int = 1):
        self.atoms = [tuple(float(v) for v in a) for a in atoms]
        self.d = d

    def law(self, t):
        return AtomicOVLaw([(x, w + t * rate, rate) for x, w, rate in self.atoms], self.d)


class SemicircularPath(LawPath):
    """
    B-valued semicircular elements with covariance η + tη_rate and mean
    a₀ + t·a₀_rate. ∂_t G is the t-part of the Dyson equation driven by the
    rates.
    """

    def __init__(self, eta: Callable, d: int, eta_rate: Callable = None,
                 mean: np.ndarray = None, mean_rate: np.ndarray = None):
        zero = np.zeros((d, d), dtype=complex)
        self.d = d
        self.eta = eta
        self.eta_rate = eta_rate if eta_rate is not None else (lambda c: np.zeros_like(c))
        self.mean = zero if mean is None else np.asarray(mean, dtype=complex)
        self.mean_rate = zero if mean_rate is None else np.asarray(mean_rate, dtype=complex)

    @classmethod
    def scalar(cls, mean: float, variance: float, mean_rate: float = 0.0, variance_rate: float = 0.0,
               d: int = 1) -> SemicircularPath:
        identity = np.eye(d)
        return cls(lambda c: variance * c, d, lambda c: variance_rate * c, mean * identity, mean_rate * identity)

    def law(self, t):
        return SemicircularOVLaw(
            lambda c: self.eta(c) + t * self.eta_rate(c), self.d, self.eta_rate,
            self.mean + t * self.mean_rate, self.mean_rate,
        )


class MomentPath(LawPath):
    """Moments mₖ + t·m′ₖ of a lifted scalar variable, evaluated by series."""

    def __init__(self, std_moments: Sequence[float], inf_moments: Sequence[float], support_bound: float, d: int = 1):
        if len(std_moments) != len(inf_moments):
            raise ValidationError(f'moment tables differ in order ({len(std_moments)} vs {len(inf_moments)})')
        self.std_moments = np.asarray(std_moments, dtype=float)
        self.inf_moments = np.asarray(inf_moments, dtype=float)
        self.support_bound = support_bound
        self.d = d

    def law(self, t):
        oracle = MomentTableOracle('x', self.std_moments + t * self.inf_moments, self.inf_moments, self.d)
        return SeriesOVLaw(oracle, 'x', self.support_bound, K=len(self.std_moments) - 1)


def path_from_inf_law(law: InfLaw, d: int = 1) -> LawPath:
    """The path μ + tμ′ through a scalar infinitesimal law, lifted to M_d(ℂ)."""
    if law.kind == 'atomic':
        return AtomicPath(law.atoms, d)
    if law.kind == 'semicircle':
        return SemicircularPath.scalar(law.mean, law.variance, d=d)
    return MomentPath(law.std_moments, law.inf_moments, law.support_bound, d)


def path_derivative_convolution(mu_path: LawPath, nu_path: LawPath, t: float, b,
                                tol: float = None, max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """
    ∂_t G_{μ(t)⊞ν(t)}(b) = [G′∘ω′₁∘G′⁻¹](∂G_{μ(t)}(ω₁)) + [G′∘ω′₂∘G′⁻¹](∂G_{ν(t)}(ω₂)).
    """
    x, y = mu_path.law(t), nu_path.law(t)
    b = np.asarray(_point(b).std)
    _check_pair(x, y, b)
    base, omega1, omega2, G = _directional(x, y, b, tol, max_iter)
    dx = mu_path.derivative(t, base.omega1.std)
    dy = nu_path.derivative(t, base.omega2.std)
    return _transport(G, omega1, omega2, dx, dy)
