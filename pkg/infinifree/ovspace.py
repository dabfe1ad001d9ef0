"""
Operator-valued laws over B = M_d(ℂ) and their B-valued Cauchy transforms.

Every law answers `cauchy(b)` and `inf_cauchy(b)` for a `DualMatrix` b. The
t-part of b is a direction: the t-part of the result is the Fréchet
derivative along it. With `infinitesimal=True`, `cauchy` also adds g(b) to the
t-part, which is G̃ of the upper-triangular law at (b, c):

    G̃((b, c)) = (G(b), G′(b)(c) + g(b))
"""

from __future__ import annotations

import abc
import logging
import math
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .cumulants import (
    MAX_CONVERSION_ORDER, FreeJointOracle, MomentOracle, SemicircularCumulants,
    joint_from_free_cumulants,
)
from .dual import DualMatrix
from .errors import (
    ConvergenceError, DimensionError, SeriesRegimeError, SingularError, SizeCapError, ValidationError,
)
from .measures import InfLaw


__all__ = [
    'MAX_MATRIX_SIZE', 'MAX_LIFT_SIZE', 'LinearMapOnB', 'OVLaw', 'SeriesOVLaw',
    'SemicircularOVLaw', 'AtomicOVLaw', 'LiftedOracle', 'lift_law', 'ov_cauchy_G',
    'ov_inf_cauchy_g', 'frechet_derivative', 'lift_scalar_matrix', 'matrix_units',
]

log = logging.getLogger(__name__)

MAX_MATRIX_SIZE = 6
MAX_LIFT_SIZE = 8
DEFAULT_SERIES_ORDER = 40
DEFAULT_TAIL_TOL = 1e-12
DYSON_TOL = 1e-14
DYSON_MAX_ITER = 100000
# condition numbers above this make a linear map on B count as singular
SINGULAR_COND = 1e12

Matrix = Union[np.ndarray, DualMatrix]


def matrix_units(d: int):
    """E_kl in row-major order of (k, l)."""
    for k in range(d):
        for l in range(d):
            unit = np.zeros((d, d), dtype=complex)
            unit[k, l] = 1
            yield unit


def _dual(b: Matrix) -> DualMatrix:
    return b if isinstance(b, DualMatrix) else DualMatrix(b)


class LinearMapOnB:
    """A linear map on M_d(ℂ) as a d²×d² matrix acting on row-major vec(c)."""

    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=complex)
        d = math.isqrt(matrix.shape[0])
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or d * d != matrix.shape[0]:
            raise DimensionError(f'not a linear map on a matrix space ({matrix.shape})')
        self.matrix = matrix
        self.d = d

    @classmethod
    def from_columns(cls, columns: Sequence[np.ndarray]) -> LinearMapOnB:
        """Images of the matrix units, in row-major order."""
        return cls(np.column_stack([np.asarray(c).reshape(-1) for c in columns]))

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], d: int) -> LinearMapOnB:
        return cls.from_columns([fn(unit) for unit in matrix_units(d)])

    @classmethod
    def identity(cls, d: int) -> LinearMapOnB:
        return cls(np.eye(d * d))

    def __call__(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c)
        if c.shape != (self.d, self.d):
            raise DimensionError(f'map on {self.d}×{self.d} matrices applied to {c.shape}')
        return (self.matrix @ c.reshape(-1)).reshape(self.d, self.d)

    def compose(self, other: LinearMapOnB) -> LinearMapOnB:
        """self ∘ other."""
        if other.d != self.d:
            raise DimensionError(f'cannot compose maps on M_{self.d} and M_{other.d}')
        return LinearMapOnB(self.matrix @ other.matrix)

    __matmul__ = compose

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix, compute_uv=False)

    def inverse(self) -> LinearMapOnB:
        s = self.singular_values()
        if s[-1] == 0 or s[0] / s[-1] > SINGULAR_COND:
            raise SingularError(f'linear map on B is not invertible (condition number {s[0] / max(s[-1], 1e-300):.3g})')
        return LinearMapOnB(np.linalg.inv(self.matrix))


class OVLaw(abc.ABC):
    """An operator-valued infinitesimal law (𝔼, 𝔼′) of one variable over M_d(ℂ)."""
    d: int
    # ‖𝔼(b₀xb₁⋯xbₙ)‖ ≤ Mⁿ∏‖bᵢ‖
    M: float

    @abc.abstractmethod
    def cauchy(self, b: Matrix, infinitesimal: bool = False) -> DualMatrix:
        ...

    @abc.abstractmethod
    def inf_cauchy(self, b: Matrix) -> DualMatrix:
        ...

    def _check(self, b: DualMatrix):
        if b.d != self.d:
            raise DimensionError(f'law over M_{self.d} evaluated at a {b.d}×{b.d} point')


def _expect_series_term(fn, word, coeffs: Sequence[DualMatrix]) -> DualMatrix:
    std = [c.std for c in coeffs]
    value = fn(word, std)
    inf = np.zeros_like(value)
    for j, c in enumerate(coeffs):
        if np.any(c.inf):
            varied = list(std)
            varied[j] = c.inf
            inf = inf + fn(word, varied)
    return DualMatrix(value, inf)


class SeriesOVLaw(OVLaw):
    """
    G(b) = ∑ₙ 𝔼[b⁻¹(xb⁻¹)ⁿ] from a moment oracle, valid while r = M‖b⁻¹‖ < 1.
    The tail after order K is at most r^{K+1}/(1−r)·‖b⁻¹‖. The order is the
    smallest one whose tail bound is within @tail_tol, up to @K.
    """

    def __init__(self, oracle: MomentOracle, label: str, M: float, K: int = DEFAULT_SERIES_ORDER,
                 tail_tol: float = DEFAULT_TAIL_TOL):
        cap = MAX_LIFT_SIZE if isinstance(oracle, LiftedOracle) else MAX_MATRIX_SIZE
        if oracle.d > cap:
            raise SizeCapError(f'matrix size {oracle.d} above cap {cap}')
        if M < 0:
            raise ValidationError(f'norm bound must be non-negative ({M})')
        self.oracle = oracle
        self.label = label
        self.d = oracle.d
        self.M = M
        self.K = K
        self.tail_tol = tail_tol

    def _order(self, b: DualMatrix) -> tuple[DualMatrix, int, float]:
        self._check(b)
        inverse = b.inv()
        norm = np.linalg.norm(inverse.std, 2)
        r = self.M * norm
        if r >= 1:
            raise SeriesRegimeError(f'M‖b⁻¹‖ = {r:.6g} ≥ 1; the resolvent series does not converge')
        order = 0
        bound = r * norm / (1 - r)
        while bound > self.tail_tol and order < self.K:
            order += 1
            bound *= r
        if bound > self.tail_tol:
            raise SeriesRegimeError(f'tail bound {bound:.3g} above tolerance {self.tail_tol:.3g} at order {self.K}')
        if isinstance(self.oracle, FreeJointOracle) and order > MAX_CONVERSION_ORDER:
            raise SeriesRegimeError(
                f'series needs order {order}, cumulant-built laws reach {MAX_CONVERSION_ORDER}; move b further from the spectrum'
            )
        return inverse, order, bound

    def _series(self, fn, b: DualMatrix, order: int, inverse: DualMatrix) -> DualMatrix:
        total = DualMatrix(np.zeros((self.d, self.d)))
        for n in range(order + 1):
            total = total + _expect_series_term(fn, (self.label,) * n, [inverse] * (n + 1))
        return total

    def cauchy_with_bound(self, b: Matrix, infinitesimal: bool = False) -> tuple[DualMatrix, float]:
        b = _dual(b)
        inverse, order, bound = self._order(b)
        G = self._series(self.oracle.expect, b, order, inverse)
        if infinitesimal:
            g = self._series(self.oracle.inf_expect, b, order, DualMatrix(inverse.std))
            G = G + DualMatrix(np.zeros_like(g.std), g.std)
        log.debug('series Cauchy transform to order %d, tail bound %.3g', order, bound)
        return G, bound

    def cauchy(self, b: Matrix, infinitesimal: bool = False) -> DualMatrix:
        return self.cauchy_with_bound(b, infinitesimal)[0]

    def inf_cauchy(self, b: Matrix) -> DualMatrix:
        b = _dual(b)
        inverse, order, _ = self._order(b)
        return self._series(self.oracle.inf_expect, b, order, inverse)


class AtomicOVLaw(OVLaw):
    """φ⊗Id_d of a scalar atomic law: G(b) = ∑ wᵢ(b − xᵢ)⁻¹, g(b) = ∑ w′ᵢ(b − xᵢ)⁻¹."""

    def __init__(self, atoms: Sequence[Sequence[float]], d: int):
        self.atoms = tuple((float(a[0]), float(a[1]), float(a[2]) if len(a) > 2 else 0.0) for a in atoms)
        negative = [a for a in self.atoms if a[1] < 0]
        if negative:
            raise ValidationError(f'atom weights must be non-negative ({negative[0]})')
        self.d = d
        self.M = max(abs(a[0]) for a in self.atoms)

    def _sum(self, b: DualMatrix, column: int) -> DualMatrix:
        self._check(b)
        total = DualMatrix(np.zeros((self.d, self.d)))
        identity = np.eye(self.d)
        for atom in self.atoms:
            if atom[column]:
                total = total + atom[column] * (b - atom[0] * identity).inv()
        return total

    def cauchy(self, b: Matrix, infinitesimal: bool = False) -> DualMatrix:
        b = _dual(b)
        G = self._sum(b, 1)
        if infinitesimal:
            G = G + DualMatrix(np.zeros((self.d, self.d)), self._sum(DualMatrix(b.std), 2).std)
        return G

    def inf_cauchy(self, b: Matrix) -> DualMatrix:
        return self._sum(_dual(b), 2)


class SemicircularOVLaw(OVLaw):
    """
    The B-valued semicircular element with mean a₀ and covariance η, and
    infinitesimal parts a₀′, η′. G solves G = (b − a₀ − η(G))⁻¹; the
    solution is found by the averaged fixed point iteration.
    """

    def __init__(self, eta: Callable[[np.ndarray], np.ndarray], d: int,
                 eta_inf: Callable[[np.ndarray], np.ndarray] = None,
                 mean: np.ndarray = None, mean_inf: np.ndarray = None,
                 tol: float = DYSON_TOL, max_iter: int = DYSON_MAX_ITER):
        if d > MAX_MATRIX_SIZE:
            raise SizeCapError(f'matrix size {d} above cap {MAX_MATRIX_SIZE}')
        zero = np.zeros((d, d), dtype=complex)
        self.d = d
        self.eta = eta
        self.eta_inf = eta_inf if eta_inf is not None else (lambda c: np.zeros_like(c))
        self.mean = zero if mean is None else np.asarray(mean, dtype=complex)
        self.mean_inf = zero if mean_inf is None else np.asarray(mean_inf, dtype=complex)
        self.tol = tol
        self.max_iter = max_iter
        eta_norm = LinearMapOnB.from_function(eta, d).singular_values()[0]
        self.M = float(np.linalg.norm(self.mean, 2) + 2 * math.sqrt(eta_norm))

    @classmethod
    def lifted(cls, mean: float, variance: float, d: int) -> SemicircularOVLaw:
        """φ⊗Id_d of the scalar semicircle."""
        return cls(lambda c: variance * c, d, mean=mean * np.eye(d))

    def cumulants(self, label: str = 'x') -> SemicircularCumulants:
        return SemicircularCumulants(label, self.eta, self.d, self.eta_inf, self.mean, self.mean_inf)

    def oracle(self, label: str = 'x') -> FreeJointOracle:
        return joint_from_free_cumulants([self.cumulants(label)])

    def _solve(self, b: DualMatrix, mean: DualMatrix, eta: Callable[[DualMatrix], DualMatrix]) -> DualMatrix:
        G = b.inv()
        for iteration in range(1, self.max_iter + 1):
            following = (b - mean - eta(G)).inv()
            following = 0.5 * (G + following)
            delta = np.abs(following.std - G.std).max() + np.abs(following.inf - G.inf).max()
            G = following
            if delta <= self.tol:
                log.debug('Dyson iteration converged after %d steps', iteration)
                return G
        raise ConvergenceError(f'Dyson iteration did not converge in {self.max_iter} steps (last step {delta:.3g})')

    def cauchy(self, b: Matrix, infinitesimal: bool = False) -> DualMatrix:
        b = _dual(b)
        self._check(b)
        if infinitesimal:
            # Ẽ-semicircular: η̃ = η + tη′, ã₀ = a₀ + ta₀′
            mean = DualMatrix(self.mean, self.mean_inf)

            def eta(G):
                return DualMatrix(self.eta(G.std), self.eta(G.inf) + self.eta_inf(G.std))
        else:
            mean = DualMatrix(self.mean)

            def eta(G):
                return DualMatrix(self.eta(G.std), self.eta(G.inf))
        return self._solve(b, mean, eta)

    def inf_cauchy(self, b: Matrix) -> DualMatrix:
        # g is the upper-right block of G̃ on [[b, 0], [0, b]]; the direction
        # rides along as the outer t-part.
        b = _dual(b)
        self._check(b)
        d = self.d
        zero = np.zeros((d, d), dtype=complex)

        def embed(x, x_inf=zero):
            return np.block([[x, x_inf], [zero, x]])

        def eta_block(X):
            return embed(self.eta(X[:d, :d]), self.eta(X[:d, d:]) + self.eta_inf(X[:d, :d]))

        big = DualMatrix(embed(b.std), embed(b.inf))
        G = self._solve(big, DualMatrix(embed(self.mean, self.mean_inf)),
                        lambda X: DualMatrix(eta_block(X.std), eta_block(X.inf)))
        return DualMatrix(G.std[:d, d:], G.inf[:d, d:])


def lift_law(law: InfLaw, d: int) -> OVLaw:
    """(φ⊗Id_d, φ′⊗Id_d) of a scalar law, realized exactly where possible."""
    if not 1 <= d <= MAX_MATRIX_SIZE:
        raise SizeCapError(f'matrix size must be in 1..{MAX_MATRIX_SIZE} ({d})')
    if law.kind == 'semicircle':
        return SemicircularOVLaw.lifted(law.mean, law.variance, d)
    if law.kind == 'atomic':
        return AtomicOVLaw(law.atoms, d)
    return SeriesOVLaw(law.oracle('x', d), 'x', law.support_bound, K=law.K)


def ov_cauchy_G(law: OVLaw, b: Matrix, infinitesimal: bool = False) -> DualMatrix:
    return law.cauchy(b, infinitesimal)


def ov_inf_cauchy_g(law: OVLaw, b: Matrix) -> DualMatrix:
    return law.inf_cauchy(b)


def frechet_derivative(law: OVLaw, b: Matrix) -> LinearMapOnB:
    """G′(b) as a linear map on B, one matrix-unit direction at a time."""
    b = _dual(b).std
    return LinearMapOnB.from_function(lambda c: law.cauchy(DualMatrix(b, c)).inf, law.d)


class LiftedOracle(MomentOracle):
    """
    (φ⊗Id_N, φ′⊗Id_N) on matrices whose entries are variables of a scalar
    joint law. @entries maps each matrix name to an N×N table of scalar
    labels, with None for a zero entry.
    """
    memoize = True

    def __init__(self, scalar: MomentOracle, entries: dict[str, Sequence[Sequence[Optional[str]]]], N: int):
        if scalar.d != 1:
            raise ValidationError(f'lift needs a scalar joint law (d = {scalar.d})')
        if not 1 <= N <= MAX_LIFT_SIZE:
            raise SizeCapError(f'lift size must be in 1..{MAX_LIFT_SIZE} ({N})')
        super().__init__(N)
        self.has_inf = scalar.has_inf
        self.scalar = scalar
        self.entries = {}
        for name, table in entries.items():
            if len(table) != N or any(len(row) != N for row in table):
                raise DimensionError(f'entry table of {name!r} is not {N}×{N}')
            self.entries[name] = [list(row) for row in table]
        self._phi: dict = {}

    def _scalar(self, part: str, word: tuple[str, ...]) -> complex:
        key = (part, word)
        if key not in self._phi:
            one = [np.eye(1)] * (len(word) + 1)
            fn = self.scalar.expect if part == 'std' else self.scalar.inf_expect
            self._phi[key] = complex(fn(word, one)[0, 0])
        return self._phi[key]

    def _entrywise(self, part, word, coeffs) -> np.ndarray:
        N = self.d
        # (scalar word so far, next row index) -> weights indexed by the output row
        states = {((), r): coeffs[0][:, r].copy() for r in range(N)}
        for name, c in zip(word, coeffs[1:]):
            if name not in self.entries:
                raise ValidationError(f'no lifted matrix named {name!r}')
            table = self.entries[name]
            following: dict = {}
            for (scalar_word, r), weights in states.items():
                for col in range(N):
                    label = table[r][col]
                    if label is None:
                        continue
                    extended = scalar_word + (label,)
                    for nxt in range(N):
                        if c[col, nxt] == 0:
                            continue
                        key = (extended, nxt)
                        following[key] = following.get(key, 0) + weights * c[col, nxt]
            states = following
        result = np.zeros((N, N), dtype=complex)
        for (scalar_word, col), weights in states.items():
            result[:, col] += weights * self._scalar(part, scalar_word)
        return result

    def _moment(self, word, coeffs):
        return self._entrywise('std', word, coeffs)

    def _inf_moment(self, word, coeffs):
        return self._entrywise('inf', word, coeffs)


def lift_scalar_matrix(scalar: MomentOracle, entries: dict[str, Sequence[Sequence[Optional[str]]]], N: int,
                       label: str = None, M: float = None, K: int = DEFAULT_SERIES_ORDER) -> SeriesOVLaw:
    """
    The law over M_N(ℂ) of the matrix @label (first of @entries by default).
    The joint oracle of every lifted matrix is the returned law's `oracle`.
    Without @M the bound N·max|entry bound| is not known, so the series
    refuses to evaluate until one is given.
    """
    oracle = LiftedOracle(scalar, entries, N)
    label = next(iter(entries)) if label is None else label
    if label not in entries:
        raise ValidationError(f'no lifted matrix named {label!r}')
    return SeriesOVLaw(oracle, label, math.inf if M is None else M, K=K)
