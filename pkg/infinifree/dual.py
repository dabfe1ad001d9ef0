"""
The t² = 0 algebra: pairs std + t·inf over ℂ, over M_d(ℂ), or over the
algebra of noncommutative polynomials.

The same arithmetic serves two purposes. A pair (a, a′) is an element of the
upper-triangular space [[a, a′], [0, a]], and a pair (x, 1) pushed through an
analytic map returns the derivative in its t-part.
"""

from __future__ import annotations

import cmath
import numbers
from typing import Any, Callable

import numpy as np

from .errors import DimensionError, SingularError
from .ncpoly import NCPoly


__all__ = ['Dual', 'DualScalar', 'DualMatrix', 'TildeExpectation',
           'dual_mul', 'dual_inv', 'dual_eval', 'tilde_expectation']


def _is_scalar(value) -> bool:
    return isinstance(value, numbers.Number) or (isinstance(value, np.ndarray) and value.ndim == 0)


def _product(a, b):
    if _is_scalar(a) or _is_scalar(b):
        return a * b
    return a @ b


def _wrap(std, inf) -> Dual:
    if isinstance(std, np.ndarray) and std.ndim == 2:
        return DualMatrix(std, inf)
    if _is_scalar(std):
        return DualScalar(std, inf)
    return Dual(std, inf)


class Dual:
    """
    An element std + t·inf with t² = 0. The payloads only need addition and a
    product: `*` against scalars, `@` otherwise.
    """
    __slots__ = ('std', 'inf')
    # Let ndarray operands defer to our reflected operators.
    __array_ufunc__ = None

    def __init__(self, std, inf=None):
        self.std = std
        self.inf = std * 0 if inf is None else inf

    @classmethod
    def lift(cls, value) -> Dual:
        return value if isinstance(value, Dual) else _wrap(value, None)

    def __add__(self, other):
        other = Dual.lift(other)
        return _wrap(self.std + other.std, self.inf + other.inf)

    __radd__ = __add__

    def __neg__(self):
        return _wrap(-self.std, -self.inf)

    def __sub__(self, other):
        return self + (-Dual.lift(other))

    def __rsub__(self, other):
        return Dual.lift(other) - self

    def __mul__(self, other):
        if _is_scalar(other):
            return _wrap(self.std * other, self.inf * other)
        other = Dual.lift(other)
        return _wrap(
            _product(self.std, other.std),
            _product(self.std, other.inf) + _product(self.inf, other.std),
        )

    def __rmul__(self, other):
        if _is_scalar(other):
            return _wrap(other * self.std, other * self.inf)
        return Dual.lift(other) * self

    __matmul__ = __mul__
    __rmatmul__ = __rmul__

    def __truediv__(self, other):
        if _is_scalar(other):
            return _wrap(self.std / other, self.inf / other)
        return self * Dual.lift(other).inv()

    def __rtruediv__(self, other):
        return Dual.lift(other) * self.inv()

    def inv(self) -> Dual:
        raise TypeError(f'{type(self).__name__} has no inverse')

    def __iter__(self):
        yield self.std
        yield self.inf

    def __repr__(self):
        return f'{type(self).__name__}({self.std!r}, {self.inf!r})'


class DualScalar(Dual):
    __slots__ = ()

    def __init__(self, std, inf=None):
        super().__init__(complex(std), 0j if inf is None else complex(inf))

    def inv(self) -> DualScalar:
        if self.std == 0:
            raise SingularError('dual scalar with zero standard part has no inverse')
        r = 1 / self.std
        return DualScalar(r, -r * self.inf * r)

    def sqrt(self) -> DualScalar:
        """Principal branch square root."""
        root = cmath.sqrt(self.std)
        if root == 0:
            raise SingularError('square root is not differentiable at 0')
        return DualScalar(root, self.inf / (2 * root))

    @property
    def imag(self) -> float:
        return self.std.imag


class DualMatrix(Dual):
    __slots__ = ()

    def __init__(self, std, inf=None):
        std = np.asarray(std, dtype=complex)
        if std.ndim != 2 or std.shape[0] != std.shape[1]:
            raise DimensionError(f'dual matrix parts must be square ({std.shape})')
        inf = np.zeros_like(std) if inf is None else np.asarray(inf, dtype=complex)
        if inf.shape != std.shape:
            raise DimensionError(f'dual matrix parts differ in shape ({std.shape} vs {inf.shape})')
        super().__init__(std, inf)

    @classmethod
    def identity(cls, d: int) -> DualMatrix:
        return cls(np.eye(d))

    @property
    def d(self) -> int:
        return self.std.shape[0]

    def inv(self) -> DualMatrix:
        try:
            r = np.linalg.inv(self.std)
        except np.linalg.LinAlgError as e:
            raise SingularError(f'standard part is singular: {e}') from None
        return DualMatrix(r, -r @ self.inf @ r)

    def to_block(self) -> np.ndarray:
        """The 2d×2d upper-triangular matrix [[std, inf], [0, std]]."""
        zero = np.zeros_like(self.std)
        return np.block([[self.std, self.inf], [zero, self.std]])


def _check_dims(x: Dual, y: Dual):
    if isinstance(x, DualMatrix) and isinstance(y, DualMatrix) and x.d != y.d:
        raise DimensionError(f'dual matrix sizes differ ({x.d} vs {y.d})')
    if isinstance(x, DualMatrix) != isinstance(y, DualMatrix):
        raise DimensionError(f'cannot multiply {type(x).__name__} by {type(y).__name__}')


def dual_mul(x: Dual, y: Dual) -> Dual:
    _check_dims(x, y)
    return x * y


def dual_inv(x: Dual) -> Dual:
    return x.inv()


def dual_eval(fn: Callable[[DualScalar], DualScalar], x: complex, direction: complex = 1) -> DualScalar:
    """Evaluate @fn at x + t·direction; the t-part is fn′(x)·direction."""
    return fn(DualScalar(x, direction))


class TildeExpectation:
    """
    Ẽ on the upper-triangular space: (a, a′) ↦ (𝔼(a), 𝔼(a′) + 𝔼′(a)).

    @E and @Eprime map algebra elements (or B constants) to d×d matrices.
    """

    def __init__(self, E: Callable[[Any], np.ndarray], Eprime: Callable[[Any], np.ndarray]):
        self.E = E
        self.Eprime = Eprime

    @classmethod
    def from_oracle(cls, oracle) -> TildeExpectation:
        def E(a):
            return NCPoly.coerce(a, oracle.d).expect(oracle)

        def Eprime(a):
            return NCPoly.coerce(a, oracle.d).inf_expect(oracle)

        return cls(E, Eprime)

    def __call__(self, A: Dual) -> DualMatrix:
        return DualMatrix(self.E(A.std), self.E(A.inf) + self.Eprime(A.std))


def tilde_expectation(te: TildeExpectation, A: Dual) -> DualMatrix:
    return te(A)
