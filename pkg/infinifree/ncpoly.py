"""
Algebra elements: B-linear combinations of words b₀ x_{ℓ1} b₁ ⋯ x_{ℓn} bₙ with
B = M_d(ℂ). These are the arguments of every moment and cumulant map.
"""

from __future__ import annotations

import numbers
from typing import Iterable, Union

import numpy as np

from .errors import DimensionError


__all__ = ['NCPoly', 'Term']


# (labels, coefficients) with len(coefficients) == len(labels) + 1
Term = tuple[tuple[str, ...], tuple[np.ndarray, ...]]


class NCPoly:
    __array_ufunc__ = None

    def __init__(self, terms: Iterable[Term], d: int):
        self.d = d
        self.terms: tuple[Term, ...] = tuple(terms)

    @classmethod
    def letter(cls, label: str, d: int = 1) -> NCPoly:
        identity = np.eye(d, dtype=complex)
        return cls([((label,), (identity, identity))], d)

    @classmethod
    def constant(cls, b: Union[numbers.Number, np.ndarray], d: int = 1) -> NCPoly:
        if _is_scalar(b):
            b = b * np.eye(d, dtype=complex)
        b = np.asarray(b, dtype=complex)
        return cls([((), (b,))], b.shape[0])

    @classmethod
    def coerce(cls, value, d: int = 1) -> NCPoly:
        if isinstance(value, NCPoly):
            return value
        if isinstance(value, str):
            return cls.letter(value, d)
        return cls.constant(value, d)

    @classmethod
    def word(cls, labels: Iterable[str], coeffs: Iterable[np.ndarray] = None, d: int = 1) -> NCPoly:
        labels = tuple(labels)
        if coeffs is None:
            coeffs = [np.eye(d, dtype=complex)] * (len(labels) + 1)
        coeffs = tuple(np.asarray(c, dtype=complex) for c in coeffs)
        if len(coeffs) != len(labels) + 1:
            raise DimensionError(f'word of length {len(labels)} needs {len(labels) + 1} coefficients ({len(coeffs)})')
        return cls([(labels, coeffs)], coeffs[0].shape[0])

    @property
    def degree(self) -> int:
        return max((len(w) for w, _ in self.terms), default=0)

    @property
    def labels(self) -> set[str]:
        return {label for w, _ in self.terms for label in w}

    def _check(self, other: NCPoly):
        if other.d != self.d:
            raise DimensionError(f'coefficient sizes differ ({self.d} vs {other.d})')

    def __add__(self, other):
        other = NCPoly.coerce(other, self.d)
        self._check(other)
        return NCPoly(self.terms + other.terms, self.d)

    __radd__ = __add__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-NCPoly.coerce(other, self.d))

    def __rsub__(self, other):
        return NCPoly.coerce(other, self.d) - self

    def __mul__(self, other):
        if _is_scalar(other):
            if other == 0:
                return NCPoly((), self.d)
            return NCPoly(((w, (c[0] * other,) + c[1:]) for w, c in self.terms), self.d)
        if isinstance(other, np.ndarray):
            return NCPoly(((w, c[:-1] + (c[-1] @ other,)) for w, c in self.terms), self.d)
        if not isinstance(other, NCPoly):
            return NotImplemented
        self._check(other)
        return NCPoly(
            (
                (w1 + w2, c1[:-1] + (c1[-1] @ c2[0],) + c2[1:])
                for w1, c1 in self.terms
                for w2, c2 in other.terms
            ),
            self.d,
        )

    def __rmul__(self, other):
        if _is_scalar(other):
            return self * other
        if isinstance(other, np.ndarray):
            return NCPoly(((w, (other @ c[0],) + c[1:]) for w, c in self.terms), self.d)
        return NotImplemented

    __matmul__ = __mul__
    __rmatmul__ = __rmul__

    def expect(self, oracle) -> np.ndarray:
        """𝔼 of this element under @oracle."""
        total = np.zeros((self.d, self.d), dtype=complex)
        for w, c in self.terms:
            total = total + oracle.expect(w, c)
        return total

    def inf_expect(self, oracle) -> np.ndarray:
        """𝔼′ of this element under @oracle."""
        total = np.zeros((self.d, self.d), dtype=complex)
        for w, c in self.terms:
            total = total + oracle.inf_expect(w, c)
        return total

    def centered(self, oracle) -> NCPoly:
        return self - self.expect(oracle)

    def __repr__(self):
        words = ' + '.join('·'.join(w) or '1' for w, _ in self.terms) or '0'
        return f'NCPoly({words}; d={self.d})'


def _is_scalar(value) -> bool:
    return isinstance(value, numbers.Number) or (isinstance(value, np.ndarray) and value.ndim == 0)
