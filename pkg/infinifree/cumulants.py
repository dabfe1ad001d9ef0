"""
Moment and cumulant engines over B = M_d(ℂ).

Every map here is built from one nested evaluator: for π ∈ NC(n), the blocks
nested inside a block V are evaluated first. Their values are spliced into V
as B-coefficients at the position where they close, and consecutive outer
blocks multiply. For π = {(1),(2,5),(3,4)} this gives
𝔼(a₁)·𝔼(a₂𝔼(a₃a₄)a₅).

Arguments are `NCPoly` algebra elements. Plain strings are accepted and read
as single letters.
"""

from __future__ import annotations

import abc
import dataclasses
import itertools
import logging
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .dual import Dual, DualMatrix, TildeExpectation
from .errors import CrossingPartitionError, MissingOrderError, SizeCapError, ValidationError
from .ncpart import Partition, enumerate_nc, is_noncrossing, mobius_to_one
from .ncpoly import NCPoly


__all__ = [
    'MAX_CONVERSION_ORDER', 'MAX_FREENESS_ORDER',
    'MomentOracle', 'FunctionOracle', 'MomentTableOracle', 'FreeProductOracle',
    'FreeJointOracle', 'CumulantFamily', 'ScalarCumulants',
    'SemicircularCumulants', 'OracleCumulants', 'FreenessReport',
    'nested_evaluate', 'moment_pi', 'dmoment_pi_V', 'dmoment_pi',
    'free_cumulant', 'cumulants_from_moments', 'moments_from_cumulants',
    'tilde_cumulant', 'tilde_cumulant_blockwise', 'joint_from_free_cumulants',
    'freeness_check', 'expect_dual',
]

log = logging.getLogger(__name__)

MAX_CONVERSION_ORDER = 10
MAX_FREENESS_ORDER = 8


def _coeff_key(word, coeffs):
    return tuple(word), tuple(c.tobytes() for c in coeffs)


class MomentOracle(abc.ABC):
    """
    Evaluates 𝔼(c₀ x_{ℓ1} c₁ ⋯ x_{ℓn} cₙ) and, if available, 𝔼′ of the same
    word. The coefficients are d×d matrices.
    """
    d: int = 1
    has_inf: bool = True
    memoize: bool = False

    def __init__(self, d: int = 1):
        self.d = d
        self._cache: dict = {}

    def expect(self, word: Sequence[str], coeffs: Sequence[np.ndarray]) -> np.ndarray:
        self._check(word, coeffs)
        if not word:
            return np.array(coeffs[0], dtype=complex)
        return self._lookup('std', word, coeffs, self._moment)

    def inf_expect(self, word: Sequence[str], coeffs: Sequence[np.ndarray]) -> np.ndarray:
        self._check(word, coeffs)
        if not self.has_inf:
            raise ValidationError(f'{type(self).__name__} has no infinitesimal functional')
        if not word:
            return np.zeros((self.d, self.d), dtype=complex)
        return self._lookup('inf', word, coeffs, self._inf_moment)

    def _lookup(self, part, word, coeffs, fn):
        if not self.memoize:
            return fn(tuple(word), coeffs)
        key = (part,) + _coeff_key(word, coeffs)
        try:
            return self._cache[key]
        except KeyError:
            value = self._cache[key] = fn(tuple(word), coeffs)
            return value

    def _check(self, word, coeffs):
        if len(coeffs) != len(word) + 1:
            raise ValidationError(f'word of length {len(word)} needs {len(word) + 1} coefficients ({len(coeffs)})')

    @abc.abstractmethod
    def _moment(self, word: tuple[str, ...], coeffs) -> np.ndarray:
        ...

    def _inf_moment(self, word: tuple[str, ...], coeffs) -> np.ndarray:
        raise NotImplementedError

    def letter(self, label: str) -> NCPoly:
        return NCPoly.letter(label, self.d)


def _chain(coeffs) -> np.ndarray:
    result = coeffs[0]
    for c in coeffs[1:]:
        result = result @ c
    return result


class FunctionOracle(MomentOracle):
    """Wraps plain callables (word, coeffs) -> d×d matrix."""

    def __init__(self, d: int, std_fn: Callable, inf_fn: Optional[Callable] = None):
        super().__init__(d)
        self.std_fn = std_fn
        self.inf_fn = inf_fn
        self.has_inf = inf_fn is not None

    def _moment(self, word, coeffs):
        return np.asarray(self.std_fn(word, coeffs), dtype=complex)

    def _inf_moment(self, word, coeffs):
        return np.asarray(self.inf_fn(word, coeffs), dtype=complex)


class MomentTableOracle(MomentOracle):
    """
    A single variable x = a⊗I_d under φ⊗Id_d, given the scalar moment
    sequences of a: 𝔼(c₀ x c₁ ⋯ x cₙ) = mₙ·c₀c₁⋯cₙ.
    """

    def __init__(self, label: str, std_moments: Sequence[complex], inf_moments: Sequence[complex], d: int = 1):
        super().__init__(d)
        self.label = label
        self.std_moments = list(std_moments)
        self.inf_moments = list(inf_moments)

    def _order(self, word, table):
        if any(w != self.label for w in word):
            raise ValidationError(f'oracle for {self.label!r} cannot evaluate word {word}')
        if len(word) >= len(table):
            raise MissingOrderError(f'moment of order {len(word)} not tabulated (max {len(table) - 1})')
        return table[len(word)]

    def _moment(self, word, coeffs):
        return self._order(word, self.std_moments) * _chain(coeffs)

    def _inf_moment(self, word, coeffs):
        return self._order(word, self.inf_moments) * _chain(coeffs)


class FreeProductOracle(MomentOracle):
    """
    Scalar (φ, φ′) on the free product of single-variable algebras, evaluated
    from the definition. Alternating products of centered elements have φ = 0,
    and φ′ obeys the Leibniz-type rule. Expanding ∏(uᵢ − φ(uᵢ)) turns both
    rules into recursions on shorter words.
    """
    memoize = True

    def __init__(self, tables: dict[str, tuple[Sequence[complex], Sequence[complex]]]):
        super().__init__(1)
        self.tables = {k: (list(m), list(mp)) for k, (m, mp) in tables.items()}
        self._phi_cache: dict = {}
        self._dphi_cache: dict = {}

    def _single(self, label, power, part):
        table = self.tables[label][part]
        if power >= len(table):
            raise MissingOrderError(f'moment of order {power} of {label!r} not tabulated')
        return table[power]

    @staticmethod
    def _groups(word) -> tuple[tuple[str, int], ...]:
        return tuple((label, len(list(run))) for label, run in itertools.groupby(word))

    @staticmethod
    def _merge(groups) -> tuple[tuple[str, int], ...]:
        merged: list[list] = []
        for label, power in groups:
            if merged and merged[-1][0] == label:
                merged[-1][1] += power
            else:
                merged.append([label, power])
        return tuple((label, power) for label, power in merged)

    def _subsets(self, groups):
        """(remaining groups, ∏ −cᵢ over dropped i) for every proper subset kept."""
        m = len(groups)
        means = [self._single(label, power, 0) for label, power in groups]
        for mask in range(2 ** m - 1):
            kept = [groups[i] for i in range(m) if mask >> i & 1]
            weight = 1
            for i in range(m):
                if not mask >> i & 1:
                    weight *= -means[i]
            yield self._merge(kept), weight

    def _phi(self, groups) -> complex:
        if groups in self._phi_cache:
            return self._phi_cache[groups]
        if not groups:
            value = 1
        elif len(groups) == 1:
            value = self._single(*groups[0], 0)
        else:
            value = -sum(w * self._phi(kept) for kept, w in self._subsets(groups))
        self._phi_cache[groups] = value
        return value

    def _dphi(self, groups) -> complex:
        if groups in self._dphi_cache:
            return self._dphi_cache[groups]
        if not groups:
            value = 0
        elif len(groups) == 1:
            value = self._single(*groups[0], 1)
        else:
            m = len(groups)
            means = [self._single(label, power, 0) for label, power in groups]
            leibniz = 0
            for j in range(m):
                rest = [(i, groups[i]) for i in range(m) if i != j]
                # φ of the product of the remaining centered elements
                centered = 0
                for mask in range(2 ** len(rest)):
                    kept = [g for k, (_, g) in enumerate(rest) if mask >> k & 1]
                    weight = 1
                    for k, (i, _) in enumerate(rest):
                        if not mask >> k & 1:
                            weight *= -means[i]
                    centered += weight * self._phi(self._merge(kept))
                leibniz += self._single(*groups[j], 1) * centered
            value = leibniz - sum(w * self._dphi(kept) for kept, w in self._subsets(groups))
        self._dphi_cache[groups] = value
        return value

    def _moment(self, word, coeffs):
        return self._phi(self._groups(word)) * _chain(coeffs)

    def _inf_moment(self, word, coeffs):
        return self._dphi(self._groups(word)) * _chain(coeffs)


def _as_args(oracle: MomentOracle, args) -> list[NCPoly]:
    return [NCPoly.coerce(a, oracle.d) for a in args]


def nested_evaluate(p: Partition, block_value: Callable, one):
    """
    Evaluate the nesting of @p. @block_value(k, block, inner) receives the
    values of the gaps between consecutive elements of the block and returns
    the block's value. Outer blocks multiply left to right, starting from @one.
    """
    index = p.block_index

    def segment(i, j):
        result = one
        while i <= j:
            k = index[i]
            block = p.blocks[k]
            inner = [segment(a + 1, b - 1) for a, b in zip(block, block[1:])]
            result = result @ block_value(k, block, inner)
            i = block[-1] + 1
        return result

    return segment(1, p.n)


def _spliced(args, block, inner):
    product = args[block[0] - 1]
    for value, nxt in zip(inner, block[1:]):
        product = product @ value @ args[nxt - 1]
    return product


def _check_partition(p: Partition, args):
    if not is_noncrossing(p):
        raise CrossingPartitionError(f'partition {p} is crossing')
    if len(args) != p.n:
        raise ValidationError(f'partition of {p.n} elements applied to {len(args)} arguments')


def moment_pi(o: MomentOracle, p: Partition, args) -> np.ndarray:
    """𝔼_π(a₁, …, aₙ)."""
    args = _as_args(o, args)
    _check_partition(p, args)
    return nested_evaluate(p, lambda k, block, inner: _spliced(args, block, inner).expect(o), np.eye(o.d))


def dmoment_pi_V(o: MomentOracle, p: Partition, V: Iterable[int], args) -> np.ndarray:
    """∂𝔼_{π,V}: 𝔼_π with 𝔼′ used for block V only."""
    args = _as_args(o, args)
    _check_partition(p, args)
    V = tuple(sorted(V))
    if V not in p.blocks:
        raise ValidationError(f'{V} is not a block of {p}')
    if not o.has_inf:
        raise ValidationError(f'{type(o).__name__} has no infinitesimal functional')

    def block_value(k, block, inner):
        product = _spliced(args, block, inner)
        return product.inf_expect(o) if block == V else product.expect(o)

    return nested_evaluate(p, block_value, np.eye(o.d))


def dmoment_pi(o: MomentOracle, p: Partition, args) -> np.ndarray:
    """∂𝔼_π = ∑_{V∈π} ∂𝔼_{π,V}."""
    return sum(dmoment_pi_V(o, p, V, args) for V in p.blocks)


def free_cumulant(o: MomentOracle, args) -> tuple[np.ndarray, np.ndarray]:
    """(κₙ^B, ∂κₙ^B) of the arguments, by Möbius inversion over NC(n)."""
    args = _as_args(o, args)
    n = len(args)
    if n > MAX_CONVERSION_ORDER:
        raise SizeCapError(f'cumulant order {n} above cap {MAX_CONVERSION_ORDER}')
    std = np.zeros((o.d, o.d), dtype=complex)
    inf = np.zeros((o.d, o.d), dtype=complex)
    for p in enumerate_nc(n):
        mu = mobius_to_one(p)
        std += mu * moment_pi(o, p, args)
        if o.has_inf:
            inf += mu * dmoment_pi(o, p, args)
    return std, inf


def expect_dual(o: MomentOracle, word: Sequence[str], coeffs: Sequence[Dual], infinitesimal: bool = False) -> DualMatrix:
    """
    𝔼 of a word whose coefficients carry t-parts. The t-part is the sum over
    coefficient slots plus 𝔼′ when @infinitesimal is set.
    """
    std_coeffs = [c.std for c in coeffs]
    value = o.expect(word, std_coeffs)
    inf = np.zeros_like(value)
    for j, c in enumerate(coeffs):
        if np.any(c.inf):
            varied = list(std_coeffs)
            varied[j] = c.inf
            inf = inf + o.expect(word, varied)
    if infinitesimal:
        inf = inf + o.inf_expect(word, std_coeffs)
    return DualMatrix(value, inf)


class CumulantFamily(abc.ABC):
    """
    κ^B and ∂κ^B of the variables in one subalgebra. Both parts act on words
    c₀ x_{ℓ1} c₁ ⋯ x_{ℓn} cₙ and are B-bilinear in the outer coefficients.
    """
    labels: frozenset[str]
    max_order: Optional[int] = None
    d: int = 1

    def check_order(self, word):
        if self.max_order is not None and len(word) > self.max_order:
            raise MissingOrderError(f'cumulant of order {len(word)} requested, family holds up to {self.max_order}')

    @abc.abstractmethod
    def std(self, word: tuple[str, ...], coeffs: Sequence[np.ndarray]) -> np.ndarray:
        ...

    @abc.abstractmethod
    def inf(self, word: tuple[str, ...], coeffs: Sequence[np.ndarray]) -> np.ndarray:
        ...

    def evaluate(self, word: tuple[str, ...], coeffs: Sequence[Dual]) -> DualMatrix:
        """κ̃ = κ + t∂κ on coefficients that carry their own t-parts."""
        self.check_order(word)
        std_coeffs = [c.std for c in coeffs]
        value = self.std(word, std_coeffs)
        inf = self.inf(word, std_coeffs)
        for j, c in enumerate(coeffs):
            if np.any(c.inf):
                varied = list(std_coeffs)
                varied[j] = c.inf
                inf = inf + self.std(word, varied)
        return DualMatrix(value, inf)


class ScalarCumulants(CumulantFamily):
    """
    Tabulated scalar cumulants (κ, κ′) per word. For d > 1 they act as the
    cumulants of a⊗I_d under φ⊗Id_d: κ^B(c₀ x c₁ ⋯ x cₙ) = κ·c₀c₁⋯cₙ.
    Words missing from the table within max_order are zero.
    """

    def __init__(self, table: dict[tuple[str, ...], tuple[complex, complex]], max_order: int,
                 labels: Iterable[str] = None, d: int = 1):
        self.table = {tuple(w): (complex(k), complex(kp)) for w, (k, kp) in table.items()}
        self.max_order = max_order
        self.labels = frozenset(labels if labels is not None else {x for w in self.table for x in w})
        self.d = d

    @classmethod
    def single(cls, label: str, std: Sequence[complex], inf: Sequence[complex] = None, d: int = 1) -> ScalarCumulants:
        """From sequences κ₁, κ₂, … (index 0 is κ₁) of one variable."""
        inf = list(inf) if inf is not None else [0] * len(std)
        if len(inf) != len(std):
            raise ValidationError(f'std and inf cumulant sequences differ in length ({len(std)} vs {len(inf)})')
        table = {(label,) * (n + 1): (k, kp) for n, (k, kp) in enumerate(zip(std, inf))}
        return cls(table, len(std), [label], d)

    def lifted(self, d: int) -> ScalarCumulants:
        return ScalarCumulants(self.table, self.max_order, self.labels, d)

    def __add__(self, other: ScalarCumulants) -> ScalarCumulants:
        """Cumulants of the sum of free copies, on matching labels."""
        order = min(self.max_order, other.max_order)
        table = {}
        for w in set(self.table) | set(other.table):
            if len(w) <= order:
                a = self.table.get(w, (0, 0))
                b = other.table.get(w, (0, 0))
                table[w] = (a[0] + b[0], a[1] + b[1])
        return ScalarCumulants(table, order, self.labels | other.labels, self.d)

    def value(self, word) -> tuple[complex, complex]:
        word = tuple(word)
        self.check_order(word)
        return self.table.get(word, (0j, 0j))

    def std(self, word, coeffs):
        return self.value(word)[0] * _chain(coeffs)

    def inf(self, word, coeffs):
        return self.value(word)[1] * _chain(coeffs)

    def to_json(self) -> list[dict]:
        return [
            {
                'order': len(w),
                'labels': list(w),
                'std': [[k.real, k.imag]],
                'inf': [[kp.real, kp.imag]],
            }
            for w, (k, kp) in sorted(self.table.items(), key=lambda item: (len(item[0]), item[0]))
        ]


class SemicircularCumulants(CumulantFamily):
    """
    A B-valued semicircular element: κ₁ = mean, κ₂(x c x) = η(c), all higher
    cumulants zero; the infinitesimal parts are mean′ and η′.
    """

    def __init__(self, label: str, eta: Callable[[np.ndarray], np.ndarray], d: int,
                 eta_inf: Callable[[np.ndarray], np.ndarray] = None,
                 mean: np.ndarray = None, mean_inf: np.ndarray = None):
        self.labels = frozenset([label])
        self.d = d
        zero = np.zeros((d, d), dtype=complex)
        self.eta = eta
        self.eta_inf = eta_inf if eta_inf is not None else (lambda c: zero)
        self.mean = zero if mean is None else np.asarray(mean, dtype=complex)
        self.mean_inf = zero if mean_inf is None else np.asarray(mean_inf, dtype=complex)

    def _value(self, word, coeffs, eta, mean):
        if len(word) == 1:
            return coeffs[0] @ mean @ coeffs[1]
        if len(word) == 2:
            return coeffs[0] @ eta(coeffs[1]) @ coeffs[2]
        return np.zeros((self.d, self.d), dtype=complex)

    def std(self, word, coeffs):
        return self._value(word, coeffs, self.eta, self.mean)

    def inf(self, word, coeffs):
        return self._value(word, coeffs, self.eta_inf, self.mean_inf)


class OracleCumulants(CumulantFamily):
    """Cumulants computed on demand from a moment oracle by Möbius inversion."""

    def __init__(self, oracle: MomentOracle, labels: Iterable[str], max_order: int):
        self.oracle = oracle
        self.labels = frozenset(labels)
        self.max_order = max_order
        self.d = oracle.d
        self._cache: dict = {}

    def _both(self, word, coeffs):
        self.check_order(word)
        key = _coeff_key(word, coeffs)
        if key not in self._cache:
            args = [self.oracle.letter(w) @ c for w, c in zip(word, coeffs[1:])]
            k, kp = free_cumulant(self.oracle, args)
            self._cache[key] = (coeffs[0] @ k, coeffs[0] @ kp)
        return self._cache[key]

    def std(self, word, coeffs):
        return self._both(word, coeffs)[0]

    def inf(self, word, coeffs):
        return self._both(word, coeffs)[1]


def cumulants_from_moments(o: MomentOracle, labels: Union[str, Iterable[str]], N_max: int) -> CumulantFamily:
    """
    κ^B and ∂κ^B for every word over @labels up to order @N_max. Scalar
    oracles are tabulated; operator-valued ones are evaluated lazily because
    the coefficients range over all of B.
    """
    if not 1 <= N_max <= MAX_CONVERSION_ORDER:
        raise SizeCapError(f'conversion order must be in 1..{MAX_CONVERSION_ORDER} ({N_max})')
    labels = [labels] if isinstance(labels, str) else sorted(labels)
    if o.d != 1:
        return OracleCumulants(o, labels, N_max)

    table = {}
    for n in range(1, N_max + 1):
        for word in itertools.product(labels, repeat=n):
            k, kp = free_cumulant(o, list(word))
            table[word] = (k[0, 0], kp[0, 0])
    log.debug('tabulated %d cumulants over %s up to order %d', len(table), labels, N_max)
    return ScalarCumulants(table, N_max, labels)


def _family_lookup(families: Sequence[CumulantFamily]) -> dict[str, CumulantFamily]:
    lookup = {}
    for family in families:
        for label in family.labels:
            if label in lookup:
                raise ValidationError(f'label {label!r} appears in more than one family')
            lookup[label] = family
    return lookup


def _homogeneous(p: Partition, word, lookup) -> bool:
    return all(len({id(lookup[word[e - 1]]) for e in block}) == 1 for block in p.blocks)


def _free_moment(lookup: dict[str, CumulantFamily], word: tuple[str, ...], coeffs: Sequence[np.ndarray], d: int) -> DualMatrix:
    """∑_π κ̃_π over NC(n) with mixed blocks dropped, in dual arithmetic."""
    n = len(word)
    if n == 0:
        return DualMatrix(coeffs[0])
    for label in word:
        if label not in lookup:
            raise ValidationError(f'no cumulant family holds label {label!r}')
    one = DualMatrix.identity(d)
    duals = [DualMatrix(c) for c in coeffs]
    total = DualMatrix(np.zeros((d, d)))

    def block_value(k, block, inner):
        labels = tuple(word[e - 1] for e in block)
        cs = [one] + [duals[a] @ value for a, value in zip(block, inner)] + [duals[block[-1]]]
        return lookup[labels[0]].evaluate(labels, cs)

    for p in enumerate_nc(n):
        if _homogeneous(p, word, lookup):
            total = total + nested_evaluate(p, block_value, one)
    return duals[0] @ total


def _normalize_word(word, d):
    labels, coeffs = [], [np.eye(d, dtype=complex)]
    for item in word:
        if isinstance(item, str):
            labels.append(item)
            coeffs.append(np.eye(d, dtype=complex))
        else:
            label, c = item
            labels.append(label)
            coeffs.append(np.asarray(c, dtype=complex) * np.eye(d) if np.ndim(c) == 0 else np.asarray(c, dtype=complex))
    return tuple(labels), coeffs


def moments_from_cumulants(c: Union[CumulantFamily, Sequence[CumulantFamily]], word) -> tuple[np.ndarray, np.ndarray]:
    """
    (𝔼, 𝔼′) of x_{ℓ1} b₁ ⋯ x_{ℓn} bₙ from the cumulants. @word holds labels or
    (label, right coefficient) pairs. Mixed cumulants between different
    families are taken to be zero.
    """
    families = [c] if isinstance(c, CumulantFamily) else list(c)
    d = families[0].d
    labels, coeffs = _normalize_word(word, d)
    if len(labels) > MAX_CONVERSION_ORDER:
        raise SizeCapError(f'moment order {len(labels)} above cap {MAX_CONVERSION_ORDER}')
    result = _free_moment(_family_lookup(families), labels, coeffs, d)
    return result.std, result.inf


class FreeJointOracle(MomentOracle):
    """
    Joint (𝔼, 𝔼′) of infinitesimally free families. Moments are assembled
    from the cumulants with every mixed κ^B and ∂κ^B set to zero.
    """
    memoize = True

    def __init__(self, families: Sequence[CumulantFamily]):
        families = list(families)
        if not families:
            raise ValidationError('at least one cumulant family is required')
        d = families[0].d
        if any(f.d != d for f in families):
            raise ValidationError(f'families disagree on d ({[f.d for f in families]})')
        super().__init__(d)
        self.families = families
        self.lookup = _family_lookup(families)
        self._joint: dict = {}

    @property
    def labeling(self) -> dict[str, int]:
        return {label: i for i, f in enumerate(self.families) for label in f.labels}

    def _both(self, word, coeffs) -> DualMatrix:
        if len(word) > MAX_CONVERSION_ORDER:
            raise SizeCapError(f'moment order {len(word)} above cap {MAX_CONVERSION_ORDER}')
        key = _coeff_key(word, coeffs)
        if key not in self._joint:
            self._joint[key] = _free_moment(self.lookup, word, coeffs, self.d)
        return self._joint[key]

    def _moment(self, word, coeffs):
        return self._both(word, coeffs).std

    def _inf_moment(self, word, coeffs):
        return self._both(word, coeffs).inf


def joint_from_free_cumulants(families: Sequence[CumulantFamily]) -> FreeJointOracle:
    return FreeJointOracle(families)


def tilde_cumulant(te: TildeExpectation, A: Sequence[Dual]) -> DualMatrix:
    """κ̃ₙ(A₁, …, Aₙ) = ∑_π μ(π, 1ₙ)·Ẽ_π, computed in the embedded space."""
    n = len(A)
    if not 1 <= n <= MAX_CONVERSION_ORDER:
        raise SizeCapError(f'cumulant order must be in 1..{MAX_CONVERSION_ORDER} ({n})')
    A = [Dual.lift(a) for a in A]
    d = A[0].std.d
    one = DualMatrix.identity(d)
    total = DualMatrix(np.zeros((d, d)))
    for p in enumerate_nc(n):
        value = nested_evaluate(p, lambda k, block, inner: te(_spliced(A, block, inner)), one)
        total = total + mobius_to_one(p) * value
    return total


def tilde_cumulant_blockwise(o: MomentOracle, A: Sequence[Dual]) -> DualMatrix:
    """
    The right side of the block formula:
    [[κₙ(a), ∑ⱼ κₙ(a₁…a′ⱼ…aₙ) + ∂κₙ(a)], [0, κₙ(a)]].
    """
    A = [Dual.lift(a) for a in A]
    std_args = [NCPoly.coerce(a.std, o.d) for a in A]
    k, dk = free_cumulant(o, std_args)
    inf = dk
    for j, a in enumerate(A):
        shift = NCPoly.coerce(a.inf, o.d)
        if shift.terms:
            varied = list(std_args)
            varied[j] = shift
            inf = inf + free_cumulant(o, varied)[0]
    return DualMatrix(k, inf)


@dataclasses.dataclass
class FreenessReport:
    std_violation: float = 0.0
    inf_violation: float = 0.0
    mixed_cumulant_violation: float = 0.0
    embedded_violation: float = 0.0
    words_checked: int = 0
    cumulants_checked: int = 0

    @property
    def definitional_violation(self) -> float:
        return max(self.std_violation, self.inf_violation)

    @property
    def max_violation(self) -> float:
        return max(self.definitional_violation, self.mixed_cumulant_violation, self.embedded_violation)

    def passed(self, tol: float = 1e-10) -> bool:
        return self.max_violation <= tol

    def to_json(self) -> dict:
        data = dataclasses.asdict(self)
        data['max_violation'] = self.max_violation
        return data


def _norm(x: np.ndarray) -> float:
    return float(np.abs(x).max()) if np.size(x) else 0.0


def _default_elements(o: MomentOracle, labeling: dict[str, int], degree: int) -> dict[int, list[NCPoly]]:
    """Centered powers x^k, k < @degree, of every label, plus x·h for a Hermitian h when d > 1."""
    elements: dict[int, list[NCPoly]] = {}
    rng = np.random.default_rng(0)
    for label, index in sorted(labeling.items()):
        x = o.letter(label)
        power = x
        for _ in range(max(degree - 1, 1)):
            elements.setdefault(index, []).append(power.centered(o))
            power = power @ x
        if o.d > 1:
            z = rng.standard_normal((o.d, o.d)) + 1j * rng.standard_normal((o.d, o.d))
            elements[index].append((x @ ((z + z.conj().T) / 2)).centered(o))
    return elements


def _product(elements: Sequence):
    result = elements[0]
    for e in elements[1:]:
        result = result @ e
    return result


def freeness_check(o: MomentOracle, labeling: dict[str, int], n_max: int = 6,
                   elements: dict[int, list[NCPoly]] = None, mixed_order: int = None) -> FreenessReport:
    """
    Measure how far @o is from making the subalgebras of @labeling
    infinitesimally free. Three routes are reported:

    * the defining identities on alternating words of centered elements;
    * mixed κ^B and ∂κ^B on words whose labels are not all in one subalgebra;
    * Ẽ of alternating embedded words (aⱼ, −𝔼′(aⱼ)), which are Ẽ-centered.
    """
    if not 1 <= n_max <= MAX_FREENESS_ORDER:
        raise SizeCapError(f'freeness check order must be in 1..{MAX_FREENESS_ORDER} ({n_max})')
    # alternating words of the default pool are capped by total degree
    degree_cap = n_max if elements is None else None
    if elements is None:
        elements = _default_elements(o, labeling, n_max)
    mixed_order = min(n_max, 6) if mixed_order is None else mixed_order
    te = TildeExpectation.from_oracle(o)
    report = FreenessReport()
    indices = sorted(elements)

    for n in range(2, n_max + 1):
        for pattern in itertools.product(indices, repeat=n):
            if any(a == b for a, b in zip(pattern, pattern[1:])):
                continue
            for word in itertools.product(*(elements[i] for i in pattern)):
                if degree_cap is not None and sum(a.degree for a in word) > degree_cap:
                    continue
                report.words_checked += 1
                report.std_violation = max(report.std_violation, _norm(_product(word).expect(o)))
                if not o.has_inf:
                    continue
                shifts = [a.inf_expect(o) for a in word]
                leibniz = sum(
                    _product(list(word[:j]) + [NCPoly.constant(shifts[j], o.d)] + list(word[j + 1:])).expect(o)
                    for j in range(n)
                )
                report.inf_violation = max(report.inf_violation, _norm(_product(word).inf_expect(o) - leibniz))
                embedded = te(_product([Dual(a, NCPoly.constant(-s, o.d)) for a, s in zip(word, shifts)]))
                report.embedded_violation = max(report.embedded_violation, _norm(embedded.std), _norm(embedded.inf))

    labels = sorted(labeling)
    for n in range(2, mixed_order + 1):
        for word in itertools.product(labels, repeat=n):
            if len({labeling[w] for w in word}) == 1:
                continue
            report.cumulants_checked += 1
            k, dk = free_cumulant(o, list(word))
            report.mixed_cumulant_violation = max(report.mixed_cumulant_violation, _norm(k), _norm(dk) if o.has_inf else 0.0)

    log.info('freeness check: %d words, %d mixed cumulants, max violation %.3g',
             report.words_checked, report.cumulants_checked, report.max_violation)
    return report
