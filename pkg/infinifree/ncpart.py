"""
Exact combinatorics of the non-crossing partition lattice NC(n): enumeration,
refinement order, Kreweras complement and the Möbius function μ(π, 1ₙ).
"""

from __future__ import annotations

import dataclasses
import functools
import math
from functools import cached_property
from typing import Iterable, Sequence

from .errors import CrossingPartitionError, SizeCapError, ValidationError


__all__ = ['MAX_NC_ORDER', 'Partition', 'catalan', 'is_noncrossing',
           'enumerate_nc', 'kreweras', 'mobius_to_one', 'rotate', 'one', 'zero']


MAX_NC_ORDER = 14


def catalan(k: int) -> int:
    return math.comb(2 * k, k) // (k + 1)


@dataclasses.dataclass(frozen=True)
class Partition:
    """
    A set partition of {1..n} in canonical form: blocks sorted by their
    minimum element, elements sorted within each block.
    """
    n: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f'ground set size must be positive ({self.n})')
        canonical = tuple(sorted(tuple(sorted(b)) for b in self.blocks))
        seen = [e for b in canonical for e in b]
        if any(not b for b in canonical) or sorted(seen) != list(range(1, self.n + 1)):
            raise ValidationError(f'blocks {self.blocks} do not partition {{1..{self.n}}}')
        object.__setattr__(self, 'blocks', canonical)

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], n: int = None) -> Partition:
        blocks = tuple(tuple(b) for b in blocks)
        if n is None:
            n = max(max(b) for b in blocks)
        return cls(n, blocks)

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> Partition:
        """
        Build a partition from its block-of-element vector, e.g. (0, 1, 0)
        for {(1,3),(2)}.
        """
        groups: dict[int, list[int]] = {}
        for element, label in enumerate(labels, start=1):
            groups.setdefault(label, []).append(element)
        return cls(len(labels), tuple(tuple(g) for g in groups.values()))

    @cached_property
    def block_index(self) -> tuple[int, ...]:
        """Position-indexed block numbers; entry 0 is unused."""
        index = [0] * (self.n + 1)
        for k, block in enumerate(self.blocks):
            for e in block:
                index[e] = k
        return tuple(index)

    def block_of(self, element: int) -> tuple[int, ...]:
        return self.blocks[self.block_index[element]]

    def refines(self, other: Partition) -> bool:
        """True if every block of self lies inside a block of @other (self ≤ other)."""
        if self.n != other.n:
            return False
        return all(len({other.block_index[e] for e in b}) == 1 for b in self.blocks)

    def __len__(self):
        return len(self.blocks)

    def __str__(self):
        return '{' + ','.join('(' + ','.join(map(str, b)) + ')' for b in self.blocks) + '}'


def one(n: int) -> Partition:
    return Partition(n, (tuple(range(1, n + 1)),))


def zero(n: int) -> Partition:
    return Partition(n, tuple((i,) for i in range(1, n + 1)))


def is_noncrossing(p: Partition) -> bool:
    # a < b < c < d with a, c in one block and b, d in another. A block's
    # elements sit between consecutive elements of another block either all
    # together or not at all.
    index = p.block_index
    for block in p.blocks:
        for lo, hi in zip(block, block[1:]):
            inside = {index[e] for e in range(lo + 1, hi)}
            for k in inside:
                other = p.blocks[k]
                if other[0] < lo or other[-1] > hi:
                    return False
    return True


def _check_noncrossing(p: Partition):
    if not is_noncrossing(p):
        raise CrossingPartitionError(f'partition {p} is crossing')


@functools.lru_cache(maxsize=None)
def _enumerate_labels(n: int) -> tuple[tuple[int, ...], ...]:
    results = []
    labels = [0] * n
    # mins[k] / lasts[k]: smallest and largest element of block k so far.
    mins: list[int] = []
    lasts: list[int] = []

    def extend(i: int):
        if i == n:
            results.append(tuple(labels))
            return

        for k in range(len(mins)):
            last = lasts[k]
            # Adding i to block k is legal iff everything strictly between
            # its current last element and i belongs to blocks opened after it.
            if all(mins[labels[j]] > last for j in range(last + 1, i)):
                labels[i] = k
                lasts[k] = i
                extend(i + 1)
                lasts[k] = last

        labels[i] = len(mins)
        mins.append(i)
        lasts.append(i)
        extend(i + 1)
        mins.pop()
        lasts.pop()

    extend(0)
    return tuple(results)


@functools.lru_cache(maxsize=16)
def _enumerate_nc(n: int) -> tuple[Partition, ...]:
    return tuple(Partition.from_labels(labels) for labels in _enumerate_labels(n))


def enumerate_nc(n: int) -> list[Partition]:
    """
    All non-crossing partitions of {1..n}, ordered lexicographically by their
    block-of-element vectors. There are Catalan(n) of them.
    """
    if not 1 <= n <= MAX_NC_ORDER:
        raise SizeCapError(f'NC(n) enumeration supports 1 <= n <= {MAX_NC_ORDER} ({n})')
    return list(_enumerate_nc(n))


def _as_permutation(p: Partition) -> list[int]:
    perm = [0] * (p.n + 1)
    for block in p.blocks:
        for a, b in zip(block, block[1:] + block[:1]):
            perm[a] = b
    return perm


@functools.lru_cache(maxsize=4096)
def kreweras(p: Partition) -> Partition:
    """
    Kreweras complement, computed as the cycles of π⁻¹γ where π is read as
    the permutation cycling each block upward and γ = (1 2 ⋯ n).
    K(K(p)) is p rotated down by one position.
    """
    _check_noncrossing(p)
    n = p.n
    perm = _as_permutation(p)
    inverse = [0] * (n + 1)
    for a in range(1, n + 1):
        inverse[perm[a]] = a

    seen = set()
    blocks = []
    for start in range(1, n + 1):
        if start in seen:
            continue
        cycle = []
        e = start
        while e not in seen:
            seen.add(e)
            cycle.append(e)
            e = inverse[e % n + 1]
        blocks.append(tuple(cycle))
    return Partition(n, tuple(blocks))


def rotate(p: Partition, k: int = 1) -> Partition:
    """Shift every element down by @k positions, cyclically on {1..n}."""
    n = p.n
    return Partition(n, tuple(tuple((e - 1 - k) % n + 1 for e in b) for b in p.blocks))


@functools.lru_cache(maxsize=4096)
def mobius_to_one(p: Partition) -> int:
    """μ(p, 1ₙ) in NC(n), as a product over the blocks of the Kreweras complement."""
    result = 1
    for block in kreweras(p).blocks:
        size = len(block)
        result *= (-1) ** (size - 1) * catalan(size - 1)
    return result
