import itertools

import pytest

from infinifree.errors import CrossingPartitionError, SizeCapError, ValidationError
from infinifree.ncpart import (
    Partition, catalan, enumerate_nc, is_noncrossing, kreweras, mobius_to_one, one, rotate, zero,
)


def _set_partitions(n):
    for labels in itertools.product(range(n), repeat=n):
        # restricted growth strings only
        if all(labels[i] <= max(labels[:i], default=-1) + 1 for i in range(n)):
            yield Partition.from_labels(labels)


@pytest.mark.parametrize('blocks, n, expected', [
    (((1, 3), (2, 4)), 4, False),
    (((1, 4), (2, 3)), 4, True),
    (((1, 2, 3, 4, 5),), 5, True),
    (((1, 5), (2, 4), (3,)), 5, True),
    (((1, 3, 5), (2, 4)), 5, False),
])
def test_is_noncrossing(blocks, n, expected):
    assert is_noncrossing(Partition(n, blocks)) is expected


@pytest.mark.parametrize('n', range(1, 11))
def test_enumerate_counts(n):
    assert len(enumerate_nc(n)) == catalan(n)


@pytest.mark.parametrize('n', range(1, 7))
def test_enumerate_matches_brute_force(n):
    expected = {p for p in _set_partitions(n) if is_noncrossing(p)}
    assert set(enumerate_nc(n)) == expected


def test_enumerate_small():
    assert enumerate_nc(1) == [Partition(1, ((1,),))]
    assert len(enumerate_nc(3)) == 5
    assert len(enumerate_nc(4)) == 14


@pytest.mark.parametrize('n', [0, 15])
def test_enumerate_size_cap(n):
    with pytest.raises(SizeCapError):
        enumerate_nc(n)


def test_partition_canonical_form():
    p = Partition(4, ((4, 2), (3,), (1,)))
    assert p.blocks == ((1,), (2, 4), (3,))
    assert Partition.from_labels((0, 1, 0)).blocks == ((1, 3), (2,))
    assert p.block_of(4) == (2, 4)


@pytest.mark.parametrize('blocks', [((1, 2),), ((1, 2), (2, 3)), ((1,), ())])
def test_partition_rejects_non_partitions(blocks):
    with pytest.raises(ValidationError):
        Partition(3, blocks)


def test_refines():
    p = Partition(4, ((1, 4), (2,), (3,)))
    assert zero(4).refines(p)
    assert p.refines(one(4))
    assert not one(4).refines(p)
    assert not p.refines(Partition(4, ((1, 2), (3, 4))))


@pytest.mark.parametrize('p, expected', [
    (zero(4), one(4)),
    (one(4), zero(4)),
    (Partition(3, ((1, 2), (3,))), Partition(3, ((1,), (2, 3)))),
])
def test_kreweras(p, expected):
    assert kreweras(p) == expected


@pytest.mark.parametrize('n', range(1, 8))
def test_kreweras_twice_rotates(n):
    for p in enumerate_nc(n):
        assert kreweras(kreweras(p)) == rotate(p)
        assert len(p) + len(kreweras(p)) == n + 1


def test_kreweras_rejects_crossing():
    with pytest.raises(CrossingPartitionError):
        kreweras(Partition(4, ((1, 3), (2, 4))))


@pytest.mark.parametrize('p, expected', [
    (one(5), 1),
    (zero(3), 2),
    (zero(4), -5),
    (Partition(4, ((1, 2), (3,), (4,))), 2),
])
def test_mobius_values(p, expected):
    assert mobius_to_one(p) == expected


@pytest.mark.parametrize('n', [1, 2, 3, 4, 5, 6, 7, pytest.param(8, marks=pytest.mark.slow)])
def test_mobius_recursion(n):
    # ∑_{π ≤ σ ≤ 1} μ(σ, 1) = [π = 1]
    partitions = enumerate_nc(n)
    for p in partitions:
        total = sum(mobius_to_one(q) for q in partitions if p.refines(q))
        assert total == (1 if p == one(n) else 0)
