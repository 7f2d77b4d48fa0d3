from collections import Counter
from itertools import combinations, product

import pytest
from hypothesis import given, settings, strategies as st

from conftest import CHI2_4_999, TapeRandom, chi_square
from msvc.field import FieldMatrix, FieldModulus, FieldRandom, FieldVector, random_matrix, random_vector
from msvc.sharing import reconstruct_sum, share_matrix, share_vector


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32))
def test_matrix_reconstruction(a, m, d, seed):
    mod = FieldModulus(101)
    rng = FieldRandom(seed)
    F = random_matrix(m, d, mod, rng)
    shares = share_matrix(F, a, rng)
    assert len(shares) == a
    assert reconstruct_sum(shares) == F


@pytest.mark.parametrize("b", [2, 3])
def test_vector_reconstruction(b, rng):
    mod = FieldModulus(1009)
    x = random_vector(6, mod, rng)
    assert reconstruct_sum(share_vector(x, b, rng)) == x


def test_zero_secret_two_shares(q7):
    s1, s2 = share_matrix(FieldMatrix.from_ints([[0]], q7), 2, FieldRandom(3))
    assert (s1.rows[0][0] + s2.rows[0][0]) % 7 == 0


def test_vector_shares_deterministic(q7):
    x = FieldVector.from_ints([1, 2], q7)
    first = share_vector(x, 2, FieldRandom(8))
    again = share_vector(x, 2, FieldRandom(8))
    assert first == again
    assert [s.values for s in first] == [(1, 2), (0, 0)]


def test_reconstruct_examples(q7):
    one = FieldMatrix.from_ints([[4, 2]], q7)
    assert reconstruct_sum([one]) == one
    total = reconstruct_sum([FieldMatrix.from_ints([[1]], q7), FieldMatrix.from_ints([[6]], q7)])
    assert total.rows == ((0,),)


def test_errors(q7):
    x = FieldVector.from_ints([1], q7)
    with pytest.raises(ValueError):
        share_vector(x, 1, FieldRandom(0))
    with pytest.raises(ValueError):
        share_matrix(FieldMatrix.from_ints([[1]], q7), 1, FieldRandom(0))
    with pytest.raises(ValueError):
        reconstruct_sum([])
    with pytest.raises(ValueError):
        reconstruct_sum([x, FieldVector.from_ints([1, 2], q7)])


def test_first_matrix_share_uniform_q5():
    mod = FieldModulus(5)
    F = FieldMatrix.from_ints([[2]], mod)
    rng = FieldRandom(11)
    counts = Counter(share_matrix(F, 2, rng)[0].rows[0][0] for _ in range(100_000))
    assert chi_square([counts[i] for i in range(5)], 20_000) < CHI2_4_999


def test_each_vector_share_uniform_q5():
    mod = FieldModulus(5)
    x = FieldVector.from_ints([4], mod)
    rng = FieldRandom(12)
    counts = [Counter() for _ in range(3)]
    for _ in range(100_000):
        for c, s in zip(counts, share_vector(x, 3, rng)):
            c[s.values[0]] += 1
    for c in counts:
        assert chi_square([c[i] for i in range(5)], 20_000) < CHI2_4_999


@pytest.mark.parametrize("b", [2, 3])
def test_proper_subsets_independent_of_secret_exhaustive(b):
    # q = 2, d = 1: enumerate every coin sequence for the b - 1 free shares.
    mod = FieldModulus(2)
    tapes = list(product(range(2), repeat=b - 1))
    for size in range(1, b):
        for subset in combinations(range(b), size):
            dists = []
            for secret in (0, 1):
                x = FieldVector((secret,), mod)
                dist = Counter()
                for tape in tapes:
                    shares = share_vector(x, b, TapeRandom(tape))
                    dist[tuple(shares[i].values for i in subset)] += 1
                dists.append(dist)
            assert dists[0] == dists[1]


def test_full_share_set_reveals_secret():
    # Sanity check on the oracle above: all b shares do depend on the secret.
    mod = FieldModulus(2)
    views = []
    for secret in (0, 1):
        x = FieldVector((secret,), mod)
        views.append({tuple(s.values for s in share_vector(x, 2, TapeRandom(t))) for t in product(range(2), repeat=1)})
    assert views[0].isdisjoint(views[1])
