from itertools import product
from math import prod

import pytest
from hypothesis import given, settings, strategies as st

from msvc.covering import pi_s, pi_w
from msvc.field import FieldModulus, FieldRandom, count_ops, dot
from msvc.polydelegate import (
    DelegatedPolynomial,
    decompose_bivariate,
    decompose_bounded_multivariate,
    decompose_quadratic,
    decompose_univariate,
    evaluate_delegated,
    iter_points,
)
from msvc.protocol import VerificationFailed, random_offset

Q101 = FieldModulus(101)


def horner(coeffs, x, q):
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % q
    return acc


def bivariate_oracle(grid, x, y, q):
    return sum(grid[i][j] * x**i * y**j for i in range(len(grid)) for j in range(len(grid))) % q


def quadratic_oracle(grid, pt, q):
    n = len(grid)
    return sum(grid[i][j] * pt[i] * pt[j] for i in range(n) for j in range(n)) % q


def tensor_at(tensor, idx):
    for i in idx:
        tensor = tensor[i]
    return tensor


def multivariate_oracle(tensor, pt, q, start=1):
    side = len(tensor)
    total = 0
    for idx in product(range(side), repeat=len(pt)):
        total += tensor_at(tensor, idx) * prod(v ** (i + start) for v, i in zip(pt, idx))
    return total % q


def random_tensor(rng, nvars, side, q):
    if nvars == 0:
        return rng.elements(1, q)[0]
    return [random_tensor(rng, nvars - 1, side, q) for _ in range(side)]


def test_univariate_worked_example(rng):
    dec = decompose_univariate([1, 2, 3], Q101)
    assert dec.F.rows == ((1, 2), (3, 0))
    assert dec.build_x(2).values == (1, 2)
    assert dec.build_y(2).values == (1, 4)
    assert dec.evaluate_local(2) == 17
    assert evaluate_delegated(dec, 2, pi_s(), rng) == 17


def test_univariate_constant_and_padding():
    dec = decompose_univariate([42], Q101)
    assert dec.F.shape == (1, 1)
    assert all(dec.evaluate_local(x) == 42 for x in range(101))
    dec = decompose_univariate(list(range(1, 6)), Q101)  # degree 4 -> 3x3 grid, four zero pads
    assert dec.F.shape == (3, 3)
    assert dec.F.entries[5:] == (0, 0, 0, 0)


def test_univariate_degree_8(rng):
    coeffs = rng.elements(9, 101)
    dec = decompose_univariate(coeffs, Q101)
    assert dec.F.shape == (3, 3)
    assert evaluate_delegated(dec, 7, pi_w(), rng) == horner(coeffs, 7, 101)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 100), min_size=1, max_size=60), st.integers(0, 100))
def test_univariate_property(coeffs, x):
    assert decompose_univariate(coeffs, Q101).evaluate_local(x) == horner(coeffs, x, 101)


def test_bivariate_examples(rng):
    xy = [[0, 0], [0, 1]]
    assert evaluate_delegated(decompose_bivariate(xy, Q101), (3, 4), pi_s(), rng) == 12
    zero = decompose_bivariate([[0] * 3] * 3, Q101)
    assert all(zero.evaluate_local(p) == 0 for p in product(range(0, 101, 10), repeat=2))
    grid = [rng.elements(6, 101) for _ in range(6)]
    pt = tuple(rng.elements(2, 101))
    assert evaluate_delegated(decompose_bivariate(grid, Q101), pt, pi_s(), rng) == bivariate_oracle(grid, *pt, 101)


def test_bivariate_asymmetric_grid():
    # x**2 only; a transposed layout would yield y**2
    grid = [[0, 0, 0], [0, 0, 0], [1, 0, 0]]
    dec = decompose_bivariate(grid, Q101)
    assert dec.evaluate_local((5, 7)) == 25


def test_quadratic_examples(rng):
    grid = [[0, 1], [0, 0]]
    assert evaluate_delegated(decompose_quadratic(grid, Q101), (2, 5), pi_s(), rng) == 10
    eye = [[int(i == j) for j in range(7)] for i in range(7)]
    assert decompose_quadratic(eye, Q101).evaluate_local((1,) * 7) == 7
    grid = [rng.elements(6, 101) for _ in range(6)]
    pt = tuple(rng.elements(6, 101))
    assert evaluate_delegated(decompose_quadratic(grid, Q101), pt, pi_w(), rng) == quadratic_oracle(grid, pt, 101)
    with pytest.raises(ValueError):
        decompose_quadratic(grid, Q101).build_x((1, 2))


def test_multivariate_single_monomial(rng):
    tensor = [[[0, 0], [0, 0]], [[0, 0], [0, 0]]]
    tensor[0][1][0] = 1  # x1^1 x2^2 x3^1
    dec = decompose_bounded_multivariate(tensor, Q101)
    assert dec.F.shape == (2, 4)
    assert evaluate_delegated(dec, (2, 3, 4), pi_s(), rng) == 72


def test_multivariate_two_vars_matches_bivariate_layout(rng):
    grid = [rng.elements(3, 101) for _ in range(3)]
    multi = decompose_bounded_multivariate(grid, Q101, include_constant=True)
    biv = decompose_bivariate(grid, Q101)
    # rows follow x1 here and y in the bivariate layout, so the grids are transposes
    assert multi.F.rows == tuple(zip(*biv.F.rows))
    for x, y in product(range(0, 101, 17), repeat=2):
        assert multi.evaluate_local((x, y)) == biv.evaluate_local((x, y))


def test_multivariate_random_m4(rng):
    tensor = random_tensor(rng, 4, 2, 101)
    pt = tuple(rng.elements(4, 101))
    dec = decompose_bounded_multivariate(tensor, Q101)
    assert dec.F.shape == (4, 4)
    assert evaluate_delegated(dec, pt, pi_s(), rng) == multivariate_oracle(tensor, pt, 101)


def test_multivariate_index_map_is_bijective(rng):
    side, nvars = 2, 3
    seen = set()
    for idx in product(range(side), repeat=nvars):
        tensor = [[[0] * side for _ in range(side)] for _ in range(side)]
        tensor[idx[0]][idx[1]][idx[2]] = 1
        dec = decompose_bounded_multivariate(tensor, Q101)
        nonzero = [i for i, v in enumerate(dec.F.entries) if v]
        assert len(nonzero) == 1
        seen.add(nonzero[0])
        # mixed radix, last variable fastest
        assert nonzero[0] == idx[0] * side * side + idx[1] * side + idx[2]
    assert seen == set(range(side**nvars))


def test_multivariate_limits():
    with pytest.raises(ValueError):
        decompose_bounded_multivariate([1, 2], Q101)
    with pytest.raises(ValueError):
        decompose_bounded_multivariate([[1, 2], [3]], Q101)
    with pytest.raises(ValueError):
        decompose_bounded_multivariate([[1] * 4] * 4, Q101, max_size=15)
    with pytest.raises(ValueError):
        decompose_bounded_multivariate([[1]], Q101).build_x((1, 2, 3))


def test_exhaustive_q3():
    q3 = FieldModulus(3)
    for coeffs in product(range(3), repeat=3):
        dec = decompose_univariate(list(coeffs), q3)
        assert all(dec.evaluate_local(x) == horner(coeffs, x, 3) for x in range(3))
    for flat in product(range(3), repeat=4):
        grid = [list(flat[:2]), list(flat[2:])]
        biv, quad = decompose_bivariate(grid, q3), decompose_quadratic(grid, q3)
        multi = decompose_bounded_multivariate(grid, q3)
        for pt in iter_points(2, 3):
            assert biv.evaluate_local(pt) == bivariate_oracle(grid, *pt, 3)
            assert quad.evaluate_local(pt) == quadratic_oracle(grid, pt, 3)
            assert multi.evaluate_local(pt) == multivariate_oracle(grid, pt, 3)


def test_delegated_exhaustive_small_q3():
    q3 = FieldModulus(3)
    rng = FieldRandom(9)
    grid = [[1, 2], [0, 1]]
    poly = DelegatedPolynomial(decompose_quadratic(grid, q3), pi_s(), rng)
    for pt in iter_points(2, 3):
        assert poly.evaluate(pt, rng) == quadratic_oracle(grid, pt, 3)


def test_tampered_server_rejected(rng):
    dec = decompose_univariate(rng.elements(16, 101), Q101)
    poly = DelegatedPolynomial(dec, pi_s(), rng, tamper={2: random_offset(rng)})
    rejected = 0
    for x in range(200):
        try:
            poly.evaluate(x % 101, rng)
        except VerificationFailed:
            rejected += 1
    assert rejected / 200 >= 1 - 1 / 101


def test_second_stage_cheaper_than_first(rng):
    dec = decompose_univariate(rng.elements(400, 101), Q101)
    m = dec.F.m
    with count_ops() as c:
        dot(dec.build_y(5), dec.build_x(5))
    assert c.mul == m == 20
    assert c.mul < 9 * m * m
