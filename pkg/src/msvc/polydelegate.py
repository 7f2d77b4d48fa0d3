"""Polynomial evaluation as a delegated matrix-vector product plus a local inner product.

Each decomposition turns ``f`` into a matrix ``F`` and two point-dependent
vectors so that ``f(pt) = y(pt) . (F x(pt))``. The heavy product ``F x`` goes
to the servers; the client finishes with one short inner product.

Index conventions (all coefficient arrays are dense, nested lists):

* univariate: ``coeffs[i]`` multiplies ``x**i``.
* bivariate: ``coeffs[i][j]`` multiplies ``x**i * y**j``; the point is ``(x, y)``.
* quadratic: ``coeffs[i][j]`` multiplies ``x_{i+1} * x_{j+1}``.
* bounded multivariate: ``coeffs[i_1-1]...[i_m-1]`` multiplies
  ``x_1**i_1 ... x_m**i_m`` with exponents in ``1..d`` (``0..d`` with
  ``include_constant=True``). Monomials map to matrix indices in mixed-radix
  lexicographic order, last variable fastest.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import isqrt
from typing import Callable, Sequence

from .covering import CoveringScheme
from .field import FieldMatrix, FieldModulus, FieldRandom, FieldVector, dot, mat_vec_mul
from .protocol import FunctionKeyMaterial, LocalServers, delegate, key_gen

__all__ = [
    "TwoStageDecomposition",
    "decompose_univariate",
    "decompose_bivariate",
    "decompose_quadratic",
    "decompose_bounded_multivariate",
    "evaluate_delegated",
    "DelegatedPolynomial",
    "MAX_TENSOR_SIZE",
]

MAX_TENSOR_SIZE = 10**6


def _powers(x: int, n: int, q: int, start: int = 0) -> tuple[int, ...]:
    """``(x**start, ..., x**(start+n-1)) mod q``."""
    out = []
    p = pow(x, start, q)
    for _ in range(n):
        out.append(p)
        p = p * x % q
    return tuple(out)


@dataclass(frozen=True)
class TwoStageDecomposition:
    F: FieldMatrix
    build_x: Callable[[object], FieldVector]
    build_y: Callable[[object], FieldVector]
    family: str

    @property
    def modulus(self) -> FieldModulus:
        return self.F.modulus

    def evaluate_local(self, point) -> int:
        """Evaluate without delegation; handy as a cross-check."""
        return dot(self.build_y(point), mat_vec_mul(self.F, self.build_x(point)))


def decompose_univariate(coeffs: Sequence[int], modulus: FieldModulus) -> TwoStageDecomposition:
    if not coeffs:
        raise ValueError("need at least one coefficient")
    q = modulus.q
    deg = len(coeffs) - 1
    m = isqrt(deg)
    if m * m < deg + 1:
        m += 1
    padded = [c % q for c in coeffs] + [0] * (m * m - len(coeffs))
    F = FieldMatrix(tuple(tuple(padded[i * m:(i + 1) * m]) for i in range(m)), modulus)

    def build_x(x):
        return FieldVector(_powers(x % q, m, q), modulus)

    def build_y(x):
        return FieldVector(_powers(pow(x, m, q), m, q), modulus)

    return TwoStageDecomposition(F, build_x, build_y, "univariate")


def _square(coeffs, name: str) -> list[list[int]]:
    rows = [list(r) for r in coeffs]
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise ValueError(f"{name} coefficients must form a nonempty square grid")
    return rows


def decompose_bivariate(coeffs: Sequence[Sequence[int]], modulus: FieldModulus) -> TwoStageDecomposition:
    """``coeffs[i][j]`` is the coefficient of ``x**i * y**j``.

    Row ``j`` of ``F`` collects the coefficients of ``y**j`` so that the
    left vector carries powers of ``y`` and the right vector powers of ``x``.
    """
    grid = _square(coeffs, "bivariate")
    n = len(grid)
    q = modulus.q
    F = FieldMatrix(tuple(tuple(grid[i][j] % q for i in range(n)) for j in range(n)), modulus)

    def build_x(pt):
        return FieldVector(_powers(pt[0] % q, n, q), modulus)

    def build_y(pt):
        return FieldVector(_powers(pt[1] % q, n, q), modulus)

    return TwoStageDecomposition(F, build_x, build_y, "bivariate")


def decompose_quadratic(coeffs: Sequence[Sequence[int]], modulus: FieldModulus) -> TwoStageDecomposition:
    grid = _square(coeffs, "quadratic")
    q = modulus.q
    F = FieldMatrix(tuple(tuple(c % q for c in row) for row in grid), modulus)
    n = len(grid)

    def build_x(pt):
        if len(pt) != n:
            raise ValueError(f"expected {n} variables, got {len(pt)}")
        return FieldVector(tuple(v % q for v in pt), modulus)

    return TwoStageDecomposition(F, build_x, build_x, "quadratic")


def _monomials(point: Sequence[int], exponents: range, q: int) -> tuple[int, ...]:
    """Products ``x_1**e_1 ... x_k**e_k`` in lexicographic exponent order, last variable fastest."""
    tables = [_powers(v % q, len(exponents), q, exponents.start) for v in point]
    out = [1]
    for table in tables:
        out = [acc * p % q for acc in out for p in table]
    return tuple(out)


def _flatten(nested) -> tuple[tuple[int, ...], list[int]]:
    """Shape and row-major entries of a rectangular nested list."""
    if isinstance(nested, int):
        return (), [nested]
    parts = [_flatten(item) for item in nested]
    if not parts:
        return (0,), []
    shape = parts[0][0]
    if any(p[0] != shape for p in parts):
        raise ValueError("ragged coefficient tensor")
    return (len(parts),) + shape, [v for _, vals in parts for v in vals]


def decompose_bounded_multivariate(
    coeffs,
    modulus: FieldModulus,
    *,
    include_constant: bool = False,
    max_size: int = MAX_TENSOR_SIZE,
) -> TwoStageDecomposition:
    """Split an ``m``-variable polynomial with per-variable degree at most ``d``.

    ``coeffs`` is an ``m``-dimensional array of side ``d`` (``d + 1`` with
    ``include_constant``). The first ``m // 2`` variables index rows, the
    rest index columns.
    """
    shape, flat = _flatten(coeffs)
    nvars = len(shape)
    if nvars < 2:
        raise ValueError("need at least two variables")
    side = shape[0]
    if any(s != side for s in shape) or side == 0:
        raise ValueError("coefficient tensor must have equal nonzero extent per variable")
    if side**nvars > max_size:
        raise ValueError(f"coefficient tensor has {side**nvars} entries, limit is {max_size}")
    exponents = range(0, side) if include_constant else range(1, side + 1)
    split = nvars // 2
    q = modulus.q
    flat = [c % q for c in flat]
    rows, cols = side**split, side ** (nvars - split)
    F = FieldMatrix(tuple(tuple(flat[r * cols:(r + 1) * cols]) for r in range(rows)), modulus)

    def _check(pt):
        if len(pt) != nvars:
            raise ValueError(f"expected {nvars} variables, got {len(pt)}")

    def build_x(pt):
        _check(pt)
        return FieldVector(_monomials(pt[split:], exponents, q), modulus)

    def build_y(pt):
        _check(pt)
        return FieldVector(_monomials(pt[:split], exponents, q), modulus)

    return TwoStageDecomposition(F, build_x, build_y, "bounded-multivariate")


class DelegatedPolynomial:
    """A decomposition whose function keys were generated once and are reused per point."""

    def __init__(
        self,
        decomp: TwoStageDecomposition,
        scheme: CoveringScheme,
        rng: FieldRandom,
        tamper=None,
    ):
        self.decomp = decomp
        self.scheme = scheme
        self.keys: FunctionKeyMaterial = key_gen(decomp.F, scheme, rng)
        self.servers = LocalServers(self.keys.rho, scheme, tamper)

    def evaluate(self, point, rng: FieldRandom) -> int:
        """Raises :class:`~msvc.protocol.VerificationFailed` if a server cheated."""
        u = delegate(self.keys, self.decomp.build_x(point), self.scheme, self.servers, rng)
        return dot(self.decomp.build_y(point), u)


def evaluate_delegated(
    decomp: TwoStageDecomposition,
    point,
    scheme: CoveringScheme,
    rng: FieldRandom,
) -> int:
    return DelegatedPolynomial(decomp, scheme, rng).evaluate(point, rng)


def iter_points(nvars: int, q: int):
    """Every point of ``Z_q^nvars``; used for exhaustive checks at tiny ``q``."""
    return product(range(q), repeat=nvars)
