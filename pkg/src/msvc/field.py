"""Prime-field arithmetic over Z_q with vector and matrix kernels.

Values are plain Python integers held in canonical form ``0 <= v < q``.
Vector and matrix kernels accumulate exact integer sums and reduce once per
output entry, which keeps the 256-bit path fast without a limb
representation.

Multiplication counts are recorded through :func:`count_ops` so callers can
check the cost of each protocol phase exactly.
"""

from __future__ import annotations

import operator
import os
import random
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import sympy

__all__ = [
    "DEFAULT_PRIME",
    "FieldError",
    "FieldModulus",
    "FieldElement",
    "FieldVector",
    "FieldMatrix",
    "FieldRandom",
    "OpCounter",
    "count_ops",
    "fe_add",
    "fe_mul",
    "dot",
    "mat_vec_mul",
    "vec_mat_mul",
    "vec_add",
    "vec_sub",
    "mat_add",
    "mat_sub",
    "random_vector",
    "random_matrix",
    "encode_element",
    "decode_element",
    "ELEMENT_BYTES",
]

DEFAULT_PRIME = 82434016654300709346097073375351854135999471015108634126889281238621513052057

ELEMENT_BYTES = 32


class FieldError(ValueError):
    """Raised on modulus or dimension mismatches and invalid field values."""


@lru_cache(maxsize=64)
def _is_prime(q: int) -> bool:
    return bool(sympy.isprime(q))


@dataclass(frozen=True)
class FieldModulus:
    q: int

    def __post_init__(self):
        if not isinstance(self.q, int) or isinstance(self.q, bool):
            raise FieldError(f"modulus must be an int, got {type(self.q).__name__}")
        if not 2 <= self.q < 1 << 256:
            raise FieldError(f"modulus out of range [2, 2^256): {self.q}")
        if not _is_prime(self.q):
            raise FieldError(f"modulus is not prime: {self.q}")

    @property
    def bits(self) -> int:
        return self.q.bit_length()

    def __call__(self, value: int) -> FieldElement:
        return FieldElement(value % self.q, self)

    def __repr__(self):
        return f"FieldModulus({self.q})"


DEFAULT_MODULUS = FieldModulus(DEFAULT_PRIME)


@dataclass(frozen=True)
class FieldElement:
    value: int
    modulus: FieldModulus

    def __post_init__(self):
        if not 0 <= self.value < self.modulus.q:
            raise FieldError(f"non-canonical element {self.value} for q={self.modulus.q}")

    def __add__(self, other: FieldElement) -> FieldElement:
        return fe_add(self, other)

    def __mul__(self, other: FieldElement) -> FieldElement:
        return fe_mul(self, other)

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"FieldElement({self.value} mod {self.modulus.q})"


class OpCounter:
    """Tally of modular multiplications performed while the counter is active."""

    def __init__(self):
        self.mul = 0

    def __repr__(self):
        return f"OpCounter(mul={self.mul})"


_active_counters: list[OpCounter] = []
_counter_lock = threading.Lock()


def _tally(n: int) -> None:
    if _active_counters:
        with _counter_lock:
            for c in _active_counters:
                c.mul += n


@contextmanager
def count_ops() -> Iterator[OpCounter]:
    """Count modular multiplications inside the ``with`` block.

    Counters nest; every active counter sees every multiplication.
    """
    counter = OpCounter()
    with _counter_lock:
        _active_counters.append(counter)
    try:
        yield counter
    finally:
        with _counter_lock:
            _active_counters.remove(counter)


def _check_same(a: FieldModulus, b: FieldModulus) -> None:
    if a is not b and a.q != b.q:
        raise FieldError(f"modulus mismatch: {a.q} != {b.q}")


def fe_add(a: FieldElement, b: FieldElement) -> FieldElement:
    _check_same(a.modulus, b.modulus)
    return FieldElement((a.value + b.value) % a.modulus.q, a.modulus)


def fe_mul(a: FieldElement, b: FieldElement) -> FieldElement:
    _check_same(a.modulus, b.modulus)
    _tally(1)
    return FieldElement(a.value * b.value % a.modulus.q, a.modulus)


@dataclass(frozen=True, eq=True)
class FieldVector:
    """Vector over Z_q; ``values`` holds canonical ints."""

    values: tuple[int, ...]
    modulus: FieldModulus

    def __post_init__(self):
        if not isinstance(self.values, tuple):
            object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise FieldError("vector dimension must be positive")
        if min(self.values) < 0 or max(self.values) >= self.modulus.q:
            raise FieldError("vector entries must be canonical (in [0, q))")

    @classmethod
    def from_ints(cls, values: Iterable[int], modulus: FieldModulus) -> FieldVector:
        q = modulus.q
        return cls(tuple(v % q for v in values), modulus)

    @classmethod
    def zeros(cls, dim: int, modulus: FieldModulus) -> FieldVector:
        return _vector((0,) * dim, modulus)

    @property
    def dim(self) -> int:
        return len(self.values)

    @property
    def entries(self) -> tuple[FieldElement, ...]:
        return tuple(FieldElement(v, self.modulus) for v in self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def __iter__(self):
        return iter(self.values)


@dataclass(frozen=True, eq=True)
class FieldMatrix:
    """Dense m x d matrix over Z_q stored as a tuple of row tuples."""

    rows: tuple[tuple[int, ...], ...]
    modulus: FieldModulus

    def __post_init__(self):
        rows = self.rows
        if not isinstance(rows, tuple) or any(not isinstance(r, tuple) for r in rows):
            rows = tuple(tuple(r) for r in rows)
            object.__setattr__(self, "rows", rows)
        if not rows or not rows[0]:
            raise FieldError("matrix dimensions must be positive")
        width = len(rows[0])
        q = self.modulus.q
        for r in rows:
            if len(r) != width:
                raise FieldError("ragged matrix rows")
            if min(r) < 0 or max(r) >= q:
                raise FieldError("matrix entries must be canonical (in [0, q))")

    @classmethod
    def from_ints(cls, rows: Iterable[Iterable[int]], modulus: FieldModulus) -> FieldMatrix:
        q = modulus.q
        return cls(tuple(tuple(v % q for v in r) for r in rows), modulus)

    @classmethod
    def from_entries(cls, m: int, d: int, entries: Sequence[int], modulus: FieldModulus) -> FieldMatrix:
        if len(entries) != m * d:
            raise FieldError(f"expected {m * d} entries, got {len(entries)}")
        return cls(tuple(tuple(entries[i * d:(i + 1) * d]) for i in range(m)), modulus)

    @classmethod
    def zeros(cls, m: int, d: int, modulus: FieldModulus) -> FieldMatrix:
        row = (0,) * d
        return _matrix((row,) * m, modulus)

    @classmethod
    def identity(cls, n: int, modulus: FieldModulus) -> FieldMatrix:
        return _matrix(tuple(tuple(int(i == j) for j in range(n)) for i in range(n)), modulus)

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def d(self) -> int:
        return len(self.rows[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.m, self.d

    @property
    def entries(self) -> tuple[int, ...]:
        """Row-major flattening."""
        return tuple(v for r in self.rows for v in r)

    def column(self, j: int) -> tuple[int, ...]:
        return tuple(r[j] for r in self.rows)


def _vector(values: tuple[int, ...], modulus: FieldModulus) -> FieldVector:
    # Kernel outputs are canonical by construction; skip the range scan.
    v = object.__new__(FieldVector)
    object.__setattr__(v, "values", values)
    object.__setattr__(v, "modulus", modulus)
    return v


def _matrix(rows: tuple[tuple[int, ...], ...], modulus: FieldModulus) -> FieldMatrix:
    mat = object.__new__(FieldMatrix)
    object.__setattr__(mat, "rows", rows)
    object.__setattr__(mat, "modulus", modulus)
    return mat


def dot(u: FieldVector, v: FieldVector) -> int:
    """Inner product of two vectors, returned as a canonical int."""
    _check_same(u.modulus, v.modulus)
    if u.dim != v.dim:
        raise FieldError(f"dimension mismatch: {u.dim} != {v.dim}")
    _tally(u.dim)
    return sum(map(operator.mul, u.values, v.values)) % u.modulus.q


def mat_vec_mul(F: FieldMatrix, x: FieldVector) -> FieldVector:
    _check_same(F.modulus, x.modulus)
    if F.d != x.dim:
        raise FieldError(f"dimension mismatch: matrix has {F.d} columns, vector has {x.dim}")
    q = F.modulus.q
    xs = x.values
    mul = operator.mul
    out = tuple(sum(map(mul, row, xs)) % q for row in F.rows)
    _tally(F.m * F.d)
    return _vector(out, F.modulus)


def vec_mat_mul(r: FieldVector, F: FieldMatrix) -> FieldVector:
    _check_same(F.modulus, r.modulus)
    if r.dim != F.m:
        raise FieldError(f"dimension mismatch: vector has {r.dim} entries, matrix has {F.m} rows")
    q = F.modulus.q
    acc = [0] * F.d
    mul, add = operator.mul, operator.add
    for coeff, row in zip(r.values, F.rows):
        if coeff:
            acc = list(map(add, acc, map(mul, row, [coeff] * len(row))))
    _tally(F.m * F.d)
    return _vector(tuple(a % q for a in acc), F.modulus)


def vec_add(u: FieldVector, v: FieldVector) -> FieldVector:
    _check_same(u.modulus, v.modulus)
    if u.dim != v.dim:
        raise FieldError(f"dimension mismatch: {u.dim} != {v.dim}")
    q = u.modulus.q
    return _vector(tuple((a + b) % q for a, b in zip(u.values, v.values)), u.modulus)


def vec_sub(u: FieldVector, v: FieldVector) -> FieldVector:
    _check_same(u.modulus, v.modulus)
    if u.dim != v.dim:
        raise FieldError(f"dimension mismatch: {u.dim} != {v.dim}")
    q = u.modulus.q
    return _vector(tuple((a - b) % q for a, b in zip(u.values, v.values)), u.modulus)


def mat_add(A: FieldMatrix, B: FieldMatrix) -> FieldMatrix:
    _check_same(A.modulus, B.modulus)
    if A.shape != B.shape:
        raise FieldError(f"shape mismatch: {A.shape} != {B.shape}")
    q = A.modulus.q
    return _matrix(
        tuple(tuple((a + b) % q for a, b in zip(ra, rb)) for ra, rb in zip(A.rows, B.rows)),
        A.modulus,
    )


def mat_sub(A: FieldMatrix, B: FieldMatrix) -> FieldMatrix:
    _check_same(A.modulus, B.modulus)
    if A.shape != B.shape:
        raise FieldError(f"shape mismatch: {A.shape} != {B.shape}")
    q = A.modulus.q
    return _matrix(
        tuple(tuple((a - b) % q for a, b in zip(ra, rb)) for ra, rb in zip(A.rows, B.rows)),
        A.modulus,
    )


class FieldRandom:
    """Source of uniform field elements.

    With ``seed=None`` draws come from the operating system CSPRNG; with a
    seed they come from a reproducible ``random.Random``. Uniformity is by
    rejection sampling on ``q.bit_length()``-bit candidates.

    Not safe to share between threads; give each thread its own instance.
    """

    def __init__(self, seed: int | None = None):
        self.seed = seed
        self._prng = None if seed is None else random.Random(seed)

    def _candidates(self, count: int, bits: int) -> list[int]:
        if self._prng is not None:
            getrandbits = self._prng.getrandbits
            return [getrandbits(bits) for _ in range(count)]
        width = (bits + 7) // 8
        mask = (1 << bits) - 1
        buf = os.urandom(width * count)
        frm = int.from_bytes
        return [frm(buf[i:i + width], "big") & mask for i in range(0, width * count, width)]

    def elements(self, count: int, q: int) -> list[int]:
        """Return ``count`` independent uniform draws from ``[0, q)``."""
        bits = q.bit_length()
        out: list[int] = []
        need = count
        while need > 0:
            # Acceptance rate is above 1/2, so oversample a little.
            batch = self._candidates(need + need // 2 + 8, bits)
            out.extend(v for v in batch if v < q)
            need = count - len(out)
        del out[count:]
        return out

    def nonzero_element(self, q: int) -> int:
        while True:
            v = self.elements(1, q)[0]
            if v:
                return v

    def spawn(self) -> FieldRandom:
        """Independent generator for use on another thread."""
        if self._prng is None:
            return FieldRandom()
        return FieldRandom(self._prng.getrandbits(64))


def default_rng() -> FieldRandom:
    return FieldRandom()


def random_vector(dim: int, modulus: FieldModulus, rng: FieldRandom) -> FieldVector:
    if dim < 1:
        raise FieldError("dimension must be positive")
    return _vector(tuple(rng.elements(dim, modulus.q)), modulus)


def random_matrix(m: int, d: int, modulus: FieldModulus, rng: FieldRandom) -> FieldMatrix:
    if m < 1 or d < 1:
        raise FieldError("dimensions must be positive")
    flat = rng.elements(m * d, modulus.q)
    return _matrix(tuple(tuple(flat[i * d:(i + 1) * d]) for i in range(m)), modulus)


def encode_element(value: int) -> bytes:
    """32-byte big-endian canonical encoding."""
    return value.to_bytes(ELEMENT_BYTES, "big")


def decode_element(data: bytes, modulus: FieldModulus) -> int:
    if len(data) != ELEMENT_BYTES:
        raise FieldError(f"element encoding must be {ELEMENT_BYTES} bytes")
    v = int.from_bytes(data, "big")
    if v >= modulus.q:
        raise FieldError(f"non-canonical element {v} >= q")
    return v
