"""Additive secret sharing of field vectors and matrices."""

from __future__ import annotations

from functools import reduce
from operator import sub
from typing import Sequence, TypeVar

from .field import (
    FieldError,
    FieldMatrix,
    FieldRandom,
    FieldVector,
    _matrix,
    _vector,
    mat_add,
    vec_add,
)

__all__ = ["share_matrix", "share_vector", "reconstruct_sum"]

T = TypeVar("T", FieldMatrix, FieldVector)


def share_matrix(F: FieldMatrix, a: int, rng: FieldRandom) -> tuple[FieldMatrix, ...]:
    """Split ``F`` into ``a`` matrices that sum to ``F``.

    The first ``a - 1`` shares are uniform and independent; the last one
    absorbs the secret. Share ``u`` (1-based) is ``result[u - 1]``.
    """
    if a < 2:
        raise ValueError(f"need at least 2 shares, got {a}")
    d = F.d
    q = F.modulus.q
    share_rows: list[list[tuple[int, ...]]] = [[] for _ in range(a)]
    # Row at a time so only F and the finished shares are ever resident.
    for frow in F.rows:
        flat = rng.elements((a - 1) * d, q)
        residue = frow
        for u in range(a - 1):
            row = tuple(flat[u * d:(u + 1) * d])
            share_rows[u].append(row)
            residue = map(sub, residue, row)
        share_rows[-1].append(tuple(v % q for v in residue))
    shares = [_matrix(tuple(rows), F.modulus) for rows in share_rows]
    return tuple(shares)


def share_vector(x: FieldVector, b: int, rng: FieldRandom) -> tuple[FieldVector, ...]:
    """Split ``x`` into ``b`` vectors that sum to ``x``; same construction as :func:`share_matrix`."""
    if b < 2:
        raise ValueError(f"need at least 2 shares, got {b}")
    q = x.modulus.q
    residue = list(x.values)
    shares = []
    for _ in range(b - 1):
        vals = tuple(rng.elements(x.dim, q))
        residue = list(map(sub, residue, vals))
        shares.append(_vector(vals, x.modulus))
    shares.append(_vector(tuple(v % q for v in residue), x.modulus))
    return tuple(shares)


def reconstruct_sum(shares: Sequence[T]) -> T:
    if not shares:
        raise ValueError("no shares to reconstruct")
    kinds = {type(s) for s in shares}
    if len(kinds) != 1:
        raise FieldError("cannot mix matrix and vector shares")
    if isinstance(shares[0], FieldMatrix):
        return reduce(mat_add, shares)
    return reduce(vec_add, shares)
