"""Covering schemes: which shares each server holds and which products it returns.

A scheme over ``[a] x [b]`` assigns server ``l`` the function shares
``A_sets[l-1]`` and input shares ``B_sets[l-1]``; the rectangles
``A_l x B_l`` must cover the grid, no server may hold every share of either
secret, and ``C_sets`` partitions the grid so every product ``F_u x_v`` is
returned by exactly one server. All indices are 1-based.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from itertools import product
from typing import Iterable

__all__ = [
    "CoveringScheme",
    "SchemeSlice",
    "Validation",
    "CoveringError",
    "validate",
    "pi_s",
    "pi_w",
    "derive_partition",
    "find_covering",
    "search_min_k",
    "search_min_ab",
    "DEFAULT_SEARCH_BOUND",
]

DEFAULT_SEARCH_BOUND = 4
MAX_K = 5

Pair = tuple[int, int]


class CoveringError(ValueError):
    pass


@dataclass(frozen=True)
class CoveringScheme:
    k: int
    a: int
    b: int
    A_sets: tuple[frozenset[int], ...]
    B_sets: tuple[frozenset[int], ...]
    C_sets: tuple[frozenset[Pair], ...]

    @classmethod
    def build(cls, k, a, b, A_sets, B_sets, C_sets) -> CoveringScheme:
        return cls(
            k, a, b,
            tuple(frozenset(s) for s in A_sets),
            tuple(frozenset(s) for s in B_sets),
            tuple(frozenset(tuple(p) for p in s) for s in C_sets),
        )

    def servers(self) -> range:
        return range(1, self.k + 1)

    def cells(self, server: int) -> list[Pair]:
        """``C_l`` in lexicographic order."""
        return sorted(self.C_sets[server - 1])

    def slice(self, server: int) -> SchemeSlice:
        return SchemeSlice(
            server,
            self.A_sets[server - 1],
            self.B_sets[server - 1],
            self.C_sets[server - 1],
        )

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "a": self.a,
            "b": self.b,
            "A": [sorted(s) for s in self.A_sets],
            "B": [sorted(s) for s in self.B_sets],
            "C": [[list(p) for p in sorted(s)] for s in self.C_sets],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> CoveringScheme:
        try:
            return cls.build(obj["k"], obj["a"], obj["b"], obj["A"], obj["B"], obj["C"])
        except (KeyError, TypeError) as e:
            raise CoveringError(f"malformed scheme description: {e}") from e

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> CoveringScheme:
        return cls.from_dict(json.loads(text))

    def digest(self) -> bytes:
        return hashlib.sha256(self.to_json().encode()).digest()


@dataclass(frozen=True)
class SchemeSlice:
    """The part of a scheme a single server is told about."""

    server: int
    A: frozenset[int]
    B: frozenset[int]
    C: frozenset[Pair]

    def cells(self, server: int | None = None) -> list[Pair]:
        return sorted(self.C)


@dataclass(frozen=True)
class Validation:
    ok: bool
    violated: str | None = None
    detail: str = ""

    def __bool__(self):
        return self.ok


OK = Validation(True)


def validate(scheme: CoveringScheme) -> Validation:
    """Check a scheme; report the first violated condition.

    Conditions are checked in the order ``structure``, ``cover``,
    ``function_privacy``, ``input_privacy``, ``partition``.
    """
    k, a, b = scheme.k, scheme.a, scheme.b
    if min(k, a, b) < 2:
        return Validation(False, "structure", f"k, a, b must all be >= 2 (got {k}, {a}, {b})")
    if not (len(scheme.A_sets) == len(scheme.B_sets) == len(scheme.C_sets) == k):
        return Validation(False, "structure", "need exactly k sets of each kind")
    full_a, full_b = frozenset(range(1, a + 1)), frozenset(range(1, b + 1))
    for l, (A, B) in enumerate(zip(scheme.A_sets, scheme.B_sets), 1):
        if not A or not B:
            return Validation(False, "structure", f"server {l} has an empty share set")
        if not A <= full_a or not B <= full_b:
            return Validation(False, "structure", f"server {l} references an index outside [a] or [b]")

    grid = set(product(range(1, a + 1), range(1, b + 1)))
    covered = set()
    for A, B in zip(scheme.A_sets, scheme.B_sets):
        covered.update(product(A, B))
    missing = grid - covered
    if missing:
        return Validation(False, "cover", f"pairs not covered by any server: {sorted(missing)}")

    for l, A in enumerate(scheme.A_sets, 1):
        if A == full_a:
            return Validation(False, "function_privacy", f"server {l} holds every function share")
    for l, B in enumerate(scheme.B_sets, 1):
        if B == full_b:
            return Validation(False, "input_privacy", f"server {l} holds every input share")

    seen: dict[Pair, int] = {}
    for l, (A, B, C) in enumerate(zip(scheme.A_sets, scheme.B_sets, scheme.C_sets), 1):
        for u, v in C:
            if u not in A or v not in B:
                return Validation(False, "partition", f"server {l} is assigned ({u},{v}) outside A_l x B_l")
            if (u, v) in seen:
                return Validation(False, "partition", f"({u},{v}) assigned to servers {seen[(u, v)]} and {l}")
            seen[(u, v)] = l
    unassigned = grid - set(seen)
    if unassigned:
        return Validation(False, "partition", f"pairs assigned to no server: {sorted(unassigned)}")
    return OK


def derive_partition(A_sets, B_sets, a: int | None = None, b: int | None = None) -> tuple[frozenset[Pair], ...]:
    """Give each pair ``(u, v)`` to the lowest-indexed server that can compute it."""
    A_sets = [frozenset(s) for s in A_sets]
    B_sets = [frozenset(s) for s in B_sets]
    a = a or max(max(s) for s in A_sets)
    b = b or max(max(s) for s in B_sets)
    C: list[set[Pair]] = [set() for _ in A_sets]
    for u, v in product(range(1, a + 1), range(1, b + 1)):
        for l, (A, B) in enumerate(zip(A_sets, B_sets)):
            if u in A and v in B:
                C[l].add((u, v))
                break
        else:
            raise CoveringError(f"pair ({u},{v}) is not covered by any server")
    return tuple(frozenset(s) for s in C)


def _scheme(k, a, b, A_sets, B_sets) -> CoveringScheme:
    return CoveringScheme.build(k, a, b, A_sets, B_sets, derive_partition(A_sets, B_sets, a, b))


def pi_s() -> CoveringScheme:
    """Three servers over ``[3] x [3]``: the fewest servers possible."""
    return CoveringScheme.build(
        3, 3, 3,
        [{1, 2}, {1, 3}, {2, 3}],
        [{1, 2}, {1, 3}, {2, 3}],
        [
            {(1, 1), (1, 2), (2, 1), (2, 2)},
            {(1, 3), (3, 1), (3, 3)},
            {(2, 3), (3, 2)},
        ],
    )


def pi_w() -> CoveringScheme:
    """Four servers over ``[2] x [2]``: the least total work."""
    cells = [(1, 1), (1, 2), (2, 1), (2, 2)]
    return CoveringScheme.build(
        4, 2, 2,
        [{u} for u, _ in cells],
        [{v} for _, v in cells],
        [{c} for c in cells],
    )


def _proper_subsets(n: int) -> list[int]:
    return list(range(1, (1 << n) - 1))


def _rect_mask(amask: int, bmask: int, b: int) -> int:
    mask = 0
    for u in range(amask.bit_length()):
        if amask >> u & 1:
            mask |= bmask << (u * b)
    return mask


def _search(k: int, a: int, b: int) -> list[tuple[int, int]] | None:
    """Depth-first search for at most ``k`` rectangles covering the grid.

    Every covering must contain a rectangle through the lowest uncovered
    cell, so branching on that cell alone is exhaustive.
    """
    full = (1 << (a * b)) - 1
    rects = [
        (am, bm, _rect_mask(am, bm, b))
        for am in _proper_subsets(a)
        for bm in _proper_subsets(b)
    ]

    def go(covered: int, chosen: list, depth: int):
        if covered == full:
            return list(chosen)
        if depth == 0:
            return None
        lowest = (~covered & full) & -(~covered & full)
        for am, bm, mask in rects:
            if mask & lowest:
                chosen.append((am, bm))
                found = go(covered | mask, chosen, depth - 1)
                if found is not None:
                    return found
                chosen.pop()
        return None

    return go(0, [], k)


def _bits(mask: int) -> set[int]:
    return {i + 1 for i in range(mask.bit_length()) if mask >> i & 1}


def find_covering(k: int, a: int, b: int) -> CoveringScheme | None:
    """Return a valid ``k``-server scheme over ``[a] x [b]``, or ``None``.

    Coverings using fewer than ``k`` rectangles are padded by repeating the
    last one; the repeat is assigned no products.
    """
    if min(k, a, b) < 2:
        raise CoveringError("k, a, b must all be >= 2")
    found = _search(k, a, b)
    if found is None:
        return None
    while len(found) < k:
        found.append(found[-1])
    A_sets = [_bits(am) for am, _ in found]
    B_sets = [_bits(bm) for _, bm in found]
    return _scheme(k, a, b, A_sets, B_sets)


def search_min_k(a: int, b: int, bound: int = DEFAULT_SEARCH_BOUND) -> int:
    """Smallest ``k >= 2`` for which ``[a] x [b]`` has a ``k``-covering."""
    if not (2 <= a <= bound and 2 <= b <= bound):
        raise CoveringError(f"a and b must lie in [2, {bound}] (got a={a}, b={b})")
    for k in range(2, MAX_K + 1):
        if _search(k, a, b) is not None:
            return k
    raise CoveringError(f"no covering with k <= {MAX_K}")


def search_min_ab(k: int, bound: int = DEFAULT_SEARCH_BOUND) -> int | None:
    """Least ``a * b`` over ``a, b in [2, bound]`` admitting a ``k``-covering.

    Returns ``None`` when no grid in the box has one.
    """
    if not 2 <= k <= MAX_K:
        raise CoveringError(f"k must lie in [2, {MAX_K}]")
    grids = sorted(product(range(2, bound + 1), repeat=2), key=lambda ab: (ab[0] * ab[1], ab))
    for a, b in grids:
        if _search(k, a, b) is not None:
            return a * b
    return None


def iter_builtin() -> Iterable[tuple[str, CoveringScheme]]:
    yield "pi_s", pi_s()
    yield "pi_w", pi_w()
