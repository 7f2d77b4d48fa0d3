"""Verifiable outsourced PIR on top of the delegation protocol.

The ``N`` database entries fill a ``d x d`` matrix row-major (``d = ceil(sqrt(N))``,
zero-padded). Entry ``i`` (1-based) sits at row ``r``, column ``c`` with
``i = (r - 1) * d + c``; the client fetches column ``c`` by delegating
``F e_c`` and reads off entry ``r``. Each server sees uniform shares of the
database and of the selector vector, so neither ``f`` nor ``i`` leaks to a
single server.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isqrt
from typing import Sequence

from .covering import CoveringScheme
from .field import FieldMatrix, FieldModulus, FieldRandom, FieldVector, _vector
from .protocol import FunctionKeyMaterial, LocalServers, Servers, delegate, key_gen

__all__ = [
    "PirDatabase",
    "PirQuery",
    "PirClient",
    "build_database",
    "make_query",
    "pir_retrieve",
    "side_length",
    "CHUNK_BYTES",
    "chunk_bytes",
]

CHUNK_BYTES = 31


def side_length(n: int) -> int:
    d = isqrt(n)
    return d if d * d == n else d + 1


@dataclass(frozen=True)
class PirDatabase:
    N: int
    F: FieldMatrix

    @property
    def d(self) -> int:
        return self.F.m


@dataclass(frozen=True)
class PirQuery:
    index: int
    row: int
    col: int
    selector: tuple[int, ...]

    def vector(self, modulus: FieldModulus) -> FieldVector:
        return _vector(self.selector, modulus)


def build_database(entries: Sequence[int], modulus: FieldModulus) -> PirDatabase:
    n = len(entries)
    if n == 0:
        raise ValueError("database must have at least one entry")
    d = side_length(n)
    q = modulus.q
    flat = [e % q for e in entries] + [0] * (d * d - n)
    return PirDatabase(n, FieldMatrix(tuple(tuple(flat[r * d:(r + 1) * d]) for r in range(d)), modulus))


def make_query(i: int, N: int) -> PirQuery:
    if not 1 <= i <= N:
        raise IndexError(f"index {i} outside [1, {N}]")
    d = side_length(N)
    row, col = divmod(i - 1, d)
    selector = tuple(int(j == col) for j in range(d))
    return PirQuery(i, row + 1, col + 1, selector)


class PirClient:
    """Client that preprocessed a database once and retrieves entries from its servers.

    By default the servers run in-process; assign ``servers`` (for example a
    :class:`~msvc.transport.RemoteServers`) after provisioning remote daemons
    with ``keys.rho``.
    """

    def __init__(self, db: PirDatabase, scheme: CoveringScheme, rng: FieldRandom, tamper=None):
        self.N = db.N
        self.d = db.d
        self.modulus = db.F.modulus
        self.scheme = scheme
        self.keys: FunctionKeyMaterial = key_gen(db.F, scheme, rng)
        self.servers: Servers = LocalServers(self.keys.rho, scheme, tamper)

    def retrieve_column(self, i: int, rng: FieldRandom) -> tuple[PirQuery, FieldVector]:
        query = make_query(i, self.N)
        column = delegate(self.keys, query.vector(self.modulus), self.scheme, self.servers, rng)
        return query, column

    def retrieve(self, i: int, rng: FieldRandom) -> int:
        """Entry ``f_i``; raises :class:`~msvc.protocol.VerificationFailed` on cheating."""
        query, column = self.retrieve_column(i, rng)
        return column[query.row - 1]


def pir_retrieve(db: PirDatabase, i: int, scheme: CoveringScheme, rng: FieldRandom) -> int:
    return PirClient(db, scheme, rng).retrieve(i, rng)


def chunk_bytes(blob: bytes, chunk: int = CHUNK_BYTES) -> list[int]:
    """Split a byte string into big-endian integers of ``chunk`` bytes; the last chunk is zero-padded."""
    if not blob:
        return []
    padded = blob + b"\x00" * (-len(blob) % chunk)
    return [int.from_bytes(padded[i:i + chunk], "big") for i in range(0, len(padded), chunk)]
