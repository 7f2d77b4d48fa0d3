"""Multi-server verifiable delegation of ``F x``.

The client splits ``F`` into ``a`` additive shares and ``x`` into ``b``,
hands server ``l`` the shares indexed by ``A_l`` and ``B_l``, and each
server returns ``F_u x_v`` for the pairs ``(u, v)`` in ``C_l``. Each
returned vector is checked against the secret key ``(r, s_u = r F_u)``
with ``r . y_uv == s_u . x_v`` before the pieces are summed.

Typical use::

    keys = key_gen(F, scheme, rng)
    inp = prob_gen(keys.pk_f, x, scheme, rng)
    outs = [compute(l, keys.rho[l], inp.sigma[l], scheme) for l in scheme.servers()]
    outcome = verify(keys.vk_f, inp.vk_x, outs, scheme)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

from .covering import CoveringScheme, SchemeSlice, validate
from .field import (
    FieldMatrix,
    FieldRandom,
    FieldVector,
    _vector,
    dot,
    mat_vec_mul,
    random_vector,
    vec_add,
    vec_mat_mul,
)
from .sharing import share_matrix, share_vector

log = logging.getLogger(__name__)

__all__ = [
    "PUBLIC_KEY",
    "VerificationKey",
    "FunctionKeyMaterial",
    "InputKeyMaterial",
    "ServerOutput",
    "VerifyOutcome",
    "ProtocolError",
    "VerificationFailed",
    "MalformedOutputError",
    "key_gen",
    "prob_gen",
    "compute",
    "verify",
    "LocalServers",
    "delegate",
    "AdversaryView",
    "HonestAdversary",
    "RandomTamperAdversary",
    "ZeroOffsetAdversary",
    "run_security_experiment",
    "soundness_bound",
]

# The public key is empty: anyone can prepare inputs.
PUBLIC_KEY = None

Pair = tuple[int, int]


class ProtocolError(ValueError):
    pass


class MalformedOutputError(ProtocolError):
    """Server results do not match the scheme's partition (a shape error, not cheating)."""


class VerificationFailed(Exception):
    """A server result failed its check: cheating was detected."""

    def __init__(self, server: int, pair: Pair):
        super().__init__(f"result from server {server} for pair {pair} failed verification")
        self.server = server
        self.pair = pair


@dataclass
class VerificationKey:
    r: FieldVector
    s: dict[int, FieldVector]
    # uses is bumped by verify(); see max_uses.
    uses: int = 0
    _warned: bool = field(default=False, repr=False, compare=False)

    def max_uses(self, ab: int) -> int:
        """Verifications after which the forgery bound ``p*ab/(q - p*ab)`` may exceed 2^-40."""
        return self.r.modulus.q // ((1 << 40) * ab)


@dataclass
class FunctionKeyMaterial:
    pk_f: None
    rho: dict[int, dict[int, FieldMatrix]]
    vk_f: VerificationKey


@dataclass
class InputKeyMaterial:
    sigma: dict[int, dict[int, FieldVector]]
    vk_x: tuple[FieldVector, ...]


@dataclass
class ServerOutput:
    server_index: int
    results: dict[Pair, FieldVector]


@dataclass(frozen=True)
class VerifyOutcome:
    value: FieldVector | None
    failed_at: tuple[int, int, int] | None = None

    @property
    def accepted(self) -> bool:
        return self.value is not None

    def unwrap(self) -> FieldVector:
        if self.value is None:
            l, u, v = self.failed_at
            raise VerificationFailed(l, (u, v))
        return self.value


def _require_valid(scheme: CoveringScheme) -> None:
    check = validate(scheme)
    if not check:
        raise ProtocolError(f"invalid scheme ({check.violated}): {check.detail}")


def key_gen(F: FieldMatrix, scheme: CoveringScheme, rng: FieldRandom) -> FunctionKeyMaterial:
    _require_valid(scheme)
    shares = share_matrix(F, scheme.a, rng)
    r = random_vector(F.m, F.modulus, rng)
    s = {u: vec_mat_mul(r, Fu) for u, Fu in enumerate(shares, 1)}
    rho = {
        l: {u: shares[u - 1] for u in sorted(scheme.A_sets[l - 1])}
        for l in scheme.servers()
    }
    return FunctionKeyMaterial(PUBLIC_KEY, rho, VerificationKey(r, s))


def prob_gen(pk_f, x: FieldVector, scheme: CoveringScheme, rng: FieldRandom, *, d: int | None = None) -> InputKeyMaterial:
    """Share ``x`` for the servers. Needs no secret state; ``pk_f`` is empty."""
    if d is not None and x.dim != d:
        raise ProtocolError(f"input has dimension {x.dim}, function expects {d}")
    shares = share_vector(x, scheme.b, rng)
    sigma = {
        l: {v: shares[v - 1] for v in sorted(scheme.B_sets[l - 1])}
        for l in scheme.servers()
    }
    return InputKeyMaterial(sigma, shares)


def compute(
    server: int,
    rho: Mapping[int, FieldMatrix],
    sigma: Mapping[int, FieldVector],
    scheme: CoveringScheme | SchemeSlice,
) -> ServerOutput:
    """Server-side work: ``F_u x_v`` for every assigned pair."""
    results = {}
    for u, v in scheme.cells(server):
        if u not in rho:
            raise ProtocolError(f"server {server} is missing function share {u}")
        if v not in sigma:
            raise ProtocolError(f"server {server} is missing input share {v}")
        results[(u, v)] = mat_vec_mul(rho[u], sigma[v])
    return ServerOutput(server, results)


def _index_outputs(outputs: Sequence[ServerOutput], scheme: CoveringScheme) -> dict[int, ServerOutput]:
    by_server: dict[int, ServerOutput] = {}
    for out in outputs:
        if out.server_index in by_server:
            raise MalformedOutputError(f"duplicate output for server {out.server_index}")
        by_server[out.server_index] = out
    if set(by_server) != set(scheme.servers()):
        raise MalformedOutputError(
            f"expected outputs from servers {list(scheme.servers())}, got {sorted(by_server)}"
        )
    for l, out in by_server.items():
        expected = scheme.C_sets[l - 1]
        if set(out.results) != expected:
            raise MalformedOutputError(
                f"server {l} returned pairs {sorted(out.results)}, expected {sorted(expected)}"
            )
    return by_server


def verify(
    vk_f: VerificationKey,
    vk_x: Sequence[FieldVector],
    outputs: Sequence[ServerOutput],
    scheme: CoveringScheme,
) -> VerifyOutcome:
    """Check every returned product and, if all pass, sum them into ``F x``.

    Servers are checked in ascending order and pairs lexicographically;
    the first failure is reported in ``failed_at`` as ``(l, u, v)``.
    """
    by_server = _index_outputs(outputs, scheme)
    r = vk_f.r
    m = r.dim
    vk_f.uses += 1
    limit = vk_f.max_uses(scheme.a * scheme.b)
    if vk_f.uses > limit and not vk_f._warned:
        vk_f._warned = True
        # A modulus too small for the 2^-40 target gets limit 0; no point shouting.
        (log.warning if limit else log.debug)(
            "verification key used %d times (> %d); regenerate keys to keep the forgery bound below 2^-40",
            vk_f.uses, limit,
        )
    q = r.modulus.q
    total = [0] * m
    for l in scheme.servers():
        results = by_server[l].results
        for u, v in scheme.cells(l):
            y = results[(u, v)]
            if y.dim != m:
                raise MalformedOutputError(f"server {l} pair ({u},{v}) has dimension {y.dim}, expected {m}")
            if dot(r, y) != dot(vk_f.s[u], vk_x[v - 1]):
                return VerifyOutcome(None, (l, u, v))
            total = [t + e for t, e in zip(total, y.values)]
    return VerifyOutcome(_vector(tuple(t % q for t in total), r.modulus))


class Servers(Protocol):
    def gather(self, sigma: Mapping[int, Mapping[int, FieldVector]]) -> list[ServerOutput]: ...


class LocalServers:
    """In-process servers holding their function shares.

    ``tamper`` maps a server index to a function ``(pair, y) -> y'`` applied
    to that server's results before they are returned.
    """

    def __init__(
        self,
        rho: Mapping[int, Mapping[int, FieldMatrix]],
        scheme: CoveringScheme,
        tamper: Mapping[int, Callable[[Pair, FieldVector], FieldVector]] | None = None,
    ):
        self.rho = rho
        self.scheme = scheme
        self.tamper = dict(tamper or {})
        self.seen_sigma: list[dict[int, dict[int, FieldVector]]] = []

    def gather(self, sigma):
        outs = []
        for l in self.scheme.servers():
            out = compute(l, self.rho[l], sigma[l], self.scheme)
            if l in self.tamper:
                hook = self.tamper[l]
                out = ServerOutput(l, {p: hook(p, y) for p, y in out.results.items()})
            outs.append(out)
        return outs


def random_offset(rng: FieldRandom) -> Callable[[Pair, FieldVector], FieldVector]:
    """Tamper hook adding an independent uniform nonzero offset to every result."""

    def hook(pair: Pair, y: FieldVector) -> FieldVector:
        return vec_add(y, _nonzero_vector(y.dim, y.modulus, rng))

    return hook


def _nonzero_vector(dim: int, modulus, rng: FieldRandom) -> FieldVector:
    while True:
        delta = random_vector(dim, modulus, rng)
        if any(delta.values):
            return delta


def delegate(
    keys: FunctionKeyMaterial,
    x: FieldVector,
    scheme: CoveringScheme,
    servers: Servers,
    rng: FieldRandom,
) -> FieldVector:
    """Run one computing-phase round; raise :class:`VerificationFailed` on cheating."""
    inp = prob_gen(keys.pk_f, x, scheme, rng)
    outputs = servers.gather(inp.sigma)
    return verify(keys.vk_f, inp.vk_x, outputs, scheme).unwrap()


# Security experiment


@dataclass(frozen=True)
class Round:
    sigma: dict[int, dict[int, FieldVector]]
    outputs: tuple[ServerOutput, ...]
    accepted: int


@dataclass(frozen=True)
class AdversaryView:
    """What the adversary sees: the public key, every function share, and past rounds.

    Rounds expose the input shares, the crafted results and the accept bit,
    never the verification keys.
    """

    pk_f: None
    rho: dict[int, dict[int, FieldMatrix]]
    transcript: tuple[Round, ...]


class Adversary(Protocol):
    def choose_input(self, view: AdversaryView) -> FieldVector: ...

    def respond(self, view: AdversaryView, sigma: dict[int, dict[int, FieldVector]]) -> Sequence[ServerOutput]: ...


class HonestAdversary:
    """Picks random inputs and returns the faithful server results."""

    def __init__(self, scheme: CoveringScheme, d: int, rng: FieldRandom):
        self.scheme = scheme
        self.d = d
        self.rng = rng

    def choose_input(self, view):
        modulus = next(iter(view.rho[1].values())).modulus
        return random_vector(self.d, modulus, self.rng)

    def honest(self, view, sigma) -> list[ServerOutput]:
        return [compute(l, view.rho[l], sigma[l], self.scheme) for l in self.scheme.servers()]

    def respond(self, view, sigma):
        return self.honest(view, sigma)


class RandomTamperAdversary(HonestAdversary):
    """Adds a uniform nonzero offset to one uniformly chosen result."""

    def respond(self, view, sigma):
        outs = self.honest(view, sigma)
        cells = [(i, p) for i, o in enumerate(outs) for p in sorted(o.results)]
        i, pair = cells[self.rng.elements(1, len(cells))[0]]
        y = outs[i].results[pair]
        outs[i].results[pair] = vec_add(y, _nonzero_vector(y.dim, y.modulus, self.rng))
        return outs


class ZeroOffsetAdversary(HonestAdversary):
    """Tampers with a zero offset: a fresh but equal copy of each result."""

    def respond(self, view, sigma):
        outs = self.honest(view, sigma)
        return [
            ServerOutput(o.server_index, {p: vec_add(y, FieldVector.zeros(y.dim, y.modulus)) for p, y in o.results.items()})
            for o in outs
        ]


def run_security_experiment(
    F: FieldMatrix,
    p: int,
    adversary: Adversary,
    scheme: CoveringScheme,
    rng: FieldRandom,
) -> int:
    """Return 1 if, within ``p`` attempts, the adversary makes verify output a wrong value."""
    keys = key_gen(F, scheme, rng)
    transcript: list[Round] = []
    broken = 0
    for _ in range(p):
        view = AdversaryView(keys.pk_f, keys.rho, tuple(transcript))
        x = adversary.choose_input(view)
        if not isinstance(x, FieldVector) or x.dim != F.d or x.modulus.q != F.modulus.q:
            raise ProtocolError("adversary chose a malformed input")
        inp = prob_gen(keys.pk_f, x, scheme, rng)
        outputs = tuple(adversary.respond(view, inp.sigma))
        outcome = verify(keys.vk_f, inp.vk_x, outputs, scheme)
        if outcome.accepted and outcome.value != mat_vec_mul(F, x):
            broken = 1
        transcript.append(Round(inp.sigma, outputs, int(outcome.accepted)))
    return broken


def soundness_bound(p: int, ab: int, q: int) -> float:
    """Upper bound ``p*ab / (q - p*ab)`` on the adversary's success probability."""
    if q <= p * ab:
        return 1.0
    return p * ab / (q - p * ab)
