"""Command-line entry point.

Exit codes: 0 success, 2 verification failed (cheating detected),
3 transport failure, 4 configuration or input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .covering import CoveringError, CoveringScheme, pi_s, pi_w, validate
from .experiments import attack_sim, csv_row, run_bench, CSV_FIELDS
from .field import DEFAULT_PRIME, FieldError, FieldMatrix, FieldModulus, FieldRandom, FieldVector, random_matrix
from .pir import PirClient, build_database, chunk_bytes
from .polydelegate import (
    DelegatedPolynomial,
    decompose_bivariate,
    decompose_bounded_multivariate,
    decompose_quadratic,
    decompose_univariate,
)
from .protocol import ProtocolError, VerificationFailed, VerificationKey, key_gen, prob_gen, verify, ServerOutput
from .transport import (
    STATE_DIR_ENV,
    InputKeyFile,
    KeyFile,
    RemoteServers,
    Results,
    SetupShares,
    StateStore,
    TransportError,
    WireError,
    encode_message,
    parse_endpoint,
    provision,
    read_frames,
    serve,
    setup_messages,
)

log = logging.getLogger("msvc")

EXIT_OK = 0
EXIT_REJECTED = 2
EXIT_TRANSPORT = 3
EXIT_CONFIG = 4

BUILTIN_SCHEMES = {"pi_s": pi_s, "pi_w": pi_w}
DEMO_DB = [10, 20, 30, 40]


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    scheme: str = "pi_s"
    q: int = DEFAULT_PRIME
    m: int = 16
    d: int = 16
    seed: int | None = None
    endpoints: list[str] = field(default_factory=list)
    out: str | None = None

    def modulus(self) -> FieldModulus:
        try:
            return FieldModulus(self.q)
        except FieldError as e:
            raise ConfigError(str(e)) from e

    def rng(self) -> FieldRandom:
        return FieldRandom(self.seed)

    def load_scheme(self) -> CoveringScheme:
        return load_scheme(self.scheme)


def load_scheme(spec: str) -> CoveringScheme:
    if spec in BUILTIN_SCHEMES:
        return BUILTIN_SCHEMES[spec]()
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"unknown scheme {spec!r}: not a built-in name and no such file")
    try:
        scheme = CoveringScheme.from_json(path.read_text())
    except (json.JSONDecodeError, CoveringError) as e:
        raise ConfigError(f"cannot parse scheme file {spec}: {e}") from e
    check = validate(scheme)
    if not check:
        raise ConfigError(f"scheme {spec} is invalid ({check.violated}): {check.detail}")
    return scheme


def build_config(args: argparse.Namespace, defaults: RunConfig | None = None) -> RunConfig:
    cfg = defaults or RunConfig()
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from e
        for key, value in data.items():
            if not hasattr(cfg, key):
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
    for key in ("scheme", "q", "m", "d", "seed", "out"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "endpoints", None):
        cfg.endpoints = [e for e in args.endpoints.split(",") if e]
    if cfg.m < 1 or cfg.d < 1:
        raise ConfigError("m and d must be positive")
    return cfg


def _json_arg(text: str, what: str):
    path = Path(text)
    try:
        raw = path.read_text() if path.exists() else text
        return json.loads(raw)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot parse {what}: {e}") from e


def _write_private(path: Path, data: bytes) -> None:
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)
    os.chmod(path, 0o600)


def _endpoints(cfg: RunConfig, scheme: CoveringScheme):
    if len(cfg.endpoints) != scheme.k:
        raise ConfigError(f"scheme needs {scheme.k} endpoints, got {len(cfg.endpoints)}")
    try:
        return [parse_endpoint(e) for e in cfg.endpoints]
    except ValueError as e:
        raise ConfigError(str(e)) from e


# Subcommands


def cmd_keygen(args) -> int:
    cfg = build_config(args)
    scheme = cfg.load_scheme()
    modulus = cfg.modulus()
    rng = cfg.rng()
    if args.matrix:
        try:
            F = FieldMatrix.from_ints(_json_arg(args.matrix, "matrix"), modulus)
        except (FieldError, TypeError) as e:
            raise ConfigError(f"bad matrix: {e}") from e
    else:
        F = random_matrix(cfg.m, cfg.d, modulus, rng)
    out = Path(cfg.out or "keys")
    out.mkdir(parents=True, exist_ok=True)
    session = args.session or uuid.uuid4().hex
    keys = key_gen(F, scheme, rng)
    for l, msg in setup_messages(keys, scheme, session).items():
        (out / f"server-{l}.setup").write_bytes(encode_message(msg))
    vk = KeyFile(session, scheme.to_json(), modulus.q, F.d, keys.vk_f.r, keys.vk_f.s)
    _write_private(out / "verify.key", encode_message(vk))
    if args.save_matrix:
        (out / "matrix.json").write_text(json.dumps([list(r) for r in F.rows]))
    print(f"session {session}: wrote {scheme.k} share files and verify.key to {out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    host, port = parse_endpoint(args.bind)
    state_dir = args.state_dir or os.environ.get(STATE_DIR_ENV) or "msvc-state"
    store = StateStore(state_dir)
    for path in args.load or []:
        msgs = read_frames(Path(path).read_bytes())
        for msg in msgs:
            if not isinstance(msg, SetupShares):
                raise ConfigError(f"{path} does not contain share setup messages")
            if store.get(msg.session_id) is None:
                store.put(msg)
    mode = " (tamper mode)" if args.tamper else ""

    def ready(addr):
        print(f"listening on {addr[0]}:{addr[1]} state={state_dir}{mode}", flush=True)

    try:
        serve((host, port), store, tamper=args.tamper, max_frame_bytes=args.max_matrix_bytes, on_ready=ready)
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def _load_key(path: str) -> tuple[KeyFile, CoveringScheme, VerificationKey]:
    try:
        msgs = read_frames(Path(path).read_bytes())
    except (OSError, WireError) as e:
        raise ConfigError(f"cannot read key file {path}: {e}") from e
    if len(msgs) != 1 or not isinstance(msgs[0], KeyFile):
        raise ConfigError(f"{path} is not a verification key file")
    kf = msgs[0]
    scheme = CoveringScheme.from_json(kf.scheme_json)
    return kf, scheme, VerificationKey(kf.r, dict(kf.s))


def cmd_delegate(args) -> int:
    cfg = build_config(args)
    kf, scheme, vk = _load_key(args.key)
    modulus = FieldModulus(kf.modulus)
    try:
        x = FieldVector.from_ints(_json_arg(args.x, "input vector"), modulus)
    except (FieldError, TypeError) as e:
        raise ConfigError(f"bad input vector: {e}") from e
    if x.dim != kf.d:
        raise ConfigError(f"input has dimension {x.dim}, key expects {kf.d}")
    endpoints = _endpoints(cfg, scheme)
    rng = cfg.rng()
    inp = prob_gen(None, x, scheme, rng)
    outputs = RemoteServers(endpoints, kf.session_id, scheme, args.timeout).gather(inp.sigma)
    if cfg.out:
        frames = [encode_message(InputKeyFile(kf.session_id, "cli", modulus.q, dict(enumerate(inp.vk_x, 1))))]
        frames += [encode_message(Results(kf.session_id, str(o.server_index), modulus.q, o.results)) for o in outputs]
        Path(cfg.out).write_bytes(b"".join(frames))
    return _finish(verify(vk, inp.vk_x, outputs, scheme))


def _finish(outcome) -> int:
    if not outcome.accepted:
        l, u, v = outcome.failed_at
        print(f"cheating detected: server {l} result for ({u},{v}) failed verification", file=sys.stderr)
        return EXIT_REJECTED
    print(json.dumps(list(outcome.value.values)))
    return EXIT_OK


def cmd_verify(args) -> int:
    kf, scheme, vk = _load_key(args.key)
    try:
        frames = read_frames(Path(args.transcript).read_bytes())
    except (OSError, WireError) as e:
        raise ConfigError(f"cannot read transcript: {e}") from e
    if not frames or not isinstance(frames[0], InputKeyFile):
        raise ConfigError("transcript must start with the input key")
    vk_x = tuple(frames[0].shares[v] for v in sorted(frames[0].shares))
    outputs = []
    for fr in frames[1:]:
        if not isinstance(fr, Results):
            raise ConfigError("transcript holds a non-result frame")
        outputs.append(ServerOutput(int(fr.request_id), dict(fr.results)))
    try:
        outcome = verify(vk, vk_x, outputs, scheme)
    except ProtocolError as e:
        raise ConfigError(str(e)) from e
    return _finish(outcome)


def _parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(s) for s in text.split(",") if s]
    except ValueError as e:
        raise ConfigError(f"bad size list {text!r}") from e
    if not sizes or min(sizes) < 1:
        raise ConfigError("sizes must be positive integers")
    return sizes


def cmd_bench(args) -> int:
    cfg = build_config(args)
    names = [n for n in (args.scheme or "pi_s,pi_w").split(",") if n]
    schemes = [(Path(n).stem if n not in BUILTIN_SCHEMES else n, load_scheme(n)) for n in names]
    sizes = _parse_sizes(args.sizes)
    if args.repeats < 5:
        log.warning("fewer than 5 repeats; medians will be noisy")
    out = open(cfg.out, "w", newline="") if cfg.out else sys.stdout
    writer = csv.DictWriter(out, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    try:
        run_bench(
            sizes, schemes, cfg.modulus(), cfg.rng(), args.repeats,
            on_record=lambda rec: (writer.writerow(csv_row(rec)), out.flush()),
        )
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_attack_sim(args) -> int:
    cfg = build_config(args, RunConfig(q=1009, m=4, d=4))
    scheme = cfg.load_scheme()
    if args.trials < 1 or args.p < 1:
        raise ConfigError("trials and p must be positive")
    report = attack_sim(
        cfg.scheme, scheme, cfg.modulus(), cfg.m, cfg.d, args.p, args.trials, cfg.rng(), args.adversary,
    )
    text = "\n".join(report.lines())
    print(text)
    if cfg.out:
        Path(cfg.out).write_text(text + "\n")
    return EXIT_OK


def _pir_entries(args, modulus: FieldModulus) -> list[int]:
    if args.db:
        width = (modulus.q.bit_length() - 1) // 8
        if width < 1:
            raise ConfigError("modulus too small to hold byte chunks")
        entries = chunk_bytes(Path(args.db).read_bytes(), width)
        if not entries:
            raise ConfigError("database file is empty")
        return entries
    if args.values:
        return [int(v) for v in args.values.split(",")]
    return list(DEMO_DB)


def cmd_pir(args) -> int:
    cfg = build_config(args)
    scheme = cfg.load_scheme()
    modulus = cfg.modulus()
    rng = cfg.rng()
    entries = _pir_entries(args, modulus)
    if not 1 <= args.index <= len(entries):
        raise ConfigError(f"index {args.index} outside [1, {len(entries)}]")
    client = PirClient(build_database(entries, modulus), scheme, rng)
    if cfg.endpoints:
        endpoints = _endpoints(cfg, scheme)
        session = uuid.uuid4().hex
        provision(endpoints, client.keys, scheme, session, args.timeout)
        client.servers = RemoteServers(endpoints, session, scheme, args.timeout)
    value = client.retrieve(args.index, rng)
    print(value)
    return EXIT_OK


POLY_FAMILIES = {
    "univariate": decompose_univariate,
    "bivariate": decompose_bivariate,
    "quadratic": decompose_quadratic,
    "multivariate": decompose_bounded_multivariate,
}


def cmd_poly(args) -> int:
    cfg = build_config(args)
    scheme = cfg.load_scheme()
    modulus = cfg.modulus()
    rng = cfg.rng()
    coeffs = _json_arg(args.coeffs, "coefficients")
    point = _json_arg(args.point, "point")
    try:
        decomp = POLY_FAMILIES[args.family](coeffs, modulus)
        value = DelegatedPolynomial(decomp, scheme, rng).evaluate(point, rng)
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from e
    print(value)
    return EXIT_OK


def _common(p: argparse.ArgumentParser, *, workload: bool = True) -> None:
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--scheme", help="pi_s, pi_w or a scheme JSON file")
    p.add_argument("--q", type=int, help="prime modulus (default: the 256-bit default prime)")
    if workload:
        p.add_argument("--m", type=int, help="rows of F")
        p.add_argument("--d", type=int, help="columns of F")
    p.add_argument("--seed", type=int, help="seed for reproducible randomness (default: OS CSPRNG)")
    p.add_argument("--endpoints", help="comma-separated host:port list, one per server")
    p.add_argument("--out", help="output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msvc",
        description="Verifiable delegation of F x to several non-colluding servers.",
        epilog="exit codes: 0 ok, 2 cheating detected, 3 transport failure, 4 configuration error",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="share a matrix for the servers and write the verification key")
    _common(p)
    p.add_argument("--matrix", help="JSON nested list (or file) holding F; random m x d if omitted")
    p.add_argument("--session", help="session id (default: random)")
    p.add_argument("--save-matrix", action="store_true", help="also write matrix.json (testing only)")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("serve", help="run one server daemon")
    p.add_argument("--bind", default="127.0.0.1:7401", help="host:port to listen on (port 0 picks a free one)")
    p.add_argument("--state-dir", help=f"persistent state directory (env {STATE_DIR_ENV})")
    p.add_argument("--load", action="append", help="preload a server-<l>.setup file")
    p.add_argument("--tamper", action="store_true", help="corrupt every result (for testing detection)")
    p.add_argument("--max-matrix-bytes", type=int, default=1 << 30, help="largest accepted frame")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("delegate", help="delegate F x to running servers and verify the result")
    _common(p, workload=False)
    p.add_argument("--key", required=True, help="verify.key written by keygen")
    p.add_argument("--x", required=True, help="JSON list (or file) holding x")
    p.add_argument("--timeout", type=float, default=30.0)
    p.set_defaults(func=cmd_delegate)

    p = sub.add_parser("verify", help="re-verify a transcript written by delegate --out")
    p.add_argument("--key", required=True)
    p.add_argument("--transcript", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="client vs naive timing sweep, CSV output")
    _common(p, workload=False)
    p.add_argument("--sizes", default="100,200,400,800", help="comma-separated m = d values")
    p.add_argument("--repeats", type=int, default=5)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("attack-sim", help="measure forgery success against the bound")
    _common(p)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--p", type=int, default=1, help="attempts per experiment")
    p.add_argument("--adversary", choices=["random", "honest", "zero"], default="random")
    p.set_defaults(func=cmd_attack_sim)

    p = sub.add_parser("pir", help="retrieve one database entry through the servers")
    _common(p, workload=False)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--db", help="binary file, chunked into field elements")
    src.add_argument("--values", help="comma-separated integer entries")
    src.add_argument("--demo", action="store_true", help=f"use the demo database {DEMO_DB}")
    p.add_argument("--index", "-i", type=int, required=True, help="1-based entry index")
    p.add_argument("--timeout", type=float, default=30.0)
    p.set_defaults(func=cmd_pir)

    p = sub.add_parser("poly", help="evaluate a polynomial through the servers")
    _common(p, workload=False)
    p.add_argument("--family", choices=sorted(POLY_FAMILIES), required=True)
    p.add_argument("--coeffs", required=True, help="JSON coefficient array (or file)")
    p.add_argument("--point", required=True, help="JSON point: a number, or a list")
    p.set_defaults(func=cmd_poly)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except VerificationFailed as e:
        print(f"cheating detected: {e}", file=sys.stderr)
        return EXIT_REJECTED
    except TransportError as e:
        print(f"transport failure: {e}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
