"""Client-cost benchmark and forgery simulation used by the ``bench`` and ``attack-sim`` commands."""

from __future__ import annotations

import csv
import gc
import statistics
import time
from dataclasses import asdict, dataclass, fields
from typing import IO, Iterable, Sequence

from .covering import CoveringScheme
from .field import FieldModulus, FieldRandom, count_ops, mat_vec_mul, random_matrix, random_vector
from .protocol import (
    HonestAdversary,
    RandomTamperAdversary,
    ZeroOffsetAdversary,
    compute,
    key_gen,
    prob_gen,
    run_security_experiment,
    soundness_bound,
    verify,
)

__all__ = ["BenchRecord", "bench_point", "run_bench", "write_csv", "CSV_FIELDS", "AttackReport", "attack_sim"]


@dataclass
class BenchRecord:
    m: int
    d: int
    scheme: str
    t_naive_ms: float
    t_client_ms: float
    t_probgen_ms: float
    t_verify_ms: float
    t_server_ms: float
    mul_naive: int
    mul_keygen: int
    mul_probgen: int
    mul_compute: int
    mul_verify: int

    @property
    def speedup(self) -> float:
        return self.t_naive_ms / self.t_client_ms if self.t_client_ms else float("inf")


CSV_FIELDS = [f.name for f in fields(BenchRecord)] + ["speedup"]


def _median_ms(fn, repeats: int) -> tuple[float, object]:
    times = []
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(times), result


def _time_naive(F, x, repeats):
    with count_ops() as c:
        mat_vec_mul(F, x)
    t, y = _median_ms(lambda: mat_vec_mul(F, x), repeats)
    return t, y, c.mul


def bench_point(
    n: int,
    scheme_name: str,
    scheme: CoveringScheme,
    modulus: FieldModulus,
    rng: FieldRandom,
    repeats: int = 5,
) -> BenchRecord:
    """Time one ``m = d = n`` point.

    ``T_c`` is the median ProbGen time plus the median Verify time; Verify
    is repeated on the results of the last ProbGen so the server side only
    runs once.
    """
    repeats = max(repeats, 1)
    F = random_matrix(n, n, modulus, rng)
    x = random_vector(n, modulus, rng)

    t_naive, expected, mul_naive = _time_naive(F, x, repeats)

    with count_ops() as c_key:
        keys = key_gen(F, scheme, rng)
    del F
    gc.collect()

    with count_ops() as c_prob:
        prob_gen(keys.pk_f, x, scheme, rng)
    t_prob, inp = _median_ms(lambda: prob_gen(keys.pk_f, x, scheme, rng), repeats)

    outputs = []
    server_ms = []
    with count_ops() as c_comp:
        for l in scheme.servers():
            t0 = time.perf_counter()
            outputs.append(compute(l, keys.rho[l], inp.sigma[l], scheme))
            server_ms.append((time.perf_counter() - t0) * 1e3)

    with count_ops() as c_ver:
        outcome = verify(keys.vk_f, inp.vk_x, outputs, scheme)
    if outcome.value != expected:
        raise RuntimeError("honest run did not reproduce F x")
    t_ver, _ = _median_ms(lambda: verify(keys.vk_f, inp.vk_x, outputs, scheme), repeats)

    return BenchRecord(
        m=n, d=n, scheme=scheme_name,
        t_naive_ms=round(t_naive, 3),
        t_client_ms=round(t_prob + t_ver, 3),
        t_probgen_ms=round(t_prob, 3),
        t_verify_ms=round(t_ver, 3),
        t_server_ms=round(max(server_ms), 3),
        mul_naive=mul_naive,
        mul_keygen=c_key.mul,
        mul_probgen=c_prob.mul,
        mul_compute=c_comp.mul,
        mul_verify=c_ver.mul,
    )


def run_bench(
    sizes: Iterable[int],
    schemes: Sequence[tuple[str, CoveringScheme]],
    modulus: FieldModulus,
    rng: FieldRandom,
    repeats: int = 5,
    on_record=None,
) -> list[BenchRecord]:
    records = []
    for n in sizes:
        for name, scheme in schemes:
            rec = bench_point(n, name, scheme, modulus, rng, repeats)
            records.append(rec)
            if on_record is not None:
                on_record(rec)
            gc.collect()
    return records


def csv_row(rec: BenchRecord) -> dict:
    row = asdict(rec)
    row["speedup"] = round(rec.speedup, 3)
    return row


def write_csv(records: Iterable[BenchRecord], out: IO[str]) -> None:
    writer = csv.DictWriter(out, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(csv_row(rec))


@dataclass
class AttackReport:
    scheme: str
    adversary: str
    q: int
    m: int
    d: int
    p: int
    trials: int
    successes: int
    bound: float

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    def lines(self) -> list[str]:
        return [
            f"scheme={self.scheme}",
            f"adversary={self.adversary}",
            f"q={self.q} m={self.m} d={self.d} p={self.p}",
            f"trials={self.trials}",
            f"successes={self.successes}",
            f"rate={self.rate:.6f}",
            f"bound={self.bound:.6f}",
            f"within_bound={'yes' if self.rate <= self.bound else 'no'}",
        ]


ADVERSARIES = {
    "random": RandomTamperAdversary,
    "honest": HonestAdversary,
    "zero": ZeroOffsetAdversary,
}


def attack_sim(
    scheme_name: str,
    scheme: CoveringScheme,
    modulus: FieldModulus,
    m: int,
    d: int,
    p: int,
    trials: int,
    rng: FieldRandom,
    adversary: str = "random",
) -> AttackReport:
    """Run the forgery experiment ``trials`` times with fresh keys and a fresh random ``F`` each time."""
    cls = ADVERSARIES[adversary]
    wins = 0
    for _ in range(trials):
        F = random_matrix(m, d, modulus, rng)
        wins += run_security_experiment(F, p, cls(scheme, d, rng), scheme, rng)
    ab = scheme.a * scheme.b
    return AttackReport(scheme_name, adversary, modulus.q, m, d, p, trials, wins, soundness_bound(p, ab, modulus.q))
