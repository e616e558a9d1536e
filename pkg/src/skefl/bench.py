"""Timing and operation-count benchmarks for the CLI ``bench`` command.

All values are medians over ``reps`` repetitions of wall-clock milliseconds
(``perf_counter``); homomorphic-operation counts come from the crypto layer's
tally and are exact.  The encrypted-vs-plaintext ratio compares one protocol
round (distribute + garble + aggregate + decode) against the plaintext
weighted average of the same models — aggregation cost only, training
excluded on both sides.
"""

from __future__ import annotations

import statistics
import time
from typing import List, Optional

from . import crypto
from .atss import atss_merge, atss_split
from .crypto import FixedPointCodec, KeyPair
from .protocol import RoundConfig, build_parties, run_round
from .rng import derive_rng
from .simnet import Fabric
from .workload import ModelVector, fedavg_oracle

BENCH_COLUMNS = ["section", "op", "backend", "n", "f", "m", "reps", "value", "unit"]


def _median_ms(samples: List[float]) -> float:
    return statistics.median(samples) * 1e3


def bench_split(keys: KeyPair, f: int, m: int, reps: int, seed: int) -> float:
    """Median ms to split an m-element ciphertext vector into f+1 shares."""
    setup = derive_rng(seed, "bench-split-vec", m, f)
    ctv = crypto.uniform_vector(keys.public, m, setup)
    peers = list(range(2, f + 2))
    samples = []
    for rep in range(reps):
        rng = derive_rng(seed, "bench-split", m, f, rep)
        t0 = time.perf_counter()
        atss_split(ctv, f, keys, rng, owner=1, round_no=1, peers=peers)
        samples.append(time.perf_counter() - t0)
    return _median_ms(samples)


def bench_merge(keys: KeyPair, f: int, m: int, reps: int, seed: int) -> float:
    """Median ms to merge f+1 shares back into one vector."""
    setup = derive_rng(seed, "bench-merge-vec", m, f)
    ctv = crypto.uniform_vector(keys.public, m, setup)
    shares = atss_split(
        ctv, f, keys, derive_rng(seed, "bench-merge-split", m, f), owner=1, round_no=1,
        peers=list(range(2, f + 2)),
    ).shares
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter()
        atss_merge(shares)
        samples.append(time.perf_counter() - t0)
    return _median_ms(samples)


def bench_round(
    cfg: RoundConfig,
    keys: KeyPair,
    reps: int,
    seed: int,
):
    """One protocol round, repeated: returns (median total ms, median
    plaintext-average ms, homomorphic-op count of one round)."""
    draw = derive_rng(seed, "bench-models")
    models = [
        ModelVector(tuple(draw.uniform(-1.0, 1.0) for _ in range(cfg.m)))
        for _ in range(cfg.n)
    ]
    counts = list(cfg.sample_counts)
    round_samples = []
    op_count = 0
    for rep in range(reps):
        net = Fabric()
        clients, server = build_parties(cfg, keys, net)
        for client, model in zip(clients, models):
            client.local_model = model
        t0 = time.perf_counter()
        result = run_round(clients, server, cfg, net, rep + 1)
        round_samples.append(time.perf_counter() - t0)
        op_count = sum(
            result.op_counts.get(op, 0)
            for op in ("he_add", "he_neg", "he_scalar_mul")
        )
    plain_samples = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fedavg_oracle(models, counts)
        plain_samples.append(time.perf_counter() - t0)
    return _median_ms(round_samples), _median_ms(plain_samples), op_count


def collect_bench(
    *,
    backend: str,
    key_bits: int,
    n: int,
    f: int,
    m: int,
    scale: int,
    seed: int,
    reps: int = 5,
    m_sweep: Optional[List[int]] = None,
) -> List[dict]:
    """Gather all bench rows for one configuration."""
    keys = crypto.keygen(key_bits, derive_rng(seed, "bench-keys").getrandbits(64), backend)
    codec = FixedPointCodec(scale, keys.public.ring_size)
    sweep = m_sweep if m_sweep is not None else [m, 2 * m]
    rows: List[dict] = []

    def row(section, op, mm, reps_, value, unit):
        rows.append(
            {
                "section": section,
                "op": op,
                "backend": backend,
                "n": n,
                "f": f,
                "m": mm,
                "reps": reps_,
                "value": value,
                "unit": unit,
            }
        )

    for mm in sweep:
        row("atss", "split", mm, reps, round(bench_split(keys, f, mm, reps, seed), 6), "ms")
        row("atss", "merge", mm, reps, round(bench_merge(keys, f, mm, reps, seed), 6), "ms")

    cfg = RoundConfig(
        n=n,
        f=f,
        m=m,
        sample_counts=tuple([100] * n),
        codec=codec,
        seed=seed,
    )
    total_ms, plain_ms, he_ops = bench_round(cfg, keys, reps, seed)
    row("round", "encrypted_total", m, reps, round(total_ms, 6), "ms")
    row("round", "plaintext_average", m, reps, round(plain_ms, 6), "ms")
    row("round", "he_ops", m, reps, he_ops, "count")
    ratio = total_ms / plain_ms if plain_ms > 0 else float("inf")
    row("ratio", "encrypted_vs_plaintext", m, reps, round(ratio, 3), "x")
    return rows
