"""Command-line interface.

Four subcommands drive the library end to end:

* ``skefl run``    — federated training over the encrypted aggregation pipeline
* ``skefl attack`` — collusion reconstruction attempt + distinguishing game
* ``skefl verify`` — share-holding audit (optionally demonstrating tamper/drop)
* ``skefl bench``  — timing and operation-count benchmarks

Configuration comes from defaults, an optional JSON ``--config`` file, and
flag overrides, in that order; the seed falls back to the ``SKEFL_SEED``
environment variable.  With ``--out DIR`` every command writes delimited
artifacts (CSV/JSON/JSONL) plus PNG figures into DIR; without it, results go
to stdout only.  Exit codes: 0 success, 1 a security/verification check
failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from typing import List, Optional

from . import crypto, report
from .adversary import distinguishing_game, staged_attack_round
from .bench import BENCH_COLUMNS, collect_bench
from .crypto import FixedPointCodec
from .errors import ConfigurationError, SkeflError
from .protocol import (
    RoundConfig,
    build_parties,
    run_federated,
    run_round,
    verify_model,
)
from .rng import derive_rng, derive_seed
from .simnet import Fabric
from .workload import ModelVector, TrainParams, make_task

SAMPLES_PER_CLIENT = 200

CONFIG_FIELDS = (
    "n",
    "f",
    "m",
    "rounds",
    "backend",
    "key_bits",
    "scale",
    "seed",
    "alpha",
    "client_fraction",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Canonical experiment parameters; hashable for reproducibility."""

    n: int = 5
    f: int = 2
    m: int = 6
    rounds: int = 3
    backend: str = "mock"
    key_bits: int = 64
    scale: int = 10**6
    seed: int = 0
    alpha: float = 1.0
    client_fraction: float = 1.0

    def validate(self) -> "ExperimentConfig":
        if self.n < 1 or self.m < 1 or self.rounds < 1:
            raise ConfigurationError("n, m and rounds must be positive")
        if self.f < 0 or 2 * self.f + 1 > self.n:
            raise ConfigurationError(f"threshold violated: need 2f+1 <= n, got f={self.f}, n={self.n}")
        if self.backend not in ("paillier", "mock"):
            raise ConfigurationError(f"unknown backend {self.backend!r}")
        if self.backend == "paillier" and self.key_bits not in crypto.PAILLIER_KEY_BITS:
            raise ConfigurationError(
                f"paillier key_bits must be one of {crypto.PAILLIER_KEY_BITS}"
            )
        if self.backend == "mock" and self.key_bits < 8:
            raise ConfigurationError("mock key_bits must be >= 8")
        if self.scale < 2:
            raise ConfigurationError("scale must be >= 2")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError("alpha must lie in [0, 1]")
        if not 0.0 < self.client_fraction <= 1.0:
            raise ConfigurationError("client_fraction must lie in (0, 1]")
        return self

    def canonical_json(self) -> str:
        doc = {k: getattr(self, k) for k in CONFIG_FIELDS}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:12]


def load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError(f"config file {path} must hold a JSON object")
    unknown = set(doc) - set(CONFIG_FIELDS)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    return doc


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults < config file < CLI flags; seed also falls back to SKEFL_SEED."""
    merged = {}
    if args.config:
        merged.update(load_config_file(args.config))
    for field in CONFIG_FIELDS:
        value = getattr(args, field, None)
        if value is not None:
            merged[field] = value
    if "seed" not in merged:
        merged["seed"] = int(os.environ.get("SKEFL_SEED", "0"))
    return ExperimentConfig(**merged).validate()


def _setup(config: ExperimentConfig):
    keys = crypto.keygen(config.key_bits, derive_seed(config.seed, "keygen"), config.backend)
    codec = FixedPointCodec(config.scale, keys.public.ring_size)
    return keys, codec


def _ensure_out(out: Optional[str]) -> Optional[str]:
    if out is not None:
        os.makedirs(out, exist_ok=True)
    return out


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _write_json(path: str, doc) -> None:
    _write_text(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _write_csv_rows(path: str, rows: List[dict], columns: List[str]) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(str(row[c]) for c in columns))
    _write_text(path, "\n".join(lines) + "\n")


def _say(quiet: bool, text: str) -> None:
    if not quiet:
        print(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_run(config: ExperimentConfig, out: Optional[str], quiet: bool) -> int:
    if config.m < 2:
        raise ConfigurationError("run needs m >= 2 (features + bias)")
    keys, codec = _setup(config)
    task = make_task(
        config.n,
        SAMPLES_PER_CLIENT,
        dim=config.m - 1,
        alpha=config.alpha,
        seed=config.seed,
    )
    cfg = RoundConfig(
        n=config.n,
        f=config.f,
        m=config.m,
        sample_counts=task.sample_counts,
        codec=codec,
        seed=config.seed,
    )
    fr = run_federated(
        task,
        cfg,
        keys,
        config.rounds,
        TrainParams(),
        client_fraction=config.client_fraction,
    )
    _say(quiet, f"config {config.config_hash()}  backend={config.backend} n={config.n} f={config.f} m={config.m}")
    for result, acc in zip(fr.round_results, fr.holdout_accuracy):
        c = result.msg_counts
        _say(
            quiet,
            f"round {result.round_no}: accuracy={acc:.4f} "
            f"msgs(c2c={c['c2c']}, c2s={c['c2s']}, s2c={c['s2c']}) bytes={result.bytes_total}",
        )
    _say(quiet, f"final holdout accuracy: {fr.holdout_accuracy[-1]:.4f}")
    if out := _ensure_out(out):
        lines = [json.dumps(r.to_json(), sort_keys=True) for r in fr.round_results]
        _write_text(os.path.join(out, "rounds.jsonl"), "\n".join(lines) + "\n")
        _write_json(
            os.path.join(out, "summary.json"),
            {
                "config": json.loads(config.canonical_json()),
                "config_hash": config.config_hash(),
                "rounds": config.rounds,
                "holdout_accuracy": fr.holdout_accuracy,
                "final_global_model": list(fr.trajectory[-1].values),
                "total_messages": sum(sum(r.msg_counts.values()) for r in fr.round_results),
                "total_bytes": sum(r.bytes_total for r in fr.round_results),
            },
        )
        _write_text(os.path.join(out, "transcript.csv"), fr.net.export_csv())
        _write_text(os.path.join(out, "transcript.json"), fr.net.export_json())
        report.render_trajectory(fr.round_results, fr.holdout_accuracy, os.path.join(out, "trajectory.png"))
        report.render_traffic(fr.round_results, os.path.join(out, "traffic.png"))
        _say(quiet, f"artifacts written to {out}")
    return 0


def cmd_attack(config: ExperimentConfig, out: Optional[str], quiet: bool, trials: int) -> int:
    keys, codec = _setup(config)
    cfg = RoundConfig(
        n=config.n,
        f=config.f,
        m=config.m,
        sample_counts=tuple([SAMPLES_PER_CLIENT] * config.n),
        codec=codec,
        seed=config.seed,
    )
    colluders = tuple(range(config.n - config.f + 1, config.n + 1)) if config.f else ()
    outcome, _, _ = staged_attack_round(cfg, keys, colluders, victim=1)
    game = distinguishing_game(cfg, keys, trials, config.seed, colluders=colluders)
    sanity = distinguishing_game(
        cfg,
        keys,
        max(50, trials // 20),
        derive_seed(config.seed, "sanity"),
        colluders=colluders,
        garbled=False,
    )
    _say(quiet, f"coalition: server + clients {sorted(colluders)} against victim 1")
    _say(
        quiet,
        f"reconstruction: {outcome.shares_found}/{outcome.shares_needed} shares, "
        f"complete={outcome.complete}, exact={outcome.exact}",
    )
    _say(
        quiet,
        f"distinguishing game: accuracy={game.accuracy:.4f} over {game.trials} trials "
        f"(chance band half-width {game.bound:.4f}) -> {'PASS' if game.passed else 'FAIL'}",
    )
    _say(quiet, f"garbling-off control: accuracy={sanity.accuracy:.4f} (expected ~1.0)")
    secure = game.passed and not outcome.exact and sanity.accuracy >= 0.99
    if out := _ensure_out(out):
        doc = {
            "config": json.loads(config.canonical_json()),
            "config_hash": config.config_hash(),
            "colluders": sorted(colluders),
            "victim": 1,
            "reconstruction": {
                "shares_found": outcome.shares_found,
                "shares_needed": outcome.shares_needed,
                "complete": outcome.complete,
                "exact": outcome.exact,
            },
            "game": game.to_json(),
            "garbling_off_control": sanity.to_json(),
            "secure": secure,
        }
        _write_json(os.path.join(out, "attack.json"), doc)
        report.render_attack(game.to_json(), sanity.to_json(), os.path.join(out, "attack.png"))
        _say(quiet, f"artifacts written to {out}")
    return 0 if secure else 1


def _first_foreign_share(clients):
    for client in clients:
        for (owner, round_no), vec in client.inbox_shares.items():
            if owner != client.index:
                return client, (owner, round_no), vec
    raise ConfigurationError("no foreign shares held (f=0): nothing to tamper with")


def cmd_verify(
    config: ExperimentConfig,
    out: Optional[str],
    quiet: bool,
    tamper: bool,
    drop: bool,
) -> int:
    keys, codec = _setup(config)
    cfg = RoundConfig(
        n=config.n,
        f=config.f,
        m=config.m,
        sample_counts=tuple([SAMPLES_PER_CLIENT] * config.n),
        codec=codec,
        seed=config.seed,
    )
    net = Fabric()
    clients, server = build_parties(cfg, keys, net)
    for client in clients:
        draw = derive_rng(config.seed, "verify-model", client.index)
        client.local_model = ModelVector(tuple(draw.uniform(-1.0, 1.0) for _ in range(cfg.m)))
    run_round(clients, server, cfg, net, 1)
    tampered_with = None
    if tamper:
        holder, slot, vec = _first_foreign_share(clients)
        flipped = crypto.Ciphertext(vec[0].value ^ 1, vec[0].key)
        holder.inbox_shares[slot] = crypto.CiphertextVector((flipped,) + vec.elements[1:])
        tampered_with = {"holder": holder.index, "owner": slot[0]}
    if drop:
        holder, slot, _ = _first_foreign_share(clients)
        del holder.inbox_shares[slot]
        tampered_with = {"holder": holder.index, "owner": slot[0], "dropped": True}
    results = {}
    for client in clients:
        results[client.index] = verify_model(client, clients, net, 1)
        _say(quiet, f"owner {client.index}: {'ok' if results[client.index] else 'MISMATCH'}")
    all_ok = all(v == 1 for v in results.values())
    if out := _ensure_out(out):
        _write_json(
            os.path.join(out, "verify.json"),
            {
                "config": json.loads(config.canonical_json()),
                "config_hash": config.config_hash(),
                "results": {str(k): v for k, v in results.items()},
                "tampered": tampered_with,
                "all_ok": all_ok,
            },
        )
        _say(quiet, f"artifacts written to {out}")
    return 0 if all_ok else 1


def cmd_bench(
    config: ExperimentConfig,
    out: Optional[str],
    quiet: bool,
    reps: int,
    sweep: Optional[List[int]],
) -> int:
    rows = collect_bench(
        backend=config.backend,
        key_bits=config.key_bits,
        n=config.n,
        f=config.f,
        m=config.m,
        scale=config.scale,
        seed=config.seed,
        reps=reps,
        m_sweep=sweep,
    )
    header = "  ".join(f"{c:>10}" for c in BENCH_COLUMNS)
    _say(quiet, header)
    for row in rows:
        _say(quiet, "  ".join(f"{str(row[c]):>10}" for c in BENCH_COLUMNS))
    if out := _ensure_out(out):
        _write_csv_rows(os.path.join(out, "bench.csv"), rows, BENCH_COLUMNS)
        report.render_bench(rows, os.path.join(out, "bench.png"))
        _say(quiet, f"artifacts written to {out}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skefl",
        description="Secure federated aggregation over homomorphic ciphertext shares.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="directory for CSV/JSON artifacts and figures")
    common.add_argument("--quiet", action="store_true", help="suppress stdout report")
    common.add_argument("--n", type=int, help="number of clients")
    common.add_argument("--f", type=int, help="collusion threshold (2f+1 <= n)")
    common.add_argument("--m", type=int, help="model vector length")
    common.add_argument("--rounds", type=int, help="training rounds")
    common.add_argument("--backend", choices=["paillier", "mock"], help="cipher backend")
    common.add_argument("--key-bits", dest="key_bits", type=int, help="key size in bits")
    common.add_argument("--scale", type=int, help="fixed-point scale")
    common.add_argument("--seed", type=int, help="root seed (default: $SKEFL_SEED or 0)")
    common.add_argument("--alpha", type=float, help="data heterogeneity in [0,1]; 1 = IID")
    common.add_argument(
        "--client-fraction",
        dest="client_fraction",
        type=float,
        help="per-round participation fraction (engages only when n > 10)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="federated training run")
    p_attack = sub.add_parser("attack", parents=[common], help="collusion attack harness")
    p_attack.add_argument("--trials", type=int, default=400, help="distinguishing-game trials")
    p_verify = sub.add_parser("verify", parents=[common], help="share-holding audit")
    p_verify.add_argument("--tamper", action="store_true", help="corrupt one held share first")
    p_verify.add_argument("--drop", action="store_true", help="discard one held share first")
    p_bench = sub.add_parser("bench", parents=[common], help="benchmarks")
    p_bench.add_argument("--reps", type=int, default=5, help="repetitions per measurement")
    p_bench.add_argument(
        "--sweep",
        help="comma-separated vector lengths for the split/merge sweep",
    )
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        if args.command == "run":
            return cmd_run(config, args.out, args.quiet)
        if args.command == "attack":
            return cmd_attack(config, args.out, args.quiet, args.trials)
        if args.command == "verify":
            return cmd_verify(config, args.out, args.quiet, args.tamper, args.drop)
        if args.command == "bench":
            sweep = [int(x) for x in args.sweep.split(",")] if args.sweep else None
            return cmd_bench(config, args.out, args.quiet, args.reps, sweep)
        raise ConfigurationError(f"unknown command {args.command!r}")
    except SkeflError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
